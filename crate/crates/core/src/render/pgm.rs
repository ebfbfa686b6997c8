//! Binary PGM (P5) with maxval 255. Images are stored as gray levels
//! `255 * (1 - ink)`, label maps as raw class bytes.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::Grid;

use super::Image;

fn write_p5(mut w: impl Write, rows: usize, cols: usize, bytes: &[u8]) -> Result<()> {
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_p5(mut r: impl Read) -> Result<Grid<u8>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut pos = 0;
    let mut fields = Vec::new();
    if buf.get(0..2) != Some(b"P5") {
        return Err(Error::Format("not a binary PGM (missing P5 magic)".into()));
    }
    pos += 2;
    while fields.len() < 3 {
        match buf.get(pos) {
            None => return Err(Error::Format("truncated PGM header".into())),
            Some(b'#') => {
                while buf.get(pos).is_some_and(|&b| b != b'\n') {
                    pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b) if b.is_ascii_digit() => {
                let start = pos;
                while buf.get(pos).is_some_and(u8::is_ascii_digit) {
                    pos += 1;
                }
                let text = std::str::from_utf8(&buf[start..pos]).expect("digits");
                fields.push(text.parse::<usize>().map_err(|e| Error::Format(format!("PGM header: {e}")))?);
            }
            Some(b) => return Err(Error::Format(format!("unexpected byte {b:#04x} in PGM header"))),
        }
    }
    if !buf.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("PGM header must end with whitespace".into()));
    }
    pos += 1;
    let (cols, rows, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(Error::Format(format!("PGM maxval {maxval} unsupported (expected 255)")));
    }
    let data = buf.get(pos..pos + rows * cols).ok_or_else(|| Error::Format("truncated PGM pixel data".into()))?;
    Grid::from_vec(rows, cols, data.to_vec())
}

pub fn write_pgm_image(w: impl Write, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8).collect();
    write_p5(w, img.rows(), img.cols(), &bytes)
}

pub fn read_pgm_image(r: impl Read) -> Result<Image> {
    Ok(read_p5(r)?.map(|&b| 1.0 - b as f32 / 255.0))
}

pub fn write_pgm_labels(w: impl Write, labels: &Grid<u8>) -> Result<()> {
    write_p5(w, labels.rows(), labels.cols(), labels.data())
}

pub fn read_pgm_labels(r: impl Read) -> Result<Grid<u8>> {
    read_p5(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_round_trip() {
        let img = Grid::from_vec(2, 3, vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm_image(&mut buf, &img).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 2\n255\n");
        assert_eq!(&buf[11..], &[255, 0, 255, 0, 0, 255]);
        assert_eq!(read_pgm_image(&buf[..]).unwrap(), img);
    }

    #[test]
    fn labels_with_comment() {
        let text = b"P5\n# made by hand\n2 1\n255\n\x03\x07";
        let g = read_pgm_labels(&text[..]).unwrap();
        assert_eq!(g.data(), &[3, 7]);
        assert!(read_pgm_labels(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(read_pgm_labels(&b"P5\n2 2\n255\n\x00"[..]).is_err());
    }
}
