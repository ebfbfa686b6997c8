//! Embedded 5x7 bitmap font covering the characters element labels and
//! charge marks need.

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

type Bitmap = [&'static str; GLYPH_H];

const C: Bitmap = [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."];
const N: Bitmap = ["#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"];
const O: Bitmap = [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."];
const S: Bitmap = [".####", "#....", "#....", ".###.", "....#", "....#", "####."];
const F: Bitmap = ["#####", "#....", "#....", "####.", "#....", "#....", "#...."];
const I: Bitmap = [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."];
const P: Bitmap = ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."];
const B: Bitmap = ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."];
const L: Bitmap = [".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."];
const R: Bitmap = [".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."];
const PLUS: Bitmap = [".....", "..#..", "..#..", "#####", "..#..", "..#..", "....."];
const MINUS: Bitmap = [".....", ".....", ".....", "#####", ".....", ".....", "....."];

fn bitmap(ch: char) -> Option<&'static Bitmap> {
    Some(match ch {
        'C' => &C,
        'N' => &N,
        'O' => &O,
        'S' => &S,
        'F' => &F,
        'I' => &I,
        'P' => &P,
        'B' => &B,
        'l' => &L,
        'r' => &R,
        '+' => &PLUS,
        '-' => &MINUS,
        _ => return None,
    })
}

/// Whether pixel `(row, col)` of character `ch` is ink. Unknown characters
/// are blank.
pub fn pixel(ch: char, row: usize, col: usize) -> bool {
    bitmap(ch).is_some_and(|b| row < GLYPH_H && col < GLYPH_W && b[row].as_bytes()[col] == b'#')
}

pub fn supports(ch: char) -> bool {
    bitmap(ch).is_some()
}

/// Size in pixels of `text` at `scale`, with one scaled column between
/// characters.
pub fn text_size(text: &str, scale: usize) -> (usize, usize) {
    let n = text.chars().count();
    if n == 0 {
        return (0, 0);
    }
    (GLYPH_H * scale, (n * GLYPH_W + (n - 1)) * scale)
}

/// Ink pixels of `text` with its top-left corner at `(row, col)`.
pub fn text_pixels(text: &str, scale: usize, row: i64, col: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for (k, ch) in text.chars().enumerate() {
        let left = col + (k * (GLYPH_W + 1) * scale) as i64;
        for gy in 0..GLYPH_H {
            for gx in 0..GLYPH_W {
                if !pixel(ch, gy, gx) {
                    continue;
                }
                for sy in 0..scale {
                    for sx in 0..scale {
                        out.push((row + (gy * scale + sy) as i64, left + (gx * scale + sx) as i64));
                    }
                }
            }
        }
    }
    out
}
