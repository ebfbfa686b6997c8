//! V2000 MOLfile writer.

use std::fmt::Write;

use super::{BondKind, MolGraph};
use crate::error::{Error, Result};

/// Coordinate length of one drawn bond in the written file.
pub const MOLFILE_BOND_LENGTH: f64 = 1.5;

/// Writes `g` as a V2000 MOLfile. Pixel positions are scaled so that
/// `bond_length_px` maps to [`MOLFILE_BOND_LENGTH`], with y pointing up;
/// atoms without a position sit at the origin. Wedges get stereo flag 1,
/// hashes 6, both listed from the narrow end.
pub fn to_molfile(g: &MolGraph, bond_length_px: f64) -> Result<String> {
    let v = g.validate();
    if !v.is_empty() {
        return Err(Error::InvalidGraph(v));
    }
    if !(bond_length_px > 0.0) {
        return Err(Error::Format(format!("bond length {bond_length_px} must be positive")));
    }
    if g.atoms.len() > 999 || g.bonds.len() > 999 {
        return Err(Error::Format("V2000 holds at most 999 atoms and bonds".into()));
    }
    let scale = MOLFILE_BOND_LENGTH / bond_length_px;
    let mut out = String::new();
    out.push('\n');
    let _ = writeln!(out, "  {:<8}{:10}2D", "ocsr", "");
    out.push('\n');
    let _ = writeln!(out, "{:3}{:3}  0  0  0  0  0  0  0  0999 V2000", g.atoms.len(), g.bonds.len());
    for a in &g.atoms {
        let (x, y) = match a.pos {
            Some(p) => (p.col as f64 * scale + 0.0, -(p.row as f64) * scale + 0.0),
            None => (0.0, 0.0),
        };
        let _ = writeln!(
            out,
            "{x:10.4}{y:10.4}{:10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0",
            0.0,
            a.element.symbol()
        );
    }
    for b in &g.bonds {
        let stereo = match b.kind {
            BondKind::Wedge => 1,
            BondKind::Hash => 6,
            _ => 0,
        };
        let _ = writeln!(out, "{:3}{:3}{:3}{:3}  0  0  0", b.a + 1, b.b + 1, b.kind.order(), stereo);
    }
    let charged: Vec<(usize, i8)> = g
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| a.charge != 0)
        .map(|(i, a)| (i + 1, a.charge))
        .collect();
    for chunk in charged.chunks(8) {
        let _ = write!(out, "M  CHG{:3}", chunk.len());
        for (i, c) in chunk {
            let _ = write!(out, " {i:3} {c:3}");
        }
        out.push('\n');
    }
    out.push_str("M  END\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{Atom, Bond, Element};

    #[test]
    fn ethanol_lines() {
        let g = MolGraph::new(
            vec![Atom::at(Element::C, 0, 0), Atom::at(Element::C, 0, 40), Atom::at(Element::O, 20, 75)],
            vec![Bond::new(0, 1, BondKind::Single), Bond::new(1, 2, BondKind::Single)],
        );
        let text = to_molfile(&g, 40.0).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "  ocsr              2D");
        assert_eq!(lines[3], "  3  2  0  0  0  0  0  0  0  0999 V2000");
        assert_eq!(lines[4], "    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0");
        assert_eq!(lines[5], "    1.5000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0");
        assert_eq!(lines[6], "    2.8125   -0.7500    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0");
        assert_eq!(lines[7], "  1  2  1  0  0  0  0");
        assert_eq!(lines.last(), Some(&"M  END"));
    }

    #[test]
    fn wedge_and_charge() {
        let g = MolGraph::new(
            vec![Atom::at(Element::C, 0, 0), Atom::at(Element::N, 0, 40).with_charge(1)],
            vec![Bond::new(1, 0, BondKind::Wedge)],
        );
        let text = to_molfile(&g, 40.0).unwrap();
        assert!(text.contains("\n  2  1  1  1  0  0  0\n"));
        assert!(text.contains("\nM  CHG  1   2   1\n"));
    }

    #[test]
    fn refuses_invalid() {
        let g = MolGraph::new(vec![Atom::new(Element::C), Atom::new(Element::C)], vec![]);
        assert!(matches!(to_molfile(&g, 40.0), Err(Error::InvalidGraph(_))));
    }
}
