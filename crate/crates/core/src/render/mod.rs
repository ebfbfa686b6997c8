//! Deterministic depictions of molecular graphs with pixelwise labels.
//!
//! An [`Image`] stores ink density in `[0, 1]`: 0 is paper, 1 is ink. Label
//! maps hold class indices of a [`Vocabulary`], 0 being Empty.

mod dataset;
pub mod font;
mod pgm;
pub mod raster;

pub use dataset::{read_dataset, read_manifest, render_dataset, write_dataset, DatasetSpec, ItemRecord, Manifest};
pub use pgm::{read_pgm_image, read_pgm_labels, write_pgm_image, write_pgm_labels};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::molgraph::{Atom, BondKind, MolGraph, Pixel};
use crate::vocab::{BondClass, Vocabulary};
use raster::{Point, Rect};

pub type Image = Grid<f32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RenderStyle {
    pub style_id: u8,
    pub bond_length: i32,
    pub line_width: i32,
    /// Distance between the center lines of a double bond.
    pub double_bond_gap: i32,
    pub glyph_scale: i32,
    pub wedge_max_width: i32,
    pub hash_count: usize,
}

impl RenderStyle {
    /// Style 1 is thin with small glyphs, style 2 medium with wide double
    /// bonds, style 3 bold with large glyphs.
    pub fn preset(style_id: u8, bond_length: i32) -> Result<Self> {
        let bl = bond_length;
        let (lw, gap, glyph, wedge, hashes) = match style_id {
            1 => (1, bl / 8, bl / 20, bl / 6, 6),
            2 => (2, bl / 6, bl / 14, bl / 5, 7),
            3 => (3, bl / 5, bl / 12, bl / 4, 5),
            _ => return Err(Error::Render(format!("unknown style {style_id} (expected 1, 2 or 3)"))),
        };
        let style = RenderStyle {
            style_id,
            bond_length,
            line_width: lw,
            double_bond_gap: gap.max(lw + 2),
            glyph_scale: glyph.max(1),
            wedge_max_width: wedge.max(2 * lw + 2),
            hash_count: hashes,
        };
        style.validate()?;
        Ok(style)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bond_length < 16 {
            return Err(Error::Render(format!("bond length {} below 16", self.bond_length)));
        }
        if self.line_width < 1 || self.glyph_scale < 1 || self.hash_count < 2 {
            return Err(Error::Render("line width, glyph scale and hash count must be positive".into()));
        }
        if self.double_bond_gap < self.line_width + 2 {
            return Err(Error::Render("double bond gap must leave visible paper between lines".into()));
        }
        if 2 * self.atom_radius() >= self.bond_length {
            return Err(Error::Render("atom label disks of bonded atoms would overlap".into()));
        }
        Ok(())
    }

    /// Radius of the atom and charge label disks.
    pub fn atom_radius(&self) -> i32 {
        3 * self.line_width
    }

    /// Width of the bond label rectangles.
    pub fn bond_label_width(&self) -> i32 {
        2 * self.line_width + 2
    }

    /// Margin every atom keeps from the canvas edge.
    pub fn margin(&self) -> i32 {
        self.bond_length / 2
    }

    fn glyph_origin(&self, text: &str, at: Pixel) -> (i64, i64, usize, usize) {
        let (h, w) = font::text_size(text, self.glyph_scale as usize);
        (at.row as i64 - (h / 2) as i64, at.col as i64 - (w / 2) as i64, h, w)
    }

    /// Ink box of an atom's label, `None` for neutral carbon.
    pub fn glyph_box(&self, atom: &Atom) -> Option<Rect> {
        let pos = atom.pos?;
        if !atom.element.has_glyph(atom.charge) {
            return None;
        }
        let (top, left, h, w) = self.glyph_origin(atom.element.symbol(), pos);
        Some(Rect {
            top: top as f64,
            left: left as f64,
            bottom: (top + h as i64 - 1) as f64,
            right: (left + w as i64 - 1) as f64,
        })
    }
}

/// Pixelwise class indices for atoms, bonds and charges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMaps {
    pub atoms: Grid<u8>,
    pub bonds: Grid<u8>,
    pub charges: Grid<u8>,
}

impl LabelMaps {
    pub fn empty(rows: usize, cols: usize) -> Self {
        LabelMaps {
            atoms: Grid::filled(rows, cols, 0),
            bonds: Grid::filled(rows, cols, 0),
            charges: Grid::filled(rows, cols, 0),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.atoms.dims()
    }
}

/// A rendered molecule with its labels and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub x: Image,
    pub maps: LabelMaps,
    pub truth: MolGraph,
    pub style: RenderStyle,
}

fn point(p: Pixel) -> Point {
    (p.row as f64, p.col as f64)
}

fn check_layout(g: &MolGraph, style: &RenderStyle, canvas: (usize, usize)) -> Result<Vec<Pixel>> {
    style.validate()?;
    if canvas.0 == 0 || canvas.1 == 0 {
        return Err(Error::Render("canvas must be non-empty".into()));
    }
    let m = style.margin();
    let mut out = Vec::with_capacity(g.atoms.len());
    for (i, a) in g.atoms.iter().enumerate() {
        let p = a.pos.ok_or_else(|| Error::Render(format!("atom {i} has no position")))?;
        if p.row < m || p.col < m || p.row >= canvas.0 as i32 - m || p.col >= canvas.1 as i32 - m {
            return Err(Error::Render(format!(
                "atom {i} at ({}, {}) is within {m} px of the {}x{} canvas edge",
                p.row, p.col, canvas.0, canvas.1
            )));
        }
        out.push(p);
    }
    for (k, b) in g.bonds.iter().enumerate() {
        if b.a >= out.len() || b.b >= out.len() {
            return Err(Error::Render(format!("bond {k} has an endpoint outside the graph")));
        }
    }
    Ok(out)
}

fn charge_mark(charge: i8) -> &'static str {
    match charge {
        1 => "+",
        2 => "++",
        -1 => "-",
        -2 => "--",
        _ => "",
    }
}

/// Draws `g` on a blank `canvas` of `(rows, cols)`: bonds as lines (two or
/// three parallel lines for double and triple), wedges as filled triangles
/// widening away from the narrow atom, hashes as widening strokes,
/// heteroatoms and charged carbons as bitmap glyphs with bonds stopping short
/// of the glyph box, charges as superscript marks right of the glyph.
pub fn rasterize(g: &MolGraph, style: &RenderStyle, canvas: (usize, usize)) -> Result<Image> {
    let pos = check_layout(g, style, canvas)?;
    let mut img = Grid::filled(canvas.0, canvas.1, 0.0f32);
    let lw = style.line_width as f64;
    let pad = (style.line_width + 1) as f64;
    let boxes: Vec<Option<Rect>> = g.atoms.iter().map(|a| style.glyph_box(a).map(|r| r.padded(pad))).collect();

    for b in &g.bonds {
        let (pa, pb) = (point(pos[b.a]), point(pos[b.b]));
        let (ba, bb) = (boxes[b.a].as_ref(), boxes[b.b].as_ref());
        let len = pos[b.a].dist(pos[b.b]);
        if len == 0.0 {
            continue;
        }
        let n = (-(pb.1 - pa.1) / len, (pb.0 - pa.0) / len);
        let shifted = |o: f64| ((pa.0 + n.0 * o, pa.1 + n.1 * o), (pb.0 + n.0 * o, pb.1 + n.1 * o));
        let gap = style.double_bond_gap as f64;
        let offsets: &[f64] = match b.kind {
            BondKind::Single => &[0.0],
            BondKind::Double => &[-0.5, 0.5],
            BondKind::Triple => &[-1.0, 0.0, 1.0],
            BondKind::Wedge | BondKind::Hash => &[],
        };
        for &o in offsets {
            let (a2, b2) = shifted(o * gap);
            let range = raster::visible_range(a2, b2, ba, bb);
            raster::fill_partial(&mut img, a2, b2, range, lw);
        }
        let range = raster::visible_range(pa, pb, ba, bb);
        let wmax = style.wedge_max_width as f64;
        match b.kind {
            BondKind::Wedge => raster::fill_wedge(&mut img, pa, pb, range, lw, wmax),
            BondKind::Hash => raster::fill_hash(&mut img, pa, pb, range, style.hash_count, lw + 1.0, wmax, lw),
            _ => {}
        }
    }

    let scale = style.glyph_scale as usize;
    let mark_scale = (scale / 2).max(1);
    for (a, p) in g.atoms.iter().zip(&pos) {
        if !a.element.has_glyph(a.charge) {
            continue;
        }
        let (top, left, _, w) = style.glyph_origin(a.element.symbol(), *p);
        for (r, c) in font::text_pixels(a.element.symbol(), scale, top, left) {
            img.set(r, c, 1.0);
        }
        let mark = charge_mark(a.charge);
        if !mark.is_empty() {
            let (mh, _) = font::text_size(mark, mark_scale);
            let mt = top - (mh / 2) as i64;
            let ml = left + w as i64 + 1;
            for (r, c) in font::text_pixels(mark, mark_scale, mt, ml) {
                img.set(r, c, 1.0);
            }
        }
    }
    Ok(img)
}

/// Label maps of `g`: a disk of radius [`RenderStyle::atom_radius`] around
/// every atom (carbons included) in the atom and charge maps, and a
/// rectangle of width [`RenderStyle::bond_label_width`] from atom center to
/// atom center per bond, later bonds overwriting earlier ones. Stereo
/// rectangles are split at the midpoint into a Begin half at the narrow
/// atom and an End half.
pub fn label_maps(g: &MolGraph, style: &RenderStyle, vocab: &Vocabulary, canvas: (usize, usize)) -> Result<LabelMaps> {
    let pos = check_layout(g, style, canvas)?;
    let mut maps = LabelMaps::empty(canvas.0, canvas.1);
    let class = |c: BondClass| {
        vocab
            .bond_index(c)
            .map(|i| i as u8)
            .ok_or_else(|| Error::Render(format!("bond class {} not in vocabulary", c.name())))
    };
    let halfw = style.bond_label_width() as i64;
    for b in &g.bonds {
        let (a, e) = (pos[b.a], pos[b.b]);
        let (begin, end) = (class(BondClass::from_bond(b.kind, true))?, class(BondClass::from_bond(b.kind, false))?);
        let (dr, dc) = ((e.row - a.row) as i64, (e.col - a.col) as i64);
        let len2 = dr * dr + dc * dc;
        if len2 == 0 {
            continue;
        }
        let r0 = a.row.min(e.row) as i64 - halfw;
        let r1 = a.row.max(e.row) as i64 + halfw;
        let c0 = a.col.min(e.col) as i64 - halfw;
        let c1 = a.col.max(e.col) as i64 + halfw;
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (pr, pc) = (r - a.row as i64, c - a.col as i64);
                let dot = pr * dr + pc * dc;
                let cross = pr * dc - pc * dr;
                // |d| < width / 2, scaled by the bond length on both sides
                if dot < 0 || dot > len2 || 4 * cross * cross >= halfw * halfw * len2 {
                    continue;
                }
                let v = if 2 * dot < len2 { begin } else { end };
                maps.bonds.set(r, c, v);
            }
        }
    }
    let rad = style.atom_radius() as i64;
    for (i, (atom, p)) in g.atoms.iter().zip(&pos).enumerate() {
        let el = vocab
            .atom_index(atom.element)
            .ok_or_else(|| Error::Render(format!("atom {i}: element {} not in vocabulary", atom.element)))?;
        let ch = vocab
            .charge_index(atom.charge)
            .ok_or_else(|| Error::Render(format!("atom {i}: charge {} not in vocabulary", atom.charge)))?;
        for r in -rad..=rad {
            for c in -rad..=rad {
                if r * r + c * c <= rad * rad {
                    maps.atoms.set(p.row as i64 + r, p.col as i64 + c, el as u8);
                    maps.charges.set(p.row as i64 + r, p.col as i64 + c, ch as u8);
                }
            }
        }
    }
    Ok(maps)
}

/// Renders `g` together with its label maps.
pub fn render_labeled(g: &MolGraph, style: &RenderStyle, vocab: &Vocabulary, canvas: (usize, usize)) -> Result<LabeledImage> {
    let x = rasterize(g, style, canvas)?;
    let maps = label_maps(g, style, vocab, canvas)?;
    Ok(LabeledImage {
        x,
        maps,
        truth: g.clone(),
        style: *style,
    })
}

/// 1 where `v >= threshold`, else 0.
pub fn binarize(img: &Image, threshold: f32) -> Result<Image> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Render(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(img.map(|&v| if v >= threshold { 1.0 } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{Bond, Element};

    fn ink(img: &Image) -> usize {
        img.data().iter().filter(|&&v| v > 0.0).count()
    }

    fn cc(kind: BondKind) -> MolGraph {
        MolGraph::new(
            vec![Atom::at(Element::C, 64, 44), Atom::at(Element::C, 64, 84)],
            vec![Bond::new(0, 1, kind)],
        )
    }

    #[test]
    fn presets() {
        let s = RenderStyle::preset(1, 40).unwrap();
        assert_eq!((s.line_width, s.double_bond_gap, s.glyph_scale), (1, 5, 2));
        let s = RenderStyle::preset(2, 40).unwrap();
        assert_eq!((s.line_width, s.double_bond_gap, s.glyph_scale), (2, 6, 2));
        let s = RenderStyle::preset(3, 40).unwrap();
        assert_eq!((s.line_width, s.double_bond_gap, s.glyph_scale), (3, 8, 3));
        RenderStyle::preset(1, 16).unwrap();
        RenderStyle::preset(2, 16).unwrap();
        assert!(RenderStyle::preset(3, 18).is_err());
        RenderStyle::preset(3, 19).unwrap();
        assert!(RenderStyle::preset(1, 15).is_err());
        assert!(RenderStyle::preset(4, 40).is_err());
    }

    #[test]
    fn horizontal_single_bond_ink_count() {
        for id in 1..=3 {
            let s = RenderStyle::preset(id, 40).unwrap();
            let img = rasterize(&cc(BondKind::Single), &s, (128, 128)).unwrap();
            assert_eq!(ink(&img), 41 * s.line_width as usize);
        }
    }

    #[test]
    fn double_bond_has_paper_between_lines() {
        let s = RenderStyle::preset(1, 40).unwrap();
        let img = rasterize(&cc(BondKind::Double), &s, (128, 128)).unwrap();
        let column: Vec<bool> = (50..80).map(|r| img[(r, 64)] > 0.0).collect();
        let runs = column.windows(2).filter(|w| !w[0] && w[1]).count();
        assert_eq!(runs, 2);
    }

    #[test]
    fn bond_stays_out_of_glyph_box() {
        let s = RenderStyle::preset(1, 40).unwrap();
        let mut g = cc(BondKind::Single);
        g.atoms[1].element = Element::O;
        let img = rasterize(&g, &s, (128, 128)).unwrap();
        let bx = s.glyph_box(&g.atoms[1]).unwrap();
        let inside = |r: usize, c: usize| bx.contains((r as f64, c as f64));
        assert!((0..128).any(|r| (0..128).any(|c| inside(r, c) && img[(r, c)] > 0.0)));
        let bond_only = rasterize(&cc(BondKind::Single), &s, (128, 128)).unwrap();
        let mut glyph_free = img.clone();
        for r in 0..128 {
            for c in 0..128 {
                if inside(r, c) {
                    glyph_free[(r, c)] = 0.0;
                }
            }
        }
        // the bond stops short of the box, leaving at least one paper pixel
        let padded = bx.padded(1.0);
        for r in 0..128 {
            for c in 0..128 {
                if padded.contains((r as f64, c as f64)) && !inside(r, c) {
                    assert_eq!(img[(r, c)], 0.0, "({r}, {c})");
                }
            }
        }
        assert!(ink(&glyph_free) < ink(&bond_only));
    }

    #[test]
    fn overflow_is_an_error() {
        let s = RenderStyle::preset(1, 40).unwrap();
        let g = MolGraph::new(vec![Atom::at(Element::C, 5, 5), Atom::at(Element::C, 5, 45)], vec![Bond::new(0, 1, BondKind::Single)]);
        assert!(matches!(rasterize(&g, &s, (128, 128)), Err(Error::Render(_))));
    }

    #[test]
    fn labels_of_a_wedge() {
        let s = RenderStyle::preset(1, 40).unwrap();
        let v = Vocabulary::default();
        let g = cc(BondKind::Wedge);
        let m = label_maps(&g, &s, &v, (128, 128)).unwrap();
        let wb = v.bond_index(BondClass::WedgeBegin).unwrap() as u8;
        let we = v.bond_index(BondClass::WedgeEnd).unwrap() as u8;
        assert_eq!(m.bonds[(64, 50)], wb);
        assert_eq!(m.bonds[(64, 78)], we);
        assert_eq!(m.atoms[(64, 44)], 1);
        assert_eq!(m.atoms[(64, 44 + 3)], 1);
        assert_eq!(m.atoms[(64, 44 + 4)], 0);
        assert!(m.charges.data().iter().all(|&c| c == 0));
        // rectangle width 4: rows 62..=65 are not all covered, |d| < 2
        assert_eq!(m.bonds[(63, 64)], we);
        assert_eq!(m.bonds[(65, 63)], wb);
        assert_eq!(m.bonds[(62, 64)], 0);
    }

    #[test]
    fn binarize_rules() {
        let ramp = Grid::from_vec(1, 5, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(binarize(&ramp, 0.5).unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
        let s = RenderStyle::preset(2, 40).unwrap();
        let img = rasterize(&cc(BondKind::Triple), &s, (128, 128)).unwrap();
        assert_eq!(binarize(&img, 0.5).unwrap(), img);
        assert!(binarize(&img, 1.0).is_err());
    }
}
