//! Candidate generation and graph building.
//!
//! [`build_graph`] segments the image, finds atom candidates as centroids of
//! connected non-Empty regions in the atom map, classifies each candidate for
//! element and charge, then classifies every pair of accepted atoms closer
//! than twice the bond length. Anything a classifier calls Empty is dropped.
//!
//! A [`Recognizer`] supplies the segmentation and the three classifiers.
//! [`TrainedModel`] runs the networks; [`ReadoutModel`] answers from ground
//! truth label maps, reading each candidate's class off the labels under its
//! highlight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::molgraph::{Atom, Bond, BondKind, MolGraph, Pixel};
use crate::networks::{
    argmax, assemble_atom_input, assemble_bond_input, assemble_charge_input, window_origin, ClsNet, Geometry,
    SegNet, SegmentationMaps,
};
use crate::render::{Image, LabelMaps};
use crate::vocab::{BondClass, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomCandidate {
    pub position: Pixel,
    /// Pixels in the (merged) component.
    pub support: usize,
}

/// Indices into the accepted atom list, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BondCandidate {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
struct Component {
    sum: (f64, f64),
    support: usize,
}

impl Component {
    fn centroid(&self) -> (f64, f64) {
        (self.sum.0 / self.support as f64, self.sum.1 / self.support as f64)
    }
}

fn components(mask: &Grid<u8>) -> Vec<Component> {
    let (h, w) = mask.dims();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if seen[start] || mask.data()[start] == 0 {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Component { sum: (0.0, 0.0), support: 0 };
        while let Some(p) = stack.pop() {
            let (r, c) = ((p / w) as i64, (p % w) as i64);
            comp.sum.0 += r as f64;
            comp.sum.1 += c as f64;
            comp.support += 1;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let q = nr as usize * w + nc as usize;
                    if !seen[q] && mask.data()[q] != 0 {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Centroids of the 8-connected non-Empty regions of the atom label map.
/// Components whose centroids lie closer than `bond_length / 2` are merged
/// (transitively) into their support-weighted centroid. Sorted by position.
pub fn atom_candidates_from_labels(atoms: &Grid<u8>, bond_length: i32) -> Vec<AtomCandidate> {
    merge_components(&components(atoms), bond_length)
}

fn merge_components(comps: &[Component], bond_length: i32) -> Vec<AtomCandidate> {
    let r_merge = bond_length as f64 / 2.0;
    let mut parent: Vec<usize> = (0..comps.len()).collect();
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            let (a, b) = (comps[i].centroid(), comps[j].centroid());
            if ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() < r_merge {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut merged: Vec<Option<Component>> = (0..comps.len()).map(|_| None).collect();
    for (i, c) in comps.iter().enumerate() {
        let root = find(&mut parent, i);
        let m = merged[root].get_or_insert(Component { sum: (0.0, 0.0), support: 0 });
        m.sum.0 += c.sum.0;
        m.sum.1 += c.sum.1;
        m.support += c.support;
    }
    let mut out: Vec<AtomCandidate> = merged
        .into_iter()
        .flatten()
        .map(|c| {
            let (r, col) = c.centroid();
            AtomCandidate {
                position: Pixel::new(r.round() as i32, col.round() as i32),
                support: c.support,
            }
        })
        .collect();
    out.sort_by_key(|c| (c.position, c.support));
    out
}

/// Atom candidates from atom scores `[n_a, rows, cols]`, taking the per-pixel
/// argmax with ties going to Empty.
pub fn generate_atom_candidates(sa: &SegmentationMaps, bond_length: i32) -> Vec<AtomCandidate> {
    atom_candidates_from_labels(&sa.argmax().atoms, bond_length)
}

/// Every pair closer than `2 * bond_length`, lower index first.
pub fn generate_bond_candidates(nodes: &[Pixel], bond_length: i32) -> Vec<BondCandidate> {
    let limit = 2 * bond_length as i64;
    let mut out = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            if nodes[a].dist2(nodes[b]) < limit * limit {
                out.push(BondCandidate { a, b });
            }
        }
    }
    out
}

/// True iff the argmax is not the Empty class. Ties go to Empty.
pub fn is_not_empty(logits: &[f32]) -> bool {
    !logits.is_empty() && argmax(logits) != 0
}

/// Segmentation output in the three forms the classifiers consume.
#[derive(Debug, Clone)]
pub struct Segmented {
    pub scores: SegmentationMaps,
    pub probs: SegmentationMaps,
    pub labels: LabelMaps,
}

impl Segmented {
    pub fn new(scores: SegmentationMaps) -> Self {
        Segmented {
            probs: scores.probabilities(),
            labels: scores.argmax(),
            scores,
        }
    }
}

/// A classifier answer. `conflict` marks a stereo bond whose two halves
/// disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub logits: Vec<f32>,
    pub conflict: bool,
}

impl Readout {
    fn plain(logits: Vec<f32>) -> Self {
        Readout { logits, conflict: false }
    }

    fn one_hot(n: usize, class: usize) -> Self {
        let mut logits = vec![-10.0; n];
        logits[class] = 10.0;
        Readout::plain(logits)
    }
}

pub trait Recognizer {
    fn vocab(&self) -> &Vocabulary;
    fn geometry(&self) -> &Geometry;
    fn segment(&self, x: &Image) -> Result<SegmentationMaps>;
    fn classify_atom(&self, seg: &Segmented, x: &Image, at: Pixel) -> Result<Readout>;
    fn classify_charge(&self, seg: &Segmented, x: &Image, at: Pixel) -> Result<Readout>;
    fn classify_bond(&self, seg: &Segmented, x: &Image, pair: (Pixel, Pixel)) -> Result<Readout>;
}

/// The segmentation network and the three classifiers. The charge
/// classifier may be absent when the vocabulary has no charges.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub seg: SegNet,
    pub atom: ClsNet,
    pub bond: ClsNet,
    pub charge: Option<ClsNet>,
    pub geometry: Geometry,
}

impl TrainedModel {
    pub fn new(seg: SegNet, atom: ClsNet, bond: ClsNet, charge: Option<ClsNet>, geometry: Geometry) -> Result<Self> {
        let vocab = &seg.vocab;
        if &atom.vocab != vocab || &bond.vocab != vocab || charge.as_ref().is_some_and(|c| &c.vocab != vocab) {
            return Err(Error::Config("networks were trained on different vocabularies".into()));
        }
        if charge.is_none() && vocab.n_charges() > 1 {
            return Err(Error::Config("vocabulary has charges but no charge classifier was given".into()));
        }
        Ok(TrainedModel {
            seg,
            atom,
            bond,
            charge,
            geometry,
        })
    }
}

impl Recognizer for TrainedModel {
    fn vocab(&self) -> &Vocabulary {
        &self.seg.vocab
    }

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn segment(&self, x: &Image) -> Result<SegmentationMaps> {
        self.seg.forward(x)
    }

    fn classify_atom(&self, seg: &Segmented, x: &Image, at: Pixel) -> Result<Readout> {
        let input = assemble_atom_input(&seg.probs.atoms, x, at, &self.geometry)?;
        Ok(Readout::plain(self.atom.forward(&input)?))
    }

    fn classify_charge(&self, seg: &Segmented, x: &Image, at: Pixel) -> Result<Readout> {
        match &self.charge {
            Some(net) => {
                let input = assemble_charge_input(&seg.probs.charges, x, at, &self.geometry)?;
                Ok(Readout::plain(net.forward(&input)?))
            }
            None => Ok(Readout::plain(vec![0.0])),
        }
    }

    fn classify_bond(&self, seg: &Segmented, x: &Image, pair: (Pixel, Pixel)) -> Result<Readout> {
        let input = assemble_bond_input(&seg.probs.bonds, x, pair, &self.geometry)?;
        Ok(Readout::plain(self.bond.forward(&input)?))
    }
}

/// Oracle recognizer: segmentation is the one-hot encoding of the true
/// label maps and each classifier returns the majority label under its
/// highlight.
#[derive(Debug, Clone)]
pub struct ReadoutModel {
    pub maps: LabelMaps,
    pub vocab: Vocabulary,
    pub geometry: Geometry,
}

/// One-hot scores (+10 for the labeled class, -10 otherwise).
pub fn oracle_segmentation(maps: &LabelMaps, vocab: &Vocabulary) -> Result<SegmentationMaps> {
    SegmentationMaps::one_hot(maps, vocab)
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

fn disk_majority(labels: &Grid<u8>, n: usize, at: Pixel, radius: i32) -> usize {
    let mut counts = vec![0usize; n];
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            if dr * dr + dc * dc <= radius * radius {
                if let Some(&v) = labels.get((at.row + dr) as i64, (at.col + dc) as i64) {
                    counts[(v as usize).min(n - 1)] += 1;
                }
            }
        }
    }
    majority(&counts)
}

fn half_majorities(labels: &Grid<u8>, n: usize, (a, b): (Pixel, Pixel), width: i32) -> (usize, usize) {
    let mut first = vec![0usize; n];
    let mut second = vec![0usize; n];
    let (dr, dc) = ((b.row - a.row) as i64, (b.col - a.col) as i64);
    let len2 = dr * dr + dc * dc;
    let w = width as i64;
    for r in a.row.min(b.row) as i64 - w..=a.row.max(b.row) as i64 + w {
        for c in a.col.min(b.col) as i64 - w..=a.col.max(b.col) as i64 + w {
            let Some(&v) = labels.get(r, c) else { continue };
            let (pr, pc) = (r - a.row as i64, c - a.col as i64);
            let dot = pr * dr + pc * dc;
            let cross = pr * dc - pc * dr;
            if len2 == 0 || dot < 0 || dot > len2 || 4 * cross * cross >= w * w * len2 {
                continue;
            }
            let v = (v as usize).min(n - 1);
            if 2 * dot <= len2 {
                first[v] += 1;
            }
            if 2 * dot >= len2 {
                second[v] += 1;
            }
        }
    }
    (majority(&first), majority(&second))
}

impl ReadoutModel {
    pub fn new(maps: LabelMaps, vocab: &Vocabulary, geometry: Geometry) -> Self {
        ReadoutModel {
            maps,
            vocab: vocab.clone(),
            geometry,
        }
    }

    /// Combines the two half readouts. Matching plain classes pass through,
    /// a Begin/End pair of one stereo kind gives the class seen from the
    /// first atom, Empty on either side gives Empty and anything else is a
    /// conflict.
    fn combine(&self, first: usize, second: usize) -> Readout {
        let n = self.vocab.n_bonds();
        let class = |i| self.vocab.bond_class(i).unwrap_or(BondClass::Empty);
        let (c1, c2) = (class(first), class(second));
        if c1 == c2 && !c1.is_stereo() {
            return Readout::one_hot(n, first);
        }
        if c1 == BondClass::Empty || c2 == BondClass::Empty {
            return Readout::one_hot(n, 0);
        }
        let paired = matches!(
            (c1, c2),
            (BondClass::WedgeBegin, BondClass::WedgeEnd)
                | (BondClass::WedgeEnd, BondClass::WedgeBegin)
                | (BondClass::HashBegin, BondClass::HashEnd)
                | (BondClass::HashEnd, BondClass::HashBegin)
        );
        if paired {
            return Readout::one_hot(n, first);
        }
        let single = self.vocab.bond_index(BondClass::Single).unwrap_or(1);
        Readout {
            conflict: true,
            ..Readout::one_hot(n, single)
        }
    }
}

impl Recognizer for ReadoutModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn segment(&self, x: &Image) -> Result<SegmentationMaps> {
        if x.dims() != self.maps.dims() {
            return Err(Error::Shape(format!("image is {:?}, label maps are {:?}", x.dims(), self.maps.dims())));
        }
        oracle_segmentation(&self.maps, &self.vocab)
    }

    fn classify_atom(&self, seg: &Segmented, _x: &Image, at: Pixel) -> Result<Readout> {
        let n = self.vocab.n_atoms();
        Ok(Readout::one_hot(n, disk_majority(&seg.labels.atoms, n, at, self.geometry.atom_radius)))
    }

    fn classify_charge(&self, seg: &Segmented, _x: &Image, at: Pixel) -> Result<Readout> {
        let n = self.vocab.n_charges();
        Ok(Readout::one_hot(n, disk_majority(&seg.labels.charges, n, at, self.geometry.atom_radius)))
    }

    fn classify_bond(&self, seg: &Segmented, _x: &Image, pair: (Pixel, Pixel)) -> Result<Readout> {
        let n = self.vocab.n_bonds();
        let (first, second) = half_majorities(&seg.labels.bonds, n, pair, self.geometry.bond_width);
        Ok(self.combine(first, second))
    }
}

/// Image rectangle a classifier window covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub top: i64,
    pub left: i64,
    pub rows: usize,
    pub cols: usize,
}

fn window_at(center: Pixel, geom: &Geometry) -> Window {
    let cut = geom.cut();
    let (top, left) = window_origin(center, &cut);
    Window {
        top,
        left,
        rows: cut.k,
        cols: cut.l,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomProvenance {
    pub candidate: AtomCandidate,
    pub class: String,
    pub logits: Vec<f32>,
    pub charge_class: String,
    pub charge_logits: Vec<f32>,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondProvenance {
    /// Atom indices in highlight order.
    pub pair: (usize, usize),
    pub class: String,
    pub logits: Vec<f32>,
    pub window: Window,
    pub conflict: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub atoms: Vec<AtomProvenance>,
    pub bonds: Vec<BondProvenance>,
    /// Candidates the atom classifier rejected.
    pub rejected_atoms: Vec<AtomCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum Flag {
    EmptyGraph,
    StereoConflict { a: usize, b: usize },
    Invalid { violations: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub graph: MolGraph,
    pub provenance: Provenance,
    pub flags: Vec<Flag>,
}

impl Recognition {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Runs segmentation, atom/charge classification over atom candidates and
/// bond classification over candidate pairs of accepted atoms.
pub fn build_graph(x: &Image, model: &dyn Recognizer) -> Result<Recognition> {
    let vocab = model.vocab().clone();
    let geom = *model.geometry();
    let seg = Segmented::new(model.segment(x)?);
    let mut graph = MolGraph::default();
    let mut prov = Provenance::default();
    let mut flags = Vec::new();

    for cand in atom_candidates_from_labels(&seg.labels.atoms, geom.bond_length) {
        let a = model.classify_atom(&seg, x, cand.position)?;
        if !is_not_empty(&a.logits) {
            prov.rejected_atoms.push(cand);
            continue;
        }
        let c = model.classify_charge(&seg, x, cand.position)?;
        let ai = argmax(&a.logits);
        let ci = argmax(&c.logits);
        let element = vocab
            .atom_class(ai)
            .ok_or_else(|| Error::Shape(format!("atom class {ai} outside the vocabulary")))?;
        let charge = vocab.charge_value(ci).unwrap_or(0);
        graph
            .atoms
            .push(Atom::at(element, cand.position.row, cand.position.col).with_charge(charge));
        prov.atoms.push(AtomProvenance {
            candidate: cand,
            class: element.symbol().into(),
            logits: a.logits,
            charge_class: vocab.charge_names()[ci].clone(),
            charge_logits: c.logits,
            window: window_at(cand.position, &geom),
        });
    }

    let nodes: Vec<Pixel> = prov.atoms.iter().map(|p| p.candidate.position).collect();
    for BondCandidate { a, b } in generate_bond_candidates(&nodes, geom.bond_length) {
        let r = model.classify_bond(&seg, x, (nodes[a], nodes[b]))?;
        if !is_not_empty(&r.logits) {
            continue;
        }
        let bi = argmax(&r.logits);
        let class = vocab
            .bond_class(bi)
            .ok_or_else(|| Error::Shape(format!("bond class {bi} outside the vocabulary")))?;
        let (kind, first_is_begin) = class.to_bond().unwrap_or((BondKind::Single, true));
        if r.conflict {
            flags.push(Flag::StereoConflict { a, b });
        }
        let bond = if first_is_begin { Bond::new(a, b, kind) } else { Bond::new(b, a, kind) };
        graph.bonds.push(bond);
        prov.bonds.push(BondProvenance {
            pair: (a, b),
            class: class.name().into(),
            logits: r.logits,
            window: window_at(nodes[a].midpoint(nodes[b]), &geom),
            conflict: r.conflict,
        });
    }

    if graph.atoms.is_empty() {
        flags.push(Flag::EmptyGraph);
    } else {
        let violations = graph.validate();
        if !violations.is_empty() {
            flags.push(Flag::Invalid {
                violations: violations.iter().map(|v| v.to_string()).collect(),
            });
        }
    }
    Ok(Recognition {
        graph,
        provenance: prov,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{graph_equal, Element};
    use crate::networks::ClassifierKind;
    use crate::render::{render_labeled, RenderStyle};

    fn disk(g: &mut Grid<u8>, at: (i64, i64), r: i64, v: u8) {
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc <= r * r {
                    g.set(at.0 + dr, at.1 + dc, v);
                }
            }
        }
    }

    #[test]
    fn single_and_separate_disks() {
        let mut g = Grid::filled(64, 96, 0u8);
        disk(&mut g, (10, 10), 3, 1);
        let c = atom_candidates_from_labels(&g, 16);
        assert_eq!(c, vec![AtomCandidate { position: Pixel::new(10, 10), support: 29 }]);
        disk(&mut g, (10, 58), 3, 2);
        assert_eq!(atom_candidates_from_labels(&g, 16).len(), 2);
    }

    #[test]
    fn close_components_merge() {
        let mut g = Grid::filled(40, 40, 0u8);
        disk(&mut g, (20, 10), 2, 1);
        disk(&mut g, (20, 16), 2, 1);
        let c = atom_candidates_from_labels(&g, 16);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].position, Pixel::new(20, 13));
        assert_eq!(c[0].support, 26);
        let c = atom_candidates_from_labels(&g, 12);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn diagonal_pixels_connect() {
        let mut g = Grid::filled(8, 8, 0u8);
        g.set(2, 2, 1);
        g.set(3, 3, 1);
        g.set(5, 1, 1);
        let comps = components(&g);
        assert_eq!(comps.iter().map(|c| c.support).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn bond_candidate_boundary() {
        let nodes = [Pixel::new(0, 0), Pixel::new(0, 16), Pixel::new(0, 32), Pixel::new(0, 47)];
        let pairs: Vec<(usize, usize)> = generate_bond_candidates(&nodes, 16).into_iter().map(|c| (c.a, c.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn empty_tie_break() {
        assert!(!is_not_empty(&[2.0, 1.0, 0.0]));
        assert!(!is_not_empty(&[1.0, 1.0, 0.0]));
        assert!(is_not_empty(&[0.0, 1.0, 0.0]));
    }

    fn oracle(g: &MolGraph, style: u8, bl: i32, vocab: &Vocabulary) -> (Recognition, MolGraph) {
        let st = RenderStyle::preset(style, bl).unwrap();
        let li = render_labeled(g, &st, vocab, (128, 128)).unwrap();
        let model = ReadoutModel::new(li.maps.clone(), vocab, Geometry::from_style(&st));
        (build_graph(&li.x, &model).unwrap(), li.truth)
    }

    #[test]
    fn oracle_recovers_stereo_and_charge() {
        let v = Vocabulary::default();
        let g = MolGraph::new(
            vec![
                Atom::at(Element::C, 64, 30),
                Atom::at(Element::C, 64, 60),
                Atom::at(Element::N, 40, 80).with_charge(1),
                Atom::at(Element::O, 88, 80),
            ],
            vec![
                Bond::new(1, 0, BondKind::Wedge),
                Bond::new(1, 2, BondKind::Single),
                Bond::new(3, 1, BondKind::Hash),
            ],
        );
        for style in 1..=3 {
            let (rec, truth) = oracle(&g, style, 30, &v);
            let m = graph_equal(&rec.graph, &truth, 1.0);
            assert!(m.equal, "style {style}: {:?}", m.diff);
            assert!(rec.flags.is_empty());
            assert_eq!(rec.provenance.atoms.len(), 4);
        }
    }

    #[test]
    fn blank_image_is_flagged() {
        let v = Vocabulary::small();
        let st = RenderStyle::preset(1, 24).unwrap();
        let model = ReadoutModel::new(LabelMaps::empty(64, 64), &v, Geometry::from_style(&st));
        let rec = build_graph(&Grid::filled(64, 64, 0.0), &model).unwrap();
        assert!(rec.graph.atoms.is_empty());
        assert_eq!(rec.flags, vec![Flag::EmptyGraph]);
        let seg = oracle_segmentation(&LabelMaps::empty(64, 64), &v).unwrap();
        assert_eq!(seg.argmax(), LabelMaps::empty(64, 64));
    }

    #[test]
    fn conflicting_halves_demote() {
        let v = Vocabulary::default();
        let st = RenderStyle::preset(1, 24).unwrap();
        let m = ReadoutModel::new(LabelMaps::empty(8, 8), &v, Geometry::from_style(&st));
        let wb = v.bond_index(BondClass::WedgeBegin).unwrap();
        let we = v.bond_index(BondClass::WedgeEnd).unwrap();
        let single = v.bond_index(BondClass::Single).unwrap();
        assert_eq!(argmax(&m.combine(wb, we).logits), wb);
        assert_eq!(argmax(&m.combine(we, wb).logits), we);
        let bad = m.combine(wb, wb);
        assert!(bad.conflict);
        assert_eq!(argmax(&bad.logits), single);
        assert_eq!(argmax(&m.combine(single, 0).logits), 0);
    }

    #[test]
    fn trained_model_runs_end_to_end() {
        let v = Vocabulary::small();
        let st = RenderStyle::preset(1, 24).unwrap();
        let geom = Geometry::from_style(&st);
        let model = TrainedModel::new(
            SegNet::new(&v, 2, 0).unwrap(),
            ClsNet::new(ClassifierKind::Atom, &v, 2, 1).unwrap(),
            ClsNet::new(ClassifierKind::Bond, &v, 2, 2).unwrap(),
            None,
            geom,
        )
        .unwrap();
        let g = MolGraph::new(
            vec![Atom::at(Element::C, 32, 20), Atom::at(Element::C, 32, 44)],
            vec![Bond::new(0, 1, BondKind::Single)],
        );
        let li = render_labeled(&g, &st, &v, (64, 64)).unwrap();
        let rec = build_graph(&li.x, &model).unwrap();
        for p in &rec.provenance.atoms {
            assert_eq!(p.logits.len(), v.n_atoms());
        }
    }

    use proptest::strategy::Strategy;

    proptest::proptest! {
        #[test]
        fn merge_ignores_discovery_order(
            raw in proptest::collection::vec((0u32..60, 0u32..60, 1usize..30), 1..12),
            order in proptest::strategy::Just((0..12).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let comps: Vec<Component> = raw
                .iter()
                .map(|&(r, c, n)| Component { sum: (r as f64 * n as f64, c as f64 * n as f64), support: n })
                .collect();
            let shuffled: Vec<Component> =
                order.iter().filter(|&&i| i < comps.len()).map(|&i| comps[i].clone()).collect();
            proptest::prop_assert_eq!(merge_components(&comps, 24), merge_components(&shuffled, 24));
        }
    }
}