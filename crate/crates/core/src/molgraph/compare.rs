//! Position-based comparison of two graphs.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::{BondKind, Element, MolGraph};

/// One disagreement between two graphs. Atom indices refer to the first
/// graph unless the variant says otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "diff", rename_all = "snake_case")]
pub enum GraphDiff {
    UnmatchedLeft { atom: usize },
    UnmatchedRight { atom: usize },
    Element { left: usize, right: usize, expected: Element, found: Element },
    Charge { left: usize, right: usize, expected: i8, found: i8 },
    /// Bond present in the first graph only.
    MissingBond { a: usize, b: usize, kind: BondKind },
    /// Bond present in the second graph only, given by second-graph indices.
    ExtraBond { a: usize, b: usize, kind: BondKind },
    /// Same atom pair, different type or stereo direction. `a` is the
    /// narrow end for stereo kinds.
    BondKind { a: usize, b: usize, expected: BondKind, found: BondKind },
}

impl fmt::Display for GraphDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphDiff::UnmatchedLeft { atom } => write!(f, "atom {atom} has no counterpart"),
            GraphDiff::UnmatchedRight { atom } => write!(f, "extra atom {atom} in second graph"),
            GraphDiff::Element { left, expected, found, .. } => {
                write!(f, "atom {left}: element {expected} vs {found}")
            }
            GraphDiff::Charge { left, expected, found, .. } => {
                write!(f, "atom {left}: charge {expected} vs {found}")
            }
            GraphDiff::MissingBond { a, b, kind } => write!(f, "bond {a}-{b} ({kind:?}) missing"),
            GraphDiff::ExtraBond { a, b, kind } => write!(f, "extra bond {a}-{b} ({kind:?})"),
            GraphDiff::BondKind { a, b, expected, found } => {
                write!(f, "bond {a}-{b}: {expected:?} vs {found:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphMatch {
    pub equal: bool,
    /// For each atom of the first graph, its counterpart in the second.
    pub mapping: Vec<Option<usize>>,
    pub diff: Vec<GraphDiff>,
}

/// Directed view of a bond: kind plus which endpoint is the narrow end.
fn oriented(kind: BondKind, a: usize) -> (BondKind, Option<usize>) {
    (kind, kind.is_stereo().then_some(a))
}

/// Matches atoms greedily by ascending distance (ties by index) within
/// `pos_tol` pixels, each atom used at most once, then compares elements,
/// charges and the induced bonds. Graphs without any positions are matched by
/// index.
pub fn graph_equal(g1: &MolGraph, g2: &MolGraph, pos_tol: f64) -> GraphMatch {
    let n1 = g1.atoms.len();
    let n2 = g2.atoms.len();
    let mut mapping: Vec<Option<usize>> = vec![None; n1];
    let mut taken = vec![false; n2];

    let unpositioned = g1.atoms.iter().chain(&g2.atoms).all(|a| a.pos.is_none());
    if unpositioned {
        for (i, m) in mapping.iter_mut().enumerate().take(n2) {
            *m = Some(i);
            taken[i] = true;
        }
    } else {
        let tol2 = pos_tol * pos_tol;
        let mut pairs: Vec<(i64, usize, usize)> = Vec::new();
        for (i, a) in g1.atoms.iter().enumerate() {
            let Some(pa) = a.pos else { continue };
            for (j, b) in g2.atoms.iter().enumerate() {
                let Some(pb) = b.pos else { continue };
                let d2 = pa.dist2(pb);
                if d2 as f64 <= tol2 {
                    pairs.push((d2, i, j));
                }
            }
        }
        pairs.sort_unstable();
        for (_, i, j) in pairs {
            if mapping[i].is_none() && !taken[j] {
                mapping[i] = Some(j);
                taken[j] = true;
            }
        }
    }

    let mut diff = Vec::new();
    for (i, m) in mapping.iter().enumerate() {
        match *m {
            None => diff.push(GraphDiff::UnmatchedLeft { atom: i }),
            Some(j) => {
                let (a, b) = (&g1.atoms[i], &g2.atoms[j]);
                if a.element != b.element {
                    diff.push(GraphDiff::Element { left: i, right: j, expected: a.element, found: b.element });
                }
                if a.charge != b.charge {
                    diff.push(GraphDiff::Charge { left: i, right: j, expected: a.charge, found: b.charge });
                }
            }
        }
    }
    for (j, t) in taken.iter().enumerate() {
        if !t {
            diff.push(GraphDiff::UnmatchedRight { atom: j });
        }
    }

    let mut inverse: Vec<Option<usize>> = vec![None; n2];
    for (i, m) in mapping.iter().enumerate() {
        if let Some(j) = m {
            inverse[*j] = Some(i);
        }
    }
    // second-graph bonds translated into first-graph indices
    let mut right: HashMap<(usize, usize), (BondKind, Option<usize>, usize)> = HashMap::new();
    for (k, b) in g2.bonds.iter().enumerate() {
        if let (Some(Some(a)), Some(Some(c))) = (inverse.get(b.a), inverse.get(b.b)) {
            let (kind, narrow) = oriented(b.kind, *a);
            right.insert((*a.min(c), *a.max(c)), (kind, narrow, k));
        }
    }
    let mut seen_right = vec![false; g2.bonds.len()];
    for b in &g1.bonds {
        let key = b.key();
        match right.get(&key) {
            Some(&(kind, narrow, k)) => {
                seen_right[k] = true;
                if (kind, narrow) != oriented(b.kind, b.a) {
                    let (a, c) = if b.kind.is_stereo() { (b.a, b.b) } else { key };
                    diff.push(GraphDiff::BondKind { a, b: c, expected: b.kind, found: kind });
                }
            }
            None => diff.push(GraphDiff::MissingBond { a: b.a, b: b.b, kind: b.kind }),
        }
    }
    for (k, b) in g2.bonds.iter().enumerate() {
        if !seen_right[k] {
            diff.push(GraphDiff::ExtraBond { a: b.a, b: b.b, kind: b.kind });
        }
    }

    GraphMatch {
        equal: diff.is_empty(),
        mapping,
        diff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{Atom, Bond};

    fn ethanol() -> MolGraph {
        MolGraph::new(
            vec![Atom::at(Element::C, 10, 10), Atom::at(Element::C, 10, 50), Atom::at(Element::O, 30, 80)],
            vec![Bond::new(0, 1, BondKind::Single), Bond::new(1, 2, BondKind::Single)],
        )
    }

    #[test]
    fn permutation_is_equal() {
        let g = ethanol();
        let p = MolGraph::new(
            vec![g.atoms[2], g.atoms[0], g.atoms[1]],
            vec![Bond::new(2, 0, BondKind::Single), Bond::new(1, 2, BondKind::Single)],
        );
        let m = graph_equal(&g, &p, 20.0);
        assert!(m.equal, "{:?}", m.diff);
        assert_eq!(m.mapping, vec![Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn bond_order_difference_is_named() {
        let g = ethanol();
        let mut h = g.clone();
        h.bonds[1].kind = BondKind::Double;
        let m = graph_equal(&g, &h, 20.0);
        assert!(!m.equal);
        assert_eq!(
            m.diff,
            vec![GraphDiff::BondKind { a: 1, b: 2, expected: BondKind::Single, found: BondKind::Double }]
        );
    }

    #[test]
    fn tolerance_boundary() {
        let g = ethanol();
        let mut h = g.clone();
        h.atoms[2].pos = Some(crate::Pixel::new(30, 100));
        assert!(graph_equal(&g, &h, 20.0).equal);
        h.atoms[2].pos = Some(crate::Pixel::new(30, 101));
        let m = graph_equal(&g, &h, 20.0);
        assert!(!m.equal);
        assert!(m.diff.contains(&GraphDiff::UnmatchedLeft { atom: 2 }));
    }

    #[test]
    fn stereo_direction_matters() {
        let mut g = ethanol();
        g.bonds[0].kind = BondKind::Wedge;
        let mut h = g.clone();
        h.bonds[0] = Bond::new(1, 0, BondKind::Wedge);
        assert!(!graph_equal(&g, &h, 0.0).equal);
        h.bonds[0].kind = BondKind::Hash;
        h.bonds[0] = Bond::new(0, 1, BondKind::Hash);
        assert!(!graph_equal(&g, &h, 0.0).equal);
        assert!(graph_equal(&g, &g, 0.0).equal);
    }

    #[test]
    fn element_and_charge_mismatches() {
        let g = ethanol();
        let mut h = g.clone();
        h.atoms[2] = Atom::at(Element::N, 30, 80).with_charge(1);
        let m = graph_equal(&g, &h, 0.0);
        assert_eq!(m.diff.len(), 2);
    }
}
