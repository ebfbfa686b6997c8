//! Molecular graphs: atoms with pixel positions, typed bonds, validation and
//! the text formats the pipeline emits.

mod compare;
mod generate;
mod json;
mod molfile;
mod smiles;

pub use compare::{graph_equal, GraphDiff, GraphMatch};
pub use generate::{random_molecule, GenParams, QuotaSampler};
pub use json::{from_json, to_json, GraphJson};
pub use molfile::{to_molfile, MOLFILE_BOND_LENGTH};
pub use smiles::{parse_smiles, to_smiles};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    S,
    F,
    Cl,
    Br,
    I,
    P,
    B,
}

impl Element {
    /// Element classes of the default vocabulary, in class-index order.
    pub const DEFAULT_VOCABULARY: [Element; 9] = [
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
        Element::P,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::P => "P",
            Element::B => "B",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Some(match s {
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "S" => Element::S,
            "F" => Element::F,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            "P" => Element::P,
            "B" => Element::B,
            _ => return None,
        })
    }

    /// Maximum bond-order sum of a neutral atom.
    pub fn base_valence(self) -> u8 {
        match self {
            Element::C => 4,
            Element::N => 3,
            Element::O => 2,
            Element::S => 6,
            Element::P => 5,
            Element::B => 3,
            Element::F | Element::Cl | Element::Br | Element::I => 1,
        }
    }

    /// Maximum bond-order sum at a formal charge. Carbon loses one bond per
    /// unit of charge; every other element gains one per positive unit and
    /// loses one per negative unit (N+ 4, O- 1).
    pub fn max_valence(self, charge: i8) -> u8 {
        let base = self.base_valence() as i16;
        let v = match self {
            Element::C => base - (charge as i16).abs(),
            _ => base + charge as i16,
        };
        v.max(0) as u8
    }

    pub fn has_glyph(self, charge: i8) -> bool {
        self != Element::C || charge != 0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Bond type including 2D stereo depiction. For `Wedge` and `Hash` the
/// bond's `a` atom is the narrow end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondKind {
    Single,
    Double,
    Triple,
    Wedge,
    Hash,
}

impl BondKind {
    pub fn order(self) -> u8 {
        match self {
            BondKind::Double => 2,
            BondKind::Triple => 3,
            _ => 1,
        }
    }

    pub fn is_stereo(self) -> bool {
        matches!(self, BondKind::Wedge | BondKind::Hash)
    }
}

/// Integer pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub row: i32,
    pub col: i32,
}

impl Pixel {
    pub fn new(row: i32, col: i32) -> Self {
        Pixel { row, col }
    }

    pub fn dist(self, other: Pixel) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn dist2(self, other: Pixel) -> i64 {
        let dr = (self.row - other.row) as i64;
        let dc = (self.col - other.col) as i64;
        dr * dr + dc * dc
    }

    /// Midpoint rounded half away from zero.
    pub fn midpoint(self, other: Pixel) -> Pixel {
        let half = |a: i32, b: i32| ((a + b) as f64 / 2.0).round() as i32;
        Pixel::new(half(self.row, other.row), half(self.col, other.col))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    /// Formal charge in `-2..=2`.
    pub charge: i8,
    /// Unset for graphs that did not come from an image or the generator.
    pub pos: Option<Pixel>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            pos: None,
        }
    }

    pub fn at(element: Element, row: i32, col: i32) -> Self {
        Atom {
            element,
            charge: 0,
            pos: Some(Pixel::new(row, col)),
        }
    }

    pub fn with_charge(mut self, charge: i8) -> Self {
        self.charge = charge;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
}

impl Bond {
    pub fn new(a: usize, b: usize, kind: BondKind) -> Self {
        Bond { a, b, kind }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

/// A broken [`MolGraph`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    BondEndpoint { bond: usize },
    SelfLoop { bond: usize },
    DuplicateBond { bond: usize, first: usize },
    Charge { atom: usize, charge: i8 },
    Valence { atom: usize, used: u8, max: u8 },
    Disconnected { components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no atoms"),
            Violation::BondEndpoint { bond } => write!(f, "bond {bond}: endpoint is not an atom"),
            Violation::SelfLoop { bond } => write!(f, "bond {bond}: connects an atom to itself"),
            Violation::DuplicateBond { bond, first } => {
                write!(f, "bond {bond}: duplicates bond {first}")
            }
            Violation::Charge { atom, charge } => {
                write!(f, "atom {atom}: unsupported charge {charge}")
            }
            Violation::Valence { atom, used, max } => {
                write!(f, "atom {atom}: valence {used} exceeds maximum {max}")
            }
            Violation::Disconnected { components } => {
                write!(f, "graph is disconnected ({components} components)")
            }
        }
    }
}

impl MolGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        MolGraph { atoms, bonds }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Sum of bond orders at each atom.
    pub fn valence_used(&self) -> Vec<u8> {
        let mut used = vec![0u8; self.atoms.len()];
        for b in &self.bonds {
            for i in [b.a, b.b] {
                if let Some(u) = used.get_mut(i) {
                    *u = u.saturating_add(b.kind.order());
                }
            }
        }
        used
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.atoms.len()];
        for b in &self.bonds {
            for i in [b.a, b.b] {
                if let Some(d) = deg.get_mut(i) {
                    *d += 1;
                }
            }
        }
        deg
    }

    /// Neighbor lists in ascending atom order, with the connecting bond index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            if b.a < self.atoms.len() && b.b < self.atoms.len() && b.a != b.b {
                adj[b.a].push((b.b, k));
                adj[b.b].push((b.a, k));
            }
        }
        for n in &mut adj {
            n.sort_unstable();
        }
        adj
    }

    pub fn bond_between(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.bonds.iter().position(|b| b.key() == key)
    }

    /// Number of connected components (0 for an empty graph).
    pub fn component_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Every broken invariant; empty iff the graph is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.atoms.is_empty() {
            out.push(Violation::Empty);
            return out;
        }
        let n = self.atoms.len();
        let mut first_seen: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, b) in self.bonds.iter().enumerate() {
            if b.a >= n || b.b >= n {
                out.push(Violation::BondEndpoint { bond: k });
                continue;
            }
            if b.a == b.b {
                out.push(Violation::SelfLoop { bond: k });
                continue;
            }
            if let Some(&first) = first_seen.get(&b.key()) {
                out.push(Violation::DuplicateBond { bond: k, first });
            } else {
                first_seen.insert(b.key(), k);
            }
        }
        let used = self.valence_used();
        for (i, a) in self.atoms.iter().enumerate() {
            if !(-2..=2).contains(&a.charge) {
                out.push(Violation::Charge {
                    atom: i,
                    charge: a.charge,
                });
                continue;
            }
            let max = a.element.max_valence(a.charge);
            if used[i] > max {
                out.push(Violation::Valence {
                    atom: i,
                    used: used[i],
                    max,
                });
            }
        }
        let components = self.component_count();
        if components > 1 {
            out.push(Violation::Disconnected { components });
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn contains_element(&self, e: Element) -> bool {
        self.atoms.iter().any(|a| a.element == e)
    }

    pub fn has_stereo(&self) -> bool {
        self.bonds.iter().any(|b| b.kind.is_stereo())
    }
}

/// Free-function form of [`MolGraph::validate`].
pub fn validate(g: &MolGraph) -> Vec<Violation> {
    g.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ethanol() -> MolGraph {
        MolGraph::new(
            vec![Atom::new(Element::C), Atom::new(Element::C), Atom::new(Element::O)],
            vec![Bond::new(0, 1, BondKind::Single), Bond::new(1, 2, BondKind::Single)],
        )
    }

    #[test]
    fn ethanol_is_valid() {
        assert!(validate(&ethanol()).is_empty());
    }

    #[test]
    fn pentavalent_carbon() {
        let mut atoms = vec![Atom::new(Element::C)];
        let mut bonds = vec![];
        for i in 1..=5 {
            atoms.push(Atom::new(Element::F));
            bonds.push(Bond::new(0, i, BondKind::Single));
        }
        let v = validate(&MolGraph::new(atoms, bonds));
        assert_eq!(v, vec![Violation::Valence { atom: 0, used: 5, max: 4 }]);
        assert!(v[0].to_string().contains("atom 0"));
    }

    #[test]
    fn two_components() {
        let g = MolGraph::new(
            vec![Atom::new(Element::C); 4],
            vec![Bond::new(0, 1, BondKind::Single), Bond::new(2, 3, BondKind::Single)],
        );
        assert_eq!(validate(&g), vec![Violation::Disconnected { components: 2 }]);
    }

    #[test]
    fn charge_adjusted_valence() {
        assert_eq!(Element::N.max_valence(1), 4);
        assert_eq!(Element::O.max_valence(-1), 1);
        assert_eq!(Element::C.max_valence(0), 4);
        assert_eq!(Element::S.max_valence(0), 6);
        assert_eq!(Element::P.max_valence(0), 5);
        assert_eq!(Element::Cl.max_valence(0), 1);
    }

    #[test]
    fn duplicate_and_bad_endpoints() {
        let g = MolGraph::new(
            vec![Atom::new(Element::C), Atom::new(Element::C)],
            vec![
                Bond::new(0, 1, BondKind::Single),
                Bond::new(1, 0, BondKind::Double),
                Bond::new(0, 5, BondKind::Single),
                Bond::new(1, 1, BondKind::Single),
            ],
        );
        let v = validate(&g);
        assert!(v.contains(&Violation::DuplicateBond { bond: 1, first: 0 }));
        assert!(v.contains(&Violation::BondEndpoint { bond: 2 }));
        assert!(v.contains(&Violation::SelfLoop { bond: 3 }));
    }

    #[test]
    fn empty_graph_is_flagged() {
        assert_eq!(validate(&MolGraph::default()), vec![Violation::Empty]);
    }
}
