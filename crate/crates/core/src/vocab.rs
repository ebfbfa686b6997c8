//! Class vocabularies shared by label maps, networks and datasets.
//!
//! Index 0 of every vocabulary is the Empty class. With the default
//! vocabulary the atom classes are
//! `Empty, C, N, O, S, F, Cl, Br, I, P` (n_a = 10), the bond classes
//! `Empty, Single, Double, Triple, WedgeBegin, WedgeEnd, HashBegin, HashEnd`
//! (n_b = 8) and the charge classes `Empty, +1, -1, +2, -2` (n_c = 5).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molgraph::{BondKind, Element};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondClass {
    Empty,
    Single,
    Double,
    Triple,
    WedgeBegin,
    WedgeEnd,
    HashBegin,
    HashEnd,
}

impl BondClass {
    pub const ALL: [BondClass; 8] = [
        BondClass::Empty,
        BondClass::Single,
        BondClass::Double,
        BondClass::Triple,
        BondClass::WedgeBegin,
        BondClass::WedgeEnd,
        BondClass::HashBegin,
        BondClass::HashEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BondClass::Empty => "Empty",
            BondClass::Single => "Single",
            BondClass::Double => "Double",
            BondClass::Triple => "Triple",
            BondClass::WedgeBegin => "WedgeBegin",
            BondClass::WedgeEnd => "WedgeEnd",
            BondClass::HashBegin => "HashBegin",
            BondClass::HashEnd => "HashEnd",
        }
    }

    /// Class of a bond seen from `first` towards the other atom. Plain bonds
    /// look the same from both ends; stereo bonds read Begin when `first` is
    /// the narrow end.
    pub fn from_bond(kind: BondKind, first_is_begin: bool) -> BondClass {
        match (kind, first_is_begin) {
            (BondKind::Single, _) => BondClass::Single,
            (BondKind::Double, _) => BondClass::Double,
            (BondKind::Triple, _) => BondClass::Triple,
            (BondKind::Wedge, true) => BondClass::WedgeBegin,
            (BondKind::Wedge, false) => BondClass::WedgeEnd,
            (BondKind::Hash, true) => BondClass::HashBegin,
            (BondKind::Hash, false) => BondClass::HashEnd,
        }
    }

    /// Inverse of [`BondClass::from_bond`]: the bond kind and whether the
    /// first atom is the narrow end. `None` for Empty.
    pub fn to_bond(self) -> Option<(BondKind, bool)> {
        match self {
            BondClass::Empty => None,
            BondClass::Single => Some((BondKind::Single, true)),
            BondClass::Double => Some((BondKind::Double, true)),
            BondClass::Triple => Some((BondKind::Triple, true)),
            BondClass::WedgeBegin => Some((BondKind::Wedge, true)),
            BondClass::WedgeEnd => Some((BondKind::Wedge, false)),
            BondClass::HashBegin => Some((BondKind::Hash, true)),
            BondClass::HashEnd => Some((BondKind::Hash, false)),
        }
    }

    pub fn is_stereo(self) -> bool {
        matches!(
            self,
            BondClass::WedgeBegin | BondClass::WedgeEnd | BondClass::HashBegin | BondClass::HashEnd
        )
    }
}

/// The non-Empty classes a dataset and model are built for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vocabulary {
    pub elements: Vec<Element>,
    /// Non-Empty bond classes. Stereo classes come in Begin/End pairs.
    pub bonds: Vec<BondClass>,
    /// Non-zero formal charges.
    pub charges: Vec<i8>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            elements: Element::DEFAULT_VOCABULARY.to_vec(),
            bonds: BondClass::ALL[1..].to_vec(),
            charges: vec![1, -1, 2, -2],
        }
    }
}

impl Vocabulary {
    /// `{C, N, O}`, single and double bonds, no charges.
    pub fn small() -> Self {
        Vocabulary {
            elements: vec![Element::C, Element::N, Element::O],
            bonds: vec![BondClass::Single, BondClass::Double],
            charges: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Config("vocabulary needs at least one element".into()));
        }
        if !self.bonds.contains(&BondClass::Single) {
            return Err(Error::Config("vocabulary needs single bonds".into()));
        }
        if self.bonds.contains(&BondClass::Empty) || self.charges.contains(&0) {
            return Err(Error::Config("Empty classes are implicit, do not list them".into()));
        }
        for (a, b) in [
            (BondClass::WedgeBegin, BondClass::WedgeEnd),
            (BondClass::HashBegin, BondClass::HashEnd),
        ] {
            if self.bonds.contains(&a) != self.bonds.contains(&b) {
                return Err(Error::Config(format!(
                    "{} and {} must be listed together",
                    a.name(),
                    b.name()
                )));
            }
        }
        for c in &self.charges {
            if !(-2..=2).contains(c) {
                return Err(Error::Config(format!("unsupported charge {c}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !self.elements.iter().all(|e| seen.insert(*e)) {
            return Err(Error::Config("duplicate element in vocabulary".into()));
        }
        Ok(())
    }

    pub fn n_atoms(&self) -> usize {
        self.elements.len() + 1
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len() + 1
    }

    pub fn n_charges(&self) -> usize {
        self.charges.len() + 1
    }

    pub fn atom_index(&self, e: Element) -> Option<usize> {
        self.elements.iter().position(|&x| x == e).map(|i| i + 1)
    }

    pub fn atom_class(&self, index: usize) -> Option<Element> {
        index.checked_sub(1).and_then(|i| self.elements.get(i).copied())
    }

    pub fn bond_index(&self, c: BondClass) -> Option<usize> {
        if c == BondClass::Empty {
            return Some(0);
        }
        self.bonds.iter().position(|&x| x == c).map(|i| i + 1)
    }

    pub fn bond_class(&self, index: usize) -> Option<BondClass> {
        if index == 0 {
            return Some(BondClass::Empty);
        }
        self.bonds.get(index - 1).copied()
    }

    pub fn charge_index(&self, charge: i8) -> Option<usize> {
        if charge == 0 {
            return Some(0);
        }
        self.charges.iter().position(|&x| x == charge).map(|i| i + 1)
    }

    pub fn charge_value(&self, index: usize) -> Option<i8> {
        if index == 0 {
            return Some(0);
        }
        self.charges.get(index - 1).copied()
    }

    pub fn has_stereo(&self) -> bool {
        self.bonds.iter().any(|b| b.is_stereo())
    }

    pub fn atom_names(&self) -> Vec<String> {
        std::iter::once("Empty".to_string())
            .chain(self.elements.iter().map(|e| e.symbol().to_string()))
            .collect()
    }

    pub fn bond_names(&self) -> Vec<String> {
        std::iter::once("Empty".to_string())
            .chain(self.bonds.iter().map(|b| b.name().to_string()))
            .collect()
    }

    pub fn charge_names(&self) -> Vec<String> {
        std::iter::once("Empty".to_string())
            .chain(self.charges.iter().map(|c| format!("{c:+}")))
            .collect()
    }
}
