//! JSON sidecar form: `{"atoms":[{"el","chg","row","col"}],"bonds":[{"a","b","kind"}]}`.

use serde::{Deserialize, Serialize};

use super::{Atom, Bond, BondKind, Element, MolGraph, Pixel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub el: String,
    pub chg: i8,
    pub row: Option<i32>,
    pub col: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondJson {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub atoms: Vec<AtomJson>,
    pub bonds: Vec<BondJson>,
}

impl From<&MolGraph> for GraphJson {
    fn from(g: &MolGraph) -> Self {
        GraphJson {
            atoms: g
                .atoms
                .iter()
                .map(|a| AtomJson {
                    el: a.element.symbol().to_string(),
                    chg: a.charge,
                    row: a.pos.map(|p| p.row),
                    col: a.pos.map(|p| p.col),
                })
                .collect(),
            bonds: g.bonds.iter().map(|b| BondJson { a: b.a, b: b.b, kind: b.kind }).collect(),
        }
    }
}

impl GraphJson {
    pub fn to_graph(&self) -> Result<MolGraph> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.iter().enumerate() {
            let element = Element::from_symbol(&a.el)
                .ok_or_else(|| Error::Format(format!("atom {i}: unknown element {:?}", a.el)))?;
            let pos = match (a.row, a.col) {
                (Some(r), Some(c)) => Some(Pixel::new(r, c)),
                (None, None) => None,
                _ => return Err(Error::Format(format!("atom {i}: row and col must both be set"))),
            };
            atoms.push(Atom { element, charge: a.chg, pos });
        }
        let bonds = self.bonds.iter().map(|b| Bond::new(b.a, b.b, b.kind)).collect();
        Ok(MolGraph::new(atoms, bonds))
    }
}

/// Pretty-printed JSON sidecar.
pub fn to_json(g: &MolGraph) -> String {
    serde_json::to_string_pretty(&GraphJson::from(g)).expect("graph json serializes")
}

/// Reads a sidecar and validates the resulting graph.
pub fn from_json(text: &str) -> Result<MolGraph> {
    let parsed: GraphJson = serde_json::from_str(text)?;
    let g = parsed.to_graph()?;
    let v = g.validate();
    if !v.is_empty() {
        return Err(Error::InvalidGraph(v));
    }
    Ok(g)
}
