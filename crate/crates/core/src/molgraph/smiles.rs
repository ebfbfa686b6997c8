//! A SMILES subset.
//!
//! Grammar accepted by [`parse_smiles`]:
//!
//! ```text
//! smiles  := atom tail*
//! tail    := bond? atom | bond? ring | '(' bond? atom tail* ')'
//! atom    := 'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'Cl' | 'Br' | 'I'
//!          | '[' symbol ('H' digit?)? charge? ']'
//! charge  := '+' | '++' | '+' digit | '-' | '--' | '-' digit
//! bond    := '-' | '=' | '#'
//! ring    := digit | '%' digit digit
//! ```
//!
//! Hydrogens written inside brackets are accepted and dropped. Aromatic
//! lowercase atoms, chirality, directional bonds and dot-disconnected
//! fragments are rejected.

use std::collections::{BTreeMap, HashSet};

use super::{Atom, Bond, BondKind, Element, MolGraph};
use crate::error::{Error, Result};

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn element(&mut self, bracket: bool) -> Result<Element> {
        let start = self.i;
        let c = self.peek().ok_or_else(|| Error::parse(start, "expected atom"))?;
        if c.is_ascii_lowercase() {
            return Err(Error::parse(start, "aromatic atoms are not supported"));
        }
        let two = self.s.get(start..start + 2).map(|b| std::str::from_utf8(b).unwrap_or(""));
        if let Some(sym @ ("Cl" | "Br")) = two {
            self.i += 2;
            return Ok(Element::from_symbol(sym).unwrap());
        }
        if bracket {
            if let Some(next) = self.s.get(start + 1) {
                if next.is_ascii_lowercase() {
                    let sym = std::str::from_utf8(&self.s[start..start + 2]).unwrap_or("");
                    return Err(Error::parse(start, format!("unsupported element {sym:?}")));
                }
            }
        }
        let sym = (c as char).to_string();
        match Element::from_symbol(&sym) {
            Some(e) => {
                self.i += 1;
                Ok(e)
            }
            None => Err(Error::parse(start, format!("unknown atom symbol {sym:?}"))),
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.i;
        self.i += 1;
        let element = self.element(true)?;
        if self.peek() == Some(b'@') {
            return Err(Error::parse(self.i, "chirality is not supported"));
        }
        if self.peek() == Some(b'H') {
            self.i += 1;
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.i += 1;
            }
        }
        let mut charge: i8 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            self.i += 1;
            charge = unit;
            match self.peek() {
                Some(c) if c == sign => {
                    self.i += 1;
                    charge = 2 * unit;
                }
                Some(c) if c.is_ascii_digit() => {
                    self.i += 1;
                    charge = unit * (c - b'0') as i8;
                }
                _ => {}
            }
            if !(-2..=2).contains(&charge) {
                return Err(Error::parse(self.i - 1, format!("charge {charge} out of range")));
            }
        }
        match self.peek() {
            Some(b']') => self.i += 1,
            Some(b'@') => return Err(Error::parse(self.i, "chirality is not supported")),
            Some(c) => return Err(Error::parse(self.i, format!("unexpected {:?} in bracket atom", c as char))),
            None => return Err(Error::parse(self.i, format!("bracket opened at {open} is not closed"))),
        }
        Ok(Atom::new(element).with_charge(charge))
    }

    fn add_bond(&mut self, a: usize, b: usize, kind: BondKind, at: usize) -> Result<()> {
        if a == b {
            return Err(Error::parse(at, "ring closure onto the same atom"));
        }
        let key = (a.min(b), a.max(b));
        if self.bonds.iter().any(|x| x.key() == key) {
            return Err(Error::parse(at, "duplicate bond"));
        }
        self.bonds.push(Bond::new(a, b, kind));
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<usize> = Vec::new();
        let mut pending: Option<(BondKind, usize)> = None;
        let mut rings: BTreeMap<u32, (usize, Option<BondKind>, usize)> = BTreeMap::new();
        if self.s.is_empty() {
            return Err(Error::parse(0, "empty input"));
        }
        while let Some(c) = self.peek() {
            let at = self.i;
            match c {
                b'-' | b'=' | b'#' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(Error::parse(at, "unexpected bond symbol"));
                    }
                    let kind = match c {
                        b'-' => BondKind::Single,
                        b'=' => BondKind::Double,
                        _ => BondKind::Triple,
                    };
                    pending = Some((kind, at));
                    self.i += 1;
                }
                b'(' => {
                    let p = prev.ok_or_else(|| Error::parse(at, "branch before any atom"))?;
                    if pending.is_some() {
                        return Err(Error::parse(at, "bond symbol before branch"));
                    }
                    branches.push(p);
                    self.i += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(Error::parse(at, "dangling bond symbol"));
                    }
                    prev = Some(branches.pop().ok_or_else(|| Error::parse(at, "unbalanced ')'"))?);
                    if self.s.get(at.wrapping_sub(1)) == Some(&b'(') {
                        return Err(Error::parse(at, "empty branch"));
                    }
                    self.i += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let p = prev.ok_or_else(|| Error::parse(at, "ring closure before any atom"))?;
                    let digit = if c == b'%' {
                        let d = self.s.get(at + 1..at + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                        let d = d.ok_or_else(|| Error::parse(at, "'%' must be followed by two digits"))?;
                        self.i += 3;
                        ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                    } else {
                        self.i += 1;
                        (c - b'0') as u32
                    };
                    let here = pending.take().map(|(k, _)| k);
                    match rings.remove(&digit) {
                        Some((other, there, _)) => {
                            let kind = match (here, there) {
                                (Some(x), Some(y)) if x != y => {
                                    return Err(Error::parse(at, "conflicting ring-closure bond symbols"))
                                }
                                (x, y) => x.or(y).unwrap_or(BondKind::Single),
                            };
                            self.add_bond(other, p, kind, at)?;
                        }
                        None => {
                            rings.insert(digit, (p, here, at));
                        }
                    }
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, &mut prev, &mut pending, at)?;
                }
                b'@' => return Err(Error::parse(at, "chirality is not supported")),
                b'/' | b'\\' => return Err(Error::parse(at, "directional bonds are not supported")),
                b':' => return Err(Error::parse(at, "aromatic bonds are not supported")),
                b'$' => return Err(Error::parse(at, "quadruple bonds are not supported")),
                b'.' => return Err(Error::parse(at, "disconnected fragments are not supported")),
                _ if c.is_ascii_alphabetic() => {
                    let e = self.element(false)?;
                    self.push_atom(Atom::new(e), &mut prev, &mut pending, at)?;
                }
                _ => return Err(Error::parse(at, format!("unexpected character {:?}", c as char))),
            }
        }
        let end = self.s.len();
        if !branches.is_empty() {
            return Err(Error::parse(end, "unbalanced '('"));
        }
        if pending.is_some() {
            return Err(Error::parse(end, "dangling bond symbol"));
        }
        if let Some((digit, (_, _, at))) = rings.into_iter().next() {
            return Err(Error::parse(at, format!("ring closure {digit} is never closed")));
        }
        Ok(())
    }

    fn push_atom(
        &mut self,
        atom: Atom,
        prev: &mut Option<usize>,
        pending: &mut Option<(BondKind, usize)>,
        at: usize,
    ) -> Result<()> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(p) = *prev {
            let kind = pending.take().map(|(k, _)| k).unwrap_or(BondKind::Single);
            self.add_bond(p, idx, kind, at)?;
        }
        *prev = Some(idx);
        Ok(())
    }
}

/// Parses the subset above into a validated graph without positions.
pub fn parse_smiles(text: &str) -> Result<MolGraph> {
    if let Some(pos) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(Error::parse(pos, "input must be ASCII"));
    }
    let trimmed = text.trim_end();
    if let Some(pos) = trimmed.bytes().position(|b| b.is_ascii_whitespace()) {
        return Err(Error::parse(pos, "unexpected whitespace"));
    }
    let mut p = Parser {
        s: trimmed.as_bytes(),
        i: 0,
        atoms: vec![],
        bonds: vec![],
    };
    p.run()?;
    let g = MolGraph::new(p.atoms, p.bonds);
    let v = g.validate();
    if !v.is_empty() {
        return Err(Error::InvalidGraph(v));
    }
    Ok(g)
}

fn atom_text(a: &Atom) -> String {
    match a.charge {
        0 => a.element.symbol().to_string(),
        1 => format!("[{}+]", a.element),
        -1 => format!("[{}-]", a.element),
        c if c > 0 => format!("[{}+{}]", a.element, c),
        c => format!("[{}-{}]", a.element, -c),
    }
}

fn bond_text(kind: BondKind) -> &'static str {
    match kind {
        BondKind::Double => "=",
        BondKind::Triple => "#",
        _ => "",
    }
}

fn ring_label(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d:02}")
    }
}

struct Writer<'g> {
    g: &'g MolGraph,
    adj: Vec<Vec<(usize, usize)>>,
    order: Vec<Option<usize>>,
    children: Vec<Vec<(usize, usize)>>,
    /// Ring bonds per atom as (bond index, opens here).
    rings: Vec<Vec<(usize, bool)>>,
    ring_seen: HashSet<usize>,
    digits: BTreeMap<usize, u32>,
    out: String,
}

impl<'g> Writer<'g> {
    fn visit(&mut self, u: usize, parent_bond: Option<usize>, counter: &mut usize) {
        self.order[u] = Some(*counter);
        *counter += 1;
        for k in 0..self.adj[u].len() {
            let (v, bond) = self.adj[u][k];
            if Some(bond) == parent_bond {
                continue;
            }
            if self.order[v].is_none() {
                self.children[u].push((v, bond));
                self.visit(v, Some(bond), counter);
            } else if self.ring_seen.insert(bond) {
                self.rings[v].push((bond, true));
                self.rings[u].push((bond, false));
            }
        }
    }

    fn emit(&mut self, u: usize) {
        self.out.push_str(&atom_text(&self.g.atoms[u]));
        let mut closing: Vec<(u32, usize)> = Vec::new();
        let mut opening: Vec<(usize, usize)> = Vec::new();
        for &(bond, opens) in &self.rings[u] {
            if opens {
                let other = self.g.bonds[bond].other(u);
                opening.push((self.order[other].unwrap_or(usize::MAX), bond));
            } else {
                closing.push((self.digits[&bond], bond));
            }
        }
        closing.sort_unstable();
        for (d, bond) in closing {
            self.digits.remove(&bond);
            self.out.push_str(&ring_label(d));
        }
        opening.sort_unstable();
        for (_, bond) in opening {
            let d = (1..).find(|d| !self.digits.values().any(|x| x == d)).unwrap();
            self.digits.insert(bond, d);
            self.out.push_str(bond_text(self.g.bonds[bond].kind));
            self.out.push_str(&ring_label(d));
        }
        let children = self.children[u].clone();
        for (n, (v, bond)) in children.iter().enumerate() {
            let last = n + 1 == children.len();
            if !last {
                self.out.push('(');
            }
            self.out.push_str(bond_text(self.g.bonds[*bond].kind));
            self.emit(*v);
            if !last {
                self.out.push(')');
            }
        }
    }
}

/// SMILES from a depth-first walk starting at atom 0 that always takes the
/// lowest-index neighbor first. Wedge and hash bonds are written as plain
/// single bonds.
pub fn to_smiles(g: &MolGraph) -> Result<String> {
    let v = g.validate();
    if !v.is_empty() {
        return Err(Error::InvalidGraph(v));
    }
    let n = g.atoms.len();
    let mut w = Writer {
        g,
        adj: g.adjacency(),
        order: vec![None; n],
        children: vec![Vec::new(); n],
        rings: vec![Vec::new(); n],
        ring_seen: HashSet::new(),
        digits: BTreeMap::new(),
        out: String::new(),
    };
    let mut counter = 0;
    w.visit(0, None, &mut counter);
    w.emit(0);
    Ok(w.out)
}
