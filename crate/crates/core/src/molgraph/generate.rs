//! Procedural molecules on a honeycomb lattice.
//!
//! Sites are addressed in brick-wall coordinates `(i, j)`: every site links
//! to `(i, j - 1)` and `(i, j + 1)`, plus `(i + 1, j)` when `i + j` is odd or
//! `(i - 1, j)` when it is even. A site maps to pixel
//! `(i * (L + h) + [i + j odd] * h, j * w)` with `h = ceil(L / 2)` and
//! `w = ceil(L * sqrt(3) / 2)` for bond length `L`, so vertical bonds are
//! exactly `L` long, zig-zag bonds are at least `L`, and any two sites are at
//! least `L` apart. Growth never places an atom next to a site it is not
//! bonded to, so drawings have no crossings and no unbonded lattice
//! neighbors.

use std::collections::{BTreeMap, HashMap};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Atom, Bond, BondKind, Element, MolGraph, Pixel};
use crate::error::{Error, Result};
use crate::vocab::{BondClass, Vocabulary};

const MAX_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub min_atoms: usize,
    pub max_atoms: usize,
    /// Relative frequency of each element among grown atoms.
    pub element_weights: Vec<(Element, f64)>,
    /// Relative frequency of single, double and triple bonds.
    pub bond_weights: [f64; 3],
    /// Non-zero charges that may be placed on heteroatoms.
    pub charges: Vec<i8>,
    pub charge_prob: f64,
    pub stereo_kinds: Vec<BondKind>,
    /// Probability that a single bond is drawn as wedge or hash.
    pub stereo_prob: f64,
    /// Probability that a growth step fuses a six-ring onto a bond.
    pub ring_prob: f64,
    pub bond_length: i32,
    /// `(rows, cols)` of the target canvas.
    pub canvas: (usize, usize),
    /// Minimum distance from any atom to the canvas edge.
    pub margin: i32,
    /// Elements every generated molecule must contain.
    pub require_elements: Vec<Element>,
    /// Whether every generated molecule must carry at least one stereo bond.
    pub require_stereo: bool,
}

impl GenParams {
    /// Parameters drawing from a vocabulary: carbon four times as likely as
    /// each heteroatom, mostly single bonds, charges and stereo only when the
    /// vocabulary has them.
    pub fn for_vocabulary(vocab: &Vocabulary, bond_length: i32, canvas: (usize, usize)) -> Self {
        let element_weights = vocab
            .elements
            .iter()
            .map(|&e| (e, if e == Element::C { 4.0 } else { 1.0 }))
            .collect();
        let has = |c: BondClass| vocab.bonds.contains(&c);
        let mut stereo_kinds = Vec::new();
        if has(BondClass::WedgeBegin) {
            stereo_kinds.push(BondKind::Wedge);
        }
        if has(BondClass::HashBegin) {
            stereo_kinds.push(BondKind::Hash);
        }
        GenParams {
            min_atoms: 3,
            max_atoms: 14,
            element_weights,
            bond_weights: [
                6.0,
                if has(BondClass::Double) { 1.5 } else { 0.0 },
                if has(BondClass::Triple) { 0.4 } else { 0.0 },
            ],
            charges: vocab.charges.clone(),
            charge_prob: if vocab.charges.is_empty() { 0.0 } else { 0.08 },
            stereo_kinds,
            stereo_prob: 0.0,
            ring_prob: 0.25,
            bond_length,
            canvas,
            margin: (bond_length + 1) / 2,
            require_elements: vec![],
            require_stereo: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_atoms < 2 || self.max_atoms < self.min_atoms {
            return Err(Error::Generation(format!(
                "atom range {}..={} is invalid (minimum is 2)",
                self.min_atoms, self.max_atoms
            )));
        }
        if self.element_weights.iter().any(|(_, w)| !(*w >= 0.0))
            || !self.element_weights.iter().any(|(_, w)| *w > 0.0)
        {
            return Err(Error::Generation(
                "element weights must be non-negative with at least one positive".into(),
            ));
        }
        if self.bond_weights[0] <= 0.0 || self.bond_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Generation("single-bond weight must be positive".into()));
        }
        if self.bond_length < 4 {
            return Err(Error::Generation("bond length too small".into()));
        }
        if self.require_stereo && self.stereo_kinds.is_empty() {
            return Err(Error::Generation("stereo required but no stereo kinds allowed".into()));
        }
        Ok(())
    }
}

type Site = (i32, i32);

fn lattice_neighbors((i, j): Site) -> [Site; 3] {
    let vertical = if (i + j).rem_euclid(2) == 1 { (i + 1, j) } else { (i - 1, j) };
    [(i, j - 1), (i, j + 1), vertical]
}

struct Lattice {
    half: i32,
    width: i32,
    bond_length: i32,
}

impl Lattice {
    fn new(bond_length: i32) -> Self {
        Lattice {
            half: (bond_length + 1) / 2,
            width: (bond_length as f64 * 3f64.sqrt() / 2.0).ceil() as i32,
            bond_length,
        }
    }

    fn pixel(&self, (i, j): Site) -> Pixel {
        let low = if (i + j).rem_euclid(2) == 1 { self.half } else { 0 };
        Pixel::new(i * (self.bond_length + self.half) + low, j * self.width)
    }
}

/// Six-ring faces containing the lattice edge `u`-`v`, as cycles starting
/// at `u` followed by `v`.
fn faces_with_edge(u: Site, v: Site) -> Vec<[Site; 6]> {
    let mut out = Vec::new();
    for i0 in [u.0 - 1, u.0] {
        for j0 in [u.1 - 2, u.1 - 1, u.1] {
            if (i0 + j0).rem_euclid(2) != 1 {
                continue;
            }
            let cycle = [
                (i0, j0),
                (i0, j0 + 1),
                (i0, j0 + 2),
                (i0 + 1, j0 + 2),
                (i0 + 1, j0 + 1),
                (i0 + 1, j0),
            ];
            for k in 0..6 {
                let (a, b) = (cycle[k], cycle[(k + 1) % 6]);
                let mut rot = [cycle[0]; 6];
                if a == u && b == v {
                    for (n, r) in rot.iter_mut().enumerate() {
                        *r = cycle[(k + n) % 6];
                    }
                    out.push(rot);
                } else if a == v && b == u {
                    for (n, r) in rot.iter_mut().enumerate() {
                        *r = cycle[(k + 1 + 6 - n) % 6];
                    }
                    out.push(rot);
                }
            }
        }
    }
    out
}

struct Builder<'p> {
    params: &'p GenParams,
    lattice: Lattice,
    sites: Vec<Site>,
    occupied: HashMap<Site, usize>,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bbox: (Pixel, Pixel),
}

impl<'p> Builder<'p> {
    fn new(params: &'p GenParams) -> Self {
        Builder {
            params,
            lattice: Lattice::new(params.bond_length),
            sites: vec![],
            occupied: HashMap::new(),
            atoms: vec![],
            bonds: vec![],
            bbox: (Pixel::new(i32::MAX, i32::MAX), Pixel::new(i32::MIN, i32::MIN)),
        }
    }

    fn extent_ok(&self, extra: &[Site]) -> bool {
        let (mut lo, mut hi) = self.bbox;
        for &s in extra {
            let p = self.lattice.pixel(s);
            lo = Pixel::new(lo.row.min(p.row), lo.col.min(p.col));
            hi = Pixel::new(hi.row.max(p.row), hi.col.max(p.col));
        }
        let avail_r = self.params.canvas.0 as i32 - 2 * self.params.margin - 1;
        let avail_c = self.params.canvas.1 as i32 - 2 * self.params.margin - 1;
        hi.row - lo.row <= avail_r && hi.col - lo.col <= avail_c
    }

    fn add_atom(&mut self, site: Site, element: Element) -> usize {
        let p = self.lattice.pixel(site);
        self.bbox.0 = Pixel::new(self.bbox.0.row.min(p.row), self.bbox.0.col.min(p.col));
        self.bbox.1 = Pixel::new(self.bbox.1.row.max(p.row), self.bbox.1.col.max(p.col));
        let idx = self.atoms.len();
        self.atoms.push(Atom::new(element));
        self.sites.push(site);
        self.occupied.insert(site, idx);
        idx
    }

    fn free_valence(&self, used: &[u8], atom: usize) -> u8 {
        self.atoms[atom].element.max_valence(0).saturating_sub(used[atom])
    }

    fn pick_element(&self, rng: &mut ChaCha8Rng, min_valence: u8) -> Option<Element> {
        let opts: Vec<(Element, f64)> = self
            .params
            .element_weights
            .iter()
            .copied()
            .filter(|(e, w)| *w > 0.0 && e.max_valence(0) >= min_valence)
            .collect();
        let dist = WeightedIndex::new(opts.iter().map(|(_, w)| *w)).ok()?;
        Some(opts[dist.sample(rng)].0)
    }

    fn pick_order(&self, rng: &mut ChaCha8Rng, limit: u8) -> BondKind {
        let w = self.params.bond_weights;
        let limit = limit.clamp(1, 3) as usize;
        let dist = WeightedIndex::new(&w[..limit]).expect("single weight positive");
        match dist.sample(rng) {
            0 => BondKind::Single,
            1 => BondKind::Double,
            _ => BondKind::Triple,
        }
    }

    fn grow_leaf(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let used = MolGraph::new(self.atoms.clone(), self.bonds.clone()).valence_used();
        let degrees = MolGraph::new(self.atoms.clone(), self.bonds.clone()).degrees();
        let parents: Vec<usize> = (0..self.atoms.len())
            .filter(|&a| degrees[a] < 3 && self.free_valence(&used, a) > 0)
            .collect();
        if parents.is_empty() {
            return false;
        }
        let parent = parents[rng.gen_range(0..parents.len())];
        let psite = self.sites[parent];
        let sites: Vec<Site> = lattice_neighbors(psite)
            .into_iter()
            .filter(|s| {
                !self.occupied.contains_key(s)
                    && lattice_neighbors(*s)
                        .iter()
                        .all(|n| *n == psite || !self.occupied.contains_key(n))
                    && self.extent_ok(&[*s])
            })
            .collect();
        if sites.is_empty() {
            return false;
        }
        let site = sites[rng.gen_range(0..sites.len())];
        let Some(element) = self.pick_element(rng, 1) else {
            return false;
        };
        let limit = self.free_valence(&used, parent).min(element.max_valence(0));
        let kind = self.pick_order(rng, limit);
        let child = self.add_atom(site, element);
        self.bonds.push(Bond::new(parent, child, kind));
        true
    }

    fn fuse_ring(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let g = MolGraph::new(self.atoms.clone(), self.bonds.clone());
        let used = g.valence_used();
        let degrees = g.degrees();
        let edges: Vec<(usize, usize)> = self
            .bonds
            .iter()
            .map(|b| (b.a, b.b))
            .filter(|&(a, b)| {
                degrees[a] <= 2
                    && degrees[b] <= 2
                    && self.free_valence(&used, a) > 0
                    && self.free_valence(&used, b) > 0
            })
            .collect();
        if edges.is_empty() {
            return false;
        }
        let (u, v) = edges[rng.gen_range(0..edges.len())];
        let faces: Vec<[Site; 6]> = faces_with_edge(self.sites[u], self.sites[v])
            .into_iter()
            .filter(|face| {
                let new = &face[2..];
                new.iter().all(|s| !self.occupied.contains_key(s))
                    && new.iter().all(|s| {
                        lattice_neighbors(*s)
                            .iter()
                            .all(|n| face.contains(n) || !self.occupied.contains_key(n))
                    })
                    && self.extent_ok(new)
            })
            .collect();
        if faces.is_empty() {
            return false;
        }
        let face = faces[rng.gen_range(0..faces.len())];
        // face = [u, v, n1, n2, n3, n4]; ring is u-v-n1-n2-n3-n4-u
        let mut new_idx = Vec::with_capacity(4);
        for &s in &face[2..] {
            let Some(e) = self.pick_element(rng, 2) else {
                return false;
            };
            new_idx.push((s, e));
        }
        let ids: Vec<usize> = new_idx.into_iter().map(|(s, e)| self.add_atom(s, e)).collect();
        let chain = [v, ids[0], ids[1], ids[2], ids[3], u];
        for w in chain.windows(2) {
            let used = MolGraph::new(self.atoms.clone(), self.bonds.clone()).valence_used();
            // leave room for the remaining ring bond on interior atoms
            let reserve = |a: usize| if ids.contains(&a) && !self.bonds.iter().any(|b| b.a == a || b.b == a) { 1 } else { 0 };
            let fa = self.free_valence(&used, w[0]).saturating_sub(reserve(w[0]));
            let fb = self.free_valence(&used, w[1]).saturating_sub(if w[1] == u { 0 } else { 1 });
            let kind = self.pick_order(rng, fa.min(fb).max(1));
            self.bonds.push(Bond::new(w[0], w[1], kind));
        }
        true
    }
}

fn attempt(params: &GenParams, rng: &mut ChaCha8Rng) -> Option<MolGraph> {
    let target = rng.gen_range(params.min_atoms..=params.max_atoms);
    let mut b = Builder::new(params);
    let first = b.pick_element(rng, 1)?;
    let first = if params.element_weights.iter().any(|(e, w)| *e == Element::C && *w > 0.0) {
        Element::C
    } else {
        first
    };
    b.add_atom((0, 0), first);
    let mut stalls = 0;
    while b.atoms.len() < target && stalls < 20 {
        let grew = if b.atoms.len() + 4 <= target && !b.bonds.is_empty() && rng.gen_bool(params.ring_prob.clamp(0.0, 1.0)) {
            b.fuse_ring(rng)
        } else {
            b.grow_leaf(rng)
        };
        if !grew {
            stalls += 1;
        }
    }
    if b.atoms.len() < params.min_atoms {
        return None;
    }
    let Builder {
        lattice,
        sites,
        mut atoms,
        mut bonds,
        bbox,
        ..
    } = b;

    // required elements replace distinct atoms whose bonds they can carry
    let used = MolGraph::new(atoms.clone(), bonds.clone()).valence_used();
    let mut taken = vec![false; atoms.len()];
    for &e in &params.require_elements {
        if atoms.iter().any(|a| a.element == e) {
            continue;
        }
        let options: Vec<usize> = (0..atoms.len())
            .filter(|&a| !taken[a] && used[a] <= e.max_valence(0))
            .filter(|&a| {
                let left = atoms
                    .iter()
                    .enumerate()
                    .filter(|&(k, x)| k != a && x.element == atoms[a].element)
                    .count();
                !params.require_elements.contains(&atoms[a].element) || left > 0
            })
            .collect();
        if options.is_empty() {
            return None;
        }
        let a = options[rng.gen_range(0..options.len())];
        atoms[a].element = e;
        taken[a] = true;
    }

    if params.charge_prob > 0.0 && !params.charges.is_empty() {
        for (i, atom) in atoms.iter_mut().enumerate() {
            if atom.element == Element::C || !rng.gen_bool(params.charge_prob.clamp(0.0, 1.0)) {
                continue;
            }
            let fits: Vec<i8> = params
                .charges
                .iter()
                .copied()
                .filter(|&c| used[i] <= atom.element.max_valence(c) && used[i] > 0)
                .collect();
            if !fits.is_empty() {
                atom.charge = fits[rng.gen_range(0..fits.len())];
            }
        }
    }

    if !params.stereo_kinds.is_empty() {
        let mut stereo = false;
        for bond in bonds.iter_mut() {
            if bond.kind == BondKind::Single && rng.gen_bool(params.stereo_prob.clamp(0.0, 1.0)) {
                bond.kind = params.stereo_kinds[rng.gen_range(0..params.stereo_kinds.len())];
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut bond.a, &mut bond.b);
                }
                stereo = true;
            }
        }
        if params.require_stereo && !stereo {
            let singles: Vec<usize> = (0..bonds.len()).filter(|&k| bonds[k].kind == BondKind::Single).collect();
            if singles.is_empty() {
                return None;
            }
            let bond = &mut bonds[singles[rng.gen_range(0..singles.len())]];
            bond.kind = params.stereo_kinds[rng.gen_range(0..params.stereo_kinds.len())];
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut bond.a, &mut bond.b);
            }
        }
    }

    let avail_r = params.canvas.0 as i32 - 2 * params.margin;
    let avail_c = params.canvas.1 as i32 - 2 * params.margin;
    let (lo, hi) = bbox;
    let off_r = params.margin + (avail_r - (hi.row - lo.row)) / 2 - lo.row;
    let off_c = params.margin + (avail_c - (hi.col - lo.col)) / 2 - lo.col;
    for (atom, site) in atoms.iter_mut().zip(&sites) {
        let p = lattice.pixel(*site);
        atom.pos = Some(Pixel::new(p.row + off_r, p.col + off_c));
    }
    let g = MolGraph::new(atoms, bonds);
    if g.is_valid() {
        Some(g)
    } else {
        None
    }
}

/// A valid molecule laid out on the honeycomb lattice, deterministic in
/// `seed`.
pub fn random_molecule(seed: u64, params: &GenParams) -> Result<MolGraph> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(g) = attempt(params, &mut rng) {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no molecule after {MAX_ATTEMPTS} attempts for seed {seed}"
    )))
}

/// Tracks how many molecules contain each element and decides which
/// elements the next molecule has to include.
#[derive(Debug, Clone, Default)]
pub struct QuotaSampler {
    quota: BTreeMap<Element, usize>,
    counts: BTreeMap<Element, usize>,
}

impl QuotaSampler {
    pub fn new(quota: BTreeMap<Element, usize>) -> Self {
        QuotaSampler {
            quota,
            counts: BTreeMap::new(),
        }
    }

    pub fn counts(&self) -> &BTreeMap<Element, usize> {
        &self.counts
    }

    pub fn deficit(&self, e: Element) -> usize {
        self.quota
            .get(&e)
            .copied()
            .unwrap_or(0)
            .saturating_sub(self.counts.get(&e).copied().unwrap_or(0))
    }

    pub fn total_deficit(&self) -> usize {
        self.quota.keys().map(|&e| self.deficit(e)).sum()
    }

    pub fn satisfied(&self) -> bool {
        self.total_deficit() == 0
    }

    /// Elements to force into the next molecule given `slots_left` molecules
    /// still to draw: enough of the largest deficits that the quota stays
    /// reachable.
    pub fn requirements(&self, slots_left: usize) -> Vec<Element> {
        let mut deficits: Vec<(usize, Element)> = self
            .quota
            .keys()
            .map(|&e| (self.deficit(e), e))
            .filter(|(d, _)| *d > 0)
            .collect();
        if deficits.is_empty() {
            return vec![];
        }
        deficits.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let total: usize = deficits.iter().map(|d| d.0).sum();
        let k = total.div_ceil(slots_left.max(1)).max(1).min(deficits.len());
        deficits.into_iter().take(k).map(|(_, e)| e).collect()
    }

    /// True when `g` reduces some outstanding deficit, or none remain.
    pub fn useful(&self, g: &MolGraph) -> bool {
        self.satisfied() || self.quota.keys().any(|&e| self.deficit(e) > 0 && g.contains_element(e))
    }

    pub fn record(&mut self, g: &MolGraph) {
        let mut present: Vec<Element> = g.atoms.iter().map(|a| a.element).collect();
        present.sort();
        present.dedup();
        for e in present {
            *self.counts.entry(e).or_insert(0) += 1;
        }
    }
}
