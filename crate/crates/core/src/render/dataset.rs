//! Rendered datasets: generation under per-element quotas and the on-disk
//! layout (`NNNNN.pgm`, `NNNNN.{atoms,bonds,charges}.pgm`, `NNNNN.json`,
//! `manifest.json`).

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_pgm_image, read_pgm_labels, render_labeled, write_pgm_image, write_pgm_labels, LabelMaps, LabeledImage, RenderStyle};
use crate::error::{Error, Result};
use crate::molgraph::{from_json, random_molecule, to_json, to_smiles, Element, GenParams, QuotaSampler};
use crate::vocab::{BondClass, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n: usize,
    pub style: RenderStyle,
    /// `(rows, cols)`.
    pub canvas: (usize, usize),
    pub vocab: Vocabulary,
    pub gen: GenParams,
    /// Minimum number of molecules containing each listed element.
    pub quota: BTreeMap<Element, usize>,
    pub seed: u64,
    /// Distinguishes datasets drawn from the same run seed; molecule seeds of
    /// different splits never coincide.
    pub split: u32,
}

impl DatasetSpec {
    /// Seed of the `attempt`-th molecule draw.
    pub fn molecule_seed(&self, attempt: u64) -> u64 {
        (self.seed << 36) ^ ((self.split as u64 & 0xf) << 32) ^ (attempt & 0xffff_ffff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: usize,
    pub molecule_seed: u64,
    pub smiles: String,
    pub atoms: usize,
    pub bonds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub count: usize,
    pub attempts: u64,
    pub items: Vec<ItemRecord>,
    /// Molecules containing each element.
    pub element_molecules: BTreeMap<Element, usize>,
    /// Atoms per atom class, indexed like the vocabulary (Empty stays 0).
    pub atom_class_counts: Vec<usize>,
    /// Bonds per bond class; stereo bonds count under their Begin class.
    pub bond_class_counts: Vec<usize>,
    pub charge_class_counts: Vec<usize>,
    /// `atom_class_counts` normalized over all atoms.
    pub atom_class_frequency: Vec<f64>,
    pub config_hash: Option<String>,
}

/// Draws and renders `spec.n` molecules. While some element is short of its
/// quota, each draw is forced to contain the largest outstanding deficits
/// and draws that reduce no deficit are discarded.
pub fn render_dataset(spec: &DatasetSpec) -> Result<(Vec<LabeledImage>, Manifest)> {
    spec.vocab.validate()?;
    spec.style.validate()?;
    for e in spec.quota.keys() {
        if spec.vocab.atom_index(*e).is_none() {
            return Err(Error::Dataset(format!("quota element {e} is not in the vocabulary")));
        }
    }
    let mut sampler = QuotaSampler::new(spec.quota.clone());
    let mut items = Vec::with_capacity(spec.n);
    let mut records = Vec::with_capacity(spec.n);
    let limit = 100 * spec.n.max(1) as u64;
    let mut attempt = 0u64;
    while items.len() < spec.n {
        if attempt >= limit {
            return Err(Error::Dataset(format!(
                "quota unreachable: {} of {} molecules after {attempt} attempts, outstanding deficit {}",
                items.len(),
                spec.n,
                sampler.total_deficit()
            )));
        }
        let seed = spec.molecule_seed(attempt);
        attempt += 1;
        let mut gen = spec.gen.clone();
        gen.require_elements = sampler.requirements(spec.n - items.len());
        let g = match random_molecule(seed, &gen) {
            Ok(g) => g,
            Err(Error::Generation(_)) => continue,
            Err(e) => return Err(e),
        };
        if !sampler.useful(&g) {
            continue;
        }
        let item = render_labeled(&g, &spec.style, &spec.vocab, spec.canvas)?;
        sampler.record(&g);
        records.push(ItemRecord {
            id: items.len(),
            molecule_seed: seed,
            smiles: to_smiles(&g)?,
            atoms: g.atoms.len(),
            bonds: g.bonds.len(),
        });
        items.push(item);
    }
    if !sampler.satisfied() {
        return Err(Error::Dataset(format!(
            "quota unreachable with {} molecules: outstanding deficit {}",
            spec.n,
            sampler.total_deficit()
        )));
    }
    let manifest = build_manifest(spec, &items, records, attempt)?;
    Ok((items, manifest))
}

fn build_manifest(spec: &DatasetSpec, items: &[LabeledImage], records: Vec<ItemRecord>, attempts: u64) -> Result<Manifest> {
    let v = &spec.vocab;
    let mut atoms = vec![0usize; v.n_atoms()];
    let mut bonds = vec![0usize; v.n_bonds()];
    let mut charges = vec![0usize; v.n_charges()];
    let mut element_molecules = BTreeMap::new();
    for item in items {
        let g = &item.truth;
        for e in &v.elements {
            if g.contains_element(*e) {
                *element_molecules.entry(*e).or_insert(0) += 1;
            }
        }
        for a in &g.atoms {
            atoms[v.atom_index(a.element).expect("rendered atoms are in vocabulary")] += 1;
            charges[v.charge_index(a.charge).expect("rendered charges are in vocabulary")] += 1;
        }
        for b in &g.bonds {
            let class = BondClass::from_bond(b.kind, true);
            bonds[v.bond_index(class).expect("rendered bonds are in vocabulary")] += 1;
        }
    }
    let total: usize = atoms.iter().sum();
    let atom_class_frequency = atoms.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect();
    Ok(Manifest {
        spec: spec.clone(),
        count: items.len(),
        attempts,
        items: records,
        element_molecules,
        atom_class_counts: atoms,
        bond_class_counts: bonds,
        charge_class_counts: charges,
        atom_class_frequency,
        config_hash: None,
    })
}

fn stem(id: usize) -> String {
    format!("{id:05}")
}

/// Writes every item and the manifest into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, items: &[LabeledImage], manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (id, item) in items.iter().enumerate() {
        let s = stem(id);
        write_pgm_image(BufWriter::new(File::create(dir.join(format!("{s}.pgm")))?), &item.x)?;
        write_pgm_labels(BufWriter::new(File::create(dir.join(format!("{s}.atoms.pgm")))?), &item.maps.atoms)?;
        write_pgm_labels(BufWriter::new(File::create(dir.join(format!("{s}.bonds.pgm")))?), &item.maps.bonds)?;
        write_pgm_labels(BufWriter::new(File::create(dir.join(format!("{s}.charges.pgm")))?), &item.maps.charges)?;
        fs::write(dir.join(format!("{s}.json")), to_json(&item.truth))?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| Error::Dataset(format!("{}: {e}", dir.join("manifest.json").display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a dataset written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(Vec<LabeledImage>, Manifest)> {
    let manifest = read_manifest(dir)?;
    let mut items = Vec::with_capacity(manifest.count);
    for id in 0..manifest.count {
        let s = stem(id);
        let open = |name: String| -> Result<BufReader<File>> {
            let path = dir.join(&name);
            File::open(&path)
                .map(BufReader::new)
                .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
        };
        let x = read_pgm_image(open(format!("{s}.pgm"))?)?;
        let maps = LabelMaps {
            atoms: read_pgm_labels(open(format!("{s}.atoms.pgm"))?)?,
            bonds: read_pgm_labels(open(format!("{s}.bonds.pgm"))?)?,
            charges: read_pgm_labels(open(format!("{s}.charges.pgm"))?)?,
        };
        let truth = from_json(&fs::read_to_string(dir.join(format!("{s}.json")))?)?;
        if maps.atoms.dims() != x.dims() || maps.bonds.dims() != x.dims() || maps.charges.dims() != x.dims() {
            return Err(Error::Dataset(format!("item {s}: image and label maps differ in size")));
        }
        items.push(LabeledImage {
            x,
            maps,
            truth,
            style: manifest.spec.style,
        });
    }
    Ok((items, manifest))
}
