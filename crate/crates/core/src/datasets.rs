//! Classifier training sets built from rendered molecules.
//!
//! Atom and charge samples sit at every true atom position (labeled with
//! the element or charge) and at every bond midpoint (labeled Empty). Bond
//! samples are all pairs of true atoms closer than twice the bond length,
//! labeled with the bond class seen from the lower-index atom, or Empty if
//! the pair is not bonded.
//!
//! A sample is stored as a reference (image index, positions, label); its
//! input window is assembled on demand from the image and the segmentation
//! probabilities. References pack into a `CGS1` file: the magic `CGS1`, a
//! little-endian u32 count, then per sample a u32 image index, a u8 kind
//! (0 atom, 1 bond, 2 charge), four i32 coordinates (first row, first col,
//! second row, second col; the second pair repeats the first for atoms and
//! charges) and a u8 label.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molgraph::Pixel;
use crate::networks::{
    assemble_atom_input, assemble_bond_input, assemble_charge_input, ClassifierInput, ClassifierKind, Geometry,
    SegmentationMaps,
};
use crate::render::LabeledImage;
use crate::vocab::{BondClass, Vocabulary};

const MAGIC: &[u8; 4] = b"CGS1";
const RECORD: usize = 4 + 1 + 16 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRef {
    pub image: u32,
    pub kind: ClassifierKind,
    /// Candidate position, or the first atom of a pair.
    pub first: Pixel,
    /// Second atom of a pair; equals `first` for atoms and charges.
    pub second: Pixel,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDataset {
    pub kind: ClassifierKind,
    pub vocab: Vocabulary,
    pub samples: Vec<CandidateRef>,
}

/// Summary written next to a packed sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateManifest {
    pub kind: ClassifierKind,
    pub classes: Vec<String>,
    pub class_counts: Vec<usize>,
    pub samples: usize,
    pub images: usize,
    pub config_hash: Option<String>,
}

fn kind_code(k: ClassifierKind) -> u8 {
    match k {
        ClassifierKind::Atom => 0,
        ClassifierKind::Bond => 1,
        ClassifierKind::Charge => 2,
    }
}

fn label_of(index: Option<usize>, what: &str) -> Result<u8> {
    index
        .map(|i| i as u8)
        .ok_or_else(|| Error::Dataset(format!("{what} not in the vocabulary")))
}

fn positioned(item: &LabeledImage, image: usize) -> Result<Vec<Pixel>> {
    item.truth
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            a.pos
                .ok_or_else(|| Error::Dataset(format!("image {image}: atom {i} has no position")))
        })
        .collect()
}

fn point_dataset(
    images: &[LabeledImage],
    vocab: &Vocabulary,
    kind: ClassifierKind,
    label: impl Fn(&crate::molgraph::Atom) -> Result<u8>,
) -> Result<CandidateDataset> {
    let mut samples = Vec::new();
    for (k, item) in images.iter().enumerate() {
        let pos = positioned(item, k)?;
        for (atom, &p) in item.truth.atoms.iter().zip(&pos) {
            samples.push(CandidateRef {
                image: k as u32,
                kind,
                first: p,
                second: p,
                label: label(atom)?,
            });
        }
        for b in &item.truth.bonds {
            let m = pos[b.a].midpoint(pos[b.b]);
            samples.push(CandidateRef {
                image: k as u32,
                kind,
                first: m,
                second: m,
                label: 0,
            });
        }
    }
    Ok(CandidateDataset {
        kind,
        vocab: vocab.clone(),
        samples,
    })
}

pub fn make_atom_dataset(images: &[LabeledImage], vocab: &Vocabulary) -> Result<CandidateDataset> {
    point_dataset(images, vocab, ClassifierKind::Atom, |a| {
        label_of(vocab.atom_index(a.element), &format!("element {}", a.element))
    })
}

pub fn make_charge_dataset(images: &[LabeledImage], vocab: &Vocabulary) -> Result<CandidateDataset> {
    point_dataset(images, vocab, ClassifierKind::Charge, |a| {
        label_of(vocab.charge_index(a.charge), &format!("charge {}", a.charge))
    })
}

pub fn make_bond_dataset(images: &[LabeledImage], vocab: &Vocabulary) -> Result<CandidateDataset> {
    let mut samples = Vec::new();
    for (k, item) in images.iter().enumerate() {
        let pos = positioned(item, k)?;
        let limit = 2 * item.style.bond_length as i64;
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                if pos[i].dist2(pos[j]) >= limit * limit {
                    continue;
                }
                let label = match item.truth.bond_between(i, j) {
                    Some(bi) => {
                        let b = &item.truth.bonds[bi];
                        let class = BondClass::from_bond(b.kind, b.a == i);
                        label_of(vocab.bond_index(class), &format!("bond class {}", class.name()))?
                    }
                    None => 0,
                };
                samples.push(CandidateRef {
                    image: k as u32,
                    kind: ClassifierKind::Bond,
                    first: pos[i],
                    second: pos[j],
                    label,
                });
            }
        }
    }
    Ok(CandidateDataset {
        kind: ClassifierKind::Bond,
        vocab: vocab.clone(),
        samples,
    })
}

pub fn make_dataset(kind: ClassifierKind, images: &[LabeledImage], vocab: &Vocabulary) -> Result<CandidateDataset> {
    match kind {
        ClassifierKind::Atom => make_atom_dataset(images, vocab),
        ClassifierKind::Bond => make_bond_dataset(images, vocab),
        ClassifierKind::Charge => make_charge_dataset(images, vocab),
    }
}

impl CandidateDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.kind.n_classes(&self.vocab)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }

    pub fn class_names(&self) -> Vec<String> {
        match self.kind {
            ClassifierKind::Atom => self.vocab.atom_names(),
            ClassifierKind::Bond => self.vocab.bond_names(),
            ClassifierKind::Charge => self.vocab.charge_names(),
        }
    }

    /// Keeps at most `cap` samples of each class, in order.
    pub fn capped(&self, cap: usize) -> Self {
        let mut seen = vec![0; self.n_classes()];
        let samples = self
            .samples
            .iter()
            .filter(|s| {
                seen[s.label as usize] += 1;
                seen[s.label as usize] <= cap
            })
            .copied()
            .collect();
        CandidateDataset {
            samples,
            ..self.clone()
        }
    }

    pub fn manifest(&self, images: usize, config_hash: Option<String>) -> CandidateManifest {
        CandidateManifest {
            kind: self.kind,
            classes: self.class_names(),
            class_counts: self.class_counts(),
            samples: self.len(),
            images,
            config_hash,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + RECORD * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.image.to_le_bytes());
            out.push(kind_code(s.kind));
            for v in [s.first.row, s.first.col, s.second.row, s.second.col] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(s.label);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], kind: ClassifierKind, vocab: &Vocabulary) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a CGS1 sample file".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if bytes.len() != 8 + n * RECORD {
            return Err(Error::Format(format!("CGS1 file should hold {n} records, has {} bytes", bytes.len())));
        }
        let n_classes = kind.n_classes(vocab);
        let i32_at = |o: usize| i32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let o = 8 + k * RECORD;
            if bytes[o + 4] != kind_code(kind) {
                return Err(Error::Format(format!("record {k} is not a {} sample", kind.name())));
            }
            let label = bytes[o + 21];
            if label as usize >= n_classes {
                return Err(Error::Format(format!("record {k}: label {label} outside {n_classes} classes")));
            }
            samples.push(CandidateRef {
                image: u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()),
                kind,
                first: Pixel::new(i32_at(o + 5), i32_at(o + 9)),
                second: Pixel::new(i32_at(o + 13), i32_at(o + 17)),
                label,
            });
        }
        Ok(CandidateDataset {
            kind,
            vocab: vocab.clone(),
            samples,
        })
    }

    /// Writes `<name>.cgs1` and `<name>.json` into `dir`.
    pub fn save(&self, dir: &Path, name: &str, images: usize, config_hash: Option<String>) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{name}.cgs1")), self.to_bytes())?;
        let manifest = serde_json::to_string_pretty(&self.manifest(images, config_hash))?;
        fs::write(dir.join(format!("{name}.json")), manifest + "\n")?;
        Ok(())
    }
}

/// Images and their segmentation probabilities, from which sample windows
/// are cut.
pub struct SampleSource<'a> {
    pub images: &'a [LabeledImage],
    pub probs: &'a [SegmentationMaps],
    pub geometry: Geometry,
}

impl SampleSource<'_> {
    pub fn input(&self, s: &CandidateRef) -> Result<ClassifierInput> {
        let k = s.image as usize;
        let (item, seg) = match (self.images.get(k), self.probs.get(k)) {
            (Some(i), Some(p)) => (i, p),
            _ => return Err(Error::Dataset(format!("sample refers to missing image {k}"))),
        };
        match s.kind {
            ClassifierKind::Atom => assemble_atom_input(&seg.atoms, &item.x, s.first, &self.geometry),
            ClassifierKind::Charge => assemble_charge_input(&seg.charges, &item.x, s.first, &self.geometry),
            ClassifierKind::Bond => assemble_bond_input(&seg.bonds, &item.x, (s.first, s.second), &self.geometry),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{parse_smiles, Atom, Bond, BondKind, Element, MolGraph};
    use crate::render::{render_labeled, RenderStyle};

    fn place(mut g: MolGraph, pts: &[(i32, i32)]) -> MolGraph {
        for (a, &(r, c)) in g.atoms.iter_mut().zip(pts) {
            a.pos = Some(Pixel::new(r, c));
        }
        g
    }

    fn item(g: MolGraph) -> LabeledImage {
        render_labeled(&g, &RenderStyle::preset(1, 24).unwrap(), &Vocabulary::default(), (128, 128)).unwrap()
    }

    #[test]
    fn ethanol_counts() {
        let g = place(parse_smiles("CCO").unwrap(), &[(64, 30), (52, 51), (64, 72)]);
        let v = Vocabulary::default();
        let items = [item(g)];
        let a = make_atom_dataset(&items, &v).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a.class_counts()[0], 2);
        assert_eq!(a.class_counts()[v.atom_index(Element::O).unwrap()], 1);
        let c = make_charge_dataset(&items, &v).unwrap();
        assert_eq!(c.class_counts()[0], 5);
        let pa: Vec<Pixel> = a.samples.iter().map(|s| s.first).collect();
        let pc: Vec<Pixel> = c.samples.iter().map(|s| s.first).collect();
        assert_eq!(pa, pc);
    }

    #[test]
    fn triangle_and_wedge_labels() {
        let g = place(parse_smiles("C1CC1").unwrap(), &[(50, 50), (50, 74), (71, 62)]);
        let b = make_bond_dataset(&[item(g)], &Vocabulary::default()).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.samples.iter().all(|s| s.label == 1));

        let v = Vocabulary::default();
        let g = MolGraph::new(
            vec![Atom::at(Element::C, 64, 40), Atom::at(Element::C, 64, 64)],
            vec![Bond::new(0, 1, BondKind::Wedge)],
        );
        let b = make_bond_dataset(&[item(g)], &v).unwrap();
        assert_eq!(b.samples[0].label as usize, v.bond_index(BondClass::WedgeBegin).unwrap());
        let g = MolGraph::new(
            vec![Atom::at(Element::C, 64, 40), Atom::at(Element::C, 64, 64)],
            vec![Bond::new(1, 0, BondKind::Hash)],
        );
        let b = make_bond_dataset(&[item(g)], &v).unwrap();
        assert_eq!(b.samples[0].label as usize, v.bond_index(BondClass::HashEnd).unwrap());
    }

    #[test]
    fn charged_atom_label() {
        let v = Vocabulary::default();
        let g = place(parse_smiles("C[N+](C)(C)C").unwrap(), &[(40, 64), (64, 64), (64, 40), (64, 88), (88, 64)]);
        let c = make_charge_dataset(&[item(g)], &v).unwrap();
        let plus = v.charge_index(1).unwrap() as u8;
        let hits: Vec<_> = c.samples.iter().filter(|s| s.label == plus).collect();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].first, Pixel::new(64, 64));
    }

    #[test]
    fn packed_round_trip_and_caps() {
        let v = Vocabulary::default();
        let g = place(parse_smiles("CC(=O)O").unwrap(), &[(64, 30), (52, 51), (31, 51), (64, 72)]);
        let b = make_bond_dataset(&[item(g)], &v).unwrap();
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..4], b"CGS1");
        assert_eq!(CandidateDataset::from_bytes(&bytes, ClassifierKind::Bond, &v).unwrap(), b);
        assert!(CandidateDataset::from_bytes(&bytes, ClassifierKind::Atom, &v).is_err());
        assert!(CandidateDataset::from_bytes(&bytes[..bytes.len() - 1], ClassifierKind::Bond, &v).is_err());
        let capped = b.capped(1);
        assert!(capped.class_counts().iter().all(|&c| c <= 1));
    }
}
