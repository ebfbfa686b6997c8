//! The segmentation network, the three candidate classifiers and the
//! assembly of classifier input windows.
//!
//! The segmentation network is a stack of eight 3x3 convolutions with
//! dilations 1, 2, 4, 8, 8, 4, 2, 1 (padding equal to the dilation, ReLU
//! after each) and a final 1x1 layer whose `n_a + n_b + n_c` output channels
//! split into atom, bond and charge scores. A classifier is a
//! depthwise-separable 3x3 convolution followed by 3x3 convolutions with
//! dilations 2, 4, 8 and 1 (all with ReLU), a global max pool and a 1x1
//! layer producing class logits.

mod train;

pub use train::{segmentation_loss, train_classifier, train_segmentation, SegmentationLoss, TrainConfig};

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::molgraph::Pixel;
use crate::nn::{read_cgw1, softmax, write_cgw1, ConvSpec, Layer, NamedTensor, Network, Tensor};
use crate::render::{Image, LabelMaps, RenderStyle};
use crate::vocab::Vocabulary;

pub const SEG_DILATIONS: [usize; 8] = [1, 2, 4, 8, 8, 4, 2, 1];
pub const CLS_DILATIONS: [usize; 4] = [2, 4, 8, 1];

/// Label and highlight geometry shared by rendering, dataset construction
/// and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub bond_length: i32,
    /// Radius of atom highlights.
    pub atom_radius: i32,
    /// Width of bond highlights.
    pub bond_width: i32,
}

impl Geometry {
    pub fn from_style(style: &RenderStyle) -> Self {
        Geometry {
            bond_length: style.bond_length,
            atom_radius: style.atom_radius(),
            bond_width: style.bond_label_width(),
        }
    }

    pub fn cut(&self) -> CutSpec {
        CutSpec::for_bond_length(self.bond_length)
    }
}

/// Classifier window size, `2 * bond_length` on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSpec {
    pub k: usize,
    pub l: usize,
}

impl CutSpec {
    pub fn for_bond_length(bond_length: i32) -> Self {
        let s = 2 * bond_length.max(1) as usize;
        CutSpec { k: s, l: s }
    }
}

/// Per-pixel class scores for atoms `[n_a, rows, cols]`, bonds
/// `[n_b, rows, cols]` and charges `[n_c, rows, cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMaps {
    pub atoms: Tensor,
    pub bonds: Tensor,
    pub charges: Tensor,
}

fn plane_softmax(t: &Tensor) -> Tensor {
    let (n, h, w) = t.chw().expect("3-axis map");
    let plane = h * w;
    let src = t.data();
    let mut out = Tensor::zeros(&[n, h, w]);
    let dst = out.data_mut();
    let mut px = vec![0.0f32; n];
    for p in 0..plane {
        for (k, v) in px.iter_mut().enumerate() {
            *v = src[k * plane + p];
        }
        for (k, v) in softmax(&px).into_iter().enumerate() {
            dst[k * plane + p] = v;
        }
    }
    out
}

/// Index of the largest score, ties resolved to the lowest index (Empty).
pub fn argmax(scores: &[f32]) -> usize {
    let mut best = 0;
    for (k, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = k;
        }
    }
    best
}

fn plane_argmax(t: &Tensor) -> Grid<u8> {
    let (n, h, w) = t.chw().expect("3-axis map");
    let plane = h * w;
    let src = t.data();
    let mut px = vec![0.0f32; n];
    let data = (0..plane)
        .map(|p| {
            for (k, v) in px.iter_mut().enumerate() {
                *v = src[k * plane + p];
            }
            argmax(&px) as u8
        })
        .collect();
    Grid::from_vec(h, w, data).expect("plane size")
}

fn one_hot(labels: &Grid<u8>, n: usize) -> Result<Tensor> {
    let (h, w) = labels.dims();
    let plane = h * w;
    let mut t = Tensor::from_vec(&[n, h, w], vec![-10.0; n * plane])?;
    let d = t.data_mut();
    for (p, &c) in labels.data().iter().enumerate() {
        if c as usize >= n {
            return Err(Error::Shape(format!("label {c} outside {n} classes")));
        }
        d[c as usize * plane + p] = 10.0;
    }
    Ok(t)
}

impl SegmentationMaps {
    /// Splits a `[n_a + n_b + n_c, rows, cols]` output.
    pub fn split(t: &Tensor, vocab: &Vocabulary) -> Result<Self> {
        let (na, nb, nc) = (vocab.n_atoms(), vocab.n_bonds(), vocab.n_charges());
        let (c, _, _) = t.chw()?;
        if c != na + nb + nc {
            return Err(Error::Shape(format!("{c} channels, vocabulary needs {}", na + nb + nc)));
        }
        Ok(SegmentationMaps {
            atoms: t.slice_channels(0, na)?,
            bonds: t.slice_channels(na, na + nb)?,
            charges: t.slice_channels(na + nb, c)?,
        })
    }

    /// Scores of +10 for the labeled class and -10 elsewhere.
    pub fn one_hot(maps: &LabelMaps, vocab: &Vocabulary) -> Result<Self> {
        Ok(SegmentationMaps {
            atoms: one_hot(&maps.atoms, vocab.n_atoms())?,
            bonds: one_hot(&maps.bonds, vocab.n_bonds())?,
            charges: one_hot(&maps.charges, vocab.n_charges())?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        let d = self.atoms.dims();
        (d[1], d[2])
    }

    /// Per-pixel softmax within each group.
    pub fn probabilities(&self) -> Self {
        SegmentationMaps {
            atoms: plane_softmax(&self.atoms),
            bonds: plane_softmax(&self.bonds),
            charges: plane_softmax(&self.charges),
        }
    }

    /// Per-pixel argmax within each group.
    pub fn argmax(&self) -> LabelMaps {
        LabelMaps {
            atoms: plane_argmax(&self.atoms),
            bonds: plane_argmax(&self.bonds),
            charges: plane_argmax(&self.charges),
        }
    }
}

pub fn image_tensor(x: &Image) -> Tensor {
    Tensor::from_vec(&[1, x.rows(), x.cols()], x.data().to_vec()).expect("image dims")
}

/// The segmentation network.
#[derive(Debug, Clone)]
pub struct SegNet {
    pub net: Network,
    pub vocab: Vocabulary,
    pub hidden: usize,
}

impl SegNet {
    pub fn new(vocab: &Vocabulary, hidden: usize, seed: u64) -> Result<Self> {
        vocab.validate()?;
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut cin = 1;
        for (k, &d) in SEG_DILATIONS.iter().enumerate() {
            layers.push(Layer::conv(&format!("conv{}", k + 1), ConvSpec::same3x3(cin, hidden, d), &mut rng)?);
            layers.push(Layer::Relu);
            cin = hidden;
        }
        let out = vocab.n_atoms() + vocab.n_bonds() + vocab.n_charges();
        layers.push(Layer::conv("last", ConvSpec::pointwise(hidden, out), &mut rng)?);
        Ok(SegNet {
            net: Network::new(layers),
            vocab: vocab.clone(),
            hidden,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.vocab.n_atoms() + self.vocab.n_bonds() + self.vocab.n_charges()
    }

    /// Raw scores for a binary image.
    pub fn forward(&self, x: &Image) -> Result<SegmentationMaps> {
        let out = self.net.forward(&image_tensor(x))?;
        SegmentationMaps::split(&out, &self.vocab)
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor> {
        self.net.named_tensors()
    }

    pub fn load(&mut self, tensors: &[NamedTensor]) -> Result<()> {
        self.net.load_named(tensors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Atom,
    Bond,
    Charge,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Atom, ClassifierKind::Bond, ClassifierKind::Charge];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Atom => "atom",
            ClassifierKind::Bond => "bond",
            ClassifierKind::Charge => "charge",
        }
    }

    pub fn n_classes(self, vocab: &Vocabulary) -> usize {
        match self {
            ClassifierKind::Atom => vocab.n_atoms(),
            ClassifierKind::Bond => vocab.n_bonds(),
            ClassifierKind::Charge => vocab.n_charges(),
        }
    }

    pub fn highlight_channels(self) -> usize {
        match self {
            ClassifierKind::Bond => 2,
            _ => 1,
        }
    }

    /// Segmentation slice, image and highlight channels.
    pub fn in_channels(self, vocab: &Vocabulary) -> usize {
        self.n_classes(vocab) + 1 + self.highlight_channels()
    }
}

/// A candidate classifier.
#[derive(Debug, Clone)]
pub struct ClsNet {
    pub kind: ClassifierKind,
    pub net: Network,
    pub vocab: Vocabulary,
    pub hidden: usize,
}

impl ClsNet {
    pub fn new(kind: ClassifierKind, vocab: &Vocabulary, hidden: usize, seed: u64) -> Result<Self> {
        vocab.validate()?;
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = vec![
            Layer::conv("depthconv1", ConvSpec::separable3x3(kind.in_channels(vocab), hidden), &mut rng)?,
            Layer::Relu,
        ];
        for (k, &d) in CLS_DILATIONS.iter().enumerate() {
            layers.push(Layer::conv(&format!("conv{}", k + 2), ConvSpec::same3x3(hidden, hidden, d), &mut rng)?);
            layers.push(Layer::Relu);
        }
        layers.push(Layer::GlobalMaxPool);
        layers.push(Layer::conv("last", ConvSpec::pointwise(hidden, kind.n_classes(vocab)), &mut rng)?);
        Ok(ClsNet {
            kind,
            net: Network::new(layers),
            vocab: vocab.clone(),
            hidden,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.kind.n_classes(&self.vocab)
    }

    fn check(&self, input: &ClassifierInput) -> Result<()> {
        let want = self.kind.in_channels(&self.vocab);
        if input.data.dims()[0] != want {
            return Err(Error::Shape(format!(
                "{} classifier expects {want} input channels, got {}",
                self.kind.name(),
                input.data.dims()[0]
            )));
        }
        Ok(())
    }

    /// Class logits, Empty first.
    pub fn forward(&self, input: &ClassifierInput) -> Result<Vec<f32>> {
        self.check(input)?;
        Ok(self.net.forward(&input.data)?.into_vec())
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor> {
        self.net.named_tensors()
    }

    pub fn load(&mut self, tensors: &[NamedTensor]) -> Result<()> {
        self.net.load_named(tensors)
    }
}

/// A `[channels, K, L]` window: segmentation scores, then the image, then
/// one (atoms, charges) or two (bonds) highlight channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierInput {
    pub data: Tensor,
    pub seg_channels: usize,
}

impl ClassifierInput {
    pub fn channels(&self) -> usize {
        self.data.dims()[0]
    }

    pub fn seg_cut(&self) -> Tensor {
        self.data.slice_channels(0, self.seg_channels).expect("seg channels")
    }

    pub fn img_cut(&self) -> Tensor {
        self.data.slice_channels(self.seg_channels, self.seg_channels + 1).expect("image channel")
    }

    pub fn highlight(&self) -> Tensor {
        self.data.slice_channels(self.seg_channels + 1, self.channels()).expect("highlight channels")
    }
}

/// Top-left image coordinate of the window centered on `center`.
pub fn window_origin(center: Pixel, cut: &CutSpec) -> (i64, i64) {
    (center.row as i64 - (cut.k / 2) as i64, center.col as i64 - (cut.l / 2) as i64)
}

fn cut_planes(src: &[f32], (h, w): (usize, usize), planes: usize, origin: (i64, i64), cut: &CutSpec, dst: &mut [f32]) {
    let (k, l) = (cut.k, cut.l);
    for c in 0..planes {
        let plane = &src[c * h * w..(c + 1) * h * w];
        let out = &mut dst[c * k * l..(c + 1) * k * l];
        for r in 0..k {
            let sr = origin.0 + r as i64;
            if sr < 0 || sr >= h as i64 {
                continue;
            }
            let c0 = origin.1.max(0);
            let c1 = (origin.1 + l as i64).min(w as i64);
            if c0 >= c1 {
                continue;
            }
            let src_row = &plane[sr as usize * w + c0 as usize..sr as usize * w + c1 as usize];
            let d0 = (c0 - origin.1) as usize;
            out[r * l + d0..r * l + d0 + src_row.len()].copy_from_slice(src_row);
        }
    }
}

fn window(scores: &Tensor, x: &Image, center: Pixel, cut: &CutSpec, highlights: usize) -> Result<(Tensor, (i64, i64))> {
    let (n, h, w) = scores.chw()?;
    if (h, w) != x.dims() {
        return Err(Error::Shape(format!("scores are {h}x{w}, image is {:?}", x.dims())));
    }
    let origin = window_origin(center, cut);
    let channels = n + 1 + highlights;
    let mut data = vec![0.0f32; channels * cut.k * cut.l];
    cut_planes(scores.data(), (h, w), n, origin, cut, &mut data);
    cut_planes(x.data(), (h, w), 1, origin, cut, &mut data[n * cut.k * cut.l..]);
    Ok((Tensor::from_vec(&[channels, cut.k, cut.l], data)?, origin))
}

fn disk_highlight(t: &mut Tensor, channel: usize, cut: &CutSpec, radius: i32) {
    let (k, l) = (cut.k, cut.l);
    let (cr, cc) = ((k / 2) as i64, (l / 2) as i64);
    let r2 = (radius as i64).pow(2);
    let plane = &mut t.data_mut()[channel * k * l..(channel + 1) * k * l];
    for r in 0..k {
        for c in 0..l {
            let (dr, dc) = (r as i64 - cr, c as i64 - cc);
            if dr * dr + dc * dc <= r2 {
                plane[r * l + c] = 1.0;
            }
        }
    }
}

fn check_inside(x: &Image, p: Pixel) -> Result<()> {
    if p.row < 0 || p.col < 0 || p.row as usize >= x.rows() || p.col as usize >= x.cols() {
        return Err(Error::Candidate(format!("candidate ({}, {}) outside the image", p.row, p.col)));
    }
    Ok(())
}

/// Window around an atom candidate cut from the atom scores and the image,
/// with a disk highlight at the window center. Outside the image the window
/// is zero.
pub fn assemble_atom_input(sa: &Tensor, x: &Image, cand: Pixel, geom: &Geometry) -> Result<ClassifierInput> {
    check_inside(x, cand)?;
    let cut = geom.cut();
    let (mut t, _) = window(sa, x, cand, &cut, 1)?;
    let n = sa.dims()[0];
    disk_highlight(&mut t, n + 1, &cut, geom.atom_radius);
    Ok(ClassifierInput { data: t, seg_channels: n })
}

/// As [`assemble_atom_input`] with the charge scores.
pub fn assemble_charge_input(sc: &Tensor, x: &Image, cand: Pixel, geom: &Geometry) -> Result<ClassifierInput> {
    assemble_atom_input(sc, x, cand, geom)
}

/// Window centered on the midpoint of a candidate pair, with two highlight
/// channels: the half rectangle from `pair.0` to the midpoint, then the half
/// from the midpoint to `pair.1`. Pixels exactly on the dividing line belong
/// to both halves, so swapping the pair swaps the channels.
pub fn assemble_bond_input(sb: &Tensor, x: &Image, pair: (Pixel, Pixel), geom: &Geometry) -> Result<ClassifierInput> {
    let (a, b) = pair;
    check_inside(x, a)?;
    check_inside(x, b)?;
    let limit = 2 * geom.bond_length as i64;
    if a.dist2(b) >= limit * limit {
        return Err(Error::Candidate(format!(
            "pair ({}, {})-({}, {}) is not closer than {limit} px",
            a.row, a.col, b.row, b.col
        )));
    }
    let cut = geom.cut();
    let mid = a.midpoint(b);
    let (mut t, origin) = window(sb, x, mid, &cut, 2)?;
    let n = sb.dims()[0];
    let (k, l) = (cut.k, cut.l);
    let (dr, dc) = ((b.row - a.row) as i64, (b.col - a.col) as i64);
    let len2 = dr * dr + dc * dc;
    let w = geom.bond_width as i64;
    let data = t.data_mut();
    for r in 0..k {
        for c in 0..l {
            let (pr, pc) = (origin.0 + r as i64 - a.row as i64, origin.1 + c as i64 - a.col as i64);
            let dot = pr * dr + pc * dc;
            let cross = pr * dc - pc * dr;
            if len2 == 0 || dot < 0 || dot > len2 || 4 * cross * cross >= w * w * len2 {
                continue;
            }
            if 2 * dot <= len2 {
                data[(n + 1) * k * l + r * l + c] = 1.0;
            }
            if 2 * dot >= len2 {
                data[(n + 2) * k * l + r * l + c] = 1.0;
            }
        }
    }
    Ok(ClassifierInput { data: t, seg_channels: n })
}

/// Description stored next to a weight file as `<name>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsMeta {
    /// `seg`, `atom`, `bond` or `charge`.
    pub network: String,
    pub hidden: usize,
    pub vocab: Vocabulary,
    /// Total optimizer steps behind these weights.
    pub steps: usize,
    pub seed: u64,
    pub config_hash: Option<String>,
}

pub fn meta_path(weights: &Path) -> PathBuf {
    weights.with_extension("json")
}

pub fn save_weights(path: &Path, tensors: &[NamedTensor], meta: &WeightsMeta) -> Result<()> {
    let mut bytes = Vec::new();
    write_cgw1(&mut bytes, tensors)?;
    fs::write(path, bytes)?;
    fs::write(meta_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<(Vec<NamedTensor>, WeightsMeta)> {
    let tensors = read_cgw1(io::BufReader::new(fs::File::open(path)?))?;
    let meta = serde_json::from_str(&fs::read_to_string(meta_path(path))?)?;
    Ok((tensors, meta))
}

impl SegNet {
    pub fn meta(&self, steps: usize, seed: u64, config_hash: Option<String>) -> WeightsMeta {
        WeightsMeta {
            network: "seg".into(),
            hidden: self.hidden,
            vocab: self.vocab.clone(),
            steps,
            seed,
            config_hash,
        }
    }

    pub fn from_file(path: &Path) -> Result<(Self, WeightsMeta)> {
        let (tensors, meta) = load_weights(path)?;
        if meta.network != "seg" {
            return Err(Error::Format(format!("{} holds `{}` weights, not `seg`", path.display(), meta.network)));
        }
        let mut net = SegNet::new(&meta.vocab, meta.hidden, 0)?;
        net.load(&tensors)?;
        Ok((net, meta))
    }
}

impl ClsNet {
    pub fn meta(&self, steps: usize, seed: u64, config_hash: Option<String>) -> WeightsMeta {
        WeightsMeta {
            network: self.kind.name().into(),
            hidden: self.hidden,
            vocab: self.vocab.clone(),
            steps,
            seed,
            config_hash,
        }
    }

    pub fn from_file(kind: ClassifierKind, path: &Path) -> Result<(Self, WeightsMeta)> {
        let (tensors, meta) = load_weights(path)?;
        if meta.network != kind.name() {
            return Err(Error::Format(format!(
                "{} holds `{}` weights, not `{}`",
                path.display(),
                meta.network,
                kind.name()
            )));
        }
        let mut net = ClsNet::new(kind, &meta.vocab, meta.hidden, 0)?;
        net.load(&tensors)?;
        Ok((net, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> Geometry {
        Geometry::from_style(&RenderStyle::preset(1, 24).unwrap())
    }

    #[test]
    fn seg_shapes() {
        let v = Vocabulary::default();
        let net = SegNet::new(&v, 4, 0).unwrap();
        let x = Grid::filled(32, 40, 0.0f32);
        let s = net.forward(&x).unwrap();
        assert_eq!(s.atoms.dims(), &[10, 32, 40]);
        assert_eq!(s.bonds.dims(), &[8, 32, 40]);
        assert_eq!(s.charges.dims(), &[5, 32, 40]);
        let p = s.probabilities();
        for px in 0..32 * 40 {
            let sum: f32 = (0..10).map(|k| p.atoms.data()[k * 32 * 40 + px]).sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn seg_layer_sequence() {
        let net = SegNet::new(&Vocabulary::small(), 4, 0).unwrap();
        let dil: Vec<(usize, usize)> = net
            .net
            .layers()
            .iter()
            .filter_map(|l| l.spec())
            .map(|s| (s.dilation, s.padding))
            .collect();
        assert_eq!(dil, vec![(1, 1), (2, 2), (4, 4), (8, 8), (8, 8), (4, 4), (2, 2), (1, 1), (1, 0)]);
    }

    #[test]
    fn cls_layer_sequence_and_output() {
        let v = Vocabulary::default();
        let net = ClsNet::new(ClassifierKind::Atom, &v, 4, 1).unwrap();
        let names: Vec<String> = net.net.params().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "depthconv1.depthwise.weight");
        assert_eq!(names.last().unwrap(), "last.bias");
        let specs: Vec<&ConvSpec> = net.net.layers().iter().filter_map(|l| l.spec()).collect();
        assert!(specs[0].depthwise_separable);
        assert_eq!(specs[1..5].iter().map(|s| s.dilation).collect::<Vec<_>>(), vec![2, 4, 8, 1]);
        let x = Grid::filled(64, 64, 0.0f32);
        let s = SegmentationMaps::one_hot(&LabelMaps::empty(64, 64), &v).unwrap();
        let input = assemble_atom_input(&s.atoms, &x, Pixel::new(32, 32), &geom()).unwrap();
        assert_eq!(input.channels(), 12);
        assert_eq!(net.forward(&input).unwrap().len(), 10);
    }

    #[test]
    fn windows_and_padding() {
        let v = Vocabulary::small();
        let g = geom();
        let x = Grid::filled(128, 128, 1.0f32);
        let s = SegmentationMaps::one_hot(&LabelMaps::empty(128, 128), &v).unwrap();
        let center = assemble_atom_input(&s.atoms, &x, Pixel::new(64, 64), &g).unwrap();
        assert_eq!(center.data.dims(), &[6, 48, 48]);
        assert!(center.img_cut().data().iter().all(|&v| v == 1.0));
        let corner = assemble_atom_input(&s.atoms, &x, Pixel::new(0, 0), &g).unwrap();
        let zeros = corner.img_cut().data().iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 48 * 48 - 24 * 24);
        let ch = assemble_charge_input(&s.charges, &x, Pixel::new(0, 0), &g).unwrap();
        assert_eq!(ch.channels(), v.n_charges() + 2);
        assert_eq!(ch.img_cut(), corner.img_cut());
        let hl = center.highlight();
        assert_eq!(hl.data()[24 * 48 + 24], 1.0);
        assert_eq!(hl.data()[24 * 48 + 24 + 3], 1.0);
        assert_eq!(hl.data()[24 * 48 + 24 + 4], 0.0);
    }

    #[test]
    fn bond_highlights_swap() {
        let v = Vocabulary::small();
        let g = geom();
        let x = Grid::filled(128, 128, 0.0f32);
        let s = SegmentationMaps::one_hot(&LabelMaps::empty(128, 128), &v).unwrap();
        let (a, b) = (Pixel::new(64, 52), Pixel::new(64, 76));
        let ab = assemble_bond_input(&s.bonds, &x, (a, b), &g).unwrap();
        let ba = assemble_bond_input(&s.bonds, &x, (b, a), &g).unwrap();
        assert_eq!(ab.channels(), v.n_bonds() + 3);
        let (h1, h2) = (ab.highlight(), ba.highlight());
        let plane = 48 * 48;
        assert_eq!(&h1.data()[..plane], &h2.data()[plane..]);
        assert_eq!(&h1.data()[plane..], &h2.data()[..plane]);
        // horizontal pair: rows 23..=25 (width 4 means |d| < 2), abutting at col 24
        let on = |d: &[f32], r: usize, c: usize| d[r * 48 + c] == 1.0;
        assert!(on(&h1.data()[..plane], 24, 12) && !on(&h1.data()[plane..], 24, 12));
        assert!(on(&h1.data()[plane..], 24, 36) && !on(&h1.data()[..plane], 24, 36));
        assert!(on(&h1.data()[..plane], 24, 24) && on(&h1.data()[plane..], 24, 24));
        assert!(!on(&h1.data()[..plane], 22, 12) && on(&h1.data()[..plane], 23, 12));
        let far = assemble_bond_input(&s.bonds, &x, (Pixel::new(64, 16), Pixel::new(64, 64)), &g);
        assert!(matches!(far, Err(Error::Candidate(_))));
    }

    #[test]
    fn weights_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::small();
        let net = ClsNet::new(ClassifierKind::Bond, &v, 3, 7).unwrap();
        let path = dir.path().join("bond.cgw1");
        save_weights(&path, &net.named_tensors(), &net.meta(12, 7, None)).unwrap();
        let (back, meta) = ClsNet::from_file(ClassifierKind::Bond, &path).unwrap();
        assert_eq!(meta.steps, 12);
        assert_eq!(back.named_tensors(), net.named_tensors());
        assert!(matches!(ClsNet::from_file(ClassifierKind::Atom, &path), Err(Error::Format(_))));
        assert!(SegNet::from_file(&path).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }
}
