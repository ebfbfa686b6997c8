use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierInput, ClsNet, SegNet, SegmentationMaps};
use crate::error::{Error, Result};
use crate::nn::{pixelwise_cross_entropy, softmax_cross_entropy, Adam, AdamConfig, Gradients, Network, Tensor};
use crate::render::{LabelMaps, LabeledImage};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    /// Samples per step; segmentation always uses 1.
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn new(steps: usize, batch: usize, seed: u64) -> Self {
        TrainConfig {
            steps,
            batch,
            seed,
            adam: AdamConfig::default(),
        }
    }
}

/// Visits sample indices epoch by epoch, each epoch a fresh shuffle drawn
/// from `(seed, epoch)`.
struct Order {
    n: usize,
    seed: u64,
    epoch: usize,
    perm: Vec<usize>,
}

impl Order {
    fn new(n: usize, seed: u64) -> Self {
        Order {
            n,
            seed,
            epoch: usize::MAX,
            perm: Vec::new(),
        }
    }

    fn at(&mut self, t: usize) -> usize {
        let e = t / self.n;
        if e != self.epoch {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(e as u64);
            self.perm = (0..self.n).collect();
            self.perm.shuffle(&mut rng);
            self.epoch = e;
        }
        self.perm[t % self.n]
    }
}

fn check_finite(step: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step, loss })
    }
}

fn apply(net: &mut Network, adam: &mut Adam, grads: &Gradients) -> Result<()> {
    let mut params = net.params_mut();
    adam.step(&mut params, grads)
}

/// Segmentation loss of one image: the pixelwise cross-entropy of each map
/// and their sum.
#[derive(Debug, Clone)]
pub struct SegmentationLoss {
    pub atoms: f32,
    pub bonds: f32,
    pub charges: f32,
    pub total: f32,
    /// Gradient with respect to the stacked `[n_a + n_b + n_c, rows, cols]`
    /// network output.
    pub grad: Tensor,
}

pub fn segmentation_loss(out: &Tensor, maps: &LabelMaps, vocab: &Vocabulary) -> Result<SegmentationLoss> {
    let s = SegmentationMaps::split(out, vocab)?;
    let (atoms, ga) = pixelwise_cross_entropy(&s.atoms, maps.atoms.data())?;
    let (bonds, gb) = pixelwise_cross_entropy(&s.bonds, maps.bonds.data())?;
    let (charges, gc) = pixelwise_cross_entropy(&s.charges, maps.charges.data())?;
    Ok(SegmentationLoss {
        atoms,
        bonds,
        charges,
        total: atoms + bonds + charges,
        grad: Tensor::concat_channels(&[&ga, &gb, &gc])?,
    })
}

/// Trains for `cfg.steps` steps of one image each, numbered from
/// `start_step`. Returns the per-step losses and calls `on_step` after each.
pub fn train_segmentation(
    net: &mut SegNet,
    data: &[LabeledImage],
    cfg: &TrainConfig,
    start_step: usize,
    mut on_step: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Dataset("segmentation training set is empty".into()));
    }
    let mut adam = Adam::for_params(cfg.adam, &net.net.params_mut());
    let mut order = Order::new(data.len(), cfg.seed);
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut epoch_total = 0.0;
    for step in start_step..start_step + cfg.steps {
        let item = &data[order.at(step)];
        let out = net.net.forward_record(&super::image_tensor(&item.x))?;
        let sl = segmentation_loss(&out, &item.maps, &net.vocab)?;
        let (loss, grad) = (sl.total as f64, sl.grad);
        check_finite(step, loss)?;
        let mut grads = net.net.zero_gradients();
        net.net.backward(&grad, &mut grads)?;
        apply(&mut net.net, &mut adam, &grads)?;
        losses.push(loss);
        on_step(step, loss);
        epoch_total += loss;
        if (step + 1) % data.len() == 0 {
            log::info!("segmentation epoch {} mean loss {:.4}", step / data.len(), epoch_total / data.len() as f64);
            epoch_total = 0.0;
        }
    }
    Ok(losses)
}

/// Trains on `n` samples produced on demand by `sample(i)`, with mini-batches
/// of `cfg.batch`. The step loss is the batch mean and so is the gradient.
pub fn train_classifier(
    net: &mut ClsNet,
    n: usize,
    mut sample: impl FnMut(usize) -> Result<(ClassifierInput, usize)>,
    cfg: &TrainConfig,
    start_step: usize,
    mut on_step: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Dataset(format!("{} classifier training set is empty", net.kind.name())));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut adam = Adam::for_params(cfg.adam, &net.net.params_mut());
    let mut order = Order::new(n, cfg.seed);
    let mut losses = Vec::with_capacity(cfg.steps);
    let scale = 1.0 / cfg.batch as f32;
    for step in start_step..start_step + cfg.steps {
        let mut grads = net.net.zero_gradients();
        let mut total = 0.0f32;
        for j in 0..cfg.batch {
            let (input, label) = sample(order.at(step * cfg.batch + j))?;
            net.check(&input)?;
            let out = net.net.forward_record(&input.data)?;
            let (loss, g) = softmax_cross_entropy(out.data(), label)?;
            total += loss;
            net.net.backward(&Tensor::from_vec(out.dims(), g)?, &mut grads)?;
        }
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
        let loss = (total * scale) as f64;
        check_finite(step, loss)?;
        apply(&mut net.net, &mut adam, &grads)?;
        losses.push(loss);
        on_step(step, loss);
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{Atom, Bond, BondKind, Element, MolGraph};
    use crate::networks::ClassifierKind;
    use crate::render::{render_labeled, RenderStyle};

    fn images(n: usize) -> Vec<LabeledImage> {
        let style = RenderStyle::preset(1, 16).unwrap();
        (0..n)
            .map(|k| {
                let c = 10 + (k as i32 % 4);
                let g = MolGraph::new(
                    vec![Atom::at(Element::C, 12, c), Atom::at(Element::O, 12, c + 16)],
                    vec![Bond::new(0, 1, if k % 2 == 0 { BondKind::Single } else { BondKind::Double })],
                );
                render_labeled(&g, &style, &Vocabulary::small(), (24, 48)).unwrap()
            })
            .collect()
    }

    fn weights(net: &Network) -> Vec<Vec<f32>> {
        net.params().into_iter().map(|(_, t)| t.data().to_vec()).collect()
    }

    #[test]
    fn segmentation_loss_falls() {
        let data = images(4);
        let mut net = SegNet::new(&Vocabulary::small(), 4, 3).unwrap();
        let mut cfg = TrainConfig::new(40, 1, 5);
        cfg.adam.lr = 1e-2;
        let losses = train_segmentation(&mut net, &data, &cfg, 0, |_, _| {}).unwrap();
        assert_eq!(losses.len(), 40);
        let head: f64 = losses[..4].iter().sum();
        let tail: f64 = losses[36..].iter().sum();
        assert!(tail < head, "{head} -> {tail}");
    }

    #[test]
    fn zero_lr_and_determinism() {
        let data = images(3);
        let mut net = SegNet::new(&Vocabulary::small(), 3, 1).unwrap();
        let before = weights(&net.net);
        let mut cfg = TrainConfig::new(3, 1, 0);
        cfg.adam.lr = 0.0;
        train_segmentation(&mut net, &data, &cfg, 0, |_, _| {}).unwrap();
        assert_eq!(weights(&net.net), before);

        cfg.adam.lr = 1e-3;
        let mut a = SegNet::new(&Vocabulary::small(), 3, 1).unwrap();
        let mut b = SegNet::new(&Vocabulary::small(), 3, 1).unwrap();
        let la = train_segmentation(&mut a, &data, &cfg, 0, |_, _| {}).unwrap();
        let lb = train_segmentation(&mut b, &data, &cfg, 0, |_, _| {}).unwrap();
        assert_eq!(la, lb);
        assert_eq!(weights(&a.net), weights(&b.net));
    }

    #[test]
    fn epochs_visit_every_sample() {
        let mut o = Order::new(5, 9);
        let mut first: Vec<usize> = (0..5).map(|t| o.at(t)).collect();
        let mut second: Vec<usize> = (5..10).map(|t| o.at(t)).collect();
        first.sort();
        second.sort();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
        assert_eq!(second, first);
    }

    fn toy(i: usize) -> Result<(ClassifierInput, usize)> {
        let v = Vocabulary::small();
        let label = i % 2;
        let n = v.n_atoms();
        let mut data = vec![0.0f32; (n + 2) * 8 * 8];
        if label == 1 {
            data[n * 64 + 3 * 8 + 4] = 1.0;
        }
        Ok((
            ClassifierInput {
                data: Tensor::from_vec(&[n + 2, 8, 8], data)?,
                seg_channels: n,
            },
            label,
        ))
    }

    #[test]
    fn classifier_separates_one_pixel() {
        let v = Vocabulary::small();
        let mut net = ClsNet::new(ClassifierKind::Atom, &v, 4, 2).unwrap();
        let mut cfg = TrainConfig::new(150, 8, 0);
        cfg.adam.lr = 1e-2;
        train_classifier(&mut net, 16, toy, &cfg, 0, |_, _| {}).unwrap();
        for i in 0..16 {
            let (x, y) = toy(i).unwrap();
            assert_eq!(super::super::argmax(&net.forward(&x).unwrap()), y);
        }
        let frozen = weights(&net.net);
        cfg.adam.lr = 0.0;
        cfg.steps = 2;
        train_classifier(&mut net, 16, toy, &cfg, 0, |_, _| {}).unwrap();
        assert_eq!(weights(&net.net), frozen);
    }
}
