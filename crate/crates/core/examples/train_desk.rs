//! Desk-scale training from scratch: renders the default dataset, trains the
//! segmentation network and the atom and bond classifiers, then reports
//! validation F1 and the whole-graph error rate. The full default budget
//! takes about 11 minutes on one core; pass smaller step counts for a quick
//! look.
//!
//! cargo run --release --example train_desk -- [seg_steps] [cls_steps]

use std::time::Instant;

use ocsr::assembler::TrainedModel;
use ocsr::config::RunConfig;
use ocsr::datasets::{make_dataset, SampleSource};
use ocsr::eval::graph_error_rate;
use ocsr::networks::{train_segmentation, ClassifierKind, SegNet, TrainConfig};
use ocsr::pipeline::{evaluate_classifier, evaluate_segmentation, fit_classifier, recognize_all, segment_probabilities};
use ocsr::render::render_dataset;

fn main() -> ocsr::Result<()> {
    let mut cfg = RunConfig::default();
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("step counts must be integers"));
    cfg.seg.steps = args.next().unwrap_or(cfg.seg.steps);
    cfg.cls.steps = args.next().unwrap_or(cfg.cls.steps);
    let t0 = Instant::now();
    let (train, _) = render_dataset(&cfg.dataset_spec(0)?)?;
    let (val, _) = render_dataset(&cfg.dataset_spec(1)?)?;
    println!("{} train / {} val images in {:.1}s", train.len(), val.len(), t0.elapsed().as_secs_f64());

    let mut seg = SegNet::new(&cfg.vocab, cfg.seg.hidden, cfg.seed)?;
    let tc = TrainConfig { adam: RunConfig::adam(cfg.seg.lr), ..TrainConfig::new(cfg.seg.steps, 1, cfg.seed) };
    let mut window = 0.0;
    train_segmentation(&mut seg, &train, &tc, 0, |step, loss| {
        window += loss;
        if (step + 1) % 250 == 0 {
            println!("seg {:>5}  loss {:>8.1}  {:>4.0}s", step + 1, window / 250.0, t0.elapsed().as_secs_f64());
            window = 0.0;
        }
    })?;
    let pixels = evaluate_segmentation(&seg, &val)?;
    println!("segmentation macro pixel F1 {:.3}", pixels.macro_f1_non_empty().unwrap_or(0.0));

    let geometry = cfg.geometry()?;
    let subset = &train[..cfg.cls.images.min(train.len())];
    let probs = segment_probabilities(&seg, subset)?;
    let val_probs = segment_probabilities(&seg, &val)?;
    let source = SampleSource { images: subset, probs: &probs, geometry };
    let val_source = SampleSource { images: &val, probs: &val_probs, geometry };
    let mut nets = Vec::new();
    for (i, kind) in [ClassifierKind::Atom, ClassifierKind::Bond].into_iter().enumerate() {
        let data = make_dataset(kind, subset, &cfg.vocab)?;
        let tc = TrainConfig {
            adam: RunConfig::adam(cfg.cls.lr),
            ..TrainConfig::new(cfg.cls.steps, cfg.cls.batch, cfg.seed + 1 + i as u64)
        };
        let (net, losses) = fit_classifier(&data, &source, cfg.cls.hidden, &tc, |_, _| {})?;
        let f1 = evaluate_classifier(&net, &make_dataset(kind, &val, &cfg.vocab)?, &val_source)?.f1();
        println!(
            "{} classifier: final loss {:.3}, val F1 {:?}",
            kind.name(),
            losses.last().copied().unwrap_or(f64::NAN),
            f1.iter().map(|x| x.map(|v| (v * 1000.0).round() / 1000.0)).collect::<Vec<_>>()
        );
        nets.push(net);
    }
    let bond = nets.pop().unwrap();
    let atom = nets.pop().unwrap();
    let model = TrainedModel::new(seg, atom, bond, None, geometry)?;
    let preds: Vec<_> = recognize_all(&model, &val)?.into_iter().map(|r| r.graph).collect();
    let truths: Vec<_> = val.iter().map(|i| i.truth.clone()).collect();
    let rate = graph_error_rate(&preds, &truths, cfg.bond_length as f64 / 2.0)?;
    println!("graph error rate {rate:.3} after {:.0}s", t0.elapsed().as_secs_f64());
    Ok(())
}
