//! One test per acceptance criterion. Each prints a single
//! `criterion N ...: PASS|FAIL` line to stderr, bypassing output capture.

mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use ocsr::assembler::{generate_bond_candidates, TrainedModel};
use ocsr::config::RunConfig;
use ocsr::eval::{frequency_correlation, graph_error_rate};
use ocsr::networks::{segmentation_loss, train_segmentation, ClassifierKind, ClsNet, SegNet, TrainConfig};
use ocsr::nn::pixelwise_cross_entropy;
use ocsr::pipeline::{cmd_gen, cmd_train, evaluate_classifier, evaluate_segmentation, load_model, recognize_all, segment_probabilities};
use ocsr::render::{read_dataset, render_dataset, LabelMaps};
use ocsr::datasets::{make_dataset, SampleSource};
use ocsr::{Element, Pixel, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, outcome: Result<String, String>) {
    let line = match &outcome {
        Ok(detail) => format!("criterion {n} {name}: PASS ({detail})\n"),
        Err(why) => format!("criterion {n} {name}: FAIL ({why})\n"),
    };
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    if let Err(why) = outcome {
        panic!("criterion {n} failed: {why}");
    }
}

#[test]
fn criterion_1_oracle_round_trip() {
    let t0 = Instant::now();
    let (total, failures) = oracle_round_trip_failures(&[1, 2, 3], 200);
    let secs = t0.elapsed().as_secs_f64();
    let outcome = if total != 1200 {
        Err(format!("ran {total} cases, expected 1200"))
    } else if !failures.is_empty() {
        Err(format!("{} of {total} wrong, first: {}", failures.len(), failures[0]))
    } else if secs >= 300.0 {
        Err(format!("took {secs:.0}s"))
    } else {
        Ok(format!("{total} graphs, error rate 0.0, {secs:.1}s"))
    };
    report(1, "oracle round trip", outcome);
}

#[test]
fn criterion_2_gradient_check() {
    let mut worst: (f64, &str) = (0.0, "");
    for seed in 0..3 {
        for (name, mut net, x) in gradient_cases(100 + seed) {
            let e = max_gradient_error(&mut net, &x, 1e-4);
            if e > worst.0 {
                worst = (e, name);
            }
        }
    }
    let detail = format!("max relative error {:.2e} ({})", worst.0, worst.1);
    report(2, "gradient correctness", if worst.0 < 1e-4 { Ok(detail) } else { Err(detail) });
}

#[test]
fn criterion_3_loss_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for n in 2..12 {
        let (h, w) = (rng.gen_range(1..20), rng.gen_range(1..20));
        let mut logits = random_tensor(&[n, h, w], &mut rng);
        logits.data_mut().iter_mut().for_each(|v| *v *= 8.0);
        let labels: Vec<u8> = (0..h * w).map(|_| rng.gen_range(0..n) as u8).collect();
        let (l, _) = pixelwise_cross_entropy(&logits, &labels).unwrap();
        worst = worst.max((l - naive_pixel_ce(&logits, &labels)).abs());
    }
    let v = Vocabulary::default();
    let mut sums_exact = true;
    for seed in 0..5 {
        let net = SegNet::new(&v, 4, seed).unwrap();
        let mut maps = LabelMaps::empty(24, 24);
        for k in 0..24 * 24 {
            maps.atoms.data_mut()[k] = rng.gen_range(0..v.n_atoms()) as u8;
            maps.bonds.data_mut()[k] = rng.gen_range(0..v.n_bonds()) as u8;
            maps.charges.data_mut()[k] = rng.gen_range(0..v.n_charges()) as u8;
        }
        let x = ocsr::Grid::from_vec(24, 24, (0..576).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let out = net.net.forward(&ocsr::networks::image_tensor(&x)).unwrap();
        let l = segmentation_loss(&out, &maps, &v).unwrap();
        sums_exact &= l.total == l.atoms + l.bonds + l.charges;
    }
    let outcome = match (worst < 1e-6, sums_exact) {
        (true, true) => Ok(format!("max |pixelwise - naive| {worst:.1e}, total = sum of parts")),
        (false, _) => Err(format!("pixelwise loss off by {worst:.1e}")),
        (_, false) => Err("total differs from the sum of partial losses".into()),
    };
    report(3, "loss equivalences", outcome);
}

#[test]
fn criterion_4_candidate_boundary() {
    let mut checked = 0usize;
    let mut wrong = Vec::new();
    for bl in [16, 24, 40, 57] {
        let span = 3 * bl;
        for dr in -span..=span {
            for dc in -span..=span {
                let nodes = [Pixel::new(200, 200), Pixel::new(200 + dr, 200 + dc)];
                let got = !generate_bond_candidates(&nodes, bl).is_empty();
                let want = ((dr * dr + dc * dc) as f64).sqrt() < 2.0 * bl as f64;
                checked += 1;
                if got != want {
                    wrong.push(format!("bl {bl} offset ({dr},{dc})"));
                }
            }
        }
        let edge = |d: i32| !generate_bond_candidates(&[Pixel::new(0, 0), Pixel::new(0, d)], bl).is_empty();
        if edge(2 * bl) || !edge(2 * bl - 1) {
            wrong.push(format!("bl {bl}: axis boundary"));
        }
    }
    let outcome = if wrong.is_empty() {
        Ok(format!("{checked} offsets, 2bl excluded, 2bl-1 included"))
    } else {
        Err(format!("{} mismatches, first {}", wrong.len(), wrong[0]))
    };
    report(4, "candidate boundaries", outcome);
}

fn with_dirs(mut cfg: RunConfig, root: &Path) -> RunConfig {
    cfg.paths.data = root.join("data");
    cfg.paths.models = root.join("models");
    cfg.paths.out = root.join("out");
    cfg
}

fn desk_scale() -> Result<String, String> {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_dirs(RunConfig::default(), dir.path());
    let e = |x: ocsr::Error| x.to_string();
    if cfg.vocab != Vocabulary::small() || cfg.data.train != 2000 || cfg.data.val != 200 || cfg.canvas != [128, 128] {
        return Err("default configuration is not the desk setup".into());
    }
    cmd_gen(&cfg).map_err(e)?;
    for net in ["seg", "atom", "bond"] {
        cmd_train(&cfg, net, None, false).map_err(e)?;
    }
    let model = load_model(&cfg).map_err(e)?;
    let (val, manifest) = read_dataset(&cfg.split_dir(1)).map_err(e)?;
    if manifest.spec.style.style_id != 1 || manifest.spec.gen.stereo_prob != 0.0 {
        return Err("validation split is not style 1 without stereo".into());
    }
    let macro_f1 = evaluate_segmentation(&model.seg, &val).map_err(e)?.macro_f1_non_empty().unwrap_or(0.0);
    let probs = segment_probabilities(&model.seg, &val).map_err(e)?;
    let src = SampleSource { images: &val, probs: &probs, geometry: model.geometry };
    let mut min_cls: f64 = 1.0;
    for (kind, net) in [(ClassifierKind::Atom, &model.atom), (ClassifierKind::Bond, &model.bond)] {
        let data = make_dataset(kind, &val, &cfg.vocab).map_err(e)?;
        let f1 = evaluate_classifier(net, &data, &src).map_err(e)?.f1();
        min_cls = f1.iter().flatten().fold(min_cls, |m, &x| m.min(x));
    }
    let truths: Vec<_> = val.iter().map(|i| i.truth.clone()).collect();
    let tol = cfg.bond_length as f64 / 2.0;
    let graphs = |m: &TrainedModel| -> Result<Vec<_>, String> {
        Ok(recognize_all(m, &val).map_err(e)?.into_iter().map(|r| r.graph).collect())
    };
    let trained = graph_error_rate(&graphs(&model)?, &truths, tol).map_err(e)?;
    let untrained_model = TrainedModel::new(
        SegNet::new(&cfg.vocab, cfg.seg.hidden, cfg.seed).map_err(e)?,
        ClsNet::new(ClassifierKind::Atom, &cfg.vocab, cfg.cls.hidden, cfg.seed + 1).map_err(e)?,
        ClsNet::new(ClassifierKind::Bond, &cfg.vocab, cfg.cls.hidden, cfg.seed + 2).map_err(e)?,
        None,
        model.geometry,
    )
    .map_err(e)?;
    let untrained = graph_error_rate(&graphs(&untrained_model)?, &truths, tol).map_err(e)?;
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "macro pixel F1 {macro_f1:.3}, min classifier F1 {min_cls:.3}, graph error {trained:.3} vs untrained {untrained:.3}, {secs:.0}s"
    );
    if macro_f1 >= 0.6 && min_cls >= 0.9 && trained <= 0.5 && trained < untrained && secs <= 1800.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[test]
fn criterion_5_desk_training() {
    report(5, "desk-scale training", desk_scale());
}

fn frequency_run() -> Result<String, String> {
    let e = |x: ocsr::Error| x.to_string();
    let mut cfg = RunConfig::default();
    cfg.vocab.elements.push(Element::S);
    cfg.data.train = 400;
    cfg.data.val = 100;
    cfg.data.element_weights = [(Element::C, 8.0), (Element::N, 3.0), (Element::O, 1.0), (Element::S, 0.32)].into();
    cfg.seg.hidden = 8;
    cfg.seg.steps = 600;
    let (train, manifest) = render_dataset(&cfg.dataset_spec(0).map_err(e)?).map_err(e)?;
    let (val, _) = render_dataset(&cfg.dataset_spec(1).map_err(e)?).map_err(e)?;
    let freq = &manifest.atom_class_frequency[1..];
    let rare = freq[cfg.vocab.atom_index(Element::S).unwrap() - 1];
    if !(0.01..=0.03).contains(&rare) {
        return Err(format!("rare element frequency {rare:.4} is not about 2%"));
    }
    let mut seg = SegNet::new(&cfg.vocab, cfg.seg.hidden, cfg.seed).map_err(e)?;
    let tc = TrainConfig { adam: RunConfig::adam(cfg.seg.lr), ..TrainConfig::new(cfg.seg.steps, 1, cfg.seed) };
    train_segmentation(&mut seg, &train, &tc, 0, |_, _| {}).map_err(e)?;
    let f1 = evaluate_segmentation(&seg, &val).map_err(e)?.atoms.f1();
    let rho = frequency_correlation(&f1[1..], freq);
    let show = |v: &[Option<f64>]| v.iter().map(|x| x.map_or("NA".into(), |x| format!("{x:.2}"))).collect::<Vec<_>>().join("/");
    let detail = format!(
        "C/N/O/S frequency {}, pixel F1 {}, rho {}",
        freq.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/"),
        show(&f1[1..]),
        rho.map_or("undefined".into(), |r| format!("{r:.2}"))
    );
    match rho {
        Some(r) if r > 0.0 => Ok(detail),
        _ => Err(detail),
    }
}

#[test]
fn criterion_6_frequency_correlation() {
    report(6, "frequency correlation", frequency_run());
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Result<String, String> {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(
            d.join("run.toml"),
            "seed = 11\n[data]\ntrain = 12\nval = 4\ntest = 0\nmax_atoms = 6\n\
             [seg]\nhidden = 4\nsteps = 30\n[cls]\nhidden = 4\nsteps = 10\nbatch = 8\nimages = 12\n",
        )
        .unwrap();
        let steps: [&[&str]; 6] = [
            &["gen"],
            &["train", "seg"],
            &["train", "atom"],
            &["train", "bond"],
            &["infer", "data/val", "-o", "pred"],
            &["eval", "pred", "data/val", "--models", "-o", "report.csv"],
        ];
        for args in steps {
            let out = Command::new(env!("CARGO_BIN_EXE_ocsr"))
                .current_dir(d)
                .args(["-c", "run.toml", "--deterministic"])
                .args(args)
                .output()
                .unwrap();
            if !matches!(out.status.code(), Some(0) | Some(2)) {
                return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
        }
        runs.push(tree(d));
    }
    let (a, b) = (&runs[0], &runs[1]);
    let count = |ext: &str| a.iter().filter(|(p, _)| p.ends_with(ext)).count();
    if count(".cgw1") != 3 || count("report.csv") != 1 || count("manifest.json") != 2 {
        return Err("expected weights, datasets or report are missing".into());
    }
    if a.len() != b.len() {
        return Err(format!("{} files vs {}", a.len(), b.len()));
    }
    for ((pa, da), (pb, db)) in a.iter().zip(b) {
        if pa != pb || da != db {
            return Err(format!("{pa} differs"));
        }
    }
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

#[test]
fn criterion_7_determinism() {
    report(7, "determinism", determinism());
}

#[test]
fn criterion_8_molfile_interop() {
    let outcome = match rdkit_molfile_mismatches(100) {
        Ok(bad) if bad.is_empty() => Ok("100 MOLfiles match RDKit".into()),
        Ok(bad) => Err(format!("{} mismatches, first: {}", bad.len(), bad[0])),
        Err(why) => Err(why),
    };
    report(8, "MOLfile interop", outcome);
}

