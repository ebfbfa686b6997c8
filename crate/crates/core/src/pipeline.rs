//! End-to-end workflow: the building blocks shared by the `ocsr` binary,
//! the examples and the acceptance tests, and the subcommands themselves.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembler::{build_graph, Flag, Provenance, ReadoutModel, Recognition, Recognizer, TrainedModel};
use crate::config::RunConfig;
use crate::datasets::{make_dataset, CandidateDataset, SampleSource};
use crate::error::{Error, Result};
use crate::eval::{
    classifier_counts, frequency_correlation, graph_error_rate, pixel_counts, ConfusionCounts, EvalReport, PixelCounts,
};
use crate::molgraph::{from_json, parse_smiles, to_json, to_molfile, to_smiles, GraphJson, MolGraph};
use crate::networks::{
    save_weights, train_classifier, train_segmentation, ClassifierKind, ClsNet, SegNet, SegmentationMaps, TrainConfig,
};
use crate::render::{
    binarize, read_dataset, read_manifest, read_pgm_image, read_pgm_labels, render_dataset, write_dataset, LabelMaps,
    LabeledImage,
};
use crate::vocab::Vocabulary;

/// Softmax probabilities of the segmentation network on each image.
pub fn segment_probabilities(seg: &SegNet, images: &[LabeledImage]) -> Result<Vec<SegmentationMaps>> {
    images.iter().map(|i| Ok(seg.forward(&i.x)?.probabilities())).collect()
}

/// Probabilities of the one-hot ground-truth scores.
pub fn oracle_probabilities(images: &[LabeledImage], vocab: &Vocabulary) -> Result<Vec<SegmentationMaps>> {
    images
        .iter()
        .map(|i| Ok(SegmentationMaps::one_hot(&i.maps, vocab)?.probabilities()))
        .collect()
}

/// Accumulated pixel confusion counts of `seg` over `images`.
pub fn evaluate_segmentation(seg: &SegNet, images: &[LabeledImage]) -> Result<PixelCounts> {
    let mut total: Option<PixelCounts> = None;
    for item in images {
        let c = pixel_counts(&seg.forward(&item.x)?, &item.maps)?;
        match total.as_mut() {
            Some(t) => t.merge(&c)?,
            None => total = Some(c),
        }
    }
    total.ok_or_else(|| crate::Error::Dataset("no images to evaluate".into()))
}

/// Trains a fresh classifier of `data.kind` on windows cut from `source`.
pub fn fit_classifier(
    data: &CandidateDataset,
    source: &SampleSource,
    hidden: usize,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<(ClsNet, Vec<f64>)> {
    let mut net = ClsNet::new(data.kind, &data.vocab, hidden, cfg.seed)?;
    let losses = train_classifier(
        &mut net,
        data.len(),
        |i| {
            let s = &data.samples[i];
            Ok((source.input(s)?, s.label as usize))
        },
        cfg,
        0,
        &mut on_step,
    )?;
    Ok((net, losses))
}

/// Logits of `net` on every sample of `data`.
pub fn classifier_logits(net: &ClsNet, data: &CandidateDataset, source: &SampleSource) -> Result<Vec<Vec<f32>>> {
    data.samples.iter().map(|s| net.forward(&source.input(s)?)).collect()
}

pub fn evaluate_classifier(net: &ClsNet, data: &CandidateDataset, source: &SampleSource) -> Result<ConfusionCounts> {
    let logits = classifier_logits(net, data, source)?;
    let labels: Vec<usize> = data.samples.iter().map(|s| s.label as usize).collect();
    classifier_counts(&logits, &labels, data.n_classes())
}

/// Runs the graph builder on every image.
pub fn recognize_all(model: &dyn Recognizer, images: &[LabeledImage]) -> Result<Vec<Recognition>> {
    images.iter().map(|i| build_graph(&i.x, model)).collect()
}

pub fn kind_for(name: &str) -> Option<ClassifierKind> {
    ClassifierKind::ALL.into_iter().find(|k| k.name() == name)
}

/// Renders the train, val and test splits into `paths.data` and stores a
/// copy of the config next to them.
pub fn cmd_gen(cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.paths.data)?;
    for split in 0..3 {
        let spec = cfg.dataset_spec(split)?;
        if spec.n == 0 {
            continue;
        }
        let (items, mut manifest) = render_dataset(&spec)?;
        manifest.config_hash = Some(hash.clone());
        write_dataset(&cfg.split_dir(split), &items, &manifest)?;
        log::info!("{}: {} images", cfg.split_dir(split).display(), items.len());
    }
    fs::write(cfg.paths.data.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

/// Network names accepted by [`cmd_train`].
pub const NETWORKS: [&str; 4] = ["seg", "atom", "bond", "charge"];

pub fn weights_path(cfg: &RunConfig, network: &str) -> PathBuf {
    cfg.paths.models.join(format!("{network}.cgw1"))
}

fn loss_csv(hash: &str, start: usize, losses: &[f64]) -> String {
    let mut out = format!("# config_hash: {hash}\nstep,loss\n");
    for (k, l) in losses.iter().enumerate() {
        writeln!(out, "{},{l:.6}", start + k + 1).unwrap();
    }
    out
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: PathBuf,
    /// Step number of the first step of this run.
    pub start_step: usize,
    pub losses: Vec<f64>,
}

fn load_train_split(cfg: &RunConfig, limit: Option<usize>) -> Result<Vec<LabeledImage>> {
    let (mut items, manifest) = read_dataset(&cfg.split_dir(0))?;
    if manifest.spec.vocab != cfg.vocab {
        return Err(Error::Dataset("training data was generated for a different vocabulary".into()));
    }
    if let Some(n) = limit {
        items.truncate(n);
    }
    if items.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    Ok(items)
}

/// Trains one network on the train split and writes `<network>.cgw1`, its
/// metadata and `<network>_loss.csv` into `paths.models`.
///
/// `resume` continues from existing weights, numbering steps after theirs.
/// Optimizer moments start from zero. Classifiers read the segmentation
/// network from `paths.models` unless `oracle` is set, in which case their
/// inputs are cut from the ground-truth label maps.
pub fn cmd_train(cfg: &RunConfig, network: &str, resume: Option<&Path>, oracle: bool) -> Result<TrainOutcome> {
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.paths.models)?;
    let out = weights_path(cfg, network);
    let (start, losses, tensors, meta) = if network == "seg" {
        let items = load_train_split(cfg, None)?;
        let (mut net, start) = match resume {
            Some(p) => {
                let (net, meta) = SegNet::from_file(p)?;
                (net, meta.steps)
            }
            None => (SegNet::new(&cfg.vocab, cfg.seg.hidden, cfg.seed)?, 0),
        };
        let tc = TrainConfig {
            adam: RunConfig::adam(cfg.seg.lr),
            ..TrainConfig::new(cfg.seg.steps, 1, cfg.seed)
        };
        let losses = train_segmentation(&mut net, &items, &tc, start, |s, l| log::debug!("step {s} loss {l}"))?;
        let meta = net.meta(start + losses.len(), cfg.seed, Some(hash.clone()));
        (start, losses, net.named_tensors(), meta)
    } else {
        let kind = kind_for(network).ok_or_else(|| Error::Usage(format!("unknown network `{network}`")))?;
        let items = load_train_split(cfg, Some(cfg.cls.images))?;
        let probs = if oracle {
            oracle_probabilities(&items, &cfg.vocab)?
        } else {
            let (seg, _) = SegNet::from_file(&weights_path(cfg, "seg"))?;
            segment_probabilities(&seg, &items)?
        };
        let data = make_dataset(kind, &items, &cfg.vocab)?;
        data.save(&cfg.split_dir(0).join("candidates"), kind.name(), items.len(), Some(hash.clone()))?;
        let source = SampleSource {
            images: &items,
            probs: &probs,
            geometry: cfg.geometry()?,
        };
        let seed = cfg.seed + 1 + ClassifierKind::ALL.iter().position(|&k| k == kind).unwrap() as u64;
        let (mut net, start) = match resume {
            Some(p) => {
                let (net, meta) = ClsNet::from_file(kind, p)?;
                (net, meta.steps)
            }
            None => (ClsNet::new(kind, &cfg.vocab, cfg.cls.hidden, seed)?, 0),
        };
        let tc = TrainConfig {
            adam: RunConfig::adam(cfg.cls.lr),
            ..TrainConfig::new(cfg.cls.steps, cfg.cls.batch, seed)
        };
        let losses = train_classifier(
            &mut net,
            data.len(),
            |i| {
                let s = &data.samples[i];
                Ok((source.input(s)?, s.label as usize))
            },
            &tc,
            start,
            |s, l| log::debug!("step {s} loss {l}"),
        )?;
        let meta = net.meta(start + losses.len(), seed, Some(hash.clone()));
        (start, losses, net.named_tensors(), meta)
    };
    save_weights(&out, &tensors, &meta)?;
    fs::write(
        cfg.paths.models.join(format!("{network}_loss.csv")),
        loss_csv(&hash, start, &losses),
    )?;
    Ok(TrainOutcome {
        weights: out,
        start_step: start,
        losses,
    })
}

/// Loads the four networks from `paths.models`. The charge classifier may
/// be missing when the vocabulary has no charges.
pub fn load_model(cfg: &RunConfig) -> Result<TrainedModel> {
    let (seg, _) = SegNet::from_file(&weights_path(cfg, "seg"))?;
    let (atom, _) = ClsNet::from_file(ClassifierKind::Atom, &weights_path(cfg, "atom"))?;
    let (bond, _) = ClsNet::from_file(ClassifierKind::Bond, &weights_path(cfg, "bond"))?;
    let charge_path = weights_path(cfg, "charge");
    let charge = if charge_path.exists() || cfg.vocab.n_charges() > 1 {
        Some(ClsNet::from_file(ClassifierKind::Charge, &charge_path)?.0)
    } else {
        None
    };
    TrainedModel::new(seg, atom, bond, charge, cfg.geometry()?)
}

/// Output record written as `<stem>.json` for every recognized image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferRecord {
    pub image: String,
    pub config_hash: String,
    pub graph: GraphJson,
    pub flags: Vec<Flag>,
    pub provenance: Provenance,
}

fn is_label_map(name: &str) -> bool {
    [".atoms.pgm", ".bonds.pgm", ".charges.pgm"].iter().any(|s| name.ends_with(s))
}

/// The input images: `input` itself, or every image `.pgm` in it (label
/// maps excluded), sorted by name.
pub fn input_images(input: &Path) -> Result<Vec<PathBuf>> {
    if !input.is_dir() {
        if !input.exists() {
            return Err(Error::Usage(format!("{} does not exist", input.display())));
        }
        return Ok(vec![input.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(input)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".pgm") && !is_label_map(name) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

fn read_labels(path: &Path) -> Result<crate::grid::Grid<u8>> {
    let f = File::open(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    read_pgm_labels(BufReader::new(f))
}

fn sibling_maps(image: &Path) -> Result<LabelMaps> {
    let dir = image.parent().unwrap_or(Path::new("."));
    let stem = stem_of(image);
    Ok(LabelMaps {
        atoms: read_labels(&dir.join(format!("{stem}.atoms.pgm")))?,
        bonds: read_labels(&dir.join(format!("{stem}.bonds.pgm")))?,
        charges: read_labels(&dir.join(format!("{stem}.charges.pgm")))?,
    })
}

/// Counts from one inference run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferOutcome {
    pub images: usize,
    pub flagged: usize,
}

/// Recognizes every input image and writes `<stem>.mol`, `<stem>.smi` and
/// `<stem>.json` into `out`. Graphs that fail validation get only the JSON
/// record, whose flags say why. With `oracle` the label maps stored next to
/// each image stand in for the networks.
pub fn cmd_infer(cfg: &RunConfig, input: &Path, out: &Path, oracle: bool) -> Result<InferOutcome> {
    let images = input_images(input)?;
    if images.is_empty() {
        return Err(Error::Usage(format!("no images in {}", input.display())));
    }
    let trained = if oracle { None } else { Some(load_model(cfg)?) };
    let geom = cfg.geometry()?;
    let hash = cfg.hash();
    fs::create_dir_all(out)?;
    let mut flagged = 0;
    for path in &images {
        let f = File::open(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        let x = binarize(&read_pgm_image(BufReader::new(f))?, cfg.threshold)?;
        let rec = match &trained {
            Some(m) => build_graph(&x, m)?,
            None => build_graph(&x, &ReadoutModel::new(sibling_maps(path)?, &cfg.vocab, geom))?,
        };
        let stem = stem_of(path);
        if rec.is_flagged() {
            flagged += 1;
        } else {
            fs::write(out.join(format!("{stem}.mol")), to_molfile(&rec.graph, cfg.bond_length as f64)?)?;
            fs::write(out.join(format!("{stem}.smi")), to_smiles(&rec.graph)? + "\n")?;
        }
        let record = InferRecord {
            image: path.display().to_string(),
            config_hash: hash.clone(),
            graph: GraphJson::from(&rec.graph),
            flags: rec.flags,
            provenance: rec.provenance,
        };
        fs::write(out.join(format!("{stem}.json")), serde_json::to_string_pretty(&record)? + "\n")?;
    }
    Ok(InferOutcome {
        images: images.len(),
        flagged,
    })
}

/// Name of the graph-accuracy set a dataset belongs to.
pub fn set_name(style_id: u8, stereo: bool) -> String {
    format!("style{style_id}_{}", if stereo { "stereo" } else { "plain" })
}

/// Compares the predictions in `pred_dir` with the dataset in `truth_dir`.
///
/// Config hashes of the truth manifest and of every prediction must match
/// `cfg` unless `force` is set. With `with_models` the networks in
/// `paths.models` are also scored: pixel F1 of the segmentation, per-class
/// F1 of each classifier on the truth candidates, and the rank correlation
/// between atom F1 and training-set element frequency.
pub fn cmd_eval(cfg: &RunConfig, pred_dir: &Path, truth_dir: &Path, force: bool, with_models: bool) -> Result<EvalReport> {
    let hash = cfg.hash();
    let check = |what: &str, h: Option<&str>| -> Result<()> {
        if !force && h != Some(hash.as_str()) {
            return Err(Error::Usage(format!(
                "{what} carries config hash {}, expected {hash} (use --force to compare anyway)",
                h.unwrap_or("none")
            )));
        }
        Ok(())
    };
    let (truth_items, manifest) = read_dataset(truth_dir)?;
    check(&truth_dir.join("manifest.json").display().to_string(), manifest.config_hash.as_deref())?;
    let mut preds = Vec::with_capacity(truth_items.len());
    for id in 0..truth_items.len() {
        let path = pred_dir.join(format!("{id:05}.json"));
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Dataset(format!("missing prediction {}: {e}", path.display())))?;
        let rec: InferRecord = serde_json::from_str(&text)?;
        check(&path.display().to_string(), Some(&rec.config_hash))?;
        preds.push(rec.graph.to_graph()?);
    }
    let truths: Vec<MolGraph> = truth_items.iter().map(|i| i.truth.clone()).collect();
    let mut report = EvalReport::default();
    let set = set_name(manifest.spec.style.style_id, manifest.spec.gen.stereo_prob > 0.0);
    let rate = graph_error_rate(&preds, &truths, cfg.bond_length as f64 / 2.0)?;
    report.add_value("graph_error_rate", &set, "all", Some(rate), truths.len());

    if with_models {
        let model = load_model(cfg)?;
        let pc = evaluate_segmentation(&model.seg, &truth_items)?;
        report.add_counts("pixel_f1", "atoms", &cfg.vocab.atom_names(), &pc.atoms);
        report.add_counts("pixel_f1", "bonds", &cfg.vocab.bond_names(), &pc.bonds);
        report.add_counts("pixel_f1", "charges", &cfg.vocab.charge_names(), &pc.charges);
        report.add_value("macro_pixel_f1_non_empty", "all", "all", pc.macro_f1_non_empty(), truth_items.len());
        let probs = segment_probabilities(&model.seg, &truth_items)?;
        let source = SampleSource {
            images: &truth_items,
            probs: &probs,
            geometry: model.geometry,
        };
        let mut atom_f1 = None;
        for (kind, net) in [
            (ClassifierKind::Atom, Some(&model.atom)),
            (ClassifierKind::Bond, Some(&model.bond)),
            (ClassifierKind::Charge, model.charge.as_ref()),
        ] {
            let Some(net) = net else { continue };
            let data = make_dataset(kind, &truth_items, &cfg.vocab)?;
            let counts = evaluate_classifier(net, &data, &source)?;
            report.add_counts("classifier_f1", kind.name(), &data.class_names(), &counts);
            if kind == ClassifierKind::Atom {
                atom_f1 = Some(counts.f1());
            }
        }
        if let (Some(f1), Ok(train)) = (atom_f1, read_manifest(&cfg.split_dir(0))) {
            let n = f1.len() - 1;
            let rho = frequency_correlation(&f1[1..], &train.atom_class_frequency[1..]);
            report.add_value("spearman_f1_frequency", "atom", "all", rho, n);
        }
    }
    Ok(report)
}

/// Output formats of [`cmd_export`].
pub const EXPORT_FORMATS: [&str; 3] = ["mol", "smiles", "json"];

/// Converts a graph between formats. `input` is a graph JSON file, an
/// inference record, a `.smi` file or, failing those, a SMILES string.
pub fn cmd_export(input: &str, format: &str, bond_length: i32) -> Result<String> {
    let path = Path::new(input);
    let g = if path.is_file() {
        let text = fs::read_to_string(path)?;
        if input.ends_with(".json") {
            match serde_json::from_str::<InferRecord>(&text) {
                Ok(rec) => rec.graph.to_graph()?,
                Err(_) => from_json(&text)?,
            }
        } else {
            parse_smiles(text.trim())?
        }
    } else {
        parse_smiles(input)?
    };
    match format {
        "mol" => to_molfile(&g, bond_length as f64),
        "smiles" => Ok(to_smiles(&g)? + "\n"),
        "json" => Ok(to_json(&g) + "\n"),
        other => Err(Error::Usage(format!("unknown format `{other}` (expected mol, smiles or json)"))),
    }
}
