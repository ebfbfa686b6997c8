#![allow(dead_code)]

use ocsr::nn::{softmax_cross_entropy, ConvSpec, Layer, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Direct-loop dense convolution with zero padding.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], spec: &ConvSpec) -> Tensor<f64> {
    let (c, h, wd) = x.chw().unwrap();
    let (o, k) = (spec.out_channels, spec.kernel);
    let (p, d) = (spec.padding as i64, spec.dilation as i64);
    let mut out = vec![0.0; o * h * wd];
    for oc in 0..o {
        for i in 0..h as i64 {
            for j in 0..wd as i64 {
                let mut acc = b[oc];
                for ic in 0..c {
                    for ky in 0..k as i64 {
                        for kx in 0..k as i64 {
                            let (r, col) = (i - p + ky * d, j - p + kx * d);
                            if r < 0 || col < 0 || r >= h as i64 || col >= wd as i64 {
                                continue;
                            }
                            let wv = w.data()[((oc * c + ic) * k + ky as usize) * k + kx as usize];
                            acc += wv * x.data()[(ic * h + r as usize) * wd + col as usize];
                        }
                    }
                }
                out[(oc * h + i as usize) * wd + j as usize] = acc;
            }
        }
    }
    Tensor::from_vec(&[o, h, wd], out).unwrap()
}

/// Softmax cross-entropy summed over pixels, written out per pixel with an
/// explicit log-sum-exp.
pub fn naive_pixel_ce(logits: &Tensor<f64>, labels: &[u8]) -> f64 {
    let (n, h, w) = logits.chw().unwrap();
    let mut total = 0.0;
    for p in 0..h * w {
        let v: Vec<f64> = (0..n).map(|k| logits.data()[k * h * w + p]).collect();
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        total += lse - v[labels[p] as usize];
    }
    total
}

fn loss_of(net: &Network<f64>, x: &Tensor<f64>, label: usize) -> f64 {
    let out = net.forward(x).unwrap();
    softmax_cross_entropy(out.data(), label % out.len()).unwrap().0
}

/// Largest relative difference between analytic and central-difference
/// gradients over every parameter and input entry, with the loss being
/// softmax cross-entropy over the flattened output.
pub fn max_gradient_error(net: &mut Network<f64>, x: &Tensor<f64>, eps: f64) -> f64 {
    let label = 1;
    let out = net.forward_record(x).unwrap();
    let (_, g) = softmax_cross_entropy(out.data(), label % out.len()).unwrap();
    let mut grads = net.zero_gradients();
    let gx = net.backward(&Tensor::from_vec(out.dims(), g).unwrap(), &mut grads).unwrap();
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    let mut worst: f64 = 0.0;
    let n_params = net.param_count();
    for p in 0..n_params {
        let len = net.params()[p].1.len();
        for i in 0..len {
            let orig = net.params()[p].1.data()[i];
            net.params_mut()[p].data_mut()[i] = orig + eps;
            let up = loss_of(net, x, label);
            net.params_mut()[p].data_mut()[i] = orig - eps;
            let down = loss_of(net, x, label);
            net.params_mut()[p].data_mut()[i] = orig;
            worst = worst.max(rel(grads[p].data()[i], (up - down) / (2.0 * eps)));
        }
    }
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        xp.data_mut()[i] = orig + eps;
        let up = loss_of(net, &xp, label);
        xp.data_mut()[i] = orig - eps;
        let down = loss_of(net, &xp, label);
        xp.data_mut()[i] = orig;
        worst = worst.max(rel(gx.data()[i], (up - down) / (2.0 * eps)));
    }
    worst
}

/// Networks covering every layer type alone and composed, with matching
/// random inputs.
pub fn gradient_cases(seed: u64) -> Vec<(&'static str, Network<f64>, Tensor<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv = |name: &str, spec: ConvSpec, rng: &mut ChaCha8Rng| -> Layer<f64> {
        let mut l = Layer::conv(name, spec, rng).unwrap();
        // non-zero biases so their gradients are exercised from a generic point
        if let Layer::Conv { bias, .. } | Layer::Separable { pointwise_bias: bias, .. } = &mut l {
            for v in bias.data_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        l
    };
    let mut cases = Vec::new();
    let x = random_tensor(&[2, 6, 7], &mut rng);
    cases.push(("conv3x3", Network::new(vec![conv("c", ConvSpec::same3x3(2, 3, 1), &mut rng)]), x.clone()));
    cases.push(("dilated", Network::new(vec![conv("c", ConvSpec::same3x3(2, 2, 2), &mut rng)]), x.clone()));
    cases.push(("pointwise", Network::new(vec![conv("c", ConvSpec::pointwise(2, 3), &mut rng)]), x.clone()));
    cases.push(("separable", Network::new(vec![conv("c", ConvSpec::separable3x3(2, 3), &mut rng)]), x.clone()));
    cases.push((
        "relu",
        Network::new(vec![conv("c", ConvSpec::same3x3(2, 2, 1), &mut rng), Layer::Relu]),
        x.clone(),
    ));
    cases.push((
        "maxpool",
        Network::new(vec![conv("c", ConvSpec::same3x3(2, 3, 1), &mut rng), Layer::GlobalMaxPool]),
        x.clone(),
    ));
    let x = random_tensor(&[3, 9, 9], &mut rng);
    cases.push((
        "composed",
        Network::new(vec![
            conv("a", ConvSpec::separable3x3(3, 4), &mut rng),
            Layer::Relu,
            conv("b", ConvSpec::same3x3(4, 4, 2), &mut rng),
            Layer::Relu,
            conv("c", ConvSpec::same3x3(4, 4, 4), &mut rng),
            Layer::Relu,
            Layer::GlobalMaxPool,
            conv("d", ConvSpec::pointwise(4, 3), &mut rng),
        ]),
        x,
    ));
    cases
}

const RDKIT_SCRIPT: &str = r#"
import json, sys
from rdkit import Chem
out = []
for block in json.load(sys.stdin):
    m = Chem.MolFromMolBlock(block, sanitize=True, removeHs=False)
    if m is None:
        out.append(None)
        continue
    bonds = []
    for b in m.GetBonds():
        p = b.GetPropsAsDict(True, True)
        bonds.append([b.GetBeginAtomIdx(), b.GetEndAtomIdx(), p.get("_MolFileBondType", 0), p.get("_MolFileBondStereo", 0)])
    out.append({"atoms": [[a.GetSymbol(), a.GetFormalCharge()] for a in m.GetAtoms()], "bonds": bonds})
json.dump(out, sys.stdout)
"#;

/// Parses the MOLfiles of `n` random molecules with RDKit and lists every
/// disagreement in atom and bond counts, elements, charges, bond orders and
/// wedge (1) / hash (6) flags.
pub fn rdkit_molfile_mismatches(n: u64) -> Result<Vec<String>, String> {
    use ocsr::molgraph::{random_molecule, to_molfile, GenParams};
    use ocsr::{BondKind, Vocabulary};
    use std::io::Write;
    use std::process::{Command, Stdio};

    let mut params = GenParams::for_vocabulary(&Vocabulary::default(), 24, (128, 128));
    params.stereo_prob = 0.3;
    let graphs: Vec<_> = (0..n).map(|s| random_molecule(9000 + s, &params).unwrap()).collect();
    let blocks: Vec<String> = graphs.iter().map(|g| to_molfile(g, 24.0).unwrap()).collect();
    let mut child = Command::new("python3")
        .args(["-c", RDKIT_SCRIPT])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot run python3: {e}"))?;
    child.stdin.take().unwrap().write_all(serde_json::to_string(&blocks).unwrap().as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    if !out.status.success() {
        return Err(format!("RDKit unavailable or failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let parsed: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;

    let mut bad = Vec::new();
    let mut stereo_seen = 0;
    for (k, (g, p)) in graphs.iter().zip(&parsed).enumerate() {
        if p.is_null() {
            bad.push(format!("molecule {k}: RDKit rejected the MOLfile"));
            continue;
        }
        let atoms = p["atoms"].as_array().unwrap();
        let bonds = p["bonds"].as_array().unwrap();
        if atoms.len() != g.atoms.len() || bonds.len() != g.bonds.len() {
            bad.push(format!("molecule {k}: counts {}/{} vs {}/{}", atoms.len(), bonds.len(), g.atoms.len(), g.bonds.len()));
            continue;
        }
        for (i, (a, r)) in g.atoms.iter().zip(atoms).enumerate() {
            if r[0].as_str() != Some(a.element.symbol()) || r[1].as_i64() != Some(a.charge as i64) {
                bad.push(format!("molecule {k} atom {i}: {r} vs {}{:+}", a.element.symbol(), a.charge));
            }
        }
        for (i, (b, r)) in g.bonds.iter().zip(bonds).enumerate() {
            let (order, flag) = match b.kind {
                BondKind::Single => (1, 0),
                BondKind::Double => (2, 0),
                BondKind::Triple => (3, 0),
                BondKind::Wedge => (1, 1),
                BondKind::Hash => (1, 6),
            };
            stereo_seen += (flag != 0) as usize;
            let want = serde_json::json!([b.a, b.b, order, flag]);
            if *r != want {
                bad.push(format!("molecule {k} bond {i}: {r} vs {want}"));
            }
        }
    }
    if stereo_seen == 0 {
        bad.push("no stereo bonds were exercised".into());
    }
    Ok(bad)
}

/// Renders `n` molecules per style and stereo setting and rebuilds them from
/// their own label maps, returning a description of every mismatch.
pub fn oracle_round_trip_failures(styles: &[u8], n: u64) -> (usize, Vec<String>) {
    use ocsr::assembler::{build_graph, ReadoutModel};
    use ocsr::molgraph::{graph_equal, random_molecule, GenParams};
    use ocsr::networks::Geometry;
    use ocsr::render::{render_labeled, RenderStyle};
    use ocsr::Vocabulary;

    let vocab = Vocabulary::default();
    let (bl, canvas) = (24, (128, 128));
    let mut total = 0;
    let mut failures = Vec::new();
    for &style in styles {
        let st = RenderStyle::preset(style, bl).unwrap();
        for stereo in [false, true] {
            let mut params = GenParams::for_vocabulary(&vocab, bl, canvas);
            if stereo {
                params.stereo_prob = 0.3;
                params.require_stereo = true;
            }
            for seed in 0..n {
                let g = random_molecule(seed * 7 + style as u64, &params).unwrap();
                let li = render_labeled(&g, &st, &vocab, canvas).unwrap();
                let model = ReadoutModel::new(li.maps.clone(), &vocab, Geometry::from_style(&st));
                let rec = build_graph(&li.x, &model).unwrap();
                let m = graph_equal(&rec.graph, &li.truth, bl as f64 / 2.0);
                total += 1;
                if !m.equal || rec.is_flagged() {
                    failures.push(format!("style {style} stereo {stereo} seed {seed}: {:?} {:?}", m.diff, rec.flags));
                }
            }
        }
    }
    (total, failures)
}
