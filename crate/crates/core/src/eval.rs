//! F1 scores, graph error rates, rank correlation and the CSV report.
//!
//! Per-class F1 is `2TP / (2TP + FP + FN)`; a class with no true or
//! predicted members has no F1 (`None`) and is left out of macro averages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::molgraph::{graph_equal, MolGraph};
use crate::networks::{argmax, SegmentationMaps};
use crate::render::LabelMaps;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
}

impl ConfusionCounts {
    pub fn new(n_classes: usize) -> Self {
        ConfusionCounts {
            tp: vec![0; n_classes],
            fp: vec![0; n_classes],
            fn_: vec![0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.tp.len()
    }

    pub fn add(&mut self, predicted: usize, truth: usize) {
        if predicted == truth {
            self.tp[truth] += 1;
        } else {
            self.fp[predicted] += 1;
            self.fn_[truth] += 1;
        }
    }

    pub fn from_labels(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
        }
        let mut c = ConfusionCounts::new(n_classes);
        for (&p, &t) in pred.iter().zip(truth) {
            if p >= n_classes || t >= n_classes {
                return Err(Error::Shape(format!("class {} outside {n_classes}", p.max(t))));
            }
            c.add(p, t);
        }
        Ok(c)
    }

    pub fn merge(&mut self, other: &ConfusionCounts) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::Shape("merging counts over different class sets".into()));
        }
        for k in 0..self.n_classes() {
            self.tp[k] += other.tp[k];
            self.fp[k] += other.fp[k];
            self.fn_[k] += other.fn_[k];
        }
        Ok(())
    }

    pub fn f1(&self) -> Vec<Option<f64>> {
        (0..self.n_classes())
            .map(|k| {
                let den = 2 * self.tp[k] + self.fp[k] + self.fn_[k];
                (den > 0).then(|| 2.0 * self.tp[k] as f64 / den as f64)
            })
            .collect()
    }
}

/// Mean of the defined entries, `None` if there are none.
pub fn macro_f1(f1: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = f1.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

fn grid_counts(pred: &Grid<u8>, truth: &Grid<u8>, n: usize) -> Result<ConfusionCounts> {
    if pred.dims() != truth.dims() {
        return Err(Error::Shape(format!("prediction {:?} vs truth {:?}", pred.dims(), truth.dims())));
    }
    let p: Vec<usize> = pred.data().iter().map(|&v| v as usize).collect();
    let t: Vec<usize> = truth.data().iter().map(|&v| v as usize).collect();
    ConfusionCounts::from_labels(&p, &t, n)
}

/// Pixel confusion counts for atoms, bonds and charges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub atoms: ConfusionCounts,
    pub bonds: ConfusionCounts,
    pub charges: ConfusionCounts,
}

impl PixelCounts {
    pub fn merge(&mut self, other: &PixelCounts) -> Result<()> {
        self.atoms.merge(&other.atoms)?;
        self.bonds.merge(&other.bonds)?;
        self.charges.merge(&other.charges)
    }

    /// Macro F1 over every defined non-Empty class of the three maps.
    pub fn macro_f1_non_empty(&self) -> Option<f64> {
        let all: Vec<Option<f64>> = [&self.atoms, &self.bonds, &self.charges]
            .iter()
            .flat_map(|c| c.f1().into_iter().skip(1))
            .collect();
        macro_f1(&all)
    }
}

pub fn pixel_counts(pred: &SegmentationMaps, truth: &LabelMaps) -> Result<PixelCounts> {
    let p = pred.argmax();
    Ok(PixelCounts {
        atoms: grid_counts(&p.atoms, &truth.atoms, pred.atoms.dims()[0])?,
        bonds: grid_counts(&p.bonds, &truth.bonds, pred.bonds.dims()[0])?,
        charges: grid_counts(&p.charges, &truth.charges, pred.charges.dims()[0])?,
    })
}

/// Per-class pixel F1 of the argmaxed prediction, for atoms, bonds and
/// charges in that order.
pub fn pixel_f1(pred: &SegmentationMaps, truth: &LabelMaps) -> Result<[Vec<Option<f64>>; 3]> {
    let c = pixel_counts(pred, truth)?;
    Ok([c.atoms.f1(), c.bonds.f1(), c.charges.f1()])
}

pub fn classifier_counts(logits: &[Vec<f32>], labels: &[usize], n_classes: usize) -> Result<ConfusionCounts> {
    let pred: Vec<usize> = logits.iter().map(|l| argmax(l)).collect();
    ConfusionCounts::from_labels(&pred, labels, n_classes)
}

pub fn classifier_f1(logits: &[Vec<f32>], labels: &[usize], n_classes: usize) -> Result<Vec<Option<f64>>> {
    Ok(classifier_counts(logits, labels, n_classes)?.f1())
}

/// Fraction of predictions that differ from their truth in any atom, bond,
/// element, charge or position beyond `pos_tol`.
pub fn graph_error_rate(preds: &[MolGraph], truths: &[MolGraph], pos_tol: f64) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::Shape(format!("{} predictions for {} truths", preds.len(), truths.len())));
    }
    if preds.is_empty() {
        return Err(Error::Shape("no graphs to compare".into()));
    }
    let wrong = preds
        .iter()
        .zip(truths)
        .filter(|(p, t)| !graph_equal(p, t, pos_tol).equal)
        .count();
    Ok(wrong as f64 / preds.len() as f64)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman's rho as the Pearson correlation of average ranks. `None` with
/// fewer than three points or when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman's rho between per-class F1 and training frequency over the
/// classes whose F1 is defined.
pub fn frequency_correlation(f1: &[Option<f64>], frequencies: &[f64]) -> Option<f64> {
    let (a, b): (Vec<f64>, Vec<f64>) = f1
        .iter()
        .zip(frequencies)
        .filter_map(|(f, &q)| f.map(|f| (f, q)))
        .unzip();
    spearman(&b, &a)
}

/// One CSV line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub group: String,
    pub class: String,
    pub value: Option<f64>,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    pub fn_: Option<usize>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

impl EvalReport {
    fn row(&mut self, metric: &str, group: &str, class: &str, value: Option<f64>) -> &mut ReportRow {
        self.rows.push(ReportRow {
            metric: metric.into(),
            group: group.into(),
            class: class.into(),
            value,
            tp: None,
            fp: None,
            fn_: None,
            n: None,
        });
        self.rows.last_mut().unwrap()
    }

    /// One `metric` row per class plus a `macro_<metric>` row.
    pub fn add_counts(&mut self, metric: &str, group: &str, names: &[String], counts: &ConfusionCounts) {
        let f1 = counts.f1();
        for (k, name) in names.iter().enumerate() {
            let r = self.row(metric, group, name, f1[k]);
            r.tp = Some(counts.tp[k]);
            r.fp = Some(counts.fp[k]);
            r.fn_ = Some(counts.fn_[k]);
        }
        self.row(&format!("macro_{metric}"), group, "all", macro_f1(&f1));
    }

    pub fn add_value(&mut self, metric: &str, group: &str, class: &str, value: Option<f64>, n: usize) {
        self.row(metric, group, class, value).n = Some(n);
    }

    pub fn get(&self, metric: &str, group: &str, class: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.group == group && r.class == class)
    }

    /// Comma-separated with a `# config_hash` comment line, `NA` for missing
    /// values.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = format!("# config_hash: {config_hash}\nmetric,group,class,value,tp,fp,fn,n\n");
        for r in &self.rows {
            let value = r.value.map(|v| format!("{v:.6}"));
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.metric,
                r.group,
                r.class,
                cell(value),
                cell(r.tp),
                cell(r.fp),
                cell(r.fn_),
                cell(r.n)
            )
            .unwrap();
        }
        out
    }
}

/// Reads the hash from the first line of a report written by
/// [`EvalReport::to_csv`].
pub fn csv_config_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix("# config_hash: ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{parse_smiles, Pixel};
    use crate::vocab::Vocabulary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f1_formula() {
        let mut c = ConfusionCounts::new(3);
        c.add(1, 1);
        c.add(1, 2);
        c.add(2, 1);
        assert_eq!(c.f1()[1], Some(0.5));
        assert_eq!(c.f1()[0], None);
        assert_eq!(c.f1()[2], Some(0.0));
        assert_eq!(macro_f1(&c.f1()), Some(0.25));
    }

    #[test]
    fn pixel_f1_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = Vocabulary::small();
        for _ in 0..20 {
            let mut pred = LabelMaps::empty(8, 8);
            let mut truth = LabelMaps::empty(8, 8);
            for p in pred.atoms.data_mut().iter_mut().chain(truth.atoms.data_mut()) {
                *p = rng.gen_range(0..4);
            }
            let scores = SegmentationMaps::one_hot(&pred, &v).unwrap();
            let [atoms, _, _] = pixel_f1(&scores, &truth).unwrap();
            for class in 0..4u8 {
                let (mut tp, mut fp, mut fnn) = (0, 0, 0);
                for (&p, &t) in pred.atoms.data().iter().zip(truth.atoms.data()) {
                    match (p == class, t == class) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fnn += 1,
                        _ => {}
                    }
                }
                let want = (tp + fp + fnn > 0).then(|| 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64);
                assert_eq!(atoms[class as usize], want);
            }
        }
        let truth = LabelMaps::empty(8, 8);
        let perfect = pixel_f1(&SegmentationMaps::one_hot(&truth, &v).unwrap(), &truth).unwrap();
        assert_eq!(perfect[0], vec![Some(1.0), None, None, None]);
    }

    #[test]
    fn classifier_f1_cases() {
        let l = |k: usize| {
            let mut v = vec![0.0f32; 3];
            v[k] = 1.0;
            v
        };
        assert_eq!(classifier_f1(&[l(0), l(2)], &[0, 2], 3).unwrap(), vec![Some(1.0), None, Some(1.0)]);
        let f = classifier_f1(&[l(1), l(1), l(2)], &[1, 2, 1], 3).unwrap();
        assert_eq!(f[1], Some(0.5));
        assert!(classifier_f1(&[l(0)], &[0, 1], 3).is_err());
    }

    #[test]
    fn error_rates() {
        let mut g = parse_smiles("CCO").unwrap();
        for (i, a) in g.atoms.iter_mut().enumerate() {
            a.pos = Some(Pixel::new(10, 10 + 20 * i as i32));
        }
        let mut h = g.clone();
        h.atoms[2].element = crate::molgraph::Element::N;
        let truths = vec![g.clone(); 4];
        assert_eq!(graph_error_rate(&truths, &truths, 1.0).unwrap(), 0.0);
        let preds = vec![g.clone(), h, g.clone(), g.clone()];
        assert_eq!(graph_error_rate(&preds, &truths, 1.0).unwrap(), 0.25);
        assert!(graph_error_rate(&preds[..3], &truths, 1.0).is_err());
    }

    fn spearman_by_formula(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let tie = |v: &[f64]| {
            let mut t = 0.0;
            for a in v {
                let c = v.iter().filter(|b| *b == a).count() as f64;
                t += (c * c - 1.0) / 12.0;
            }
            t
        };
        let (rx, ry) = (ranks(x), ranks(y));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let sx = (n * n * n - n) / 12.0 - tie(x);
        let sy = (n * n * n - n) / 12.0 - tie(y);
        (sx + sy - d2) / (2.0 * (sx * sy).sqrt())
    }

    #[test]
    fn spearman_cases() {
        let x = [0.1, 0.2, 0.5, 0.9];
        assert_eq!(spearman(&x, &[1.0, 2.0, 3.0, 4.0]), Some(1.0));
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x[..2], &[1.0, 2.0]), None);
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.gen_range(3..10);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
            match spearman(&a, &b) {
                Some(r) => assert!((r - spearman_by_formula(&a, &b)).abs() < 1e-12),
                None => assert!(ranks(&a).iter().all(|&r| r == ranks(&a)[0]) || ranks(&b).iter().all(|&r| r == ranks(&b)[0])),
            }
        }
        assert_eq!(frequency_correlation(&[Some(0.9), None, Some(0.5), Some(0.7)], &[0.6, 0.1, 0.1, 0.2]), Some(1.0));
    }

    #[test]
    fn csv_layout() {
        let mut r = EvalReport::default();
        let mut c = ConfusionCounts::new(2);
        c.add(1, 1);
        r.add_counts("pixel_f1", "atoms", &["Empty".into(), "C".into()], &c);
        r.add_value("graph_error_rate", "style1_plain", "all", Some(0.25), 4);
        let csv = r.to_csv("abc");
        assert_eq!(csv_config_hash(&csv), Some("abc"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[2], "pixel_f1,atoms,Empty,NA,0,0,0,NA");
        assert_eq!(lines[3], "pixel_f1,atoms,C,1.000000,1,0,0,NA");
        assert_eq!(lines[4], "macro_pixel_f1,atoms,all,1.000000,NA,NA,NA,NA");
        assert_eq!(lines[5], "graph_error_rate,style1_plain,all,0.250000,NA,NA,NA,4");
    }
}
