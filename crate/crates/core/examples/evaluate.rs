//! Scores a deliberately degraded segmentation and a set of predicted graphs
//! against ground truth and prints the CSV report.

use ocsr::assembler::{build_graph, ReadoutModel};
use ocsr::eval::{frequency_correlation, graph_error_rate, pixel_counts, EvalReport};
use ocsr::molgraph::{random_molecule, GenParams};
use ocsr::networks::{Geometry, SegmentationMaps};
use ocsr::render::{render_labeled, RenderStyle};
use ocsr::Vocabulary;

fn main() -> ocsr::Result<()> {
    let vocab = Vocabulary::default();
    let (bl, canvas) = (24, (128, 128));
    let style = RenderStyle::preset(1, bl)?;
    let params = GenParams::for_vocabulary(&vocab, bl, canvas);

    let mut report = EvalReport::default();
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    let mut total = None::<ocsr::eval::PixelCounts>;
    for seed in 0..30 {
        let li = render_labeled(&random_molecule(seed, &params)?, &style, &vocab, canvas)?;
        // imitate a weak segmentation: class k loses k rows in every ten
        let mut maps = li.maps.clone();
        for (k, v) in maps.atoms.data_mut().iter_mut().enumerate() {
            if (k / canvas.1) % 10 < *v as usize {
                *v = 0;
            }
        }
        let counts = pixel_counts(&SegmentationMaps::one_hot(&maps, &vocab)?, &li.maps)?;
        match &mut total {
            Some(t) => t.merge(&counts)?,
            None => total = Some(counts),
        }
        let rec = build_graph(&li.x, &ReadoutModel::new(maps, &vocab, Geometry::from_style(&style)))?;
        preds.push(rec.graph);
        truths.push(li.truth);
    }
    let total = total.unwrap();
    report.add_counts("pixel_f1", "atoms", &vocab.atom_names(), &total.atoms);
    report.add_counts("pixel_f1", "bonds", &vocab.bond_names(), &total.bonds);
    report.add_value("macro_pixel_f1_non_empty", "all", "all", total.macro_f1_non_empty(), preds.len());
    let rate = graph_error_rate(&preds, &truths, bl as f64 / 2.0)?;
    report.add_value("graph_error_rate", "style1_plain", "all", Some(rate), preds.len());

    let f1 = total.atoms.f1();
    let support: Vec<f64> = (1..f1.len()).map(|k| (total.atoms.tp[k] + total.atoms.fn_[k]) as f64).collect();
    report.add_value("spearman_f1_frequency", "atom", "all", frequency_correlation(&f1[1..], &support), f1.len() - 1);
    print!("{}", report.to_csv("example"));
    Ok(())
}
