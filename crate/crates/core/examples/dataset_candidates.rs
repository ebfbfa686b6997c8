//! Renders a small dataset and derives the atom, bond and charge classifier
//! training sets from it, then writes them in the packed CGS1 format.
//!
//! cargo run --example dataset_candidates -- [images] [out_dir]

use std::path::PathBuf;

use ocsr::datasets::make_dataset;
use ocsr::molgraph::GenParams;
use ocsr::networks::ClassifierKind;
use ocsr::render::{render_dataset, DatasetSpec, RenderStyle};
use ocsr::Vocabulary;

fn main() -> ocsr::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(40, |s| s.parse().expect("count must be an integer"));
    let out = args.next().map_or_else(|| std::env::temp_dir().join("ocsr_candidates"), PathBuf::from);

    let vocab = Vocabulary::default();
    let (bl, canvas) = (24, (128, 128));
    let mut gen = GenParams::for_vocabulary(&vocab, bl, canvas);
    gen.stereo_prob = 0.2;
    let spec = DatasetSpec {
        n,
        style: RenderStyle::preset(2, bl)?,
        canvas,
        vocab: vocab.clone(),
        gen,
        quota: Default::default(),
        seed: 3,
        split: 0,
    };
    let (images, manifest) = render_dataset(&spec)?;
    println!("{} images from {} draws", images.len(), manifest.attempts);

    for kind in ClassifierKind::ALL {
        let data = make_dataset(kind, &images, &vocab)?;
        println!("{:<6} {:>5} samples", kind.name(), data.len());
        for (name, count) in data.class_names().iter().zip(data.class_counts()) {
            if count > 0 {
                println!("         {name:<12} {count}");
            }
        }
        data.save(&out, kind.name(), images.len(), None)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
