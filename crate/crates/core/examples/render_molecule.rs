//! Draws one random molecule in all three styles and writes the image and
//! its atom, bond and charge label maps as PGM files.
//!
//! cargo run --example render_molecule -- [seed] [out_dir]

use std::fs::File;
use std::path::PathBuf;

use ocsr::molgraph::{random_molecule, to_smiles, GenParams};
use ocsr::render::{render_labeled, write_pgm_image, write_pgm_labels, RenderStyle};
use ocsr::Vocabulary;

fn main() -> ocsr::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));
    let out = args.next().map_or_else(|| std::env::temp_dir().join("ocsr_render"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let vocab = Vocabulary::default();
    let (bl, canvas) = (32, (192, 192));
    let mut params = GenParams::for_vocabulary(&vocab, bl, canvas);
    params.stereo_prob = 0.3;
    let g = random_molecule(seed, &params)?;
    println!("{} ({} atoms, {} bonds)", to_smiles(&g)?, g.atoms.len(), g.bonds.len());

    for style in 1..=3 {
        let li = render_labeled(&g, &RenderStyle::preset(style, bl)?, &vocab, canvas)?;
        let stem = out.join(format!("style{style}"));
        write_pgm_image(File::create(stem.with_extension("pgm"))?, &li.x)?;
        write_pgm_labels(File::create(stem.with_extension("atoms.pgm"))?, &li.maps.atoms)?;
        write_pgm_labels(File::create(stem.with_extension("bonds.pgm"))?, &li.maps.bonds)?;
        write_pgm_labels(File::create(stem.with_extension("charges.pgm"))?, &li.maps.charges)?;
        let ink = li.x.data().iter().filter(|&&v| v > 0.5).count();
        println!("style {style}: {ink} ink pixels");
    }
    println!("wrote {}", out.display());
    Ok(())
}
