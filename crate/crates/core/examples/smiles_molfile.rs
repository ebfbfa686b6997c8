//! Reads a SMILES string, checks valences and prints it back as SMILES,
//! a V2000 MOLfile and the JSON graph form.
//!
//! cargo run --example smiles_molfile -- 'CC(=O)[O-]'

use ocsr::molgraph::{parse_smiles, to_json, to_molfile, to_smiles};
use ocsr::Pixel;

fn main() -> ocsr::Result<()> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "OC(=O)C1=CC=CC=C1[N+](C)(C)C".into());
    let mut g = parse_smiles(&text)?;
    println!("written back: {}", to_smiles(&g)?);

    // MOLfiles need coordinates; a zigzag is enough for a demo
    for (i, a) in g.atoms.iter_mut().enumerate() {
        a.pos = Some(Pixel::new(if i % 2 == 0 { 0 } else { 20 }, 35 * i as i32));
    }
    print!("{}", to_molfile(&g, 40.0)?);
    println!("{}", to_json(&g));
    Ok(())
}
