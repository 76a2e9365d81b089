//! Write the synthetic corpus to a directory so the command-line tool can
//! be tried without downloading real lexicons.
//!
//! cargo run --release --example synthetic_corpus -- /tmp/syn [seed]

use std::path::PathBuf;

use emospace::synth::{SynthConfig, SyntheticWorld};

fn main() -> emospace::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed = args.next().map_or(42, |s| s.parse().expect("seed is an integer"));
    let world = SyntheticWorld::new(SynthConfig::with_seed(seed));
    world.write_corpus(&dir)?;
    println!("wrote pairs_vad.tsv, pairs_be5.tsv, vad.tsv, be5.tsv, vectors.vec to {}", dir.display());
    Ok(())
}
