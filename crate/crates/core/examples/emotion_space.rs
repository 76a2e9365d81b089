//! Principal components of the emotion space. Components are fitted on the
//! eight head rows, then word embeddings are dropped into the same plane.
//!
//! cargo run --release --example emotion_space -- space.csv space.svg

use std::path::PathBuf;

use emospace::analysis::{export_space, fit_space, project_space, FitPopulation, Sample};
use emospace::basemodel::{train_single_task, BaseModel, TaskData, TrainConfig, DEFAULT_HIDDEN};
use emospace::data::{align, split_keys};
use emospace::mapping::{train_multiway, MappingConfig};
use emospace::synth::{SynthConfig, SyntheticWorld};

fn main() -> emospace::Result<()> {
    let mut args = std::env::args().skip(1);
    let csv = PathBuf::from(args.next().unwrap_or_else(|| "space.csv".into()));
    let svg = args.next().map(PathBuf::from);

    let world = SyntheticWorld::new(SynthConfig::with_seed(3));
    let mapper = train_multiway(
        &[world.mapping_dataset()?],
        &MappingConfig {
            steps: 3000,
            ..MappingConfig::with_seed(3)
        },
    )?
    .mapper;

    let (vad, _) = world.lexicons()?;
    let vectors = world.word_vectors()?;
    let keys: Vec<&str> = vad.keys().collect();
    let split = split_keys(&keys, [3, 1, 1], 3)?;
    let train = align(&vad, &vectors, &split.train)?.0;
    let dev = align(&vad, &vectors, &split.dev)?.0;
    let init = BaseModel::random(vectors.dim(), &DEFAULT_HIDDEN, mapper.dim(), "syn", 3)?;
    let config = TrainConfig {
        epochs: 10,
        ..TrainConfig::with_seed(3)
    };
    let base = train_single_task(&init, TaskData { train: &train, dev: &dev }, &mapper, &config)?.model;

    let samples = split.test[..40]
        .iter()
        .map(|w| {
            Ok(Sample {
                tag: w.clone(),
                language: "syn".into(),
                dataset: "syn-vad".into(),
                embedding: base.embed(vectors.get(w).expect("synthetic words all have vectors"))?,
            })
        })
        .collect::<emospace::Result<Vec<_>>>()?;

    let pca = fit_space(&mapper, &samples, 2, FitPopulation::Variables)?;
    let ratio = pca.explained_ratio();
    println!("pc1 {:.1}%  pc2 {:.1}%", 100.0 * ratio[0], 100.0 * ratio[1]);
    let table = project_space(&pca, &mapper, &samples)?;
    for row in table.rows.iter().take(8) {
        println!("{:<10} {:+.3} {:+.3}", row.tag, row.coords[0], row.coords[1]);
    }
    export_space(&table, &csv, svg.as_deref())?;
    println!("wrote {}", csv.display());
    Ok(())
}
