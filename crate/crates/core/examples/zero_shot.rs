//! Predict a format the word model never saw gold labels for. A base model
//! trained on VAD words, with BE5 labels synthesized by the mapper, is read
//! through the BE5 head and compared with a VAD baseline whose outputs are
//! converted afterwards.
//!
//! cargo run --release --example zero_shot

use std::sync::Arc;

use emospace::basemodel::{
    train_baseline, train_with_augmentation, BaseModel, BaselineModel, TaskData, TrainConfig, DEFAULT_HIDDEN,
};
use emospace::data::{align, ratio_policy, split_keys};
use emospace::eval::{render_table, zero_shot_eval, ZeroShot};
use emospace::mapping::{train_multiway, MappingConfig};
use emospace::synth::{SynthConfig, SyntheticWorld};

fn main() -> emospace::Result<()> {
    let seed = 5;
    let world = SyntheticWorld::new(SynthConfig::with_seed(seed));
    let mapper = train_multiway(
        &[world.mapping_dataset()?],
        &MappingConfig {
            steps: 3000,
            ..MappingConfig::with_seed(seed)
        },
    )?
    .mapper;

    let (vad, be5) = world.lexicons()?;
    let vectors = world.word_vectors()?;
    let keys: Vec<&str> = vad.keys().collect();
    let split = split_keys(&keys, ratio_policy(keys.len()), seed)?;
    let train = align(&vad, &vectors, &split.train)?.0;
    let dev = align(&vad, &vectors, &split.dev)?.0;
    // BE5 gold is only touched by the scorer
    let be5_test = align(&be5, &vectors, &split.test)?.0;

    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::with_seed(seed)
    };
    let data = TaskData { train: &train, dev: &dev };
    let init = BaseModel::random(vectors.dim(), &DEFAULT_HIDDEN, mapper.dim(), "syn", seed)?;
    let augmented = train_with_augmentation(&init, data, &mapper, &[Arc::clone(&world.be5)], &config)?.model;
    let baseline = BaselineModel::random(vectors.dim(), &DEFAULT_HIDDEN, Arc::clone(&world.vad), seed)?;
    let baseline = train_baseline(&baseline, data, &config)?.model;

    let reports = [
        zero_shot_eval(
            &ZeroShot::Pph {
                base: &augmented,
                trained_on: Arc::clone(&world.vad),
            },
            &mapper,
            &be5_test,
            "syn-be5",
        )?,
        zero_shot_eval(&ZeroShot::PostProc { baseline: &baseline }, &mapper, &be5_test, "syn-be5")?,
    ];
    print!("{}", render_table(&reports));
    Ok(())
}
