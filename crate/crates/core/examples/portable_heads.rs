//! One word model, several output formats: train a base model under frozen
//! VAD and BE5 heads, then read any word out in VAD, VA or BE5.
//!
//! cargo run --release --example portable_heads

use std::sync::Arc;

use emospace::basemodel::{predict, train_supervised_multitask, BaseModel, TaskData, TrainConfig, DEFAULT_HIDDEN};
use emospace::data::{align, ratio_policy, split_keys};
use emospace::eval::{evaluate, render_table, Condition, PphPredictor, ReportTag};
use emospace::label::LabelFormat;
use emospace::mapping::{train_multiway, MappingConfig};
use emospace::synth::{SynthConfig, SyntheticWorld};

fn main() -> emospace::Result<()> {
    let world = SyntheticWorld::new(SynthConfig::with_seed(11));
    let mapper = train_multiway(
        &[world.mapping_dataset()?],
        &MappingConfig {
            steps: 3000,
            ..MappingConfig::with_seed(11)
        },
    )?
    .mapper;

    let (vad, be5) = world.lexicons()?;
    let vectors = world.word_vectors()?;
    let keys: Vec<&str> = vad.keys().collect();
    let split = split_keys(&keys, ratio_policy(keys.len()), 11)?;
    let part = |lex, keys: &[String]| align(lex, &vectors, keys).map(|(ex, _)| ex);
    let (vt, vd, vx) = (part(&vad, &split.train)?, part(&vad, &split.dev)?, part(&vad, &split.test)?);
    let (bt, bd, bx) = (part(&be5, &split.train)?, part(&be5, &split.dev)?, part(&be5, &split.test)?);

    let init = BaseModel::random(vectors.dim(), &DEFAULT_HIDDEN, mapper.dim(), "syn", 11)?;
    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::with_seed(11)
    };
    let tasks = [TaskData { train: &vt, dev: &vd }, TaskData { train: &bt, dev: &bd }];
    let out = train_supervised_multitask(&init, &tasks, &mapper, &config)?;
    println!("selected epoch {} of {}", out.best_epoch, out.history.len());
    let base = out.model;

    let mut reports = Vec::new();
    for test in [&vx, &bx] {
        let tag = ReportTag {
            dataset: format!("syn-{}", test.format.name()),
            trained_on: "vad+be5".into(),
            condition: Condition::SupervisedPph,
        };
        reports.push(evaluate(&PphPredictor::new(&base, mapper.head_for(&test.format)?)?, test, &tag)?);
    }
    print!("{}", render_table(&reports));

    let word = &vx.keys[0];
    let x = vectors.get(word).expect("test words have vectors");
    for format in [LabelFormat::vad(), LabelFormat::va(), LabelFormat::be5()] {
        let head = mapper.head_for(&Arc::new(format))?;
        let rating = predict(&base, &head, x)?;
        let shown: Vec<String> = rating.clamped.values().iter().map(|v| format!("{v:.2}")).collect();
        println!("{word} as {:<3} {}", head.format().name(), shown.join(" "));
    }
    Ok(())
}
