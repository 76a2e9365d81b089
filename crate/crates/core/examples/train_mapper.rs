//! Train label encoders and heads on paired VAD/BE5 ratings, then convert
//! labels between the formats and inspect where each variable sits in the
//! shared space.
//!
//! cargo run --release --example train_mapper

use std::sync::Arc;

use emospace::label::{LabelFormat, LabelVector};
use emospace::mapping::{map_labels, train_multiway, variable_positions, MappingConfig};
use emospace::synth::{SynthConfig, SyntheticWorld};

fn main() -> emospace::Result<()> {
    let world = SyntheticWorld::new(SynthConfig::with_seed(7));
    let pairs = world.mapping_dataset()?;
    let config = MappingConfig {
        steps: 3000,
        ..MappingConfig::with_seed(7)
    };
    let trained = train_multiway(&[pairs], &config)?;
    let last = trained.tail_mean(100);
    println!(
        "final losses: map {:.2e}  auto {:.2e}  sim {:.2e}",
        last.map, last.auto, last.sim
    );
    let mapper = trained.mapper;

    let vad = Arc::new(LabelFormat::vad());
    let be5 = Arc::new(LabelFormat::be5());
    // a pleasant, mildly aroused rating, normalized
    let y = LabelVector::normalized(Arc::clone(&vad), vec![0.7, 0.2, 0.3])?;
    let out = map_labels(&mapper, &vad, &be5, &[y])?;
    for (name, v) in be5.variables().iter().zip(out[0].values()) {
        println!("{name:>8} {v:.3}");
    }

    println!("\nvariable positions, cosine with valence:");
    let pos = variable_positions(&mapper);
    let valence = pos[0].position.clone();
    let norm = |e: &emospace::label::EmotionEmbedding| e.dot(e).sqrt();
    for p in &pos {
        let cos = p.position.dot(&valence) / (norm(&p.position) * norm(&valence));
        println!("{:>4} {:<10} {cos:+.3}", p.format, p.variable);
    }
    mapper.save("mapper.json")?;
    println!("\nsaved mapper.json");
    Ok(())
}
