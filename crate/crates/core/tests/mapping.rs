mod common;

use std::sync::Arc;

use emospace::label::{LabelFormat, LabelVector, TargetInterval};
use emospace::mapping::{
    map_labels, total_loss, train_multiway, variable_positions, MappingConfig, MappingDataset, MappingPair,
};
use emospace::synth::{SynthConfig, SyntheticWorld};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::column_r;

fn small_world(seed: u64) -> SyntheticWorld {
    SyntheticWorld::new(SynthConfig {
        pairs: 600,
        ..SynthConfig::with_seed(seed)
    })
}

fn quick(seed: u64, steps: usize) -> MappingConfig {
    MappingConfig {
        steps,
        ..MappingConfig::with_seed(seed)
    }
}

/// Pairs between BE5 and a two-variable format reading the first two latent
/// axes directly.
fn be5_axes(n: usize, seed: u64) -> (Arc<LabelFormat>, MappingDataset) {
    let be5 = Arc::new(LabelFormat::be5());
    let axes = Arc::new(LabelFormat::new("axes", ["x", "y"], TargetInterval::Bipolar).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|i| {
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            MappingPair {
                key: format!("c{i}"),
                a: LabelVector::normalized(Arc::clone(&be5), SyntheticWorld::be5_of(&z)).unwrap(),
                b: LabelVector::normalized(Arc::clone(&axes), z[..2].to_vec()).unwrap(),
            }
        })
        .collect();
    (Arc::clone(&axes), MappingDataset::new(be5, axes, pairs).unwrap())
}

#[test]
fn shared_format_gets_one_encoder_and_one_head() {
    let world = small_world(1);
    let ab = world.mapping_dataset().unwrap();
    let (axes, bc) = be5_axes(600, 2);
    let trained = train_multiway(&[ab, bc], &quick(3, 3000)).unwrap();
    let names: Vec<&str> = trained.mapper.encoders().iter().map(|e| e.format().name()).collect();
    assert_eq!(names, ["vad", "be5", "axes"]);
    let heads: Vec<&str> = trained.mapper.heads().iter().map(|h| h.format().name()).collect();
    assert_eq!(heads, names);

    // vad and axes never co-occur, yet the shared be5 hub links them
    let vad = Arc::clone(&world.vad);
    let held = world.heldout_mapping_dataset(300).unwrap();
    let ya: Vec<LabelVector> = held.pairs().iter().map(|p| p.a.clone()).collect();
    let pred: Vec<Vec<f64>> = map_labels(&trained.mapper, &vad, &axes, &ya)
        .unwrap()
        .into_iter()
        .map(LabelVector::into_values)
        .collect();
    // valence loads mostly on the first latent axis
    let valence: Vec<Vec<f64>> = ya.iter().map(|y| vec![y.values()[0]]).collect();
    let first: Vec<Vec<f64>> = pred.iter().map(|p| vec![p[0]]).collect();
    let r = column_r(&first, &valence)[0].unwrap();
    assert!(r > 0.8, "transitive r {r}");
}

#[test]
fn heldout_mapping_loss_stays_near_training_loss() {
    let world = small_world(4);
    let trained = train_multiway(&[world.mapping_dataset().unwrap()], &quick(4, 3000)).unwrap();
    let train_map = trained.tail_mean(200).map;
    let held = world.heldout_mapping_dataset(300).unwrap();
    let held_map: f64 = held
        .pairs()
        .iter()
        .map(|p| total_loss(&trained.mapper, &p.a, &p.b).unwrap().map)
        .sum::<f64>()
        / held.len() as f64;
    assert!(held_map <= 2.0 * train_map, "held-out {held_map} vs train {train_map}");
}

#[test]
fn same_seed_gives_identical_mappers() {
    let world = small_world(5);
    let ds = world.mapping_dataset().unwrap();
    let a = train_multiway(std::slice::from_ref(&ds), &quick(6, 200)).unwrap();
    let b = train_multiway(std::slice::from_ref(&ds), &quick(6, 200)).unwrap();
    assert_eq!(a.mapper, b.mapper);
    assert_eq!(a.mapper.to_bundle(), b.mapper.to_bundle());
    let c = train_multiway(&[ds], &quick(7, 200)).unwrap();
    assert_ne!(a.mapper, c.mapper);
}

#[test]
fn degenerate_duplicate_format_reaches_near_zero_loss() {
    let vad = Arc::new(LabelFormat::vad());
    let twin = Arc::new(LabelFormat::new("vad2", ["valence", "arousal", "dominance"], TargetInterval::Bipolar).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs = (0..400)
        .map(|i| {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            MappingPair {
                key: format!("k{i}"),
                a: LabelVector::normalized(Arc::clone(&vad), v.clone()).unwrap(),
                b: LabelVector::normalized(Arc::clone(&twin), v).unwrap(),
            }
        })
        .collect();
    let ds = MappingDataset::new(vad, twin, pairs).unwrap();
    let trained = train_multiway(&[ds], &quick(8, 4000)).unwrap();
    let total = trained.tail_mean(100).total;
    assert!(total < 1e-3, "L_total {total}");
}

#[test]
fn positively_related_variables_point_the_same_way() {
    let world = small_world(9);
    let trained = train_multiway(&[world.mapping_dataset().unwrap()], &quick(9, 3000)).unwrap();
    let pos = variable_positions(&trained.mapper);
    assert_eq!(pos.len(), 8);
    let at = |v: &str| pos.iter().find(|p| p.variable == v).unwrap().position.clone();
    // joy rises with valence, sadness falls with it
    assert!(at("valence").dot(&at("joy")) > 0.0);
    assert!(at("valence").dot(&at("sadness")) < 0.0);
}
