use std::fs;
use std::sync::Arc;
use std::time::Instant;

use emospace::analysis::{export_space, fit_space, pca_fit, project_space, read_space_csv, FitPopulation, RowKind, Sample};
use emospace::label::{EmotionEmbedding, LabelFormat};
use emospace::mapping::MultiwayMapper;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mapper(seed: u64) -> MultiwayMapper {
    let formats = [Arc::new(LabelFormat::vad()), Arc::new(LabelFormat::be5())];
    MultiwayMapper::random(&formats, 100, 128, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Sample {
            tag: format!("word{i}"),
            language: "en".into(),
            dataset: "en1".into(),
            embedding: EmotionEmbedding::new((0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        })
        .collect()
}

#[test]
fn variable_table_exports_eight_rows_and_round_trips() {
    let m = mapper(1);
    let t = fit_space(&m, &[], 3, FitPopulation::Variables).unwrap();
    let table = project_space(&t, &m, &[]).unwrap();
    assert_eq!(table.rows.len(), 8);
    assert!(table.rows.iter().all(|r| r.kind == RowKind::Variable));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("space.csv");
    export_space(&table, &csv, None).unwrap();
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["space.csv"], "no scatter unless asked");

    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "tag,language,kind,pc1,pc2,pc3");
    let back = read_space_csv(&csv).unwrap();
    assert_eq!(back.len(), 8);
    for (row, orig) in back.iter().zip(&table.rows) {
        assert_eq!(row.tag, orig.tag);
        assert_eq!(row.coords.len(), 3);
        for (a, b) in row.coords.iter().zip(&orig.coords) {
            assert!((a - b).abs() <= 5e-7, "{a} vs {b}");
        }
    }
}

#[test]
fn scatter_has_a_label_per_variable() {
    let m = mapper(2);
    let s = samples(5, 2);
    let t = fit_space(&m, &s, 2, FitPopulation::Variables).unwrap();
    let table = project_space(&t, &m, &s).unwrap();
    assert_eq!(table.rows.len(), 13);
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("space.svg");
    export_space(&table, dir.path().join("space.csv"), Some(&svg)).unwrap();
    let text = fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    for v in ["valence", "arousal", "dominance", "joy", "anger", "sadness", "fear", "disgust"] {
        assert!(text.contains(&format!(">{v}<")), "missing label {v}");
    }
}

#[test]
fn full_rank_fit_is_lossless_on_its_points() {
    let m = mapper(3);
    // 8 generic points in R^100 span 7 dimensions after centering
    let t = fit_space(&m, &[], 7, FitPopulation::Variables).unwrap();
    for head in m.heads() {
        for row in head.layer().rows() {
            let back = t.reconstruct(&t.project(row).unwrap()).unwrap();
            let err = back.iter().zip(row).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "reconstruction error {err}");
        }
    }
    let ratio: f64 = t.explained_ratio().iter().sum();
    assert!((ratio - 1.0).abs() < 1e-9);
}

#[test]
fn zero_embedding_lands_at_minus_projected_mean() {
    let m = mapper(4);
    let t = fit_space(&m, &[], 3, FitPopulation::Variables).unwrap();
    let z = t.project(&[0.0; 100]).unwrap();
    for (c, comp) in z.iter().zip(&t.components) {
        let expect = -t.mean.iter().zip(comp).map(|(a, b)| a * b).sum::<f64>();
        assert!((c - expect).abs() < 1e-12);
    }
}

#[test]
fn sample_fit_and_projection_variance_agree() {
    let m = mapper(5);
    let s = samples(40, 5);
    let t = fit_space(&m, &s, 4, FitPopulation::Samples).unwrap();
    let coords: Vec<Vec<f64>> = s.iter().map(|x| t.project(x.embedding.coords()).unwrap()).collect();
    for i in 0..4 {
        let col: Vec<f64> = coords.iter().map(|c| c[i]).collect();
        let mu = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
        assert!((var - t.explained_variance[i]).abs() < 1e-9);
    }
}

#[test]
fn fitting_is_fast_and_repeatable() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts: Vec<Vec<f64>> = (0..200).map(|_| (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let start = Instant::now();
    let a = pca_fit(&pts, 10).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    let b = pca_fit(&pts, 10).unwrap();
    assert_eq!(a.components, b.components);
}
