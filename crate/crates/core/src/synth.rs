//! Synthetic corpus with a known linear generator.
//!
//! A latent affect `z ∈ [-1, 1]³` drives both formats: VAD labels are a
//! full-rank linear image of `z`, BE5 labels a rank-3 image in five
//! dimensions, so each format determines the other. Word vectors mix `z`
//! with nuisance directions and noise, so the generator is learnable from
//! the vectors but not trivially so.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{build_mapping_dataset, Lexicon, WordVectorTable};
use crate::error::{Error, Result};
use crate::label::LabelFormat;
use crate::mapping::MappingDataset;

pub const LATENT_DIM: usize = 3;

/// Rows: Valence, Arousal, Dominance.
const M_VAD: [[f64; LATENT_DIM]; 3] = [[1.0, 0.2, 0.0], [0.1, 1.0, 0.2], [0.4, -0.1, 0.8]];

/// Rows: Joy, Anger, Sadness, Fear, Disgust. Joy tracks valence.
const M_BE5: [[f64; LATENT_DIM]; 5] = [
    [1.0, 0.2, 0.1],
    [-0.6, 0.6, 0.3],
    [-0.7, -0.4, -0.3],
    [-0.5, 0.5, -0.7],
    [-0.6, 0.1, 0.4],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub language: String,
    /// Items in each word lexicon (both formats share the vocabulary).
    pub words: usize,
    /// Noise-free label pairs for the mapper.
    pub pairs: usize,
    pub word_dim: usize,
    pub nuisance_dim: usize,
    /// Half-width of uniform label noise, normalized units.
    pub label_noise: f64,
    /// Half-width of uniform noise added to each vector coordinate.
    pub vector_noise: f64,
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        SynthConfig {
            seed,
            language: "syn".into(),
            words: 1500,
            pairs: 2000,
            word_dim: 64,
            nuisance_dim: 8,
            label_noise: 0.02,
            vector_noise: 0.05,
        }
    }
}

/// Interval position of `M z` scaled so every row stays in `[-1, 1]`.
fn image<const R: usize>(m: &[[f64; LATENT_DIM]; R], z: &[f64]) -> [f64; R] {
    let mut out = [0.0; R];
    for (o, row) in out.iter_mut().zip(m) {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        *o = row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / s;
    }
    out
}

/// `u ∈ [-1, 1]` to the raw scale of variable `i`.
fn to_raw(format: &LabelFormat, i: usize, u: f64) -> f64 {
    let (min, max) = format.range(i).expect("built-in formats have ranges");
    (min + (u + 1.0) / 2.0 * (max - min)).clamp(min, max)
}

pub struct SyntheticWorld {
    pub config: SynthConfig,
    pub vad: Arc<LabelFormat>,
    pub be5: Arc<LabelFormat>,
    /// Mixing matrix `[word_dim × (latent + nuisance)]`.
    projection: Vec<Vec<f64>>,
}

impl SyntheticWorld {
    pub fn new(config: SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0001);
        let cols = LATENT_DIM + config.nuisance_dim;
        let scale = (3.0 / cols as f64).sqrt();
        let projection = (0..config.word_dim)
            .map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect();
        SyntheticWorld {
            config,
            vad: Arc::new(LabelFormat::vad()),
            be5: Arc::new(LabelFormat::be5()),
            projection,
        }
    }

    /// Noise-free VAD label, normalized.
    pub fn vad_of(z: &[f64]) -> Vec<f64> {
        image(&M_VAD, z).to_vec()
    }

    /// Noise-free BE5 label, normalized.
    pub fn be5_of(z: &[f64]) -> Vec<f64> {
        image(&M_BE5, z).iter().map(|u| (u + 1.0) / 2.0).collect()
    }

    fn latents(&self, n: usize, stream: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ stream);
        (0..n)
            .map(|_| (0..LATENT_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    fn lexicon_pair(&self, prefix: &str, zs: &[Vec<f64>], noise: f64, stream: u64) -> Result<(Lexicon, Lexicon)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ stream);
        let mut jitter = |u: f64| {
            if noise > 0.0 {
                (u + rng.gen_range(-noise..noise)).clamp(-1.0, 1.0)
            } else {
                u
            }
        };
        let mut vad_rows = Vec::with_capacity(zs.len());
        let mut be5_rows = Vec::with_capacity(zs.len());
        for (n, z) in zs.iter().enumerate() {
            let key = format!("{prefix}{n:05}");
            let a = image(&M_VAD, z);
            let b = image(&M_BE5, z);
            vad_rows.push((key.clone(), (0..3).map(|i| to_raw(&self.vad, i, jitter(a[i]))).collect()));
            be5_rows.push((key, (0..5).map(|i| to_raw(&self.be5, i, jitter(b[i]))).collect()));
        }
        let lang = &self.config.language;
        Ok((
            Lexicon::from_rows(lang.as_str(), Arc::clone(&self.vad), vad_rows)?,
            Lexicon::from_rows(lang.as_str(), Arc::clone(&self.be5), be5_rows)?,
        ))
    }

    /// Noise-free VAD and BE5 ratings of the same items, for the mapper.
    pub fn mapping_lexicons(&self) -> Result<(Lexicon, Lexicon)> {
        let zs = self.latents(self.config.pairs, 0x5eed_0002);
        self.lexicon_pair("pair", &zs, 0.0, 0x5eed_0003)
    }

    pub fn mapping_dataset(&self) -> Result<MappingDataset> {
        let (a, b) = self.mapping_lexicons()?;
        build_mapping_dataset(&a, &b)
    }

    /// Fresh noise-free pairs, disjoint in origin from the training pairs.
    pub fn heldout_mapping_dataset(&self, n: usize) -> Result<MappingDataset> {
        let zs = self.latents(n, 0x5eed_0007);
        let (a, b) = self.lexicon_pair("held", &zs, 0.0, 0x5eed_0008)?;
        build_mapping_dataset(&a, &b)
    }

    fn word_latents(&self) -> Vec<Vec<f64>> {
        self.latents(self.config.words, 0x5eed_0004)
    }

    /// VAD and BE5 lexicons over the same words, with label noise.
    pub fn lexicons(&self) -> Result<(Lexicon, Lexicon)> {
        self.lexicon_pair("w", &self.word_latents(), self.config.label_noise, 0x5eed_0005)
    }

    /// One vector per lexicon word.
    pub fn word_vectors(&self) -> Result<WordVectorTable> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_0006);
        let noise = self.config.vector_noise;
        let mut table = WordVectorTable::new(self.config.word_dim);
        for (n, z) in self.word_latents().iter().enumerate() {
            let mut src = z.clone();
            src.extend((0..self.config.nuisance_dim).map(|_| rng.gen_range(-1.0..1.0)));
            let x = self
                .projection
                .iter()
                .map(|row| {
                    let clean: f64 = row.iter().zip(&src).map(|(a, b)| a * b).sum();
                    clean + if noise > 0.0 { rng.gen_range(-noise..noise) } else { 0.0 }
                })
                .collect();
            table.insert(format!("w{n:05}"), x)?;
        }
        Ok(table)
    }

    /// Write the corpus as files: `pairs_vad.tsv`, `pairs_be5.tsv`,
    /// `vad.tsv`, `be5.tsv` and `vectors.vec`.
    pub fn write_corpus(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (pa, pb) = self.mapping_lexicons()?;
        pa.write_tsv(dir.join("pairs_vad.tsv"))?;
        pb.write_tsv(dir.join("pairs_be5.tsv"))?;
        let (la, lb) = self.lexicons()?;
        la.write_tsv(dir.join("vad.tsv"))?;
        lb.write_tsv(dir.join("be5.tsv"))?;
        self.word_vectors()?.write_text(dir.join("vectors.vec"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            words: 50,
            pairs: 40,
            ..SynthConfig::with_seed(3)
        }
    }

    #[test]
    fn labels_stay_in_range_and_formats_determine_each_other() {
        let w = SyntheticWorld::new(small());
        let ds = w.mapping_dataset().unwrap();
        assert_eq!(ds.len(), 40);
        for p in ds.pairs() {
            assert!(p.a.values().iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!(p.b.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // corner latents hit the interval ends exactly
        let v = SyntheticWorld::vad_of(&[1.0, 1.0, 1.0]);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = SyntheticWorld::new(small());
        let b = SyntheticWorld::new(small());
        let (va, _) = a.lexicons().unwrap();
        let (vb, _) = b.lexicons().unwrap();
        assert_eq!(
            va.iter().map(|(k, l)| (k.to_owned(), l.values().to_vec())).collect::<Vec<_>>(),
            vb.iter().map(|(k, l)| (k.to_owned(), l.values().to_vec())).collect::<Vec<_>>()
        );
        let ta = a.word_vectors().unwrap();
        let tb = b.word_vectors().unwrap();
        assert_eq!(ta.get("w00007"), tb.get("w00007"));
        assert_eq!(ta.len(), 50);
    }
}
