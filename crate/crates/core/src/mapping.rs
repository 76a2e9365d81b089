//! Multi-way label mapping: label encoders, portable prediction heads and
//! the joint training loop that aligns every format in one emotion space.
//!
//! Formats are keyed by name, so two datasets that use the same format share
//! one encoder and one head. A format whose variables are all contained in a
//! stored format with the same target interval (VA inside VAD) is served by
//! that stored format: missing variables are padded with the interval
//! midpoint on the way in, and only the matching head rows are read on the
//! way out.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_len, Error, Result};
use crate::label::{EmotionEmbedding, LabelFormat, LabelVector, Space};
use crate::nn::{
    adam_step, axpy, mse, mse_grad_into, Activation, AdamConfig, AdamState, Checkpoint,
    DenseLayer, Gradients, Mlp, Role, Tape,
};

pub const DEFAULT_DIM: usize = 100;
pub const DEFAULT_ENCODER_HIDDEN: usize = 128;

/// Bias-free linear map from the emotion space to one label format.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionHead {
    format: Arc<LabelFormat>,
    net: Mlp,
}

impl PredictionHead {
    pub fn new(format: Arc<LabelFormat>, layer: DenseLayer) -> Result<Self> {
        if layer.has_bias() {
            return Err(Error::config("prediction heads carry no bias"));
        }
        if layer.activation() != Activation::Identity {
            return Err(Error::config("prediction heads are linear"));
        }
        if layer.out_dim() != format.len() {
            return Err(Error::config(format!(
                "head for `{}` needs {} rows, got {}",
                format.name(),
                format.len(),
                layer.out_dim()
            )));
        }
        Ok(PredictionHead {
            format,
            net: Mlp::new(vec![layer])?,
        })
    }

    pub fn random<R: Rng + ?Sized>(format: Arc<LabelFormat>, dim: usize, rng: &mut R) -> Self {
        let layer = DenseLayer::glorot(dim, format.len(), false, Activation::Identity, rng);
        PredictionHead::new(format, layer).expect("valid head shape")
    }

    pub fn format(&self) -> &Arc<LabelFormat> {
        &self.format
    }

    pub fn dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn layer(&self) -> &DenseLayer {
        &self.net.layers()[0]
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// `W e` as a raw vector.
    pub fn apply_raw(&self, e: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.dim(), e.len())?;
        Ok(self.layer().rows().map(|row| crate::nn::dot(row, e)).collect())
    }

    pub fn apply(&self, e: &EmotionEmbedding) -> Result<LabelVector> {
        LabelVector::prediction(Arc::clone(&self.format), self.apply_raw(e.coords())?)
    }

    /// SHA-256 over the weights, little-endian, row-major.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for w in self.layer().weights() {
            h.update(w.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(Role::Head, Some(self.format.name().to_owned()), self.dim(), &self.net)
    }
}

/// Apply a head to an embedding. Output is in normalized space and may
/// leave the target interval.
pub fn apply_head(head: &PredictionHead, e: &EmotionEmbedding) -> Result<LabelVector> {
    head.apply(e)
}

/// Network embedding normalized ratings of one format into the emotion space.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelEncoder {
    format: Arc<LabelFormat>,
    net: Mlp,
}

impl LabelEncoder {
    pub fn new(format: Arc<LabelFormat>, net: Mlp) -> Result<Self> {
        ensure_len(format.len(), net.in_dim())?;
        Ok(LabelEncoder { format, net })
    }

    /// One biased leaky-rectifier hidden layer, then a biased linear
    /// projection to `dim`.
    pub fn random<R: Rng + ?Sized>(
        format: Arc<LabelFormat>,
        hidden: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let net = Mlp::glorot(
            &[format.len(), hidden, dim],
            true,
            Activation::LeakyRelu,
            Activation::Identity,
            rng,
        )?;
        LabelEncoder::new(format, net)
    }

    pub fn format(&self) -> &Arc<LabelFormat> {
        &self.format
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn encode(&self, y: &LabelVector) -> Result<EmotionEmbedding> {
        if y.space() != Space::Normalized {
            return Err(Error::Usage("label encoders take normalized labels".into()));
        }
        if !y.format().same_space(&self.format) {
            return Err(Error::config(format!(
                "encoder for `{}` given a `{}` label",
                self.format.name(),
                y.format().name()
            )));
        }
        Ok(EmotionEmbedding::new(self.net.forward(y.values())?))
    }
}

pub fn encode_label(enc: &LabelEncoder, y: &LabelVector) -> Result<EmotionEmbedding> {
    enc.encode(y)
}

/// Where a requested format lives inside a mapper.
#[derive(Clone, Debug, PartialEq)]
struct Resolved {
    index: usize,
    /// For each requested variable, its position in the stored format.
    columns: Vec<usize>,
}

impl Resolved {
    fn is_identity(&self, stored_len: usize) -> bool {
        self.columns.len() == stored_len && self.columns.iter().enumerate().all(|(i, &c)| i == c)
    }
}

/// Encoders and heads for a set of formats sharing one emotion space.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiwayMapper {
    dim: usize,
    encoders: Vec<LabelEncoder>,
    heads: Vec<PredictionHead>,
}

impl MultiwayMapper {
    pub fn from_parts(encoders: Vec<LabelEncoder>, heads: Vec<PredictionHead>) -> Result<Self> {
        if encoders.is_empty() {
            return Err(Error::config("mapper needs at least one format"));
        }
        if encoders.len() != heads.len() {
            return Err(Error::config("encoders and heads must cover the same formats"));
        }
        let dim = encoders[0].dim();
        let mut names = BTreeSet::new();
        for (e, h) in encoders.iter().zip(&heads) {
            if !e.format.same_space(&h.format) {
                return Err(Error::config(format!(
                    "encoder `{}` paired with head `{}`",
                    e.format.name(),
                    h.format.name()
                )));
            }
            if e.dim() != dim || h.dim() != dim {
                return Err(Error::config("all encoders and heads must share one dimension"));
            }
            if !names.insert(e.format.name().to_owned()) {
                return Err(Error::config(format!(
                    "format `{}` appears twice",
                    e.format.name()
                )));
            }
        }
        Ok(MultiwayMapper {
            dim,
            encoders,
            heads,
        })
    }

    /// Freshly initialized encoders and heads, in the given order.
    pub fn random<R: Rng + ?Sized>(
        formats: &[Arc<LabelFormat>],
        dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut encoders = Vec::with_capacity(formats.len());
        let mut heads = Vec::with_capacity(formats.len());
        for f in formats {
            encoders.push(LabelEncoder::random(Arc::clone(f), hidden, dim, rng)?);
            heads.push(PredictionHead::random(Arc::clone(f), dim, rng));
        }
        MultiwayMapper::from_parts(encoders, heads)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn formats(&self) -> impl Iterator<Item = &Arc<LabelFormat>> {
        self.heads.iter().map(|h| &h.format)
    }

    pub fn encoders(&self) -> &[LabelEncoder] {
        &self.encoders
    }

    pub fn heads(&self) -> &[PredictionHead] {
        &self.heads
    }

    pub fn head_param_count(&self) -> usize {
        self.heads.iter().map(PredictionHead::param_count).sum()
    }

    pub fn encoder_param_count(&self) -> usize {
        self.encoders.iter().map(LabelEncoder::param_count).sum()
    }

    /// Stored format by exact name.
    pub fn format(&self, name: &str) -> Option<&Arc<LabelFormat>> {
        self.formats().find(|f| f.name() == name)
    }

    fn resolve(&self, format: &LabelFormat) -> Result<Resolved> {
        if let Some(index) = self.heads.iter().position(|h| h.format.name() == format.name()) {
            let stored = &self.heads[index].format;
            if !stored.same_space(format) {
                return Err(Error::config(format!(
                    "format `{}` does not match the mapper's `{}`",
                    format, stored
                )));
            }
            return Ok(Resolved {
                index,
                columns: (0..format.len()).collect(),
            });
        }
        for (index, h) in self.heads.iter().enumerate() {
            let stored = &h.format;
            if stored.target() != format.target() {
                continue;
            }
            let columns: Option<Vec<usize>> =
                format.variables().iter().map(|v| stored.position(v)).collect();
            if let Some(columns) = columns {
                return Ok(Resolved { index, columns });
            }
        }
        Err(Error::config(format!(
            "mapper has no encoder/head for format `{}`",
            format.name()
        )))
    }

    /// Whether `format` can be encoded and predicted by this mapper.
    pub fn supports(&self, format: &LabelFormat) -> bool {
        self.resolve(format).is_ok()
    }

    /// Head for `format`, restricted to its variables when it is served by
    /// a larger stored format.
    pub fn head_for(&self, format: &Arc<LabelFormat>) -> Result<PredictionHead> {
        let r = self.resolve(format)?;
        let head = &self.heads[r.index];
        if r.is_identity(head.format.len()) {
            return Ok(head.clone());
        }
        PredictionHead::new(Arc::clone(format), head.layer().select_rows(&r.columns))
    }

    /// Stored-format input vector for a normalized label.
    fn encoder_input(&self, r: &Resolved, values: &[f64]) -> Vec<f64> {
        let stored = &self.encoders[r.index].format;
        let mut x = vec![stored.target().midpoint(); stored.len()];
        for (&c, &v) in r.columns.iter().zip(values) {
            x[c] = v;
        }
        x
    }

    /// Encode a normalized label of any supported format.
    pub fn encode(&self, y: &LabelVector) -> Result<EmotionEmbedding> {
        if y.space() != Space::Normalized {
            return Err(Error::Usage("label encoders take normalized labels".into()));
        }
        let r = self.resolve(y.format())?;
        let x = self.encoder_input(&r, y.values());
        Ok(EmotionEmbedding::new(self.encoders[r.index].net.forward(&x)?))
    }

    /// SHA-256 fingerprints of every head, in storage order.
    pub fn head_fingerprints(&self) -> Vec<(String, String)> {
        self.heads
            .iter()
            .map(|h| (h.format.name().to_owned(), h.fingerprint()))
            .collect()
    }

    pub fn to_bundle(&self) -> MapperBundle {
        MapperBundle {
            version: crate::nn::CHECKPOINT_VERSION,
            dim: self.dim,
            formats: self.formats().map(|f| (**f).clone()).collect(),
            encoders: self
                .encoders
                .iter()
                .map(|e| {
                    Checkpoint::new(Role::Encoder, Some(e.format.name().to_owned()), self.dim, &e.net)
                })
                .collect(),
            heads: self.heads.iter().map(PredictionHead::checkpoint).collect(),
        }
    }

    pub fn from_bundle(bundle: &MapperBundle) -> Result<Self> {
        let n = bundle.formats.len();
        if bundle.encoders.len() != n || bundle.heads.len() != n {
            return Err(Error::Format("bundle lists mismatched formats/encoders/heads".into()));
        }
        let mut encoders = Vec::with_capacity(n);
        let mut heads = Vec::with_capacity(n);
        for ((f, e), h) in bundle.formats.iter().zip(&bundle.encoders).zip(&bundle.heads) {
            let format = Arc::new(f.clone());
            for (ck, role) in [(e, Role::Encoder), (h, Role::Head)] {
                if ck.role != role || ck.format.as_deref() != Some(format.name()) {
                    return Err(Error::Format(format!(
                        "bundle checkpoint for `{}` has wrong role or format",
                        format.name()
                    )));
                }
            }
            encoders.push(LabelEncoder::new(Arc::clone(&format), e.to_mlp()?)?);
            let mut layers = h.to_mlp()?.layers().to_vec();
            if layers.len() != 1 {
                return Err(Error::Format("head checkpoint must have one layer".into()));
            }
            heads.push(PredictionHead::new(format, layers.remove(0))?);
        }
        let mapper = MultiwayMapper::from_parts(encoders, heads)?;
        if mapper.dim != bundle.dim {
            return Err(Error::Format("bundle dim disagrees with its checkpoints".into()));
        }
        Ok(mapper)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_bundle()).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bundle: MapperBundle = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        MultiwayMapper::from_bundle(&bundle)
    }
}

/// On-disk mapper: format descriptions plus one checkpoint per encoder and head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperBundle {
    pub version: u32,
    pub dim: usize,
    pub formats: Vec<LabelFormat>,
    pub encoders: Vec<Checkpoint>,
    pub heads: Vec<Checkpoint>,
}

/// Two normalized ratings of the same item.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingPair {
    pub key: String,
    pub a: LabelVector,
    pub b: LabelVector,
}

/// Items rated in two formats ("translational equivalents").
#[derive(Clone, Debug)]
pub struct MappingDataset {
    format_a: Arc<LabelFormat>,
    format_b: Arc<LabelFormat>,
    pairs: Vec<MappingPair>,
}

impl MappingDataset {
    pub fn new(
        format_a: Arc<LabelFormat>,
        format_b: Arc<LabelFormat>,
        pairs: Vec<MappingPair>,
    ) -> Result<Self> {
        let mut keys = BTreeSet::new();
        for p in &pairs {
            if !keys.insert(p.key.as_str()) {
                return Err(Error::config(format!("mapping item `{}` appears twice", p.key)));
            }
            if p.a.space() != Space::Normalized || p.b.space() != Space::Normalized {
                return Err(Error::Usage("mapping datasets hold normalized labels".into()));
            }
            if !p.a.format().same_space(&format_a) || !p.b.format().same_space(&format_b) {
                return Err(Error::config(format!(
                    "item `{}` is not rated in `{}` / `{}`",
                    p.key,
                    format_a.name(),
                    format_b.name()
                )));
            }
        }
        Ok(MappingDataset {
            format_a,
            format_b,
            pairs,
        })
    }

    pub fn format_a(&self) -> &Arc<LabelFormat> {
        &self.format_a
    }

    pub fn format_b(&self) -> &Arc<LabelFormat> {
        &self.format_b
    }

    pub fn pairs(&self) -> &[MappingPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same pairs with the two sides swapped.
    pub fn swapped(&self) -> MappingDataset {
        MappingDataset {
            format_a: Arc::clone(&self.format_b),
            format_b: Arc::clone(&self.format_a),
            pairs: self
                .pairs
                .iter()
                .map(|p| MappingPair {
                    key: p.key.clone(),
                    a: p.b.clone(),
                    b: p.a.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub map: f64,
    pub auto: f64,
    pub sim: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn add_scaled(&mut self, other: &LossBreakdown, k: f64) {
        self.map += k * other.map;
        self.auto += k * other.auto;
        self.sim += k * other.sim;
        self.total += k * other.total;
    }

    pub fn is_finite(&self) -> bool {
        self.map.is_finite() && self.auto.is_finite() && self.sim.is_finite() && self.total.is_finite()
    }
}

/// Gradients for every stored format, indexed like `encoders()` and
/// `heads()`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapperGradients {
    pub encoders: Vec<Gradients>,
    pub heads: Vec<Gradients>,
}

impl MapperGradients {
    fn new(mapper: &MultiwayMapper) -> Self {
        MapperGradients {
            encoders: mapper.encoders.iter().map(|e| e.net.zero_grads()).collect(),
            heads: mapper.heads.iter().map(|h| h.net.zero_grads()).collect(),
        }
    }
}

/// Head rows selected by `r`, applied to `e`.
fn head_rows(head: &PredictionHead, r: &Resolved, e: &[f64]) -> Vec<f64> {
    r.columns
        .iter()
        .map(|&c| crate::nn::dot(head.layer().row(c), e))
        .collect()
}

/// Loss of one pair; with `grads`, also accumulates `scale ·` its gradient.
fn pair_loss(
    mapper: &MultiwayMapper,
    ra: &Resolved,
    rb: &Resolved,
    y1: &[f64],
    y2: &[f64],
    scale: f64,
    grads: Option<&mut MapperGradients>,
) -> Result<LossBreakdown> {
    let (enc_a, enc_b) = (&mapper.encoders[ra.index], &mapper.encoders[rb.index]);
    let (head_a, head_b) = (&mapper.heads[ra.index], &mapper.heads[rb.index]);
    let mut tape_a = Tape::new();
    let mut tape_b = Tape::new();
    // Encode once, decode with both heads.
    let e1 = enc_a.net.forward_recorded(&mapper.encoder_input(ra, y1), &mut tape_a)?;
    let e2 = enc_b.net.forward_recorded(&mapper.encoder_input(rb, y2), &mut tape_b)?;
    let y11 = head_rows(head_a, ra, &e1);
    let y12 = head_rows(head_b, rb, &e1);
    let y21 = head_rows(head_a, ra, &e2);
    let y22 = head_rows(head_b, rb, &e2);

    let map = mse(y1, &y21)? + mse(y2, &y12)?;
    let auto = mse(y1, &y11)? + mse(y2, &y22)?;
    let sim = mse(&e1, &e2)?;
    let losses = LossBreakdown {
        map,
        auto,
        sim,
        total: map + auto + sim,
    };

    let Some(grads) = grads else {
        return Ok(losses);
    };
    let d = mapper.dim;
    let mut de1 = vec![0.0; d];
    let mut de2 = vec![0.0; d];
    mse_grad_into(&e1, &e2, scale, &mut de1);
    mse_grad_into(&e2, &e1, scale, &mut de2);

    // (prediction, target, head, resolution, embedding, its gradient)
    let mut decode = |pred: &[f64], target: &[f64], head: &PredictionHead, r: &Resolved, e: &[f64], de: &mut [f64], hi: usize| {
        let mut dp = vec![0.0; pred.len()];
        mse_grad_into(pred, target, scale, &mut dp);
        let gw = &mut grads.heads[hi].layers[0].w;
        for (&c, &g) in r.columns.iter().zip(&dp) {
            axpy(g, e, &mut gw[c * d..(c + 1) * d]);
            axpy(g, head.layer().row(c), de);
        }
    };
    decode(&y11, y1, head_a, ra, &e1, &mut de1, ra.index);
    decode(&y12, y2, head_b, rb, &e1, &mut de1, rb.index);
    decode(&y21, y1, head_a, ra, &e2, &mut de2, ra.index);
    decode(&y22, y2, head_b, rb, &e2, &mut de2, rb.index);

    enc_a.net.backward(&tape_a, &de1, &mut grads.encoders[ra.index])?;
    enc_b.net.backward(&tape_b, &de2, &mut grads.encoders[rb.index])?;
    Ok(losses)
}

/// Mapping, autoencoder, similarity and total loss for one pair of labels.
pub fn total_loss(mapper: &MultiwayMapper, y1: &LabelVector, y2: &LabelVector) -> Result<LossBreakdown> {
    if y1.space() != Space::Normalized || y2.space() != Space::Normalized {
        return Err(Error::Usage("losses are computed on normalized labels".into()));
    }
    let ra = mapper.resolve(y1.format())?;
    let rb = mapper.resolve(y2.format())?;
    pair_loss(mapper, &ra, &rb, y1.values(), y2.values(), 1.0, None)
}

/// `total_loss` together with its gradient w.r.t. every encoder and head
/// parameter.
pub fn total_loss_gradients(
    mapper: &MultiwayMapper,
    y1: &LabelVector,
    y2: &LabelVector,
) -> Result<(LossBreakdown, MapperGradients)> {
    if y1.space() != Space::Normalized || y2.space() != Space::Normalized {
        return Err(Error::Usage("losses are computed on normalized labels".into()));
    }
    let ra = mapper.resolve(y1.format())?;
    let rb = mapper.resolve(y2.format())?;
    let mut grads = MapperGradients::new(mapper);
    let loss = pair_loss(mapper, &ra, &rb, y1.values(), y2.values(), 1.0, Some(&mut grads))?;
    Ok((loss, grads))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub dim: usize,
    pub encoder_hidden: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl MappingConfig {
    pub fn with_seed(seed: u64) -> Self {
        MappingConfig {
            dim: DEFAULT_DIM,
            encoder_hidden: DEFAULT_ENCODER_HIDDEN,
            steps: 10_000,
            batch_size: 32,
            seed,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedMapper {
    pub mapper: MultiwayMapper,
    /// Batch-mean losses, one entry per step.
    pub history: Vec<LossBreakdown>,
}

impl TrainedMapper {
    /// Mean of the last `n` steps.
    pub fn tail_mean(&self, n: usize) -> LossBreakdown {
        let tail = &self.history[self.history.len().saturating_sub(n)..];
        let mut acc = LossBreakdown::default();
        for l in tail {
            acc.add_scaled(l, 1.0 / tail.len() as f64);
        }
        acc
    }
}

/// Stored formats for a set of datasets: distinct names in first-seen
/// order, with formats contained in a larger one folded into it.
fn collect_formats(datasets: &[MappingDataset]) -> Result<Vec<Arc<LabelFormat>>> {
    let mut seen: Vec<Arc<LabelFormat>> = Vec::new();
    for ds in datasets {
        for f in [&ds.format_a, &ds.format_b] {
            match seen.iter().find(|s| s.name() == f.name()) {
                Some(s) if !s.same_space(f) => {
                    return Err(Error::config(format!(
                        "two different formats are both named `{}`",
                        f.name()
                    )))
                }
                Some(_) => {}
                None => seen.push(Arc::clone(f)),
            }
        }
    }
    let contained = |small: &LabelFormat, big: &LabelFormat| {
        small.name() != big.name()
            && small.target() == big.target()
            && small.len() < big.len()
            && small.variables().iter().all(|v| big.position(v).is_some())
    };
    let stored: Vec<Arc<LabelFormat>> = seen
        .iter()
        .filter(|f| !seen.iter().any(|g| contained(f, g)))
        .cloned()
        .collect();
    Ok(stored)
}

/// Jointly train encoders and heads on a collection of mapping datasets.
///
/// Each step draws one dataset uniformly, a batch of distinct pairs from it,
/// and updates only the encoders and heads of that dataset's formats.
pub fn train_multiway(datasets: &[MappingDataset], config: &MappingConfig) -> Result<TrainedMapper> {
    if datasets.is_empty() {
        return Err(Error::config("at least one mapping dataset is required"));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    for ds in datasets {
        if config.batch_size > ds.len() {
            return Err(Error::config(format!(
                "batch size {} exceeds dataset `{}`/`{}` of {} pairs",
                config.batch_size,
                ds.format_a.name(),
                ds.format_b.name(),
                ds.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let formats = collect_formats(datasets)?;
    let mut mapper = MultiwayMapper::random(&formats, config.dim, config.encoder_hidden, &mut rng)?;
    let resolved: Vec<(Resolved, Resolved)> = datasets
        .iter()
        .map(|ds| Ok((mapper.resolve(&ds.format_a)?, mapper.resolve(&ds.format_b)?)))
        .collect::<Result<_>>()?;
    let mut enc_state: Vec<AdamState> = mapper
        .encoders
        .iter()
        .map(|e| AdamState::new(&e.net, config.adam))
        .collect();
    let mut head_state: Vec<AdamState> = mapper
        .heads
        .iter()
        .map(|h| AdamState::new(&h.net, config.adam))
        .collect();
    let mut grads = MapperGradients::new(&mapper);
    let mut history = Vec::with_capacity(config.steps);
    let scale = 1.0 / config.batch_size as f64;

    for step in 0..config.steps {
        let di = rng.gen_range(0..datasets.len());
        let ds = &datasets[di];
        let (ra, rb) = &resolved[di];
        let touched: BTreeSet<usize> = [ra.index, rb.index].into_iter().collect();
        for &i in &touched {
            grads.encoders[i].fill_zero();
            grads.heads[i].fill_zero();
        }
        let mut batch_loss = LossBreakdown::default();
        for idx in index::sample(&mut rng, ds.len(), config.batch_size) {
            let p = &ds.pairs[idx];
            let l = pair_loss(&mapper, ra, rb, p.a.values(), p.b.values(), scale, Some(&mut grads))?;
            batch_loss.add_scaled(&l, scale);
        }
        if !batch_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "mapping loss at step {step} (dataset {di}): {batch_loss:?}"
            )));
        }
        for &i in &touched {
            adam_step(&mut mapper.encoders[i].net, &grads.encoders[i], &mut enc_state[i])
                .map_err(|e| Error::NonFinite(format!("encoder `{}` at step {step}: {e}", formats[i].name())))?;
            adam_step(&mut mapper.heads[i].net, &grads.heads[i], &mut head_state[i])
                .map_err(|e| Error::NonFinite(format!("head `{}` at step {step}: {e}", formats[i].name())))?;
        }
        history.push(batch_loss);
    }
    log::info!(
        "trained mapper over {} formats for {} steps; final total loss {:.5}",
        formats.len(),
        config.steps,
        history.last().map_or(f64::NAN, |l| l.total)
    );
    Ok(TrainedMapper { mapper, history })
}

/// `h_target(g_source(y))` for each label.
///
/// This is both the stand-alone label-mapping post-processor and the
/// synthesizer of augmented labels.
pub fn map_labels(
    mapper: &MultiwayMapper,
    source: &Arc<LabelFormat>,
    target: &Arc<LabelFormat>,
    labels: &[LabelVector],
) -> Result<Vec<LabelVector>> {
    let rs = mapper.resolve(source)?;
    let rt = mapper.resolve(target)?;
    let encoder = &mapper.encoders[rs.index];
    let head = &mapper.heads[rt.index];
    labels
        .iter()
        .map(|y| {
            if y.space() != Space::Normalized {
                return Err(Error::Usage("map_labels takes normalized labels".into()));
            }
            if !y.format().same_space(source) {
                return Err(Error::config(format!(
                    "label in `{}` passed as `{}`",
                    y.format().name(),
                    source.name()
                )));
            }
            let e = encoder.net.forward(&mapper.encoder_input(&rs, y.values()))?;
            LabelVector::prediction(Arc::clone(target), head_rows(head, &rt, &e))
        })
        .collect()
}

/// One head row read as the location of its variable in the emotion space.
#[derive(Clone, Debug, PartialEq)]
pub struct VariablePosition {
    pub format: String,
    pub variable: String,
    pub position: EmotionEmbedding,
}

/// Every row of every head, verbatim.
pub fn variable_positions(mapper: &MultiwayMapper) -> Vec<VariablePosition> {
    mapper
        .heads
        .iter()
        .flat_map(|h| {
            h.format
                .variables()
                .iter()
                .zip(h.layer().rows())
                .map(|(v, row)| VariablePosition {
                    format: h.format.name().to_owned(),
                    variable: v.clone(),
                    position: EmotionEmbedding::new(row.to_vec()),
                })
        })
        .collect()
}
