//! Word-level base models: a feed-forward network from a word vector into
//! the emotion space, trained underneath frozen prediction heads, plus the
//! head-free baseline that predicts one format directly.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Examples;
use crate::error::{ensure_len, Error, Result};
use crate::eval::pearson;
use crate::label::{denormalize_label, EmotionEmbedding, LabelFormat, LabelVector, RawLabel};
use crate::mapping::{map_labels, MultiwayMapper, PredictionHead};
use crate::nn::{
    adam_step, mse, mse_grad_into, Activation, AdamConfig, AdamState, Checkpoint, Gradients, Mlp, Role, Tape,
};

/// Hidden widths of the word-level network.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 128];
pub const DEFAULT_WORD_DIM: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Untrained,
    Multitask,
    Single,
    Augment,
    Baseline,
}

impl Regime {
    fn as_str(self) -> &'static str {
        match self {
            Regime::Untrained => "untrained",
            Regime::Multitask => "multitask",
            Regime::Single => "single",
            Regime::Augment => "augment",
            Regime::Baseline => "baseline",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "untrained" => Regime::Untrained,
            "multitask" => Regime::Multitask,
            "single" => Regime::Single,
            "augment" => Regime::Augment,
            "baseline" => Regime::Baseline,
            _ => return None,
        })
    }
}

/// Word vector to emotion embedding. The last layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseModel {
    net: Mlp,
    language: String,
    regime: Regime,
}

impl BaseModel {
    pub fn new(net: Mlp, language: impl Into<String>) -> Result<Self> {
        let last = &net.layers()[net.layers().len() - 1];
        if last.activation() != Activation::Identity {
            return Err(Error::config("the embedding layer of a base model must be linear"));
        }
        Ok(BaseModel {
            net,
            language: language.into(),
            regime: Regime::Untrained,
        })
    }

    /// `input → hidden… → dim`, leaky-rectifier hidden layers, biased.
    pub fn random(
        input_dim: usize,
        hidden: &[usize],
        dim: usize,
        language: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(dim);
        let net = Mlp::glorot(
            &dims,
            true,
            Activation::LeakyRelu,
            Activation::Identity,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )?;
        BaseModel::new(net, language)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn embed(&self, word_vector: &[f64]) -> Result<EmotionEmbedding> {
        Ok(EmotionEmbedding::new(self.net.forward(word_vector)?))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(Role::Base, None, self.dim(), &self.net);
        ck.meta.insert("language".into(), self.language.clone());
        ck.meta.insert("regime".into(), self.regime.as_str().into());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.role != Role::Base {
            return Err(Error::Format(format!("expected a base checkpoint, got {:?}", ck.role)));
        }
        let mut base = BaseModel::new(ck.to_mlp()?, ck.meta.get("language").cloned().unwrap_or_default())?;
        ensure_len(ck.dim, base.dim())?;
        base.regime = ck
            .meta
            .get("regime")
            .and_then(|r| Regime::parse(r))
            .unwrap_or(Regime::Untrained);
        Ok(base)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path.as_ref(), &self.checkpoint())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        BaseModel::from_checkpoint(&read_checkpoint(path.as_ref())?)
    }
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(ck).map_err(|e| Error::json(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn embed_item(base: &BaseModel, word_vector: &[f64]) -> Result<EmotionEmbedding> {
    base.embed(word_vector)
}

/// Rating on the head format's raw scale.
pub fn predict(base: &BaseModel, head: &PredictionHead, word_vector: &[f64]) -> Result<RawLabel> {
    if head.dim() != base.dim() {
        return Err(Error::config(format!(
            "head expects {}-dimensional embeddings, base produces {}",
            head.dim(),
            base.dim()
        )));
    }
    let y = head.apply(&base.embed(word_vector)?)?;
    denormalize_label(&y, head.format())
}

/// Naive per-dataset model: word vector straight to one format.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    net: Mlp,
    format: Arc<LabelFormat>,
}

impl BaselineModel {
    pub fn new(net: Mlp, format: Arc<LabelFormat>) -> Result<Self> {
        if net.out_dim() != format.len() {
            return Err(Error::config(format!(
                "baseline for `{}` must output {} values, not {}",
                format.name(),
                format.len(),
                net.out_dim()
            )));
        }
        Ok(BaselineModel { net, format })
    }

    pub fn random(input_dim: usize, hidden: &[usize], format: Arc<LabelFormat>, seed: u64) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(format.len());
        let net = Mlp::glorot(
            &dims,
            true,
            Activation::LeakyRelu,
            Activation::Identity,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )?;
        BaselineModel::new(net, format)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn format(&self) -> &Arc<LabelFormat> {
        &self.format
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Normalized-space prediction.
    pub fn predict_normalized(&self, word_vector: &[f64]) -> Result<LabelVector> {
        LabelVector::prediction(Arc::clone(&self.format), self.net.forward(word_vector)?)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            Role::Baseline,
            Some(self.format.name().to_owned()),
            self.format.len(),
            &self.net,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path.as_ref(), &self.checkpoint())
    }

    /// Rebuild from a baseline checkpoint trained on `format`.
    pub fn from_checkpoint(ck: &Checkpoint, format: Arc<LabelFormat>) -> Result<Self> {
        if ck.role != Role::Baseline || ck.format.as_deref() != Some(format.name()) {
            return Err(Error::Format(format!(
                "not a baseline checkpoint for `{}` (role {:?}, format {:?})",
                format.name(),
                ck.role,
                ck.format
            )));
        }
        BaselineModel::new(ck.to_mlp()?, format)
    }

    pub fn load(path: impl AsRef<Path>, format: Arc<LabelFormat>) -> Result<Self> {
        BaselineModel::from_checkpoint(&read_checkpoint(path.as_ref())?, format)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            dropout: 0.2,
            seed,
            adam: AdamConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean dev Pearson r; `None` when undefined for some variable.
    pub dev_r: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    /// Checkpoint of the selected epoch.
    pub model: M,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Epoch (1-based) with the highest dev score, earliest on ties. Epochs
/// without a defined score are never selected; `None` if no epoch has one.
pub fn select_checkpoint(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i + 1, s));
            }
        }
    }
    best.map(|(e, _)| e)
}

/// How a network output turns into predictions for one task.
enum Readout {
    /// Output is already in label space.
    Direct,
    /// Output is an embedding read by a frozen head; extra heads carry
    /// synthesized targets, one per training instance.
    Heads {
        primary: PredictionHead,
        augment: Vec<(PredictionHead, Vec<Vec<f64>>)>,
    },
}

struct Task<'a> {
    readout: Readout,
    train: &'a Examples,
    dev: &'a Examples,
}

impl Task<'_> {
    fn predict(&self, out: &[f64]) -> Result<Vec<f64>> {
        match &self.readout {
            Readout::Direct => Ok(out.to_vec()),
            Readout::Heads { primary, .. } => primary.apply_raw(out),
        }
    }

    /// Loss of one training instance and its gradient w.r.t. the network
    /// output, scaled by `scale`.
    fn loss_and_grad(&self, i: usize, out: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        let target = &self.train.targets[i];
        match &self.readout {
            Readout::Direct => {
                mse_grad_into(out, target, scale, grad);
                mse(out, target)
            }
            Readout::Heads { primary, augment } => {
                let heads = std::iter::once((primary, target.as_slice()))
                    .chain(augment.iter().map(|(h, t)| (h, t[i].as_slice())));
                heads_loss_and_grad(heads, out, scale, grad)
            }
        }
    }
}

/// `Σ mse(target, h(out))` over frozen heads; adds `scale ·` its gradient
/// w.r.t. `out` into `grad`.
fn heads_loss_and_grad<'h>(
    heads: impl Iterator<Item = (&'h PredictionHead, &'h [f64])>,
    out: &[f64],
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let mut loss = 0.0;
    for (head, target) in heads {
        let pred = head.apply_raw(out)?;
        let mut dp = vec![0.0; pred.len()];
        mse_grad_into(&pred, target, scale, &mut dp);
        head.layer().transpose_mul(&dp, grad);
        loss += mse(&pred, target)?;
    }
    Ok(loss)
}

/// `mse(y, h(f(x)))` and its gradient w.r.t. the base parameters, dropout
/// off. The head is only read.
pub fn pph_loss_gradients(base: &BaseModel, head: &PredictionHead, x: &[f64], y: &[f64]) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let out = base.net.forward_recorded(x, &mut tape)?;
    let mut d_out = vec![0.0; out.len()];
    let loss = heads_loss_and_grad(std::iter::once((head, y)), &out, 1.0, &mut d_out)?;
    let mut grads = base.net.zero_grads();
    base.net.backward(&tape, &d_out, &mut grads)?;
    Ok((loss, grads))
}

/// Mean Pearson r over variables; `None` if any variable is undefined.
fn dev_score(net: &Mlp, task: &Task<'_>) -> Result<Option<f64>> {
    if task.dev.is_empty() {
        return Ok(None);
    }
    let preds = task
        .dev
        .inputs
        .iter()
        .map(|x| task.predict(&net.forward(x)?))
        .collect::<Result<Vec<_>>>()?;
    let n_vars = task.dev.targets[0].len();
    let mut sum = 0.0;
    for v in 0..n_vars {
        let p: Vec<f64> = preds.iter().map(|r| r[v]).collect();
        let g: Vec<f64> = task.dev.targets.iter().map(|r| r[v]).collect();
        match pearson(&p, &g) {
            Ok(r) => sum += r,
            Err(_) => return Ok(None),
        }
    }
    Ok(Some(sum / n_vars as f64))
}

/// Shared training loop for every regime.
fn fit(mut net: Mlp, tasks: &[Task<'_>], config: &TrainConfig) -> Result<TrainOutcome<Mlp>> {
    config.validate()?;
    for t in tasks {
        if t.train.is_empty() {
            return Err(Error::config(format!("no training items for `{}`", t.train.format.name())));
        }
        ensure_len(net.in_dim(), t.train.input_dim().unwrap_or(0))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(&net, config.adam);
    let mut grads = net.zero_grads();
    let mut tape = Tape::new();
    let total: usize = tasks.iter().map(|t| t.train.len()).sum();
    let steps = total.div_ceil(config.batch_size);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Mlp)> = None;
    for epoch in 1..=config.epochs {
        let mut epoch_loss = 0.0;
        for step in 0..steps {
            let task = &tasks[if tasks.len() > 1 { rng.gen_range(0..tasks.len()) } else { 0 }];
            let n = task.train.len();
            let batch = config.batch_size.min(n);
            let scale = 1.0 / batch as f64;
            grads.fill_zero();
            let mut batch_loss = 0.0;
            for i in index::sample(&mut rng, n, batch) {
                let out = net.forward_train(&task.train.inputs[i], config.dropout, &mut rng, &mut tape)?;
                let mut d_out = vec![0.0; out.len()];
                batch_loss += scale * task.loss_and_grad(i, &out, scale, &mut d_out)?;
                net.backward(&tape, &d_out, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, step {step}")));
            }
            adam_step(&mut net, &grads, &mut state)?;
            epoch_loss += batch_loss / steps as f64;
        }
        let mut dev_r = Some(0.0);
        for t in tasks {
            dev_r = match (dev_r, dev_score(&net, t)?) {
                (Some(acc), Some(r)) => Some(acc + r / tasks.len() as f64),
                _ => None,
            };
        }
        log::debug!("epoch {epoch}: train loss {epoch_loss:.5}, dev r {dev_r:?}");
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            dev_r,
        });
        if let Some(r) = dev_r {
            if best.as_ref().is_none_or(|(_, b, _)| r > *b) {
                best = Some((epoch, r, net.clone()));
            }
        }
    }
    let (best_epoch, model) = match best {
        Some((e, _, m)) => (e, m),
        None => {
            log::warn!("dev correlation undefined at every epoch; keeping the final epoch");
            (config.epochs, net)
        }
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

fn check_language(base: &BaseModel, data: &Examples) -> Result<()> {
    ensure_len(base.input_dim(), data.input_dim().unwrap_or(base.input_dim()))
}

/// Training and dev items for one format.
#[derive(Clone, Copy, Debug)]
pub struct TaskData<'a> {
    pub train: &'a Examples,
    pub dev: &'a Examples,
}

fn frozen_head(mapper: &MultiwayMapper, base: &BaseModel, format: &Arc<LabelFormat>) -> Result<PredictionHead> {
    let head = mapper.head_for(format)?;
    if head.dim() != base.dim() {
        return Err(Error::config(format!(
            "mapper dimension {} does not match base output {}",
            head.dim(),
            base.dim()
        )));
    }
    Ok(head)
}

fn finish(base: &BaseModel, out: TrainOutcome<Mlp>, regime: Regime) -> TrainOutcome<BaseModel> {
    TrainOutcome {
        model: BaseModel {
            net: out.model,
            language: base.language.clone(),
            regime,
        },
        history: out.history,
        best_epoch: out.best_epoch,
    }
}

/// Multi-task training under frozen heads: each step picks one dataset
/// uniformly and minimizes `mse(y, h_j(f(x)))` on a batch from it.
pub fn train_supervised_multitask(
    base: &BaseModel,
    tasks: &[TaskData<'_>],
    mapper: &MultiwayMapper,
    config: &TrainConfig,
) -> Result<TrainOutcome<BaseModel>> {
    if tasks.len() < 2 {
        return Err(Error::config("multi-task training needs at least two datasets"));
    }
    let tasks = tasks
        .iter()
        .map(|t| {
            check_language(base, t.train)?;
            Ok(Task {
                readout: Readout::Heads {
                    primary: frozen_head(mapper, base, &t.train.format)?,
                    augment: Vec::new(),
                },
                train: t.train,
                dev: t.dev,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(base, fit(base.net.clone(), &tasks, config)?, Regime::Multitask))
}

/// One dataset under its frozen head, no augmentation.
pub fn train_single_task(
    base: &BaseModel,
    data: TaskData<'_>,
    mapper: &MultiwayMapper,
    config: &TrainConfig,
) -> Result<TrainOutcome<BaseModel>> {
    check_language(base, data.train)?;
    let task = Task {
        readout: Readout::Heads {
            primary: frozen_head(mapper, base, &data.train.format)?,
            augment: Vec::new(),
        },
        train: data.train,
        dev: data.dev,
    };
    Ok(finish(base, fit(base.net.clone(), &[task], config)?, Regime::Single))
}

/// Synthesized labels `h_k(g_j(y))` for every training item.
pub fn synthesize_labels(
    mapper: &MultiwayMapper,
    data: &Examples,
    target: &Arc<LabelFormat>,
) -> Result<Vec<Vec<f64>>> {
    let gold = data
        .targets
        .iter()
        .map(|t| LabelVector::prediction(Arc::clone(&data.format), t.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(map_labels(mapper, &data.format, target, &gold)?
        .into_iter()
        .map(LabelVector::into_values)
        .collect())
}

/// Single-dataset training with emotion label augmentation: the loss is
/// `L_pred + Σ_k mse(h_k(g_j(y)), h_k(f(x)))` over `augment` formats.
pub fn train_with_augmentation(
    base: &BaseModel,
    data: TaskData<'_>,
    mapper: &MultiwayMapper,
    augment: &[Arc<LabelFormat>],
    config: &TrainConfig,
) -> Result<TrainOutcome<BaseModel>> {
    check_language(base, data.train)?;
    let source = &data.train.format;
    let mut aug = Vec::with_capacity(augment.len());
    for k in augment {
        if k.name() == source.name() {
            return Err(Error::config(format!(
                "augmentation format `{}` equals the training format",
                k.name()
            )));
        }
        aug.push((frozen_head(mapper, base, k)?, synthesize_labels(mapper, data.train, k)?));
    }
    let task = Task {
        readout: Readout::Heads {
            primary: frozen_head(mapper, base, source)?,
            augment: aug,
        },
        train: data.train,
        dev: data.dev,
    };
    let regime = if augment.is_empty() { Regime::Single } else { Regime::Augment };
    Ok(finish(base, fit(base.net.clone(), &[task], config)?, regime))
}

/// Plain supervised regression of one format's normalized labels.
pub fn train_baseline(
    model: &BaselineModel,
    data: TaskData<'_>,
    config: &TrainConfig,
) -> Result<TrainOutcome<BaselineModel>> {
    if !data.train.format.same_space(&model.format) {
        return Err(Error::config(format!(
            "baseline for `{}` given `{}` data",
            model.format.name(),
            data.train.format.name()
        )));
    }
    let task = Task {
        readout: Readout::Direct,
        train: data.train,
        dev: data.dev,
    };
    let out = fit(model.net.clone(), &[task], config)?;
    Ok(TrainOutcome {
        model: BaselineModel {
            net: out.model,
            format: Arc::clone(&model.format),
        },
        history: out.history,
        best_epoch: out.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::TargetInterval;
    use crate::nn::DenseLayer;

    #[test]
    fn baseline_parameter_budget() {
        let m = BaselineModel::random(300, &DEFAULT_HIDDEN, Arc::new(LabelFormat::be5()), 1).unwrap();
        assert_eq!(m.param_count(), 110_597);
    }

    #[test]
    fn embedding_shape_and_purity() {
        let base = BaseModel::random(300, &DEFAULT_HIDDEN, 100, "en", 3).unwrap();
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = embed_item(&base, &x).unwrap();
        assert_eq!(a.dim(), 100);
        assert_eq!(a, embed_item(&base, &x).unwrap());
        assert!(embed_item(&base, &x[..299]).is_err());
    }

    #[test]
    fn zero_vector_through_identity_stack_hits_midpoint() {
        let id = |n: usize| {
            DenseLayer::from_rows(
                (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect(),
                None,
                Activation::Identity,
            )
            .unwrap()
        };
        let base = BaseModel::new(Mlp::new(vec![id(3)]).unwrap(), "en").unwrap();
        let vad = Arc::new(LabelFormat::vad());
        let head = PredictionHead::new(vad, id(3)).unwrap();
        let raw = predict(&base, &head, &[0.0; 3]).unwrap();
        assert_eq!(raw.clamped.values(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let base = BaseModel::random(4, &[3], 6, "en", 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = PredictionHead::random(Arc::new(LabelFormat::vad()), 5, &mut rng);
        assert!(matches!(predict(&base, &head, &[0.0; 4]), Err(Error::Config(_))));
    }

    #[test]
    fn checkpoint_selection_prefers_earliest_best() {
        assert_eq!(select_checkpoint(&[Some(0.5), Some(0.7), Some(0.7), Some(0.6)]), Some(2));
        assert_eq!(select_checkpoint(&[None, Some(0.1), None]), Some(2));
        assert_eq!(select_checkpoint(&[None, None]), None);
    }

    fn toy_examples(format: Arc<LabelFormat>, n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Examples {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        Examples {
            format,
            keys: (0..n).map(|i| format!("w{i}")).collect(),
            targets: inputs.iter().map(|x| f(x)).collect(),
            inputs,
        }
    }

    #[test]
    fn constant_labels_converge_to_constant() {
        let f = Arc::new(LabelFormat::new("c", ["a", "b"], TargetInterval::Unipolar).unwrap());
        let train = toy_examples(f.clone(), 64, |_| vec![0.3, 0.7]);
        let dev = toy_examples(f.clone(), 16, |_| vec![0.3, 0.7]);
        let model = BaselineModel::random(4, &[16], f, 2).unwrap();
        let mut cfg = TrainConfig::with_seed(5);
        cfg.epochs = 150;
        cfg.dropout = 0.0;
        cfg.adam = AdamConfig::with_lr(1e-2);
        let out = train_baseline(&model, TaskData { train: &train, dev: &dev }, &cfg).unwrap();
        assert!(out.history.iter().all(|h| h.dev_r.is_none()));
        assert_eq!(out.best_epoch, 150);
        let mse_train: f64 = train
            .inputs
            .iter()
            .zip(&train.targets)
            .map(|(x, y)| mse(out.model.predict_normalized(x).unwrap().values(), y).unwrap())
            .sum::<f64>()
            / train.len() as f64;
        assert!(mse_train < 1e-3, "{mse_train}");
    }

    #[test]
    fn baseline_rejects_format_mismatch() {
        let vad = Arc::new(LabelFormat::vad());
        let be5 = Arc::new(LabelFormat::be5());
        let data = toy_examples(vad, 8, |x| x[..3].to_vec());
        let model = BaselineModel::random(4, &[4], be5, 0).unwrap();
        let cfg = TrainConfig::with_seed(0);
        assert!(matches!(
            train_baseline(&model, TaskData { train: &data, dev: &data }, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let f = Arc::new(LabelFormat::new("c", ["a"], TargetInterval::Bipolar).unwrap());
        let train = toy_examples(f.clone(), 40, |x| vec![0.5 * x[0] - 0.2 * x[1]]);
        let model = BaselineModel::random(4, &[8, 8], f, 9).unwrap();
        let mut cfg = TrainConfig::with_seed(1);
        cfg.epochs = 3;
        let a = train_baseline(&model, TaskData { train: &train, dev: &train }, &cfg).unwrap();
        let b = train_baseline(&model, TaskData { train: &train, dev: &train }, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }
}
