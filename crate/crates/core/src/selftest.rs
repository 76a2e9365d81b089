//! End-to-end run on the synthetic corpus with pass/fail thresholds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basemodel::{
    train_baseline, train_supervised_multitask, train_with_augmentation, BaseModel, BaselineModel, TaskData,
    TrainConfig, DEFAULT_HIDDEN,
};
use crate::data::{align, ratio_policy, split_keys, Examples, Lexicon, SplitSpec, WordVectorTable};
use crate::error::{Error, Result};
use crate::eval::{evaluate, pearson, zero_shot_eval, Condition, EvalReport, PphPredictor, ReportTag, ZeroShot};
use crate::mapping::{map_labels, total_loss, train_multiway, MappingConfig, MappingDataset, MultiwayMapper};
use crate::synth::{SynthConfig, SyntheticWorld};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub mapping: MappingConfig,
    pub train: TrainConfig,
    pub heldout_pairs: usize,
}

impl SelftestConfig {
    pub fn with_seed(seed: u64) -> Self {
        let mut mapping = MappingConfig::with_seed(seed);
        mapping.steps = 4000;
        let mut train = TrainConfig::with_seed(seed);
        train.epochs = 30;
        SelftestConfig {
            seed,
            synth: SynthConfig::with_seed(seed),
            mapping,
            train,
            heldout_pairs: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable condition, e.g. `>= 0.95`.
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            requirement: format!(">= {bound}"),
            passed: value >= bound,
        }
    }

    fn below(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            requirement: format!("< {bound}"),
            passed: value < bound,
        }
    }

    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            requirement: format!("<= {bound}"),
            passed: value <= bound,
        }
    }
}

/// Held-out behaviour of the trained mapper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingSummary {
    pub pairs: usize,
    /// Per-variable r of VAD→BE5 predictions against BE5 gold.
    pub r_forward: Vec<f64>,
    /// Per-variable r of BE5→VAD predictions against VAD gold.
    pub r_backward: Vec<f64>,
    pub map_loss: f64,
    pub auto_loss: f64,
    pub sim_loss: f64,
    /// Mean over pairs and both formats of `mean_i g_i²`.
    pub mean_sq_embedding: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub mapping: MappingSummary,
    pub evaluations: Vec<EvalReport>,
    pub head_fingerprints: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", crate::eval::render_table(&self.evaluations));
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<32} {:>10.5} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.requirement
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Everything a self-test run produced.
pub struct SelftestOutcome {
    pub config: SelftestConfig,
    pub report: SelftestReport,
    pub mapper: MultiwayMapper,
    pub split: SplitSpec,
    pub multitask: BaseModel,
    pub augmented: BaseModel,
    pub baselines: Vec<BaselineModel>,
    /// Wall-clock seconds per stage. Not part of the report.
    pub timings: Vec<(String, f64)>,
}

fn column(rows: &[Vec<f64>], v: usize) -> Vec<f64> {
    rows.iter().map(|r| r[v]).collect()
}

fn mapping_r(mapper: &MultiwayMapper, ds: &MappingDataset, forward: bool) -> Result<Vec<f64>> {
    let (src, dst) = if forward { (ds.format_a(), ds.format_b()) } else { (ds.format_b(), ds.format_a()) };
    let (inputs, gold): (Vec<_>, Vec<Vec<f64>>) = ds
        .pairs()
        .iter()
        .map(|p| if forward { (p.a.clone(), p.b.values().to_vec()) } else { (p.b.clone(), p.a.values().to_vec()) })
        .unzip();
    let preds: Vec<Vec<f64>> = map_labels(mapper, src, dst, &inputs)?
        .into_iter()
        .map(|l| l.into_values())
        .collect();
    (0..dst.len())
        .map(|v| pearson(&column(&preds, v), &column(&gold, v)))
        .collect()
}

pub fn summarize_mapping(mapper: &MultiwayMapper, heldout: &MappingDataset) -> Result<MappingSummary> {
    let n = heldout.len() as f64;
    let (mut map, mut auto, mut sim, mut sq) = (0.0, 0.0, 0.0, 0.0);
    for p in heldout.pairs() {
        let l = total_loss(mapper, &p.a, &p.b)?;
        map += l.map / n;
        auto += l.auto / n;
        sim += l.sim / n;
        for y in [&p.a, &p.b] {
            let e = mapper.encode(y)?;
            sq += e.dot(&e) / e.dim() as f64 / (2.0 * n);
        }
    }
    Ok(MappingSummary {
        pairs: heldout.len(),
        r_forward: mapping_r(mapper, heldout, true)?,
        r_backward: mapping_r(mapper, heldout, false)?,
        map_loss: map,
        auto_loss: auto,
        sim_loss: sim,
        mean_sq_embedding: sq,
    })
}

struct Splits {
    train: Examples,
    dev: Examples,
    test: Examples,
}

fn splits(lexicon: &Lexicon, vectors: &WordVectorTable, split: &SplitSpec) -> Result<Splits> {
    Ok(Splits {
        train: align(lexicon, vectors, &split.train)?.0,
        dev: align(lexicon, vectors, &split.dev)?.0,
        test: align(lexicon, vectors, &split.test)?.0,
    })
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn mean_of(report: &EvalReport) -> Result<f64> {
    report
        .mean
        .ok_or_else(|| Error::UndefinedCorrelation(format!("{} / {}", report.dataset, report.condition.as_str())))
}

pub fn run_selftest(config: &SelftestConfig) -> Result<SelftestOutcome> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_owned(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let world = SyntheticWorld::new(config.synth.clone());
    let trained = train_multiway(&[world.mapping_dataset()?], &config.mapping)?;
    let mapper = trained.mapper;
    let summary = summarize_mapping(&mapper, &world.heldout_mapping_dataset(config.heldout_pairs)?)?;
    lap("mapper", &mut timings);

    let (vad_lex, be5_lex) = world.lexicons()?;
    let vectors = world.word_vectors()?;
    let keys: Vec<&str> = vad_lex.keys().collect();
    let split = split_keys(&keys, ratio_policy(keys.len()), config.seed)?;
    let vad = splits(&vad_lex, &vectors, &split)?;
    let be5 = splits(&be5_lex, &vectors, &split)?;
    let before = mapper.head_fingerprints();

    let word_dim = config.synth.word_dim;
    let lang = config.synth.language.as_str();
    let mut baselines = Vec::new();
    let mut evaluations = Vec::new();
    for (i, (fmt, data)) in [(&world.vad, &vad), (&world.be5, &be5)].into_iter().enumerate() {
        let init = BaselineModel::random(word_dim, &DEFAULT_HIDDEN, Arc::clone(fmt), config.seed + 1 + i as u64)?;
        let out = train_baseline(&init, TaskData { train: &data.train, dev: &data.dev }, &config.train)?;
        let tag = ReportTag {
            dataset: format!("{lang}-{}", fmt.name()),
            trained_on: fmt.name().into(),
            condition: Condition::SupervisedBaseline,
        };
        evaluations.push(evaluate(&out.model, &data.test, &tag)?);
        baselines.push(out.model);
    }
    lap("baselines", &mut timings);

    let init = BaseModel::random(word_dim, &DEFAULT_HIDDEN, mapper.dim(), lang, config.seed + 10)?;
    let tasks = [
        TaskData { train: &vad.train, dev: &vad.dev },
        TaskData { train: &be5.train, dev: &be5.dev },
    ];
    let multi = train_supervised_multitask(&init, &tasks, &mapper, &config.train)?;
    for (fmt, data) in [(&world.vad, &vad), (&world.be5, &be5)] {
        let tag = ReportTag {
            dataset: format!("{lang}-{}", fmt.name()),
            trained_on: format!("{}+{}", world.vad.name(), world.be5.name()),
            condition: Condition::SupervisedPph,
        };
        let predictor = PphPredictor::new(&multi.model, mapper.head_for(fmt)?)?;
        evaluations.push(evaluate(&predictor, &data.test, &tag)?);
    }
    lap("multitask", &mut timings);

    let augmented = train_with_augmentation(
        &init,
        TaskData { train: &vad.train, dev: &vad.dev },
        &mapper,
        &[Arc::clone(&world.be5)],
        &config.train,
    )?;
    let be5_name = format!("{lang}-{}", world.be5.name());
    let zs_pph = zero_shot_eval(
        &ZeroShot::Pph {
            base: &augmented.model,
            trained_on: Arc::clone(&world.vad),
        },
        &mapper,
        &be5.test,
        &be5_name,
    )?;
    let zs_post = zero_shot_eval(&ZeroShot::PostProc { baseline: &baselines[0] }, &mapper, &be5.test, &be5_name)?;
    evaluations.push(zs_pph.clone());
    evaluations.push(zs_post.clone());
    lap("zero-shot", &mut timings);

    let after = mapper.head_fingerprints();
    let mut checks = vec![
        Check::at_least("mapping r vad->be5 (min)", min(&summary.r_forward), 0.95),
        Check::at_least("mapping r be5->vad (min)", min(&summary.r_backward), 0.95),
        Check::below("mapping L_auto", summary.auto_loss, 1e-2),
        Check::at_most(
            "mapping L_sim / mean sq embedding",
            summary.sim_loss / summary.mean_sq_embedding,
            0.1,
        ),
    ];
    for rep in &evaluations[..2] {
        let r: Vec<f64> = rep.r.iter().map(|r| r.unwrap_or(f64::NAN)).collect();
        checks.push(Check::at_least(&format!("baseline r {} (min)", rep.format), min(&r), 0.95));
    }
    for k in 0..2 {
        let gap = (mean_of(&evaluations[2 + k])? - mean_of(&evaluations[k])?).abs();
        checks.push(Check::at_most(&format!("pph parity {} |dr|", evaluations[k].format), gap, 0.02));
    }
    let first = multi.history.first().map_or(f64::NAN, |h| h.train_loss);
    let tenth = multi.history.get(9).map_or(f64::NAN, |h| h.train_loss);
    checks.push(Check::below("multitask loss epoch10/epoch1", tenth / first, 1.0));
    checks.push(Check::at_most(
        "zero-shot parity |dr|",
        (mean_of(&zs_pph)? - mean_of(&zs_post)?).abs(),
        0.05,
    ));
    checks.push(Check::at_least(
        "zero-shot r / supervised be5 r",
        mean_of(&zs_pph)? / mean_of(&evaluations[1])?,
        0.9,
    ));
    checks.push(Check::at_least(
        "heads unchanged",
        f64::from(u8::from(before == after)),
        1.0,
    ));

    let report = SelftestReport {
        seed: config.seed,
        mapping: summary,
        evaluations,
        head_fingerprints: after,
        checks,
    };
    Ok(SelftestOutcome {
        config: config.clone(),
        report,
        mapper,
        split,
        multitask: multi.model,
        augmented: augmented.model,
        baselines,
        timings,
    })
}

impl SelftestOutcome {
    /// Checkpoints, split, resolved config and report under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.mapper.save(dir.join("mapper.json"))?;
        self.multitask.save(dir.join("base_multitask.json"))?;
        self.augmented.save(dir.join("base_augment.json"))?;
        for b in &self.baselines {
            b.save(dir.join(format!("baseline_{}.json", b.format().name())))?;
        }
        self.split.save(dir.join("split.json"))?;
        let cfg = dir.join("config.json");
        let text = serde_json::to_string_pretty(&self.config).map_err(|e| Error::json(&cfg, e))?;
        fs::write(&cfg, text + "\n").map_err(|e| Error::io(&cfg, e))?;
        let rep = dir.join("report.json");
        fs::write(&rep, self.report.to_json()).map_err(|e| Error::io(&rep, e))
    }
}
