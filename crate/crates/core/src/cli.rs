//! Command-line front end. Every subcommand accepts `--config FILE`, a JSON
//! object keyed by flag name; flags given on the command line win. The
//! merged arguments are written next to the run's outputs as
//! `<output>.run.json`.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{export_space, fit_space, project_space, FitPopulation, Sample};
use crate::basemodel::{
    predict, read_checkpoint, train_baseline, train_single_task, train_supervised_multitask,
    train_with_augmentation, write_checkpoint, BaseModel, BaselineModel, EpochRecord, TaskData, TrainConfig,
    DEFAULT_HIDDEN,
};
use crate::data::{
    align, build_mapping_dataset, load_lexicon, load_word_vectors, ratio_policy, read_lexicon_keys, split_dataset,
    split_keys, Examples, Lexicon, LexiconOptions, SplitSpec, VocabularyFilter, WordVectorTable,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, render_table, write_reports, Condition, PphPredictor, ReportTag, ZeroShot};
use crate::label::{denormalize_label, normalize_label, LabelFormat, LabelVector};
use crate::mapping::{map_labels, train_multiway, MappingConfig, MultiwayMapper};
use crate::nn::{AdamConfig, Checkpoint, Role};
use crate::selftest::{run_selftest, SelftestConfig};

#[derive(Parser, Debug)]
#[command(name = "emospace", version, about = "Shared emotion space: label mapping and portable prediction heads")]
struct Cli {
    /// Machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// JSON object of flag defaults for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train label encoders and prediction heads on paired lexicons.
    TrainHeads(TrainHeadsArgs),
    /// Train a word-level base model under frozen heads, or a baseline.
    TrainBase(TrainBaseArgs),
    /// Rate words in any format the mapper has a head for.
    Predict(PredictArgs),
    /// Convert ratings from one label format to another.
    Map(MapArgs),
    /// Pearson correlation of a trained model on test splits.
    Eval(EvalArgs),
    /// Write a seeded train/dev/test split of a lexicon.
    Split(SplitArgs),
    /// PCA of head rows and word embeddings.
    Analyze(AnalyzeArgs),
    /// Run the synthetic end-to-end check.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct TrainHeadsArgs {
    /// Paired lexicons `a.tsv:b.tsv`, comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    /// Format files or built-in names (vad, va, be5).
    #[arg(long, value_delimiter = ',')]
    formats: Vec<String>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Hidden width of each label encoder.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Multitask,
    Single,
    Augment,
    Baseline,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct TrainBaseArgs {
    /// Training lexicons (one per task).
    #[arg(long, value_delimiter = ',')]
    lexicon: Vec<PathBuf>,
    /// Extra format files or names to match lexicon headers against.
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    #[arg(long)]
    mapper: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Formats to synthesize labels for in augment mode.
    #[arg(long, value_delimiter = ',')]
    augment: Vec<String>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Split files, one per lexicon; defaults to `<lexicon>.split.json`.
    #[arg(long, value_delimiter = ',')]
    split: Vec<PathBuf>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct PredictArgs {
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    mapper: Option<PathBuf>,
    /// Output format: a name known to the mapper or a format file.
    #[arg(long)]
    head: Option<String>,
    #[arg(long, value_delimiter = ',')]
    word: Vec<String>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct MapArgs {
    #[arg(long)]
    mapper: Option<PathBuf>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    /// Lexicon in the source format.
    #[arg(long)]
    input: Option<PathBuf>,
    /// A single raw rating, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Vec<f64>,
    #[arg(long)]
    language: Option<String>,
    /// Output lexicon; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EvalMode {
    Supervised,
    Zeroshot,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct EvalArgs {
    /// Base or baseline checkpoint.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    mapper: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    lexicon: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    split: Vec<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<EvalMode>,
    /// Training format(s) of a base model, if its checkpoint does not say.
    #[arg(long, value_delimiter = ',')]
    trained_on: Vec<String>,
    /// Dataset ids for the report, one per lexicon.
    #[arg(long, value_delimiter = ',')]
    dataset: Vec<String>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SplitArgs {
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// train,dev,test ratios; 3,1,1 below 3000 items, else 8,1,1.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct AnalyzeArgs {
    #[arg(long)]
    mapper: Option<PathBuf>,
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Points the components are fitted on.
    #[arg(long, value_enum)]
    fit: Option<FitPopulation>,
    /// Embed at most this many lexicon words.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SelftestArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for checkpoints and the report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    words: Option<usize>,
}

impl ValueEnum for FitPopulation {
    fn value_variants<'a>() -> &'a [Self] {
        &[FitPopulation::Variables, FitPopulation::Samples]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            FitPopulation::Variables => "variables",
            FitPopulation::Samples => "samples",
        }))
    }
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

struct Ctx<'a> {
    json: bool,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn print(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))
    }

    fn print_json(&mut self, v: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v).expect("json value serializes");
        self.print(&(text + "\n"))
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let mut ctx = Ctx { json: cli.json, out };
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::TrainHeads(a) => train_heads(&mut ctx, resolve(&a, cfg)?),
        Command::TrainBase(a) => train_base(&mut ctx, resolve(&a, cfg)?),
        Command::Predict(a) => predict_words(&mut ctx, resolve(&a, cfg)?),
        Command::Map(a) => map_ratings(&mut ctx, resolve(&a, cfg)?),
        Command::Eval(a) => eval_models(&mut ctx, resolve(&a, cfg)?),
        Command::Split(a) => split(&mut ctx, resolve(&a, cfg)?),
        Command::Analyze(a) => analyze(&mut ctx, resolve(&a, cfg)?),
        Command::Selftest(a) => selftest(&mut ctx, resolve(&a, cfg)?),
    }
}

/// Flags over config-file values. Unset flags (null, false, empty list)
/// leave the file's value in place.
fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("args serialize"))
            .expect("args round-trip"));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut merged: Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let Some(base) = merged.as_object_mut() else {
        return Err(Error::Usage(format!("{} must hold a JSON object", path.display())));
    };
    if let Value::Object(given) = serde_json::to_value(flags).expect("args serialize") {
        for (k, v) in given {
            let unset = v.is_null() || v == Value::Bool(false) || v.as_array().is_some_and(Vec::is_empty);
            if !unset {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

/// `<out>.run.json` holding the resolved arguments and, where defaults
/// were filled in, the effective settings.
fn persist<T: Serialize>(output: &Path, command: &str, args: &T, effective: Value) -> Result<PathBuf> {
    let path = if output.is_dir() {
        output.join("run.json")
    } else {
        output.with_extension("run.json")
    };
    let mut record = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
    });
    if !effective.is_null() {
        record["effective"] = effective;
    }
    let text = serde_json::to_string_pretty(&record).expect("json value serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn need_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Usage(format!("{command} needs an explicit --seed")))
}

/// A format file path or a built-in name.
fn format_ref(spec: &str) -> Result<LabelFormat> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return LabelFormat::from_json(&text);
    }
    LabelFormat::builtin(spec).ok_or_else(|| Error::Usage(format!("`{spec}` is neither a format file nor a built-in format")))
}

/// Format by name: the mapper's copy if it has one, otherwise `format_ref`.
fn named_format(spec: &str, mapper: Option<&MultiwayMapper>) -> Result<Arc<LabelFormat>> {
    if let Some(f) = mapper.and_then(|m| m.format(spec)) {
        return Ok(Arc::clone(f));
    }
    Ok(Arc::new(format_ref(spec)?))
}

fn candidates(extra: &[String], mapper: Option<&MultiwayMapper>) -> Result<Vec<Arc<LabelFormat>>> {
    let mut out = extra.iter().map(|s| format_ref(s).map(Arc::new)).collect::<Result<Vec<_>>>()?;
    if let Some(m) = mapper {
        out.extend(m.formats().cloned());
    }
    out.extend(["vad", "va", "be5"].iter().filter_map(|n| LabelFormat::builtin(n)).map(Arc::new));
    Ok(out)
}

/// The first candidate whose variables match the lexicon header.
fn detect_format(path: &Path, candidates: &[Arc<LabelFormat>]) -> Result<Arc<LabelFormat>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = String::new();
    BufReader::new(file).read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let mut cols: Vec<&str> = header.trim_end().split('\t').skip(1).map(str::trim).collect();
    cols.sort_unstable();
    candidates
        .iter()
        .find(|f| {
            let mut vars: Vec<&str> = f.variables().iter().map(String::as_str).collect();
            vars.sort_unstable();
            vars == cols
        })
        .cloned()
        .ok_or_else(|| Error::Usage(format!("no known format has the columns of {}; pass --format", path.display())))
}

fn lexicon_options(language: &Option<String>) -> LexiconOptions {
    LexiconOptions {
        language: language.clone().unwrap_or_else(|| LexiconOptions::default().language),
        ..LexiconOptions::default()
    }
}

fn load_vectors(path: &Path, lexicons: &[&Lexicon]) -> Result<WordVectorTable> {
    load_word_vectors(path, Some(&VocabularyFilter::from_lexicons(lexicons.iter().copied())))
}

/// The given split, the one next to the lexicon, or a fresh one saved there.
fn split_for(lexicon_path: &Path, lexicon: &Lexicon, given: Option<&PathBuf>, seed: Option<u64>) -> Result<SplitSpec> {
    if let Some(p) = given {
        return SplitSpec::load(p);
    }
    let default = SplitSpec::default_path(lexicon_path);
    if default.is_file() {
        return SplitSpec::load(&default);
    }
    let seed = seed.ok_or_else(|| Error::Usage(format!("no split for {}; run `split` or pass --seed", lexicon_path.display())))?;
    let spec = split_dataset(lexicon, ratio_policy(lexicon.len()), seed)?;
    spec.save(&default)?;
    log::info!("wrote {}", default.display());
    Ok(spec)
}

fn train_heads(ctx: &mut Ctx<'_>, a: TrainHeadsArgs) -> Result<i32> {
    let seed = need_seed(a.seed, "train-heads")?;
    let out = need(a.out.clone(), "out")?;
    if a.pairs.is_empty() {
        return Err(Error::Usage("--pairs is required".into()));
    }
    let formats = candidates(&a.formats, None)?;
    let opts = lexicon_options(&a.language);
    let mut datasets = Vec::with_capacity(a.pairs.len());
    for pair in &a.pairs {
        let (pa, pb) = pair
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("--pairs expects a.tsv:b.tsv, got `{pair}`")))?;
        let (pa, pb) = (Path::new(pa), Path::new(pb));
        let la = load_lexicon(pa, detect_format(pa, &formats)?, &opts)?;
        let lb = load_lexicon(pb, detect_format(pb, &formats)?, &opts)?;
        datasets.push(build_mapping_dataset(&la, &lb)?);
    }
    let mut config = MappingConfig::with_seed(seed);
    config.dim = a.dim.unwrap_or(config.dim);
    config.encoder_hidden = a.hidden.unwrap_or(config.encoder_hidden);
    config.steps = a.steps.unwrap_or(config.steps);
    config.batch_size = a.batch.unwrap_or(config.batch_size);
    config.adam = AdamConfig::with_lr(a.lr.unwrap_or(config.adam.learning_rate));
    let trained = train_multiway(&datasets, &config)?;
    trained.mapper.save(&out)?;
    persist(&out, "train-heads", &a, json!(config))?;
    let tail = trained.tail_mean(100);
    if ctx.json {
        ctx.print_json(&json!({
            "out": out,
            "formats": trained.mapper.formats().map(|f| f.name()).collect::<Vec<_>>(),
            "pairs": datasets.iter().map(|d| d.len()).collect::<Vec<_>>(),
            "final_loss": tail,
        }))?;
    } else {
        ctx.print(&format!(
            "wrote {} ({} formats, {} steps)\nfinal loss: map {:.5}  auto {:.5}  sim {:.5}  total {:.5}\n",
            out.display(),
            trained.mapper.formats().count(),
            config.steps,
            tail.map,
            tail.auto,
            tail.sim,
            tail.total
        ))?;
    }
    Ok(0)
}

struct TaskSet {
    train: Examples,
    dev: Examples,
}

fn print_history(ctx: &mut Ctx<'_>, out: &Path, history: &[EpochRecord], best: usize) -> Result<()> {
    if ctx.json {
        return ctx.print_json(&json!({ "out": out, "best_epoch": best, "history": history }));
    }
    let mut text = format!("{:>5} {:>12} {:>8}\n", "epoch", "train loss", "dev r");
    for h in history {
        let r = h.dev_r.map_or_else(|| "undef".to_owned(), |r| format!("{r:.3}"));
        let mark = if h.epoch == best { " *" } else { "" };
        text.push_str(&format!("{:>5} {:>12.5} {:>8}{mark}\n", h.epoch, h.train_loss, r));
    }
    text.push_str(&format!("kept epoch {best}; wrote {}\n", out.display()));
    ctx.print(&text)
}

fn train_base(ctx: &mut Ctx<'_>, a: TrainBaseArgs) -> Result<i32> {
    let seed = need_seed(a.seed, "train-base")?;
    let out = need(a.out.clone(), "out")?;
    let vectors_path = need(a.vectors.clone(), "vectors")?;
    if a.lexicon.is_empty() {
        return Err(Error::Usage("--lexicon is required".into()));
    }
    if !a.split.is_empty() && a.split.len() != a.lexicon.len() {
        return Err(Error::Usage("give one --split per --lexicon".into()));
    }
    let mode = a.mode.unwrap_or(if a.lexicon.len() > 1 { Mode::Multitask } else { Mode::Single });
    let mapper = match (&a.mapper, mode) {
        (Some(p), _) => Some(MultiwayMapper::load(p)?),
        (None, Mode::Baseline) => None,
        (None, _) => return Err(Error::Usage(format!("--mapper is required in {mode:?} mode"))),
    };
    let formats = candidates(&a.format, mapper.as_ref())?;
    let opts = lexicon_options(&a.language);
    let lexicons = a
        .lexicon
        .iter()
        .map(|p| load_lexicon(p, detect_format(p, &formats)?, &opts))
        .collect::<Result<Vec<_>>>()?;
    let vectors = load_vectors(&vectors_path, &lexicons.iter().collect::<Vec<_>>())?;
    let mut tasks = Vec::with_capacity(lexicons.len());
    for (i, (path, lex)) in a.lexicon.iter().zip(&lexicons).enumerate() {
        let spec = split_for(path, lex, a.split.get(i), Some(seed))?;
        let (train, oov) = align(lex, &vectors, &spec.train)?;
        let (dev, _) = align(lex, &vectors, &spec.dev)?;
        if oov > 0 {
            log::warn!("{}: {oov} training items without vectors", path.display());
        }
        tasks.push(TaskSet { train, dev });
    }
    let config = TrainConfig {
        epochs: a.epochs.unwrap_or(50),
        batch_size: a.batch.unwrap_or(32),
        dropout: a.dropout.unwrap_or(0.2),
        seed,
        adam: AdamConfig::with_lr(a.lr.unwrap_or(AdamConfig::default().learning_rate)),
    };
    let hidden = if a.hidden.is_empty() { DEFAULT_HIDDEN.to_vec() } else { a.hidden.clone() };
    let init_seed = seed ^ 0x0ba5_e000;
    let one = |what: &str| -> Result<&TaskSet> {
        match tasks.as_slice() {
            [t] => Ok(t),
            _ => Err(Error::Usage(format!("{what} mode trains on exactly one lexicon"))),
        }
    };
    let trained_on: Vec<String> = lexicons.iter().map(|l| l.format().name().to_owned()).collect();
    let (history, best) = if mode == Mode::Baseline {
        let t = one("baseline")?;
        let init = BaselineModel::random(vectors.dim(), &hidden, Arc::clone(lexicons[0].format()), init_seed)?;
        let res = train_baseline(&init, TaskData { train: &t.train, dev: &t.dev }, &config)?;
        res.model.save(&out)?;
        (res.history, res.best_epoch)
    } else {
        let mapper = mapper.as_ref().expect("mapper loaded for head-based modes");
        let language = lexicons[0].language().to_owned();
        let init = BaseModel::random(vectors.dim(), &hidden, mapper.dim(), language, init_seed)?;
        let data: Vec<TaskData<'_>> = tasks.iter().map(|t| TaskData { train: &t.train, dev: &t.dev }).collect();
        let res = match mode {
            Mode::Multitask => train_supervised_multitask(&init, &data, mapper, &config)?,
            Mode::Single => train_single_task(&init, one("single").map(|t| TaskData { train: &t.train, dev: &t.dev })?, mapper, &config)?,
            Mode::Augment => {
                let t = one("augment")?;
                let aug = a
                    .augment
                    .iter()
                    .map(|s| named_format(s, Some(mapper)))
                    .collect::<Result<Vec<_>>>()?;
                train_with_augmentation(&init, TaskData { train: &t.train, dev: &t.dev }, mapper, &aug, &config)?
            }
            Mode::Baseline => unreachable!(),
        };
        let mut ck = res.model.checkpoint();
        ck.meta.insert("formats".into(), trained_on.join(","));
        write_checkpoint(&out, &ck)?;
        (res.history, res.best_epoch)
    };
    persist(&out, "train-base", &a, json!({ "mode": mode, "hidden": hidden, "train": config }))?;
    print_history(ctx, &out, &history, best)?;
    Ok(0)
}

fn predict_words(ctx: &mut Ctx<'_>, a: PredictArgs) -> Result<i32> {
    let base = BaseModel::load(need(a.base.as_ref(), "base")?)?;
    let mapper = MultiwayMapper::load(need(a.mapper.as_ref(), "mapper")?)?;
    let format = named_format(need(a.head.as_deref(), "head")?, Some(&mapper))?;
    let head = mapper.head_for(&format)?;
    if a.word.is_empty() {
        return Err(Error::Usage("--word is required".into()));
    }
    let vectors = load_word_vectors(need(a.vectors.as_ref(), "vectors")?, Some(&VocabularyFilter::new(&a.word)))?;
    let mut rows = Vec::with_capacity(a.word.len());
    let mut text = String::new();
    for w in &a.word {
        let x = vectors
            .get(w)
            .ok_or_else(|| Error::Usage(format!("no word vector for `{w}`")))?;
        let raw = predict(&base, &head, x)?;
        let cells: Vec<String> = format
            .variables()
            .iter()
            .zip(raw.clamped.values())
            .map(|(v, x)| format!("{v}={x:.3}"))
            .collect();
        text.push_str(&format!("{w}\t{}\n", cells.join("\t")));
        rows.push(json!({
            "word": w,
            "format": format.name(),
            "variables": format.variables(),
            "values": raw.clamped.values(),
            "unclamped": raw.unclamped,
        }));
    }
    if ctx.json {
        ctx.print_json(&Value::Array(rows))?;
    } else {
        ctx.print(&text)?;
    }
    Ok(0)
}

fn map_ratings(ctx: &mut Ctx<'_>, a: MapArgs) -> Result<i32> {
    let mapper = MultiwayMapper::load(need(a.mapper.as_ref(), "mapper")?)?;
    let from = named_format(need(a.from.as_deref(), "from")?, Some(&mapper))?;
    let to = named_format(need(a.to.as_deref(), "to")?, Some(&mapper))?;
    let lexicon = match (&a.input, a.values.is_empty()) {
        (Some(p), true) => load_lexicon(p, Arc::clone(&from), &lexicon_options(&a.language))?,
        (None, false) => Lexicon::from_rows(
            a.language.clone().unwrap_or_else(|| "en".into()),
            Arc::clone(&from),
            [("input".to_owned(), a.values.clone())],
        )?,
        _ => return Err(Error::Usage("give exactly one of --input and --values".into())),
    };
    let keys: Vec<&str> = lexicon.keys().collect();
    let labels = lexicon
        .iter()
        .map(|(_, l)| normalize_label(l))
        .collect::<Result<Vec<LabelVector>>>()?;
    let mapped = map_labels(&mapper, &from, &to, &labels)?;
    let raw = mapped
        .iter()
        .map(|y| denormalize_label(y, &to).map(|r| r.clamped.into_values()))
        .collect::<Result<Vec<_>>>()?;
    let result = Lexicon::from_rows(lexicon.language(), Arc::clone(&to), keys.iter().map(|k| k.to_string()).zip(raw))?;
    match &a.out {
        Some(p) => {
            result.write_tsv(p)?;
            persist(p, "map", &a, Value::Null)?;
            if !ctx.json {
                ctx.print(&format!("wrote {} ({} items)\n", p.display(), result.len()))?;
            }
        }
        None if !ctx.json => {
            let mut text = format!("word\t{}\n", to.variables().join("\t"));
            for (k, l) in result.iter() {
                let cells: Vec<String> = l.values().iter().map(|v| format!("{v:.6}")).collect();
                text.push_str(&format!("{k}\t{}\n", cells.join("\t")));
            }
            ctx.print(&text)?;
        }
        None => {}
    }
    if ctx.json {
        let rows: Vec<Value> = result
            .iter()
            .map(|(k, l)| json!({ "word": k, "values": l.values() }))
            .collect();
        ctx.print_json(&json!({ "format": to.name(), "variables": to.variables(), "items": rows }))?;
    }
    Ok(0)
}

enum Model {
    Base { model: BaseModel, trained_on: Vec<String> },
    Baseline(BaselineModel),
}

fn load_model(path: &Path, mapper: Option<&MultiwayMapper>, formats: &[String], trained_on: &[String]) -> Result<Model> {
    let ck: Checkpoint = read_checkpoint(path)?;
    match ck.role {
        Role::Base => {
            let listed = if trained_on.is_empty() {
                ck.meta
                    .get("formats")
                    .map(|s| s.split(',').map(str::to_owned).collect())
                    .unwrap_or_default()
            } else {
                trained_on.to_vec()
            };
            Ok(Model::Base {
                model: BaseModel::from_checkpoint(&ck)?,
                trained_on: listed,
            })
        }
        Role::Baseline => {
            let name = ck.format.clone().unwrap_or_default();
            let format = match formats.iter().map(|s| format_ref(s)).find(|f| f.as_ref().is_ok_and(|f| f.name() == name)) {
                Some(f) => Arc::new(f?),
                None => named_format(&name, mapper)?,
            };
            Ok(Model::Baseline(BaselineModel::from_checkpoint(&ck, format)?))
        }
        other => Err(Error::Usage(format!("{} holds a {other:?} checkpoint, not a model", path.display()))),
    }
}

fn eval_models(ctx: &mut Ctx<'_>, a: EvalArgs) -> Result<i32> {
    let mapper = a.mapper.as_ref().map(MultiwayMapper::load).transpose()?;
    let model = load_model(need(a.model.as_ref(), "model")?, mapper.as_ref(), &a.format, &a.trained_on)?;
    if a.lexicon.is_empty() {
        return Err(Error::Usage("--lexicon is required".into()));
    }
    if !a.dataset.is_empty() && a.dataset.len() != a.lexicon.len() {
        return Err(Error::Usage("give one --dataset per --lexicon".into()));
    }
    if !a.split.is_empty() && a.split.len() != a.lexicon.len() {
        return Err(Error::Usage("give one --split per --lexicon".into()));
    }
    let mode = a.mode.unwrap_or(EvalMode::Supervised);
    let formats = candidates(&a.format, mapper.as_ref())?;
    let opts = lexicon_options(&a.language);
    let lexicons = a
        .lexicon
        .iter()
        .map(|p| load_lexicon(p, detect_format(p, &formats)?, &opts))
        .collect::<Result<Vec<_>>>()?;
    let vectors = load_vectors(need(a.vectors.as_ref(), "vectors")?, &lexicons.iter().collect::<Vec<_>>())?;
    let mut reports = Vec::new();
    for (i, (path, lex)) in a.lexicon.iter().zip(&lexicons).enumerate() {
        let spec = split_for(path, lex, a.split.get(i), a.seed)?;
        let (test, oov) = align(lex, &vectors, &spec.test)?;
        if oov > 0 {
            log::warn!("{}: {oov} test items without vectors", path.display());
        }
        let dataset = a.dataset.get(i).cloned().unwrap_or_else(|| {
            path.file_stem().map_or_else(|| format!("dataset{i}"), |s| s.to_string_lossy().into_owned())
        });
        let fmt = lex.format();
        let report = match (&model, mode) {
            (Model::Base { model, trained_on }, EvalMode::Supervised) => {
                let mapper = mapper.as_ref().ok_or_else(|| Error::Usage("--mapper is required for base models".into()))?;
                let predictor = PphPredictor::new(model, mapper.head_for(fmt)?)?;
                let tag = ReportTag {
                    dataset,
                    trained_on: trained_on.join("+"),
                    condition: Condition::SupervisedPph,
                };
                evaluate(&predictor, &test, &tag)?
            }
            (Model::Base { model, trained_on }, EvalMode::Zeroshot) => {
                let mapper = mapper.as_ref().ok_or_else(|| Error::Usage("--mapper is required for base models".into()))?;
                if trained_on.iter().any(|t| t == fmt.name()) {
                    return Err(Error::config(format!(
                        "the base model was trained on `{}`; that is not zero-shot",
                        fmt.name()
                    )));
                }
                let source = trained_on
                    .first()
                    .ok_or_else(|| Error::Usage("pass --trained-on for zero-shot evaluation".into()))?;
                let system = ZeroShot::Pph {
                    base: model,
                    trained_on: named_format(source, Some(mapper))?,
                };
                crate::eval::zero_shot_eval(&system, mapper, &test, &dataset)?
            }
            (Model::Baseline(b), EvalMode::Supervised) => {
                let tag = ReportTag {
                    dataset,
                    trained_on: b.format().name().to_owned(),
                    condition: Condition::SupervisedBaseline,
                };
                evaluate(b, &test, &tag)?
            }
            (Model::Baseline(b), EvalMode::Zeroshot) => {
                let mapper = mapper
                    .as_ref()
                    .ok_or_else(|| Error::Usage("--mapper is required for post-processed zero-shot".into()))?;
                crate::eval::zero_shot_eval(&ZeroShot::PostProc { baseline: b }, mapper, &test, &dataset)?
            }
        };
        reports.push(report);
    }
    if let Some(p) = &a.report {
        write_reports(p, &reports)?;
        persist(p, "eval", &a, json!({ "mode": mode }))?;
    }
    if ctx.json {
        ctx.print_json(&serde_json::to_value(&reports).expect("reports serialize"))?;
    } else {
        ctx.print(&render_table(&reports))?;
    }
    Ok(0)
}

fn split(ctx: &mut Ctx<'_>, a: SplitArgs) -> Result<i32> {
    let seed = need_seed(a.seed, "split")?;
    let lexicon = need(a.lexicon.as_ref(), "lexicon")?;
    let keys = read_lexicon_keys(lexicon)?;
    let ratios = match a.ratios.as_slice() {
        [] => ratio_policy(keys.len()),
        [t, d, s] => [*t, *d, *s],
        _ => return Err(Error::Usage("--ratios takes three integers, e.g. 3,1,1".into())),
    };
    let spec = split_keys(&keys, ratios, seed)?;
    let out = a.out.clone().unwrap_or_else(|| SplitSpec::default_path(lexicon));
    spec.save(&out)?;
    persist(&out, "split", &a, json!({ "ratios": ratios }))?;
    if ctx.json {
        ctx.print_json(&json!({
            "out": out,
            "ratios": ratios,
            "train": spec.train.len(),
            "dev": spec.dev.len(),
            "test": spec.test.len(),
        }))?;
    } else {
        ctx.print(&format!(
            "wrote {}: {} train / {} dev / {} test\n",
            out.display(),
            spec.train.len(),
            spec.dev.len(),
            spec.test.len()
        ))?;
    }
    Ok(0)
}

fn analyze(ctx: &mut Ctx<'_>, a: AnalyzeArgs) -> Result<i32> {
    let mapper = MultiwayMapper::load(need(a.mapper.as_ref(), "mapper")?)?;
    let out = need(a.out.clone(), "out")?;
    let mut samples = Vec::new();
    if let Some(base_path) = &a.base {
        let base = BaseModel::load(base_path)?;
        let lex_path = need(a.lexicon.as_ref(), "lexicon")?;
        let lex = load_lexicon(lex_path, detect_format(lex_path, &candidates(&a.format, Some(&mapper))?)?, &lexicon_options(&a.language))?;
        let vectors = load_vectors(need(a.vectors.as_ref(), "vectors")?, &[&lex])?;
        let dataset = lex_path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        for key in lex.keys().filter(|k| vectors.get(k).is_some()).take(a.limit.unwrap_or(usize::MAX)) {
            samples.push(Sample {
                tag: key.to_owned(),
                language: lex.language().to_owned(),
                dataset: dataset.clone(),
                embedding: base.embed(vectors.get(key).expect("filtered on presence"))?,
            });
        }
    }
    let t = fit_space(&mapper, &samples, a.k.unwrap_or(3), a.fit.unwrap_or_default())?;
    let table = project_space(&t, &mapper, &samples)?;
    export_space(&table, &out, a.svg.as_deref())?;
    persist(&out, "analyze", &a, json!({ "k": t.k(), "fit": a.fit.unwrap_or_default() }))?;
    if ctx.json {
        ctx.print_json(&json!({
            "out": out,
            "rows": table.rows.len(),
            "explained_variance": t.explained_variance,
            "explained_ratio": t.explained_ratio(),
        }))?;
    } else {
        let ratios: Vec<String> = t.explained_ratio().iter().map(|r| format!("{:.1}%", 100.0 * r)).collect();
        ctx.print(&format!(
            "wrote {} ({} rows); explained variance {}\n",
            out.display(),
            table.rows.len(),
            ratios.join(" ")
        ))?;
    }
    Ok(0)
}

fn selftest(ctx: &mut Ctx<'_>, a: SelftestArgs) -> Result<i32> {
    let seed = a.seed.unwrap_or(42);
    let mut config = SelftestConfig::with_seed(seed);
    if let Some(s) = a.steps {
        config.mapping.steps = s;
    }
    if let Some(e) = a.epochs {
        config.train.epochs = e;
    }
    if let Some(w) = a.words {
        config.synth.words = w;
    }
    let outcome = run_selftest(&config)?;
    if let Some(dir) = &a.out {
        outcome.write(dir)?;
        persist(dir, "selftest", &a, json!(config))?;
    }
    if ctx.json {
        ctx.print_json(&serde_json::to_value(&outcome.report).expect("report serializes"))?;
    } else {
        let mut text = outcome.report.render();
        text.push('\n');
        for (stage, secs) in &outcome.timings {
            text.push_str(&format!("{stage:<10} {secs:>7.2} s\n"));
        }
        text.push_str(if outcome.report.passed() { "selftest passed\n" } else { "selftest FAILED\n" });
        ctx.print(&text)?;
    }
    Ok(if outcome.report.passed() { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"seed": 7, "ratios": [8, 1, 1], "lexicon": "a.tsv"}"#).unwrap();
        let flags = SplitArgs {
            seed: Some(9),
            ..SplitArgs::default()
        };
        let r = resolve(&flags, Some(&cfg)).unwrap();
        assert_eq!(r.seed, Some(9));
        assert_eq!(r.ratios, vec![8, 1, 1]);
        assert_eq!(r.lexicon, Some(PathBuf::from("a.tsv")));
    }

    #[test]
    fn unknown_config_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"sede": 7}"#).unwrap();
        assert!(matches!(resolve(&SplitArgs::default(), Some(&cfg)), Err(Error::Usage(_))));
    }

    #[test]
    fn unknown_subcommand_exits_with_usage_code() {
        assert_eq!(dispatch(["emospace", "frobnicate"]), 2);
        assert_eq!(dispatch(["emospace", "split", "--bogus"]), 2);
    }

    #[test]
    fn training_without_seed_is_rejected() {
        let mut sink = Vec::new();
        let cli = Cli::try_parse_from(["emospace", "train-heads", "--pairs", "a:b", "--out", "m.json"]).unwrap();
        assert!(matches!(run(cli, &mut sink), Err(Error::Usage(_))));
    }

    #[test]
    fn header_detection_picks_matching_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        fs::write(&p, "word\tarousal\tvalence\nfoo\t1\t2\n").unwrap();
        let f = detect_format(&p, &candidates(&[], None).unwrap()).unwrap();
        assert_eq!(f.name(), "va");
    }
}
