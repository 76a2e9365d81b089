//! Pearson-correlation scoring and the supervised / zero-shot harnesses.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basemodel::{BaseModel, BaselineModel};
use crate::data::Examples;
use crate::error::{Error, Result};
use crate::label::{LabelFormat, LabelVector};
use crate::mapping::{map_labels, MultiwayMapper, PredictionHead};

/// Sample Pearson correlation. Constant input has no correlation and is
/// reported as an error rather than 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation(format!("{n} observation(s)")));
    }
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return Err(Error::UndefinedCorrelation("constant sequence".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant sequence".into()));
    }
    let r = sxy / (sxx * syy).sqrt();
    if !r.is_finite() {
        return Err(Error::UndefinedCorrelation("non-finite input".into()));
    }
    Ok(r.clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    SupervisedBaseline,
    SupervisedPph,
    ZeroshotPostproc,
    ZeroshotPph,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::SupervisedBaseline => "supervised-baseline",
            Condition::SupervisedPph => "supervised-pph",
            Condition::ZeroshotPostproc => "zeroshot-postproc",
            Condition::ZeroshotPph => "zeroshot-pph",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Test dataset id.
    pub dataset: String,
    /// Label format the training data was annotated with.
    pub trained_on: String,
    pub condition: Condition,
    pub format: String,
    pub variables: Vec<String>,
    /// `None` marks an undefined correlation.
    pub r: Vec<Option<f64>>,
    /// Arithmetic mean of `r`; undefined if any entry is.
    pub mean: Option<f64>,
    pub items: usize,
}

impl EvalReport {
    pub fn r_of(&self, variable: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == variable)?;
        self.r[i]
    }
}

/// Where a report comes from, apart from the numbers.
#[derive(Clone, Debug)]
pub struct ReportTag {
    pub dataset: String,
    pub trained_on: String,
    pub condition: Condition,
}

/// Per-variable correlation of predictions against gold, row-major
/// `[items][variables]`.
pub fn score(tag: &ReportTag, format: &LabelFormat, preds: &[Vec<f64>], gold: &[Vec<f64>]) -> Result<EvalReport> {
    if preds.len() != gold.len() {
        return Err(Error::Shape {
            expected: gold.len(),
            got: preds.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Usage("nothing to score".into()));
    }
    let vars = format.len();
    for row in preds.iter().chain(gold) {
        if row.len() != vars {
            return Err(Error::Shape {
                expected: vars,
                got: row.len(),
            });
        }
    }
    let mut r = Vec::with_capacity(vars);
    for v in 0..vars {
        let p: Vec<f64> = preds.iter().map(|row| row[v]).collect();
        let g: Vec<f64> = gold.iter().map(|row| row[v]).collect();
        r.push(match pearson(&p, &g) {
            Ok(x) => Some(x),
            Err(Error::UndefinedCorrelation(why)) => {
                log::warn!("{}/{}: correlation undefined ({why})", tag.dataset, format.variables()[v]);
                None
            }
            Err(e) => return Err(e),
        });
    }
    let mean = r
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .map(|rs| rs.iter().sum::<f64>() / rs.len() as f64);
    Ok(EvalReport {
        dataset: tag.dataset.clone(),
        trained_on: tag.trained_on.clone(),
        condition: tag.condition,
        format: format.name().to_owned(),
        variables: format.variables().to_vec(),
        r,
        mean,
        items: gold.len(),
    })
}

/// Anything that maps a word vector to a normalized label.
pub trait Predictor {
    fn format(&self) -> &Arc<LabelFormat>;
    fn predict(&self, word_vector: &[f64]) -> Result<Vec<f64>>;
}

/// Base model read through a portable head.
pub struct PphPredictor<'a> {
    pub base: &'a BaseModel,
    pub head: PredictionHead,
}

impl<'a> PphPredictor<'a> {
    pub fn new(base: &'a BaseModel, head: PredictionHead) -> Result<Self> {
        if head.dim() != base.dim() {
            return Err(Error::config(format!(
                "head expects {}-dimensional embeddings, base produces {}",
                head.dim(),
                base.dim()
            )));
        }
        Ok(PphPredictor { base, head })
    }
}

impl Predictor for PphPredictor<'_> {
    fn format(&self) -> &Arc<LabelFormat> {
        self.head.format()
    }

    fn predict(&self, word_vector: &[f64]) -> Result<Vec<f64>> {
        Ok(self.head.apply(&self.base.embed(word_vector)?)?.into_values())
    }
}

impl Predictor for BaselineModel {
    fn format(&self) -> &Arc<LabelFormat> {
        BaselineModel::format(self)
    }

    fn predict(&self, word_vector: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_normalized(word_vector)?.into_values())
    }
}

/// Baseline for the source format followed by the label mapper.
pub struct PostProcPredictor<'a> {
    pub baseline: &'a BaselineModel,
    pub mapper: &'a MultiwayMapper,
    pub target: Arc<LabelFormat>,
}

impl Predictor for PostProcPredictor<'_> {
    fn format(&self) -> &Arc<LabelFormat> {
        &self.target
    }

    fn predict(&self, word_vector: &[f64]) -> Result<Vec<f64>> {
        let y = self.baseline.predict_normalized(word_vector)?;
        let mapped = map_labels(self.mapper, self.baseline.format(), &self.target, &[y])?;
        Ok(mapped.into_iter().next().map(LabelVector::into_values).unwrap_or_default())
    }
}

/// Predictions for every test input. Reads inputs only.
pub fn predict_all(predictor: &dyn Predictor, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|x| predictor.predict(x)).collect()
}

/// Score a predictor on a test split in normalized space.
pub fn evaluate(predictor: &dyn Predictor, test: &Examples, tag: &ReportTag) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Usage(format!("empty test split for `{}`", tag.dataset)));
    }
    if !predictor.format().same_space(&test.format) {
        return Err(Error::config(format!(
            "predictor outputs `{}` but the test data is `{}`",
            predictor.format().name(),
            test.format.name()
        )));
    }
    let preds = predict_all(predictor, &test.inputs)?;
    score(tag, &test.format, &preds, &test.targets)
}

/// A system tested on a format it never saw labels of.
pub enum ZeroShot<'a> {
    /// Base model trained on `trained_on`, read through the target head.
    Pph {
        base: &'a BaseModel,
        trained_on: Arc<LabelFormat>,
    },
    /// Baseline for its own format, mapped to the target afterwards.
    PostProc { baseline: &'a BaselineModel },
}

/// Zero-shot evaluation on `test`, whose format differs from the training
/// format. The test lexicon's gold labels are only consulted when scoring.
pub fn zero_shot_eval(system: &ZeroShot<'_>, mapper: &MultiwayMapper, test: &Examples, dataset: &str) -> Result<EvalReport> {
    let target = &test.format;
    let source = match system {
        ZeroShot::Pph { trained_on, .. } => trained_on,
        ZeroShot::PostProc { baseline } => baseline.format(),
    };
    if source.name() == target.name() {
        return Err(Error::config(format!(
            "zero-shot evaluation needs a target format other than `{}`",
            source.name()
        )));
    }
    let (predictor, condition): (Box<dyn Predictor + '_>, _) = match system {
        ZeroShot::Pph { base, .. } => (
            Box::new(PphPredictor::new(base, mapper.head_for(target)?)?),
            Condition::ZeroshotPph,
        ),
        ZeroShot::PostProc { baseline } => {
            if !mapper.supports(source) {
                return Err(Error::config(format!("mapper has no encoder for `{}`", source.name())));
            }
            mapper.head_for(target)?;
            (
                Box::new(PostProcPredictor {
                    baseline,
                    mapper,
                    target: Arc::clone(target),
                }),
                Condition::ZeroshotPostproc,
            )
        }
    };
    let tag = ReportTag {
        dataset: dataset.to_owned(),
        trained_on: source.name().to_owned(),
        condition,
    };
    evaluate(predictor.as_ref(), test, &tag)
}

/// Unweighted mean of per-dataset means; undefined if any is.
pub fn grand_mean(reports: &[EvalReport]) -> Option<f64> {
    if reports.is_empty() {
        return None;
    }
    let means = reports.iter().map(|r| r.mean).collect::<Option<Vec<f64>>>()?;
    Some(means.iter().sum::<f64>() / means.len() as f64)
}

fn fmt_r(r: Option<f64>) -> String {
    r.map_or_else(|| "undef".to_owned(), |r| format!("{r:.3}"))
}

/// Human-readable table, three decimals.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:<12} {:<20} {:>6}  per-variable", "Test Data", "Train Data", "Condition", "r");
    for rep in reports {
        let vars = rep
            .variables
            .iter()
            .zip(&rep.r)
            .map(|(v, r)| format!("{v}={}", fmt_r(*r)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{:<14} {:<12} {:<20} {:>6}  {vars}",
            rep.dataset,
            rep.trained_on,
            rep.condition.as_str(),
            fmt_r(rep.mean)
        );
    }
    if reports.len() > 1 {
        let _ = writeln!(out, "{:<14} {:<12} {:<20} {:>6}", "mean", "", "", fmt_r(grand_mean(reports)));
    }
    out
}

pub fn write_reports(path: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(reports).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<EvalReport>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{denormalize_label, LabelVector};
    use proptest::prelude::*;

    fn tag() -> ReportTag {
        ReportTag {
            dataset: "t".into(),
            trained_on: "vad".into(),
            condition: Condition::SupervisedPph,
        }
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 9.0 / 84f64.sqrt()).abs() < 1e-12);
        assert_eq!(format!("{r:.4}"), "0.9820");
    }

    #[test]
    fn pearson_undefined_cases() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::Shape { .. })));
    }

    fn gold() -> Vec<Vec<f64>> {
        vec![
            vec![0.1, -0.5, 0.3],
            vec![0.7, 0.2, -0.1],
            vec![-0.4, 0.9, 0.0],
            vec![0.2, 0.1, 0.8],
        ]
    }

    #[test]
    fn perfect_and_affine_predictions() {
        let vad = LabelFormat::vad();
        let g = gold();
        let same = score(&tag(), &vad, &g, &g).unwrap();
        for r in &same.r {
            assert!((r.unwrap() - 1.0).abs() < 1e-12);
        }
        let affine: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|v| 2.0 * v + 1.0).collect()).collect();
        let rep = score(&tag(), &vad, &affine, &g).unwrap();
        for r in &rep.r {
            assert!((r.unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(rep.items, 4);
    }

    #[test]
    fn raw_and_normalized_scores_agree() {
        let vad = Arc::new(LabelFormat::vad());
        let g = gold();
        let preds: Vec<Vec<f64>> = g.iter().map(|r| vec![r[0] * 0.5 + r[1], r[1] - r[2], r[2] * r[2]]).collect();
        let raw = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    let y = LabelVector::prediction(vad.clone(), r.clone()).unwrap();
                    denormalize_label(&y, &vad).unwrap().unclamped
                })
                .collect()
        };
        let a = score(&tag(), &vad, &preds, &g).unwrap();
        let b = score(&tag(), &vad, &raw(&preds), &raw(&g)).unwrap();
        for (x, y) in a.r.iter().zip(&b.r) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn undefined_variable_is_marked_not_zeroed() {
        let vad = LabelFormat::vad();
        let g = gold();
        let mut p = g.clone();
        for row in &mut p {
            row[1] = 0.25;
        }
        let rep = score(&tag(), &vad, &p, &g).unwrap();
        assert_eq!(rep.r[1], None);
        assert_eq!(rep.mean, None);
        assert!(render_table(&[rep]).contains("undef"));
    }

    #[test]
    fn evaluate_rejects_empty_split() {
        let vad = Arc::new(LabelFormat::vad());
        let empty = Examples {
            format: vad.clone(),
            keys: vec![],
            inputs: vec![],
            targets: vec![],
        };
        let model = BaselineModel::random(4, &[3], vad, 0).unwrap();
        assert!(matches!(evaluate(&model, &empty, &tag()), Err(Error::Usage(_))));
    }

    #[test]
    fn grand_mean_is_unweighted_over_datasets() {
        let vad = LabelFormat::vad();
        let g = gold();
        let mut a = score(&tag(), &vad, &g, &g).unwrap();
        let mut b = a.clone();
        a.mean = Some(0.8);
        b.mean = Some(0.6);
        assert!((grand_mean(&[a.clone(), b.clone()]).unwrap() - 0.7).abs() < 1e-15);
        b.mean = None;
        assert_eq!(grand_mean(&[a, b]), None);
        assert_eq!(grand_mean(&[]), None);
    }

    #[test]
    fn table_uses_three_decimals_and_json_keeps_precision() {
        let vad = LabelFormat::vad();
        let g = gold();
        let p: Vec<Vec<f64>> = g.iter().map(|r| vec![r[0], r[1] + r[0], r[2]]).collect();
        let rep = score(&tag(), &vad, &p, &g).unwrap();
        let table = render_table(std::slice::from_ref(&rep));
        assert!(table.contains(&format!("{:.3}", rep.mean.unwrap())));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_reports(&path, std::slice::from_ref(&rep)).unwrap();
        assert_eq!(read_reports(&path).unwrap(), vec![rep]);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"supervised-pph\""));
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_affine_invariant(
            xs in prop::collection::vec(-10.0f64..10.0, 3..40),
            seed in prop::collection::vec(-10.0f64..10.0, 40),
            a in 0.01f64..100.0,
            b in -50.0f64..50.0,
        ) {
            let ys: Vec<f64> = seed[..xs.len()].to_vec();
            if let (Ok(r), Ok(s)) = (pearson(&xs, &ys), pearson(&ys, &xs)) {
                prop_assert!((-1.0..=1.0).contains(&r));
                prop_assert!((r - s).abs() < 1e-12);
                let t: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
                prop_assert!((pearson(&xs, &t).unwrap() - r).abs() < 1e-9);
            }
        }

        #[test]
        fn report_mean_is_mean_of_entries(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 3..20)) {
            let vad = LabelFormat::vad();
            let p: Vec<Vec<f64>> = rows.iter().map(|r| r[..3].to_vec()).collect();
            let g: Vec<Vec<f64>> = rows.iter().map(|r| r[3..].to_vec()).collect();
            let rep = score(&tag(), &vad, &p, &g).unwrap();
            if let Some(m) = rep.mean {
                let rs: Vec<f64> = rep.r.iter().map(|r| r.unwrap()).collect();
                prop_assert_eq!(m, rs.iter().sum::<f64>() / rs.len() as f64);
            }
        }
    }
}
