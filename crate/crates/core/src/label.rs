//! Label formats, ratings and the emotion-embedding value type.
//!
//! A [`LabelFormat`] names a set of emotion variables together with the raw
//! rating scale of one dataset and the interval its values are normalized
//! into. Formats are identified by name: two datasets annotated on different
//! raw scales (Valence on `[1, 9]` versus `[-3, 3]`) still share one
//! normalized space as long as they carry the same name and variables.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that normalized values sit inside the
/// target interval.
pub const INTERVAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetInterval {
    /// `[-1, 1]`, for constructs with a negative and a positive pole.
    Bipolar,
    /// `[0, 1]`, for intensity-only constructs.
    Unipolar,
}

impl TargetInterval {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            TargetInterval::Bipolar => (-1.0, 1.0),
            TargetInterval::Unipolar => (0.0, 1.0),
        }
    }

    pub fn midpoint(self) -> f64 {
        let (lo, hi) = self.bounds();
        (lo + hi) / 2.0
    }

    pub fn contains(self, v: f64) -> bool {
        let (lo, hi) = self.bounds();
        v >= lo - INTERVAL_TOLERANCE && v <= hi + INTERVAL_TOLERANCE
    }
}

/// On-disk shape of a format description.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct FormatFile {
    name: String,
    variables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_max: Option<Vec<f64>>,
    target: TargetInterval,
}

/// A named set of emotion variables with optional per-variable raw ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FormatFile", into = "FormatFile")]
pub struct LabelFormat {
    name: String,
    variables: Vec<String>,
    range: Option<(Vec<f64>, Vec<f64>)>,
    target: TargetInterval,
}

impl TryFrom<FormatFile> for LabelFormat {
    type Error = Error;

    fn try_from(f: FormatFile) -> Result<Self> {
        let format = LabelFormat::new(f.name, f.variables, f.target)?;
        match (f.raw_min, f.raw_max) {
            (Some(min), Some(max)) => format.with_range(min, max),
            (None, None) => Ok(format),
            _ => Err(Error::config(format!(
                "format `{}` declares only one of raw_min/raw_max",
                format.name
            ))),
        }
    }
}

impl From<LabelFormat> for FormatFile {
    fn from(f: LabelFormat) -> Self {
        let (raw_min, raw_max) = match f.range {
            Some((min, max)) => (Some(min), Some(max)),
            None => (None, None),
        };
        FormatFile {
            name: f.name,
            variables: f.variables,
            raw_min,
            raw_max,
            target: f.target,
        }
    }
}

impl LabelFormat {
    /// A format without raw ranges. Ranges are attached per dataset with
    /// [`LabelFormat::with_range`].
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        variables: impl IntoIterator<Item = S>,
        target: TargetInterval,
    ) -> Result<Self> {
        let name = name.into();
        let variables: Vec<String> = variables.into_iter().map(Into::into).collect();
        if name.is_empty() {
            return Err(Error::config("format name is empty"));
        }
        if variables.is_empty() {
            return Err(Error::config(format!("format `{name}` has no variables")));
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(Error::config(format!(
                    "format `{name}` lists variable `{v}` twice"
                )));
            }
        }
        Ok(LabelFormat {
            name,
            variables,
            range: None,
            target,
        })
    }

    pub fn with_range(mut self, raw_min: Vec<f64>, raw_max: Vec<f64>) -> Result<Self> {
        let n = self.variables.len();
        if raw_min.len() != n || raw_max.len() != n {
            return Err(Error::config(format!(
                "format `{}` has {n} variables but {} / {} range bounds",
                self.name,
                raw_min.len(),
                raw_max.len()
            )));
        }
        for (i, (lo, hi)) in raw_min.iter().zip(&raw_max).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!(
                    "format `{}`: invalid range [{lo}, {hi}] for `{}`",
                    self.name, self.variables[i]
                )));
            }
        }
        self.range = Some((raw_min, raw_max));
        Ok(self)
    }

    /// Same range for every variable.
    pub fn with_uniform_range(self, min: f64, max: f64) -> Result<Self> {
        let n = self.variables.len();
        self.with_range(vec![min; n], vec![max; n])
    }

    /// Valence, Arousal, Dominance on `[1, 9]`, bipolar.
    pub fn vad() -> Self {
        Self::new("vad", ["valence", "arousal", "dominance"], TargetInterval::Bipolar)
            .and_then(|f| f.with_uniform_range(1.0, 9.0))
            .expect("built-in format")
    }

    /// Valence and Arousal on `[1, 9]`, bipolar.
    pub fn va() -> Self {
        Self::new("va", ["valence", "arousal"], TargetInterval::Bipolar)
            .and_then(|f| f.with_uniform_range(1.0, 9.0))
            .expect("built-in format")
    }

    /// Joy, Anger, Sadness, Fear, Disgust on `[1, 5]`, unipolar.
    pub fn be5() -> Self {
        Self::new(
            "be5",
            ["joy", "anger", "sadness", "fear", "disgust"],
            TargetInterval::Unipolar,
        )
        .and_then(|f| f.with_uniform_range(1.0, 5.0))
        .expect("built-in format")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "vad" => Some(Self::vad()),
            "va" => Some(Self::va()),
            "be5" => Some(Self::be5()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn target(&self) -> TargetInterval {
        self.target
    }

    pub fn position(&self, variable: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == variable)
    }

    /// Raw range of variable `i`; formats without declared ranges fail.
    pub fn range(&self, i: usize) -> Result<(f64, f64)> {
        let (min, max) = self.range.as_ref().ok_or_else(|| {
            Error::config(format!("format `{}` declares no raw range", self.name))
        })?;
        Ok((min[i], max[i]))
    }

    pub fn has_range(&self) -> bool {
        self.range.is_some()
    }

    /// Same name and variable list; ranges may differ between datasets.
    pub fn same_space(&self, other: &LabelFormat) -> bool {
        self.name == other.name && self.variables == other.variables && self.target == other.target
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("format serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

impl fmt::Display for LabelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.variables.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Raw,
    Normalized,
}

/// One rating in one format.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVector {
    format: Arc<LabelFormat>,
    values: Vec<f64>,
    space: Space,
}

impl LabelVector {
    /// A raw rating, checked against the format's declared range.
    pub fn raw(format: Arc<LabelFormat>, values: Vec<f64>) -> Result<Self> {
        check_len(&format, &values)?;
        for (i, &v) in values.iter().enumerate() {
            let (min, max) = format.range(i)?;
            if !(v >= min && v <= max) {
                return Err(Error::Range {
                    variable: format.variables[i].clone(),
                    value: v,
                    min,
                    max,
                });
            }
        }
        Ok(LabelVector {
            format,
            values,
            space: Space::Raw,
        })
    }

    /// A normalized rating, checked against the target interval.
    pub fn normalized(format: Arc<LabelFormat>, values: Vec<f64>) -> Result<Self> {
        check_len(&format, &values)?;
        let target = format.target;
        for (i, &v) in values.iter().enumerate() {
            if !target.contains(v) {
                let (min, max) = target.bounds();
                return Err(Error::Range {
                    variable: format.variables[i].clone(),
                    value: v,
                    min,
                    max,
                });
            }
        }
        Ok(LabelVector {
            format,
            values,
            space: Space::Normalized,
        })
    }

    /// Model output in normalized space. Heads are unconstrained linear maps
    /// so the values may leave the target interval.
    pub fn prediction(format: Arc<LabelFormat>, values: Vec<f64>) -> Result<Self> {
        check_len(&format, &values)?;
        Ok(LabelVector {
            format,
            values,
            space: Space::Normalized,
        })
    }

    pub fn format(&self) -> &Arc<LabelFormat> {
        &self.format
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn get(&self, variable: &str) -> Option<f64> {
        self.format.position(variable).map(|i| self.values[i])
    }
}

fn check_len(format: &LabelFormat, values: &[f64]) -> Result<()> {
    if format.len() == values.len() {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "format `{}` has {} variables, label has {} values",
            format.name,
            format.len(),
            values.len()
        )))
    }
}

/// Min-max scale a raw rating into its format's target interval.
pub fn normalize_label(label: &LabelVector) -> Result<LabelVector> {
    if label.space != Space::Raw {
        return Err(Error::Usage("label is already normalized".into()));
    }
    let format = &label.format;
    let (lo, hi) = format.target.bounds();
    let mut out = Vec::with_capacity(label.values.len());
    for (i, &v) in label.values.iter().enumerate() {
        let (min, max) = format.range(i)?;
        if !(v >= min && v <= max) {
            return Err(Error::Range {
                variable: format.variables[i].clone(),
                value: v,
                min,
                max,
            });
        }
        let unit = (v - min) / (max - min);
        // Pin the endpoints so boundary mapping is exact.
        let scaled = if v == min {
            lo
        } else if v == max {
            hi
        } else {
            lo + (hi - lo) * unit
        };
        out.push(scaled);
    }
    Ok(LabelVector {
        format: Arc::clone(format),
        values: out,
        space: Space::Normalized,
    })
}

/// A normalized label mapped back onto a raw rating scale.
#[derive(Clone, Debug, PartialEq)]
pub struct RawLabel {
    /// Clamped into `[raw_min, raw_max]`, suitable for display.
    pub clamped: LabelVector,
    /// Exact inverse of normalization; used for evaluation.
    pub unclamped: Vec<f64>,
}

/// Inverse of [`normalize_label`] onto `format`'s raw scale.
///
/// `format` must describe the same space as the label (same name and
/// variables) but may carry a different dataset's raw range.
pub fn denormalize_label(label: &LabelVector, format: &Arc<LabelFormat>) -> Result<RawLabel> {
    if label.space != Space::Normalized {
        return Err(Error::Usage("label is not normalized".into()));
    }
    if label.values.len() != format.len() {
        return Err(Error::Format(format!(
            "label has {} values, format `{}` has {} variables",
            label.values.len(),
            format.name,
            format.len()
        )));
    }
    if !label.format.same_space(format) {
        return Err(Error::Format(format!(
            "label in format `{}` cannot be denormalized as `{}`",
            label.format, format
        )));
    }
    let (lo, hi) = format.target.bounds();
    let mut clamped = Vec::with_capacity(label.values.len());
    let mut unclamped = Vec::with_capacity(label.values.len());
    for (i, &v) in label.values.iter().enumerate() {
        let (min, max) = format.range(i)?;
        let raw = if v == lo {
            min
        } else if v == hi {
            max
        } else {
            min + (v - lo) / (hi - lo) * (max - min)
        };
        unclamped.push(raw);
        clamped.push(raw.clamp(min, max));
    }
    Ok(RawLabel {
        clamped: LabelVector {
            format: Arc::clone(format),
            values: clamped,
            space: Space::Raw,
        },
        unclamped,
    })
}

/// Select `target`'s variables out of `label`, in `target` order.
pub fn project_format(label: &LabelVector, target: &Arc<LabelFormat>) -> Result<LabelVector> {
    let mut values = Vec::with_capacity(target.len());
    for var in &target.variables {
        let i = label.format.position(var).ok_or_else(|| Error::Projection {
            from: label.format.name.clone(),
            to: target.name.clone(),
            missing: var.clone(),
        })?;
        values.push(label.values[i]);
    }
    Ok(LabelVector {
        format: Arc::clone(target),
        values,
        space: label.space,
    })
}

/// A point in the shared emotion space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionEmbedding(Vec<f64>);

impl EmotionEmbedding {
    pub fn new(coords: Vec<f64>) -> Self {
        EmotionEmbedding(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        EmotionEmbedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &EmotionEmbedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}
