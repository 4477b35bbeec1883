use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HpoError;

/// A single hyperparameter value.
///
/// Serialized untagged: integers as JSON integers, reals as JSON floats
/// (always with a fractional part), categories as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            ParamValue::Cat(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(*i),
            ParamValue::Real(r) if r.fract() == 0.0 => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Cat(s) => write!(f, "{s}"),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Cat(v.to_string())
    }
}

/// A concrete assignment of values to named hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSetting(BTreeMap<String, ParamValue>);

impl ParamSetting {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.0.insert(name.to_string(), value.into());
        self
    }

    pub fn insert(&mut self, name: &str, value: impl Into<ParamValue>) {
        self.0.insert(name.to_string(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("settings serialize")
    }
}

impl fmt::Display for ParamSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimKind {
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    Integer { low: i64, high: i64 },
    LogInteger { low: i64, high: i64 },
    Categorical { choices: Vec<ParamValue> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimKind,
}

impl Dimension {
    pub fn uniform(name: &str, low: f64, high: f64) -> Self {
        Self::new(name, DimKind::Uniform { low, high })
    }

    pub fn log_uniform(name: &str, low: f64, high: f64) -> Self {
        Self::new(name, DimKind::LogUniform { low, high })
    }

    pub fn integer(name: &str, low: i64, high: i64) -> Self {
        Self::new(name, DimKind::Integer { low, high })
    }

    pub fn log_integer(name: &str, low: i64, high: i64) -> Self {
        Self::new(name, DimKind::LogInteger { low, high })
    }

    pub fn categorical(name: &str, choices: Vec<ParamValue>) -> Self {
        Self::new(name, DimKind::Categorical { choices })
    }

    fn new(name: &str, kind: DimKind) -> Self {
        Dimension {
            name: name.to_string(),
            kind,
        }
    }

    fn validate(&self) -> Result<(), HpoError> {
        let bad = |msg: &str| Err(HpoError::Config(format!("dimension `{}`: {msg}", self.name)));
        match &self.kind {
            DimKind::Uniform { low, high } if !(low < high && low.is_finite() && high.is_finite()) => {
                bad("requires finite low < high")
            }
            DimKind::LogUniform { low, high } if !(*low > 0.0 && low < high && high.is_finite()) => {
                bad("requires 0 < low < high")
            }
            DimKind::Integer { low, high } if low >= high => bad("requires low < high"),
            DimKind::LogInteger { low, high } if !(*low > 0 && low < high) => {
                bad("requires 0 < low < high")
            }
            DimKind::Categorical { choices } if choices.is_empty() => bad("has no categories"),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.kind, value) {
            (DimKind::Uniform { low, high } | DimKind::LogUniform { low, high }, v) => {
                v.as_f64().is_some_and(|x| x >= *low && x <= *high)
            }
            (DimKind::Integer { low, high } | DimKind::LogInteger { low, high }, ParamValue::Int(i)) => {
                i >= low && i <= high
            }
            (DimKind::Categorical { choices }, v) => choices.contains(v),
            _ => false,
        }
    }

    /// Interval on which the Parzen estimator works: log scale for log kinds,
    /// half-unit padding around integer ranges. `None` for categoricals.
    pub(crate) fn internal_bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            DimKind::Uniform { low, high } => Some((low, high)),
            DimKind::LogUniform { low, high } => Some((low.ln(), high.ln())),
            DimKind::Integer { low, high } => Some((low as f64 - 0.5, high as f64 + 0.5)),
            DimKind::LogInteger { low, high } => {
                Some(((low as f64 - 0.5).max(low as f64 * 0.5).ln(), (high as f64 + 0.5).ln()))
            }
            DimKind::Categorical { .. } => None,
        }
    }

    pub(crate) fn to_internal(&self, value: &ParamValue) -> Option<f64> {
        let x = value.as_f64()?;
        match self.kind {
            DimKind::Uniform { .. } | DimKind::Integer { .. } => Some(x),
            DimKind::LogUniform { .. } | DimKind::LogInteger { .. } => Some(x.ln()),
            DimKind::Categorical { .. } => None,
        }
    }

    /// Maps a point of the internal interval back to a valid value.
    pub(crate) fn decode(&self, x: f64) -> ParamValue {
        match self.kind {
            DimKind::Uniform { low, high } => ParamValue::Real(x.clamp(low, high)),
            DimKind::LogUniform { low, high } => ParamValue::Real(x.exp().clamp(low, high)),
            DimKind::Integer { low, high } => ParamValue::Int((x.round() as i64).clamp(low, high)),
            DimKind::LogInteger { low, high } => {
                ParamValue::Int((x.exp().round() as i64).clamp(low, high))
            }
            DimKind::Categorical { ref choices } => choices[0].clone(),
        }
    }

    pub(crate) fn sample_uniform<R: Rng>(&self, rng: &mut R) -> ParamValue {
        match &self.kind {
            DimKind::Categorical { choices } => choices[rng.random_range(0..choices.len())].clone(),
            DimKind::Integer { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
            _ => {
                let (lo, hi) = self.internal_bounds().expect("numeric dimension");
                self.decode(rng.random_range(lo..hi))
            }
        }
    }
}

/// Ordered list of search dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    dims: Vec<Dimension>,
}

impl ParamSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, HpoError> {
        for (i, d) in dims.iter().enumerate() {
            d.validate()?;
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(HpoError::Config(format!("duplicate dimension `{}`", d.name)));
            }
        }
        Ok(ParamSpace { dims })
    }

    /// A space whose only point is `setting`.
    pub fn single_point(setting: &ParamSetting) -> Self {
        ParamSpace {
            dims: setting
                .iter()
                .map(|(k, v)| Dimension::categorical(k, vec![v.clone()]))
                .collect(),
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, setting: &ParamSetting) -> bool {
        setting.len() == self.dims.len()
            && self
                .dims
                .iter()
                .all(|d| setting.get(&d.name).is_some_and(|v| d.contains(v)))
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> ParamSetting {
        let mut s = ParamSetting::new();
        for d in &self.dims {
            s.insert(&d.name, d.sample_uniform(rng));
        }
        s
    }
}
