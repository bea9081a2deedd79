//! Study-level effects on the analysis scale, and the constructors that
//! build them from the summaries studies usually report.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{two_sided_z, Probability};

/// Effect measure. Mean differences are analysed on the identity scale,
/// odds ratios on the natural-log scale. The null is 0 on the analysis
/// scale in both cases (1 on the odds-ratio display scale).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectMeasure {
    #[serde(rename = "MD")]
    MeanDifference,
    #[serde(rename = "OR")]
    OddsRatio,
}

impl EffectMeasure {
    pub fn tag(self) -> &'static str {
        match self {
            EffectMeasure::MeanDifference => "MD",
            EffectMeasure::OddsRatio => "OR",
        }
    }

    pub fn is_log_scale(self) -> bool {
        matches!(self, EffectMeasure::OddsRatio)
    }

    /// Analysis scale to display scale.
    pub fn to_display(self, y: f64) -> f64 {
        match self {
            EffectMeasure::MeanDifference => y,
            EffectMeasure::OddsRatio => y.exp(),
        }
    }

    /// Display scale to analysis scale. Fails for non-positive odds ratios.
    pub fn to_analysis(self, x: f64) -> Result<f64> {
        match self {
            EffectMeasure::MeanDifference => Ok(x),
            EffectMeasure::OddsRatio if x > 0.0 => Ok(x.ln()),
            EffectMeasure::OddsRatio => Err(Error::domain(format!(
                "odds ratio must be > 0, got {x}"
            ))),
        }
    }

    /// Null value on the display scale.
    pub fn display_null(self) -> f64 {
        self.to_display(0.0)
    }
}

impl fmt::Display for EffectMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EffectMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "MD" | "md" => Ok(EffectMeasure::MeanDifference),
            "OR" | "or" => Ok(EffectMeasure::OddsRatio),
            other => Err(Error::domain(format!("unknown measure {other:?} (expected MD or OR)"))),
        }
    }
}

/// One study's effect estimate `y` with within-study variance `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyEffect {
    pub label: String,
    pub y: f64,
    pub v: f64,
    pub measure: EffectMeasure,
}

impl StudyEffect {
    pub fn new(label: impl Into<String>, y: f64, v: f64, measure: EffectMeasure) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::domain(format!("effect estimate must be finite, got {y}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("variance must be finite and > 0, got {v}")));
        }
        Ok(StudyEffect {
            label: label.into(),
            y,
            v,
            measure,
        })
    }

    pub fn se(&self) -> f64 {
        self.v.sqrt()
    }
}

/// A two-sided confidence interval. Endpoints are on whatever scale the
/// caller is working in; `level` is the coverage, e.g. 0.95.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: Probability,
}

impl ConfidenceInterval {
    pub fn new(lo: f64, hi: f64, level: Probability) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::domain("interval endpoints must be finite"));
        }
        if lo >= hi {
            return Err(Error::domain(format!("interval needs lo < hi, got [{lo}, {hi}]")));
        }
        let l = level.get();
        if l <= 0.0 || l >= 1.0 {
            return Err(Error::domain(format!("confidence level must lie in (0, 1), got {l}")));
        }
        Ok(ConfidenceInterval { lo, hi, level })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

pub fn default_level() -> Probability {
    Probability::new(0.95).expect("0.95 is a probability")
}

pub fn study_from_estimate_se(
    label: impl Into<String>,
    y: f64,
    se: f64,
    measure: EffectMeasure,
) -> Result<StudyEffect> {
    if !(se.is_finite() && se > 0.0) {
        return Err(Error::domain(format!("se must be > 0, got {se}")));
    }
    StudyEffect::new(label, y, se * se, measure)
}

/// Back-calculates a study from a reported interval, assuming it is a
/// symmetric Wald interval on the analysis scale (log scale for odds ratios).
pub fn study_from_ci(
    label: impl Into<String>,
    ci: ConfidenceInterval,
    measure: EffectMeasure,
) -> Result<StudyEffect> {
    let ci = ConfidenceInterval::new(ci.lo, ci.hi, ci.level)?;
    if measure == EffectMeasure::OddsRatio && ci.lo <= 0.0 {
        return Err(Error::domain(format!(
            "odds-ratio interval needs lo > 0, got {}",
            ci.lo
        )));
    }
    let lo = measure.to_analysis(ci.lo)?;
    let hi = measure.to_analysis(ci.hi)?;
    let z = two_sided_z(ci.level)?;
    let y = 0.5 * (lo + hi);
    let se = (hi - lo) / (2.0 * z);
    study_from_estimate_se(label, y, se, measure)
}

#[allow(clippy::too_many_arguments)]
pub fn study_from_two_arm_continuous(
    label: impl Into<String>,
    n1: u64,
    mean1: f64,
    sd1: f64,
    n2: u64,
    mean2: f64,
    sd2: f64,
) -> Result<StudyEffect> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::domain(format!(
            "each arm needs at least 2 participants, got n1={n1}, n2={n2}"
        )));
    }
    for (name, sd) in [("sd1", sd1), ("sd2", sd2)] {
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::domain(format!("{name} must be > 0, got {sd}")));
        }
    }
    let v = sd1 * sd1 / n1 as f64 + sd2 * sd2 / n2 as f64;
    StudyEffect::new(label, mean1 - mean2, v, EffectMeasure::MeanDifference)
}

/// Log odds ratio from a 2x2 table `[[a, b], [c, d]]` (rows are arms,
/// columns events / non-events). Adds 0.5 to every cell when any cell is 0.
pub fn study_from_2x2(label: impl Into<String>, a: u64, b: u64, c: u64, d: u64) -> Result<StudyEffect> {
    if a + b == 0 || c + d == 0 {
        return Err(Error::domain("2x2 table has an empty arm"));
    }
    let mut cells = [a as f64, b as f64, c as f64, d as f64];
    if cells.contains(&0.0) {
        cells.iter_mut().for_each(|x| *x += 0.5);
    }
    let [a, b, c, d] = cells;
    let y = (a * d / (b * c)).ln();
    // grouped by arm so swapping arms gives the identical sum
    let v = (1.0 / a + 1.0 / b) + (1.0 / c + 1.0 / d);
    StudyEffect::new(label, y, v, EffectMeasure::OddsRatio)
}
