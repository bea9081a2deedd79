//! Inverse-variance pooling: fixed-effect and DerSimonian–Laird random-effects.
//!
//! With `w_i = 1/v_i` the fixed-effect mean is `Σ w_i y_i / Σ w_i` with
//! variance `1 / Σ w_i`. Cochran's `Q = Σ w_i (y_i - ŷ_FE)²` on `k - 1`
//! degrees of freedom drives both `I² = max(0, (Q - df)/Q)` and the moment
//! estimate `τ̂² = max(0, (Q - df) / (Σw - Σw²/Σw))`. Random-effects weights
//! are `1/(v_i + τ̂²)`. Intervals are Wald intervals with a normal quantile.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::effect::{ConfidenceInterval, EffectMeasure, StudyEffect};
use crate::error::{Error, Result};
use crate::stats::{chisq_sf, two_sided_z, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(alias = "fe", alias = "fixed")]
    FixedEffect,
    #[serde(alias = "re", alias = "random")]
    RandomEffects,
}

impl ModelKind {
    pub fn short(self) -> &'static str {
        match self {
            ModelKind::FixedEffect => "FE",
            ModelKind::RandomEffects => "RE",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::FixedEffect => "FixedEffect",
            ModelKind::RandomEffects => "RandomEffects",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fe" | "fixed" | "fixedeffect" => Ok(ModelKind::FixedEffect),
            "re" | "random" | "randomeffects" => Ok(ModelKind::RandomEffects),
            other => Err(Error::domain(format!("unknown model {other:?} (expected fe or re)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityStats {
    /// Cochran's Q.
    pub q: f64,
    pub df: u32,
    /// DerSimonian–Laird between-study variance, truncated at zero.
    pub tau2: f64,
    /// Percent, full precision.
    pub i2: f64,
    /// Upper-tail chi-square p-value of Q.
    pub p_q: Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub model: ModelKind,
    pub measure: EffectMeasure,
    pub estimate: f64,
    pub se: f64,
    pub ci: ConfidenceInterval,
    pub level: Probability,
    /// Normalized weights in input order.
    pub weights: Vec<f64>,
    pub het: HeterogeneityStats,
}

/// A pooled effect mapped onto the display scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayEffect {
    pub estimate: f64,
    pub ci: ConfidenceInterval,
}

fn validate(studies: &[StudyEffect]) -> Result<EffectMeasure> {
    if studies.len() < 2 {
        return Err(Error::InsufficientStudies(studies.len()));
    }
    let measure = studies[0].measure;
    if let Some(other) = studies.iter().find(|s| s.measure != measure) {
        return Err(Error::MixedMeasures(measure.tag(), other.measure.tag()));
    }
    for s in studies {
        if !(s.y.is_finite() && s.v.is_finite() && s.v > 0.0) {
            return Err(Error::domain(format!(
                "study {:?} needs finite y and finite v > 0",
                s.label
            )));
        }
    }
    Ok(measure)
}

/// `(Σ w y / Σ w, Σ w)` for weights `1 / (v + extra)`.
fn weighted_mean(studies: &[StudyEffect], extra: f64) -> (f64, f64) {
    let (sw, swy) = studies.iter().fold((0.0, 0.0), |(sw, swy), s| {
        let w = 1.0 / (s.v + extra);
        (sw + w, swy + w * s.y)
    });
    (swy / sw, sw)
}

fn heterogeneity_unchecked(studies: &[StudyEffect]) -> Result<HeterogeneityStats> {
    let (mean, sw) = weighted_mean(studies, 0.0);
    let (q, sw2) = studies.iter().fold((0.0, 0.0), |(q, sw2), s| {
        let w = 1.0 / s.v;
        let d = s.y - mean;
        (q + w * d * d, sw2 + w * w)
    });
    let df = (studies.len() - 1) as u32;
    let dff = f64::from(df);
    let (i2, tau2) = if q > dff {
        ((q - dff) / q * 100.0, (q - dff) / (sw - sw2 / sw))
    } else {
        (0.0, 0.0)
    };
    Ok(HeterogeneityStats {
        q,
        df,
        tau2: tau2.max(0.0),
        i2,
        p_q: chisq_sf(q, df)?,
    })
}

/// Cochran's Q, I², τ̂² and the heterogeneity-test p-value.
pub fn heterogeneity(studies: &[StudyEffect]) -> Result<HeterogeneityStats> {
    validate(studies)?;
    heterogeneity_unchecked(studies)
}

/// Wald interval `estimate ± z·se` with `z` the two-sided normal quantile.
pub fn ci_of(estimate: f64, se: f64, level: Probability) -> Result<ConfidenceInterval> {
    if !(se.is_finite() && se > 0.0) {
        return Err(Error::domain(format!("se must be > 0, got {se}")));
    }
    if !estimate.is_finite() {
        return Err(Error::domain("estimate must be finite"));
    }
    let z = two_sided_z(level)?;
    ConfidenceInterval::new(estimate - z * se, estimate + z * se, level)
}

fn pool(
    studies: &[StudyEffect],
    level: Probability,
    model: ModelKind,
    measure: EffectMeasure,
    het: HeterogeneityStats,
) -> Result<PooledResult> {
    let extra = match model {
        ModelKind::FixedEffect => 0.0,
        ModelKind::RandomEffects => het.tau2,
    };
    let (estimate, sw) = weighted_mean(studies, extra);
    let se = sw.sqrt().recip();
    let weights = studies.iter().map(|s| 1.0 / (s.v + extra) / sw).collect();
    Ok(PooledResult {
        model,
        measure,
        estimate,
        se,
        ci: ci_of(estimate, se, level)?,
        level,
        weights,
        het,
    })
}

pub fn fixed_effect_pool(studies: &[StudyEffect], level: Probability) -> Result<PooledResult> {
    meta_analyze(studies, level, ModelKind::FixedEffect)
}

pub fn random_effects_pool(studies: &[StudyEffect], level: Probability) -> Result<PooledResult> {
    meta_analyze(studies, level, ModelKind::RandomEffects)
}

/// Pools under the requested model. Heterogeneity statistics are attached
/// either way.
pub fn meta_analyze(
    studies: &[StudyEffect],
    level: Probability,
    model: ModelKind,
) -> Result<PooledResult> {
    let measure = validate(studies)?;
    let het = heterogeneity_unchecked(studies)?;
    pool(studies, level, model, measure, het)
}

/// Maps a pooled result to the display scale (exponentiated for odds ratios).
pub fn to_display_scale(result: &PooledResult, measure: EffectMeasure) -> DisplayEffect {
    DisplayEffect {
        estimate: measure.to_display(result.estimate),
        ci: ConfidenceInterval {
            lo: measure.to_display(result.ci.lo),
            hi: measure.to_display(result.ci.hi),
            level: result.ci.level,
        },
    }
}
