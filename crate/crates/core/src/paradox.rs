//! The significance-reversal paradox: every study is individually
//! significant on the same side of the null, yet the pooled interval
//! covers the null.
//!
//! Significance is a two-sided Wald interval at level `1 - alpha` that
//! excludes the null (0 on the analysis scale; 1 on the odds-ratio display
//! scale, which the log transform maps to 0).

use serde::{Deserialize, Serialize};

use crate::effect::{ConfidenceInterval, EffectMeasure, StudyEffect};
use crate::error::{Error, Result};
use crate::pooling::{ci_of, meta_analyze, ModelKind};
use crate::stats::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Positive,
    Negative,
    NotSignificant,
}

impl Direction {
    /// Classifies an interval against a null value.
    pub fn of_interval(lo: f64, hi: f64, null: f64) -> Self {
        if lo > null {
            Direction::Positive
        } else if hi < null {
            Direction::Negative
        } else {
            Direction::NotSignificant
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Positive => Direction::Negative,
            Direction::Negative => Direction::Positive,
            Direction::NotSignificant => Direction::NotSignificant,
        }
    }

    pub fn is_significant(self) -> bool {
        self != Direction::NotSignificant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Paradox,
    NoParadox,
    /// The studies are not all significant on the same side, so the
    /// paradox's premise does not hold.
    NotUnanimous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadoxVerdict {
    pub study_directions: Vec<Direction>,
    pub pooled_direction: Direction,
    pub classification: Classification,
    pub model: ModelKind,
    pub alpha: Probability,
    /// Pooled estimate and interval on the analysis scale.
    pub pooled_estimate: f64,
    pub pooled_ci: ConfidenceInterval,
}

fn level_for(alpha: Probability) -> Result<Probability> {
    let a = alpha.get();
    if a <= 0.0 || a >= 1.0 {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {a}")));
    }
    Probability::new(1.0 - a)
}

/// Unanimity first, then pooled significance.
pub fn classify(study_directions: &[Direction], pooled: Direction) -> Classification {
    let first = match study_directions.first() {
        Some(&d) if d.is_significant() => d,
        _ => return Classification::NotUnanimous,
    };
    if study_directions.iter().any(|&d| d != first) {
        Classification::NotUnanimous
    } else if pooled.is_significant() {
        Classification::NoParadox
    } else {
        Classification::Paradox
    }
}

pub fn study_direction(study: &StudyEffect, alpha: Probability) -> Result<Direction> {
    let ci = ci_of(study.y, study.se(), level_for(alpha)?)?;
    Ok(Direction::of_interval(ci.lo, ci.hi, 0.0))
}

pub fn detect_paradox(
    studies: &[StudyEffect],
    alpha: Probability,
    model: ModelKind,
) -> Result<ParadoxVerdict> {
    let level = level_for(alpha)?;
    let pooled = meta_analyze(studies, level, model)?;
    let study_directions = studies
        .iter()
        .map(|s| study_direction(s, alpha))
        .collect::<Result<Vec<_>>>()?;
    let pooled_direction = Direction::of_interval(pooled.ci.lo, pooled.ci.hi, 0.0);
    Ok(ParadoxVerdict {
        classification: classify(&study_directions, pooled_direction),
        study_directions,
        pooled_direction,
        model,
        alpha,
        pooled_estimate: pooled.estimate,
        pooled_ci: pooled.ci,
    })
}

/// Audits already-published intervals without re-pooling: the study
/// intervals and the pooled interval are taken as reported, on the display
/// scale of `measure`. `alpha` is the complement of the intervals' level.
pub fn detect_from_reported(
    study_cis: &[ConfidenceInterval],
    pooled_ci: ConfidenceInterval,
    measure: EffectMeasure,
    model: ModelKind,
) -> Result<ParadoxVerdict> {
    if study_cis.len() < 2 {
        return Err(Error::InsufficientStudies(study_cis.len()));
    }
    let to_analysis = |ci: &ConfidenceInterval| -> Result<ConfidenceInterval> {
        let ci = ConfidenceInterval::new(ci.lo, ci.hi, ci.level)?;
        ConfidenceInterval::new(measure.to_analysis(ci.lo)?, measure.to_analysis(ci.hi)?, ci.level)
    };
    let study_directions = study_cis
        .iter()
        .map(|ci| to_analysis(ci).map(|c| Direction::of_interval(c.lo, c.hi, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let pooled = to_analysis(&pooled_ci)?;
    let pooled_direction = Direction::of_interval(pooled.lo, pooled.hi, 0.0);
    Ok(ParadoxVerdict {
        classification: classify(&study_directions, pooled_direction),
        study_directions,
        pooled_direction,
        model,
        alpha: Probability::new(1.0 - pooled.level.get())?,
        // reported intervals are taken as symmetric on the analysis scale
        pooled_estimate: 0.5 * (pooled.lo + pooled.hi),
        pooled_ci: pooled,
    })
}
