//! Fixed-effect and DerSimonian–Laird random-effects meta-analysis, with an
//! auditor for the significance-reversal paradox: every study significant on
//! the same side of the null while the random-effects pooled interval
//! covers it.
//!
//! - [`stats`]: normal CDF/quantile and chi-square tail.
//! - [`effect`] and [`ingest`]: study effects and study files.
//! - [`pooling`]: inverse-variance pooling and heterogeneity.
//! - [`paradox`]: the paradox classifier.
//! - [`simulate`]: Monte Carlo occurrence rates.
//! - [`forest`]: text and SVG forest plots.
//! - [`cli`]: the `metaparadox` command.

pub mod cli;
pub mod effect;
pub mod error;
pub mod forest;
pub mod ingest;
pub mod paradox;
pub mod pooling;
pub mod simulate;
pub mod stats;

pub use effect::{
    study_from_2x2, study_from_ci, study_from_estimate_se, study_from_two_arm_continuous,
    ConfidenceInterval, EffectMeasure, StudyEffect,
};
pub use error::{Error, Result};
pub use ingest::{parse_studies, StudyFormat};
pub use paradox::{detect_from_reported, detect_paradox, study_direction, Classification, Direction, ParadoxVerdict};
pub use pooling::{
    ci_of, fixed_effect_pool, heterogeneity, meta_analyze, random_effects_pool, to_display_scale,
    HeterogeneityStats, ModelKind, PooledResult,
};
pub use simulate::{simulate_replicate, simulate_scenario, sweep_grid, wilson_ci, SimulationResult, SimulationScenario};
pub use stats::{chisq_sf, norm_cdf, norm_quantile, Probability};
