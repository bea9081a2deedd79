//! Monte Carlo estimate of how often the paradox occurs, conditional on its
//! premise (every study significant on the same side).
//!
//! Data model: `θ_i ~ N(μ, τ²)`, `y_i ~ N(θ_i, v_i)`. Replicate `r` draws
//! from a ChaCha8 stream keyed by `(seed, r)`: the seed picks the key and
//! the replicate index picks the 64-bit stream. A replicate's draws are thus
//! a pure function of `(seed, r)`, and results do not depend on how
//! replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effect::{ConfidenceInterval, EffectMeasure, StudyEffect};
use crate::error::{Error, Result};
use crate::paradox::{detect_paradox, Classification, ParadoxVerdict};
use crate::pooling::ModelKind;
use crate::stats::{two_sided_z, Probability};

/// Replicates evaluated per parallel batch.
const BATCH: u64 = 8192;

fn default_alpha() -> Probability {
    Probability::new(0.05).expect("0.05 is a probability")
}

fn default_model() -> ModelKind {
    ModelKind::RandomEffects
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub k: usize,
    pub mu: f64,
    pub tau2: f64,
    /// Within-study variances, one per study.
    pub variances: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Probability,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    /// Accepted replicates wanted.
    pub n_target: u64,
    /// Cap on total draws.
    pub max_draws: u64,
    pub seed: u64,
}

impl SimulationScenario {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::domain(format!("scenario needs k >= 2, got {}", self.k)));
        }
        if self.variances.len() != self.k {
            return Err(Error::domain(format!(
                "scenario has k = {} but {} variances",
                self.k,
                self.variances.len()
            )));
        }
        if let Some(v) = self.variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("within-study variances must be > 0, got {v}")));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain("mu must be finite"));
        }
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return Err(Error::domain(format!("tau2 must be >= 0, got {}", self.tau2)));
        }
        let a = self.alpha.get();
        if a <= 0.0 || a >= 1.0 {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {a}")));
        }
        if self.n_target < 1 {
            return Err(Error::domain("n_target must be >= 1"));
        }
        if self.max_draws < self.n_target {
            return Err(Error::domain(format!(
                "max_draws ({}) must be >= n_target ({})",
                self.max_draws, self.n_target
            )));
        }
        Ok(())
    }

    /// Same scenario with `k` studies and between-study variance `tau2`.
    /// Within-study variances cycle through this scenario's list.
    pub fn with_cell(&self, k: usize, tau2: f64) -> Self {
        let variances = if self.variances.is_empty() {
            Vec::new()
        } else {
            self.variances.iter().copied().cycle().take(k).collect()
        };
        SimulationScenario {
            k,
            tau2,
            variances,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// Replicates where every study was significant on the same side.
    pub accepted: u64,
    pub paradoxes: u64,
    pub draws_used: u64,
    /// `paradoxes / accepted`.
    pub p_hat: Probability,
    /// 95% Wilson interval on `p_hat`.
    pub wilson_ci: ConfidenceInterval,
    /// `accepted / draws_used`, the unconditional rate of the premise.
    pub acceptance_rate: f64,
}

fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_studies(scenario: &SimulationScenario, index: u64) -> Result<Vec<StudyEffect>> {
    let mut rng = replicate_rng(scenario.seed, index);
    let tau = scenario.tau2.sqrt();
    scenario
        .variances
        .iter()
        .map(|&v| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let theta = scenario.mu + tau * z1;
            StudyEffect::new(String::new(), theta + v.sqrt() * z2, v, EffectMeasure::MeanDifference)
        })
        .collect()
}

fn run_replicate(scenario: &SimulationScenario, index: u64) -> Result<Option<ParadoxVerdict>> {
    let studies = draw_studies(scenario, index)?;
    let verdict = detect_paradox(&studies, scenario.alpha, scenario.model)?;
    Ok((verdict.classification != Classification::NotUnanimous).then_some(verdict))
}

/// One replicate. `None` when the studies are not unanimously significant.
pub fn simulate_replicate(
    scenario: &SimulationScenario,
    replicate_index: u64,
) -> Result<Option<ParadoxVerdict>> {
    scenario.validate()?;
    run_replicate(scenario, replicate_index)
}

/// Runs replicates `0, 1, 2, …` until `n_target` are accepted or
/// `max_draws` is reached.
pub fn simulate_scenario(scenario: &SimulationScenario) -> Result<SimulationResult> {
    scenario.validate()?;
    let mut accepted = 0u64;
    let mut paradoxes = 0u64;
    let mut draws_used = 0u64;
    let mut start = 0u64;
    'outer: while start < scenario.max_draws {
        let end = (start + BATCH).min(scenario.max_draws);
        let outcomes = (start..end)
            .into_par_iter()
            .map(|i| run_replicate(scenario, i).map(|v| v.map(|v| v.classification)))
            .collect::<Result<Vec<_>>>()?;
        for outcome in outcomes {
            draws_used += 1;
            if let Some(class) = outcome {
                accepted += 1;
                if class == Classification::Paradox {
                    paradoxes += 1;
                }
                if accepted == scenario.n_target {
                    break 'outer;
                }
            }
        }
        start = end;
    }
    if accepted == 0 {
        return Err(Error::NoAcceptedReplicates { draws_used });
    }
    Ok(SimulationResult {
        accepted,
        paradoxes,
        draws_used,
        p_hat: Probability::new(paradoxes as f64 / accepted as f64)?,
        wilson_ci: wilson_ci(paradoxes, accepted, Probability::new(0.95)?)?,
        acceptance_rate: accepted as f64 / draws_used as f64,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: u64, trials: u64, level: Probability) -> Result<ConfidenceInterval> {
    if trials == 0 {
        return Err(Error::domain("Wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::domain(format!(
            "successes ({successes}) exceed trials ({trials})"
        )));
    }
    let z = two_sided_z(level)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    ConfidenceInterval::new(lo, hi, level)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub tau2: f64,
    pub draws_used: u64,
    pub result: Option<SimulationResult>,
    /// Set when the cell failed; other cells still run.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub k_values: Vec<usize>,
    pub tau2_values: Vec<f64>,
    /// How per-cell within-study variances were derived from the base.
    pub variance_policy: String,
    /// Row-major: `k` outer, `tau2` inner.
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, k: usize, tau2: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.k == k && c.tau2 == tau2)
    }

    /// One line per cell; failed cells leave the numeric columns blank
    /// and carry the message in `note`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("k,tau2,accepted,paradoxes,p_hat,wilson_lo,wilson_hi,draws_used,note\n");
        for c in &self.cells {
            match &c.result {
                Some(r) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},\n",
                    c.k,
                    c.tau2,
                    r.accepted,
                    r.paradoxes,
                    r.p_hat.get(),
                    r.wilson_ci.lo,
                    r.wilson_ci.hi,
                    r.draws_used
                )),
                None => {
                    let note = c.error.as_deref().unwrap_or("failed").replace([',', '\n'], ";");
                    out.push_str(&format!("{},{},,,,,,{},{}\n", c.k, c.tau2, c.draws_used, note));
                }
            }
        }
        out
    }
}

/// Runs one scenario per `(k, tau2)` cell.
pub fn sweep_grid(
    base: &SimulationScenario,
    k_values: &[usize],
    tau2_values: &[f64],
) -> Result<SweepTable> {
    if k_values.is_empty() || tau2_values.is_empty() {
        return Err(Error::domain("sweep grid needs at least one k and one tau2"));
    }
    if base.variances.is_empty() {
        return Err(Error::domain("base scenario has no variances to cycle"));
    }
    let cells = k_values
        .iter()
        .flat_map(|&k| tau2_values.iter().map(move |&t| (k, t)))
        .map(|(k, tau2)| {
            let scenario = base.with_cell(k, tau2);
            match simulate_scenario(&scenario) {
                Ok(r) => SweepCell {
                    k,
                    tau2,
                    draws_used: r.draws_used,
                    result: Some(r),
                    error: None,
                },
                Err(e) => SweepCell {
                    k,
                    tau2,
                    draws_used: match e {
                        Error::NoAcceptedReplicates { draws_used } => draws_used,
                        _ => 0,
                    },
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepTable {
        k_values: k_values.to_vec(),
        tau2_values: tau2_values.to_vec(),
        variance_policy: "cycle base variances".into(),
        cells,
    })
}
