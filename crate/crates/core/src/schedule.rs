//! Likelihood-level selection and stopping rules.

use serde::{Deserialize, Serialize};

use crate::error::{EvidenceError, Result};
use crate::numerics::log_sum_exp;
use crate::trace::{LevelTrace, TerminationReason};

/// Rejection fraction `min(cap, offset + slope * i)` at iteration `i >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionSchedule {
    pub offset: f64,
    pub slope: f64,
    pub cap: f64,
}

impl FractionSchedule {
    pub fn constant(fraction: f64) -> Self {
        Self { offset: fraction, slope: 0.0, cap: fraction }
    }

    pub fn linear(offset: f64, slope: f64, cap: f64) -> Self {
        Self { offset, slope, cap }
    }

    pub fn at(&self, iteration: usize) -> f64 {
        (self.offset + self.slope * iteration as f64).min(self.cap)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.at(1);
        let ok = self.slope >= 0.0 && self.cap > 0.0 && self.cap < 1.0 && first > 0.0 && first < 1.0;
        if ok {
            Ok(())
        } else {
            Err(EvidenceError::InvalidConfig(format!(
                "rejection schedule must stay inside (0, 1): offset {}, slope {}, cap {}",
                self.offset, self.slope, self.cap
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPolicy {
    pub schedule: FractionSchedule,
    pub escalation_factor: f64,
    pub escalation_cap: f64,
    pub max_escalations: usize,
}

impl LevelPolicy {
    pub fn new(schedule: FractionSchedule) -> Self {
        Self { schedule, escalation_factor: 1.5, escalation_cap: 0.9, max_escalations: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.escalation_factor > 1.0) || !(self.escalation_cap > 0.0 && self.escalation_cap < 1.0) {
            return Err(EvidenceError::InvalidConfig(format!(
                "escalation factor must exceed 1 and cap lie in (0, 1): factor {}, cap {}",
                self.escalation_factor, self.escalation_cap
            )));
        }
        Ok(())
    }
}

impl Default for LevelPolicy {
    fn default() -> Self {
        Self::new(FractionSchedule::linear(0.0, 0.025, 0.3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelChoice {
    pub log_lambda: f64,
    pub n_reject: usize,
    /// Fraction actually used, after any escalation.
    pub fraction: f64,
    pub escalations: usize,
}

/// No candidate level lies strictly above the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateLevel;

fn reject_count(fraction: f64, population: usize, len: usize) -> usize {
    // Guard against 0.025 * 1000 rounding up to 26.
    let raw = (fraction * population as f64 * (1.0 - 1e-12)).ceil() as usize;
    raw.clamp(1, len)
}

/// Picks the next level as the `ceil(f * N)`-th lowest of the sorted
/// log-likelihoods, escalating `f` when that does not clear the previous
/// level.
pub fn select_level(
    sorted_log_likelihoods: &[f64],
    policy: &LevelPolicy,
    iteration: usize,
    log_lambda_prev: f64,
) -> std::result::Result<LevelChoice, DegenerateLevel> {
    select_level_in_population(sorted_log_likelihoods, sorted_log_likelihoods.len(), policy, iteration, log_lambda_prev)
}

/// As [`select_level`], but the rejection count is `ceil(f * population)`
/// rather than a fraction of the candidate list. Used when the candidates are
/// a cumulative pool and `population` is the number of draws per iteration.
pub fn select_level_in_population(
    sorted_log_likelihoods: &[f64],
    population: usize,
    policy: &LevelPolicy,
    iteration: usize,
    log_lambda_prev: f64,
) -> std::result::Result<LevelChoice, DegenerateLevel> {
    let len = sorted_log_likelihoods.len();
    if len == 0 || population == 0 {
        return Err(DegenerateLevel);
    }
    debug_assert!(sorted_log_likelihoods.windows(2).all(|w| w[0] <= w[1]));
    let mut fraction = policy.schedule.at(iteration.max(1));
    let mut escalations = 0;
    loop {
        let n_reject = reject_count(fraction, population, len);
        let log_lambda = sorted_log_likelihoods[n_reject - 1];
        if log_lambda > log_lambda_prev {
            return Ok(LevelChoice { log_lambda, n_reject, fraction, escalations });
        }
        let next = (fraction * policy.escalation_factor).min(policy.escalation_cap).max(fraction);
        if escalations >= policy.max_escalations || next == fraction {
            return Err(DegenerateLevel);
        }
        fraction = next;
        escalations += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingPolicy {
    /// Relative evidence change below which the run stops (1e-4 is 0.01%).
    pub delta_evidence_tol: f64,
    pub chi_tol: f64,
    pub max_iterations: usize,
    pub max_evals: u64,
}

impl StoppingPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta_evidence_tol > 0.0
            && self.chi_tol > 0.0
            && self.chi_tol < 1.0
            && self.max_iterations > 0
            && self.max_evals > 0;
        if ok {
            Ok(())
        } else {
            Err(EvidenceError::InvalidConfig(format!("stopping tolerances must be strictly positive: {self:?}")))
        }
    }
}

impl Default for StoppingPolicy {
    fn default() -> Self {
        Self { delta_evidence_tol: 1e-4, chi_tol: 0.005, max_iterations: 100, max_evals: 20_000 }
    }
}

/// Returns the first satisfied stopping criterion, checked in the order
/// evidence change, chi floor, iteration cap, evaluation cap.
///
/// A zero-mass shell (`last_log_increment == -inf`) carries no information
/// about convergence and never triggers the evidence-change criterion.
pub fn should_stop(trace: &LevelTrace, policy: &StoppingPolicy, last_log_increment: f64) -> Option<TerminationReason> {
    let last = trace.last()?;
    if last_log_increment > f64::NEG_INFINITY {
        let log_e = log_sum_exp(&trace.log_increments()).unwrap_or(f64::NEG_INFINITY);
        if log_e > f64::NEG_INFINITY && (last_log_increment - log_e).exp() < policy.delta_evidence_tol {
            return Some(TerminationReason::DeltaEvidence);
        }
    }
    if last.chi < policy.chi_tol {
        return Some(TerminationReason::ChiFloor);
    }
    if trace.len() >= policy.max_iterations {
        return Some(TerminationReason::MaxIterations);
    }
    if last.cumulative_evals >= policy.max_evals {
        return Some(TerminationReason::MaxEvals);
    }
    None
}
