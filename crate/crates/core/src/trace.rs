//! Level traces and the final evidence estimate.

use serde::{Deserialize, Serialize};

/// One completed iteration of a level-adapted estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub log_lambda: f64,
    /// Estimated prior mass above `log_lambda`, after clamping.
    pub chi: f64,
    /// `log(lambda * (chi_prev - chi))`; `-inf` for a zero-mass shell.
    pub log_increment: f64,
    /// Mean of the samples whose likelihood fell in the shell, if any did.
    pub shell_mean: Option<Vec<f64>>,
    pub shell_second_moment: Option<Vec<f64>>,
    pub cumulative_evals: u64,
    /// Plug-in variance of the mass estimate, where the estimator provides one.
    pub chi_variance: Option<f64>,
}

/// The staircase of levels and prior masses traversed by a run. The implicit
/// starting state is `chi = 1` at `log_lambda = -inf`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub records: Vec<LevelRecord>,
}

impl LevelTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LevelRecord> {
        self.records.last()
    }

    pub fn current_chi(&self) -> f64 {
        self.records.last().map_or(1.0, |r| r.chi)
    }

    pub fn log_lambdas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.log_lambda)
    }

    pub fn chis(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.chi)
    }

    pub fn log_increments(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_increment).collect()
    }

    pub fn total_evals(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cumulative_evals)
    }

    /// Checks the staircase invariants: chi starts at or below 1, stays in
    /// `[0, 1]` and never increases, and levels strictly increase.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut chi_prev = 1.0;
        let mut lambda_prev = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.chi) {
                return Err(format!("iteration {}: chi {} outside [0, 1]", i + 1, r.chi));
            }
            if r.chi > chi_prev {
                return Err(format!("iteration {}: chi rose from {} to {}", i + 1, chi_prev, r.chi));
            }
            if !(r.log_lambda > lambda_prev) {
                return Err(format!("iteration {}: level {} not above previous {}", i + 1, r.log_lambda, lambda_prev));
            }
            chi_prev = r.chi;
            lambda_prev = r.log_lambda;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    DeltaEvidence,
    ChiFloor,
    MaxIterations,
    MaxEvals,
    DegenerateLevel,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DeltaEvidence => "delta_evidence",
            Self::ChiFloor => "chi_floor",
            Self::MaxIterations => "max_iterations",
            Self::MaxEvals => "max_evals",
            Self::DegenerateLevel => "degenerate_level",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-fatal events recorded during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// A weighted mass estimate exceeded the previous one and was clamped.
    ChiClamped { iteration: usize, excess: f64 },
    /// Too few survivors to refit the importance density; the previous one was kept.
    IsdReused { iteration: usize, retained: usize },
    /// A stratum was dropped while its best sample sat within one log-unit of the level.
    StratumDeactivatedNearLevel { iteration: usize, stratum: usize, gap: f64 },
    /// Every likelihood evaluated to zero.
    AllLikelihoodsZero,
    /// Nested sampling could not find a replacement live point.
    ReplacementFailed { iteration: usize },
    /// The ESS top-up ran out of evaluation budget.
    EssBudgetExhausted { iteration: usize, ess: f64 },
}

/// Result of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub log_evidence: f64,
    pub trace: LevelTrace,
    pub posterior_mean: Vec<f64>,
    pub posterior_variance: Vec<f64>,
    pub termination: TerminationReason,
    pub total_evals: u64,
    /// Largest log-likelihood evaluated during the run.
    pub max_log_likelihood: f64,
    /// Relative standard error of the linear evidence, when the estimator
    /// provides one.
    pub relative_std_error: Option<f64>,
    pub warnings: Vec<Warning>,
}

impl EvidenceEstimate {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_chi(&self) -> f64 {
        self.trace.current_chi()
    }
}
