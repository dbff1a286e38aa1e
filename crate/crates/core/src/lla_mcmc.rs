//! Likelihood-level adapted MCMC.
//!
//! The mass above each level is the running product of pass fractions.
//! Samples that fall below the level are replaced by short constrained
//! Metropolis-Hastings chains started from random survivors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulator::EvidenceAccumulator;
use crate::error::{EvidenceError, Result};
use crate::numerics::{exceeds_level, ShellStats};
use crate::problem::BayesianProblem;
use crate::rng::{stage, stream};
use crate::schedule::{select_level, should_stop, FractionSchedule, LevelPolicy, StoppingPolicy};
use crate::trace::{EvidenceEstimate, TerminationReason};

/// Proposal scale, either relative to each prior's standard deviation or
/// given directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ProposalScale {
    PriorFraction(f64),
    Absolute(Vec<f64>),
    /// Fraction of the current live points' per-dimension spread, refreshed
    /// every iteration.
    LiveFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub proposal: ProposalScale,
    /// `None` switches to component-wise updates when the dimension exceeds 10.
    pub component_wise: Option<bool>,
    pub steps_per_sample: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { proposal: ProposalScale::PriorFraction(0.25), component_wise: None, steps_per_sample: 5 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_sample == 0 {
            return Err(EvidenceError::InvalidConfig("steps_per_sample must be at least 1".into()));
        }
        let ok = match &self.proposal {
            ProposalScale::PriorFraction(f) | ProposalScale::LiveFraction(f) => *f > 0.0 && f.is_finite(),
            ProposalScale::Absolute(v) => !v.is_empty() && v.iter().all(|s| *s > 0.0 && s.is_finite()),
        };
        if !ok {
            return Err(EvidenceError::InvalidConfig("proposal standard deviations must be positive".into()));
        }
        Ok(())
    }

    /// Resolves the per-dimension proposal scale and update mode for a problem.
    /// A live-spread scale falls back to the prior spread when `live` has
    /// fewer than two points.
    pub fn resolve(&self, problem: &BayesianProblem, live: &[(Vec<f64>, f64)]) -> Result<Kernel> {
        self.validate()?;
        let d = problem.dimension();
        let prior_sd = || problem.priors().iter().map(|p| p.std_dev());
        let proposal_std = match &self.proposal {
            ProposalScale::PriorFraction(f) => prior_sd().map(|s| f * s).collect(),
            ProposalScale::LiveFraction(f) if live.len() < 2 => prior_sd().map(|s| f * s).collect(),
            ProposalScale::LiveFraction(f) => {
                let n = live.len() as f64;
                prior_sd()
                    .enumerate()
                    .map(|(k, s)| {
                        let mean = live.iter().map(|(p, _)| p[k]).sum::<f64>() / n;
                        let var = live.iter().map(|(p, _)| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        (f * var.sqrt()).max(1e-12 * s)
                    })
                    .collect()
            }
            ProposalScale::Absolute(v) if v.len() == d => v.clone(),
            ProposalScale::Absolute(v) if v.len() == 1 => vec![v[0]; d],
            ProposalScale::Absolute(v) => {
                return Err(EvidenceError::DimensionMismatch { expected: d, got: v.len() });
            }
        };
        Ok(Kernel {
            proposal_std,
            component_wise: self.component_wise.unwrap_or(d > 10),
            steps_per_sample: self.steps_per_sample,
        })
    }
}

/// A kernel with its scales fixed for a particular problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub proposal_std: Vec<f64>,
    pub component_wise: bool,
    pub steps_per_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhStep {
    pub state: Vec<f64>,
    pub log_likelihood: f64,
    pub accepted: bool,
    pub evaluations: u64,
}

/// One constrained Metropolis-Hastings step targeting the prior restricted
/// to `L > lambda`. The prior ratio is checked first; the likelihood is
/// evaluated only for candidates that pass it and differ from the state.
pub fn constrained_mh_step<R: Rng + ?Sized>(
    state: &[f64],
    log_l_state: f64,
    log_lambda: f64,
    kernel: &Kernel,
    problem: &BayesianProblem,
    rng: &mut R,
) -> MhStep {
    let priors = problem.priors();
    let candidate: Vec<f64> = if kernel.component_wise {
        state
            .iter()
            .zip(priors)
            .zip(&kernel.proposal_std)
            .map(|((&x, prior), &s)| {
                let z: f64 = StandardNormal.sample(rng);
                let xi = x + s * z;
                let log_ratio = prior.log_pdf(xi) - prior.log_pdf(x);
                let u: f64 = rng.random();
                if log_ratio >= 0.0 || u.ln() < log_ratio {
                    xi
                } else {
                    x
                }
            })
            .collect()
    } else {
        let eta: Vec<f64> = state
            .iter()
            .zip(&kernel.proposal_std)
            .map(|(&x, &s)| {
                let z: f64 = StandardNormal.sample(rng);
                x + s * z
            })
            .collect();
        let log_ratio = problem.log_prior(&eta) - problem.log_prior(state);
        let u: f64 = rng.random();
        if log_ratio >= 0.0 || u.ln() < log_ratio {
            eta
        } else {
            return MhStep { state: state.to_vec(), log_likelihood: log_l_state, accepted: false, evaluations: 0 };
        }
    };
    if candidate == state {
        return MhStep { state: candidate, log_likelihood: log_l_state, accepted: true, evaluations: 0 };
    }
    let log_l = problem.log_likelihood(&candidate);
    if exceeds_level(log_l, log_lambda) {
        MhStep { state: candidate, log_likelihood: log_l, accepted: true, evaluations: 1 }
    } else {
        MhStep { state: state.to_vec(), log_likelihood: log_l_state, accepted: false, evaluations: 1 }
    }
}

/// A replenished sample and the cost of producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Replenished {
    pub point: Vec<f64>,
    pub log_likelihood: f64,
    pub evaluations: u64,
    /// False when every step of the chain was rejected.
    pub moved: bool,
}

/// Runs `n_needed` chains, each started at a uniformly chosen passing sample
/// and advanced `steps_per_sample` constrained steps. Chain `j` uses the
/// stream keyed by `(seed, iteration, j)`.
pub fn replenish(
    passing: &[(Vec<f64>, f64)],
    n_needed: usize,
    log_lambda: f64,
    kernel: &Kernel,
    problem: &BayesianProblem,
    seed: u64,
    iteration: u64,
) -> Result<Vec<Replenished>> {
    replenish_in_stage(passing, n_needed, log_lambda, kernel, problem, seed, stage::CHAIN, iteration)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn replenish_in_stage(
    passing: &[(Vec<f64>, f64)],
    n_needed: usize,
    log_lambda: f64,
    kernel: &Kernel,
    problem: &BayesianProblem,
    seed: u64,
    stage_key: u64,
    iteration: u64,
) -> Result<Vec<Replenished>> {
    if passing.is_empty() {
        return Err(EvidenceError::LevelUnreachable);
    }
    if kernel.steps_per_sample == 0 {
        return Err(EvidenceError::InvalidConfig("steps_per_sample must be at least 1".into()));
    }
    Ok((0..n_needed)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, &[stage_key, iteration, j as u64]);
            let (start, start_l) = &passing[rng.random_range(0..passing.len())];
            let mut state = start.clone();
            let mut log_l = *start_l;
            let mut evaluations = 0;
            let mut moved = false;
            for _ in 0..kernel.steps_per_sample {
                let step = constrained_mh_step(&state, log_l, log_lambda, kernel, problem, &mut rng);
                evaluations += step.evaluations;
                moved |= step.accepted && step.evaluations > 0;
                state = step.state;
                log_l = step.log_likelihood;
            }
            Replenished { point: state, log_likelihood: log_l, evaluations, moved }
        })
        .collect())
}

/// `chi_prev * n_pass / n_total`.
pub fn chi_mcmc(chi_prev: f64, n_pass: usize, n_total: usize) -> f64 {
    debug_assert!(n_pass <= n_total && n_total > 0);
    chi_prev * n_pass as f64 / n_total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_samples: usize,
    pub n_replace: usize,
    pub kernel: KernelConfig,
    pub stopping: StoppingPolicy,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { n_samples: 1000, n_replace: 25, kernel: KernelConfig::default(), stopping: StoppingPolicy::default() }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replace == 0 || self.n_replace >= self.n_samples {
            return Err(EvidenceError::InvalidConfig(format!(
                "n_replace must satisfy 1 <= n_replace < n_samples, got {} of {}",
                self.n_replace, self.n_samples
            )));
        }
        self.kernel.validate()?;
        self.stopping.validate()
    }

    /// Level rule equivalent to rejecting the `n_replace` lowest samples.
    pub fn level_policy(&self) -> LevelPolicy {
        LevelPolicy::new(FractionSchedule::constant(self.n_replace as f64 / self.n_samples as f64))
    }
}

/// Runs likelihood-level adapted MCMC.
pub fn run_lla_mcmc(problem: &BayesianProblem, config: &McmcConfig, seed: u64) -> Result<EvidenceEstimate> {
    config.validate()?;
    let policy = config.level_policy();
    let d = problem.dimension();
    let n = config.n_samples;
    let mut acc = EvidenceAccumulator::new(d);

    let mut live: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, &[stage::PRIOR_DRAW, j as u64]);
            let theta = problem.sample_prior(&mut rng);
            let l = problem.log_likelihood(&theta);
            (theta, l)
        })
        .collect();
    let mut evals = n as u64;
    acc.observe(live.iter().map(|(_, l)| *l));
    let mut log_lambda_prev = f64::NEG_INFINITY;

    let termination = loop {
        let iteration = acc.iterations() + 1;
        let mut sorted: Vec<f64> = live.iter().map(|(_, l)| *l).collect();
        sorted.sort_by(f64::total_cmp);
        let Ok(choice) = select_level(&sorted, &policy, iteration, log_lambda_prev) else {
            break TerminationReason::DegenerateLevel;
        };
        let log_lambda = choice.log_lambda;
        let (passing, failing): (Vec<_>, Vec<_>) = live.into_iter().partition(|(_, l)| exceeds_level(*l, log_lambda));
        let chi_raw = chi_mcmc(acc.chi(), passing.len(), n);
        let shell = ShellStats::from_unweighted(
            d,
            failing.iter().filter(|(_, l)| *l > log_lambda_prev).map(|(p, _)| p.as_slice()),
        );
        let step = acc.push(log_lambda, chi_raw, shell, evals, None);
        live = passing;

        if let Some(reason) = should_stop(acc.trace(), &config.stopping, step.log_increment) {
            break reason;
        }
        if live.is_empty() {
            break TerminationReason::DegenerateLevel;
        }
        let kernel = config.kernel.resolve(problem, &live)?;
        let fresh = replenish(&live, n - live.len(), log_lambda, &kernel, problem, seed, iteration as u64)?;
        for r in fresh {
            evals += r.evaluations;
            live.push((r.point, r.log_likelihood));
        }
        acc.observe(live.iter().map(|(_, l)| *l));
        log_lambda_prev = log_lambda;
    };

    Ok(acc.finish(termination, evals, None))
}
