//! Reference estimators: plain Monte Carlo over the prior and nested
//! sampling with the deterministic volume schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulator::EvidenceAccumulator;
use crate::error::{EvidenceError, Result};
use crate::lla_mcmc::{replenish_in_stage, KernelConfig};
use crate::numerics::{exceeds_level, log_sum_exp, ShellStats};
use crate::problem::BayesianProblem;
use crate::rng::{stage, stream};
use crate::schedule::{should_stop, StoppingPolicy};
use crate::trace::{EvidenceEstimate, TerminationReason, Warning};

/// Plain Monte Carlo: `log mean L` over `n` prior draws.
///
/// The trace is the empirical staircase over the distinct likelihood values,
/// so its increments sum to the same estimate.
pub fn run_mc(problem: &BayesianProblem, n: usize, seed: u64) -> Result<EvidenceEstimate> {
    if n == 0 {
        return Err(EvidenceError::InvalidConfig("Monte Carlo needs at least one draw".into()));
    }
    let draws: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, &[stage::PRIOR_DRAW, j as u64]);
            let theta = problem.sample_prior(&mut rng);
            let l = problem.log_likelihood(&theta);
            (theta, l)
        })
        .collect();
    let log_ls: Vec<f64> = draws.iter().map(|(_, l)| *l).collect();
    if log_ls.iter().any(|l| l.is_nan()) {
        return Err(EvidenceError::NonNumeric);
    }
    let nf = n as f64;
    let log_evidence = log_sum_exp(&log_ls)? - nf.ln();

    let mut acc = EvidenceAccumulator::new(problem.dimension());
    acc.observe(log_ls.iter().copied());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| log_ls[a].total_cmp(&log_ls[b]));
    let mut start = 0;
    while start < n {
        let level = log_ls[order[start]];
        let end = start + order[start..].iter().take_while(|&&j| log_ls[j] == level).count();
        let shell =
            ShellStats::from_unweighted(problem.dimension(), order[start..end].iter().map(|&j| draws[j].0.as_slice()));
        acc.push(level, (n - end) as f64 / nf, shell, n as u64, None);
        start = end;
    }

    let relative_std_error = if log_evidence.is_finite() {
        // Delta method on the mean of L / max L, which stays finite.
        let top = acc_max(&log_ls);
        let scaled: Vec<f64> = log_ls.iter().map(|l| (l - top).exp()).collect();
        let mean = scaled.iter().sum::<f64>() / nf;
        let var = if n > 1 { scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
        Some(var.sqrt() / (mean * nf.sqrt()))
    } else {
        acc.warn(Warning::AllLikelihoodsZero);
        None
    };
    let mut estimate = acc.finish(TerminationReason::ChiFloor, n as u64, relative_std_error);
    estimate.log_evidence = log_evidence;
    Ok(estimate)
}

fn acc_max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Expected prior volume after `i` removals from `n_live` live points.
pub fn nested_volume(i: usize, n_live: usize) -> f64 {
    (-(i as f64) / n_live as f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedConfig {
    pub n_live: usize,
    pub stopping: StoppingPolicy,
    pub kernel: KernelConfig,
}

impl NestedConfig {
    pub fn new(n_live: usize) -> Self {
        Self {
            n_live,
            stopping: StoppingPolicy {
                delta_evidence_tol: 1e-4,
                chi_tol: 1e-12,
                max_iterations: 1_000_000,
                max_evals: 10_000_000,
            },
            kernel: KernelConfig { steps_per_sample: 20, ..KernelConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_live < 2 {
            return Err(EvidenceError::InvalidConfig(format!("n_live must be at least 2, got {}", self.n_live)));
        }
        self.kernel.validate()?;
        self.stopping.validate()
    }
}

/// Skilling's nested sampling with `X_i = exp(-i/N)`. Points tied at the
/// minimum are removed together. The evidence tolerance bounds the largest
/// possible live contribution, `max L * X`, relative to the running total. On termination the live points close the
/// remaining volume at the level of their mean likelihood.
pub fn run_nested(problem: &BayesianProblem, config: &NestedConfig, seed: u64) -> Result<EvidenceEstimate> {
    config.validate()?;
    let d = problem.dimension();
    let n = config.n_live;
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
    let mut removed = 0usize;

    let termination = loop {
        let iteration = acc.iterations() + 1;
        let level = live.iter().map(|(_, l)| *l).fold(f64::INFINITY, f64::min);
        let (survivors, dead): (Vec<_>, Vec<_>) = live.into_iter().partition(|(_, l)| exceeds_level(*l, level));
        let shell = ShellStats::from_unweighted(d, dead.iter().map(|(p, _)| p.as_slice()));
        if survivors.is_empty() {
            // Every live point sits on one plateau: it holds all that is left.
            acc.push(level, 0.0, shell, evals, None);
            live = dead;
            break TerminationReason::ChiFloor;
        }
        removed += dead.len();
        let volume = nested_volume(removed, n);
        acc.push(level, volume, shell, evals, None);
        live = survivors;

        // Stop once the live points could add at most a `tol` fraction.
        let live_max = live.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
        let live_bound = live_max + volume.ln() - acc.log_evidence();
        let stop = if live_bound < config.stopping.delta_evidence_tol.ln() {
            Some(TerminationReason::DeltaEvidence)
        } else {
            should_stop(acc.trace(), &config.stopping, f64::NEG_INFINITY)
        };
        if let Some(reason) = stop {
            close_with_live(&mut acc, &live, evals);
            break reason;
        }
        let kernel = config.kernel.resolve(problem, &live)?;
        let fresh =
            replenish_in_stage(&live, dead.len(), level, &kernel, problem, seed, stage::NESTED_WALK, iteration as u64)?;
        if fresh.iter().any(|r| !r.moved) {
            acc.warn(Warning::ReplacementFailed { iteration });
        }
        for r in fresh {
            evals += r.evaluations;
            live.push((r.point, r.log_likelihood));
        }
        acc.observe(live.iter().map(|(_, l)| *l));
    };

    let _ = live;
    Ok(acc.finish(termination, evals, None))
}

fn close_with_live(acc: &mut EvidenceAccumulator, live: &[(Vec<f64>, f64)], evals: u64) {
    let log_ls: Vec<f64> = live.iter().map(|(_, l)| *l).collect();
    let Ok(total) = log_sum_exp(&log_ls) else { return };
    let log_mean = total - (live.len() as f64).ln();
    let last = acc.trace().last().map_or(f64::NEG_INFINITY, |r| r.log_lambda);
    if !(log_mean > last) {
        return;
    }
    let shell = ShellStats::from_unweighted(live[0].0.len(), live.iter().map(|(p, _)| p.as_slice()));
    acc.push(log_mean, 0.0, shell, evals, None);
}
