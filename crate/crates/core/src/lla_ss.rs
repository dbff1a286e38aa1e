//! Likelihood-level adapted stratified sampling.
//!
//! The prior is cut into equal-mass boxes through the marginal inverse CDFs.
//! Samples are pooled per stratum across iterations and a stratum drops out
//! once none of its samples clears the current level.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulator::EvidenceAccumulator;
use crate::error::{EvidenceError, Result};
use crate::numerics::{exceeds_level, ShellStats};
use crate::problem::BayesianProblem;
use crate::rng::{stage, stream};
use crate::schedule::{select_level_in_population, should_stop, FractionSchedule, LevelPolicy, StoppingPolicy};
use crate::trace::{EvidenceEstimate, TerminationReason, Warning};

pub const DEFAULT_STRATA_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsConfig {
    pub per_dim_counts: Vec<usize>,
    pub n_per_iteration: usize,
    pub strata_cap: usize,
    pub level_policy: LevelPolicy,
    pub stopping: StoppingPolicy,
}

impl SsConfig {
    pub fn new(per_dim_counts: Vec<usize>, n_per_iteration: usize) -> Self {
        Self {
            per_dim_counts,
            n_per_iteration,
            strata_cap: DEFAULT_STRATA_CAP,
            level_policy: LevelPolicy::new(FractionSchedule::linear(0.0, 0.025, 0.9)),
            stopping: StoppingPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_dim_counts.is_empty() || self.per_dim_counts.contains(&0) {
            return Err(EvidenceError::InvalidConfig("every per-dimension stratum count must be at least 1".into()));
        }
        if self.n_per_iteration == 0 {
            return Err(EvidenceError::InvalidConfig("n_per_iteration must be positive".into()));
        }
        self.level_policy.validate()?;
        self.stopping.validate()
    }
}

/// Cumulative samples drawn inside one stratum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StratumPool {
    pub points: Vec<Vec<f64>>,
    pub log_likelihoods: Vec<f64>,
    pub max_log_likelihood: f64,
}

impl StratumPool {
    fn push(&mut self, point: Vec<f64>, log_l: f64) {
        if self.points.is_empty() || log_l > self.max_log_likelihood {
            self.max_log_likelihood = log_l;
        }
        self.points.push(point);
        self.log_likelihoods.push(log_l);
    }

    pub fn len(&self) -> usize {
        self.log_likelihoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_likelihoods.is_empty()
    }

    pub fn exceed_fraction(&self, log_lambda: f64) -> f64 {
        let k = self.log_likelihoods.iter().filter(|&&l| exceeds_level(l, log_lambda)).count();
        k as f64 / self.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrataGrid {
    counts: Vec<usize>,
    mass: f64,
    pools: Vec<StratumPool>,
    active: Vec<usize>,
}

/// Builds the equal-mass grid with `prod(counts)` strata, all active.
pub fn build_strata(problem: &BayesianProblem, per_dim_counts: &[usize], cap: usize) -> Result<StrataGrid> {
    if per_dim_counts.len() != problem.dimension() {
        return Err(EvidenceError::DimensionMismatch { expected: problem.dimension(), got: per_dim_counts.len() });
    }
    if per_dim_counts.contains(&0) {
        return Err(EvidenceError::InvalidConfig("stratum counts must be at least 1".into()));
    }
    let total = per_dim_counts.iter().try_fold(1u128, |acc, &c| acc.checked_mul(c as u128)).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(EvidenceError::StratificationInfeasible { count: total, cap });
    }
    let n = total as usize;
    Ok(StrataGrid {
        counts: per_dim_counts.to_vec(),
        mass: per_dim_counts.iter().map(|&c| 1.0 / c as f64).product(),
        pools: vec![StratumPool::default(); n],
        active: (0..n).collect(),
    })
}

impl StrataGrid {
    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Probability mass of every stratum.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn pool(&self, stratum: usize) -> &StratumPool {
        &self.pools[stratum]
    }

    /// Multi-index of a flat stratum index, zero-based, first dimension
    /// varying fastest.
    pub fn multi_index(&self, stratum: usize) -> Vec<usize> {
        let mut rest = stratum;
        self.counts
            .iter()
            .map(|&c| {
                let s = rest % c;
                rest /= c;
                s
            })
            .collect()
    }

    /// Bounds in probability space, `((s_k)/n_k, (s_k+1)/n_k]` per dimension.
    pub fn unit_bounds(&self, stratum: usize) -> Vec<(f64, f64)> {
        self.multi_index(stratum)
            .into_iter()
            .zip(&self.counts)
            .map(|(s, &c)| (s as f64 / c as f64, (s + 1) as f64 / c as f64))
            .collect()
    }

    /// Whether `theta` lies in the stratum, judged through the marginal CDFs.
    pub fn contains(&self, problem: &BayesianProblem, stratum: usize, theta: &[f64]) -> bool {
        self.unit_bounds(stratum).iter().zip(problem.priors()).zip(theta).all(|(((lo, hi), prior), &x)| {
            let u = prior.cdf(x);
            (u > *lo || *lo == 0.0) && u <= *hi
        })
    }

    pub fn add_samples(&mut self, stratum: usize, points: Vec<Vec<f64>>, log_likelihoods: Vec<f64>) {
        let pool = &mut self.pools[stratum];
        for (p, l) in points.into_iter().zip(log_likelihoods) {
            pool.push(p, l);
        }
    }

    /// Drops strata whose best pooled sample does not clear `log_lambda`.
    /// Returns the deactivated strata with their best log-likelihood.
    pub fn deactivate_below(&mut self, log_lambda: f64) -> Vec<(usize, f64)> {
        let mut dropped = Vec::new();
        let pools = &self.pools;
        self.active.retain(|&s| {
            let keep = exceeds_level(pools[s].max_log_likelihood, log_lambda);
            if !keep {
                dropped.push((s, pools[s].max_log_likelihood));
            }
            keep
        });
        dropped
    }

    fn pooled_active_size(&self) -> usize {
        self.active.iter().map(|&s| self.pools[s].len()).sum()
    }
}

/// Draws `n` points inside a stratum by inverse-CDF mapping of uniforms on
/// each probability sub-interval.
pub fn sample_stratum<R: Rng + ?Sized>(
    problem: &BayesianProblem,
    grid: &StrataGrid,
    stratum: usize,
    n: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let bounds = grid.unit_bounds(stratum);
    (0..n)
        .map(|_| {
            bounds
                .iter()
                .zip(problem.priors())
                .map(|(&(lo, hi), prior)| {
                    let v: f64 = rng.sample(Open01);
                    prior.inverse_cdf(lo + (hi - lo) * v)
                })
                .collect()
        })
        .collect()
}

/// Stratified estimate of the mass above `log_lambda`, summing over active
/// strata only.
pub fn chi_ss(grid: &StrataGrid, log_lambda: f64) -> Result<f64> {
    grid.active.iter().try_fold(0.0, |acc, &s| {
        let pool = &grid.pools[s];
        if pool.is_empty() {
            return Err(EvidenceError::StratumNeverSampled(s));
        }
        Ok(acc + grid.mass * pool.exceed_fraction(log_lambda))
    })
}

/// Plug-in variance of the stratified estimate:
/// `chi(1-chi)/N - (1/N) sum p_s (chi_s - chi)^2`, clamped at zero.
pub fn var_chi_ss(grid: &StrataGrid, log_lambda: f64, chi_hat: f64) -> Result<f64> {
    let n = grid.pooled_active_size();
    if n == 0 {
        return Err(EvidenceError::Empty("active strata"));
    }
    let n = n as f64;
    let mut between = 0.0;
    for &s in &grid.active {
        let pool = &grid.pools[s];
        if pool.is_empty() {
            return Err(EvidenceError::StratumNeverSampled(s));
        }
        between += grid.mass * (pool.exceed_fraction(log_lambda) - chi_hat).powi(2);
    }
    Ok((chi_hat * (1.0 - chi_hat) / n - between / n).max(0.0))
}

/// Splits `n` draws over `k` strata: the first ones get one extra until the
/// remainder is used up, and none gets fewer than one.
pub(crate) fn allocation(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let rem = n % k;
    (0..k).map(|j| (base + usize::from(j < rem)).max(1)).collect()
}

/// Runs likelihood-level adapted stratified sampling.
pub fn run_lla_ss(problem: &BayesianProblem, config: &SsConfig, seed: u64) -> Result<EvidenceEstimate> {
    config.validate()?;
    let mut grid = build_strata(problem, &config.per_dim_counts, config.strata_cap)?;
    let d = problem.dimension();
    let mut acc = EvidenceAccumulator::new(d);
    let mut log_lambda_prev = f64::NEG_INFINITY;
    let mut evals: u64 = 0;

    let termination = loop {
        let iteration = acc.iterations() + 1;
        let active = grid.active.clone();
        let alloc = allocation(config.n_per_iteration, active.len());
        let fresh: Vec<(Vec<Vec<f64>>, Vec<f64>)> = active
            .par_iter()
            .zip(alloc.par_iter())
            .map(|(&s, &n)| {
                let mut rng = stream(seed, &[stage::STRATUM, s as u64, iteration as u64]);
                let points = sample_stratum(problem, &grid, s, n, &mut rng);
                let log_ls: Vec<f64> = points.iter().map(|p| problem.log_likelihood(p)).collect();
                (points, log_ls)
            })
            .collect();
        for (&s, (points, log_ls)) in active.iter().zip(fresh) {
            evals += log_ls.len() as u64;
            acc.observe(log_ls.iter().copied());
            grid.add_samples(s, points, log_ls);
        }

        // Candidates are the pooled samples still above the previous level;
        // the rejection count scales with one iteration's worth of draws.
        let mut candidates: Vec<f64> = active
            .iter()
            .flat_map(|&s| grid.pools[s].log_likelihoods.iter().copied())
            .filter(|&l| exceeds_level(l, log_lambda_prev))
            .collect();
        candidates.sort_by(f64::total_cmp);
        let population = config.n_per_iteration.min(candidates.len());
        let Ok(choice) =
            select_level_in_population(&candidates, population, &config.level_policy, iteration, log_lambda_prev)
        else {
            break TerminationReason::DegenerateLevel;
        };
        let log_lambda = choice.log_lambda;
        let chi_raw = chi_ss(&grid, log_lambda)?;
        let variance = var_chi_ss(&grid, log_lambda, chi_raw)?;

        let shell = ShellStats::from_weighted(
            d,
            active.iter().flat_map(|&s| {
                let pool = &grid.pools[s];
                let w = grid.mass / pool.len() as f64;
                pool.points
                    .iter()
                    .zip(&pool.log_likelihoods)
                    .filter(move |(_, &l)| l > log_lambda_prev && l <= log_lambda)
                    .map(move |(p, _)| (p.as_slice(), w))
            }),
        );
        let step = acc.push(log_lambda, chi_raw, shell, evals, Some(variance));

        for (s, top) in grid.deactivate_below(log_lambda) {
            let gap = log_lambda - top;
            if gap < 1.0 {
                acc.warn(Warning::StratumDeactivatedNearLevel { iteration, stratum: s, gap });
            }
        }

        if let Some(reason) = should_stop(acc.trace(), &config.stopping, step.log_increment) {
            break reason;
        }
        if grid.active.is_empty() {
            break TerminationReason::ChiFloor;
        }
        log_lambda_prev = log_lambda;
    };

    Ok(acc.finish(termination, evals, None))
}
