//! Likelihood-level adapted importance sampling.
//!
//! Each iteration draws from a diagonal Gaussian importance density fitted to
//! the previous iteration's survivors, truncated to the prior support, and
//! estimates the prior mass above the new level with prior/ISD weights.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulator::EvidenceAccumulator;
use crate::error::{EvidenceError, Result};
use crate::numerics::{effective_sample_size_log, exceeds_level, log_sum_exp, ShellStats};
use crate::prior::MarginalPrior;
use crate::problem::BayesianProblem;
use crate::rng::{stage, stream};
use crate::schedule::{select_level, should_stop, FractionSchedule, LevelPolicy, StoppingPolicy};
use crate::trace::{EvidenceEstimate, TerminationReason, Warning};

/// How the importance density's spread is derived from the survivors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum IsdSpread {
    /// Multiple of the survivors' sample standard deviation.
    Multiplier(f64),
    /// Fixed standard deviation in every dimension.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsConfig {
    pub n_initial: usize,
    pub ess_threshold_fraction: f64,
    pub spread: IsdSpread,
    /// Zero sample spread is replaced by this fraction of the prior width.
    pub stddev_floor_fraction: f64,
    pub level_policy: LevelPolicy,
    pub stopping: StoppingPolicy,
}

impl Default for IsConfig {
    fn default() -> Self {
        Self {
            n_initial: 1000,
            ess_threshold_fraction: 0.5,
            spread: IsdSpread::Multiplier(2.0),
            stddev_floor_fraction: 1e-8,
            level_policy: LevelPolicy::new(FractionSchedule::linear(0.0, 0.025, 0.3)),
            stopping: StoppingPolicy::default(),
        }
    }
}

impl IsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_initial < 10 {
            return Err(EvidenceError::InvalidConfig(format!("n_initial must be at least 10, got {}", self.n_initial)));
        }
        if !(self.ess_threshold_fraction > 0.0 && self.ess_threshold_fraction < 1.0) {
            return Err(EvidenceError::InvalidConfig(format!(
                "ess_threshold_fraction must lie in (0, 1), got {}",
                self.ess_threshold_fraction
            )));
        }
        let spread = match self.spread {
            IsdSpread::Multiplier(m) | IsdSpread::Fixed(m) => m,
        };
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(EvidenceError::InvalidConfig(format!("ISD spread must be positive, got {spread}")));
        }
        if !(self.stddev_floor_fraction > 0.0) {
            return Err(EvidenceError::InvalidConfig("stddev_floor_fraction must be positive".into()));
        }
        self.level_policy.validate()?;
        self.stopping.validate()
    }
}

/// Diagonal Gaussian importance density truncated to the prior support.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianIsd {
    marginals: Vec<MarginalPrior>,
}

impl GaussianIsd {
    pub fn mean(&self) -> Vec<f64> {
        self.marginals
            .iter()
            .map(|m| match m.family() {
                crate::prior::Family::TruncatedNormal { mean, .. } => mean,
                _ => m.mean(),
            })
            .collect()
    }

    pub fn stddev(&self) -> Vec<f64> {
        self.marginals
            .iter()
            .map(|m| match m.family() {
                crate::prior::Family::TruncatedNormal { std_dev, .. } => std_dev,
                _ => m.std_dev(),
            })
            .collect()
    }

    pub fn marginals(&self) -> &[MarginalPrior] {
        &self.marginals
    }

    pub fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.marginals.iter().zip(theta).map(|(m, &x)| m.log_pdf(x)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }
}

fn prior_width(prior: &MarginalPrior) -> f64 {
    let (lo, hi) = prior.support();
    if lo.is_finite() && hi.is_finite() {
        hi - lo
    } else {
        prior.std_dev()
    }
}

/// Fits the importance density to the retained samples: their mean, and a
/// spread set by `spread`, truncated to each prior's support.
pub fn fit_isd(
    retained: &[Vec<f64>],
    spread: IsdSpread,
    priors: &[MarginalPrior],
    stddev_floor_fraction: f64,
) -> Result<GaussianIsd> {
    if retained.len() < 2 {
        return Err(EvidenceError::InsufficientSamples(retained.len()));
    }
    let d = priors.len();
    let n = retained.len() as f64;
    let marginals = (0..d)
        .map(|k| {
            let mean = retained.iter().map(|t| t[k]).sum::<f64>() / n;
            let sd = match spread {
                IsdSpread::Fixed(s) => s,
                IsdSpread::Multiplier(m) => {
                    let var = retained.iter().map(|t| (t[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    m * var.sqrt()
                }
            };
            let floor = stddev_floor_fraction * prior_width(&priors[k]);
            let sd = if sd > 0.0 { sd.max(floor) } else { floor };
            let (lo, hi) = priors[k].support();
            MarginalPrior::truncated_normal(mean, sd, lo, hi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianIsd { marginals })
}

/// Unnormalised importance estimate of the mass above `log_lambda`:
/// `(1/N) * sum(1[L > lambda] * w)`.
pub fn chi_is(log_likelihoods: &[f64], log_weights: &[f64], log_lambda: f64) -> f64 {
    debug_assert_eq!(log_likelihoods.len(), log_weights.len());
    let n = log_likelihoods.len();
    if n == 0 {
        return 0.0;
    }
    let terms: Vec<f64> = log_likelihoods
        .iter()
        .zip(log_weights)
        .filter(|(l, _)| exceeds_level(**l, log_lambda))
        .map(|(_, w)| *w)
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    let log_sum = log_sum_exp(&terms).unwrap_or(f64::NEG_INFINITY);
    (log_sum - (n as f64).ln()).exp()
}

struct Batch {
    points: Vec<Vec<f64>>,
    log_likelihoods: Vec<f64>,
    log_weights: Vec<f64>,
}

impl Batch {
    fn extend(&mut self, other: Batch) {
        self.points.extend(other.points);
        self.log_likelihoods.extend(other.log_likelihoods);
        self.log_weights.extend(other.log_weights);
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}

fn draw_batch(
    problem: &BayesianProblem,
    isd: Option<&GaussianIsd>,
    seed: u64,
    keys: [u64; 3],
    start: usize,
    count: usize,
) -> Batch {
    let drawn: Vec<(Vec<f64>, f64, f64)> = (start..start + count)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, &[keys[0], keys[1], keys[2], j as u64]);
            let (theta, log_w) = match isd {
                None => (problem.sample_prior(&mut rng), 0.0),
                Some(q) => {
                    let theta = q.sample(&mut rng);
                    let log_w = problem.log_prior(&theta) - q.log_pdf(&theta);
                    (theta, log_w)
                }
            };
            let log_l = problem.log_likelihood(&theta);
            (theta, log_l, log_w)
        })
        .collect();
    let mut batch = Batch { points: Vec::with_capacity(count), log_likelihoods: Vec::new(), log_weights: Vec::new() };
    for (t, l, w) in drawn {
        batch.points.push(t);
        batch.log_likelihoods.push(l);
        batch.log_weights.push(w);
    }
    batch
}

/// Runs likelihood-level adapted importance sampling.
pub fn run_lla_is(problem: &BayesianProblem, config: &IsConfig, seed: u64) -> Result<EvidenceEstimate> {
    config.validate()?;
    let d = problem.dimension();
    let n = config.n_initial;
    let gamma = config.ess_threshold_fraction * n as f64;
    let mut acc = EvidenceAccumulator::new(d);
    let mut isd: Option<GaussianIsd> = None;
    let mut log_lambda_prev = f64::NEG_INFINITY;
    let mut evals: u64 = 0;

    let termination = loop {
        let iteration = acc.iterations() + 1;
        let it = iteration as u64;
        let mut batch = draw_batch(problem, isd.as_ref(), seed, [stage::ISD_DRAW, it, 0], 0, n);
        evals += n as u64;

        let mut ess = effective_sample_size_log(&batch.log_weights).unwrap_or(0.0);
        let mut round = 0u64;
        let mut starved = false;
        while ess <= gamma {
            if evals >= config.stopping.max_evals {
                acc.warn(Warning::EssBudgetExhausted { iteration, ess });
                starved = true;
                break;
            }
            round += 1;
            let extra = (gamma - ess).ceil().max(1.0) as usize;
            let more = draw_batch(problem, isd.as_ref(), seed, [stage::ISD_TOPUP, it, round], 0, extra);
            evals += extra as u64;
            batch.extend(more);
            ess = effective_sample_size_log(&batch.log_weights).unwrap_or(0.0);
        }
        acc.observe(batch.log_likelihoods.iter().copied());
        if starved {
            break TerminationReason::MaxEvals;
        }

        let mut sorted = batch.log_likelihoods.clone();
        sorted.sort_by(f64::total_cmp);
        let Ok(choice) = select_level(&sorted, &config.level_policy, iteration, log_lambda_prev) else {
            break TerminationReason::DegenerateLevel;
        };
        let log_lambda = choice.log_lambda;
        let chi_raw = chi_is(&batch.log_likelihoods, &batch.log_weights, log_lambda);

        let max_lw = batch.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shell = ShellStats::from_weighted(
            d,
            (0..batch.len())
                .filter(|&j| {
                    let l = batch.log_likelihoods[j];
                    l > log_lambda_prev && l <= log_lambda
                })
                .map(|j| (batch.points[j].as_slice(), (batch.log_weights[j] - max_lw).exp())),
        );
        let step = acc.push(log_lambda, chi_raw, shell, evals, None);

        if let Some(reason) = should_stop(acc.trace(), &config.stopping, step.log_increment) {
            break reason;
        }

        let retained: Vec<Vec<f64>> = (0..batch.len())
            .filter(|&j| exceeds_level(batch.log_likelihoods[j], log_lambda))
            .map(|j| batch.points[j].clone())
            .collect();
        match fit_isd(&retained, config.spread, problem.priors(), config.stddev_floor_fraction) {
            Ok(q) => isd = Some(q),
            Err(EvidenceError::InsufficientSamples(k)) => {
                acc.warn(Warning::IsdReused { iteration, retained: k });
            }
            Err(_) => break TerminationReason::DegenerateLevel,
        }
        log_lambda_prev = log_lambda;
    };

    Ok(acc.finish(termination, evals, None))
}
