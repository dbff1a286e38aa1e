//! Log-domain primitives shared by every estimator.

use crate::error::{EvidenceError, Result};
use crate::trace::LevelTrace;

/// `log(sum(exp(xs)))` without overflow. Returns `-inf` when every term is
/// `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(EvidenceError::Empty("log_sum_exp of no terms"));
    }
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x.is_nan() {
            return Err(EvidenceError::NonNumeric);
        }
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Strict exceedance indicator: ties do not exceed.
#[inline]
pub fn exceeds_level(log_l: f64, log_lambda: f64) -> bool {
    log_l > log_lambda
}

/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(EvidenceError::Empty("effective_sample_size of no weights"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(EvidenceError::NonNumeric);
    }
    let max = weights.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(EvidenceError::DegenerateWeights);
    }
    // Rescale by the largest weight so squares cannot overflow.
    let (s1, s2) = weights.iter().fold((0.0, 0.0), |(s1, s2), &w| {
        let r = w / max;
        (s1 + r, s2 + r * r)
    });
    Ok(s1 * s1 / s2)
}

/// ESS from log-weights.
pub fn effective_sample_size_log(log_weights: &[f64]) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(EvidenceError::Empty("effective_sample_size of no weights"));
    }
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(EvidenceError::NonNumeric);
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(EvidenceError::DegenerateWeights);
    }
    let (s1, s2) = log_weights.iter().fold((0.0, 0.0), |(s1, s2), &lw| {
        let r = (lw - max).exp();
        (s1 + r, s2 + r * r)
    });
    Ok(s1 * s1 / s2)
}

/// Outcome of adding one rectangle-rule shell to the running evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceStep {
    pub log_evidence: f64,
    pub log_increment: f64,
    /// Mass estimate after clamping into `[0, chi_prev]`.
    pub chi: f64,
    /// Amount by which the raw estimate exceeded `chi_prev` (zero if it did not).
    pub clamped_excess: f64,
}

/// Adds `lambda * (chi_prev - chi_cur)` to the evidence, all in log space.
/// A rising mass estimate is clamped to `chi_prev` and reported through
/// `clamped_excess`.
pub fn evidence_update(log_e_prev: f64, log_lambda: f64, chi_prev: f64, chi_cur: f64) -> EvidenceStep {
    let chi_prev = chi_prev.clamp(0.0, 1.0);
    let mut chi = chi_cur.max(0.0);
    let mut clamped_excess = 0.0;
    if chi > chi_prev {
        clamped_excess = chi - chi_prev;
        chi = chi_prev;
    }
    if chi == chi_prev || log_lambda == f64::NEG_INFINITY {
        return EvidenceStep { log_evidence: log_e_prev, log_increment: f64::NEG_INFINITY, chi, clamped_excess };
    }
    let log_increment = log_lambda + (chi_prev - chi).ln();
    EvidenceStep { log_evidence: log_add_exp(log_e_prev, log_increment), log_increment, chi, clamped_excess }
}

/// Weighted first and second moments of the samples that fell in one shell.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellStats {
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl ShellStats {
    /// Weighted moments of `(point, weight)` pairs. Returns `None` when no
    /// point carries positive weight.
    pub fn from_weighted<'a, I>(dimension: usize, points: I) -> Option<Self>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut total = 0.0;
        let mut mean = vec![0.0; dimension];
        let mut second = vec![0.0; dimension];
        for (theta, w) in points {
            if !(w > 0.0) {
                continue;
            }
            total += w;
            for k in 0..dimension {
                mean[k] += w * theta[k];
                second[k] += w * theta[k] * theta[k];
            }
        }
        if !(total > 0.0) {
            return None;
        }
        for k in 0..dimension {
            mean[k] /= total;
            second[k] /= total;
        }
        Some(Self { mean, second_moment: second })
    }

    pub fn from_unweighted<'a, I>(dimension: usize, points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        Self::from_weighted(dimension, points.into_iter().map(|p| (p, 1.0)))
    }
}

/// Posterior mean and variance from shell means weighted by their evidence
/// increments.
///
/// Shells without a recorded mean are skipped and the remaining weights
/// renormalised, so the estimate stays a convex combination of shell means.
pub fn posterior_moments(trace: &LevelTrace, log_evidence: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let shells: Vec<(&Vec<f64>, f64)> = trace
        .records
        .iter()
        .filter(|r| r.log_increment > f64::NEG_INFINITY)
        .filter_map(|r| r.shell_mean.as_ref().map(|m| (m, r.log_increment)))
        .collect();
    if shells.is_empty() {
        return Err(EvidenceError::NoShells);
    }
    let log_total = if log_evidence.is_finite() {
        log_evidence
    } else {
        log_sum_exp(&shells.iter().map(|(_, l)| *l).collect::<Vec<_>>())?
    };
    let d = shells[0].0.len();
    let mut weight_sum = 0.0;
    let mut mean = vec![0.0; d];
    let mut square = vec![0.0; d];
    for (m, log_inc) in &shells {
        let w = (log_inc - log_total).exp();
        weight_sum += w;
        for k in 0..d {
            mean[k] += w * m[k];
            square[k] += w * m[k] * m[k];
        }
    }
    if !(weight_sum > 0.0) {
        return Err(EvidenceError::NoShells);
    }
    let variance = (0..d)
        .map(|k| {
            mean[k] /= weight_sum;
            (square[k] / weight_sum - mean[k] * mean[k]).max(0.0)
        })
        .collect();
    Ok((mean, variance))
}
