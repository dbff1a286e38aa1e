//! Posterior model probabilities and Bayes factors from log evidences.

use serde::{Deserialize, Serialize};

use crate::error::{EvidenceError, Result};
use crate::numerics::log_sum_exp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    names: Vec<String>,
    log_evidences: Vec<f64>,
    prior_probs: Vec<f64>,
}

impl ModelSet {
    pub fn new(names: Vec<String>, log_evidences: Vec<f64>, prior_probs: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(EvidenceError::Empty("model set"));
        }
        if log_evidences.len() != names.len() {
            return Err(EvidenceError::DimensionMismatch { expected: names.len(), got: log_evidences.len() });
        }
        if prior_probs.len() != names.len() {
            return Err(EvidenceError::DimensionMismatch { expected: names.len(), got: prior_probs.len() });
        }
        if log_evidences.iter().any(|e| e.is_nan() || *e == f64::INFINITY) {
            return Err(EvidenceError::NonNumeric);
        }
        if prior_probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(EvidenceError::InvalidConfig("prior model probabilities must be nonnegative".into()));
        }
        let total: f64 = prior_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EvidenceError::InvalidConfig(format!("prior model probabilities sum to {total}, not 1")));
        }
        Ok(Self { names, log_evidences, prior_probs })
    }

    /// Equal prior probability on every model.
    pub fn uniform(names: Vec<String>, log_evidences: Vec<f64>) -> Result<Self> {
        let k = names.len().max(1);
        Self::new(names, log_evidences, vec![1.0 / k as f64; k])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn log_evidences(&self) -> &[f64] {
        &self.log_evidences
    }

    pub fn prior_probs(&self) -> &[f64] {
        &self.prior_probs
    }
}

/// `P(M_k | D)`, normalised in log space.
pub fn posterior_model_probabilities(ms: &ModelSet) -> Result<Vec<f64>> {
    let joint: Vec<f64> = ms.log_evidences.iter().zip(&ms.prior_probs).map(|(e, p)| e + p.ln()).collect();
    let total = log_sum_exp(&joint)?;
    if total == f64::NEG_INFINITY {
        return Err(EvidenceError::NoModelExplainsData);
    }
    Ok(joint.iter().map(|j| (j - total).exp()).collect())
}

/// `log E_a - log E_b`; `+inf` when only `b` is impossible.
pub fn log_bayes_factor(log_e_a: f64, log_e_b: f64) -> Result<f64> {
    match (log_e_a, log_e_b) {
        (a, b) if a.is_nan() || b.is_nan() => Err(EvidenceError::NonNumeric),
        (f64::NEG_INFINITY, f64::NEG_INFINITY) => Err(EvidenceError::UndefinedBayesFactor),
        (a, b) => Ok(a - b),
    }
}
