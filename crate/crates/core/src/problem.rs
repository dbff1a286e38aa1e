use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{EvidenceError, Result};
use crate::prior::MarginalPrior;

/// Deterministic log-likelihood over a parameter vector. May return
/// `f64::NEG_INFINITY` for zero likelihood.
pub type LogLikelihood = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A product prior paired with a log-likelihood.
#[derive(Clone)]
pub struct BayesianProblem {
    priors: Vec<MarginalPrior>,
    log_likelihood: LogLikelihood,
}

impl fmt::Debug for BayesianProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BayesianProblem").field("priors", &self.priors).finish_non_exhaustive()
    }
}

impl BayesianProblem {
    pub fn new<F>(priors: Vec<MarginalPrior>, log_likelihood: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if priors.is_empty() {
            return Err(EvidenceError::Empty("problem needs at least one dimension"));
        }
        Ok(Self { priors, log_likelihood: Arc::new(log_likelihood) })
    }

    pub fn dimension(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[MarginalPrior] {
        &self.priors
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.priors.len());
        (self.log_likelihood)(theta)
    }

    /// Joint prior log density: the sum of the marginal log densities.
    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        self.priors.iter().zip(theta).map(|(p, &x)| p.log_pdf(x)).sum()
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.priors.iter().map(|p| p.sample(rng)).collect()
    }

    pub fn check_point(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dimension() {
            return Err(EvidenceError::DimensionMismatch { expected: self.dimension(), got: theta.len() });
        }
        Ok(())
    }
}

impl BayesianProblem {
    /// Evaluates the log-likelihood at every point, in parallel. Output order
    /// matches input order.
    pub fn log_likelihoods(&self, points: &[Vec<f64>]) -> Vec<f64> {
        use rayon::prelude::*;
        points.par_iter().map(|p| self.log_likelihood(p)).collect()
    }
}
