//! One-dimensional prior marginals.
//!
//! Every family exposes its log density, CDF, inverse CDF and moments. The
//! inverse CDF drives both plain prior sampling and stratified sampling, so
//! it is computed in whichever tail keeps the most precision.

use rand::distr::Open01;
use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{EvidenceError, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for `p` in `(0, 1)`.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

/// Quantile for `p <= 0.5`. `erfc_inv` alone is good to roughly 1e-11, so
/// one Newton step against `erfc` finishes the job.
fn lower_quantile(p: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let density = std_normal_pdf(z);
    if density > 0.0 {
        z - (std_normal_cdf(z) - p) / density
    } else {
        z
    }
}

pub fn std_normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

fn std_normal_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        std_normal_ln_pdf(z).exp()
    }
}

/// Probability mass of the standard normal on `[alpha, beta]`, evaluated in the
/// tail where the subtraction does not cancel.
fn std_normal_mass(alpha: f64, beta: f64) -> f64 {
    if alpha >= 0.0 {
        std_normal_cdf(-alpha) - std_normal_cdf(-beta)
    } else if beta <= 0.0 {
        std_normal_cdf(beta) - std_normal_cdf(alpha)
    } else {
        1.0 - std_normal_cdf(alpha) - std_normal_cdf(-beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal {
        mean: f64,
        std_dev: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// Normal restricted to `[lower, upper]`; either bound may be infinite.
    TruncatedNormal {
        mean: f64,
        std_dev: f64,
        lower: f64,
        upper: f64,
    },
}

/// A validated one-dimensional prior marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalPrior {
    family: Family,
    /// Log of the truncation mass (zero for untruncated families).
    log_mass: f64,
    /// Standardized truncation bounds, only meaningful for truncated normals.
    alpha: f64,
    beta: f64,
    mass: f64,
}

impl MarginalPrior {
    pub fn normal(mean: f64, std_dev: f64) -> Result<Self> {
        if !mean.is_finite() || !(std_dev > 0.0) || !std_dev.is_finite() {
            return Err(EvidenceError::InvalidPrior(format!(
                "normal requires finite mean and positive std_dev, got ({mean}, {std_dev})"
            )));
        }
        Ok(Self {
            family: Family::Normal { mean, std_dev },
            log_mass: 0.0,
            alpha: f64::NEG_INFINITY,
            beta: f64::INFINITY,
            mass: 1.0,
        })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || !(upper > lower) {
            return Err(EvidenceError::InvalidPrior(format!(
                "uniform requires finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { family: Family::Uniform { lower, upper }, log_mass: 0.0, alpha: 0.0, beta: 1.0, mass: 1.0 })
    }

    pub fn truncated_normal(mean: f64, std_dev: f64, lower: f64, upper: f64) -> Result<Self> {
        if !mean.is_finite() || !(std_dev > 0.0) || !std_dev.is_finite() {
            return Err(EvidenceError::InvalidPrior(format!(
                "truncated normal requires finite mean and positive std_dev, got ({mean}, {std_dev})"
            )));
        }
        if lower.is_nan() || upper.is_nan() || !(upper > lower) {
            return Err(EvidenceError::InvalidPrior(format!(
                "truncated normal requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        let alpha = (lower - mean) / std_dev;
        let beta = (upper - mean) / std_dev;
        let mass = std_normal_mass(alpha, beta);
        if !(mass > 0.0) {
            return Err(EvidenceError::InvalidPrior(format!("truncation interval [{lower}, {upper}] carries no mass")));
        }
        Ok(Self {
            family: Family::TruncatedNormal { mean, std_dev, lower, upper },
            log_mass: mass.ln(),
            alpha,
            beta,
            mass,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Closed support interval; infinite ends denote unbounded support.
    pub fn support(&self) -> (f64, f64) {
        match self.family {
            Family::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Uniform { lower, upper } => (lower, upper),
            Family::TruncatedNormal { lower, upper, .. } => (lower, upper),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x >= lo && x <= hi
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.family {
            Family::Normal { mean, std_dev } => std_normal_ln_pdf((x - mean) / std_dev) - std_dev.ln(),
            Family::Uniform { lower, upper } => {
                if x < lower || x > upper {
                    f64::NEG_INFINITY
                } else {
                    -(upper - lower).ln()
                }
            }
            Family::TruncatedNormal { mean, std_dev, lower, upper } => {
                if x < lower || x > upper {
                    f64::NEG_INFINITY
                } else {
                    std_normal_ln_pdf((x - mean) / std_dev) - std_dev.ln() - self.log_mass
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            Family::Normal { mean, std_dev } => std_normal_cdf((x - mean) / std_dev),
            Family::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Family::TruncatedNormal { mean, std_dev, .. } => {
                let z = ((x - mean) / std_dev).clamp(self.alpha, self.beta);
                let p = if self.alpha >= 0.0 {
                    (std_normal_cdf(-self.alpha) - std_normal_cdf(-z)) / self.mass
                } else {
                    (std_normal_cdf(z) - std_normal_cdf(self.alpha)) / self.mass
                };
                p.clamp(0.0, 1.0)
            }
        }
    }

    /// Inverse CDF on `(0, 1)`. Nondecreasing in `u`; the result always lies
    /// inside the support.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self.family {
            Family::Normal { mean, std_dev } => mean + std_dev * std_normal_quantile(u),
            Family::Uniform { lower, upper } => (lower + u * (upper - lower)).clamp(lower, upper),
            Family::TruncatedNormal { mean, std_dev, lower, upper } => {
                let z = if self.alpha >= 0.0 {
                    -std_normal_quantile(std_normal_cdf(-self.alpha) - u * self.mass)
                } else {
                    std_normal_quantile(std_normal_cdf(self.alpha) + u * self.mass)
                };
                (mean + std_dev * z).clamp(lower, upper)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.inverse_cdf(u)
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Normal { mean, .. } => mean,
            Family::Uniform { lower, upper } => 0.5 * (lower + upper),
            Family::TruncatedNormal { mean, std_dev, .. } => {
                mean + std_dev * (std_normal_pdf(self.alpha) - std_normal_pdf(self.beta)) / self.mass
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self.family {
            Family::Normal { std_dev, .. } => std_dev * std_dev,
            Family::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            Family::TruncatedNormal { std_dev, .. } => {
                let pa = std_normal_pdf(self.alpha);
                let pb = std_normal_pdf(self.beta);
                let a_term = if self.alpha.is_finite() { self.alpha * pa } else { 0.0 };
                let b_term = if self.beta.is_finite() { self.beta * pb } else { 0.0 };
                let shift = (pa - pb) / self.mass;
                std_dev * std_dev * (1.0 + (a_term - b_term) / self.mass - shift * shift)
            }
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Composite Simpson on a finite window, refined until successive
    /// estimates agree.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let simpson = |n: usize| {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        let mut n = 64;
        let mut prev = simpson(n);
        loop {
            n *= 2;
            let next = simpson(n);
            if (next - prev).abs() < 1e-10 || n > 1 << 22 {
                return next;
            }
            prev = next;
        }
    }

    fn window(p: &MarginalPrior) -> (f64, f64) {
        let (lo, hi) = p.support();
        let m = p.mean();
        // Half-infinite truncations decay on the parent scale, not their own.
        let s = match p.family() {
            Family::TruncatedNormal { std_dev, .. } => std_dev.max(p.std_dev()),
            _ => p.std_dev(),
        };
        (lo.max(m - 12.0 * s), hi.min(m + 12.0 * s))
    }

    fn families() -> Vec<MarginalPrior> {
        vec![
            MarginalPrior::normal(1.0, 0.25).unwrap(),
            MarginalPrior::normal(-3.0, 7.0).unwrap(),
            MarginalPrior::uniform(0.0, 1.0).unwrap(),
            MarginalPrior::uniform(-5.0, 5.0).unwrap(),
            MarginalPrior::truncated_normal(1.25, 0.5, 1.0, 1.5).unwrap(),
            MarginalPrior::truncated_normal(0.0, 1.0, 3.0, f64::INFINITY).unwrap(),
            MarginalPrior::truncated_normal(0.0, 1.0, f64::NEG_INFINITY, -2.0).unwrap(),
            MarginalPrior::truncated_normal(10.0, 1.0, 0.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn densities_integrate_to_one() {
        for p in families() {
            let (a, b) = window(&p);
            let total = integrate(|x| p.log_pdf(x).exp(), a, b);
            assert!((total - 1.0).abs() < 1e-6, "{p:?} integrates to {total}");
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for p in families() {
            let (a, b) = window(&p);
            let m1 = integrate(|x| x * p.log_pdf(x).exp(), a, b);
            let m2 = integrate(|x| (x - m1).powi(2) * p.log_pdf(x).exp(), a, b);
            assert_relative_eq!(p.mean(), m1, epsilon = 1e-7, max_relative = 1e-7);
            assert_relative_eq!(p.variance(), m2, epsilon = 1e-7, max_relative = 1e-6);
        }
    }

    #[test]
    fn cdf_and_inverse_agree() {
        for p in families() {
            for &u in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-9] {
                let x = p.inverse_cdf(u);
                assert!(p.contains(x), "{p:?}: F^-1({u}) = {x} outside support");
                assert!((p.cdf(x) - u).abs() < 1e-9 * u.max(1e-3), "{p:?} at u = {u}");
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MarginalPrior::normal(0.0, 0.0).is_err());
        assert!(MarginalPrior::normal(f64::NAN, 1.0).is_err());
        assert!(MarginalPrior::uniform(1.0, 1.0).is_err());
        assert!(MarginalPrior::uniform(0.0, f64::INFINITY).is_err());
        assert!(MarginalPrior::truncated_normal(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(MarginalPrior::truncated_normal(0.0, 1.0, 60.0, 61.0).is_err());
    }

    #[test]
    fn uniform_inverse_cdf_is_identity_on_unit_interval() {
        let p = MarginalPrior::uniform(0.0, 1.0).unwrap();
        for &u in &[0.1, 0.25, 0.6] {
            assert_eq!(p.inverse_cdf(u), u);
        }
    }

    proptest! {
        #[test]
        fn inverse_cdf_is_monotone(idx in 0usize..8, u in 1e-9f64..1.0, v in 1e-9f64..1.0) {
            let p = families()[idx];
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            prop_assert!(p.inverse_cdf(lo) <= p.inverse_cdf(hi));
            prop_assert!(p.contains(p.inverse_cdf(lo)));
        }
    }
}
