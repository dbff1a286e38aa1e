//! Runs an experiment's replications and condenses them into a summary.

use std::time::{Duration, Instant};

use lla_evidence::rng::derive_seed;
use lla_evidence::{
    make_benchmark, run_lla_is, run_lla_mcmc, run_lla_ss, run_mc, run_nested, BayesianProblem, EvidenceEstimate,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorSettings, ExperimentConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replication: usize,
    pub seed: u64,
    pub data_seed: u64,
    pub log_evidence: f64,
    pub reference_log_evidence: f64,
    /// Signed error of the log evidence relative to `|reference|`, in percent.
    pub error_pct: Option<f64>,
    pub total_evals: u64,
    pub iterations: usize,
    pub termination_reason: String,
    pub max_log_likelihood: f64,
    pub relative_std_error: Option<f64>,
    pub warnings: usize,
    pub posterior_mean: Vec<f64>,
    pub posterior_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replications: usize,
    pub mean_log_evidence: f64,
    pub mean_reference_log_evidence: f64,
    pub mean_error_pct: Option<f64>,
    pub mean_abs_error_pct: Option<f64>,
    pub max_abs_error_pct: Option<f64>,
    /// Spread of `log Z_hat / log Z_ref` over replications (of `log Z_hat`
    /// when a reference is zero), in percent.
    pub cov_pct: Option<f64>,
    pub mean_evals: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmark: String,
    pub model: String,
    pub estimator: String,
    pub seed: u64,
    pub data_seed: u64,
    pub regenerate_data: bool,
    pub aggregate: Aggregate,
    pub runs: Vec<RunRecord>,
}

/// A finished experiment: the summary, each run's full estimate and its
/// wall time.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub summary: Summary,
    pub estimates: Vec<EvidenceEstimate>,
    pub wall_times: Vec<Duration>,
}

pub fn run_estimator(
    settings: &EstimatorSettings,
    problem: &BayesianProblem,
    seed: u64,
) -> lla_evidence::Result<EvidenceEstimate> {
    match settings {
        EstimatorSettings::Mc { n } => run_mc(problem, *n, seed),
        EstimatorSettings::Nested(c) => run_nested(problem, c, seed),
        EstimatorSettings::LlaIs(c) => run_lla_is(problem, c, seed),
        EstimatorSettings::LlaSs(c) => run_lla_ss(problem, c, seed),
        EstimatorSettings::LlaMcmc(c) => run_lla_mcmc(problem, c, seed),
    }
}

pub fn replication_seeds(config: &ExperimentConfig, k: usize) -> (u64, u64) {
    let data_seed = if config.regenerate_data { derive_seed(config.data_seed, &[k as u64]) } else { config.data_seed };
    (derive_seed(config.seed, &[k as u64]), data_seed)
}

fn select_model(config: &ExperimentConfig, data_seed: u64) -> CliResult<lla_evidence::models::BenchmarkModel> {
    let bench = make_benchmark(config.benchmark, data_seed)?;
    let labels = || bench.models.iter().map(|m| m.label.as_str()).collect::<Vec<_>>().join(", ");
    match &config.model {
        Some(label) => bench.models.iter().find(|m| &m.label == label).cloned().ok_or_else(|| {
            CliError::Usage(format!("benchmark {} has no model `{label}` (have: {})", config.benchmark, labels()))
        }),
        None if bench.models.len() == 1 => Ok(bench.models[0].clone()),
        None => Err(CliError::Usage(format!(
            "benchmark {} has several models; set benchmark.model to one of: {}",
            config.benchmark,
            labels()
        ))),
    }
}

fn relative_error_pct(estimate: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| 100.0 * (estimate - reference) / reference.abs())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn cov_pct(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m != 0.0).then(|| 100.0 * var.sqrt() / m.abs())
}

pub fn aggregate(runs: &[RunRecord]) -> Aggregate {
    let logs: Vec<f64> = runs.iter().map(|r| r.log_evidence).collect();
    let refs: Vec<f64> = runs.iter().map(|r| r.reference_log_evidence).collect();
    let errs: Option<Vec<f64>> = runs.iter().map(|r| r.error_pct).collect();
    let ratios: Vec<f64> = if refs.iter().all(|r| *r != 0.0) {
        logs.iter().zip(&refs).map(|(l, r)| l / r).collect()
    } else {
        logs.clone()
    };
    Aggregate {
        replications: runs.len(),
        mean_log_evidence: mean(&logs),
        mean_reference_log_evidence: mean(&refs),
        mean_error_pct: errs.as_ref().map(|e| mean(e)),
        mean_abs_error_pct: errs.as_ref().map(|e| e.iter().map(|x| x.abs()).sum::<f64>() / e.len() as f64),
        max_abs_error_pct: errs.as_ref().map(|e| e.iter().fold(0.0_f64, |m, x| m.max(x.abs()))),
        cov_pct: cov_pct(&ratios),
        mean_evals: runs.iter().map(|r| r.total_evals as f64).sum::<f64>() / runs.len() as f64,
    }
}

/// Runs every replication. Replications run in parallel but results are
/// collected in replication order, so the output does not depend on the
/// thread count.
pub fn run_experiment(config: &ExperimentConfig) -> CliResult<Experiment> {
    let results: Vec<CliResult<(RunRecord, EvidenceEstimate, Duration, String)>> = (0..config.replications)
        .into_par_iter()
        .map(|k| {
            let (seed, data_seed) = replication_seeds(config, k);
            let model = select_model(config, data_seed)?;
            let start = Instant::now();
            let est = run_estimator(&config.estimator, &model.problem, seed)?;
            let elapsed = start.elapsed();
            let record = RunRecord {
                replication: k,
                seed,
                data_seed,
                log_evidence: est.log_evidence,
                reference_log_evidence: model.reference_log_evidence,
                error_pct: relative_error_pct(est.log_evidence, model.reference_log_evidence),
                total_evals: est.total_evals,
                iterations: est.iterations(),
                termination_reason: est.termination.to_string(),
                max_log_likelihood: est.max_log_likelihood,
                relative_std_error: est.relative_std_error,
                warnings: est.warnings.len(),
                posterior_mean: est.posterior_mean.clone(),
                posterior_variance: est.posterior_variance.clone(),
            };
            Ok((record, est, elapsed, model.label))
        })
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    let mut estimates = Vec::with_capacity(results.len());
    let mut wall_times = Vec::with_capacity(results.len());
    let mut label = String::new();
    for r in results {
        let (record, est, t, l) = r?;
        runs.push(record);
        estimates.push(est);
        wall_times.push(t);
        label = l;
    }
    let summary = Summary {
        benchmark: config.benchmark.to_string(),
        model: label,
        estimator: config.estimator.kind().as_str().to_string(),
        seed: config.seed,
        data_seed: config.data_seed,
        regenerate_data: config.regenerate_data,
        aggregate: aggregate(&runs),
        runs,
    };
    Ok(Experiment { summary, estimates, wall_times })
}
