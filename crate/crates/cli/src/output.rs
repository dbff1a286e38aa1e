//! Writes summaries, replication tables and level traces.

use std::fs;
use std::path::Path;
use std::time::Duration;

use lla_evidence::LevelTrace;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::runner::{Experiment, Summary};

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    log_lambda: f64,
    chi: f64,
    log_increment: f64,
    cumulative_evals: u64,
}

#[derive(Serialize)]
struct ReplicationRow<'a> {
    row: String,
    seed: Option<u64>,
    data_seed: Option<u64>,
    log_evidence: f64,
    reference_log_evidence: f64,
    error_pct: Option<f64>,
    cov_pct: Option<f64>,
    total_evals: f64,
    termination_reason: &'a str,
}

pub fn write_trace(path: &Path, trace: &LevelTrace) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, r) in trace.records.iter().enumerate() {
        w.serialize(TraceRow {
            iteration: i + 1,
            log_lambda: r.log_lambda,
            chi: r.chi,
            log_increment: r.log_increment,
            cumulative_evals: r.cumulative_evals,
        })?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `(iteration, log_lambda, chi, log_increment, cumulative_evals)`.
pub type TraceRowTuple = (usize, f64, f64, f64, u64);

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRowTuple>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

pub fn write_replications(path: &Path, summary: &Summary) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &summary.runs {
        w.serialize(ReplicationRow {
            row: r.replication.to_string(),
            seed: Some(r.seed),
            data_seed: Some(r.data_seed),
            log_evidence: r.log_evidence,
            reference_log_evidence: r.reference_log_evidence,
            error_pct: r.error_pct,
            cov_pct: None,
            total_evals: r.total_evals as f64,
            termination_reason: &r.termination_reason,
        })?;
    }
    let a = &summary.aggregate;
    w.serialize(ReplicationRow {
        row: "mean".into(),
        seed: None,
        data_seed: None,
        log_evidence: a.mean_log_evidence,
        reference_log_evidence: a.mean_reference_log_evidence,
        error_pct: a.mean_error_pct,
        cov_pct: a.cov_pct,
        total_evals: a.mean_evals,
        termination_reason: "",
    })?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_summary(path: &Path, summary: &Summary) -> CliResult<()> {
    let text = toml::to_string(summary)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_summary(path: &Path) -> CliResult<Summary> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text)
        .map_err(|e| CliError::BadSummary { path: path.display().to_string(), message: e.message().to_string() })
}

fn write_timing(path: &Path, wall_times: &[Duration]) -> CliResult<()> {
    let mut text = String::from("replication,wall_seconds\n");
    for (k, t) in wall_times.iter().enumerate() {
        text.push_str(&format!("{k},{:.6}\n", t.as_secs_f64()));
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `summary.toml`, `replications.csv`, one `trace_NNN.csv` per
/// replication and `timing.csv`. Everything but the timing file is a pure
/// function of the configuration.
pub fn write_experiment(dir: &Path, experiment: &Experiment, traces: bool) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_summary(&dir.join("summary.toml"), &experiment.summary)?;
    write_replications(&dir.join("replications.csv"), &experiment.summary)?;
    if traces {
        for (k, est) in experiment.estimates.iter().enumerate() {
            write_trace(&dir.join(format!("trace_{k:03}.csv")), &est.trace)?;
        }
    }
    write_timing(&dir.join("timing.csv"), &experiment.wall_times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lla_evidence::trace::LevelRecord;

    #[test]
    fn summary_round_trips() {
        let text = r#"
seed = 7
replications = 2
estimator = "mc"

[benchmark]
name = "truncated_gaussian_1d"
data_seed = 4

[mc]
n = 300
"#;
        let exp = crate::runner::run_experiment(&crate::config::parse(text).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.toml");
        write_summary(&path, &exp.summary).unwrap();
        assert_eq!(read_summary(&path).unwrap(), exp.summary);
    }

    #[test]
    fn trace_round_trips() {
        let trace = LevelTrace {
            records: vec![
                LevelRecord {
                    log_lambda: -3.5,
                    chi: 0.7,
                    log_increment: -4.7,
                    shell_mean: None,
                    shell_second_moment: None,
                    cumulative_evals: 100,
                    chi_variance: None,
                },
                LevelRecord {
                    log_lambda: -1.25,
                    chi: 0.7,
                    log_increment: f64::NEG_INFINITY,
                    shell_mean: None,
                    shell_second_moment: None,
                    cumulative_evals: 200,
                    chi_variance: None,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&path, &trace).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iteration,log_lambda,chi,log_increment,cumulative_evals\n"));
        let rows = read_trace(&path).unwrap();
        assert_eq!(rows, vec![(1, -3.5, 0.7, -4.7, 100), (2, -1.25, 0.7, f64::NEG_INFINITY, 200)]);
    }
}
