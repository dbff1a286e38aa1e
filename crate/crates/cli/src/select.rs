//! Posterior model probabilities from saved run summaries.

use lla_evidence::selection::{posterior_model_probabilities, ModelSet};

use crate::error::{CliError, CliResult};
use crate::runner::Summary;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub model: String,
    pub estimator: String,
    pub log_evidence: f64,
    pub prior: f64,
    pub posterior: f64,
}

/// Each summary contributes its mean log evidence. Summaries must share a
/// benchmark and dataset.
pub fn select(summaries: &[Summary], priors: Option<&[f64]>) -> CliResult<Vec<SelectionRow>> {
    if summaries.len() < 2 {
        return Err(CliError::Usage(format!("need at least two summaries, got {}", summaries.len())));
    }
    let first = &summaries[0];
    for s in &summaries[1..] {
        if s.benchmark != first.benchmark
            || s.data_seed != first.data_seed
            || s.regenerate_data != first.regenerate_data
        {
            return Err(CliError::Usage(format!(
                "summaries come from different datasets: {} (data seed {}) vs {} (data seed {})",
                first.benchmark, first.data_seed, s.benchmark, s.data_seed
            )));
        }
    }
    if first.regenerate_data && summaries.iter().any(|s| s.runs.len() > 1) {
        return Err(CliError::Usage("summaries with regenerated data do not share a dataset".into()));
    }
    let priors = match priors {
        Some(p) if p.len() != summaries.len() => {
            return Err(CliError::Usage(format!("{} priors given for {} summaries", p.len(), summaries.len())));
        }
        Some(p) => p.to_vec(),
        None => vec![1.0 / summaries.len() as f64; summaries.len()],
    };
    let names: Vec<String> = summaries.iter().map(|s| s.model.clone()).collect();
    let logs: Vec<f64> = summaries.iter().map(|s| s.aggregate.mean_log_evidence).collect();
    let set = ModelSet::new(names, logs.clone(), priors.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let post = posterior_model_probabilities(&set)?;
    Ok(summaries
        .iter()
        .zip(logs)
        .zip(priors)
        .zip(post)
        .map(|(((s, log_evidence), prior), posterior)| SelectionRow {
            model: s.model.clone(),
            estimator: s.estimator.clone(),
            log_evidence,
            prior,
            posterior,
        })
        .collect())
}

pub fn format_table(rows: &[SelectionRow]) -> String {
    let mut out =
        format!("{:<16} {:<10} {:>16} {:>8} {:>10}\n", "model", "estimator", "log_evidence", "prior", "posterior");
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<10} {:>16.6} {:>8.4} {:>10.6}\n",
            r.model, r.estimator, r.log_evidence, r.prior, r.posterior
        ));
    }
    out
}
