use crate::numerics::{evidence_update, posterior_moments, EvidenceStep, ShellStats};
use crate::trace::{EvidenceEstimate, LevelRecord, LevelTrace, TerminationReason, Warning};

/// Running state shared by the level-adapted estimators: the evidence so far,
/// the current mass, the trace and any warnings.
#[derive(Debug, Clone)]
pub(crate) struct EvidenceAccumulator {
    dimension: usize,
    log_evidence: f64,
    chi: f64,
    trace: LevelTrace,
    warnings: Vec<Warning>,
    max_log_likelihood: f64,
}

impl EvidenceAccumulator {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            log_evidence: f64::NEG_INFINITY,
            chi: 1.0,
            trace: LevelTrace::default(),
            warnings: Vec::new(),
            max_log_likelihood: f64::NEG_INFINITY,
        }
    }

    pub fn observe(&mut self, log_likelihoods: impl IntoIterator<Item = f64>) {
        for l in log_likelihoods {
            if l > self.max_log_likelihood {
                self.max_log_likelihood = l;
            }
        }
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn trace(&self) -> &LevelTrace {
        &self.trace
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn warn(&mut self, warning: Warning) {
        self.warnings.push(warning);
    }

    /// Closes one shell at `log_lambda` with raw mass estimate `chi_raw`.
    pub fn push(
        &mut self,
        log_lambda: f64,
        chi_raw: f64,
        shell: Option<ShellStats>,
        cumulative_evals: u64,
        chi_variance: Option<f64>,
    ) -> EvidenceStep {
        let step = evidence_update(self.log_evidence, log_lambda, self.chi, chi_raw);
        if step.clamped_excess > 0.0 {
            self.warnings.push(Warning::ChiClamped { iteration: self.trace.len() + 1, excess: step.clamped_excess });
        }
        self.log_evidence = step.log_evidence;
        self.chi = step.chi;
        let (shell_mean, shell_second_moment) = match shell {
            Some(s) => (Some(s.mean), Some(s.second_moment)),
            None => (None, None),
        };
        self.trace.records.push(LevelRecord {
            log_lambda,
            chi: step.chi,
            log_increment: step.log_increment,
            shell_mean,
            shell_second_moment,
            cumulative_evals,
            chi_variance,
        });
        step
    }

    pub fn finish(
        self,
        termination: TerminationReason,
        total_evals: u64,
        relative_std_error: Option<f64>,
    ) -> EvidenceEstimate {
        let (posterior_mean, posterior_variance) = posterior_moments(&self.trace, self.log_evidence)
            .unwrap_or_else(|_| (vec![f64::NAN; self.dimension], vec![f64::NAN; self.dimension]));
        EvidenceEstimate {
            log_evidence: self.log_evidence,
            trace: self.trace,
            posterior_mean,
            posterior_variance,
            termination,
            total_evals,
            max_log_likelihood: self.max_log_likelihood,
            relative_std_error,
            warnings: self.warnings,
        }
    }
}
