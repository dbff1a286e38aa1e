//! Experiment configuration: a TOML file with one section per estimator.

use std::fmt;

use lla_evidence::lla_mcmc::{KernelConfig, McmcConfig, ProposalScale};
use lla_evidence::{
    BenchmarkName, FractionSchedule, IsConfig, IsdSpread, LevelPolicy, NestedConfig, SsConfig, StoppingPolicy,
};
use serde::Deserialize;

/// A configuration problem, with the 1-based line it was found on when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "invalid config (line {l}): {}", self.message),
            None => write!(f, "invalid config: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mc,
    Nested,
    LlaIs,
    LlaSs,
    LlaMcmc,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mc => "mc",
            Self::Nested => "nested",
            Self::LlaIs => "lla_is",
            Self::LlaSs => "lla_ss",
            Self::LlaMcmc => "lla_mcmc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub name: String,
    pub model: Option<String>,
    #[serde(default)]
    pub data_seed: u64,
    /// Draw a fresh dataset for every replication.
    #[serde(default)]
    pub regenerate_data: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSection {
    pub delta_evidence_tol: Option<f64>,
    pub chi_tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub max_evals: Option<u64>,
}

impl StoppingSection {
    fn apply(&self, base: StoppingPolicy) -> StoppingPolicy {
        StoppingPolicy {
            delta_evidence_tol: self.delta_evidence_tol.unwrap_or(base.delta_evidence_tol),
            chi_tol: self.chi_tol.unwrap_or(base.chi_tol),
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
            max_evals: self.max_evals.unwrap_or(base.max_evals),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleKeys {
    pub reject_offset: Option<f64>,
    pub reject_slope: Option<f64>,
    pub reject_cap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsSection {
    pub n_initial: Option<usize>,
    pub ess_threshold_fraction: Option<f64>,
    pub stddev_multiplier: Option<f64>,
    pub fixed_stddev: Option<f64>,
    pub stddev_floor_fraction: Option<f64>,
    #[serde(flatten)]
    pub schedule: ScheduleKeys,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsSection {
    pub per_dim_counts: Option<Vec<usize>>,
    pub n_per_iteration: Option<usize>,
    pub strata_cap: Option<usize>,
    #[serde(flatten)]
    pub schedule: ScheduleKeys,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelKeys {
    pub proposal_prior_fraction: Option<f64>,
    pub proposal_live_fraction: Option<f64>,
    pub proposal_stddev: Option<Vec<f64>>,
    pub component_wise: Option<bool>,
    pub steps_per_sample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub n_samples: Option<usize>,
    pub n_replace: Option<usize>,
    #[serde(flatten)]
    pub kernel: KernelKeys,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedSection {
    pub n_live: Option<usize>,
    #[serde(flatten)]
    pub kernel: KernelKeys,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    pub estimator: EstimatorKind,
    pub out_dir: Option<String>,
    #[serde(default = "yes")]
    pub write_traces: bool,
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub stopping: StoppingSection,
    pub mc: Option<McSection>,
    pub nested: Option<NestedSection>,
    pub lla_is: Option<IsSection>,
    pub lla_ss: Option<SsSection>,
    pub lla_mcmc: Option<McmcSection>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Fully resolved estimator settings.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSettings {
    Mc { n: usize },
    Nested(NestedConfig),
    LlaIs(IsConfig),
    LlaSs(SsConfig),
    LlaMcmc(McmcConfig),
}

impl EstimatorSettings {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Self::Mc { .. } => EstimatorKind::Mc,
            Self::Nested(_) => EstimatorKind::Nested,
            Self::LlaIs(_) => EstimatorKind::LlaIs,
            Self::LlaSs(_) => EstimatorKind::LlaSs,
            Self::LlaMcmc(_) => EstimatorKind::LlaMcmc,
        }
    }

    /// Caps the likelihood evaluations; plain Monte Carlo spends the budget
    /// as its sample size.
    pub fn with_budget(&self, budget: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            Self::Mc { n } => *n = budget as usize,
            Self::Nested(c) => c.stopping.max_evals = budget,
            Self::LlaIs(c) => c.stopping.max_evals = budget,
            Self::LlaSs(c) => c.stopping.max_evals = budget,
            Self::LlaMcmc(c) => c.stopping.max_evals = budget,
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: usize,
    pub out_dir: Option<String>,
    pub write_traces: bool,
    pub benchmark: BenchmarkName,
    pub model: Option<String>,
    pub data_seed: u64,
    pub regenerate_data: bool,
    pub estimator: EstimatorSettings,
}

/// 1-based line of `key` inside `[section]` (or at top level when `section`
/// is empty).
pub fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    source: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        let line = locate(self.source, section, key).or_else(|| locate(self.source, section, ""));
        ConfigError { line, message: message.into() }
    }

    fn check(&self, ok: bool, section: &str, key: &str, message: impl Into<String>) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.err(section, key, message))
        }
    }
}

fn schedule(keys: &ScheduleKeys, base: FractionSchedule) -> LevelPolicy {
    LevelPolicy::new(FractionSchedule {
        offset: keys.reject_offset.unwrap_or(base.offset),
        slope: keys.reject_slope.unwrap_or(base.slope),
        cap: keys.reject_cap.unwrap_or(base.cap),
    })
}

fn kernel(ctx: &Ctx, section: &str, keys: &KernelKeys, base: KernelConfig) -> Result<KernelConfig, ConfigError> {
    let given =
        [keys.proposal_prior_fraction.is_some(), keys.proposal_live_fraction.is_some(), keys.proposal_stddev.is_some()];
    ctx.check(
        given.iter().filter(|g| **g).count() <= 1,
        section,
        "proposal_stddev",
        "give at most one of proposal_prior_fraction, proposal_live_fraction, proposal_stddev",
    )?;
    let proposal = if let Some(f) = keys.proposal_prior_fraction {
        ProposalScale::PriorFraction(f)
    } else if let Some(f) = keys.proposal_live_fraction {
        ProposalScale::LiveFraction(f)
    } else if let Some(v) = &keys.proposal_stddev {
        ProposalScale::Absolute(v.clone())
    } else {
        base.proposal
    };
    let k = KernelConfig {
        proposal,
        component_wise: keys.component_wise.or(base.component_wise),
        steps_per_sample: keys.steps_per_sample.unwrap_or(base.steps_per_sample),
    };
    ctx.check(k.steps_per_sample >= 1, section, "steps_per_sample", "steps_per_sample must be at least 1")?;
    k.validate().map_err(|e| ctx.err(section, "proposal_stddev", e.to_string()))?;
    Ok(k)
}

pub fn parse(source: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(source).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(source, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let ctx = Ctx { source };

    let benchmark: BenchmarkName = raw
        .benchmark
        .name
        .parse()
        .map_err(|_| ctx.err("benchmark", "name", format!("unknown benchmark `{}`", raw.benchmark.name)))?;
    ctx.check(raw.replications >= 1, "", "replications", "replications must be at least 1")?;

    for (kind, present) in [
        (EstimatorKind::Mc, raw.mc.is_some()),
        (EstimatorKind::Nested, raw.nested.is_some()),
        (EstimatorKind::LlaIs, raw.lla_is.is_some()),
        (EstimatorKind::LlaSs, raw.lla_ss.is_some()),
        (EstimatorKind::LlaMcmc, raw.lla_mcmc.is_some()),
    ] {
        if present && kind != raw.estimator {
            return Err(ctx.err(
                kind.as_str(),
                "",
                format!("section [{}] does not match estimator `{}`", kind.as_str(), raw.estimator.as_str()),
            ));
        }
    }

    let stop = &raw.stopping;
    let estimator = match raw.estimator {
        EstimatorKind::Mc => {
            let n = raw.mc.clone().unwrap_or_default().n.unwrap_or(20_000);
            ctx.check(n >= 1, "mc", "n", "n must be at least 1")?;
            EstimatorSettings::Mc { n }
        }
        EstimatorKind::Nested => {
            let s = raw.nested.clone().unwrap_or_default();
            let base = NestedConfig::new(s.n_live.unwrap_or(500));
            let c = NestedConfig {
                stopping: stop.apply(base.stopping),
                kernel: kernel(&ctx, "nested", &s.kernel, base.kernel.clone())?,
                ..base
            };
            ctx.check(c.n_live >= 2, "nested", "n_live", "n_live must be at least 2")?;
            EstimatorSettings::Nested(c)
        }
        EstimatorKind::LlaIs => {
            let s = raw.lla_is.clone().unwrap_or_default();
            ctx.check(
                !(s.stddev_multiplier.is_some() && s.fixed_stddev.is_some()),
                "lla_is",
                "fixed_stddev",
                "give either stddev_multiplier or fixed_stddev, not both",
            )?;
            let base = IsConfig::default();
            let spread = match (s.fixed_stddev, s.stddev_multiplier) {
                (Some(v), _) => IsdSpread::Fixed(v),
                (None, Some(m)) => IsdSpread::Multiplier(m),
                (None, None) => base.spread,
            };
            let c = IsConfig {
                n_initial: s.n_initial.unwrap_or(base.n_initial),
                ess_threshold_fraction: s.ess_threshold_fraction.unwrap_or(base.ess_threshold_fraction),
                spread,
                stddev_floor_fraction: s.stddev_floor_fraction.unwrap_or(base.stddev_floor_fraction),
                level_policy: schedule(&s.schedule, base.level_policy.schedule),
                stopping: stop.apply(base.stopping),
            };
            ctx.check(c.n_initial >= 10, "lla_is", "n_initial", "n_initial must be at least 10")?;
            c.validate().map_err(|e| ctx.err("lla_is", "", e.to_string()))?;
            EstimatorSettings::LlaIs(c)
        }
        EstimatorKind::LlaSs => {
            let s = raw.lla_ss.clone().unwrap_or_default();
            let counts = s.per_dim_counts.clone().unwrap_or_default();
            ctx.check(!counts.is_empty(), "lla_ss", "per_dim_counts", "per_dim_counts is required")?;
            ctx.check(!counts.contains(&0), "lla_ss", "per_dim_counts", "every stratum count must be at least 1")?;
            let base = SsConfig::new(counts, s.n_per_iteration.unwrap_or(200));
            let c = SsConfig {
                strata_cap: s.strata_cap.unwrap_or(base.strata_cap),
                level_policy: schedule(&s.schedule, base.level_policy.schedule),
                stopping: stop.apply(base.stopping),
                ..base
            };
            ctx.check(c.n_per_iteration >= 1, "lla_ss", "n_per_iteration", "n_per_iteration must be at least 1")?;
            c.validate().map_err(|e| ctx.err("lla_ss", "", e.to_string()))?;
            EstimatorSettings::LlaSs(c)
        }
        EstimatorKind::LlaMcmc => {
            let s = raw.lla_mcmc.clone().unwrap_or_default();
            let base = McmcConfig::default();
            let c = McmcConfig {
                n_samples: s.n_samples.unwrap_or(base.n_samples),
                n_replace: s.n_replace.unwrap_or(base.n_replace),
                kernel: kernel(&ctx, "lla_mcmc", &s.kernel, base.kernel)?,
                stopping: stop.apply(base.stopping),
            };
            ctx.check(
                c.n_replace >= 1 && c.n_replace < c.n_samples,
                "lla_mcmc",
                "n_replace",
                format!("n_replace must satisfy 1 <= n_replace < n_samples, got {} of {}", c.n_replace, c.n_samples),
            )?;
            c.validate().map_err(|e| ctx.err("lla_mcmc", "", e.to_string()))?;
            EstimatorSettings::LlaMcmc(c)
        }
    };
    let stopping = match &estimator {
        EstimatorSettings::Mc { .. } => None,
        EstimatorSettings::Nested(c) => Some(c.stopping),
        EstimatorSettings::LlaIs(c) => Some(c.stopping),
        EstimatorSettings::LlaSs(c) => Some(c.stopping),
        EstimatorSettings::LlaMcmc(c) => Some(c.stopping),
    };
    if let Some(s) = stopping {
        s.validate().map_err(|e| ctx.err("stopping", "", e.to_string()))?;
    }

    Ok(ExperimentConfig {
        seed: raw.seed,
        replications: raw.replications,
        out_dir: raw.out_dir,
        write_traces: raw.write_traces,
        benchmark,
        model: raw.benchmark.model,
        data_seed: raw.benchmark.data_seed,
        regenerate_data: raw.benchmark.regenerate_data,
        estimator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
seed = 7
replications = 3
estimator = "lla_ss"

[benchmark]
name = "conjugate_gaussian"

[stopping]
chi_tol = 0.005

[lla_ss]
per_dim_counts = [5]
n_per_iteration = 175
"#;

    #[test]
    fn parses_good_config() {
        let c = parse(GOOD).unwrap();
        assert_eq!(c.replications, 3);
        match c.estimator {
            EstimatorSettings::LlaSs(s) => {
                assert_eq!(s.n_per_iteration, 175);
                assert_eq!(s.per_dim_counts, vec![5]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_estimator_is_an_error() {
        let src = GOOD.replace("estimator = \"lla_ss\"\n", "");
        let e = parse(&src).unwrap_err();
        assert!(e.message.contains("estimator"), "{e}");
    }

    #[test]
    fn validation_errors_carry_lines() {
        let src = GOOD.replace("n_per_iteration = 175", "n_per_iteration = 0");
        let e = parse(&src).unwrap_err();
        assert_eq!(e.line, Some(14));
        let src = GOOD.replace("conjugate_gaussian", "nonsense");
        assert_eq!(parse(&src).unwrap_err().line, Some(7));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let src = GOOD.replace("chi_tol = 0.005", "chi_tol = = 0.005");
        assert_eq!(parse(&src).unwrap_err().line, Some(10));
    }

    #[test]
    fn mismatched_block_rejected() {
        let src = format!("{GOOD}\n[lla_mcmc]\nn_samples = 100\n");
        let e = parse(&src).unwrap_err();
        assert!(e.message.contains("does not match"));
        assert_eq!(e.line, Some(16));
    }

    #[test]
    fn unknown_keys_rejected() {
        let src = GOOD.replace("n_per_iteration = 175", "n_per_iteration = 175\nbogus = 1");
        assert!(parse(&src).is_err());
    }
}
