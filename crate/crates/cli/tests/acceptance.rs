//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lla_evidence::lla_mcmc::{replenish, KernelConfig, McmcConfig};
use lla_evidence::lla_ss::{build_strata, sample_stratum, DEFAULT_STRATA_CAP};
use lla_evidence::models::{
    conjugate_exact_log_evidence, example_conjugate, grid_log_evidence, Bimodal2d, QuadratureOracle,
    TruncatedGaussian1d,
};
use lla_evidence::rng::{derive_seed, stream};
use lla_evidence::{
    make_benchmark, posterior_model_probabilities, BayesianProblem, BenchmarkName, EvidenceEstimate, IsConfig,
    IsdSpread, MarginalPrior, ModelSet, NestedConfig, SsConfig, StoppingPolicy,
};
use lla_evidence_cli::runner::{run_estimator, run_experiment, Summary};
use lla_evidence_cli::{parse, EstimatorSettings, ExperimentConfig};
use rand::Rng;

struct Outcome {
    name: String,
    pass: bool,
    detail: String,
}

fn outcome(name: &str, pass: bool, detail: String) -> Outcome {
    Outcome { name: name.to_string(), pass, detail }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> ExperimentConfig {
    let path = workspace().join("configs").join(name);
    parse(&fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn summary(name: &str) -> Summary {
    run_experiment(&config(name)).unwrap().summary
}

fn max_abs_error(s: &Summary) -> f64 {
    s.aggregate.max_abs_error_pct.unwrap()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

// Ten regenerated datasets per method; per-run error and evaluation gates,
// COV across runs.
fn example_one() -> Vec<Outcome> {
    const EVALS: (u64, u64) = (8_000, 14_400);
    [("lla_ss", 0.15), ("lla_mcmc", 0.5), ("lla_is", 1.0)]
        .into_iter()
        .map(|(method, gate)| {
            let s = summary(&format!("example1_{method}.toml"));
            let err = max_abs_error(&s);
            let cov = s.aggregate.cov_pct.unwrap();
            let lo = s.runs.iter().map(|r| r.total_evals).min().unwrap();
            let hi = s.runs.iter().map(|r| r.total_evals).max().unwrap();
            let pass = err <= gate && cov <= 0.3 && lo >= EVALS.0 && hi <= EVALS.1;
            outcome(
                &format!("1 example I {method}"),
                pass,
                format!(
                    "max |err| {err:.4}% (gate {gate}%), COV {cov:.4}% (gate 0.3%), evals {lo}..{hi} (gate {}..{})",
                    EVALS.0, EVALS.1
                ),
            )
        })
        .collect()
}

fn baselines() -> Vec<Outcome> {
    let mc = summary("example1_mc.toml");
    let worst_z = mc
        .runs
        .iter()
        .map(|r| (r.log_evidence - r.reference_log_evidence).abs() / r.relative_std_error.unwrap())
        .fold(0.0_f64, f64::max);
    let nested = summary("example1_nested.toml");
    let err = max_abs_error(&nested);
    vec![
        outcome("2 monte carlo within 3 SE", worst_z <= 3.0, format!("worst |error| / SE {worst_z:.3}")),
        outcome("2 nested sampling within 1%", err <= 1.0, format!("max |err| {err:.4}%")),
    ]
}

fn high_dimension() -> Vec<Outcome> {
    let s = summary("highdim_lla_mcmc.toml");
    let err = max_abs_error(&s);
    let evals = s.runs.iter().map(|r| r.total_evals).max().unwrap();
    let nested = summary("highdim_nested.toml");
    vec![
        outcome(
            "3 highdim lla_mcmc",
            err <= 1.0 && evals <= 100_000,
            format!("max |err| {err:.4}%, max evals {evals}"),
        ),
        outcome(
            "3 highdim nested (recorded)",
            true,
            format!("max |err| {:.4}%, mean evals {:.0}", max_abs_error(&nested), nested.aggregate.mean_evals),
        ),
    ]
}

// Pass fractions at two fixed levels of L = 2 theta on the unit interval:
// theta > 0.1 from prior draws, then theta > 0.19 among the survivors plus
// chain replacements. Both conditional masses are 0.9.
fn cov_law() -> Vec<Outcome> {
    let problem = make_benchmark(BenchmarkName::UniformLinear, 0).unwrap().models.remove(0).problem;
    let levels = [(2.0f64 * 0.1).ln(), (2.0f64 * 0.19).ln()];
    let delta = 0.9;
    let sizes = [250usize, 1000, 4000];
    let reps = 200;
    let mut stage_covs = [Vec::new(), Vec::new()];
    for &n in &sizes {
        let fractions: Vec<[f64; 2]> = (0..reps)
            .map(|r| {
                let seed = derive_seed(2024, &[n as u64, r]);
                let mut rng = stream(seed, &[0]);
                let pop: Vec<(Vec<f64>, f64)> = (0..n)
                    .map(|_| {
                        let t = problem.sample_prior(&mut rng);
                        let l = problem.log_likelihood(&t);
                        (t, l)
                    })
                    .collect();
                let passing: Vec<_> = pop.into_iter().filter(|(_, l)| *l > levels[0]).collect();
                let first = passing.len() as f64 / n as f64;
                let kernel = KernelConfig::default().resolve(&problem, &passing).unwrap();
                let fresh = replenish(&passing, n - passing.len(), levels[0], &kernel, &problem, seed, 1).unwrap();
                let second = passing
                    .iter()
                    .map(|(_, l)| *l)
                    .chain(fresh.iter().map(|f| f.log_likelihood))
                    .filter(|l| *l > levels[1])
                    .count() as f64
                    / n as f64;
                [first, second]
            })
            .collect();
        for (stage, covs) in stage_covs.iter_mut().enumerate() {
            let xs: Vec<f64> = fractions.iter().map(|f| f[stage]).collect();
            let (m, sd) = mean_sd(&xs);
            covs.push(sd / m);
        }
    }
    stage_covs
        .iter()
        .enumerate()
        .map(|(stage, covs)| {
            let ratios: Vec<f64> =
                sizes.iter().zip(covs).map(|(&n, c)| c / ((1.0 - delta) / (n as f64 * delta)).sqrt()).collect();
            let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
            let ys: Vec<f64> = covs.iter().map(|c| c.ln()).collect();
            let (mx, _) = mean_sd(&xs);
            let (my, _) = mean_sd(&ys);
            let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
                / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
            let pass = ratios.iter().all(|r| (r - 1.0).abs() <= 0.2) && (slope + 0.5).abs() <= 0.1;
            outcome(
                &format!("4 COV law, {}", if stage == 0 { "prior draws" } else { "after replenishment" }),
                pass,
                format!("COV / theory {:.3?} at N = {sizes:?}, log-log slope {slope:.3}", ratios),
            )
        })
        .collect()
}

fn random_settings<R: Rng>(rng: &mut R, dimension: usize) -> EstimatorSettings {
    let stopping = StoppingPolicy { max_evals: 20_000, ..StoppingPolicy::default() };
    match rng.random_range(0..5) {
        0 => EstimatorSettings::Mc { n: rng.random_range(100..3000) },
        1 => {
            let mut c = NestedConfig::new(rng.random_range(10..120));
            c.stopping.max_evals = 20_000;
            c.kernel.steps_per_sample = rng.random_range(2..15);
            EstimatorSettings::Nested(c)
        }
        2 => {
            let spread = if rng.random_bool(0.5) {
                IsdSpread::Multiplier(rng.random_range(1.0..3.0))
            } else {
                IsdSpread::Fixed(rng.random_range(0.05..1.0))
            };
            EstimatorSettings::LlaIs(IsConfig {
                n_initial: rng.random_range(20..500),
                ess_threshold_fraction: rng.random_range(0.0..0.6),
                spread,
                stopping,
                ..IsConfig::default()
            })
        }
        3 => {
            let counts = (0..dimension).map(|_| rng.random_range(1..7)).collect();
            EstimatorSettings::LlaSs(SsConfig { stopping, ..SsConfig::new(counts, rng.random_range(20..400)) })
        }
        _ => {
            let n = rng.random_range(20..400);
            let mut c =
                McmcConfig { n_samples: n, n_replace: rng.random_range(1..n / 2), stopping, ..McmcConfig::default() };
            c.kernel.steps_per_sample = rng.random_range(1..6);
            EstimatorSettings::LlaMcmc(c)
        }
    }
}

fn invariants() -> Vec<Outcome> {
    let problems: Vec<(&str, BayesianProblem)> = vec![
        ("conjugate", example_conjugate(3).unwrap().to_problem().unwrap()),
        ("uniform_linear", make_benchmark(BenchmarkName::UniformLinear, 0).unwrap().models.remove(0).problem),
        ("truncated", TruncatedGaussian1d::simulate(5).unwrap().to_problem().unwrap()),
        ("bimodal", Bimodal2d::default().to_problem().unwrap()),
    ];
    let mut rng = stream(99, &[]);
    let mut failures = Vec::new();
    let mut per_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for k in 0..100u64 {
        let (label, problem) = &problems[rng.random_range(0..problems.len())];
        let settings = random_settings(&mut rng, problem.dimension());
        *per_kind.entry(settings.kind().as_str()).or_default() += 1;
        let est = match run_estimator(&settings, problem, k) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("config {k} ({label}): error {e}"));
                continue;
            }
        };
        if let Err(e) = est.trace.check_invariants() {
            failures.push(format!("config {k} ({label}, {}): {e}", settings.kind().as_str()));
        }
        if est.log_evidence.is_nan() || est.log_evidence > est.max_log_likelihood + 1e-12 {
            failures
                .push(format!("config {k}: log evidence {} above max {}", est.log_evidence, est.max_log_likelihood));
        }
        if let EstimatorSettings::LlaSs(c) = &settings {
            let mut grid = build_strata(problem, &c.per_dim_counts, DEFAULT_STRATA_CAP).unwrap();
            let total: f64 =
                (0..grid.len()).map(|s| grid.unit_bounds(s).iter().map(|(lo, hi)| hi - lo).product::<f64>()).sum();
            if (total - 1.0).abs() > 1e-12 || (grid.mass() * grid.len() as f64 - 1.0).abs() > 1e-12 {
                failures.push(format!("config {k}: strata masses sum to {total}"));
            }
            for s in 0..grid.len() {
                let mut srng = stream(k, &[s as u64]);
                let pts = sample_stratum(problem, &grid, s, 5, &mut srng);
                let ls = problem.log_likelihoods(&pts);
                grid.add_samples(s, pts, ls);
            }
            let mut previous: Vec<usize> = grid.active().to_vec();
            for level in est.trace.log_lambdas() {
                grid.deactivate_below(level);
                if !grid.active().iter().all(|s| previous.contains(s)) {
                    failures.push(format!("config {k}: active set grew"));
                }
                previous = grid.active().to_vec();
            }
        }
    }
    let mut selection_ok = true;
    for _ in 0..100 {
        let m = rng.random_range(2..6);
        let logs: Vec<f64> = (0..m).map(|_| rng.random_range(-500.0..0.0)).collect();
        let shift = rng.random_range(-1000.0..1000.0);
        let names: Vec<String> = (0..m).map(|i| i.to_string()).collect();
        let p = posterior_model_probabilities(&ModelSet::uniform(names.clone(), logs.clone()).unwrap()).unwrap();
        let shifted: Vec<f64> = logs.iter().map(|l| l + shift).collect();
        let q = posterior_model_probabilities(&ModelSet::uniform(names, shifted).unwrap()).unwrap();
        selection_ok &= (p.iter().sum::<f64>() - 1.0).abs() < 1e-12;
        selection_ok &= p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12);
    }
    vec![
        outcome(
            "5 trace, evidence and strata invariants over 100 configs",
            failures.is_empty(),
            if failures.is_empty() { format!("runs per estimator {per_kind:?}") } else { failures.join("; ") },
        ),
        outcome("5 model probabilities sum to 1 and shift-invariant", selection_ok, "100 random sets".into()),
    ]
}

fn all_estimators(n: usize) -> Vec<EstimatorSettings> {
    let stopping = StoppingPolicy::default();
    vec![
        EstimatorSettings::Mc { n: 10 * n },
        EstimatorSettings::Nested(NestedConfig::new(n / 2)),
        EstimatorSettings::LlaIs(IsConfig { n_initial: n, stopping, ..IsConfig::default() }),
        EstimatorSettings::LlaSs(SsConfig::new(vec![5], n)),
        EstimatorSettings::LlaMcmc(McmcConfig { n_samples: n, n_replace: n / 10, stopping, ..McmcConfig::default() }),
    ]
}

fn oracles() -> Vec<Outcome> {
    let mut out = Vec::new();
    let log_c = -3.7;
    let constant = BayesianProblem::new(vec![MarginalPrior::normal(0.0, 1.0).unwrap()], move |_| log_c).unwrap();
    let worst = all_estimators(200)
        .iter()
        .map(|s| (run_estimator(s, &constant, 1).unwrap().log_evidence - log_c).abs())
        .fold(0.0_f64, f64::max);
    out.push(outcome("6 constant likelihood exact", worst <= 1e-12, format!("worst |log Z - log c| {worst:.2e}")));

    let linear = make_benchmark(BenchmarkName::UniformLinear, 0).unwrap().models.remove(0).problem;
    // Gated for plain Monte Carlo and importance sampling; the level-based
    // sums carry the upper rectangle-rule bias and are only reported.
    let mut gated = Vec::new();
    let mut reported = Vec::new();
    let mut ok = true;
    for s in all_estimators(200) {
        let runs: Vec<EvidenceEstimate> = (0..30).map(|k| run_estimator(&s, &linear, 100 + k).unwrap()).collect();
        let logs: Vec<f64> = runs.iter().map(|e| e.log_evidence).collect();
        let (m, sd) = mean_sd(&logs);
        let z = logs[0].abs() / sd;
        let line = format!("{} z {z:.2} (mean {m:+.4}, SE {sd:.4})", s.kind().as_str());
        if matches!(s, EstimatorSettings::Mc { .. } | EstimatorSettings::LlaIs(_)) {
            ok &= z <= 3.0;
            gated.push(line);
        } else {
            reported.push(line);
        }
    }
    out.push(outcome("6 uniform-linear within 3 SE of 0", ok, gated.join(", ")));
    out.push(outcome("6 uniform-linear level sums (recorded)", true, reported.join(", ")));

    let oracle = QuadratureOracle::default();
    let t = TruncatedGaussian1d::simulate(5).unwrap();
    let b = Bimodal2d::default();
    let c = example_conjugate(5).unwrap();
    let diffs = [
        (grid_log_evidence(&t.to_problem().unwrap(), &oracle).unwrap() - t.exact_log_evidence()).abs(),
        (grid_log_evidence(&b.to_problem().unwrap(), &oracle).unwrap() - b.exact_log_evidence()).abs(),
        (grid_log_evidence(&c.to_problem().unwrap(), &oracle).unwrap() - conjugate_exact_log_evidence(&c)).abs(),
    ];
    out.push(outcome(
        "6 grid oracle matches closed forms",
        diffs.iter().all(|d| *d <= 1e-6),
        format!("|diff| truncated {:.1e}, bimodal {:.1e}, conjugate {:.1e}", diffs[0], diffs[1], diffs[2]),
    ));
    out
}

fn model_selection() -> Vec<Outcome> {
    let summaries: Vec<Summary> = (1..=3).map(|d| summary(&format!("regression_degree_{d}.toml"))).collect();
    let rows = lla_evidence_cli::select::select(&summaries, None).unwrap();
    let exact: Vec<f64> = summaries.iter().map(|s| s.aggregate.mean_reference_log_evidence).collect();
    let names: Vec<String> = rows.iter().map(|r| r.model.clone()).collect();
    let p_exact = posterior_model_probabilities(&ModelSet::uniform(names, exact).unwrap()).unwrap();
    let p2 = rows.iter().find(|r| r.model == "degree_2").unwrap().posterior;
    vec![outcome(
        "7 degree 2 selected with probability > 0.95",
        p2 > 0.95,
        format!(
            "estimated {:?}, exact {:?}",
            rows.iter().map(|r| format!("{:.4}", r.posterior)).collect::<Vec<_>>(),
            p_exact.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>()
        ),
    )]
}

fn run_cli(config: &Path, workers: usize, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_lla-evidence"))
        .args(["--workers", &workers.to_string(), "run", "--replications-override", "2", "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

fn determinism() -> Vec<Outcome> {
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for name in ["example1_lla_is", "example1_lla_ss", "example1_lla_mcmc", "example1_mc", "example1_nested"] {
        let cfg = workspace().join("configs").join(format!("{name}.toml"));
        let dirs: Vec<PathBuf> = [1, 8]
            .iter()
            .map(|w| {
                let d = tmp.path().join(format!("{name}_{w}"));
                run_cli(&cfg, *w, &d);
                d
            })
            .collect();
        for entry in fs::read_dir(&dirs[0]).unwrap() {
            let file = entry.unwrap().file_name();
            if file == "timing.csv" {
                continue;
            }
            compared += 1;
            if fs::read(dirs[0].join(&file)).unwrap() != fs::read(dirs[1].join(&file)).ok().unwrap_or_default() {
                mismatches.push(format!("{name}/{}", file.to_string_lossy()));
            }
        }
    }
    vec![outcome(
        "8 byte-identical outputs at 1 and 8 workers",
        mismatches.is_empty() && compared > 0,
        if mismatches.is_empty() { format!("{compared} files compared") } else { mismatches.join(", ") },
    )]
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Section = fn() -> Vec<Outcome>;
    let sections: [(&str, Section); 8] = [
        ("example_one", example_one),
        ("baselines", baselines),
        ("high_dimension", high_dimension),
        ("cov_law", cov_law),
        ("invariants", invariants),
        ("oracles", oracles),
        ("model_selection", model_selection),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, section) in sections {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        for o in section() {
            println!("[{}] criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
            failed += usize::from(!o.pass);
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
