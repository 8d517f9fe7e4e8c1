//! Command-line front end.
//!
//! Every command writes its artifacts plus a `<command>_manifest.json` into
//! `--out`. Output file names in the manifest are relative to the manifest's
//! own directory.
//!
//! CSV headers:
//!
//! | file                      | header                                  |
//! |---------------------------|-----------------------------------------|
//! | `solve_phi.csv`           | `t,phi1,phi2,phi3` (matrix: row-major `phi1_ij`, `phi2_ij`) |
//! | `solve_gains.csv`         | `t,alpha,beta`                          |
//! | `simulate_trajectory.csv` | `t,m1,m2` (partial obs: `t,P,m1_hat,m2_hat,m2`) |
//! | `verify_residuals.csv`    | `t,m1,m2,residual`                      |
//! | `report.csv`              | `run,command,source,seed,value,oracle,mc,mc_std_error` |
//!
//! For partially observed problems `solve_phi.csv` and `solve_gains.csv` use
//! the shifted clock `t - s`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{preset, Problem, RunConfig, SimulationSection};
use crate::control::{
    optimal_feedback, residual_sweep, value_function, write_residual_csv, FeedbackLaw,
};
use crate::error::{Error, Result};
use crate::model::{MatrixProblemSpec, MeasureMoments, ProblemSpec};
use crate::partial_obs::{
    analytic_partial_phi, correlation, decomposition_of, error_variance, partial_value,
    partial_value_from_phi, reduced_problem, run_partial, write_filter_csv, PartialObsSpec,
};
use crate::riccati::{
    analytic_riccati, default_steps, solve_matrix_riccati, solve_riccati, RiccatiSolution,
};
use crate::simulate::{
    cost_oracle, gaussianity_check, perturbation_sweep, power_law_exponent, run_particles,
    write_trajectory_csv, CostReport, Gaussianity, InitialLaw, SimConfig,
};

pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(
    name = "mflqg",
    version,
    about = "Mean-field LQG: Riccati solver, feedback synthesis and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Riccati system and tabulate the value function.
    Solve(SolveArgs),
    /// Compare the moment-ODE oracle with a Monte Carlo estimate of the optimal cost.
    Simulate(SimulateArgs),
    /// Run the full verification battery; exit code 0 iff every check passes.
    Verify(SimulateArgs),
    /// Tabulate summaries from previous runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in parameter set: example1, example2, example3 or example4.
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    /// RK4 steps over the horizon (default 1000 per unit time).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial Dirac locations at which to report v(0, delta_x); repeatable.
    #[arg(long = "x")]
    pub x: Vec<f64>,
    #[arg(long, default_value = "mflqg-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Euler-Maruyama step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Absolute slack added to 3 standard errors when comparing MC with exact costs.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Manifests written by earlier runs.
    pub manifests: Vec<PathBuf>,
    #[arg(long, default_value = "mflqg-out")]
    pub out: PathBuf,
}

/// Provenance record of one CLI run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub source: String,
    pub parameters: RunConfig,
    pub steps: usize,
    pub x: Vec<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub outputs: Vec<String>,
    pub version: String,
}

/// What a command produced: human-readable text and an exit code.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub text: String,
    pub exit_code: i32,
}

struct Resolved {
    source: String,
    problem: Problem,
    steps: usize,
    xs: Vec<f64>,
    sim: SimConfig,
}

fn resolve(args: &SolveArgs, sim: Option<&SimulateArgs>) -> Result<Resolved> {
    let (source, problem, section) = match (&args.source.preset, &args.source.config) {
        (Some(name), None) => (
            format!("preset:{name}"),
            preset(name)?,
            SimulationSection::default(),
        ),
        (None, Some(path)) => {
            let cfg = RunConfig::load(path)?;
            (
                format!("config:{}", path.display()),
                cfg.problem()?,
                cfg.simulation.unwrap_or_default(),
            )
        }
        _ => {
            return Err(Error::Argument(
                "exactly one of --preset or --config is required".into(),
            ))
        }
    };
    let duration = match &problem {
        Problem::Full(p) => p.horizon,
        Problem::Matrix(p) => p.horizon,
        Problem::Partial(p) => p.duration(),
    };
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Assumption {
            assumption: "T > 0",
            detail: format!("control window has length {duration}"),
        });
    }
    let steps = args.steps.unwrap_or_else(|| default_steps(duration));
    if steps < 2 {
        return Err(Error::Argument(format!(
            "--steps must be >= 2, got {steps}"
        )));
    }
    let xs = if args.x.is_empty() {
        vec![match &problem {
            Problem::Partial(p) => p.x,
            _ => 1.0,
        }]
    } else {
        args.x.clone()
    };
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("--x values must be finite".into()));
    }
    let (flag_paths, flag_dt, flag_seed) = match sim {
        Some(s) => (s.paths, s.dt, s.seed),
        None => (None, None, None),
    };
    let sim = SimConfig {
        n_paths: flag_paths.or(section.n_paths).unwrap_or(DEFAULT_PATHS),
        dt: flag_dt.or(section.dt).unwrap_or(DEFAULT_DT),
        seed: flag_seed.or(section.seed).unwrap_or(DEFAULT_SEED),
    };
    if sim.n_paths == 0 {
        return Err(Error::Argument("--paths must be positive".into()));
    }
    Ok(Resolved {
        source,
        problem,
        steps,
        xs,
        sim,
    })
}

struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value).map_err(std::io::Error::other)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    fn finish(mut self, command: &str, run: &Resolved) -> Result<()> {
        let manifest_name = format!("{command}_manifest.json");
        let mut parameters = RunConfig::from_problem(&run.problem);
        parameters.simulation = Some(SimulationSection {
            n_paths: Some(run.sim.n_paths),
            dt: Some(run.sim.dt),
            seed: Some(run.sim.seed),
        });
        let mut outputs = self.written.clone();
        outputs.push(manifest_name.clone());
        let manifest = RunManifest {
            command: command.into(),
            source: run.source.clone(),
            parameters,
            steps: run.steps,
            x: run.xs.clone(),
            seed: run.sim.seed,
            n_paths: run.sim.n_paths,
            dt: run.sim.dt,
            outputs,
            version: env!("CARGO_PKG_VERSION").into(),
        };
        self.write_json(&manifest_name, &manifest)
    }
}

fn solve_full(spec: &ProblemSpec, steps: usize) -> Result<(RiccatiSolution, FeedbackLaw)> {
    let sol = solve_riccati(spec, steps)?;
    let law = optimal_feedback(spec, &sol)?;
    Ok((sol, law))
}

fn solve_partial(
    spec: &PartialObsSpec,
    steps: usize,
) -> Result<(ProblemSpec, RiccatiSolution, FeedbackLaw)> {
    spec.validate()?;
    let reduced = reduced_problem(spec);
    let (sol, law) = solve_full(&reduced, steps)?;
    Ok((reduced, sol, law))
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(m
        .row_iter()
        .map(|r| r.iter().copied().collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

pub fn cmd_solve(args: &SolveArgs) -> Result<Outcome> {
    let run = resolve(args, None)?;
    let mut out = OutputDir::new(&args.out)?;
    let summary = match &run.problem {
        Problem::Full(spec) => {
            let (sol, law) = solve_full(spec, run.steps)?;
            out.write("solve_phi.csv", |w| sol.write_csv(w))?;
            out.write("solve_gains.csv", |w| law.write_csv(w))?;
            let values = run
                .xs
                .iter()
                .map(|&x| Ok(json!({"x": x, "value": value_function(&sol, 0.0, MeasureMoments::dirac(x))?})))
                .collect::<Result<Vec<_>>>()?;
            json!({
                "kind": "full",
                "phi0": sol.values()[0],
                "value": values[0]["value"],
                "values": values,
            })
        }
        Problem::Matrix(spec) => {
            let sol = solve_matrix_riccati(spec, run.steps)?;
            out.write("solve_phi.csv", |w| sol.write_csv(w))?;
            let p0 = &sol.values()[0];
            json!({
                "kind": "matrix",
                "dim": spec.dim(),
                "phi1_0": matrix_json(&p0.phi1),
                "phi2_0": matrix_json(&p0.phi2),
                "phi3_0": p0.phi3,
            })
        }
        Problem::Partial(spec) => {
            let (_, sol, law) = solve_partial(spec, run.steps)?;
            out.write("solve_phi.csv", |w| sol.write_csv(w))?;
            out.write("solve_gains.csv", |w| law.write_csv(w))?;
            let values: Vec<Value> = run
                .xs
                .iter()
                .map(|&x| {
                    let at_x = PartialObsSpec { x, ..spec.clone() };
                    Ok(json!({"x": x, "value": partial_value(&at_x, &sol)?}))
                })
                .collect::<Result<_>>()?;
            json!({
                "kind": "partial",
                "phi_s": sol.values()[0],
                "error_variance_T": error_variance(spec, spec.horizon)?,
                "value": values[0]["value"],
                "values": values,
            })
        }
    };
    out.write_json("solve_summary.json", &summary)?;
    out.finish("solve", &run)?;
    let mut text = format!("solved {} with {} steps\n", run.source, run.steps);
    if let Some(values) = summary["values"].as_array() {
        for v in values {
            text.push_str(&format!("v(0, delta_{}) = {}\n", v["x"], v["value"]));
        }
    }
    Ok(Outcome { text, exit_code: 0 })
}

fn within(mc: &CostReport, exact: f64, tolerance: f64) -> (f64, f64, bool) {
    let discrepancy = (mc.total - exact).abs();
    let threshold = 3.0 * mc.std_error + tolerance;
    (discrepancy, threshold, discrepancy <= threshold)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let run = resolve(&args.solve, Some(args))?;
    let mut out = OutputDir::new(&args.solve.out)?;
    let x = run.xs[0];
    let (value, oracle, mc) = match &run.problem {
        Problem::Full(spec) => {
            let (sol, law) = solve_full(spec, run.steps)?;
            let value = value_function(&sol, 0.0, MeasureMoments::dirac(x))?;
            let oracle = cost_oracle(spec, &law, x, x * x, run.steps)?;
            let particles =
                run_particles(spec, &law, &InitialLaw::Dirac(x), &run.sim, spec.horizon)?;
            out.write("simulate_trajectory.csv", |w| {
                write_trajectory_csv(&particles.trajectory, w)
            })?;
            (value, oracle, particles.report)
        }
        Problem::Partial(spec) => {
            let spec = PartialObsSpec { x, ..spec.clone() };
            let (reduced, sol, law) = solve_partial(&spec, run.steps)?;
            let value = partial_value(&spec, &sol)?;
            let hat_m2 = x * x + spec.eta_hat.powi(2) * spec.s;
            let hat = cost_oracle(&reduced, &law, x, hat_m2, run.steps)?;
            let hidden = spec.d1 * error_variance(&spec, spec.horizon)?;
            let oracle = CostReport {
                total: hat.total + hidden,
                terminal: hat.terminal + hidden,
                ..hat
            };
            let particles = run_partial(&spec, &law, &run.sim)?;
            out.write("simulate_trajectory.csv", |w| {
                write_filter_csv(&particles.trace, w)
            })?;
            (value, oracle, particles.report)
        }
        Problem::Matrix(_) => {
            return Err(Error::Argument(
                "simulate supports scalar problems only".into(),
            ));
        }
    };
    let (discrepancy, threshold, pass) = within(&mc, oracle.total, args.tolerance);
    let summary = json!({
        "x": x,
        "value": value,
        "oracle": oracle,
        "mc": mc,
        "discrepancy": discrepancy,
        "threshold": threshold,
        "tolerance": args.tolerance,
        "pass": pass,
    });
    out.write_json("simulate_summary.json", &summary)?;
    out.finish("simulate", &run)?;
    let text = format!(
        "value {value}\noracle {}\nmc {} +- {} ({} paths)\ndiscrepancy {discrepancy} (threshold {threshold}): {}\n",
        oracle.total,
        mc.total,
        mc.std_error,
        mc.n_paths,
        if pass { "ok" } else { "FAIL" }
    );
    Ok(Outcome {
        text,
        exit_code: if pass { 0 } else { 1 },
    })
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    fn at_least(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: measured >= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    fn failed(name: &str, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: detail.into(),
        }
    }
}

const PERTURBATION_MAGNITUDES: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

/// Random `(t, mu)` with `t` in `[lo, hi]`, `m1` in `[-2, 2]`, variance in `[0, 4]`.
fn residual_points(
    rng: &mut Xoshiro256PlusPlus,
    lo: f64,
    hi: f64,
    n: usize,
) -> Vec<(f64, MeasureMoments)> {
    (0..n)
        .map(|_| {
            let t = rng.random_range(lo..=hi);
            let m1 = rng.random_range(-2.0..=2.0);
            let var = rng.random_range(0.0..=4.0);
            (
                t,
                MeasureMoments {
                    m1,
                    m2: var + m1 * m1,
                },
            )
        })
        .collect()
}

fn residual_check(
    spec: &ProblemSpec,
    sol: &RiccatiSolution,
    rng: &mut Xoshiro256PlusPlus,
    out: &mut OutputDir,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let points = residual_points(rng, 0.1 * spec.horizon, 0.9 * spec.horizon, 100);
    let sweep = residual_sweep(spec, sol, &points)?;
    let worst = sweep.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
    out.write("verify_residuals.csv", |w| write_residual_csv(&sweep, w))?;
    checks.push(Check::at_most(
        "master_residual",
        worst,
        1e-6,
        "max |residual| over 100 random (t, mu)",
    ));
    Ok(())
}

fn verify_full(
    name: Option<&str>,
    spec: &ProblemSpec,
    run: &Resolved,
    args: &SimulateArgs,
    out: &mut OutputDir,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let validation = spec.validate(run.steps + 1);
    checks.push(Check {
        name: "validation".into(),
        passed: validation.is_pass(),
        measured: 0.0,
        threshold: 0.0,
        detail: format!("{validation:?}"),
    });
    let (sol, law) = match solve_full(spec, run.steps) {
        Ok(v) => v,
        Err(e) => {
            checks.push(Check::failed("riccati_solve", e.to_string()));
            return Ok(checks);
        }
    };
    checks.push(Check::at_least(
        "riccati_solve",
        1.0,
        1.0,
        format!("{} steps", run.steps),
    ));

    if let Some(preset) = name.filter(|n| matches!(*n, "example1" | "example2")) {
        let max_err = |sol: &RiccatiSolution| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for (&t, p) in sol.grid().iter().zip(sol.values()) {
                let a = analytic_riccati(preset, spec.horizon, t)?;
                worst = worst
                    .max((p.phi1 - a.phi1).abs())
                    .max((p.phi2 - a.phi2).abs())
                    .max((p.phi3 - a.phi3).abs());
            }
            Ok(worst)
        };
        let err = max_err(&solve_riccati(spec, 1000)?)?;
        checks.push(Check::at_most(
            "analytic_max_error",
            err,
            1e-8,
            "steps = 1000, max norm",
        ));
        let coarse = max_err(&solve_riccati(spec, 250)?)?;
        let fine = max_err(&solve_riccati(spec, 500)?)?;
        let factor = if fine > 0.0 {
            coarse / fine
        } else {
            f64::INFINITY
        };
        checks.push(Check::at_least(
            "rk4_convergence_factor",
            factor,
            12.0,
            "error(250) / error(500)",
        ));
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(run.sim.seed);
    residual_check(spec, &sol, &mut rng, out, &mut checks)?;

    let oracle_steps = 2 * run.steps;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = rng.random_range(-2.0..=2.0);
        let oracle = cost_oracle(spec, &law, x, x * x, oracle_steps)?;
        let value = value_function(&sol, 0.0, MeasureMoments::dirac(x))?;
        worst = worst.max((oracle.total - value).abs());
    }
    checks.push(Check::at_most(
        "oracle_vs_value",
        worst,
        1e-5,
        "20 random Dirac starts in [-2, 2]",
    ));

    let x0 = run.xs[0];
    let base = cost_oracle(spec, &law, x0, x0 * x0, oracle_steps)?.total;
    let mut min_margin = f64::INFINITY;
    let mut worst_exp: f64 = 0.0;
    let mut exps = Vec::new();
    for (gain, dir) in [("alpha", (1.0, 0.0)), ("beta", (0.0, 1.0))] {
        for sign in [1.0, -1.0] {
            let deltas: Vec<(f64, f64)> = PERTURBATION_MAGNITUDES
                .iter()
                .map(|m| (sign * m * dir.0, sign * m * dir.1))
                .collect();
            let sweep = perturbation_sweep(spec, &law, &deltas, x0, x0 * x0, oracle_steps)?;
            let margins: Vec<f64> = sweep.iter().map(|p| p.cost - base).collect();
            min_margin = margins.iter().copied().fold(min_margin, f64::min);
            match power_law_exponent(&PERTURBATION_MAGNITUDES, &margins) {
                Ok(e) => {
                    worst_exp = worst_exp.max((e - 2.0).abs());
                    exps.push(format!(
                        "{gain}{}: {e:.3}",
                        if sign > 0.0 { "+" } else { "-" }
                    ));
                }
                Err(_) => {
                    worst_exp = f64::INFINITY;
                    exps.push(format!("{gain}: non-positive margin"));
                }
            }
        }
    }
    checks.push(Check {
        name: "perturbation_optimality".into(),
        passed: min_margin > 0.0,
        measured: min_margin,
        threshold: 0.0,
        detail: "min J(u* + delta) - J(u*) over delta in +-{0.05,0.1,0.2,0.4} on each gain".into(),
    });
    checks.push(Check::at_most(
        "perturbation_exponent",
        worst_exp,
        0.2,
        format!("|exponent - 2|; {}", exps.join(", ")),
    ));

    let particles = run_particles(spec, &law, &InitialLaw::Dirac(x0), &run.sim, spec.horizon)?;
    let oracle = cost_oracle(spec, &law, x0, x0 * x0, oracle_steps)?;
    let (discrepancy, threshold, _) = within(&particles.report, oracle.total, args.tolerance);
    checks.push(Check::at_most(
        "mc_vs_oracle",
        discrepancy,
        threshold,
        format!(
            "mc {} +- {}, oracle {}",
            particles.report.total, particles.report.std_error, oracle.total
        ),
    ));

    match gaussianity_check(spec, &law, &InitialLaw::Dirac(x0), &run.sim, spec.horizon)? {
        Gaussianity::Moments {
            skewness,
            excess_kurtosis,
        } => {
            let passed = skewness.abs() < 0.05 && excess_kurtosis.abs() < 0.1;
            checks.push(Check {
                name: "gaussian_marginal".into(),
                passed,
                measured: skewness.abs().max(excess_kurtosis.abs() / 2.0),
                threshold: 0.05,
                detail: format!(
                    "skewness {skewness}, excess kurtosis {excess_kurtosis} (limits 0.05, 0.1)"
                ),
            });
        }
        Gaussianity::Degenerate => checks.push(Check {
            name: "gaussian_marginal".into(),
            passed: true,
            measured: 0.0,
            threshold: 0.05,
            detail: "degenerate cloud (all particles coincide)".into(),
        }),
    }
    Ok(checks)
}

fn verify_partial(
    name: Option<&str>,
    spec: &PartialObsSpec,
    run: &Resolved,
    args: &SimulateArgs,
    out: &mut OutputDir,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if let Err(e) = spec.validate() {
        checks.push(Check::failed("validation", e.to_string()));
        return Ok(checks);
    }
    checks.push(Check::at_least(
        "validation",
        1.0,
        1.0,
        "noise splits and window",
    ));
    let (reduced, sol, law) = match solve_partial(spec, run.steps) {
        Ok(v) => v,
        Err(e) => {
            checks.push(Check::failed("riccati_solve", e.to_string()));
            return Ok(checks);
        }
    };
    checks.push(Check::at_least(
        "riccati_solve",
        1.0,
        1.0,
        format!("{} steps on [s, T]", run.steps),
    ));

    if let Some(preset) = name.filter(|n| matches!(*n, "example3" | "example4")) {
        let mut worst: f64 = 0.0;
        for s in [0.0, 0.25, 0.5] {
            for x in [0.0, 1.0, 2.0] {
                let shifted = PartialObsSpec {
                    s,
                    x,
                    ..spec.clone()
                };
                let numeric = partial_value(
                    &shifted,
                    &solve_riccati(&reduced_problem(&shifted), run.steps)?,
                )?;
                let closed =
                    partial_value_from_phi(&shifted, analytic_partial_phi(preset, &shifted, s)?);
                worst = worst.max((numeric - closed).abs());
            }
        }
        checks.push(Check::at_most(
            "closed_form_consistency",
            worst,
            1e-6,
            "numeric vs closed-form phi, s in {0,.25,.5}, x in {0,1,2}",
        ));
    }

    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let values = grid
        .iter()
        .map(|&o| {
            let re = spec.reweighted(o)?;
            partial_value(&re, &solve_riccati(&reduced_problem(&re), run.steps)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    if spec.d1 > 0.0 {
        let worst_step = values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check {
            name: "observability_monotone".into(),
            passed: worst_step < 0.0,
            measured: worst_step,
            threshold: 0.0,
            detail: format!("V* over sigma_hat^2 in {grid:?}: {values:?}"),
        });
    } else if spec.d1 == 0.0 {
        let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most(
            "observability_invariance",
            spread,
            1e-10,
            format!("V* over sigma_hat^2 in {grid:?}"),
        ));
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(run.sim.seed);
    residual_check(&reduced, &sol, &mut rng, out, &mut checks)?;

    let at_x = PartialObsSpec {
        x: run.xs[0],
        ..spec.clone()
    };
    let value = partial_value(&at_x, &sol)?;
    let particles = run_partial(&at_x, &law, &run.sim)?;
    let (discrepancy, threshold, _) = within(&particles.report, value, args.tolerance);
    checks.push(Check::at_most(
        "mc_vs_value",
        discrepancy,
        threshold,
        format!(
            "mc {} +- {}, V* {value}",
            particles.report.total, particles.report.std_error
        ),
    ));

    let d = decomposition_of(&at_x, &particles);
    let limit = if d.std_error > 0.0 {
        3.0 * d.std_error
    } else {
        1e-12
    };
    checks.push(Check::at_most(
        "cost_decomposition",
        d.defect.abs(),
        limit,
        format!("J {} J^ {} D1 P_T {}", d.j, d.j_hat, d.d1_pt),
    ));

    let corr = correlation(&particles.errors, &particles.predictions).abs();
    checks.push(Check::at_most(
        "error_independence",
        corr,
        3.0 / (run.sim.n_paths as f64).sqrt(),
        "|corr(E_T, X^_T)|",
    ));

    if spec.d1 == 0.0 {
        let mut totals = Vec::new();
        for o in [0.25, 1.0] {
            let re = at_x.reweighted(o)?;
            let (_, _, law) = solve_partial(&re, run.steps)?;
            totals.push(run_partial(&re, &law, &run.sim)?.report);
        }
        let diff = (totals[0].total - totals[1].total).abs();
        let threshold = 3.0 * totals[0].std_error.hypot(totals[1].std_error) + 2.0 * args.tolerance;
        checks.push(Check::at_most(
            "mc_observability_invariance",
            diff,
            threshold,
            format!(
                "MC totals at sigma_hat^2 = 0.25, 1: {}, {}",
                totals[0].total, totals[1].total
            ),
        ));
    }
    Ok(checks)
}

fn verify_matrix(spec: &MatrixProblemSpec, run: &Resolved) -> Vec<Check> {
    let mut checks = Vec::new();
    let validation = spec.validate(run.steps + 1);
    checks.push(Check {
        name: "validation".into(),
        passed: validation.is_pass(),
        measured: 0.0,
        threshold: 0.0,
        detail: format!("{validation:?}"),
    });
    match solve_matrix_riccati(spec, run.steps) {
        Ok(sol) => {
            checks.push(Check::at_least(
                "riccati_solve",
                1.0,
                1.0,
                format!("{} steps", run.steps),
            ));
            let asym = sol
                .values()
                .iter()
                .map(|p| {
                    (&p.phi1 - p.phi1.transpose())
                        .amax()
                        .max((&p.phi2 - p.phi2.transpose()).amax())
                })
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                "symmetry",
                asym,
                0.0,
                "max |Phi - Phi'| over the grid",
            ));
            let last = sol.values().last().expect("non-empty");
            let exact = last.phi1 == spec.d1.0 && last.phi2 == spec.d2.0 && last.phi3 == 0.0;
            checks.push(Check {
                name: "terminal_condition".into(),
                passed: exact,
                measured: if exact { 0.0 } else { 1.0 },
                threshold: 0.0,
                detail: "(Phi1, Phi2, phi3)(T) == (D1, D2, 0)".into(),
            });
        }
        Err(e) => checks.push(Check::failed("riccati_solve", e.to_string())),
    }
    checks
}

pub fn cmd_verify(args: &SimulateArgs) -> Result<Outcome> {
    let run = resolve(&args.solve, Some(args))?;
    let mut out = OutputDir::new(&args.solve.out)?;
    let name = args.solve.source.preset.as_deref();
    let checks = match &run.problem {
        Problem::Full(spec) => verify_full(name, spec, &run, args, &mut out)?,
        Problem::Partial(spec) => verify_partial(name, spec, &run, args, &mut out)?,
        Problem::Matrix(spec) => verify_matrix(spec, &run),
    };
    let passed = checks.iter().all(|c| c.passed);
    out.write_json(
        "verify_report.json",
        &json!({"source": run.source, "passed": passed, "checks": checks}),
    )?;
    out.finish("verify", &run)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!(
            "{} {}: measured {:.4e} threshold {:.4e} ({})\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        ));
    }
    text.push_str(if passed {
        "all checks passed\n"
    } else {
        "verification FAILED\n"
    });
    Ok(Outcome {
        text,
        exit_code: if passed { 0 } else { 1 },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub run: String,
    pub command: String,
    pub source: String,
    pub seed: u64,
    pub value: Option<f64>,
    pub oracle: Option<f64>,
    pub mc: Option<f64>,
    pub mc_std_error: Option<f64>,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        field: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn report_rows(manifests: &[PathBuf]) -> Result<Vec<ReportRow>> {
    if manifests.is_empty() {
        return Err(Error::Argument("report needs at least one manifest".into()));
    }
    manifests
        .iter()
        .map(|path| {
            let manifest: RunManifest =
                serde_json::from_value(read_json(path)?).map_err(|e| Error::Parse {
                    field: path.display().to_string(),
                    detail: e.to_string(),
                })?;
            let dir = path.parent().unwrap_or(Path::new("."));
            for name in &manifest.outputs {
                let p = dir.join(name);
                if !p.exists() {
                    return Err(Error::io(
                        &p,
                        std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "listed output is missing",
                        ),
                    ));
                }
            }
            let summary_name = format!("{}_summary.json", manifest.command);
            let summary = if manifest.outputs.contains(&summary_name) {
                read_json(&dir.join(&summary_name))?
            } else {
                Value::Null
            };
            Ok(ReportRow {
                run: path.display().to_string(),
                command: manifest.command,
                source: manifest.source,
                seed: manifest.seed,
                value: summary["value"].as_f64(),
                oracle: summary["oracle"]["total"].as_f64(),
                mc: summary["mc"]["total"].as_f64(),
                mc_std_error: summary["mc"]["std_error"].as_f64(),
            })
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn cmd_report(args: &ReportArgs) -> Result<Outcome> {
    let rows = report_rows(&args.manifests)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut csv = String::from("run,command,source,seed,value,oracle,mc,mc_std_error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.run,
            r.command,
            r.source,
            r.seed,
            cell(r.value),
            cell(r.oracle),
            cell(r.mc),
            cell(r.mc_std_error)
        ));
    }
    let path = args.out.join("report.csv");
    fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
    let mut text = format!(
        "{:<40} {:<9} {:>6} {:>10} {:>10} {:>22}\n",
        "run", "command", "seed", "value", "oracle", "mc"
    );
    for r in &rows {
        let mc = match (r.mc, r.mc_std_error) {
            (Some(m), Some(e)) => format!("{m:.6} +- {e:.6}"),
            _ => "-".into(),
        };
        text.push_str(&format!(
            "{:<40} {:<9} {:>6} {:>10} {:>10} {:>22}\n",
            r.run,
            r.command,
            r.seed,
            fmt(r.value),
            fmt(r.oracle),
            mc
        ));
    }
    Ok(Outcome { text, exit_code: 0 })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print one `error[<category>]: <message>` line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first: Vec<&str> = rendered
                .lines()
                .map(str::trim)
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
                .collect();
            eprintln!(
                "error[usage]: {}",
                first.join(" ").trim_start_matches("error: ")
            );
            return 2;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let _ = std::io::stdout().write_all(outcome.text.as_bytes());
            outcome.exit_code
        }
        Err(e) => {
            eprintln!(
                "error[{}]: {}",
                e.category(),
                e.to_string().replace('\n', " ")
            );
            2
        }
    }
}
