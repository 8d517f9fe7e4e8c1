//! Partially observed problem solved by separation.
//!
//! The state is driven by two independent Brownian motions,
//!
//! ```text
//! X_t = X_s + int_s^t u dr + sigma_hat (W^_t - W^_s) + sigma_tilde (W~_t - W~_s)
//! X_s = x + eta_hat W^_s + eta_tilde W~_s
//! ```
//!
//! and the controller only sees `W^`. Controls act on the prediction
//! `X^_t = E[X_t | W^]`, whose error `E_t = X_t - X^_t` has variance
//! `P_t = eta_tilde^2 s + sigma_tilde^2 (t - s)` regardless of the control.
//! The cost splits as `J = J^ + D1 P_T` and `J^` is a fully observed problem
//! with `A = 0, B = 1, sigma = sigma_hat, Q = 1`.
//!
//! Time convention: the reduced problem lives on `[0, T - s]`; an absolute time
//! `t` in `[s, T]` corresponds to `t - s` there. Every function taking or
//! returning a solution of the reduced problem uses the shifted clock.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::FeedbackLaw;
use crate::error::{Error, Result};
use crate::model::{moments_of, CoefficientFn, ProblemSpec};
use crate::riccati::{Phi, RiccatiSolution};
use crate::simulate::{mean_and_std_error, substream, CostReport, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialObsSpec {
    pub sigma_hat: f64,
    pub sigma_tilde: f64,
    pub eta_hat: f64,
    pub eta_tilde: f64,
    /// Initial time.
    pub s: f64,
    /// Initial mean.
    pub x: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
}

const SPLIT_TOLERANCE: f64 = 1e-12;

impl PartialObsSpec {
    /// Observable share `sigma_hat^2 = observability`; the hidden share takes
    /// the rest. The initial noise is split evenly.
    pub fn with_observability(observability: f64, d1: f64, d2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&observability) {
            return Err(Error::Argument(format!(
                "sigma_hat^2 must lie in [0, 1], got {observability}"
            )));
        }
        let spec = PartialObsSpec {
            sigma_hat: observability.sqrt(),
            sigma_tilde: (1.0 - observability).sqrt(),
            eta_hat: 0.5_f64.sqrt(),
            eta_tilde: 0.5_f64.sqrt(),
            s: 0.0,
            x: 1.0,
            horizon: 1.0,
            d1,
            d2,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `(D1, D2) = (1, 0)`, terminal cost linear in the measure.
    pub fn example3() -> Self {
        Self::with_observability(0.5, 1.0, 0.0).expect("valid preset")
    }

    /// `(D1, D2) = (0, 1)`, terminal cost quadratic in the measure.
    pub fn example4() -> Self {
        Self::with_observability(0.5, 0.0, 1.0).expect("valid preset")
    }

    /// The same problem with the diffusion split moved to `sigma_hat^2 = observability`.
    pub fn reweighted(&self, observability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&observability) {
            return Err(Error::Argument(format!(
                "sigma_hat^2 must lie in [0, 1], got {observability}"
            )));
        }
        Ok(PartialObsSpec {
            sigma_hat: observability.sqrt(),
            sigma_tilde: (1.0 - observability).sqrt(),
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.sigma_hat,
            self.sigma_tilde,
            self.eta_hat,
            self.eta_tilde,
            self.s,
            self.x,
            self.horizon,
            self.d1,
            self.d2,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(
                "partial-observation parameters must be finite".into(),
            ));
        }
        if [
            self.sigma_hat,
            self.sigma_tilde,
            self.eta_hat,
            self.eta_tilde,
        ]
        .iter()
        .any(|v| *v < 0.0)
        {
            return Err(Error::Assumption {
                assumption: "nonnegative noise splits",
                detail: "sigma_hat, sigma_tilde, eta_hat, eta_tilde must be >= 0".into(),
            });
        }
        let sigma_sum = self.sigma_hat.powi(2) + self.sigma_tilde.powi(2);
        if (sigma_sum - 1.0).abs() > SPLIT_TOLERANCE {
            return Err(Error::Assumption {
                assumption: "sigma_hat^2 + sigma_tilde^2 = 1",
                detail: format!("sum is {sigma_sum}"),
            });
        }
        let eta_sum = self.eta_hat.powi(2) + self.eta_tilde.powi(2);
        if (eta_sum - 1.0).abs() > SPLIT_TOLERANCE {
            return Err(Error::Assumption {
                assumption: "eta_hat^2 + eta_tilde^2 = 1",
                detail: format!("sum is {eta_sum}"),
            });
        }
        if !(0.0 <= self.s && self.s < self.horizon) {
            return Err(Error::Assumption {
                assumption: "0 <= s < T",
                detail: format!("s = {}, T = {}", self.s, self.horizon),
            });
        }
        Ok(())
    }

    /// Length of the control window `T - s`.
    pub fn duration(&self) -> f64 {
        self.horizon - self.s
    }
}

/// `P_t = eta_tilde^2 s + sigma_tilde^2 (t - s)` for `t` in `[s, T]`.
pub fn error_variance(spec: &PartialObsSpec, t: f64) -> Result<f64> {
    if !(spec.s..=spec.horizon).contains(&t) {
        return Err(Error::Domain {
            t,
            lo: spec.s,
            hi: spec.horizon,
        });
    }
    Ok(spec.eta_tilde.powi(2) * spec.s + spec.sigma_tilde.powi(2) * (t - spec.s))
}

/// Fully observed problem for the prediction process on the shifted
/// horizon `[0, T - s]`.
pub fn reduced_problem(spec: &PartialObsSpec) -> ProblemSpec {
    ProblemSpec {
        a: CoefficientFn::Constant(0.0),
        b: CoefficientFn::Constant(1.0),
        sigma: CoefficientFn::Constant(spec.sigma_hat),
        q: CoefficientFn::Constant(1.0),
        d1: spec.d1,
        d2: spec.d2,
        horizon: spec.duration(),
    }
}

/// Optimal value from `phi(s)` (shifted time 0 of `sol`):
///
/// ```text
/// V* = phi1(s)(x^2 + eta_hat^2 s) + phi2(s) x^2 + phi3(s)
///      + D1 (eta_tilde^2 s + sigma_tilde^2 (T - s))
/// ```
pub fn partial_value(spec: &PartialObsSpec, sol: &RiccatiSolution) -> Result<f64> {
    if (sol.horizon() - sol.start() - spec.duration()).abs() > 1e-9 * spec.duration().max(1.0) {
        return Err(Error::Argument(format!(
            "solution spans {} but the control window is {}",
            sol.horizon() - sol.start(),
            spec.duration()
        )));
    }
    Ok(partial_value_from_phi(spec, sol.sample(sol.start())?))
}

/// [`partial_value`] given `phi(s)` directly.
pub fn partial_value_from_phi(spec: &PartialObsSpec, phi_s: Phi) -> f64 {
    let x2 = spec.x * spec.x;
    phi_s.phi1 * (x2 + spec.eta_hat.powi(2) * spec.s)
        + phi_s.phi2 * x2
        + phi_s.phi3
        + spec.d1 * (spec.eta_tilde.powi(2) * spec.s + spec.sigma_tilde.powi(2) * spec.duration())
}

/// Closed-form `phi(t)` on absolute time `t` in `[s, T]`:
/// example3 `(1/(1+T-t), 0, sigma_hat^2 ln(1+T-t))`, example4 `(0, 1/(1+T-t), 0)`.
pub fn analytic_partial_phi(preset: &str, spec: &PartialObsSpec, t: f64) -> Result<Phi> {
    if !(spec.s..=spec.horizon).contains(&t) {
        return Err(Error::Domain {
            t,
            lo: spec.s,
            hi: spec.horizon,
        });
    }
    let tau = 1.0 + spec.horizon - t;
    match preset {
        "example3" => Ok(Phi::new(1.0 / tau, 0.0, spec.sigma_hat.powi(2) * tau.ln())),
        "example4" => Ok(Phi::new(0.0, 1.0 / tau, 0.0)),
        other => Err(Error::Argument(format!(
            "no closed-form partial-observation solution for '{other}'"
        ))),
    }
}

/// One row of the filter trace, on absolute time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPoint {
    pub t: f64,
    pub error_variance: f64,
    pub m1_hat: f64,
    pub m2_hat: f64,
    pub m2: f64,
}

pub fn write_filter_csv<W: Write>(points: &[FilterPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,P,m1_hat,m2_hat,m2")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.t, p.error_variance, p.m1_hat, p.m2_hat, p.m2
        )?;
    }
    Ok(())
}

/// Output of a paired `(X, X^)` particle run.
#[derive(Clone, Debug)]
pub struct PartialRun {
    /// Cost `J` evaluated on the state cloud.
    pub report: CostReport,
    /// Cost `J^` evaluated on the prediction cloud with the same controls.
    pub hat_report: CostReport,
    pub trace: Vec<FilterPoint>,
    /// Terminal predictions `X^_T`.
    pub predictions: Vec<f64>,
    /// Terminal errors `E_T = X_T - X^_T`.
    pub errors: Vec<f64>,
    /// Largest cross-sectional range `max u - min u` of the realized control over all steps.
    pub control_spread: f64,
}

/// Simulates the prediction `X^` (driven by `W^` only) and the error `E`
/// (driven by `W~` only) with one generator per path and noise source.
/// The control `u = alpha X^ + beta mean(X^)` follows `law` on the shifted
/// clock `[0, T - s]`.
pub fn run_partial(
    spec: &PartialObsSpec,
    law: &FeedbackLaw,
    config: &SimConfig,
) -> Result<PartialRun> {
    spec.validate()?;
    let steps = config.steps_for(spec.duration())?;
    let n = config.n_paths;
    let mut hat_rngs: Vec<_> = (0..n)
        .map(|p| substream(config.seed, p as u64, 1))
        .collect();
    let mut tilde_rngs: Vec<_> = (0..n)
        .map(|p| substream(config.seed, p as u64, 2))
        .collect();
    let initial_sd = spec.s.sqrt();
    let mut hat: Vec<f64> = hat_rngs
        .iter_mut()
        .map(|rng| {
            let z: f64 = StandardNormal.sample(rng);
            spec.x + spec.eta_hat * initial_sd * z
        })
        .collect();
    let mut err: Vec<f64> = tilde_rngs
        .iter_mut()
        .map(|rng| {
            let z: f64 = StandardNormal.sample(rng);
            spec.eta_tilde * initial_sd * z
        })
        .collect();
    let mut running = vec![0.0; n];
    let mut trace = Vec::with_capacity(steps + 1);
    let mut control_spread: f64 = 0.0;
    let sqrt_dt = config.dt.sqrt();
    let record = |tau: f64, hat: &[f64], err: &[f64]| -> Result<FilterPoint> {
        let mh = moments_of(hat)?;
        let m2 = hat
            .iter()
            .zip(err)
            .map(|(h, e)| (h + e) * (h + e))
            .sum::<f64>()
            / hat.len() as f64;
        let t = spec.s + tau;
        Ok(FilterPoint {
            t,
            error_variance: error_variance(spec, t.min(spec.horizon))?,
            m1_hat: mh.m1,
            m2_hat: mh.m2,
            m2,
        })
    };

    for k in 0..steps {
        let tau = k as f64 * config.dt;
        let point = record(tau, &hat, &err)?;
        trace.push(point);
        let (alpha, beta) = law.gains(tau)?;
        let shared = beta * point.m1_hat;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut finite = true;
        for (((xh, e), cost), (rh, rt)) in hat
            .iter_mut()
            .zip(err.iter_mut())
            .zip(running.iter_mut())
            .zip(hat_rngs.iter_mut().zip(tilde_rngs.iter_mut()))
        {
            let u = alpha * *xh + shared;
            lo = lo.min(u);
            hi = hi.max(u);
            *cost += u * u * config.dt;
            let zh: f64 = StandardNormal.sample(rh);
            let zt: f64 = StandardNormal.sample(rt);
            *xh += u * config.dt + spec.sigma_hat * sqrt_dt * zh;
            *e += spec.sigma_tilde * sqrt_dt * zt;
            finite &= xh.is_finite();
        }
        if !finite {
            return Err(Error::SimulationDivergence {
                time: spec.s + tau + config.dt,
            });
        }
        control_spread = control_spread.max(hi - lo);
    }
    trace.push(record(spec.duration(), &hat, &err)?);

    let state: Vec<f64> = hat.iter().zip(&err).map(|(h, e)| h + e).collect();
    let running_mean = running.iter().sum::<f64>() / n as f64;
    let cost_on = |cloud: &[f64]| -> Result<CostReport> {
        let m = moments_of(cloud)?;
        let terminal = spec.d1 * m.m2 + spec.d2 * m.m1 * m.m1;
        let contributions: Vec<f64> = cloud
            .iter()
            .zip(&running)
            .map(|(x, r)| r + spec.d1 * x * x + 2.0 * spec.d2 * m.m1 * x)
            .collect();
        let (_, std_error) = mean_and_std_error(&contributions);
        Ok(CostReport {
            total: running_mean + terminal,
            running: running_mean,
            terminal,
            std_error,
            n_paths: n,
        })
    };
    Ok(PartialRun {
        report: cost_on(&state)?,
        hat_report: cost_on(&hat)?,
        trace,
        predictions: hat,
        errors: err,
        control_spread,
    })
}

/// Monte Carlo estimate of `J(law)` for the partially observed problem.
pub fn simulate_partial(
    spec: &PartialObsSpec,
    law: &FeedbackLaw,
    config: &SimConfig,
) -> Result<CostReport> {
    Ok(run_partial(spec, law, config)?.report)
}

/// Simulated check of `J = J^ + D1 P_T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub j: f64,
    pub j_hat: f64,
    pub d1_pt: f64,
    /// `J - J^ - D1 P_T`.
    pub defect: f64,
    /// Delta-method standard error of the defect estimator.
    pub std_error: f64,
}

pub fn cost_decomposition_check(
    spec: &PartialObsSpec,
    law: &FeedbackLaw,
    config: &SimConfig,
) -> Result<Decomposition> {
    let run = run_partial(spec, law, config)?;
    Ok(decomposition_of(spec, &run))
}

pub(crate) fn decomposition_of(spec: &PartialObsSpec, run: &PartialRun) -> Decomposition {
    let d1_pt = spec.d1 * error_variance(spec, spec.horizon).expect("T lies in [s, T]");
    let m1_hat = run.predictions.iter().sum::<f64>() / run.predictions.len() as f64;
    // J - J^ = D1 mean(E^2 + 2 E X^) + D2 (mean(X)^2 - mean(X^)^2), linearised
    let per_path: Vec<f64> = run
        .predictions
        .iter()
        .zip(&run.errors)
        .map(|(h, e)| spec.d1 * (e * e + 2.0 * e * h) + 2.0 * spec.d2 * m1_hat * e)
        .collect();
    let (_, std_error) = mean_and_std_error(&per_path);
    Decomposition {
        j: run.report.total,
        j_hat: run.hat_report.total,
        d1_pt,
        defect: run.report.total - run.hat_report.total - d1_pt,
        std_error,
    }
}

/// Sample correlation of two equally long series; zero when either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::optimal_feedback;
    use crate::riccati::solve_riccati;

    fn spec(sh2: f64, eta_t2: f64, s: f64) -> PartialObsSpec {
        PartialObsSpec {
            sigma_hat: sh2.sqrt(),
            sigma_tilde: (1.0 - sh2).sqrt(),
            eta_hat: (1.0 - eta_t2).sqrt(),
            eta_tilde: eta_t2.sqrt(),
            s,
            x: 1.0,
            horizon: 1.0,
            d1: 1.0,
            d2: 0.0,
        }
    }

    #[test]
    fn error_variance_examples() {
        let full = spec(1.0, 0.0, 0.3);
        assert_eq!(error_variance(&full, 0.8).unwrap(), 0.0);
        let hidden = spec(0.0, 0.0, 0.0);
        assert_eq!(error_variance(&hidden, 1.0).unwrap(), 1.0);
        let mixed = spec(0.75, 0.5, 0.5);
        assert!((error_variance(&mixed, 1.0).unwrap() - 0.375).abs() < 1e-15);
        assert!(matches!(
            error_variance(&mixed, 0.4),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn validation() {
        assert!(PartialObsSpec::example3().validate().is_ok());
        let mut bad = PartialObsSpec::example3();
        bad.sigma_hat = 0.9;
        assert!(bad.validate().is_err());
        let mut bad = PartialObsSpec::example3();
        bad.s = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = PartialObsSpec::example3();
        bad.eta_tilde = -bad.eta_tilde;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reduced_problem_parameters() {
        let ex3 = PartialObsSpec::example3();
        let r = reduced_problem(&ex3);
        assert_eq!(r.sigma, CoefficientFn::Constant(ex3.sigma_hat));
        assert_eq!((r.d1, r.d2), (1.0, 0.0));
        assert!(r.validate(100).is_pass());
        let mut shifted = spec(0.5, 0.5, 0.25);
        shifted.horizon = 2.0;
        assert_eq!(reduced_problem(&shifted).horizon, 1.75);
    }

    #[test]
    fn fully_observable_embedding_is_example1() {
        let full = PartialObsSpec {
            sigma_hat: 1.0,
            sigma_tilde: 0.0,
            eta_hat: 1.0,
            eta_tilde: 0.0,
            ..PartialObsSpec::example3()
        };
        assert_eq!(reduced_problem(&full), ProblemSpec::example1(1.0));
    }

    #[test]
    fn example3_value_at_zero() {
        let ex3 = PartialObsSpec::example3();
        let sol = solve_riccati(&reduced_problem(&ex3), 1000).unwrap();
        let v = partial_value(&ex3, &sol).unwrap();
        let expected = 0.5 + 0.5 * 2.0_f64.ln() + 0.5;
        assert!((v - expected).abs() < 1e-8);
    }

    #[test]
    fn example4_value_with_shift() {
        for s in [0.0, 0.25, 0.5] {
            let mut ex4 = PartialObsSpec::example4();
            ex4.s = s;
            let sol = solve_riccati(&reduced_problem(&ex4), 1000).unwrap();
            let v = partial_value(&ex4, &sol).unwrap();
            assert!((v - 1.0 / (2.0 - s)).abs() < 1e-8);
        }
    }

    #[test]
    fn analytic_phi_presets() {
        let ex3 = PartialObsSpec::example3();
        assert_eq!(
            analytic_partial_phi("example3", &ex3, 1.0).unwrap(),
            Phi::new(1.0, 0.0, 0.0)
        );
        assert_eq!(
            analytic_partial_phi("example4", &PartialObsSpec::example4(), 1.0).unwrap(),
            Phi::new(0.0, 1.0, 0.0)
        );
        let p = analytic_partial_phi("example3", &ex3, 0.0).unwrap();
        assert!((p.phi1 - 0.5).abs() < 1e-15);
        assert!((p.phi3 - 0.5 * 2.0_f64.ln()).abs() < 1e-15);
        assert!(analytic_partial_phi("example1", &ex3, 0.0).is_err());
    }

    #[test]
    fn partial_value_rejects_mismatched_window() {
        let mut ex3 = PartialObsSpec::example3();
        ex3.s = 0.5;
        let sol = solve_riccati(&reduced_problem(&PartialObsSpec::example3()), 100).unwrap();
        assert!(partial_value(&ex3, &sol).is_err());
    }

    #[test]
    fn no_hidden_noise_gives_zero_defect() {
        let full = PartialObsSpec {
            sigma_hat: 1.0,
            sigma_tilde: 0.0,
            eta_hat: 1.0,
            eta_tilde: 0.0,
            s: 0.2,
            ..PartialObsSpec::example3()
        };
        let sol = solve_riccati(&reduced_problem(&full), 800).unwrap();
        let law = optimal_feedback(&reduced_problem(&full), &sol).unwrap();
        let d = cost_decomposition_check(&full, &law, &SimConfig::new(500, 0.01, 5)).unwrap();
        assert!(d.defect.abs() <= 1e-12, "{d:?}");
        assert_eq!(d.d1_pt, 0.0);
    }

    #[test]
    fn deterministic_prediction_gives_common_control() {
        let corner = PartialObsSpec {
            sigma_hat: 0.0,
            sigma_tilde: 1.0,
            ..PartialObsSpec::example3()
        };
        let reduced = reduced_problem(&corner);
        let law = optimal_feedback(&reduced, &solve_riccati(&reduced, 1000).unwrap()).unwrap();
        let run = run_partial(&corner, &law, &SimConfig::new(1000, 0.01, 9)).unwrap();
        assert_eq!(run.control_spread, 0.0);
    }

    #[test]
    fn filter_trace_shape() {
        let ex3 = PartialObsSpec::example3();
        let reduced = reduced_problem(&ex3);
        let law = optimal_feedback(&reduced, &solve_riccati(&reduced, 100).unwrap()).unwrap();
        let run = run_partial(&ex3, &law, &SimConfig::new(100, 0.01, 1)).unwrap();
        assert_eq!(run.trace.len(), 101);
        assert_eq!(run.trace[100].t, 1.0);
        assert!((run.trace[100].error_variance - 0.5).abs() < 1e-15);
        let mut buf = Vec::new();
        write_filter_csv(&run.trace, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("t,P,m1_hat,m2_hat,m2\n"));
    }

    #[test]
    fn correlation_basics() {
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert_eq!(correlation(&[1.0, 1.0], &[0.0, 5.0]), 0.0);
    }
}
