//! Cost evaluation for linear feedback laws.
//!
//! Two evaluators that share no code path: [`cost_oracle`] integrates the
//! closed ODEs for the first two moments, [`simulate_mc`] runs an interacting
//! particle system with Euler-Maruyama steps and couples particles through the
//! empirical mean.

use std::io::Write;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::control::FeedbackLaw;
use crate::error::{Error, Result};
use crate::model::{moments_of, ParticleCloud, ProblemSpec};
use crate::ode::{self, SweepError};
use crate::riccati::ESCAPE_BOUND;

/// Monte Carlo settings. The scheme is always Euler-Maruyama.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        SimConfig { n_paths, dt, seed }
    }

    /// Number of uniform steps covering `duration`; fails unless `dt`
    /// divides it to 1e-12 relative accuracy.
    pub fn steps_for(&self, duration: f64) -> Result<usize> {
        if self.n_paths == 0 {
            return Err(Error::Argument("n_paths must be positive".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Argument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if duration == 0.0 {
            return Ok(0);
        }
        let ratio = duration / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || ((ratio - steps) / steps).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "dt = {} does not divide the horizon {duration}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Estimated or exact cost of a policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub running: f64,
    pub terminal: f64,
    /// Zero for the deterministic oracle.
    pub std_error: f64,
    pub n_paths: usize,
}

/// Law of the initial state.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    /// Every particle starts exactly at `x`.
    Dirac(f64),
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Particles start at the given positions, recycled cyclically when
    /// more paths than positions are requested.
    Cloud(ParticleCloud),
}

impl InitialLaw {
    fn sample(&self, path: usize, rng: &mut Xoshiro256PlusPlus) -> f64 {
        match self {
            InitialLaw::Dirac(x) => *x,
            InitialLaw::Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            InitialLaw::Cloud(cloud) => cloud.states()[path % cloud.len()],
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            InitialLaw::Gaussian { variance, .. } if !(*variance >= 0.0) => Err(Error::Argument(
                format!("negative initial variance {variance}"),
            )),
            _ => Ok(()),
        }
    }

    /// `(m1, m2)` of the initial law (exact, or of the cloud).
    pub fn moments(&self) -> (f64, f64) {
        match self {
            InitialLaw::Dirac(x) => (*x, x * x),
            InitialLaw::Gaussian { mean, variance } => (*mean, variance + mean * mean),
            InitialLaw::Cloud(c) => {
                let m = c.moments();
                (m.m1, m.m2)
            }
        }
    }
}

/// Seed for substream `stream` of path `path`: a splitmix64 hash of the
/// triple, so every path owns an independent generator regardless of the
/// order in which paths are visited.
pub(crate) fn substream(seed: u64, path: u64, stream: u64) -> Xoshiro256PlusPlus {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    Xoshiro256PlusPlus::seed_from_u64(mix(mix(mix(seed) ^ path) ^ stream))
}

/// Exact cost of `law` from initial moments `(m1_0, m2_0)`.
///
/// Under `dX = (A X + B (alpha X + beta m1)) dt + sigma dW`:
///
/// ```text
/// m1' = (A + B (alpha + beta)) m1
/// m2' = 2 (A + B alpha) m2 + 2 B beta m1^2 + sigma^2
/// running cost rate = Q (alpha^2 m2 + (2 alpha beta + beta^2) m1^2)
/// ```
///
/// integrated with RK4 on `steps` uniform steps.
pub fn cost_oracle(
    spec: &ProblemSpec,
    law: &FeedbackLaw,
    m1_0: f64,
    m2_0: f64,
    steps: usize,
) -> Result<CostReport> {
    if steps < 1 {
        return Err(Error::Argument("oracle needs at least one step".into()));
    }
    if !m1_0.is_finite() || !m2_0.is_finite() || m2_0 - m1_0 * m1_0 < -1e-12 * m2_0.abs().max(1.0) {
        return Err(Error::Argument(format!(
            "initial moments ({m1_0}, {m2_0}) violate m2 >= m1^2"
        )));
    }
    let nodes = ode::uniform_nodes(spec.horizon, steps);
    let states = ode::rk4_forward(
        &nodes,
        [m1_0, m2_0, 0.0],
        ESCAPE_BOUND,
        |t, y: &[f64; 3]| {
            let c = spec.coefficients(t)?;
            let (alpha, beta) = law.gains(t)?;
            let [m1, m2, _] = *y;
            Ok::<_, Error>([
                (c.a + c.b * (alpha + beta)) * m1,
                2.0 * (c.a + c.b * alpha) * m2 + 2.0 * c.b * beta * m1 * m1 + c.sigma * c.sigma,
                c.q * (alpha * alpha * m2 + (2.0 * alpha * beta + beta * beta) * m1 * m1),
            ])
        },
    )
    .map_err(|e| match e {
        SweepError::Rhs(e) => e,
        SweepError::Escape(time) => Error::SimulationDivergence { time },
    })?;
    let [m1, m2, running] = states[states.len() - 1];
    let terminal = spec.d1 * m2 + spec.d2 * m1 * m1;
    Ok(CostReport {
        total: running + terminal,
        running,
        terminal,
        std_error: 0.0,
        n_paths: 0,
    })
}

/// Empirical moments of the particle system at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Writes `t,m1,m2` rows.
pub fn write_trajectory_csv<W: Write>(
    points: &[TrajectoryPoint],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "t,m1,m2")?;
    for p in points {
        writeln!(out, "{},{},{}", p.t, p.m1, p.m2)?;
    }
    Ok(())
}

/// Full output of a particle run.
#[derive(Clone, Debug)]
pub struct ParticleRun {
    pub report: CostReport,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Particle positions at the final time.
    pub states: Vec<f64>,
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Euler-Maruyama run of `n_paths` interacting particles up to `until`.
///
/// Each step first reduces the cloud to its empirical mean, then moves every
/// particle with `u_i = alpha x_i + beta mean`. The running cost is the
/// left-endpoint sum of `Q u_i^2 dt` per path.
pub fn run_particles(
    spec: &ProblemSpec,
    law: &FeedbackLaw,
    initial: &InitialLaw,
    config: &SimConfig,
    until: f64,
) -> Result<ParticleRun> {
    initial.check()?;
    if !(0.0..=spec.horizon).contains(&until) {
        return Err(Error::Domain {
            t: until,
            lo: 0.0,
            hi: spec.horizon,
        });
    }
    let steps = config.steps_for(until)?;
    let n = config.n_paths;
    let mut rngs: Vec<Xoshiro256PlusPlus> = (0..n)
        .map(|p| substream(config.seed, p as u64, 0))
        .collect();
    let mut states: Vec<f64> = rngs
        .iter_mut()
        .enumerate()
        .map(|(p, rng)| initial.sample(p, rng))
        .collect();
    let mut running = vec![0.0; n];
    let mut trajectory = Vec::with_capacity(steps + 1);
    let sqrt_dt = config.dt.sqrt();

    for k in 0..steps {
        let t = k as f64 * config.dt;
        let m = moments_of(&states)?;
        trajectory.push(TrajectoryPoint {
            t,
            m1: m.m1,
            m2: m.m2,
        });
        let c = spec.coefficients(t)?;
        let (alpha, beta) = law.gains(t)?;
        let shared = beta * m.m1;
        let mut finite = true;
        for ((x, cost), rng) in states
            .iter_mut()
            .zip(running.iter_mut())
            .zip(rngs.iter_mut())
        {
            let u = alpha * *x + shared;
            *cost += c.q * u * u * config.dt;
            let z: f64 = StandardNormal.sample(rng);
            *x += (c.a * *x + c.b * u) * config.dt + c.sigma * sqrt_dt * z;
            finite &= x.is_finite();
        }
        if !finite {
            return Err(Error::SimulationDivergence {
                time: t + config.dt,
            });
        }
    }

    let m = moments_of(&states)?;
    trajectory.push(TrajectoryPoint {
        t: until,
        m1: m.m1,
        m2: m.m2,
    });
    let terminal = spec.d1 * m.m2 + spec.d2 * m.m1 * m.m1;
    // Per-path contribution to the total, with the terminal functional
    // linearised around the empirical mean (delta method).
    let contributions: Vec<f64> = states
        .iter()
        .zip(&running)
        .map(|(x, r)| r + spec.d1 * x * x + 2.0 * spec.d2 * m.m1 * x)
        .collect();
    let (_, std_error) = mean_and_std_error(&contributions);
    let running_mean = running.iter().sum::<f64>() / n as f64;
    Ok(ParticleRun {
        report: CostReport {
            total: running_mean + terminal,
            running: running_mean,
            terminal,
            std_error,
            n_paths: n,
        },
        trajectory,
        states,
    })
}

/// Monte Carlo estimate of `J(law)` over the full horizon.
pub fn simulate_mc(
    spec: &ProblemSpec,
    law: &FeedbackLaw,
    initial: &InitialLaw,
    config: &SimConfig,
) -> Result<CostReport> {
    Ok(run_particles(spec, law, initial, config, spec.horizon)?.report)
}

/// Shape statistics of a particle cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gaussianity {
    Moments {
        skewness: f64,
        excess_kurtosis: f64,
    },
    /// All particles coincide; shape statistics are undefined.
    Degenerate,
}

/// Skewness and excess kurtosis of equally weighted states.
pub fn shape_statistics(states: &[f64]) -> Result<Gaussianity> {
    let m = moments_of(states)?;
    let n = states.len() as f64;
    let (c2, c3, c4) = states.iter().fold((0.0, 0.0, 0.0), |(c2, c3, c4), x| {
        let d = x - m.m1;
        let d2 = d * d;
        (c2 + d2, c3 + d2 * d, c4 + d2 * d2)
    });
    let (c2, c3, c4) = (c2 / n, c3 / n, c4 / n);
    if !(c2 > f64::MIN_POSITIVE) || states.iter().all(|x| *x == states[0]) {
        return Ok(Gaussianity::Degenerate);
    }
    Ok(Gaussianity::Moments {
        skewness: c3 / c2.powf(1.5),
        excess_kurtosis: c4 / (c2 * c2) - 3.0,
    })
}

/// Shape statistics of the simulated cloud at time `t`.
pub fn gaussianity_check(
    spec: &ProblemSpec,
    law: &FeedbackLaw,
    initial: &InitialLaw,
    config: &SimConfig,
    t: f64,
) -> Result<Gaussianity> {
    if matches!(initial, InitialLaw::Cloud(_)) {
        return Err(Error::Argument(
            "gaussianity check needs a Dirac or Gaussian initial law".into(),
        ));
    }
    let run = run_particles(spec, law, initial, config, t)?;
    shape_statistics(&run.states)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPoint {
    pub d_alpha: f64,
    pub d_beta: f64,
    pub cost: f64,
}

/// Oracle cost of `base` with gains shifted by each `(d_alpha, d_beta)`.
pub fn perturbation_sweep(
    spec: &ProblemSpec,
    base: &FeedbackLaw,
    deltas: &[(f64, f64)],
    m1_0: f64,
    m2_0: f64,
    steps: usize,
) -> Result<Vec<PerturbationPoint>> {
    deltas
        .iter()
        .map(|&(d_alpha, d_beta)| {
            let law = base.perturbed(d_alpha, d_beta);
            Ok(PerturbationPoint {
                d_alpha,
                d_beta,
                cost: cost_oracle(spec, &law, m1_0, m2_0, steps)?.total,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Argument("need at least two (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Argument("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
