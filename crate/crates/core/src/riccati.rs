//! Backward integration of the Riccati system obtained by substituting the
//! quadratic ansatz `v(t, mu) = phi1(t) [mu]_2 + phi2(t) [mu]_1^2 + phi3(t)`
//! into the master equation:
//!
//! ```text
//! phi1' = (B^2/Q) phi1^2 - 2 A phi1
//! phi2' = (B^2/Q) phi2^2 + (2 B^2/Q) phi1 phi2 - 2 A phi2
//! phi3' = -sigma^2 phi1
//! (phi1, phi2, phi3)(T) = (D1, D2, 0)
//! ```

pub mod matrix;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::ode::{self, SweepError};

pub use matrix::{matrix_riccati_rhs, solve_matrix_riccati, MatrixPhi, MatrixRiccatiSolution};

/// Any component exceeding this magnitude is treated as a finite escape.
pub const ESCAPE_BOUND: f64 = 1e12;

/// Default number of RK4 steps per unit of horizon.
pub const DEFAULT_STEPS_PER_UNIT: usize = 1000;

/// Steps used for a horizon when the caller does not choose.
pub fn default_steps(horizon: f64) -> usize {
    ((DEFAULT_STEPS_PER_UNIT as f64 * horizon).ceil() as usize).max(2)
}

/// The coefficient triple `(phi1, phi2, phi3)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Phi {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
}

impl Phi {
    pub const ZERO: Phi = Phi {
        phi1: 0.0,
        phi2: 0.0,
        phi3: 0.0,
    };

    pub fn new(phi1: f64, phi2: f64, phi3: f64) -> Self {
        Phi { phi1, phi2, phi3 }
    }

    pub(crate) fn as_array(self) -> [f64; 3] {
        [self.phi1, self.phi2, self.phi3]
    }

    pub(crate) fn from_array(a: [f64; 3]) -> Self {
        Phi::new(a[0], a[1], a[2])
    }

    fn lerp(self, other: Phi, w: f64) -> Phi {
        Phi::new(
            self.phi1 + w * (other.phi1 - self.phi1),
            self.phi2 + w * (other.phi2 - self.phi2),
            self.phi3 + w * (other.phi3 - self.phi3),
        )
    }
}

/// Right-hand side `d phi / dt` of the scalar Riccati system.
pub fn riccati_rhs(spec: &ProblemSpec, t: f64, phi: Phi) -> Result<Phi> {
    let c = spec.coefficients(t)?;
    if !(c.q > 0.0) {
        return Err(Error::Assumption {
            assumption: "positive control weight Q_t > 0",
            detail: format!("Q({t}) = {}", c.q),
        });
    }
    let gain = c.b * c.b / c.q;
    Ok(Phi {
        phi1: gain * phi.phi1 * phi.phi1 - 2.0 * c.a * phi.phi1,
        phi2: gain * phi.phi2 * phi.phi2 + 2.0 * gain * phi.phi1 * phi.phi2 - 2.0 * c.a * phi.phi2,
        phi3: -c.sigma * c.sigma * phi.phi1,
    })
}

/// `phi` sampled on an ascending time grid, linearly interpolated in between.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiSolution {
    grid: Vec<f64>,
    values: Vec<Phi>,
}

impl RiccatiSolution {
    /// Builds a solution from explicit samples, e.g. closed forms or
    /// perturbed copies of a numerical solution.
    pub fn from_samples(grid: Vec<f64>, values: Vec<Phi>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Argument(format!(
                "need at least two samples with matching grid ({} times, {} values)",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("grid must be strictly increasing".into()));
        }
        if values
            .iter()
            .any(|p| !p.as_array().iter().all(|v| v.is_finite()))
        {
            return Err(Error::Argument("non-finite Riccati sample".into()));
        }
        Ok(RiccatiSolution { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Phi] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn horizon(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Index `i` and weight `w` with `t = (1 - w) grid[i] + w grid[i + 1]`.
    pub(crate) fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.start(), self.horizon());
        if !(lo..=hi).contains(&t) {
            return Err(Error::Domain { t, lo, hi });
        }
        let n = self.grid.len();
        let i = self.grid.partition_point(|&g| g <= t).clamp(1, n - 1) - 1;
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        Ok((i, w))
    }

    /// `phi(t)` by linear interpolation; exact at grid nodes.
    pub fn sample(&self, t: f64) -> Result<Phi> {
        let (i, w) = self.locate(t)?;
        if w == 0.0 {
            return Ok(self.values[i]);
        }
        if w == 1.0 {
            return Ok(self.values[i + 1]);
        }
        Ok(self.values[i].lerp(self.values[i + 1], w))
    }

    /// Writes `t,phi1,phi2,phi3` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,phi1,phi2,phi3")?;
        for (t, p) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{t},{},{},{}", p.phi1, p.phi2, p.phi3)?;
        }
        Ok(())
    }
}

/// Free-function form of [`RiccatiSolution::sample`].
pub fn sample_solution(sol: &RiccatiSolution, t: f64) -> Result<Phi> {
    sol.sample(t)
}

/// Integrates the Riccati system backward from `T` with classical RK4 on a
/// uniform grid of `steps` steps.
pub fn solve_riccati(spec: &ProblemSpec, steps: usize) -> Result<RiccatiSolution> {
    if steps < 2 {
        return Err(Error::Argument(format!("steps must be >= 2, got {steps}")));
    }
    spec.validate(steps + 1).into_result()?;
    let nodes = ode::uniform_nodes(spec.horizon, steps);
    let terminal = [spec.d1, spec.d2, 0.0];
    let states = ode::rk4_backward(&nodes, terminal, ESCAPE_BOUND, |t, y: &[f64; 3]| {
        riccati_rhs(spec, t, Phi::from_array(*y)).map(Phi::as_array)
    })
    .map_err(|e| match e {
        SweepError::Rhs(e) => e,
        SweepError::Escape(time) => Error::FiniteEscape { time },
    })?;
    Ok(RiccatiSolution {
        grid: nodes,
        values: states.into_iter().map(Phi::from_array).collect(),
    })
}

/// Closed-form presets with known Riccati solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticPreset {
    Example1,
    Example2,
}

impl std::str::FromStr for AnalyticPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(AnalyticPreset::Example1),
            "example2" => Ok(AnalyticPreset::Example2),
            other => Err(Error::Argument(format!(
                "no closed-form Riccati solution for preset '{other}'"
            ))),
        }
    }
}

/// Closed-form `phi(t)` for the constant-coefficient presets on horizon `T`:
/// example1 gives `(1/(1+T-t), 0, ln(1+T-t))`, example2 `(0, 1/(1+T-t), 0)`.
pub fn analytic_riccati(preset: &str, horizon: f64, t: f64) -> Result<Phi> {
    let preset: AnalyticPreset = preset.parse()?;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain {
            t,
            lo: 0.0,
            hi: horizon,
        });
    }
    let tau = 1.0 + horizon - t;
    Ok(match preset {
        AnalyticPreset::Example1 => Phi::new(1.0 / tau, 0.0, tau.ln()),
        AnalyticPreset::Example2 => Phi::new(0.0, 1.0 / tau, 0.0),
    })
}
