//! Value function, optimal feedback and master-equation checks for the
//! quadratic ansatz.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{MeasureMoments, ProblemSpec};
use crate::riccati::{Phi, RiccatiSolution};

/// Linear feedback `u = alpha(t) x + beta(t) [mu]_1`, sampled on a time grid
/// and linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackLaw {
    grid: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl FeedbackLaw {
    pub fn new(grid: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || alpha.len() != grid.len() || beta.len() != grid.len() {
            return Err(Error::Argument(
                "feedback gains must be sampled on a grid of >= 2 points".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "feedback grid must be strictly increasing".into(),
            ));
        }
        if alpha.iter().chain(&beta).any(|g| !g.is_finite()) {
            return Err(Error::Argument("feedback gains must be finite".into()));
        }
        Ok(FeedbackLaw { grid, alpha, beta })
    }

    /// Constant gains on `[0, horizon]`.
    pub fn constant(horizon: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![alpha; 2], vec![beta; 2])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn horizon(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// `(alpha(t), beta(t))`.
    pub fn gains(&self, t: f64) -> Result<(f64, f64)> {
        let (lo, hi) = (self.grid[0], self.horizon());
        if !(lo..=hi).contains(&t) {
            return Err(Error::Domain { t, lo, hi });
        }
        let n = self.grid.len();
        let i = self.grid.partition_point(|&g| g <= t).clamp(1, n - 1) - 1;
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        let lerp = |v: &[f64]| {
            if w == 0.0 {
                v[i]
            } else {
                v[i] + w * (v[i + 1] - v[i])
            }
        };
        Ok((lerp(&self.alpha), lerp(&self.beta)))
    }

    /// The control for state `x` when the population mean is `mean`.
    pub fn control(&self, t: f64, x: f64, mean: f64) -> Result<f64> {
        let (alpha, beta) = self.gains(t)?;
        Ok(alpha * x + beta * mean)
    }

    /// Gains shifted by constants `(d_alpha, d_beta)` on the whole grid.
    pub fn perturbed(&self, d_alpha: f64, d_beta: f64) -> Self {
        FeedbackLaw {
            grid: self.grid.clone(),
            alpha: self.alpha.iter().map(|a| a + d_alpha).collect(),
            beta: self.beta.iter().map(|b| b + d_beta).collect(),
        }
    }

    /// Writes `t,alpha,beta` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,alpha,beta")?;
        for ((t, a), b) in self.grid.iter().zip(&self.alpha).zip(&self.beta) {
            writeln!(out, "{t},{a},{b}")?;
        }
        Ok(())
    }
}

/// `v(t, mu) = phi1(t) [mu]_2 + phi2(t) [mu]_1^2 + phi3(t)`.
pub fn value_function(sol: &RiccatiSolution, t: f64, mu: MeasureMoments) -> Result<f64> {
    let p = sol.sample(t)?;
    Ok(quadratic_value(p, mu))
}

pub(crate) fn quadratic_value(p: Phi, mu: MeasureMoments) -> f64 {
    p.phi1 * mu.m2 + p.phi2 * mu.m1 * mu.m1 + p.phi3
}

/// Minimizer of the Hamiltonian: `alpha = -B phi1 / Q`, `beta = -B phi2 / Q`
/// on the solution grid.
pub fn optimal_feedback(spec: &ProblemSpec, sol: &RiccatiSolution) -> Result<FeedbackLaw> {
    let mut alpha = Vec::with_capacity(sol.grid().len());
    let mut beta = Vec::with_capacity(sol.grid().len());
    for (&t, p) in sol.grid().iter().zip(sol.values()) {
        let c = spec.coefficients(t)?;
        if !(c.q > 0.0) {
            return Err(Error::Assumption {
                assumption: "positive control weight Q_t > 0",
                detail: format!("Q({t}) = {}", c.q),
            });
        }
        alpha.push(-c.b * p.phi1 / c.q);
        beta.push(-c.b * p.phi2 / c.q);
    }
    FeedbackLaw::new(sol.grid().to_vec(), alpha, beta)
}

/// `H = (A x + B a) dmu_v + Q a^2`.
pub fn hamiltonian(spec: &ProblemSpec, t: f64, x: f64, dmu_v: f64, a: f64) -> Result<f64> {
    let c = spec.coefficients(t)?;
    Ok((c.a * x + c.b * a) * dmu_v + c.q * a * a)
}

/// `argmin_a H = -B dmu_v / (2 Q)`.
pub fn hamiltonian_minimizer(spec: &ProblemSpec, t: f64, dmu_v: f64) -> Result<f64> {
    let c = spec.coefficients(t)?;
    if !(c.q > 0.0) {
        return Err(Error::Assumption {
            assumption: "positive control weight Q_t > 0",
            detail: format!("Q({t}) = {}", c.q),
        });
    }
    Ok(-c.b * dmu_v / (2.0 * c.q))
}

/// L-derivative of the ansatz: `2 phi1(t) x + 2 phi2(t) [mu]_1`.
pub fn mu_derivative(sol: &RiccatiSolution, t: f64, mu: MeasureMoments, x: f64) -> Result<f64> {
    let p = sol.sample(t)?;
    Ok(2.0 * p.phi1 * x + 2.0 * p.phi2 * mu.m1)
}

/// `(L1 phi, L2 phi, L3 phi)` at grid node `k`, with `phi'` from the
/// fourth-order central stencil on neighbouring nodes.
fn operator_defects(spec: &ProblemSpec, sol: &RiccatiSolution, k: usize) -> Result<[f64; 3]> {
    let grid = sol.grid();
    let v = sol.values();
    let h = (grid[k + 1] - grid[k - 1]) / 2.0;
    let spacing_ok = (k - 2..k + 2).all(|j| ((grid[j + 1] - grid[j]) - h).abs() <= 1e-9 * h.abs());
    if !spacing_ok {
        return Err(Error::Argument(
            "residual stencil requires a locally uniform grid".into(),
        ));
    }
    let d = |f: fn(&Phi) -> f64| {
        (-f(&v[k + 2]) + 8.0 * f(&v[k + 1]) - 8.0 * f(&v[k - 1]) + f(&v[k - 2])) / (12.0 * h)
    };
    let (d1, d2, d3) = (d(|p| p.phi1), d(|p| p.phi2), d(|p| p.phi3));
    let c = spec.coefficients(grid[k])?;
    if !(c.q > 0.0) {
        return Err(Error::Assumption {
            assumption: "positive control weight Q_t > 0",
            detail: format!("Q({}) = {}", grid[k], c.q),
        });
    }
    let gain = c.b * c.b / c.q;
    let p = v[k];
    Ok([
        d1 - gain * p.phi1 * p.phi1 + 2.0 * c.a * p.phi1,
        d2 - gain * p.phi2 * p.phi2 - 2.0 * gain * p.phi1 * p.phi2 + 2.0 * c.a * p.phi2,
        d3 + c.sigma * c.sigma * p.phi1,
    ])
}

/// Residual `m2 L1 phi + m1^2 L2 phi + L3 phi` of the reduced master
/// equation.
///
/// The time derivative comes from central differences of the stored grid
/// values, never from the Riccati right-hand side. The residual is formed at
/// the grid nodes bracketing `t` and interpolated linearly; every node used
/// needs two neighbours on each side.
pub fn master_residual(
    spec: &ProblemSpec,
    sol: &RiccatiSolution,
    t: f64,
    mu: MeasureMoments,
) -> Result<f64> {
    let (i, w) = sol.locate(t)?;
    let n = sol.grid().len();
    let last = if w > 0.0 { i + 1 } else { i };
    if i < 2 || last + 2 >= n {
        return Err(Error::Domain {
            t,
            lo: sol.grid()[2.min(n - 1)],
            hi: sol.grid()[n.saturating_sub(3)],
        });
    }
    let at = |k: usize| -> Result<f64> {
        let [l1, l2, l3] = operator_defects(spec, sol, k)?;
        Ok(mu.m2 * l1 + mu.m1 * mu.m1 * l2 + l3)
    };
    let r0 = at(i)?;
    if w == 0.0 {
        return Ok(r0);
    }
    Ok((1.0 - w) * r0 + w * at(i + 1)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualPoint {
    pub t: f64,
    pub mu: MeasureMoments,
    pub residual: f64,
}

/// Evaluates [`master_residual`] at each `(t, mu)`.
pub fn residual_sweep(
    spec: &ProblemSpec,
    sol: &RiccatiSolution,
    points: &[(f64, MeasureMoments)],
) -> Result<Vec<ResidualPoint>> {
    points
        .iter()
        .map(|&(t, mu)| {
            Ok(ResidualPoint {
                t,
                mu,
                residual: master_residual(spec, sol, t, mu)?,
            })
        })
        .collect()
}

/// Writes `t,m1,m2,residual` rows.
pub fn write_residual_csv<W: Write>(points: &[ResidualPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,m1,m2,residual")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.t, p.mu.m1, p.mu.m2, p.residual)?;
    }
    Ok(())
}
