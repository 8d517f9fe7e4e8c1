//! Matrix Riccati system for `X_t` in `R^d`:
//!
//! ```text
//! Phi1' = Phi1' S Phi1 - 2 A' Phi1
//! Phi2' = 2 Phi2' S Phi1 + Phi2' S Phi2 - 2 A' Phi2
//! phi3' = -tr(sigma sigma' Phi1)
//! S = B Q^{-1} B'
//! ```
//!
//! Matrix derivatives are symmetrized, which turns `2 A' Phi` into
//! `A' Phi + Phi A`.

use std::io::Write;

use nalgebra::DMatrix;

use super::ESCAPE_BOUND;
use crate::error::{Error, Result};
use crate::model::MatrixProblemSpec;
use crate::ode::{self, OdeState, SweepError};

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPhi {
    pub phi1: DMatrix<f64>,
    pub phi2: DMatrix<f64>,
    pub phi3: f64,
}

impl MatrixPhi {
    pub fn zeros(d: usize) -> Self {
        MatrixPhi {
            phi1: DMatrix::zeros(d, d),
            phi2: DMatrix::zeros(d, d),
            phi3: 0.0,
        }
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl OdeState for MatrixPhi {
    fn axpy(&self, h: f64, k: &Self) -> Self {
        MatrixPhi {
            phi1: &self.phi1 + &k.phi1 * h,
            phi2: &self.phi2 + &k.phi2 * h,
            phi3: self.phi3 + h * k.phi3,
        }
    }

    fn max_abs(&self) -> f64 {
        let finite = self.phi3.is_finite()
            && self.phi1.iter().all(|v| v.is_finite())
            && self.phi2.iter().all(|v| v.is_finite());
        if !finite {
            return f64::INFINITY;
        }
        self.phi1.amax().max(self.phi2.amax()).max(self.phi3.abs())
    }

    fn project(self) -> Self {
        MatrixPhi {
            phi1: symmetrize(self.phi1),
            phi2: symmetrize(self.phi2),
            phi3: self.phi3,
        }
    }
}

pub fn matrix_riccati_rhs(spec: &MatrixProblemSpec, t: f64, phi: &MatrixPhi) -> Result<MatrixPhi> {
    let a = spec.a.eval(t)?;
    let b = spec.b.eval(t)?;
    let sigma = spec.sigma.eval(t)?;
    let q = spec.q.eval(t)?;
    let chol = q.cholesky().ok_or_else(|| Error::Assumption {
        assumption: "positive definite control weight Q_t",
        detail: format!("Q({t}) has no Cholesky factor"),
    })?;
    let s = &b * chol.solve(&b.transpose());
    let s_phi1 = &s * &phi.phi1;
    let phi1 = phi.phi1.transpose() * &s_phi1 - a.transpose() * &phi.phi1 * 2.0;
    let phi2 = phi.phi2.transpose() * &s_phi1 * 2.0 + phi.phi2.transpose() * &s * &phi.phi2
        - a.transpose() * &phi.phi2 * 2.0;
    let phi3 = -(&sigma * sigma.transpose() * &phi.phi1).trace();
    Ok(MatrixPhi {
        phi1: symmetrize(phi1),
        phi2: symmetrize(phi2),
        phi3,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRiccatiSolution {
    grid: Vec<f64>,
    values: Vec<MatrixPhi>,
}

impl MatrixRiccatiSolution {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[MatrixPhi] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].phi1.nrows()
    }

    /// Header `t,phi1_00,phi1_01,...,phi2_00,...,phi3` with row-major entries.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dim();
        let mut header = vec!["t".to_string()];
        for name in ["phi1", "phi2"] {
            for i in 0..d {
                for j in 0..d {
                    header.push(format!("{name}_{i}{j}"));
                }
            }
        }
        header.push("phi3".into());
        writeln!(out, "{}", header.join(","))?;
        for (t, p) in self.grid.iter().zip(&self.values) {
            let mut row = vec![t.to_string()];
            for m in [&p.phi1, &p.phi2] {
                for i in 0..d {
                    for j in 0..d {
                        row.push(m[(i, j)].to_string());
                    }
                }
            }
            row.push(p.phi3.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Backward RK4 from `(D1, D2, 0)` with symmetrization at every stage.
pub fn solve_matrix_riccati(
    spec: &MatrixProblemSpec,
    steps: usize,
) -> Result<MatrixRiccatiSolution> {
    if steps < 2 {
        return Err(Error::Argument(format!("steps must be >= 2, got {steps}")));
    }
    spec.validate(steps + 1).into_result()?;
    let nodes = ode::uniform_nodes(spec.horizon, steps);
    let terminal = MatrixPhi {
        phi1: spec.d1.0.clone(),
        phi2: spec.d2.0.clone(),
        phi3: 0.0,
    };
    let values = ode::rk4_backward(&nodes, terminal, ESCAPE_BOUND, |t, y: &MatrixPhi| {
        matrix_riccati_rhs(spec, t, y)
    })
    .map_err(|e| match e {
        SweepError::Rhs(e) => e,
        SweepError::Escape(time) => Error::FiniteEscape { time },
    })?;
    Ok(MatrixRiccatiSolution {
        grid: nodes,
        values,
    })
}
