//! Problem instances, time-varying coefficients and moment representations
//! of measures.
//!
//! The fully observed scalar problem is
//!
//! ```text
//! dX_t = (A_t X_t + B_t u_t) dt + sigma_t dW_t
//! J(u) = E[ int_0^T Q_t u_t^2 dt ] + D1 E[X_T^2] + D2 (E[X_T])^2
//! ```
//!
//! Every quantity the quadratic ansatz needs from a measure is its first two
//! moments, so measures are carried either as [`MeasureMoments`] or as an
//! equally weighted [`ParticleCloud`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar coefficient of time.
///
/// In configuration files a bare number is a constant,
/// `{ polynomial = [c0, c1, ...] }` is `c0 + c1 t + ...` and
/// `{ table = [[t0, v0], [t1, v1], ...] }` is piecewise linear between knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientFn {
    Constant(f64),
    Polynomial { polynomial: Vec<f64> },
    Tabulated { table: Vec<(f64, f64)> },
}

impl CoefficientFn {
    pub fn constant(value: f64) -> Self {
        CoefficientFn::Constant(value)
    }

    /// Coefficients in increasing degree.
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        CoefficientFn::Polynomial {
            polynomial: coefficients,
        }
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        let f = CoefficientFn::Tabulated { table: knots };
        f.check()?;
        Ok(f)
    }

    /// Structural checks: finite data, non-empty tables with strictly
    /// increasing knots.
    pub fn check(&self) -> Result<()> {
        match self {
            CoefficientFn::Constant(c) if !c.is_finite() => Err(Error::Argument(format!(
                "non-finite constant coefficient {c}"
            ))),
            CoefficientFn::Polynomial { polynomial }
                if polynomial.iter().any(|c| !c.is_finite()) =>
            {
                Err(Error::Argument("non-finite polynomial coefficient".into()))
            }
            CoefficientFn::Tabulated { table } => {
                if table.is_empty() {
                    return Err(Error::Argument("tabulated coefficient has no knots".into()));
                }
                if table.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::Argument(
                        "non-finite knot in tabulated coefficient".into(),
                    ));
                }
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Argument(
                        "tabulated coefficient knots must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Value at `t`. Tabulated coefficients interpolate linearly and are
    /// undefined outside their knot range.
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            CoefficientFn::Constant(c) => Ok(*c),
            CoefficientFn::Polynomial { polynomial } => {
                Ok(polynomial.iter().rev().fold(0.0, |acc, c| acc * t + c))
            }
            CoefficientFn::Tabulated { table } => {
                let (lo, hi) = match (table.first(), table.last()) {
                    (Some(first), Some(last)) => (first.0, last.0),
                    _ => return Err(Error::Argument("tabulated coefficient has no knots".into())),
                };
                if !(lo..=hi).contains(&t) {
                    return Err(Error::Domain { t, lo, hi });
                }
                let idx = table.partition_point(|(knot, _)| *knot <= t);
                if idx == table.len() {
                    return Ok(table[idx - 1].1);
                }
                let (t0, v0) = table[idx - 1];
                let (t1, v1) = table[idx];
                let w = (t - t0) / (t1 - t0);
                Ok(v0 + w * (v1 - v0))
            }
        }
    }

    /// Whether the coefficient is defined on all of `[0, horizon]`.
    pub fn covers(&self, horizon: f64) -> bool {
        match self {
            CoefficientFn::Tabulated { table } => match (table.first(), table.last()) {
                (Some(first), Some(last)) => first.0 <= 0.0 && last.0 >= horizon,
                _ => false,
            },
            _ => true,
        }
    }
}

/// Fully observed scalar mean-field LQG problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(rename = "A")]
    pub a: CoefficientFn,
    #[serde(rename = "B")]
    pub b: CoefficientFn,
    pub sigma: CoefficientFn,
    #[serde(rename = "Q")]
    pub q: CoefficientFn,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Coefficients frozen at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub q: f64,
}

impl ProblemSpec {
    /// Problem with constant coefficients.
    pub fn constant(a: f64, b: f64, sigma: f64, q: f64, d1: f64, d2: f64, horizon: f64) -> Self {
        ProblemSpec {
            a: CoefficientFn::Constant(a),
            b: CoefficientFn::Constant(b),
            sigma: CoefficientFn::Constant(sigma),
            q: CoefficientFn::Constant(q),
            d1,
            d2,
            horizon,
        }
    }

    /// Standard LQG: A = 0, B = 1, sigma = 1, Q = 1, D1 = 1, D2 = 0.
    pub fn example1(horizon: f64) -> Self {
        Self::constant(0.0, 1.0, 1.0, 1.0, 1.0, 0.0, horizon)
    }

    /// Mean-field terminal cost (E[X_T])^2: as [`example1`](Self::example1)
    /// with D1 = 0, D2 = 1.
    pub fn example2(horizon: f64) -> Self {
        Self::constant(0.0, 1.0, 1.0, 1.0, 0.0, 1.0, horizon)
    }

    pub fn coefficients(&self, t: f64) -> Result<Coefficients> {
        Ok(Coefficients {
            a: self.a.eval(t)?,
            b: self.b.eval(t)?,
            sigma: self.sigma.eval(t)?,
            q: self.q.eval(t)?,
        })
    }

    /// Checks T > 0, that every coefficient is defined on `[0, T]`, and
    /// Q(t) > 0 on a uniform grid of `grid_points` points.
    pub fn validate(&self, grid_points: usize) -> Validation {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Validation::fail(None, "T > 0", format!("horizon T = {}", self.horizon));
        }
        if !self.d1.is_finite() || !self.d2.is_finite() {
            return Validation::fail(
                None,
                "finite data",
                "terminal weights must be finite".into(),
            );
        }
        for (name, f) in [
            ("A", &self.a),
            ("B", &self.b),
            ("sigma", &self.sigma),
            ("Q", &self.q),
        ] {
            if let Err(e) = f.check() {
                return Validation::fail(None, "well-formed coefficients", format!("{name}: {e}"));
            }
            if !f.covers(self.horizon) {
                return Validation::fail(
                    None,
                    "coefficients defined on [0, T]",
                    format!("{name} table does not cover [0, {}]", self.horizon),
                );
            }
        }
        for t in uniform_grid(self.horizon, grid_points) {
            // covers() already guarantees evaluability
            let q = self.q.eval(t).unwrap_or(f64::NAN);
            if !(q > 0.0) {
                return Validation::fail(
                    Some(t),
                    "positive control weight Q_t > 0",
                    format!("Q({t}) = {q}"),
                );
            }
        }
        Validation::Pass
    }
}

/// Outcome of a structural/assumption check on a problem specification.
#[derive(Clone, Debug, PartialEq)]
pub enum Validation {
    Pass,
    Fail {
        /// First grid time at which the check failed, if time-dependent.
        t: Option<f64>,
        assumption: &'static str,
        detail: String,
    },
}

impl Validation {
    fn fail(t: Option<f64>, assumption: &'static str, detail: String) -> Self {
        Validation::Fail {
            t,
            assumption,
            detail,
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Validation::Pass)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            Validation::Pass => Ok(()),
            Validation::Fail {
                assumption, detail, ..
            } => Err(Error::Assumption { assumption, detail }),
        }
    }
}

/// `n` equally spaced points covering `[0, horizon]` (a single point at 0 if `n == 1`).
pub fn uniform_grid(horizon: f64, n: usize) -> impl Iterator<Item = f64> {
    let denom = n.saturating_sub(1).max(1) as f64;
    (0..n).map(move |i| {
        if i + 1 == n && n > 1 {
            horizon
        } else {
            horizon * i as f64 / denom
        }
    })
}

/// First and second moments of a distribution on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureMoments {
    pub m1: f64,
    pub m2: f64,
}

impl MeasureMoments {
    /// Relative slack allowed in `m2 >= m1^2`.
    pub const CS_TOLERANCE: f64 = 1e-12;

    pub fn new(m1: f64, m2: f64) -> Result<Self> {
        let mu = MeasureMoments { m1, m2 };
        if !m1.is_finite()
            || !m2.is_finite()
            || mu.variance() < -Self::CS_TOLERANCE * m2.abs().max(1.0)
        {
            return Err(Error::Argument(format!(
                "moments (m1 = {m1}, m2 = {m2}) violate m2 >= m1^2"
            )));
        }
        Ok(mu)
    }

    pub fn dirac(x: f64) -> Self {
        MeasureMoments { m1: x, m2: x * x }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::Argument(format!("negative variance {variance}")));
        }
        Ok(MeasureMoments {
            m1: mean,
            m2: variance + mean * mean,
        })
    }

    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }
}

/// Equally weighted empirical measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    states: Vec<f64>,
}

impl ParticleCloud {
    pub fn new(states: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Argument("particle cloud must be non-empty".into()));
        }
        Ok(ParticleCloud { states })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn moments(&self) -> MeasureMoments {
        moments_of(&self.states).expect("cloud is non-empty")
    }

    /// The cloud translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        ParticleCloud {
            states: self.states.iter().map(|x| x + shift).collect(),
        }
    }
}

/// Empirical first and second moments of equally weighted states.
pub fn moments_of(states: &[f64]) -> Result<MeasureMoments> {
    if states.is_empty() {
        return Err(Error::Argument(
            "cannot take moments of an empty cloud".into(),
        ));
    }
    let n = states.len() as f64;
    let (s1, s2) = states
        .iter()
        .fold((0.0, 0.0), |(s1, s2), x| (s1 + x, s2 + x * x));
    Ok(MeasureMoments {
        m1: s1 / n,
        m2: s2 / n,
    })
}

/// A `d x d` matrix of scalar coefficients of time, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<CoefficientFn>>", into = "Vec<Vec<CoefficientFn>>")]
pub struct MatrixCoefficient {
    dim: usize,
    entries: Vec<CoefficientFn>,
}

impl MatrixCoefficient {
    pub fn constant(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Argument("matrix coefficient must be square".into()));
        }
        let dim = m.nrows();
        let entries = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| CoefficientFn::Constant(m[(i, j)]))
            .collect();
        Ok(MatrixCoefficient { dim, entries })
    }

    pub fn from_entries(dim: usize, entries: Vec<CoefficientFn>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Argument(format!(
                "expected {} entries for a {dim}x{dim} coefficient, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(MatrixCoefficient { dim, entries })
    }

    /// Embeds a scalar coefficient as a 1x1 matrix.
    pub fn scalar(f: CoefficientFn) -> Self {
        MatrixCoefficient {
            dim: 1,
            entries: vec![f],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[CoefficientFn] {
        &self.entries
    }

    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, f) in self.entries.iter().enumerate() {
            m[(k / self.dim, k % self.dim)] = f.eval(t)?;
        }
        Ok(m)
    }
}

impl TryFrom<Vec<Vec<CoefficientFn>>> for MatrixCoefficient {
    type Error = Error;

    fn try_from(rows: Vec<Vec<CoefficientFn>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Argument("matrix coefficient must be square".into()));
        }
        Self::from_entries(dim, rows.into_iter().flatten().collect())
    }
}

impl From<MatrixCoefficient> for Vec<Vec<CoefficientFn>> {
    fn from(m: MatrixCoefficient) -> Self {
        m.entries.chunks(m.dim).map(|r| r.to_vec()).collect()
    }
}

/// Constant square matrix with a nested-array serde representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ConstMatrix(pub DMatrix<f64>);

impl TryFrom<Vec<Vec<f64>>> for ConstMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Argument(
                "matrix must be square and non-empty".into(),
            ));
        }
        Ok(ConstMatrix(DMatrix::from_row_iterator(
            dim,
            dim,
            rows.into_iter().flatten(),
        )))
    }
}

impl From<ConstMatrix> for Vec<Vec<f64>> {
    fn from(m: ConstMatrix) -> Self {
        m.0.row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// Multidimensional analogue of [`ProblemSpec`] with `X_t` in `R^d`, cost
/// `E[int u' Q u dt] + E[X_T' D1 X_T] + E[X_T]' D2 E[X_T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixProblemSpec {
    #[serde(rename = "A")]
    pub a: MatrixCoefficient,
    #[serde(rename = "B")]
    pub b: MatrixCoefficient,
    pub sigma: MatrixCoefficient,
    #[serde(rename = "Q")]
    pub q: MatrixCoefficient,
    #[serde(rename = "D1")]
    pub d1: ConstMatrix,
    #[serde(rename = "D2")]
    pub d2: ConstMatrix,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl MatrixProblemSpec {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// The scalar problem viewed as a `d = 1` matrix problem.
    pub fn from_scalar(spec: &ProblemSpec) -> Self {
        let one = |v: f64| ConstMatrix(DMatrix::from_element(1, 1, v));
        MatrixProblemSpec {
            a: MatrixCoefficient::scalar(spec.a.clone()),
            b: MatrixCoefficient::scalar(spec.b.clone()),
            sigma: MatrixCoefficient::scalar(spec.sigma.clone()),
            q: MatrixCoefficient::scalar(spec.q.clone()),
            d1: one(spec.d1),
            d2: one(spec.d2),
            horizon: spec.horizon,
        }
    }

    /// Checks dimensions, symmetry of D1, D2 and Q, and positive
    /// definiteness of Q on a uniform grid.
    pub fn validate(&self, grid_points: usize) -> Validation {
        let d = self.dim();
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Validation::fail(None, "T > 0", format!("horizon T = {}", self.horizon));
        }
        let dims = [
            self.b.dim(),
            self.sigma.dim(),
            self.q.dim(),
            self.d1.0.nrows(),
            self.d2.0.nrows(),
        ];
        if dims.iter().any(|&k| k != d) {
            return Validation::fail(
                None,
                "consistent dimensions",
                format!("expected d = {d}, got {dims:?}"),
            );
        }
        for (name, m) in [("D1", &self.d1.0), ("D2", &self.d2.0)] {
            if !is_symmetric(m) {
                return Validation::fail(
                    None,
                    "symmetric terminal weights",
                    format!("{name} is not symmetric"),
                );
            }
        }
        for (name, f) in [
            ("A", &self.a),
            ("B", &self.b),
            ("sigma", &self.sigma),
            ("Q", &self.q),
        ] {
            for e in f.entries() {
                if let Err(err) = e.check() {
                    return Validation::fail(
                        None,
                        "well-formed coefficients",
                        format!("{name}: {err}"),
                    );
                }
                if !e.covers(self.horizon) {
                    return Validation::fail(
                        None,
                        "coefficients defined on [0, T]",
                        format!("{name} table does not cover [0, {}]", self.horizon),
                    );
                }
            }
        }
        for t in uniform_grid(self.horizon, grid_points) {
            let q = match self.q.eval(t) {
                Ok(q) => q,
                Err(e) => {
                    return Validation::fail(
                        Some(t),
                        "positive definite control weight Q_t",
                        e.to_string(),
                    )
                }
            };
            if !is_symmetric(&q) || q.clone().cholesky().is_none() {
                return Validation::fail(
                    Some(t),
                    "positive definite control weight Q_t",
                    format!("Q({t}) is not symmetric positive definite"),
                );
            }
        }
        Validation::Pass
    }
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    m.is_square() && (m - m.transpose()).amax() <= 1e-12 * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_coefficient() {
        assert_eq!(CoefficientFn::constant(1.0).eval(0.7).unwrap(), 1.0);
    }

    #[test]
    fn tabulated_midpoint() {
        let f = CoefficientFn::tabulated(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(1.0).unwrap(), 2.0);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_out_of_range() {
        let f = CoefficientFn::tabulated(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        assert!(matches!(f.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn tabulated_rejects_unsorted_knots() {
        assert!(CoefficientFn::tabulated(vec![(1.0, 0.0), (0.0, 2.0)]).is_err());
        assert!(CoefficientFn::tabulated(vec![]).is_err());
    }

    #[test]
    fn polynomial_horner() {
        let f = CoefficientFn::polynomial(vec![1.0, 2.0]);
        assert_eq!(f.eval(2.0).unwrap(), 5.0);
        let g = CoefficientFn::polynomial(vec![1.0, 0.0, -3.0]);
        assert_eq!(g.eval(2.0).unwrap(), -11.0);
    }

    #[test]
    fn moments_examples() {
        let dirac = moments_of(&[2.0]).unwrap();
        assert_eq!((dirac.m1, dirac.m2), (2.0, 4.0));
        let sym = moments_of(&[1.0, -1.0]).unwrap();
        assert_eq!((sym.m1, sym.m2), (0.0, 1.0));
        let three = moments_of(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(three.m1, 1.0);
        assert!((three.m2 - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_cloud_rejected() {
        assert!(moments_of(&[]).is_err());
        assert!(ParticleCloud::new(vec![]).is_err());
    }

    #[test]
    fn moments_reject_cauchy_schwarz_violation() {
        assert!(MeasureMoments::new(2.0, 3.0).is_err());
        assert!(MeasureMoments::new(2.0, 4.0).is_ok());
    }

    #[test]
    fn validate_presets_pass() {
        assert!(ProblemSpec::example1(1.0).validate(100).is_pass());
        assert!(ProblemSpec::example2(1.0).validate(100).is_pass());
    }

    #[test]
    fn validate_zero_q_fails_at_origin() {
        let spec = ProblemSpec::constant(0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        match spec.validate(100) {
            Validation::Fail { t, assumption, .. } => {
                assert_eq!(t, Some(0.0));
                assert!(assumption.contains("Q_t"));
            }
            Validation::Pass => panic!("Q = 0 must fail"),
        }
    }

    #[test]
    fn validate_q_crossing_zero() {
        let mut spec = ProblemSpec::example1(1.0);
        spec.q = CoefficientFn::tabulated(vec![(0.0, 1.0), (1.0, -1.0)]).unwrap();
        // scan the grid independently for the first non-positive value
        let first_bad = (0..100)
            .map(|i| i as f64 / 99.0)
            .find(|t| 1.0 - 2.0 * t <= 0.0)
            .unwrap();
        match spec.validate(100) {
            Validation::Fail { t: Some(t), .. } => {
                assert!((t - first_bad).abs() < 1e-12);
                assert!((t - 0.5).abs() < 0.02);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn validate_table_not_covering_horizon() {
        let mut spec = ProblemSpec::example1(2.0);
        spec.a = CoefficientFn::tabulated(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert!(!spec.validate(10).is_pass());
    }

    #[test]
    fn validate_nonpositive_horizon() {
        let spec = ProblemSpec::example1(0.0);
        assert!(matches!(
            spec.validate(10),
            Validation::Fail {
                assumption: "T > 0",
                ..
            }
        ));
    }

    #[test]
    fn matrix_coefficient_roundtrip_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let c = MatrixCoefficient::constant(&m).unwrap();
        assert_eq!(c.eval(0.3).unwrap(), m);
        let rows: Vec<Vec<CoefficientFn>> = c.clone().into();
        assert_eq!(MatrixCoefficient::try_from(rows).unwrap(), c);
    }

    #[test]
    fn matrix_spec_rejects_asymmetric_terminal_weight() {
        let mut spec = MatrixProblemSpec::from_scalar(&ProblemSpec::example1(1.0));
        assert!(spec.validate(10).is_pass());
        spec.d1 = ConstMatrix(DMatrix::from_row_slice(1, 1, &[1.0]));
        let eye = DMatrix::<f64>::identity(2, 2);
        spec.a = MatrixCoefficient::constant(&DMatrix::zeros(2, 2)).unwrap();
        spec.b = MatrixCoefficient::constant(&eye).unwrap();
        spec.sigma = MatrixCoefficient::constant(&eye).unwrap();
        spec.q = MatrixCoefficient::constant(&eye).unwrap();
        spec.d1 = ConstMatrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]));
        spec.d2 = ConstMatrix(DMatrix::zeros(2, 2));
        assert!(!spec.validate(10).is_pass());
    }

    #[test]
    fn matrix_spec_rejects_indefinite_q() {
        let mut spec = MatrixProblemSpec::from_scalar(&ProblemSpec::example1(1.0));
        spec.q = MatrixCoefficient::scalar(CoefficientFn::Constant(-1.0));
        assert!(!spec.validate(10).is_pass());
    }
}
