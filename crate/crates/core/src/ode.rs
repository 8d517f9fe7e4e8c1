//! Fixed-step classical Runge-Kutta on uniform grids.

/// Vector-space operations needed by the stepper.
pub(crate) trait OdeState: Clone {
    /// `self + h * k`
    fn axpy(&self, h: f64, k: &Self) -> Self;

    /// Largest absolute component, or a non-finite value if any component is.
    fn max_abs(&self) -> f64;

    /// Hook applied to every stage value and derivative; identity by default.
    fn project(self) -> Self {
        self
    }
}

impl OdeState for [f64; 3] {
    fn axpy(&self, h: f64, k: &Self) -> Self {
        [self[0] + h * k[0], self[1] + h * k[1], self[2] + h * k[2]]
    }

    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, v| {
            if v.is_finite() {
                m.max(v.abs())
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Uniform grid `t_i = horizon * i / steps`, with the last point exactly `horizon`.
pub(crate) fn uniform_nodes(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| {
            if i == steps {
                horizon
            } else {
                horizon * i as f64 / steps as f64
            }
        })
        .collect()
}

/// One classical RK4 step of signed size `h` from `(t, y)`.
pub(crate) fn rk4_step<S, F, E>(rhs: &mut F, t: f64, y: &S, h: f64) -> Result<S, E>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S, E>,
{
    let k1 = rhs(t, y)?.project();
    let y2 = y.axpy(0.5 * h, &k1).project();
    let k2 = rhs(t + 0.5 * h, &y2)?.project();
    let y3 = y.axpy(0.5 * h, &k2).project();
    let k3 = rhs(t + 0.5 * h, &y3)?.project();
    let y4 = y.axpy(h, &k3).project();
    let k4 = rhs(t + h, &y4)?.project();
    let next = y
        .axpy(h / 6.0, &k1)
        .axpy(h / 3.0, &k2)
        .axpy(h / 3.0, &k3)
        .axpy(h / 6.0, &k4);
    Ok(next.project())
}

/// Outcome of a backward sweep that left the bounded region.
#[derive(Debug)]
pub(crate) enum SweepError<E> {
    Rhs(E),
    /// The state exceeded the bound (or became non-finite) at this time.
    Escape(f64),
}

/// Integrates from `nodes.last()` down to `nodes[0]`, starting at `terminal`.
/// Returns states aligned with `nodes`; the last entry is `terminal` itself.
pub(crate) fn rk4_backward<S, F, E>(
    nodes: &[f64],
    terminal: S,
    bound: f64,
    mut rhs: F,
) -> Result<Vec<S>, SweepError<E>>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S, E>,
{
    let n = nodes.len();
    let mut states = vec![terminal.clone(); n];
    let mut y = terminal;
    for i in (1..n).rev() {
        let h = nodes[i - 1] - nodes[i];
        y = rk4_step(&mut rhs, nodes[i], &y, h).map_err(SweepError::Rhs)?;
        let size = y.max_abs();
        if !(size <= bound) {
            return Err(SweepError::Escape(nodes[i - 1]));
        }
        states[i - 1] = y.clone();
    }
    Ok(states)
}

/// Integrates forward from `nodes[0]`, returning the state at every node.
pub(crate) fn rk4_forward<S, F, E>(
    nodes: &[f64],
    initial: S,
    bound: f64,
    mut rhs: F,
) -> Result<Vec<S>, SweepError<E>>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S, E>,
{
    let mut states = Vec::with_capacity(nodes.len());
    let mut y = initial;
    states.push(y.clone());
    for w in nodes.windows(2) {
        y = rk4_step(&mut rhs, w[0], &y, w[1] - w[0]).map_err(SweepError::Rhs)?;
        if !(y.max_abs() <= bound) {
            return Err(SweepError::Escape(w[1]));
        }
        states.push(y.clone());
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    impl OdeState for f64 {
        fn axpy(&self, h: f64, k: &Self) -> Self {
            self + h * k
        }
        fn max_abs(&self) -> f64 {
            if self.is_finite() {
                self.abs()
            } else {
                f64::INFINITY
            }
        }
    }

    #[test]
    fn exponential_decay_fourth_order() {
        // y' = -y, y(0) = 1
        let err = |steps: usize| {
            let nodes = uniform_nodes(1.0, steps);
            let ys = rk4_forward(&nodes, 1.0_f64, 1e12, |_, y: &f64| Ok::<_, ()>(-y)).unwrap();
            (ys[steps] - (-1.0_f64).exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn backward_is_exact_for_cubic() {
        // y' = 3 t^2 is integrated exactly by Simpson weights
        let nodes = uniform_nodes(2.0, 7);
        let ys =
            rk4_backward(&nodes, 8.0_f64, 1e12, |t, _: &f64| Ok::<_, ()>(3.0 * t * t)).unwrap();
        for (t, y) in nodes.iter().zip(&ys) {
            assert!((y - t.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn escape_is_reported() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let nodes = uniform_nodes(2.0, 2000);
        match rk4_forward(&nodes, 1.0_f64, 1e12, |_, y: &f64| Ok::<_, ()>(y * y)) {
            Err(SweepError::Escape(t)) => assert!((t - 1.0).abs() < 0.01, "t = {t}"),
            other => panic!("expected escape, got {:?}", other.map(|v| v.len())),
        }
    }
}
