//! Fixed-time optimal control problems with equality boundary conditions.
//!
//! ```text
//! minimise   Psi_0(t0, x(t0)) + Psi_f(tf, x(tf)) + int_{t0}^{tf} h(t, x, u) dt
//! subject to x' = f(t, x, u),  phi_0(t0, x(t0)) = 0,  phi_f(tf, x(tf)) = 0
//! ```

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// A fixed-time optimal control problem with analytic first derivatives.
///
/// Costs default to zero and boundary maps default to empty, so a problem
/// only overrides the terms it has.
pub trait OptimalControlProblem: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// `(t0, tf)` with `tf > t0`.
    fn time_span(&self) -> (f64, f64);

    fn dynamics(&self, t: f64, x: &[f64], u: &[f64]) -> DVector<f64>;
    /// `(df/dx, df/du)`, of shapes `n_x x n_x` and `n_x x n_u`.
    fn dynamics_jacobians(&self, t: f64, x: &[f64], u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>);

    fn running_cost(&self, _t: f64, _x: &[f64], _u: &[f64]) -> f64 {
        0.0
    }
    /// `(dh/dx, dh/du)`.
    fn running_cost_gradients(&self, _t: f64, _x: &[f64], _u: &[f64]) -> (DVector<f64>, DVector<f64>) {
        (
            DVector::zeros(self.state_dim()),
            DVector::zeros(self.control_dim()),
        )
    }

    fn initial_cost(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn initial_cost_gradient(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.state_dim())
    }
    fn final_cost(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn final_cost_gradient(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.state_dim())
    }

    fn initial_boundary_dim(&self) -> usize {
        0
    }
    fn initial_boundary(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn initial_boundary_jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(0, self.state_dim())
    }
    fn final_boundary_dim(&self) -> usize {
        0
    }
    fn final_boundary(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn final_boundary_jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(0, self.state_dim())
    }

    /// `(x_guess, u_guess)` at time `t`.
    fn initial_guess(&self, t: f64) -> (DVector<f64>, DVector<f64>);
}

/// Known optimal trajectory of a problem.
pub trait AnalyticSolution: Send + Sync {
    fn state(&self, t: f64) -> DVector<f64>;
    fn control(&self, t: f64) -> DVector<f64>;
    fn costate(&self, t: f64) -> DVector<f64>;
}

/// Low-thrust orbit raising with mass as a state.
///
/// State `(r, theta, v_r, v_theta, m)`, control thrust angle `beta`. The
/// final radius is maximised over a fixed horizon.
#[derive(Debug, Clone)]
pub struct OrbitRaising {
    pub final_time: f64,
    pub thrust: f64,
    pub mu: f64,
    pub mass_rate: f64,
}

impl Default for OrbitRaising {
    fn default() -> Self {
        Self {
            final_time: 3.32,
            thrust: 0.1405,
            mu: 1.0,
            mass_rate: 0.0749,
        }
    }
}

pub fn orbit_raising() -> OrbitRaising {
    OrbitRaising::default()
}

const ORBIT_INITIAL_STATE: [f64; 5] = [1.0, 0.0, 0.0, 1.0, 1.0];

impl OptimalControlProblem for OrbitRaising {
    fn name(&self) -> &str {
        "orbit-raising"
    }

    fn state_dim(&self) -> usize {
        5
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn time_span(&self) -> (f64, f64) {
        (0.0, self.final_time)
    }

    fn dynamics(&self, _t: f64, x: &[f64], u: &[f64]) -> DVector<f64> {
        let [r, _, vr, vt, m] = [x[0], x[1], x[2], x[3], x[4]];
        let (sb, cb) = u[0].sin_cos();
        DVector::from_vec(vec![
            vr,
            vt / r,
            vt * vt / r - self.mu / (r * r) + self.thrust * sb / m,
            -vr * vt / r + self.thrust * cb / m,
            -self.mass_rate,
        ])
    }

    fn dynamics_jacobians(&self, _t: f64, x: &[f64], u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let [r, _, vr, vt, m] = [x[0], x[1], x[2], x[3], x[4]];
        let (sb, cb) = u[0].sin_cos();
        let (r2, r3, m2) = (r * r, r * r * r, m * m);
        let t = self.thrust;
        #[rustfmt::skip]
        let fx = DMatrix::from_row_slice(5, 5, &[
            0.0,                                   0.0, 1.0,      0.0,          0.0,
            -vt / r2,                              0.0, 0.0,      1.0 / r,      0.0,
            -vt * vt / r2 + 2.0 * self.mu / r3,    0.0, 0.0,      2.0 * vt / r, -t * sb / m2,
            vr * vt / r2,                          0.0, -vt / r,  -vr / r,      -t * cb / m2,
            0.0,                                   0.0, 0.0,      0.0,          0.0,
        ]);
        let fu = DMatrix::from_column_slice(5, 1, &[0.0, 0.0, t * cb / m, -t * sb / m, 0.0]);
        (fx, fu)
    }

    fn final_cost(&self, _t: f64, x: &[f64]) -> f64 {
        -x[0]
    }

    fn final_cost_gradient(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![-1.0, 0.0, 0.0, 0.0, 0.0])
    }

    fn initial_boundary_dim(&self) -> usize {
        5
    }

    fn initial_boundary(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(5, x.iter().zip(ORBIT_INITIAL_STATE).map(|(a, b)| a - b))
    }

    fn initial_boundary_jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(5, 5)
    }

    fn final_boundary_dim(&self) -> usize {
        2
    }

    fn final_boundary(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![x[2], x[3] - (self.mu / x[0]).sqrt()])
    }

    fn final_boundary_jacobian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        let r = x[0];
        let dr = 0.5 * self.mu.sqrt() * r.powf(-1.5);
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(2, 5, &[
            0.0, 0.0, 1.0, 0.0, 0.0,
            dr,  0.0, 0.0, 1.0, 0.0,
        ]);
        j
    }

    fn initial_guess(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let s = t / self.final_time;
        let x = DVector::from_vec(vec![
            1.0 + 0.5 * s,
            2.0 * s,
            0.0,
            1.0,
            1.0 - self.mass_rate * t,
        ]);
        let u = DVector::from_element(1, std::f64::consts::PI * s);
        (x, u)
    }
}

/// Scalar nonlinear problem with a closed-form solution:
/// minimise `-x(2)` subject to `x' = 5/2 (x u - x - u^2)`, `x(0) = 1`.
#[derive(Debug, Clone, Default)]
pub struct NonlinearIvp;

/// Closed-form optimum of [`NonlinearIvp`].
#[derive(Debug, Clone, Default)]
pub struct NonlinearIvpTruth;

pub fn nonlinear_ivp() -> (NonlinearIvp, NonlinearIvpTruth) {
    (NonlinearIvp, NonlinearIvpTruth)
}

impl OptimalControlProblem for NonlinearIvp {
    fn name(&self) -> &str {
        "nonlinear-ivp"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn time_span(&self) -> (f64, f64) {
        (0.0, 2.0)
    }

    fn dynamics(&self, _t: f64, x: &[f64], u: &[f64]) -> DVector<f64> {
        let (x, u) = (x[0], u[0]);
        DVector::from_element(1, 2.5 * (x * u - x - u * u))
    }

    fn dynamics_jacobians(&self, _t: f64, x: &[f64], u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let (x, u) = (x[0], u[0]);
        (
            DMatrix::from_element(1, 1, 2.5 * (u - 1.0)),
            DMatrix::from_element(1, 1, 2.5 * (x - 2.0 * u)),
        )
    }

    fn final_cost(&self, _t: f64, x: &[f64]) -> f64 {
        -x[0]
    }

    fn final_cost_gradient(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::from_element(1, -1.0)
    }

    fn initial_boundary_dim(&self) -> usize {
        1
    }

    fn initial_boundary(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_element(1, x[0] - 1.0)
    }

    fn initial_boundary_jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn initial_guess(&self, _t: f64) -> (DVector<f64>, DVector<f64>) {
        (DVector::from_element(1, 1.0), DVector::from_element(1, 0.5))
    }
}

impl NonlinearIvpTruth {
    pub fn x(t: f64) -> f64 {
        4.0 / (1.0 + 3.0 * (2.5 * t).exp())
    }

    pub fn u(t: f64) -> f64 {
        Self::x(t) / 2.0
    }

    pub fn lambda(t: f64) -> f64 {
        let e = (2.5 * t).exp();
        let denom = 6.0 + 9.0 * 5f64.exp() + (-5f64).exp();
        -(2.0 * (1.0 + 3.0 * e).ln() - 2.5 * t).exp() / denom
    }
}

impl AnalyticSolution for NonlinearIvpTruth {
    fn state(&self, t: f64) -> DVector<f64> {
        DVector::from_element(1, Self::x(t))
    }

    fn control(&self, t: f64) -> DVector<f64> {
        DVector::from_element(1, Self::u(t))
    }

    fn costate(&self, t: f64) -> DVector<f64> {
        DVector::from_element(1, Self::lambda(t))
    }
}

/// Look a benchmark up by its CLI name.
pub fn by_name(name: &str) -> Result<Box<dyn OptimalControlProblem>> {
    match name {
        "orbit-raising" => Ok(Box::new(orbit_raising())),
        "nonlinear-ivp" => Ok(Box::new(NonlinearIvp)),
        other => Err(Error::UnknownName {
            kind: "problem",
            name: other.to_string(),
        }),
    }
}

/// Analytic solution for a benchmark, if it has one.
pub fn truth_by_name(name: &str) -> Option<Box<dyn AnalyticSolution>> {
    match name {
        "nonlinear-ivp" => Some(Box::new(NonlinearIvpTruth)),
        _ => None,
    }
}

/// Worst relative mismatch between the analytic derivatives of `ocp` and
/// central finite differences (step `1e-6`) at `samples` random points
/// drawn around the initial guess.
///
/// The relative error of a derivative entry is `|analytic - fd| / max(1, |fd|)`.
pub fn derivative_check(ocp: &dyn OptimalControlProblem, samples: usize, seed: u64) -> f64 {
    const STEP: f64 = 1e-6;
    let mut rng = StdRng::seed_from_u64(seed);
    let (t0, tf) = ocp.time_span();
    let (nx, nu) = (ocp.state_dim(), ocp.control_dim());
    let mut worst: f64 = 0.0;
    let mut record = |analytic: f64, fd: f64| {
        worst = worst.max((analytic - fd).abs() / fd.abs().max(1.0));
    };

    for _ in 0..samples {
        let t = t0 + (tf - t0) * rng.random_range(0.05..0.95);
        let (xg, ug) = ocp.initial_guess(t);
        let x: Vec<f64> = xg.iter().map(|v| v + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = ug.iter().map(|v| v + 0.1 * rng.random_range(-1.0..1.0)).collect();

        let (fx, fu) = ocp.dynamics_jacobians(t, &x, &u);
        let (hx, hu) = ocp.running_cost_gradients(t, &x, &u);
        let psi0 = ocp.initial_cost_gradient(t, &x);
        let psif = ocp.final_cost_gradient(t, &x);
        let b0 = ocp.initial_boundary_jacobian(t, &x);
        let bf = ocp.final_boundary_jacobian(t, &x);

        for j in 0..nx {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += STEP;
            xm[j] -= STEP;
            let df = (ocp.dynamics(t, &xp, &u) - ocp.dynamics(t, &xm, &u)) / (2.0 * STEP);
            for i in 0..nx {
                record(fx[(i, j)], df[i]);
            }
            record(
                hx[j],
                (ocp.running_cost(t, &xp, &u) - ocp.running_cost(t, &xm, &u)) / (2.0 * STEP),
            );
            record(
                psi0[j],
                (ocp.initial_cost(t, &xp) - ocp.initial_cost(t, &xm)) / (2.0 * STEP),
            );
            record(
                psif[j],
                (ocp.final_cost(t, &xp) - ocp.final_cost(t, &xm)) / (2.0 * STEP),
            );
            let db0 = (ocp.initial_boundary(t, &xp) - ocp.initial_boundary(t, &xm)) / (2.0 * STEP);
            for i in 0..db0.len() {
                record(b0[(i, j)], db0[i]);
            }
            let dbf = (ocp.final_boundary(t, &xp) - ocp.final_boundary(t, &xm)) / (2.0 * STEP);
            for i in 0..dbf.len() {
                record(bf[(i, j)], dbf[i]);
            }
        }
        for j in 0..nu {
            let mut up = u.clone();
            let mut um = u.clone();
            up[j] += STEP;
            um[j] -= STEP;
            let df = (ocp.dynamics(t, &x, &up) - ocp.dynamics(t, &x, &um)) / (2.0 * STEP);
            for i in 0..nx {
                record(fu[(i, j)], df[i]);
            }
            record(
                hu[j],
                (ocp.running_cost(t, &x, &up) - ocp.running_cost(t, &x, &um)) / (2.0 * STEP),
            );
        }
    }
    worst
}
