//! Damped Newton method on the KKT system of an equality-constrained NLP.
//!
//! ```text
//! minimise f(z)  subject to  c(z) = 0
//! L(z, y) = f(z) + y^T c(z)
//! ```
//!
//! Each iteration solves
//!
//! ```text
//! [ H + dw I   J^T  ] [ dz ]     [ grad L ]
//! [ J         -dc I ] [ dy ] = - [ c      ]
//! ```
//!
//! with `H` the Lagrangian Hessian (forward differences of `grad L` unless
//! the problem supplies it), `dw` raised until the matrix has `n` positive
//! and `m` negative eigenvalues, and `dc > 0` only when `J` loses rank. The
//! step is backtracked on the Euclidean norm of `(grad L, c)`.
//!
//! Close to a KKT point the uncorrected step (`dw = 0`) is tried first. After
//! each accepted step the multipliers are replaced by the least-squares
//! estimate whenever that lowers `|grad L|`, which keeps them bounded when
//! `J` is rank deficient.

mod ldl;

pub use ldl::{Inertia, Ldl};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// An equality-constrained nonlinear program.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn initial_point(&self) -> DVector<f64>;
    fn objective(&self, z: &DVector<f64>) -> f64;
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64>;
    fn constraints(&self, z: &DVector<f64>) -> DVector<f64>;
    /// Dense `m x n` constraint Jacobian.
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64>;

    /// `grad f(z) + J(z)^T y`.
    fn lagrangian_gradient(&self, z: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.gradient(z) + self.jacobian(z).tr_mul(y)
    }

    /// Exact Lagrangian Hessian, if available. `None` selects finite differences.
    fn lagrangian_hessian(&self, _z: &DVector<f64>, _y: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    pub regularization_initial: f64,
    pub line_search_shrink: f64,
    pub min_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-10,
            max_iterations: 200,
            regularization_initial: 1e-8,
            line_search_shrink: 0.5,
            min_step: 1e-12,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = self.kkt_tolerance > 0.0
            && self.max_iterations > 0
            && self.regularization_initial > 0.0
            && self.line_search_shrink > 0.0
            && self.min_step > 0.0;
        if !positive {
            return Err(SolveError::InvalidOptions("all options must be positive".into()));
        }
        if self.kkt_tolerance >= 1e-4 {
            return Err(SolveError::InvalidOptions(format!(
                "kkt_tolerance {} must be below 1e-4",
                self.kkt_tolerance
            )));
        }
        if self.line_search_shrink >= 1.0 {
            return Err(SolveError::InvalidOptions("line_search_shrink must be < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    /// `max(|grad L|_inf, |c|_inf)` at the start of the iteration.
    pub kkt_norm: f64,
    /// Euclidean merit `|(grad L, c)|_2` at the start of the iteration.
    pub merit: f64,
    pub step_length: f64,
    pub primal_regularization: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_kkt_norm: f64,
    pub step_history: Vec<StepRecord>,
    /// Primal point and multipliers reached when the solve failed.
    pub last_iterate: Option<(DVector<f64>, DVector<f64>)>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {} iterations (kkt norm {:.3e})", .0.iterations, .0.final_kkt_norm)]
    MaxIterations(Box<SolveReport>),
    #[error("KKT matrix singular beyond the regularisation cap at iteration {}", .0.iterations)]
    SingularKkt(Box<SolveReport>),
    #[error("line search failed at iteration {} (kkt norm {:.3e})", .0.iterations, .0.final_kkt_norm)]
    LineSearchFailed(Box<SolveReport>),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

impl SolveError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            SolveError::MaxIterations(r) | SolveError::SingularKkt(r) | SolveError::LineSearchFailed(r) => Some(r),
            SolveError::InvalidOptions(_) => None,
        }
    }
}

/// Primal point, multipliers and the run report of a successful solve.
#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub z: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub report: SolveReport,
}

const FD_STEP: f64 = 1e-7;
const REGULARIZATION_MAX: f64 = 1e12;
const CONSTRAINT_REGULARIZATION: f64 = 1e-9;
const MAX_LINE_SEARCH_RETRIES: usize = 40;
const ZERO_PIVOT_TOL: f64 = 1e-13;
/// Below this KKT norm the plain Newton step is tried before any inertia
/// correction.
const LOCAL_PHASE: f64 = 1e-4;

/// Forward-difference Hessian of the Lagrangian, symmetrised.
pub fn fd_hessian<P: NlpProblem + ?Sized>(problem: &P, z: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let n = z.len();
    let base = problem.lagrangian_gradient(z, y);
    let mut h = DMatrix::zeros(n, n);
    let mut zp = z.clone();
    for i in 0..n {
        let step = FD_STEP * z[i].abs().max(1.0);
        zp[i] = z[i] + step;
        let actual = zp[i] - z[i];
        let g = problem.lagrangian_gradient(&zp, y);
        h.set_column(i, &((g - &base) / actual));
        zp[i] = z[i];
    }
    (&h + h.transpose()) * 0.5
}

fn kkt_matrix(h: &DMatrix<f64>, j: &DMatrix<f64>, dw: f64, dc: f64) -> DMatrix<f64> {
    let (n, m) = (h.nrows(), j.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for i in 0..n {
        k[(i, i)] += dw;
    }
    k.view_mut((n, 0), (m, n)).copy_from(j);
    k.view_mut((0, n), (n, m)).copy_from(&j.transpose());
    for i in 0..m {
        k[(n + i, n + i)] = -dc;
    }
    k
}

/// Least-squares multiplier estimate `argmin_y |grad f + J^T y|`.
fn least_squares_multipliers(g: &DVector<f64>, j: &DMatrix<f64>) -> DVector<f64> {
    let m = j.nrows();
    let mut jjt = j * j.transpose();
    let ridge = 1e-10 * jjt.amax().max(1.0);
    for i in 0..m {
        jjt[(i, i)] += ridge;
    }
    let rhs = -(j * g);
    jjt.cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(m))
}

struct Residual {
    lagrangian_gradient: DVector<f64>,
    constraints: DVector<f64>,
}

impl Residual {
    fn eval<P: NlpProblem + ?Sized>(problem: &P, z: &DVector<f64>, y: &DVector<f64>) -> Self {
        Self {
            lagrangian_gradient: problem.lagrangian_gradient(z, y),
            constraints: problem.constraints(z),
        }
    }

    fn inf_norm(&self) -> f64 {
        self.lagrangian_gradient.amax().max(self.constraints.amax())
    }

    fn merit(&self) -> f64 {
        (self.lagrangian_gradient.norm_squared() + self.constraints.norm_squared()).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.lagrangian_gradient.iter().chain(self.constraints.iter()).all(|v| v.is_finite())
    }
}

/// Uncorrected Newton step on the KKT residual, accepted only if the
/// residual norm decreases.
#[allow(clippy::too_many_arguments)]
fn local_newton_step<P: NlpProblem + ?Sized>(
    problem: &P,
    h: &DMatrix<f64>,
    jac: &DMatrix<f64>,
    rhs: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
    merit0: f64,
    base_scale: f64,
    opts: &SolverOptions,
) -> Option<(DVector<f64>, DVector<f64>, f64)> {
    let n = z.len();
    let mut dc = 0.0;
    let step = loop {
        let k = kkt_matrix(h, jac, 0.0, dc);
        let tol = ZERO_PIVOT_TOL * base_scale / k.amax().max(f64::MIN_POSITIVE);
        let f = Ldl::factor(&k, tol);
        if f.inertia().zero == 0 {
            break f.solve(rhs)?;
        }
        if dc > 0.0 {
            return None;
        }
        dc = CONSTRAINT_REGULARIZATION;
    };
    let dz = step.rows(0, n).into_owned();
    let dy = step.rows(n, step.len() - n).into_owned();
    let mut alpha = 1.0;
    while alpha >= opts.min_step {
        let zt = z + &dz * alpha;
        let yt = y + &dy * alpha;
        let trial = Residual::eval(problem, &zt, &yt);
        if trial.is_finite() && trial.merit() <= (1.0 - 1e-4 * alpha) * merit0 {
            return Some((zt, yt, alpha));
        }
        alpha *= opts.line_search_shrink;
    }
    None
}

fn fail(
    kind: fn(Box<SolveReport>) -> SolveError,
    mut report: SolveReport,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> SolveError {
    report.last_iterate = Some((z.clone(), y.clone()));
    kind(Box::new(report))
}

/// Solve `problem` from its initial point.
pub fn solve<P: NlpProblem + ?Sized>(problem: &P, opts: &SolverOptions) -> Result<NlpSolution, SolveError> {
    opts.validate()?;
    let (n, m) = (problem.num_variables(), problem.num_constraints());
    let mut z = problem.initial_point();
    assert_eq!(z.len(), n, "initial point has the wrong dimension");
    let mut y = least_squares_multipliers(&problem.gradient(&z), &problem.jacobian(&z));
    let mut report = SolveReport::default();
    let mut last_dw = 0.0;

    for iteration in 0..opts.max_iterations {
        let res = Residual::eval(problem, &z, &y);
        report.iterations = iteration;
        report.final_kkt_norm = res.inf_norm();
        if res.lagrangian_gradient.amax() <= opts.kkt_tolerance && res.constraints.amax() <= opts.kkt_tolerance {
            report.converged = true;
            return Ok(NlpSolution {
                z,
                multipliers: y,
                report,
            });
        }

        let h = problem
            .lagrangian_hessian(&z, &y)
            .unwrap_or_else(|| fd_hessian(problem, &z, &y));
        let jac = problem.jacobian(&z);
        let rhs = -DVector::from_iterator(
            n + m,
            res.lagrangian_gradient.iter().chain(res.constraints.iter()).copied(),
        );
        let merit0 = res.merit();

        let base_scale = h.amax().max(jac.amax());
        let mut dw = 0.0;
        let mut dc = 0.0;
        let mut accepted = None;
        if res.inf_norm() <= LOCAL_PHASE {
            accepted = local_newton_step(problem, &h, &jac, &rhs, &z, &y, merit0, base_scale, opts);
        }
        for _ in 0..MAX_LINE_SEARCH_RETRIES {
            if accepted.is_some() {
                break;
            }
            // inertia correction
            let factor = loop {
                // zero pivots are judged against the unregularised scale
                let k = kkt_matrix(&h, &jac, dw, dc);
                let tol = ZERO_PIVOT_TOL * base_scale / k.amax().max(f64::MIN_POSITIVE);
                let f = Ldl::factor(&k, tol);
                let inertia = f.inertia();
                if inertia.positive == n && inertia.negative == m && inertia.zero == 0 {
                    break Some(f);
                }
                if inertia.zero > 0 && dc == 0.0 {
                    dc = CONSTRAINT_REGULARIZATION;
                    continue;
                }
                dw = if dw == 0.0 {
                    opts.regularization_initial.max(last_dw / 4.0)
                } else {
                    2.0 * dw
                };
                if dw > REGULARIZATION_MAX {
                    break None;
                }
            };
            let Some(factor) = factor else {
                return Err(fail(SolveError::SingularKkt, report, &z, &y));
            };
            let Some(step) = factor.solve(&rhs) else {
                return Err(fail(SolveError::SingularKkt, report, &z, &y));
            };
            let dz = step.rows(0, n).into_owned();
            let dy = step.rows(n, m).into_owned();

            let mut alpha = 1.0;
            while alpha >= opts.min_step {
                let zt = &z + &dz * alpha;
                let yt = &y + &dy * alpha;
                let trial = Residual::eval(problem, &zt, &yt);
                if trial.is_finite() && trial.merit() <= (1.0 - 1e-4 * alpha) * merit0 {
                    accepted = Some((zt, yt, alpha));
                    break;
                }
                alpha *= opts.line_search_shrink;
            }
            if accepted.is_some() {
                break;
            }
            // no acceptable step along this direction: regularise harder
            dw = if dw == 0.0 {
                opts.regularization_initial.max(last_dw)
            } else {
                2.0 * dw
            };
            if dw > REGULARIZATION_MAX {
                break;
            }
        }

        let Some((zn, yn, alpha)) = accepted else {
            return Err(fail(SolveError::LineSearchFailed, report, &z, &y));
        };
        report.step_history.push(StepRecord {
            iteration,
            kkt_norm: res.inf_norm(),
            merit: merit0,
            step_length: alpha,
            primal_regularization: dw,
        });
        if dw > 0.0 {
            last_dw = dw;
        }
        // with rank-deficient constraints the Newton multipliers can drift
        // along the null space of J^T; keep the least-squares estimate if it
        // fits stationarity better
        let y_ls = least_squares_multipliers(&problem.gradient(&zn), &problem.jacobian(&zn));
        let yn = if problem.lagrangian_gradient(&zn, &y_ls).norm() < problem.lagrangian_gradient(&zn, &yn).norm() {
            y_ls
        } else {
            yn
        };
        z = zn;
        y = yn;
    }

    let res = Residual::eval(problem, &z, &y);
    report.iterations = opts.max_iterations;
    report.final_kkt_norm = res.inf_norm();
    Err(fail(SolveError::MaxIterations, report, &z, &y))
}
