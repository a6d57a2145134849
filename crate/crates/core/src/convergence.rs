//! Error metrics against an analytic optimum and convergence sweeps over N.

use rayon::prelude::*;

use crate::nlpsolve::SolverOptions;
use crate::ocp::{AnalyticSolution, OptimalControlProblem};
use crate::transcribe::{solve_ocp, Method, Solution};

/// Infinity-norm errors of one solve at the collocation nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Errors {
    pub state: f64,
    pub control: f64,
    pub costate: f64,
}

/// One row of a convergence sweep. Errors are `None` when the solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub method: Method,
    pub e_x: Option<f64>,
    pub e_u: Option<f64>,
    pub e_lambda: Option<f64>,
    pub converged: bool,
}

/// Maximum absolute errors over collocation nodes and components.
pub fn solution_errors(sol: &Solution, truth: &dyn AnalyticSolution) -> Errors {
    let mut e = Errors {
        state: 0.0,
        control: 0.0,
        costate: 0.0,
    };
    for (k, &t) in sol.collocation_times().iter().enumerate() {
        let worst = |row: nalgebra::RowDVector<f64>, exact: nalgebra::DVector<f64>| {
            row.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        e.state = e.state.max(worst(sol.states.row(k).into_owned(), truth.state(t)));
        e.control = e.control.max(worst(sol.controls.row(k).into_owned(), truth.control(t)));
        e.costate = e.costate.max(worst(sol.costates.row(k).into_owned(), truth.costate(t)));
    }
    e
}

/// Solve once and compare with `truth`.
pub fn run_one(
    ocp: &dyn OptimalControlProblem,
    truth: &dyn AnalyticSolution,
    n: usize,
    method: Method,
    opts: &SolverOptions,
) -> ConvergenceRecord {
    match solve_ocp(ocp, n, method, opts) {
        Ok((_, sol)) => {
            let e = solution_errors(&sol, truth);
            ConvergenceRecord {
                n,
                method,
                e_x: Some(e.state),
                e_u: Some(e.control),
                e_lambda: Some(e.costate),
                converged: true,
            }
        }
        Err(_) => ConvergenceRecord {
            n,
            method,
            e_x: None,
            e_u: None,
            e_lambda: None,
            converged: false,
        },
    }
}

/// Solve every `(method, n)` pair in parallel. Rows come back ordered by
/// method (as given) and then by `n`, whatever the completion order.
pub fn sweep(
    ocp: &dyn OptimalControlProblem,
    truth: &dyn AnalyticSolution,
    n_values: impl IntoIterator<Item = usize>,
    methods: &[Method],
    opts: &SolverOptions,
) -> Vec<ConvergenceRecord> {
    let ns: Vec<usize> = n_values.into_iter().collect();
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| ns.iter().map(move |&n| (m, n)))
        .collect();
    jobs.par_iter()
        .map(|&(method, n)| run_one(ocp, truth, n, method, opts))
        .collect()
}

/// Least-squares slope of `ln E_x` against `n` over converged records of
/// `method` with `lo <= n <= hi`. `None` with fewer than two points.
pub fn log_error_slope(records: &[ConvergenceRecord], method: Method, lo: usize, hi: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method && (lo..=hi).contains(&r.n))
        .filter_map(|r| r.e_x.filter(|e| *e > 0.0).map(|e| (r.n as f64, e.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
