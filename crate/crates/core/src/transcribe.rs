//! Direct transcription of an [`OptimalControlProblem`] into an
//! equality-constrained NLP, and the covector mapping back to costates.
//!
//! Decision vector layout: states at every state node (`N + 1` nodes for the
//! new method, collocation order with the exceptional sample last; `N` for
//! the standard method), node-major, followed by controls at the `N`
//! collocation nodes.
//!
//! Constraint rows: `N * n_x` defects
//! `f(t_k, x_k, u_k) - 2/(tf - t0) sum_i D_ki x_i`, then the initial boundary
//! rows, then the final boundary rows.
//!
//! The solver Lagrangian is `objective + y^T constraints`. With this sign the
//! costate at collocation node `k` is `lambda_k = 2 y_k / (w_k (tf - t0))`
//! and the boundary multipliers are used as they come.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::discretization::{build_dual_d, build_new_lobatto_d, build_standard_lobatto_d, DiffMatrix};
use crate::error::{Error, Result};
use crate::nlpsolve::{self, NlpProblem, SolveReport, SolverOptions};
use crate::ocp::OptimalControlProblem;
use crate::orthopoly::{legendre_eval, lobatto_nodes, NodeSet};

/// Discretisation used for the differential constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// `N x (N + 1)` matrix with the exceptional sample.
    NewLobatto,
    /// Square `N x N` matrix on the Lobatto nodes.
    StandardLobatto,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::NewLobatto => "new-lobatto",
            Method::StandardLobatto => "standard-lobatto",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "new-lobatto" | "new" => Ok(Method::NewLobatto),
            "standard-lobatto" | "standard" => Ok(Method::StandardLobatto),
            other => Err(Error::UnknownName {
                kind: "method",
                name: other.to_string(),
            }),
        }
    }
}

/// Index map of the decision vector and constraint rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_x: usize,
    pub n_u: usize,
    /// Number of collocation nodes `N`.
    pub collocation_nodes: usize,
    /// `N + 1` for the new method, `N` for the standard one.
    pub state_nodes: usize,
    pub initial_rows: usize,
    pub final_rows: usize,
}

impl Layout {
    pub fn state(&self, node: usize, component: usize) -> usize {
        node * self.n_x + component
    }

    pub fn control(&self, node: usize, component: usize) -> usize {
        self.state_nodes * self.n_x + node * self.n_u + component
    }

    pub fn num_variables(&self) -> usize {
        self.state_nodes * self.n_x + self.collocation_nodes * self.n_u
    }

    pub fn defect_row(&self, node: usize, component: usize) -> usize {
        node * self.n_x + component
    }

    pub fn initial_row(&self, i: usize) -> usize {
        self.collocation_nodes * self.n_x + i
    }

    pub fn final_row(&self, i: usize) -> usize {
        self.collocation_nodes * self.n_x + self.initial_rows + i
    }

    pub fn num_constraints(&self) -> usize {
        self.collocation_nodes * self.n_x + self.initial_rows + self.final_rows
    }
}

/// Transcribed NLP for one problem, node set and method.
pub struct Transcript<'a> {
    ocp: &'a dyn OptimalControlProblem,
    nodes: NodeSet,
    d: DiffMatrix,
    method: Method,
    layout: Layout,
    /// Physical times of the state nodes, in internal order.
    times: Vec<f64>,
}

impl<'a> Transcript<'a> {
    pub fn new(ocp: &'a dyn OptimalControlProblem, nodes: NodeSet, method: Method) -> Result<Self> {
        let (t0, tf) = ocp.time_span();
        if !(tf > t0) {
            return Err(Error::InvalidArgument(format!("time span [{t0}, {tf}] is empty")));
        }
        let (n_x, n_u) = (ocp.state_dim(), ocp.control_dim());
        if n_x == 0 {
            return Err(Error::DimensionMismatch("problem has no states".into()));
        }
        let n = nodes.n();
        let d = match method {
            Method::NewLobatto => build_new_lobatto_d(&nodes),
            Method::StandardLobatto => build_standard_lobatto_d(&nodes),
        };
        let layout = Layout {
            n_x,
            n_u,
            collocation_nodes: n,
            state_nodes: d.cols(),
            initial_rows: ocp.initial_boundary_dim(),
            final_rows: ocp.final_boundary_dim(),
        };

        let (x0, u0) = ocp.initial_guess(t0);
        let probe = ocp.dynamics(t0, x0.as_slice(), u0.as_slice());
        let (fx, fu) = ocp.dynamics_jacobians(t0, x0.as_slice(), u0.as_slice());
        let b0 = ocp.initial_boundary(t0, x0.as_slice());
        let bf = ocp.final_boundary(tf, x0.as_slice());
        let checks = [
            (x0.len() == n_x && u0.len() == n_u, "initial guess"),
            (probe.len() == n_x, "dynamics output"),
            (fx.shape() == (n_x, n_x) && fu.shape() == (n_x, n_u), "dynamics Jacobians"),
            (b0.len() == layout.initial_rows, "initial boundary"),
            (bf.len() == layout.final_rows, "final boundary"),
        ];
        if let Some((_, what)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::DimensionMismatch(format!("{what} of '{}'", ocp.name())));
        }

        let times = d.col_nodes.iter().map(|&tau| map_time(tau, t0, tf)).collect();
        Ok(Self {
            ocp,
            nodes,
            d,
            method,
            layout,
            times,
        })
    }

    pub fn ocp(&self) -> &dyn OptimalControlProblem {
        self.ocp
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn diff_matrix(&self) -> &DiffMatrix {
        &self.d
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Physical times of the state nodes (collocation first, exceptional last).
    pub fn state_times(&self) -> &[f64] {
        &self.times
    }

    fn time_scale(&self) -> f64 {
        let (t0, tf) = self.ocp.time_span();
        2.0 / (tf - t0)
    }

    fn state_at<'z>(&self, z: &'z DVector<f64>, node: usize) -> &'z [f64] {
        let start = self.layout.state(node, 0);
        &z.as_slice()[start..start + self.layout.n_x]
    }

    fn control_at<'z>(&self, z: &'z DVector<f64>, node: usize) -> &'z [f64] {
        let start = self.layout.control(node, 0);
        &z.as_slice()[start..start + self.layout.n_u]
    }

    fn first_and_last(&self) -> (usize, usize) {
        (0, self.layout.collocation_nodes - 1)
    }

    /// Decision vector sampled from `x(t)` and `u(t)`.
    pub fn pack<X, U>(&self, state: X, control: U) -> DVector<f64>
    where
        X: Fn(f64) -> DVector<f64>,
        U: Fn(f64) -> DVector<f64>,
    {
        let l = &self.layout;
        let mut z = DVector::zeros(l.num_variables());
        for (i, &t) in self.times.iter().enumerate() {
            z.rows_mut(l.state(i, 0), l.n_x).copy_from(&state(t));
        }
        for k in 0..l.collocation_nodes {
            z.rows_mut(l.control(k, 0), l.n_u).copy_from(&control(self.times[k]));
        }
        z
    }

    /// Costates at the collocation nodes from raw defect multipliers.
    pub fn extract_costates(&self, multipliers: &DVector<f64>) -> Result<DMatrix<f64>> {
        let l = &self.layout;
        if multipliers.len() != l.num_constraints() {
            return Err(Error::DimensionMismatch(format!(
                "{} multipliers for {} constraint rows",
                multipliers.len(),
                l.num_constraints()
            )));
        }
        let (t0, tf) = self.ocp.time_span();
        let w = self.nodes.weights();
        Ok(DMatrix::from_fn(l.collocation_nodes, l.n_x, |k, j| {
            2.0 * multipliers[l.defect_row(k, j)] / (w[k] * (tf - t0))
        }))
    }

    /// Assemble a [`Solution`] from a primal point and raw multipliers.
    pub fn solution(&self, z: &DVector<f64>, multipliers: &DVector<f64>, report: SolveReport) -> Result<Solution> {
        let l = &self.layout;
        let costates = self.extract_costates(multipliers)?;
        let states = DMatrix::from_fn(l.state_nodes, l.n_x, |i, j| z[l.state(i, j)]);
        let controls = DMatrix::from_fn(l.collocation_nodes, l.n_u, |k, j| z[l.control(k, j)]);
        let initial_multipliers =
            DVector::from_fn(l.initial_rows, |i, _| multipliers[l.initial_row(i)]);
        let final_multipliers = DVector::from_fn(l.final_rows, |i, _| multipliers[l.final_row(i)]);
        Ok(Solution {
            method: self.method,
            times: self.times.clone(),
            collocation_nodes: l.collocation_nodes,
            states,
            controls,
            costates,
            multipliers_raw: multipliers.clone(),
            initial_multipliers,
            final_multipliers,
            objective_value: self.objective(z),
            kkt_residual: report.final_kkt_norm,
            report,
        })
    }
}

/// `t(tau) = (tf - t0)/2 tau + (tf + t0)/2`.
pub fn map_time(tau: f64, t0: f64, tf: f64) -> f64 {
    0.5 * (tf - t0) * tau + 0.5 * (tf + t0)
}

impl NlpProblem for Transcript<'_> {
    fn num_variables(&self) -> usize {
        self.layout.num_variables()
    }

    fn num_constraints(&self) -> usize {
        self.layout.num_constraints()
    }

    fn initial_point(&self) -> DVector<f64> {
        self.pack(|t| self.ocp.initial_guess(t).0, |t| self.ocp.initial_guess(t).1)
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        let (t0, tf) = self.ocp.time_span();
        let (first, last) = self.first_and_last();
        let w = self.nodes.weights();
        let running: f64 = (0..self.layout.collocation_nodes)
            .map(|k| w[k] * self.ocp.running_cost(self.times[k], self.state_at(z, k), self.control_at(z, k)))
            .sum();
        self.ocp.initial_cost(t0, self.state_at(z, first))
            + self.ocp.final_cost(tf, self.state_at(z, last))
            + 0.5 * (tf - t0) * running
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let (t0, tf) = self.ocp.time_span();
        let (first, last) = self.first_and_last();
        let l = &self.layout;
        let w = self.nodes.weights();
        let half = 0.5 * (tf - t0);
        let mut g = DVector::zeros(l.num_variables());
        for k in 0..l.collocation_nodes {
            let (hx, hu) = self
                .ocp
                .running_cost_gradients(self.times[k], self.state_at(z, k), self.control_at(z, k));
            for j in 0..l.n_x {
                g[l.state(k, j)] += half * w[k] * hx[j];
            }
            for j in 0..l.n_u {
                g[l.control(k, j)] += half * w[k] * hu[j];
            }
        }
        let g0 = self.ocp.initial_cost_gradient(t0, self.state_at(z, first));
        let gf = self.ocp.final_cost_gradient(tf, self.state_at(z, last));
        for j in 0..l.n_x {
            g[l.state(first, j)] += g0[j];
            g[l.state(last, j)] += gf[j];
        }
        g
    }

    fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        let (t0, tf) = self.ocp.time_span();
        let (first, last) = self.first_and_last();
        let l = &self.layout;
        let c = self.time_scale();
        let mut out = DVector::zeros(l.num_constraints());
        for k in 0..l.collocation_nodes {
            let f = self.ocp.dynamics(self.times[k], self.state_at(z, k), self.control_at(z, k));
            for j in 0..l.n_x {
                let mut deriv = 0.0;
                for i in 0..l.state_nodes {
                    deriv += self.d.entries[(k, i)] * z[l.state(i, j)];
                }
                out[l.defect_row(k, j)] = f[j] - c * deriv;
            }
        }
        let b0 = self.ocp.initial_boundary(t0, self.state_at(z, first));
        for i in 0..l.initial_rows {
            out[l.initial_row(i)] = b0[i];
        }
        let bf = self.ocp.final_boundary(tf, self.state_at(z, last));
        for i in 0..l.final_rows {
            out[l.final_row(i)] = bf[i];
        }
        out
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (t0, tf) = self.ocp.time_span();
        let (first, last) = self.first_and_last();
        let l = &self.layout;
        let c = self.time_scale();
        let mut jac = DMatrix::zeros(l.num_constraints(), l.num_variables());
        for k in 0..l.collocation_nodes {
            let (fx, fu) = self
                .ocp
                .dynamics_jacobians(self.times[k], self.state_at(z, k), self.control_at(z, k));
            for j in 0..l.n_x {
                let row = l.defect_row(k, j);
                for i in 0..l.state_nodes {
                    jac[(row, l.state(i, j))] -= c * self.d.entries[(k, i)];
                }
                for jj in 0..l.n_x {
                    jac[(row, l.state(k, jj))] += fx[(j, jj)];
                }
                for jj in 0..l.n_u {
                    jac[(row, l.control(k, jj))] = fu[(j, jj)];
                }
            }
        }
        let b0 = self.ocp.initial_boundary_jacobian(t0, self.state_at(z, first));
        for i in 0..l.initial_rows {
            for j in 0..l.n_x {
                jac[(l.initial_row(i), l.state(first, j))] = b0[(i, j)];
            }
        }
        let bf = self.ocp.final_boundary_jacobian(tf, self.state_at(z, last));
        for i in 0..l.final_rows {
            for j in 0..l.n_x {
                jac[(l.final_row(i), l.state(last, j))] = bf[(i, j)];
            }
        }
        jac
    }

    fn lagrangian_gradient(&self, z: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (t0, tf) = self.ocp.time_span();
        let (first, last) = self.first_and_last();
        let l = &self.layout;
        let c = self.time_scale();
        let mut g = self.gradient(z);
        for k in 0..l.collocation_nodes {
            let (fx, fu) = self
                .ocp
                .dynamics_jacobians(self.times[k], self.state_at(z, k), self.control_at(z, k));
            let yk = y.rows(l.defect_row(k, 0), l.n_x);
            let gx = fx.tr_mul(&yk);
            let gu = fu.tr_mul(&yk);
            for j in 0..l.n_x {
                g[l.state(k, j)] += gx[j];
            }
            for j in 0..l.n_u {
                g[l.control(k, j)] += gu[j];
            }
        }
        // linear differentiation part: -c D^T y, per state component
        for i in 0..l.state_nodes {
            for j in 0..l.n_x {
                let mut s = 0.0;
                for k in 0..l.collocation_nodes {
                    s += self.d.entries[(k, i)] * y[l.defect_row(k, j)];
                }
                g[l.state(i, j)] -= c * s;
            }
        }
        if l.initial_rows > 0 {
            let b0 = self.ocp.initial_boundary_jacobian(t0, self.state_at(z, first));
            let nu = y.rows(l.initial_row(0), l.initial_rows);
            let add = b0.tr_mul(&nu);
            for j in 0..l.n_x {
                g[l.state(first, j)] += add[j];
            }
        }
        if l.final_rows > 0 {
            let bf = self.ocp.final_boundary_jacobian(tf, self.state_at(z, last));
            let nu = y.rows(l.final_row(0), l.final_rows);
            let add = bf.tr_mul(&nu);
            for j in 0..l.n_x {
                g[l.state(last, j)] += add[j];
            }
        }
        g
    }
}

/// Discrete trajectory, costates and multipliers of a solved transcript.
#[derive(Debug, Clone)]
pub struct Solution {
    pub method: Method,
    /// State-node times in internal order (collocation, then exceptional).
    pub times: Vec<f64>,
    pub collocation_nodes: usize,
    /// One row per state node, internal order.
    pub states: DMatrix<f64>,
    /// One row per collocation node.
    pub controls: DMatrix<f64>,
    /// One row per collocation node, endpoints included.
    pub costates: DMatrix<f64>,
    pub multipliers_raw: DVector<f64>,
    pub initial_multipliers: DVector<f64>,
    pub final_multipliers: DVector<f64>,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub report: SolveReport,
}

/// One output row. Control and costate are absent at the exceptional time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub t: f64,
    pub state: Vec<f64>,
    pub control: Option<Vec<f64>>,
    pub costate: Option<Vec<f64>>,
}

impl Solution {
    /// Rows sorted by time.
    pub fn rows_by_time(&self) -> Vec<SolutionRow> {
        let mut rows: Vec<SolutionRow> = self
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let collocated = i < self.collocation_nodes;
                SolutionRow {
                    t,
                    state: self.states.row(i).iter().copied().collect(),
                    control: collocated.then(|| self.controls.row(i).iter().copied().collect()),
                    costate: collocated.then(|| self.costates.row(i).iter().copied().collect()),
                }
            })
            .collect();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        rows
    }

    pub fn collocation_times(&self) -> &[f64] {
        &self.times[..self.collocation_nodes]
    }
}

/// Transcribe `ocp` with `n` nodes and solve it.
pub fn solve_ocp<'a>(
    ocp: &'a dyn OptimalControlProblem,
    n: usize,
    method: Method,
    opts: &SolverOptions,
) -> Result<(Transcript<'a>, Solution)> {
    let transcript = Transcript::new(ocp, lobatto_nodes(n)?, method)?;
    let sol = nlpsolve::solve(&transcript, opts)?;
    let solution = transcript.solution(&sol.z, &sol.multipliers, sol.report)?;
    Ok((transcript, solution))
}

/// Infinity norms of the discrete KKT conditions written with the KKT
/// Hamiltonian `H_k = (tf - t0)/2 w_k (h_k + lambda_k^T f_k) + endpoint terms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `(tf - t0)/2 w_k f_k - w_k sum_i D_ki x_i`.
    pub state_equation: f64,
    /// `grad_x H_k + w_k sum_i D'_ki lambda_i - (lambda_N delta_Nk - lambda_1 delta_1k)`.
    pub adjoint: f64,
    /// `sum_i w_i lambda_i D_{i,xi}`.
    pub exceptional_column: f64,
    /// `grad_u H_k`.
    pub control_stationarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.state_equation
            .max(self.adjoint)
            .max(self.exceptional_column)
            .max(self.control_stationarity)
    }
}

/// `max_j |sum_i w_i lambda_ij D_{i,xi}|` over state components.
pub fn exceptional_column_residual(ns: &NodeSet, d: &DiffMatrix, costates: &DMatrix<f64>) -> f64 {
    let xi = ns.exceptional_index();
    let w = ns.weights();
    (0..costates.ncols())
        .map(|j| {
            (0..ns.n())
                .map(|i| w[i] * costates[(i, j)] * d.entries[(i, xi)])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Evaluate the discrete KKT conditions of a new-method solution using the
/// dual differentiation matrix for the adjoint equation.
pub fn kkt_residuals(t: &Transcript<'_>, sol: &Solution) -> Result<KktResiduals> {
    if t.method() != Method::NewLobatto {
        return Err(Error::InvalidArgument(
            "discrete KKT residuals are defined for the new Lobatto method".into(),
        ));
    }
    let ns = t.nodes();
    let d = t.diff_matrix();
    let dual = build_dual_d(ns, d)?;
    let ocp = t.ocp();
    let l = t.layout();
    let (t0, tf) = ocp.time_span();
    let half = 0.5 * (tf - t0);
    let w = ns.weights();
    let n = ns.n();
    let (first, last) = (0, n - 1);
    let lam = &sol.costates;

    let mut state_equation: f64 = 0.0;
    let mut adjoint: f64 = 0.0;
    let mut control_stationarity: f64 = 0.0;
    for k in 0..n {
        let x: Vec<f64> = sol.states.row(k).iter().copied().collect();
        let u: Vec<f64> = sol.controls.row(k).iter().copied().collect();
        let tk = sol.times[k];
        let f = ocp.dynamics(tk, &x, &u);
        let (fx, fu) = ocp.dynamics_jacobians(tk, &x, &u);
        let (hx, hu) = ocp.running_cost_gradients(tk, &x, &u);
        let lam_k = lam.row(k).transpose();

        for j in 0..l.n_x {
            let dx: f64 = (0..l.state_nodes).map(|i| d.entries[(k, i)] * sol.states[(i, j)]).sum();
            state_equation = state_equation.max((half * w[k] * f[j] - w[k] * dx).abs());
        }

        let mut grad_x = (hx + fx.tr_mul(&lam_k)) * (half * w[k]);
        if k == first {
            grad_x += ocp.initial_cost_gradient(t0, &x);
            if l.initial_rows > 0 {
                grad_x += ocp.initial_boundary_jacobian(t0, &x).tr_mul(&sol.initial_multipliers);
            }
        }
        if k == last {
            grad_x += ocp.final_cost_gradient(tf, &x);
            if l.final_rows > 0 {
                grad_x += ocp.final_boundary_jacobian(tf, &x).tr_mul(&sol.final_multipliers);
            }
        }
        for j in 0..l.n_x {
            let dual_term: f64 = (0..n).map(|i| dual.entries[(k, i)] * lam[(i, j)]).sum();
            let mut r = grad_x[j] + w[k] * dual_term;
            if k == last {
                r -= lam[(last, j)];
            }
            if k == first {
                r += lam[(first, j)];
            }
            adjoint = adjoint.max(r.abs());
        }

        let grad_u = (hu + fu.tr_mul(&lam_k)) * (half * w[k]);
        control_stationarity = control_stationarity.max(grad_u.amax());
    }

    Ok(KktResiduals {
        state_equation,
        adjoint,
        exceptional_column: exceptional_column_residual(ns, d, lam),
        control_stationarity,
    })
}

/// Legendre coefficients `c_0 .. c_{N-1}` of the degree-`(N - 1)` interpolant
/// of `samples` at the collocation nodes, using the discrete Gauss-Lobatto
/// inner product.
pub fn legendre_coefficients(ns: &NodeSet, samples: &[f64]) -> Vec<f64> {
    let n = ns.n();
    assert_eq!(samples.len(), n);
    let w = ns.weights();
    let c = ns.collocation();
    (0..n)
        .map(|j| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..n {
                let p = legendre_eval(j, c[k]).0;
                num += w[k] * samples[k] * p;
                den += w[k] * p * p;
            }
            num / den
        })
        .collect()
}

/// Largest `|c_{N-1}| / max_k |lambda_k|` over the costate components, each
/// component scaled by its own magnitude. Identically zero components count
/// as zero.
pub fn costate_top_coefficient_ratio(ns: &NodeSet, costates: &DMatrix<f64>) -> f64 {
    (0..costates.ncols())
        .map(|j| {
            let col: Vec<f64> = costates.column(j).iter().copied().collect();
            let scale = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                return 0.0;
            }
            legendre_coefficients(ns, &col).last().copied().unwrap_or(0.0).abs() / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::{NonlinearIvp, NonlinearIvpTruth};
    use approx::assert_abs_diff_eq;

    /// x' = 0 with unit running cost on [t0, tf].
    struct Constant {
        span: (f64, f64),
    }

    impl OptimalControlProblem for Constant {
        fn name(&self) -> &str {
            "constant"
        }
        fn state_dim(&self) -> usize {
            2
        }
        fn control_dim(&self) -> usize {
            1
        }
        fn time_span(&self) -> (f64, f64) {
            self.span
        }
        fn dynamics(&self, _t: f64, _x: &[f64], _u: &[f64]) -> DVector<f64> {
            DVector::zeros(2)
        }
        fn dynamics_jacobians(&self, _t: f64, _x: &[f64], _u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
            (DMatrix::zeros(2, 2), DMatrix::zeros(2, 1))
        }
        fn running_cost(&self, _t: f64, _x: &[f64], _u: &[f64]) -> f64 {
            1.0
        }
        fn initial_guess(&self, _t: f64) -> (DVector<f64>, DVector<f64>) {
            (DVector::from_vec(vec![3.0, -1.0]), DVector::zeros(1))
        }
    }

    fn fd_jacobian(t: &Transcript<'_>, z: &DVector<f64>) -> DMatrix<f64> {
        let h = 1e-6;
        let mut jac = DMatrix::zeros(t.num_constraints(), t.num_variables());
        for i in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            jac.set_column(i, &((t.constraints(&zp) - t.constraints(&zm)) / (2.0 * h)));
        }
        jac
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::NewLobatto, Method::StandardLobatto] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("gauss".parse::<Method>().is_err());
    }

    #[test]
    fn layout_dimensions() {
        let p = NonlinearIvp;
        let t = Transcript::new(&p, lobatto_nodes(6).unwrap(), Method::NewLobatto).unwrap();
        assert_eq!(t.num_variables(), 7 + 6);
        assert_eq!(t.num_constraints(), 6 + 1);
        let s = Transcript::new(&p, lobatto_nodes(6).unwrap(), Method::StandardLobatto).unwrap();
        assert_eq!(s.num_variables(), 6 + 6);
        assert_eq!(s.layout().state_nodes, 6);
    }

    #[test]
    fn constant_dynamics_and_unit_cost() {
        for span in [(0.0, 1.0), (-2.0, 5.5)] {
            let p = Constant { span };
            for method in [Method::NewLobatto, Method::StandardLobatto] {
                let t = Transcript::new(&p, lobatto_nodes(7).unwrap(), method).unwrap();
                let z = t.initial_point();
                assert!(t.constraints(&z).amax() <= 1e-12);
                assert_abs_diff_eq!(t.objective(&z), span.1 - span.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn analytic_samples_nearly_feasible() {
        let p = NonlinearIvp;
        let residual = |n: usize| {
            let t = Transcript::new(&p, lobatto_nodes(n).unwrap(), Method::NewLobatto).unwrap();
            let z = t.pack(|s| DVector::from_element(1, NonlinearIvpTruth::x(s)), |s| {
                DVector::from_element(1, NonlinearIvpTruth::u(s))
            });
            (t.constraints(&z).amax(), t.objective(&z))
        };
        // 50-digit reference residuals of the sampled optimum
        for (n, reference) in [(10, 1.8932e-4), (15, 1.9295e-7), (20, 3.9246e-10), (25, 1.5615e-12)] {
            let (r, obj) = residual(n);
            assert!((r - reference).abs() <= 1e-3 * reference + 2e-13, "n = {n}: {r:e}");
            assert_abs_diff_eq!(obj, -NonlinearIvpTruth::x(2.0), epsilon = 1e-15);
        }
        assert!(residual(15).0 <= 1e-6);
        assert!(residual(26).0 <= 1e-12);
    }

    #[test]
    fn jacobian_and_lagrangian_gradient_match_differences() {
        let p = crate::ocp::orbit_raising();
        for method in [Method::NewLobatto, Method::StandardLobatto] {
            let t = Transcript::new(&p, lobatto_nodes(6).unwrap(), method).unwrap();
            let mut z = t.initial_point();
            for (i, v) in z.iter_mut().enumerate() {
                *v += 0.01 * ((i as f64) * 1.3).sin();
            }
            let jac = t.jacobian(&z);
            let fd = fd_jacobian(&t, &z);
            for (a, b) in jac.iter().zip(fd.iter()) {
                assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
            }
            let y = DVector::from_fn(t.num_constraints(), |i, _| (i as f64 * 0.7).cos());
            let lg = t.lagrangian_gradient(&z, &y);
            let reference = t.gradient(&z) + jac.tr_mul(&y);
            assert!((lg - reference).amax() <= 1e-12);
            // defect state blocks are -2/(tf - t0) D where f does not depend on x
            let c = 2.0 / 3.32;
            let l = *t.layout();
            for k in 0..l.collocation_nodes {
                for i in 0..l.state_nodes {
                    if i != k {
                        let v = jac[(l.defect_row(k, 4), l.state(i, 4))];
                        assert_abs_diff_eq!(v, -c * t.diff_matrix().entries[(k, i)], epsilon = 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn costate_mapping() {
        let p = NonlinearIvp;
        let t = Transcript::new(&p, lobatto_nodes(5).unwrap(), Method::NewLobatto).unwrap();
        let zero = DVector::zeros(t.num_constraints());
        assert_eq!(t.extract_costates(&zero).unwrap().amax(), 0.0);
        let y = DVector::from_fn(t.num_constraints(), |i, _| i as f64 + 1.0);
        let lam = t.extract_costates(&y).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(lam[(k, 0)], 2.0 * (k as f64 + 1.0) / (t.nodes().weights()[k] * 2.0), epsilon = 1e-14);
        }
        // doubling the horizon halves the costates
        let wide = Constant { span: (0.0, 4.0) };
        let narrow = Constant { span: (0.0, 2.0) };
        let tw = Transcript::new(&wide, lobatto_nodes(5).unwrap(), Method::NewLobatto).unwrap();
        let tn = Transcript::new(&narrow, lobatto_nodes(5).unwrap(), Method::NewLobatto).unwrap();
        let y = DVector::from_element(tw.num_constraints(), 0.3);
        let lw = tw.extract_costates(&y).unwrap();
        let ln = tn.extract_costates(&y).unwrap();
        assert!((lw * 2.0 - ln).amax() <= 1e-15);
        assert!(tw.extract_costates(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn exceptional_column_condition() {
        let ns = lobatto_nodes(9).unwrap();
        let d = build_new_lobatto_d(&ns);
        let c = ns.collocation();
        // degree <= N - 2 samples satisfy the condition identically
        let poly = DMatrix::from_fn(9, 2, |k, j| {
            if j == 0 {
                1.0 - 2.0 * c[k] + c[k].powi(7)
            } else {
                legendre_eval(7, c[k]).0
            }
        });
        assert!(exceptional_column_residual(&ns, &d, &poly) <= 1e-10);
        // P_{N-1} itself leaves sum w P_{N-1}^2 > 0
        let top = DMatrix::from_fn(9, 1, |k, _| legendre_eval(8, c[k]).0);
        assert!(exceptional_column_residual(&ns, &d, &top) >= 1e-3);
        let coeffs = legendre_coefficients(&ns, top.column(0).as_slice());
        assert_abs_diff_eq!(coeffs[8], 1.0, epsilon = 1e-12);
        assert!(coeffs[..8].iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn solved_nonlinear_ivp_satisfies_discrete_kkt() {
        let p = NonlinearIvp;
        let (t, sol) = solve_ocp(&p, 25, Method::NewLobatto, &SolverOptions::default()).unwrap();
        assert!(sol.report.converged);
        assert_abs_diff_eq!(sol.costates[(24, 0)], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.costates[(0, 0)], NonlinearIvpTruth::lambda(0.0), epsilon = 1e-6);
        assert_abs_diff_eq!(sol.objective_value, -NonlinearIvpTruth::x(2.0), epsilon = 1e-10);
        let r = kkt_residuals(&t, &sol).unwrap();
        assert!(r.max() <= 1e-7, "{r:?}");
        assert!(costate_top_coefficient_ratio(t.nodes(), &sol.costates) <= 1e-6);

        let rows = sol.rows_by_time();
        assert_eq!(rows.len(), 26);
        assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
        let blank: Vec<_> = rows.iter().filter(|r| r.control.is_none()).collect();
        assert_eq!(blank.len(), 1);
        assert!(blank[0].costate.is_none());
        assert_abs_diff_eq!(blank[0].t, map_time(t.nodes().exceptional(), 0.0, 2.0), epsilon = 1e-15);

        let (s, _) = solve_ocp(&p, 25, Method::StandardLobatto, &SolverOptions::default()).unwrap();
        assert!(kkt_residuals(&s, &sol).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        struct Broken;
        impl OptimalControlProblem for Broken {
            fn name(&self) -> &str {
                "broken"
            }
            fn state_dim(&self) -> usize {
                2
            }
            fn control_dim(&self) -> usize {
                1
            }
            fn time_span(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
            fn dynamics(&self, _t: f64, _x: &[f64], _u: &[f64]) -> DVector<f64> {
                DVector::zeros(3)
            }
            fn dynamics_jacobians(&self, _t: f64, _x: &[f64], _u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
                (DMatrix::zeros(2, 2), DMatrix::zeros(2, 1))
            }
            fn initial_guess(&self, _t: f64) -> (DVector<f64>, DVector<f64>) {
                (DVector::zeros(2), DVector::zeros(1))
            }
        }
        assert!(matches!(
            Transcript::new(&Broken, lobatto_nodes(4).unwrap(), Method::NewLobatto),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
