//! Lagrange bases and first-derivative differentiation matrices.
//!
//! Three matrices are built from a [`NodeSet`]:
//!
//! - [`DiffKind::NewLobatto`]: `N x (N + 1)`, rows at the collocation nodes,
//!   columns at the collocation nodes plus the exceptional sample. Full row
//!   rank, exact for polynomials up to degree `N`.
//! - [`DiffKind::StandardLobatto`]: the classical square `N x N` matrix on the
//!   collocation nodes. Rank `N - 1`.
//! - [`DiffKind::Dual`]: `N x N` matrix obtained by moving the new matrix to
//!   the costate side of the KKT conditions. Exact up to degree `N - 2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::orthopoly::{uniform_grid, NodeSet};

/// Relative singular value threshold used for numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

const MIN_NODE_GAP: f64 = 1e-12;

/// Lagrange basis over distinct nodes in barycentric form.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    barycentric_weights: Vec<f64>,
}

impl LagrangeBasis {
    /// Build the basis. Nodes must be pairwise distinct (gap above `1e-12`).
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("empty node list".into()));
        }
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if (nodes[i] - nodes[j]).abs() <= MIN_NODE_GAP {
                    return Err(Error::DuplicateNodes {
                        first: i,
                        second: j,
                        value: nodes[i],
                    });
                }
            }
        }
        let barycentric_weights = nodes
            .iter()
            .enumerate()
            .map(|(i, &ti)| {
                let prod: f64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &tj)| ti - tj)
                    .product();
                1.0 / prod
            })
            .collect();
        Ok(Self {
            nodes: nodes.to_vec(),
            barycentric_weights,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn barycentric_weights(&self) -> &[f64] {
        &self.barycentric_weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All basis polynomials `l_0(tau) .. l_{M-1}(tau)`.
    pub fn eval_all(&self, tau: f64) -> Vec<f64> {
        if let Some(k) = self.nodes.iter().position(|&t| t == tau) {
            let mut out = vec![0.0; self.len()];
            out[k] = 1.0;
            return out;
        }
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.barycentric_weights)
            .map(|(&t, &b)| b / (tau - t))
            .collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|v| v / denom).collect()
    }

    /// Single basis polynomial `l_i(tau)`.
    pub fn eval(&self, i: usize, tau: f64) -> f64 {
        self.eval_all(tau)[i]
    }

    /// Interpolate `values` (one per node) at `tau`.
    pub fn interpolate(&self, values: &[f64], tau: f64) -> f64 {
        self.eval_all(tau)
            .iter()
            .zip(values)
            .map(|(l, v)| l * v)
            .sum()
    }

    /// Derivatives `l'_i(tau_k)` for every node `k` (rows) and basis index `i`
    /// (columns), using the barycentric differentiation formula with the
    /// diagonal fixed by the zero row-sum identity.
    pub fn derivative_matrix(&self) -> DMatrix<f64> {
        let m = self.len();
        let b = &self.barycentric_weights;
        let t = &self.nodes;
        let mut d = DMatrix::zeros(m, m);
        for k in 0..m {
            let mut diag = 0.0;
            for i in 0..m {
                if i != k {
                    let v = (b[i] / b[k]) / (t[k] - t[i]);
                    d[(k, i)] = v;
                    diag -= v;
                }
            }
            d[(k, k)] = diag;
        }
        d
    }
}

/// Which construction produced a [`DiffMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    NewLobatto,
    StandardLobatto,
    Dual,
}

/// Dense differentiation matrix together with its abscissas.
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    pub entries: DMatrix<f64>,
    /// Abscissas where derivatives are produced (one per row).
    pub row_nodes: Vec<f64>,
    /// Abscissas where values are sampled (one per column).
    pub col_nodes: Vec<f64>,
    pub kind: DiffKind,
}

impl DiffMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        assert_eq!(samples.len(), self.cols());
        (&self.entries * DVector::from_column_slice(samples))
            .iter()
            .copied()
            .collect()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .entries
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Rank with singular values below `RANK_THRESHOLD * sigma_max` counted as zero.
    pub fn numerical_rank(&self) -> usize {
        let sv = self.singular_values();
        let cutoff = RANK_THRESHOLD * sv.first().copied().unwrap_or(0.0);
        sv.iter().filter(|&&s| s > cutoff).count()
    }

    /// `sigma_max / sigma_min` over the nonzero singular values.
    pub fn condition_number(&self) -> f64 {
        let sv = self.singular_values();
        let rank = self.numerical_rank();
        if rank == 0 {
            return f64::INFINITY;
        }
        sv[0] / sv[rank - 1]
    }

    /// `max_k |sum_i D_ki|`.
    pub fn null_space_residual(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// Differentiation matrix over collocation nodes plus exceptional sample.
pub fn build_new_lobatto_d(ns: &NodeSet) -> DiffMatrix {
    let extended = ns.extended();
    let basis = LagrangeBasis::new(&extended).expect("node set holds distinct abscissas");
    let full = basis.derivative_matrix();
    let n = ns.n();
    DiffMatrix {
        entries: full.rows(0, n).into_owned(),
        row_nodes: ns.collocation().to_vec(),
        col_nodes: extended,
        kind: DiffKind::NewLobatto,
    }
}

/// Classical square Lobatto differentiation matrix.
pub fn build_standard_lobatto_d(ns: &NodeSet) -> DiffMatrix {
    let basis = LagrangeBasis::new(ns.collocation()).expect("collocation nodes are distinct");
    DiffMatrix {
        entries: basis.derivative_matrix(),
        row_nodes: ns.collocation().to_vec(),
        col_nodes: ns.collocation().to_vec(),
        kind: DiffKind::StandardLobatto,
    }
}

/// Dual matrix `D'_{ki} = (delta_ki / w_k)(delta_{N,k} - delta_{1,k}) - (w_i / w_k) D_{ik}`
/// over the collocation nodes.
pub fn build_dual_d(ns: &NodeSet, d: &DiffMatrix) -> Result<DiffMatrix> {
    let n = ns.n();
    if d.kind != DiffKind::NewLobatto || d.rows() != n || d.cols() != n + 1 {
        return Err(Error::InvalidArgument(format!(
            "dual matrix needs the {n}x{} new Lobatto matrix, got {:?} {}x{}",
            n + 1,
            d.kind,
            d.rows(),
            d.cols()
        )));
    }
    let w = ns.weights();
    let entries = DMatrix::from_fn(n, n, |k, i| {
        let mut v = -(w[i] / w[k]) * d.entries[(i, k)];
        if k == i {
            if k == n - 1 {
                v += 1.0 / w[k];
            } else if k == 0 {
                v -= 1.0 / w[k];
            }
        }
        v
    });
    Ok(DiffMatrix {
        entries,
        row_nodes: ns.collocation().to_vec(),
        col_nodes: ns.collocation().to_vec(),
        kind: DiffKind::Dual,
    })
}

/// Build the matrix of the requested kind.
pub fn build(ns: &NodeSet, kind: DiffKind) -> DiffMatrix {
    match kind {
        DiffKind::NewLobatto => build_new_lobatto_d(ns),
        DiffKind::StandardLobatto => build_standard_lobatto_d(ns),
        DiffKind::Dual => build_dual_d(ns, &build_new_lobatto_d(ns)).expect("built from ns"),
    }
}

/// `max |D V - V'|` with `V` the monomial Vandermonde matrix over the column
/// nodes and `V'` its derivative over the row nodes, degrees `0..=order`.
pub fn verify_definition(d: &DiffMatrix, order: usize) -> Result<f64> {
    if order > d.cols() {
        return Err(Error::InvalidArgument(format!(
            "order {order} exceeds the {} available samples",
            d.cols()
        )));
    }
    let v = DMatrix::from_fn(d.cols(), order + 1, |i, p| d.col_nodes[i].powi(p as i32));
    let vp = DMatrix::from_fn(d.rows(), order + 1, |k, p| {
        if p == 0 {
            0.0
        } else {
            p as f64 * d.row_nodes[k].powi(p as i32 - 1)
        }
    });
    Ok((&d.entries * v - vp).amax())
}

/// `max |l_xi(tau)|` over a uniform grid, where `l_xi` is the Lagrange basis
/// polynomial of the exceptional sample.
pub fn runge_bound(ns: &NodeSet, grid_size: usize) -> Result<f64> {
    if grid_size < 1001 {
        return Err(Error::InvalidArgument(format!(
            "runge_bound needs grid_size >= 1001, got {grid_size}"
        )));
    }
    let basis = LagrangeBasis::new(&ns.extended())?;
    let xi = ns.exceptional_index();
    Ok(uniform_grid(grid_size)
        .into_iter()
        .map(|t| basis.eval(xi, t).abs())
        .fold(0.0, f64::max))
}

/// Recover samples from derivative observations: solve `[D; c^T] y = [d; b]`.
///
/// Only uniquely solvable when `D` is inversion-ready (`N x (N + 1)`, full rank)
/// and `c^T 1 != 0`.
pub fn integrate_derivatives(
    d: &DiffMatrix,
    derivatives: &[f64],
    bias_row: &[f64],
    bias: f64,
) -> Result<Vec<f64>> {
    let (rows, cols) = (d.rows(), d.cols());
    if cols != rows + 1 || derivatives.len() != rows || bias_row.len() != cols {
        return Err(Error::DimensionMismatch(format!(
            "need a {rows}x{} matrix, {rows} derivatives and {} bias coefficients",
            rows + 1,
            rows + 1
        )));
    }
    let mut a = DMatrix::zeros(cols, cols);
    a.rows_mut(0, rows).copy_from(&d.entries);
    for (j, &c) in bias_row.iter().enumerate() {
        a[(rows, j)] = c;
    }
    let mut rhs = DVector::zeros(cols);
    rhs.rows_mut(0, rows).copy_from_slice(derivatives);
    rhs[rows] = bias;
    a.lu()
        .solve(&rhs)
        .map(|y| y.iter().copied().collect())
        .ok_or_else(|| Error::InvalidArgument("system [D; c^T] is singular".into()))
}
