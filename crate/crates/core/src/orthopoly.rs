//! Legendre and Lobatto polynomials, Gauss-Lobatto nodes and weights, and the
//! exceptional sample that completes the node set.
//!
//! The Lobatto polynomial of degree `n` is
//!
//! ```text
//! L_n(t)  = (t^2 - 1) P'_{n-1}(t)
//! L'_n(t) = n (n - 1) P_{n-1}(t)
//! ```
//!
//! Its `n` roots are `-1`, `+1` and the `n - 2` stationary points of `P_{n-1}`.
//! The exceptional sample is the stationary point of `L_n` nearest zero,
//! i.e. the root of `P_{n-1}` nearest zero. It is the global maximiser of
//! `|L_n|` on `[-1, 1]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const DOMAIN_SLACK: f64 = 1e-12;
const MAX_NEWTON_ITERATIONS: usize = 100;

/// Evaluate `P_n(tau)` and `P'_n(tau)` by the three-term recurrence.
///
/// The derivative uses `P'_{k+1} = (k + 1) P_k + tau P'_k`, which stays exact
/// at the endpoints (`P_n(1) = 1`, `P_n(-1) = (-1)^n`).
///
/// Panics if `|tau| > 1 + 1e-12`.
pub fn legendre_eval(n: usize, tau: f64) -> (f64, f64) {
    assert!(
        tau.abs() <= 1.0 + DOMAIN_SLACK,
        "legendre_eval: tau = {tau} outside [-1, 1]"
    );
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, tau);
    let mut dp = 1.0;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * tau * p - kf * p_prev) / (kf + 1.0);
        let dp_next = (kf + 1.0) * p + tau * dp;
        p_prev = p;
        p = p_next;
        dp = dp_next;
    }
    (p, dp)
}

/// Evaluate `L_n(tau)` and `L'_n(tau)`.
///
/// Panics if `n < 2` or `|tau| > 1 + 1e-12`.
pub fn lobatto_eval(n: usize, tau: f64) -> (f64, f64) {
    assert!(n >= 2, "lobatto_eval: degree {n} < 2");
    let (p, dp) = legendre_eval(n - 1, tau);
    let nf = n as f64;
    ((tau * tau - 1.0) * dp, nf * (nf - 1.0) * p)
}

/// Second derivative of `P_m` from the Legendre differential equation.
/// Only valid strictly inside `(-1, 1)`.
fn legendre_second_derivative(m: usize, tau: f64, p: f64, dp: f64) -> f64 {
    let mf = m as f64;
    (2.0 * tau * dp - mf * (mf + 1.0) * p) / (1.0 - tau * tau)
}

/// Roots of `P_m` in ascending order, mirrored so that `r[i] == -r[m-1-i]`
/// holds exactly. For odd `m` the middle root is exactly zero.
pub fn legendre_roots(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let mf = m as f64;
    let half = m / 2;
    let mut positive = Vec::with_capacity(half);
    for i in 1..=half {
        // Chebyshev-type asymptotic guess, descending from the largest root.
        let mut x = (PI * (4.0 * i as f64 - 1.0) / (4.0 * mf + 2.0)).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON_ITERATIONS {
            let (p, dp) = legendre_eval(m, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::RootNotConverged {
                lo: 0.0,
                hi: 1.0,
                iterations: MAX_NEWTON_ITERATIONS,
            });
        }
        positive.push(x);
    }
    let mut roots = Vec::with_capacity(m);
    roots.extend(positive.iter().map(|r| -r));
    if m % 2 == 1 {
        roots.push(0.0);
    }
    roots.extend(positive.iter().rev());
    Ok(roots)
}

/// Root of `P'_m` inside `[lo, hi]`, which must bracket exactly one sign change.
fn stationary_point_in(m: usize, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = legendre_eval(m, a).1;
    let mut x = 0.5 * (a + b);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let (p, dp) = legendre_eval(m, x);
        if dp == 0.0 {
            return Ok(x);
        }
        // keep the bracket tight
        if dp.signum() == fa.signum() {
            a = x;
        } else {
            b = x;
        }
        let d2p = legendre_second_derivative(m, x, p, dp);
        let mut next = x - dp / d2p;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 2.0 * f64::EPSILON * x.abs().max(f64::EPSILON) {
            return Ok(x);
        }
    }
    Err(Error::RootNotConverged {
        lo,
        hi,
        iterations: MAX_NEWTON_ITERATIONS,
    })
}

/// Lobatto collocation nodes, quadrature weights and exceptional sample.
///
/// Node indices `0..n` hold the collocation set in ascending order with
/// `-1` first and `+1` last; the exceptional sample is logically appended at
/// index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    n: usize,
    collocation: Vec<f64>,
    weights: Vec<f64>,
    exceptional: f64,
}

impl NodeSet {
    /// Number of collocation nodes `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn collocation(&self) -> &[f64] {
        &self.collocation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exceptional(&self) -> f64 {
        self.exceptional
    }

    /// Index of the exceptional sample in the extended node list (`N`, zero based).
    pub fn exceptional_index(&self) -> usize {
        self.n
    }

    /// Collocation nodes followed by the exceptional sample (`N + 1` abscissas).
    pub fn extended(&self) -> Vec<f64> {
        let mut all = self.collocation.clone();
        all.push(self.exceptional);
        all
    }

    /// Gauss-Lobatto quadrature of `f` over `[-1, 1]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.collocation
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Build the `n`-point Lobatto node set with its exceptional sample.
///
/// Interior nodes are the roots of `P'_{n-1}`, found by safeguarded Newton
/// inside the brackets formed by consecutive roots of `P_{n-1}`. Only the
/// negative half is solved; the rest is mirrored so the set is exactly
/// symmetric. For odd `n` the two nearest-zero roots of `P_{n-1}` tie, and the
/// positive one is taken as the exceptional sample.
pub fn lobatto_nodes(n: usize) -> Result<NodeSet> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "lobatto_nodes needs n >= 3, got {n}"
        )));
    }
    let m = n - 1;
    let gauss = legendre_roots(m)?;

    // Interior stationary points interlace with the Legendre roots: one per
    // gap between consecutive roots. There are m - 1 = n - 2 of them.
    let interior_count = n - 2;
    let half = interior_count / 2;
    let mut negative = Vec::with_capacity(half);
    for j in 0..half {
        negative.push(stationary_point_in(m, gauss[j], gauss[j + 1])?);
    }

    let mut collocation = Vec::with_capacity(n);
    collocation.push(-1.0);
    collocation.extend(negative.iter().copied());
    if interior_count % 2 == 1 {
        collocation.push(0.0);
    }
    collocation.extend(negative.iter().rev().map(|t| -t));
    collocation.push(1.0);
    debug_assert_eq!(collocation.len(), n);

    let nf = n as f64;
    let weights = collocation
        .iter()
        .map(|&t| {
            let p = legendre_eval(m, t).0;
            2.0 / (nf * (nf - 1.0) * p * p)
        })
        .collect();

    let exceptional = if m % 2 == 1 {
        0.0
    } else {
        gauss[m / 2]
    };

    Ok(NodeSet {
        n,
        collocation,
        weights,
        exceptional,
    })
}

/// Result of checking the envelope `F = L^2 + (1 - t^2) L'^2 / (n (n - 1))`.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeCheck {
    /// `max (L^2 - F)` over the grid; non-positive when `F` bounds `L^2`.
    pub max_violation: f64,
    /// Largest amount by which `F` decreases on `t < 0` or increases on `t > 0`.
    pub max_monotonicity_violation: f64,
}

/// Sample the Lobatto envelope on a uniform grid of `grid_size` points.
pub fn envelope_check(n: usize, grid_size: usize) -> Result<EnvelopeCheck> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("envelope_check needs n >= 3, got {n}")));
    }
    if grid_size < 101 {
        return Err(Error::InvalidArgument(format!(
            "envelope_check needs grid_size >= 101, got {grid_size}"
        )));
    }
    let scale = (n * (n - 1)) as f64;
    let envelope = |t: f64| {
        let (l, dl) = lobatto_eval(n, t);
        (l * l, l * l + (1.0 - t * t) * dl * dl / scale)
    };
    let grid = uniform_grid(grid_size);
    let mut max_violation = f64::NEG_INFINITY;
    let mut max_monotonicity_violation: f64 = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &t in &grid {
        let (l2, f) = envelope(t);
        max_violation = max_violation.max(l2 - f);
        if let Some((pt, pf)) = prev {
            if t <= 0.0 {
                max_monotonicity_violation = max_monotonicity_violation.max(pf - f);
            } else if pt >= 0.0 {
                max_monotonicity_violation = max_monotonicity_violation.max(f - pf);
            }
        }
        prev = Some((t, f));
    }
    Ok(EnvelopeCheck {
        max_violation,
        max_monotonicity_violation,
    })
}

/// `size` equally spaced points from `-1` to `1` inclusive.
pub fn uniform_grid(size: usize) -> Vec<f64> {
    assert!(size >= 2);
    let h = 2.0 / (size - 1) as f64;
    (0..size)
        .map(|i| if i == size - 1 { 1.0 } else { -1.0 + h * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_eval(0, 0.3), (1.0, 0.0));
        let (p, dp) = legendre_eval(3, 1.0);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dp, 6.0, epsilon = 1e-14);
        let (p, dp) = legendre_eval(4, 0.0);
        assert_abs_diff_eq!(p, 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(dp, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn legendre_endpoints_exact() {
        for n in 0..40 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(legendre_eval(n, 1.0).0, 1.0);
            assert_eq!(legendre_eval(n, -1.0).0, sign);
            let nf = n as f64;
            assert_abs_diff_eq!(legendre_eval(n, 1.0).1, nf * (nf + 1.0) / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn legendre_matches_closed_forms() {
        // P_3 = (5t^3 - 3t)/2, P_4 = (35t^4 - 30t^2 + 3)/8
        for &t in &[-0.9, -0.31, 0.0, 0.2, 0.77] {
            let (p3, dp3) = legendre_eval(3, t);
            assert_abs_diff_eq!(p3, (5.0 * t * t * t - 3.0 * t) / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dp3, (15.0 * t * t - 3.0) / 2.0, epsilon = 1e-14);
            let (p4, dp4) = legendre_eval(4, t);
            assert_abs_diff_eq!(p4, (35.0 * t.powi(4) - 30.0 * t * t + 3.0) / 8.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dp4, (140.0 * t.powi(3) - 60.0 * t) / 8.0, epsilon = 1e-14);
        }
    }

    #[test]
    #[should_panic]
    fn legendre_rejects_out_of_range() {
        legendre_eval(3, 1.1);
    }

    #[test]
    fn lobatto_examples() {
        let (l, dl) = lobatto_eval(5, 1.0);
        assert_eq!(l, 0.0);
        assert_abs_diff_eq!(dl, 20.0, epsilon = 1e-13);
        // closed form: P'_3(0) = -3/2, (0 - 1)(-3/2) = 3/2
        let (l, dl) = lobatto_eval(4, 0.0);
        assert_abs_diff_eq!(l, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dl, 0.0, epsilon = 1e-15);
        assert_eq!(lobatto_eval(4, -0.5).0, lobatto_eval(4, 0.5).0);
    }

    #[test]
    #[should_panic]
    fn lobatto_rejects_low_degree() {
        lobatto_eval(1, 0.0);
    }

    #[test]
    fn nodes_n4_closed_form() {
        let ns = lobatto_nodes(4).unwrap();
        let s = 1.0 / 5f64.sqrt();
        let expected = [-1.0, -s, s, 1.0];
        for (a, b) in ns.collocation().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        for (a, b) in ns.weights().iter().zip([1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert_eq!(ns.exceptional(), 0.0);
        assert_eq!(ns.exceptional_index(), 4);
    }

    #[test]
    fn nodes_n5_closed_form() {
        let ns = lobatto_nodes(5).unwrap();
        let s = (3.0f64 / 7.0).sqrt();
        for (a, b) in ns.collocation().iter().zip([-1.0, -s, 0.0, s, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let w = [0.1, 49.0 / 90.0, 32.0 / 45.0, 49.0 / 90.0, 0.1];
        for (a, b) in ns.weights().iter().zip(w) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        // P_4 root: sqrt(3/7 - 2/7 sqrt(6/5))
        let r = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        assert_abs_diff_eq!(ns.exceptional(), r, epsilon = 1e-15);
        assert!(ns.exceptional() > 0.0);
    }

    #[test]
    fn rejects_small_n() {
        assert!(lobatto_nodes(2).is_err());
        assert!(lobatto_nodes(0).is_err());
    }

    #[test]
    fn node_set_invariants() {
        for n in 3..=60 {
            let ns = lobatto_nodes(n).unwrap();
            let c = ns.collocation();
            assert_eq!(c[0], -1.0);
            assert_eq!(c[n - 1], 1.0);
            for w in c.windows(2) {
                assert!(w[1] > w[0], "n={n} not increasing");
            }
            for i in 0..n {
                assert!((c[i] + c[n - 1 - i]).abs() <= 1e-14);
            }
            for &t in &c[1..n - 1] {
                let (p, dp) = legendre_eval(n - 1, t);
                // distance to the true root, one Newton step away
                let d2p = legendre_second_derivative(n - 1, t, p, dp);
                assert!((dp / d2p).abs() <= 1e-15, "n={n} t={t} dp={dp}");
            }
            assert!(ns.weights().iter().all(|&w| w > 0.0));
            assert_abs_diff_eq!(ns.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let xi = ns.exceptional();
            assert!(xi > -1.0 && xi < 1.0);
            assert!(c.iter().all(|&t| t != xi));
            assert!(legendre_eval(n - 1, xi).0.abs() <= 1e-14);
            if n % 2 == 0 {
                assert_eq!(xi, 0.0);
            }
        }
    }

    #[test]
    fn quadrature_exact_to_degree_2n_minus_3() {
        for n in 3..=50 {
            let ns = lobatto_nodes(n).unwrap();
            for d in 0..=(2 * n - 3) {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                let q = ns.integrate(|t| t.powi(d as i32));
                assert!((q - exact).abs() <= 1e-12, "n={n} d={d} err={}", q - exact);
            }
        }
    }

    #[test]
    fn exceptional_maximises_lobatto_magnitude() {
        for n in 3..=40 {
            let ns = lobatto_nodes(n).unwrap();
            let best = lobatto_eval(n, ns.exceptional()).0.abs();
            // brute force over every root of P_{n-1}
            for r in legendre_roots(n - 1).unwrap() {
                assert!(lobatto_eval(n, r).0.abs() <= best * (1.0 + 1e-12));
            }
            for t in uniform_grid(10_001) {
                assert!(lobatto_eval(n, t).0.abs() <= best * (1.0 + 1e-12), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn lobatto_symmetry() {
        for n in 2..=30 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for t in uniform_grid(1001) {
                let d = lobatto_eval(n, t).0 - sign * lobatto_eval(n, -t).0;
                assert!(d.abs() <= 1e-13, "n={n} t={t} d={d}");
            }
        }
    }

    #[test]
    fn envelope_examples() {
        for n in [5, 12] {
            let check = envelope_check(n, 1001).unwrap();
            assert!(check.max_violation <= 1e-12);
            assert!(check.max_monotonicity_violation <= 1e-12);
        }
        // F(+-1) = L^2(+-1) = 0
        let (l, dl) = lobatto_eval(7, 1.0);
        assert_eq!(l * l + (1.0 - 1.0) * dl * dl / 42.0, 0.0);
        let check = envelope_check(7, 101).unwrap();
        assert!(check.max_violation <= 1e-12);
        assert!(envelope_check(7, 100).is_err());
    }
}
