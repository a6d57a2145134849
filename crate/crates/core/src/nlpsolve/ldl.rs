//! Dense symmetric-indefinite `P A P^T = L D L^T` factorisation with
//! Bunch-Kaufman pivoting (1x1 and 2x2 diagonal blocks).

use nalgebra::{DMatrix, DVector};

/// Eigenvalue sign counts of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum Block {
    One(f64),
    Two([f64; 3]), // (a, b, c) for [[a, b], [b, c]]
}

#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
    /// Unit lower triangular factor; the diagonal is implicit.
    l: DMatrix<f64>,
    /// Starting position and block for every pivot.
    blocks: Vec<(usize, Block)>,
    inertia: Inertia,
}

const ALPHA: f64 = 0.640_388_203_202_208_1; // (1 + sqrt(17)) / 8

impl Ldl {
    /// Factorise the symmetric matrix `a`. Only the lower triangle is read.
    ///
    /// Pivots whose magnitude is at most `zero_tol * max|a_ij|` are counted
    /// as zero eigenvalues.
    pub fn factor(a: &DMatrix<f64>, zero_tol: f64) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LDL^T needs a square matrix");
        let mut w = a.clone();
        // mirror the lower triangle so swaps can use either half
        for j in 0..n {
            for i in (j + 1)..n {
                w[(j, i)] = w[(i, j)];
            }
        }
        let scale = w.amax();
        let zero = zero_tol * scale.max(f64::MIN_POSITIVE);
        let mut l = DMatrix::identity(n, n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };

        let swap = |w: &mut DMatrix<f64>, l: &mut DMatrix<f64>, perm: &mut Vec<usize>, k: usize, p: usize| {
            if k == p {
                return;
            }
            w.swap_rows(k, p);
            w.swap_columns(k, p);
            perm.swap(k, p);
            for j in 0..k {
                let t = l[(k, j)];
                l[(k, j)] = l[(p, j)];
                l[(p, j)] = t;
            }
        };

        let mut k = 0;
        while k < n {
            let akk = w[(k, k)].abs();
            let (mut r, mut colmax) = (k, 0.0);
            for i in (k + 1)..n {
                if w[(i, k)].abs() > colmax {
                    colmax = w[(i, k)].abs();
                    r = i;
                }
            }

            let two_by_two;
            if akk.max(colmax) <= zero {
                two_by_two = false;
            } else if akk >= ALPHA * colmax {
                two_by_two = false;
            } else {
                let mut rowmax: f64 = 0.0;
                for j in k..n {
                    if j != r {
                        rowmax = rowmax.max(w[(r, j)].abs());
                    }
                }
                if akk * rowmax >= ALPHA * colmax * colmax {
                    two_by_two = false;
                } else if w[(r, r)].abs() >= ALPHA * rowmax {
                    swap(&mut w, &mut l, &mut perm, k, r);
                    two_by_two = false;
                } else {
                    swap(&mut w, &mut l, &mut perm, k + 1, r);
                    two_by_two = true;
                }
            }

            if !two_by_two {
                let d = w[(k, k)];
                if d.abs() <= zero {
                    inertia.zero += 1;
                    blocks.push((k, Block::One(0.0)));
                    // column is (numerically) zero: nothing to eliminate
                    k += 1;
                    continue;
                }
                if d > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                for i in (k + 1)..n {
                    l[(i, k)] = w[(i, k)] / d;
                }
                for j in (k + 1)..n {
                    let ljd = l[(j, k)] * d;
                    if ljd == 0.0 {
                        continue;
                    }
                    for i in j..n {
                        w[(i, j)] -= l[(i, k)] * ljd;
                    }
                }
                for j in (k + 1)..n {
                    for i in (j + 1)..n {
                        w[(j, i)] = w[(i, j)];
                    }
                }
                blocks.push((k, Block::One(d)));
                k += 1;
            } else {
                let (a, b, c) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a * c - b * b;
                // Bunch-Kaufman only picks 2x2 blocks with det < 0
                if det < 0.0 {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if det > 0.0 {
                    if a + c > 0.0 {
                        inertia.positive += 2;
                    } else {
                        inertia.negative += 2;
                    }
                } else {
                    inertia.zero += 1;
                    inertia.positive += 1;
                }
                let (ia, ib, ic) = (c / det, -b / det, a / det);
                for i in (k + 2)..n {
                    let (c0, c1) = (w[(i, k)], w[(i, k + 1)]);
                    l[(i, k)] = c0 * ia + c1 * ib;
                    l[(i, k + 1)] = c0 * ib + c1 * ic;
                }
                for j in (k + 2)..n {
                    let (cj0, cj1) = (w[(j, k)], w[(j, k + 1)]);
                    for i in j..n {
                        w[(i, j)] -= l[(i, k)] * cj0 + l[(i, k + 1)] * cj1;
                    }
                }
                for j in (k + 2)..n {
                    for i in (j + 1)..n {
                        w[(j, i)] = w[(i, j)];
                    }
                }
                blocks.push((k, Block::Two([a, b, c])));
                k += 2;
            }
        }

        Self {
            n,
            perm,
            l,
            blocks,
            inertia,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    /// Solve `A x = b`. Returns `None` when a zero pivot was met.
    pub fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        if self.inertia.zero > 0 {
            return None;
        }
        let n = self.n;
        let mut y = DVector::from_fn(n, |k, _| b[self.perm[k]]);
        // L y = Pb
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for i in (j + 1)..n {
                    y[i] -= self.l[(i, j)] * yj;
                }
            }
        }
        for &(k, block) in &self.blocks {
            match block {
                Block::One(d) => y[k] /= d,
                Block::Two([a, b, c]) => {
                    let det = a * c - b * b;
                    let (y0, y1) = (y[k], y[k + 1]);
                    y[k] = (c * y0 - b * y1) / det;
                    y[k + 1] = (a * y1 - b * y0) / det;
                }
            }
        }
        // L^T x = y
        for j in (0..n).rev() {
            let mut s = y[j];
            for i in (j + 1)..n {
                s -= self.l[(i, j)] * y[i];
            }
            y[j] = s;
        }
        let mut x = DVector::zeros(n);
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        Some(x)
    }
}
