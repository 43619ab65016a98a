//! Row-major dense matrices, LU with partial pivoting and unpreconditioned
//! GMRES.

use rayon::prelude::*;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular system: pivot {pivot:e} at column {column} below threshold {threshold:e}")]
    SingularPivot {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("GMRES stagnated at relative residual {achieved:e} (target {target:e}) after {iters} iterations")]
    KrylovStagnation {
        achieved: f64,
        target: f64,
        iters: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![T::zero(); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, x| a.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        self.data
            .par_chunks(self.n_cols)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_cols, self.n_rows, |i, j| self[(j, i)])
    }

    /// Overwrites column `j` with `col`.
    pub fn set_column(&mut self, j: usize, col: &[T]) {
        assert_eq!(col.len(), self.n_rows);
        for (i, &v) in col.iter().enumerate() {
            self.data[i * self.n_cols + j] = v;
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n_cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n_cols + j]
    }
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

/// `PA = LU` stored in place; unit lower triangle implicit.
#[derive(Clone, Debug)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

/// Relative pivot threshold below which a matrix is reported singular.
pub const PIVOT_REL_TOL: f64 = 1e-14;

impl<T: Real> LuFactors<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        let n = a.n_rows;
        if a.n_cols != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: a.n_cols,
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let threshold = T::lit(PIVOT_REL_TOL) * scale;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) {
                return Err(LinalgError::SingularPivot {
                    column: k,
                    pivot: best.to_f64_lossy(),
                    threshold: threshold.to_f64_lossy(),
                });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (head, tail) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let pivot = pivot_row[k];
            tail.par_chunks_mut(n).for_each(|row| {
                let l = row[k] / pivot;
                row[k] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        row[j] -= l * pivot_row[j];
                    }
                }
            });
        }
        Ok(LuFactors { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.n_rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn lu_solve<T: Real>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    Ok(LuFactors::new(a)?.solve(b))
}

/// Outcome of a GMRES solve.
#[derive(Clone, Debug)]
pub struct GmresResult<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// True residual `‖b − A x‖`, recomputed after the solve.
    pub residual_norm: T,
}

/// Full (unrestarted) GMRES from `x = 0`, stopping when the true residual
/// satisfies `‖b − A x‖ ≤ rel_tol · ‖b‖`.
pub fn gmres<T: Real>(
    a: &DenseMatrix<T>,
    b: &[T],
    rel_tol: T,
    max_iters: usize,
) -> Result<GmresResult<T>, LinalgError> {
    let n = a.n_rows;
    if b.len() != n {
        return Err(LinalgError::Dimension {
            expected: n,
            got: b.len(),
        });
    }
    let beta = norm2(b);
    let target = rel_tol * beta;
    if beta <= target || beta == T::zero() {
        return Ok(GmresResult {
            x: vec![T::zero(); n],
            iterations: 0,
            residual_norm: beta,
        });
    }
    let m_max = max_iters.min(n).max(1);
    let mut basis: Vec<Vec<T>> = vec![b.iter().map(|&v| v / beta).collect()];
    // Hessenberg columns after Givens rotation, i.e. upper triangular R.
    let mut r_cols: Vec<Vec<T>> = Vec::new();
    let mut cs: Vec<T> = Vec::new();
    let mut sn: Vec<T> = Vec::new();
    let mut g = vec![beta];
    // The recursive residual estimate can undershoot the true residual by
    // rounding; tighten slightly and verify afterwards.
    let inner_target = target * T::lit(0.5);
    let mut k = 0;
    while k < m_max {
        let mut w = a.mul_vec(&basis[k]);
        let mut h = Vec::with_capacity(k + 2);
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                if h.len() <= i {
                    h.push(c);
                } else {
                    h[i] += c;
                }
                for (wj, &vj) in w.iter_mut().zip(v) {
                    *wj -= c * vj;
                }
            }
        }
        let hn = norm2(&w);
        h.push(hn);
        for i in 0..k {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = (h[k] * h[k] + h[k + 1] * h[k + 1]).sqrt();
        let (c, s) = if denom == T::zero() {
            (T::one(), T::zero())
        } else {
            (h[k] / denom, h[k + 1] / denom)
        };
        cs.push(c);
        sn.push(s);
        h[k] = denom;
        h[k + 1] = T::zero();
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s * gk);
        h.truncate(k + 1);
        r_cols.push(h);
        k += 1;
        let breakdown = hn <= T::epsilon() * beta;
        if g[k].abs() <= inner_target || breakdown || k == m_max {
            let x = assemble(&basis, &r_cols, &g, n);
            let ax = a.mul_vec(&x);
            let res = norm2(&b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect::<Vec<_>>());
            if res <= target {
                return Ok(GmresResult {
                    x,
                    iterations: k,
                    residual_norm: res,
                });
            }
            if breakdown || k == m_max {
                return Err(LinalgError::KrylovStagnation {
                    achieved: (res / beta).to_f64_lossy(),
                    target: rel_tol.to_f64_lossy(),
                    iters: k,
                });
            }
        }
        basis.push(w.iter().map(|&v| v / hn).collect());
    }
    unreachable!("loop returns once k reaches m_max")
}

fn assemble<T: Real>(basis: &[Vec<T>], r_cols: &[Vec<T>], g: &[T], n: usize) -> Vec<T> {
    let k = r_cols.len();
    let mut y = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= r_cols[j][i] * y[j];
        }
        y[i] = s / r_cols[i][i];
    }
    let mut x = vec![T::zero(); n];
    for (v, &yi) in basis.iter().zip(&y) {
        for (xj, &vj) in x.iter_mut().zip(v) {
            *xj += yi * vj;
        }
    }
    x
}
