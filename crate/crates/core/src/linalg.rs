//! Dense complex kernels: SVD, pseudoinverse, column-pivoted QR, leverage
//! scores and the two condition numbers used to compare patches and
//! randomizations.
//!
//! Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Safety factor applied on top of `max(m, n) * eps * sigma_max`.
const RANK_SAFETY: f64 = 1e3;

/// Pivot ratio below which an LU factorization is treated as singular.
const LU_PIVOT_RATIO: f64 = 1e-14;

/// Numerical rank tolerance for an `m x n` matrix with largest singular value `smax`.
pub fn rank_tolerance(rows: usize, cols: usize, smax: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * smax * RANK_SAFETY
}

/// Thin singular value decomposition `M = U diag(sigma) V^H`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x r` with orthonormal columns, `r = min(m, n)`.
    pub u: CMatrix,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// `n x r` with orthonormal columns.
    pub v: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }

    pub fn cond(&self) -> f64 {
        let smax = self.sigma.first().copied().unwrap_or(0.0);
        let smin = self.sigma.last().copied().unwrap_or(0.0);
        if smin == 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    }
}

/// Thin SVD with singular values sorted in descending order.
///
/// Panics if the iteration fails to converge, which only happens for
/// non-finite input.
pub fn svd(m: &CMatrix) -> Svd {
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("svd: U requested");
    let v_t = dec.v_t.expect("svd: V^H requested");
    let r = dec.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let sigma = order.iter().map(|&k| dec.singular_values[k]).collect();
    let u = CMatrix::from_fn(m.nrows(), r, |i, j| u[(i, order[j])]);
    let v = CMatrix::from_fn(m.ncols(), r, |i, j| v_t[(order[j], i)].conj());
    Svd { u, sigma, v }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number `sigma_max / sigma_min`; infinite when `sigma_min = 0`.
pub fn cond2(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    let smin = *s.last().unwrap();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Moore-Penrose pseudoinverse `V Sigma^{-1} U^H` of a full column rank matrix.
pub fn pseudoinverse(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() < m.ncols() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let dec = svd(m);
    let smax = dec.sigma[0];
    let smin = *dec.sigma.last().unwrap();
    if smax == 0.0 || smin <= rank_tolerance(m.nrows(), m.ncols(), smax) {
        let ratio = if smax == 0.0 { 0.0 } else { smin / smax };
        return Err(Error::RankDeficient { ratio });
    }
    let mut v = dec.v;
    for (j, s) in dec.sigma.iter().enumerate() {
        v.column_mut(j).scale_mut(1.0 / s);
    }
    Ok(v * dec.u.adjoint())
}

/// Column-pivoted QR factorization `M = Q R P`.
#[derive(Debug, Clone)]
pub struct ColPivQr {
    /// `m x n` with orthonormal columns.
    pub q: CMatrix,
    /// `n x n` upper triangular, `|r_kk|` nonincreasing.
    pub r: CMatrix,
    /// Column `j` of `Q R` is column `perm[j]` of `M`.
    pub perm: Vec<usize>,
}

impl ColPivQr {
    /// The permutation as a matrix `P` with `M = Q R P`.
    pub fn permutation_matrix(&self) -> CMatrix {
        let n = self.perm.len();
        let mut p = CMatrix::zeros(n, n);
        for (j, &c) in self.perm.iter().enumerate() {
            p[(j, c)] = C64::new(1.0, 0.0);
        }
        p
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.q * &self.r * self.permutation_matrix()
    }

    /// `|r_kk| / |r_00|` for the last diagonal entry; a proxy for `1/cond`.
    pub fn diag_ratio(&self) -> f64 {
        let n = self.r.ncols();
        let first = self.r[(0, 0)].norm();
        if first == 0.0 {
            0.0
        } else {
            self.r[(n - 1, n - 1)].norm() / first
        }
    }
}

/// Householder QR with column pivoting of an `m x n` matrix, `m >= n`.
pub fn qr_column_pivoted(m: &CMatrix) -> ColPivQr {
    let (rows, cols) = m.shape();
    assert!(rows >= cols, "qr_column_pivoted needs rows >= cols");
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut reflectors: Vec<CVector> = Vec::with_capacity(cols);

    for k in 0..cols {
        // pivot: remaining column of largest norm (first wins on ties)
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..cols {
            let nrm: f64 = (k..rows).map(|i| a[(i, j)].norm_sqr()).sum();
            if nrm > best_norm {
                best_norm = nrm;
                best = j;
            }
        }
        if best != k {
            a.swap_columns(k, best);
            perm.swap(k, best);
        }

        let len = rows - k;
        let mut v = CVector::from_fn(len, |i, _| a[(k + i, k)]);
        let norm = v.norm();
        if norm == 0.0 {
            reflectors.push(CVector::zeros(len));
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vnorm = v.norm();
        v /= C64::new(vnorm, 0.0);
        // apply H = I - 2 v v^H to the trailing block
        for j in k..cols {
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..len {
                dot += v[i].conj() * a[(k + i, j)];
            }
            for i in 0..len {
                a[(k + i, j)] -= v[i] * dot * 2.0;
            }
        }
        reflectors.push(v);
    }

    let mut r = CMatrix::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r[(i, j)] = a[(i, j)];
        }
    }
    // thin Q = H_0 H_1 ... H_{n-1} [I_n; 0]
    let mut q = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        q[(j, j)] = C64::new(1.0, 0.0);
    }
    for k in (0..cols).rev() {
        let v = &reflectors[k];
        let len = rows - k;
        for j in 0..cols {
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..len {
                dot += v[i].conj() * q[(k + i, j)];
            }
            for i in 0..len {
                q[(k + i, j)] -= v[i] * dot * 2.0;
            }
        }
    }
    ColPivQr { q, r, perm }
}

/// Leverage scores `l_j = ||Q_j||^2` of a full column rank matrix.
pub fn leverage_scores(m: &CMatrix) -> Result<Vec<f64>> {
    let qr = qr_column_pivoted(m);
    let first = qr.r[(0, 0)].norm();
    let last = qr.r[(m.ncols() - 1, m.ncols() - 1)].norm();
    if first == 0.0 || last <= rank_tolerance(m.nrows(), m.ncols(), first) {
        return Err(Error::RankDeficient { ratio: qr.diag_ratio() });
    }
    Ok(qr.q.row_iter().map(|row| row.norm_squared()).collect())
}

/// Max absolute row sum.
pub fn norm_inf(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max absolute column sum.
pub fn norm_1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm_1(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Explicit inverse via partial-pivot LU.
pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let lu = factor(m)?;
    lu.try_inverse().ok_or(Error::Singular)
}

/// `||M||_inf * ||M^{-1}||_1`.
pub fn kappa_inf_1(m: &CMatrix) -> Result<f64> {
    let inv = inverse(m)?;
    Ok(norm_inf(m) * norm_1(&inv))
}

fn factor(m: &CMatrix) -> Result<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut dmax: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    for k in 0..u.nrows() {
        let d = u[(k, k)].norm();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    if !(dmax > 0.0) || !dmin.is_finite() || dmin <= LU_PIVOT_RATIO * dmax {
        return Err(Error::Singular);
    }
    Ok(lu)
}

/// Solves `M x = b` for square `M`.
pub fn solve(m: &CMatrix, b: &CVector) -> Result<CVector> {
    if !m.is_square() || m.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: b.len() });
    }
    let x = factor(m)?.solve(b).ok_or(Error::Singular)?;
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular)
    }
}

/// Complex multiply-adds charged for one LU solve of size `n`.
pub fn lu_solve_ops(n: usize) -> u64 {
    let n = n as u64;
    n * n * n / 3 + n * n
}
