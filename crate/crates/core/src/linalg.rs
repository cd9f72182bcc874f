//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-9;

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Numerical rank with singular values below `RANK_TOL·σ_max` treated as zero.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > RANK_TOL * smax).count()
}

/// 2-norm condition number; infinite for rank-deficient or empty-spectrum input.
pub fn cond(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    if s.is_empty() {
        return 1.0;
    }
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Greedy column selection by pivoted Gram-Schmidt: returns `k` column indices
/// that span the column space best, in selection order.
pub fn pivot_columns(a: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let mut work = a.clone();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k.min(a.ncols()) {
        let mut best = None;
        let mut best_norm = -1.0;
        for j in 0..work.ncols() {
            if chosen.contains(&j) {
                continue;
            }
            let n = work.column(j).norm();
            if n > best_norm {
                best_norm = n;
                best = Some(j);
            }
        }
        let Some(p) = best else { break };
        chosen.push(p);
        if best_norm <= 0.0 {
            continue;
        }
        let q = work.column(p) / best_norm;
        for j in 0..work.ncols() {
            if !chosen.contains(&j) {
                let proj = q.dot(&work.column(j));
                let upd = work.column(j) - &q * proj;
                work.set_column(j, &upd);
            }
        }
    }
    chosen
}

/// Indices of `rank(a)` linearly independent rows of `a`, ascending.
pub fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let r = rank(a);
    let mut rows = pivot_columns(&a.transpose(), r);
    rows.sort_unstable();
    rows
}

pub fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_cols(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// LU inverse of a square matrix, failing if the condition number exceeds `max_cond`.
pub fn inverse_checked(m: &DMatrix<f64>, what: &str, max_cond: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Validation(format!("{what} is {}x{}, not square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let c = cond(m);
    if !(c <= max_cond) {
        return Err(Error::singular(what, c));
    }
    m.clone().lu().try_inverse().ok_or_else(|| Error::singular(what, c))
}

/// LU inverse with a cheap pivot-ratio singularity guard, for hot loops.
pub fn inverse_fast(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let d = u.diagonal();
    let dmax = d.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let dmin = d.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if dmax == 0.0 || dmin < 1e-13 * dmax {
        return Err(Error::singular(what, cond(m)));
    }
    lu.try_inverse().ok_or_else(|| Error::singular(what, f64::INFINITY))
}

/// Largest absolute entry; zero for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        m.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(b);
        i += b.nrows();
        j += b.ncols();
    }
    m
}
