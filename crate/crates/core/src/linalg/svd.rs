//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use super::{dot, Matrix};
use crate::error::{validation, Result, SvdnetError};

const MAX_SWEEPS: usize = 80;
const ORTHO_TOL: f64 = 1e-13;

/// Thin singular value decomposition `w = u · diag(s) · vt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `n×k`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `k×k`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        self.u
            .mul_diag(&self.s)
            .and_then(|us| us.matmul(&self.vt))
            .expect("factors are shape-consistent")
    }
}

/// Thin SVD of an `n×k` matrix with `n ≥ k`.
///
/// Columns of `w` are rotated pairwise until mutually orthogonal; their
/// norms are the singular values and the accumulated rotations form `v`.
/// Output is canonicalized: singular values sorted non-increasing, and each
/// column of `u` has its largest-magnitude entry non-negative (lowest row
/// index wins ties), with the matching row of `vt` flipped alongside.
/// Zero singular values are kept; their `u` columns complete an
/// orthonormal basis.
pub fn svd(w: &Matrix) -> Result<SvdFactors> {
    let (n, k) = w.shape();
    if n < k {
        return Err(validation(format!(
            "svd expects rows >= cols, got {n}x{k}; transpose first"
        )));
    }

    // column-major working copies: cols[j] is column j
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| w.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..k).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = k < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..k - 1 {
            for q in p + 1..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(SvdnetError::NumericFailure(format!(
            "one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps the column order for equal singular values
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let s_max = norms[order[0]];
    let null_cut = s_max * 1e-13;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    let mut v_rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut deferred = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        v_rows.push(v[j].clone());
        if sigma > null_cut && sigma > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / sigma).collect());
        } else {
            u_cols.push(Vec::new());
            deferred.push(slot);
        }
    }
    complete_basis(&mut u_cols, &deferred, n)?;

    for (uc, vr) in u_cols.iter_mut().zip(v_rows.iter_mut()) {
        if needs_flip(uc) {
            uc.iter_mut().for_each(|x| *x = -*x);
            vr.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let u = Matrix::from_fn(n, k, |i, j| u_cols[j][i])?;
    let vt = Matrix::from_fn(k, k, |i, j| v_rows[i][j])?;
    Ok(SvdFactors { u, s, vt })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Largest-magnitude entry negative (first index on ties) means flip.
fn needs_flip(col: &[f64]) -> bool {
    let mut best = 0.0_f64;
    let mut sign_neg = false;
    for &x in col {
        if x.abs() > best {
            best = x.abs();
            sign_neg = x < 0.0;
        }
    }
    sign_neg
}

/// Fills the empty slots in `u_cols` with unit vectors orthogonal to every
/// other column, by Gram-Schmidt over the standard basis.
fn complete_basis(u_cols: &mut [Vec<f64>], slots: &[usize], n: usize) -> Result<()> {
    let mut candidate = 0usize;
    for &slot in slots {
        loop {
            if candidate >= n {
                return Err(SvdnetError::NumericFailure(
                    "could not complete orthonormal basis for null singular vectors".into(),
                ));
            }
            let mut e = vec![0.0; n];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for (idx, other) in u_cols.iter().enumerate() {
                    if idx == slot || other.is_empty() {
                        continue;
                    }
                    let proj = dot(&e, other);
                    e.iter_mut().zip(other).for_each(|(x, o)| *x -= proj * o);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-6 {
                e.iter_mut().for_each(|x| *x /= norm);
                u_cols[slot] = e;
                break;
            }
        }
    }
    Ok(())
}
