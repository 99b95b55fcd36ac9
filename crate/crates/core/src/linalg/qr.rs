//! Householder QR with a non-negative diagonal on `r`.

use super::{dot, Matrix};
use crate::error::{validation, Result, SvdnetError};

/// Thin QR factors: `q` is `n×k` with orthonormal columns, `r` is `k×k`
/// upper triangular with `r_ii ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

/// Thin QR of a full-column-rank `n×k` matrix, `n ≥ k`.
///
/// Fails with [`SvdnetError::Degenerate`] naming the first column whose
/// diagonal `|r_jj|` falls below `1e-12 · ‖w‖_F`.
pub fn qr(w: &Matrix) -> Result<QrFactors> {
    let (n, k) = w.shape();
    if n < k {
        return Err(validation(format!("qr expects rows >= cols, got {n}x{k}")));
    }
    let norm = w.frobenius_norm();
    let tol = 1e-12 * norm;

    let mut a: Vec<Vec<f64>> = (0..k).map(|j| w.col(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for j in 0..k {
        let x = &a[j][j..];
        let alpha = dot(x, x).sqrt();
        let mut v = x.to_vec();
        // reflect onto -sign(x0)·‖x‖ e1 to avoid cancellation
        let beta = if v[0] >= 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let vnorm_sq = dot(&v, &v);
        if vnorm_sq > 0.0 {
            for col in a.iter_mut().skip(j) {
                let tail = &mut col[j..];
                let f = 2.0 * dot(&v, tail) / vnorm_sq;
                tail.iter_mut().zip(&v).for_each(|(t, vi)| *t -= f * vi);
            }
        }
        if a[j][j].abs() <= tol || norm == 0.0 {
            return Err(SvdnetError::Degenerate(format!(
                "qr: column {j} is linearly dependent on earlier columns (|r_{j}{j}| = {:.3e})",
                a[j][j].abs()
            )));
        }
        reflectors.push(v);
    }

    // r from the upper triangle, then q by applying reflectors to e_j
    let mut r = Matrix::from_fn(k, k, |i, j| if i <= j { a[j][i] } else { 0.0 })?;
    let mut q = Matrix::zeros(n, k);
    for j in 0..k {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (idx, v) in reflectors.iter().enumerate().rev() {
            let vnorm_sq = dot(v, v);
            if vnorm_sq == 0.0 {
                continue;
            }
            let tail = &mut e[idx..];
            let f = 2.0 * dot(v, tail) / vnorm_sq;
            tail.iter_mut().zip(v).for_each(|(t, vi)| *t -= f * vi);
        }
        for (i, val) in e.into_iter().enumerate() {
            q[(i, j)] = val;
        }
    }

    for i in 0..k {
        if r[(i, i)] < 0.0 {
            for j in i..k {
                r[(i, j)] = -r[(i, j)];
            }
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Ok(QrFactors { q, r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    fn check(w: &Matrix) -> QrFactors {
        let f = qr(w).unwrap();
        let k = w.cols();
        let ortho = f.q.gram().sub(&Matrix::identity(k)).unwrap().frobenius_norm();
        assert!(ortho < 1e-9);
        for i in 0..k {
            assert!(f.r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
        let rec = f.q.matmul(&f.r).unwrap().sub(w).unwrap().frobenius_norm();
        assert!(rec <= 1e-9 * w.frobenius_norm());
        f
    }

    #[test]
    fn identity() {
        let f = check(&Matrix::identity(2));
        assert!(f.q.max_abs_diff(&Matrix::identity(2)).unwrap() < 1e-15);
        assert!(f.r.max_abs_diff(&Matrix::identity(2)).unwrap() < 1e-15);
    }

    #[test]
    fn small_two_by_two() {
        let w = Matrix::from_rows(&[vec![3.0, 1.0], vec![4.0, 1.0]]).unwrap();
        let f = check(&w);
        assert!((f.r[(0, 0)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn random_tall() {
        check(&random_matrix(9, 4, 3));
        check(&random_matrix(5, 5, 4));
    }

    #[test]
    fn duplicated_columns_are_degenerate() {
        let mut w = random_matrix(5, 3, 8);
        for i in 0..5 {
            w[(i, 2)] = w[(i, 1)];
        }
        match qr(&w) {
            Err(SvdnetError::Degenerate(msg)) => assert!(msg.contains("column 2"), "{msg}"),
            other => panic!("expected degeneracy, got {other:?}"),
        }
        assert!(qr(&Matrix::zeros(3, 2)).is_err());
    }
}
