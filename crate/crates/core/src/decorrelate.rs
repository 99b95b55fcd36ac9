//! Weight-replacement transforms for the Eigenlayer and the pairwise
//! distance check that tells them apart.
//!
//! Only [`DecorrMethod::Us`] keeps every projected distance intact:
//! `(WWᵀ) = U S Vᵀ V S Uᵀ = (US)(US)ᵀ`. The other orthogonalizing
//! transforms change the metric.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result, SvdnetError};
use crate::linalg::{qr, svd, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecorrMethod {
    /// Keep `W` as learned.
    Orig,
    /// `W ← U·diag(s)`.
    Us,
    /// `W ← U`.
    U,
    /// `W ← U·Vᵀ`.
    #[serde(rename = "uvt")]
    UVt,
    /// `W = QR ← Q·diag(r_11..r_kk)`.
    Qd,
}

impl DecorrMethod {
    pub const ALL: [DecorrMethod; 5] = [Self::Orig, Self::Us, Self::U, Self::UVt, Self::Qd];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Orig => "orig",
            Self::Us => "us",
            Self::U => "u",
            Self::UVt => "uvt",
            Self::Qd => "qd",
        }
    }
}

impl fmt::Display for DecorrMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecorrMethod {
    type Err = SvdnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orig" => Ok(Self::Orig),
            "us" => Ok(Self::Us),
            "u" => Ok(Self::U),
            "uvt" => Ok(Self::UVt),
            "qd" => Ok(Self::Qd),
            other => Err(validation(format!(
                "unknown decorrelation method '{other}' (expected orig, us, u, uvt, qd)"
            ))),
        }
    }
}

/// Replaces an `n×k` weight matrix according to `method`. The result has the
/// same shape; for every method but `Orig` its columns are mutually
/// orthogonal.
pub fn apply(w: &Matrix, method: DecorrMethod) -> Result<Matrix> {
    match method {
        DecorrMethod::Orig => Ok(w.clone()),
        DecorrMethod::Us => {
            let f = svd(w)?;
            f.u.mul_diag(&f.s)
        }
        DecorrMethod::U => Ok(svd(w)?.u),
        DecorrMethod::UVt => {
            let f = svd(w)?;
            f.u.matmul(&f.vt)
        }
        DecorrMethod::Qd => {
            let f = qr(w)?;
            let d: Vec<f64> = (0..f.r.rows()).map(|i| f.r[(i, i)]).collect();
            f.q.mul_diag(&d)
        }
    }
}

/// All pairwise Euclidean distances `D_ij = ‖(h_i − h_j)·W‖` between the
/// rows of `h` projected through `w`, as an `m×m` matrix.
pub fn projected_distances(h: &Matrix, w: &Matrix) -> Result<Matrix> {
    let f = h.matmul(w)?;
    let m = f.rows();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let d = f
                .row(i)
                .iter()
                .zip(f.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

/// `max_ij |D_ij(w) − D_ij(w_new)|` over the rows of `h`.
pub fn distance_preservation_gap(w: &Matrix, w_new: &Matrix, h: &Matrix) -> Result<f64> {
    if w.shape() != w_new.shape() {
        return Err(validation(format!(
            "weight shapes differ: {:?} vs {:?}",
            w.shape(),
            w_new.shape()
        )));
    }
    if h.cols() != w.rows() {
        return Err(validation(format!(
            "feature dim {} does not match weight rows {}",
            h.cols(),
            w.rows()
        )));
    }
    let before = projected_distances(h, w)?;
    let after = projected_distances(h, w_new)?;
    before.max_abs_diff(&after)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    #[test]
    fn orig_is_bitwise_identity() {
        let w = random_matrix(7, 3, 1);
        assert_eq!(apply(&w, DecorrMethod::Orig).unwrap().as_slice(), w.as_slice());
    }

    #[test]
    fn us_on_orthonormal_columns_returns_them_up_to_sign() {
        // all singular values are 1 (up to rounding), so the sort may permute
        // columns; each output column must still be an input column up to sign
        let q = qr(&random_matrix(5, 3, 2)).unwrap().q;
        let out = apply(&q, DecorrMethod::Us).unwrap();
        let close = |a: &[f64], b: &[f64], sign: f64| a.iter().zip(b).all(|(x, y)| (x - sign * y).abs() < 1e-9);
        for j in 0..3 {
            let b = out.col(j);
            let found = (0..3).any(|i| close(&q.col(i), &b, 1.0) || close(&q.col(i), &b, -1.0));
            assert!(found, "output column {j} is not an input column up to sign");
        }
    }

    #[test]
    fn us_gram_is_diag_of_squared_singular_values() {
        let w = random_matrix(6, 3, 3);
        let out = apply(&w, DecorrMethod::Us).unwrap();
        let s = svd(&w).unwrap().s;
        // independent gram from explicit dot products
        for i in 0..3 {
            for j in 0..3 {
                let g: f64 = (0..6).map(|r| out[(r, i)] * out[(r, j)]).sum();
                let expected = if i == j { s[i] * s[i] } else { 0.0 };
                assert!((g - expected).abs() < 1e-9 * (1.0 + s[0] * s[0]), "g[{i}{j}]={g}");
            }
        }
    }

    #[test]
    fn orthogonalizing_methods_give_orthogonal_columns() {
        let w = random_matrix(8, 4, 4);
        for m in [DecorrMethod::Us, DecorrMethod::U, DecorrMethod::UVt, DecorrMethod::Qd] {
            let g = apply(&w, m).unwrap().gram();
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        let rel = g[(i, j)].abs() / (g[(i, i)] * g[(j, j)]).sqrt();
                        assert!(rel < 1e-9, "{m}: g[{i}{j}] rel {rel}");
                    }
                }
            }
            if matches!(m, DecorrMethod::U | DecorrMethod::UVt) {
                assert!(g.sub(&Matrix::identity(4)).unwrap().frobenius_norm() < 1e-9);
            }
        }
    }

    #[test]
    fn us_preserves_distances_and_u_does_not() {
        let w = random_matrix(10, 4, 5);
        let h = random_matrix(10, 10, 6);
        let base = projected_distances(&h, &w).unwrap();
        let max_d = base.max_abs();

        assert_eq!(distance_preservation_gap(&w, &w, &h).unwrap(), 0.0);
        let us = apply(&w, DecorrMethod::Us).unwrap();
        assert!(distance_preservation_gap(&w, &us, &h).unwrap() <= 1e-7 * (1.0 + max_d));
        let u = apply(&w, DecorrMethod::U).unwrap();
        assert!(distance_preservation_gap(&w, &u, &h).unwrap() > 1e-3);
    }

    #[test]
    fn us_is_idempotent() {
        let w = random_matrix(9, 5, 7);
        let once = apply(&w, DecorrMethod::Us).unwrap();
        let twice = apply(&once, DecorrMethod::Us).unwrap();
        assert!(once.max_abs_diff(&twice).unwrap() < 1e-9);
    }

    #[test]
    fn qd_on_rank_deficient_fails() {
        let mut w = random_matrix(5, 2, 8);
        for i in 0..5 {
            w[(i, 1)] = 2.0 * w[(i, 0)];
        }
        assert!(matches!(apply(&w, DecorrMethod::Qd), Err(SvdnetError::Degenerate(_))));
        // US tolerates the same input
        assert!(apply(&w, DecorrMethod::Us).is_ok());
    }

    #[test]
    fn shape_errors() {
        let w = random_matrix(4, 2, 1);
        assert!(distance_preservation_gap(&w, &random_matrix(4, 3, 1), &random_matrix(3, 4, 1)).is_err());
        assert!(distance_preservation_gap(&w, &w, &random_matrix(3, 5, 1)).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in DecorrMethod::ALL {
            assert_eq!(m.as_str().parse::<DecorrMethod>().unwrap(), m);
        }
        assert!("svd".parse::<DecorrMethod>().is_err());
    }
}
