//! Column-orthogonality score of a weight matrix and the stopping rule for
//! restraint/relaxation iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvdnetError};
use crate::linalg::Matrix;

pub const DEFAULT_EPSILON_S: f64 = 1e-3;

/// `S(W) = Σ g_ii / Σ_ij |g_ij|` with `G = WᵀW`. Lies in `[1/k, 1]`;
/// equals 1 exactly when the columns are mutually orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationScore {
    pub value: f64,
    pub k: usize,
}

pub fn s_of_w(w: &Matrix) -> Result<CorrelationScore> {
    let g = w.gram();
    let k = g.rows();
    let mut diag = 0.0;
    let mut total = 0.0;
    let mut zero_cols = 0usize;
    for i in 0..k {
        let gii = g[(i, i)];
        if gii == 0.0 {
            zero_cols += 1;
        }
        diag += gii;
        for j in 0..k {
            total += g[(i, j)].abs();
        }
    }
    if diag == 0.0 {
        return Err(SvdnetError::Degenerate(
            "S(W) undefined for an all-zero weight matrix".into(),
        ));
    }
    if zero_cols > 0 {
        log::warn!("S(W): {zero_cols} of {k} weight columns have zero norm");
    }
    Ok(CorrelationScore { value: diag / total, k })
}

/// True once at least three scores exist and each of the last two
/// successive changes is below `epsilon_s` in magnitude.
pub fn rri_converged(history: &[CorrelationScore], epsilon_s: f64) -> bool {
    if history.len() < 3 {
        return false;
    }
    history[history.len() - 3..]
        .windows(2)
        .all(|p| (p[1].value - p[0].value).abs() < epsilon_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorrelate::{apply, DecorrMethod};
    use crate::testutil::random_matrix;
    use proptest::prelude::*;

    fn scores(vals: &[f64]) -> Vec<CorrelationScore> {
        vals.iter().map(|&value| CorrelationScore { value, k: 4 }).collect()
    }

    #[test]
    fn identity_scores_exactly_one() {
        assert_eq!(s_of_w(&Matrix::identity(5)).unwrap().value, 1.0);
        let diag = Matrix::from_diag(&[2.0, -3.0, 0.5]).unwrap();
        assert_eq!(s_of_w(&diag).unwrap().value, 1.0);
    }

    #[test]
    fn identical_unit_columns_score_one_over_k() {
        for k in 1..8 {
            let w = Matrix::from_fn(3, k, |i, _| [0.6, 0.0, 0.8][i]).unwrap();
            let s = s_of_w(&w).unwrap();
            assert_eq!(s.k, k);
            assert!((s.value - 1.0 / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_double_loop() {
        let w = random_matrix(8, 4, 21);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let g: f64 = (0..8).map(|r| w[(r, i)] * w[(r, j)]).sum();
                if i == j {
                    num += g;
                }
                den += g.abs();
            }
        }
        assert!((s_of_w(&w).unwrap().value - num / den).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        assert!(matches!(s_of_w(&Matrix::zeros(3, 2)), Err(SvdnetError::Degenerate(_))));
        // a single zero column is tolerated
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(s_of_w(&w).unwrap().value, 1.0);
    }

    #[test]
    fn convergence_rule() {
        assert!(rri_converged(&scores(&[0.2, 0.9, 0.9995, 0.9996, 0.9996]), 1e-3));
        assert!(!rri_converged(&scores(&[0.2, 0.5]), 1e-3));
        assert!(!rri_converged(&scores(&[0.5, 0.5]), 1e-3));
        assert!(rri_converged(&scores(&[0.5, 0.5, 0.5]), 1e-3));
        assert!(!rri_converged(&scores(&[0.5, 0.5, 0.6]), 1e-3));
        assert!(!rri_converged(&scores(&[0.5, 0.6, 0.6]), 1e-3));
    }

    #[test]
    fn decorrelated_outputs_score_near_one() {
        let w = random_matrix(10, 6, 22);
        for m in [DecorrMethod::Us, DecorrMethod::U, DecorrMethod::UVt, DecorrMethod::Qd] {
            assert!(s_of_w(&apply(&w, m).unwrap()).unwrap().value >= 1.0 - 1e-6, "{m}");
        }
    }

    proptest! {
        #[test]
        fn score_in_range_and_scale_invariant(
            seed in 0u64..10_000,
            k in 1usize..8,
            alpha in 0.01f64..100.0,
        ) {
            let w = random_matrix(k + 3, k, seed);
            let s = s_of_w(&w).unwrap().value;
            prop_assert!(s <= 1.0 + 1e-12);
            prop_assert!(s >= 1.0 / k as f64 - 1e-12);
            let scaled = s_of_w(&w.scale(alpha).unwrap()).unwrap().value;
            prop_assert!((s - scaled).abs() < 1e-12);
        }

        #[test]
        fn score_invariant_to_column_permutation(seed in 0u64..10_000, shift in 1usize..5) {
            let w = random_matrix(7, 5, seed);
            let perm = Matrix::from_fn(7, 5, |i, j| w[(i, (j + shift) % 5)]).unwrap();
            let a = s_of_w(&w).unwrap().value;
            let b = s_of_w(&perm).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
