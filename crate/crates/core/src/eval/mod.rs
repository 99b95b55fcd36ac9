//! Retrieval evaluation: Euclidean ranking, CMC and mAP with same-camera
//! junk filtering, plus the dataset container and a synthetic generator.

mod dataset;
mod metrics;
mod synthetic;

pub use dataset::{Labels, RetrievalDataset, Split};
pub use metrics::{evaluate, rank_gallery, RankingReport};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use crate::error::Result;
use crate::linalg::Matrix;

/// Scales every row to unit Euclidean norm; zero rows stay zero.
pub fn l2_normalize_rows(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        let row = m.row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row[j] / norm
        } else {
            0.0
        }
    })
    .expect("normalized rows are finite")
}

/// Ranks gallery rows for every query row and scores the result.
pub fn evaluate_features(
    query_feats: &Matrix,
    gallery_feats: &Matrix,
    query: &Labels,
    gallery: &Labels,
    normalize: bool,
) -> Result<RankingReport> {
    let ranked = if normalize {
        rank_gallery(&l2_normalize_rows(query_feats), &l2_normalize_rows(gallery_feats))?
    } else {
        rank_gallery(query_feats, gallery_feats)?
    };
    evaluate(query, gallery, &ranked)
}
