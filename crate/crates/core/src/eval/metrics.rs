use serde::{Deserialize, Serialize};

use super::Labels;
use crate::error::{validation, Result, SvdnetError};
use crate::linalg::{pairwise_sq_dist, Matrix};

/// Aggregate retrieval quality over all scored queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// `cmc[r]` is the fraction of queries whose first true match sits at
    /// 0-based position `≤ r` of the filtered list.
    pub cmc: Vec<f64>,
    pub map: f64,
    /// AP of each scored query, in query order.
    pub per_query_ap: Vec<f64>,
    /// Queries skipped because no valid positive survived junk filtering.
    pub excluded_queries: usize,
}

impl RankingReport {
    /// CMC at 1-based rank `r`, saturating at the end of the curve.
    pub fn rank(&self, r: usize) -> f64 {
        assert!(r >= 1, "ranks are 1-based");
        self.cmc.get(r - 1).or(self.cmc.last()).copied().unwrap_or(0.0)
    }

    pub fn rank1(&self) -> f64 {
        self.rank(1)
    }
}

/// Gallery indices sorted by ascending squared Euclidean distance for each
/// query row. Exactly equal distances keep gallery order.
pub fn rank_gallery(query_feats: &Matrix, gallery_feats: &Matrix) -> Result<Vec<Vec<usize>>> {
    if query_feats.cols() != gallery_feats.cols() {
        return Err(validation(format!(
            "query dim {} != gallery dim {}",
            query_feats.cols(),
            gallery_feats.cols()
        )));
    }
    let dist = pairwise_sq_dist(query_feats, gallery_feats)?;
    Ok((0..dist.rows())
        .map(|q| {
            let row = dist.row(q);
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
            order
        })
        .collect())
}

/// CMC and mAP over ranked lists. Gallery items sharing both identity and
/// camera with the query are dropped before scoring. AP is the mean of the
/// precision values at each true-match position.
pub fn evaluate(query: &Labels, gallery: &Labels, ranked: &[Vec<usize>]) -> Result<RankingReport> {
    if ranked.len() != query.len() {
        return Err(validation(format!(
            "{} ranked lists for {} queries",
            ranked.len(),
            query.len()
        )));
    }
    let g = gallery.len();
    let mut first_hit_counts = vec![0usize; g.max(1)];
    let mut per_query_ap = Vec::with_capacity(query.len());
    let mut excluded = 0usize;
    let mut seen = vec![false; g];

    for (q, list) in ranked.iter().enumerate() {
        if list.len() != g {
            return Err(validation(format!("ranked list {q} has {} of {g} gallery items", list.len())));
        }
        seen.iter_mut().for_each(|s| *s = false);
        for &idx in list {
            if idx >= g || std::mem::replace(&mut seen[idx], true) {
                return Err(validation(format!("ranked list {q} is not a permutation of the gallery")));
            }
        }

        let (qid, qcam) = (query.ids[q], query.cameras[q]);
        let mut pos = 0usize;
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        let mut first_hit = None;
        for &idx in list {
            let same_id = gallery.ids[idx] == qid;
            if same_id && gallery.cameras[idx] == qcam {
                continue;
            }
            pos += 1;
            if same_id {
                hits += 1;
                precision_sum += hits as f64 / pos as f64;
                first_hit.get_or_insert(pos - 1);
            }
        }
        match first_hit {
            Some(r) => {
                first_hit_counts[r] += 1;
                per_query_ap.push(precision_sum / hits as f64);
            }
            None => excluded += 1,
        }
    }

    if excluded > 0 {
        log::warn!("{excluded} queries have no valid gallery match and were excluded");
    }
    let scored = per_query_ap.len();
    if scored == 0 {
        return Err(SvdnetError::Degenerate("no query has a valid gallery match".into()));
    }
    let mut acc = 0usize;
    let cmc = first_hit_counts
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / scored as f64
        })
        .collect();
    let map = per_query_ap.iter().sum::<f64>() / scored as f64;
    Ok(RankingReport { cmc, map, per_query_ap, excluded_queries: excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    fn labels(ids: &[u32], cams: &[u32]) -> Labels {
        Labels { ids: ids.to_vec(), cameras: cams.to_vec() }
    }

    #[test]
    fn exact_copy_ranks_first() {
        let g = random_matrix(6, 3, 1);
        let q = g.select_rows(&[4]).unwrap();
        assert_eq!(rank_gallery(&q, &g).unwrap()[0][0], 4);
    }

    #[test]
    fn one_dimensional_order() {
        let q = Matrix::new(1, 1, vec![0.0]).unwrap();
        let g = Matrix::new(3, 1, vec![3.0, -1.0, 2.0]).unwrap();
        assert_eq!(rank_gallery(&q, &g).unwrap()[0], vec![1, 2, 0]);
    }

    #[test]
    fn ties_break_by_gallery_index() {
        let q = Matrix::new(1, 1, vec![0.0]).unwrap();
        let g = Matrix::new(4, 1, vec![1.0, -1.0, 1.0, 0.5]).unwrap();
        assert_eq!(rank_gallery(&q, &g).unwrap()[0], vec![3, 0, 1, 2]);
    }

    #[test]
    fn matches_full_sort_oracle() {
        let q = random_matrix(20, 8, 2);
        let g = random_matrix(20, 8, 3);
        let ranked = rank_gallery(&q, &g).unwrap();
        for (i, list) in ranked.iter().enumerate() {
            let mut pairs: Vec<(f64, usize)> = (0..20)
                .map(|j| {
                    let d: f64 = (0..8).map(|t| (q[(i, t)] - g[(j, t)]).powi(2)).sum();
                    (d, j)
                })
                .collect();
            pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let oracle: Vec<usize> = pairs.into_iter().map(|p| p.1).collect();
            assert_eq!(list, &oracle);
        }
        assert!(rank_gallery(&q, &random_matrix(2, 3, 1)).is_err());
    }

    #[test]
    fn single_positive_ranked_first() {
        let r = evaluate(&labels(&[7], &[0]), &labels(&[7, 1, 2], &[1, 0, 1]), &[vec![0, 1, 2]])
            .unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.cmc, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn positives_at_one_and_three() {
        let r = evaluate(&labels(&[5], &[0]), &labels(&[5, 1, 5, 2], &[1, 1, 2, 2]), &[vec![0, 1, 2, 3]])
            .unwrap();
        assert!((r.map - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn junk_is_removed_before_scoring() {
        // item 0 is same id + same camera: junk; the true match becomes position 1
        let r = evaluate(&labels(&[5], &[0]), &labels(&[5, 9, 5], &[0, 1, 1]), &[vec![0, 1, 2]]).unwrap();
        assert_eq!(r.per_query_ap, vec![0.5]);
        assert_eq!(r.cmc[0], 0.0);
        assert_eq!(r.cmc[1], 1.0);
    }

    #[test]
    fn queries_without_positives_are_excluded() {
        let q = labels(&[5, 6], &[0, 0]);
        let g = labels(&[5, 6], &[1, 0]);
        let r = evaluate(&q, &g, &[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(r.excluded_queries, 1);
        assert_eq!(r.per_query_ap.len(), 1);
        let none = evaluate(&labels(&[6], &[0]), &g, &[vec![0, 1]]);
        assert!(matches!(none, Err(SvdnetError::Degenerate(_))));
    }

    #[test]
    fn malformed_lists_rejected() {
        let q = labels(&[1], &[0]);
        let g = labels(&[1, 2], &[1, 0]);
        assert!(evaluate(&q, &g, &[vec![0]]).is_err());
        assert!(evaluate(&q, &g, &[vec![0, 0]]).is_err());
        assert!(evaluate(&q, &g, &[]).is_err());
    }

    #[test]
    fn rank_accessor() {
        let r = RankingReport { cmc: vec![0.5, 0.75, 1.0], map: 0.6, per_query_ap: vec![], excluded_queries: 0 };
        assert_eq!(r.rank1(), 0.5);
        assert_eq!(r.rank(3), 1.0);
        assert_eq!(r.rank(10), 1.0);
    }
}
