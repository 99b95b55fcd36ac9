//! Synthetic multi-camera identity data.
//!
//! Each identity has a latent center; each camera applies its own affine
//! distortion `x ↦ A_c·x + b_c`; each sample adds isotropic Gaussian noise.
//! The first half of the identities form the training split. For every
//! remaining identity, the first sample from each camera becomes a query
//! and the rest go to the gallery.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{RetrievalDataset, Split};
use crate::error::{validation, Result};
use crate::linalg::Matrix;
use crate::rng::{gaussian_matrix, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub identities: usize,
    pub cameras: usize,
    pub samples_per_id_camera: usize,
    pub feature_dim: usize,
    /// Dimension of the identity latent space, embedded linearly into the
    /// feature space. At most `feature_dim`.
    pub latent_dim: usize,
    /// Standard deviation of per-sample noise.
    pub noise: f64,
    /// Magnitude of camera distortions.
    pub camera_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            identities: 32,
            cameras: 4,
            samples_per_id_camera: 6,
            feature_dim: 16,
            latent_dim: 8,
            noise: 0.3,
            camera_scale: 1.0,
            seed: 7,
        }
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<RetrievalDataset> {
    if cfg.identities < 2 || cfg.cameras < 2 {
        return Err(validation("need at least 2 identities and 2 cameras"));
    }
    if cfg.samples_per_id_camera < 2 {
        return Err(validation(
            "need at least 2 samples per identity and camera so every query has cross-camera gallery matches",
        ));
    }
    if cfg.feature_dim == 0 {
        return Err(validation("feature_dim must be positive"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite() && cfg.camera_scale >= 0.0 && cfg.camera_scale.is_finite()) {
        return Err(validation("noise and camera_scale must be finite and non-negative"));
    }

    if cfg.latent_dim == 0 || cfg.latent_dim > cfg.feature_dim {
        return Err(validation("latent_dim must be in 1..=feature_dim"));
    }

    let d = cfg.feature_dim;
    let mut rng = seeded(cfg.seed);
    let latent = gaussian_matrix(cfg.identities, cfg.latent_dim, &mut rng);
    let embed = gaussian_matrix(cfg.latent_dim, d, &mut rng).scale(1.0 / (cfg.latent_dim as f64).sqrt())?;
    let centers = latent.matmul(&embed)?;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let cameras: Vec<(Matrix, Vec<f64>)> = (0..cfg.cameras)
        .map(|_| {
            let g = gaussian_matrix(d, d, &mut rng);
            let a = Matrix::from_fn(d, d, |i, j| {
                let eye = if i == j { 1.0 } else { 0.0 };
                eye + cfg.camera_scale * inv_sqrt_d * g[(i, j)]
            })
            .expect("finite");
            let b = (0..d)
                .map(|_| cfg.camera_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (a, b)
        })
        .collect();

    let train_ids = cfg.identities / 2;
    let total = cfg.identities * cfg.cameras * cfg.samples_per_id_camera;
    let mut data = Vec::with_capacity(total * d);
    let (mut ids, mut cams, mut splits) = (vec![], vec![], vec![]);
    for id in 0..cfg.identities {
        let center = centers.row(id);
        for (cam, (a, b)) in cameras.iter().enumerate() {
            for s in 0..cfg.samples_per_id_camera {
                // row-vector convention: x = center·A + b
                for j in 0..d {
                    let mut v = b[j];
                    for (i, c) in center.iter().enumerate() {
                        v += c * a[(i, j)];
                    }
                    v += cfg.noise * rng.sample::<f64, _>(StandardNormal);
                    data.push(v);
                }
                ids.push(id as u32);
                cams.push(cam as u32);
                splits.push(if id < train_ids {
                    Split::Train
                } else if s == 0 {
                    Split::Query
                } else {
                    Split::Gallery
                });
            }
        }
    }
    let features = Matrix::new(total, d, data)?;
    RetrievalDataset::new(features, ids, cams, splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate_features;

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SyntheticConfig::default();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        generate_synthetic(&cfg).unwrap().write_csv(&mut a).unwrap();
        generate_synthetic(&cfg).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let other = SyntheticConfig { seed: cfg.seed + 1, ..cfg };
        let mut c = Vec::new();
        generate_synthetic(&other).unwrap().write_csv(&mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_and_splits() {
        let cfg = SyntheticConfig::default();
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.features.shape(), (32 * 4 * 6, 16));
        assert_eq!(ds.indices(Split::Train).len(), 16 * 4 * 6);
        assert_eq!(ds.indices(Split::Query).len(), 16 * 4);
        assert_eq!(ds.indices(Split::Gallery).len(), 16 * 4 * 5);
    }

    #[test]
    fn noiseless_identities_are_trivially_retrievable() {
        let cfg = SyntheticConfig { noise: 0.0, camera_scale: 0.0, ..Default::default() };
        let ds = generate_synthetic(&cfg).unwrap();
        let train = ds.indices(Split::Train);
        for w in train.windows(2) {
            if ds.ids[w[0]] == ds.ids[w[1]] {
                assert_eq!(ds.features.row(w[0]), ds.features.row(w[1]));
            }
        }
        let r = evaluate_features(
            &ds.split_features(Split::Query),
            &ds.split_features(Split::Gallery),
            &ds.split_labels(Split::Query),
            &ds.split_labels(Split::Gallery),
            false,
        )
        .unwrap();
        assert_eq!(r.rank1(), 1.0);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SyntheticConfig::default();
        for bad in [
            SyntheticConfig { identities: 1, ..base.clone() },
            SyntheticConfig { cameras: 1, ..base.clone() },
            SyntheticConfig { samples_per_id_camera: 1, ..base.clone() },
            SyntheticConfig { noise: -1.0, ..base.clone() },
            SyntheticConfig { camera_scale: f64::NAN, ..base.clone() },
            SyntheticConfig { latent_dim: 0, ..base.clone() },
            SyntheticConfig { latent_dim: 17, ..base.clone() },
        ] {
            assert!(generate_synthetic(&bad).is_err());
        }
    }
}
