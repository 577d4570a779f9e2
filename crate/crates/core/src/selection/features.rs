use std::cmp::Ordering;

use crate::colmap::{CameraIntrinsics, ImageId, PosedImage, SfmModel};
use crate::geometry::{projected_aabb, Aabb, Camera};
use crate::linalg::Vec3;

use super::FeatureMode;

/// Raw viewpoint descriptor: center (3), forward axis (3), distance,
/// projected area ratio, keypoint count.
pub const RAW_FEATURES: usize = 9;

/// Distance to the box center (m), projected box area over image area, and
/// the number of in-box sparse points observed by `image`.
pub fn static_features(
    model: &SfmModel,
    intrinsics: &CameraIntrinsics,
    image: &PosedImage,
    bounds: &Aabb<f64>,
) -> [f64; 3] {
    let camera = Camera::from_colmap(intrinsics, image);
    let distance = (camera.center() - bounds.center()).norm();
    let area = projected_aabb(&camera, bounds).map_or(0.0, |p| p.area);
    let proj_area = area / camera.image_area();
    let keypoints = image
        .observations
        .iter()
        .filter_map(|o| o.point3d_id)
        .filter(|pid| model.points.get(pid).is_some_and(|p| bounds.contains(&Vec3(p.position))))
        .count();
    [distance, proj_area, keypoints as f64]
}

/// Orders candidates by the mean of pool min-max normalized criteria,
/// distance inverted; ties by ascending id.
pub fn static_rank(candidates: &[(ImageId, [f64; 3])]) -> Vec<ImageId> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (_, f) in candidates {
        for k in 0..3 {
            lo[k] = lo[k].min(f[k]);
            hi[k] = hi[k].max(f[k]);
        }
    }
    let norm = |k: usize, v: f64| if hi[k] > lo[k] { (v - lo[k]) / (hi[k] - lo[k]) } else { 0.0 };
    let mut scored: Vec<(ImageId, f64)> = candidates
        .iter()
        .map(|(id, f)| {
            let closeness = 1.0 - norm(0, f[0]);
            (*id, (closeness + norm(1, f[1]) + norm(2, f[2])) / 3.0)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(id, _)| id).collect()
}

/// Per-pool z-score statistics of the raw descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureScaler {
    pub mean: [f64; RAW_FEATURES],
    /// Population deviation; constant dimensions store 1 so they map to 0.
    pub deviation: [f64; RAW_FEATURES],
}

impl FeatureScaler {
    pub fn fit(raw: &[[f64; RAW_FEATURES]]) -> Self {
        let n = raw.len().max(1) as f64;
        let mut mean = [0.0; RAW_FEATURES];
        let mut deviation = [0.0; RAW_FEATURES];
        for r in raw {
            for k in 0..RAW_FEATURES {
                mean[k] += r[k] / n;
            }
        }
        for r in raw {
            for k in 0..RAW_FEATURES {
                deviation[k] += (r[k] - mean[k]).powi(2) / n;
            }
        }
        for d in &mut deviation {
            *d = d.sqrt();
            if !(*d > 1e-12) {
                *d = 1.0;
            }
        }
        Self { mean, deviation }
    }

    pub fn apply(&self, raw: &[f64; RAW_FEATURES], mode: FeatureMode) -> ViewFeature {
        let standardized = std::array::from_fn(|k| (raw[k] - self.mean[k]) / self.deviation[k]);
        ViewFeature { raw: *raw, standardized, mode }
    }
}

/// Standardized descriptor fed to the surrogate.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewFeature {
    pub raw: [f64; RAW_FEATURES],
    pub standardized: [f64; RAW_FEATURES],
    pub mode: FeatureMode,
}

impl ViewFeature {
    /// Components used by the feature mode.
    pub fn vector(&self) -> &[f64] {
        &self.standardized[..self.mode.dim()]
    }
}
