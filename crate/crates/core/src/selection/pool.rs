use std::collections::{BTreeMap, BTreeSet};

use crate::colmap::{ImageId, PointId, SfmModel};
use crate::geometry::Camera;
use crate::linalg::Vec3;

use super::features::{static_features, FeatureScaler, ViewFeature, RAW_FEATURES};
use super::score::{direction_bin, voxel_index, CoverageState, Normalizers, RoiScore};
use super::{RoiSpec, SelectionError};

#[derive(Clone, Debug)]
pub struct Candidate {
    pub image_id: ImageId,
    pub name: String,
    /// Distinct dense indices of the in-box points this view observes.
    pub points: Vec<u32>,
    pub direction_bin: usize,
    /// Distance, projected area ratio and in-box keypoint count.
    pub static_features: [f64; 3],
    pub feature: ViewFeature,
}

/// Candidates of one ROI with everything the score needs precomputed.
#[derive(Clone, Debug)]
pub struct CandidatePool {
    pub roi: RoiSpec,
    /// Sorted by ascending image id.
    pub candidates: Vec<Candidate>,
    /// Model id of each dense point.
    pub point_ids: Vec<PointId>,
    /// Voxel of each dense point.
    pub point_voxel: Vec<u32>,
    pub normalizers: Normalizers,
    pub scaler: FeatureScaler,
}

impl CandidatePool {
    pub fn build(model: &SfmModel, roi: &RoiSpec, candidates: &[ImageId]) -> Result<Self, SelectionError> {
        roi.validate()?;
        let ids: BTreeSet<ImageId> = candidates.iter().copied().collect();
        if ids.is_empty() {
            return Err(SelectionError::EmptyPool);
        }
        let bounds = &roi.bounds;
        let center = bounds.center();
        let mut dense: BTreeMap<PointId, u32> = BTreeMap::new();
        let mut point_ids = Vec::new();
        let mut point_voxel = Vec::new();
        let mut pending = Vec::with_capacity(ids.len());
        for id in ids {
            let image = model.images.get(&id).ok_or(SelectionError::UnknownImage(id))?;
            let intrinsics = model.camera_of(image).ok_or(SelectionError::UnknownImage(id))?;
            let mut points: Vec<u32> = Vec::new();
            for pid in image.observations.iter().filter_map(|o| o.point3d_id) {
                let Some(p) = model.points.get(&pid) else { continue };
                let pos = Vec3(p.position);
                if !bounds.contains(&pos) {
                    continue;
                }
                let idx = *dense.entry(pid).or_insert_with(|| {
                    point_ids.push(pid);
                    point_voxel.push(voxel_index(&pos, bounds, roi.voxel_grid) as u32);
                    (point_ids.len() - 1) as u32
                });
                points.push(idx);
            }
            points.sort_unstable();
            points.dedup();
            let camera: Camera<f64> = Camera::from_colmap(intrinsics, image);
            let cam_center = camera.center();
            let forward = camera.forward();
            let stat = static_features(model, intrinsics, image, bounds);
            let raw: [f64; RAW_FEATURES] = [
                cam_center.x(),
                cam_center.y(),
                cam_center.z(),
                forward.x(),
                forward.y(),
                forward.z(),
                stat[0],
                stat[1],
                stat[2],
            ];
            pending.push((id, image.name.clone(), points, direction_bin(&(cam_center - center)), stat, raw));
        }

        let voxels: BTreeSet<u32> = point_voxel.iter().copied().collect();
        let bins: BTreeSet<usize> = pending.iter().map(|p| p.3).collect();
        let normalizers = Normalizers { points: point_ids.len(), voxels: voxels.len(), bins: bins.len() };
        normalizers.check()?;

        let raws: Vec<[f64; RAW_FEATURES]> = pending.iter().map(|p| p.5).collect();
        let scaler = FeatureScaler::fit(&raws);
        let candidates = pending
            .into_iter()
            .map(|(image_id, name, points, direction_bin, static_features, raw)| Candidate {
                image_id,
                name,
                points,
                direction_bin,
                static_features,
                feature: scaler.apply(&raw, roi.feature_mode),
            })
            .collect();
        Ok(Self { roi: roi.clone(), candidates, point_ids, point_voxel, normalizers, scaler })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn position(&self, id: ImageId) -> Option<usize> {
        self.candidates.binary_search_by_key(&id, |c| c.image_id).ok()
    }

    pub fn empty_state(&self) -> CoverageState {
        CoverageState::new(self.point_ids.len(), self.roi.voxel_grid.pow(3))
    }

    pub fn add(&self, state: &mut CoverageState, index: usize) {
        let c = &self.candidates[index];
        state.add(&c.points, &self.point_voxel, c.direction_bin);
    }

    pub fn score(&self, state: &CoverageState) -> RoiScore {
        state.score(&self.normalizers, &self.roi.weights)
    }

    pub fn score_with(&self, state: &CoverageState, index: usize) -> RoiScore {
        let c = &self.candidates[index];
        state.score_with(&c.points, &self.point_voxel, c.direction_bin, &self.normalizers, &self.roi.weights)
    }

    /// Exact score of an arbitrary subset of candidate indices.
    pub fn score_of(&self, indices: &[usize]) -> RoiScore {
        let mut state = self.empty_state();
        for &i in indices {
            self.add(&mut state, i);
        }
        self.score(&state)
    }

    /// Raw static criteria of every candidate, for ranking.
    pub fn static_table(&self) -> Vec<(ImageId, [f64; 3])> {
        self.candidates.iter().map(|c| (c.image_id, c.static_features)).collect()
    }
}
