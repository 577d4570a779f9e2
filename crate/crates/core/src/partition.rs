//! Test hold-out, scene/object training splits and trainer manifests.

use std::collections::{BTreeMap, BTreeSet};

use crate::colmap::ImageId;
use crate::geometry::Aabb;
use crate::kv::KvWriter;

pub const SCENE_ITERATIONS: u32 = 20_000;
pub const OBJECT_ITERATIONS: u32 = 30_000;
pub const DENSIFY_UNTIL_ITERATION: u32 = 15_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("hold-out fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("hold-out fraction {fraction} selects no test image out of {count}")]
    EmptyTest { fraction: f64, count: usize },
    #[error("hold-out fraction {fraction} leaves no image out of {count}")]
    EmptyRemainder { fraction: f64, count: usize },
    #[error("retain ratio {0} must lie in [0, 1]")]
    InvalidRetainRatio(f64),
    #[error("image {0} is not in the model")]
    UnknownImage(ImageId),
    #[error("test image {image} appears in the selection of ROI {roi_id:?}")]
    TestInSelection { roi_id: String, image: ImageId },
    #[error("image {image} appears twice in the selection of ROI {roi_id:?}")]
    DuplicateInSelection { roi_id: String, image: ImageId },
    #[error("ROI {0:?} is listed twice")]
    DuplicateRoi(String),
    #[error("ROI {0:?} has no box")]
    MissingBox(String),
    #[error("path {0:?} is used by more than one manifest file")]
    PathCollision(String),
}

/// Splits sorted ids into every `stride`-th id (from index 0) and the rest,
/// where the stride is the largest that still yields `floor(n * fraction)`
/// test ids.
pub fn hold_out_test(ids: &[ImageId], fraction: f64) -> Result<(Vec<ImageId>, Vec<ImageId>), PartitionError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PartitionError::InvalidFraction(fraction));
    }
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let n = sorted.len();
    let target = (n as f64 * fraction + 1e-9).floor() as usize;
    if target == 0 {
        return Err(PartitionError::EmptyTest { fraction, count: n });
    }
    let stride = ((1.0 / fraction + 1e-9).floor() as usize).max(1);
    let test: Vec<ImageId> = sorted.iter().copied().step_by(stride).take(target).collect();
    if test.len() == n {
        return Err(PartitionError::EmptyRemainder { fraction, count: n });
    }
    let chosen: BTreeSet<ImageId> = test.iter().copied().collect();
    let rest = sorted.into_iter().filter(|id| !chosen.contains(id)).collect();
    Ok((test, rest))
}

/// Positions of an ordered selection kept in scene training: index `i`
/// stays when `ceil((i + 1) r)` exceeds `ceil(i r)`, so the even indices
/// for `r = 0.5`.
pub fn retained_positions(len: usize, ratio: f64) -> Vec<usize> {
    let c = |x: f64| (x - 1e-9).ceil() as i64;
    (0..len).filter(|&i| c((i + 1) as f64 * ratio) > c(i as f64 * ratio)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoiPartition {
    pub roi_id: String,
    /// Full selection order.
    pub object_train_ids: Vec<ImageId>,
    /// Selected views also used for scene training, in selection order.
    pub retained_ids: Vec<ImageId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    pub test_ids: Vec<ImageId>,
    /// Ascending.
    pub scene_train_ids: Vec<ImageId>,
    pub rois: Vec<RoiPartition>,
}

impl PartitionPlan {
    pub fn roi(&self, roi_id: &str) -> Option<&RoiPartition> {
        self.rois.iter().find(|r| r.roi_id == roi_id)
    }
}

/// Derives the training sets from the full image list, the test hold-out
/// and one ordered selection per ROI.
pub fn build_partition(
    all_ids: &[ImageId],
    test_ids: &[ImageId],
    selections: &[(String, Vec<ImageId>)],
    retain_ratio: f64,
) -> Result<PartitionPlan, PartitionError> {
    if !(0.0..=1.0).contains(&retain_ratio) {
        return Err(PartitionError::InvalidRetainRatio(retain_ratio));
    }
    let all: BTreeSet<ImageId> = all_ids.iter().copied().collect();
    let test: BTreeSet<ImageId> = test_ids.iter().copied().collect();
    if let Some(&id) = test.iter().find(|id| !all.contains(id)) {
        return Err(PartitionError::UnknownImage(id));
    }
    let mut seen_rois = BTreeSet::new();
    let mut selected = BTreeSet::new();
    let mut retained = BTreeSet::new();
    let mut rois = Vec::with_capacity(selections.len());
    for (roi_id, order) in selections {
        if !seen_rois.insert(roi_id.as_str()) {
            return Err(PartitionError::DuplicateRoi(roi_id.clone()));
        }
        let mut within = BTreeSet::new();
        for &id in order {
            if !all.contains(&id) {
                return Err(PartitionError::UnknownImage(id));
            }
            if test.contains(&id) {
                return Err(PartitionError::TestInSelection { roi_id: roi_id.clone(), image: id });
            }
            if !within.insert(id) {
                return Err(PartitionError::DuplicateInSelection { roi_id: roi_id.clone(), image: id });
            }
        }
        let kept: Vec<ImageId> = retained_positions(order.len(), retain_ratio).into_iter().map(|i| order[i]).collect();
        selected.extend(order.iter().copied());
        retained.extend(kept.iter().copied());
        rois.push(RoiPartition { roi_id: roi_id.clone(), object_train_ids: order.clone(), retained_ids: kept });
    }
    let scene_train_ids = all
        .iter()
        .copied()
        .filter(|id| !test.contains(id) && (!selected.contains(id) || retained.contains(id)))
        .collect();
    let mut test_ids: Vec<ImageId> = test.into_iter().collect();
    test_ids.sort_unstable();
    Ok(PartitionPlan { test_ids, scene_train_ids, rois })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelRole {
    Scene,
    Object,
}

impl ModelRole {
    pub fn name(self) -> &'static str {
        match self {
            ModelRole::Scene => "scene",
            ModelRole::Object => "object",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initialization {
    SfmPoints,
    SceneCheckpoint,
}

impl Initialization {
    pub fn name(self) -> &'static str {
        match self {
            Initialization::SfmPoints => "sfm_points",
            Initialization::SceneCheckpoint => "scene_checkpoint",
        }
    }
}

/// Declarative configuration for an external 3DGS trainer.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingManifest {
    pub model_role: ModelRole,
    pub roi_id: Option<String>,
    pub iterations: u32,
    pub densify_region: Option<Aabb<f64>>,
    pub densify_until_iteration: Option<u32>,
    pub initialization: Initialization,
    pub shuffle: bool,
    pub images_file: String,
    /// Where the manifest itself is written.
    pub manifest_file: String,
}

impl TrainingManifest {
    pub fn scene(images_file: impl Into<String>, manifest_file: impl Into<String>) -> Self {
        Self {
            model_role: ModelRole::Scene,
            roi_id: None,
            iterations: SCENE_ITERATIONS,
            densify_region: None,
            densify_until_iteration: None,
            initialization: Initialization::SfmPoints,
            shuffle: true,
            images_file: images_file.into(),
            manifest_file: manifest_file.into(),
        }
    }

    pub fn object(
        roi_id: impl Into<String>,
        region: Aabb<f64>,
        images_file: impl Into<String>,
        manifest_file: impl Into<String>,
    ) -> Self {
        Self {
            model_role: ModelRole::Object,
            roi_id: Some(roi_id.into()),
            iterations: OBJECT_ITERATIONS,
            densify_region: Some(region),
            densify_until_iteration: Some(DENSIFY_UNTIL_ITERATION),
            initialization: Initialization::SceneCheckpoint,
            shuffle: false,
            images_file: images_file.into(),
            manifest_file: manifest_file.into(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new();
        w.entry("model_role", self.model_role.name());
        if let Some(id) = &self.roi_id {
            w.entry("roi_id", id);
        }
        w.entry("iterations", self.iterations);
        if let Some(b) = &self.densify_region {
            let (lo, hi) = (b.min(), b.max());
            for (axis, k) in ["x", "y", "z"].iter().enumerate() {
                w.real(&format!("densify_min_{k}"), lo[axis]);
            }
            for (axis, k) in ["x", "y", "z"].iter().enumerate() {
                w.real(&format!("densify_max_{k}"), hi[axis]);
            }
        }
        if let Some(n) = self.densify_until_iteration {
            w.entry("densify_until_iteration", n);
        }
        w.entry("initialization", self.initialization.name());
        w.entry("shuffle", self.shuffle);
        w.entry("images_file", &self.images_file);
        w.finish()
    }
}

/// File names for the scene manifest and one per ROI.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestPaths {
    pub scene_manifest: String,
    pub scene_images: String,
    /// Per roi id: (manifest, image list).
    pub objects: BTreeMap<String, (String, String)>,
}

impl ManifestPaths {
    pub fn for_rois<'a>(roi_ids: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            scene_manifest: "scene.manifest".into(),
            scene_images: "scene_train.txt".into(),
            objects: roi_ids
                .into_iter()
                .map(|id| (id.to_string(), (format!("object_{id}.manifest"), format!("object_{id}_train.txt"))))
                .collect(),
        }
    }
}

/// One scene manifest followed by one object manifest per ROI of the plan.
pub fn emit_manifests(
    plan: &PartitionPlan,
    boxes: &BTreeMap<String, Aabb<f64>>,
    paths: &ManifestPaths,
) -> Result<Vec<TrainingManifest>, PartitionError> {
    let mut out = vec![TrainingManifest::scene(&paths.scene_images, &paths.scene_manifest)];
    for roi in &plan.rois {
        let region = *boxes.get(&roi.roi_id).ok_or_else(|| PartitionError::MissingBox(roi.roi_id.clone()))?;
        let (manifest, images) =
            paths.objects.get(&roi.roi_id).cloned().unwrap_or_else(|| {
                (format!("object_{}.manifest", roi.roi_id), format!("object_{}_train.txt", roi.roi_id))
            });
        out.push(TrainingManifest::object(&roi.roi_id, region, images, manifest));
    }
    let mut used = BTreeSet::new();
    for m in &out {
        for p in [&m.manifest_file, &m.images_file] {
            if !used.insert(p.as_str()) {
                return Err(PartitionError::PathCollision(p.clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: i32) -> Vec<ImageId> {
        (1..=n).collect()
    }

    #[test]
    fn protocol_counts() {
        let (test, rest) = hold_out_test(&ids(335), 21.0 / 335.0).unwrap();
        assert_eq!((test.len(), rest.len()), (21, 314));
    }

    #[test]
    fn stride_two() {
        let all: Vec<ImageId> = (0..10).map(|i| 100 + i).collect();
        let (test, rest) = hold_out_test(&all, 0.5).unwrap();
        assert_eq!(test, vec![100, 102, 104, 106, 108]);
        assert_eq!(rest.len(), 5);
    }

    #[test]
    fn one_in_seven() {
        let (test, rest) = hold_out_test(&ids(7), 1.0 / 7.0).unwrap();
        assert_eq!(test, vec![1]);
        assert_eq!(rest, vec![2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn hold_out_errors() {
        assert_eq!(hold_out_test(&ids(5), 0.0), Err(PartitionError::InvalidFraction(0.0)));
        assert_eq!(hold_out_test(&ids(5), 1.0), Err(PartitionError::InvalidFraction(1.0)));
        assert!(matches!(hold_out_test(&ids(5), 0.1), Err(PartitionError::EmptyTest { .. })));
        assert!(matches!(hold_out_test(&ids(1), 0.99), Err(PartitionError::EmptyTest { .. })));
    }

    #[test]
    fn hold_out_is_stable_and_does_not_reselect() {
        let all = ids(200);
        let a = hold_out_test(&all, 0.1).unwrap();
        assert_eq!(a, hold_out_test(&all, 0.1).unwrap());
        let (again, _) = hold_out_test(&a.1, 0.1).unwrap();
        assert!(again.iter().all(|id| !a.0.contains(id)));
    }

    #[test]
    fn retention_counts() {
        assert_eq!(retained_positions(150, 0.5).len(), 75);
        assert_eq!(retained_positions(5, 0.5), vec![0, 2, 4]);
        assert!(retained_positions(20, 0.0).is_empty());
        assert_eq!(retained_positions(4, 1.0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_retention_excludes_selection() {
        let plan = build_partition(&ids(20), &[1, 11], &[("a".into(), vec![3, 5, 7])], 0.0).unwrap();
        assert!(plan.scene_train_ids.iter().all(|id| ![1, 11, 3, 5, 7].contains(id)));
        assert_eq!(plan.scene_train_ids.len(), 15);
    }

    #[test]
    fn shared_views_retained_by_one_roi_stay_in_scene() {
        // Shared views sit at even positions in `a` and odd positions in `b`.
        let shared: Vec<ImageId> = (10..20).collect();
        let a: Vec<ImageId> = shared.iter().flat_map(|&s| [s, s + 100]).collect();
        let b: Vec<ImageId> = shared.iter().flat_map(|&s| [s + 200, s]).collect();
        let sel = vec![("a".to_string(), a), ("b".to_string(), b)];
        let plan = build_partition(&ids(300), &[], &sel, 0.5).unwrap();
        let (ra, rb) = (plan.roi("a").unwrap(), plan.roi("b").unwrap());
        assert_eq!(ra.retained_ids, shared);
        assert!(rb.retained_ids.iter().all(|id| !shared.contains(id)));
        for id in &shared {
            assert!(ra.object_train_ids.contains(id) && rb.object_train_ids.contains(id));
            assert!(plan.scene_train_ids.contains(id));
        }
        // Unretained fillers of `a` are excluded.
        assert!(!plan.scene_train_ids.contains(&110));
    }

    #[test]
    fn partition_errors() {
        assert_eq!(build_partition(&ids(5), &[], &[("a".into(), vec![9])], 0.5), Err(PartitionError::UnknownImage(9)));
        assert!(matches!(
            build_partition(&ids(5), &[2], &[("a".into(), vec![2])], 0.5),
            Err(PartitionError::TestInSelection { .. })
        ));
        assert!(matches!(
            build_partition(&ids(5), &[], &[("a".into(), vec![]), ("a".into(), vec![])], 0.5),
            Err(PartitionError::DuplicateRoi(_))
        ));
    }

    fn unit_box(offset: f64) -> Aabb<f64> {
        Aabb::from_arrays([offset, 0.0, 0.0], [offset + 1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn manifests_per_roi_count() {
        let plan = build_partition(&ids(10), &[1], &[], 0.5).unwrap();
        let m = emit_manifests(&plan, &BTreeMap::new(), &ManifestPaths::for_rois([])).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].iterations, m[0].shuffle), (20_000, true));
        assert!(m[0].densify_region.is_none() && m[0].densify_until_iteration.is_none());

        let sel: Vec<(String, Vec<ImageId>)> =
            ["x", "y", "z"].iter().enumerate().map(|(k, r)| (r.to_string(), vec![2 + k as i32])).collect();
        let boxes: BTreeMap<String, Aabb<f64>> =
            ["x", "y", "z"].iter().enumerate().map(|(k, r)| (r.to_string(), unit_box(k as f64 * 2.0))).collect();
        let plan = build_partition(&ids(10), &[1], &sel, 0.5).unwrap();
        let m = emit_manifests(&plan, &boxes, &ManifestPaths::for_rois(["x", "y", "z"])).unwrap();
        assert_eq!(m.len(), 4);
        let regions: BTreeSet<String> = m[1..].iter().map(|o| format!("{:?}", o.densify_region)).collect();
        assert_eq!(regions.len(), 3);
        for o in &m[1..] {
            assert_eq!(o.iterations, 30_000);
            assert_eq!(o.densify_until_iteration, Some(15_000));
            assert_eq!(o.initialization, Initialization::SceneCheckpoint);
            assert!(!o.shuffle);
        }
    }

    #[test]
    fn manifest_text_is_exact() {
        let b = Aabb::from_arrays([-0.25, 1.0 / 3.0, 2.0], [0.75, 1.5, 1e-10 + 3.0]).unwrap();
        let m = TrainingManifest::object("chair", b, "object_chair_train.txt", "object_chair.manifest");
        assert_eq!(
            m.to_text(),
            "model_role: object\nroi_id: chair\niterations: 30000\n\
             densify_min_x: -0.25\ndensify_min_y: 0.333333333\ndensify_min_z: 2\n\
             densify_max_x: 0.75\ndensify_max_y: 1.5\ndensify_max_z: 3\n\
             densify_until_iteration: 15000\ninitialization: scene_checkpoint\nshuffle: false\n\
             images_file: object_chair_train.txt\n"
        );
        let s = TrainingManifest::scene("scene_train.txt", "scene.manifest");
        assert_eq!(
            s.to_text(),
            "model_role: scene\niterations: 20000\ninitialization: sfm_points\nshuffle: true\nimages_file: scene_train.txt\n"
        );
    }

    #[test]
    fn colliding_paths_are_rejected() {
        let plan = build_partition(&ids(10), &[1], &[("a".into(), vec![2])], 0.5).unwrap();
        let boxes = BTreeMap::from([("a".to_string(), unit_box(0.0))]);
        let mut paths = ManifestPaths::for_rois(["a"]);
        paths.objects.insert("a".into(), ("scene.manifest".into(), "a.txt".into()));
        assert_eq!(emit_manifests(&plan, &boxes, &paths), Err(PartitionError::PathCollision("scene.manifest".into())));
    }
}
