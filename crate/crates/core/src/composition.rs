//! Replacement of scene Gaussians inside ROI boxes by object Gaussians.
//!
//! Membership is decided by the Gaussian center alone.

use crate::geometry::{point_in_aabb, Aabb};
use crate::kv::KvWriter;
use crate::linalg::Vec3;
use crate::splat::{SplatRef, SplatSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompositionError {
    #[error("boxes of ROI {first:?} and ROI {second:?} overlap")]
    Overlap { first: String, second: String },
    #[error("ROI {roi_id:?} has SH degree {found}, scene has {expected}")]
    ShDegreeMismatch { roi_id: String, expected: u8, found: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OverlapPolicy {
    /// Overlapping boxes are an error.
    #[default]
    Reject,
    /// Earlier ROIs claim the overlap; later boxes shrink accordingly.
    FirstWins,
}

impl std::str::FromStr for OverlapPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(OverlapPolicy::Reject),
            "first_wins" => Ok(OverlapPolicy::FirstWins),
            other => Err(format!("unknown overlap policy {other:?}")),
        }
    }
}

/// An object reconstruction and the box it replaces.
#[derive(Clone, Debug)]
pub struct RoiSplats {
    pub roi_id: String,
    pub splats: SplatSet,
    pub bounds: Aabb<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoiCounts {
    pub roi_id: String,
    pub scene_removed: usize,
    pub object_inserted: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositionReport {
    pub scene_in: usize,
    pub rois: Vec<RoiCounts>,
    pub merged_out: usize,
}

impl CompositionReport {
    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new();
        w.entry("scene_in", self.scene_in);
        for r in &self.rois {
            w.entry(&format!("{}.scene_removed", r.roi_id), r.scene_removed);
            w.entry(&format!("{}.object_inserted", r.roi_id), r.object_inserted);
        }
        w.entry("merged_out", self.merged_out);
        w.finish()
    }
}

fn inside(s: &SplatRef<'_>, b: &Aabb<f64>) -> bool {
    point_in_aabb(&Vec3(s.center()), b)
}

/// Splits a set by center membership, preserving record order in each part.
pub fn filter_in_box(set: &SplatSet, bounds: &Aabb<f64>) -> (SplatSet, SplatSet) {
    let degree = set.sh_degree();
    let mut ins = SplatSet::new(degree).expect("degree of an existing set");
    let mut outs = SplatSet::new(degree).expect("degree of an existing set");
    for s in set.iter() {
        if inside(&s, bounds) {
            ins.push_raw(s.raw());
        } else {
            outs.push_raw(s.raw());
        }
    }
    (ins, outs)
}

pub fn count_in_box(set: &SplatSet, bounds: &Aabb<f64>) -> usize {
    set.iter().filter(|s| inside(s, bounds)).count()
}

/// Scene records outside every box, then each ROI's in-box object records
/// in input order.
pub fn compose(
    scene: &SplatSet,
    objects: &[RoiSplats],
    policy: OverlapPolicy,
) -> Result<(SplatSet, CompositionReport), CompositionError> {
    for o in objects {
        if o.splats.sh_degree() != scene.sh_degree() {
            return Err(CompositionError::ShDegreeMismatch {
                roi_id: o.roi_id.clone(),
                expected: scene.sh_degree(),
                found: o.splats.sh_degree(),
            });
        }
    }
    if policy == OverlapPolicy::Reject {
        for (i, a) in objects.iter().enumerate() {
            if let Some(b) = objects[i + 1..].iter().find(|b| a.bounds.intersects(&b.bounds)) {
                return Err(CompositionError::Overlap { first: a.roi_id.clone(), second: b.roi_id.clone() });
            }
        }
    }
    // Index of the first box claiming a point, if any.
    let claim = |s: &SplatRef<'_>| objects.iter().position(|o| inside(s, &o.bounds));

    let mut rois: Vec<RoiCounts> =
        objects.iter().map(|o| RoiCounts { roi_id: o.roi_id.clone(), scene_removed: 0, object_inserted: 0 }).collect();
    let mut merged = SplatSet::with_capacity(scene.sh_degree(), scene.len()).expect("degree of an existing set");
    for s in scene.iter() {
        match claim(&s) {
            Some(i) => rois[i].scene_removed += 1,
            None => merged.push_raw(s.raw()),
        }
    }
    for (i, o) in objects.iter().enumerate() {
        for s in o.splats.iter() {
            if claim(&s) == Some(i) {
                merged.push_raw(s.raw());
                rois[i].object_inserted += 1;
            }
        }
    }
    let report = CompositionReport { scene_in: scene.len(), merged_out: merged.len(), rois };
    Ok((merged, report))
}
