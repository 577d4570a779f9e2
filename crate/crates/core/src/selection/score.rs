use std::collections::BTreeSet;

use crate::colmap::PointId;
use crate::geometry::Aabb;
use crate::linalg::Vec3;

use super::{ScoreWeights, SelectionError};

pub const AZIMUTH_BINS: usize = 12;
pub const ELEVATION_BINS: usize = 6;
pub const DIRECTION_BINS: usize = AZIMUTH_BINS * ELEVATION_BINS;

/// Coverage of the ROI by a set of views, each term relative to the full pool.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RoiScore {
    pub density: f64,
    pub occupancy: f64,
    pub angle_coverage: f64,
    pub total: f64,
}

impl RoiScore {
    fn from_counts(points: usize, voxels: usize, bins: usize, n: &Normalizers, w: &ScoreWeights) -> Self {
        let density = points as f64 / n.points as f64;
        let occupancy = voxels as f64 / n.voxels as f64;
        let angle_coverage = bins as f64 / n.bins as f64;
        Self {
            density,
            occupancy,
            angle_coverage,
            total: w.density * density + w.occupancy * occupancy + w.angle * angle_coverage,
        }
    }
}

/// Totals reached by the full candidate pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Normalizers {
    /// Distinct in-box points visible from any candidate.
    pub points: usize,
    /// Voxels holding at least one of those points.
    pub voxels: usize,
    /// Direction bins occupied by the candidates.
    pub bins: usize,
}

impl Normalizers {
    pub fn check(&self) -> Result<(), SelectionError> {
        if self.points == 0 {
            return Err(SelectionError::DegenerateRoi("points"));
        }
        if self.voxels == 0 {
            return Err(SelectionError::DegenerateRoi("voxels"));
        }
        if self.bins == 0 {
            return Err(SelectionError::DegenerateRoi("direction bins"));
        }
        Ok(())
    }
}

/// Linear index of the grid cell holding `p`; points on the max face land in
/// the last cell.
pub fn voxel_index(p: &Vec3<f64>, bounds: &Aabb<f64>, grid: usize) -> usize {
    let (lo, ext) = (bounds.min(), bounds.extent());
    let mut idx = 0;
    for axis in (0..3).rev() {
        let cell = if ext[axis] > 0.0 {
            let t = (p[axis] - lo[axis]) / ext[axis] * grid as f64;
            (t.floor().max(0.0) as usize).min(grid - 1)
        } else {
            0
        };
        idx = idx * grid + cell;
    }
    idx
}

/// Azimuth-elevation bin of a direction; elevation is measured from the
/// world xy plane. The zero vector falls in bin 0.
pub fn direction_bin(dir: &Vec3<f64>) -> usize {
    let Some(d) = dir.normalized() else { return 0 };
    let tau = std::f64::consts::TAU;
    let az = d.y().atan2(d.x()).rem_euclid(tau);
    let el = d.z().clamp(-1.0, 1.0).asin() + std::f64::consts::FRAC_PI_2;
    let a = ((az / tau * AZIMUTH_BINS as f64) as usize).min(AZIMUTH_BINS - 1);
    let e = ((el / std::f64::consts::PI * ELEVATION_BINS as f64) as usize).min(ELEVATION_BINS - 1);
    e * AZIMUTH_BINS + a
}

/// Scores a selection given the in-box points it sees and the directions
/// from the box center to its cameras.
pub fn roi_score(
    points: &[(PointId, [f64; 3])],
    view_dirs: &[[f64; 3]],
    bounds: &Aabb<f64>,
    grid: usize,
    weights: &ScoreWeights,
    normalizers: &Normalizers,
) -> Result<RoiScore, SelectionError> {
    normalizers.check()?;
    let mut ids = BTreeSet::new();
    let mut voxels = BTreeSet::new();
    for (id, p) in points {
        let p = Vec3(*p);
        if bounds.contains(&p) && ids.insert(*id) {
            voxels.insert(voxel_index(&p, bounds, grid));
        }
    }
    let bins: BTreeSet<usize> = view_dirs.iter().map(|d| direction_bin(&Vec3(*d))).collect();
    Ok(RoiScore::from_counts(ids.len(), voxels.len(), bins.len(), normalizers, weights))
}

/// Incremental coverage counts of a growing selection over a pool whose
/// in-box points are numbered densely.
#[derive(Clone, Debug)]
pub struct CoverageState {
    point_hits: Vec<u32>,
    voxel_hits: Vec<u32>,
    bin_hits: [u32; DIRECTION_BINS],
    points: usize,
    voxels: usize,
    bins: usize,
}

impl CoverageState {
    pub fn new(point_count: usize, voxel_count: usize) -> Self {
        Self {
            point_hits: vec![0; point_count],
            voxel_hits: vec![0; voxel_count],
            bin_hits: [0; DIRECTION_BINS],
            points: 0,
            voxels: 0,
            bins: 0,
        }
    }

    /// Adds a view given its distinct dense point indices and direction bin.
    pub fn add(&mut self, points: &[u32], point_voxel: &[u32], bin: usize) {
        for &p in points {
            let hits = &mut self.point_hits[p as usize];
            if *hits == 0 {
                self.points += 1;
                let v = &mut self.voxel_hits[point_voxel[p as usize] as usize];
                if *v == 0 {
                    self.voxels += 1;
                }
                *v += 1;
            }
            *hits += 1;
        }
        if self.bin_hits[bin] == 0 {
            self.bins += 1;
        }
        self.bin_hits[bin] += 1;
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.points, self.voxels, self.bins)
    }

    pub fn score(&self, n: &Normalizers, w: &ScoreWeights) -> RoiScore {
        RoiScore::from_counts(self.points, self.voxels, self.bins, n, w)
    }

    /// Score after adding a view, without changing the state.
    pub fn score_with(
        &self,
        points: &[u32],
        point_voxel: &[u32],
        bin: usize,
        n: &Normalizers,
        w: &ScoreWeights,
    ) -> RoiScore {
        let mut new_voxels: Vec<u32> = points
            .iter()
            .filter(|&&p| self.point_hits[p as usize] == 0)
            .map(|&p| point_voxel[p as usize])
            .filter(|&v| self.voxel_hits[v as usize] == 0)
            .collect();
        let new_points = points.iter().filter(|&&p| self.point_hits[p as usize] == 0).count();
        new_voxels.sort_unstable();
        new_voxels.dedup();
        let new_bin = usize::from(self.bin_hits[bin] == 0);
        RoiScore::from_counts(self.points + new_points, self.voxels + new_voxels.len(), self.bins + new_bin, n, w)
    }
}
