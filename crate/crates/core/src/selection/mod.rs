//! Object-focused view selection.
//!
//! Candidates are the images that observe at least one sparse point inside
//! the region of interest. They can be ordered by a static composite
//! (distance, projected box area, keypoint count) or by a greedy loop that
//! maximizes a bounded coverage score, using a Gaussian-process surrogate to
//! predict each candidate's marginal gain from its viewpoint features.

mod features;
mod greedy;
mod pool;
mod score;

pub use features::{static_features, static_rank, FeatureScaler, ViewFeature, RAW_FEATURES};
pub use greedy::{
    greedy_over, greedy_select, select_first_k, select_static, selection_list, trace_csv, GreedyConfig,
    SelectionResult, Surrogate, TraceStep,
};
pub use pool::{Candidate, CandidatePool};
pub use score::{
    direction_bin, roi_score, voxel_index, CoverageState, Normalizers, RoiScore, AZIMUTH_BINS, DIRECTION_BINS,
    ELEVATION_BINS,
};

use crate::colmap::ImageId;
use crate::geometry::Aabb;
use crate::gp::GpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Camera position and orientation.
    Six,
    /// Position, orientation, distance, projected area and keypoint count.
    Nine,
}

impl FeatureMode {
    pub fn dim(self) -> usize {
        match self {
            FeatureMode::Six => 6,
            FeatureMode::Nine => 9,
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = SelectionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "six" | "6" => Ok(FeatureMode::Six),
            "nine" | "9" => Ok(FeatureMode::Nine),
            other => Err(SelectionError::InvalidSpec(format!("unknown feature mode {other:?}"))),
        }
    }
}

/// Weights of the density, occupancy and angle-coverage terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreWeights {
    pub density: f64,
    pub occupancy: f64,
    pub angle: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { density: 0.4, occupancy: 0.4, angle: 0.2 }
    }
}

impl ScoreWeights {
    pub fn new(density: f64, occupancy: f64, angle: f64) -> Result<Self, SelectionError> {
        let w = Self { density, occupancy, angle };
        w.check()?;
        Ok(w)
    }

    fn check(&self) -> Result<(), SelectionError> {
        let parts = [self.density, self.occupancy, self.angle];
        if parts.iter().any(|w| !(*w >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SelectionError::InvalidSpec(format!(
                "score weights {parts:?} must be non-negative and sum to 1"
            )));
        }
        Ok(())
    }
}

/// A user-declared region of interest and its selection parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiSpec {
    pub roi_id: String,
    pub bounds: Aabb<f64>,
    /// Number of views to select.
    pub select_count: usize,
    pub feature_mode: FeatureMode,
    /// Voxel grid resolution per axis.
    pub voxel_grid: usize,
    pub weights: ScoreWeights,
    pub seed: u64,
}

impl RoiSpec {
    pub fn new(roi_id: impl Into<String>, bounds: Aabb<f64>, select_count: usize) -> Self {
        Self {
            roi_id: roi_id.into(),
            bounds,
            select_count,
            feature_mode: FeatureMode::Nine,
            voxel_grid: 16,
            weights: ScoreWeights::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.roi_id.is_empty() || self.roi_id.chars().any(|c| c.is_whitespace() || c == '/') {
            return Err(SelectionError::InvalidSpec(format!("invalid roi id {:?}", self.roi_id)));
        }
        if self.select_count < 1 {
            return Err(SelectionError::InvalidSpec("select count must be at least 1".into()));
        }
        if self.voxel_grid < 2 {
            return Err(SelectionError::InvalidSpec("voxel grid must be at least 2".into()));
        }
        self.weights.check()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectionError {
    #[error("invalid ROI specification: {0}")]
    InvalidSpec(String),
    #[error("degenerate ROI: no {0} covered by the candidate pool")]
    DegenerateRoi(&'static str),
    #[error("empty candidate pool")]
    EmptyPool,
    #[error("image {0} is not in the model")]
    UnknownImage(ImageId),
    #[error("requested {requested} views but only {available} were selected")]
    PrefixTooLong { requested: usize, available: usize },
    #[error("surrogate: {0}")]
    Gp(#[from] GpError),
}
