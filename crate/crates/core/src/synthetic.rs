//! Deterministic synthetic SfM models and splat sets.
//!
//! Randomness comes from ChaCha8 seeded with the recipe seed, one stream
//! per entity class ([`STREAM_POINTS`], [`STREAM_CAMERAS`],
//! [`STREAM_DROPOUT`], [`STREAM_SPLATS`]), so adding cameras does not
//! perturb the points.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colmap::{
    CameraIntrinsics, CameraModel, ImageId, Observation, PointId, PosedImage, ScenePoint, SfmModel, TrackEntry,
};
use crate::geometry::{point_in_aabb, Aabb, Camera};
use crate::kv::{KvDoc, KvError, KvWriter};
use crate::linalg::{Mat3, Vec3};
use crate::splat::{SplatRecord, SplatSet};

pub const STREAM_POINTS: u64 = 1;
pub const STREAM_CAMERAS: u64 = 2;
pub const STREAM_DROPOUT: u64 = 3;
pub const STREAM_SPLATS: u64 = 4;

/// First id of background points; ROI points are numbered from 1.
pub const BACKGROUND_ID_BASE: PointId = 1_000_000_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("recipe: {0}")]
    Kv(#[from] KvError),
    #[error("recipe declares no cameras")]
    NoCameras,
    #[error("recipe declares no points")]
    NoPoints,
    #[error("invalid recipe: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CameraLayout {
    /// Horizontal circle around the box at a fixed elevation.
    Ring,
    /// Fibonacci spiral over the upper hemisphere.
    Hemisphere,
}

impl std::str::FromStr for CameraLayout {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "ring" => Ok(CameraLayout::Ring),
            "hemisphere" => Ok(CameraLayout::Hemisphere),
            _ => Err(()),
        }
    }
}

impl CameraLayout {
    fn name(self) -> &'static str {
        match self {
            CameraLayout::Ring => "ring",
            CameraLayout::Hemisphere => "hemisphere",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneRecipe {
    pub seed: u64,
    pub points_in_roi: usize,
    pub points_background: usize,
    pub roi: Aabb<f64>,
    pub cameras: usize,
    pub layout: CameraLayout,
    /// Largest angle between a point normal and the direction to the camera.
    pub visibility_deg: f64,
    /// Probability that a visible point is left out of a track.
    pub dropout: f64,
    /// Camera distance from the box center; defaults to 4x the largest half extent.
    pub camera_distance: Option<f64>,
    pub ring_elevation_deg: f64,
    /// Uniform angular perturbation of camera placement.
    pub camera_jitter_deg: f64,
    /// Background points fill this multiple of the box around its center.
    pub background_scale: f64,
    pub image_width: u64,
    pub image_height: u64,
    pub focal: f64,
}

impl SceneRecipe {
    pub fn new(seed: u64, roi: Aabb<f64>, points_in_roi: usize, cameras: usize) -> Self {
        Self {
            seed,
            points_in_roi,
            points_background: 0,
            roi,
            cameras,
            layout: CameraLayout::Ring,
            visibility_deg: 90.0,
            dropout: 0.0,
            camera_distance: None,
            ring_elevation_deg: 0.0,
            camera_jitter_deg: 0.0,
            background_scale: 3.0,
            image_width: 640,
            image_height: 480,
            focal: 500.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self, SynthError> {
        Self::from_doc(&KvDoc::parse(text)?)
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self, SynthError> {
        let min = doc.parse_array::<f64, 3>("roi_min")?.ok_or_else(|| KvError::Missing("roi_min".into()))?;
        let max = doc.parse_array::<f64, 3>("roi_max")?.ok_or_else(|| KvError::Missing("roi_max".into()))?;
        let roi = Aabb::from_arrays(min, max).map_err(|e| SynthError::Invalid(e.to_string()))?;
        let d =
            Self::new(doc.parse_or("seed", 0)?, roi, doc.parse_or("points_in_roi", 0)?, doc.parse_or("cameras", 0)?);
        let layout = match doc.get("layout") {
            None => d.layout,
            Some(v) => v.parse().map_err(|_| KvError::Invalid { key: "layout".into(), value: v.into() })?,
        };
        let r = Self {
            points_background: doc.parse_or("points_background", d.points_background)?,
            layout,
            visibility_deg: doc.parse_or("visibility_deg", d.visibility_deg)?,
            dropout: doc.parse_or("dropout", d.dropout)?,
            camera_distance: doc.parse_opt("camera_distance")?,
            ring_elevation_deg: doc.parse_or("ring_elevation_deg", d.ring_elevation_deg)?,
            camera_jitter_deg: doc.parse_or("camera_jitter_deg", d.camera_jitter_deg)?,
            background_scale: doc.parse_or("background_scale", d.background_scale)?,
            image_width: doc.parse_or("image_width", d.image_width)?,
            image_height: doc.parse_or("image_height", d.image_height)?,
            focal: doc.parse_or("focal", d.focal)?,
            ..d
        };
        r.check()?;
        Ok(r)
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new();
        let arr = |v: Vec3<f64>| format!("{:?} {:?} {:?}", v[0], v[1], v[2]);
        w.entry("seed", self.seed)
            .entry("points_in_roi", self.points_in_roi)
            .entry("points_background", self.points_background)
            .entry("roi_min", arr(self.roi.min()))
            .entry("roi_max", arr(self.roi.max()))
            .entry("cameras", self.cameras)
            .entry("layout", self.layout.name())
            .entry("visibility_deg", format!("{:?}", self.visibility_deg))
            .entry("dropout", format!("{:?}", self.dropout));
        if let Some(d) = self.camera_distance {
            w.entry("camera_distance", format!("{d:?}"));
        }
        w.entry("ring_elevation_deg", format!("{:?}", self.ring_elevation_deg))
            .entry("camera_jitter_deg", format!("{:?}", self.camera_jitter_deg))
            .entry("background_scale", format!("{:?}", self.background_scale))
            .entry("image_width", self.image_width)
            .entry("image_height", self.image_height)
            .entry("focal", format!("{:?}", self.focal));
        w.finish()
    }

    pub fn check(&self) -> Result<(), SynthError> {
        if self.cameras == 0 {
            return Err(SynthError::NoCameras);
        }
        if self.points_in_roi + self.points_background == 0 {
            return Err(SynthError::NoPoints);
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SynthError::Invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.visibility_deg > 0.0 && self.visibility_deg <= 180.0) {
            return Err(SynthError::Invalid(format!("visibility angle {}", self.visibility_deg)));
        }
        if self.image_width == 0 || self.image_height == 0 || !(self.focal > 0.0) {
            return Err(SynthError::Invalid("camera intrinsics".into()));
        }
        if !(self.background_scale > 1.0) {
            return Err(SynthError::Invalid("background scale must exceed 1".into()));
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        let e = self.roi.extent();
        self.camera_distance.unwrap_or(2.0 * e[0].max(e[1]).max(e[2]))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub model: SfmModel,
    /// In-box point ids each image sees before dropout.
    pub ground_truth: BTreeMap<ImageId, Vec<PointId>>,
    /// Outward unit normal of every point.
    pub normals: BTreeMap<PointId, [f64; 3]>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3([s * phi.cos(), s * phi.sin(), z])
}

/// World-to-camera rotation looking from `eye` at `target`, image y down,
/// world z up.
pub fn look_at(eye: Vec3<f64>, target: Vec3<f64>) -> Mat3<f64> {
    let f = (target - eye).normalized().unwrap_or(Vec3([0.0, 0.0, 1.0]));
    let up = if f.z().abs() > 0.999 { Vec3([0.0, 1.0, 0.0]) } else { Vec3([0.0, 0.0, 1.0]) };
    let r = f.cross(&up).normalized().expect("forward not parallel to up");
    let d = f.cross(&r);
    Mat3::from_rows(r, d, f)
}

fn camera_centers(recipe: &SceneRecipe) -> Vec<Vec3<f64>> {
    let mut rng = stream(recipe.seed, STREAM_CAMERAS);
    let c = recipe.roi.center();
    let dist = recipe.distance();
    let n = recipe.cameras;
    let jitter = recipe.camera_jitter_deg.to_radians();
    (0..n)
        .map(|i| {
            let (az, el) = match recipe.layout {
                CameraLayout::Ring => {
                    (std::f64::consts::TAU * i as f64 / n as f64, recipe.ring_elevation_deg.to_radians())
                }
                CameraLayout::Hemisphere => {
                    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                    // Heights in (0, sin 80deg] keep the top camera off the pole.
                    let z = 80f64.to_radians().sin() * (i as f64 + 0.5) / n as f64;
                    (golden * i as f64, z.asin())
                }
            };
            let (daz, del) = if jitter > 0.0 {
                (rng.gen_range(-jitter..=jitter), rng.gen_range(-jitter..=jitter))
            } else {
                (0.0, 0.0)
            };
            let (az, el) = (az + daz, (el + del).clamp(-1.4, 1.4));
            c + Vec3([el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]) * dist
        })
        .collect()
}

/// Builds the model, ground truth and normals for `recipe`.
pub fn generate(recipe: &SceneRecipe) -> Result<SyntheticScene, SynthError> {
    recipe.check()?;
    let bounds = &recipe.roi;
    let center = bounds.center();
    let ext = bounds.extent();
    let radius = 0.5 * ext[0].min(ext[1]).min(ext[2]);

    let mut rng = stream(recipe.seed, STREAM_POINTS);
    let mut points: Vec<(PointId, Vec3<f64>, Vec3<f64>)> = Vec::new();
    for i in 0..recipe.points_in_roi {
        let n = unit_vector(&mut rng);
        let p = center + n * radius;
        let p = Vec3(std::array::from_fn(|k| p[k].clamp(bounds.min()[k], bounds.max()[k])));
        points.push((i as PointId + 1, p, n));
    }
    let half_outer = ext * (0.5 * recipe.background_scale);
    let mut id = BACKGROUND_ID_BASE;
    while (id - BACKGROUND_ID_BASE) < recipe.points_background as PointId {
        let p = Vec3(std::array::from_fn(|k| center[k] + rng.gen_range(-half_outer[k]..=half_outer[k])));
        if bounds.contains(&p) {
            continue;
        }
        let n = unit_vector(&mut rng);
        points.push((id, p, n));
        id += 1;
    }

    let intrinsics = CameraIntrinsics {
        camera_id: 1,
        model: CameraModel::Pinhole,
        width: recipe.image_width,
        height: recipe.image_height,
        params: vec![recipe.focal, recipe.focal, recipe.image_width as f64 / 2.0, recipe.image_height as f64 / 2.0],
    };
    let cos_max = if recipe.visibility_deg == 90.0 { 0.0 } else { recipe.visibility_deg.to_radians().cos() };
    let mut drop_rng = stream(recipe.seed, STREAM_DROPOUT);
    let mut images = BTreeMap::new();
    let mut tracks: BTreeMap<PointId, Vec<TrackEntry>> = BTreeMap::new();
    let mut ground_truth = BTreeMap::new();
    for (k, eye) in camera_centers(recipe).into_iter().enumerate() {
        let image_id = k as ImageId + 1;
        let rot = look_at(eye, center);
        let t = -(rot * eye);
        let mut pose = PosedImage {
            image_id,
            rotation: rot.to_quaternion(),
            translation: t.0,
            camera_id: 1,
            name: format!("view_{image_id:04}.png"),
            observations: Vec::new(),
        };
        let camera: Camera<f64> = Camera::from_colmap(&intrinsics, &pose);
        let mut seen = Vec::new();
        for (pid, p, n) in &points {
            let Some(to_cam) = (eye - *p).normalized() else { continue };
            if n.dot(&to_cam) <= cos_max {
                continue;
            }
            let Some(uv) = camera.project(p) else { continue };
            if !(uv[0] >= 0.0
                && uv[1] >= 0.0
                && uv[0] < recipe.image_width as f64
                && uv[1] < recipe.image_height as f64)
            {
                continue;
            }
            if *pid < BACKGROUND_ID_BASE {
                seen.push(*pid);
            }
            if recipe.dropout > 0.0 && drop_rng.gen_bool(recipe.dropout) {
                continue;
            }
            tracks
                .entry(*pid)
                .or_default()
                .push(TrackEntry { image_id, observation_index: pose.observations.len() as u32 });
            pose.observations.push(Observation { uv, point3d_id: Some(*pid) });
        }
        ground_truth.insert(image_id, seen);
        images.insert(image_id, pose);
    }

    let mut model_points = BTreeMap::new();
    let mut normals = BTreeMap::new();
    for (pid, p, n) in points {
        let shade = (127.5 * (n.z() + 1.0)) as u8;
        model_points.insert(
            pid,
            ScenePoint {
                point3d_id: pid,
                position: p.0,
                color: [shade, 128, 255 - shade],
                reprojection_error: 0.5,
                track: tracks.remove(&pid).unwrap_or_default(),
            },
        );
        normals.insert(pid, n.0);
    }
    let model = SfmModel {
        cameras: BTreeMap::from([(1, intrinsics)]),
        images,
        points: model_points,
        renormalized: Default::default(),
    };
    Ok(SyntheticScene { model, ground_truth, normals })
}

/// A splat set with exactly `inside` centers in the box and `outside`
/// centers in the surrounding region (membership checked after rounding).
pub fn generate_splats(recipe: &SceneRecipe, inside: usize, outside: usize, sh_degree: u8) -> SplatSet {
    let mut rng = stream(recipe.seed, STREAM_SPLATS);
    let mut set = SplatSet::with_capacity(sh_degree, inside + outside).expect("supported SH degree");
    let b = &recipe.roi;
    let (lo, hi) = (b.min(), b.max());
    let center = b.center();
    let half_outer = b.extent() * (0.5 * recipe.background_scale);
    let rest = crate::splat::rest_count(sh_degree);
    let mut record = SplatRecord {
        position: [0.0; 3],
        normal: [0.0; 3],
        sh_dc: [0.0; 3],
        sh_rest: vec![0.0; rest],
        opacity: 0.0,
        log_scale: [0.0; 3],
        rotation: [1.0, 0.0, 0.0, 0.0],
    };
    let fill = |rng: &mut ChaCha8Rng, position: [f32; 3], record: &mut SplatRecord| {
        record.position = position;
        record.sh_dc = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        for v in record.sh_rest.iter_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        record.opacity = rng.gen_range(-4.0..4.0);
        record.log_scale = std::array::from_fn(|_| rng.gen_range(-6.0..-2.0));
        let q: [f32; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-6);
        record.rotation = q.map(|v| v / n);
    };
    let is_inside = |p: &[f32; 3]| point_in_aabb(&Vec3(p.map(f64::from)), b);
    let mut made = 0;
    while made < inside {
        let p: [f32; 3] = std::array::from_fn(|k| rng.gen_range(lo[k]..=hi[k]) as f32);
        if !is_inside(&p) {
            continue;
        }
        fill(&mut rng, p, &mut record);
        set.push(&record).expect("record matches degree");
        made += 1;
    }
    made = 0;
    while made < outside {
        let p: [f32; 3] = std::array::from_fn(|k| (center[k] + rng.gen_range(-half_outer[k]..=half_outer[k])) as f32);
        if is_inside(&p) {
            continue;
        }
        fill(&mut rng, p, &mut record);
        set.push(&record).expect("record matches degree");
        made += 1;
    }
    set
}
