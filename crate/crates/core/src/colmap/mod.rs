//! COLMAP sparse reconstruction model: cameras, posed images with 2D
//! observations, and 3D points with tracks.
//!
//! Both the binary (`cameras.bin`, `images.bin`, `points3D.bin`) and text
//! (`*.txt`) layouts are supported. Parsing validates referential integrity;
//! serialization emits entries in ascending-id order so that the binary
//! round-trip is bit-exact.

mod binary;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

pub type CameraId = i32;
pub type ImageId = i32;
pub type PointId = i64;

/// Quaternions whose norm deviates from one by at most this much are kept verbatim.
pub const UNIT_TOLERANCE: f64 = 1e-6;
/// Deviations up to this bound are renormalized on parse; larger ones are rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
    OpenCv,
}

impl CameraModel {
    pub fn id(self) -> i32 {
        match self {
            CameraModel::SimplePinhole => 0,
            CameraModel::Pinhole => 1,
            CameraModel::SimpleRadial => 2,
            CameraModel::OpenCv => 4,
        }
    }

    pub fn from_id(id: i32) -> Option<Self> {
        match id {
            0 => Some(CameraModel::SimplePinhole),
            1 => Some(CameraModel::Pinhole),
            2 => Some(CameraModel::SimpleRadial),
            4 => Some(CameraModel::OpenCv),
            _ => None,
        }
    }

    /// Number of intrinsic parameters stored for the model.
    pub fn arity(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole => 4,
            CameraModel::SimpleRadial => 4,
            CameraModel::OpenCv => 8,
        }
    }

    /// Number of leading parameters that are focal lengths.
    pub fn focal_count(self) -> usize {
        match self {
            CameraModel::SimplePinhole | CameraModel::SimpleRadial => 1,
            CameraModel::Pinhole | CameraModel::OpenCv => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
            CameraModel::OpenCv => "OPENCV",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [CameraModel::SimplePinhole, CameraModel::Pinhole, CameraModel::SimpleRadial, CameraModel::OpenCv]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub camera_id: CameraId,
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl CameraIntrinsics {
    pub fn pinhole(camera_id: CameraId, width: u64, height: u64, fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { camera_id, model: CameraModel::Pinhole, width, height, params: vec![fx, fy, cx, cy] }
    }

    fn check(&self) -> Option<String> {
        if self.width == 0 || self.height == 0 {
            return Some(format!("zero image size {}x{}", self.width, self.height));
        }
        if self.params.len() != self.model.arity() {
            return Some(format!(
                "{} expects {} params, found {}",
                self.model.name(),
                self.model.arity(),
                self.params.len()
            ));
        }
        if let Some(f) = self.params[..self.model.focal_count()].iter().find(|f| !(**f > 0.0)) {
            return Some(format!("non-positive focal length {f}"));
        }
        if let Some(p) = self.params.iter().find(|p| !p.is_finite()) {
            return Some(format!("non-finite parameter {p}"));
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub uv: [f64; 2],
    pub point3d_id: Option<PointId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosedImage {
    pub image_id: ImageId,
    /// World-to-camera rotation as a unit quaternion (w, x, y, z).
    pub rotation: [f64; 4],
    /// World-to-camera translation.
    pub translation: [f64; 3],
    pub camera_id: CameraId,
    pub name: String,
    pub observations: Vec<Observation>,
}

impl PosedImage {
    pub fn quaternion_norm(&self) -> f64 {
        self.rotation.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackEntry {
    pub image_id: ImageId,
    pub observation_index: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenePoint {
    pub point3d_id: PointId,
    pub position: [f64; 3],
    pub color: [u8; 3],
    pub reprojection_error: f64,
    pub track: Vec<TrackEntry>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SfmModel {
    pub cameras: BTreeMap<CameraId, CameraIntrinsics>,
    pub images: BTreeMap<ImageId, PosedImage>,
    pub points: BTreeMap<PointId, ScenePoint>,
    /// Images whose quaternion was renormalized while parsing.
    pub renormalized: BTreeSet<ImageId>,
}

impl SfmModel {
    pub fn camera_of(&self, image: &PosedImage) -> Option<&CameraIntrinsics> {
        self.cameras.get(&image.camera_id)
    }

    pub fn image_by_name(&self, name: &str) -> Option<&PosedImage> {
        self.images.values().find(|i| i.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Text,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Binary => "bin",
            Format::Text => "txt",
        }
    }
}

/// One integrity finding reported by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    KeyMismatch {
        kind: &'static str,
        key: i64,
        id: i64,
    },
    InvalidCamera {
        camera_id: CameraId,
        reason: String,
    },
    DanglingCamera {
        image_id: ImageId,
        camera_id: CameraId,
    },
    DanglingPoint {
        image_id: ImageId,
        observation_index: u32,
        point3d_id: PointId,
    },
    DanglingTrackImage {
        point3d_id: PointId,
        image_id: ImageId,
    },
    TrackIndexOutOfRange {
        point3d_id: PointId,
        image_id: ImageId,
        observation_index: u32,
    },
    /// A track entry whose observation stores a different (or no) point id.
    TrackMismatch {
        point3d_id: PointId,
        image_id: ImageId,
        observation_index: u32,
        found: Option<PointId>,
    },
    /// An observation naming a point whose track does not list it.
    ObservationNotInTrack {
        image_id: ImageId,
        observation_index: u32,
        point3d_id: PointId,
    },
    NonUnitQuaternion {
        image_id: ImageId,
        norm: f64,
    },
    /// Informational: the quaternion was renormalized on parse.
    RenormalizedQuaternion {
        image_id: ImageId,
    },
}

impl Violation {
    /// Whether the finding breaks a model invariant (as opposed to a notice).
    pub fn is_hard(&self) -> bool {
        !matches!(self, Violation::RenormalizedQuaternion { .. })
    }

    pub fn is_dangling(&self) -> bool {
        matches!(
            self,
            Violation::DanglingCamera { .. }
                | Violation::DanglingPoint { .. }
                | Violation::DanglingTrackImage { .. }
                | Violation::TrackIndexOutOfRange { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::KeyMismatch { kind, key, id } => {
                write!(f, "{kind} stored under key {key} carries id {id}")
            }
            Violation::InvalidCamera { camera_id, reason } => {
                write!(f, "camera {camera_id}: {reason}")
            }
            Violation::DanglingCamera { image_id, camera_id } => {
                write!(f, "image {image_id} references missing camera {camera_id}")
            }
            Violation::DanglingPoint { image_id, observation_index, point3d_id } => {
                write!(f, "image {image_id} observation {observation_index} references missing point {point3d_id}")
            }
            Violation::DanglingTrackImage { point3d_id, image_id } => {
                write!(f, "point {point3d_id} track references missing image {image_id}")
            }
            Violation::TrackIndexOutOfRange { point3d_id, image_id, observation_index } => {
                write!(f, "point {point3d_id} track references observation {observation_index} beyond image {image_id}")
            }
            Violation::TrackMismatch { point3d_id, image_id, observation_index, found } => {
                let found = found.map_or_else(|| "NONE".to_string(), |p| p.to_string());
                write!(
                    f,
                    "point {point3d_id} track names image {image_id} observation {observation_index}, which stores {found}"
                )
            }
            Violation::ObservationNotInTrack { image_id, observation_index, point3d_id } => write!(
                f,
                "image {image_id} observation {observation_index} names point {point3d_id}, whose track omits it"
            ),
            Violation::NonUnitQuaternion { image_id, norm } => {
                write!(f, "image {image_id} quaternion norm {norm}")
            }
            Violation::RenormalizedQuaternion { image_id } => {
                write!(f, "image {image_id} quaternion was renormalized on parse")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ColmapError {
    #[error("truncated {stream} stream while reading {context}")]
    Truncated { stream: &'static str, context: String },
    #[error("{stream} stream has {count} trailing bytes after the last record")]
    TrailingBytes { stream: &'static str, count: usize },
    #[error("unknown camera model id {0}")]
    UnknownCameraModel(i32),
    #[error("unknown camera model {0:?}")]
    UnknownCameraModelName(String),
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: i64 },
    #[error("image {image_id}: quaternion norm {norm} is not unit within 1e-3")]
    NonUnitQuaternion { image_id: ImageId, norm: f64 },
    #[error("image {image_id}: name is not valid UTF-8")]
    InvalidName { image_id: ImageId },
    #[error("negative {what} {value}")]
    Negative { what: &'static str, value: i64 },
    #[error("{stream} line {line}: {message}")]
    Text { stream: &'static str, line: usize, message: String },
    #[error("dangling reference: {0}")]
    Dangling(Violation),
    #[error("integrity violation: {0}")]
    Integrity(Violation),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ColmapError> = std::result::Result<T, E>;

/// Raw stream bundle `(cameras, images, points)`.
pub type ModelStreams = (Vec<u8>, Vec<u8>, Vec<u8>);

/// Parses the three COLMAP streams into a validated model.
pub fn parse_model(cameras: &[u8], images: &[u8], points: &[u8], format: Format) -> Result<SfmModel> {
    let model = parse_model_unchecked(cameras, images, points, format)?;
    if let Some(v) = validate(&model).into_iter().find(Violation::is_hard) {
        return Err(if v.is_dangling() { ColmapError::Dangling(v) } else { ColmapError::Integrity(v) });
    }
    Ok(model)
}

/// Parses and renormalizes without cross-reference checks; pair with
/// [`validate`] to collect every violation.
pub fn parse_model_unchecked(cameras: &[u8], images: &[u8], points: &[u8], format: Format) -> Result<SfmModel> {
    let (cams, (imgs, pts)) = rayon::join(
        || match format {
            Format::Binary => binary::read_cameras(cameras),
            Format::Text => text::read_cameras(cameras),
        },
        || {
            rayon::join(
                || match format {
                    Format::Binary => binary::read_images(images),
                    Format::Text => text::read_images(images),
                },
                || match format {
                    Format::Binary => binary::read_points(points),
                    Format::Text => text::read_points(points),
                },
            )
        },
    );
    let mut model = SfmModel { cameras: cams?, images: imgs?, points: pts?, renormalized: BTreeSet::new() };
    for image in model.images.values_mut() {
        let norm = image.quaternion_norm();
        let deviation = (norm - 1.0).abs();
        if !(deviation <= RENORMALIZE_TOLERANCE) {
            return Err(ColmapError::NonUnitQuaternion { image_id: image.image_id, norm });
        }
        if deviation > UNIT_TOLERANCE {
            image.rotation = image.rotation.map(|c| c / norm);
            model.renormalized.insert(image.image_id);
        }
    }
    Ok(model)
}

/// Serializes a model into `(cameras, images, points)` streams.
pub fn serialize_model(model: &SfmModel, format: Format) -> Result<ModelStreams> {
    if let Some(v) = validate(model).into_iter().find(Violation::is_hard) {
        return Err(ColmapError::Integrity(v));
    }
    Ok(match format {
        Format::Binary => (binary::write_cameras(model), binary::write_images(model), binary::write_points(model)),
        Format::Text => (text::write_cameras(model), text::write_images(model), text::write_points(model)),
    })
}

/// Lists every integrity violation; empty output means the model is valid.
pub fn validate(model: &SfmModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (&key, cam) in &model.cameras {
        if key != cam.camera_id {
            out.push(Violation::KeyMismatch { kind: "camera", key: key.into(), id: cam.camera_id.into() });
        }
        if let Some(reason) = cam.check() {
            out.push(Violation::InvalidCamera { camera_id: cam.camera_id, reason });
        }
    }
    for (&key, image) in &model.images {
        if key != image.image_id {
            out.push(Violation::KeyMismatch { kind: "image", key: key.into(), id: image.image_id.into() });
        }
        if !model.cameras.contains_key(&image.camera_id) {
            out.push(Violation::DanglingCamera { image_id: image.image_id, camera_id: image.camera_id });
        }
        let norm = image.quaternion_norm();
        if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
            out.push(Violation::NonUnitQuaternion { image_id: image.image_id, norm });
        }
        if model.renormalized.contains(&image.image_id) {
            out.push(Violation::RenormalizedQuaternion { image_id: image.image_id });
        }
        for (idx, obs) in image.observations.iter().enumerate() {
            let Some(pid) = obs.point3d_id else { continue };
            let idx = idx as u32;
            match model.points.get(&pid) {
                None => out.push(Violation::DanglingPoint {
                    image_id: image.image_id,
                    observation_index: idx,
                    point3d_id: pid,
                }),
                Some(point) => {
                    let entry = TrackEntry { image_id: image.image_id, observation_index: idx };
                    if !point.track.contains(&entry) {
                        out.push(Violation::ObservationNotInTrack {
                            image_id: image.image_id,
                            observation_index: idx,
                            point3d_id: pid,
                        });
                    }
                }
            }
        }
    }
    for (&key, point) in &model.points {
        if key != point.point3d_id {
            out.push(Violation::KeyMismatch { kind: "point", key, id: point.point3d_id });
        }
        for entry in &point.track {
            let Some(image) = model.images.get(&entry.image_id) else {
                out.push(Violation::DanglingTrackImage { point3d_id: point.point3d_id, image_id: entry.image_id });
                continue;
            };
            match image.observations.get(entry.observation_index as usize) {
                None => out.push(Violation::TrackIndexOutOfRange {
                    point3d_id: point.point3d_id,
                    image_id: entry.image_id,
                    observation_index: entry.observation_index,
                }),
                Some(obs) if obs.point3d_id != Some(point.point3d_id) => out.push(Violation::TrackMismatch {
                    point3d_id: point.point3d_id,
                    image_id: entry.image_id,
                    observation_index: entry.observation_index,
                    found: obs.point3d_id,
                }),
                Some(_) => {}
            }
        }
    }
    out
}

fn stream_names(format: Format) -> [String; 3] {
    let ext = format.extension();
    [format!("cameras.{ext}"), format!("images.{ext}"), format!("points3D.{ext}")]
}

/// Reads `cameras`, `images` and `points3D` files from a model directory.
pub fn read_model_dir(dir: &Path, format: Format) -> Result<SfmModel> {
    let [c, i, p] = read_streams(dir, format)?;
    parse_model(&c, &i, &p, format)
}

pub fn read_model_dir_unchecked(dir: &Path, format: Format) -> Result<SfmModel> {
    let [c, i, p] = read_streams(dir, format)?;
    parse_model_unchecked(&c, &i, &p, format)
}

fn read_streams(dir: &Path, format: Format) -> Result<[Vec<u8>; 3]> {
    let [c, i, p] = stream_names(format);
    Ok([std::fs::read(dir.join(c))?, std::fs::read(dir.join(i))?, std::fs::read(dir.join(p))?])
}

/// Detects the model format from the files present in `dir`.
pub fn detect_format(dir: &Path) -> Option<Format> {
    [Format::Binary, Format::Text].into_iter().find(|f| stream_names(*f).iter().all(|n| dir.join(n).is_file()))
}

/// Serialized model streams paired with their canonical file names.
pub fn model_files(model: &SfmModel, format: Format) -> Result<Vec<(String, Vec<u8>)>> {
    let (c, i, p) = serialize_model(model, format)?;
    let [cn, in_, pn] = stream_names(format);
    Ok(vec![(cn, c), (in_, i), (pn, p)])
}


#[cfg(test)]
mod tests {
    use super::fixtures::two_image_model;
    use super::*;

    #[test]
    fn valid_fixture_has_no_violations() {
        assert!(validate(&two_image_model()).is_empty());
    }

    #[test]
    fn track_naming_none_observation_is_one_mismatch() {
        let mut m = two_image_model();
        let image = m.images.get_mut(&1).unwrap();
        for _ in 0..2 {
            image.observations.push(Observation { uv: [0.0, 0.0], point3d_id: None });
        }
        m.points.get_mut(&7).unwrap().track.push(TrackEntry { image_id: 1, observation_index: 4 });
        let v = validate(&m);
        assert_eq!(v, vec![Violation::TrackMismatch { point3d_id: 7, image_id: 1, observation_index: 4, found: None }]);
    }

    #[test]
    fn three_injected_faults_give_three_violations() {
        let mut m = two_image_model();
        m.images.get_mut(&2).unwrap().camera_id = 5;
        m.images.get_mut(&1).unwrap().observations[1].point3d_id = Some(99);
        m.points.get_mut(&8).unwrap().track.push(TrackEntry { image_id: 42, observation_index: 0 });
        let v = validate(&m);
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v.contains(&Violation::DanglingCamera { image_id: 2, camera_id: 5 }));
        assert!(v.contains(&Violation::DanglingPoint { image_id: 1, observation_index: 1, point3d_id: 99 }));
        assert!(v.contains(&Violation::DanglingTrackImage { point3d_id: 8, image_id: 42 }));
    }

    #[test]
    fn invalid_camera_is_reported() {
        let mut m = two_image_model();
        m.cameras.get_mut(&1).unwrap().params[0] = 0.0;
        assert!(matches!(validate(&m)[..], [Violation::InvalidCamera { camera_id: 1, .. }]));
    }

    #[test]
    fn serialize_rejects_invalid_model() {
        let mut m = two_image_model();
        m.images.get_mut(&1).unwrap().camera_id = 3;
        assert!(matches!(serialize_model(&m, Format::Binary), Err(ColmapError::Integrity(_))));
    }

    #[test]
    fn camera_model_ids_round_trip() {
        for id in [0, 1, 2, 4] {
            assert_eq!(CameraModel::from_id(id).unwrap().id(), id);
        }
        assert!(CameraModel::from_id(3).is_none());
        assert_eq!(CameraModel::from_name("OPENCV"), Some(CameraModel::OpenCv));
    }
}
