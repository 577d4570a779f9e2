//! COLMAP text export: whitespace-separated fields, `#` comment lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::*;

struct Lines<'a> {
    stream: &'static str,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(buf: &'a [u8], stream: &'static str) -> Result<Self> {
        let text = std::str::from_utf8(buf).map_err(|e| ColmapError::Text {
            stream,
            line: 0,
            message: format!("not UTF-8: {e}"),
        })?;
        Ok(Self { stream, iter: text.lines().enumerate(), line: 0 })
    }

    /// Next non-empty, non-comment line.
    fn next_record(&mut self) -> Option<&'a str> {
        for (n, line) in self.iter.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            self.line = n + 1;
            return Some(trimmed);
        }
        None
    }

    /// The immediately following line, which may be empty.
    fn next_raw(&mut self) -> Option<&'a str> {
        self.iter.next().map(|(n, l)| {
            self.line = n + 1;
            l.trim()
        })
    }

    fn err(&self, message: impl Into<String>) -> ColmapError {
        ColmapError::Text { stream: self.stream, line: self.line, message: message.into() }
    }
}

struct Fields<'a, 'b> {
    parts: std::str::SplitWhitespace<'a>,
    lines: &'b Lines<'a>,
}

impl<'a, 'b> Fields<'a, 'b> {
    fn new(line: &'a str, lines: &'b Lines<'a>) -> Self {
        Self { parts: line.split_whitespace(), lines }
    }

    fn next_str(&mut self, what: &str) -> Result<&'a str> {
        self.parts.next().ok_or_else(|| self.lines.err(format!("missing {what}")))
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.next_str(what)?;
        tok.parse().map_err(|_| self.lines.err(format!("invalid {what} {tok:?}")))
    }

    fn rest(self) -> Vec<&'a str> {
        self.parts.collect()
    }

    fn end(mut self) -> Result<()> {
        match self.parts.next() {
            None => Ok(()),
            Some(tok) => Err(self.lines.err(format!("unexpected trailing field {tok:?}"))),
        }
    }
}

pub(super) fn read_cameras(buf: &[u8]) -> Result<BTreeMap<CameraId, CameraIntrinsics>> {
    let mut lines = Lines::new(buf, "cameras")?;
    let mut out = BTreeMap::new();
    while let Some(line) = lines.next_record() {
        let mut f = Fields::new(line, &lines);
        let camera_id: CameraId = f.next("camera id")?;
        let name = f.next_str("camera model")?;
        let model = CameraModel::from_name(name).ok_or_else(|| ColmapError::UnknownCameraModelName(name.into()))?;
        let width = f.next("width")?;
        let height = f.next("height")?;
        let params = (0..model.arity()).map(|_| f.next("camera param")).collect::<Result<Vec<f64>>>()?;
        f.end()?;
        let cam = CameraIntrinsics { camera_id, model, width, height, params };
        if out.insert(camera_id, cam).is_some() {
            return Err(ColmapError::DuplicateId { kind: "camera", id: camera_id.into() });
        }
    }
    Ok(out)
}

pub(super) fn read_images(buf: &[u8]) -> Result<BTreeMap<ImageId, PosedImage>> {
    let mut lines = Lines::new(buf, "images")?;
    let mut out = BTreeMap::new();
    while let Some(line) = lines.next_record() {
        let mut f = Fields::new(line, &lines);
        let image_id: ImageId = f.next("image id")?;
        let mut rotation = [0.0; 4];
        for q in &mut rotation {
            *q = f.next("quaternion")?;
        }
        let mut translation = [0.0; 3];
        for t in &mut translation {
            *t = f.next("translation")?;
        }
        let camera_id = f.next("camera id")?;
        let name = f.next_str("image name")?.to_string();
        f.end()?;

        let obs_line = lines.next_raw().ok_or_else(|| lines.err("missing observation line"))?;
        let toks = Fields::new(obs_line, &lines).rest();
        if !toks.len().is_multiple_of(3) {
            return Err(lines.err("observation line is not a multiple of (X, Y, POINT3D_ID)"));
        }
        let observations = toks
            .chunks(3)
            .map(|c| {
                let parse = |s: &str| s.parse::<f64>().map_err(|_| lines.err(format!("invalid coordinate {s:?}")));
                let pid: i64 = c[2].parse().map_err(|_| lines.err(format!("invalid point id {:?}", c[2])))?;
                let point3d_id = match pid {
                    -1 => None,
                    p if p < 0 => return Err(ColmapError::Negative { what: "point3d_id", value: p }),
                    p => Some(p),
                };
                Ok(Observation { uv: [parse(c[0])?, parse(c[1])?], point3d_id })
            })
            .collect::<Result<Vec<_>>>()?;
        let image = PosedImage { image_id, rotation, translation, camera_id, name, observations };
        if out.insert(image_id, image).is_some() {
            return Err(ColmapError::DuplicateId { kind: "image", id: image_id.into() });
        }
    }
    Ok(out)
}

pub(super) fn read_points(buf: &[u8]) -> Result<BTreeMap<PointId, ScenePoint>> {
    let mut lines = Lines::new(buf, "points3D")?;
    let mut out = BTreeMap::new();
    while let Some(line) = lines.next_record() {
        let mut f = Fields::new(line, &lines);
        let point3d_id: PointId = f.next("point id")?;
        if point3d_id < 0 {
            return Err(ColmapError::Negative { what: "point3d_id", value: point3d_id });
        }
        let position = [f.next("x")?, f.next("y")?, f.next("z")?];
        let color = [f.next("r")?, f.next("g")?, f.next("b")?];
        let reprojection_error = f.next("error")?;
        let toks = f.rest();
        if !toks.len().is_multiple_of(2) {
            return Err(lines.err("track is not a multiple of (IMAGE_ID, POINT2D_IDX)"));
        }
        let track = toks
            .chunks(2)
            .map(|c| {
                let image_id = c[0].parse().map_err(|_| lines.err(format!("invalid image id {:?}", c[0])))?;
                let observation_index =
                    c[1].parse().map_err(|_| lines.err(format!("invalid observation index {:?}", c[1])))?;
                Ok(TrackEntry { image_id, observation_index })
            })
            .collect::<Result<Vec<_>>>()?;
        let point = ScenePoint { point3d_id, position, color, reprojection_error, track };
        if out.insert(point3d_id, point).is_some() {
            return Err(ColmapError::DuplicateId { kind: "point", id: point3d_id });
        }
    }
    Ok(out)
}

// Reals use Rust's shortest round-trip representation, so text output is lossless.

pub(super) fn write_cameras(model: &SfmModel) -> Vec<u8> {
    let mut s = String::new();
    s.push_str("# Camera list with one line of data per camera:\n");
    s.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(s, "# Number of cameras: {}", model.cameras.len());
    for c in model.cameras.values() {
        let _ = write!(s, "{} {} {} {}", c.camera_id, c.model.name(), c.width, c.height);
        for p in &c.params {
            let _ = write!(s, " {p:?}");
        }
        s.push('\n');
    }
    s.into_bytes()
}

pub(super) fn write_images(model: &SfmModel) -> Vec<u8> {
    let mut s = String::new();
    let total: usize = model.images.values().map(|i| i.observations.len()).sum();
    let mean = if model.images.is_empty() { 0.0 } else { total as f64 / model.images.len() as f64 };
    s.push_str("# Image list with two lines of data per image:\n");
    s.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    s.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(s, "# Number of images: {}, mean observations per image: {mean}", model.images.len());
    for im in model.images.values() {
        let _ = write!(s, "{}", im.image_id);
        for v in im.rotation.iter().chain(&im.translation) {
            let _ = write!(s, " {v:?}");
        }
        let _ = writeln!(s, " {} {}", im.camera_id, im.name);
        let obs: Vec<String> = im
            .observations
            .iter()
            .map(|o| format!("{:?} {:?} {}", o.uv[0], o.uv[1], o.point3d_id.unwrap_or(-1)))
            .collect();
        s.push_str(&obs.join(" "));
        s.push('\n');
    }
    s.into_bytes()
}

pub(super) fn write_points(model: &SfmModel) -> Vec<u8> {
    let mut s = String::new();
    let total: usize = model.points.values().map(|p| p.track.len()).sum();
    let mean = if model.points.is_empty() { 0.0 } else { total as f64 / model.points.len() as f64 };
    s.push_str("# 3D point list with one line of data per point:\n");
    s.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(s, "# Number of points: {}, mean track length: {mean}", model.points.len());
    for p in model.points.values() {
        let [x, y, z] = p.position;
        let [r, g, b] = p.color;
        let _ = write!(s, "{} {x:?} {y:?} {z:?} {r} {g} {b} {:?}", p.point3d_id, p.reprojection_error);
        for t in &p.track {
            let _ = write!(s, " {} {}", t.image_id, t.observation_index);
        }
        s.push('\n');
    }
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::two_image_model;
    use super::super::*;

    #[test]
    fn text_round_trip_preserves_fixture() {
        let m = two_image_model();
        let (c, i, p) = serialize_model(&m, Format::Text).unwrap();
        let back = parse_model(&c, &i, &p, Format::Text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn empty_model_writes_zero_counts() {
        let (c, i, p) = serialize_model(&SfmModel::default(), Format::Text).unwrap();
        let c = String::from_utf8(c).unwrap();
        assert!(c.contains("# Number of cameras: 0"));
        assert_eq!(c.lines().filter(|l| !l.starts_with('#')).count(), 0);
        let m = parse_model(c.as_bytes(), &i, &p, Format::Text).unwrap();
        assert_eq!(m, SfmModel::default());
    }

    #[test]
    fn parses_colmap_style_text_with_comments_and_empty_observation_line() {
        let cams = b"# comment\n3 SIMPLE_RADIAL 100 80 90.5 50 40 -0.01\n";
        let imgs = b"# header\n# more\n5 1 0 0 0 0.5 0 1 3 frame_0005.jpg\n\n";
        let pts = b"# no points\n";
        let m = parse_model(cams, imgs, pts, Format::Text).unwrap();
        assert_eq!(m.cameras[&3].model, CameraModel::SimpleRadial);
        assert_eq!(m.cameras[&3].params, vec![90.5, 50.0, 40.0, -0.01]);
        assert_eq!(m.images[&5].name, "frame_0005.jpg");
        assert!(m.images[&5].observations.is_empty());
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let cams = b"1 PINHOLE 100 100 50 50 50\n";
        let err = parse_model(cams, b"", b"", Format::Text).unwrap_err();
        assert!(matches!(err, ColmapError::Text { stream: "cameras", line: 1, .. }), "{err}");
        let err = parse_model(b"1 FISHEYE 1 1 1\n", b"", b"", Format::Text).unwrap_err();
        assert!(matches!(err, ColmapError::UnknownCameraModelName(_)));
    }
}
