use std::collections::BTreeMap;
use std::io::Cursor;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::*;

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    stream: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], stream: &'static str) -> Self {
        Self { cur: Cursor::new(buf), stream }
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn trunc(&self, context: &str) -> ColmapError {
        ColmapError::Truncated { stream: self.stream, context: context.to_string() }
    }

    fn u8(&mut self, ctx: &str) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.trunc(ctx))
    }
    fn i32(&mut self, ctx: &str) -> Result<i32> {
        self.cur.read_i32::<LE>().map_err(|_| self.trunc(ctx))
    }
    fn i64(&mut self, ctx: &str) -> Result<i64> {
        self.cur.read_i64::<LE>().map_err(|_| self.trunc(ctx))
    }
    fn u64(&mut self, ctx: &str) -> Result<u64> {
        self.cur.read_u64::<LE>().map_err(|_| self.trunc(ctx))
    }
    fn f64(&mut self, ctx: &str) -> Result<f64> {
        self.cur.read_f64::<LE>().map_err(|_| self.trunc(ctx))
    }
    fn f64s<const N: usize>(&mut self, ctx: &str) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f64(ctx)?;
        }
        Ok(out)
    }

    fn cstring(&mut self, ctx: &str) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        loop {
            match self.u8(ctx)? {
                0 => return Ok(bytes),
                b => bytes.push(b),
            }
        }
    }

    /// Record count, capped for preallocation by the bytes actually present.
    fn count(&mut self, ctx: &str, min_record: usize) -> Result<(u64, usize)> {
        let n = self.u64(ctx)?;
        let cap = (self.remaining() / min_record.max(1)).min(n as usize);
        Ok((n, cap))
    }

    fn finish(self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            count => Err(ColmapError::TrailingBytes { stream: self.stream, count }),
        }
    }
}

pub(super) fn read_cameras(buf: &[u8]) -> Result<BTreeMap<CameraId, CameraIntrinsics>> {
    let mut r = Reader::new(buf, "cameras");
    let (n, _) = r.count("camera count", 24)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let camera_id = r.i32("camera_id")?;
        let model_id = r.i32("model_id")?;
        let model = CameraModel::from_id(model_id).ok_or(ColmapError::UnknownCameraModel(model_id))?;
        let width = r.u64("width")?;
        let height = r.u64("height")?;
        let params = (0..model.arity()).map(|_| r.f64("camera params")).collect::<Result<Vec<_>>>()?;
        let cam = CameraIntrinsics { camera_id, model, width, height, params };
        if out.insert(camera_id, cam).is_some() {
            return Err(ColmapError::DuplicateId { kind: "camera", id: camera_id.into() });
        }
    }
    r.finish()?;
    Ok(out)
}

pub(super) fn read_images(buf: &[u8]) -> Result<BTreeMap<ImageId, PosedImage>> {
    let mut r = Reader::new(buf, "images");
    let (n, _) = r.count("image count", 69)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let image_id = r.i32("image_id")?;
        let rotation = r.f64s::<4>("quaternion")?;
        let translation = r.f64s::<3>("translation")?;
        let camera_id = r.i32("camera_id")?;
        let name = String::from_utf8(r.cstring("image name")?).map_err(|_| ColmapError::InvalidName { image_id })?;
        let (num_obs, cap) = r.count("observation count", 24)?;
        let mut observations = Vec::with_capacity(cap);
        for _ in 0..num_obs {
            let u = r.f64("observation")?;
            let v = r.f64("observation")?;
            let pid = r.i64("observation point id")?;
            let point3d_id = match pid {
                -1 => None,
                p if p < 0 => return Err(ColmapError::Negative { what: "point3d_id", value: p }),
                p => Some(p),
            };
            observations.push(Observation { uv: [u, v], point3d_id });
        }
        let image = PosedImage { image_id, rotation, translation, camera_id, name, observations };
        if out.insert(image_id, image).is_some() {
            return Err(ColmapError::DuplicateId { kind: "image", id: image_id.into() });
        }
    }
    r.finish()?;
    Ok(out)
}

pub(super) fn read_points(buf: &[u8]) -> Result<BTreeMap<PointId, ScenePoint>> {
    let mut r = Reader::new(buf, "points3D");
    let (n, _) = r.count("point count", 51)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let point3d_id = r.i64("point3d_id")?;
        if point3d_id < 0 {
            return Err(ColmapError::Negative { what: "point3d_id", value: point3d_id });
        }
        let position = r.f64s::<3>("position")?;
        let color = [r.u8("color")?, r.u8("color")?, r.u8("color")?];
        let reprojection_error = r.f64("error")?;
        let (len, cap) = r.count("track length", 8)?;
        let mut track = Vec::with_capacity(cap);
        for _ in 0..len {
            let image_id = r.i32("track image_id")?;
            let idx = r.i32("track observation index")?;
            if idx < 0 {
                return Err(ColmapError::Negative { what: "observation index", value: idx.into() });
            }
            track.push(TrackEntry { image_id, observation_index: idx as u32 });
        }
        let point = ScenePoint { point3d_id, position, color, reprojection_error, track };
        if out.insert(point3d_id, point).is_some() {
            return Err(ColmapError::DuplicateId { kind: "point", id: point3d_id });
        }
    }
    r.finish()?;
    Ok(out)
}

// Writes into a Vec<u8> cannot fail.
fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.write_f64::<LE>(*v).unwrap();
    }
}

pub(super) fn write_cameras(model: &SfmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u64::<LE>(model.cameras.len() as u64).unwrap();
    for cam in model.cameras.values() {
        out.write_i32::<LE>(cam.camera_id).unwrap();
        out.write_i32::<LE>(cam.model.id()).unwrap();
        out.write_u64::<LE>(cam.width).unwrap();
        out.write_u64::<LE>(cam.height).unwrap();
        put_f64s(&mut out, &cam.params);
    }
    out
}

pub(super) fn write_images(model: &SfmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u64::<LE>(model.images.len() as u64).unwrap();
    for image in model.images.values() {
        out.write_i32::<LE>(image.image_id).unwrap();
        put_f64s(&mut out, &image.rotation);
        put_f64s(&mut out, &image.translation);
        out.write_i32::<LE>(image.camera_id).unwrap();
        out.extend_from_slice(image.name.as_bytes());
        out.push(0);
        out.write_u64::<LE>(image.observations.len() as u64).unwrap();
        for obs in &image.observations {
            put_f64s(&mut out, &obs.uv);
            out.write_i64::<LE>(obs.point3d_id.unwrap_or(-1)).unwrap();
        }
    }
    out
}

pub(super) fn write_points(model: &SfmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u64::<LE>(model.points.len() as u64).unwrap();
    for p in model.points.values() {
        out.write_i64::<LE>(p.point3d_id).unwrap();
        put_f64s(&mut out, &p.position);
        out.extend_from_slice(&p.color);
        out.write_f64::<LE>(p.reprojection_error).unwrap();
        out.write_u64::<LE>(p.track.len() as u64).unwrap();
        for t in &p.track {
            out.write_i32::<LE>(t.image_id).unwrap();
            out.write_i32::<LE>(t.observation_index as i32).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::two_image_model;
    use super::super::*;
    use super::*;

    fn le_u64(b: &mut Vec<u8>, v: u64) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    fn le_i32(b: &mut Vec<u8>, v: i32) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    fn le_i64(b: &mut Vec<u8>, v: i64) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    fn le_f64(b: &mut Vec<u8>, v: f64) {
        b.extend_from_slice(&v.to_le_bytes());
    }

    /// Stream bytes for [`two_image_model`], assembled field by field.
    #[allow(clippy::type_complexity)]
    fn fixture_bytes() -> ModelStreams {
        let mut cams = Vec::new();
        le_u64(&mut cams, 1);
        le_i32(&mut cams, 1);
        le_i32(&mut cams, 1);
        le_u64(&mut cams, 640);
        le_u64(&mut cams, 480);
        for v in [500.0, 510.0, 320.0, 240.0] {
            le_f64(&mut cams, v);
        }

        let mut imgs = Vec::new();
        le_u64(&mut imgs, 2);
        let images: [(i32, [f64; 4], [f64; 3], &str, [i64; 3]); 2] = [
            (1, [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0], "a.png", [7, -1, 8]),
            (2, [0.0, 1.0, 0.0, 0.0], [0.25, -1.0, 3.0], "b.png", [-1, 8, 7]),
        ];
        for (id, q, t, name, pids) in images {
            le_i32(&mut imgs, id);
            q.iter().for_each(|v| le_f64(&mut imgs, *v));
            t.iter().for_each(|v| le_f64(&mut imgs, *v));
            le_i32(&mut imgs, 1);
            imgs.extend_from_slice(name.as_bytes());
            imgs.push(0);
            le_u64(&mut imgs, 3);
            for (k, pid) in pids.iter().enumerate() {
                le_f64(&mut imgs, 10.0 + k as f64);
                le_f64(&mut imgs, 20.5 - k as f64);
                le_i64(&mut imgs, *pid);
            }
        }

        let mut pts = Vec::new();
        le_u64(&mut pts, 2);
        let points: [(i64, [f64; 3], [u8; 3], f64, [(i32, i32); 2]); 2] = [
            (7, [0.1, 0.2, 5.0], [255, 128, 0], 0.5, [(1, 0), (2, 2)]),
            (8, [-0.3, 0.0, 4.0], [1, 2, 3], 1.25, [(1, 2), (2, 1)]),
        ];
        for (id, xyz, rgb, err, track) in points {
            le_i64(&mut pts, id);
            xyz.iter().for_each(|v| le_f64(&mut pts, *v));
            pts.extend_from_slice(&rgb);
            le_f64(&mut pts, err);
            le_u64(&mut pts, 2);
            for (img, idx) in track {
                le_i32(&mut pts, img);
                le_i32(&mut pts, idx);
            }
        }
        (cams, imgs, pts)
    }

    #[test]
    fn empty_streams_parse_to_empty_model() {
        let zero = 0u64.to_le_bytes();
        let m = parse_model(&zero, &zero, &zero, Format::Binary).unwrap();
        assert!(m.cameras.is_empty() && m.images.is_empty() && m.points.is_empty());
        let (c, i, p) = serialize_model(&m, Format::Binary).unwrap();
        assert_eq!((c.as_slice(), i.as_slice(), p.as_slice()), (&zero[..], &zero[..], &zero[..]));
    }

    #[test]
    fn hand_built_fixture_parses_and_round_trips() {
        let (c, i, p) = fixture_bytes();
        let m = parse_model(&c, &i, &p, Format::Binary).unwrap();
        assert_eq!(m, two_image_model());
        assert_eq!((m.cameras.len(), m.images.len(), m.points.len()), (1, 2, 2));
        assert!(m.images.values().all(|im| im.observations.len() == 3));
        let back = serialize_model(&m, Format::Binary).unwrap();
        assert_eq!(back, (c, i, p));
    }

    #[test]
    fn dangling_camera_names_the_id() {
        let mut m = two_image_model();
        m.images.get_mut(&2).unwrap().camera_id = 99;
        let (c, i, p) = (write_cameras(&m), write_images(&m), write_points(&m));
        let err = parse_model(&c, &i, &p, Format::Binary).unwrap_err();
        match err {
            ColmapError::Dangling(Violation::DanglingCamera { camera_id: 99, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_text(&c, &i, &p).contains("99"));
    }

    fn err_text(c: &[u8], i: &[u8], p: &[u8]) -> String {
        parse_model(c, i, p, Format::Binary).unwrap_err().to_string()
    }

    #[test]
    fn truncated_and_trailing_streams_are_rejected() {
        let (c, i, p) = fixture_bytes();
        let short = &i[..i.len() - 3];
        assert!(matches!(
            parse_model(&c, short, &p, Format::Binary),
            Err(ColmapError::Truncated { stream: "images", .. })
        ));
        let mut long = p.clone();
        long.push(0xAB);
        assert!(matches!(
            parse_model(&c, &i, &long, Format::Binary),
            Err(ColmapError::TrailingBytes { stream: "points3D", count: 1 })
        ));
    }

    #[test]
    fn unknown_model_id_is_rejected() {
        let (mut c, i, p) = fixture_bytes();
        c[12..16].copy_from_slice(&3i32.to_le_bytes());
        assert!(matches!(parse_model(&c, &i, &p, Format::Binary), Err(ColmapError::UnknownCameraModel(3))));
    }

    #[test]
    fn quaternion_noise_is_renormalized_and_flagged() {
        let mut m = two_image_model();
        m.images.get_mut(&1).unwrap().rotation = [1.0005, 0.0, 0.0, 0.0];
        let (c, i, p) = (write_cameras(&m), write_images(&m), write_points(&m));
        let parsed = parse_model(&c, &i, &p, Format::Binary).unwrap();
        assert_eq!(parsed.images[&1].rotation, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(validate(&parsed), vec![Violation::RenormalizedQuaternion { image_id: 1 }]);

        m.images.get_mut(&1).unwrap().rotation = [1.01, 0.0, 0.0, 0.0];
        let i = write_images(&m);
        assert!(matches!(
            parse_model(&c, &i, &p, Format::Binary),
            Err(ColmapError::NonUnitQuaternion { image_id: 1, .. })
        ));
    }

    #[test]
    fn output_is_sorted_by_id() {
        let fixture = two_image_model();
        let mut m = SfmModel::default();
        for id in [2, 1] {
            m.images.insert(id, fixture.images[&id].clone());
        }
        for id in [8, 7] {
            m.points.insert(id, fixture.points[&id].clone());
        }
        m.cameras = fixture.cameras.clone();
        let (_, i, _) = serialize_model(&m, Format::Binary).unwrap();
        assert_eq!(i32::from_le_bytes(i[8..12].try_into().unwrap()), 1);
        assert_eq!(serialize_model(&m, Format::Binary).unwrap(), fixture_bytes());
    }
}
