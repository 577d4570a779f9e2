//! Boxes, camera projection, projected-box polygons and track visibility.

use std::collections::BTreeMap;

use crate::colmap::{CameraIntrinsics, CameraModel, ImageId, PointId, PosedImage, SfmModel};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Camera-frame depth at or below which a point is considered behind the camera.
pub const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("box min {min:?} must be strictly below max {max:?} on every axis")]
    InvalidBox { min: [f64; 3], max: [f64; 3] },
}

/// Closed axis-aligned box with strictly positive volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T> {
    min: Vec3<T>,
    max: Vec3<T>,
}

/// Corner index pairs forming the 12 box edges; corner `i` takes `max` on axis `k` when bit `k` is set.
const EDGES: [(usize, usize); 12] =
    [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (0, 4), (1, 5), (2, 6), (3, 7)];

impl<T: Real> Aabb<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Result<Self, GeometryError> {
        if (0..3).all(|k| min[k] < max[k] && min[k].is_finite() && max[k].is_finite()) {
            Ok(Self { min, max })
        } else {
            Err(GeometryError::InvalidBox { min: min.to_f64(), max: max.to_f64() })
        }
    }

    pub fn from_arrays(min: [f64; 3], max: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(Vec3::from_f64(min), Vec3::from_f64(max))
    }

    /// Box of half-extent `half` around `center`.
    pub fn centered(center: Vec3<T>, half: T) -> Result<Self, GeometryError> {
        let h = Vec3::new(half, half, half);
        Self::new(center - h, center + h)
    }

    pub fn min(&self) -> Vec3<T> {
        self.min
    }

    pub fn max(&self) -> Vec3<T> {
        self.max
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    #[inline]
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn corners(&self) -> [Vec3<T>; 8] {
        std::array::from_fn(|i| Vec3(std::array::from_fn(|k| if i >> k & 1 == 1 { self.max[k] } else { self.min[k] })))
    }

    /// Closed-box intersection test (touching faces count as overlap).
    pub fn intersects(&self, other: &Self) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Whether `inner` lies entirely within this box.
    pub fn encloses(&self, inner: &Self) -> bool {
        self.contains(&inner.min) && self.contains(&inner.max)
    }

    pub fn cast<U: Real>(&self) -> Aabb<U> {
        Aabb { min: Vec3::from_f64(self.min.to_f64()), max: Vec3::from_f64(self.max.to_f64()) }
    }
}

/// Closed-box membership test.
#[inline]
pub fn point_in_aabb<T: Real>(p: &Vec3<T>, b: &Aabb<T>) -> bool {
    b.contains(p)
}

/// A calibrated, posed camera.
#[derive(Clone, Debug)]
pub struct Camera<T> {
    pub model: CameraModel,
    params: [T; 8],
    pub width: T,
    pub height: T,
    /// World-to-camera rotation.
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Camera<T> {
    pub fn from_colmap(intrinsics: &CameraIntrinsics, pose: &PosedImage) -> Self {
        let mut params = [T::zero(); 8];
        for (dst, src) in params.iter_mut().zip(&intrinsics.params) {
            *dst = T::lit(*src);
        }
        Self {
            model: intrinsics.model,
            params,
            width: T::lit(intrinsics.width as f64),
            height: T::lit(intrinsics.height as f64),
            rotation: Mat3::from_quaternion(pose.rotation.map(T::lit)),
            translation: Vec3::from_f64(pose.translation),
        }
    }

    pub fn to_camera_frame(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation * *p + self.translation
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vec3<T> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Optical axis in world coordinates (third row of the rotation).
    pub fn forward(&self) -> Vec3<T> {
        self.rotation.row(2)
    }

    pub fn image_area(&self) -> T {
        self.width * self.height
    }

    fn distort(&self, x: T, y: T) -> (T, T) {
        let p = &self.params;
        match self.model {
            CameraModel::SimplePinhole | CameraModel::Pinhole => (x, y),
            CameraModel::SimpleRadial => {
                let r2 = x * x + y * y;
                let radial = p[3] * r2;
                (x + x * radial, y + y * radial)
            }
            CameraModel::OpenCv => {
                let (k1, k2, p1, p2) = (p[4], p[5], p[6], p[7]);
                let two = T::lit(2.0);
                let (x2, y2, xy) = (x * x, y * y, x * y);
                let r2 = x2 + y2;
                let radial = k1 * r2 + k2 * r2 * r2;
                let dx = x * radial + two * p1 * xy + p2 * (r2 + two * x2);
                let dy = y * radial + two * p2 * xy + p1 * (r2 + two * y2);
                (x + dx, y + dy)
            }
        }
    }

    fn intrinsics(&self) -> (T, T, T, T) {
        let p = &self.params;
        match self.model {
            CameraModel::SimplePinhole | CameraModel::SimpleRadial => (p[0], p[0], p[1], p[2]),
            CameraModel::Pinhole | CameraModel::OpenCv => (p[0], p[1], p[2], p[3]),
        }
    }

    /// Projects a camera-frame point; `None` at or behind the near plane.
    pub fn project_camera_point(&self, pc: &Vec3<T>) -> Option<[T; 2]> {
        if !(pc.z() > T::lit(NEAR_PLANE)) {
            return None;
        }
        let (x, y) = self.distort(pc.x() / pc.z(), pc.y() / pc.z());
        let (fx, fy, cx, cy) = self.intrinsics();
        Some([fx * x + cx, fy * y + cy])
    }

    pub fn project(&self, p_world: &Vec3<T>) -> Option<[T; 2]> {
        self.project_camera_point(&self.to_camera_frame(p_world))
    }
}

/// Projects a world point into the image of `pose`.
pub fn project(intrinsics: &CameraIntrinsics, pose: &PosedImage, p_world: [f64; 3]) -> Option<[f64; 2]> {
    Camera::<f64>::from_colmap(intrinsics, pose).project(&Vec3(p_world))
}

/// Convex polygon in pixel coordinates, counter-clockwise in (u, v).
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePolygon<T> {
    pub vertices: Vec<[T; 2]>,
    pub area: T,
}

impl<T: Real> ImagePolygon<T> {
    /// Closed point-in-polygon test.
    pub fn contains(&self, q: [T; 2]) -> bool {
        let n = self.vertices.len();
        let tol = T::lit(1e-9) * (T::one() + self.area);
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(a, b, q) >= -tol
        })
    }

    /// Axis-aligned bounds `(min_u, min_v, max_u, max_v)`.
    pub fn bounds(&self) -> (T, T, T, T) {
        self.vertices
            .iter()
            .fold((T::infinity(), T::infinity(), T::neg_infinity(), T::neg_infinity()), |(a, b, c, d), v| {
                (a.min(v[0]), b.min(v[1]), c.max(v[0]), d.max(v[1]))
            })
    }
}

#[inline]
fn cross<T: Real>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed shoelace area (positive for counter-clockwise).
pub fn shoelace_area<T: Real>(vertices: &[[T; 2]]) -> T {
    let n = vertices.len();
    let sum = (0..n).fold(T::zero(), |acc, i| {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        acc + a[0] * b[1] - b[0] * a[1]
    });
    sum * T::lit(0.5)
}

/// Counter-clockwise convex hull without collinear vertices.
pub fn convex_hull<T: Real>(points: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut pts: Vec<[T; 2]> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[T; 2]> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[T; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Sutherland–Hodgman clip of a convex polygon to `[0, w] x [0, h]`.
pub fn clip_to_rect<T: Real>(poly: &[[T; 2]], w: T, h: T) -> Vec<[T; 2]> {
    // Each plane: (axis, bound, keep_below)
    let planes = [(0usize, T::zero(), false), (0, w, true), (1, T::zero(), false), (1, h, true)];
    let mut out = poly.to_vec();
    for (axis, bound, below) in planes {
        if out.is_empty() {
            break;
        }
        let inside = |p: &[T; 2]| if below { p[axis] <= bound } else { p[axis] >= bound };
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                let mut x = [prev[0] + (cur[0] - prev[0]) * t, prev[1] + (cur[1] - prev[1]) * t];
                x[axis] = bound;
                out.push(x);
            }
            if ci {
                out.push(cur);
            }
        }
    }
    for v in &mut out {
        v[0] = v[0].max(T::zero()).min(w);
        v[1] = v[1].max(T::zero()).min(h);
    }
    out.dedup();
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Camera-frame points of the box after clipping its 12 edges at the near plane.
fn clipped_box_points<T: Real>(camera: &Camera<T>, b: &Aabb<T>) -> Vec<Vec3<T>> {
    let near = T::lit(NEAR_PLANE);
    let corners = b.corners().map(|c| camera.to_camera_frame(&c));
    let mut pts = Vec::with_capacity(24);
    for &(i, j) in &EDGES {
        let (a, c) = (corners[i], corners[j]);
        let (fa, fc) = (a.z() > near, c.z() > near);
        if fa {
            pts.push(a);
        }
        if fc {
            pts.push(c);
        }
        if fa != fc {
            let t = (near - a.z()) / (c.z() - a.z());
            let mut x = a.lerp(&c, t);
            // land strictly in front so the projection is defined
            x.0[2] = near + near * T::epsilon().sqrt();
            pts.push(x);
        }
    }
    pts
}

/// Convex hull of the projected box clipped to the image, or `None` when it misses the image.
pub fn projected_aabb<T: Real>(camera: &Camera<T>, b: &Aabb<T>) -> Option<ImagePolygon<T>> {
    let projected: Vec<[T; 2]> =
        clipped_box_points(camera, b).iter().filter_map(|p| camera.project_camera_point(p)).collect();
    let hull = convex_hull(&projected);
    if hull.len() < 3 {
        return None;
    }
    let clipped = clip_to_rect(&hull, camera.width, camera.height);
    if clipped.len() < 3 {
        return None;
    }
    let area = shoelace_area(&clipped);
    (area > T::zero()).then_some(ImagePolygon { vertices: clipped, area })
}

/// Images observing at least one model point inside `b`, with those point ids (ascending).
pub fn roi_visibility(model: &SfmModel, b: &Aabb<f64>) -> BTreeMap<ImageId, Vec<PointId>> {
    let mut out: BTreeMap<ImageId, Vec<PointId>> = BTreeMap::new();
    for point in model.points.values() {
        if !b.contains(&Vec3(point.position)) {
            continue;
        }
        for entry in &point.track {
            let ids = out.entry(entry.image_id).or_default();
            if ids.last() != Some(&point.point3d_id) {
                ids.push(point.point3d_id);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colmap::Observation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> Aabb<f64> {
        Aabb::from_arrays([-0.5; 3], [0.5; 3]).unwrap()
    }

    fn identity_pose() -> PosedImage {
        PosedImage {
            image_id: 1,
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0; 3],
            camera_id: 1,
            name: "img".into(),
            observations: vec![],
        }
    }

    fn pinhole100() -> CameraIntrinsics {
        CameraIntrinsics::pinhole(1, 100, 100, 100.0, 100.0, 50.0, 50.0)
    }

    #[test]
    fn closed_box_membership() {
        let b = unit_box();
        assert!(point_in_aabb(&b.min(), &b));
        assert!(point_in_aabb(&Vec3::zero(), &b));
        assert!(!point_in_aabb(&Vec3::new(2.0, 0.0, 0.0), &b));
    }

    #[test]
    fn membership_matches_componentwise_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Aabb::from_arrays([-1.0, 0.0, 2.0], [1.0, 0.5, 3.0]).unwrap();
        for _ in 0..1000 {
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.5), rng.gen_range(1.0..4.0)];
            let brute = p[0] >= -1.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 0.5 && p[2] >= 2.0 && p[2] <= 3.0;
            assert_eq!(point_in_aabb(&Vec3(p), &b), brute);
        }
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(Aabb::<f64>::from_arrays([0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn pinhole_projection_examples() {
        let (k, pose) = (pinhole100(), identity_pose());
        assert_eq!(project(&k, &pose, [0.0, 0.0, 1.0]), Some([50.0, 50.0]));
        let p = project(&k, &pose, [0.1, 0.0, 1.0]).unwrap();
        assert!((p[0] - 60.0).abs() < 1e-12 && (p[1] - 50.0).abs() < 1e-12);
        assert_eq!(project(&k, &pose, [0.0, 0.0, -1.0]), None);
    }

    #[test]
    fn radial_models_apply_distortion() {
        let pose = identity_pose();
        let k = CameraIntrinsics {
            camera_id: 1,
            model: CameraModel::SimpleRadial,
            width: 100,
            height: 100,
            params: vec![100.0, 50.0, 50.0, 0.1],
        };
        // x = 0.2 -> r2 = 0.04, factor 1.004
        let p = project(&k, &pose, [0.2, 0.0, 1.0]).unwrap();
        assert!((p[0] - (100.0 * 0.2 * 1.004 + 50.0)).abs() < 1e-12);
        let k = CameraIntrinsics {
            camera_id: 1,
            model: CameraModel::OpenCv,
            width: 100,
            height: 100,
            params: vec![100.0, 90.0, 50.0, 40.0, 0.1, 0.01, 0.001, -0.002],
        };
        let (x, y) = (0.2f64, -0.1f64);
        let r2 = x * x + y * y;
        let radial = 0.1 * r2 + 0.01 * r2 * r2;
        let xd = x + x * radial + 2.0 * 0.001 * x * y + -0.002 * (r2 + 2.0 * x * x);
        let yd = y + y * radial + 2.0 * -0.002 * x * y + 0.001 * (r2 + 2.0 * y * y);
        let p = project(&k, &pose, [x, y, 1.0]).unwrap();
        assert!((p[0] - (100.0 * xd + 50.0)).abs() < 1e-12);
        assert!((p[1] - (90.0 * yd + 40.0)).abs() < 1e-12);
    }

    #[test]
    fn box_behind_camera_has_no_polygon() {
        let cam = Camera::<f64>::from_colmap(&pinhole100(), &identity_pose());
        let b = Aabb::from_arrays([-0.5, -0.5, -10.5], [0.5, 0.5, -9.5]).unwrap();
        assert!(projected_aabb(&cam, &b).is_none());
    }

    /// Hull of the 8 projected corners and its shoelace area, computed directly.
    fn corner_hull_area(intr: &CameraIntrinsics, pose: &PosedImage, b: &Aabb<f64>) -> f64 {
        let pts: Vec<[f64; 2]> = b.corners().iter().filter_map(|c| project(intr, pose, c.0)).collect();
        shoelace_area(&convex_hull(&pts))
    }

    #[test]
    fn depth_ten_unit_box_area() {
        let cam = Camera::<f64>::from_colmap(&pinhole100(), &identity_pose());
        let b = Aabb::from_arrays([-0.5, -0.5, 9.5], [0.5, 0.5, 10.5]).unwrap();
        let poly = projected_aabb(&cam, &b).unwrap();
        let half: f64 = 100.0 * 0.5 / 9.5;
        assert!((poly.area - (2.0 * half).powi(2)).abs() < 1e-9);
        assert!((poly.area - 110.803).abs() < 1e-3);
        assert!((poly.area - corner_hull_area(&pinhole100(), &identity_pose(), &b)).abs() < 1e-9);
        assert!((poly.area - shoelace_area(&poly.vertices)).abs() <= 1e-6 * poly.area);
        for v in &poly.vertices {
            assert!((v[0] - 50.0).abs() <= half + 1e-9 && (v[1] - 50.0).abs() <= half + 1e-9);
        }
    }

    #[test]
    fn partially_outside_box_is_clipped() {
        let b = Aabb::from_arrays([0.0, -0.5, 1.5], [1.0, 0.5, 2.5]).unwrap();
        let cam = Camera::<f64>::from_colmap(&pinhole100(), &identity_pose());
        let poly = projected_aabb(&cam, &b).unwrap();
        let unclipped = corner_hull_area(&pinhole100(), &identity_pose(), &b);
        // independent Sutherland–Hodgman reference on the same corners
        let pts: Vec<[f64; 2]> =
            b.corners().iter().filter_map(|c| project(&pinhole100(), &identity_pose(), c.0)).collect();
        let reference = reference_clip(&convex_hull(&pts), 100.0, 100.0);
        assert!(poly.area < unclipped);
        assert!((poly.area - shoelace_area(&reference)).abs() < 1e-9);
        assert!(poly.vertices.iter().all(|v| (0.0..=100.0).contains(&v[0]) && (0.0..=100.0).contains(&v[1])));
    }

    /// Straightforward half-plane clipping used as a test oracle.
    fn reference_clip(poly: &[[f64; 2]], w: f64, h: f64) -> Vec<[f64; 2]> {
        type Plane = fn(&[f64; 2], f64, f64) -> f64;
        let planes: [Plane; 4] = [|p, _, _| p[0], |p, w, _| w - p[0], |p, _, _| p[1], |p, _, h| h - p[1]];
        let mut cur = poly.to_vec();
        for f in planes {
            let mut next = vec![];
            for i in 0..cur.len() {
                let a = cur[i];
                let b = cur[(i + 1) % cur.len()];
                let (da, db) = (f(&a, w, h), f(&b, w, h));
                if da >= 0.0 {
                    next.push(a);
                }
                if (da >= 0.0) != (db >= 0.0) {
                    let t = da / (da - db);
                    next.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn straddling_near_plane_uses_edge_clipping() {
        // Box spans the camera plane; discarding the rear corners would shrink the area.
        let cam = Camera::<f64>::from_colmap(&pinhole100(), &identity_pose());
        let b = Aabb::from_arrays([-0.2, -0.2, -1.0], [0.2, 0.2, 1.0]).unwrap();
        let poly = projected_aabb(&cam, &b).unwrap();
        assert!((poly.area - 10_000.0).abs() < 1e-6, "{}", poly.area);
    }

    #[test]
    fn area_is_invariant_under_rigid_motion() {
        let k = pinhole100();
        let pose = identity_pose();
        let b = Aabb::from_arrays([-0.3, -0.2, 4.0], [0.4, 0.3, 5.0]).unwrap();
        let base = projected_aabb(&Camera::<f64>::from_colmap(&k, &pose), &b).unwrap().area;
        // translate world by d: camera t' = t - R d, box shifted by d
        let d = [3.0, -2.0, 7.5];
        let shifted = Aabb::from_arrays(
            [b.min()[0] + d[0], b.min()[1] + d[1], b.min()[2] + d[2]],
            [b.max()[0] + d[0], b.max()[1] + d[1], b.max()[2] + d[2]],
        )
        .unwrap();
        let mut moved = pose.clone();
        moved.translation = [-d[0], -d[1], -d[2]];
        let area = projected_aabb(&Camera::<f64>::from_colmap(&k, &moved), &shifted).unwrap().area;
        assert!((area - base).abs() <= 1e-6 * base);
    }

    #[test]
    fn f32_projection_agrees_with_f64() {
        let k = pinhole100();
        let pose = identity_pose();
        let c32 = Camera::<f32>::from_colmap(&k, &pose);
        let b = Aabb::<f32>::from_arrays([-0.5, -0.5, 9.5], [0.5, 0.5, 10.5]).unwrap();
        let area = projected_aabb(&c32, &b).unwrap().area;
        assert!((area - 110.803).abs() < 1e-2);
    }

    fn visibility_fixture() -> SfmModel {
        use crate::colmap::{ScenePoint, TrackEntry};
        let mut m = SfmModel::default();
        m.cameras.insert(1, pinhole100());
        let mut a = identity_pose();
        let mut b = identity_pose();
        b.image_id = 2;
        b.name = "b".into();
        // points 1..=5 inside, 6 outside; A sees 1,2,3,6; B sees 6 only
        for pid in [1, 2, 3, 6] {
            a.observations.push(Observation { uv: [0.0, 0.0], point3d_id: Some(pid) });
        }
        b.observations.push(Observation { uv: [0.0, 0.0], point3d_id: Some(6) });
        for pid in 1..=6i64 {
            let pos = if pid == 6 { [5.0, 0.0, 0.0] } else { [0.1 * pid as f64 - 0.3, 0.0, 0.0] };
            let mut track = vec![];
            if let Some(i) = a.observations.iter().position(|o| o.point3d_id == Some(pid)) {
                track.push(TrackEntry { image_id: 1, observation_index: i as u32 });
            }
            if pid == 6 {
                track.push(TrackEntry { image_id: 2, observation_index: 0 });
            }
            m.points.insert(
                pid,
                ScenePoint { point3d_id: pid, position: pos, color: [0; 3], reprojection_error: 0.0, track },
            );
        }
        m.images.insert(1, a);
        m.images.insert(2, b);
        assert!(crate::colmap::validate(&m).is_empty());
        m
    }

    #[test]
    fn visibility_lists_in_box_observers() {
        let m = visibility_fixture();
        let vis = roi_visibility(&m, &unit_box());
        assert_eq!(vis.len(), 1);
        assert_eq!(vis[&1], vec![1, 2, 3]);
        let far = Aabb::from_arrays([10.0; 3], [11.0; 3]).unwrap();
        assert!(roi_visibility(&m, &far).is_empty());
    }
}
