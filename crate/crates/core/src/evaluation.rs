//! Image-quality metrics restricted to the projection of an ROI box.
//!
//! PSNR averages squared error over masked pixels and channels with peak 1
//! and reports [`PSNR_CAP_DB`] for identical regions. SSIM uses an 11x11
//! Gaussian window (sigma 1.5) over windows fully inside the image, averaged
//! over the windows whose center pixel is masked.

use std::fmt::Write as _;
use std::path::Path;

use crate::colmap::{CameraIntrinsics, PosedImage};
use crate::geometry::{projected_aabb, Aabb, Camera};
use crate::kv::format_sig;
use crate::scalar::Real;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("image is {found:?}, expected {expected:?}")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("mask selects no pixel")]
    EmptyMask,
    #[error("no masked pixel is the center of a full {SSIM_WINDOW}x{SSIM_WINDOW} window")]
    NoMaskedWindow,
    #[error("image {width}x{height} is smaller than the SSIM window")]
    TooSmall { width: usize, height: usize },
    #[error("expected {expected} samples, found {found}")]
    SampleCount { expected: usize, found: usize },
    #[error("sample {index} is {value}, outside [0, 1]")]
    SampleRange { index: usize, value: f64 },
    #[error("{path}: {source}")]
    Png { path: String, source: image::ImageError },
}

/// Row-major RGB image with unit-range samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage<T> {
    width: usize,
    height: usize,
    samples: Vec<T>,
}

impl<T: Real> RasterImage<T> {
    pub fn new(width: usize, height: usize, samples: Vec<T>) -> Result<Self, EvalError> {
        if samples.len() != width * height * 3 {
            return Err(EvalError::SampleCount { expected: width * height * 3, found: samples.len() });
        }
        if let Some((index, v)) = samples.iter().enumerate().find(|(_, v)| !(**v >= T::zero() && **v <= T::one())) {
            return Err(EvalError::SampleRange { index, value: v.to_f64_lossy() });
        }
        Ok(Self { width, height, samples })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, samples: vec![value; width * height * 3] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.samples[(y * self.width + x) * 3 + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        self.samples[(y * self.width + x) * 3 + c] = v;
    }
}

/// Loads an 8- or 16-bit PNG; alpha is dropped.
pub fn load_png(path: &Path) -> Result<RasterImage<f64>, EvalError> {
    let err = |source| EvalError::Png { path: path.display().to_string(), source };
    let img = image::ImageReader::open(path)
        .map_err(|e| err(image::ImageError::IoError(e)))?
        .with_guessed_format()
        .map_err(|e| err(image::ImageError::IoError(e)))?
        .decode()
        .map_err(err)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let samples: Vec<f64> = match img.color().bytes_per_pixel() / img.color().channel_count() {
        1 => img.to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        _ => img.to_rgb16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    Ok(RasterImage { width: w, height: h, samples })
}

/// One flag per pixel, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Pixels whose center lies in the projected box polygon.
pub fn mask_from_aabb(
    intrinsics: &CameraIntrinsics,
    pose: &PosedImage,
    bounds: &Aabb<f64>,
    width: usize,
    height: usize,
) -> RoiMask {
    let mut mask = RoiMask::new(width, height);
    let camera: Camera<f64> = Camera::from_colmap(intrinsics, pose);
    let Some(poly) = projected_aabb(&camera, bounds) else { return mask };
    let (x0, y0, x1, y1) = poly.bounds();
    let lo = |v: f64| (v - 0.5).floor().max(0.0) as usize;
    let (xa, ya) = (lo(x0), lo(y0));
    let xb = ((x1 - 0.5).ceil().max(0.0) as usize).min(width.saturating_sub(1));
    let yb = ((y1 - 0.5).ceil().max(0.0) as usize).min(height.saturating_sub(1));
    for y in ya..=yb.min(height.saturating_sub(1)) {
        for x in xa..=xb {
            if poly.contains([x as f64 + 0.5, y as f64 + 0.5]) {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

fn check_dims<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, mask: &RoiMask) -> Result<(), EvalError> {
    let expected = (a.width, a.height);
    for found in [(b.width, b.height), (mask.width, mask.height)] {
        if found != expected {
            return Err(EvalError::DimensionMismatch { expected, found });
        }
    }
    Ok(())
}

pub fn masked_psnr<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, mask: &RoiMask) -> Result<T, EvalError> {
    check_dims(a, b, mask)?;
    let mut sum = T::zero();
    let mut n = 0usize;
    for (p, _) in mask.bits.iter().enumerate().filter(|(_, m)| **m) {
        for c in 0..3 {
            let d = a.samples[p * 3 + c] - b.samples[p * 3 + c];
            sum += d * d;
        }
        n += 3;
    }
    if n == 0 {
        return Err(EvalError::EmptyMask);
    }
    let mse = sum / T::lit(n as f64);
    let cap = T::lit(PSNR_CAP_DB);
    if mse <= T::zero() {
        return Ok(cap);
    }
    Ok((T::lit(10.0) * (T::one() / mse).log10()).min(cap))
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn gaussian_taps<T: Real>() -> [T; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let raw: [f64; SSIM_WINDOW] =
        std::array::from_fn(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
    let sum: f64 = raw.iter().sum();
    raw.map(|v| T::lit(v / sum))
}

/// Separable valid-mode filter of one channel; output is (w-10) x (h-10).
fn blur<T: Real>(plane: &[T], w: usize, h: usize, taps: &[T; SSIM_WINDOW]) -> Vec<T> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![T::zero(); ow * h];
    for y in 0..h {
        let line = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + SSIM_WINDOW]).fold(T::zero(), |s, (t, v)| s + *t * *v);
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).fold(T::zero(), |s, k| s + taps[k] * rows[(y + k) * ow + x]);
        }
    }
    out
}

/// Mean SSIM over the windows whose center pixel is masked. Window
/// statistics weigh only masked pixels, with the Gaussian weights
/// renormalized over them, so unmasked pixels never contribute. Under a
/// full mask this is the textbook valid-window SSIM.
pub fn masked_ssim<T: Real>(a: &RasterImage<T>, b: &RasterImage<T>, mask: &RoiMask) -> Result<T, EvalError> {
    check_dims(a, b, mask)?;
    let (w, h) = (a.width, a.height);
    if mask.count() == 0 {
        return Err(EvalError::EmptyMask);
    }
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(EvalError::TooSmall { width: w, height: h });
    }
    let half = SSIM_WINDOW / 2;
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let centers: Vec<usize> = (0..ow * oh).filter(|&i| mask.get(i % ow + half, i / ow + half)).collect();
    if centers.is_empty() {
        return Err(EvalError::NoMaskedWindow);
    }
    let taps = gaussian_taps::<T>();
    let (c1, c2) = (T::lit(SSIM_C1), T::lit(SSIM_C2));
    let two = T::lit(2.0);
    let m: Vec<T> = mask.bits.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    let norm = blur(&m, w, h, &taps);
    let mut total = T::zero();
    for c in 0..3 {
        let channel = |img: &RasterImage<T>| -> Vec<T> {
            img.samples.iter().skip(c).step_by(3).zip(&m).map(|(v, k)| *v * *k).collect()
        };
        let (pa, pb) = (channel(a), channel(b));
        let prod = |p: &[T], q: &[T]| p.iter().zip(q).map(|(x, y)| *x * *y).collect::<Vec<T>>();
        let mu_a = blur(&pa, w, h, &taps);
        let mu_b = blur(&pb, w, h, &taps);
        let e_aa = blur(&prod(&pa, &pa), w, h, &taps);
        let e_bb = blur(&prod(&pb, &pb), w, h, &taps);
        let e_ab = blur(&prod(&pa, &pb), w, h, &taps);
        for &i in &centers {
            let n = norm[i];
            let (ma, mb) = (mu_a[i] / n, mu_b[i] / n);
            let va = e_aa[i] / n - ma * ma;
            let vb = e_bb[i] / n - mb * mb;
            let cov = e_ab[i] / n - ma * mb;
            total += ((two * ma * mb + c1) * (two * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / T::lit((3 * centers.len()) as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub roi_id: String,
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub masked_pixel_count: usize,
}

/// Per-image rows followed by one `mean` row per ROI, in first-seen order.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("roi_id,image,psnr_db,ssim,masked_pixel_count\n");
    let mut rois: Vec<&str> = Vec::new();
    for r in rows {
        if !rois.contains(&r.roi_id.as_str()) {
            rois.push(&r.roi_id);
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.roi_id,
            r.image,
            format_sig(r.psnr_db, 9),
            format_sig(r.ssim, 9),
            r.masked_pixel_count
        );
    }
    for roi in rois {
        let sel: Vec<&MetricRow> = rows.iter().filter(|r| r.roi_id == roi).collect();
        let n = sel.len() as f64;
        let psnr = sel.iter().map(|r| r.psnr_db).sum::<f64>() / n;
        let ssim = sel.iter().map(|r| r.ssim).sum::<f64>() / n;
        let px: usize = sel.iter().map(|r| r.masked_pixel_count).sum();
        let _ = writeln!(out, "{roi},mean,{},{},{px}", format_sig(psnr, 9), format_sig(ssim, 9));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colmap::{CameraIntrinsics, CameraModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RasterImage<f64> {
        RasterImage::new(w, h, (0..w * h * 3).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    /// Direct per-window SSIM with the 2-D Gaussian weights restricted to
    /// masked pixels.
    fn brute_ssim(a: &RasterImage<f64>, b: &RasterImage<f64>, mask: &RoiMask) -> f64 {
        let taps = gaussian_taps::<f64>();
        let (mut total, mut n) = (0.0, 0usize);
        for cy in 5..a.height() - 5 {
            for cx in 5..a.width() - 5 {
                if !mask.get(cx, cy) {
                    continue;
                }
                for c in 0..3 {
                    let (mut ma, mut mb, mut aa, mut bb, mut ab, mut sw) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                    for dy in 0..11 {
                        for dx in 0..11 {
                            if !mask.get(cx + dx - 5, cy + dy - 5) {
                                continue;
                            }
                            let wgt = taps[dx] * taps[dy];
                            sw += wgt;
                            let x = a.get(cx + dx - 5, cy + dy - 5, c);
                            let y = b.get(cx + dx - 5, cy + dy - 5, c);
                            ma += wgt * x;
                            mb += wgt * y;
                            aa += wgt * x * x;
                            bb += wgt * y * y;
                            ab += wgt * x * y;
                        }
                    }
                    let (ma, mb, aa, bb, ab) = (ma / sw, mb / sw, aa / sw, bb / sw, ab / sw);
                    let (va, vb, cov) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
                    total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                    n += 1;
                }
            }
        }
        total / n as f64
    }

    #[test]
    fn psnr_identity_hits_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_image(8, 8, &mut rng);
        let mut b = random_image(8, 8, &mut rng);
        let mut mask = RoiMask::new(8, 8);
        mask.set(2, 3, true);
        for c in 0..3 {
            b.set(2, 3, c, a.get(2, 3, c));
        }
        assert_eq!(masked_psnr(&a, &b, &mask).unwrap(), 100.0);
    }

    #[test]
    fn psnr_two_pixels() {
        let a = RasterImage::filled(4, 4, 0.5_f64);
        let mut b = a.clone();
        let mut mask = RoiMask::new(4, 4);
        for (x, y) in [(0, 0), (3, 2)] {
            mask.set(x, y, true);
            for c in 0..3 {
                b.set(x, y, c, 0.6);
            }
        }
        b.set(1, 1, 0, 0.0);
        assert!((masked_psnr(&a, &b, &mask).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_image(16, 16, &mut rng);
        let b = random_image(16, 16, &mut rng);
        let mut mask = RoiMask::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                mask.set(x, y, rng.gen_bool(0.4));
            }
        }
        let (mut s, mut n) = (0.0, 0.0);
        for y in 0..16 {
            for x in 0..16 {
                if mask.get(x, y) {
                    for c in 0..3 {
                        s += (a.get(x, y, c) - b.get(x, y, c)).powi(2);
                        n += 1.0;
                    }
                }
            }
        }
        let expected = 10.0 * (n / s).log10();
        assert!((masked_psnr(&a, &b, &mask).unwrap() - expected).abs() < 1e-9);
        assert_eq!(masked_psnr(&a, &b, &mask).unwrap(), masked_psnr(&b, &a, &mask).unwrap());
    }

    #[test]
    fn metric_errors() {
        let a = RasterImage::filled(12, 12, 0.5_f64);
        assert!(matches!(masked_psnr(&a, &a, &RoiMask::new(12, 12)), Err(EvalError::EmptyMask)));
        assert!(matches!(masked_ssim(&a, &a, &RoiMask::new(12, 12)), Err(EvalError::EmptyMask)));
        let small = RasterImage::filled(8, 8, 0.5_f64);
        assert!(matches!(masked_ssim(&small, &small, &RoiMask::full(8, 8)), Err(EvalError::TooSmall { .. })));
        assert!(matches!(masked_psnr(&a, &small, &RoiMask::full(12, 12)), Err(EvalError::DimensionMismatch { .. })));
        let mut corner = RoiMask::new(12, 12);
        corner.set(0, 0, true);
        assert!(matches!(masked_ssim(&a, &a, &corner), Err(EvalError::NoMaskedWindow)));
        assert!(RasterImage::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
    }

    #[test]
    fn ssim_identity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(20, 20, &mut rng);
        assert!((masked_ssim(&a, &a, &RoiMask::full(20, 20)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        let a = RasterImage::filled(16, 16, 0.5_f64);
        let b = RasterImage::filled(16, 16, 0.6);
        let expected = (2.0 * 0.5 * 0.6 + SSIM_C1) / (0.25 + 0.36 + SSIM_C1);
        let got = masked_ssim(&a, &b, &RoiMask::full(16, 16)).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got}");
        assert!((got - 0.98361).abs() < 1e-5);
    }

    #[test]
    fn ssim_matches_windowed_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_image(32, 32, &mut rng);
        let b = random_image(32, 32, &mut rng);
        let full = RoiMask::full(32, 32);
        assert!((masked_ssim(&a, &b, &full).unwrap() - brute_ssim(&a, &b, &full)).abs() < 1e-6);
        let mut part = RoiMask::new(32, 32);
        for y in 4..20 {
            for x in 9..30 {
                part.set(x, y, true);
            }
        }
        assert!((masked_ssim(&a, &b, &part).unwrap() - brute_ssim(&a, &b, &part)).abs() < 1e-6);
        assert!((masked_ssim(&a, &b, &part).unwrap() - masked_ssim(&b, &a, &part).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn changes_outside_mask_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_image(24, 24, &mut rng);
        let b = random_image(24, 24, &mut rng);
        let mut mask = RoiMask::new(24, 24);
        for y in 5..19 {
            for x in 5..19 {
                mask.set(x, y, true);
            }
        }
        let mut b2 = b.clone();
        for c in 0..3 {
            b2.set(0, 0, c, 0.0);
            b2.set(4, 12, c, 1.0);
            b2.set(19, 5, c, 0.25);
        }
        assert_eq!(masked_psnr(&a, &b, &mask).unwrap(), masked_psnr(&a, &b2, &mask).unwrap());
        assert_eq!(masked_ssim(&a, &b, &mask).unwrap(), masked_ssim(&a, &b2, &mask).unwrap());
        let s1 = masked_ssim(&a, &b, &RoiMask::full(24, 24)).unwrap();
        let s2 = masked_ssim(&a, &b2, &RoiMask::full(24, 24)).unwrap();
        assert_ne!(s1, s2);
    }

    #[test]
    fn f32_metrics_track_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_image(16, 16, &mut rng);
        let b = random_image(16, 16, &mut rng);
        let cast = |im: &RasterImage<f64>| {
            RasterImage::<f32>::new(16, 16, im.samples().iter().map(|v| *v as f32).collect()).unwrap()
        };
        let full = RoiMask::full(16, 16);
        let p64 = masked_psnr(&a, &b, &full).unwrap();
        let p32 = masked_psnr(&cast(&a), &cast(&b), &full).unwrap();
        assert!((p64 - p32 as f64).abs() < 1e-3);
        let s64 = masked_ssim(&a, &b, &full).unwrap();
        let s32 = masked_ssim(&cast(&a), &cast(&b), &full).unwrap();
        assert!((s64 - s32 as f64).abs() < 1e-4);
    }

    fn pinhole100() -> CameraIntrinsics {
        CameraIntrinsics {
            camera_id: 1,
            model: CameraModel::Pinhole,
            width: 100,
            height: 100,
            params: vec![100.0, 100.0, 50.0, 50.0],
        }
    }

    fn identity_pose() -> PosedImage {
        PosedImage {
            image_id: 1,
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0; 3],
            camera_id: 1,
            name: "a.png".into(),
            observations: vec![],
        }
    }

    #[test]
    fn mask_behind_camera_is_clear() {
        let b = Aabb::from_arrays([-0.5, -0.5, -10.5], [0.5, 0.5, -9.5]).unwrap();
        assert_eq!(mask_from_aabb(&pinhole100(), &identity_pose(), &b, 100, 100).count(), 0);
    }

    fn oracle_mask(b: &Aabb<f64>) -> RoiMask {
        let cam: Camera<f64> = Camera::from_colmap(&pinhole100(), &identity_pose());
        let poly = projected_aabb(&cam, b).unwrap();
        let mut m = RoiMask::new(100, 100);
        for y in 0..100 {
            for x in 0..100 {
                m.set(x, y, poly.contains([x as f64 + 0.5, y as f64 + 0.5]));
            }
        }
        m
    }

    #[test]
    fn depth_ten_box_mask_area() {
        let b = Aabb::from_arrays([-0.5, -0.5, 9.5], [0.5, 0.5, 10.5]).unwrap();
        let m = mask_from_aabb(&pinhole100(), &identity_pose(), &b, 100, 100);
        let side = 100.0 / 9.5;
        assert!((m.count() as f64 - side * side).abs() <= 4.0 * side);
        assert_eq!(m, oracle_mask(&b));
    }

    #[test]
    fn mask_beyond_borders_matches_clipped_polygon() {
        let b = Aabb::from_arrays([0.0, -0.5, 1.5], [1.0, 0.5, 2.5]).unwrap();
        let m = mask_from_aabb(&pinhole100(), &identity_pose(), &b, 100, 100);
        assert_eq!(m, oracle_mask(&b));
        assert!(m.get(99, 50));
    }

    #[test]
    fn csv_has_mean_rows() {
        let rows = vec![
            MetricRow { roi_id: "a".into(), image: "x.png".into(), psnr_db: 30.0, ssim: 0.9, masked_pixel_count: 10 },
            MetricRow { roi_id: "a".into(), image: "y.png".into(), psnr_db: 20.0, ssim: 0.7, masked_pixel_count: 6 },
        ];
        assert_eq!(
            metrics_csv(&rows),
            "roi_id,image,psnr_db,ssim,masked_pixel_count\na,x.png,30,0.9,10\na,y.png,20,0.7,6\na,mean,25,0.8,16\n"
        );
    }
}
