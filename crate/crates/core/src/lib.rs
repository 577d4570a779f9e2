//! Toolkit for object-focused Gaussian Splatting pipelines.
//!
//! The crate covers the CPU side of region-of-interest reconstruction:
//!
//! * [`colmap`]: COLMAP sparse model parsing and serialization.
//! * [`splat`]: 3DGS checkpoint PLY reading and writing.
//! * [`geometry`]: boxes, projection, projected-box polygons, track visibility.
//! * [`selection`]: static ranking, coverage scoring and surrogate-guided greedy view selection.
//! * [`gp`]: squared-exponential Gaussian-process regression.
//! * [`partition`]: test hold-out, train splits and trainer manifests.
//! * [`composition`]: box-based replacement of scene Gaussians by object Gaussians.
//! * [`evaluation`]: box-masked PSNR and SSIM.
//! * [`synthetic`]: deterministic synthetic scenes and splat sets.
//! * [`cli`]: the `roikit` command-line pipeline.
//!
//! Numeric modules are generic over [`Real`]; the aliases below fix them to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod colmap;
pub mod composition;
pub mod evaluation;
pub mod geometry;
pub mod gp;
pub mod kv;
pub mod linalg;
pub mod partition;
pub mod scalar;
pub mod selection;
pub mod splat;
pub mod synthetic;

pub use scalar::Real;

pub type Vec3 = linalg::Vec3<f64>;
pub type Aabb = geometry::Aabb<f64>;
pub type Aabb32 = geometry::Aabb<f32>;
pub type Camera = geometry::Camera<f64>;
pub type ImagePolygon = geometry::ImagePolygon<f64>;
pub type GpPosterior = gp::GpPosterior<f64>;
pub type GpPosterior32 = gp::GpPosterior<f32>;
pub type RasterImage = evaluation::RasterImage<f64>;
pub type RasterImage32 = evaluation::RasterImage<f32>;
