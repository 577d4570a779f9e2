//! Pipeline configuration: flat `section.key: value` lines.
//!
//! ```text
//! model.path: sparse/0
//! run.seed: 7
//! run.test_fraction: 0.0626865672
//! run.retain_ratio: 0.5
//! roi.bike.min: -1 -1 0
//! roi.bike.max: 1 1 1.5
//! roi.bike.select_count: 150
//! compose.scene: scene.ply
//! compose.object.bike: bike.ply
//! evaluate.rendered: renders
//! evaluate.ground_truth: gt
//! synth.cameras: 40
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::colmap::Format;
use crate::geometry::Aabb;
use crate::kv::KvDoc;
use crate::selection::{FeatureMode, RoiSpec, ScoreWeights};

pub const DEFAULT_TEST_FRACTION: f64 = 0.125;
pub const DEFAULT_RETAIN_RATIO: f64 = 0.5;

const ROI_FIELDS: [&str; 6] = ["min", "max", "select_count", "feature_mode", "voxel_grid", "weights"];

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub base_dir: PathBuf,
    pub model_path: Option<PathBuf>,
    pub model_format: Option<Format>,
    pub seed: u64,
    pub test_fraction: f64,
    pub retain_ratio: f64,
    pub output: Option<PathBuf>,
    pub beta: f64,
    /// Declaration order.
    pub rois: Vec<RoiSpec>,
    pub selections_dir: Option<PathBuf>,
    pub compose_scene: Option<PathBuf>,
    pub compose_objects: BTreeMap<String, PathBuf>,
    pub compose_output: String,
    pub rendered_dir: Option<PathBuf>,
    pub ground_truth_dir: Option<PathBuf>,
    /// Keys under `synth.`, prefix stripped.
    pub synth: KvDoc,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let doc = KvDoc::parse(text)?;
        let path = |key: &str| doc.get(key).map(|v| base_dir.join(v));
        let seed = doc.parse_or("run.seed", 0u64)?;
        let model_format = match doc.get("model.format") {
            None => None,
            Some("binary") => Some(Format::Binary),
            Some("text") => Some(Format::Text),
            Some(other) => bail!("model.format must be binary or text, found {other:?}"),
        };
        let mut cfg = Self {
            base_dir: base_dir.to_path_buf(),
            model_path: path("model.path"),
            model_format,
            seed,
            test_fraction: doc.parse_or("run.test_fraction", DEFAULT_TEST_FRACTION)?,
            retain_ratio: doc.parse_or("run.retain_ratio", DEFAULT_RETAIN_RATIO)?,
            output: path("run.output"),
            beta: doc.parse_or("select.beta", 1.0)?,
            rois: Vec::new(),
            selections_dir: path("partition.selections"),
            compose_scene: path("compose.scene"),
            compose_objects: BTreeMap::new(),
            compose_output: doc.get("compose.output").unwrap_or("merged.ply").to_string(),
            rendered_dir: path("evaluate.rendered"),
            ground_truth_dir: path("evaluate.ground_truth"),
            synth: doc.section("synth"),
        };
        if !(cfg.beta >= 0.0) {
            bail!("select.beta must be non-negative");
        }
        let objects = doc.section("compose.object");
        for id in objects.keys() {
            cfg.compose_objects.insert(id.to_string(), base_dir.join(objects.require(id)?));
        }
        cfg.rois = parse_rois(&doc, seed)?;
        for id in cfg.compose_objects.keys() {
            if cfg.roi(id).is_none() {
                bail!("compose.object.{id} names an undeclared ROI");
            }
        }
        Ok(cfg)
    }

    pub fn roi(&self, id: &str) -> Option<&RoiSpec> {
        self.rois.iter().find(|r| r.roi_id == id)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        for r in &mut self.rois {
            r.seed = seed;
        }
    }
}

fn parse_rois(doc: &KvDoc, seed: u64) -> Result<Vec<RoiSpec>> {
    let section = doc.section("roi");
    let mut order: Vec<String> = Vec::new();
    for key in section.keys() {
        let Some((id, field)) = key.rsplit_once('.') else { bail!("roi.{key}: expected roi.<id>.<field>") };
        if !ROI_FIELDS.contains(&field) {
            bail!("roi.{key}: unknown field {field:?}");
        }
        if !order.iter().any(|o| o == id) {
            order.push(id.to_string());
        }
    }
    let mut rois = Vec::with_capacity(order.len());
    for id in order {
        let key = |f: &str| format!("{id}.{f}");
        let missing = |f: &str| anyhow::anyhow!("roi.{id}.{f} is required");
        let min = section.parse_array::<f64, 3>(&key("min"))?.ok_or_else(|| missing("min"))?;
        let max = section.parse_array::<f64, 3>(&key("max"))?.ok_or_else(|| missing("max"))?;
        let bounds = Aabb::from_arrays(min, max).with_context(|| format!("roi.{id}"))?;
        let count = section.parse_req::<usize>(&key("select_count")).map_err(|_| missing("select_count"))?;
        let mut spec = RoiSpec::new(id.clone(), bounds, count);
        spec.seed = seed;
        if let Some(mode) = section.get(&key("feature_mode")) {
            spec.feature_mode = mode.parse::<FeatureMode>()?;
        }
        spec.voxel_grid = section.parse_or(&key("voxel_grid"), spec.voxel_grid)?;
        if let Some([d, o, a]) = section.parse_array::<f64, 3>(&key("weights"))? {
            spec.weights = ScoreWeights::new(d, o, a)?;
        }
        spec.validate()?;
        rois.push(spec);
    }
    Ok(rois)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "model.path: sparse\nrun.seed: 3\nroi.a.min: 0 0 0\nroi.a.max: 1 1 1\nroi.a.select_count: 4\n\
        roi.b.c.min: 2 0 0\nroi.b.c.max: 3 1 1\nroi.b.c.select_count: 2\nroi.b.c.feature_mode: six\n\
        compose.object.a: a.ply\nsynth.cameras: 8\n";

    #[test]
    fn parses_rois_in_declaration_order() {
        let cfg = PipelineConfig::parse(TEXT, Path::new("/data")).unwrap();
        let ids: Vec<&str> = cfg.rois.iter().map(|r| r.roi_id.as_str()).collect();
        assert_eq!(ids, ["a", "b.c"]);
        assert_eq!(cfg.rois[1].feature_mode, FeatureMode::Six);
        assert_eq!(cfg.rois[0].seed, 3);
        assert_eq!(cfg.model_path.as_deref(), Some(Path::new("/data/sparse")));
        assert_eq!(cfg.compose_objects["a"], Path::new("/data/a.ply"));
        assert_eq!(cfg.synth.get("cameras"), Some("8"));
        assert_eq!(cfg.test_fraction, DEFAULT_TEST_FRACTION);
    }

    #[test]
    fn rejects_bad_declarations() {
        let base = Path::new(".");
        assert!(PipelineConfig::parse("roi.a.min: 0 0 0\nroi.a.max: 1 1 1\n", base).is_err());
        assert!(PipelineConfig::parse("roi.a.colour: red\n", base).is_err());
        assert!(PipelineConfig::parse("roi.a.min: 0 0 0\nroi.a.max: 1 1 1\nroi.a.min: 0 0 0\n", base).is_err());
        assert!(PipelineConfig::parse("compose.object.z: z.ply\n", base).is_err());
        let weights = "roi.a.min: 0 0 0\nroi.a.max: 1 1 1\nroi.a.select_count: 1\nroi.a.weights: 0.5 0.5 0.5\n";
        assert!(PipelineConfig::parse(weights, base).is_err());
    }
}
