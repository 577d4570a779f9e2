use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::{Cli, Command, Mode};
use crate::colmap::{self, Format, ImageId, SfmModel};
use crate::composition::{compose, OverlapPolicy, RoiSplats};
use crate::evaluation::{load_png, mask_from_aabb, masked_psnr, masked_ssim, metrics_csv, MetricRow};
use crate::geometry::{point_in_aabb, roi_visibility};
use crate::kv::{KvDoc, KvWriter};
use crate::linalg::Vec3;
use crate::partition::{build_partition, emit_manifests, hold_out_test, ManifestPaths};
use crate::selection::{
    greedy_over, select_static, selection_list, trace_csv, CandidatePool, FeatureMode, GreedyConfig, RoiSpec,
    SelectionResult,
};
use crate::splat::{read_splat_file, write_splats_to};
use crate::synthetic::{generate, generate_splats, SceneRecipe};

/// Invocation problems: exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Model integrity violations, one message each.
#[derive(Debug, thiserror::Error)]
#[error("model failed validation with {} violations", .0.len())]
pub struct InvalidModel(pub Vec<String>);

/// Writes through a temporary sibling, then renames over `path`.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let name = path.file_name().with_context(|| format!("bad output path {}", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    let mut w = BufWriter::new(file);
    let written = fill(&mut w).and_then(|()| Ok(w.flush()?));
    if let Err(e) = written {
        let _ = fs::remove_file(&tmp);
        return Err(e.context(format!("writing {}", path.display())));
    }
    drop(w);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(name), |w| Ok(w.write_all(text.as_bytes())?))
}

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
    seed_override: Option<u64>,
    parallel: bool,
}

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| UsageError("--config PATH is required".into()))?;
    if cli.threads == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| UsageError("no output directory: pass --out or set run.output".into()))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = Ctx { cfg, out, seed_override: cli.seed, parallel: cli.threads > 1 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build()?;
    pool.install(|| match &cli.command {
        Command::Inspect => inspect(&ctx),
        Command::Select { mode } => select(&ctx, *mode),
        Command::Partition => partition(&ctx),
        Command::Compose { allow_overlap } => compose_cmd(&ctx, *allow_overlap),
        Command::Evaluate => evaluate(&ctx),
        Command::Synth => synth(&ctx),
    })
}

fn load_model(cfg: &PipelineConfig) -> Result<SfmModel> {
    let dir = cfg.model_path.as_ref().ok_or_else(|| UsageError("model.path is not set".into()))?;
    let format = match cfg.model_format.or_else(|| colmap::detect_format(dir)) {
        Some(f) => f,
        None => bail!("no cameras/images/points3D files in {}", dir.display()),
    };
    let model = colmap::read_model_dir_unchecked(dir, format).with_context(|| format!("model {}", dir.display()))?;
    let violations = colmap::validate(&model);
    let hard: Vec<String> = violations.iter().filter(|v| v.is_hard()).map(ToString::to_string).collect();
    if !hard.is_empty() {
        return Err(InvalidModel(hard).into());
    }
    for v in violations {
        eprintln!("warning: {v}");
    }
    Ok(model)
}

/// Test hold-out over every registered image, by ascending id.
fn split(model: &SfmModel, cfg: &PipelineConfig) -> Result<(Vec<ImageId>, Vec<ImageId>, Vec<ImageId>)> {
    let all: Vec<ImageId> = model.images.keys().copied().collect();
    let (test, rest) = hold_out_test(&all, cfg.test_fraction)?;
    Ok((all, test, rest))
}

fn candidates(model: &SfmModel, roi: &RoiSpec, rest: &[ImageId]) -> (usize, Vec<ImageId>) {
    let visible = roi_visibility(model, &roi.bounds);
    let pool = rest.iter().copied().filter(|id| visible.contains_key(id)).collect();
    (visible.len(), pool)
}

fn inspect(ctx: &Ctx) -> Result<()> {
    let model = load_model(&ctx.cfg)?;
    let (all, test, rest) = split(&model, &ctx.cfg)?;
    let mut w = KvWriter::new();
    w.entry("cameras", model.cameras.len())
        .entry("images", all.len())
        .entry("points", model.points.len())
        .entry("test_images", test.len())
        .entry("non_test_images", rest.len());
    for roi in &ctx.cfg.rois {
        let (visible, pool) = candidates(&model, roi, &rest);
        let inside = model.points.values().filter(|p| point_in_aabb(&Vec3(p.position), &roi.bounds)).count();
        if visible == 0 {
            eprintln!("warning: ROI {} is seen by no image", roi.roi_id);
        }
        let id = &roi.roi_id;
        w.entry(&format!("roi.{id}.visible_images"), visible)
            .entry(&format!("roi.{id}.in_box_points"), inside)
            .entry(&format!("roi.{id}.candidate_pool"), pool.len());
    }
    let report = w.finish();
    print!("{report}");
    write_text(&ctx.out, "inspect.txt", &report)
}

fn select(ctx: &Ctx, mode: Option<Mode>) -> Result<()> {
    let model = load_model(&ctx.cfg)?;
    let (_, _, rest) = split(&model, &ctx.cfg)?;
    let config = GreedyConfig { beta: ctx.cfg.beta, parallel: ctx.parallel, ..GreedyConfig::default() };
    let run = |roi: &RoiSpec| -> Result<SelectionResult> {
        let mut spec = roi.clone();
        match mode {
            Some(Mode::Gp6) => spec.feature_mode = FeatureMode::Six,
            Some(Mode::Gp9) => spec.feature_mode = FeatureMode::Nine,
            Some(Mode::Static) | None => {}
        }
        let (_, ids) = candidates(&model, &spec, &rest);
        let pool = CandidatePool::build(&model, &spec, &ids).with_context(|| format!("ROI {}", spec.roi_id))?;
        if mode == Some(Mode::Static) {
            Ok(select_static(&pool, spec.select_count))
        } else {
            Ok(greedy_over(&pool, spec.select_count, &config).with_context(|| format!("ROI {}", spec.roi_id))?)
        }
    };
    let results: Vec<Result<SelectionResult>> =
        if ctx.parallel { ctx.cfg.rois.par_iter().map(run).collect() } else { ctx.cfg.rois.iter().map(run).collect() };
    for (roi, result) in ctx.cfg.rois.iter().zip(results) {
        let r = result?;
        if r.truncated {
            eprintln!(
                "warning: ROI {} has {} candidates, fewer than the {} requested",
                roi.roi_id,
                r.ordered_ids.len(),
                roi.select_count
            );
        }
        write_text(&ctx.out, &format!("selection_{}.txt", roi.roi_id), &selection_list(&r))?;
        write_text(&ctx.out, &format!("trace_{}.csv", roi.roi_id), &trace_csv(&r))?;
    }
    Ok(())
}

fn names(model: &SfmModel, ids: &[ImageId]) -> String {
    ids.iter().map(|id| format!("{}\n", model.images[id].name)).collect()
}

fn read_selection(model: &SfmModel, path: &Path) -> Result<Vec<ImageId>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading selection {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|name| {
            model
                .image_by_name(name.trim())
                .map(|i| i.image_id)
                .with_context(|| format!("{}: unknown image {name:?}", path.display()))
        })
        .collect()
}

fn partition(ctx: &Ctx) -> Result<()> {
    let model = load_model(&ctx.cfg)?;
    let (all, test, _) = split(&model, &ctx.cfg)?;
    let dir = ctx.cfg.selections_dir.as_deref().unwrap_or(&ctx.out);
    let selections = ctx
        .cfg
        .rois
        .iter()
        .map(|r| Ok((r.roi_id.clone(), read_selection(&model, &dir.join(format!("selection_{}.txt", r.roi_id)))?)))
        .collect::<Result<Vec<_>>>()?;
    let plan = build_partition(&all, &test, &selections, ctx.cfg.retain_ratio)?;
    let boxes: BTreeMap<String, _> = ctx.cfg.rois.iter().map(|r| (r.roi_id.clone(), r.bounds)).collect();
    let paths = ManifestPaths::for_rois(ctx.cfg.rois.iter().map(|r| r.roi_id.as_str()));
    let manifests = emit_manifests(&plan, &boxes, &paths)?;
    write_text(&ctx.out, "test.txt", &names(&model, &plan.test_ids))?;
    write_text(&ctx.out, &paths.scene_images, &names(&model, &plan.scene_train_ids))?;
    for roi in &plan.rois {
        write_text(&ctx.out, &paths.objects[&roi.roi_id].1, &names(&model, &roi.object_train_ids))?;
    }
    for m in &manifests {
        write_text(&ctx.out, &m.manifest_file, &m.to_text())?;
    }
    Ok(())
}

fn compose_cmd(ctx: &Ctx, allow_overlap: bool) -> Result<()> {
    let cfg = &ctx.cfg;
    let scene_path = cfg.compose_scene.as_ref().ok_or_else(|| UsageError("compose.scene is not set".into()))?;
    let scene = read_splat_file(scene_path).with_context(|| format!("reading {}", scene_path.display()))?;
    let mut objects = Vec::with_capacity(cfg.rois.len());
    for roi in &cfg.rois {
        let path = cfg
            .compose_objects
            .get(&roi.roi_id)
            .ok_or_else(|| UsageError(format!("compose.object.{} is not set", roi.roi_id)))?;
        let splats = read_splat_file(path).with_context(|| format!("reading {}", path.display()))?;
        objects.push(RoiSplats { roi_id: roi.roi_id.clone(), splats, bounds: roi.bounds });
    }
    let policy = if allow_overlap { OverlapPolicy::FirstWins } else { OverlapPolicy::Reject };
    let (merged, report) = compose(&scene, &objects, policy)?;
    drop((scene, objects));
    write_atomic(&ctx.out.join(&cfg.compose_output), |w| Ok(write_splats_to(&merged, w)?))?;
    let text = report.to_text();
    print!("{text}");
    write_text(&ctx.out, "composition.txt", &text)
}

/// `name` itself, else its stem with a `.png` extension.
fn find_image(dir: &Path, name: &str) -> Option<PathBuf> {
    let direct = dir.join(name);
    if direct.is_file() {
        return Some(direct);
    }
    let png = direct.with_extension("png");
    png.is_file().then_some(png)
}

fn evaluate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let rendered = cfg.rendered_dir.as_ref().ok_or_else(|| UsageError("evaluate.rendered is not set".into()))?;
    let truth = cfg.ground_truth_dir.as_ref().ok_or_else(|| UsageError("evaluate.ground_truth is not set".into()))?;
    let model = load_model(cfg)?;
    let (_, test, _) = split(&model, cfg)?;
    let mut jobs = Vec::new();
    for roi in &cfg.rois {
        for id in &test {
            let image = &model.images[id];
            let cam = model.camera_of(image).expect("validated model");
            let mask = mask_from_aabb(cam, image, &roi.bounds, cam.width as usize, cam.height as usize);
            if mask.count() == 0 {
                continue;
            }
            let missing = || anyhow::anyhow!("missing pair for image {:?}", image.name);
            let a = find_image(rendered, &image.name).ok_or_else(missing)?;
            let b = find_image(truth, &image.name).ok_or_else(missing)?;
            jobs.push((roi.roi_id.clone(), image.name.clone(), a, b, mask));
        }
        if !jobs.iter().any(|j| j.0 == roi.roi_id) {
            eprintln!("warning: ROI {} projects into no test image", roi.roi_id);
        }
    }
    let measure = |(roi_id, image, a, b, mask): &(String, String, PathBuf, PathBuf, _)| -> Result<MetricRow> {
        let (ra, rb) = (load_png(a)?, load_png(b)?);
        let context = || format!("image {image:?}");
        Ok(MetricRow {
            roi_id: roi_id.clone(),
            image: image.clone(),
            psnr_db: masked_psnr(&ra, &rb, mask).with_context(context)?,
            ssim: masked_ssim(&ra, &rb, mask).with_context(context)?,
            masked_pixel_count: mask.count(),
        })
    };
    let rows: Result<Vec<MetricRow>> =
        if ctx.parallel { jobs.par_iter().map(measure).collect() } else { jobs.iter().map(measure).collect() };
    let table = metrics_csv(&rows?);
    print!("{table}");
    write_text(&ctx.out, "metrics.csv", &table)
}

fn synth(ctx: &Ctx) -> Result<()> {
    let doc: &KvDoc = &ctx.cfg.synth;
    let mut recipe = SceneRecipe::from_doc(doc)?;
    if let Some(seed) = ctx.seed_override {
        recipe.seed = seed;
    } else if doc.get("seed").is_none() {
        recipe.seed = ctx.cfg.seed;
    }
    let format = match doc.get("format").unwrap_or("binary") {
        "binary" => Format::Binary,
        "text" => Format::Text,
        other => bail!("synth.format must be binary or text, found {other:?}"),
    };
    let scene = generate(&recipe)?;
    let sparse = ctx.out.join("sparse");
    fs::create_dir_all(&sparse)?;
    for (name, bytes) in colmap::model_files(&scene.model, format)? {
        write_atomic(&sparse.join(name), |w| Ok(w.write_all(&bytes)?))?;
    }
    write_text(&ctx.out, "recipe.txt", &recipe.to_text())?;
    let inside: usize = doc.parse_or("splats_inside", 0)?;
    let outside: usize = doc.parse_or("splats_outside", 0)?;
    if inside + outside > 0 {
        let degree: u8 = doc.parse_or("sh_degree", 0)?;
        let file = doc.get("splats_file").unwrap_or("splats.ply");
        let set = generate_splats(&recipe, inside, outside, degree);
        write_atomic(&ctx.out.join(file), |w| Ok(write_splats_to(&set, w)?))?;
    }
    let visible: BTreeSet<ImageId> = roi_visibility(&scene.model, &recipe.roi).into_keys().collect();
    eprintln!(
        "synth: {} images, {} points, {} see the box",
        scene.model.images.len(),
        scene.model.points.len(),
        visible.len()
    );
    Ok(())
}
