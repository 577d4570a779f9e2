use std::fmt::Write as _;

use rayon::prelude::*;

use crate::colmap::{ImageId, SfmModel};
use crate::gp::{GpConfig, GpPosterior, PriorMean};
use crate::kv::format_sig;

use super::features::static_rank;
use super::pool::CandidatePool;
use super::score::{CoverageState, RoiScore};
use super::{RoiSpec, SelectionError};

/// What the surrogate is trained on at each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Surrogate {
    /// Features and realized gains of the views chosen so far.
    #[default]
    History,
    /// True marginal gains of every remaining candidate, recomputed each
    /// step. With an interpolating GP and zero exploration this reproduces
    /// exact greedy; used to check the loop itself.
    ExhaustiveTable,
}

#[derive(Clone, Debug)]
pub struct GreedyConfig {
    /// Exploration weight on the posterior standard deviation.
    pub beta: f64,
    pub surrogate: Surrogate,
    /// Defaults to the largest gain seen as prior mean. Gains only shrink as
    /// the selection grows, so views far from everything chosen are assumed
    /// as good as the best one rather than the average.
    pub gp: GpConfig<f64>,
    /// Evaluate the acquisition over candidates with rayon.
    pub parallel: bool,
    /// Acquisition values this close to the best count as tied.
    pub tie_tolerance: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            surrogate: Surrogate::History,
            gp: GpConfig { prior_mean: PriorMean::Max, ..GpConfig::default() },
            parallel: false,
            tie_tolerance: 1e-9,
        }
    }
}

impl GreedyConfig {
    /// Zero exploration and a GP that reproduces its training targets.
    pub fn oracle() -> Self {
        let gp = GpConfig { noise_ratio: 1e-12, jitter_start: 1e-14, ..GpConfig::default() };
        Self { beta: 0.0, surrogate: Surrogate::ExhaustiveTable, gp, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    /// One-based.
    pub step: usize,
    pub image_id: ImageId,
    /// Surrogate mean for the chosen view; absent for the seed view.
    pub predicted_gain: Option<f64>,
    pub realized_gain: f64,
    /// Cumulative score after this step.
    pub score: RoiScore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub roi_id: String,
    pub ordered_ids: Vec<ImageId>,
    pub names: Vec<String>,
    pub trace: Vec<TraceStep>,
    /// The pool was smaller than the requested count.
    pub truncated: bool,
    /// Variance clamps observed in the surrogate.
    pub clamp_count: usize,
}

impl SelectionResult {
    pub fn final_score(&self) -> RoiScore {
        self.trace.last().map(|t| t.score).unwrap_or_default()
    }
}

struct Recorder<'a> {
    pool: &'a CandidatePool,
    state: CoverageState,
    remaining: Vec<bool>,
    result: SelectionResult,
}

impl<'a> Recorder<'a> {
    fn new(pool: &'a CandidatePool, k: usize) -> Self {
        Self {
            pool,
            state: pool.empty_state(),
            remaining: vec![true; pool.len()],
            result: SelectionResult {
                roi_id: pool.roi.roi_id.clone(),
                ordered_ids: Vec::with_capacity(k),
                names: Vec::with_capacity(k),
                trace: Vec::with_capacity(k),
                truncated: k > pool.len(),
                clamp_count: 0,
            },
        }
    }

    fn choose(&mut self, index: usize, predicted_gain: Option<f64>) -> f64 {
        let before = self.pool.score(&self.state).total;
        self.pool.add(&mut self.state, index);
        self.remaining[index] = false;
        let score = self.pool.score(&self.state);
        let c = &self.pool.candidates[index];
        let realized_gain = score.total - before;
        self.result.ordered_ids.push(c.image_id);
        self.result.names.push(c.name.clone());
        self.result.trace.push(TraceStep {
            step: self.result.trace.len() + 1,
            image_id: c.image_id,
            predicted_gain,
            realized_gain,
            score,
        });
        realized_gain
    }

    fn remaining(&self) -> Vec<usize> {
        (0..self.pool.len()).filter(|&i| self.remaining[i]).collect()
    }
}

/// Index of the best value; values within `tol` of the best are tied and
/// the earliest (lowest image id) wins.
fn argmax(values: &[f64], tol: f64) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = best - tol * best.abs().max(1.0);
    values.iter().position(|&v| v >= cut).unwrap_or(0)
}

fn map_indices<F>(indices: &[usize], parallel: bool, f: F) -> Vec<Result<(f64, f64), SelectionError>>
where
    F: Fn(usize) -> Result<(f64, f64), SelectionError> + Sync,
{
    if parallel {
        indices.par_iter().map(|&i| f(i)).collect()
    } else {
        indices.iter().map(|&i| f(i)).collect()
    }
}

/// Greedy GP-UCB selection over a prepared pool.
pub fn greedy_over(pool: &CandidatePool, k: usize, config: &GreedyConfig) -> Result<SelectionResult, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    let k_eff = k.min(pool.len());
    let mut rec = Recorder::new(pool, k);
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(k_eff);
    let mut gains: Vec<f64> = Vec::with_capacity(k_eff);

    while rec.result.ordered_ids.len() < k_eff {
        let remaining = rec.remaining();
        let gp = match config.surrogate {
            Surrogate::History if inputs.is_empty() => {
                let first = static_rank(&pool.static_table())[0];
                let index = pool.position(first).expect("ranked id is in the pool");
                let g = rec.choose(index, None);
                inputs.push(pool.candidates[index].feature.vector().to_vec());
                gains.push(g);
                continue;
            }
            Surrogate::History => GpPosterior::fit(&inputs, &gains, &config.gp)?,
            Surrogate::ExhaustiveTable => {
                let table: Vec<f64> = remaining
                    .iter()
                    .map(|&i| pool.score_with(&rec.state, i).total - pool.score(&rec.state).total)
                    .collect();
                let xs: Vec<Vec<f64>> =
                    remaining.iter().map(|&i| pool.candidates[i].feature.vector().to_vec()).collect();
                GpPosterior::fit(&xs, &table, &config.gp)?
            }
        };
        let predictions = map_indices(&remaining, config.parallel, |i| {
            let (mean, var) = gp.predict(pool.candidates[i].feature.vector())?;
            Ok((mean, mean + config.beta * var.sqrt()))
        });
        let predictions: Vec<(f64, f64)> = predictions.into_iter().collect::<Result<_, _>>()?;
        let acquisition: Vec<f64> = predictions.iter().map(|p| p.1).collect();
        let pick = argmax(&acquisition, config.tie_tolerance);
        rec.result.clamp_count += gp.clamp_count();
        let index = remaining[pick];
        let g = rec.choose(index, Some(predictions[pick].0));
        if config.surrogate == Surrogate::History {
            inputs.push(pool.candidates[index].feature.vector().to_vec());
            gains.push(g);
        }
    }
    Ok(rec.result)
}

/// Builds the pool for `roi` and runs the greedy loop.
pub fn greedy_select(
    model: &SfmModel,
    roi: &RoiSpec,
    candidates: &[ImageId],
    config: &GreedyConfig,
) -> Result<SelectionResult, SelectionError> {
    let pool = CandidatePool::build(model, roi, candidates)?;
    greedy_over(&pool, roi.select_count, config)
}

/// Static ranking truncated to `k`, with the same trace as the greedy loop.
pub fn select_static(pool: &CandidatePool, k: usize) -> SelectionResult {
    let order = static_rank(&pool.static_table());
    let mut rec = Recorder::new(pool, k);
    for id in order.into_iter().take(k) {
        let index = pool.position(id).expect("ranked id is in the pool");
        rec.choose(index, None);
    }
    rec.result
}

pub fn select_first_k(result: &SelectionResult, k: usize) -> Result<Vec<ImageId>, SelectionError> {
    if k > result.ordered_ids.len() {
        return Err(SelectionError::PrefixTooLong { requested: k, available: result.ordered_ids.len() });
    }
    Ok(result.ordered_ids[..k].to_vec())
}

/// Image names in selection order, one per line.
pub fn selection_list(result: &SelectionResult) -> String {
    result.names.iter().map(|n| format!("{n}\n")).collect()
}

pub fn trace_csv(result: &SelectionResult) -> String {
    let mut out = String::from("step,image_id,predicted_gain,realized_gain,density,occupancy,angle_coverage,total\n");
    let real = |x: f64| format_sig(x, 9);
    for t in &result.trace {
        let predicted = t.predicted_gain.map(real).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.step,
            t.image_id,
            predicted,
            real(t.realized_gain),
            real(t.score.density),
            real(t.score.occupancy),
            real(t.score.angle_coverage),
            real(t.score.total)
        );
    }
    out
}
