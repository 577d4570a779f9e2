//! Gaussian-process regression with a squared-exponential (ARD) kernel.
//!
//! Hyperparameters are fixed rather than learned: unit length scales on
//! standardized inputs, signal variance taken from the observed targets and
//! a noise variance proportional to it. The prior mean defaults to the mean
//! of the targets, so predictions far from the data revert to it. The kernel matrix is factorized by
//! Cholesky with escalating diagonal jitter when needed.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::linalg::Cholesky;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("at least one training pair is required")]
    Empty,
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("input dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite training data")]
    NonFinite,
    #[error("kernel matrix not positive definite after jitter {jitter:e} (condition estimate {condition:e})")]
    Factorization { jitter: f64, condition: f64 },
}

/// Constant prior mean of the process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorMean<T> {
    Zero,
    Constant(T),
    /// Mean of the training targets.
    Empirical,
    /// Largest training target.
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpConfig<T> {
    /// Per-dimension length scale; a single entry applies to every dimension.
    pub length_scales: Vec<T>,
    /// Fixed signal variance; `None` derives it from the targets.
    pub signal_variance: Option<T>,
    /// Lower bound on the derived signal variance.
    pub signal_floor: T,
    /// Noise variance as a fraction of the signal variance.
    pub noise_ratio: T,
    pub jitter_start: T,
    pub jitter_max: T,
    pub prior_mean: PriorMean<T>,
}

impl<T: Real> Default for GpConfig<T> {
    fn default() -> Self {
        Self {
            length_scales: vec![T::one()],
            signal_variance: None,
            signal_floor: T::lit(1e-6),
            noise_ratio: T::lit(1e-4),
            jitter_start: T::lit(1e-10),
            jitter_max: T::lit(1e-4),
            prior_mean: PriorMean::Empirical,
        }
    }
}

/// Fitted posterior.
#[derive(Debug)]
pub struct GpPosterior<T> {
    dim: usize,
    inputs: Vec<T>,
    targets: Vec<T>,
    inv_length_sq: Vec<T>,
    signal_variance: T,
    noise_variance: T,
    jitter: T,
    mean: T,
    factor: Cholesky<T>,
    alpha: Vec<T>,
    clamps: AtomicUsize,
}

impl<T: Real> Clone for GpPosterior<T> {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            inv_length_sq: self.inv_length_sq.clone(),
            signal_variance: self.signal_variance,
            noise_variance: self.noise_variance,
            jitter: self.jitter,
            mean: self.mean,
            factor: self.factor.clone(),
            alpha: self.alpha.clone(),
            clamps: AtomicUsize::new(self.clamps.load(Ordering::Relaxed)),
        }
    }
}

fn population_variance<T: Real>(xs: &[T]) -> T {
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().fold(T::zero(), |a, &x| a + x) / n;
    xs.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean)) / n
}

impl<T: Real> GpPosterior<T> {
    pub fn fit(inputs: &[Vec<T>], targets: &[T], config: &GpConfig<T>) -> Result<Self, GpError> {
        if inputs.is_empty() {
            return Err(GpError::Empty);
        }
        if inputs.len() != targets.len() {
            return Err(GpError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
        }
        let dim = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(GpError::DimensionMismatch { expected: dim, found: bad.len() });
        }
        if inputs.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite);
        }
        let inv_length_sq: Vec<T> = (0..dim)
            .map(|k| {
                let l = config.length_scales.get(k).or(config.length_scales.last()).copied().unwrap_or(T::one());
                T::one() / (l * l)
            })
            .collect();
        let signal_variance =
            config.signal_variance.unwrap_or_else(|| population_variance(targets).max(config.signal_floor));
        let noise_variance = signal_variance * config.noise_ratio;
        let mean = match config.prior_mean {
            PriorMean::Zero => T::zero(),
            PriorMean::Constant(m) => m,
            PriorMean::Empirical => targets.iter().fold(T::zero(), |a, &y| a + y) / T::lit(targets.len() as f64),
            PriorMean::Max => targets.iter().copied().fold(T::neg_infinity(), T::max),
        };

        let flat: Vec<T> = inputs.iter().flatten().copied().collect();
        let n = inputs.len();
        let mut gram = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = se_kernel(
                    &flat[i * dim..(i + 1) * dim],
                    &flat[j * dim..(j + 1) * dim],
                    &inv_length_sq,
                    signal_variance,
                );
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
            gram[i * n + i] += noise_variance;
        }

        let mut jitter = T::zero();
        let factor = loop {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            if let Some(f) = Cholesky::factor(&a, n) {
                break f;
            }
            jitter = if jitter == T::zero() { config.jitter_start * signal_variance } else { jitter * T::lit(10.0) };
            if jitter > config.jitter_max * signal_variance {
                let row_max = (0..n)
                    .map(|i| gram[i * n..(i + 1) * n].iter().fold(T::zero(), |s, v| s + v.abs()))
                    .fold(T::zero(), T::max);
                let condition = row_max / (noise_variance + config.jitter_max * signal_variance);
                return Err(GpError::Factorization {
                    jitter: jitter.to_f64_lossy(),
                    condition: condition.to_f64_lossy(),
                });
            }
        };
        let centered: Vec<T> = targets.iter().map(|&y| y - mean).collect();
        let alpha = factor.solve(&centered);
        Ok(Self {
            dim,
            inputs: flat,
            targets: targets.to_vec(),
            inv_length_sq,
            signal_variance,
            noise_variance,
            jitter,
            mean,
            factor,
            alpha,
            clamps: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn signal_variance(&self) -> T {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    /// Diagonal jitter added on top of the noise variance (zero when none was needed).
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn prior_mean(&self) -> T {
        self.mean
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    /// Number of predictions whose variance had to be clamped at zero.
    pub fn clamp_count(&self) -> usize {
        self.clamps.load(Ordering::Relaxed)
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[T]) -> Result<(T, T), GpError> {
        if x.len() != self.dim {
            return Err(GpError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let kstar: Vec<T> = self
            .inputs
            .chunks_exact(self.dim)
            .map(|xi| se_kernel(xi, x, &self.inv_length_sq, self.signal_variance))
            .collect();
        let mean = self.mean + kstar.iter().zip(&self.alpha).fold(T::zero(), |a, (k, w)| a + *k * *w);
        let v = self.factor.solve_lower(&kstar);
        let mut variance = self.signal_variance - v.iter().fold(T::zero(), |a, &c| a + c * c);
        if variance < T::zero() {
            self.clamps.fetch_add(1, Ordering::Relaxed);
            variance = T::zero();
        }
        Ok((mean, variance))
    }
}

/// Fits a posterior with the default configuration.
pub fn gp_fit<T: Real>(inputs: &[Vec<T>], targets: &[T]) -> Result<GpPosterior<T>, GpError> {
    GpPosterior::fit(inputs, targets, &GpConfig::default())
}

pub fn gp_predict<T: Real>(gp: &GpPosterior<T>, x: &[T]) -> Result<(T, T), GpError> {
    gp.predict(x)
}

#[inline]
fn se_kernel<T: Real>(a: &[T], b: &[T], inv_length_sq: &[T], signal_variance: T) -> T {
    let d2 = a.iter().zip(b).zip(inv_length_sq).fold(T::zero(), |acc, ((x, y), w)| acc + (*x - *y) * (*x - *y) * *w);
    signal_variance * (-T::lit(0.5) * d2).exp()
}
