//! Simulated annealing over categorical variables with single-variable
//! softmax (Gibbs) moves against a fixed surrogate.
//!
//! Each move picks a variable uniformly at random, evaluates the surrogate
//! at all `k` levels of that variable and samples the new level from
//! `softmax(-f(x_i = l, x_-i) / s(t))` with `s(t) = exp(-decay * t / n)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalPoint, CategoricalSpace};
use crate::error::{Error, Result};
use crate::surrogate::Surrogate;

pub const DEFAULT_DECAY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaInit {
    UniformRandom,
    WarmStart(CategoricalPoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    pub decay: f64,
    pub iterations: usize,
    pub init: SaInit,
}

impl SaConfig {
    pub fn new(decay: f64, iterations: usize) -> Result<Self> {
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "annealing decay must be positive, got {decay}"
            )));
        }
        if iterations == 0 {
            return Err(Error::InvalidArgument(
                "annealing needs at least one iteration".into(),
            ));
        }
        Ok(Self {
            decay,
            iterations,
            init: SaInit::UniformRandom,
        })
    }

    pub fn warm_start(mut self, point: CategoricalPoint) -> Self {
        self.init = SaInit::WarmStart(point);
        self
    }
}

/// `s(t) = exp(-decay * t / n)`.
pub fn temperature(decay: f64, t: usize, n: usize) -> f64 {
    (-decay * t as f64 / n as f64).exp()
}

/// Probabilities of `softmax(-values / temp)`, computed with the minimum
/// value subtracted.
pub fn softmax_probabilities(values: &[f64], temp: f64) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = values.iter().map(|v| (-(v - min) / temp).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws an index from `softmax(-values / temp)`.
pub fn softmax_sample<R: Rng + ?Sized>(values: &[f64], temp: f64, rng: &mut R) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights = [0.0f64; 64];
    let mut heap;
    let w: &mut [f64] = if values.len() <= weights.len() {
        &mut weights[..values.len()]
    } else {
        heap = vec![0.0; values.len()];
        &mut heap
    };
    let mut total = 0.0;
    for (wi, v) in w.iter_mut().zip(values) {
        *wi = (-(v - min) / temp).exp();
        total += *wi;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, wi) in w.iter().enumerate() {
        if *wi > 0.0 {
            last = i;
            if u < *wi {
                return i;
            }
            u -= *wi;
        }
    }
    last
}

pub fn sa_minimize<S, R>(
    surrogate: &S,
    space: CategoricalSpace,
    config: &SaConfig,
    rng: &mut R,
) -> Result<CategoricalPoint>
where
    S: Surrogate + ?Sized,
    R: Rng + ?Sized,
{
    let (n, k) = (space.n(), space.k());
    let mut x = match &config.init {
        SaInit::UniformRandom => space.random_point(rng).into_inner(),
        SaInit::WarmStart(p) => {
            space.validate(p.values())?;
            p.values().to_vec()
        }
    };
    let mut current = surrogate.eval(&x);
    if !current.is_finite() {
        return Err(Error::NonFinite(format!("surrogate value {current}")));
    }
    let mut values = vec![0.0; k];
    for t in 0..config.iterations {
        let var = rng.random_range(0..n);
        surrogate.eval_levels(&x, var, current, &mut values);
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("surrogate value {v}")));
        }
        let level = softmax_sample(&values, temperature(config.decay, t, n), rng);
        x[var] = level;
        current = values[level];
    }
    Ok(CategoricalPoint::new_unchecked(x))
}
