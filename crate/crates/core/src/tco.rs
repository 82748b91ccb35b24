//! Bayesian sparse regression over the `{0,1}` one-hot basis with a
//! regularized horseshoe prior, sampled by MCMC, for Thompson sampling.
//!
//! Model:
//! `y = X alpha + N(0, sigma^2)`, `alpha_j ~ N(0, tau^2 lt_j^2)` with
//! `lt_j^2 = c^2 l_j^2 / (c^2 + tau^2 l_j^2)`, `l_j ~ C+(0, 1)`,
//! `c^2 ~ IG(nu/2, nu s^2/2)`, `tau ~ C+(0, tau0)`,
//! `tau0 = d0 / (d - d0) * sigma / sqrt(t)`, `sigma ~ Exp(1)`.
//!
//! The chain is a Gibbs sweep: `alpha` jointly (small `d`) or one
//! coordinate at a time, each `l_j` by an independence Metropolis step on
//! the auxiliary-variable horseshoe conditional, and `tau`, `c^2`, `sigma`
//! by slice sampling on the log scale. The chain persists between draws so
//! that consecutive Thompson draws only need a few refresh sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::basis::{BasisKind, BasisSpec, OneHotConvention};
use crate::domain::{CategoricalPoint, RngSeed, RngStream};
use crate::error::{Error, Result};
use crate::surrogate::LinearSurrogate;

pub const DEFAULT_ACQUISITION_LAMBDA: f64 = 1e-5;
/// Above this many coefficients the `alpha` block is updated coordinate-wise.
pub const JOINT_ALPHA_MAX_D: usize = 300;

const LOG_BOUND: f64 = 40.0;
const LAMBDA2_MIN: f64 = 1e-150;
const LAMBDA2_MAX: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorseshoeHyper {
    pub nu: f64,
    pub s2: f64,
    pub d0: f64,
}

impl HorseshoeHyper {
    /// `nu = s^2 = 1`, `d0 = max(1, ceil(d / 100))`.
    pub fn default_for(d: usize) -> Result<Self> {
        Self::new(1.0, 1.0, ((d as f64) / 100.0).ceil().max(1.0), d)
    }

    pub fn new(nu: f64, s2: f64, d0: f64, d: usize) -> Result<Self> {
        if !(nu > 0.0 && s2 > 0.0 && nu.is_finite() && s2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need nu > 0 and s2 > 0, got {nu} and {s2}"
            )));
        }
        if !(d0 >= 1.0 && d0 < d as f64) {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= d0 < d, got d0 = {d0}, d = {d}"
            )));
        }
        Ok(Self { nu, s2, d0 })
    }

    /// `tau0 = d0 / (d - d0) * sigma / sqrt(t)`.
    pub fn tau0(&self, d: usize, sigma: f64, t: usize) -> f64 {
        self.d0 / (d as f64 - self.d0) * sigma / (t as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    /// Sweeps before the first draw from a cold chain.
    pub warmup_draws: usize,
    /// Sweeps per returned draw once the chain is warm.
    pub kept_draws: usize,
    /// Sweeps run after new data arrives, before the next draw.
    pub refresh_sweeps: usize,
    pub chain_seed: RngSeed,
}

impl McmcConfig {
    pub fn new(warmup_draws: usize, refresh_sweeps: usize, chain_seed: RngSeed) -> Result<Self> {
        if warmup_draws < 50 {
            return Err(Error::InvalidArgument(format!(
                "warmup must be at least 50 sweeps, got {warmup_draws}"
            )));
        }
        Ok(Self {
            warmup_draws,
            kept_draws: 1,
            refresh_sweeps,
            chain_seed,
        })
    }

    pub fn with_seed(chain_seed: RngSeed) -> Self {
        Self {
            warmup_draws: 200,
            kept_draws: 1,
            refresh_sweeps: 20,
            chain_seed,
        }
    }
}

#[derive(Debug, Clone)]
struct ChainState {
    alpha: Vec<f64>,
    lambda2: Vec<f64>,
    aux: Vec<f64>,
    tau: f64,
    c2: f64,
    sigma: f64,
    residual: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TcoModel {
    spec: BasisSpec,
    hyper: HorseshoeHyper,
    mcmc: McmcConfig,
    /// Column-major sparse design: `(row, value)` per coefficient.
    columns: Vec<Vec<(u32, f64)>>,
    col_sq: Vec<f64>,
    rows: Vec<Vec<(u32, f64)>>,
    y: Vec<f64>,
    gram: Option<(DMatrix<f64>, DVector<f64>)>,
    chain: Option<ChainState>,
    dirty: bool,
    rng: ChaCha8Rng,
}

impl TcoModel {
    /// `spec` must be a one-hot basis in the `{0,1}` convention.
    pub fn new(spec: BasisSpec, hyper: HorseshoeHyper, mcmc: McmcConfig) -> Result<Self> {
        if spec.kind() != BasisKind::OneHotFourier || spec.convention() != OneHotConvention::ZeroOne
        {
            return Err(Error::InvalidArgument(
                "horseshoe model needs a one-hot basis with {0,1} features".into(),
            ));
        }
        let d = spec.d();
        HorseshoeHyper::new(hyper.nu, hyper.s2, hyper.d0, d)?;
        if mcmc.warmup_draws < 50 || mcmc.kept_draws == 0 {
            return Err(Error::InvalidArgument(
                "warmup must be >= 50 and kept_draws >= 1".into(),
            ));
        }
        Ok(Self {
            hyper,
            columns: vec![Vec::new(); d],
            col_sq: vec![0.0; d],
            rows: Vec::new(),
            y: Vec::new(),
            gram: None,
            chain: None,
            dirty: false,
            rng: mcmc.chain_seed.rng(RngStream::Chain),
            mcmc,
            spec,
        })
    }

    /// Model with default hyperparameters for `spec`.
    pub fn with_defaults(spec: BasisSpec, chain_seed: RngSeed) -> Result<Self> {
        let hyper = HorseshoeHyper::default_for(spec.d())?;
        Self::new(spec, hyper, McmcConfig::with_seed(chain_seed))
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn hyper(&self) -> &HorseshoeHyper {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Current `tau0` using the chain's `sigma` (1 before sampling).
    pub fn tau0(&self) -> f64 {
        let sigma = self.chain.as_ref().map_or(1.0, |c| c.sigma);
        self.hyper.tau0(self.spec.d(), sigma, self.len().max(1))
    }

    /// `(tau, c^2, sigma)` of the current chain state.
    pub fn scales(&self) -> Option<(f64, f64, f64)> {
        self.chain.as_ref().map(|c| (c.tau, c.c2, c.sigma))
    }

    pub fn observe(&mut self, point: &CategoricalPoint, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("observation {value}")));
        }
        let features = self.spec.eval_basis(point)?;
        let row = self.y.len() as u32;
        let sparse: Vec<(u32, f64)> = features
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j as u32, *v))
            .collect();
        for &(j, v) in &sparse {
            self.columns[j as usize].push((row, v));
            self.col_sq[j as usize] += v * v;
        }
        if let Some(chain) = &mut self.chain {
            let fit: f64 = sparse
                .iter()
                .map(|&(j, v)| v * chain.alpha[j as usize])
                .sum();
            chain.residual.push(value - fit);
        }
        self.rows.push(sparse);
        self.y.push(value);
        self.gram = None;
        self.dirty = true;
        Ok(())
    }

    /// One Thompson draw of the coefficient vector.
    pub fn sample_coefficients(&mut self) -> Result<Vec<f64>> {
        let mut draws = self.sample_draws(1)?;
        Ok(draws.pop().expect("one draw"))
    }

    /// `count` consecutive posterior draws, each separated by `kept_draws`
    /// sweeps. A cold chain is warmed up first; a warm chain that has seen
    /// new data since its last draw gets `refresh_sweeps` sweeps.
    pub fn sample_draws(&mut self, count: usize) -> Result<Vec<Vec<f64>>> {
        if self.y.is_empty() {
            return Err(Error::NoData);
        }
        let result = self.run_chain(count);
        if result.is_err() {
            self.chain = None;
        }
        result
    }

    /// Drops the chain state; the next draw starts cold.
    pub fn reset_chain(&mut self) {
        self.chain = None;
    }

    fn run_chain(&mut self, count: usize) -> Result<Vec<Vec<f64>>> {
        let burn = if self.chain.is_none() {
            self.chain = Some(self.initial_state());
            self.mcmc.warmup_draws
        } else if self.dirty {
            self.mcmc.refresh_sweeps
        } else {
            0
        };
        self.dirty = false;
        for _ in 0..burn {
            self.sweep()?;
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            for _ in 0..self.mcmc.kept_draws {
                self.sweep()?;
            }
            out.push(self.chain.as_ref().expect("chain").alpha.clone());
        }
        Ok(out)
    }

    fn initial_state(&self) -> ChainState {
        let d = self.spec.d();
        let t = self.y.len() as f64;
        let mean = self.y.iter().sum::<f64>() / t;
        let var = self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        ChainState {
            alpha: vec![0.0; d],
            lambda2: vec![1.0; d],
            aux: vec![1.0; d],
            tau: 1.0,
            c2: 1.0,
            sigma: var.sqrt().clamp(1e-3, 1e3),
            residual: self.y.clone(),
        }
    }

    fn ensure_gram(&mut self) {
        if self.gram.is_some() {
            return;
        }
        let d = self.spec.d();
        let mut xtx = DMatrix::zeros(d, d);
        let mut xty = DVector::zeros(d);
        for (row, y) in self.rows.iter().zip(&self.y) {
            for &(a, va) in row {
                xty[a as usize] += va * y;
                for &(b, vb) in row {
                    xtx[(a as usize, b as usize)] += va * vb;
                }
            }
        }
        self.gram = Some((xtx, xty));
    }

    fn sweep(&mut self) -> Result<()> {
        let d = self.spec.d();
        if d <= JOINT_ALPHA_MAX_D {
            self.ensure_gram();
        }
        let mut st = self.chain.take().expect("chain initialized");
        let res = self.sweep_state(&mut st);
        self.chain = Some(st);
        res
    }

    fn sweep_state(&mut self, st: &mut ChainState) -> Result<()> {
        let d = self.spec.d();
        let t = self.y.len();
        let rng = &mut self.rng;
        let prior_prec =
            |st: &ChainState, j: usize| 1.0 / (st.tau * st.tau * st.lambda2[j]) + 1.0 / st.c2;

        // alpha
        let s2 = st.sigma * st.sigma;
        if let Some((xtx, xty)) = &self.gram {
            let mut a = xtx / s2;
            for j in 0..d {
                a[(j, j)] += prior_prec(st, j);
            }
            let chol = a.cholesky().ok_or_else(|| {
                Error::SamplerDivergence("posterior precision not positive definite".into())
            })?;
            let mean = chol.solve(&(xty / s2));
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            // L^T w = z gives w ~ N(0, A^-1)
            let w = chol
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .ok_or_else(|| Error::SamplerDivergence("singular Cholesky factor".into()))?;
            for j in 0..d {
                st.alpha[j] = mean[j] + w[j];
            }
            for (i, row) in self.rows.iter().enumerate() {
                st.residual[i] = self.y[i]
                    - row
                        .iter()
                        .map(|&(j, v)| v * st.alpha[j as usize])
                        .sum::<f64>();
            }
        } else {
            for (i, row) in self.rows.iter().enumerate() {
                st.residual[i] = self.y[i]
                    - row
                        .iter()
                        .map(|&(j, v)| v * st.alpha[j as usize])
                        .sum::<f64>();
            }
            for j in 0..d {
                let col = &self.columns[j];
                let old = st.alpha[j];
                let mut b = 0.0;
                for &(i, v) in col {
                    b += v * (st.residual[i as usize] + v * old);
                }
                let prec = self.col_sq[j] / s2 + prior_prec(st, j);
                let z: f64 = rng.sample(StandardNormal);
                let new = (b / s2) / prec + z / prec.sqrt();
                let delta = new - old;
                if delta != 0.0 {
                    for &(i, v) in col {
                        st.residual[i as usize] -= v * delta;
                    }
                }
                st.alpha[j] = new;
            }
        }
        if st.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::SamplerDivergence("non-finite coefficient".into()));
        }

        // local scales: propose from the plain horseshoe conditional, correct
        // for the slab factor sqrt(1 + tau^2 l^2 / c^2)
        let tau2 = st.tau * st.tau;
        let slab = |l2: f64| (1.0 + tau2 * l2 / st.c2).sqrt();
        for j in 0..d {
            let rate = 1.0 / st.aux[j] + st.alpha[j] * st.alpha[j] / (2.0 * tau2);
            let e: f64 = rng.sample(Exp1);
            let proposal = (rate / e).clamp(LAMBDA2_MIN, LAMBDA2_MAX);
            let ratio = slab(proposal) / slab(st.lambda2[j]);
            if ratio >= 1.0 || rng.random::<f64>() < ratio {
                st.lambda2[j] = proposal;
            }
            let e: f64 = rng.sample(Exp1);
            st.aux[j] = ((1.0 + 1.0 / st.lambda2[j]) / e).clamp(LAMBDA2_MIN, LAMBDA2_MAX);
        }

        let coef_loglik = |alpha: &[f64], lambda2: &[f64], tau2: f64, inv_c2: f64| -> f64 {
            alpha
                .iter()
                .zip(lambda2)
                .map(|(a, l2)| {
                    let p = 1.0 / (tau2 * l2) + inv_c2;
                    0.5 * p.ln() - 0.5 * a * a * p
                })
                .sum()
        };

        // global scale
        let tau0 = self.hyper.tau0(d, st.sigma, t);
        let inv_c2 = 1.0 / st.c2;
        let log_tau = slice_sample(
            st.tau.ln(),
            |u| {
                let tau = u.exp();
                coef_loglik(&st.alpha, &st.lambda2, tau * tau, inv_c2)
                    - (1.0 + (tau / tau0).powi(2)).ln()
                    + u
            },
            rng,
        )?;
        st.tau = log_tau.exp();

        // slab width
        let (shape, scale) = (self.hyper.nu / 2.0, self.hyper.nu * self.hyper.s2 / 2.0);
        let tau2 = st.tau * st.tau;
        let log_c2 = slice_sample(
            st.c2.ln(),
            |u| {
                coef_loglik(&st.alpha, &st.lambda2, tau2, (-u).exp())
                    - shape * u
                    - scale * (-u).exp()
            },
            rng,
        )?;
        st.c2 = log_c2.exp();

        // noise scale; tau's prior depends on sigma through tau0
        let rss: f64 = st.residual.iter().map(|r| r * r).sum();
        let k0 = self.hyper.d0 / (d as f64 - self.hyper.d0) / (t as f64).sqrt();
        let tf = t as f64;
        let tau = st.tau;
        let log_sigma = slice_sample(
            st.sigma.ln(),
            |u| {
                let sigma = u.exp();
                let tau0 = k0 * sigma;
                -tf * u
                    - 0.5 * rss * (-2.0 * u).exp()
                    - sigma
                    - tau0.ln()
                    - (1.0 + (tau / tau0).powi(2)).ln()
                    + u
            },
            rng,
        )?;
        st.sigma = log_sigma.exp();
        if !(st.tau.is_finite() && st.c2.is_finite() && st.sigma.is_finite()) {
            return Err(Error::SamplerDivergence("non-finite scale".into()));
        }
        Ok(())
    }

    pub fn acquisition<'a>(&'a self, coeffs: Vec<f64>, reg_lambda: f64) -> LinearSurrogate<'a> {
        LinearSurrogate::new(&self.spec, coeffs).with_l1_penalty(reg_lambda)
    }
}

/// `<coeffs, psi(x)> + reg_lambda * (#one-hot indicators equal to 1)`.
pub fn acquisition(
    spec: &BasisSpec,
    coeffs: &[f64],
    point: &CategoricalPoint,
    reg_lambda: f64,
) -> Result<f64> {
    spec.space().validate(point.values())?;
    if coeffs.len() != spec.d() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for d = {}",
            coeffs.len(),
            spec.d()
        )));
    }
    Ok(spec.dot(coeffs, point.values())
        + reg_lambda * spec.active_indicators(point.values()) as f64)
}

/// Univariate slice sampler with stepping out (unit initial width) on
/// `[-LOG_BOUND, LOG_BOUND]`.
fn slice_sample<F: FnMut(f64) -> f64, R: Rng + ?Sized>(
    x0: f64,
    mut logf: F,
    rng: &mut R,
) -> Result<f64> {
    let x0 = x0.clamp(-LOG_BOUND, LOG_BOUND);
    let f0 = logf(x0);
    if !f0.is_finite() {
        return Err(Error::SamplerDivergence(format!(
            "log density {f0} at {x0}"
        )));
    }
    let e: f64 = rng.sample(Exp1);
    let level = f0 - e;
    let w = 1.0;
    let mut lo = x0 - w * rng.random::<f64>();
    let mut hi = lo + w;
    let mut steps = 0;
    while lo > -LOG_BOUND && logf(lo) > level && steps < 64 {
        lo -= w;
        steps += 1;
    }
    steps = 0;
    while hi < LOG_BOUND && logf(hi) > level && steps < 64 {
        hi += w;
        steps += 1;
    }
    lo = lo.max(-LOG_BOUND);
    hi = hi.min(LOG_BOUND);
    for _ in 0..200 {
        let x = lo + (hi - lo) * rng.random::<f64>();
        let fx = logf(x);
        if fx > level {
            return Ok(x);
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
    }
    Ok(x0)
}
