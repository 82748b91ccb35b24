//! Outer optimization loops: surrogate-guided algorithms and baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSpec, OneHotConvention, DEFAULT_TERM_CAP};
use crate::domain::{BlackBox, CategoricalPoint, CountedBox, RngSeed, RngStream, RunTrace};
use crate::eco::EcoModel;
use crate::error::{Error, Result};
use crate::mcts::{mcts_maximize, DesignSchema, MctsConfig, PLAYOUTS_PER_SLOT};
use crate::sa::{sa_minimize, softmax_sample, temperature, SaConfig, DEFAULT_DECAY};
use crate::surrogate::{LinearSurrogate, Surrogate};
use crate::tco::{HorseshoeHyper, McmcConfig, TcoModel, DEFAULT_ACQUISITION_LAMBDA};

const SAMPLER_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    EcoF,
    EcoG,
    TcoF,
    Rs,
    PlainSa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::EcoF,
        Algorithm::EcoG,
        Algorithm::TcoF,
        Algorithm::Rs,
        Algorithm::PlainSa,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::EcoF => "eco_f",
            Algorithm::EcoG => "eco_g",
            Algorithm::TcoF => "tco_f",
            Algorithm::Rs => "rs",
            Algorithm::PlainSa => "plain_sa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::config("algorithm", format!("unknown algorithm {s:?}; expected one of eco_f, eco_g, tco_f, rs, plain_sa")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Afo {
    Sa,
    Mcts,
}

impl FromStr for Afo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa" => Ok(Afo::Sa),
            "mcts" => Ok(Afo::Mcts),
            _ => Err(Error::config(
                "afo",
                format!("unknown optimizer {s:?}; expected sa or mcts"),
            )),
        }
    }
}

/// One algorithm's settings. `None` fields take the algorithm's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub afo: Afo,
    pub budget: usize,
    pub max_order: usize,
    /// Total weight mass of the exponential-weights learner.
    pub lambda: f64,
    pub sa_decay: f64,
    /// Annealing moves per step; default `3n` (ECO) or `6n` (TCO).
    pub sa_iterations: Option<usize>,
    /// UCT exploration; default 0.5 (ECO) or 0.25 (TCO).
    pub exploration: Option<f64>,
    pub playouts_per_slot: usize,
    pub acquisition_lambda: f64,
    pub initial_random: usize,
    pub mcmc_warmup: usize,
    pub mcmc_refresh: usize,
    pub nu: f64,
    pub s2: f64,
    /// Expected number of relevant coefficients; default `max(1, ceil(d/100))`.
    pub d0: Option<f64>,
    pub term_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::EcoF,
            afo: Afo::Sa,
            budget: 500,
            max_order: 2,
            lambda: 1.0,
            sa_decay: DEFAULT_DECAY,
            sa_iterations: None,
            exploration: None,
            playouts_per_slot: PLAYOUTS_PER_SLOT,
            acquisition_lambda: DEFAULT_ACQUISITION_LAMBDA,
            initial_random: 5,
            mcmc_warmup: 200,
            mcmc_refresh: 20,
            nu: 1.0,
            s2: 1.0,
            d0: None,
            term_cap: DEFAULT_TERM_CAP,
        }
    }
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, afo: Afo, budget: usize) -> Self {
        Self {
            algorithm,
            afo,
            budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if self.max_order == 0
            && matches!(
                self.algorithm,
                Algorithm::EcoF | Algorithm::EcoG | Algorithm::TcoF
            )
        {
            return Err(Error::config("max_order", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be positive"));
        }
        if !(self.sa_decay > 0.0 && self.sa_decay.is_finite()) {
            return Err(Error::config("sa_decay", "must be positive"));
        }
        if self.sa_iterations == Some(0) {
            return Err(Error::config("sa_iterations", "must be at least 1"));
        }
        if self
            .exploration
            .is_some_and(|c| !(c >= 0.0 && c.is_finite()))
        {
            return Err(Error::config("exploration", "must be >= 0"));
        }
        if self.playouts_per_slot == 0 {
            return Err(Error::config("playouts_per_slot", "must be at least 1"));
        }
        if !(self.acquisition_lambda >= 0.0 && self.acquisition_lambda.is_finite()) {
            return Err(Error::config("acquisition_lambda", "must be >= 0"));
        }
        if self.algorithm == Algorithm::TcoF && self.initial_random == 0 {
            return Err(Error::config("initial_random", "must be at least 1"));
        }
        if self.mcmc_warmup < 50 {
            return Err(Error::config("mcmc_warmup", "must be at least 50"));
        }
        Ok(())
    }

    fn is_tco(&self) -> bool {
        self.algorithm == Algorithm::TcoF
    }

    fn sa_config(&self, n: usize) -> Result<SaConfig> {
        let default = if self.is_tco() { 6 * n } else { 3 * n };
        SaConfig::new(self.sa_decay, self.sa_iterations.unwrap_or(default))
    }

    fn mcts_config(&self, schema: &DesignSchema) -> Result<MctsConfig> {
        let c = self
            .exploration
            .unwrap_or(if self.is_tco() { 0.25 } else { 0.5 });
        MctsConfig::new(c, self.playouts_per_slot * schema.height())
    }

    fn basis(&self, bb: &dyn BlackBox) -> Result<BasisSpec> {
        let (kind, convention) = match self.algorithm {
            Algorithm::EcoF => (BasisKind::OneHotFourier, OneHotConvention::PlusMinusOne),
            Algorithm::EcoG => (BasisKind::GroupFourier, OneHotConvention::PlusMinusOne),
            Algorithm::TcoF => (BasisKind::OneHotFourier, OneHotConvention::ZeroOne),
            _ => unreachable!("baselines have no basis"),
        };
        BasisSpec::with_options(bb.space(), kind, self.max_order, convention, self.term_cap)
    }
}

/// A finished run: its trace and wall-clock cost.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub seconds: f64,
}

impl RunOutcome {
    pub fn seconds_per_step(&self) -> f64 {
        if self.trace.is_empty() {
            0.0
        } else {
            self.seconds / self.trace.len() as f64
        }
    }

    pub fn best(&self) -> Option<(&CategoricalPoint, f64)> {
        Some((self.trace.argmin().ok()?, self.trace.best_value()?))
    }
}

/// The acquisition optimizer bound to one run.
struct Proposer {
    afo: Afo,
    sa: SaConfig,
    schema: DesignSchema,
    mcts: MctsConfig,
    rng: ChaCha8Rng,
}

impl Proposer {
    fn new(config: &ExperimentConfig, bb: &dyn BlackBox, seed: RngSeed) -> Result<Self> {
        let schema = run_schema(bb, seed)?;
        Ok(Self {
            afo: config.afo,
            sa: config.sa_config(bb.space().n())?,
            mcts: config.mcts_config(&schema)?,
            schema,
            rng: seed.rng(RngStream::Optimizer),
        })
    }

    fn minimize<S: Surrogate + ?Sized>(&mut self, surrogate: &S) -> Result<CategoricalPoint> {
        match self.afo {
            Afo::Sa => sa_minimize(surrogate, self.schema.space(), &self.sa, &mut self.rng),
            Afo::Mcts => mcts_maximize(surrogate, &self.schema, &self.mcts, &mut self.rng),
        }
    }
}

/// The box's schema with a visiting order drawn from the run seed, or the
/// generic index-order schema for unconstrained boxes.
pub fn run_schema(bb: &dyn BlackBox, seed: RngSeed) -> Result<DesignSchema> {
    match bb.schema() {
        Some(s) => Ok(s.shuffled(&mut seed.rng(RngStream::Schema))),
        None => {
            let space = bb.space();
            DesignSchema::generic(space.n(), space.k())
        }
    }
}

pub fn run_eco(
    config: &ExperimentConfig,
    bb: &mut dyn BlackBox,
    seed: RngSeed,
) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut model = EcoModel::new(config.basis(bb)?, config.lambda)?;
    let mut proposer = Proposer::new(config, bb, seed)?;
    let mut counted = CountedBox::new(bb, Some(config.budget));
    let mut trace = RunTrace::new();
    for _ in 0..config.budget {
        let x = proposer.minimize(&model.surrogate())?;
        let y = counted.evaluate(&x)?;
        trace.push(x.clone(), y);
        model.update(&x, y)?;
    }
    Ok(RunOutcome {
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_tco(
    config: &ExperimentConfig,
    bb: &mut dyn BlackBox,
    seed: RngSeed,
) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let spec = config.basis(bb)?;
    let d = spec.d();
    let hyper = match config.d0 {
        Some(d0) => HorseshoeHyper::new(config.nu, config.s2, d0, d)?,
        None => HorseshoeHyper::new(config.nu, config.s2, (d as f64 / 100.0).ceil().max(1.0), d)?,
    };
    let mut mcmc = McmcConfig::new(config.mcmc_warmup, config.mcmc_refresh, seed)?;
    mcmc.kept_draws = 1;
    let mut model = TcoModel::new(spec, hyper, mcmc)?;
    let mut proposer = Proposer::new(config, bb, seed)?;
    let space = bb.space();
    let mut counted = CountedBox::new(bb, Some(config.budget));
    let mut trace = RunTrace::new();
    let warm = config.initial_random.min(config.budget);
    for _ in 0..warm {
        let x = space.random_point(&mut proposer.rng);
        let y = counted.evaluate(&x)?;
        trace.push(x.clone(), y);
        model.observe(&x, y)?;
    }
    for _ in warm..config.budget {
        let coeffs = draw_with_retries(&mut model)?;
        let acq =
            LinearSurrogate::new(model.spec(), coeffs).with_l1_penalty(config.acquisition_lambda);
        let x = proposer.minimize(&acq)?;
        let y = counted.evaluate(&x)?;
        trace.push(x.clone(), y);
        model.observe(&x, y)?;
    }
    Ok(RunOutcome {
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn draw_with_retries(model: &mut TcoModel) -> Result<Vec<f64>> {
    let mut last = None;
    for attempt in 0..SAMPLER_RETRIES {
        match model.sample_coefficients() {
            Ok(c) => return Ok(c),
            Err(Error::SamplerDivergence(msg)) => {
                warn!(
                    "sampler diverged ({msg}); restarting chain, attempt {}",
                    attempt + 1
                );
                model.reset_chain();
                last = Some(Error::SamplerDivergence(msg));
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Uniform points in the box's (slot) space.
pub fn run_baseline_rs(
    config: &ExperimentConfig,
    bb: &mut dyn BlackBox,
    seed: RngSeed,
) -> Result<RunOutcome> {
    if config.budget == 0 {
        return Err(Error::config("budget", "must be at least 1"));
    }
    let start = Instant::now();
    let space = bb.space();
    let mut rng = seed.rng(RngStream::Optimizer);
    let mut counted = CountedBox::new(bb, Some(config.budget));
    let mut trace = RunTrace::new();
    for _ in 0..config.budget {
        let x = space.random_point(&mut rng);
        let y = counted.evaluate(&x)?;
        trace.push(x, y);
    }
    Ok(RunOutcome {
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Annealing with softmax moves directly on the black box. Every move
/// evaluates all `k` levels of the chosen variable; the run stops when the
/// budget runs out, possibly in the middle of a move.
pub fn run_baseline_sa(
    config: &ExperimentConfig,
    bb: &mut dyn BlackBox,
    seed: RngSeed,
) -> Result<RunOutcome> {
    if config.budget == 0 {
        return Err(Error::config("budget", "must be at least 1"));
    }
    let start = Instant::now();
    let space = bb.space();
    let (n, k) = (space.n(), space.k());
    let mut rng = seed.rng(RngStream::Optimizer);
    let mut counted = CountedBox::new(bb, Some(config.budget));
    let mut trace = RunTrace::new();
    let mut x = space.random_point(&mut rng).into_inner();
    let y = counted.evaluate(&CategoricalPoint::new_unchecked(x.clone()))?;
    trace.push(CategoricalPoint::new_unchecked(x.clone()), y);
    let mut values = vec![0.0; k];
    let mut t = 0;
    'moves: loop {
        let var = rng.random_range(0..n);
        for (l, v) in values.iter_mut().enumerate() {
            if counted.remaining() == Some(0) {
                break 'moves;
            }
            let mut y = x.clone();
            y[var] = l;
            let p = CategoricalPoint::new_unchecked(y);
            *v = counted.evaluate(&p)?;
            trace.push(p, *v);
        }
        let level = softmax_sample(&values, temperature(config.sa_decay, t, n), &mut rng);
        x[var] = level;
        t += 1;
    }
    Ok(RunOutcome {
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_experiment(
    config: &ExperimentConfig,
    bb: &mut dyn BlackBox,
    seed: RngSeed,
) -> Result<RunOutcome> {
    match config.algorithm {
        Algorithm::EcoF | Algorithm::EcoG => run_eco(config, bb, seed),
        Algorithm::TcoF => run_tco(config, bb, seed),
        Algorithm::Rs => run_baseline_rs(config, bb, seed),
        Algorithm::PlainSa => run_baseline_sa(config, bb, seed),
    }
}
