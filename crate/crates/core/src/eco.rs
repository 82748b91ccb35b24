//! Online exponential-weights learner over a Fourier basis.
//!
//! Every basis term is an expert with two nonnegative weights `alpha_plus`
//! and `alpha_minus`; the surrogate is `sum_j (alpha_plus_j - alpha_minus_j)
//! psi_j(x)`. After each true evaluation the weights are multiplied by an
//! exponential of their individual losses and renormalized to total mass
//! `lambda`. The learning rate follows the anytime schedule
//! `eta_t = min(1/e_{t-1}, c * sqrt(ln(2d) / v_{t-1}))`, where `e` is the
//! dyadic bound on the observed loss range and `v` the cumulative weighted
//! loss variance.

use std::io::Write;

use crate::basis::BasisSpec;
use crate::domain::CategoricalPoint;
use crate::error::{Error, Result};
use crate::surrogate::LinearSurrogate;

const WEIGHT_FLOOR: f64 = 1e-300;

/// `sqrt(2(sqrt(2) - 1) / (e - 2))`.
pub fn lr_constant() -> f64 {
    (2.0 * (std::f64::consts::SQRT_2 - 1.0) / (std::f64::consts::E - 2.0)).sqrt()
}

/// Smallest power of two that is `>= x`, for `x > 0`.
fn dyadic_ceil(x: f64) -> f64 {
    let mut e = 2f64.powi(x.log2().ceil() as i32);
    while e < x {
        e *= 2.0;
    }
    while e / 2.0 >= x {
        e /= 2.0;
    }
    e
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrState {
    /// Dyadic range bound `e_t`; `None` until a nonzero loss range is seen.
    pub e_prev: Option<f64>,
    /// Cumulative weighted variance `v_t`.
    pub v_prev: f64,
    pub c_const: f64,
    max_range: f64,
    updates: usize,
}

impl Default for LrState {
    fn default() -> Self {
        Self {
            e_prev: None,
            v_prev: 0.0,
            c_const: lr_constant(),
            max_range: 0.0,
            updates: 0,
        }
    }
}

impl LrState {
    /// Learning rate for the next update over `d` experts (`2d` weights).
    pub fn eta(&self, d: usize) -> f64 {
        let log_experts = (2.0 * d as f64).ln();
        let first_step = (self.c_const * log_experts.sqrt()).min(1.0);
        if self.updates == 0 {
            return first_step;
        }
        let range_term = self.e_prev.map_or(f64::INFINITY, |e| 1.0 / e);
        let var_term = if self.v_prev > 0.0 {
            self.c_const * (log_experts / self.v_prev).sqrt()
        } else {
            f64::INFINITY
        };
        let eta = range_term.min(var_term);
        // every loss so far was zero: nothing constrains the rate yet
        if eta.is_finite() {
            eta
        } else {
            first_step
        }
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    fn record(&mut self, range: f64, variance: f64) {
        self.updates += 1;
        if range > self.max_range {
            self.max_range = range;
        }
        if self.max_range > 0.0 {
            self.e_prev = Some(dyadic_ceil(self.max_range));
        }
        self.v_prev += variance;
    }
}

#[derive(Debug, Clone)]
pub struct EcoModel {
    spec: BasisSpec,
    alpha_plus: Vec<f64>,
    alpha_minus: Vec<f64>,
    lambda: f64,
    lr: LrState,
}

/// Diagnostics from one [`EcoModel::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub prediction: f64,
    pub mixture_loss: f64,
    pub eta: f64,
}

impl EcoModel {
    pub fn new(spec: BasisSpec, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sparsity lambda must be positive, got {lambda}"
            )));
        }
        let d = spec.d();
        let init = lambda / (2.0 * d as f64);
        Ok(Self {
            alpha_plus: vec![init; d],
            alpha_minus: vec![init; d],
            spec,
            lambda,
            lr: LrState::default(),
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha_plus(&self) -> &[f64] {
        &self.alpha_plus
    }

    pub fn alpha_minus(&self) -> &[f64] {
        &self.alpha_minus
    }

    pub fn lr_state(&self) -> &LrState {
        &self.lr
    }

    /// Overwrites the weights; used to seed hand-built models.
    pub fn set_weights(&mut self, alpha_plus: Vec<f64>, alpha_minus: Vec<f64>) -> Result<()> {
        let d = self.spec.d();
        if alpha_plus.len() != d || alpha_minus.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "expected {d} weights per sign"
            )));
        }
        if alpha_plus.iter().chain(&alpha_minus).any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        self.alpha_plus = alpha_plus;
        self.alpha_minus = alpha_minus;
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.alpha_plus.iter().sum::<f64>() + self.alpha_minus.iter().sum::<f64>()
    }

    /// Signed coefficients `alpha_plus - alpha_minus`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha_plus
            .iter()
            .zip(&self.alpha_minus)
            .map(|(p, m)| p - m)
            .collect()
    }

    pub fn surrogate(&self) -> LinearSurrogate<'_> {
        LinearSurrogate::new(&self.spec, self.coefficients())
    }

    pub fn predict(&self, point: &CategoricalPoint) -> f64 {
        self.predict_raw(point.values())
    }

    pub fn predict_raw(&self, x: &[usize]) -> f64 {
        self.alpha_plus
            .iter()
            .zip(&self.alpha_minus)
            .enumerate()
            .map(|(t, (p, m))| (p - m) * self.spec.eval_index(t, x))
            .sum()
    }

    pub fn update(&mut self, point: &CategoricalPoint, observed: f64) -> Result<UpdateInfo> {
        let eta = self.lr.eta(self.spec.d());
        self.update_with_eta(point, observed, eta)
    }

    /// Update with an explicit learning rate. The schedule state is still
    /// advanced with this step's losses.
    pub fn update_with_eta(
        &mut self,
        point: &CategoricalPoint,
        observed: f64,
        eta: f64,
    ) -> Result<UpdateInfo> {
        if !observed.is_finite() {
            return Err(Error::NonFinite(format!("observed value {observed}")));
        }
        self.spec.space().validate(point.values())?;
        let psi = self.spec.features(point.values());
        let prediction: f64 = psi
            .iter()
            .zip(self.alpha_plus.iter().zip(&self.alpha_minus))
            .map(|(f, (p, m))| (p - m) * f)
            .sum();
        let loss = prediction - observed;
        let info = UpdateInfo {
            prediction,
            mixture_loss: loss,
            eta,
        };
        if loss == 0.0 {
            self.lr.record(0.0, 0.0);
            return Ok(info);
        }

        // Individual losses l_j = 2*lambda*loss*psi_j; the signed gains are
        // z_j^+ = -l_j and z_j^- = +l_j.
        let scale = 2.0 * self.lambda * loss;
        let mut max_abs = 0.0f64;
        let mut mean = 0.0;
        for (j, f) in psi.iter().enumerate() {
            let l = scale * f;
            max_abs = max_abs.max(l.abs());
            mean += (self.alpha_minus[j] - self.alpha_plus[j]) * l;
        }
        let mass = self.total_mass();
        mean /= mass;
        let mut variance = 0.0;
        for (j, f) in psi.iter().enumerate() {
            let l = scale * f;
            variance +=
                self.alpha_plus[j] * (-l - mean).powi(2) + self.alpha_minus[j] * (l - mean).powi(2);
        }
        variance /= mass;
        self.lr.record(2.0 * max_abs, variance);

        // alpha^gamma *= exp(-gamma * eta * l_j), shifted by the largest
        // exponent; the shift cancels in the normalization below.
        let shift = eta * max_abs;
        let mut total = 0.0;
        for (j, f) in psi.iter().enumerate() {
            let a = eta * scale * f;
            let p = (self.alpha_plus[j] * (-a - shift).exp()).max(WEIGHT_FLOOR);
            let m = (self.alpha_minus[j] * (a - shift).exp()).max(WEIGHT_FLOOR);
            self.alpha_plus[j] = p;
            self.alpha_minus[j] = m;
            total += p + m;
        }
        let norm = self.lambda / total;
        for w in self
            .alpha_plus
            .iter_mut()
            .chain(self.alpha_minus.iter_mut())
        {
            *w *= norm;
        }
        Ok(info)
    }

    /// Debug dump: `term,alpha_plus,alpha_minus` per row.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "term,alpha_plus,alpha_minus")?;
        for (t, (p, m)) in self.alpha_plus.iter().zip(&self.alpha_minus).enumerate() {
            writeln!(w, "{t},{p},{m}")?;
        }
        Ok(())
    }
}
