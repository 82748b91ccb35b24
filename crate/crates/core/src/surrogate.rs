//! Read-only objective interface consumed by the acquisition optimizers.

use crate::basis::BasisSpec;

/// A cheap function on `[k]^n` that the acquisition optimizers query many
/// times per step. Implementations must be pure.
pub trait Surrogate {
    fn eval(&self, x: &[usize]) -> f64;

    /// Writes into `out[l]` the value at `x` with variable `var` set to level
    /// `l`. `current` is the value at `x` itself; implementations may use it
    /// to update incrementally.
    fn eval_levels(&self, x: &[usize], var: usize, current: f64, out: &mut [f64]) {
        let _ = current;
        let mut y = x.to_vec();
        for (l, o) in out.iter_mut().enumerate() {
            y[var] = l;
            *o = self.eval(&y);
        }
    }
}

impl<F: Fn(&[usize]) -> f64> Surrogate for F {
    fn eval(&self, x: &[usize]) -> f64 {
        self(x)
    }
}

/// `sum_t coeffs[t] * psi_t(x) + l1_penalty * active_indicators(x)`.
#[derive(Debug, Clone)]
pub struct LinearSurrogate<'a> {
    basis: &'a BasisSpec,
    coeffs: Vec<f64>,
    l1_penalty: f64,
}

impl<'a> LinearSurrogate<'a> {
    pub fn new(basis: &'a BasisSpec, coeffs: Vec<f64>) -> Self {
        assert_eq!(
            coeffs.len(),
            basis.d(),
            "coefficient vector length must equal d"
        );
        Self {
            basis,
            coeffs,
            l1_penalty: 0.0,
        }
    }

    pub fn with_l1_penalty(mut self, penalty: f64) -> Self {
        self.l1_penalty = penalty;
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl Surrogate for LinearSurrogate<'_> {
    fn eval(&self, x: &[usize]) -> f64 {
        let mut v = self.basis.dot(&self.coeffs, x);
        if self.l1_penalty != 0.0 {
            v += self.l1_penalty * self.basis.active_indicators(x) as f64;
        }
        v
    }

    fn eval_levels(&self, x: &[usize], var: usize, current: f64, out: &mut [f64]) {
        self.basis.level_deltas(&self.coeffs, x, var, out);
        let reference = self.basis.space().k() - 1;
        let cur_active = (x[var] != reference) as i32;
        for (l, o) in out.iter_mut().enumerate() {
            let active = (l != reference) as i32;
            *o += current + self.l1_penalty * (active - cur_active) as f64;
        }
    }
}
