//! Fourier-type bases for functions on `[k]^n`.
//!
//! Two families are provided:
//!
//! * **One-hot Fourier** (abridged): each variable `x_i` is encoded by `k-1`
//!   indicators `x_ij`, `j in 0..k-1`; level `k-1` is the reference level with
//!   no indicator. A monomial multiplies at most one indicator per variable.
//!   Indicators take values in `{-1,+1}` (`-1` when `x_i = j`) or, for the
//!   Bayesian learner, in `{0,1}`.
//! * **Group Fourier**: real and imaginary parts of the characters
//!   `exp(2*pi*i*<x, I>/k)` of `(Z/kZ)^n`, for frequency vectors `I` with at
//!   most `m` nonzero entries. The constant character has no imaginary part.
//!
//! With `m = n` the one-hot basis has exactly `k^n` terms and is complete.
//!
//! Terms are ordered by interaction order, then lexicographically by variable
//! indices, then by level/frequency indices, with the real part before the
//! imaginary one. Coefficient indices are therefore stable across runs.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalPoint, CategoricalSpace};
use crate::error::{Error, Result};

pub const DEFAULT_TERM_CAP: usize = 5_000_000;
pub const DEFAULT_DOMAIN_CAP: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    OneHotFourier,
    GroupFourier,
}

/// Value convention of one-hot indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OneHotConvention {
    /// `x_ij = -1` if `x_i = j`, else `+1`.
    #[default]
    PlusMinusOne,
    /// `x_ij = 1` if `x_i = j`, else `0`.
    ZeroOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Real,
    Imaginary,
}

/// Product of one-hot indicators, at most one per variable. `pairs` holds
/// `(variable, level)` with strictly increasing variables and `level < k-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonomialTerm {
    pub pairs: Vec<(usize, usize)>,
}

/// Real or imaginary part of a group character. `freq` holds
/// `(variable, frequency)` with strictly increasing variables and
/// `1 <= frequency <= k-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupCharacterTerm {
    pub freq: Vec<(usize, usize)>,
    pub part: Part,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BasisTerm {
    Monomial(MonomialTerm),
    Character(GroupCharacterTerm),
}

impl BasisTerm {
    pub fn order(&self) -> usize {
        self.factors().len()
    }

    /// `(variable, level-or-frequency)` pairs.
    pub fn factors(&self) -> &[(usize, usize)] {
        match self {
            BasisTerm::Monomial(m) => &m.pairs,
            BasisTerm::Character(c) => &c.freq,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.factors().is_empty()
    }
}

/// Number of terms: `sum_{i<=m} C(n,i)(k-1)^i` for one-hot, twice that minus
/// one for the group basis. `None` on overflow.
pub fn count_terms(n: usize, k: usize, kind: BasisKind, max_order: usize) -> Option<u128> {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut power: u128 = 1;
    for i in 0..=max_order.min(n) {
        if i > 0 {
            binom = binom.checked_mul((n - i + 1) as u128)? / i as u128;
            power = power.checked_mul((k - 1) as u128)?;
        }
        total = total.checked_add(binom.checked_mul(power)?)?;
    }
    match kind {
        BasisKind::OneHotFourier => Some(total),
        BasisKind::GroupFourier => total.checked_mul(2).map(|t| t - 1),
    }
}

/// Enumerated basis over a categorical space. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BasisSpec {
    space: CategoricalSpace,
    kind: BasisKind,
    convention: OneHotConvention,
    max_order: usize,
    terms: Vec<BasisTerm>,
    // Flat copies of the term factors for the hot evaluation loops.
    starts: Vec<u32>,
    vars: Vec<u32>,
    levels: Vec<u32>,
    imaginary: Vec<bool>,
    by_var: Vec<Vec<u32>>,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub kind: BasisKind,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub d: usize,
}

/// Calls `f` with every `size`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, size: usize, mut f: impl FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - size {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Calls `f` with every tuple in `[lo, hi)^len`, lexicographically.
fn for_each_tuple(len: usize, lo: usize, hi: usize, mut f: impl FnMut(&[usize])) {
    if len > 0 && hi <= lo {
        return;
    }
    let mut t = vec![lo; len];
    loop {
        f(&t);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < hi {
                break;
            }
            t[i] = lo;
        }
    }
}

impl BasisSpec {
    pub fn new(space: CategoricalSpace, kind: BasisKind, max_order: usize) -> Result<Self> {
        Self::with_options(
            space,
            kind,
            max_order,
            OneHotConvention::default(),
            DEFAULT_TERM_CAP,
        )
    }

    pub fn with_options(
        space: CategoricalSpace,
        kind: BasisKind,
        max_order: usize,
        convention: OneHotConvention,
        term_cap: usize,
    ) -> Result<Self> {
        let (n, k) = (space.n(), space.k());
        if max_order > n {
            return Err(Error::OrderTooLarge { max_order, n });
        }
        let d = count_terms(n, k, kind, max_order).unwrap_or(u128::MAX);
        if d > term_cap as u128 {
            return Err(Error::BasisTooLarge { d, cap: term_cap });
        }
        let d = d as usize;

        let mut terms = Vec::with_capacity(d);
        for order in 0..=max_order {
            for_each_combination(n, order, |vars| match kind {
                BasisKind::OneHotFourier => for_each_tuple(order, 0, k - 1, |levels| {
                    terms.push(BasisTerm::Monomial(MonomialTerm {
                        pairs: vars.iter().copied().zip(levels.iter().copied()).collect(),
                    }));
                }),
                BasisKind::GroupFourier => for_each_tuple(order, 1, k, |freqs| {
                    let freq: Vec<(usize, usize)> =
                        vars.iter().copied().zip(freqs.iter().copied()).collect();
                    if !freq.is_empty() {
                        terms.push(BasisTerm::Character(GroupCharacterTerm {
                            freq: freq.clone(),
                            part: Part::Real,
                        }));
                        terms.push(BasisTerm::Character(GroupCharacterTerm {
                            freq,
                            part: Part::Imaginary,
                        }));
                    } else {
                        terms.push(BasisTerm::Character(GroupCharacterTerm {
                            freq,
                            part: Part::Real,
                        }));
                    }
                }),
            });
        }
        debug_assert_eq!(terms.len(), d);

        let mut starts = Vec::with_capacity(d + 1);
        let mut vars = Vec::new();
        let mut levels = Vec::new();
        let mut imaginary = Vec::with_capacity(d);
        let mut by_var = vec![Vec::new(); n];
        for (t, term) in terms.iter().enumerate() {
            starts.push(vars.len() as u32);
            for &(v, l) in term.factors() {
                vars.push(v as u32);
                levels.push(l as u32);
                by_var[v].push(t as u32);
            }
            imaginary.push(matches!(
                term,
                BasisTerm::Character(GroupCharacterTerm {
                    part: Part::Imaginary,
                    ..
                })
            ));
        }
        starts.push(vars.len() as u32);

        let cos_table = (0..k)
            .map(|r| (2.0 * PI * r as f64 / k as f64).cos())
            .collect();
        let sin_table = (0..k)
            .map(|r| (2.0 * PI * r as f64 / k as f64).sin())
            .collect();

        Ok(Self {
            space,
            kind,
            convention,
            max_order,
            terms,
            starts,
            vars,
            levels,
            imaginary,
            by_var,
            cos_table,
            sin_table,
        })
    }

    pub fn space(&self) -> CategoricalSpace {
        self.space
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn convention(&self) -> OneHotConvention {
        self.convention
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn d(&self) -> usize {
        self.terms.len()
    }

    /// Indices of the terms that involve variable `var`.
    pub fn terms_with_var(&self, var: usize) -> &[u32] {
        &self.by_var[var]
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            kind: self.kind,
            n: self.space.n(),
            k: self.space.k(),
            m: self.max_order,
            d: self.d(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.summary()).expect("basis summary serializes")
    }

    #[inline]
    fn factor_range(&self, t: usize) -> std::ops::Range<usize> {
        self.starts[t] as usize..self.starts[t + 1] as usize
    }

    /// Value of term `t` at `x`, skipping the factor on `skip` (if any).
    /// For the group basis the returned value is the phase `<x, I> mod k`
    /// encoded as f64 and must be finished by the caller.
    #[inline]
    fn partial(&self, t: usize, x: &[usize], skip: usize) -> (f64, usize) {
        let k = self.space.k();
        let range = self.factor_range(t);
        match self.kind {
            BasisKind::OneHotFourier => match self.convention {
                OneHotConvention::PlusMinusOne => {
                    let mut neg = false;
                    for f in range {
                        let v = self.vars[f] as usize;
                        if v != skip && x[v] == self.levels[f] as usize {
                            neg = !neg;
                        }
                    }
                    (if neg { -1.0 } else { 1.0 }, 0)
                }
                OneHotConvention::ZeroOne => {
                    for f in range {
                        let v = self.vars[f] as usize;
                        if v != skip && x[v] != self.levels[f] as usize {
                            return (0.0, 0);
                        }
                    }
                    (1.0, 0)
                }
            },
            BasisKind::GroupFourier => {
                let mut phase = 0usize;
                for f in range {
                    let v = self.vars[f] as usize;
                    if v != skip {
                        phase += x[v] * self.levels[f] as usize;
                    }
                }
                (0.0, phase % k)
            }
        }
    }

    #[inline]
    fn character(&self, t: usize, phase: usize) -> f64 {
        if self.imaginary[t] {
            self.sin_table[phase]
        } else {
            self.cos_table[phase]
        }
    }

    /// Term `t` at `x` without bounds validation.
    #[inline]
    pub fn eval_index(&self, t: usize, x: &[usize]) -> f64 {
        let (v, phase) = self.partial(t, x, usize::MAX);
        match self.kind {
            BasisKind::OneHotFourier => v,
            BasisKind::GroupFourier => self.character(t, phase),
        }
    }

    pub fn eval_term(&self, t: usize, point: &CategoricalPoint) -> Result<f64> {
        self.space.validate(point.values())?;
        if t >= self.d() {
            return Err(Error::DimensionMismatch(format!(
                "term index {t} out of range for d = {}",
                self.d()
            )));
        }
        Ok(self.eval_index(t, point.values()))
    }

    pub fn eval_basis(&self, point: &CategoricalPoint) -> Result<Vec<f64>> {
        self.space.validate(point.values())?;
        Ok(self.features(point.values()))
    }

    /// Unchecked feature vector of length `d`.
    pub fn features(&self, x: &[usize]) -> Vec<f64> {
        (0..self.d()).map(|t| self.eval_index(t, x)).collect()
    }

    /// `sum_t coeffs[t] * psi_t(x)` without allocating.
    pub fn dot(&self, coeffs: &[f64], x: &[usize]) -> f64 {
        debug_assert_eq!(coeffs.len(), self.d());
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(t, c)| c * self.eval_index(t, x))
            .sum()
    }

    /// For a linear form with coefficients `coeffs`, writes into `out[l]` the
    /// change of the form when variable `var` is moved from its current level
    /// to level `l`. Only terms that involve `var` are visited.
    pub fn level_deltas(&self, coeffs: &[f64], x: &[usize], var: usize, out: &mut [f64]) {
        let k = self.space.k();
        debug_assert_eq!(out.len(), k);
        out.iter_mut().for_each(|o| *o = 0.0);
        let cur = x[var];
        for &t in &self.by_var[var] {
            let t = t as usize;
            let c = coeffs[t];
            if c == 0.0 {
                continue;
            }
            let range = self.factor_range(t);
            let own = self.levels[range
                .clone()
                .find(|&f| self.vars[f] as usize == var)
                .expect("term indexed under its own variable")] as usize;
            let (rest, phase) = self.partial(t, x, var);
            match self.kind {
                BasisKind::OneHotFourier => {
                    if rest == 0.0 {
                        continue;
                    }
                    let cr = c * rest;
                    match self.convention {
                        OneHotConvention::PlusMinusOne => {
                            // indicator is -1 at `own`, +1 elsewhere
                            if cur == own {
                                for (l, o) in out.iter_mut().enumerate() {
                                    if l != own {
                                        *o += 2.0 * cr;
                                    }
                                }
                            } else {
                                out[own] -= 2.0 * cr;
                            }
                        }
                        OneHotConvention::ZeroOne => {
                            if cur == own {
                                for (l, o) in out.iter_mut().enumerate() {
                                    if l != own {
                                        *o -= cr;
                                    }
                                }
                            } else {
                                out[own] += cr;
                            }
                        }
                    }
                }
                BasisKind::GroupFourier => {
                    let now = self.character(t, (phase + own * cur) % k);
                    for (l, o) in out.iter_mut().enumerate() {
                        if l != cur {
                            *o += c * (self.character(t, (phase + own * l) % k) - now);
                        }
                    }
                }
            }
        }
    }

    /// Number of one-hot indicators equal to 1 under the `{0,1}` convention,
    /// i.e. variables not at the reference level `k-1`.
    pub fn active_indicators(&self, x: &[usize]) -> usize {
        let reference = self.space.k() - 1;
        x.iter().filter(|&&v| v != reference).count()
    }

    /// `k^n x d` matrix of every term at every point (rows in lexicographic
    /// point order). Intended for small test domains only.
    pub fn design_matrix(&self) -> Result<DMatrix<f64>> {
        self.design_matrix_capped(DEFAULT_DOMAIN_CAP)
    }

    pub fn design_matrix_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        let size = self.space.size().unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::DomainTooLarge { size, cap });
        }
        let rows = size as usize;
        let mut m = DMatrix::zeros(rows, self.d());
        for r in 0..rows {
            let p = self.space.point_at(r as u128);
            for t in 0..self.d() {
                m[(r, t)] = self.eval_index(t, p.values());
            }
        }
        Ok(m)
    }
}

/// Convenience wrapper matching the free-function form.
pub fn enumerate_basis(
    space: CategoricalSpace,
    kind: BasisKind,
    max_order: usize,
) -> Result<BasisSpec> {
    BasisSpec::new(space, kind, max_order)
}
