//! Shared domain types: categorical spaces and points, the black-box
//! evaluation interface with budget accounting, run traces and seeded RNG
//! streams.
//!
//! Levels are 0-based everywhere, including CSV output.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `[k]^n` with a uniform cardinality `k` for every variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategoricalSpace {
    n: usize,
    k: usize,
}

impl CategoricalSpace {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k < 2 {
            return Err(Error::InvalidSpace { n, k });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `k^n`, or `None` when it does not fit in 128 bits.
    pub fn size(&self) -> Option<u128> {
        let n = u32::try_from(self.n).ok()?;
        (self.k as u128).checked_pow(n)
    }

    pub fn validate(&self, values: &[usize]) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "point has {} values, space has n = {}",
                values.len(),
                self.n
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v >= self.k) {
            return Err(Error::DimensionMismatch(format!(
                "value {v} at variable {i} is outside [0, {})",
                self.k
            )));
        }
        Ok(())
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> CategoricalPoint {
        CategoricalPoint::new_unchecked((0..self.n).map(|_| rng.random_range(0..self.k)).collect())
    }

    /// The `index`-th point in lexicographic order (variable 0 most significant).
    pub fn point_at(&self, mut index: u128) -> CategoricalPoint {
        let mut values = vec![0; self.n];
        for v in values.iter_mut().rev() {
            *v = (index % self.k as u128) as usize;
            index /= self.k as u128;
        }
        CategoricalPoint::new_unchecked(values)
    }
}

/// An assignment `x in [k]^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoricalPoint(Vec<usize>);

impl CategoricalPoint {
    pub fn new(space: &CategoricalSpace, values: Vec<usize>) -> Result<Self> {
        space.validate(&values)?;
        Ok(Self(values))
    }

    pub fn new_unchecked(values: Vec<usize>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Parses the `v0|v1|...` form used in trace files.
    pub fn parse_pipe(s: &str) -> Result<Self> {
        s.split('|')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidArgument(format!("bad point entry {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for CategoricalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl AsRef<[usize]> for CategoricalPoint {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub step: usize,
    pub point: CategoricalPoint,
    pub value: f64,
    pub best_so_far: f64,
}

/// Append-only sequence of true black-box evaluations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    records: Vec<EvaluationRecord>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    step: usize,
    value: f64,
    best_so_far: f64,
    point: String,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: CategoricalPoint, value: f64) -> &EvaluationRecord {
        let best_so_far = match self.records.last() {
            Some(last) if last.best_so_far <= value => last.best_so_far,
            _ => value,
        };
        let step = self.records.len() + 1;
        self.records.push(EvaluationRecord {
            step,
            point,
            value,
            best_so_far,
        });
        self.records.last().unwrap()
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }

    pub fn best_value(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    pub fn argmin(&self) -> Result<&CategoricalPoint> {
        argmin_trace(&self.records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(CsvRow {
                step: r.step,
                value: r.value,
                best_so_far: r.best_so_far,
                point: r.point.to_string(),
            })?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            records.push(EvaluationRecord {
                step: row.step,
                value: row.value,
                best_so_far: row.best_so_far,
                point: CategoricalPoint::parse_pipe(&row.point)?,
            });
        }
        Ok(Self { records })
    }
}

/// Point with the minimal observed value; ties go to the earliest step.
pub fn argmin_trace(records: &[EvaluationRecord]) -> Result<&CategoricalPoint> {
    let mut best: Option<&EvaluationRecord> = None;
    for r in records {
        if best.is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    best.map(|r| &r.point).ok_or(Error::EmptyTrace)
}

/// Seed for a run. Independent RNG streams are derived per consumer so that,
/// e.g., black-box noise does not depend on the optimizer's draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Optimizer = 0,
    Noise = 1,
    Chain = 2,
    Schema = 3,
}

impl RngSeed {
    pub fn rng(self, stream: RngStream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream as u64);
        rng
    }
}

/// A scored categorical function. Implementations own any state that
/// evaluation mutates (noise RNG, external process handles).
pub trait BlackBox {
    fn space(&self) -> CategoricalSpace;

    /// Scores a point already validated against [`BlackBox::space`].
    fn score(&mut self, point: &[usize]) -> Result<f64>;

    /// Slot structure for design problems; `None` for unconstrained spaces.
    fn schema(&self) -> Option<crate::mcts::DesignSchema> {
        None
    }

    fn name(&self) -> String {
        "black_box".to_string()
    }
}

impl<B: BlackBox + ?Sized> BlackBox for Box<B> {
    fn space(&self) -> CategoricalSpace {
        (**self).space()
    }
    fn score(&mut self, point: &[usize]) -> Result<f64> {
        (**self).score(point)
    }
    fn schema(&self) -> Option<crate::mcts::DesignSchema> {
        (**self).schema()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<B: BlackBox + ?Sized> BlackBox for &mut B {
    fn space(&self) -> CategoricalSpace {
        (**self).space()
    }
    fn score(&mut self, point: &[usize]) -> Result<f64> {
        (**self).score(point)
    }
    fn schema(&self) -> Option<crate::mcts::DesignSchema> {
        (**self).schema()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Wraps a black box with an evaluation counter and an optional budget.
/// Every successful [`CountedBox::evaluate`] is exactly one true call.
pub struct CountedBox<B> {
    inner: B,
    used: usize,
    budget: Option<usize>,
}

impl<B: BlackBox> CountedBox<B> {
    pub fn new(inner: B, budget: Option<usize>) -> Self {
        Self {
            inner,
            used: 0,
            budget,
        }
    }

    pub fn evaluate(&mut self, point: &CategoricalPoint) -> Result<f64> {
        self.inner.space().validate(point.values())?;
        if let Some(budget) = self.budget {
            if self.used >= budget {
                return Err(Error::BudgetExhausted { budget });
            }
        }
        let value = self.inner.score(point.values())?;
        self.used += 1;
        Ok(value)
    }

    pub fn evaluations(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> Option<usize> {
        self.budget.map(|b| b.saturating_sub(self.used))
    }

    pub fn space(&self) -> CategoricalSpace {
        self.inner.space()
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

/// Black box backed by a closure; mostly for synthetic problems.
pub struct FnBox<F> {
    space: CategoricalSpace,
    f: F,
    name: String,
}

impl<F: FnMut(&[usize]) -> f64> FnBox<F> {
    pub fn new(space: CategoricalSpace, f: F) -> Self {
        Self {
            space,
            f,
            name: "fn".to_string(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl<F: FnMut(&[usize]) -> f64> BlackBox for FnBox<F> {
    fn space(&self) -> CategoricalSpace {
        self.space
    }

    fn score(&mut self, point: &[usize]) -> Result<f64> {
        Ok((self.f)(point))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
