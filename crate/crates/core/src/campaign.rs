//! Multi-seed campaigns: declarative config, parallel cells, aggregated
//! best-so-far curves and timing tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::{
    ExternalBox, LatinSquareBox, PermutedBox, RnaDesignBox, RnaOptimizeBox, DEFAULT_LATIN_NOISE,
};
use crate::domain::{BlackBox, CategoricalSpace, RngSeed};
use crate::error::{Error, Result};
use crate::optimizer::{run_experiment, Algorithm, ExperimentConfig, RunOutcome};
use crate::rna::{read_target, RnaFolder, DEFAULT_MIN_LOOP};

/// Folding back end for the RNA boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FolderConfig {
    /// Command line of an external folder; the internal folder when absent.
    pub external: Option<String>,
    pub min_loop: usize,
}

impl Default for FolderConfig {
    fn default() -> Self {
        Self {
            external: None,
            min_loop: DEFAULT_MIN_LOOP,
        }
    }
}

impl FolderConfig {
    pub fn build(&self) -> Result<RnaFolder> {
        match &self.external {
            Some(cmd) => RnaFolder::external(cmd),
            None => Ok(RnaFolder::InternalNussinov {
                min_loop: self.min_loop,
            }),
        }
    }
}

fn default_latin_k() -> usize {
    5
}

fn default_latin_noise() -> f64 {
    DEFAULT_LATIN_NOISE
}

fn default_rna_length() -> usize {
    30
}

/// The black box a campaign optimizes. Boxes are rebuilt per cell so
/// every seed sees its own noise stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoxConfig {
    LatinSquare {
        #[serde(default = "default_latin_k")]
        k: usize,
        #[serde(default = "default_latin_noise")]
        noise: f64,
        /// Level relabeling applied before scoring.
        #[serde(default)]
        permutation: Option<Vec<usize>>,
    },
    RnaOptimize {
        #[serde(default = "default_rna_length")]
        n: usize,
        #[serde(default)]
        folder: FolderConfig,
    },
    RnaDesign {
        /// Dot-bracket target given inline.
        #[serde(default)]
        target: Option<String>,
        /// File holding the dot-bracket target.
        #[serde(default)]
        target_file: Option<PathBuf>,
        #[serde(default)]
        folder: FolderConfig,
    },
    External {
        n: usize,
        k: usize,
        command: String,
    },
}

impl BoxConfig {
    pub fn build(&self, seed: RngSeed) -> Result<Box<dyn BlackBox + Send>> {
        Ok(match self {
            BoxConfig::LatinSquare {
                k,
                noise,
                permutation,
            } => {
                let inner = LatinSquareBox::new(*k, *noise, seed)?;
                match permutation {
                    Some(p) => Box::new(PermutedBox::new(inner, p.clone())?),
                    None => Box::new(inner),
                }
            }
            BoxConfig::RnaOptimize { n, folder } => {
                Box::new(RnaOptimizeBox::new(*n, folder.build()?)?)
            }
            BoxConfig::RnaDesign {
                target,
                target_file,
                folder,
            } => {
                let target = match (target, target_file) {
                    (Some(t), None) => t.trim().to_string(),
                    (None, Some(path)) => read_target(path)?,
                    _ => {
                        return Err(Error::config(
                            "box.target",
                            "give exactly one of target or target_file",
                        ))
                    }
                };
                Box::new(RnaDesignBox::new(&target, folder.build()?)?)
            }
            BoxConfig::External { n, k, command } => {
                Box::new(ExternalBox::new(CategoricalSpace::new(*n, *k)?, command)?)
            }
        })
    }
}

/// Either an explicit seed list or a count meaning `1..=count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count(c) => (1..=*c).collect(),
            SeedSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CampaignFile {
    #[serde(default = "default_name")]
    name: String,
    budget: usize,
    seeds: SeedSpec,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(rename = "box")]
    black_box: BoxConfig,
    algorithms: BTreeMap<String, toml::Table>,
}

fn default_name() -> String {
    "campaign".into()
}

/// A validated campaign: one experiment per labeled algorithm section.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub name: String,
    pub budget: usize,
    pub seeds: Vec<u64>,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub black_box: BoxConfig,
    /// Label to settings, sorted by label.
    pub experiments: BTreeMap<String, ExperimentConfig>,
}

impl CampaignConfig {
    pub fn new(
        name: impl Into<String>,
        budget: usize,
        seeds: Vec<u64>,
        black_box: BoxConfig,
    ) -> Self {
        Self {
            name: name.into(),
            budget,
            seeds,
            jobs: None,
            out: None,
            black_box,
            experiments: BTreeMap::new(),
        }
    }

    /// Adds an experiment; its budget is overwritten by the campaign's.
    pub fn with_experiment(
        mut self,
        label: impl Into<String>,
        mut config: ExperimentConfig,
    ) -> Self {
        config.budget = self.budget;
        self.experiments.insert(label.into(), config);
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: CampaignFile =
            toml::from_str(text).map_err(|e| Error::config(toml_field(&e), e.to_string()))?;
        let mut experiments = BTreeMap::new();
        for (label, mut table) in file.algorithms {
            if !table.contains_key("algorithm") {
                let alg: Algorithm = label.parse().map_err(|_| {
                    Error::config(
                        format!("algorithms.{label}.algorithm"),
                        format!("{label:?} is not an algorithm name; set `algorithm` explicitly"),
                    )
                })?;
                table.insert("algorithm".into(), toml::Value::String(alg.as_str().into()));
            }
            if table.contains_key("budget") {
                return Err(Error::config(
                    format!("algorithms.{label}.budget"),
                    "budget is set once for the whole campaign",
                ));
            }
            table.insert("budget".into(), toml::Value::Integer(file.budget as i64));
            let config: ExperimentConfig =
                toml::Value::Table(table)
                    .try_into()
                    .map_err(|e: toml::de::Error| {
                        Error::config(format!("algorithms.{label}"), e.message().to_string())
                    })?;
            experiments.insert(label, config);
        }
        let config = Self {
            name: file.name,
            budget: file.budget,
            seeds: file.seeds.seeds(),
            jobs: file.jobs,
            out: file.out,
            black_box: file.black_box,
            experiments,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.jobs == Some(0) {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        if self.experiments.is_empty() {
            return Err(Error::config(
                "algorithms",
                "at least one algorithm section is required",
            ));
        }
        for (label, exp) in &self.experiments {
            if label.is_empty()
                || !label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::config(
                    format!("algorithms.{label}"),
                    "labels may use only letters, digits, '_' and '-'",
                ));
            }
            exp.validate().map_err(|e| match e {
                Error::Config { field, message } => {
                    Error::config(format!("algorithms.{label}.{field}"), message)
                }
                other => other,
            })?;
        }
        Ok(())
    }
}

fn toml_field(e: &toml::de::Error) -> String {
    // Name the offending key from the message when toml reports one.
    let msg = e.message();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "<config>".into()
}

/// One finished (experiment, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub label: String,
    pub seed: u64,
    pub outcome: RunOutcome,
}

/// Aggregate over seeds for one labeled experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub label: String,
    pub algorithm: Algorithm,
    /// Mean best-so-far per step; length equals the budget.
    pub mean: Vec<f64>,
    /// Standard error of the mean per step.
    pub sem: Vec<f64>,
    pub seconds_per_step: f64,
    pub seconds_per_step_sem: f64,
    /// Final best per seed, in seed order.
    pub final_best: Vec<(u64, f64)>,
}

impl AlgorithmSummary {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("budget is positive")
    }

    pub fn final_sem(&self) -> f64 {
        *self.sem.last().expect("budget is positive")
    }

    /// Mean and SEM of best-so-far at a 1-based step.
    pub fn at_step(&self, step: usize) -> (f64, f64) {
        (self.mean[step - 1], self.sem[step - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub name: String,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl CampaignSummary {
    pub fn get(&self, label: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.label == label)
    }

    /// `label,algorithm,step,mean,sem`.
    pub fn write_summary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["label", "algorithm", "step", "mean", "sem"])?;
        for a in &self.algorithms {
            for (i, (m, s)) in a.mean.iter().zip(&a.sem).enumerate() {
                w.write_record([
                    a.label.clone(),
                    a.algorithm.to_string(),
                    (i + 1).to_string(),
                    m.to_string(),
                    s.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<summary>", e))?;
        Ok(())
    }

    /// `label,algorithm,seconds_per_step,sem,runs`.
    pub fn write_timing<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["label", "algorithm", "seconds_per_step", "sem", "runs"])?;
        for a in &self.algorithms {
            w.write_record([
                a.label.clone(),
                a.algorithm.to_string(),
                format!("{:.6}", a.seconds_per_step),
                format!("{:.6}", a.seconds_per_step_sem),
                a.final_best.len().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<timing>", e))?;
        Ok(())
    }

    /// `label,algorithm,seed,best`.
    pub fn write_final<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["label", "algorithm", "seed", "best"])?;
        for a in &self.algorithms {
            for (seed, best) in &a.final_best {
                w.write_record([
                    a.label.clone(),
                    a.algorithm.to_string(),
                    seed.to_string(),
                    best.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<final>", e))?;
        Ok(())
    }

    /// Human-readable final-best table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>10} {:>10} {:>12}\n",
            "algorithm", "mean", "sem", "s/step"
        );
        for a in &self.algorithms {
            out.push_str(&format!(
                "{:<16} {:>10.4} {:>10.4} {:>12.6}\n",
                a.label,
                a.final_mean(),
                a.final_sem(),
                a.seconds_per_step
            ));
        }
        out
    }
}

/// Sample mean and standard error (`sd / sqrt(n)`, zero for one sample).
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of a difference of two independent means.
pub fn pooled_sem(sem_a: f64, sem_b: f64) -> f64 {
    (sem_a * sem_a + sem_b * sem_b).sqrt()
}

/// One-sided test that mean `a` is below mean `b` by more than two pooled
/// standard errors.
pub fn beats(a: (f64, f64), b: (f64, f64)) -> bool {
    b.0 - a.0 > 2.0 * pooled_sem(a.1, b.1)
}

/// Best-so-far padded with its last value to `budget` entries.
fn padded_curve(outcome: &RunOutcome, budget: usize) -> Result<Vec<f64>> {
    let mut curve = outcome.trace.best_so_far();
    let last = *curve.last().ok_or(Error::EmptyTrace)?;
    curve.truncate(budget);
    curve.resize(budget, last);
    Ok(curve)
}

pub fn summarize(config: &CampaignConfig, cells: &[CellResult]) -> Result<CampaignSummary> {
    let mut algorithms = Vec::new();
    for (label, exp) in &config.experiments {
        let mut runs: Vec<&CellResult> = cells.iter().filter(|c| &c.label == label).collect();
        runs.sort_by_key(|c| c.seed);
        if runs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no finished runs for {label}"
            )));
        }
        let curves = runs
            .iter()
            .map(|c| padded_curve(&c.outcome, config.budget))
            .collect::<Result<Vec<_>>>()?;
        let mut mean = Vec::with_capacity(config.budget);
        let mut sem = Vec::with_capacity(config.budget);
        let mut column = vec![0.0; curves.len()];
        for step in 0..config.budget {
            for (slot, curve) in column.iter_mut().zip(&curves) {
                *slot = curve[step];
            }
            let (m, s) = mean_sem(&column);
            mean.push(m);
            sem.push(s);
        }
        let times: Vec<f64> = runs.iter().map(|c| c.outcome.seconds_per_step()).collect();
        let (seconds_per_step, seconds_per_step_sem) = mean_sem(&times);
        algorithms.push(AlgorithmSummary {
            label: label.clone(),
            algorithm: exp.algorithm,
            final_best: runs
                .iter()
                .zip(&curves)
                .map(|(c, curve)| (c.seed, curve[config.budget - 1]))
                .collect(),
            mean,
            sem,
            seconds_per_step,
            seconds_per_step_sem,
        });
    }
    Ok(CampaignSummary {
        name: config.name.clone(),
        budget: config.budget,
        seeds: config.seeds.clone(),
        algorithms,
    })
}

/// Runs every (experiment, seed) cell on a bounded pool. Results come back
/// sorted by label, then seed, whatever the completion order.
pub fn run_cells(config: &CampaignConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let cells: Vec<(&String, &ExperimentConfig, u64)> = config
        .experiments
        .iter()
        .flat_map(|(label, exp)| config.seeds.iter().map(move |&s| (label, exp, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<CellResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(label, exp, seed)| {
                let mut exp = exp.clone();
                exp.budget = config.budget;
                let mut bb = config.black_box.build(RngSeed(seed))?;
                let outcome = run_experiment(&exp, bb.as_mut(), RngSeed(seed))?;
                log::info!("{label} seed {seed}: best {:?}", outcome.trace.best_value());
                Ok(CellResult {
                    label: label.clone(),
                    seed,
                    outcome,
                })
            })
            .collect()
    });
    let mut out = results.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.label.cmp(&b.label).then(a.seed.cmp(&b.seed)));
    Ok(out)
}

/// Paths of the files a campaign writes.
#[derive(Debug, Clone)]
pub struct CampaignArtifacts {
    pub traces: Vec<PathBuf>,
    pub summary: PathBuf,
    pub timing: PathBuf,
    pub final_best: PathBuf,
}

pub fn write_artifacts(
    dir: &Path,
    cells: &[CellResult],
    summary: &CampaignSummary,
) -> Result<CampaignArtifacts> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut traces = Vec::new();
    for c in cells {
        let path = dir.join(format!("trace_{}_{}.csv", c.label, c.seed));
        c.outcome.trace.save(&path)?;
        traces.push(path);
    }
    let create = |name: &str| -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
        let path = dir.join(name);
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, std::io::BufWriter::new(f)))
    };
    let (summary_path, w) = create("summary.csv")?;
    summary.write_summary(w)?;
    let (timing_path, w) = create("timing.csv")?;
    summary.write_timing(w)?;
    let (final_path, w) = create("final.csv")?;
    summary.write_final(w)?;
    Ok(CampaignArtifacts {
        traces,
        summary: summary_path,
        timing: timing_path,
        final_best: final_path,
    })
}

/// Runs a campaign and, when `out` is set, writes its artifacts there.
pub fn run_campaign(
    config: &CampaignConfig,
    out: Option<&Path>,
) -> Result<(CampaignSummary, Option<CampaignArtifacts>)> {
    let cells = run_cells(config)?;
    let summary = summarize(config, &cells)?;
    let artifacts = match out.or(config.out.as_deref()) {
        Some(dir) => Some(write_artifacts(dir, &cells, &summary)?),
        None => None,
    };
    Ok((summary, artifacts))
}
