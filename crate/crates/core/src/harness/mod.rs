//! Reproducible Monte Carlo experiments over the coupling samplers, and the
//! statistics and files built from their per-trial `Δ` values.
//!
//! Every `(n, trial)` work item draws from its own ChaCha8 stream, keyed by
//! the master seed and the stream id `(n_index << 32) | trial`, so results do
//! not depend on the number of workers or on scheduling.

mod report;
mod stats;

pub use report::{
    csv_string, emit_csv, emit_json, emit_svg_growth, emit_svg_tails, growth_svg, parse_csv, read_csv, report_emit, summarize, tails_svg, Format, NSummary, Summary,
    CSV_HEADER,
};
pub use stats::{
    exp_moment_calibrate, fit_growth, quantile, tail_report, wilson_interval, BParam, CalibrationReport, CalibrationRow, GrowthFit, Statistic,
    TailReport, TailRow, C_CAP, WILSON_Z,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupler::{PreparedSampler, SamplerKind};
use crate::dist::{DistSpec, GridDist};
use crate::error::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "SA_WORKERS";

/// Smallest number of trials per `n` accepted in a config.
pub const MIN_TRIALS: u64 = 100;

/// Largest `n` (after padding) accepted in a config.
pub const MAX_N: usize = 1 << 22;

/// A distribution given as a compact name (`"rademacher"`) or a full literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistField {
    Name(String),
    Spec(DistSpec),
}

impl DistField {
    pub fn spec(&self) -> Result<DistSpec> {
        match self {
            DistField::Name(s) => DistSpec::parse_name(s),
            DistField::Spec(s) => Ok(s.clone()),
        }
    }
}

/// Discretization applied to a Gaussian summand law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub cells: usize,
    pub span: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { cells: 2049, span: 8.0 }
    }
}

fn default_workers() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_max_rejections() -> u32 {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistField,
    pub sampler: SamplerKind,
    pub n_list: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides the cell count and span of a `gauss` summand law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridParams>,
    #[serde(default = "default_max_rejections")]
    pub max_rejections: u32,
    /// Brownian time step of the Skorokhod baseline (default `0.01·a·b`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skorokhod_dt: Option<f64>,
}

impl ExperimentConfig {
    /// Reads a JSON config; `SA_WORKERS` (if set) replaces `workers`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Ok(w) = std::env::var(WORKERS_ENV) {
            cfg.workers = w.trim().parse().map_err(|_| Error::Config(format!("{WORKERS_ENV}={w} is not a worker count")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list is empty".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n == 0 || n > MAX_N) {
            return Err(Error::Config(format!("n = {n} outside 1..={MAX_N}")));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::Config(format!("trials = {} below the minimum of {MIN_TRIALS}", self.trials)));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.summand_law()?;
        Ok(())
    }

    /// The summand law, with `grid` applied to a Gaussian family.
    pub fn summand_law(&self) -> Result<GridDist> {
        let mut spec = self.distribution.spec()?;
        if let (Some(g), DistSpec::Gauss { n_cells, span, .. }) = (self.grid, &mut spec) {
            *n_cells = g.cells;
            *span = g.span;
        }
        spec.build()
    }

    /// Distinct requested sizes in increasing order; the position in this
    /// list is the `n_index` of the seed stream.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v = self.n_list.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON of every
    /// field except `workers` and `output_dir`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("workers");
            map.remove("output_dir");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// One `(n, trial)` outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub trial: u64,
    pub delta: f64,
    pub rejections: u32,
    /// Stream id `(n_index << 32) | trial` of the trial's generator.
    pub seed_lo: u64,
    /// Master seed.
    pub seed_hi: u64,
}

/// Per-trial results in canonical `(n, trial)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResultSet {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
    /// `(n, padded n)` for every size that was padded with `δ₀` summands.
    pub padding: Vec<(usize, usize)>,
    /// Seconds spent sampling; reported on stderr, never written to files.
    pub wall_clock: f64,
    /// First failure in canonical order; rows after it may be missing.
    pub failure: Option<String>,
}

impl TrialResultSet {
    /// Distinct `n` values in increasing order.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn deltas(&self, n: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.delta).collect()
    }

    /// Fails unless the set was produced by a config with hash `expected`.
    pub fn check_hash(&self, expected: &str) -> Result<()> {
        if self.config_hash != expected {
            return Err(Error::Config(format!("config hash {} does not match expected {expected}", self.config_hash)));
        }
        Ok(())
    }
}

/// Stream id of one work item.
pub fn stream_id(n_index: usize, trial: u64) -> u64 {
    ((n_index as u64) << 32) | trial
}

/// The generator of one work item.
pub fn trial_rng(master: u64, n_index: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream_id(n_index, trial));
    rng
}

/// Runs every `(n, trial)` item of the config on a pool of `workers` threads.
///
/// Sizes that are not powers of two are padded with `δ₀` summands, which
/// leaves `Δ` unchanged. A sampler failure does not abort the run: the
/// remaining items still execute and the set carries the first failure.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TrialResultSet> {
    config.validate()?;
    let law = config.summand_law()?;
    let sizes = config.sizes();
    let mut padding = Vec::new();
    let mut samplers = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let padded = n.next_power_of_two();
        if padded != n {
            padding.push((n, padded));
        }
        let mut leaves = vec![law.clone(); n];
        leaves.resize(padded, GridDist::point_mass(0.0));
        samplers.push(PreparedSampler::new(config.sampler, leaves, config.skorokhod_dt)?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let items: Vec<(usize, u64)> = (0..sizes.len()).flat_map(|k| (0..config.trials).map(move |t| (k, t))).collect();
    let start = Instant::now();
    let outcomes: Vec<Result<TrialRow>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(k, trial)| {
                let mut rng = trial_rng(config.seed, k, trial);
                let (path, rejections) = samplers[k].sample_with_rejection(&mut rng, config.max_rejections)?;
                Ok(TrialRow { n: sizes[k], trial, delta: path.delta, rejections, seed_lo: stream_id(k, trial), seed_hi: config.seed })
            })
            .collect()
    });
    let wall_clock = start.elapsed().as_secs_f64();

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for (o, &(k, trial)) in outcomes.into_iter().zip(&items) {
        match o {
            Ok(r) => rows.push(r),
            Err(e) if failure.is_none() => failure = Some(format!("n={} trial={trial}: {e}", sizes[k])),
            Err(_) => {}
        }
    }
    Ok(TrialResultSet { config_hash: config.hash(), seed: config.seed, rows, padding, wall_clock, failure })
}

#[cfg(test)]
mod tests;
