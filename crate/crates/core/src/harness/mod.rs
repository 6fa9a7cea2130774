//! Regret measurement, reference rates, slope fits and Monte-Carlo experiments.

mod sgd;

pub use sgd::{project_simplex, sgd_baseline, SgdConfig};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::k2::{run_k2, K2Config};
use crate::reward::InstanceSpec;
use crate::scalar::Scalar;
use crate::trace::RunTrace;
use crate::tree::{run_tree, TreeConfig};

/// Twenty checkpoints per decade.
pub const DEFAULT_CHECKPOINT_RATIO: f64 = 1.122_018_454_301_963_3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ALLOC_DICHOTOMY_THREADS";

/// Geometric checkpoints `10 r^i` up to `horizon`, always ending at `horizon`.
pub fn checkpoints(horizon: u64, ratio: f64) -> Result<Vec<u64>> {
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::Parameter(format!(
            "checkpoint ratio must be > 1, got {ratio}"
        )));
    }
    let mut out: Vec<u64> = Vec::new();
    let start = 10u64.min(horizon);
    let mut i = 0i32;
    loop {
        let t = (start as f64 * ratio.powi(i)).round() as u64;
        if t >= horizon {
            break;
        }
        if out.last() != Some(&t) && t >= 1 {
            out.push(t);
        }
        i += 1;
    }
    if horizon > 0 {
        out.push(horizon);
    }
    Ok(out)
}

/// Cumulative and average regret of one run at its checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    pub cumulative: Vec<f64>,
    pub average: Vec<f64>,
    pub final_allocation: Vec<f64>,
}

impl RegretTrace {
    pub fn from_run<T: Scalar>(run: &RunTrace<T>, ratio: f64) -> Result<Self> {
        let mut sink = RegretAccumulator::new(run.horizon, ratio)?;
        for s in &run.segments {
            sink.push(s.gap, s.len);
        }
        let last = run
            .final_allocation()
            .map(|x| x.iter().map(|v| v.as_f64()).collect())
            .unwrap_or_default();
        Ok(sink.finish(last))
    }

    /// Average regret `R(T)`.
    pub fn final_average(&self) -> f64 {
        self.average.last().copied().unwrap_or(0.0)
    }

    pub fn final_cumulative(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// `(t, R(t))` pairs.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.checkpoints
            .iter()
            .zip(&self.average)
            .map(|(&t, &r)| (t as f64, r))
            .collect()
    }

    /// Log-log slope of `R(t)` over the final decade.
    pub fn slope(&self) -> Result<f64> {
        fit_loglog_slope(&self.points())
    }
}

/// Streams per-round gaps into cumulative regret at checkpoints.
#[derive(Debug, Clone)]
pub struct RegretAccumulator {
    horizon: u64,
    checkpoints: Vec<u64>,
    cumulative: Vec<f64>,
    t: u64,
    total: f64,
}

impl RegretAccumulator {
    pub fn new(horizon: u64, ratio: f64) -> Result<Self> {
        let checkpoints = checkpoints(horizon, ratio)?;
        Ok(Self {
            horizon,
            cumulative: Vec::with_capacity(checkpoints.len()),
            checkpoints,
            t: 0,
            total: 0.0,
        })
    }

    /// `len` rounds with instantaneous gap `gap` (clamped at zero).
    pub fn push(&mut self, gap: f64, len: u64) {
        let gap = gap.max(0.0);
        let end = self.t + len;
        while let Some(&c) = self.checkpoints.get(self.cumulative.len()) {
            if c > end {
                break;
            }
            self.cumulative.push(self.total + gap * (c - self.t) as f64);
        }
        self.total += gap * len as f64;
        self.t = end;
    }

    pub fn finish(mut self, final_allocation: Vec<f64>) -> RegretTrace {
        self.checkpoints.truncate(self.cumulative.len());
        let average = self
            .checkpoints
            .iter()
            .zip(&self.cumulative)
            .map(|(&t, &c)| c / t as f64)
            .collect();
        RegretTrace {
            horizon: self.horizon,
            checkpoints: self.checkpoints,
            cumulative: self.cumulative,
            average,
            final_allocation,
        }
    }
}

/// Lower and upper reference rates for a Łojasiewicz exponent `beta` and `K` resources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCurves {
    pub beta: f64,
    pub k: usize,
}

/// Reference rates: for `beta <= 2`, `t^(-beta/2)` and `(t / ln^e t)^(-beta/2)`
/// with `e = ceil(log2 K) + 1`; for `beta > 2`, `1/t` and `ln^e(t) / t` with
/// `e = ceil(log2 K)`.
pub fn reference_curves(beta: f64, k: usize) -> Result<ReferenceCurves> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!("beta must be ≥ 1, got {beta}")));
    }
    if k < 2 {
        return Err(Error::Parameter(format!("K must be >= 2, got {k}")));
    }
    Ok(ReferenceCurves { beta, k })
}

impl ReferenceCurves {
    fn log_k(&self) -> i32 {
        (self.k as f64).log2().ceil() as i32
    }

    pub fn lower(&self, t: f64) -> f64 {
        if self.beta <= 2.0 {
            t.powf(-self.beta / 2.0)
        } else {
            1.0 / t
        }
    }

    pub fn upper(&self, t: f64) -> f64 {
        let ln = t.ln();
        if self.beta <= 2.0 {
            (t / ln.powi(self.log_k() + 1)).powf(-self.beta / 2.0)
        } else {
            ln.powi(self.log_k()) / t
        }
    }
}

/// Ordinary least squares slope of `ln R` against `ln t` over the final decade.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 10 {
        return Err(Error::InsufficientCheckpoints(format!(
            "need at least 10 checkpoints, got {}",
            points.len()
        )));
    }
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(t_min > 0.0 && t_max >= 10.0 * t_min * (1.0 - 1e-12)) {
        return Err(Error::InsufficientCheckpoints(format!(
            "checkpoints span [{t_min}, {t_max}], less than a decade"
        )));
    }
    let window: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 >= t_max / 10.0 * (1.0 - 1e-12))
        .map(|&(t, r)| (t.ln(), r.ln()))
        .collect();
    if window.len() < 10 {
        return Err(Error::InsufficientCheckpoints(format!(
            "only {} checkpoints in the final decade",
            window.len()
        )));
    }
    if window.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::InsufficientCheckpoints(
            "regret must be positive in the final decade".into(),
        ));
    }
    let n = window.len() as f64;
    let mx = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = window.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = window.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Allocation strategy run by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    K2,
    Tree,
    Sgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::K2, Algorithm::Tree, Algorithm::Sgd];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::K2 => "k2",
            Algorithm::Tree => "tree",
            Algorithm::Sgd => "sgd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k2" => Ok(Algorithm::K2),
            "tree" => Ok(Algorithm::Tree),
            "sgd" => Ok(Algorithm::Sgd),
            other => Err(Error::Parameter(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// How to run an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T: Scalar> {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub checkpoint_ratio: f64,
    pub k2: K2Config,
    pub tree: TreeConfig<T>,
    pub sgd: SgdConfig,
    /// Worker cap; falls back to `ALLOC_DICHOTOMY_THREADS`, then to rayon's default.
    pub threads: Option<usize>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(algorithm: Algorithm, seeds: Vec<u64>) -> Self {
        Self {
            algorithm,
            seeds,
            checkpoint_ratio: DEFAULT_CHECKPOINT_RATIO,
            k2: K2Config::default(),
            tree: TreeConfig::default(),
            sgd: SgdConfig::default(),
            threads: None,
        }
    }
}

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: Result<RegretTrace>,
}

impl SeedRun {
    pub fn slope(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|t| t.slope().ok())
    }
}

/// Aggregate over seeds.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub instance: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub horizon: u64,
    pub beta: Option<f64>,
    pub runs: Vec<SeedRun>,
    /// Checkpoints and the mean of `R(t)` over successful seeds.
    pub checkpoints: Vec<u64>,
    pub mean_average: Vec<f64>,
    pub mean_final: f64,
    pub std_final: f64,
    /// Slope of the mean curve over its final decade.
    pub slope: Option<f64>,
}

impl ExperimentResult {
    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    pub fn traces(&self) -> impl Iterator<Item = &RegretTrace> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &Error)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e)))
    }

    pub fn all_succeeded(&self) -> bool {
        self.runs.iter().all(|r| r.outcome.is_ok())
    }

    /// `(t, mean R(t))` pairs.
    pub fn mean_points(&self) -> Vec<(f64, f64)> {
        self.checkpoints
            .iter()
            .zip(&self.mean_average)
            .map(|(&t, &r)| (t as f64, r))
            .collect()
    }
}

/// Runs one algorithm on one instance and returns its regret at checkpoints.
pub fn run_single<T: Scalar>(
    instance: &InstanceSpec<T>,
    algorithm: Algorithm,
    config: &ExperimentConfig<T>,
) -> Result<RegretTrace> {
    let run = match algorithm {
        Algorithm::K2 => run_k2(instance, &config.k2)?,
        Algorithm::Tree => run_tree(instance, &config.tree)?,
        Algorithm::Sgd => {
            let sgd = SgdConfig {
                checkpoint_ratio: config.checkpoint_ratio,
                ..config.sgd.clone()
            };
            return sgd_baseline(instance, &sgd);
        }
    };
    RegretTrace::from_run(&run, config.checkpoint_ratio)
}

fn thread_cap(config_threads: Option<usize>) -> Option<usize> {
    config_threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

/// Runs every seed (in parallel), keeping per-seed failures without aborting the rest.
pub fn run_experiment<T: Scalar>(
    instance: &InstanceSpec<T>,
    config: &ExperimentConfig<T>,
) -> Result<ExperimentResult> {
    if config.seeds.is_empty() {
        return Err(Error::Parameter("at least one seed is required".into()));
    }
    checkpoints(instance.horizon, config.checkpoint_ratio)?;
    let job = || -> Vec<SeedRun> {
        config
            .seeds
            .par_iter()
            .map(|&seed| SeedRun {
                seed,
                outcome: run_single(&instance.with_seed(seed), config.algorithm, config),
            })
            .collect()
    };
    let runs = match thread_cap(config.threads) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?
            .install(job),
        None => job(),
    };
    Ok(aggregate(instance, config.algorithm, runs))
}

fn aggregate<T: Scalar>(
    instance: &InstanceSpec<T>,
    algorithm: Algorithm,
    runs: Vec<SeedRun>,
) -> ExperimentResult {
    let traces: Vec<&RegretTrace> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let checkpoints = traces
        .first()
        .map(|t| t.checkpoints.clone())
        .unwrap_or_default();
    let n = traces.len() as f64;
    let mean_average: Vec<f64> = (0..checkpoints.len())
        .map(|i| traces.iter().map(|t| t.average[i]).sum::<f64>() / n)
        .collect();
    let finals: Vec<f64> = traces.iter().map(|t| t.final_average()).collect();
    let mean_final = if finals.is_empty() {
        f64::NAN
    } else {
        finals.iter().sum::<f64>() / n
    };
    let std_final = if finals.len() < 2 {
        0.0
    } else {
        (finals.iter().map(|f| (f - mean_final).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let points: Vec<(f64, f64)> = checkpoints
        .iter()
        .zip(&mean_average)
        .map(|(&t, &r)| (t as f64, r))
        .collect();
    ExperimentResult {
        instance: instance.name.clone(),
        algorithm,
        k: instance.k(),
        horizon: instance.horizon,
        beta: instance.beta_label,
        runs,
        checkpoints,
        mean_average,
        mean_final,
        std_final,
        slope: fit_loglog_slope(&points).ok(),
    }
}
