//! Command-line front end: configuration, experiment execution and CSV output.

// NaN must fail validation, so range checks are written as `!(x >= lo)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

use alloc_dichotomy::harness::{run_experiment, ExperimentConfig, SgdConfig};
use alloc_dichotomy::presets::build_preset;
use alloc_dichotomy::{Algorithm, ExperimentResult, InstanceSpec, NoiseModel, RewardFunction};

pub use config::{parse_config_text, Algorithms, ConfigError, Family, InstanceChoice, RunConfig};
pub use output::{emit_csv, format_number, summary_path, OutputError};

/// Regret experiments for adaptive budget allocation under noisy gradients.
///
/// Flags override keys read from `--config`.
#[derive(Debug, Parser)]
#[command(name = "alloc-dichotomy", version)]
pub struct Cli {
    /// Plain-text `key = value` file; `#` starts a comment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the canonical configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    /// k2, tree, sgd or all.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// appendix-e-beta2, c-alpha, linear-gap, lower-bound-pair or quadratic-k4.
    #[arg(long)]
    pub preset: Option<String>,
    /// quadratic, c_alpha or linear, repeated over all K resources.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub slope: Option<String>,
    #[arg(long)]
    pub gap: Option<String>,
    /// Exponent of the reference curves (and of lower-bound-pair).
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long)]
    pub lb_pair: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    /// Confidence level, default 2 / T^2.
    #[arg(long)]
    pub delta: Option<String>,
    /// uniform, rademacher or zero.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,
    /// Number of seeds; runs seeds 0..n.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub checkpoint_ratio: Option<String>,
    /// Step constant of the sgd baseline.
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("cannot read config file {}: {source}", path.display())]
    ConfigFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Output(#[from] OutputError),
    #[error("{0}")]
    Run(#[from] alloc_dichotomy::Error),
}

impl Cli {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs: [(&str, Option<String>); 21] = [
            ("algorithm", self.algorithm.clone()),
            ("preset", self.preset.clone()),
            ("family", self.family.clone()),
            ("k", self.k.clone()),
            ("a", self.a.clone()),
            ("b", self.b.clone()),
            ("theta", self.theta.clone()),
            ("gamma", self.gamma.clone()),
            ("alpha", self.alpha.clone()),
            ("slope", self.slope.clone()),
            ("gap", self.gap.clone()),
            ("beta", self.beta.clone()),
            ("lb_pair", self.lb_pair.clone()),
            ("horizon", self.horizon.clone()),
            ("delta", self.delta.clone()),
            ("noise", self.noise.clone()),
            ("sigma", self.sigma.clone()),
            ("seeds", self.seeds.clone()),
            ("checkpoint_ratio", self.checkpoint_ratio.clone()),
            ("step", self.step.clone()),
            (
                "output",
                self.output.as_ref().map(|p| p.display().to_string()),
            ),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }

    /// Merges the config file (if any) with the flags and validates the result.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut map = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|source| CliError::ConfigFile {
                        path: path.clone(),
                        source,
                    })?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        map.extend(self.flags());
        Ok(RunConfig::from_map(&map)?)
    }
}

/// Parses a full argv (program name first) into a validated config.
pub fn parse_config<I, S>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        ConfigError::Conflict(
            e.render()
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .to_string(),
        )
    })?;
    cli.run_config()
}

fn family_function(family: &Family) -> alloc_dichotomy::Result<RewardFunction<f64>> {
    match *family {
        Family::Quadratic { a, b } => RewardFunction::quadratic(a, b),
        Family::CAlpha {
            theta,
            gamma,
            alpha,
        } => RewardFunction::c_alpha(theta, gamma, alpha),
        Family::Linear { slope } => RewardFunction::linear(slope),
    }
}

/// Default reference exponent for a family instance.
fn family_beta(family: &Family) -> f64 {
    match *family {
        Family::Quadratic { a, .. } if a > 0.0 => 2.0,
        Family::CAlpha { theta, alpha, .. } if theta < 0.0 => alpha / (alpha - 1.0),
        // Linear (or flat) arms: fast regime.
        _ => 3.0,
    }
}

pub fn build_instance(config: &RunConfig) -> alloc_dichotomy::Result<InstanceSpec<f64>> {
    let noise = NoiseModel::new(config.noise, config.sigma)?;
    let instance = match &config.instance {
        InstanceChoice::Preset { preset, params } => build_preset(
            *preset,
            params,
            noise,
            config.horizon,
            Some(config.delta),
            0,
        )?,
        InstanceChoice::Family(family) => {
            let f = family_function(family)?;
            InstanceSpec::new(vec![f; config.k], noise, config.horizon, config.delta, 0)?
                .with_beta_label(family_beta(family))
                .with_name(format!("{}-k{}", family.tag(), config.k))
        }
    };
    Ok(match config.beta {
        Some(beta) => instance.with_beta_label(beta),
        None => instance,
    })
}

/// Output file of one algorithm: the configured path, or `<stem>.<alg>.csv` when running all.
pub fn output_path(config: &RunConfig, algorithm: Algorithm) -> PathBuf {
    match config.algorithm {
        Algorithms::One(_) => config.output.clone(),
        Algorithms::All => {
            let s = config.output.as_os_str().to_string_lossy();
            let stem = s.strip_suffix(".csv").unwrap_or(&s);
            PathBuf::from(format!("{stem}.{}.csv", algorithm.name()))
        }
    }
}

pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub path: PathBuf,
    pub result: ExperimentResult,
}

/// Runs every requested algorithm and writes its CSV files.
pub fn execute(config: &RunConfig) -> Result<Vec<AlgorithmRun>, CliError> {
    let instance = build_instance(config)?;
    let mut runs = Vec::new();
    for algorithm in config.algorithm.list(config.k) {
        let mut experiment = ExperimentConfig::new(algorithm, config.seed_list());
        experiment.checkpoint_ratio = config.checkpoint_ratio;
        experiment.sgd = SgdConfig {
            step: config.step,
            ..SgdConfig::default()
        };
        let result = run_experiment(&instance, &experiment)?;
        let path = output_path(config, algorithm);
        emit_csv(&result, &path)?;
        runs.push(AlgorithmRun {
            algorithm,
            path,
            result,
        });
    }
    Ok(runs)
}

/// One-line human summary of a run.
pub fn describe(run: &AlgorithmRun) -> String {
    let r = &run.result;
    let slope = r
        .slope
        .map(|s| format!("{s:.3}"))
        .unwrap_or_else(|| "n/a".into());
    format!(
        "{}: {} seeds ok of {}, R(T) = {} ± {}, final-decade slope {slope}, wrote {}",
        run.algorithm,
        r.traces().count(),
        r.runs.len(),
        format_number(r.mean_final),
        format_number(r.std_final),
        display(&run.path),
    )
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
