//! Run configuration: a flat `key = value` map, validated into [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use alloc_dichotomy::harness::DEFAULT_CHECKPOINT_RATIO;
use alloc_dichotomy::presets::{Preset, PresetParams};
use alloc_dichotomy::reward::default_delta;
use alloc_dichotomy::{Algorithm, NoiseKind};

/// Every accepted key, in canonical order.
pub const KEYS: [&str; 21] = [
    "algorithm",
    "preset",
    "family",
    "k",
    "a",
    "b",
    "theta",
    "gamma",
    "alpha",
    "slope",
    "gap",
    "beta",
    "lb_pair",
    "horizon",
    "delta",
    "noise",
    "sigma",
    "seeds",
    "checkpoint_ratio",
    "step",
    "output",
];

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_OUTPUT: &str = "regret.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    UnknownKey(String),
    Missing(String),
    Invalid { key: String, message: String },
    Syntax { line: usize, message: String },
    Conflict(String),
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Key the error is about, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) | ConfigError::Missing(k) => Some(k),
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown key '{k}'"),
            ConfigError::Missing(k) => write!(f, "missing required field '{k}'"),
            ConfigError::Invalid { key, message } => {
                write!(f, "invalid value for '{key}': {message}")
            }
            ConfigError::Syntax { line, message } => write!(f, "config line {line}: {message}"),
            ConfigError::Conflict(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithms {
    One(Algorithm),
    All,
}

impl Algorithms {
    /// Algorithms to run on `k` resources; `all` leaves out `k2` unless `k = 2`.
    pub fn list(&self, k: usize) -> Vec<Algorithm> {
        match self {
            Algorithms::One(a) => vec![*a],
            Algorithms::All => Algorithm::ALL
                .into_iter()
                .filter(|&a| a != Algorithm::K2 || k == 2)
                .collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithms::One(a) => a.name(),
            Algorithms::All => "all",
        }
    }
}

/// A reward family repeated over every resource.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Quadratic { a: f64, b: f64 },
    CAlpha { theta: f64, gamma: f64, alpha: f64 },
    Linear { slope: f64 },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Quadratic { .. } => "quadratic",
            Family::CAlpha { .. } => "c_alpha",
            Family::Linear { .. } => "linear",
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Family::Quadratic { a, b } => vec![("a", a), ("b", b)],
            Family::CAlpha {
                theta,
                gamma,
                alpha,
            } => vec![("theta", theta), ("gamma", gamma), ("alpha", alpha)],
            Family::Linear { slope } => vec![("slope", slope)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceChoice {
    Preset {
        preset: Preset,
        params: PresetParams,
    },
    Family(Family),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithms,
    pub instance: InstanceChoice,
    pub k: usize,
    pub horizon: u64,
    pub delta: f64,
    pub noise: NoiseKind,
    pub sigma: f64,
    /// Number of seeds; seeds are `0..seeds`.
    pub seeds: u64,
    pub checkpoint_ratio: f64,
    /// Exponent label for the reference curves; defaults to the instance's.
    pub beta: Option<f64>,
    /// Step constant of the sgd baseline.
    pub step: f64,
    pub output: PathBuf,
}

fn preset_k(preset: Preset) -> usize {
    match preset {
        Preset::QuadraticK4 => 4,
        _ => 2,
    }
}

/// Keys a preset reads besides `beta`.
fn preset_keys(preset: Preset) -> &'static [&'static str] {
    match preset {
        Preset::CAlpha => &["theta", "alpha"],
        Preset::LinearGap => &["gap"],
        Preset::LowerBoundPair => &["lb_pair"],
        Preset::AppendixEBeta2 | Preset::QuadraticK4 => &[],
    }
}

fn family_keys(tag: &str) -> Option<&'static [&'static str]> {
    match tag {
        "quadratic" => Some(&["a", "b"]),
        "c_alpha" | "c-alpha" => Some(&["theta", "gamma", "alpha"]),
        "linear" => Some(&["slope"]),
        _ => None,
    }
}

/// Lower-cases dashes to underscores so `--lb-pair` and `lb_pair` agree.
pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| {
                    ConfigError::invalid(key, format!("expected a number, got '{v}'"))
                })?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(ConfigError::invalid(
                        key,
                        format!("expected a finite number, got '{v}'"),
                    ))
                }
            })
            .transpose()
    }

    fn required_float(&self, key: &str) -> Result<f64, ConfigError> {
        self.float(key)?
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// Accepts plain integers and integral floats such as `1e6`.
    fn integer(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                if let Ok(n) = v.parse::<u64>() {
                    return Ok(n);
                }
                match v.parse::<f64>() {
                    Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
                    _ => Err(ConfigError::invalid(
                        key,
                        format!("expected a non-negative integer, got '{v}'"),
                    )),
                }
            })
            .transpose()
    }
}

impl RunConfig {
    /// Validates a key map. Every key must be known and used by the chosen instance.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        if let Some(unknown) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(unknown.clone()));
        }
        let r = Reader { map };

        let algorithm = match r.raw("algorithm") {
            None => None,
            Some("all") => Some(Algorithms::All),
            Some(other) => Some(Algorithms::One(other.parse().map_err(|_| {
                ConfigError::invalid(
                    "algorithm",
                    format!("expected k2, tree, sgd or all, got '{other}'"),
                )
            })?)),
        };

        let beta = r.float("beta")?;
        if let Some(b) = beta {
            if !(b >= 1.0) {
                return Err(ConfigError::invalid(
                    "beta",
                    format!("beta must be ≥ 1, got {b}"),
                ));
            }
        }

        let (instance, used): (InstanceChoice, Vec<&str>) = match (r.raw("preset"), r.raw("family"))
        {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Conflict(
                    "'preset' and 'family' are mutually exclusive".into(),
                ));
            }
            (None, None) => return Err(ConfigError::Missing("preset".into())),
            (Some(name), None) => {
                let preset: Preset = name.parse().map_err(|_| {
                    let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                    ConfigError::invalid(
                        "preset",
                        format!(
                            "unknown preset '{name}', expected one of {}",
                            names.join(", ")
                        ),
                    )
                })?;
                let defaults = PresetParams::default();
                let pair = match r.integer("lb_pair")? {
                    None => defaults.pair,
                    Some(p @ (1 | 2)) => p as u8,
                    Some(p) => {
                        return Err(ConfigError::invalid(
                            "lb_pair",
                            format!("must be 1 or 2, got {p}"),
                        ))
                    }
                };
                let params = PresetParams {
                    theta: r.float("theta")?.unwrap_or(defaults.theta),
                    alpha: r.float("alpha")?.unwrap_or(defaults.alpha),
                    gap: r.float("gap")?.unwrap_or(defaults.gap),
                    beta: beta.unwrap_or(defaults.beta),
                    pair,
                };
                match preset {
                    Preset::CAlpha if !(params.theta < 0.0) => {
                        return Err(ConfigError::invalid(
                            "theta",
                            format!("must be < 0, got {}", params.theta),
                        ));
                    }
                    Preset::CAlpha if !(params.alpha > 1.0) => {
                        return Err(ConfigError::invalid(
                            "alpha",
                            format!("must be > 1, got {}", params.alpha),
                        ));
                    }
                    Preset::LinearGap if !(params.gap > 0.0 && params.gap <= 1.0) => {
                        return Err(ConfigError::invalid(
                            "gap",
                            format!("must lie in (0, 1], got {}", params.gap),
                        ));
                    }
                    Preset::LowerBoundPair if !(params.beta > 1.0 && params.beta <= 2.0) => {
                        return Err(ConfigError::invalid(
                            "beta",
                            format!("lower-bound-pair needs beta in (1, 2], got {}", params.beta),
                        ));
                    }
                    _ => {}
                }
                let mut used = vec!["preset"];
                used.extend_from_slice(preset_keys(preset));
                (InstanceChoice::Preset { preset, params }, used)
            }
            (None, Some(tag)) => {
                let keys = family_keys(tag).ok_or_else(|| {
                    ConfigError::invalid(
                        "family",
                        format!("unknown family '{tag}', expected quadratic, c_alpha or linear"),
                    )
                })?;
                let family = match keys[0] {
                    "a" => {
                        let (a, b) = (r.required_float("a")?, r.required_float("b")?);
                        if !(a >= 0.0) {
                            return Err(ConfigError::invalid("a", format!("must be ≥ 0, got {a}")));
                        }
                        if !(b >= 2.0 * a) {
                            return Err(ConfigError::invalid(
                                "b",
                                format!("must be ≥ 2a = {}, got {b}", 2.0 * a),
                            ));
                        }
                        Family::Quadratic { a, b }
                    }
                    "theta" => {
                        let theta = r.required_float("theta")?;
                        let gamma = r.required_float("gamma")?;
                        let alpha = r.required_float("alpha")?;
                        if !(theta <= 0.0) {
                            return Err(ConfigError::invalid(
                                "theta",
                                format!("must be ≤ 0, got {theta}"),
                            ));
                        }
                        if !(gamma >= 1.0) {
                            return Err(ConfigError::invalid(
                                "gamma",
                                format!("must be ≥ 1, got {gamma}"),
                            ));
                        }
                        if !(alpha > 1.0) {
                            return Err(ConfigError::invalid(
                                "alpha",
                                format!("must be > 1, got {alpha}"),
                            ));
                        }
                        Family::CAlpha {
                            theta,
                            gamma,
                            alpha,
                        }
                    }
                    _ => {
                        let slope = r.required_float("slope")?;
                        if !(slope >= 0.0) {
                            return Err(ConfigError::invalid(
                                "slope",
                                format!("must be ≥ 0, got {slope}"),
                            ));
                        }
                        Family::Linear { slope }
                    }
                };
                let mut used = vec!["family", "k"];
                used.extend_from_slice(keys);
                (InstanceChoice::Family(family), used)
            }
        };

        let k = match &instance {
            InstanceChoice::Preset { preset, .. } => {
                let k = preset_k(*preset);
                if let Some(given) = r.integer("k")? {
                    if given as usize != k {
                        return Err(ConfigError::invalid(
                            "k",
                            format!("preset {preset} has K = {k}, got {given}"),
                        ));
                    }
                }
                k
            }
            InstanceChoice::Family(_) => match r.integer("k")? {
                None => 2,
                Some(k) if (2..=alloc_dichotomy::tree::MAX_RESOURCES as u64).contains(&k) => {
                    k as usize
                }
                Some(k) => {
                    return Err(ConfigError::invalid(
                        "k",
                        format!(
                            "must lie in [2, {}], got {k}",
                            alloc_dichotomy::tree::MAX_RESOURCES
                        ),
                    ))
                }
            },
        };

        // Without an explicit choice: the binary search for two resources, the tree otherwise.
        let algorithm = algorithm.unwrap_or(Algorithms::One(if k == 2 {
            Algorithm::K2
        } else {
            Algorithm::Tree
        }));
        if algorithm == Algorithms::One(Algorithm::K2) && k != 2 {
            return Err(ConfigError::invalid(
                "algorithm",
                format!("k2 needs k = 2, got k = {k}; use tree"),
            ));
        }

        let horizon = r.integer("horizon")?.unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 {
            return Err(ConfigError::invalid("horizon", "must be ≥ 1"));
        }
        let delta = r.float("delta")?.unwrap_or_else(|| default_delta(horizon));
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ConfigError::invalid(
                "delta",
                format!("must lie in (0, 1), got {delta}"),
            ));
        }
        let noise = match r.raw("noise").unwrap_or("uniform") {
            "uniform" => NoiseKind::Uniform,
            "rademacher" => NoiseKind::Rademacher,
            "zero" => NoiseKind::Zero,
            other => {
                return Err(ConfigError::invalid(
                    "noise",
                    format!("expected uniform, rademacher or zero, got '{other}'"),
                ));
            }
        };
        let sigma = r
            .float("sigma")?
            .unwrap_or(if noise == NoiseKind::Zero { 0.0 } else { 1.0 });
        if !(0.0..=1.0).contains(&sigma) {
            return Err(ConfigError::invalid(
                "sigma",
                format!("must lie in [0, 1], got {sigma}"),
            ));
        }
        let seeds = r.integer("seeds")?.unwrap_or(1);
        if seeds == 0 {
            return Err(ConfigError::invalid("seeds", "must be ≥ 1"));
        }
        let checkpoint_ratio = r
            .float("checkpoint_ratio")?
            .unwrap_or(DEFAULT_CHECKPOINT_RATIO);
        if !(checkpoint_ratio > 1.0) {
            return Err(ConfigError::invalid(
                "checkpoint_ratio",
                format!("must be > 1, got {checkpoint_ratio}"),
            ));
        }
        let step = r.float("step")?.unwrap_or(1.0);
        if !(step > 0.0) {
            return Err(ConfigError::invalid(
                "step",
                format!("must be > 0, got {step}"),
            ));
        }
        let output = PathBuf::from(r.raw("output").unwrap_or(DEFAULT_OUTPUT));
        if output.as_os_str().is_empty() {
            return Err(ConfigError::invalid("output", "path is empty"));
        }

        let always = [
            "algorithm",
            "k",
            "beta",
            "horizon",
            "delta",
            "noise",
            "sigma",
            "seeds",
            "checkpoint_ratio",
            "step",
            "output",
        ];
        if let Some(stray) = map
            .keys()
            .find(|k| !used.contains(&k.as_str()) && !always.contains(&k.as_str()))
        {
            return Err(ConfigError::invalid(
                stray,
                "does not apply to the chosen instance",
            ));
        }

        Ok(Self {
            algorithm,
            instance,
            k,
            horizon,
            delta,
            noise,
            sigma,
            seeds,
            checkpoint_ratio,
            beta,
            step,
            output,
        })
    }

    /// Canonical `key = value` text; parsing it gives back an identical config.
    pub fn canonical_text(&self) -> String {
        let mut lines: Vec<(&str, String)> = vec![("algorithm", self.algorithm.name().to_string())];
        match &self.instance {
            InstanceChoice::Preset { preset, params } => {
                lines.push(("preset", preset.name().to_string()));
                for &key in preset_keys(*preset) {
                    let value = match key {
                        "theta" => params.theta.to_string(),
                        "alpha" => params.alpha.to_string(),
                        "gap" => params.gap.to_string(),
                        _ => params.pair.to_string(),
                    };
                    lines.push((key, value));
                }
            }
            InstanceChoice::Family(family) => {
                lines.push(("family", family.tag().to_string()));
                for (key, value) in family.params() {
                    lines.push((key, value.to_string()));
                }
            }
        }
        lines.push(("k", self.k.to_string()));
        if let Some(beta) = self.beta {
            lines.push(("beta", beta.to_string()));
        }
        lines.push(("horizon", self.horizon.to_string()));
        lines.push(("delta", self.delta.to_string()));
        lines.push(("noise", self.noise.name().to_string()));
        lines.push(("sigma", self.sigma.to_string()));
        lines.push(("seeds", self.seeds.to_string()));
        lines.push(("checkpoint_ratio", self.checkpoint_ratio.to_string()));
        lines.push(("step", self.step.to_string()));
        lines.push(("output", self.output.display().to_string()));
        lines.sort_by_key(|(key, _)| KEYS.iter().position(|k| k == key));
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).collect()
    }
}
