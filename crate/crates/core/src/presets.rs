//! Named experiment instances.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::reward::{
    make_c_alpha_boundary_pair, make_experiment_pair_beta2, make_lower_bound_instance,
    InstanceSpec, NoiseModel, RewardFunction,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `f1(x) = 5/6 - 5/48 (2 - x)^3`, `f2` its `gamma = 11/5` sibling; profile `-(x - 0.4)^2`.
    AppendixEBeta2,
    /// `C_alpha` pair with optimum on the boundary, exponent `alpha / (alpha - 1)`.
    CAlpha,
    /// Two linear arms with slopes `1` and `1 - gap`.
    LinearGap,
    /// One of the two indistinguishable lower-bound pairs.
    LowerBoundPair,
    /// Four copies of `-x^2 + 2x`.
    QuadraticK4,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::AppendixEBeta2,
        Preset::CAlpha,
        Preset::LinearGap,
        Preset::LowerBoundPair,
        Preset::QuadraticK4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::AppendixEBeta2 => "appendix-e-beta2",
            Preset::CAlpha => "c-alpha",
            Preset::LinearGap => "linear-gap",
            Preset::LowerBoundPair => "lower-bound-pair",
            Preset::QuadraticK4 => "quadratic-k4",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown preset '{s}'")))
    }
}

/// Parameters the presets read; unused ones are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetParams {
    /// `c-alpha`: curvature, must be < 0.
    pub theta: f64,
    /// `c-alpha`: exponent `alpha > 1`.
    pub alpha: f64,
    /// `linear-gap`: slope difference in `(0, 1]`.
    pub gap: f64,
    /// `lower-bound-pair`: exponent in `(1, 2]`.
    pub beta: f64,
    /// `lower-bound-pair`: which pair, 1 or 2.
    pub pair: u8,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            theta: -0.5,
            alpha: 3.0,
            gap: 0.5,
            beta: 1.5,
            pair: 1,
        }
    }
}

/// Reward functions and the exponent label of a preset.
pub fn preset_functions<T: Scalar>(
    preset: Preset,
    params: &PresetParams,
    horizon: u64,
) -> Result<(Vec<RewardFunction<T>>, f64)> {
    match preset {
        Preset::AppendixEBeta2 => {
            let (f1, f2) = make_experiment_pair_beta2();
            Ok((vec![f1, f2], 2.0))
        }
        Preset::CAlpha => {
            let (f1, f2) = make_c_alpha_boundary_pair(T::of(params.theta), T::of(params.alpha))?;
            Ok((vec![f1, f2], params.alpha / (params.alpha - 1.0)))
        }
        Preset::LinearGap => {
            if !(params.gap > 0.0 && params.gap <= 1.0) {
                return Err(Error::Parameter(format!(
                    "gap must lie in (0, 1], got {}",
                    params.gap
                )));
            }
            let f1 = RewardFunction::linear(T::one())?;
            let f2 = RewardFunction::linear(T::of(1.0 - params.gap))?;
            // Linear arms satisfy the inequality for every beta; label them in the fast regime.
            Ok((vec![f1, f2], 3.0))
        }
        Preset::LowerBoundPair => {
            let instance = make_lower_bound_instance(T::of(params.beta), horizon)?;
            let (f1, f2) = match params.pair {
                1 => instance.pair,
                2 => instance.tilde_pair,
                other => {
                    return Err(Error::Parameter(format!(
                        "lb_pair must be 1 or 2, got {other}"
                    )))
                }
            };
            Ok((vec![f1, f2], params.beta))
        }
        Preset::QuadraticK4 => {
            let f = RewardFunction::quadratic(T::one(), T::of(2.0))?;
            Ok((vec![f; 4], 2.0))
        }
    }
}

/// Full instance for a preset.
pub fn build_preset<T: Scalar>(
    preset: Preset,
    params: &PresetParams,
    noise: NoiseModel,
    horizon: u64,
    delta: Option<T>,
    seed: u64,
) -> Result<InstanceSpec<T>> {
    let (functions, beta) = preset_functions(preset, params, horizon)?;
    let delta = delta.unwrap_or_else(|| crate::reward::default_delta(horizon));
    Ok(InstanceSpec::new(functions, noise, horizon, delta, seed)?
        .with_beta_label(beta)
        .with_name(preset.name()))
}
