use crate::error::{Error, Result};
use crate::optimum::optimal_allocation;
use crate::reward::{InstanceSpec, Oracle};
use crate::scalar::Scalar;

use super::{RegretAccumulator, RegretTrace};

/// Projected stochastic gradient ascent with step `step / sqrt(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub step: f64,
    /// Starting point; uniform when absent.
    pub start: Option<Vec<f64>>,
    pub checkpoint_ratio: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            start: None,
            checkpoint_ratio: super::DEFAULT_CHECKPOINT_RATIO,
        }
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex<T: Scalar>(y: &mut [T]) {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = T::zero();
    let mut theta = T::zero();
    for (i, &u) in sorted.iter().enumerate() {
        cumulative = cumulative + u;
        let candidate = (cumulative - T::one()) / T::of((i + 1) as f64);
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    for v in y.iter_mut() {
        *v = (*v - theta).max(T::zero());
    }
}

/// Runs the baseline for the instance's horizon and returns its regret at checkpoints.
pub fn sgd_baseline<T: Scalar>(
    instance: &InstanceSpec<T>,
    config: &SgdConfig,
) -> Result<RegretTrace> {
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(Error::Parameter(format!(
            "step size must be > 0, got {}",
            config.step
        )));
    }
    let k = instance.k();
    let mut x: Vec<T> = match &config.start {
        Some(start) => {
            let x: Vec<T> = start.iter().map(|&v| T::of(v)).collect();
            crate::reward::check_simplex(&x, k)?;
            x
        }
        None => vec![T::one() / T::of(k as f64); k],
    };
    let (_, optimum) = optimal_allocation(&instance.functions)?;
    let mut oracle = Oracle::new(instance);
    let mut gradient = vec![T::zero(); k];
    let mut sink = RegretAccumulator::new(instance.horizon, config.checkpoint_ratio)?;
    for t in 1..=instance.horizon {
        let value: T = instance
            .functions
            .iter()
            .zip(&x)
            .map(|(f, &xi)| f.value_unchecked(xi))
            .sum();
        sink.push((optimum - value).as_f64(), 1);
        oracle.noisy_gradient_into(&x, &mut gradient);
        let eta = T::of(config.step / (t as f64).sqrt());
        for (xi, &g) in x.iter_mut().zip(&gradient) {
            *xi = *xi + eta * g;
        }
        project_simplex(&mut x);
    }
    Ok(sink.finish(x.iter().map(|v| v.as_f64()).collect()))
}
