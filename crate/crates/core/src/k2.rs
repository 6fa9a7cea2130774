//! Binary search for two resources.
//!
//! With `x` the share of the first resource, the problem reduces to maximising
//! `g(x) = f1(x) + f2(1 - x)`. Each depth queries the midpoint of the current
//! interval and samples `g'(x) + eps` until a sign test decides; the interval
//! then keeps the half the gradient points to.

use crate::error::{Error, Result};
use crate::optimum::optimal_allocation;
use crate::reward::{InstanceSpec, Oracle};
use crate::scalar::Scalar;
use crate::sign_test::{SequentialSignTest, Status};
use crate::trace::{DepthRecord, RunTrace};

/// Knobs of the two-resource search.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct K2Config {
    /// Maximum number of depths; `None` uses `max(1, ceil(log2(L T)))`.
    pub depth_cap: Option<u32>,
}

impl K2Config {
    pub fn with_depth_cap(depth_cap: u32) -> Self {
        Self {
            depth_cap: Some(depth_cap),
        }
    }
}

/// `max(1, ceil(log2(L T)))`: below an interval width of `1 / (L T)` a finer
/// query cannot lower the regret any more.
pub fn default_depth_cap<T: Scalar>(lipschitz: T, horizon: u64) -> u32 {
    let precision = lipschitz.as_f64() * horizon as f64;
    if precision <= 1.0 || !precision.is_finite() {
        return 1;
    }
    (precision.log2().ceil() as u32).max(1)
}

/// Runs the search against the instance's own noisy oracle.
pub fn run_k2<T: Scalar>(instance: &InstanceSpec<T>, config: &K2Config) -> Result<RunTrace<T>> {
    if instance.k() != 2 {
        return Err(Error::Parameter(format!(
            "the two-resource search needs K = 2, got K = {}",
            instance.k()
        )));
    }
    let mut oracle = Oracle::new(instance);
    run_k2_with(instance, config, |x| oracle.noisy_profile_gradient(x))
}

/// Runs the search with an arbitrary source of noisy `g'(x)` samples.
pub fn run_k2_with<T, S>(
    instance: &InstanceSpec<T>,
    config: &K2Config,
    mut source: S,
) -> Result<RunTrace<T>>
where
    T: Scalar,
    S: FnMut(T) -> Result<T>,
{
    if instance.k() != 2 {
        return Err(Error::Parameter(format!(
            "expected K = 2, got K = {}",
            instance.k()
        )));
    }
    let horizon = instance.horizon;
    let (_, optimum) = optimal_allocation(&instance.functions)?;
    let mut trace = RunTrace::new(2, horizon, optimum.as_f64());
    let f = &instance.functions;
    let lipschitz = f[0].lipschitz().max(f[1].lipschitz());
    let cap = config
        .depth_cap
        .unwrap_or_else(|| default_depth_cap(lipschitz, horizon));
    let sample_bound =
        (f[0].lipschitz() + f[1].lipschitz() + T::of(instance.noise.sigma)).max(T::of(2.0));
    let two = T::of(2.0);

    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut t = 0u64;
    let mut depth = 1u32;
    while t < horizon {
        let x = (lo + hi) / two;
        let gap = profile_gap(instance, optimum, x);
        if depth > cap {
            trace.push(&[x, T::one() - x], gap, horizon - t);
            break;
        }
        let mut test =
            SequentialSignTest::new(horizon, instance.delta)?.with_sample_bound(sample_bound)?;
        let mut status = Status::Undecided;
        while t < horizon && !status.is_decided() {
            status = test.update(source(x)?)?;
            t += 1;
        }
        trace.push(&[x, T::one() - x], gap, test.count());
        trace.depths.push(DepthRecord {
            depth,
            query: x,
            lo,
            hi,
            samples: test.count(),
            decision: status,
        });
        match status {
            Status::Positive => lo = x,
            Status::Negative => hi = x,
            Status::Undecided => break,
        }
        depth += 1;
    }
    Ok(trace)
}

/// `F(x*) - f1(x) - f2(1 - x)`, clamped at zero.
fn profile_gap<T: Scalar>(instance: &InstanceSpec<T>, optimum: T, x: T) -> f64 {
    let f = &instance.functions;
    let value = f[0].value_unchecked(x) + f[1].value_unchecked((T::one() - x).max(T::zero()));
    (optimum - value).as_f64().max(0.0)
}

/// Average regret `(1/T) sum_t (F(x*) - F(x_t))` of a trace, recomputed from the
/// instance's closed forms rather than the gaps stored in the trace.
pub fn regret_of_trace<T: Scalar>(trace: &RunTrace<T>, instance: &InstanceSpec<T>) -> Result<f64> {
    let (_, optimum) = optimal_allocation(&instance.functions)?;
    let mut total = 0.0;
    for segment in &trace.segments {
        let value: T = instance
            .functions
            .iter()
            .zip(&segment.allocation)
            .map(|(f, &x)| f.value_unchecked(x.max(T::zero()).min(T::one())))
            .sum();
        total += (optimum - value).as_f64().max(0.0) * segment.len as f64;
    }
    Ok(total / instance.horizon as f64)
}
