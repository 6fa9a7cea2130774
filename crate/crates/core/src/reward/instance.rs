use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::reward::RewardFunction;
use crate::scalar::Scalar;

/// Distribution of the additive gradient noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Uniform on `[-sigma, sigma]`.
    Uniform,
    /// `+sigma` or `-sigma` with equal probability.
    Rademacher,
    Zero,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Uniform => "uniform",
            NoiseKind::Rademacher => "rademacher",
            NoiseKind::Zero => "zero",
        }
    }
}

/// Bounded, centred noise law. Every draw lies in `[-sigma, sigma] ⊆ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    /// ChaCha stream id, so several noise sources can share a seed.
    pub stream: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Uniform,
            sigma: 1.0,
            stream: 0,
        }
    }
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::Parameter(format!(
                "noise sigma must lie in [0, 1], got {sigma}"
            )));
        }
        Ok(Self {
            kind,
            sigma,
            stream: 0,
        })
    }

    pub fn uniform(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform, sigma)
    }

    pub fn zero() -> Self {
        Self {
            kind: NoiseKind::Zero,
            sigma: 0.0,
            stream: 0,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.kind == NoiseKind::Zero || self.sigma == 0.0
    }

    /// One draw. Zero noise consumes no randomness.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Uniform => rng.gen_range(-self.sigma..=self.sigma),
            NoiseKind::Rademacher => {
                if rng.gen::<bool>() {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
            NoiseKind::Zero => 0.0,
        }
    }

    pub fn rng(&self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Everything that defines one experiment: the rewards, the noise, the horizon
/// `T`, the confidence `delta` and the seed.
#[derive(Debug, Clone)]
pub struct InstanceSpec<T: Scalar> {
    pub functions: Vec<RewardFunction<T>>,
    pub noise: NoiseModel,
    pub horizon: u64,
    pub delta: T,
    pub seed: u64,
    /// Łojasiewicz exponent of the instance as a whole, used only to label
    /// reference curves.
    pub beta_label: Option<f64>,
    pub name: String,
}

impl<T: Scalar> InstanceSpec<T> {
    pub fn new(
        functions: Vec<RewardFunction<T>>,
        noise: NoiseModel,
        horizon: u64,
        delta: T,
        seed: u64,
    ) -> Result<Self> {
        if functions.len() < 2 {
            return Err(Error::Parameter(format!(
                "an instance needs K >= 2 resources, got {}",
                functions.len()
            )));
        }
        if horizon < 2 {
            return Err(Error::Parameter(format!(
                "horizon must be >= 2, got {horizon}"
            )));
        }
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::Parameter(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            functions,
            noise,
            horizon,
            delta,
            seed,
            beta_label: None,
            name: String::from("custom"),
        })
    }

    /// Same as [`InstanceSpec::new`] with `delta = 2 / T^2`.
    pub fn with_default_delta(
        functions: Vec<RewardFunction<T>>,
        noise: NoiseModel,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        Self::new(functions, noise, horizon, default_delta(horizon), seed)
    }

    pub fn with_beta_label(mut self, beta: f64) -> Self {
        self.beta_label = Some(beta);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut copy = self.clone();
        copy.seed = seed;
        copy
    }

    pub fn k(&self) -> usize {
        self.functions.len()
    }

    /// `ln(2T / delta)`, the log factor of every Hoeffding interval.
    pub fn log_factor(&self) -> T {
        log_factor(self.horizon, self.delta)
    }

    /// Largest Lipschitz constant among the rewards (at least machine epsilon).
    pub fn lipschitz(&self) -> T {
        self.functions
            .iter()
            .map(RewardFunction::lipschitz)
            .fold(T::zero(), T::max)
    }

    /// `sum_k f_k(x_k)` with domain checks.
    pub fn total_reward(&self, allocation: &[T]) -> Result<T> {
        check_simplex(allocation, self.k())?;
        self.functions
            .iter()
            .zip(allocation)
            .map(|(f, &x)| f.eval(x))
            .sum()
    }
}

/// `delta = 2 / T^2`.
pub fn default_delta<T: Scalar>(horizon: u64) -> T {
    T::of(2.0 / (horizon as f64 * horizon as f64))
}

/// `ln(2T / delta)`, computed in `f64`.
pub fn log_factor<T: Scalar>(horizon: u64, delta: T) -> T {
    T::of((2.0 * horizon as f64 / delta.as_f64()).ln())
}

pub(crate) fn check_simplex<T: Scalar>(allocation: &[T], k: usize) -> Result<()> {
    if allocation.len() != k {
        return Err(Error::Simplex(format!(
            "expected {k} coordinates, got {}",
            allocation.len()
        )));
    }
    let tol = T::simplex_tolerance();
    if let Some(x) = allocation.iter().find(|&&x| !(x >= -tol)) {
        return Err(Error::Simplex(format!("negative coordinate {x}")));
    }
    let total: T = allocation.iter().copied().sum();
    if !((total - T::one()).abs() <= tol) {
        return Err(Error::Simplex(format!("coordinates sum to {total}")));
    }
    Ok(())
}

/// `(f'_k(x_k) + zeta_k)_k` with `zeta_k` drawn i.i.d. from the instance's noise law.
pub fn noisy_gradient<T: Scalar, R: Rng + ?Sized>(
    instance: &InstanceSpec<T>,
    allocation: &[T],
    rng: &mut R,
) -> Result<Vec<T>> {
    check_simplex(allocation, instance.k())?;
    allocation
        .iter()
        .zip(&instance.functions)
        .map(|(&x, f)| Ok(f.grad(x)? + T::of(instance.noise.draw(rng))))
        .collect()
}

/// A seeded noisy first-order oracle for one run.
#[derive(Debug, Clone)]
pub struct Oracle<'a, T: Scalar> {
    instance: &'a InstanceSpec<T>,
    rng: ChaCha8Rng,
    calls: u64,
}

impl<'a, T: Scalar> Oracle<'a, T> {
    pub fn new(instance: &'a InstanceSpec<T>) -> Self {
        Self {
            instance,
            rng: instance.noise.rng(instance.seed),
            calls: 0,
        }
    }

    pub fn instance(&self) -> &'a InstanceSpec<T> {
        self.instance
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Noisy gradient of every resource at a simplex point.
    pub fn noisy_gradient(&mut self, allocation: &[T]) -> Result<Vec<T>> {
        self.calls += 1;
        noisy_gradient(self.instance, allocation, &mut self.rng)
    }

    /// Writes the noisy gradients into `out` without allocating; no simplex check.
    pub(crate) fn noisy_gradient_into(&mut self, allocation: &[T], out: &mut [T]) {
        self.calls += 1;
        for ((o, &x), f) in out.iter_mut().zip(allocation).zip(&self.instance.functions) {
            let x = x.max(T::zero()).min(T::one());
            *o = f.gradient_unchecked(x) + T::of(self.instance.noise.draw(&mut self.rng));
        }
    }

    /// Two-resource feedback: `g'(x) + eps` with `g'(x) = f1'(x) - f2'(1 - x)` and a
    /// single noise draw `eps`.
    pub fn noisy_profile_gradient(&mut self, x: T) -> Result<T> {
        if self.instance.k() != 2 {
            return Err(Error::Parameter(format!(
                "profile gradient needs K = 2, instance has K = {}",
                self.instance.k()
            )));
        }
        self.calls += 1;
        let f = &self.instance.functions;
        let exact = f[0].grad(x)? - f[1].grad(T::one() - x)?;
        Ok(exact + T::of(self.instance.noise.draw(&mut self.rng)))
    }
}
