//! Reward families, instance generators and the noisy first-order oracle.
//!
//! Every reward is a map `f : [0, 1] -> R` that is concave, non-decreasing and
//! satisfies `f(0) = 0`. Families carry closed forms for both the value and the
//! derivative, plus whatever regularity metadata is known analytically
//! (Lipschitz bound `L`, smoothness `L'`, Łojasiewicz exponent `beta`, constant `c`).

mod instance;
mod lower_bound;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) use instance::check_simplex;
pub use instance::{
    default_delta, log_factor, noisy_gradient, InstanceSpec, NoiseKind, NoiseModel, Oracle,
};
pub use lower_bound::{
    lower_bound_gradient_gap_bound, make_lower_bound_instance, LowerBoundInstance, LowerBoundPiece,
    LowerBoundRole, LowerBoundShape,
};

/// Tolerance used by the shape invariants (`f(0) = 0`, monotonicity, concavity).
pub const INVARIANT_TOLERANCE: f64 = 1e-12;

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// User supplied closed forms for a reward outside the built-in families.
#[derive(Clone)]
pub struct CustomReward<T: Scalar> {
    pub name: String,
    value: ScalarFn<T>,
    gradient: ScalarFn<T>,
}

impl<T: Scalar> fmt::Debug for CustomReward<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomReward")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

/// Parametric family a [`RewardFunction`] belongs to.
#[derive(Debug, Clone)]
pub enum Family<T: Scalar> {
    /// `-a x^2 + b x` with `b >= 2a >= 0`.
    Quadratic {
        a: T,
        b: T,
    },
    /// `theta (gamma - x)^alpha - theta gamma^alpha` with `theta <= 0`, `gamma >= 1`, `alpha > 1`.
    CAlpha {
        theta: T,
        gamma: T,
        alpha: T,
    },
    /// `slope * x`.
    Linear {
        slope: T,
    },
    /// One of the four functions of the lower-bound construction.
    LowerBound(LowerBoundPiece<T>),
    /// Constant zero, used to pad trees to a power of two.
    ZeroPad,
    Custom(CustomReward<T>),
}

impl<T: Scalar> Family<T> {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Quadratic { .. } => "quadratic",
            Family::CAlpha { .. } => "c_alpha",
            Family::Linear { .. } => "linear",
            Family::LowerBound(_) => "piecewise-lower-bound",
            Family::ZeroPad => "zero-pad",
            Family::Custom(_) => "custom",
        }
    }
}

/// One resource's reward together with its regularity metadata.
#[derive(Debug, Clone)]
pub struct RewardFunction<T: Scalar> {
    family: Family<T>,
    lipschitz: T,
    smoothness: Option<T>,
    known_beta: Option<T>,
    known_c: Option<T>,
}

impl<T: Scalar> RewardFunction<T> {
    /// `f(x) = -a x^2 + b x`.
    pub fn quadratic(a: T, b: T) -> Result<Self> {
        if !(a >= T::zero()) || !(b >= T::of(2.0) * a) || !b.is_finite() {
            return Err(Error::Parameter(format!(
                "quadratic requires b >= 2a >= 0, got a = {a}, b = {b}"
            )));
        }
        let strictly = a > T::zero();
        Ok(Self {
            family: Family::Quadratic { a, b },
            lipschitz: b,
            smoothness: Some(T::of(2.0) * a),
            known_beta: strictly.then(|| T::of(2.0)),
            known_c: strictly.then(|| T::one() / (T::of(4.0) * a)),
        })
    }

    /// Member of the class `C_alpha`: `f(x) = theta (gamma - x)^alpha - theta gamma^alpha`.
    pub fn c_alpha(theta: T, gamma: T, alpha: T) -> Result<Self> {
        if !(theta <= T::zero()) || !(gamma >= T::one()) || !(alpha > T::one()) {
            return Err(Error::Parameter(format!(
                "c_alpha requires theta <= 0, gamma >= 1, alpha > 1, got theta = {theta}, gamma = {gamma}, alpha = {alpha}"
            )));
        }
        if !(theta.is_finite() && gamma.is_finite() && alpha.is_finite()) {
            return Err(Error::Parameter("c_alpha parameters must be finite".into()));
        }
        let two = T::of(2.0);
        let lipschitz = -theta * alpha * gamma.powf(alpha - T::one());
        let curvature = -theta * alpha * (alpha - T::one());
        let smoothness = if alpha >= two {
            Some(curvature * gamma.powf(alpha - two))
        } else if gamma > T::one() {
            Some(curvature * (gamma - T::one()).powf(alpha - two))
        } else if theta == T::zero() {
            Some(T::zero())
        } else {
            None
        };
        Ok(Self {
            family: Family::CAlpha {
                theta,
                gamma,
                alpha,
            },
            lipschitz,
            smoothness,
            known_beta: Some(alpha / (alpha - T::one())),
            known_c: None,
        })
    }

    /// `f(x) = slope * x`.
    pub fn linear(slope: T) -> Result<Self> {
        if !(slope >= T::zero()) || !slope.is_finite() {
            return Err(Error::Parameter(format!(
                "linear slope must be >= 0, got {slope}"
            )));
        }
        Ok(Self {
            family: Family::Linear { slope },
            lipschitz: slope,
            smoothness: Some(T::zero()),
            known_beta: None,
            known_c: None,
        })
    }

    pub fn zero() -> Self {
        Self {
            family: Family::ZeroPad,
            lipschitz: T::zero(),
            smoothness: Some(T::zero()),
            known_beta: None,
            known_c: None,
        }
    }

    /// Wraps caller supplied closed forms. The shape invariants are checked on a
    /// 1001-point grid at construction.
    pub fn custom<F, G>(
        name: impl Into<String>,
        value: F,
        gradient: G,
        lipschitz: T,
    ) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
        G: Fn(T) -> T + Send + Sync + 'static,
    {
        let f = Self {
            family: Family::Custom(CustomReward {
                name: name.into(),
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            }),
            lipschitz,
            smoothness: None,
            known_beta: None,
            known_c: None,
        };
        f.check_invariants(1001)?;
        Ok(f)
    }

    /// Skips the shape checks, so tests can feed invalid rewards to consumers.
    #[cfg(test)]
    pub(crate) fn custom_unchecked<F, G>(name: &str, value: F, gradient: G, lipschitz: T) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
        G: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            family: Family::Custom(CustomReward {
                name: name.into(),
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            }),
            lipschitz,
            smoothness: None,
            known_beta: None,
            known_c: None,
        }
    }

    pub(crate) fn from_lower_bound(piece: LowerBoundPiece<T>, lipschitz: T) -> Self {
        let smoothness = None;
        let known_beta = Some(piece.shape.beta);
        Self {
            family: Family::LowerBound(piece),
            lipschitz,
            smoothness,
            known_beta,
            known_c: None,
        }
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.known_beta = Some(beta);
        self
    }

    pub fn with_c(mut self, c: T) -> Self {
        self.known_c = Some(c);
        self
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn smoothness(&self) -> Option<T> {
        self.smoothness
    }

    pub fn known_beta(&self) -> Option<T> {
        self.known_beta
    }

    pub fn known_c(&self) -> Option<T> {
        self.known_c
    }

    pub fn is_zero_pad(&self) -> bool {
        matches!(self.family, Family::ZeroPad)
    }

    fn check_domain(x: T) -> Result<T> {
        let slack = T::domain_slack();
        if !(x >= -slack && x <= T::one() + slack) {
            return Err(Error::Domain { x: x.as_f64() });
        }
        Ok(x.max(T::zero()).min(T::one()))
    }

    /// `f(x)` for `x` in `[0, 1]`.
    pub fn eval(&self, x: T) -> Result<T> {
        Ok(self.value_unchecked(Self::check_domain(x)?))
    }

    /// `f'(x)` for `x` in `[0, 1]`.
    pub fn grad(&self, x: T) -> Result<T> {
        Ok(self.gradient_unchecked(Self::check_domain(x)?))
    }

    /// Closed-form value without the domain check. `x` must already lie in `[0, 1]`.
    pub fn value_unchecked(&self, x: T) -> T {
        match &self.family {
            Family::Quadratic { a, b } => (*b - *a * x) * x,
            Family::CAlpha {
                theta,
                gamma,
                alpha,
            } => *theta * ((*gamma - x).powf(*alpha) - gamma.powf(*alpha)),
            Family::Linear { slope } => *slope * x,
            Family::LowerBound(piece) => piece.value(x),
            Family::ZeroPad => T::zero(),
            Family::Custom(c) => (c.value)(x),
        }
    }

    /// Closed-form derivative without the domain check.
    pub fn gradient_unchecked(&self, x: T) -> T {
        match &self.family {
            Family::Quadratic { a, b } => *b - T::of(2.0) * *a * x,
            Family::CAlpha {
                theta,
                gamma,
                alpha,
            } => {
                if *theta == T::zero() {
                    T::zero()
                } else {
                    -*theta * *alpha * (*gamma - x).powf(*alpha - T::one())
                }
            }
            Family::Linear { slope } => *slope,
            Family::LowerBound(piece) => piece.gradient(x),
            Family::ZeroPad => T::zero(),
            Family::Custom(c) => (c.gradient)(x),
        }
    }

    /// Verifies `f(0) = 0`, monotonicity, concavity and `|f'| <= L` on a uniform grid.
    pub fn check_invariants(&self, points: usize) -> Result<()> {
        let tol = T::of(INVARIANT_TOLERANCE).max(T::epsilon() * T::of(16.0));
        let f0 = self.value_unchecked(T::zero());
        if f0.abs() > tol {
            return Err(Error::Parameter(format!("f(0) = {f0}, expected 0")));
        }
        let n = points.max(2);
        let step = T::one() / T::of((n - 1) as f64);
        let mut prev_value = f0;
        let mut prev_grad = self.gradient_unchecked(T::zero());
        let lip_tol = self.lipschitz * T::of(1e-9) + tol;
        for i in 0..n {
            let x = (T::of(i as f64) * step).min(T::one());
            let v = self.value_unchecked(x);
            let g = self.gradient_unchecked(x);
            if !(v.is_finite() && g.is_finite()) {
                return Err(Error::Parameter(format!("non-finite value at x = {x}")));
            }
            if v < prev_value - tol {
                return Err(Error::Parameter(format!("decreasing at x = {x}")));
            }
            if g > prev_grad + tol {
                return Err(Error::NotConcave {
                    index: 0,
                    left: prev_grad.as_f64(),
                    right: g.as_f64(),
                });
            }
            if g.abs() > self.lipschitz + lip_tol {
                return Err(Error::Parameter(format!(
                    "|f'({x})| = {} exceeds lipschitz bound {}",
                    g.abs(),
                    self.lipschitz
                )));
            }
            prev_value = v;
            prev_grad = g;
        }
        Ok(())
    }
}

/// `f(x)` with the domain check, as a free function.
pub fn eval<T: Scalar>(f: &RewardFunction<T>, x: T) -> Result<T> {
    f.eval(x)
}

pub fn grad<T: Scalar>(f: &RewardFunction<T>, x: T) -> Result<T> {
    f.grad(x)
}

pub fn make_c_alpha<T: Scalar>(theta: T, gamma: T, alpha: T) -> Result<RewardFunction<T>> {
    RewardFunction::c_alpha(theta, gamma, alpha)
}

pub fn make_quadratic<T: Scalar>(a: T, b: T) -> Result<RewardFunction<T>> {
    RewardFunction::quadratic(a, b)
}

/// The `beta = 2` experiment pair, `f1(x) = 5/6 - 5/48 (2 - x)^3` and
/// `f2(x) = 5/48 (11/5)^3 - 5/48 (11/5 - x)^3`.
///
/// Both are members of `C_3` with `theta = -5/48`; the profile
/// `f1(x) + f2(1 - x)` equals `-(x - 0.4)^2` up to a constant.
pub fn make_experiment_pair_beta2<T: Scalar>() -> (RewardFunction<T>, RewardFunction<T>) {
    let theta = T::of(-5.0 / 48.0);
    let f1 = RewardFunction::c_alpha(theta, T::of(2.0), T::of(3.0)).expect("valid parameters");
    let f2 =
        RewardFunction::c_alpha(theta, T::of(11.0 / 5.0), T::of(3.0)).expect("valid parameters");
    // The profile is exactly quadratic, whatever the C_3 label says.
    (f1.with_beta(T::of(2.0)), f2.with_beta(T::of(2.0)))
}

/// A pair whose profile `f1(x) + f2(1 - x)` behaves like `-|theta| (1 - x)^alpha`
/// around its maximiser `x* = 1`, so the pair is Łojasiewicz with exactly
/// `beta = alpha / (alpha - 1)`: `f1` is `C_alpha` with `gamma = 1`, `f2` is the
/// zero member of the class (`theta = 0`).
pub fn make_c_alpha_boundary_pair<T: Scalar>(
    theta: T,
    alpha: T,
) -> Result<(RewardFunction<T>, RewardFunction<T>)> {
    if !(theta < T::zero()) {
        return Err(Error::Parameter(format!("theta must be < 0, got {theta}")));
    }
    let f1 = RewardFunction::c_alpha(theta, T::one(), alpha)?;
    let f2 = RewardFunction::c_alpha(T::zero(), T::one(), alpha)?;
    Ok((f1, f2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn central_difference(f: &RewardFunction<f64>, x: f64) -> f64 {
        let h = 1e-6;
        let (lo, hi) = ((x - h).max(0.0), (x + h).min(1.0));
        (f.eval(hi).unwrap() - f.eval(lo).unwrap()) / (hi - lo)
    }

    #[test]
    fn eval_examples() {
        let q = make_quadratic(1.0, 2.0).unwrap();
        assert_eq!(q.eval(0.0).unwrap(), 0.0);
        let c = make_c_alpha(-1.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(c.eval(1.0).unwrap(), 1.0, epsilon = 1e-15);
        let (f1, f2) = make_experiment_pair_beta2::<f64>();
        assert!(f1.eval(0.0).unwrap().abs() < 1e-12);
        assert!(f2.eval(0.0).unwrap().abs() < 1e-12);
        // closed forms as printed for f1
        for x in [0.0, 0.3, 0.9, 1.0] {
            let expected = 5.0 / 6.0 - 5.0 / 48.0 * (2.0_f64 - x).powi(3);
            assert_relative_eq!(f1.eval(x).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn grad_examples() {
        let l = RewardFunction::linear(0.7).unwrap();
        for x in [0.0, 0.5, 1.0] {
            assert_eq!(l.grad(x).unwrap(), 0.7);
        }
        let q = make_quadratic(1.0, 2.0).unwrap();
        assert_eq!(q.grad(0.5).unwrap(), 1.0);
        let (f1, _) = make_experiment_pair_beta2::<f64>();
        assert_relative_eq!(f1.grad(0.4).unwrap(), 0.8, epsilon = 1e-14);
        assert_relative_eq!(central_difference(&f1, 0.4), 0.8, max_relative = 1e-5);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let lb = make_lower_bound_instance::<f64>(1.5, 10_000).unwrap();
        let functions = vec![
            make_quadratic(0.5, 2.0).unwrap(),
            make_c_alpha(-0.3, 1.2, 2.5).unwrap(),
            make_c_alpha(-1.0, 1.0, 3.0).unwrap(),
            RewardFunction::linear(0.25).unwrap(),
            lb.pair.1.clone(),
            lb.tilde_pair.0.clone(),
            lb.tilde_pair.1.clone(),
        ];
        for f in &functions {
            for i in 1..20 {
                let x = i as f64 / 20.0;
                let g = f.grad(x).unwrap();
                let fd = central_difference(f, x);
                assert!(
                    (g - fd).abs() <= 1e-5 * g.abs().max(1.0),
                    "{} at {x}: {g} vs {fd}",
                    f.family().tag()
                );
            }
        }
    }

    #[test]
    fn domain_errors() {
        let q = make_quadratic(0.0, 1.0).unwrap();
        assert!(matches!(q.eval(1.1), Err(Error::Domain { .. })));
        assert!(matches!(q.grad(-0.01), Err(Error::Domain { .. })));
        assert!(q.eval(1.0 + 1e-13).is_ok());
    }

    #[test]
    fn c_alpha_examples() {
        let f = make_c_alpha(-1.0, 1.0, 2.0).unwrap();
        for x in [0.0, 0.25, 0.8] {
            assert_relative_eq!(
                f.eval(x).unwrap(),
                -(1.0 - x) * (1.0 - x) + 1.0,
                epsilon = 1e-15
            );
        }
        assert_eq!(f.known_beta(), Some(2.0));
        assert_eq!(
            make_c_alpha(-1.0, 2.0, 3.0).unwrap().eval(0.0).unwrap(),
            0.0
        );
        assert_relative_eq!(
            make_c_alpha(-1.0, 1.0, 3.0).unwrap().known_beta().unwrap(),
            1.5
        );
        assert!(make_c_alpha(0.5, 1.0, 2.0).is_err());
        assert!(make_c_alpha(-1.0, 0.5, 2.0).is_err());
        assert!(make_c_alpha(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let lin = make_quadratic(0.0, 1.0).unwrap();
        assert_eq!(lin.eval(0.3).unwrap(), 0.3);
        assert_eq!(lin.grad(0.9).unwrap(), 1.0);
        assert_eq!(make_quadratic(1.0, 2.0).unwrap().grad(1.0).unwrap(), 0.0);
        assert_relative_eq!(make_quadratic(0.5, 2.0).unwrap().eval(1.0).unwrap(), 1.5);
        assert_eq!(make_quadratic(1.0, 2.0).unwrap().lipschitz(), 2.0);
        assert!(make_quadratic(1.0, 1.0).is_err());
        assert!(make_quadratic(-1.0, 1.0).is_err());
    }

    #[test]
    fn experiment_pair_profile() {
        let (f1, f2) = make_experiment_pair_beta2::<f64>();
        let profile = |x: f64| f1.eval(x).unwrap() + f2.eval(1.0 - x).unwrap();
        let top = profile(0.4);
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            let v = profile(x);
            if v > best.1 {
                best = (x, v);
            }
            assert_relative_eq!(v - top, -(x - 0.4) * (x - 0.4), epsilon = 1e-12);
        }
        assert_relative_eq!(best.0, 0.4, epsilon = 1e-12);
        assert_relative_eq!(profile(0.9) - top, -0.25, epsilon = 1e-12);
    }

    #[test]
    fn every_family_satisfies_invariants() {
        let lb = make_lower_bound_instance::<f64>(2.0, 10_000).unwrap();
        let (e1, e2) = make_experiment_pair_beta2::<f64>();
        let all = [
            make_quadratic(0.0, 0.0).unwrap(),
            make_quadratic(1.0, 2.0).unwrap(),
            make_quadratic(0.3, 5.0).unwrap(),
            make_c_alpha(-1.0, 1.0, 1.5).unwrap(),
            make_c_alpha(-2.0, 3.0, 4.0).unwrap(),
            make_c_alpha(0.0, 1.0, 2.0).unwrap(),
            RewardFunction::linear(0.0).unwrap(),
            RewardFunction::linear(3.0).unwrap(),
            RewardFunction::zero(),
            e1,
            e2,
            lb.pair.0,
            lb.pair.1,
            lb.tilde_pair.0,
            lb.tilde_pair.1,
        ];
        for f in &all {
            f.check_invariants(10_000)
                .unwrap_or_else(|e| panic!("{}: {e}", f.family().tag()));
        }
    }

    #[test]
    fn custom_rejects_convex() {
        let bad = RewardFunction::<f64>::custom("convex", |x| x * x, |x| 2.0 * x, 2.0);
        assert!(bad.is_err());
        let good =
            RewardFunction::<f64>::custom("sqrt-ish", |x| x - 0.25 * x * x, |x| 1.0 - 0.5 * x, 1.0);
        assert!(good.is_ok());
    }

    #[test]
    fn boundary_pair_has_boundary_optimum() {
        let (f1, f2) = make_c_alpha_boundary_pair(-0.5, 3.0).unwrap();
        assert_relative_eq!(f1.known_beta().unwrap(), 1.5);
        assert_eq!(f2.eval(0.7).unwrap(), 0.0);
        // profile gradient vanishes only at x = 1
        assert_eq!(f1.grad(1.0).unwrap() - f2.grad(0.0).unwrap(), 0.0);
        assert!(f1.grad(0.99).unwrap() > 0.0);
    }

    #[test]
    fn f32_evaluation() {
        let (f1, f2) = make_experiment_pair_beta2::<f32>();
        assert!(f1.eval(0.0).unwrap().abs() < 1e-6);
        assert!((f1.grad(0.4).unwrap() - 0.8).abs() < 1e-6);
        assert!(f2.eval(0.0).unwrap().abs() < 1e-6);
    }
}
