//! The two indistinguishable pairs behind the `T^{-beta/2}` lower bound.
//!
//! With `p = beta / (beta - 1)`, `q = 1 / (beta - 1)` and `gamma = T^{(1 - beta)/2}`:
//!
//! * `g(x)  = -x^p` on `[0, gamma]`, then linear with slope `-p gamma^q`;
//! * `g~(x) = -|x - gamma|^p` on `[0, 2 gamma]`, then linear with the same slope;
//! * `h(x)` is linear with slope `-2p (gamma/2)^q` on `[0, gamma/2]`,
//!   `(gamma - x)^p - x^p` on `[gamma/2, gamma]`, and continues like `g` after `gamma`.
//!
//! The pairs are `f1 = 0, f2(x) = g(1 - x) - g(1)` and
//! `f~1 = g~ - g + h, f~2(x) = g(1 - x) - h(1 - x)`, so that
//! `f1(x) + f2(1 - x) = g(x)` and `f~1(x) + f~2(1 - x) = g~(x)` up to constants.
//! `f~1` and `f~2` decrease on part of `[0, 1]` (by at most `p gamma^q`), so every
//! function gets the common linear term `p gamma^q x`: it cancels in both profiles
//! and leaves all gradient gaps unchanged. Each function is then shifted to vanish at 0.

use crate::error::{Error, Result};
use crate::reward::RewardFunction;
use crate::scalar::Scalar;

/// The three profile shapes `g`, `g~`, `h` for a given `(beta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundShape<T: Scalar> {
    pub beta: T,
    pub gamma: T,
}

impl<T: Scalar> LowerBoundShape<T> {
    fn p(&self) -> T {
        self.beta / (self.beta - T::one())
    }

    fn q(&self) -> T {
        T::one() / (self.beta - T::one())
    }

    /// Common slope of the linear tails, `p gamma^q`.
    pub fn tail_slope(&self) -> T {
        self.p() * self.gamma.powf(self.q())
    }

    pub fn g(&self, x: T) -> T {
        let (p, q, gamma) = (self.p(), self.q(), self.gamma);
        if x <= gamma {
            -x.powf(p)
        } else {
            -self.tail_slope() * x + q * gamma.powf(p)
        }
    }

    pub fn g_grad(&self, x: T) -> T {
        if x <= self.gamma {
            -self.p() * x.powf(self.q())
        } else {
            -self.tail_slope()
        }
    }

    pub fn g_tilde(&self, x: T) -> T {
        let (p, q, gamma) = (self.p(), self.q(), self.gamma);
        if x <= gamma + gamma {
            -(x - gamma).abs().powf(p)
        } else {
            -self.tail_slope() * x + (p + q) * gamma.powf(p)
        }
    }

    pub fn g_tilde_grad(&self, x: T) -> T {
        let gamma = self.gamma;
        if x <= gamma + gamma {
            let d = x - gamma;
            let sign = if d > T::zero() {
                T::one()
            } else if d < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            -self.p() * sign * d.abs().powf(self.q())
        } else {
            -self.tail_slope()
        }
    }

    pub fn h(&self, x: T) -> T {
        let (p, q, gamma) = (self.p(), self.q(), self.gamma);
        let half = gamma / T::of(2.0);
        if x <= half {
            T::of(2.0) * p * half.powf(q) * (half - x)
        } else if x <= gamma {
            (gamma - x).powf(p) - x.powf(p)
        } else {
            -self.tail_slope() * x + q * gamma.powf(p)
        }
    }

    pub fn h_grad(&self, x: T) -> T {
        let (p, q, gamma) = (self.p(), self.q(), self.gamma);
        let half = gamma / T::of(2.0);
        if x <= half {
            -T::of(2.0) * p * half.powf(q)
        } else if x <= gamma {
            -p * ((gamma - x).powf(q) + x.powf(q))
        } else {
            -self.tail_slope()
        }
    }
}

/// Which of the four functions a [`LowerBoundPiece`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundRole {
    F1,
    F2,
    F1Tilde,
    F2Tilde,
}

/// A normalised member of the lower-bound construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundPiece<T: Scalar> {
    pub shape: LowerBoundShape<T>,
    pub role: LowerBoundRole,
    slope: T,
    offset: T,
}

impl<T: Scalar> LowerBoundPiece<T> {
    fn new(shape: LowerBoundShape<T>, role: LowerBoundRole) -> Self {
        let mut piece = Self {
            shape,
            role,
            slope: shape.tail_slope(),
            offset: T::zero(),
        };
        piece.offset = piece.raw(T::zero());
        piece
    }

    fn raw(&self, x: T) -> T {
        let s = &self.shape;
        let base = match self.role {
            LowerBoundRole::F1 => T::zero(),
            LowerBoundRole::F2 => s.g(T::one() - x) - s.g(T::one()),
            LowerBoundRole::F1Tilde => s.g_tilde(x) - s.g(x) + s.h(x),
            LowerBoundRole::F2Tilde => s.g(T::one() - x) - s.h(T::one() - x),
        };
        base + self.slope * x
    }

    pub fn value(&self, x: T) -> T {
        self.raw(x) - self.offset
    }

    pub fn gradient(&self, x: T) -> T {
        let s = &self.shape;
        let y = T::one() - x;
        let base = match self.role {
            LowerBoundRole::F1 => T::zero(),
            LowerBoundRole::F2 => -s.g_grad(y),
            LowerBoundRole::F1Tilde => s.g_tilde_grad(x) - s.g_grad(x) + s.h_grad(x),
            LowerBoundRole::F2Tilde => -s.g_grad(y) + s.h_grad(y),
        };
        base + self.slope
    }
}

/// Output of [`make_lower_bound_instance`].
#[derive(Debug, Clone)]
pub struct LowerBoundInstance<T: Scalar> {
    pub gamma: T,
    pub shape: LowerBoundShape<T>,
    /// `(f1, f2)`, whose profile is `g`.
    pub pair: (RewardFunction<T>, RewardFunction<T>),
    /// `(f~1, f~2)`, whose profile is `g~`.
    pub tilde_pair: (RewardFunction<T>, RewardFunction<T>),
}

/// `(1 + 2^q) p gamma^q`, the sup-norm bound on `g' - g~'`.
pub fn lower_bound_gradient_gap_bound<T: Scalar>(beta: T, gamma: T) -> T {
    let q = T::one() / (beta - T::one());
    let p = beta / (beta - T::one());
    (T::one() + T::of(2.0).powf(q)) * p * gamma.powf(q)
}

/// Builds both pairs for `beta` in `(1, 2]` and horizon `T`, with `gamma = T^{(1-beta)/2}`.
pub fn make_lower_bound_instance<T: Scalar>(
    beta: T,
    horizon: u64,
) -> Result<LowerBoundInstance<T>> {
    if !(beta > T::one() && beta <= T::of(2.0)) {
        return Err(Error::Parameter(format!(
            "lower-bound beta must lie in (1, 2], got {beta}"
        )));
    }
    if horizon < 2 {
        return Err(Error::Parameter(format!(
            "horizon must be >= 2, got {horizon}"
        )));
    }
    let gamma = T::of(horizon as f64).powf((T::one() - beta) / T::of(2.0));
    let shape = LowerBoundShape { beta, gamma };
    let build = |role| {
        let piece = LowerBoundPiece::new(shape, role);
        let lipschitz = sup_gradient(&piece);
        RewardFunction::from_lower_bound(piece, lipschitz)
    };
    Ok(LowerBoundInstance {
        gamma,
        shape,
        pair: (build(LowerBoundRole::F1), build(LowerBoundRole::F2)),
        tilde_pair: (
            build(LowerBoundRole::F1Tilde),
            build(LowerBoundRole::F2Tilde),
        ),
    })
}

/// Gradients are monotone, so the sup of `|f'|` sits at an endpoint.
fn sup_gradient<T: Scalar>(piece: &LowerBoundPiece<T>) -> T {
    piece
        .gradient(T::zero())
        .abs()
        .max(piece.gradient(T::one()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_examples() {
        let lb = make_lower_bound_instance::<f64>(2.0, 10_000).unwrap();
        assert_relative_eq!(lb.gamma, 0.01, epsilon = 1e-15);
        let lb = make_lower_bound_instance::<f64>(1.5, 10_000).unwrap();
        assert_relative_eq!(lb.gamma, 0.1, epsilon = 1e-14);
    }

    #[test]
    fn rejects_beta_outside_range() {
        assert!(make_lower_bound_instance::<f64>(1.0, 100).is_err());
        assert!(make_lower_bound_instance::<f64>(2.5, 100).is_err());
        assert!(make_lower_bound_instance::<f64>(1.5, 1).is_err());
    }

    #[test]
    fn shapes_are_continuous_at_joints() {
        for beta in [1.25, 1.5, 2.0] {
            let shape = LowerBoundShape::<f64> { beta, gamma: 0.05 };
            let g = shape.gamma;
            for joint in [g / 2.0, g, 2.0 * g] {
                let e = 1e-11;
                assert!((shape.g(joint - e) - shape.g(joint + e)).abs() < 1e-9);
                assert!((shape.g_tilde(joint - e) - shape.g_tilde(joint + e)).abs() < 1e-9);
                assert!((shape.h(joint - e) - shape.h(joint + e)).abs() < 1e-9);
                assert!((shape.g_grad(joint - e) - shape.g_grad(joint + e)).abs() < 1e-6);
                assert!(
                    (shape.g_tilde_grad(joint - e) - shape.g_tilde_grad(joint + e)).abs() < 1e-6
                );
                assert!((shape.h_grad(joint - e) - shape.h_grad(joint + e)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gradient_gap_within_closed_form_bound() {
        for beta in [1.2, 1.5, 1.8, 2.0] {
            let lb = make_lower_bound_instance::<f64>(beta, 10_000).unwrap();
            let bound = lower_bound_gradient_gap_bound(beta, lb.gamma);
            let n = 100_000;
            let worst = (0..=n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    (lb.shape.g_grad(x) - lb.shape.g_tilde_grad(x)).abs()
                })
                .fold(0.0, f64::max);
            assert!(
                worst <= bound * (1.0 + 1e-12),
                "beta {beta}: {worst} > {bound}"
            );
            // gamma^q = T^{-1/2}
            let q = 1.0 / (beta - 1.0);
            assert_relative_eq!(lb.gamma.powf(q), 0.01, max_relative = 1e-10);
        }
    }

    #[test]
    fn pairs_reproduce_profiles() {
        let lb = make_lower_bound_instance::<f64>(1.5, 400).unwrap();
        let s = lb.shape;
        let profile = |a: &RewardFunction<f64>, b: &RewardFunction<f64>, x: f64| {
            a.eval(x).unwrap() + b.eval(1.0 - x).unwrap()
        };
        let c0 = profile(&lb.pair.0, &lb.pair.1, 0.0) - s.g(0.0);
        let c1 = profile(&lb.tilde_pair.0, &lb.tilde_pair.1, 0.0) - s.g_tilde(0.0);
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            assert_relative_eq!(
                profile(&lb.pair.0, &lb.pair.1, x) - c0,
                s.g(x),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                profile(&lb.tilde_pair.0, &lb.tilde_pair.1, x) - c1,
                s.g_tilde(x),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn function_gradient_gaps_scale_like_inverse_sqrt_horizon() {
        for &t in &[100u64, 10_000, 1_000_000] {
            let beta = 1.5;
            let lb = make_lower_bound_instance::<f64>(beta, t).unwrap();
            let p = beta / (beta - 1.0);
            let q = 1.0 / (beta - 1.0);
            let c = (2.0 + 2f64.powf(q)) * p;
            let n = 20_000;
            let mut worst: f64 = 0.0;
            for i in 0..=n {
                let x = i as f64 / n as f64;
                worst = worst
                    .max((lb.pair.0.grad(x).unwrap() - lb.tilde_pair.0.grad(x).unwrap()).abs());
                worst = worst
                    .max((lb.pair.1.grad(x).unwrap() - lb.tilde_pair.1.grad(x).unwrap()).abs());
            }
            assert!(
                worst <= c / (t as f64).sqrt() * (1.0 + 1e-9),
                "T = {t}: {worst}"
            );
        }
    }
}
