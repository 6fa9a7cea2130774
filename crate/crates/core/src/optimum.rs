//! Ground-truth optima.
//!
//! [`optimal_allocation`] solves `max sum_k f_k(x_k)` over the simplex by
//! water-filling. The remaining routines are slow, assumption-light oracles
//! used to cross-check it and the tree allocator: an exhaustive max-plus
//! dynamic program over a uniform grid, and nested golden-section searches for
//! the profile `H(v) = max_{z <= v} H_left(z) + H_right(v - z)` of a group of leaves.

use crate::error::{Error, Result};
use crate::reward::RewardFunction;
use crate::scalar::Scalar;

const BISECTION_TOLERANCE: f64 = 1e-12;
const MAX_BISECTION_STEPS: usize = 200;
const CONCAVITY_GRID: usize = 1025;

/// Rejects functions whose gradient increases somewhere on a uniform grid.
pub fn check_concave<T: Scalar>(functions: &[RewardFunction<T>]) -> Result<()> {
    let tol = T::of(1e-9);
    for (index, f) in functions.iter().enumerate() {
        let mut prev = f.gradient_unchecked(T::zero());
        for i in 1..CONCAVITY_GRID {
            let x = T::of(i as f64 / (CONCAVITY_GRID - 1) as f64);
            let g = f.gradient_unchecked(x);
            if g > prev + tol * (T::one() + prev.abs()) {
                return Err(Error::NotConcave {
                    index,
                    left: prev.as_f64(),
                    right: g.as_f64(),
                });
            }
            prev = g;
        }
    }
    Ok(())
}

/// Length of `{x in [0, 1] : f'(x) > lambda}` (strict) or `>= lambda`.
fn level_set_length<T: Scalar>(f: &RewardFunction<T>, lambda: T, strict: bool) -> T {
    let above = |x: T| {
        let g = f.gradient_unchecked(x);
        if strict {
            g > lambda
        } else {
            g >= lambda
        }
    };
    if !above(T::zero()) {
        return T::zero();
    }
    if above(T::one()) {
        return T::one();
    }
    let tol = T::of(BISECTION_TOLERANCE).max(T::epsilon());
    let (mut a, mut b) = (T::zero(), T::one());
    for _ in 0..MAX_BISECTION_STEPS {
        if b - a <= tol {
            break;
        }
        let mid = (a + b) / T::of(2.0);
        if above(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a + b) / T::of(2.0)
}

/// Maximiser and maximum of `sum_k f_k(x_k)` over the simplex.
///
/// Bisects on the shared marginal value `lambda`; each coordinate is the
/// length of the level set `{f_k' > lambda}`. Mass left over at the final
/// `lambda` (flat or linear pieces tied at `lambda`) is spread in proportion
/// to the width of each tie.
pub fn optimal_allocation<T: Scalar>(functions: &[RewardFunction<T>]) -> Result<(Vec<T>, T)> {
    if functions.is_empty() {
        return Err(Error::Parameter("need at least one function".into()));
    }
    check_concave(functions)?;
    let one = T::one();
    let min_slope = functions
        .iter()
        .map(|f| f.gradient_unchecked(one))
        .fold(T::infinity(), T::min);
    let max_slope = functions
        .iter()
        .map(|f| f.gradient_unchecked(T::zero()))
        .fold(T::neg_infinity(), T::max);
    // Invariant: sum of strict level sets > 1 at `below`, <= 1 at `above`.
    let mut below = min_slope - one;
    let mut above = max_slope + one;
    let strict_sum = |lambda: T| -> T {
        functions
            .iter()
            .map(|f| level_set_length(f, lambda, true))
            .sum()
    };
    if functions.len() == 1 {
        let x = vec![one];
        let value = functions[0].value_unchecked(one);
        return Ok((x, value));
    }
    let tol = T::of(BISECTION_TOLERANCE).max(T::epsilon());
    for _ in 0..MAX_BISECTION_STEPS {
        if above - below <= tol * (one + above.abs().max(below.abs())) {
            break;
        }
        let mid = (below + above) / T::of(2.0);
        if strict_sum(mid) > one {
            below = mid;
        } else {
            above = mid;
        }
    }
    let lows: Vec<T> = functions
        .iter()
        .map(|f| level_set_length(f, above, true))
        .collect();
    let highs: Vec<T> = functions
        .iter()
        .zip(&lows)
        .map(|(f, &lo)| level_set_length(f, below, false).max(lo))
        .collect();
    let deficit = (one - lows.iter().copied().sum::<T>()).max(T::zero());
    let room: T = highs.iter().zip(&lows).map(|(&h, &l)| h - l).sum();
    let mut x: Vec<T> = lows
        .iter()
        .zip(&highs)
        .map(|(&l, &h)| {
            if room > T::zero() {
                l + deficit * (h - l) / room
            } else {
                l
            }
        })
        .collect();
    let total: T = x.iter().copied().sum();
    if total > T::zero() {
        for xi in &mut x {
            *xi = (*xi / total).min(one);
        }
    }
    let value = functions
        .iter()
        .zip(&x)
        .map(|(f, &xi)| f.value_unchecked(xi))
        .sum();
    Ok((x, value))
}

/// `c_i = max_{j <= i} a_j + b_{i-j}` with the smallest maximising `j`.
pub fn max_plus_convolution<T: Scalar>(a: &[T], b: &[T]) -> (Vec<T>, Vec<usize>) {
    let n = a.len().min(b.len());
    let mut values = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = T::neg_infinity();
        let mut best_j = 0;
        for j in 0..=i {
            let v = a[j] + b[i - j];
            if v > best {
                best = v;
                best_j = j;
            }
        }
        values.push(best);
        argmax.push(best_j);
    }
    (values, argmax)
}

/// Exhaustive grid profile of a pair: `H(i/n) = max_{j <= i} f1(j/n) + f2((i-j)/n)`
/// and the maximising `j` for every `i`.
pub fn grid_profile<T: Scalar>(
    f1: &RewardFunction<T>,
    f2: &RewardFunction<T>,
    n: usize,
) -> (Vec<T>, Vec<usize>) {
    max_plus_convolution(&sample_grid(f1, n), &sample_grid(f2, n))
}

fn sample_grid<T: Scalar>(f: &RewardFunction<T>, n: usize) -> Vec<T> {
    (0..=n)
        .map(|i| f.value_unchecked(T::of(i as f64 / n as f64)))
        .collect()
}

/// Left child, right child, and the left share for every budget.
type GridSplit<T> = (Box<GridNode<T>>, Box<GridNode<T>>, Vec<usize>);

struct GridNode<T> {
    values: Vec<T>,
    split: Option<GridSplit<T>>,
}

fn grid_node<T: Scalar>(functions: &[RewardFunction<T>], n: usize) -> GridNode<T> {
    if functions.len() == 1 {
        return GridNode {
            values: sample_grid(&functions[0], n),
            split: None,
        };
    }
    let mid = functions.len().div_ceil(2);
    let left = grid_node(&functions[..mid], n);
    let right = grid_node(&functions[mid..], n);
    let (values, argmax) = max_plus_convolution(&left.values, &right.values);
    GridNode {
        values,
        split: Some((Box::new(left), Box::new(right), argmax)),
    }
}

fn recover<T: Scalar>(node: &GridNode<T>, units: usize, out: &mut Vec<usize>) {
    match &node.split {
        None => out.push(units),
        Some((left, right, argmax)) => {
            let j = argmax[units];
            recover(left, j, out);
            recover(right, units - j, out);
        }
    }
}

/// Exhaustive maximum over the grid `{x : n x_k integer, sum x_k = 1}`.
///
/// Cost is `O(K n^2)`; intended for `K <= 4` and `n` up to `10^4`.
pub fn brute_force_allocation<T: Scalar>(
    functions: &[RewardFunction<T>],
    n: usize,
) -> Result<(Vec<T>, T)> {
    if functions.is_empty() || n == 0 {
        return Err(Error::Parameter(
            "need functions and a positive resolution".into(),
        ));
    }
    let root = grid_node(functions, n);
    let mut units = Vec::with_capacity(functions.len());
    recover(&root, n, &mut units);
    let x = units.iter().map(|&u| T::of(u as f64 / n as f64)).collect();
    Ok((x, root.values[n]))
}

/// Maximum of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section_max<T: Scalar, F: Fn(T) -> T>(f: F, lo: T, hi: T, tol: T) -> (T, T) {
    let inv_phi = T::of((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..MAX_BISECTION_STEPS {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / T::of(2.0);
    [(lo, f(lo)), (hi, f(hi)), (mid, f(mid))].into_iter().fold(
        (mid, T::neg_infinity()),
        |best, cand| if cand.1 > best.1 { cand } else { best },
    )
}

/// Profile of a group of leaves split as in a balanced tree (first half left):
/// `H(v) = max_{z in [0, v]} H_left(z) + H_right(v - z)`, by nested golden sections.
pub fn nested_profile<T: Scalar>(leaves: &[RewardFunction<T>], v: T) -> T {
    nested_profile_argmax(leaves, v).1
}

/// Like [`nested_profile`], also returning the maximising left budget `z`.
pub fn nested_profile_argmax<T: Scalar>(leaves: &[RewardFunction<T>], v: T) -> (T, T) {
    let v = v.max(T::zero()).min(T::one());
    if leaves.len() == 1 {
        return (v, leaves[0].value_unchecked(v));
    }
    let mid = leaves.len() / 2;
    let (left, right) = leaves.split_at(mid);
    let tol = T::of(1e-11).max(T::epsilon() * T::of(8.0));
    golden_section_max(
        |z| nested_profile(left, z) + nested_profile(right, (v - z).max(T::zero())),
        T::zero(),
        v,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{make_experiment_pair_beta2, make_quadratic, RewardFunction};

    #[test]
    fn identical_functions_split_uniformly() {
        for k in 2..=5 {
            let fs = vec![make_quadratic(1.0, 2.0).unwrap(); k];
            let (x, _) = optimal_allocation(&fs).unwrap();
            for xi in x {
                assert!((xi - 1.0 / k as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_arms_put_everything_on_the_best() {
        let fs: Vec<RewardFunction<f64>> = vec![
            RewardFunction::linear(3.0).unwrap(),
            RewardFunction::linear(1.0).unwrap(),
        ];
        let (x, value) = optimal_allocation(&fs).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!((value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tied_linear_arms_share_the_budget() {
        let fs = vec![RewardFunction::linear(1.0).unwrap(); 3];
        let (x, value) = optimal_allocation(&fs).unwrap();
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn experiment_pair_optimum() {
        let (f1, f2) = make_experiment_pair_beta2::<f64>();
        let (x, _) = optimal_allocation(&[f1, f2]).unwrap();
        assert!((x[0] - 0.4).abs() < 1e-9 && (x[1] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn convex_input_is_rejected() {
        let convex = RewardFunction::custom_unchecked("convex", |x: f64| x * x, |x| 2.0 * x, 2.0);
        let f = make_quadratic(1.0, 2.0).unwrap();
        assert!(matches!(
            optimal_allocation(&[f, convex]),
            Err(Error::NotConcave { index: 1, .. })
        ));
    }

    #[test]
    fn brute_force_matches_water_filling() {
        let fs: Vec<RewardFunction<f64>> = vec![
            make_quadratic(1.0, 2.0).unwrap(),
            make_quadratic(0.5, 1.5).unwrap(),
            RewardFunction::c_alpha(-0.5, 1.5, 3.0).unwrap(),
        ];
        let (x, v) = optimal_allocation(&fs).unwrap();
        let (xb, vb) = brute_force_allocation(&fs, 2000).unwrap();
        assert!((v - vb).abs() < 1e-6);
        for (a, b) in x.iter().zip(&xb) {
            assert!((a - b).abs() < 2e-3);
        }
    }

    #[test]
    fn golden_profile_matches_grid_profile() {
        let f1 = make_quadratic(1.0, 2.0).unwrap();
        let f2 = RewardFunction::c_alpha(-0.3, 1.2, 2.5).unwrap();
        let (grid, _) = grid_profile(&f1, &f2, 1000);
        let leaves = [f1, f2];
        for i in [0, 137, 500, 999, 1000] {
            let v = i as f64 / 1000.0;
            let h = nested_profile(&leaves, v);
            assert!(h >= grid[i] - 1e-12);
            assert!(h - grid[i] < 1e-5);
        }
    }
}
