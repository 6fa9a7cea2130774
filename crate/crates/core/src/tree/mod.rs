//! Allocation over `K >= 3` resources by imbricated binary searches.
//!
//! The resources are the leaves of a balanced binary tree (padded with zero
//! rewards up to a power of two). Internal node `n` owns a budget `v` and
//! searches the split `w` maximising `H_left(w) + H_right(v - w)`, where `H`
//! is the best reward a subtree can collect from a given budget. The sign
//! of `grad G(w) = grad H_left(w) - grad H_right(v - w)` is tested with
//! gradient estimates built recursively from the leaves, using the envelope
//! identity `grad H(v) = grad H_left(w*) = grad H_right(v - w*)`.
//!
//! Nodes are numbered heap style: root `1`, children of `n` are `2n` and `2n + 1`.

mod engine;

pub use engine::{ExactSampler, LeafSampler};

use engine::Engine;

use crate::error::{Error, Result};
use crate::k2::{run_k2, K2Config};
use crate::optimum::optimal_allocation;
use crate::reward::{InstanceSpec, Oracle, RewardFunction};
use crate::scalar::Scalar;
use crate::trace::RunTrace;

/// Largest supported number of resources.
pub const MAX_RESOURCES: usize = 1 << 16;

/// Balanced binary tree of reward functions.
#[derive(Debug, Clone)]
pub struct FunctionTree<T: Scalar> {
    leaves: Vec<RewardFunction<T>>,
    k: usize,
    depth: u32,
}

/// Builds the tree over `functions`, padding with zero rewards.
pub fn build_tree<T: Scalar>(functions: &[RewardFunction<T>]) -> Result<FunctionTree<T>> {
    FunctionTree::new(functions)
}

impl<T: Scalar> FunctionTree<T> {
    pub fn new(functions: &[RewardFunction<T>]) -> Result<Self> {
        let k = functions.len();
        if k < 2 {
            return Err(Error::Parameter(format!(
                "a tree needs K >= 2 leaves, got {k}"
            )));
        }
        if k > MAX_RESOURCES {
            return Err(Error::Parameter(format!(
                "K = {k} exceeds the supported {MAX_RESOURCES}"
            )));
        }
        let width = k.next_power_of_two();
        let mut leaves = functions.to_vec();
        leaves.resize(width, RewardFunction::zero());
        Ok(Self {
            leaves,
            k,
            depth: width.trailing_zeros(),
        })
    }

    /// Number of real resources.
    pub fn k(&self) -> usize {
        self.k
    }

    /// `2^ceil(log2 K)`.
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaves(&self) -> &[RewardFunction<T>] {
        &self.leaves
    }

    pub fn leaf(&self, index: usize) -> &RewardFunction<T> {
        &self.leaves[index]
    }

    pub fn is_padding(&self, leaf: usize) -> bool {
        leaf >= self.k
    }

    pub fn root(&self) -> usize {
        1
    }

    pub fn is_leaf_node(&self, node: usize) -> bool {
        node >= self.leaf_count()
    }

    /// Leaf index of a leaf node.
    pub fn leaf_of(&self, node: usize) -> usize {
        node - self.leaf_count()
    }

    pub fn node_of_leaf(&self, leaf: usize) -> usize {
        leaf + self.leaf_count()
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        (!self.is_leaf_node(node)).then_some((2 * node, 2 * node + 1))
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        (node > 1).then_some(node / 2)
    }

    /// Distance from the root (root = 0).
    pub fn level(&self, node: usize) -> u32 {
        usize::BITS - 1 - node.leading_zeros()
    }

    /// `(i, j)`: level and 1-based position within the level.
    pub fn coordinates(&self, node: usize) -> (u32, usize) {
        let i = self.level(node);
        (i, node - (1 << i) + 1)
    }

    /// Distance from the leaves minus one: 0 for parents of leaves.
    pub fn p(&self, node: usize) -> u32 {
        (self.depth - self.level(node)).saturating_sub(1)
    }

    /// Half-open range of leaf indices under `node`.
    pub fn leaf_span(&self, node: usize) -> (usize, usize) {
        let shift = self.depth - self.level(node);
        let first = (node << shift) - self.leaf_count();
        (first, first + (1 << shift))
    }

    pub fn subtree_leaves(&self, node: usize) -> &[RewardFunction<T>] {
        let (a, b) = self.leaf_span(node);
        &self.leaves[a..b]
    }

    /// True when every leaf under `node` is padding.
    pub fn is_void(&self, node: usize) -> bool {
        self.leaf_span(node).0 >= self.k
    }

    /// Heap indices of the internal nodes, root first.
    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        1..self.leaf_count()
    }

    pub fn max_lipschitz(&self) -> T {
        self.leaves
            .iter()
            .map(RewardFunction::lipschitz)
            .fold(T::zero(), T::max)
    }
}

/// Interval estimate `value ± alpha` of a gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate<T: Scalar> {
    pub value: T,
    pub alpha: T,
}

impl<T: Scalar> GradientEstimate<T> {
    pub fn new(value: T, alpha: T) -> Self {
        Self { value, alpha }
    }

    pub fn exact(value: T) -> Self {
        Self::new(value, T::zero())
    }

    /// No information yet.
    pub fn unknown() -> Self {
        Self::new(T::zero(), T::infinity())
    }

    pub fn from_bounds(lower: T, upper: T) -> Self {
        Self::new(
            (lower + upper) / T::of(2.0),
            ((upper - lower) / T::of(2.0)).max(T::zero()),
        )
    }

    pub fn lower(&self) -> T {
        self.value - self.alpha
    }

    pub fn upper(&self) -> T {
        self.value + self.alpha
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lower() && x <= self.upper()
    }
}

/// `max(0, |m| - a)`: once a child's `|grad G|` interval lies entirely below
/// this lower bound on its parent's `|grad G|`, the child stops refining.
pub fn child_stop_threshold<T: Scalar>(parent_magnitude: T, parent_half_width: T) -> T {
    let th = parent_magnitude.abs() - parent_half_width;
    if th.is_nan() {
        T::zero()
    } else {
        th.max(T::zero())
    }
}

/// Parameters shared by every search in a tree run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionContext<T: Scalar> {
    /// `ln(2T / delta)`.
    pub log_factor: T,
    /// Multiplies every leaf's Hoeffding half-width; `0` trusts single samples.
    pub half_width_scale: T,
    /// Searches stop below this interval width.
    pub floor: T,
    /// Searches stop after this many decisions.
    pub query_cap: u32,
    /// [`estimate_node_gradient`] returns once the estimate is this tight.
    pub target_alpha: T,
    /// [`estimate_node_gradient`] returns after this many steps regardless.
    pub max_steps: u64,
}

impl<T: Scalar> PrecisionContext<T> {
    /// Floor `1 / (L T)`, cap `ceil(log2 T)`, no early stop.
    pub fn for_instance(instance: &InstanceSpec<T>, config: &TreeConfig<T>) -> Self {
        let horizon = instance.horizon as f64;
        let lipschitz = instance.lipschitz().as_f64();
        let floor = config
            .floor
            .unwrap_or_else(|| T::of(1.0 / (lipschitz.clamp(f64::EPSILON, 1e12) * horizon)));
        Self {
            log_factor: instance.log_factor(),
            half_width_scale: config.half_width_scale,
            floor,
            query_cap: config
                .query_cap
                .unwrap_or((horizon.log2().ceil() as u32).max(1)),
            target_alpha: T::zero(),
            max_steps: instance.horizon,
        }
    }
}

/// Knobs of the tree allocator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig<T: Scalar> {
    pub half_width_scale: T,
    pub query_cap: Option<u32>,
    pub floor: Option<T>,
    /// Used when `K = 2`.
    pub k2: K2Config,
}

impl<T: Scalar> Default for TreeConfig<T> {
    fn default() -> Self {
        Self {
            half_width_scale: T::one(),
            query_cap: None,
            floor: None,
            k2: K2Config::default(),
        }
    }
}

/// Runs the tree allocator for the instance's horizon. `K = 2` runs the
/// two-resource search directly.
pub fn run_tree<T: Scalar>(
    instance: &InstanceSpec<T>,
    config: &TreeConfig<T>,
) -> Result<RunTrace<T>> {
    if instance.k() == 2 {
        return run_k2(instance, &config.k2);
    }
    let mut oracle = Oracle::new(instance);
    run_tree_with(instance, config, &mut oracle)
}

/// Runs the tree allocator against an arbitrary sampler.
pub fn run_tree_with<T: Scalar, S: LeafSampler<T> + ?Sized>(
    instance: &InstanceSpec<T>,
    config: &TreeConfig<T>,
    sampler: &mut S,
) -> Result<RunTrace<T>> {
    let tree = build_tree(&instance.functions)?;
    let (_, optimum) = optimal_allocation(&instance.functions)?;
    let ctx = PrecisionContext::for_instance(instance, config);
    let mut engine = Engine::new(&tree, tree.root(), T::one(), ctx);
    let mut trace = RunTrace::new(instance.k(), instance.horizon, optimum.as_f64());
    let mut played = engine.allocation().to_vec();
    let mut gap = allocation_gap(&instance.functions, optimum, &played);
    let mut version = engine.version;
    let mut run = 0u64;
    for _ in 0..instance.horizon {
        engine.step(sampler);
        run += 1;
        if engine.version != version {
            trace.push(&played, gap, run);
            run = 0;
            version = engine.version;
            played.copy_from_slice(engine.allocation());
            gap = allocation_gap(&instance.functions, optimum, &played);
        }
    }
    trace.push(&played, gap, run);
    trace.node_queries = std::mem::take(&mut engine.records);
    trace.ordering_violations = engine.violations;
    Ok(trace)
}

fn allocation_gap<T: Scalar>(functions: &[RewardFunction<T>], optimum: T, x: &[T]) -> f64 {
    let value: T = functions
        .iter()
        .zip(x)
        .map(|(f, &xi)| f.value_unchecked(xi.max(T::zero()).min(T::one())))
        .sum();
    (optimum - value).as_f64().max(0.0)
}

/// Estimate of `grad H_node(v)`: runs the searches below `node` with budget
/// `v` until the estimate's half-width reaches `ctx.target_alpha` or
/// `ctx.max_steps` steps have been played.
pub fn estimate_node_gradient<T: Scalar, S: LeafSampler<T> + ?Sized>(
    tree: &FunctionTree<T>,
    node: usize,
    v: T,
    ctx: &PrecisionContext<T>,
    sampler: &mut S,
) -> Result<GradientEstimate<T>> {
    if node == 0 || node >= 2 * tree.leaf_count() {
        return Err(Error::Parameter(format!("node {node} is not in the tree")));
    }
    if !(v >= T::zero() && v <= T::one()) {
        return Err(Error::Domain { x: v.as_f64() });
    }
    let mut engine = Engine::new(tree, node, v, *ctx);
    let mut estimate = GradientEstimate::unknown();
    for _ in 0..ctx.max_steps.max(1) {
        engine.step(sampler);
        estimate = engine.estimate(node);
        if estimate.alpha <= ctx.target_alpha {
            break;
        }
    }
    Ok(estimate)
}
