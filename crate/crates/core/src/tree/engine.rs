//! Lockstep execution of the imbricated searches of a subtree.
//!
//! Every step samples one noisy gradient per leaf at the current allocation,
//! rebuilds the gradient estimates bottom-up, then lets each active internal
//! node decide top-down. A node that moves restarts every search below it.

use crate::reward::Oracle;
use crate::scalar::Scalar;
use crate::sign_test::{hoeffding_half_width, Status};
use crate::trace::NodeQueryRecord;
use crate::tree::{child_stop_threshold, FunctionTree, GradientEstimate, PrecisionContext};

/// Source of per-leaf gradient samples. `allocation` and `out` have one entry
/// per real resource.
pub trait LeafSampler<T: Scalar> {
    fn sample(&mut self, allocation: &[T], out: &mut [T]);
}

impl<T: Scalar> LeafSampler<T> for Oracle<'_, T> {
    fn sample(&mut self, allocation: &[T], out: &mut [T]) {
        self.noisy_gradient_into(allocation, out);
    }
}

/// Exact gradients, no noise.
#[derive(Debug, Clone, Copy)]
pub struct ExactSampler<'a, T: Scalar> {
    pub tree: &'a FunctionTree<T>,
}

impl<T: Scalar> LeafSampler<T> for ExactSampler<'_, T> {
    fn sample(&mut self, allocation: &[T], out: &mut [T]) {
        for (k, (o, &x)) in out.iter_mut().zip(allocation).enumerate() {
            *o = self
                .tree
                .leaf(k)
                .gradient_unchecked(x.max(T::zero()).min(T::one()));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Snap {
    None,
    /// Everything goes to the right child.
    Zero,
    /// Everything goes to the left child.
    Full,
}

#[derive(Debug, Clone, Copy)]
struct NodeState<T> {
    lo: T,
    hi: T,
    w: T,
    queries: u32,
    samples: u64,
    halted: bool,
    snap: Snap,
}

pub(crate) struct Engine<'a, T: Scalar> {
    tree: &'a FunctionTree<T>,
    root: usize,
    ctx: PrecisionContext<T>,
    nodes: Vec<NodeState<T>>,
    budgets: Vec<T>,
    estimates: Vec<GradientEstimate<T>>,
    /// `(m, a)`: estimate of `grad G` at the node's query and its half-width.
    grad_g: Vec<(T, T)>,
    leaf_sum: Vec<T>,
    leaf_count: Vec<u64>,
    allocation: Vec<T>,
    samples: Vec<T>,
    pub(crate) records: Vec<NodeQueryRecord<T>>,
    pub(crate) violations: u64,
    /// Bumped whenever the allocation changes.
    pub(crate) version: u64,
}

impl<'a, T: Scalar> Engine<'a, T> {
    pub(crate) fn new(
        tree: &'a FunctionTree<T>,
        root: usize,
        budget: T,
        ctx: PrecisionContext<T>,
    ) -> Self {
        let size = 2 * tree.leaf_count();
        let blank = NodeState {
            lo: T::zero(),
            hi: T::zero(),
            w: T::zero(),
            queries: 0,
            samples: 0,
            halted: true,
            snap: Snap::None,
        };
        let mut engine = Self {
            tree,
            root,
            ctx,
            nodes: vec![blank; size],
            budgets: vec![T::zero(); size],
            estimates: vec![GradientEstimate::exact(T::zero()); size],
            grad_g: vec![(T::zero(), T::zero()); size],
            leaf_sum: vec![T::zero(); tree.leaf_count()],
            leaf_count: vec![0; tree.leaf_count()],
            allocation: vec![T::zero(); tree.k()],
            samples: vec![T::zero(); tree.k()],
            records: Vec::new(),
            violations: 0,
            version: 0,
        };
        engine.reset(root, budget);
        engine
    }

    pub(crate) fn allocation(&self) -> &[T] {
        &self.allocation
    }

    pub(crate) fn estimate(&self, node: usize) -> GradientEstimate<T> {
        self.estimates[node]
    }

    /// Fresh search at `node` with budget `v`, recursively.
    fn reset(&mut self, node: usize, v: T) {
        self.version += 1;
        self.budgets[node] = v;
        if self.tree.is_leaf_node(node) {
            let leaf = self.tree.leaf_of(node);
            self.leaf_sum[leaf] = T::zero();
            self.leaf_count[leaf] = 0;
            if leaf < self.tree.k() {
                self.allocation[leaf] = v;
            }
            return;
        }
        let (left, right) = (2 * node, 2 * node + 1);
        let mut state = NodeState {
            lo: T::zero(),
            hi: v,
            w: v / T::of(2.0),
            queries: 0,
            samples: 0,
            halted: false,
            snap: Snap::None,
        };
        if self.tree.is_void(right) {
            // Padding earns nothing; every real reward is non-decreasing.
            state.w = v;
            state.lo = v;
            state.halted = true;
            state.snap = Snap::Full;
        } else if v < self.ctx.floor {
            state.halted = true;
        }
        self.nodes[node] = state;
        self.reset(left, state.w);
        self.reset(right, (v - state.w).max(T::zero()));
    }

    /// Plays the current allocation once.
    pub(crate) fn step<S: LeafSampler<T> + ?Sized>(&mut self, sampler: &mut S) {
        sampler.sample(&self.allocation, &mut self.samples);
        let (first, last) = self.tree.leaf_span(self.root);
        for leaf in first..last {
            if leaf < self.tree.k() {
                self.leaf_sum[leaf] = self.leaf_sum[leaf] + self.samples[leaf];
                self.leaf_count[leaf] += 1;
            }
        }
        self.estimate_bottom_up();
        self.decide(self.root, None, false);
    }

    fn leaf_estimate(&self, leaf: usize) -> GradientEstimate<T> {
        if leaf >= self.tree.k() {
            return GradientEstimate::exact(T::zero());
        }
        let n = self.leaf_count[leaf];
        if n == 0 {
            return GradientEstimate::unknown();
        }
        let mean = self.leaf_sum[leaf] / T::of(n as f64);
        let alpha = self.ctx.half_width_scale * hoeffding_half_width(self.ctx.log_factor, n);
        GradientEstimate::new(mean, alpha)
    }

    fn estimate_bottom_up(&mut self) {
        let depth = self.tree.depth() - self.tree.level(self.root);
        // Deepest level first.
        for rel in (0..=depth).rev() {
            let first = self.root << rel;
            for node in first..first + (1 << rel) {
                let e = if self.tree.is_leaf_node(node) {
                    self.leaf_estimate(self.tree.leaf_of(node))
                } else {
                    self.internal_estimate(node)
                };
                self.estimates[node] = e;
            }
        }
    }

    fn internal_estimate(&mut self, node: usize) -> GradientEstimate<T> {
        let (el, er) = (self.estimates[2 * node], self.estimates[2 * node + 1]);
        self.grad_g[node] = (el.value - er.value, el.alpha + er.alpha);
        let state = &self.nodes[node];
        match state.snap {
            Snap::Zero => return er,
            Snap::Full => return el,
            Snap::None => {}
        }
        if !(el.alpha.is_finite() && er.alpha.is_finite()) {
            return GradientEstimate::unknown();
        }
        let v = self.budgets[node];
        let upper = el.upper().max(er.upper());
        let lower = if v < self.ctx.floor {
            // grad H(0+) = max of the children's gradients at 0.
            el.lower().max(er.lower())
        } else {
            // grad H(v) lies between grad H_left(w) and grad H_right(v - w).
            el.lower().min(er.lower())
        };
        GradientEstimate::from_bounds(lower, upper)
    }

    fn decide(&mut self, node: usize, threshold: Option<T>, parent_frozen: bool) {
        if self.tree.is_leaf_node(node) {
            return;
        }
        let (m, a) = self.grad_g[node];
        let magnitude = m.abs();
        let frozen = parent_frozen || threshold.is_some_and(|th| magnitude + a < th);
        let state = self.nodes[node];
        if let Some(th) = threshold {
            if !frozen && !state.halted && magnitude + a < th {
                self.violations += 1;
            }
        }
        if !frozen && !state.halted {
            self.nodes[node].samples += 1;
            let status = Status::from_interval(m, a);
            if status.is_decided() {
                self.move_query(node, status);
                return;
            }
        }
        let child_threshold = if state.halted || frozen {
            None
        } else {
            Some(child_stop_threshold(magnitude, a))
        };
        self.decide(2 * node, child_threshold, frozen);
        self.decide(2 * node + 1, child_threshold, frozen);
    }

    fn move_query(&mut self, node: usize, status: Status) {
        let mut state = self.nodes[node];
        let v = self.budgets[node];
        self.records.push(NodeQueryRecord {
            node,
            p: self.tree.p(node),
            budget: v,
            query: state.w,
            samples: state.samples,
            decision: status,
            true_gradient: self.exact_grad_g(node, state.w),
        });
        match status {
            Status::Positive => state.lo = state.w,
            Status::Negative => state.hi = state.w,
            Status::Undecided => return,
        }
        state.queries += 1;
        state.samples = 0;
        state.w = (state.lo + state.hi) / T::of(2.0);
        if state.hi - state.lo < self.ctx.floor || state.queries >= self.ctx.query_cap {
            state.halted = true;
            if state.lo == T::zero() {
                state.w = T::zero();
                state.snap = Snap::Zero;
            } else if state.hi == v {
                state.w = v;
                state.snap = Snap::Full;
            }
        }
        self.nodes[node] = state;
        self.reset(2 * node, state.w);
        self.reset(2 * node + 1, (v - state.w).max(T::zero()));
    }

    fn exact_grad_g(&self, node: usize, w: T) -> Option<f64> {
        if self.tree.p(node) != 0 {
            return None;
        }
        let v = self.budgets[node];
        let left = self.tree.leaf(self.tree.leaf_of(2 * node));
        let right = self.tree.leaf(self.tree.leaf_of(2 * node + 1));
        let g = left.gradient_unchecked(w) - right.gradient_unchecked((v - w).max(T::zero()));
        Some(g.as_f64())
    }
}
