//! Run traces: what was played at every round, stored run-length encoded.

use crate::scalar::Scalar;
use crate::sign_test::Status;

/// `len` consecutive rounds, starting at round `start` (1-based), that all
/// played the same allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T: Scalar> {
    pub start: u64,
    pub len: u64,
    pub allocation: Vec<T>,
    /// Exact `F(x*) - F(x)`, clamped at zero.
    pub gap: f64,
}

/// One completed (or interrupted) depth of the two-resource search.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRecord<T: Scalar> {
    pub depth: u32,
    pub query: T,
    pub lo: T,
    pub hi: T,
    pub samples: u64,
    pub decision: Status,
}

/// One decision of an internal node of the tree allocator.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeQueryRecord<T: Scalar> {
    /// Heap index, root = 1.
    pub node: usize,
    /// Distance from the leaves minus one (0 for parents of leaves).
    pub p: u32,
    pub budget: T,
    pub query: T,
    pub samples: u64,
    pub decision: Status,
    /// Exact `grad G` at the query; only known for parents of leaves.
    pub true_gradient: Option<f64>,
}

/// Full record of one allocation run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace<T: Scalar> {
    pub k: usize,
    pub horizon: u64,
    pub optimal_value: f64,
    pub segments: Vec<Segment<T>>,
    pub depths: Vec<DepthRecord<T>>,
    pub node_queries: Vec<NodeQueryRecord<T>>,
    /// Tree runs only: how often an active child's `|grad G|` interval fell
    /// entirely below its parent's.
    pub ordering_violations: u64,
}

impl<T: Scalar> RunTrace<T> {
    pub fn new(k: usize, horizon: u64, optimal_value: f64) -> Self {
        Self {
            k,
            horizon,
            optimal_value,
            ..Self::default()
        }
    }

    /// Appends `len` rounds of `allocation`, merging with the previous segment when equal.
    pub fn push(&mut self, allocation: &[T], gap: f64, len: u64) {
        if len == 0 {
            return;
        }
        let start = self.rounds() + 1;
        if let Some(last) = self.segments.last_mut() {
            if last.allocation == allocation {
                last.len += len;
                return;
            }
        }
        self.segments.push(Segment {
            start,
            len,
            allocation: allocation.to_vec(),
            gap: gap.max(0.0),
        });
    }

    /// Number of rounds recorded so far.
    pub fn rounds(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.start + s.len - 1)
    }

    /// Iterates `(t, allocation, gap)` over every round.
    pub fn steps(&self) -> impl Iterator<Item = (u64, &[T], f64)> + '_ {
        self.segments.iter().flat_map(|s| {
            (s.start..s.start + s.len).map(move |t| (t, s.allocation.as_slice(), s.gap))
        })
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.segments.iter().map(|s| s.gap * s.len as f64).sum()
    }

    /// Cumulative regret divided by the horizon.
    pub fn average_regret(&self) -> f64 {
        self.cumulative_regret() / self.horizon as f64
    }

    pub fn final_allocation(&self) -> Option<&[T]> {
        self.segments.last().map(|s| s.allocation.as_slice())
    }

    /// Sample counts of all depths, in order.
    pub fn depth_samples(&self) -> impl Iterator<Item = u64> + '_ {
        self.depths.iter().map(|d| d.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_merge_and_expand() {
        let mut trace = RunTrace::<f64>::new(2, 6, 1.0);
        trace.push(&[0.5, 0.5], 0.1, 2);
        trace.push(&[0.5, 0.5], 0.1, 1);
        trace.push(&[0.25, 0.75], 0.2, 3);
        trace.push(&[0.25, 0.75], 0.2, 0);
        assert_eq!(trace.segments.len(), 2);
        assert_eq!(trace.rounds(), 6);
        let ts: Vec<u64> = trace.steps().map(|(t, _, _)| t).collect();
        assert_eq!(ts, vec![1, 2, 3, 4, 5, 6]);
        assert!((trace.cumulative_regret() - 0.9).abs() < 1e-12);
        assert!((trace.average_regret() - 0.15).abs() < 1e-12);
        assert_eq!(trace.final_allocation(), Some(&[0.25, 0.75][..]));
    }

    #[test]
    fn negative_gaps_are_clamped() {
        let mut trace = RunTrace::<f32>::new(2, 1, 0.0);
        trace.push(&[1.0, 0.0], -1e-9, 1);
        assert_eq!(trace.cumulative_regret(), 0.0);
    }
}
