//! Budgeted threshold searches split into independent top-level branches.
//!
//! Each decision ("is there a solution of value at most `t`?") runs its
//! branches concurrently and reads them back in branch order as if they had
//! been searched one after another under a single budget, so answers,
//! witnesses and node counts do not depend on scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

/// State of one branch of a decision search.
pub(crate) struct Branch<'a, W> {
    index: usize,
    cap: u64,
    first_found: &'a AtomicUsize,
    pub nodes: u64,
    pub exhausted: bool,
    /// First solution in search order, with the node count at discovery.
    pub witness: Option<(u64, W)>,
}

impl<W> Branch<'_, W> {
    /// Counts a node; false once the cap is reached or an earlier branch
    /// already succeeded (later branches are then irrelevant).
    pub fn tick(&mut self) -> bool {
        if self.nodes >= self.cap || self.first_found.load(Ordering::Relaxed) < self.index {
            self.exhausted = false;
            return false;
        }
        self.nodes += 1;
        true
    }

    pub fn found(&mut self, w: W) {
        self.witness = Some((self.nodes, w));
        self.first_found.fetch_min(self.index, Ordering::Relaxed);
    }

    pub fn done(&self) -> bool {
        self.witness.is_some() || !self.exhausted
    }
}

pub(crate) enum Decision<W> {
    Feasible(W),
    Infeasible,
    /// The budget ran out first.
    Unknown,
}

/// Runs `branch(i, state)` for `i < count` and folds the results under
/// `budget`. Returns the decision and the nodes it consumed.
pub(crate) fn decide<W, F>(count: usize, budget: u64, branch: F) -> (Decision<W>, u64)
where
    W: Send,
    F: Fn(usize, &mut Branch<'_, W>) + Sync,
{
    let first_found = AtomicUsize::new(usize::MAX);
    let runs: Vec<(u64, bool, Option<(u64, W)>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut b = Branch {
                index: i,
                cap: budget,
                first_found: &first_found,
                nodes: 0,
                exhausted: true,
                witness: None,
            };
            branch(i, &mut b);
            (b.nodes, b.exhausted, b.witness)
        })
        .collect();
    let mut used = 0u64;
    for (nodes, exhausted, witness) in runs {
        let remaining = budget - used;
        if let Some((at, w)) = witness {
            if at <= remaining {
                return (Decision::Feasible(w), used + at);
            }
            return (Decision::Unknown, budget);
        }
        if !exhausted || nodes > remaining {
            return (Decision::Unknown, budget);
        }
        used += nodes;
    }
    (Decision::Infeasible, used)
}

pub(crate) struct Minimized<W> {
    /// Least candidate value proven feasible, with its witness.
    pub upper: (f64, W),
    /// Largest value not yet excluded from below.
    pub lower: f64,
    pub exact: bool,
    pub nodes: u64,
}

/// Binary search for the least feasible value among sorted `candidates`,
/// starting from a known feasible `seed` and skipping values below `floor`.
pub(crate) fn minimize<W, F>(
    candidates: &[f64],
    floor: f64,
    seed: (f64, W),
    budget: u64,
    mut decide_at: F,
) -> Minimized<W>
where
    F: FnMut(f64, u64) -> (Decision<W>, u64),
{
    let mut lo = candidates.partition_point(|&v| v < floor);
    let mut hi = candidates.partition_point(|&v| v < seed.0);
    let mut upper = seed;
    let mut nodes = 0u64;
    let mut exact = true;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let (d, used) = decide_at(candidates[mid], budget - nodes);
        nodes += used;
        match d {
            Decision::Feasible(w) => {
                upper = (candidates[mid], w);
                hi = mid;
            }
            Decision::Infeasible => lo = mid + 1,
            Decision::Unknown => {
                exact = false;
                break;
            }
        }
    }
    let lower = if exact {
        upper.0
    } else {
        candidates.get(lo).copied().unwrap_or(upper.0).max(floor).min(upper.0)
    };
    Minimized {
        upper,
        lower,
        exact,
        nodes,
    }
}

/// Sorted distinct values.
pub(crate) fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
