//! Sophisticated-optimal highlighting is as hard as Euclidean 2-means.
//!
//! From points z_1..z_m in R^p and a threshold T the reduction builds a
//! uniform prior over binary states with bandwidth one: m data states
//! (0, 0, enc(i)) and one gadget state per signal other than the two
//! cluster signals "feature 0 is 0" and "feature 1 is 0". Actions are
//! vectors in R^p (squared distance to z_i on data states, cost B on
//! gadgets) or gadget labels (zero on the matching gadget, B elsewhere).
//! Any pooling with a gadget costs at least B = T + 1, so an optimal policy
//! isolates the gadgets and splits the data states over the two cluster
//! signals; n times the optimal risk is then the 2-means optimum.
//!
//! Everything here is brute force and meant for tiny instances.

use std::collections::HashMap;

use serde::Serialize;

use crate::belief::DiscreteBelief;
use crate::error::{Error, Result};

/// Default cap on enumerated assignments.
pub const DEFAULT_SEARCH_CAP: u128 = 100_000_000;

/// A message under bandwidth one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Silent,
    Reveal { feature: usize, value: u8 },
}

impl Signal {
    /// Signals are numbered 0 (silent) and 1 + 2j + b for (feature j, value b).
    pub fn id(self) -> usize {
        match self {
            Self::Silent => 0,
            Self::Reveal { feature, value } => 1 + 2 * feature + value as usize,
        }
    }

    pub fn from_id(id: usize) -> Self {
        if id == 0 {
            Self::Silent
        } else {
            Self::Reveal {
                feature: (id - 1) / 2,
                value: ((id - 1) % 2) as u8,
            }
        }
    }

    /// The revealed feature, if any.
    pub fn feature(self) -> Option<usize> {
        match self {
            Self::Silent => None,
            Self::Reveal { feature, .. } => Some(feature),
        }
    }
}

/// Role of a support state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Stands for point `index`.
    Data { index: usize },
    /// Owns the designated signal.
    Gadget { signal: Signal },
}

/// Available actions: vectors in R^p plus one label per gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActionSpace {
    pub vector_dim: usize,
    pub gadget_labels: usize,
}

/// The highlighting instance built from a 2-means instance.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionInstance {
    pub points: Vec<Vec<f64>>,
    pub threshold: f64,
    /// Number of binary features.
    pub d: usize,
    /// Number of support states.
    pub n: usize,
    /// Loss of a wrong action on a gadget or a label action on data.
    pub big_loss: f64,
    /// T / n.
    pub scaled_threshold: f64,
    /// Uniform prior; data states first, then gadgets.
    pub prior: DiscreteBelief,
    pub kinds: Vec<StateKind>,
    pub actions: ActionSpace,
}

fn encode(i: usize, bits: usize) -> Vec<f64> {
    (0..bits)
        .map(|b| ((i >> (bits - 1 - b)) & 1) as f64)
        .collect()
}

/// Builds the reduction for `points` and threshold `threshold`.
pub fn build_reduction(points: &[Vec<f64>], threshold: f64) -> Result<ReductionInstance> {
    let m = points.len();
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let p = points[0].len();
    if p == 0 || points.iter().any(|z| z.len() != p) {
        return Err(Error::InvalidArgument("points need one common positive dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) || !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidArgument("points and threshold must be finite, threshold ≥ 0".into()));
    }
    let d = 6.max(2 + (m as f64).log2().ceil() as usize);
    let tail = d - 2;

    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut kinds = Vec::new();
    for i in 0..m {
        let mut y = vec![0.0, 0.0];
        y.extend(encode(i, tail));
        states.push(y);
        kinds.push(StateKind::Data { index: i });
    }

    // One gadget per non-cluster signal: features 0 and 1 are set, the
    // designated feature carries the designated value, and the remaining
    // bits count upward until the state is new.
    let designated = (0..2 * d + 1)
        .map(Signal::from_id)
        .filter(|s| !matches!(s, Signal::Reveal { feature: 0 | 1, value: 0 }));
    for signal in designated {
        let mut counter = 0usize;
        let state = loop {
            let mut x = vec![1.0, 1.0];
            x.extend(encode(counter % (1 << tail), tail));
            if let Signal::Reveal { feature, value } = signal {
                x[feature] = value as f64;
            }
            if !states.contains(&x) {
                break x;
            }
            counter += 1;
            if counter > 1 << tail {
                return Err(Error::InvalidArgument("ran out of gadget patterns".into()));
            }
        };
        states.push(state);
        kinds.push(StateKind::Gadget { signal });
    }

    let n = states.len();
    debug_assert_eq!(n, m + 2 * d - 1);
    Ok(ReductionInstance {
        points: points.to_vec(),
        threshold,
        d,
        n,
        big_loss: threshold + 1.0,
        scaled_threshold: threshold / n as f64,
        prior: DiscreteBelief::uniform(states)?,
        kinds,
        actions: ActionSpace {
            vector_dim: p,
            gadget_labels: 2 * d - 1,
        },
    })
}

/// A discrete sender problem in which every state picks one of its
/// reachable signals and the total loss is a sum of per-signal pool costs.
/// Pool costs must not decrease when a state joins a pool.
pub trait PoolingProblem {
    fn n_states(&self) -> usize;
    fn n_signals(&self) -> usize;
    /// Signals state `s` can send.
    fn options(&self, s: usize) -> Vec<usize>;
    /// Minimal total loss of the states in `pool` under a common action.
    fn pool_cost(&self, pool: &[usize]) -> f64;
    /// A summary of `pool` such that equal summaries give equal costs after
    /// any further additions. The pool itself always works.
    fn pool_key(&self, pool: &[usize]) -> Vec<usize> {
        pool.to_vec()
    }
    /// Order in which the search assigns states.
    fn search_order(&self) -> Vec<usize> {
        (0..self.n_states()).collect()
    }
}

impl ReductionInstance {
    fn sum_of_squares(&self, data: &[usize]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let p = self.actions.vector_dim;
        let mut centroid = vec![0.0; p];
        for &i in data {
            for (c, v) in centroid.iter_mut().zip(&self.points[i]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= data.len() as f64);
        data.iter()
            .map(|&i| {
                self.points[i]
                    .iter()
                    .zip(&centroid)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    fn split_pool(&self, pool: &[usize]) -> (Vec<usize>, usize) {
        let mut data = Vec::new();
        let mut gadgets = 0;
        for &s in pool {
            match self.kinds[s] {
                StateKind::Data { index } => data.push(index),
                StateKind::Gadget { .. } => gadgets += 1,
            }
        }
        data.sort_unstable();
        (data, gadgets)
    }

    /// Signal of every state under the policy the reduction's argument
    /// singles out: gadgets on their designated signal, data on a cluster
    /// signal (`in_second` picks "feature 1 is 0").
    fn structured_assignment(&self, in_second: impl Fn(usize) -> bool) -> Vec<usize> {
        self.kinds
            .iter()
            .map(|k| match *k {
                StateKind::Gadget { signal } => signal.id(),
                StateKind::Data { index } => Signal::Reveal {
                    feature: usize::from(in_second(index)),
                    value: 0,
                }
                .id(),
            })
            .collect()
    }

    /// Counts pools mixing two gadgets and pools mixing a gadget with data.
    pub fn pooling_violations(&self, assignment: &[usize]) -> (usize, usize) {
        let mut gadget_gadget = 0;
        let mut gadget_data = 0;
        for pool in pools(assignment, self.n_signals()) {
            let (data, gadgets) = self.split_pool(&pool);
            if gadgets >= 2 {
                gadget_gadget += 1;
            }
            if gadgets >= 1 && !data.is_empty() {
                gadget_data += 1;
            }
        }
        (gadget_gadget, gadget_data)
    }
}

impl PoolingProblem for ReductionInstance {
    fn n_states(&self) -> usize {
        self.n
    }

    fn n_signals(&self) -> usize {
        2 * self.d + 1
    }

    fn options(&self, s: usize) -> Vec<usize> {
        let x = &self.prior.support()[s];
        std::iter::once(0)
            .chain((0..self.d).map(|j| {
                Signal::Reveal {
                    feature: j,
                    value: x[j] as u8,
                }
                .id()
            }))
            .collect()
    }

    /// The better of the best vector action (the data centroid, paying B per
    /// gadget) and the best label (B for every state but one gadget).
    fn pool_cost(&self, pool: &[usize]) -> f64 {
        if pool.is_empty() {
            return 0.0;
        }
        let (data, gadgets) = self.split_pool(pool);
        let vector = self.sum_of_squares(&data) + self.big_loss * gadgets as f64;
        let label = self.big_loss * (pool.len() - usize::from(gadgets > 0)) as f64;
        vector.min(label)
    }

    fn pool_key(&self, pool: &[usize]) -> Vec<usize> {
        let (data, gadgets) = self.split_pool(pool);
        std::iter::once(gadgets).chain(data).collect()
    }

    fn search_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by_key(|&s| matches!(self.kinds[s], StateKind::Data { .. }));
        order
    }
}

fn pools(assignment: &[usize], n_signals: usize) -> Vec<Vec<usize>> {
    let mut pools = vec![Vec::new(); n_signals];
    for (s, &sig) in assignment.iter().enumerate() {
        pools[sig].push(s);
    }
    pools
}

/// Expected loss (uniform prior) of an assignment of signals to states.
pub fn assignment_value<P: PoolingProblem + ?Sized>(problem: &P, assignment: &[usize]) -> f64 {
    pools(assignment, problem.n_signals())
        .iter()
        .map(|p| problem.pool_cost(p))
        .sum::<f64>()
        / problem.n_states() as f64
}

/// An optimal policy and its sophisticated risk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SophisticatedOptimum {
    /// Minimal expected loss.
    pub value: f64,
    /// n × value, comparable with the 2-means cost.
    pub total: f64,
    /// Signal id sent by each state.
    pub assignment: Vec<usize>,
    /// Assignments (or search nodes) examined.
    pub explored: u128,
}

/// Minimal sophisticated risk with bandwidth one over the policies the
/// reduction's argument leaves: gadgets on their designated signals, data
/// states split over the two cluster signals (2^m candidates).
pub fn brute_force_sophisticated_value(instance: &ReductionInstance, k: usize) -> Result<SophisticatedOptimum> {
    brute_force_sophisticated_value_with_cap(instance, k, DEFAULT_SEARCH_CAP)
}

pub fn brute_force_sophisticated_value_with_cap(
    instance: &ReductionInstance,
    k: usize,
    cap: u128,
) -> Result<SophisticatedOptimum> {
    if k != 1 {
        return Err(Error::InvalidArgument("the reduction is stated for bandwidth one".into()));
    }
    let m = instance.points.len();
    let size = 1u128.checked_shl(m as u32).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SearchBudgetExceeded { size, cap });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0..(1u64 << m) {
        let assignment = instance.structured_assignment(|i| mask >> i & 1 == 1);
        let value = assignment_value(instance, &assignment);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, assignment));
        }
    }
    let (value, assignment) = best.expect("at least one split");
    Ok(SophisticatedOptimum {
        value,
        total: value * instance.n as f64,
        assignment,
        explored: size,
    })
}

/// Exact minimum over every deterministic policy, by depth-first branch and
/// bound with dominance: two partial assignments with identical pool keys
/// have identical futures, so the costlier one is dropped.
pub fn branch_and_bound_value<P: PoolingProblem + ?Sized>(problem: &P, node_cap: u128) -> Result<SophisticatedOptimum> {
    let order = problem.search_order();
    let options: Vec<Vec<usize>> = order.iter().map(|&s| problem.options(s)).collect();
    let mut search = BranchAndBound {
        problem,
        order: &order,
        options: &options,
        pools: vec![Vec::new(); problem.n_signals()],
        pool_costs: vec![0.0; problem.n_signals()],
        assignment: vec![usize::MAX; problem.n_states()],
        best: f64::INFINITY,
        best_assignment: Vec::new(),
        seen: HashMap::new(),
        nodes: 0,
        node_cap,
    };
    search.descend(0, 0.0)?;
    let n = problem.n_states() as f64;
    Ok(SophisticatedOptimum {
        value: search.best / n,
        total: search.best,
        assignment: search.best_assignment,
        explored: search.nodes,
    })
}

struct BranchAndBound<'a, P: PoolingProblem + ?Sized> {
    problem: &'a P,
    order: &'a [usize],
    options: &'a [Vec<usize>],
    pools: Vec<Vec<usize>>,
    pool_costs: Vec<f64>,
    assignment: Vec<usize>,
    best: f64,
    best_assignment: Vec<usize>,
    seen: HashMap<(usize, Vec<Vec<usize>>), f64>,
    nodes: u128,
    node_cap: u128,
}

impl<P: PoolingProblem + ?Sized> BranchAndBound<'_, P> {
    fn descend(&mut self, depth: usize, cost: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(Error::SearchBudgetExceeded {
                size: self.nodes,
                cap: self.node_cap,
            });
        }
        if cost >= self.best {
            return Ok(());
        }
        if depth == self.order.len() {
            self.best = cost;
            self.best_assignment = self.assignment.clone();
            return Ok(());
        }
        let key: Vec<Vec<usize>> = self.pools.iter().map(|p| self.problem.pool_key(p)).collect();
        match self.seen.get_mut(&(depth, key.clone())) {
            Some(prev) if *prev <= cost => return Ok(()),
            Some(prev) => *prev = cost,
            None => {
                self.seen.insert((depth, key), cost);
            }
        }
        let state = self.order[depth];
        for &sig in &self.options[depth] {
            let before = self.pool_costs[sig];
            self.pools[sig].push(state);
            let after = self.problem.pool_cost(&self.pools[sig]);
            self.pool_costs[sig] = after;
            self.assignment[state] = sig;
            let result = self.descend(depth + 1, cost - before + after);
            self.pools[sig].pop();
            self.pool_costs[sig] = before;
            result?;
        }
        self.assignment[state] = usize::MAX;
        Ok(())
    }
}

/// Exact minimum by plain enumeration of every assignment, without any
/// pruning. Refuses problems with more than `cap` assignments.
pub fn exhaustive_value<P: PoolingProblem + ?Sized>(problem: &P, cap: u128) -> Result<SophisticatedOptimum> {
    let options: Vec<Vec<usize>> = (0..problem.n_states()).map(|s| problem.options(s)).collect();
    let size = options
        .iter()
        .try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128))
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SearchBudgetExceeded { size, cap });
    }
    let mut digits = vec![0usize; options.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let assignment: Vec<usize> = digits.iter().zip(&options).map(|(&d, o)| o[d]).collect();
        let value = assignment_value(problem, &assignment);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, assignment));
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let (value, assignment) = best.expect("nonempty enumeration");
                return Ok(SophisticatedOptimum {
                    value,
                    total: value * problem.n_states() as f64,
                    assignment,
                    explored: size,
                });
            }
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact Euclidean 2-means cost over all 2^(m−1) splits (one cluster may be
/// empty), using the pairwise form Σ_C Σ_{i<j∈C} ‖z_i − z_j‖² / |C|.
pub fn brute_force_two_means(points: &[Vec<f64>]) -> Result<f64> {
    let m = points.len();
    if m == 0 {
        return Ok(0.0);
    }
    if m > 20 {
        return Err(Error::SearchBudgetExceeded {
            size: 1u128 << (m - 1),
            cap: 1 << 19,
        });
    }
    let dist: Vec<Vec<f64>> = points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum())
                .collect()
        })
        .collect();
    let cluster_cost = |members: &[usize]| -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        let mut s = 0.0;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                s += dist[i][j];
            }
        }
        s / members.len() as f64
    };
    let mut best = f64::INFINITY;
    for mask in 0..(1u64 << (m - 1)) {
        let (first, second): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| i == 0 || mask >> (i - 1) & 1 == 0);
        best = best.min(cluster_cost(&first) + cluster_cost(&second));
    }
    Ok(best)
}
