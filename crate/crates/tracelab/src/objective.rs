//! Expected next-day infections as a set function of the untested nodes.
//!
//! For a set D of nodes left untested, `F_i(D)` is the probability that a
//! susceptible node i is infected by a member of D given that no other neighbor
//! infects it, and `S(D) = Σ_i F_i(D)`. S is monotone and supermodular, which
//! the greedy selection relies on.

use crate::belief::{DayGraph, ProbVector};
use crate::error::{Error, Result};
use crate::graph::{ContactNetwork, NodeId};

/// Largest active node count accepted by [`brute_force_opt`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Relative slack under which two greedy candidates count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct BeliefSnapshot {
    pub graph: DayGraph,
    pub probs: Vec<ProbVector>,
    pub beta: f64,
}

impl BeliefSnapshot {
    pub fn new(net: &ContactNetwork, day: usize, probs: Vec<ProbVector>, beta: f64) -> Self {
        Self {
            graph: DayGraph::of(net, day),
            probs,
            beta,
        }
    }

    pub fn day(&self) -> usize {
        self.graph.day
    }

    pub fn active_nodes(&self) -> Vec<NodeId> {
        (0..self.graph.n()).filter(|&i| self.graph.is_active(i)).collect()
    }

    fn mask(&self, d: &[NodeId]) -> Vec<bool> {
        let mut m = vec![false; self.graph.n()];
        for &i in d {
            m[i] = true;
        }
        m
    }

    fn pass(&self, j: NodeId) -> f64 {
        1.0 - self.beta * self.probs[j].i()
    }

    fn f_masked(&self, i: NodeId, in_d: &[bool]) -> f64 {
        let vs = self.probs[i].s();
        if vs == 0.0 || !self.graph.is_active(i) {
            return 0.0;
        }
        let (mut outside, mut inside) = (1.0, 1.0);
        let mut any = false;
        for &j in self.graph.neighbors(i) {
            if in_d[j] {
                inside *= self.pass(j);
                any = true;
            } else {
                outside *= self.pass(j);
            }
        }
        if !any {
            return 0.0;
        }
        vs * outside * (1.0 - inside)
    }

    fn s_masked(&self, in_d: &[bool]) -> f64 {
        (0..self.graph.n()).map(|i| self.f_masked(i, in_d)).sum()
    }
}

/// F_i(D).
pub fn expected_f(snap: &BeliefSnapshot, i: NodeId, d: &[NodeId]) -> f64 {
    snap.f_masked(i, &snap.mask(d))
}

/// S(D) = Σ_i F_i(D).
pub fn expected_infections(snap: &BeliefSnapshot, d: &[NodeId]) -> f64 {
    snap.s_masked(&snap.mask(d))
}

/// Active nodes outside `k`.
pub fn complement(snap: &BeliefSnapshot, k: &[NodeId]) -> Vec<NodeId> {
    let m = snap.mask(k);
    snap.active_nodes().into_iter().filter(|&i| !m[i]).collect()
}

/// r_i = S({i}).
pub fn reward(snap: &BeliefSnapshot, i: NodeId) -> f64 {
    if !snap.graph.is_active(i) {
        return 0.0;
    }
    let pi = snap.beta * snap.probs[i].i();
    if pi == 0.0 {
        return 0.0;
    }
    snap.graph
        .neighbors(i)
        .iter()
        .map(|&k| {
            let others: f64 = snap
                .graph
                .neighbors(k)
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| snap.pass(j))
                .product();
            snap.probs[k].s() * others * pi
        })
        .sum()
}

/// Rewards of every node (0 for removed ones).
pub fn rewards(snap: &BeliefSnapshot) -> Vec<f64> {
    (0..snap.graph.n()).map(|i| reward(snap, i)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Steepness {
    /// max_a [S(V) − S(V\a) − S({a})] / [S(V) − S(V\a)]; 0 when no term is defined.
    pub eps_prime: f64,
    /// ε'/(4(1 − ε')); infinite when ε' = 1.
    pub eps: f64,
}

pub fn steepness_epsilon(snap: &BeliefSnapshot) -> Steepness {
    let mut all = vec![false; snap.graph.n()];
    for i in snap.active_nodes() {
        all[i] = true;
    }
    let s_all = snap.s_masked(&all);
    let mut best: Option<f64> = None;
    for a in snap.active_nodes() {
        all[a] = false;
        let s_without = snap.s_masked(&all);
        all[a] = true;
        let denom = s_all - s_without;
        if denom <= 0.0 {
            continue;
        }
        let q = (denom - reward(snap, a)) / denom;
        best = Some(best.map_or(q, |b: f64| b.max(q)));
    }
    let eps_prime = best.unwrap_or(0.0).max(0.0);
    let eps = if eps_prime >= 1.0 {
        log::warn!("steepness is unbounded on day {}", snap.day());
        f64::INFINITY
    } else {
        eps_prime / (4.0 * (1.0 - eps_prime))
    };
    Steepness { eps_prime, eps }
}

/// Greedy minimization: repeatedly moves to the removed set the node whose
/// addition increases S least, until `budget` nodes remain; returns those.
pub fn greedy_select(snap: &BeliefSnapshot, budget: usize) -> Vec<NodeId> {
    let active = snap.active_nodes();
    if budget >= active.len() {
        return active;
    }
    let n = snap.graph.n();
    let mut removed = vec![false; n];
    let mut f_now = vec![0.0; n];
    for _ in 0..active.len() - budget {
        let mut best: Option<(NodeId, f64)> = None;
        let candidates: Vec<NodeId> = active.iter().copied().filter(|&a| !removed[a]).collect();
        for a in candidates {
            removed[a] = true;
            let delta: f64 = snap
                .graph
                .neighbors(a)
                .iter()
                .map(|&k| snap.f_masked(k, &removed) - f_now[k])
                .sum();
            removed[a] = false;
            let better = match best {
                None => true,
                Some((_, b)) => delta < b - TIE_TOLERANCE * b.abs().max(1.0),
            };
            if better {
                best = Some((a, delta));
            }
        }
        let (a, _) = best.expect("candidates remain while removals are pending");
        removed[a] = true;
        for &k in snap.graph.neighbors(a) {
            f_now[k] = snap.f_masked(k, &removed);
        }
    }
    active.into_iter().filter(|&i| !removed[i]).collect()
}

/// Exhaustive minimum of S(V\K) over |K| ≤ budget.
pub fn brute_force_opt(snap: &BeliefSnapshot, budget: usize) -> Result<(Vec<NodeId>, f64)> {
    let active = snap.active_nodes();
    if active.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            size: active.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut in_d = vec![false; snap.graph.n()];
    let mut best: Option<(u32, f64)> = None;
    for bits in 0u32..(1u32 << active.len()) {
        if bits.count_ones() as usize > budget {
            continue;
        }
        for (k, &i) in active.iter().enumerate() {
            in_d[i] = bits & (1 << k) == 0;
        }
        let v = snap.s_masked(&in_d);
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((bits, v));
        }
    }
    let (bits, value) = best.expect("the empty set is always feasible");
    let k = active
        .iter()
        .enumerate()
        .filter(|&(k, _)| bits & (1 << k) != 0)
        .map(|(_, &i)| i)
        .collect();
    Ok((k, value))
}
