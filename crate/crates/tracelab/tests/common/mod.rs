//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use tracelab::belief::{DayGraph, ProbVector};
use tracelab::graph::{ContactNetwork, NodeId};
use tracelab::objective::BeliefSnapshot;
use tracelab::spread::ModelParams;

pub const I: usize = 0;
pub const L: usize = 1;
pub const R: usize = 2;
pub const S: usize = 3;

/// Random distribution over the four states; each entry is zero with probability `p_zero`.
pub fn random_vector<G: Rng>(rng: &mut G, p_zero: f64) -> ProbVector {
    loop {
        let raw: [f64; 4] = std::array::from_fn(|_| if rng.gen::<f64>() < p_zero { 0.0 } else { rng.gen::<f64>() });
        let total: f64 = raw.iter().sum();
        if total > 0.1 {
            return ProbVector(raw.map(|x| x / total));
        }
    }
}

pub fn random_graph<G: Rng>(rng: &mut G, n: usize, p: f64) -> ContactNetwork {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    ContactNetwork::from_static(n, edges).unwrap()
}

pub fn random_snapshot<G: Rng>(rng: &mut G, n: usize) -> BeliefSnapshot {
    let density = rng.gen_range(0.2..0.7);
    let net = random_graph(rng, n, density);
    let probs = (0..n).map(|_| random_vector(rng, 0.3)).collect();
    BeliefSnapshot::new(&net, 0, probs, rng.gen_range(0.05..1.0))
}

/// Row of the one-day transition for a node in state `own` with `k` infectious neighbors.
pub fn transition_row(own: usize, k: usize, p: &ModelParams) -> [f64; 4] {
    let mut row = [0.0; 4];
    match own {
        I => {
            row[I] = 1.0 - p.gamma;
            row[R] = p.gamma;
        }
        L => {
            row[I] = p.lambda;
            row[L] = 1.0 - p.lambda;
        }
        R => row[R] = 1.0,
        _ => {
            let caught = 1.0 - (1.0 - p.beta).powi(k as i32);
            row[if p.latent_enabled { L } else { I }] = caught;
            row[S] = 1.0 - caught;
        }
    }
    row
}

/// Every joint assignment of `n` four-valued variables, with its product weight.
pub fn joint_states(beliefs: &[ProbVector]) -> Vec<(Vec<usize>, f64)> {
    let n = beliefs.len();
    let mut out = Vec::with_capacity(4usize.pow(n as u32));
    for code in 0..4usize.pow(n as u32) {
        let x: Vec<usize> = (0..n).map(|j| (code / 4usize.pow(j as u32)) % 4).collect();
        let weight: f64 = x.iter().enumerate().map(|(j, &s)| beliefs[j].0[s]).product();
        if weight > 0.0 {
            out.push((x, weight));
        }
    }
    out
}

fn infectious_neighbors(g: &DayGraph, j: NodeId, x: &[usize]) -> usize {
    g.neighbors(j).iter().filter(|&&m| x[m] == I).count()
}

fn normalized(raw: [f64; 4]) -> Option<[f64; 4]> {
    let total: f64 = raw.iter().sum();
    (total > 0.0).then(|| raw.map(|v| v / total))
}

/// Corrected posterior of node `i` at t−1 by joint enumeration: prior is the
/// product of `w_prev`, evidence is every day-t result in the closed
/// neighborhood of `i`.
pub fn oracle_e(i: NodeId, w_prev: &[ProbVector], y: &[Option<bool>], g: &DayGraph, p: &ModelParams) -> Option<[f64; 4]> {
    let mut psi = g.neighbors(i).to_vec();
    psi.push(i);
    psi.retain(|&j| y[j].is_some());
    let mut acc = [0.0; 4];
    for (x, weight) in joint_states(w_prev) {
        let mut lik = 1.0;
        for &j in &psi {
            let p_i = transition_row(x[j], infectious_neighbors(g, j, &x), p)[I];
            lik *= if y[j] == Some(true) { p_i } else { 1.0 - p_i };
        }
        acc[x[i]] += weight * lik;
    }
    normalized(acc)
}

/// Day-t posterior of node `i` by enumeration over a product prior `e_prev`
/// at t−1, conditioned on the node's own result.
pub fn oracle_w(i: NodeId, e_prev: &[ProbVector], y: &[Option<bool>], g: &DayGraph, p: &ModelParams) -> Option<[f64; 4]> {
    let mut acc = [0.0; 4];
    for (x, weight) in joint_states(e_prev) {
        let row = transition_row(x[i], infectious_neighbors(g, i, &x), p);
        for (s, v) in row.iter().enumerate() {
            let keep = match y[i] {
                Some(pos) => (s == I) == pos,
                None => true,
            };
            if keep {
                acc[s] += weight * v;
            }
        }
    }
    normalized(acc)
}

/// S(D) by enumerating which nodes are infectious: each susceptible node
/// counts when some source in `d` transmits and no source outside does.
pub fn oracle_s(snap: &BeliefSnapshot, d: &[NodeId]) -> f64 {
    let n = snap.graph.n();
    let p_inf: Vec<f64> = snap.probs.iter().map(|v| v.i()).collect();
    let in_d: Vec<bool> = (0..n).map(|j| d.contains(&j)).collect();
    let mut total = 0.0;
    for bits in 0u32..(1 << n) {
        let weight: f64 = (0..n)
            .map(|j| if bits & (1 << j) != 0 { p_inf[j] } else { 1.0 - p_inf[j] })
            .product();
        if weight == 0.0 {
            continue;
        }
        for k in (0..n).filter(|&k| snap.graph.is_active(k)) {
            let sources = snap.graph.neighbors(k).iter().filter(|&&j| bits & (1 << j) != 0);
            let (mut inside, mut outside) = (0, 0);
            for &j in sources {
                if in_d[j] {
                    inside += 1;
                } else {
                    outside += 1;
                }
            }
            let b = snap.beta;
            // given k is susceptible, it is not itself infectious in this configuration
            let s_given = if bits & (1 << k) != 0 { 0.0 } else { snap.probs[k].s() / (1.0 - p_inf[k]).max(f64::MIN_POSITIVE) };
            total += weight * s_given * (1.0 - (1.0 - b).powi(inside)) * (1.0 - b).powi(outside);
        }
    }
    total
}

/// All subsets of `items` as sorted vectors.
pub fn subsets(items: &[NodeId]) -> impl Iterator<Item = Vec<NodeId>> + '_ {
    (0u32..(1 << items.len())).map(move |bits| {
        items
            .iter()
            .enumerate()
            .filter(|&(k, _)| bits & (1 << k) != 0)
            .map(|(_, &v)| v)
            .collect()
    })
}

pub struct OracleReport {
    /// Backward steps compared.
    pub steps: usize,
    /// Largest absolute difference over every compared entry of e and w.
    pub max_diff: f64,
}

fn max_gap(a: &ProbVector, b: Option<[f64; 4]>) -> f64 {
    match b {
        Some(b) => (0..4).map(|k| (a.0[k] - b[k]).abs()).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// Runs `patterns` random small instances for up to three days each and
/// compares every backward step against the enumeration oracles.
pub fn oracle_patterns(seed: u64, patterns: usize) -> OracleReport {
    use rand::SeedableRng;
    use tracelab::belief::{bf_step, BeliefConfig, BeliefState};
    use tracelab::spread::Observation;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cfg = BeliefConfig::default();
    let mut report = OracleReport { steps: 0, max_diff: 0.0 };
    for _ in 0..patterns {
        let n = rng.gen_range(2..=5);
        let net = random_graph(&mut rng, n, 0.6);
        let params = ModelParams::new(
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
            rng.gen_bool(0.5),
        )
        .unwrap();
        let horizon = rng.gen_range(2..=3);
        let u0: Vec<ProbVector> = (0..n).map(|_| random_vector(&mut rng, 0.3)).collect();
        let mut beliefs = BeliefState::from_prior(0, u0.clone());
        let mut source = u0;
        for t in 0..horizon {
            // a realization drawn from the current product belief keeps the evidence possible
            let before: Vec<usize> = source.iter().map(|v| sample_state(&mut rng, v)).collect();
            let now: Vec<usize> = if t == 0 {
                before
            } else {
                let g = DayGraph::of(&net, t - 1);
                (0..n)
                    .map(|j| sample_index(&mut rng, &transition_row(before[j], infectious_neighbors(&g, j, &before), &params)))
                    .collect()
            };
            let obs: Vec<Observation> = (0..n)
                .filter(|_| rng.gen_bool(0.6))
                .map(|j| Observation { node: j, day: t, positive: now[j] == I })
                .collect();
            let mut y = vec![None; n];
            for o in &obs {
                y[o.node] = Some(o.positive);
            }
            let w_prev = beliefs.w.clone();
            bf_step(&mut beliefs, &obs, &net, &params, &cfg, &mut rng).unwrap();
            if let Some(w_prev) = w_prev {
                let g = DayGraph::of(&net, t - 1);
                let e = beliefs.e.as_ref().unwrap();
                let w = beliefs.w.as_ref().unwrap();
                for i in 0..n {
                    report.max_diff = report.max_diff.max(max_gap(&e[i], oracle_e(i, &w_prev, &y, &g, &params)));
                    report.max_diff = report.max_diff.max(max_gap(&w[i], oracle_w(i, e, &y, &g, &params)));
                }
                report.steps += 1;
            }
            source = beliefs.w.clone().unwrap();
        }
    }
    report
}

pub fn sample_index<G: Rng>(rng: &mut G, p: &[f64; 4]) -> usize {
    let mut u = rng.gen::<f64>();
    for (k, &x) in p.iter().enumerate() {
        if u < x {
            return k;
        }
        u -= x;
    }
    (0..4).rev().find(|&k| p[k] > 0.0).unwrap()
}

pub fn sample_state<G: Rng>(rng: &mut G, v: &ProbVector) -> usize {
    sample_index(rng, &v.0)
}
