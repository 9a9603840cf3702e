//! Ground-truth S/L/I/R process, testing and isolation.

use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{ContactNetwork, NodeId};

/// Disease compartment. Discriminants follow the (I, L, R, S) coordinate order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiseaseState {
    I = 0,
    L = 1,
    R = 2,
    S = 3,
}

impl DiseaseState {
    pub const ALL: [DiseaseState; 4] = [DiseaseState::I, DiseaseState::L, DiseaseState::R, DiseaseState::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn symbol(self) -> char {
        match self {
            DiseaseState::I => 'I',
            DiseaseState::L => 'L',
            DiseaseState::R => 'R',
            DiseaseState::S => 'S',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Per-contact, per-day transmission probability.
    pub beta: f64,
    /// Daily probability of leaving the latent state.
    pub lambda: f64,
    /// Daily recovery probability.
    pub gamma: f64,
    /// When false, infection moves S straight to I.
    pub latent_enabled: bool,
}

impl ModelParams {
    pub fn new(beta: f64, lambda: f64, gamma: f64, latent_enabled: bool) -> Result<Self> {
        let p = Self {
            beta,
            lambda,
            gamma,
            latent_enabled,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is not a probability")));
            }
        }
        Ok(())
    }

    /// Combinations that are legal but probably not intended.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.latent_enabled && self.lambda == 0.0 {
            out.push("lambda = 0 with the latent state enabled: infected nodes never become infectious".into());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthState {
    pub sigma: Vec<DiseaseState>,
    pub ever_infected: Vec<bool>,
    pub isolated: Vec<bool>,
    pub initial_seeds: Vec<NodeId>,
    pub day: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub node: NodeId,
    pub day: usize,
    pub positive: bool,
}

/// Places `n0` distinct uniform seeds in I (or in L when `seed_latent`).
pub fn init_state<R: Rng + ?Sized>(
    net: &ContactNetwork,
    n0: usize,
    seed_latent: bool,
    rng: &mut R,
) -> Result<GroundTruthState> {
    let n = net.n();
    if n0 > n {
        return Err(invalid("n0", format!("{n0} seeds requested on {n} nodes")));
    }
    let mut seeds = index::sample(rng, n, n0).into_vec();
    seeds.sort_unstable();
    Ok(seeded_state(n, &seeds, seed_latent))
}

/// State at day 0 with the given seed set.
pub fn seeded_state(n: usize, seeds: &[NodeId], seed_latent: bool) -> GroundTruthState {
    let mut sigma = vec![DiseaseState::S; n];
    let mut ever = vec![false; n];
    let seed_state = if seed_latent { DiseaseState::L } else { DiseaseState::I };
    for &s in seeds {
        sigma[s] = seed_state;
        ever[s] = true;
    }
    GroundTruthState {
        sigma,
        ever_infected: ever,
        isolated: vec![false; n],
        initial_seeds: seeds.to_vec(),
        day: 0,
    }
}

/// Advances one day. Exactly one uniform is drawn per node, in id order,
/// whatever the node's state, so runs that differ only in testing decisions
/// consume the generator identically.
pub fn step<R: Rng + ?Sized>(state: &mut GroundTruthState, net: &ContactNetwork, params: &ModelParams, rng: &mut R) {
    let t = state.day;
    let prev = state.sigma.clone();
    for i in 0..prev.len() {
        let u: f64 = rng.gen();
        match prev[i] {
            DiseaseState::S => {
                let k = net.neighbors(i, t).filter(|&j| prev[j] == DiseaseState::I).count();
                if k > 0 && u < 1.0 - (1.0 - params.beta).powi(k as i32) {
                    state.sigma[i] = if params.latent_enabled {
                        DiseaseState::L
                    } else {
                        DiseaseState::I
                    };
                    state.ever_infected[i] = true;
                }
            }
            DiseaseState::L => {
                if u < params.lambda {
                    state.sigma[i] = DiseaseState::I;
                }
            }
            DiseaseState::I => {
                if u < params.gamma {
                    state.sigma[i] = DiseaseState::R;
                }
            }
            DiseaseState::R => {}
        }
    }
    state.day += 1;
}

/// Tests `nodes` against the current state. Removed nodes cannot be tested.
pub fn test(state: &GroundTruthState, net: &ContactNetwork, nodes: &[NodeId]) -> Result<Vec<Observation>> {
    nodes
        .iter()
        .map(|&node| {
            if !net.is_active(node, state.day) {
                return Err(Error::InactiveNode { node, day: state.day });
            }
            Ok(Observation {
                node,
                day: state.day,
                positive: state.sigma[node] == DiseaseState::I,
            })
        })
        .collect()
}

/// Isolates every positive from the current day on.
pub fn isolate_positives(net: &mut ContactNetwork, state: &mut GroundTruthState, observations: &[Observation]) {
    for o in observations.iter().filter(|o| o.positive) {
        state.isolated[o.node] = true;
        net.remove_node(o.node, state.day);
    }
}

pub fn run_unregulated<R: Rng + ?Sized>(
    state: &mut GroundTruthState,
    net: &ContactNetwork,
    params: &ModelParams,
    ell: usize,
    rng: &mut R,
) {
    for _ in 0..ell {
        step(state, net, params, rng);
    }
}

/// Uniform among initial seeds still infectious; all initial seeds if none is.
pub fn reveal_seed<R: Rng + ?Sized>(state: &GroundTruthState, rng: &mut R) -> NodeId {
    let live: Vec<NodeId> = state
        .initial_seeds
        .iter()
        .copied()
        .filter(|&s| state.sigma[s] == DiseaseState::I)
        .collect();
    let pool = if live.is_empty() { &state.initial_seeds } else { &live };
    pool[rng.gen_range(0..pool.len())]
}

/// C(t): nodes infected on or before the current day.
pub fn cumulative_infections(state: &GroundTruthState) -> usize {
    state.ever_infected.iter().filter(|&&e| e).count()
}

/// Infectious nodes that are not isolated.
pub fn active_infectious(state: &GroundTruthState) -> usize {
    state
        .sigma
        .iter()
        .zip(&state.isolated)
        .filter(|&(&s, &iso)| s == DiseaseState::I && !iso)
        .count()
}

/// Whether any non-isolated node is latent or infectious.
pub fn has_active_infection(state: &GroundTruthState) -> bool {
    state
        .sigma
        .iter()
        .zip(&state.isolated)
        .any(|(&s, &iso)| !iso && matches!(s, DiseaseState::I | DiseaseState::L))
}
