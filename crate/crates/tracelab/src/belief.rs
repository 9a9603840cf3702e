//! Backward-forward belief propagation over node states.
//!
//! Each day the engine holds a prior `u(t)` for every node. Test results of day
//! `t` first correct the previous posterior `w(t-1)` into `e(t-1)` (backward
//! step, one day deep), which is then pushed through observation-aware local
//! transition matrices to give `w(t)`; a plain forward step yields `u(t+1)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{ContactNetwork, NodeId};
use crate::spread::{DiseaseState, ModelParams, Observation};

/// Entries below this are treated as exact zeros before normalizing.
pub const CLAMP: f64 = 1e-15;

/// Distribution over (I, L, R, S).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbVector(pub [f64; 4]);

impl ProbVector {
    pub const INFECTIOUS: Self = Self([1.0, 0.0, 0.0, 0.0]);
    pub const LATENT: Self = Self([0.0, 1.0, 0.0, 0.0]);
    pub const RECOVERED: Self = Self([0.0, 0.0, 1.0, 0.0]);
    pub const SUSCEPTIBLE: Self = Self([0.0, 0.0, 0.0, 1.0]);
    pub const UNIFORM: Self = Self([0.25; 4]);

    pub fn one_hot(s: DiseaseState) -> Self {
        let mut p = [0.0; 4];
        p[s.index()] = 1.0;
        Self(p)
    }

    /// Clamps tiny entries and normalizes; `None` if nothing is left.
    pub fn from_raw(raw: [f64; 4]) -> Option<Self> {
        let mut p = raw.map(|x| if x < CLAMP { 0.0 } else { x });
        let total: f64 = p.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return None;
        }
        p.iter_mut().for_each(|x| *x /= total);
        Some(Self(p))
    }

    pub fn get(&self, s: DiseaseState) -> f64 {
        self.0[s.index()]
    }

    pub fn i(&self) -> f64 {
        self.0[0]
    }

    pub fn l(&self) -> f64 {
        self.0[1]
    }

    pub fn r(&self) -> f64 {
        self.0[2]
    }

    pub fn s(&self) -> f64 {
        self.0[3]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Row vector times matrix.
    pub fn times(&self, m: &Transition) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (r, row) in m.iter().enumerate() {
            for c in 0..4 {
                out[c] += self.0[r] * row[c];
            }
        }
        out
    }

    pub fn sq_dist(&self, other: &Self) -> f64 {
        (0..4).map(|k| (self.0[k] - other.0[k]).powi(2)).sum()
    }

    pub fn l1_dist(&self, other: &Self) -> f64 {
        (0..4).map(|k| (self.0[k] - other.0[k]).abs()).sum()
    }
}

/// Row-stochastic 4×4 matrix indexed (I, L, R, S).
pub type Transition = [[f64; 4]; 4];

/// Probability that at least one neighbor transmits: 1 − ∏(1 − β·p_I).
pub fn xi(neighbor_p_infectious: impl IntoIterator<Item = f64>, beta: f64) -> f64 {
    1.0 - neighbor_p_infectious
        .into_iter()
        .map(|p| 1.0 - p * beta)
        .product::<f64>()
}

pub fn local_transition(xi: f64, params: &ModelParams) -> Transition {
    let (l, g) = (params.lambda, params.gamma);
    let s_row = if params.latent_enabled {
        [0.0, xi, 0.0, 1.0 - xi]
    } else {
        [xi, 0.0, 0.0, 1.0 - xi]
    };
    [
        [1.0 - g, 0.0, g, 0.0],
        [l, 1.0 - l, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        s_row,
    ]
}

/// Conditions each row on the node's own test result.
///
/// A positive result keeps only mass landing on I, a negative one only mass
/// landing elsewhere. Rows with no consistent mass fall back to unit mass on
/// R (row I, negative), L (row L, negative) and I (rows I and L, positive) and
/// are otherwise left as they are.
pub fn modified_transition(m: &Transition, observation: Option<bool>) -> Transition {
    let Some(positive) = observation else {
        return *m;
    };
    let consistent = |c: usize| (c == 0) == positive;
    let mut out = *m;
    for (r, row) in out.iter_mut().enumerate() {
        let mass: f64 = (0..4).filter(|&c| consistent(c)).map(|c| row[c]).sum();
        if mass > 0.0 {
            for (c, x) in row.iter_mut().enumerate() {
                *x = if consistent(c) { *x / mass } else { 0.0 };
            }
        } else if r <= 1 {
            *row = match (positive, r) {
                (true, _) => [1.0, 0.0, 0.0, 0.0],
                (false, 0) => [0.0, 0.0, 1.0, 0.0],
                (false, _) => [0.0, 1.0, 0.0, 0.0],
            };
        }
    }
    out
}

/// Adjacency of a single day restricted to active nodes.
#[derive(Clone, Debug)]
pub struct DayGraph {
    pub day: usize,
    adj: Vec<Vec<NodeId>>,
    active: Vec<bool>,
}

impl DayGraph {
    pub fn of(net: &ContactNetwork, day: usize) -> Self {
        let n = net.n();
        Self {
            day,
            adj: (0..n).map(|i| net.neighbors(i, day).collect()).collect(),
            active: (0..n).map(|i| net.is_active(i, day)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adj[i]
    }

    pub fn is_active(&self, i: NodeId) -> bool {
        self.active[i]
    }

    pub fn closed_neighbors(&self, i: NodeId) -> Vec<NodeId> {
        if !self.active[i] {
            return Vec::new();
        }
        let mut out = self.adj[i].clone();
        let pos = out.partition_point(|&j| j < i);
        out.insert(pos, i);
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Day-`day` graph with each edge kept independently with probability `alpha`.
pub fn alpha_subgraph<R: Rng + ?Sized>(net: &ContactNetwork, day: usize, alpha: f64, rng: &mut R) -> DayGraph {
    let mut g = DayGraph::of(net, day);
    if alpha >= 1.0 {
        return g;
    }
    let n = g.n();
    let mut kept: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for u in 0..n {
        for &v in g.adj[u].iter().filter(|&&v| u < v) {
            if rng.gen::<f64>() < alpha {
                kept[u].push(v);
                kept[v].push(u);
            }
        }
    }
    kept.iter_mut().for_each(|l| l.sort_unstable());
    g.adj = kept;
    g
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObservationSets {
    /// Tested members of the closed neighborhood of i.
    pub psi: Vec<NodeId>,
    /// Closed neighborhoods of `psi`, without i.
    pub phi: Vec<NodeId>,
    /// Closed neighborhoods of every tested node, without i.
    pub theta: Vec<NodeId>,
}

/// Ψ, Φ and Θ of node `i`; `observed` flags O(t), `graph` is the day t−1 adjacency.
pub fn observation_sets(i: NodeId, observed: &[bool], graph: &DayGraph) -> ObservationSets {
    let psi: Vec<NodeId> = graph
        .closed_neighbors(i)
        .into_iter()
        .filter(|&j| observed[j])
        .collect();
    let union_without_i = |sources: &mut dyn Iterator<Item = NodeId>| -> Vec<NodeId> {
        let mut out: Vec<NodeId> = sources
            .flat_map(|k| graph.closed_neighbors(k))
            .filter(|&j| j != i)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    };
    let phi = union_without_i(&mut psi.iter().copied());
    let theta = union_without_i(&mut (0..graph.n()).filter(|&k| observed[k] && graph.is_active(k)));
    ObservationSets { psi, phi, theta }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvidencePolicy {
    /// Zero-probability evidence is an error.
    Strict,
    /// A node whose own result has zero probability under its belief restarts
    /// from [`restart_vector`] before conditioning. If that is not enough,
    /// neighbors believed certainly infectious restart as well.
    Reset,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeliefConfig {
    /// Edge retention probability for the backward step.
    pub alpha: f64,
    pub max_psi: usize,
    pub max_phi: usize,
    /// Largest joint assignment count enumerated for one node.
    pub max_states: usize,
    pub evidence: EvidencePolicy,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            max_psi: 12,
            max_phi: 20,
            max_states: 1 << 22,
            evidence: EvidencePolicy::Strict,
        }
    }
}

/// Probability that a node is infectious after one day given its own state and
/// its number of infectious neighbors.
fn p_next_infectious(own: usize, k: usize, params: &ModelParams) -> f64 {
    match own {
        0 => 1.0 - params.gamma,
        1 => params.lambda,
        3 if !params.latent_enabled => 1.0 - (1.0 - params.beta).powi(k as i32),
        _ => 0.0,
    }
}

fn evidence_factor(positive: bool, own: usize, k: usize, params: &ModelParams) -> f64 {
    let p = p_next_infectious(own, k, params);
    if positive {
        p
    } else {
        1.0 - p
    }
}

/// Everything the backward step reads.
#[derive(Clone, Copy)]
pub struct BackwardInput<'a> {
    /// Posteriors at t−1.
    pub w_prev: &'a [ProbVector],
    /// Test results of day t, per node.
    pub y: &'a [Option<bool>],
    /// Day t−1 adjacency, possibly thinned.
    pub graph: &'a DayGraph,
    pub params: &'a ModelParams,
}

const E_STATE: usize = 4;

#[derive(Clone, Copy)]
enum Slot {
    Fixed,
    Var(usize),
}

struct Factor {
    positive: bool,
    own: Slot,
    nbrs: Vec<Slot>,
}

/// Pr(Y_Ψ(t) | state of i at t−1 = x) for all four x.
///
/// Tested nodes' own previous states range over all four states; other
/// neighbors only matter through being infectious or not and use the
/// two-letter alphabet {I, E}. Factors are grouped into independent
/// components so the enumeration only spans variables that interact.
pub fn likelihood_vector(i: NodeId, input: &BackwardInput<'_>, cfg: &BeliefConfig) -> Result<[f64; 4]> {
    let observed: Vec<bool> = input.y.iter().map(Option::is_some).collect();
    let sets = observation_sets(i, &observed, input.graph);
    check_caps(i, &sets, cfg)?;
    likelihood_from_psi(i, &sets.psi, input, cfg)
}

/// Single-state form of [`likelihood_vector`].
pub fn likelihood(i: NodeId, x: DiseaseState, input: &BackwardInput<'_>, cfg: &BeliefConfig) -> Result<f64> {
    Ok(likelihood_vector(i, input, cfg)?[x.index()])
}

fn check_caps(i: NodeId, sets: &ObservationSets, cfg: &BeliefConfig) -> Result<()> {
    if sets.psi.len() > cfg.max_psi {
        return Err(Error::EnumerationCap {
            node: i,
            size: sets.psi.len(),
            cap: cfg.max_psi,
        });
    }
    if sets.phi.len() > cfg.max_phi {
        return Err(Error::EnumerationCap {
            node: i,
            size: sets.phi.len(),
            cap: cfg.max_phi,
        });
    }
    Ok(())
}

fn likelihood_from_psi(i: NodeId, psi: &[NodeId], input: &BackwardInput<'_>, cfg: &BeliefConfig) -> Result<[f64; 4]> {
    if psi.is_empty() {
        return Ok([1.0; 4]);
    }
    let params = input.params;
    let g = input.graph;

    let mut vars: Vec<NodeId> = Vec::new();
    for &j in psi {
        if j != i {
            vars.push(j);
        }
        if !params.latent_enabled {
            vars.extend(g.neighbors(j).iter().copied().filter(|&l| l != i));
        }
    }
    vars.sort_unstable();
    vars.dedup();
    let slot = |node: NodeId| -> Slot {
        if node == i {
            Slot::Fixed
        } else {
            Slot::Var(vars.binary_search(&node).expect("variable registered"))
        }
    };
    let factors: Vec<Factor> = psi
        .iter()
        .map(|&j| Factor {
            positive: input.y[j].expect("psi holds tested nodes"),
            own: slot(j),
            nbrs: if params.latent_enabled {
                Vec::new()
            } else {
                g.neighbors(j).iter().map(|&l| slot(l)).collect()
            },
        })
        .collect();

    // union-find over variables linked by a shared factor
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for f in &factors {
        let mut first: Option<usize> = None;
        for s in std::iter::once(&f.own).chain(&f.nbrs) {
            if let Slot::Var(v) = *s {
                match first {
                    None => first = Some(v),
                    Some(a) => {
                        let (ra, rv) = (find(&mut parent, a), find(&mut parent, v));
                        parent[ra] = rv;
                    }
                }
            }
        }
    }
    let mut groups: Vec<(Option<usize>, Vec<&Factor>)> = Vec::new();
    for f in &factors {
        let root = std::iter::once(&f.own).chain(&f.nbrs).find_map(|s| match *s {
            Slot::Var(v) => Some(find(&mut parent, v)),
            Slot::Fixed => None,
        });
        match root.and_then(|r| groups.iter().position(|(gr, _)| *gr == Some(r))) {
            Some(k) => groups[k].1.push(f),
            None => groups.push((root, vec![f])),
        }
    }

    let in_psi = |node: NodeId| psi.binary_search(&node).is_ok();
    let mut out = [1.0; 4];
    for (root, members) in groups {
        let comp_vars: Vec<usize> = match root {
            Some(r) => (0..vars.len()).filter(|&v| find(&mut parent, v) == r).collect(),
            None => Vec::new(),
        };
        let domains: Vec<Vec<(usize, f64)>> = comp_vars
            .iter()
            .map(|&v| {
                let w = &input.w_prev[vars[v]];
                let full: Vec<(usize, f64)> = if in_psi(vars[v]) {
                    (0..4).map(|s| (s, w.0[s])).collect()
                } else {
                    vec![(0, w.0[0]), (E_STATE, w.0[1] + w.0[2] + w.0[3])]
                };
                full.into_iter().filter(|&(_, p)| p > 0.0).collect()
            })
            .collect();
        let mut states = 1usize;
        for d in &domains {
            states = states.saturating_mul(d.len().max(1));
        }
        if states > cfg.max_states {
            return Err(Error::EnumerationCap {
                node: i,
                size: comp_vars.len(),
                cap: cfg.max_states,
            });
        }
        let touches_i = members
            .iter()
            .any(|f| std::iter::once(&f.own).chain(&f.nbrs).any(|s| matches!(s, Slot::Fixed)));
        let local: Vec<usize> = {
            let mut map = vec![usize::MAX; vars.len()];
            for (k, &v) in comp_vars.iter().enumerate() {
                map[v] = k;
            }
            map
        };
        let xs: &[usize] = if touches_i { &[0, 1, 2, 3] } else { &[0] };
        let mut values = [0.0; 4];
        for &x in xs {
            values[x] = enumerate_component(x, &members, &domains, &local, params);
        }
        if touches_i {
            for x in 0..4 {
                out[x] *= values[x];
            }
        } else {
            out.iter_mut().for_each(|o| *o *= values[0]);
        }
    }
    Ok(out)
}

fn enumerate_component(
    x: usize,
    factors: &[&Factor],
    domains: &[Vec<(usize, f64)>],
    local: &[usize],
    params: &ModelParams,
) -> f64 {
    if domains.iter().any(Vec::is_empty) {
        return 0.0;
    }
    let mut idx = vec![0usize; domains.len()];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (d, &k) in domains.iter().zip(&idx) {
            weight *= d[k].1;
        }
        let state_of = |s: &Slot| -> usize {
            match *s {
                Slot::Fixed => x,
                Slot::Var(v) => {
                    let p = local[v];
                    domains[p][idx[p]].0
                }
            }
        };
        let mut value = weight;
        for f in factors {
            let k = f.nbrs.iter().filter(|s| state_of(s) == 0).count();
            value *= evidence_factor(f.positive, state_of(&f.own), k, params);
            if value == 0.0 {
                break;
            }
        }
        total += value;

        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < domains[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Corrected posteriors e(t−1) ∝ Pr(Y_Ψ | x)·w(t−1). Inactive nodes keep w.
pub fn backward_update(input: &BackwardInput<'_>, cfg: &BeliefConfig) -> Result<Vec<ProbVector>> {
    let observed: Vec<bool> = input.y.iter().map(Option::is_some).collect();
    let g = input.graph;
    for i in (0..g.n()).filter(|&i| g.is_active(i)) {
        check_caps(i, &observation_sets(i, &observed, g), cfg)?;
    }
    (0..g.n())
        .map(|i| {
            if !g.is_active(i) {
                return Ok(input.w_prev[i]);
            }
            let psi: Vec<NodeId> = g.closed_neighbors(i).into_iter().filter(|&j| observed[j]).collect();
            let lik = likelihood_from_psi(i, &psi, input, cfg)?;
            let w = input.w_prev[i].0;
            ProbVector::from_raw([0, 1, 2, 3].map(|x| lik[x] * w[x])).ok_or(Error::InconsistentEvidence {
                node: i,
                day: g.day + 1,
            })
        })
        .collect()
}

/// Posteriors w(t) = e(t−1) × P̃, with P̃ built on the full day t−1 graph.
pub fn posterior_from_e(
    e_prev: &[ProbVector],
    y: &[Option<bool>],
    graph: &DayGraph,
    params: &ModelParams,
) -> Vec<ProbVector> {
    (0..graph.n())
        .map(|i| {
            if !graph.is_active(i) {
                return e_prev[i];
            }
            let x = xi(graph.neighbors(i).iter().map(|&j| e_prev[j].i()), params.beta);
            let m = local_transition(x, params);
            let exact = y[i].and_then(|positive| {
                let raw = e_prev[i].times(&m);
                let keep = |c: usize| (c == 0) == positive;
                ProbVector::from_raw([0, 1, 2, 3].map(|c| if keep(c) { raw[c] } else { 0.0 }))
            });
            // the per-row fallback only matters once the evidence contradicts e outright
            exact.unwrap_or_else(|| {
                ProbVector::from_raw(e_prev[i].times(&modified_transition(&m, y[i]))).unwrap_or(e_prev[i])
            })
        })
        .collect()
}

/// Priors u(t+1) from posteriors w(t) over the day-t graph. Removed nodes keep w.
pub fn forward_update(w: &[ProbVector], net: &ContactNetwork, params: &ModelParams, t: usize) -> Vec<ProbVector> {
    (0..net.n())
        .map(|i| {
            if !net.is_active(i, t) {
                return w[i];
            }
            let x = xi(net.neighbors(i, t).map(|j| w[j].i()), params.beta);
            ProbVector::from_raw(w[i].times(&local_transition(x, params))).unwrap_or(w[i])
        })
        .collect()
}

/// Uniform over the states the model can reach: I and S always, L only with a
/// latent stage, R only with recovery.
pub fn restart_vector(params: &ModelParams) -> ProbVector {
    let raw = [
        1.0,
        if params.latent_enabled { 1.0 } else { 0.0 },
        if params.gamma > 0.0 { 1.0 } else { 0.0 },
        1.0,
    ];
    ProbVector::from_raw(raw).expect("I and S always carry mass")
}

/// Conditions a current-day belief on the node's own result.
pub fn condition_on_result(v: &ProbVector, positive: bool) -> Option<ProbVector> {
    if positive {
        (v.i() > 0.0).then_some(ProbVector::INFECTIOUS)
    } else {
        ProbVector::from_raw([0.0, v.l(), v.r(), v.s()])
    }
}

fn condition_or_reset(
    v: &ProbVector,
    positive: bool,
    policy: EvidencePolicy,
    params: &ModelParams,
    node: NodeId,
    day: usize,
) -> Result<ProbVector> {
    match condition_on_result(v, positive) {
        Some(c) => Ok(c),
        None if policy == EvidencePolicy::Reset => {
            Ok(condition_on_result(&restart_vector(params), positive).expect("restart vector supports every result"))
        }
        None => Err(Error::InconsistentEvidence { node, day }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    /// Day of the prior `u`.
    pub day: usize,
    /// Priors at `day`.
    pub u: Vec<ProbVector>,
    /// Posteriors at `day − 1`, once a day has been processed.
    pub w: Option<Vec<ProbVector>>,
    /// Corrected posteriors at `day − 2`, once a backward step has run.
    pub e: Option<Vec<ProbVector>>,
    pub observation_log: Vec<Observation>,
}

impl BeliefState {
    pub fn from_prior(day: usize, u: Vec<ProbVector>) -> Self {
        Self {
            day,
            u,
            w: None,
            e: None,
            observation_log: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Edge retention used by the backward step (1 when not thinned).
    pub alpha: f64,
    /// Nodes whose belief was restarted under [`EvidencePolicy::Reset`].
    pub resets: usize,
}

fn results_by_node(n: usize, observations: &[Observation]) -> Vec<Option<bool>> {
    let mut y = vec![None; n];
    for o in observations {
        y[o.node] = Some(o.positive);
    }
    y
}

/// One day of the backward-forward scheme.
///
/// `observations` are the tests of day `beliefs.day`; the network must already
/// reflect that day's isolations. On the first processed day there is no
/// earlier posterior, so the prior is conditioned on each node's own result.
pub fn bf_step<R: Rng + ?Sized>(
    beliefs: &mut BeliefState,
    observations: &[Observation],
    net: &ContactNetwork,
    params: &ModelParams,
    cfg: &BeliefConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let t = beliefs.day;
    let n = net.n();
    let y = results_by_node(n, observations);
    let mut report = StepReport {
        alpha: 1.0,
        resets: 0,
    };

    let w_now = match (&beliefs.w, t) {
        (Some(w_prev), t) if t > 0 => {
            let full = DayGraph::of(net, t - 1);
            let mut alpha = cfg.alpha;
            let e = loop {
                let g = if alpha >= 1.0 {
                    full.clone()
                } else {
                    alpha_subgraph(net, t - 1, alpha, rng)
                };
                let attempt = match cfg.evidence {
                    EvidencePolicy::Strict => backward_update(
                        &BackwardInput {
                            w_prev,
                            y: &y,
                            graph: &g,
                            params,
                        },
                        cfg,
                    )
                    .map(|e| (e, 0)),
                    EvidencePolicy::Reset => backward_with_reset(w_prev, &y, &g, params, cfg),
                };
                match attempt {
                    Ok(res) => break res,
                    Err(Error::EnumerationCap { node, size, cap }) if alpha > 0.0 => {
                        let next = if alpha > 1e-3 { alpha * 0.5 } else { 0.0 };
                        log::info!("day {t}: node {node} spans {size} (cap {cap}); thinning backward graph to alpha = {next}");
                        alpha = next;
                    }
                    Err(err) => return Err(err),
                }
            };
            report.alpha = alpha.min(1.0);
            report.resets = e.1;
            let w = posterior_from_e(&e.0, &y, &full, params);
            beliefs.e = Some(e.0);
            w
        }
        _ => {
            let mut w = beliefs.u.clone();
            for o in observations {
                let before = w[o.node];
                w[o.node] = condition_or_reset(&before, o.positive, cfg.evidence, params, o.node, t)?;
                if condition_on_result(&before, o.positive).is_none() {
                    report.resets += 1;
                }
            }
            w
        }
    };

    beliefs.u = forward_update(&w_now, net, params, t);
    beliefs.w = Some(w_now);
    beliefs.observation_log.extend_from_slice(observations);
    beliefs.day = t + 1;
    Ok(report)
}

/// Backward step that restarts beliefs contradicted by their own result.
fn backward_with_reset(
    w_prev: &[ProbVector],
    y: &[Option<bool>],
    g: &DayGraph,
    params: &ModelParams,
    cfg: &BeliefConfig,
) -> Result<(Vec<ProbVector>, usize)> {
    let mut w = w_prev.to_vec();
    let mut resets = 0;
    // `v` conditioned on node j's own result, neighbors taken as independent
    let own = |w: &[ProbVector], v: &ProbVector, j: NodeId, positive: bool| -> Option<ProbVector> {
        let x = xi(g.neighbors(j).iter().map(|&l| w[l].i()), params.beta);
        ProbVector::from_raw([0, 1, 2, 3].map(|s| {
            let p = match s {
                3 if !params.latent_enabled => x,
                _ => p_next_infectious(s, 0, params),
            };
            v.0[s] * if positive { p } else { 1.0 - p }
        }))
    };
    let restart = restart_vector(params);
    loop {
        let mut changed = false;
        for j in (0..g.n()).filter(|&j| g.is_active(j)) {
            let Some(positive) = y[j] else { continue };
            if own(&w, &w[j], j, positive).is_some() {
                continue;
            }
            if w[j] != restart {
                w[j] = restart;
                resets += 1;
                changed = true;
                continue;
            }
            // still impossible: a neighbor certain to transmit forces the result
            for &l in g.neighbors(j) {
                if 1.0 - params.beta * w[l].i() < CLAMP && w[l] != restart {
                    w[l] = restart;
                    resets += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let input = BackwardInput {
        w_prev: &w,
        y,
        graph: g,
        params,
    };
    let observed: Vec<bool> = y.iter().map(Option::is_some).collect();
    for i in (0..g.n()).filter(|&i| g.is_active(i)) {
        check_caps(i, &observation_sets(i, &observed, g), cfg)?;
    }
    let mut e = Vec::with_capacity(g.n());
    for i in 0..g.n() {
        if !g.is_active(i) {
            e.push(w[i]);
            continue;
        }
        let psi: Vec<NodeId> = g.closed_neighbors(i).into_iter().filter(|&j| observed[j]).collect();
        let lik = likelihood_from_psi(i, &psi, &input, cfg)?;
        let joint = ProbVector::from_raw([0, 1, 2, 3].map(|x| lik[x] * w[i].0[x]));
        // jointly inconsistent neighborhood: fall back to the node's own result
        let v = joint.or_else(|| match y[i] {
            None => Some(w[i]),
            Some(positive) => own(&w, &w[i], i, positive).or_else(|| own(&w, &restart, i, positive)),
        });
        e.push(v.unwrap_or(restart));
    }
    Ok((e, resets))
}

/// Forward-only update: tested nodes are overwritten from their own result.
pub fn naive_forward_step(
    beliefs: &mut BeliefState,
    observations: &[Observation],
    net: &ContactNetwork,
    params: &ModelParams,
    cfg: &BeliefConfig,
) -> Result<StepReport> {
    let t = beliefs.day;
    let mut w = beliefs.u.clone();
    let mut resets = 0;
    for o in observations {
        let before = w[o.node];
        w[o.node] = condition_or_reset(&before, o.positive, cfg.evidence, params, o.node, t)?;
        if condition_on_result(&before, o.positive).is_none() {
            resets += 1;
        }
    }
    beliefs.u = forward_update(&w, net, params, t);
    beliefs.w = Some(w);
    beliefs.observation_log.extend_from_slice(observations);
    beliefs.day = t + 1;
    Ok(StepReport { alpha: 1.0, resets })
}
