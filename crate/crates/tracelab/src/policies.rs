//! Testing policies and the daily budget rule.

use rand::seq::index;
use rand::{Rng, RngCore};

use crate::belief::ProbVector;
use crate::error::{invalid, Result};
use crate::graph::{ContactNetwork, NodeId};
use crate::objective::{greedy_select, rewards, BeliefSnapshot};
use crate::spread::{active_infectious, has_active_infection, GroundTruthState, ModelParams, Observation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetRule {
    Fixed(usize),
    /// Non-isolated infectious nodes at the start of the day, at least 1
    /// while any non-isolated node is latent or infectious.
    ExpectedInfected,
}

pub fn budget(rule: BudgetRule, truth: &GroundTruthState) -> usize {
    match rule {
        BudgetRule::Fixed(k) => k,
        BudgetRule::ExpectedInfected => {
            let count = active_infectious(truth);
            if count == 0 && has_active_infection(truth) {
                1
            } else {
                count
            }
        }
    }
}

/// Floor of `x`, plus one with probability equal to its fractional part.
pub fn randomized_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> usize {
    let base = x.floor();
    let extra = rng.gen::<f64>() < x - base;
    base as usize + usize::from(extra)
}

/// What a policy may look at on a given day.
pub struct PolicyContext<'a> {
    pub day: usize,
    pub net: &'a ContactNetwork,
    /// Priors u(t).
    pub priors: &'a [ProbVector],
    pub params: &'a ModelParams,
    /// Nodes that tested positive, with their test day.
    pub positives: &'a [(NodeId, usize)],
}

impl PolicyContext<'_> {
    pub fn active(&self) -> Vec<NodeId> {
        self.net.active_nodes(self.day)
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot::new(self.net, self.day, self.priors.to_vec(), self.params.beta)
    }

    pub fn rewards(&self) -> Vec<f64> {
        rewards(&self.snapshot())
    }
}

/// `b` nodes with the largest score; ties go to the lower id.
fn top_by(nodes: &[NodeId], scores: &[f64], b: usize) -> Vec<NodeId> {
    let mut order = nodes.to_vec();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
    order.truncate(b);
    order.sort_unstable();
    order
}

fn sample_from<R: Rng + ?Sized>(pool: &[NodeId], b: usize, rng: &mut R) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = index::sample(rng, pool.len(), b.min(pool.len()))
        .into_iter()
        .map(|k| pool[k])
        .collect();
    out.sort_unstable();
    out
}

/// Top-`b` rewards.
pub fn rbex_select(ctx: &PolicyContext<'_>, b: usize) -> Vec<NodeId> {
    top_by(&ctx.active(), &ctx.rewards(), b)
}

/// Reward-proportional inclusion with the unused budget spent uniformly.
pub fn reer_select<R: Rng + ?Sized>(ctx: &PolicyContext<'_>, b: usize, rng: &mut R) -> Vec<NodeId> {
    let active = ctx.active();
    if b >= active.len() {
        return active;
    }
    let r = ctx.rewards();
    let total: f64 = active.iter().map(|&i| r[i]).sum();
    if total <= 0.0 {
        return random_select(ctx, b, rng);
    }
    let mut selected = Vec::new();
    let mut unused = 0.0;
    for &i in &active {
        let p = b as f64 * r[i] / total;
        if rng.gen::<f64>() < p.min(1.0) {
            selected.push(i);
        }
        unused += (p - 1.0).max(0.0);
    }
    let extra = randomized_round(unused, rng);
    let rest: Vec<NodeId> = active.into_iter().filter(|i| selected.binary_search(i).is_err()).collect();
    selected.extend(sample_from(&rest, extra, rng));
    selected.sort_unstable();
    selected
}

/// Inclusion probabilities and unused budget of [`reer_select`].
pub fn reer_probabilities(rewards: &[f64], b: usize) -> (Vec<f64>, f64) {
    let total: f64 = rewards.iter().sum();
    let p: Vec<f64> = rewards.iter().map(|&r| b as f64 * r / total).collect();
    let unused = p.iter().map(|&x| (x - 1.0).max(0.0)).sum();
    (p.iter().map(|&x| x.min(1.0)).collect(), unused)
}

pub fn greedy_policy_select(ctx: &PolicyContext<'_>, b: usize) -> Vec<NodeId> {
    greedy_select(&ctx.snapshot(), b)
}

/// Active contacts of recently detected positives.
pub fn tracing_candidates(ctx: &PolicyContext<'_>) -> Vec<NodeId> {
    let window = if ctx.params.gamma > 0.0 {
        (1.0 / ctx.params.gamma).ceil() as usize
    } else {
        usize::MAX
    };
    let mut out: Vec<NodeId> = ctx
        .positives
        .iter()
        .filter(|&&(_, d)| ctx.day.saturating_sub(d) <= window)
        .flat_map(|&(j, d)| ctx.net.raw_neighbors(j, d.saturating_sub(1)).iter().copied())
        .filter(|&i| ctx.net.is_active(i, ctx.day))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn contact_tracing_select<R: Rng + ?Sized>(ctx: &PolicyContext<'_>, b: usize, rng: &mut R) -> Vec<NodeId> {
    sample_from(&tracing_candidates(ctx), b, rng)
}

pub fn random_select<R: Rng + ?Sized>(ctx: &PolicyContext<'_>, b: usize, rng: &mut R) -> Vec<NodeId> {
    sample_from(&ctx.active(), b, rng)
}

/// A `share` of the budget at random, the rest by tracing, refilled at random.
pub fn acf_select<R: Rng + ?Sized>(ctx: &PolicyContext<'_>, b: usize, share: f64, rng: &mut R) -> Vec<NodeId> {
    let active = ctx.active();
    let b = b.min(active.len());
    let k = ((share * b as f64).ceil() as usize).min(b);
    let mut chosen = sample_from(&active, k, rng);
    let traced: Vec<NodeId> = tracing_candidates(ctx)
        .into_iter()
        .filter(|i| chosen.binary_search(i).is_err())
        .collect();
    chosen.extend(sample_from(&traced, b - k, rng));
    chosen.sort_unstable();
    if chosen.len() < b {
        let rest: Vec<NodeId> = active.into_iter().filter(|i| chosen.binary_search(i).is_err()).collect();
        chosen.extend(sample_from(&rest, b - chosen.len(), rng));
        chosen.sort_unstable();
    }
    chosen
}

/// Top `b − random` rewards plus `random` uniform picks among the rest.
pub fn exploit_random_select<R: Rng + ?Sized>(ctx: &PolicyContext<'_>, b: usize, random: usize, rng: &mut R) -> Vec<NodeId> {
    let active = ctx.active();
    let k = random.min(b);
    let mut chosen = top_by(&active, &ctx.rewards(), b - k);
    let rest: Vec<NodeId> = active.into_iter().filter(|i| chosen.binary_search(i).is_err()).collect();
    chosen.extend(sample_from(&rest, k, rng));
    chosen.sort_unstable();
    chosen
}

/// Active nodes in id order, `b` per day, cycling from where the previous day stopped.
pub fn round_robin_select(ctx: &PolicyContext<'_>, b: usize) -> Vec<NodeId> {
    let active = ctx.active();
    if active.is_empty() {
        return Vec::new();
    }
    let b = b.min(active.len());
    let start = ctx.day * b % active.len();
    let mut chosen: Vec<NodeId> = (0..b).map(|k| active[(start + k) % active.len()]).collect();
    chosen.sort_unstable();
    chosen
}

/// Per-node count of isolated nodes it has been in contact with.
#[derive(Clone, Debug, Default)]
pub struct QuarantineContacts {
    counts: Vec<usize>,
}

impl QuarantineContacts {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn count(&self, i: NodeId) -> usize {
        self.counts[i]
    }

    /// Registers `j`, isolated on day `day`.
    pub fn register(&mut self, net: &ContactNetwork, j: NodeId, day: usize) {
        let mut contacts: Vec<NodeId> = if net.is_static() {
            net.raw_neighbors(j, 0).to_vec()
        } else {
            (0..=day).flat_map(|t| net.raw_neighbors(j, t).iter().copied()).collect()
        };
        contacts.sort_unstable();
        contacts.dedup();
        for i in contacts {
            self.counts[i] += 1;
        }
    }
}

/// Offset added to the contact count in the logistic feature.
pub const FEATURE_OFFSET: f64 = 0.1;
const FIT_STEPS: usize = 100;
const FIT_RATE: f64 = 0.1;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Clone, Debug, Default)]
pub struct LogisticModel {
    pub weights: [f64; 2],
    pub buffer: Vec<([f64; 2], bool)>,
}

impl LogisticModel {
    pub fn feature(contacts: usize) -> [f64; 2] {
        [1.0, contacts as f64 + FEATURE_OFFSET]
    }

    pub fn score(&self, x: [f64; 2]) -> f64 {
        sigmoid(self.weights[0] * x[0] + self.weights[1] * x[1])
    }

    /// Appends rows and refits from zero; a single-class buffer keeps the old weights.
    pub fn train(&mut self, rows: impl IntoIterator<Item = ([f64; 2], bool)>) {
        self.buffer.extend(rows);
        let positives = self.buffer.iter().filter(|r| r.1).count();
        if positives == 0 || positives == self.buffer.len() {
            return;
        }
        let m = self.buffer.len() as f64;
        let mut w = [0.0; 2];
        for _ in 0..FIT_STEPS {
            let mut grad = [0.0; 2];
            for (x, y) in &self.buffer {
                let err = f64::from(u8::from(*y)) - sigmoid(w[0] * x[0] + w[1] * x[1]);
                grad[0] += err * x[0];
                grad[1] += err * x[1];
            }
            w[0] += FIT_RATE * grad[0] / m;
            w[1] += FIT_RATE * grad[1] / m;
        }
        self.weights = w;
    }
}

pub fn logistic_select(ctx: &PolicyContext<'_>, b: usize, model: &LogisticModel, contacts: &QuarantineContacts) -> Vec<NodeId> {
    let scores: Vec<f64> = (0..ctx.net.n())
        .map(|i| model.score(LogisticModel::feature(contacts.count(i))))
        .collect();
    top_by(&ctx.active(), &scores, b)
}

/// A testing policy as named in configs and run records.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    /// No testing at all.
    None,
    Random,
    Rbex,
    Reer,
    Greedy,
    ContactTracing,
    Acf { share: f64 },
    Logistic,
    ExploitRandom { random: usize },
    RoundRobin,
}

pub const POLICY_NAMES: &[&str] = &[
    "none",
    "random",
    "rbex",
    "reer",
    "greedy",
    "contact-tracing",
    "acf",
    "logistic",
    "exploit-random",
    "round-robin",
];

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::None => "none",
            PolicySpec::Random => "random",
            PolicySpec::Rbex => "rbex",
            PolicySpec::Reer => "reer",
            PolicySpec::Greedy => "greedy",
            PolicySpec::ContactTracing => "contact-tracing",
            PolicySpec::Acf { .. } => "acf",
            PolicySpec::Logistic => "logistic",
            PolicySpec::ExploitRandom { .. } => "exploit-random",
            PolicySpec::RoundRobin => "round-robin",
        }
    }

    /// Name plus parameters, e.g. `acf(share=0.05)`.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Acf { share } => format!("acf(share={share})"),
            PolicySpec::ExploitRandom { random } => format!("exploit-random(random={random})"),
            other => other.name().to_string(),
        }
    }

    /// Parses a policy name; `share` and `random` fill the parameterized kinds.
    pub fn parse(name: &str, share: f64, random: usize) -> Result<Self> {
        Ok(match name {
            "none" => PolicySpec::None,
            "random" => PolicySpec::Random,
            "rbex" => PolicySpec::Rbex,
            "reer" => PolicySpec::Reer,
            "greedy" => PolicySpec::Greedy,
            "contact-tracing" => PolicySpec::ContactTracing,
            "acf" => {
                if !(0.0..=1.0).contains(&share) {
                    return Err(invalid("policy.share", format!("{share} is not a fraction")));
                }
                PolicySpec::Acf { share }
            }
            "logistic" => PolicySpec::Logistic,
            "exploit-random" => PolicySpec::ExploitRandom { random },
            "round-robin" => PolicySpec::RoundRobin,
            other => {
                return Err(invalid(
                    "policy.name",
                    format!("unknown policy `{other}`; expected one of {}", POLICY_NAMES.join(", ")),
                ))
            }
        })
    }

    pub fn build(&self, n: usize) -> Box<dyn Policy> {
        match self {
            PolicySpec::Logistic => Box::new(LogisticPolicy {
                model: LogisticModel::default(),
                contacts: QuarantineContacts::new(n),
                pending: Vec::new(),
            }),
            other => Box::new(Stateless(other.clone())),
        }
    }
}

/// Daily selection interface shared by all policies.
pub trait Policy: Send {
    fn spec(&self) -> PolicySpec;

    fn select(&mut self, ctx: &PolicyContext<'_>, budget: usize, rng: &mut dyn RngCore) -> Vec<NodeId>;

    /// Called with the day's results after isolation has been applied.
    fn observe(&mut self, _ctx: &PolicyContext<'_>, _observations: &[Observation]) {}
}

struct Stateless(PolicySpec);

impl Policy for Stateless {
    fn spec(&self) -> PolicySpec {
        self.0.clone()
    }

    fn select(&mut self, ctx: &PolicyContext<'_>, b: usize, rng: &mut dyn RngCore) -> Vec<NodeId> {
        match self.0 {
            PolicySpec::None | PolicySpec::Logistic => Vec::new(),
            PolicySpec::Random => random_select(ctx, b, rng),
            PolicySpec::Rbex => rbex_select(ctx, b),
            PolicySpec::Reer => reer_select(ctx, b, rng),
            PolicySpec::Greedy => greedy_policy_select(ctx, b),
            PolicySpec::ContactTracing => contact_tracing_select(ctx, b, rng),
            PolicySpec::Acf { share } => acf_select(ctx, b, share, rng),
            PolicySpec::ExploitRandom { random } => exploit_random_select(ctx, b, random, rng),
            PolicySpec::RoundRobin => round_robin_select(ctx, b),
        }
    }
}

struct LogisticPolicy {
    model: LogisticModel,
    contacts: QuarantineContacts,
    /// Features of today's selection, recorded at selection time.
    pending: Vec<(NodeId, [f64; 2])>,
}

impl Policy for LogisticPolicy {
    fn spec(&self) -> PolicySpec {
        PolicySpec::Logistic
    }

    fn select(&mut self, ctx: &PolicyContext<'_>, b: usize, _rng: &mut dyn RngCore) -> Vec<NodeId> {
        let chosen = logistic_select(ctx, b, &self.model, &self.contacts);
        self.pending = chosen
            .iter()
            .map(|&i| (i, LogisticModel::feature(self.contacts.count(i))))
            .collect();
        chosen
    }

    fn observe(&mut self, ctx: &PolicyContext<'_>, observations: &[Observation]) {
        let rows: Vec<([f64; 2], bool)> = observations
            .iter()
            .filter_map(|o| {
                self.pending
                    .iter()
                    .find(|(i, _)| *i == o.node)
                    .map(|&(_, x)| (x, o.positive))
            })
            .collect();
        self.model.train(rows);
        for o in observations.iter().filter(|o| o.positive) {
            self.contacts.register(ctx.net, o.node, ctx.day);
        }
        self.pending.clear();
    }
}
