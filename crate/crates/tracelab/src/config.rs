//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, keys are grouped by dotted prefix
//! (`network.`, `model.`, `run.`, `policy.`, `budget.`, `belief.`, `truth.`).
//! Unknown keys are rejected. [`ExperimentConfig::to_text`] writes every key,
//! defaults included, in a fixed order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::belief::{BeliefConfig, EvidencePolicy};
use crate::error::{Error, Result};
use crate::graph::{self, ContactNetwork, LoadOptions, NodeId, SbmVariant};
use crate::policies::{BudgetRule, PolicySpec};
use crate::spread::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    Line,
    WattsStrogatz,
    ScaleFree,
    Sbm,
    /// SBM with links only between successive clusters.
    Vsbm,
    File,
}

impl NetworkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Line => "line",
            NetworkKind::WattsStrogatz => "ws",
            NetworkKind::ScaleFree => "sf",
            NetworkKind::Sbm => "sbm",
            NetworkKind::Vsbm => "vsbm",
            NetworkKind::File => "file",
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "line" => NetworkKind::Line,
            "ws" => NetworkKind::WattsStrogatz,
            "sf" => NetworkKind::ScaleFree,
            "sbm" => NetworkKind::Sbm,
            "vsbm" => NetworkKind::Vsbm,
            "file" => NetworkKind::File,
            other => return Err(format!("unknown network kind `{other}` (line, ws, sf, sbm, vsbm, file)")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub alpha: f64,
    pub m: usize,
    pub p1: f64,
    pub p2: f64,
    pub path: Option<PathBuf>,
    pub replicate: usize,
    pub compress: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            kind: NetworkKind::WattsStrogatz,
            n: 300,
            d: 4,
            delta: 0.03,
            alpha: 2.1,
            m: 10,
            p1: 0.274,
            p2: 0.02,
            path: None,
            replicate: 1,
            compress: 1,
        }
    }
}

impl NetworkConfig {
    /// Whether building the network consumes randomness.
    pub fn is_random(&self) -> bool {
        matches!(
            self.kind,
            NetworkKind::WattsStrogatz | NetworkKind::ScaleFree | NetworkKind::Sbm | NetworkKind::Vsbm
        )
    }

    pub fn build<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<ContactNetwork> {
        match self.kind {
            NetworkKind::Line => graph::line(self.n),
            NetworkKind::WattsStrogatz => graph::watts_strogatz(self.n, self.d, self.delta, rng),
            NetworkKind::ScaleFree => graph::scale_free(self.n, self.alpha, rng),
            NetworkKind::Sbm => graph::sbm(self.n, self.m, self.p1, self.p2, SbmVariant::Standard, rng),
            NetworkKind::Vsbm => graph::sbm(self.n, self.m, self.p1, self.p2, SbmVariant::Chain, rng),
            NetworkKind::File => {
                let path = self.path.as_deref().ok_or_else(|| Error::Config(vec!["network.path: required for file networks".into()]))?;
                graph::load_temporal_edges(
                    path,
                    LoadOptions {
                        replicate: self.replicate,
                        compress: self.compress,
                    },
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateRule {
    BackwardForward,
    Naive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthMode {
    OneHot,
    MonteCarlo { reps: usize },
}

impl TruthMode {
    pub fn label(&self) -> String {
        match self {
            TruthMode::OneHot => "one-hot".into(),
            TruthMode::MonteCarlo { reps } => format!("monte-carlo({reps})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    /// One revealed initial seed is certainly infectious, everyone else susceptible.
    Reveal,
    /// Nodes with `from`·N ≤ index < `to`·N infectious with probability `p`,
    /// everyone else susceptible.
    Band,
}

/// Beliefs at the first intervention day.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorInit {
    pub kind: PriorKind,
    pub p: f64,
    pub from: f64,
    pub to: f64,
}

impl PriorInit {
    pub const REVEAL: Self = Self {
        kind: PriorKind::Reveal,
        p: 0.0,
        from: 0.0,
        to: 1.0,
    };

    pub fn band(from: f64, to: f64, p: f64) -> Self {
        Self {
            kind: PriorKind::Band,
            p,
            from,
            to,
        }
    }

    /// Every node infectious with probability `p`.
    pub fn flat(p: f64) -> Self {
        Self::band(0.0, 1.0, p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub model: ModelParams,
    pub n0: usize,
    /// Explicit initial seeds; overrides the random draw of `n0` seeds.
    pub seeds: Option<Vec<NodeId>>,
    pub seed_latent: bool,
    /// Unregulated delay ℓ.
    pub ell: usize,
    /// Days recorded, T.
    pub horizon: usize,
    pub isolate: bool,
    pub policy: String,
    pub policy_share: f64,
    pub policy_random: usize,
    pub budget: BudgetRule,
    pub update: UpdateRule,
    pub belief: BeliefConfig,
    pub init: PriorInit,
    pub dump_beliefs: bool,
    pub truth: TruthMode,
    pub reps: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            model: ModelParams {
                beta: 0.4,
                lambda: 0.5,
                gamma: 0.1,
                latent_enabled: true,
            },
            n0: 3,
            seeds: None,
            seed_latent: false,
            ell: 3,
            horizon: 60,
            isolate: true,
            policy: "reer".into(),
            policy_share: 0.05,
            policy_random: 1,
            budget: BudgetRule::ExpectedInfected,
            update: UpdateRule::BackwardForward,
            belief: BeliefConfig {
                evidence: EvidencePolicy::Reset,
                ..BeliefConfig::default()
            },
            init: PriorInit::REVEAL,
            dump_beliefs: false,
            truth: TruthMode::OneHot,
            reps: 1,
            seed: 1,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "network.kind",
    "network.n",
    "network.d",
    "network.delta",
    "network.alpha",
    "network.m",
    "network.p1",
    "network.p2",
    "network.path",
    "network.replicate",
    "network.compress",
    "model.beta",
    "model.lambda",
    "model.gamma",
    "model.latent",
    "run.n0",
    "run.seeds",
    "run.seed_latent",
    "run.ell",
    "run.horizon",
    "run.isolate",
    "run.reps",
    "run.seed",
    "policy.name",
    "policy.share",
    "policy.random",
    "budget.rule",
    "budget.k",
    "belief.update",
    "belief.init",
    "belief.init_p",
    "belief.band_from",
    "belief.band_to",
    "belief.alpha",
    "belief.max_psi",
    "belief.max_phi",
    "belief.evidence",
    "belief.dump",
    "truth.mode",
    "truth.reps",
];

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

impl ExperimentConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "network.kind" => self.network.kind = NetworkKind::parse(v)?,
            "network.n" => self.network.n = num(v)?,
            "network.d" => self.network.d = num(v)?,
            "network.delta" => self.network.delta = num(v)?,
            "network.alpha" => self.network.alpha = num(v)?,
            "network.m" => self.network.m = num(v)?,
            "network.p1" => self.network.p1 = num(v)?,
            "network.p2" => self.network.p2 = num(v)?,
            "network.path" => self.network.path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "network.replicate" => self.network.replicate = num(v)?,
            "network.compress" => self.network.compress = num(v)?,
            "model.beta" => self.model.beta = num(v)?,
            "model.lambda" => self.model.lambda = num(v)?,
            "model.gamma" => self.model.gamma = num(v)?,
            "model.latent" => self.model.latent_enabled = flag(v)?,
            "run.n0" => self.n0 = num(v)?,
            "run.seeds" => {
                self.seeds = if v.is_empty() || v == "random" {
                    None
                } else if v == "none" {
                    Some(Vec::new())
                } else {
                    Some(v.split(',').map(|s| num(s.trim())).collect::<std::result::Result<_, _>>()?)
                }
            }
            "run.seed_latent" => self.seed_latent = flag(v)?,
            "run.ell" => self.ell = num(v)?,
            "run.horizon" => self.horizon = num(v)?,
            "run.isolate" => self.isolate = flag(v)?,
            "run.reps" => self.reps = num(v)?,
            "run.seed" => self.seed = num(v)?,
            "policy.name" => self.policy = v.to_string(),
            "policy.share" => self.policy_share = num(v)?,
            "policy.random" => self.policy_random = num(v)?,
            "budget.rule" => {
                self.budget = match v {
                    "expected-infected" => BudgetRule::ExpectedInfected,
                    "fixed" => BudgetRule::Fixed(match self.budget {
                        BudgetRule::Fixed(k) => k,
                        BudgetRule::ExpectedInfected => 1,
                    }),
                    other => return Err(format!("unknown budget rule `{other}` (expected-infected, fixed)")),
                }
            }
            "budget.k" => self.budget = BudgetRule::Fixed(num(v)?),
            "belief.update" => {
                self.update = match v {
                    "backward-forward" => UpdateRule::BackwardForward,
                    "naive" => UpdateRule::Naive,
                    other => return Err(format!("unknown update rule `{other}` (backward-forward, naive)")),
                }
            }
            "belief.init" => {
                self.init.kind = match v {
                    "reveal" => PriorKind::Reveal,
                    "band" => PriorKind::Band,
                    other => return Err(format!("unknown prior init `{other}` (reveal, band)")),
                }
            }
            "belief.init_p" => self.init.p = num(v)?,
            "belief.band_from" => self.init.from = num(v)?,
            "belief.band_to" => self.init.to = num(v)?,
            "belief.alpha" => self.belief.alpha = num(v)?,
            "belief.max_psi" => self.belief.max_psi = num(v)?,
            "belief.max_phi" => self.belief.max_phi = num(v)?,
            "belief.evidence" => {
                self.belief.evidence = match v {
                    "strict" => EvidencePolicy::Strict,
                    "reset" => EvidencePolicy::Reset,
                    other => return Err(format!("unknown evidence policy `{other}` (strict, reset)")),
                }
            }
            "belief.dump" => self.dump_beliefs = flag(v)?,
            "truth.mode" => {
                self.truth = match v {
                    "one-hot" => TruthMode::OneHot,
                    "monte-carlo" => TruthMode::MonteCarlo { reps: self.truth_reps() },
                    other => return Err(format!("unknown truth mode `{other}` (one-hot, monte-carlo)")),
                }
            }
            "truth.reps" => {
                let r: usize = num(v)?;
                if let TruthMode::MonteCarlo { reps } = &mut self.truth {
                    *reps = r;
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn truth_reps(&self) -> usize {
        match self.truth {
            TruthMode::MonteCarlo { reps } => reps,
            TruthMode::OneHot => 1000,
        }
    }

    /// Every key with its current value, in [`CONFIG_KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let net = &self.network;
        let seeds = self
            .seeds
            .as_ref()
            .map(|s| {
                if s.is_empty() {
                    "none".into()
                } else {
                    s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                }
            })
            .unwrap_or_else(|| "random".into());
        let (rule, k) = match self.budget {
            BudgetRule::ExpectedInfected => ("expected-infected", 0),
            BudgetRule::Fixed(k) => ("fixed", k),
        };
        let init = match self.init.kind {
            PriorKind::Reveal => "reveal",
            PriorKind::Band => "band",
        };
        vec![
            ("network.kind", net.kind.as_str().into()),
            ("network.n", net.n.to_string()),
            ("network.d", net.d.to_string()),
            ("network.delta", net.delta.to_string()),
            ("network.alpha", net.alpha.to_string()),
            ("network.m", net.m.to_string()),
            ("network.p1", net.p1.to_string()),
            ("network.p2", net.p2.to_string()),
            ("network.path", net.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("network.replicate", net.replicate.to_string()),
            ("network.compress", net.compress.to_string()),
            ("model.beta", self.model.beta.to_string()),
            ("model.lambda", self.model.lambda.to_string()),
            ("model.gamma", self.model.gamma.to_string()),
            ("model.latent", self.model.latent_enabled.to_string()),
            ("run.n0", self.n0.to_string()),
            ("run.seeds", seeds),
            ("run.seed_latent", self.seed_latent.to_string()),
            ("run.ell", self.ell.to_string()),
            ("run.horizon", self.horizon.to_string()),
            ("run.isolate", self.isolate.to_string()),
            ("run.reps", self.reps.to_string()),
            ("run.seed", self.seed.to_string()),
            ("policy.name", self.policy.clone()),
            ("policy.share", self.policy_share.to_string()),
            ("policy.random", self.policy_random.to_string()),
            ("budget.rule", rule.into()),
            ("budget.k", k.to_string()),
            ("belief.update", match self.update {
                UpdateRule::BackwardForward => "backward-forward".into(),
                UpdateRule::Naive => "naive".into(),
            }),
            ("belief.init", init.into()),
            ("belief.init_p", self.init.p.to_string()),
            ("belief.band_from", self.init.from.to_string()),
            ("belief.band_to", self.init.to.to_string()),
            ("belief.alpha", self.belief.alpha.to_string()),
            ("belief.max_psi", self.belief.max_psi.to_string()),
            ("belief.max_phi", self.belief.max_phi.to_string()),
            ("belief.evidence", match self.belief.evidence {
                EvidencePolicy::Strict => "strict".into(),
                EvidencePolicy::Reset => "reset".into(),
            }),
            ("belief.dump", self.dump_beliefs.to_string()),
            ("truth.mode", match self.truth {
                TruthMode::OneHot => "one-hot".into(),
                TruthMode::MonteCarlo { .. } => "monte-carlo".into(),
            }),
            ("truth.reps", self.truth_reps().to_string()),
        ]
    }

    /// Resolved config text, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies a config text over the current values. Keys are applied in file
    /// order, so mode keys (`belief.init`, `truth.mode`, `budget.rule`) should
    /// precede their parameters.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut errors = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", idx + 1));
                continue;
            };
            if let Err(e) = self.set(key.trim(), value) {
                errors.push(format!("line {}: {}: {e}", idx + 1, key.trim()));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn policy_spec(&self) -> Result<PolicySpec> {
        PolicySpec::parse(&self.policy, self.policy_share, self.policy_random)
    }

    /// Short hex digest of the resolved config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let net = &self.network;
        let prob = |name: &str, v: f64, errors: &mut Vec<String>| {
            if !(0.0..=1.0).contains(&v) {
                errors.push(format!("{name}: {v} is not a probability"));
            }
        };
        prob("model.beta", self.model.beta, &mut errors);
        prob("model.lambda", self.model.lambda, &mut errors);
        prob("model.gamma", self.model.gamma, &mut errors);
        prob("belief.alpha", self.belief.alpha, &mut errors);
        match net.kind {
            NetworkKind::Line if net.n < 2 => errors.push("network.n: a line needs at least 2 nodes".into()),
            NetworkKind::WattsStrogatz => {
                if net.d % 2 != 0 || net.d >= net.n {
                    errors.push(format!("network.d: must be even and below network.n, got {}", net.d));
                }
                prob("network.delta", net.delta, &mut errors);
            }
            NetworkKind::ScaleFree if net.alpha.is_nan() || net.alpha <= 1.0 => {
                errors.push(format!("network.alpha: must exceed 1, got {}", net.alpha))
            }
            NetworkKind::Sbm | NetworkKind::Vsbm => {
                if net.m == 0 || net.n % net.m != 0 {
                    errors.push(format!("network.m: {} does not divide network.n = {}", net.m, net.n));
                }
                prob("network.p1", net.p1, &mut errors);
                prob("network.p2", net.p2, &mut errors);
            }
            NetworkKind::File => {
                if net.path.is_none() {
                    errors.push("network.path: required for file networks".into());
                }
                if net.replicate > 1 && net.compress > 1 {
                    errors.push("network.replicate: cannot be combined with network.compress".into());
                }
            }
            _ => {}
        }
        if net.kind != NetworkKind::File {
            if self.n0 > net.n {
                errors.push(format!("run.n0: {} seeds on {} nodes", self.n0, net.n));
            }
            if let Some(seeds) = &self.seeds {
                if let Some(bad) = seeds.iter().find(|&&s| s >= net.n) {
                    errors.push(format!("run.seeds: node {bad} outside [0, {})", net.n));
                }
            }
        }
        if self.ell >= self.horizon {
            errors.push(format!("run.ell: {} must be below run.horizon = {}", self.ell, self.horizon));
        }
        if self.reps == 0 {
            errors.push("run.reps: must be at least 1".into());
        }
        if self.init.kind == PriorKind::Reveal && self.seeds.as_ref().map_or(self.n0 == 0, Vec::is_empty) {
            errors.push("belief.init: reveal needs at least one initial seed".into());
        }
        if self.init.kind == PriorKind::Band {
            prob("belief.init_p", self.init.p, &mut errors);
            if !(0.0 <= self.init.from && self.init.from <= self.init.to && self.init.to <= 1.0) {
                errors.push(format!(
                    "belief.band_from: need 0 <= band_from <= band_to <= 1, got {} and {}",
                    self.init.from, self.init.to
                ));
            }
        }
        if let TruthMode::MonteCarlo { reps } = self.truth {
            if net.kind != NetworkKind::File && net.n > 50 {
                errors.push(format!("truth.mode: monte-carlo truth needs network.n <= 50, got {}", net.n));
            }
            if reps == 0 {
                errors.push("truth.reps: must be at least 1".into());
            }
        }
        if let Err(e) = self.policy_spec() {
            errors.push(e.to_string());
        }
        for w in self.model.warnings() {
            log::warn!("{w}");
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}
