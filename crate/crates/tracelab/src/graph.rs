//! Contact networks indexed by day, with permanent node removal.
//!
//! A network is either static (one adjacency shared by every day) or
//! temporal (one adjacency per day up to the horizon). Removal is tracked in
//! a per-run ledger so the adjacency itself can be shared between runs.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};

pub type NodeId = usize;

type Adjacency = Vec<Vec<NodeId>>;

#[derive(Clone, Debug)]
pub struct ContactNetwork {
    n: usize,
    days: Arc<Vec<Adjacency>>,
    is_static: bool,
    removed: Vec<Option<usize>>,
    labels: Option<Arc<Vec<String>>>,
}

fn build_adjacency(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Adjacency> {
    let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for (u, v) in edges {
        if u >= n || v >= n {
            return Err(invalid("edge", format!("({u}, {v}) references a node outside [0, {n})")));
        }
        if u == v {
            return Err(invalid("edge", format!("self-loop at node {u}")));
        }
        sets[u].insert(v);
        sets[v].insert(u);
    }
    Ok(sets.into_iter().map(|s| s.into_iter().collect()).collect())
}

impl ContactNetwork {
    /// Network whose edge set is the same on every day.
    pub fn from_static(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let adj = build_adjacency(n, edges)?;
        Ok(Self {
            n,
            days: Arc::new(vec![adj]),
            is_static: true,
            removed: vec![None; n],
            labels: None,
        })
    }

    /// Network with one edge set per day; days past the horizon have no edges.
    pub fn from_days(n: usize, days: Vec<Vec<(NodeId, NodeId)>>) -> Result<Self> {
        let days = days
            .into_iter()
            .map(|d| build_adjacency(n, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            days: Arc::new(days),
            is_static: false,
            removed: vec![None; n],
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(Arc::new(labels));
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref().map(|v| v.as_slice())
    }

    /// Initial node count N(0).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_static(&self) -> bool {
        self.is_static
    }

    /// Number of days with recorded contacts; `None` for static networks.
    pub fn horizon(&self) -> Option<usize> {
        if self.is_static {
            None
        } else {
            Some(self.days.len())
        }
    }

    fn day_adjacency(&self, t: usize) -> Option<&Adjacency> {
        if self.is_static {
            self.days.first()
        } else {
            self.days.get(t)
        }
    }

    /// Contacts of `i` on day `t`, ignoring removals.
    pub fn raw_neighbors(&self, i: NodeId, t: usize) -> &[NodeId] {
        self.day_adjacency(t).map(|a| a[i].as_slice()).unwrap_or(&[])
    }

    pub fn removal_day(&self, i: NodeId) -> Option<usize> {
        self.removed[i]
    }

    pub fn is_active(&self, i: NodeId, t: usize) -> bool {
        match self.removed[i] {
            Some(r) => t < r,
            None => true,
        }
    }

    /// ∂_i(t): neighbors on day `t` that are still present. Empty if `i` is removed.
    pub fn neighbors(&self, i: NodeId, t: usize) -> impl Iterator<Item = NodeId> + '_ {
        let list = if self.is_active(i, t) {
            self.raw_neighbors(i, t)
        } else {
            &[]
        };
        list.iter().copied().filter(move |&j| self.is_active(j, t))
    }

    /// ∂+_i(t) = ∂_i(t) ∪ {i}, sorted.
    pub fn closed_neighbors(&self, i: NodeId, t: usize) -> Vec<NodeId> {
        if !self.is_active(i, t) {
            return Vec::new();
        }
        let mut out: Vec<NodeId> = self.neighbors(i, t).collect();
        let pos = out.partition_point(|&j| j < i);
        out.insert(pos, i);
        out
    }

    pub fn degree(&self, i: NodeId, t: usize) -> usize {
        self.neighbors(i, t).count()
    }

    pub fn active_nodes(&self, t: usize) -> Vec<NodeId> {
        (0..self.n).filter(|&i| self.is_active(i, t)).collect()
    }

    /// Removes `i` from every day `>= t`. An earlier removal day is kept.
    pub fn remove_node(&mut self, i: NodeId, t: usize) {
        let slot = &mut self.removed[i];
        *slot = Some(slot.map_or(t, |r| r.min(t)));
    }

    /// Active edges on day `t` as `(u, v)` with `u < v`.
    pub fn edges(&self, t: usize) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            out.extend(self.neighbors(u, t).filter(|&v| u < v).map(|v| (u, v)));
        }
        out
    }

    pub fn edge_count(&self, t: usize) -> usize {
        (0..self.n).map(|u| self.neighbors(u, t).filter(|&v| u < v).count()).sum()
    }

    /// Edge-list text: `day<TAB>u<TAB>v` per line, with `#` header comments.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {}", self.n);
        if self.is_static {
            let _ = writeln!(out, "# static");
        }
        let days = if self.is_static { 1 } else { self.days.len() };
        for t in 0..days {
            for u in 0..self.n {
                for &v in self.raw_neighbors(u, t).iter().filter(|&&v| u < v) {
                    let _ = writeln!(out, "{t}\t{}\t{}", self.label(u), self.label(v));
                }
            }
        }
        out
    }

    fn label(&self, i: NodeId) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }
}

/// Path graph 0 - 1 - ... - (n-1).
pub fn line(n: usize) -> Result<ContactNetwork> {
    if n < 2 {
        return Err(invalid("n", format!("line needs at least 2 nodes, got {n}")));
    }
    ContactNetwork::from_static(n, (0..n - 1).map(|i| (i, i + 1)))
}

/// Ring lattice with `d/2` neighbors per side; each lattice edge's far endpoint
/// is rewired with probability `delta` to a uniform non-neighbor.
pub fn watts_strogatz<R: Rng + ?Sized>(n: usize, d: usize, delta: f64, rng: &mut R) -> Result<ContactNetwork> {
    if d % 2 != 0 {
        return Err(invalid("d", format!("degree must be even, got {d}")));
    }
    if d >= n {
        return Err(invalid("d", format!("degree {d} must be below n = {n}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid("delta", format!("{delta} is not a probability")));
    }
    let mut adj: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for k in 1..=d / 2 {
            let v = (u + k) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for k in 1..=d / 2 {
        for u in 0..n {
            let v = (u + k) % n;
            if rng.gen::<f64>() >= delta || adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&v| u < v).map(move |&v| (u, v)));
    ContactNetwork::from_static(n, edges)
}

const SF_SEQUENCE_TRIES: usize = 100;
const SF_PAIRING_TRIES: usize = 100;
const SF_PARTNER_TRIES: usize = 64;

/// Configuration model over a degree sequence drawn from P(k) ∝ k^-alpha on [1, n-1].
/// Self-loops and repeated edges are rejected partner by partner; a stuck
/// pairing is restarted.
pub fn scale_free<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Result<ContactNetwork> {
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(invalid("alpha", format!("exponent must exceed 1, got {alpha}")));
    }
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 nodes, got {n}")));
    }
    let weights: Vec<f64> = (1..n).map(|k| (k as f64).powf(-alpha)).collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let draw = |rng: &mut R| -> usize {
        let x: f64 = rng.gen();
        cdf.partition_point(|&c| c < x).min(cdf.len() - 1) + 1
    };

    for _ in 0..SF_SEQUENCE_TRIES {
        let mut degrees: Vec<usize> = (0..n).map(|_| draw(rng)).collect();
        if degrees.iter().sum::<usize>() % 2 == 1 {
            let i = rng.gen_range(0..n);
            let mut redrawn = false;
            for _ in 0..SF_SEQUENCE_TRIES {
                let k = draw(rng);
                if k % 2 != degrees[i] % 2 {
                    degrees[i] = k;
                    redrawn = true;
                    break;
                }
            }
            if !redrawn {
                continue;
            }
        }
        if !is_graphical(&degrees) {
            continue;
        }
        for _ in 0..SF_PAIRING_TRIES {
            if let Some(edges) = pair_stubs(&degrees, rng) {
                return ContactNetwork::from_static(n, edges);
            }
        }
    }
    Err(Error::Generation(format!(
        "no simple graph realized a power-law degree sequence (n = {n}, alpha = {alpha})"
    )))
}

fn pair_stubs<R: Rng + ?Sized>(degrees: &[usize], rng: &mut R) -> Option<Vec<(NodeId, NodeId)>> {
    let mut order: Vec<NodeId> = (0..degrees.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| degrees[i]);
    // popping from the back pairs high-degree stubs first
    let mut stubs: Vec<NodeId> = order
        .iter()
        .flat_map(|&i| std::iter::repeat(i).take(degrees[i]))
        .collect();
    let mut adj: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); degrees.len()];
    let mut edges = Vec::with_capacity(stubs.len() / 2);
    while let Some(a) = stubs.pop() {
        if stubs.is_empty() {
            return None;
        }
        let mut matched = false;
        for _ in 0..SF_PARTNER_TRIES {
            let k = rng.gen_range(0..stubs.len());
            let b = stubs[k];
            if b != a && !adj[a].contains(&b) {
                stubs.swap_remove(k);
                adj[a].insert(b);
                adj[b].insert(a);
                edges.push((a.min(b), a.max(b)));
                matched = true;
                break;
            }
        }
        if !matched {
            return None;
        }
    }
    Some(edges)
}

/// Erdős–Gallai test.
fn is_graphical(degrees: &[usize]) -> bool {
    let mut d: Vec<usize> = degrees.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    let total: usize = d.iter().sum();
    if total % 2 == 1 {
        return false;
    }
    let mut lhs = 0usize;
    for k in 1..=d.len() {
        lhs += d[k - 1];
        let rhs = k * (k - 1) + d[k..].iter().map(|&x| x.min(k)).sum::<usize>();
        if lhs > rhs {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbmVariant {
    /// Every inter-cluster pair is eligible.
    Standard,
    /// Clusters sit on a ring; only pairs in successive clusters are eligible.
    Chain,
}

impl SbmVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            SbmVariant::Standard => "standard",
            SbmVariant::Chain => "chain",
        }
    }
}

impl std::str::FromStr for SbmVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(SbmVariant::Standard),
            "chain" => Ok(SbmVariant::Chain),
            other => Err(invalid("variant", format!("expected standard or chain, got `{other}`"))),
        }
    }
}

fn check_sbm(n: usize, m: usize, p1: f64, p2: f64) -> Result<()> {
    if m == 0 || n % m != 0 {
        return Err(invalid("m", format!("cluster count {m} must divide n = {n}")));
    }
    for (name, p) in [("p1", p1), ("p2", p2)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(name, format!("{p} is not a probability")));
        }
    }
    Ok(())
}

/// Stochastic block model with `m` equal clusters of consecutive ids.
pub fn sbm<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    p1: f64,
    p2: f64,
    variant: SbmVariant,
    rng: &mut R,
) -> Result<ContactNetwork> {
    check_sbm(n, m, p1, p2)?;
    let size = n / m;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let (cu, cv) = (u / size, v / size);
            let p = if cu == cv {
                p1
            } else {
                match variant {
                    SbmVariant::Standard => p2,
                    SbmVariant::Chain if (cu + 1) % m == cv || (cv + 1) % m == cu => p2,
                    SbmVariant::Chain => continue,
                }
            };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    ContactNetwork::from_static(n, edges)
}

/// Expected edge count of [`sbm`].
pub fn expected_edges(n: usize, m: usize, p1: f64, p2: f64, variant: SbmVariant) -> Result<f64> {
    check_sbm(n, m, p1, p2)?;
    let (intra, inter) = edge_coefficients(n, m, variant);
    Ok(p1 * intra + p2 * inter)
}

fn edge_coefficients(n: usize, m: usize, variant: SbmVariant) -> (f64, f64) {
    let (n, m) = (n as f64, m as f64);
    let intra = 0.5 * n * (n / m - 1.0);
    let inter = match variant {
        SbmVariant::Standard => 0.5 * (n * n / m) * (m - 1.0),
        SbmVariant::Chain => n * n / m,
    };
    (intra, inter)
}

/// Intra-cluster probability giving `target` expected edges for a fixed `p2`.
pub fn solve_p1(n: usize, m: usize, target: f64, p2: f64, variant: SbmVariant) -> Result<f64> {
    check_sbm(n, m, 0.0, p2)?;
    let (intra, inter) = edge_coefficients(n, m, variant);
    let p1 = (target - p2 * inter) / intra;
    if !(0.0..=1.0).contains(&p1) {
        return Err(invalid("p1", format!("target of {target} edges needs p1 = {p1}")));
    }
    Ok(p1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Concatenate the day sequence this many times (1 = off).
    pub replicate: usize,
    /// Union each block of this many consecutive days (1 = off).
    pub compress: usize,
}

impl LoadOptions {
    pub fn identity() -> Self {
        Self { replicate: 1, compress: 1 }
    }
}

/// Reads a day-stamped edge list from a file.
pub fn load_temporal_edges(path: &Path, opts: LoadOptions) -> Result<ContactNetwork> {
    let file = std::fs::File::open(path)?;
    read_temporal_edges(file, opts)
}

/// Parses `day<TAB>u<TAB>v` rows. `# nodes N` and `# static` header comments
/// are honored; other `#` lines are skipped. Labels that are all non-negative
/// integers are used as ids directly, otherwise they are numbered by first
/// appearance and kept as labels.
pub fn read_temporal_edges<R: Read>(source: R, opts: LoadOptions) -> Result<ContactNetwork> {
    let replicate = opts.replicate.max(1);
    let compress = opts.compress.max(1);
    if replicate > 1 && compress > 1 {
        return Err(invalid("replicate", "replicate and compress are mutually exclusive"));
    }
    let mut declared_n = 0usize;
    let mut is_static = false;
    let mut rows: Vec<(usize, String, String, usize)> = Vec::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            match (words.next(), words.next()) {
                (Some("static"), None) => is_static = true,
                (Some("nodes"), Some(count)) => {
                    declared_n = count.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        reason: format!("bad node count `{count}`"),
                    })?;
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 3 fields (day, u, v), found {}", fields.len()),
            });
        }
        let day: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("bad day `{}`", fields[0]),
        })?;
        rows.push((day, fields[1].to_string(), fields[2].to_string(), lineno));
    }

    let numeric = rows
        .iter()
        .all(|(_, u, v, _)| u.parse::<usize>().is_ok() && v.parse::<usize>().is_ok());
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, NodeId, NodeId)> = Vec::with_capacity(rows.len());
    let mut n = declared_n;
    for (day, u, v, lineno) in rows {
        let (a, b) = if numeric {
            (u.parse::<usize>().unwrap_or(0), v.parse::<usize>().unwrap_or(0))
        } else {
            let mut id = |s: String| -> NodeId {
                let next = ids.len();
                *ids.entry(s.clone()).or_insert_with(|| {
                    labels.push(s);
                    next
                })
            };
            (id(u), id(v))
        };
        if a == b {
            log::warn!("line {lineno}: dropping self-contact of node {a}");
            continue;
        }
        n = n.max(a + 1).max(b + 1);
        edges.push((day, a, b));
    }
    if !numeric {
        n = n.max(labels.len());
    }

    let net = if is_static {
        ContactNetwork::from_static(n, edges.into_iter().map(|(_, a, b)| (a, b)))?
    } else {
        let base_days = edges.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let mut days: Vec<Vec<(NodeId, NodeId)>> = vec![Vec::new(); base_days];
        for (d, a, b) in edges {
            days[d].push((a, b));
        }
        let days = if compress > 1 {
            days.chunks(compress).map(|c| c.concat()).collect()
        } else {
            let mut out = Vec::with_capacity(base_days * replicate);
            for _ in 0..replicate {
                out.extend(days.iter().cloned());
            }
            out
        };
        ContactNetwork::from_days(n, days)?
    };
    Ok(if numeric { net } else { net.with_labels(labels) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopologyMetrics {
    /// Global transitivity: 3·triangles / connected triples.
    pub gamma_c: f64,
    /// Mean shortest-path length over connected ordered pairs; `None` without edges.
    pub l_p: Option<f64>,
    pub n_components: usize,
}

/// Clustering, path length and component count of the day-`t` active graph.
pub fn topology_metrics(net: &ContactNetwork, t: usize) -> TopologyMetrics {
    let n = net.n();
    let adj: Vec<Vec<NodeId>> = (0..n).map(|i| net.neighbors(i, t).collect()).collect();
    let active = net.active_nodes(t);

    let mut closed = 0u64;
    let mut triples = 0u64;
    for nb in &adj {
        let d = nb.len() as u64;
        triples += d * d.saturating_sub(1) / 2;
        for (x, &a) in nb.iter().enumerate() {
            for &b in &nb[x + 1..] {
                if adj[a].binary_search(&b).is_ok() {
                    closed += 1;
                }
            }
        }
    }
    let gamma_c = if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    };

    let mut total = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in &active {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    total += dist[v] as u64;
                    pairs += 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let l_p = (pairs > 0).then(|| total as f64 / pairs as f64);

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut n_components = active.len();
    for (u, nb) in adj.iter().enumerate() {
        for &v in nb.iter().filter(|&&v| u < v) {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
                n_components -= 1;
            }
        }
    }
    TopologyMetrics {
        gamma_c,
        l_p,
        n_components,
    }
}
