//! Trust network generation and network metrics.
//!
//! Every network is a row-stochastic trust matrix `trust[i][j]`: the weight
//! individual `i` puts on the opinion of individual `j`. Random models sample
//! an undirected skeleton, add a self-loop to every node, draw an independent
//! `(0, 1)` weight per directed edge and normalize rows. Disconnected samples
//! are redrawn from the same random stream, up to [`MAX_ATTEMPTS`] times.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

/// Maximum number of samples drawn before a random generator gives up on
/// connectivity.
pub const MAX_ATTEMPTS: usize = 100;

/// Row sums must equal one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

const CENTRALITY_TOL: f64 = 1e-12;
const CENTRALITY_MAX_ITERS: usize = 10_000;
const TIE_TOL: f64 = 1e-10;

/// Where a network came from. Carried through serialization so a saved
/// network can be regenerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
}

impl Origin {
    fn manual() -> Self {
        Origin {
            generator: "manual".into(),
            params: json!({}),
            seed: None,
        }
    }
}

/// A connected, row-stochastic trust network over `size` individuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDocument", into = "NetworkDocument")]
pub struct SocialNetwork {
    trust: DMatrix<f64>,
    adjacency: Vec<bool>,
    origin: Origin,
}

/// On-disk layout: flat row-major arrays.
#[derive(Serialize, Deserialize)]
struct NetworkDocument {
    size: usize,
    trust: Vec<f64>,
    adjacency: Vec<bool>,
    generator: String,
    params: serde_json::Value,
    seed: Option<u64>,
}

impl From<SocialNetwork> for NetworkDocument {
    fn from(net: SocialNetwork) -> Self {
        let m = net.size();
        let mut trust = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                trust.push(net.trust[(i, j)]);
            }
        }
        NetworkDocument {
            size: m,
            trust,
            adjacency: net.adjacency,
            generator: net.origin.generator,
            params: net.origin.params,
            seed: net.origin.seed,
        }
    }
}

impl TryFrom<NetworkDocument> for SocialNetwork {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        let m = doc.size;
        if doc.trust.len() != m * m || doc.adjacency.len() != m * m {
            return Err(Error::InvalidNetwork(format!(
                "size {m} needs {} trust and adjacency entries, got {} and {}",
                m * m,
                doc.trust.len(),
                doc.adjacency.len()
            )));
        }
        let trust = DMatrix::from_row_slice(m, m, &doc.trust);
        SocialNetwork::from_parts(
            trust,
            doc.adjacency,
            Origin {
                generator: doc.generator,
                params: doc.params,
                seed: doc.seed,
            },
        )
    }
}

impl SocialNetwork {
    /// Builds a network from an explicit trust matrix; edges are the strictly
    /// positive entries.
    pub fn from_trust(trust: DMatrix<f64>) -> Result<Self> {
        let m = trust.nrows();
        let adjacency = (0..m * m).map(|k| trust[(k / m, k % m)] > 0.0).collect();
        Self::from_parts(trust, adjacency, Origin::manual())
    }

    /// Convenience for tests and fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidNetwork("trust matrix must be square".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_trust(DMatrix::from_row_slice(m, m, &flat))
    }

    pub fn from_parts(trust: DMatrix<f64>, adjacency: Vec<bool>, origin: Origin) -> Result<Self> {
        let m = trust.nrows();
        if m == 0 || trust.ncols() != m {
            return Err(Error::InvalidNetwork(format!(
                "trust matrix must be square and non-empty, got {}x{}",
                trust.nrows(),
                trust.ncols()
            )));
        }
        if adjacency.len() != m * m {
            return Err(Error::InvalidNetwork("adjacency has wrong length".into()));
        }
        for i in 0..m {
            let mut sum = 0.0;
            for j in 0..m {
                let w = trust[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "trust[{i}][{j}] = {w} is not a nonnegative number"
                    )));
                }
                if w > 0.0 && !adjacency[i * m + j] {
                    return Err(Error::InvalidNetwork(format!(
                        "trust[{i}][{j}] > 0 on a missing edge"
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidNetwork(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        let net = SocialNetwork {
            trust,
            adjacency,
            origin,
        };
        if !net.is_connected() {
            return Err(Error::InvalidNetwork(
                "underlying undirected graph is disconnected".into(),
            ));
        }
        Ok(net)
    }

    pub fn size(&self) -> usize {
        self.trust.nrows()
    }

    pub fn trust(&self) -> &DMatrix<f64> {
        &self.trust
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.trust[(i, j)]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.size() + j]
    }

    /// Row-major edge mask, self-loops included.
    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// `I - trust`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        DMatrix::identity(self.size(), self.size()) - &self.trust
    }

    /// Number of unordered pairs `{i, j}`, `i != j`, joined in either direction.
    pub fn undirected_edge_count(&self) -> usize {
        let m = self.size();
        let mut count = 0;
        for i in 0..m {
            for j in i + 1..m {
                if self.has_edge(i, j) || self.has_edge(j, i) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Undirected neighbours of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.size())
            .filter(|&j| j != i && (self.has_edge(i, j) || self.has_edge(j, i)))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let m = self.size();
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for j in 0..m {
                if !seen[j] && (self.adjacency[i * m + j] || self.adjacency[j * m + i]) {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == m
    }
}

/// Symmetric boolean graph used while sampling.
struct Skeleton {
    n: usize,
    adj: Vec<bool>,
}

impl Skeleton {
    fn new(n: usize) -> Self {
        Skeleton {
            n,
            adj: vec![false; n * n],
        }
    }

    fn has(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        self.adj[i * self.n + j] = on;
        self.adj[j * self.n + i] = on;
    }

    fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| j != i && self.has(i, j)).count()
    }

    fn connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            for j in 0..self.n {
                if !seen[j] && self.has(i, j) {
                    seen[j] = true;
                    reached += 1;
                    stack.push(j);
                }
            }
        }
        reached == self.n
    }

    /// Adds self-loops, draws directed weights and normalizes rows.
    fn into_network(mut self, rng: &mut ChaCha8Rng, origin: Origin) -> Result<SocialNetwork> {
        let n = self.n;
        for i in 0..n {
            self.set(i, i, true);
        }
        let mut trust = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if self.has(i, j) {
                    let w: f64 = rng.sample(Open01);
                    trust[(i, j)] = w;
                    sum += w;
                }
            }
            for j in 0..n {
                trust[(i, j)] /= sum;
            }
        }
        SocialNetwork::from_parts(trust, self.adj, origin)
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {p} is not in [0, 1]")))
    }
}

/// Draws skeletons until one is connected, then weights it.
fn sample_connected<F>(seed: u64, origin: Origin, mut draw: F) -> Result<SocialNetwork>
where
    F: FnMut(&mut ChaCha8Rng) -> Skeleton,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let skel = draw(&mut rng);
        if skel.connected() {
            return skel.into_network(&mut rng, origin);
        }
    }
    Err(Error::Disconnected {
        attempts: MAX_ATTEMPTS,
    })
}

pub fn gen_erdos_renyi(m: usize, edge_prob: f64, seed: u64) -> Result<SocialNetwork> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {m}")));
    }
    check_prob("edge_prob", edge_prob)?;
    let origin = Origin {
        generator: "erdos_renyi".into(),
        params: json!({ "nodes": m, "edge_prob": edge_prob }),
        seed: Some(seed),
    };
    sample_connected(seed, origin, |rng| {
        let mut skel = Skeleton::new(m);
        for i in 0..m {
            for j in i + 1..m {
                if rng.random::<f64>() < edge_prob {
                    skel.set(i, j, true);
                }
            }
        }
        skel
    })
}

pub fn gen_watts_strogatz(
    m: usize,
    ring_degree: usize,
    rewire_prob: f64,
    seed: u64,
) -> Result<SocialNetwork> {
    if !ring_degree.is_multiple_of(2) || ring_degree >= m {
        return Err(Error::InvalidParameter(format!(
            "ring_degree must be even and below the node count, got {ring_degree} for {m} nodes"
        )));
    }
    check_prob("rewire_prob", rewire_prob)?;
    let origin = Origin {
        generator: "watts_strogatz".into(),
        params: json!({ "nodes": m, "ring_degree": ring_degree, "rewire_prob": rewire_prob }),
        seed: Some(seed),
    };
    let half = ring_degree / 2;
    sample_connected(seed, origin, |rng| {
        let mut skel = Skeleton::new(m);
        for j in 1..=half {
            for u in 0..m {
                skel.set(u, (u + j) % m, true);
            }
        }
        for j in 1..=half {
            for u in 0..m {
                if rng.random::<f64>() >= rewire_prob {
                    continue;
                }
                if skel.degree(u) >= m - 1 {
                    continue;
                }
                let v = (u + j) % m;
                let w = loop {
                    let w = rng.random_range(0..m);
                    if w != u && !skel.has(u, w) {
                        break w;
                    }
                };
                skel.set(u, v, false);
                skel.set(u, w, true);
            }
        }
        skel
    })
}

pub fn gen_sbm(block_sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<SocialNetwork> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "block sizes must be a non-empty list of positive integers".into(),
        ));
    }
    check_prob("p_in", p_in)?;
    check_prob("p_out", p_out)?;
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let m = block.len();
    let origin = Origin {
        generator: "sbm".into(),
        params: json!({ "block_sizes": block_sizes, "p_in": p_in, "p_out": p_out }),
        seed: Some(seed),
    };
    sample_connected(seed, origin, |rng| {
        let mut skel = Skeleton::new(m);
        for i in 0..m {
            for j in i + 1..m {
                let p = if block[i] == block[j] { p_in } else { p_out };
                if rng.random::<f64>() < p {
                    skel.set(i, j, true);
                }
            }
        }
        skel
    })
}

/// Deterministic fixture networks with hand-picked trust weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Archetype {
    /// Hub 0 with `leaves` leaves `1..=leaves`.
    Star { leaves: usize },
    /// Cliques of five (nodes 0-4) and three (5-7) joined only through the
    /// bridge node 8, which touches nodes 0 and 5.
    TwoCliques,
    /// Center 0 with asymmetric trust in nodes 1 and 2.
    ThreeNodeAsymmetric,
}

pub mod two_cliques {
    use std::ops::Range;

    pub const LARGE: Range<usize> = 0..5;
    pub const SMALL: Range<usize> = 5..8;
    pub const BRIDGE: usize = 8;
}

impl Archetype {
    /// Parses `star`, `two_cliques` or `three_node_asymmetric`. Dashes are
    /// accepted in place of underscores.
    pub fn parse(name: &str, leaves: Option<usize>) -> Result<Self> {
        match name.replace('-', "_").as_str() {
            "star" => Ok(Archetype::Star {
                leaves: leaves.ok_or_else(|| {
                    Error::InvalidParameter("star needs a leaf count".into())
                })?,
            }),
            "two_cliques" => Ok(Archetype::TwoCliques),
            "three_node_asymmetric" | "three_node" => Ok(Archetype::ThreeNodeAsymmetric),
            other => Err(Error::InvalidParameter(format!("unknown archetype {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Archetype::Star { .. } => "star",
            Archetype::TwoCliques => "two_cliques",
            Archetype::ThreeNodeAsymmetric => "three_node_asymmetric",
        }
    }
}

/// Self-trust of star leaves and of the two outer nodes of the three-node
/// fixture; the rest of their row goes to the hub or center. With an even
/// split the saturating hub stops being the best target at λ = 1.
pub const PERIPHERAL_SELF_TRUST: f64 = 0.2;

pub fn gen_archetype(kind: Archetype) -> Result<SocialNetwork> {
    let trust = match kind {
        Archetype::Star { leaves } => {
            if leaves < 2 {
                return Err(Error::InvalidParameter(format!(
                    "star needs at least 2 leaves, got {leaves}"
                )));
            }
            let m = leaves + 1;
            let mut t = DMatrix::zeros(m, m);
            for leaf in 1..m {
                t[(0, leaf)] = 1.0 / leaves as f64;
                t[(leaf, leaf)] = PERIPHERAL_SELF_TRUST;
                t[(leaf, 0)] = 1.0 - PERIPHERAL_SELF_TRUST;
            }
            t
        }
        Archetype::TwoCliques => {
            use two_cliques::{BRIDGE, LARGE, SMALL};
            let mut t = DMatrix::zeros(9, 9);
            for clique in [LARGE, SMALL] {
                let contact = clique.start;
                for i in clique.clone() {
                    let mut members: Vec<usize> = clique.clone().collect();
                    if i == contact {
                        members.push(BRIDGE);
                    }
                    let w = 1.0 / members.len() as f64;
                    for j in members {
                        t[(i, j)] = w;
                    }
                }
            }
            for j in [BRIDGE, LARGE.start, SMALL.start] {
                t[(BRIDGE, j)] = 1.0 / 3.0;
            }
            t
        }
        Archetype::ThreeNodeAsymmetric => {
            let (a, c) = (PERIPHERAL_SELF_TRUST, 1.0 - PERIPHERAL_SELF_TRUST);
            DMatrix::from_row_slice(3, 3, &[0.1, 0.7, 0.2, c, a, 0.0, c, 0.0, a])
        }
    };
    let m = trust.nrows();
    let adjacency = (0..m * m).map(|k| trust[(k / m, k % m)] > 0.0).collect();
    let params = match kind {
        Archetype::Star { leaves } => json!({ "leaves": leaves }),
        _ => json!({}),
    };
    SocialNetwork::from_parts(
        trust,
        adjacency,
        Origin {
            generator: kind.name().into(),
            params,
            seed: None,
        },
    )
}

/// L1-normalized eigenvector centrality and its percentile ranks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityVector {
    pub values: Vec<f64>,
    pub percentiles: Vec<f64>,
}

/// Power iteration on `(A + Aᵀ)/2` with self-loops removed.
///
/// Iterates with `A + I` so bipartite graphs (stars, paths, even cycles)
/// converge; the shift leaves the eigenvectors unchanged.
pub fn eigenvector_centrality(net: &SocialNetwork) -> Result<CentralityVector> {
    let m = net.size();
    let t = net.trust();
    let mut a = (t + t.transpose()) * 0.5;
    for i in 0..m {
        a[(i, i)] = 1.0;
    }
    let mut x = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..CENTRALITY_MAX_ITERS {
        for (i, out) in next.iter_mut().enumerate() {
            *out = (0..m).map(|j| a[(i, j)] * x[j]).sum();
        }
        let norm: f64 = next.iter().sum();
        if norm <= 0.0 {
            return Err(Error::InvalidNetwork("centrality iterate vanished".into()));
        }
        next.iter_mut().for_each(|v| *v /= norm);
        let diff: f64 = x.iter().zip(&next).map(|(p, q)| (p - q).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if diff < CENTRALITY_TOL {
            let percentiles = percentile_ranks(&x);
            return Ok(CentralityVector {
                values: x,
                percentiles,
            });
        }
    }
    Err(Error::NotConverged {
        what: "eigenvector centrality",
        iterations: CENTRALITY_MAX_ITERS,
    })
}

/// Percentile of each value, `100 * rank / (n - 1)` with 0-based ranks and
/// near-ties (within 1e-10) sharing their mean rank.
pub fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![100.0];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut pct = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] - values[order[end - 1]] <= TIE_TOL {
            end += 1;
        }
        let mean_rank = (start + end - 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            pct[idx] = 100.0 * mean_rank / (n - 1) as f64;
        }
        start = end;
    }
    pct
}
