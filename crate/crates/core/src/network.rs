//! Graphs, gossip matchings and the random-walk view of state swapping.
//!
//! Nodes are 0-based throughout. A matching is stored as an involutive
//! permutation `partner`, with `partner[n] == n` meaning a self-loop.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GikfError, Result};
use crate::seed;

/// Default number of draws used to estimate the mean matrix of a
/// procedural distribution.
pub const DEFAULT_MEAN_SAMPLES: usize = 100_000;

/// Seed used by [`GossipDistribution::mean_matrix`] for procedural
/// distributions, so the estimate is reproducible.
pub const MEAN_ESTIMATE_SEED: u64 = 0x5EED_AB4A;

/// Undirected communication graph. Every node may always talk to itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<bool>>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(GikfError::InvalidGraph("graph has no nodes".into()));
        }
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adj.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GikfError::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            adj[a][b] = true;
            adj[b][a] = true;
        }
        Ok(Graph { adj })
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.adj.len() && b < self.adj.len() && self.adj[a][b]
    }

    /// Non-loop edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_nodes();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.adj[a][b])
            .collect()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.num_nodes();
        DMatrix::from_fn(n, n, |i, j| if self.adj[i][j] { 1.0 } else { 0.0 })
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.adj[u][v] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A symmetric 0/1 matrix with exactly one 1 per row, stored as an
/// involution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Matching {
    partner: Vec<usize>,
}

impl Matching {
    pub fn new(partner: Vec<usize>) -> Result<Self> {
        let n = partner.len();
        if n == 0 {
            return Err(GikfError::InvalidMatching("empty matching".into()));
        }
        for (i, &p) in partner.iter().enumerate() {
            if p >= n {
                return Err(GikfError::InvalidMatching(format!(
                    "partner {p} of node {i} outside 0..{n}"
                )));
            }
            if partner[p] != i {
                return Err(GikfError::InvalidMatching(format!(
                    "not an involution: {i} -> {p} -> {}",
                    partner[p]
                )));
            }
        }
        Ok(Matching { partner })
    }

    pub fn identity(n: usize) -> Self {
        Matching {
            partner: (0..n).collect(),
        }
    }

    /// Matching of `n` nodes where the listed pairs swap and all other
    /// nodes keep a self-loop.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut partner: Vec<usize> = (0..n).collect();
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(GikfError::InvalidMatching(format!(
                    "pair ({a}, {b}) outside 0..{n}"
                )));
            }
            if partner[a] != a || partner[b] != b {
                return Err(GikfError::InvalidMatching(format!(
                    "node in pair ({a}, {b}) already matched"
                )));
            }
            partner[a] = b;
            partner[b] = a;
        }
        Ok(Matching { partner })
    }

    pub fn num_nodes(&self) -> usize {
        self.partner.len()
    }

    /// The node that `n` exchanges state with (`n` itself for a self-loop).
    pub fn neighbor(&self, n: usize) -> usize {
        self.partner[n]
    }

    pub fn partners(&self) -> &[usize] {
        &self.partner
    }

    pub fn is_identity(&self) -> bool {
        self.partner.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn respects(&self, graph: &Graph) -> bool {
        self.num_nodes() == graph.num_nodes()
            && self
                .partner
                .iter()
                .enumerate()
                .all(|(i, &p)| graph.has_edge(i, p))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.num_nodes();
        DMatrix::from_fn(n, n, |i, j| if self.partner[i] == j { 1.0 } else { 0.0 })
    }

    /// Compact textual id, e.g. `1-0-2` for a swap of nodes 0 and 1.
    pub fn id(&self) -> String {
        self.partner
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl TryFrom<Vec<usize>> for Matching {
    type Error = GikfError;

    fn try_from(partner: Vec<usize>) -> Result<Self> {
        Matching::new(partner)
    }
}

impl From<Matching> for Vec<usize> {
    fn from(m: Matching) -> Self {
        m.partner
    }
}

pub fn neighbor(a: &Matching, n: usize) -> usize {
    a.neighbor(n)
}

/// Moves every particle across its current node's matched edge:
/// `p_n(t) = →(p_n(t-1), t)`.
pub fn advance_particles(positions: &[usize], a: &Matching) -> Vec<usize> {
    positions.iter().map(|&p| a.neighbor(p)).collect()
}

/// Initial particle positions `p_n(0) = n`.
pub fn initial_positions(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Distribution of the i.i.d. matchings `A(t)`.
#[derive(Debug, Clone)]
pub enum GossipDistribution {
    /// Enumerated support with probabilities.
    Explicit {
        graph: Graph,
        support: Vec<Matching>,
        weights: Vec<f64>,
        cumulative: Vec<f64>,
    },
    /// With probability `1 - p_gossip` nobody talks; otherwise a maximal
    /// matching is grown greedily over a uniformly shuffled edge list.
    Procedural { graph: Graph, p_gossip: f64 },
}

impl GossipDistribution {
    pub fn explicit(graph: Graph, support: Vec<Matching>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(GikfError::InvalidDistribution(format!(
                "{} support entries but {} weights",
                support.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(GikfError::InvalidDistribution(format!(
                "weight {w} is not a nonnegative number"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GikfError::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        for (k, m) in support.iter().enumerate() {
            if !m.respects(&graph) {
                return Err(GikfError::InvalidDistribution(format!(
                    "support entry {k} ({}) uses an edge outside the graph",
                    m.id()
                )));
            }
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(GossipDistribution::Explicit {
            graph,
            support,
            weights,
            cumulative,
        })
    }

    /// Point mass on a single matching.
    pub fn point_mass(graph: Graph, matching: Matching) -> Result<Self> {
        Self::explicit(graph, vec![matching], vec![1.0])
    }

    pub fn graph(&self) -> &Graph {
        match self {
            GossipDistribution::Explicit { graph, .. } => graph,
            GossipDistribution::Procedural { graph, .. } => graph,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.graph().num_nodes()
    }

    /// Draws one matching.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matching {
        match self {
            GossipDistribution::Explicit {
                support,
                cumulative,
                ..
            } => {
                if support.len() == 1 {
                    return support[0].clone();
                }
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let k = cumulative.partition_point(|&c| c <= u);
                support[k.min(support.len() - 1)].clone()
            }
            GossipDistribution::Procedural { graph, p_gossip } => {
                let n = graph.num_nodes();
                if *p_gossip <= 0.0 || !(rng.random::<f64>() < *p_gossip) {
                    return Matching::identity(n);
                }
                let mut edges = graph.edges();
                edges.shuffle(rng);
                let mut partner: Vec<usize> = (0..n).collect();
                for (a, b) in edges {
                    if partner[a] == a && partner[b] == b {
                        partner[a] = b;
                        partner[b] = a;
                    }
                }
                Matching { partner }
            }
        }
    }

    /// The mean matrix `Ā = E[A(t)]`: exact for explicit distributions,
    /// a reproducible Monte-Carlo estimate with [`DEFAULT_MEAN_SAMPLES`]
    /// draws for procedural ones.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        match self {
            GossipDistribution::Explicit {
                support, weights, ..
            } => {
                let n = self.num_nodes();
                let mut abar = DMatrix::zeros(n, n);
                for (m, &w) in support.iter().zip(weights) {
                    for (i, &p) in m.partner.iter().enumerate() {
                        abar[(i, p)] += w;
                    }
                }
                abar
            }
            GossipDistribution::Procedural { .. } => {
                let mut rng = seed::stream_rng(MEAN_ESTIMATE_SEED, seed::MATCHING_STREAM);
                estimate_mean_matrix(self, DEFAULT_MEAN_SAMPLES, &mut rng)
            }
        }
    }
}

pub fn mean_matrix(dist: &GossipDistribution) -> DMatrix<f64> {
    dist.mean_matrix()
}

pub fn sample_matching<R: Rng + ?Sized>(dist: &GossipDistribution, rng: &mut R) -> Matching {
    dist.sample(rng)
}

/// Monte-Carlo estimate of `Ā` from `samples` draws. The estimate is
/// symmetrized, which is exact in expectation.
pub fn estimate_mean_matrix<R: Rng + ?Sized>(
    dist: &GossipDistribution,
    samples: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let n = dist.num_nodes();
    let mut counts = DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        let m = dist.sample(rng);
        for (i, &p) in m.partner.iter().enumerate() {
            counts[(i, p)] += 1.0;
        }
    }
    let est = counts / samples.max(1) as f64;
    crate::matrix::symmetrize(&est)
}

/// The procedural distribution used when a configuration does not
/// enumerate one.
pub fn default_matching_distribution(graph: Graph, p_gossip: f64) -> Result<GossipDistribution> {
    if !(0.0..=1.0).contains(&p_gossip) {
        return Err(GikfError::InvalidDistribution(format!(
            "p_gossip = {p_gossip} outside [0, 1]"
        )));
    }
    if !graph.is_connected() {
        return Err(GikfError::InvalidGraph("graph is disconnected".into()));
    }
    if p_gossip == 0.0 {
        let n = graph.num_nodes();
        return GossipDistribution::point_mass(graph, Matching::identity(n));
    }
    Ok(GossipDistribution::Procedural { graph, p_gossip })
}

/// Irreducibility and aperiodicity of a stochastic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub irreducible: bool,
    pub aperiodic: bool,
}

impl Connectivity {
    pub fn holds(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

/// Irreducibility via strongly connected components of the positivity
/// pattern; aperiodicity holds when every component has period 1, where
/// the period is the gcd of `level(u) + 1 - level(v)` over the
/// component's edges for BFS levels from any root.
pub fn check_connectivity(abar: &DMatrix<f64>) -> Connectivity {
    let n = abar.nrows();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| abar[(i, j)] > 0.0).collect())
        .collect();
    let reach: Vec<Vec<bool>> = (0..n).map(|s| reachable(&succ, s)).collect();

    let mut comp = vec![usize::MAX; n];
    let mut components = Vec::new();
    for u in 0..n {
        if comp[u] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&v| reach[u][v] && reach[v][u]).collect();
        for &v in &members {
            comp[v] = components.len();
        }
        components.push(members);
    }

    let irreducible = components.len() == 1;
    let aperiodic = components
        .iter()
        .enumerate()
        .all(|(c, members)| component_period(&succ, &comp, c, members[0]) == 1);
    Connectivity {
        irreducible,
        aperiodic,
    }
}

fn reachable(succ: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; succ.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// Period of component `c`; 0 for a single node without a self-loop.
fn component_period(succ: &[Vec<usize>], comp: &[usize], c: usize, root: usize) -> u64 {
    let mut level = vec![i64::MIN; succ.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut g = 0u64;
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if comp[v] != c {
                continue;
            }
            if level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1 - level[v]).unsigned_abs());
            }
        }
    }
    g
}

/// Row-wise sampler for a stochastic matrix viewed as a Markov kernel.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    matrix: DMatrix<f64>,
    cumulative: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(GikfError::DimensionMismatch {
                context: "transition kernel",
                expected: "non-empty square matrix".into(),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let mut cumulative = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let p = matrix[(i, j)];
                if !(p >= 0.0) {
                    return Err(GikfError::InvalidArgument(format!(
                        "negative transition probability at ({i}, {j})"
                    )));
                }
                acc += p;
                row.push(acc);
            }
            if (acc - 1.0).abs() > 1e-9 {
                return Err(GikfError::InvalidArgument(format!(
                    "row {i} of the transition matrix sums to {acc}"
                )));
            }
            cumulative.push(row);
        }
        Ok(TransitionKernel { matrix, cumulative })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn num_states(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[from];
        let u: f64 = rng.random::<f64>() * row[row.len() - 1];
        row.partition_point(|&c| c <= u).min(row.len() - 1)
    }
}

/// The i.i.d. matching sequence `A(0), A(1), …, A(T-1)` driving a run of
/// horizon `T`, with the convention `A(0) = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    pub matchings: Vec<Matching>,
    pub seed: u64,
}

impl NetworkTrace {
    /// Draws a trace from the matching stream of `seed`.
    pub fn sample(dist: &GossipDistribution, horizon: usize, seed: u64) -> Self {
        let mut rng = seed::stream_rng(seed, seed::MATCHING_STREAM);
        let n = dist.num_nodes();
        let matchings = (0..horizon)
            .map(|t| {
                if t == 0 {
                    Matching::identity(n)
                } else {
                    dist.sample(&mut rng)
                }
            })
            .collect();
        NetworkTrace { matchings, seed }
    }

    pub fn horizon(&self) -> usize {
        self.matchings.len()
    }

    /// Particle positions `π_t` for `t = 0..T`, where entry `t` is the
    /// position vector after applying `A(t)`.
    pub fn permutations(&self) -> Vec<Vec<usize>> {
        let mut pos = self
            .matchings
            .first()
            .map(|m| initial_positions(m.num_nodes()))
            .unwrap_or_default();
        self.matchings
            .iter()
            .map(|a| {
                pos = advance_particles(&pos, a);
                pos.clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;

    fn path3_uniform() -> GossipDistribution {
        let g = Graph::path(3).unwrap();
        let support = vec![
            Matching::identity(3),
            Matching::from_pairs(3, &[(0, 1)]).unwrap(),
            Matching::from_pairs(3, &[(1, 2)]).unwrap(),
        ];
        GossipDistribution::explicit(g, support, vec![1.0 / 3.0; 3]).unwrap()
    }

    #[test]
    fn mean_matrix_examples() {
        let g = Graph::complete(4).unwrap();
        let d = GossipDistribution::point_mass(g, Matching::identity(4)).unwrap();
        assert_eq!(d.mean_matrix(), DMatrix::identity(4, 4));

        let g2 = Graph::complete(2).unwrap();
        let d2 = GossipDistribution::explicit(
            g2,
            vec![Matching::identity(2), Matching::from_pairs(2, &[(0, 1)]).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(d2.mean_matrix(), DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn path3_mean_matrix_matches_enumeration() {
        // Average of the three permutation matrices, entry by entry.
        let mats = [
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        ];
        let abar = path3_uniform().mean_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = mats.iter().map(|m| m[i][j]).sum::<f64>() / 3.0;
                assert!((abar[(i, j)] - expect).abs() < 1e-15);
            }
        }
        assert!((abar[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((abar[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(abar[(0, 2)], 0.0);
    }

    #[test]
    fn connectivity_examples() {
        let c = check_connectivity(&DMatrix::identity(3, 3));
        assert!(!c.irreducible);
        assert!(c.aperiodic);

        let c = check_connectivity(&DMatrix::from_element(2, 2, 0.5));
        assert!(c.irreducible && c.aperiodic);

        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = check_connectivity(&flip);
        assert!(c.irreducible);
        assert!(!c.aperiodic);

        // 3-cycle without self-loops has period 3; adding one loop breaks it.
        let cyc = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(
            check_connectivity(&cyc),
            Connectivity {
                irreducible: true,
                aperiodic: false
            }
        );
        let mut cyc2 = cyc * 0.5;
        cyc2[(0, 0)] = 0.5;
        cyc2[(1, 1)] = 0.5;
        cyc2[(2, 2)] = 0.5;
        assert!(check_connectivity(&cyc2).holds());
    }

    #[test]
    fn matching_validation() {
        assert!(Matching::new(vec![1, 2, 0]).is_err());
        assert!(Matching::new(vec![1, 0, 2]).is_ok());
        assert!(Matching::from_pairs(3, &[(0, 1), (1, 2)]).is_err());
        let g = Graph::path(3).unwrap();
        assert!(!Matching::from_pairs(3, &[(0, 2)]).unwrap().respects(&g));
        let bad = GossipDistribution::explicit(
            g.clone(),
            vec![Matching::from_pairs(3, &[(0, 2)]).unwrap()],
            vec![1.0],
        );
        assert!(bad.is_err());
        let bad_w = GossipDistribution::explicit(g, vec![Matching::identity(3)], vec![0.9]);
        assert!(bad_w.is_err());
    }

    #[test]
    fn neighbor_is_involution() {
        let m = Matching::from_pairs(5, &[(0, 3), (1, 4)]).unwrap();
        for n in 0..5 {
            assert_eq!(m.neighbor(m.neighbor(n)), n);
        }
        assert_eq!(Matching::identity(4).neighbor(2), 2);
        assert_eq!(neighbor(&Matching::from_pairs(2, &[(0, 1)]).unwrap(), 0), 1);
    }

    #[test]
    fn particles_advance() {
        assert_eq!(advance_particles(&[0, 1, 2], &Matching::identity(3)), vec![0, 1, 2]);
        let swap = Matching::from_pairs(2, &[(0, 1)]).unwrap();
        assert_eq!(advance_particles(&[0, 1], &swap), vec![1, 0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = path3_uniform();
        let a: Vec<_> = {
            let mut r = stream_rng(9, 0);
            (0..50).map(|_| d.sample(&mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = stream_rng(9, 0);
            (0..50).map(|_| d.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
        let single = GossipDistribution::point_mass(Graph::path(3).unwrap(), Matching::identity(3)).unwrap();
        let mut r = stream_rng(1, 0);
        assert!((0..100).all(|_| single.sample(&mut r).is_identity()));
    }

    #[test]
    fn uniform_sampling_frequencies() {
        // Binomial(n, 1/3) standard deviation.
        let d = path3_uniform();
        let n = 100_000;
        let mut counts = [0usize; 3];
        let mut rng = stream_rng(3, 0);
        let GossipDistribution::Explicit { support, .. } = &d else { unreachable!() };
        for _ in 0..n {
            let m = d.sample(&mut rng);
            counts[support.iter().position(|s| *s == m).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn default_distribution_examples() {
        let g = Graph::path(3).unwrap();
        let d0 = default_matching_distribution(g.clone(), 0.0).unwrap();
        assert_eq!(d0.mean_matrix(), DMatrix::identity(3, 3));

        let k2 = default_matching_distribution(Graph::complete(2).unwrap(), 1.0).unwrap();
        let mut rng = stream_rng(5, 0);
        let swap = Matching::from_pairs(2, &[(0, 1)]).unwrap();
        assert!((0..200).all(|_| k2.sample(&mut rng) == swap));

        let d1 = default_matching_distribution(g, 1.0).unwrap();
        let mut rng = stream_rng(11, 0);
        let est = estimate_mean_matrix(&d1, 100_000, &mut rng);
        assert!(check_connectivity(&est).holds());
        // Every sample is a maximal matching on the path: one of the two edges.
        assert!(est[(1, 1)] < 1e-12);

        let disconnected = Graph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(default_matching_distribution(disconnected, 0.5).is_err());
        assert!(default_matching_distribution(Graph::path(2).unwrap(), 1.5).is_err());
    }

    #[test]
    fn trace_starts_with_identity_and_permutations_stay_bijective() {
        let d = default_matching_distribution(Graph::cycle(6).unwrap(), 0.8).unwrap();
        let trace = NetworkTrace::sample(&d, 200, 21);
        assert!(trace.matchings[0].is_identity());
        assert!(trace.matchings.iter().all(|m| m.respects(d.graph())));
        for pi in trace.permutations() {
            let mut sorted = pi.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn kernel_rejects_non_stochastic_rows() {
        assert!(TransitionKernel::new(DMatrix::from_element(2, 2, 0.4)).is_err());
        let k = TransitionKernel::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let mut rng = stream_rng(0, 0);
        assert_eq!(k.step(0, &mut rng), 1);
        assert_eq!(k.step(1, &mut rng), 0);
    }
}
