//! Comparison graphs, match-up distributions over their edges, and the
//! edge-list text format.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{EloError, Result};
use crate::rng::RngStream;

/// Normalization tolerance for match-up weights.
pub const WEIGHT_TOL: f64 = 1e-9;

/// Unordered pair stored as `(min, max)`.
pub type Edge = (usize, usize);

#[inline]
pub fn canonical(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonGraph {
    n: usize,
    edges: Vec<Edge>,
    index: HashMap<Edge, usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl ComparisonGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Self {
            n,
            edges: Vec::new(),
            index: HashMap::new(),
            adjacency: vec![Vec::new(); n],
        };
        for (i, j) in edges {
            g.push_edge(i, j)?;
        }
        Ok(g)
    }

    fn push_edge(&mut self, i: usize, j: usize) -> Result<()> {
        for v in [i, j] {
            if v >= self.n {
                return Err(EloError::IndexOutOfRange { index: v, n: self.n });
            }
        }
        if i == j {
            return Err(EloError::SamePlayer(i));
        }
        let e = canonical(i, j);
        if self.index.contains_key(&e) {
            return Err(EloError::InvalidParameter(format!("duplicate edge {e:?}")));
        }
        let id = self.edges.len();
        self.index.insert(e, id);
        self.edges.push(e);
        self.adjacency[e.0].push((e.1, id));
        self.adjacency[e.1].push((e.0, id));
        Ok(())
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete graph is simple")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path is simple")
    }

    pub fn star(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (0, i))).expect("star is simple")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<Edge> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((0, n - 1));
        }
        Self::new(n, edges).expect("cycle is simple")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&canonical(i, j)).copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_index(i, j).is_some()
    }

    /// `(neighbour, edge id)` pairs incident to `v`.
    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &(w, _) in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.bfs(0).iter().all(Option::is_some)
    }

    /// Graph diameter, `None` when disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.n {
            for d in self.bfs(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    /// Component label of every vertex, numbered by smallest member.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            for (v, d) in self.bfs(s).into_iter().enumerate() {
                if d.is_some() {
                    label[v] = next;
                }
            }
            next += 1;
        }
        label
    }

    /// Relabels vertices: vertex `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(EloError::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        Self::new(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])))
    }
}

/// Which constraint a set of edge weights is meant to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Weights sum to one: one game per step.
    Sequential,
    /// Every vertex load is at most one: marginals of a matching distribution.
    Substochastic,
}

/// Non-negative weights on the edges of a comparison graph.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchupDistribution {
    graph: ComparisonGraph,
    weights: Vec<f64>,
}

impl MatchupDistribution {
    pub fn new(graph: ComparisonGraph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.num_edges() {
            return Err(EloError::DimensionMismatch {
                expected: graph.num_edges(),
                got: weights.len(),
            });
        }
        for (id, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(EloError::NonFinite(id));
            }
            if w < 0.0 {
                return Err(EloError::NegativeWeight {
                    edge: graph.edge(id),
                    weight: w,
                });
            }
        }
        Ok(Self { graph, weights })
    }

    /// Uniform weights `1/|E|`.
    pub fn uniform(graph: ComparisonGraph) -> Self {
        let m = graph.num_edges();
        let weights = vec![1.0 / m.max(1) as f64; m];
        Self { graph, weights }
    }

    /// Builds from explicit `(i, j, w)` triples; unlisted edges get weight 0.
    pub fn from_triples(graph: ComparisonGraph, triples: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; graph.num_edges()];
        for &(i, j, w) in triples {
            let id = graph
                .edge_index(i, j)
                .ok_or(EloError::EdgeNotInGraph(canonical(i, j)))?;
            weights[id] += w;
        }
        Self::new(graph, weights)
    }

    pub fn graph(&self) -> &ComparisonGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.graph
            .edge_index(i, j)
            .map_or(0.0, |id| self.weights[id])
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `q_k = Σ_{e ∋ k} q_e` for every vertex.
    pub fn vertex_loads(&self) -> Vec<f64> {
        let mut loads = vec![0.0; self.n()];
        for (&(i, j), &w) in self.graph.edges().iter().zip(&self.weights) {
            loads[i] += w;
            loads[j] += w;
        }
        loads
    }

    pub fn max_load(&self) -> f64 {
        self.vertex_loads().into_iter().fold(0.0, f64::max)
    }

    pub fn satisfies(&self, norm: Normalization) -> bool {
        match norm {
            Normalization::Sequential => (self.total() - 1.0).abs() <= WEIGHT_TOL,
            Normalization::Substochastic => self.max_load() <= 1.0 + WEIGHT_TOL,
        }
    }

    /// Rescales so the weights sum to one.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if total <= 0.0 {
            return Err(EloError::NotNormalized { sum: total });
        }
        let weights = self.weights.iter().map(|w| w / total).collect();
        Ok(Self {
            graph: self.graph.clone(),
            weights,
        })
    }

    /// Rescales by `1 / max(1, max_k q_k)` so every vertex load is at most one.
    pub fn scaled_to_feasible(&self) -> Self {
        let s = self.max_load().max(1.0);
        Self {
            graph: self.graph.clone(),
            weights: self.weights.iter().map(|w| w / s).collect(),
        }
    }

    /// Multiplies every weight by the largest factor keeping loads at most one.
    pub fn saturated(&self) -> Self {
        let load = self.max_load();
        let s = if load > 0.0 { 1.0 / load } else { 1.0 };
        Self {
            graph: self.graph.clone(),
            weights: self.weights.iter().map(|w| w * s).collect(),
        }
    }

    pub fn into_parts(self) -> (ComparisonGraph, Vec<f64>) {
        (self.graph, self.weights)
    }
}

/// Categorical sampler over the edges of a sequentially normalized distribution.
#[derive(Clone, Debug)]
pub struct PairSampler {
    edges: Vec<Edge>,
    cumulative: Vec<f64>,
}

impl PairSampler {
    pub fn new(q: &MatchupDistribution) -> Result<Self> {
        let total = q.total();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(EloError::NotNormalized { sum: total });
        }
        let mut acc = 0.0;
        let cumulative = q
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            edges: q.graph().edges().to_vec(),
            cumulative,
        })
    }

    /// Inverse-CDF draw: the first edge whose cumulative weight strictly
    /// exceeds `u · total`.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> Edge {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let u = rng.uniform() * total;
        let mut idx = self.cumulative.partition_point(|&c| c <= u);
        if idx >= self.edges.len() {
            idx = self.edges.len() - 1;
        }
        self.edges[idx]
    }
}

/// Draws one unordered pair from `q`.
pub fn sample_pair(q: &MatchupDistribution, rng: &mut RngStream) -> Result<Edge> {
    Ok(PairSampler::new(q)?.sample(rng))
}

/// Parsed contents of an edge-list file.
#[derive(Clone, Debug)]
pub struct EdgeList {
    pub graph: ComparisonGraph,
    /// Present only when every edge line carried a third column.
    pub weights: Option<Vec<f64>>,
}

impl EdgeList {
    pub fn into_distribution(self) -> Result<MatchupDistribution> {
        match self.weights {
            Some(w) => MatchupDistribution::new(self.graph, w),
            None => Ok(MatchupDistribution::uniform(self.graph)),
        }
    }
}

fn parse_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses `i j [w]` lines, 0-indexed, with `#` comments. Commas are accepted
/// as separators so the `i,j,q` weights CSV parses too. The vertex count is
/// one more than the largest index seen, unless a `# n = N` header raises it.
pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut n = 0usize;
    let mut triples: Vec<(usize, usize, Option<f64>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let (content, comment) = match raw.find('#') {
            Some(p) => (&raw[..p], Some(&raw[p + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            let c = c.trim();
            if let Some(rest) = c.strip_prefix("n") {
                if let Some(v) = rest.trim().strip_prefix('=') {
                    if let Ok(declared) = v.trim().parse::<usize>() {
                        n = n.max(declared);
                    }
                }
            }
        }
        let fields = parse_fields(content);
        if fields.is_empty() {
            continue;
        }
        // header line of the weights CSV
        if fields[0] == "i" {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(EloError::Parse {
                line: line_no,
                msg: format!("expected 2 or 3 fields, got {}", fields.len()),
            });
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>().map_err(|e| EloError::Parse {
                line: line_no,
                msg: format!("bad vertex `{s}`: {e}"),
            })
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => Some(s.parse::<f64>().map_err(|e| EloError::Parse {
                line: line_no,
                msg: format!("bad weight `{s}`: {e}"),
            })?),
            None => None,
        };
        n = n.max(i + 1).max(j + 1);
        triples.push((i, j, w));
    }
    let graph = ComparisonGraph::new(n, triples.iter().map(|&(i, j, _)| (i, j)))?;
    let weights = if !triples.is_empty() && triples.iter().all(|t| t.2.is_some()) {
        Some(triples.iter().map(|t| t.2.unwrap()).collect())
    } else {
        None
    };
    Ok(EdgeList { graph, weights })
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<EdgeList> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// Renders a graph (and optionally weights) in edge-list format.
pub fn format_edge_list(graph: &ComparisonGraph, weights: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n = {}", graph.n());
    for (id, &(i, j)) in graph.edges().iter().enumerate() {
        match weights {
            Some(w) => {
                let _ = writeln!(out, "{i} {j} {}", w[id]);
            }
            None => {
                let _ = writeln!(out, "{i} {j}");
            }
        }
    }
    out
}

pub fn write_edge_list(
    path: impl AsRef<Path>,
    graph: &ComparisonGraph,
    weights: Option<&[f64]>,
) -> Result<()> {
    std::fs::write(path, format_edge_list(graph, weights))?;
    Ok(())
}
