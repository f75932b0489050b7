use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{EloError, Result};
use crate::graph::{ComparisonGraph, Edge};
use crate::rng::RngStream;

/// Attempts allowed when a random generator must produce a connected graph.
pub const RESAMPLE_BUDGET: usize = 100;

/// Graph families used by the experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Dumbbell {
        clique_size: usize,
        k: usize,
    },
    Pyramidal {
        n1: usize,
        n2: usize,
        n3: usize,
        p: f64,
        seed: u64,
        /// Cross edges per cut; defaults to `⌈√(n_i n_{i+1}) / 4⌉`.
        #[serde(default)]
        cut: Option<usize>,
    },
    ErdosRenyiGiant {
        n: usize,
        p: f64,
        seed: u64,
    },
    Path {
        n: usize,
    },
    Star {
        n: usize,
    },
    Complete {
        n: usize,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<ComparisonGraph> {
        match *self {
            GraphSpec::Dumbbell { clique_size, k } => make_dumbbell(clique_size, k),
            GraphSpec::Pyramidal {
                n1,
                n2,
                n3,
                p,
                seed,
                cut,
            } => make_pyramidal_with_cut(n1, n2, n3, p, seed, cut),
            GraphSpec::ErdosRenyiGiant { n, p, seed } => erdos_renyi_giant(n, p, seed),
            GraphSpec::Path { n } => Ok(ComparisonGraph::path(n)),
            GraphSpec::Star { n } => Ok(ComparisonGraph::star(n)),
            GraphSpec::Complete { n } => Ok(ComparisonGraph::complete(n)),
        }
    }
}

/// Two cliques on `clique_size` vertices; vertex `i` of the first is joined
/// to vertex `i` of the second for `i < k`.
pub fn make_dumbbell(clique_size: usize, k: usize) -> Result<ComparisonGraph> {
    if k == 0 || k > clique_size {
        return Err(EloError::InvalidK { k, clique_size });
    }
    let c = clique_size;
    let mut edges = Vec::with_capacity(c * (c - 1) + k);
    for off in [0, c] {
        for i in 0..c {
            for j in i + 1..c {
                edges.push((off + i, off + j));
            }
        }
    }
    edges.extend((0..k).map(|i| (i, c + i)));
    ComparisonGraph::new(2 * c, edges)
}

fn gnp_edges(offset: usize, n: usize, p: f64, rng: &mut RngStream, out: &mut Vec<Edge>) {
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p {
                out.push((offset + i, offset + j));
            }
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(EloError::InvalidParameter(format!("edge probability must lie in (0, 1], got {p}")))
    }
}

fn cross_edges(a: usize, na: usize, b: usize, nb: usize, count: usize, rng: &mut RngStream, out: &mut Vec<Edge>) {
    let count = count.min(na * nb);
    let mut picked = HashSet::with_capacity(count);
    while picked.len() < count {
        picked.insert((a + rng.below(na), b + rng.below(nb)));
    }
    let mut picked: Vec<Edge> = picked.into_iter().collect();
    picked.sort_unstable();
    out.extend(picked);
}

/// Default cross-edge count between blocks of sizes `a` and `b`.
pub fn default_cut(a: usize, b: usize) -> usize {
    ((a as f64 * b as f64).sqrt() / 4.0).ceil() as usize
}

/// Three `G(n_i, p)` blocks chained by two sparse random cuts.
pub fn make_pyramidal(n1: usize, n2: usize, n3: usize, p: f64, seed: u64) -> Result<ComparisonGraph> {
    make_pyramidal_with_cut(n1, n2, n3, p, seed, None)
}

pub fn make_pyramidal_with_cut(
    n1: usize,
    n2: usize,
    n3: usize,
    p: f64,
    seed: u64,
    cut: Option<usize>,
) -> Result<ComparisonGraph> {
    check_p(p)?;
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(EloError::InvalidParameter("block sizes must be positive".into()));
    }
    let mut rng = RngStream::new(seed, 0);
    let n = n1 + n2 + n3;
    for _ in 0..RESAMPLE_BUDGET {
        let mut edges = Vec::new();
        gnp_edges(0, n1, p, &mut rng, &mut edges);
        gnp_edges(n1, n2, p, &mut rng, &mut edges);
        gnp_edges(n1 + n2, n3, p, &mut rng, &mut edges);
        let c12 = cut.unwrap_or_else(|| default_cut(n1, n2));
        let c23 = cut.unwrap_or_else(|| default_cut(n2, n3));
        cross_edges(0, n1, n1, n2, c12, &mut rng, &mut edges);
        cross_edges(n1, n2, n1 + n2, n3, c23, &mut rng, &mut edges);
        let g = ComparisonGraph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(EloError::Disconnected)
}

/// Largest connected component of `G(n, p)`, relabeled to `0..size` in
/// vertex order.
pub fn erdos_renyi_giant(n: usize, p: f64, seed: u64) -> Result<ComparisonGraph> {
    check_p(p)?;
    let mut rng = RngStream::new(seed, 0);
    let mut edges = Vec::new();
    gnp_edges(0, n, p, &mut rng, &mut edges);
    let g = ComparisonGraph::new(n, edges)?;
    let labels = g.components();
    let mut sizes = vec![0usize; n];
    for &l in &labels {
        sizes[l] += 1;
    }
    // max_by_key keeps the last maximum; reverse to prefer the smallest label
    let giant = (0..n).rev().max_by_key(|&l| sizes[l]).unwrap_or(0);
    let mut index = vec![usize::MAX; n];
    let mut size = 0;
    for v in 0..n {
        if labels[v] == giant {
            index[v] = size;
            size += 1;
        }
    }
    ComparisonGraph::new(
        size,
        g.edges()
            .iter()
            .filter(|&&(i, _)| labels[i] == giant)
            .map(|&(i, j)| (index[i], index[j])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dumbbell_counts() {
        let g = make_dumbbell(20, 1).unwrap();
        assert_eq!((g.n(), g.num_edges()), (40, 381));
        assert_eq!(make_dumbbell(20, 20).unwrap().num_edges(), 400);
        let small = make_dumbbell(2, 1).unwrap();
        assert_eq!(small.edges(), &[(0, 1), (2, 3), (0, 2)]);
        assert!(matches!(make_dumbbell(3, 4), Err(EloError::InvalidK { k: 4, clique_size: 3 })));
        assert!(make_dumbbell(3, 0).is_err());
    }

    #[test]
    fn pyramidal_sizes() {
        let g = make_pyramidal(64, 32, 16, 0.5, 1).unwrap();
        assert_eq!(g.n(), 112);
        assert!(g.is_connected());
        let g = make_pyramidal(4, 2, 2, 1.0, 3).unwrap();
        // 6 + 1 + 1 clique edges, ⌈√8/4⌉ = 1 and ⌈√4/4⌉ = 1 cross edges
        assert_eq!(g.num_edges(), 10);
        assert!(g.is_connected());
        assert_eq!(make_pyramidal(4, 2, 2, 1e-9, 3), Err(EloError::Disconnected));
        assert!(make_pyramidal(4, 2, 2, 0.0, 3).is_err());
    }

    #[test]
    fn pyramidal_is_seeded() {
        assert_eq!(make_pyramidal(10, 8, 6, 0.4, 9).unwrap(), make_pyramidal(10, 8, 6, 0.4, 9).unwrap());
    }

    #[test]
    fn giant_component_is_connected() {
        let g = erdos_renyi_giant(100, 0.02, 5).unwrap();
        assert!(g.is_connected());
        assert!(g.n() > 10 && g.n() <= 100);
        assert_eq!(erdos_renyi_giant(30, 1.0, 0).unwrap().num_edges(), 435);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec: GraphSpec = serde_json::from_str(r#"{"kind":"dumbbell","clique_size":20,"k":1}"#).unwrap();
        assert_eq!(spec, GraphSpec::Dumbbell { clique_size: 20, k: 1 });
        assert_eq!(spec.build().unwrap().n(), 40);
        let s = serde_json::to_string(&GraphSpec::Star { n: 5 }).unwrap();
        assert_eq!(s, r#"{"kind":"star","n":5}"#);
        assert_eq!(GraphSpec::Star { n: 5 }.build().unwrap().num_edges(), 4);
        assert_eq!(GraphSpec::Path { n: 5 }.build().unwrap().num_edges(), 4);
    }
}
