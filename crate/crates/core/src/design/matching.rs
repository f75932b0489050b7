//! Distributions over matchings, built from substochastic edge weights.
//!
//! The construction completes the weights to a doubly stochastic matrix,
//! decomposes it into permutations, splits every cycle of a permutation into
//! matchings, and picks one of them per cycle. Selection probabilities are
//! chosen so that every edge appears with probability exactly `q_e / 3`:
//!
//! - a cycle `v_1 … v_k` with `k ≥ 3` contributes each edge through both
//!   `σ(i) = j` and `σ(j) = i` across the decomposition, so each of its three
//!   matchings is chosen with probability `1/6` (idle otherwise);
//! - a 2-cycle `(i j)` accounts for both entries at once, so its single edge
//!   is chosen with probability `1/3`.

use std::collections::HashMap;

use serde::Serialize;

use super::bvn::{birkhoff_von_neumann, stochastic_completion, BvnDecomposition, Permutation};
use crate::error::{EloError, Result};
use crate::graph::{canonical, ComparisonGraph, Edge, MatchupDistribution};
use crate::rng::RngStream;

pub type Matching = Vec<Edge>;

/// Largest vertex count for which atoms are enumerated explicitly.
pub const ATOM_ENUMERATION_LIMIT: usize = 12;

/// Matchings induced by one cycle of a permutation. Probabilities of
/// `options` sum to at most one; the remainder is the idle choice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleMatchings {
    pub vertices: Vec<usize>,
    pub options: Vec<(Matching, f64)>,
}

impl CycleMatchings {
    #[inline]
    fn pick(&self, u: f64) -> Option<&Matching> {
        let mut acc = 0.0;
        for (m, p) in &self.options {
            acc += p;
            if u < acc {
                return Some(m);
            }
        }
        None
    }
}

fn cycles_of(sigma: &[usize]) -> Vec<Vec<usize>> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            cycle.push(v);
            v = sigma[v];
        }
        out.push(cycle);
    }
    out
}

/// Splits the non-trivial cycles of `sigma` into matchings on `graph`.
///
/// For a cycle `v_1 … v_k`: `A` holds `{v_i, v_{i+1}}` for odd `i ≤ k-1`,
/// `B` the even ones, and `C` the closing edge `{v_k, v_1}`. Fixed points are
/// dropped.
pub fn permutation_to_matchings(
    sigma: &[usize],
    graph: &ComparisonGraph,
) -> Result<Vec<CycleMatchings>> {
    let n = graph.n();
    if sigma.len() != n {
        return Err(EloError::DimensionMismatch {
            expected: n,
            got: sigma.len(),
        });
    }
    let mut hit = vec![false; n];
    for &s in sigma {
        if s >= n || hit[s] {
            return Err(EloError::InvalidParameter(format!("{sigma:?} is not a permutation")));
        }
        hit[s] = true;
    }
    let mut out = Vec::new();
    for cycle in cycles_of(sigma) {
        let k = cycle.len();
        if k < 2 {
            continue;
        }
        for w in 0..k {
            let (a, b) = (cycle[w], cycle[(w + 1) % k]);
            if !graph.has_edge(a, b) {
                return Err(EloError::EdgeNotInGraph(canonical(a, b)));
            }
        }
        let options = if k == 2 {
            vec![(vec![canonical(cycle[0], cycle[1])], 1.0 / 3.0)]
        } else {
            // 0-based position p corresponds to the 1-based index p + 1.
            let a: Matching = (0..k - 1)
                .step_by(2)
                .map(|p| canonical(cycle[p], cycle[p + 1]))
                .collect();
            let b: Matching = (1..k - 1)
                .step_by(2)
                .map(|p| canonical(cycle[p], cycle[p + 1]))
                .collect();
            let c: Matching = vec![canonical(cycle[k - 1], cycle[0])];
            vec![(a, 1.0 / 6.0), (b, 1.0 / 6.0), (c, 1.0 / 6.0)]
        };
        out.push(CycleMatchings {
            vertices: cycle,
            options,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
enum Source {
    Atoms {
        atoms: Vec<(Matching, f64)>,
        cumulative: Vec<f64>,
    },
    Permutations {
        decomposition: BvnDecomposition,
        cycles: Vec<Vec<CycleMatchings>>,
        cumulative: Vec<f64>,
    },
}

/// A sampleable distribution over matchings of a comparison graph.
#[derive(Clone, Debug)]
pub struct MatchingDistribution {
    graph: ComparisonGraph,
    source: Source,
    marginals: Vec<f64>,
}

fn cumulative(ps: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    ps.map(|p| {
        acc += p;
        acc
    })
    .collect()
}

fn pick_index(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap_or(&1.0);
    cumulative
        .partition_point(|&c| c <= u * total)
        .min(cumulative.len().saturating_sub(1))
}

fn check_matching(graph: &ComparisonGraph, m: &[Edge]) -> Result<()> {
    let mut used = vec![false; graph.n()];
    for &(i, j) in m {
        if !graph.has_edge(i, j) {
            return Err(EloError::EdgeNotInGraph(canonical(i, j)));
        }
        for v in [i, j] {
            if used[v] {
                return Err(EloError::NotAMatching(v));
            }
            used[v] = true;
        }
    }
    Ok(())
}

impl MatchingDistribution {
    /// Explicit list of `(matching, probability)` atoms.
    pub fn from_atoms(graph: ComparisonGraph, atoms: Vec<(Matching, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 || atoms.iter().any(|a| a.1 < 0.0) {
            return Err(EloError::NotNormalized { sum: total });
        }
        let mut marginals = vec![0.0; graph.num_edges()];
        let atoms: Vec<(Matching, f64)> = atoms
            .into_iter()
            .map(|(m, p)| (m.into_iter().map(|(i, j)| canonical(i, j)).collect::<Matching>(), p))
            .collect();
        for (m, p) in &atoms {
            check_matching(&graph, m)?;
            for &(i, j) in m {
                marginals[graph.edge_index(i, j).unwrap()] += p;
            }
        }
        let cumulative = cumulative(atoms.iter().map(|a| a.1));
        Ok(Self {
            graph,
            source: Source::Atoms { atoms, cumulative },
            marginals,
        })
    }

    /// A convex combination of permutations, each split into cycle matchings.
    pub fn from_decomposition(graph: ComparisonGraph, decomposition: BvnDecomposition) -> Result<Self> {
        let cycles = decomposition
            .permutations
            .iter()
            .map(|s| permutation_to_matchings(s, &graph))
            .collect::<Result<Vec<_>>>()?;
        let mut marginals = vec![0.0; graph.num_edges()];
        for (alpha, perm_cycles) in decomposition.coefficients.iter().zip(&cycles) {
            for cm in perm_cycles {
                for (m, p) in &cm.options {
                    for &(i, j) in m {
                        marginals[graph.edge_index(i, j).unwrap()] += alpha * p;
                    }
                }
            }
        }
        let cumulative = cumulative(decomposition.coefficients.iter().copied());
        Ok(Self {
            graph,
            source: Source::Permutations {
                decomposition,
                cycles,
                cumulative,
            },
            marginals,
        })
    }

    pub fn from_permutations(
        graph: ComparisonGraph,
        coefficients: Vec<f64>,
        permutations: Vec<Permutation>,
    ) -> Result<Self> {
        let total: f64 = coefficients.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EloError::NotNormalized { sum: total });
        }
        Self::from_decomposition(
            graph,
            BvnDecomposition {
                coefficients,
                permutations,
            },
        )
    }

    pub fn graph(&self) -> &ComparisonGraph {
        &self.graph
    }

    /// Edge marginals `q_e = P[e ∈ S]`, indexed like the graph's edges.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    /// The marginals as a (substochastic) match-up distribution.
    pub fn marginal_distribution(&self) -> MatchupDistribution {
        MatchupDistribution::new(self.graph.clone(), self.marginals.clone())
            .expect("marginals are non-negative")
    }

    /// Expected number of games per round, `N = Σ_e q_e`.
    pub fn mean_size(&self) -> f64 {
        self.marginals.iter().sum()
    }

    pub fn decomposition(&self) -> Option<&BvnDecomposition> {
        match &self.source {
            Source::Permutations { decomposition, .. } => Some(decomposition),
            Source::Atoms { .. } => None,
        }
    }

    pub fn cycle_structures(&self) -> Option<&[Vec<CycleMatchings>]> {
        match &self.source {
            Source::Permutations { cycles, .. } => Some(cycles),
            Source::Atoms { .. } => None,
        }
    }

    /// Draws one matching into `out` (cleared first).
    pub fn sample_into(&self, rng: &mut RngStream, out: &mut Matching) {
        out.clear();
        match &self.source {
            Source::Atoms { atoms, cumulative } => {
                let idx = pick_index(cumulative, rng.uniform());
                out.extend_from_slice(&atoms[idx].0);
            }
            Source::Permutations {
                cycles, cumulative, ..
            } => {
                let idx = pick_index(cumulative, rng.uniform());
                for cm in &cycles[idx] {
                    if let Some(m) = cm.pick(rng.uniform()) {
                        out.extend_from_slice(m);
                    }
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Matching {
        let mut m = Vec::new();
        self.sample_into(rng, &mut m);
        m
    }

    /// Enumerates all atoms with their probabilities, merging equal matchings.
    /// Only available for small graphs since the count can be exponential.
    pub fn atoms(&self) -> Result<Vec<(Matching, f64)>> {
        match &self.source {
            Source::Atoms { atoms, .. } => Ok(atoms.clone()),
            Source::Permutations {
                decomposition,
                cycles,
                ..
            } => {
                if self.graph.n() > ATOM_ENUMERATION_LIMIT {
                    return Err(EloError::InvalidParameter(format!(
                        "atom enumeration limited to n <= {ATOM_ENUMERATION_LIMIT}"
                    )));
                }
                let mut merged: HashMap<Matching, f64> = HashMap::new();
                for (alpha, perm_cycles) in decomposition.coefficients.iter().zip(cycles) {
                    let mut partial: Vec<(Matching, f64)> = vec![(Vec::new(), *alpha)];
                    for cm in perm_cycles {
                        let idle = 1.0 - cm.options.iter().map(|o| o.1).sum::<f64>();
                        let mut next = Vec::with_capacity(partial.len() * (cm.options.len() + 1));
                        for (m, p) in &partial {
                            if idle > 0.0 {
                                next.push((m.clone(), p * idle));
                            }
                            for (opt, po) in &cm.options {
                                let mut grown = m.clone();
                                grown.extend_from_slice(opt);
                                next.push((grown, p * po));
                            }
                        }
                        partial = next;
                    }
                    for (mut m, p) in partial {
                        m.sort_unstable();
                        *merged.entry(m).or_insert(0.0) += p;
                    }
                }
                let mut atoms: Vec<_> = merged.into_iter().collect();
                atoms.sort_by(|a, b| a.0.cmp(&b.0));
                Ok(atoms)
            }
        }
    }
}

/// Completion → Birkhoff–von Neumann → per-cycle matching choice.
pub fn build_matching_distribution(q: &MatchupDistribution) -> Result<MatchingDistribution> {
    let completed = stochastic_completion(q)?;
    let decomposition = birkhoff_von_neumann(&completed)?;
    MatchingDistribution::from_decomposition(q.graph().clone(), decomposition)
}

/// Serializable view of a permutation-based matching distribution.
#[derive(Clone, Debug, Serialize)]
pub struct MatchingsReport {
    pub n: usize,
    pub mean_size: f64,
    pub permutations: Vec<PermutationReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PermutationReport {
    pub coefficient: f64,
    pub permutation: Vec<usize>,
    pub cycles: Vec<CycleMatchings>,
}

impl MatchingDistribution {
    pub fn report(&self) -> Option<MatchingsReport> {
        let (dec, cycles) = (self.decomposition()?, self.cycle_structures()?);
        Some(MatchingsReport {
            n: self.graph.n(),
            mean_size: self.mean_size(),
            permutations: dec
                .coefficients
                .iter()
                .zip(&dec.permutations)
                .zip(cycles)
                .map(|((&coefficient, p), c)| PermutationReport {
                    coefficient,
                    permutation: p.clone(),
                    cycles: c.clone(),
                })
                .collect(),
        })
    }
}
