//! Tournament design: choose edge weights on a comparison graph that
//! maximize the Laplacian spectral gap.
//!
//! Two regimes are supported. The continuous regime constrains the weights
//! to the simplex `Σ q_e = 1` (one game per step). The discrete regime only
//! asks every vertex load to be at most one, which is exactly what the edge
//! marginals of a matching distribution satisfy. Both objectives are concave
//! in `q`, and `(u_i - u_j)²` for a unit vector `u` in the gap eigenspace is a
//! supergradient. We run projected supergradient ascent and keep the best
//! iterate seen.

mod bvn;
mod matching;

pub use bvn::{birkhoff_von_neumann, stochastic_completion, BvnDecomposition, Permutation};
pub use matching::{
    build_matching_distribution, permutation_to_matchings, CycleMatchings, Matching,
    MatchingDistribution,
};

use crate::error::{EloError, Result};
use crate::graph::{ComparisonGraph, MatchupDistribution};
use crate::spectral::{build_laplacian, jacobi_eigen, SpectrumSummary};

/// Weight constraint of a design problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `Σ_e q_e = 1`.
    Continuous,
    /// `Σ_{e ∋ k} q_e ≤ 1` for every vertex `k`.
    Discrete,
}

#[derive(Clone, Debug)]
pub struct DesignProblem {
    pub graph: ComparisonGraph,
    pub regime: Regime,
    /// Maximum number of ascent iterations.
    pub budget: usize,
    /// Stop once the best gap has not improved by more than this...
    pub tolerance: f64,
    /// ...over this many consecutive iterations.
    pub patience: usize,
    /// Step at iteration `t` is `step_scale / (√t · ‖g_0‖)`.
    pub step_scale: f64,
    /// Alternating-projection cycles for the discrete feasible set.
    pub projection_cycles: usize,
}

impl DesignProblem {
    pub fn new(graph: ComparisonGraph, regime: Regime) -> Self {
        Self {
            graph,
            regime,
            budget: 5000,
            tolerance: 1e-6,
            patience: 500,
            step_scale: 1.0,
            projection_cycles: 50,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Result of an optimizer run.
#[derive(Clone, Debug)]
pub struct DesignOutcome {
    pub weights: MatchupDistribution,
    pub gap: f64,
    pub iterations: usize,
    /// `false` when the iteration budget ran out before the patience test fired.
    pub converged: bool,
    /// Best gap after each iteration.
    pub history: Vec<f64>,
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        acc += s;
        let t = (acc - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projects onto `{q ≥ 0, Σ_{e∋k} q_e ≤ 1 ∀k}` by Dykstra's alternating
/// projections, then rescales by `1 / max(1, max_k q_k)` so the result is
/// feasible whatever the cycle budget.
pub fn project_substochastic(graph: &ComparisonGraph, v: &[f64], cycles: usize) -> Vec<f64> {
    let m = v.len();
    let n = graph.n();
    let mut x = v.to_vec();
    // correction terms: one for the orthant, one per vertex half-space
    let mut p_orthant = vec![0.0; m];
    let mut p_vertex: Vec<Vec<f64>> = (0..n).map(|k| vec![0.0; graph.degree(k)]).collect();
    for _ in 0..cycles {
        let mut moved = 0.0_f64;
        for e in 0..m {
            let y = x[e] + p_orthant[e];
            let nx = y.max(0.0);
            p_orthant[e] = y - nx;
            moved = moved.max((nx - x[e]).abs());
            x[e] = nx;
        }
        for k in 0..n {
            let nb = graph.neighbours(k);
            if nb.is_empty() {
                continue;
            }
            let load: f64 = nb
                .iter()
                .zip(&p_vertex[k])
                .map(|(&(_, e), p)| x[e] + p)
                .sum();
            let excess = (load - 1.0).max(0.0) / nb.len() as f64;
            for (&(_, e), p) in nb.iter().zip(p_vertex[k].iter_mut()) {
                let y = x[e] + *p;
                let nx = y - excess;
                *p = y - nx;
                moved = moved.max((nx - x[e]).abs());
                x[e] = nx;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    x.iter_mut().for_each(|w| *w = w.max(0.0));
    let mut loads = vec![0.0; n];
    for (&(i, j), &w) in graph.edges().iter().zip(&x) {
        loads[i] += w;
        loads[j] += w;
    }
    let scale = loads.into_iter().fold(1.0, f64::max);
    x.iter().map(|w| w / scale).collect()
}

/// Gap eigenpair of the Laplacian of `weights`, reusing `basis` as a warm start.
fn gap_eigenpair(
    graph: &ComparisonGraph,
    weights: &[f64],
    basis: &mut Option<Vec<Vec<f64>>>,
) -> Result<(f64, Vec<f64>)> {
    let q = MatchupDistribution::new(graph.clone(), weights.to_vec())?;
    let lap = build_laplacian(&q)?;
    let eig = match jacobi_eigen(&lap.matrix, basis.as_deref()) {
        Ok(e) => e,
        Err(_) => jacobi_eigen(&lap.matrix, None)?,
    };
    *basis = Some(eig.vectors.clone());
    let s = SpectrumSummary::from_eigen(eig);
    Ok((s.gap, s.fiedler))
}

/// Supergradient of the gap: `(u_i - u_j)²` per edge.
pub fn gap_supergradient(graph: &ComparisonGraph, fiedler: &[f64]) -> Vec<f64> {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| (fiedler[i] - fiedler[j]).powi(2))
        .collect()
}

fn ascend(
    problem: &DesignProblem,
    start: Vec<f64>,
    project: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<DesignOutcome> {
    let graph = &problem.graph;
    if !graph.is_connected() || graph.n() < 2 {
        return Err(EloError::Disconnected);
    }
    let mut basis = None;
    let mut q = start;
    let mut best_q = q.clone();
    let mut best_gap = f64::NEG_INFINITY;
    let mut last_improvement = 0usize;
    let mut reference = f64::NEG_INFINITY;
    let mut base_norm = None;
    let mut history = Vec::with_capacity(problem.budget);
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=problem.budget {
        iterations = t;
        let (gap, u) = gap_eigenpair(graph, &q, &mut basis)?;
        if gap > best_gap {
            best_gap = gap;
            best_q.clone_from(&q);
        }
        if best_gap > reference + problem.tolerance {
            reference = best_gap;
            last_improvement = t;
        }
        history.push(best_gap);
        if t - last_improvement >= problem.patience {
            converged = true;
            break;
        }
        let g = gap_supergradient(graph, &u);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let c = *base_norm.get_or_insert(problem.step_scale / norm);
        let alpha = c / (t as f64).sqrt();
        let stepped: Vec<f64> = q.iter().zip(&g).map(|(a, b)| a + alpha * b).collect();
        q = project(&stepped);
    }

    Ok(DesignOutcome {
        weights: MatchupDistribution::new(graph.clone(), best_q)?,
        gap: best_gap,
        iterations,
        converged,
        history,
    })
}

/// Maximizes the gap over `Σ q_e = 1`, starting from uniform weights.
pub fn optimize_sequential(problem: &DesignProblem) -> Result<DesignOutcome> {
    if problem.regime != Regime::Continuous {
        return Err(EloError::InvalidParameter(
            "optimize_sequential needs the continuous regime".into(),
        ));
    }
    let start = MatchupDistribution::uniform(problem.graph.clone())
        .weights()
        .to_vec();
    ascend(problem, start, project_simplex)
}

/// Maximizes the gap over `q_k ≤ 1 ∀k`, starting from uniform weights scaled
/// up until the busiest vertex is saturated.
pub fn optimize_discrete(problem: &DesignProblem) -> Result<DesignOutcome> {
    if problem.regime != Regime::Discrete {
        return Err(EloError::InvalidParameter(
            "optimize_discrete needs the discrete regime".into(),
        ));
    }
    let start = MatchupDistribution::uniform(problem.graph.clone())
        .saturated()
        .weights()
        .to_vec();
    let graph = problem.graph.clone();
    let cycles = problem.projection_cycles;
    ascend(problem, start, move |v| {
        project_substochastic(&graph, v, cycles)
    })
}

/// Dispatches on the problem's regime.
pub fn optimize(problem: &DesignProblem) -> Result<DesignOutcome> {
    match problem.regime {
        Regime::Continuous => optimize_sequential(problem),
        Regime::Discrete => optimize_discrete(problem),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::gap_of;

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&[0.5, 0.5]);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = project_simplex(&[2.0, 0.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.2, 0.2, 0.2]);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn substochastic_projection_feasible() {
        let g = ComparisonGraph::complete(4);
        let p = project_substochastic(&g, &[0.9, 0.8, -0.2, 0.7, 0.3, 0.6], 50);
        let q = MatchupDistribution::new(g, p).unwrap();
        assert!(q.max_load() <= 1.0 + 1e-12);
        assert!(q.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn substochastic_projection_keeps_feasible_points() {
        let g = ComparisonGraph::path(3);
        let p = project_substochastic(&g, &[0.3, 0.4], 50);
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_edge_both_regimes() {
        let g = ComparisonGraph::path(2);
        for regime in [Regime::Continuous, Regime::Discrete] {
            let out = optimize(&DesignProblem::new(g.clone(), regime)).unwrap();
            assert!((out.weights.weights()[0] - 1.0).abs() < 1e-12);
            assert!((out.gap - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn disconnected_rejected() {
        let g = ComparisonGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            optimize_sequential(&DesignProblem::new(g, Regime::Continuous)),
            Err(EloError::Disconnected)
        ));
    }

    #[test]
    fn regime_mismatch_rejected() {
        let g = ComparisonGraph::path(3);
        assert!(optimize_sequential(&DesignProblem::new(g.clone(), Regime::Discrete)).is_err());
        assert!(optimize_discrete(&DesignProblem::new(g, Regime::Continuous)).is_err());
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let g = ComparisonGraph::path(5);
        let out = optimize_sequential(&DesignProblem::new(g, Regime::Continuous).with_budget(3))
            .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn optimizers_dominate_uniform() {
        for g in [
            ComparisonGraph::path(6),
            ComparisonGraph::star(6),
            ComparisonGraph::cycle(7),
        ] {
            let uniform = MatchupDistribution::uniform(g.clone());
            let seq = optimize_sequential(&DesignProblem::new(g.clone(), Regime::Continuous))
                .unwrap();
            assert!(seq.gap >= gap_of(&uniform).unwrap() - 1e-9);
            assert!((seq.weights.total() - 1.0).abs() < 1e-12);
            let disc = optimize_discrete(&DesignProblem::new(g.clone(), Regime::Discrete)).unwrap();
            assert!(disc.gap >= gap_of(&uniform.saturated()).unwrap() - 1e-9);
            assert!(disc.weights.max_load() <= 1.0 + 1e-12);
        }
    }
}
