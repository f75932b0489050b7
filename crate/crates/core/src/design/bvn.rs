//! Birkhoff–von Neumann decomposition of doubly stochastic matrices.

use crate::error::{EloError, Result};
use crate::graph::MatchupDistribution;

/// `sigma[i]` is the image of `i`.
pub type Permutation = Vec<usize>;

const STOCHASTIC_TOL: f64 = 1e-8;
const SUPPORT_THRESHOLD: f64 = 1e-10;
const RESIDUAL_TARGET: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BvnDecomposition {
    pub coefficients: Vec<f64>,
    pub permutations: Vec<Permutation>,
}

impl BvnDecomposition {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `Σ_ℓ α_ℓ P_{σ_ℓ}` as dense rows.
    pub fn reconstruct(&self, n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for (a, sigma) in self.coefficients.iter().zip(&self.permutations) {
            for (i, &j) in sigma.iter().enumerate() {
                m[i][j] += a;
            }
        }
        m
    }
}

/// Symmetric doubly stochastic matrix with off-diagonals `q_{i,j}` and
/// diagonal `1 - q_k`. The diagonal carries no weight in the Dirichlet form.
pub fn stochastic_completion(q: &MatchupDistribution) -> Result<Vec<Vec<f64>>> {
    let n = q.n();
    let loads = q.vertex_loads();
    if let Some((k, &load)) = loads
        .iter()
        .enumerate()
        .find(|(_, &l)| l > 1.0 + 1e-9)
    {
        return Err(EloError::VertexOverload { vertex: k, load });
    }
    let mut m = vec![vec![0.0; n]; n];
    for (&(i, j), &w) in q.graph().edges().iter().zip(q.weights()) {
        m[i][j] = w;
        m[j][i] = w;
    }
    for k in 0..n {
        m[k][k] = (1.0 - loads[k]).max(0.0);
    }
    Ok(m)
}

fn check_doubly_stochastic(m: &[Vec<f64>]) -> Result<()> {
    let n = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(EloError::NotDoublyStochastic(format!("row {i} has length {}", row.len())));
        }
        if let Some(v) = row.iter().find(|&&v| v < -1e-12 || !v.is_finite()) {
            return Err(EloError::NotDoublyStochastic(format!("entry {v} in row {i}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(EloError::NotDoublyStochastic(format!("row {i} sums to {s}")));
        }
    }
    for j in 0..n {
        let s: f64 = m.iter().map(|r| r[j]).sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(EloError::NotDoublyStochastic(format!("column {j} sums to {s}")));
        }
    }
    Ok(())
}

/// Perfect matching rows → columns on entries above `threshold`, by
/// augmenting paths. Prefers heavy entries when several are available.
fn perfect_matching(m: &[Vec<f64>], threshold: f64) -> Option<Permutation> {
    let n = m.len();
    let adj: Vec<Vec<usize>> = m
        .iter()
        .map(|row| {
            let mut cols: Vec<usize> = (0..n).filter(|&j| row[j] > threshold).collect();
            cols.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            cols
        })
        .collect();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    let mut row_match: Vec<Option<usize>> = vec![None; n];

    fn augment(
        r: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        col_owner: &mut [Option<usize>],
        row_match: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[r] {
            if seen[c] {
                continue;
            }
            seen[c] = true;
            let free = match col_owner[c] {
                None => true,
                Some(r2) => augment(r2, adj, seen, col_owner, row_match),
            };
            if free {
                col_owner[c] = Some(r);
                row_match[r] = Some(c);
                return true;
            }
        }
        false
    }

    // greedy seed, then augment the unmatched rows
    for r in 0..n {
        if let Some(&c) = adj[r].iter().find(|&&c| col_owner[c].is_none()) {
            col_owner[c] = Some(r);
            row_match[r] = Some(c);
        }
    }
    for r in 0..n {
        if row_match[r].is_none() {
            let mut seen = vec![false; n];
            if !augment(r, &adj, &mut seen, &mut col_owner, &mut row_match) {
                return None;
            }
        }
    }
    row_match.into_iter().collect()
}

/// Greedy Birkhoff decomposition: peel off a perfect matching on the positive
/// support, weighted by its smallest entry, until the residual vanishes.
/// Coefficient count is then reduced to at most `n² - 2n + 2` (Carathéodory).
pub fn birkhoff_von_neumann(matrix: &[Vec<f64>]) -> Result<BvnDecomposition> {
    check_doubly_stochastic(matrix)?;
    let n = matrix.len();
    let mut residual: Vec<Vec<f64>> = matrix
        .iter()
        .map(|r| r.iter().map(|&v| v.max(0.0)).collect())
        .collect();
    let mut coefficients = Vec::new();
    let mut permutations: Vec<Permutation> = Vec::new();
    let mut remaining = 1.0_f64;
    let mut threshold = SUPPORT_THRESHOLD;

    while remaining > RESIDUAL_TARGET && coefficients.len() <= n * n + n {
        let sigma = match perfect_matching(&residual, threshold) {
            Some(s) => s,
            None if remaining < STOCHASTIC_TOL => break,
            None if threshold < SUPPORT_THRESHOLD * 1e3 => {
                threshold *= 10.0;
                continue;
            }
            None => return Err(EloError::NoPerfectMatching),
        };
        let mut alpha = sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| residual[i][j])
            .fold(f64::INFINITY, f64::min);
        alpha = alpha.min(remaining);
        for (i, &j) in sigma.iter().enumerate() {
            residual[i][j] -= alpha;
            if residual[i][j] <= threshold {
                residual[i][j] = 0.0;
            }
        }
        remaining -= alpha;
        match permutations.iter().position(|p| *p == sigma) {
            Some(k) => coefficients[k] += alpha,
            None => {
                coefficients.push(alpha);
                permutations.push(sigma);
            }
        }
    }
    if coefficients.is_empty() {
        return Err(EloError::NoPerfectMatching);
    }

    let mut dec = BvnDecomposition {
        coefficients,
        permutations,
    };
    let bound = (n * n).saturating_sub(2 * n) + 2;
    while dec.len() > bound {
        if !caratheodory_step(&mut dec, n) {
            break;
        }
    }
    let total: f64 = dec.coefficients.iter().sum();
    dec.coefficients.iter_mut().for_each(|a| *a /= total);
    Ok(dec)
}

/// Removes one permutation using an affine dependency among the current ones.
/// Returns `false` if no dependency was found.
fn caratheodory_step(dec: &mut BvnDecomposition, n: usize) -> bool {
    let m = dec.len();
    // Columns: vectorized permutation matrices with a trailing 1 (affine).
    let rows = n * n + 1;
    let mut a = vec![vec![0.0; m]; rows];
    for (c, sigma) in dec.permutations.iter().enumerate() {
        for (i, &j) in sigma.iter().enumerate() {
            a[i * n + j][c] = 1.0;
        }
        a[rows - 1][c] = 1.0;
    }
    let Some(null) = null_vector(a, m) else {
        return false;
    };
    // α ← α - t·null with the largest t keeping α ≥ 0; one coefficient hits 0.
    let mut t = f64::INFINITY;
    let mut hit = None;
    for (k, &v) in null.iter().enumerate() {
        if v > 1e-12 {
            let r = dec.coefficients[k] / v;
            if r < t {
                t = r;
                hit = Some(k);
            }
        }
    }
    let Some(hit) = hit else { return false };
    for (a, v) in dec.coefficients.iter_mut().zip(&null) {
        *a = (*a - t * v).max(0.0);
    }
    dec.coefficients[hit] = 0.0;
    let keep: Vec<bool> = dec.coefficients.iter().map(|&a| a > 0.0).collect();
    let mut it = keep.iter();
    dec.permutations.retain(|_| *it.next().unwrap());
    dec.coefficients.retain(|&a| a > 0.0);
    true
}

/// A non-zero vector `x` with `A x = 0`, by Gauss–Jordan elimination.
fn null_vector(mut a: Vec<Vec<f64>>, cols: usize) -> Option<Vec<f64>> {
    let rows = a.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, a[i][c].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if val < 1e-10 {
            continue;
        }
        a.swap(r, best);
        let p = a[r][c];
        a[r].iter_mut().for_each(|v| *v /= p);
        for i in 0..rows {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c];
                let (src, dst) = if i < r {
                    let (lo, hi) = a.split_at_mut(r);
                    (&hi[0], &mut lo[i])
                } else {
                    let (lo, hi) = a.split_at_mut(i);
                    (&lo[r], &mut hi[0])
                };
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d -= f * s;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c))?;
    let mut x = vec![0.0; cols];
    x[free] = 1.0;
    for (row, &pc) in pivot_cols.iter().enumerate() {
        x[pc] = -a[row][free];
    }
    Some(x)
}
