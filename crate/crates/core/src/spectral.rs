//! Weighted graph Laplacians, a dense symmetric eigensolver and the spectral
//! quantities derived from them.
//!
//! The Laplacian of weights `q` is `Δ = D - Q` with `Q_{ij} = q_{{i,j}}` and
//! `D` the diagonal of vertex loads. Its quadratic form counts every edge once,
//! `zᵀΔz = Σ_e q_e (z_i - z_j)²`. [`dirichlet_form`] instead sums over ordered
//! pairs and is therefore `2 zᵀΔz`.

use crate::error::{EloError, Result};
use crate::graph::{MatchupDistribution, Normalization};
use crate::rating::StepSize;

/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_SWEEPS: usize = 100;

/// Dense symmetric `n × n` matrix, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(EloError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// Eigen-decomposition of a symmetric matrix, ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigensolver.
///
/// When `warm` is given (an orthogonal basis, stored as rows = basis vectors),
/// the iteration runs on `Wᵀ A W` and the rotations are accumulated onto `W`.
/// A basis close to the eigenvectors needs only a couple of sweeps.
pub fn jacobi_eigen(matrix: &SymMatrix, warm: Option<&[Vec<f64>]>) -> Result<Eigen> {
    let n = matrix.n;
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: vec![],
            sweeps: 0,
        });
    }

    // `v` stores the basis column-wise as v[k * n + j] = component k of vector j,
    // so a rotation of columns (p, q) touches rows of length n.
    let mut v = vec![0.0; n * n];
    let mut a = matrix.data.clone();
    match warm {
        Some(basis) if basis.len() == n && basis.iter().all(|b| b.len() == n) => {
            for (j, b) in basis.iter().enumerate() {
                for k in 0..n {
                    v[k * n + j] = b[k];
                }
            }
            // a = Vᵀ A V
            let mut av = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += matrix.data[i * n + k] * v[k * n + j];
                    }
                    av[i * n + j] = s;
                }
            }
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += v[k * n + i] * av[k * n + j];
                    }
                    a[i * n + j] = s;
                    a[j * n + i] = s;
                }
            }
        }
        _ => {
            for k in 0..n {
                v[k * n + k] = 1.0;
            }
        }
    }

    let scale = matrix.frobenius();
    let target = (1e-14 * scale).powi(2);
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= target || scale == 0.0 {
            break;
        }
        if sweeps == JACOBI_SWEEPS {
            return Err(EloError::EigenFailure { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values = order.iter().map(|&j| a[j * n + j]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    Ok(Eigen {
        values,
        vectors,
        sweeps,
    })
}

/// Weighted Laplacian together with the weights it came from.
#[derive(Clone, Debug)]
pub struct Laplacian {
    pub matrix: SymMatrix,
    pub source: MatchupDistribution,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.n
    }
}

/// `Δ = D - Q` for the weights `q`.
pub fn build_laplacian(q: &MatchupDistribution) -> Result<Laplacian> {
    let n = q.n();
    let mut m = SymMatrix::zeros(n);
    for (&(i, j), &w) in q.graph().edges().iter().zip(q.weights()) {
        if w < 0.0 {
            return Err(EloError::NegativeWeight {
                edge: (i, j),
                weight: w,
            });
        }
        m.data[i * n + j] -= w;
        m.data[j * n + i] -= w;
        m.data[i * n + i] += w;
        m.data[j * n + j] += w;
    }
    Ok(Laplacian {
        matrix: m,
        source: q.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// Unit eigenvector for the gap, orthogonal to the constant vector.
    pub fiedler: Vec<f64>,
    /// Full eigenvector set, aligned with `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectrumSummary {
    pub fn from_eigen(eig: Eigen) -> Self {
        let n = eig.values.len();
        let gap = if n >= 2 { eig.values[1] } else { 0.0 };
        let fiedler = if n >= 2 {
            fiedler_from(&eig)
        } else {
            vec![0.0; n]
        };
        Self {
            eigenvalues: eig.values,
            gap,
            fiedler,
            eigenvectors: eig.vectors,
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn fiedler_from(eig: &Eigen) -> Vec<f64> {
    let (v0, v1) = (&eig.vectors[0], &eig.vectors[1]);
    let s0: f64 = v0.iter().sum();
    let s1: f64 = v1.iter().sum();
    // With a repeated zero eigenvalue pick the combination orthogonal to 𝟏.
    let mut w: Vec<f64> = if (eig.values[1] - eig.values[0]).abs() <= 1e-9 && s1.abs() > 1e-12 {
        v0.iter().zip(v1).map(|(a, b)| s1 * a - s0 * b).collect()
    } else {
        v1.clone()
    };
    remove_mean(&mut w);
    normalize(w)
}

/// Full spectrum and gap of a Laplacian.
///
/// For sequentially normalized weights the trace is 2, so the gap can never
/// exceed `4/n`; a violation indicates an eigensolver failure.
pub fn spectral_gap(lap: &Laplacian) -> Result<SpectrumSummary> {
    let summary = SpectrumSummary::from_eigen(jacobi_eigen(&lap.matrix, None)?);
    check_gap_bound(&lap.source, summary.gap)?;
    Ok(summary)
}

pub(crate) fn check_gap_bound(q: &MatchupDistribution, gap: f64) -> Result<()> {
    let n = q.n();
    if n >= 2 && q.satisfies(Normalization::Sequential) && gap > 4.0 / n as f64 + 1e-10 {
        return Err(EloError::Internal(format!(
            "gap {gap} exceeds 4/n = {} for normalized weights",
            4.0 / n as f64
        )));
    }
    Ok(())
}

/// Convenience: gap of the weights `q`.
pub fn gap_of(q: &MatchupDistribution) -> Result<f64> {
    Ok(spectral_gap(&build_laplacian(q)?)?.gap)
}

/// `Σ_{i,j} q_{i,j} (z_i - z_j)²` over ordered pairs, i.e. every edge twice.
pub fn dirichlet_form(q: &MatchupDistribution, z: &[f64]) -> Result<f64> {
    if z.len() != q.n() {
        return Err(EloError::DimensionMismatch {
            expected: q.n(),
            got: z.len(),
        });
    }
    Ok(2.0
        * q.graph()
            .edges()
            .iter()
            .zip(q.weights())
            .map(|(&(i, j), w)| w * (z[i] - z[j]).powi(2))
            .sum::<f64>())
}

/// `e^{2M} / (η λ) · ln n`.
pub fn mixing_time(cap: f64, eta: StepSize, gap: f64, n: usize) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(EloError::ZeroGap);
    }
    if n < 2 {
        return Err(EloError::InvalidParameter("mixing time needs n >= 2".into()));
    }
    Ok((2.0 * cap).exp() / (eta.get() * gap) * (n as f64).ln())
}

/// Per-step contraction rate `e^{-2M} η λ / 8`.
pub fn curvature_bound(cap: f64, eta: StepSize, gap: f64) -> f64 {
    0.125 * (-2.0 * cap).exp() * eta.get() * gap.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ComparisonGraph;

    fn eta(v: f64) -> StepSize {
        StepSize::new(v).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let l = build_laplacian(&MatchupDistribution::uniform(ComparisonGraph::path(2))).unwrap();
        assert_eq!(l.matrix.rows(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);

        let l = build_laplacian(&MatchupDistribution::uniform(ComparisonGraph::complete(3)))
            .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((l.matrix.get(i, j) - want).abs() < 1e-15);
            }
        }

        let empty = ComparisonGraph::new(3, []).unwrap();
        let l = build_laplacian(&MatchupDistribution::new(empty, vec![]).unwrap()).unwrap();
        assert!(l.matrix.rows().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn gap_examples() {
        let g2 = gap_of(&MatchupDistribution::uniform(ComparisonGraph::path(2))).unwrap();
        assert!((g2 - 2.0).abs() < 1e-12);
        let k4 = gap_of(&MatchupDistribution::uniform(ComparisonGraph::complete(4))).unwrap();
        assert!((k4 - 2.0 / 3.0).abs() < 1e-12);
        let split = ComparisonGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let s = spectral_gap(&build_laplacian(&MatchupDistribution::uniform(split)).unwrap())
            .unwrap();
        assert!(s.gap.abs() < 1e-10);
        let sum: f64 = s.fiedler.iter().sum();
        assert!(sum.abs() < 1e-8);
        let norm: f64 = s.fiedler.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_examples() {
        let q = MatchupDistribution::uniform(ComparisonGraph::path(2));
        assert_eq!(dirichlet_form(&q, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dirichlet_form(&q, &[1.0, -1.0]).unwrap(), 8.0);
        assert!(matches!(
            dirichlet_form(&q, &[1.0]),
            Err(EloError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dirichlet_at_fiedler_is_twice_gap() {
        let q = MatchupDistribution::uniform(ComparisonGraph::cycle(7));
        let s = spectral_gap(&build_laplacian(&q).unwrap()).unwrap();
        let d = dirichlet_form(&q, &s.fiedler).unwrap();
        assert!((d - 2.0 * s.gap).abs() < 1e-8);
    }

    #[test]
    fn mixing_and_curvature() {
        let t = mixing_time(0.0, eta(0.1), 2.0, 2).unwrap();
        assert!((t - 5.0 * 2f64.ln()).abs() < 1e-12);
        assert!((t - 3.4657).abs() < 1e-4);
        let t = mixing_time(1.0, eta(0.1), 2.0, 2).unwrap();
        assert!((t - 25.609).abs() < 1e-3);
        assert_eq!(mixing_time(1.0, eta(0.1), 0.0, 2), Err(EloError::ZeroGap));

        assert!((curvature_bound(0.0, eta(0.1), 2.0) - 0.025).abs() < 1e-15);
        assert!((curvature_bound(1.0, eta(0.1), 2.0) - 0.0033834).abs() < 1e-7);
        assert_eq!(curvature_bound(1.0, eta(0.1), 0.0), 0.0);
    }

    #[test]
    fn warm_start_agrees_with_cold() {
        let q = MatchupDistribution::uniform(ComparisonGraph::path(9));
        let l = build_laplacian(&q).unwrap();
        let cold = jacobi_eigen(&l.matrix, None).unwrap();
        let warm = jacobi_eigen(&l.matrix, Some(&cold.vectors)).unwrap();
        assert!(warm.sweeps <= 1);
        for (a, b) in cold.values.iter().zip(&warm.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
