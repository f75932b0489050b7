use rayon::prelude::*;

use super::{ChainState, EloConfig};
use crate::error::{EloError, Result};
use crate::rating::{sigmoid, RatingVector};
use crate::rng::RngStream;

const BATCHES: usize = 50;

/// Empirical moments of the equilibrium distribution.
///
/// Standard errors come from batch means, so they stay honest when the
/// thinning is too short to decorrelate consecutive samples.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumEstimate {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance_se: Vec<f64>,
    pub samples: usize,
    pub thinning: u64,
    batches: Vec<Batch>,
}

#[derive(Clone, Debug, PartialEq)]
struct Batch {
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Batch {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.count as f64
    }

    fn second(&self, k: usize) -> f64 {
        self.sum_sq[k] / self.count as f64
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let b = values.len() as f64;
    let m = values.iter().sum::<f64>() / b;
    if values.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b - 1.0);
    (m, (var / b).sqrt())
}

impl EquilibriumEstimate {
    fn from_batches(batches: Vec<Batch>, thinning: u64) -> Self {
        let batches: Vec<Batch> = batches.into_iter().filter(|b| b.count > 0).collect();
        let n = batches[0].sum.len();
        let samples: usize = batches.iter().map(|b| b.count).sum();
        let mut mean = vec![0.0; n];
        let mut variance = vec![0.0; n];
        let mut mean_se = vec![0.0; n];
        let mut variance_se = vec![0.0; n];
        for k in 0..n {
            let s: f64 = batches.iter().map(|b| b.sum[k]).sum();
            let q: f64 = batches.iter().map(|b| b.sum_sq[k]).sum();
            let m = s / samples as f64;
            mean[k] = m;
            variance[k] = (q / samples as f64 - m * m).max(0.0);
            let means: Vec<f64> = batches.iter().map(|b| b.mean(k)).collect();
            mean_se[k] = mean_and_se(&means).1;
            let centred: Vec<f64> = batches
                .iter()
                .map(|b| b.second(k) - 2.0 * m * b.mean(k) + m * m)
                .collect();
            variance_se[k] = mean_and_se(&centred).1;
        }
        Self {
            mean,
            variance,
            mean_se,
            variance_se,
            samples,
            thinning,
            batches,
        }
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    /// `(1/n)‖E[X] − ρ‖₂²` and a standard error for it.
    ///
    /// The error combines a batch-means delta-method term with the
    /// upward bias `(1/n) Σ se_k²` of the plug-in estimator.
    pub fn bias(&self, skills: &[f64]) -> (f64, f64) {
        let n = self.n() as f64;
        let value = self
            .mean
            .iter()
            .zip(skills)
            .map(|(m, r)| (m - r).powi(2))
            .sum::<f64>()
            / n;
        let linear: Vec<f64> = self
            .batches
            .iter()
            .map(|b| {
                (0..self.n())
                    .map(|k| 2.0 * (self.mean[k] - skills[k]) * b.mean(k))
                    .sum::<f64>()
                    / n
            })
            .collect();
        let delta = mean_and_se(&linear).1;
        let floor = self.mean_se.iter().map(|s| s * s).sum::<f64>() / n;
        (value, (delta * delta + floor * floor).sqrt() + floor)
    }

    /// `(1/n) Σ_k Var[X_k]` and a standard error for it.
    pub fn mean_variance(&self) -> (f64, f64) {
        let n = self.n() as f64;
        let m = &self.mean;
        let per_batch: Vec<f64> = self
            .batches
            .iter()
            .map(|b| {
                (0..self.n())
                    .map(|k| b.second(k) - 2.0 * m[k] * b.mean(k) + m[k] * m[k])
                    .sum::<f64>()
                    / n
            })
            .collect();
        (self.variance.iter().sum::<f64>() / n, mean_and_se(&per_batch).1)
    }
}

fn sample_chain(
    config: &EloConfig,
    skills: &RatingVector,
    burn_in: u64,
    samples: usize,
    thinning: u64,
    batches: usize,
    rng: &mut RngStream,
) -> Result<Vec<Batch>> {
    let n = config.n();
    let x = skills.values();
    let mut state = ChainState::zeros(n, config.cap(), 0);
    for _ in 0..burn_in {
        state.advance(config, x, rng)?;
    }
    let per = samples.div_ceil(batches);
    let mut out: Vec<Batch> = (0..batches).map(|_| Batch::new(n)).collect();
    for s in 0..samples {
        for _ in 0..thinning {
            state.advance(config, x, rng)?;
        }
        out[s / per].push(state.values());
    }
    Ok(out)
}

fn resolve_thinning(config: &EloConfig, skills: &RatingVector, thinning: Option<u64>) -> Result<u64> {
    match thinning {
        Some(0) => Err(EloError::InvalidParameter("thinning must be >= 1".into())),
        Some(t) => Ok(t),
        None => Ok(config.mixing_steps(skills)?.max(1)),
    }
}

/// Per-coordinate mean and variance of `X^s`, sampled every `thinning`
/// steps after `burn_in`. `thinning` defaults to `⌈t_mix⌉`.
pub fn estimate_equilibrium(
    config: &EloConfig,
    true_skills: &RatingVector,
    burn_in: u64,
    samples: usize,
    thinning: Option<u64>,
    rng: &mut RngStream,
) -> Result<EquilibriumEstimate> {
    if samples < 100 {
        return Err(EloError::InvalidParameter("need at least 100 samples".into()));
    }
    config.check_skills(true_skills)?;
    let thinning = resolve_thinning(config, true_skills, thinning)?;
    let batches = sample_chain(config, true_skills, burn_in, samples, thinning, BATCHES, rng)?;
    Ok(EquilibriumEstimate::from_batches(batches, thinning))
}

/// [`estimate_equilibrium`] split over `chains` independent chains, each with
/// its own burn-in and a stream forked from `base`.
pub fn estimate_equilibrium_parallel(
    config: &EloConfig,
    true_skills: &RatingVector,
    burn_in: u64,
    samples: usize,
    thinning: Option<u64>,
    base: &RngStream,
    chains: usize,
) -> Result<EquilibriumEstimate> {
    if samples < 100 {
        return Err(EloError::InvalidParameter("need at least 100 samples".into()));
    }
    if chains == 0 {
        return Err(EloError::InvalidParameter("need at least one chain".into()));
    }
    config.check_skills(true_skills)?;
    let thinning = resolve_thinning(config, true_skills, thinning)?;
    let per_chain = samples.div_ceil(chains);
    let batches_per_chain = BATCHES.div_ceil(chains).max(2);
    let parts = (0..chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = base.fork((base.stream_id() << 16) | c);
            sample_chain(config, true_skills, burn_in, per_chain, thinning, batches_per_chain, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumEstimate::from_batches(
        parts.into_iter().flatten().collect(),
        thinning,
    ))
}

/// Outcome of the uncapped win-probability identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct UnbiasednessCheck {
    /// `|Σ_j q_ij E[σ(X_i − X_j)] − Σ_j q_ij σ(ρ_i − ρ_j)|` per player.
    pub discrepancy: Vec<f64>,
    /// Batch-means standard error of the empirical left-hand side.
    pub standard_error: Vec<f64>,
    pub samples: usize,
}

impl UnbiasednessCheck {
    /// Largest discrepancy in units of its standard error.
    pub fn max_sigma(&self) -> f64 {
        self.discrepancy
            .iter()
            .zip(&self.standard_error)
            .map(|(d, s)| if *s > 0.0 { d / s } else if *d > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Checks the uncapped identity
/// `Σ_j q_ij E_π[σ(X_i − X_j)] = Σ_j q_ij σ(ρ_i − ρ_j)`.
///
/// Every step after a burn-in of `10 ⌈t_mix⌉` contributes one sample.
pub fn check_win_probability_unbiasedness(
    config: &EloConfig,
    true_skills: &RatingVector,
    samples: usize,
    rng: &mut RngStream,
) -> Result<UnbiasednessCheck> {
    if config.cap().is_finite() {
        return Err(EloError::CapMustBeInfinite);
    }
    if samples < 1000 {
        return Err(EloError::InvalidParameter("need at least 1000 samples".into()));
    }
    config.check_skills(true_skills)?;
    let n = config.n();
    let q = config.pair_weights();
    let edges: Vec<(usize, usize, f64)> = q
        .graph()
        .edges()
        .iter()
        .zip(q.weights())
        .filter(|(_, w)| **w > 0.0)
        .map(|(&(i, j), &w)| (i, j, w))
        .collect();
    let rho = true_skills.values();
    let mut exact = vec![0.0; n];
    for &(i, j, w) in &edges {
        let p = sigmoid(rho[i] - rho[j]);
        exact[i] += w * p;
        exact[j] += w * (1.0 - p);
    }

    let burn_in = 10 * config.mixing_steps(true_skills)?;
    let mut state = ChainState::zeros(n, config.cap(), 0);
    for _ in 0..burn_in {
        state.advance(config, rho, rng)?;
    }
    let batches = 100;
    let per = samples.div_ceil(batches);
    let mut sums = vec![vec![0.0; n]; batches];
    let mut counts = vec![0usize; batches];
    let mut lhs = vec![0.0; n];
    for s in 0..samples {
        state.advance(config, rho, rng)?;
        lhs.iter_mut().for_each(|v| *v = 0.0);
        let x = state.values();
        for &(i, j, w) in &edges {
            let p = sigmoid(x[i] - x[j]);
            lhs[i] += w * p;
            lhs[j] += w * (1.0 - p);
        }
        let b = s / per;
        counts[b] += 1;
        for (acc, v) in sums[b].iter_mut().zip(&lhs) {
            *acc += v;
        }
    }
    let mut discrepancy = vec![0.0; n];
    let mut standard_error = vec![0.0; n];
    for k in 0..n {
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s[k] / c as f64)
            .collect();
        let total: f64 = sums.iter().map(|s| s[k]).sum();
        discrepancy[k] = (total / samples as f64 - exact[k]).abs();
        standard_error[k] = mean_and_se(&means).1;
    }
    Ok(UnbiasednessCheck {
        discrepancy,
        standard_error,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ComparisonGraph, MatchupDistribution};
    use crate::rating::StepSize;

    fn two_player(cap: f64, eta: f64) -> EloConfig {
        EloConfig::sequential(
            MatchupDistribution::uniform(ComparisonGraph::path(2)),
            cap,
            StepSize::new(eta).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_pair_centres_on_zero() {
        let cfg = two_player(1.0, 0.1);
        let skills = RatingVector::zeros(2, 1.0);
        let est = estimate_equilibrium(&cfg, &skills, 1000, 20_000, None, &mut RngStream::new(1, 0))
            .unwrap();
        for k in 0..2 {
            assert!(est.mean[k].abs() <= 3.0 * est.mean_se[k] + 1e-12, "{est:?}");
        }
        assert_eq!(est.samples, 20_000);
    }

    #[test]
    fn variance_below_bound() {
        let cfg = two_player(1.0, 0.05);
        let skills = RatingVector::new(vec![0.5, -0.5], 1.0).unwrap();
        let est = estimate_equilibrium_parallel(
            &cfg,
            &skills,
            2000,
            20_000,
            None,
            &RngStream::new(4, 0),
            4,
        )
        .unwrap();
        let (v, se) = est.mean_variance();
        let bound = 3.0 * 1f64.exp().powi(2) * 0.05 / (2.0 * 2.0);
        assert!((bound - 0.2771).abs() < 1e-4);
        assert!(v <= bound + 3.0 * se);
    }

    #[test]
    fn too_few_samples_rejected() {
        let cfg = two_player(1.0, 0.1);
        let skills = RatingVector::zeros(2, 1.0);
        assert!(estimate_equilibrium(&cfg, &skills, 0, 99, None, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn unbiasedness_requires_uncapped() {
        let cfg = two_player(1.0, 0.1);
        let skills = RatingVector::zeros(2, 1.0);
        assert_eq!(
            check_win_probability_unbiasedness(&cfg, &skills, 10_000, &mut RngStream::new(0, 0)),
            Err(EloError::CapMustBeInfinite)
        );
    }

    #[test]
    fn unbiasedness_symmetric() {
        let cfg = two_player(f64::INFINITY, 0.1);
        let skills = RatingVector::uncapped(vec![0.0, 0.0]).unwrap();
        let chk = check_win_probability_unbiasedness(&cfg, &skills, 50_000, &mut RngStream::new(2, 0))
            .unwrap();
        assert!(chk.max_sigma() <= 3.0, "{chk:?}");
    }
}
