//! Bradley–Terry–Luce primitives: the logistic link, rating vectors, step sizes
//! and outcome sampling.

use crate::error::{EloError, Result};
use crate::rng::RngStream;

/// Logistic function `1 / (1 + e^{-z})`, evaluated without overflow.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Zero-sum rating vector, optionally capped in sup-norm.
///
/// `cap == f64::INFINITY` is the uncapped mode.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingVector {
    values: Vec<f64>,
    cap: f64,
}

impl RatingVector {
    /// Absolute zero-sum tolerance for a vector of length `n`.
    pub fn sum_tolerance(n: usize) -> f64 {
        1e-9 * n as f64
    }

    pub fn new(values: Vec<f64>, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(EloError::InvalidParameter(format!("cap must be positive, got {cap}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EloError::NonFinite(i));
        }
        let sum: f64 = values.iter().sum();
        if sum.abs() > Self::sum_tolerance(values.len()) {
            return Err(EloError::InvalidParameter(format!(
                "ratings must sum to zero, got {sum}"
            )));
        }
        if cap.is_finite() {
            if let Some((i, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| v.abs() > cap + 1e-12)
            {
                return Err(EloError::SkillsExceedCap {
                    index: i,
                    value: *v,
                    cap,
                });
            }
        }
        Ok(Self { values, cap })
    }

    /// Subtracts the mean, then validates.
    pub fn centered(mut values: Vec<f64>, cap: f64) -> Result<Self> {
        center(&mut values);
        Self::new(values, cap)
    }

    pub fn zeros(n: usize, cap: f64) -> Self {
        Self {
            values: vec![0.0; n],
            cap,
        }
    }

    pub fn uncapped(values: Vec<f64>) -> Result<Self> {
        Self::new(values, f64::INFINITY)
    }

    pub(crate) fn from_raw(values: Vec<f64>, cap: f64) -> Self {
        Self { values, cap }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn is_capped(&self) -> bool {
        self.cap.is_finite()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        self.cap = cap;
        let values = std::mem::take(&mut self.values);
        Self::new(values, cap)
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        let n = self.values.len();
        for idx in [i, j] {
            if idx >= n {
                return Err(EloError::IndexOutOfRange { index: idx, n });
            }
        }
        if i == j {
            return Err(EloError::SamePlayer(i));
        }
        Ok(())
    }
}

pub(crate) fn center(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
}

/// Elo step size, restricted to `(0, 1/4)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct StepSize(f64);

impl StepSize {
    pub fn new(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta < 0.25 {
            Ok(Self(eta))
        } else {
            Err(EloError::InvalidParameter(format!(
                "step size must lie in (0, 1/4), got {eta}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Model probability that `i` beats `j`.
pub fn win_probability(ratings: &RatingVector, i: usize, j: usize) -> Result<f64> {
    ratings.check(i, j)?;
    Ok(sigmoid(ratings.values[i] - ratings.values[j]))
}

/// Draws the winner of `i` against `j` under the BTL model with `true_skills`.
pub fn sample_outcome(
    true_skills: &RatingVector,
    i: usize,
    j: usize,
    rng: &mut RngStream,
) -> Result<usize> {
    true_skills.check(i, j)?;
    Ok(draw_winner(&true_skills.values, i, j, rng))
}

#[inline]
pub(crate) fn draw_winner(skills: &[f64], i: usize, j: usize, rng: &mut RngStream) -> usize {
    if rng.uniform() < sigmoid(skills[i] - skills[j]) {
        i
    } else {
        j
    }
}
