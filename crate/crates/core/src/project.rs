//! Euclidean projection onto `Ω = [-M, M]^n ∩ {Σ x = 0}`.
//!
//! The projection is the shifted clamp `clamp(x - μ, -M, M)` where `μ` is a
//! root of the non-increasing piecewise-linear function
//! `f(μ) = Σ clamp(x_k - μ, -M, M)`. Its breakpoints are `x_k ± M`; we sort
//! them, locate the segment holding the root by binary search and solve the
//! linear piece exactly. When `f` vanishes on a whole segment (every
//! coordinate frozen at ±M) the midpoint of the zero set is returned.

use crate::error::{EloError, Result};
use crate::rating::RatingVector;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub projected: RatingVector,
    /// The optimal scalar shift `μ`.
    pub shift: f64,
    /// Number of coordinates sitting at `±M`.
    pub frozen_count: usize,
}

#[inline]
fn clamped_sum(x: &[f64], mu: f64, cap: f64) -> f64 {
    x.iter().map(|&v| (v - mu).clamp(-cap, cap)).sum()
}

fn check_input(x: &[f64], cap: f64) -> Result<()> {
    if !(cap > 0.0) || cap.is_nan() {
        return Err(EloError::InvalidParameter(format!("cap must be positive, got {cap}")));
    }
    if x.len() < 2 {
        return Err(EloError::InvalidParameter("projection needs n >= 2".into()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(EloError::NonFinite(i));
    }
    Ok(())
}

/// Reusable scratch space for repeated projections.
#[derive(Clone, Debug, Default)]
pub struct Projector {
    breakpoints: Vec<f64>,
}

impl Projector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves for the shift `μ`. Assumes finite input and `cap > 0`.
    pub fn shift(&mut self, x: &[f64], cap: f64) -> f64 {
        let n = x.len();
        let sum: f64 = x.iter().sum();
        let max_abs = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !cap.is_finite() {
            return sum / n as f64;
        }
        if max_abs <= cap && sum == 0.0 {
            return 0.0;
        }

        self.breakpoints.clear();
        self.breakpoints
            .extend(x.iter().flat_map(|&v| [v - cap, v + cap]));
        self.breakpoints.sort_by(f64::total_cmp);
        let b = &self.breakpoints;

        // f(b[0]) = nM > 0 and f(b[last]) = -nM < 0.
        let first_nonpos = b.partition_point(|&m| clamped_sum(x, m, cap) > 0.0);
        let first_neg = b.partition_point(|&m| clamped_sum(x, m, cap) >= 0.0);
        if first_nonpos == 0 || first_neg == 0 || first_nonpos > b.len() - 1 || first_neg > b.len() - 1
        {
            return self.bisect(x, cap);
        }

        let root_on = |lo: f64, hi: f64| -> f64 {
            let flo = clamped_sum(x, lo, cap);
            let fhi = clamped_sum(x, hi, cap);
            if flo == fhi {
                0.5 * (lo + hi)
            } else {
                (lo + flo * (hi - lo) / (flo - fhi)).clamp(lo, hi)
            }
        };
        let lower = root_on(b[first_nonpos - 1], b[first_nonpos]);
        let upper = root_on(b[first_neg - 1], b[first_neg]);
        let mut mu = 0.5 * (lower + upper);
        if !mu.is_finite() {
            return self.bisect(x, cap);
        }

        // One exact correction on the free coordinates removes rounding residue.
        let free = x.iter().filter(|&&v| (v - mu).abs() < cap).count();
        if free > 0 {
            let residual = clamped_sum(x, mu, cap);
            let corrected = mu + residual / free as f64;
            if clamped_sum(x, corrected, cap).abs() <= residual.abs() {
                mu = corrected;
            }
        }
        mu
    }

    fn bisect(&self, x: &[f64], cap: f64) -> f64 {
        let lo0 = x.iter().copied().fold(f64::INFINITY, f64::min) - cap;
        let hi0 = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cap;
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if clamped_sum(x, mid, cap) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Projects `x` in place and returns the shift.
    pub fn project_in_place(&mut self, x: &mut [f64], cap: f64) -> f64 {
        let mu = self.shift(x, cap);
        if mu != 0.0 || x.iter().any(|v| v.abs() > cap) {
            x.iter_mut().for_each(|v| *v = (*v - mu).clamp(-cap, cap));
        }
        mu
    }
}

/// Orthogonal projection of `x` onto the capped zero-sum polytope.
pub fn project_capped_zero_sum(x: &[f64], cap: f64) -> Result<ProjectionResult> {
    check_input(x, cap)?;
    let mut values = x.to_vec();
    let shift = Projector::new().project_in_place(&mut values, cap);
    let frozen_count = if cap.is_finite() {
        values.iter().filter(|v| v.abs() >= cap).count()
    } else {
        0
    };
    Ok(ProjectionResult {
        projected: RatingVector::from_raw(values, cap),
        shift,
        frozen_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_is_identity() {
        let r = project_capped_zero_sum(&[0.3, -0.3], 1.0).unwrap();
        assert_eq!(r.projected.values(), &[0.3, -0.3]);
        assert_eq!(r.shift, 0.0);
        assert_eq!(r.frozen_count, 0);
    }

    #[test]
    fn clamps_and_shifts() {
        let r = project_capped_zero_sum(&[1.5, 0.5, -2.0], 1.0).unwrap();
        let v = r.projected.values();
        for (a, b) in v.iter().zip([1.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
        assert!((r.shift - 0.5).abs() < 1e-12);
        assert_eq!(r.frozen_count, 2);
    }

    #[test]
    fn all_equal_goes_to_origin() {
        let m = 0.7;
        let r = project_capped_zero_sum(&[2.0 * m; 5], m).unwrap();
        assert!(r.projected.values().iter().all(|v| v.abs() < 1e-12));
        assert!((r.shift - 2.0 * m).abs() < 1e-12);
    }

    #[test]
    fn all_frozen_returns_midpoint_shift() {
        // f vanishes for μ in [-1, 1]; projected point is (1, 1, -1, -1).
        let r = project_capped_zero_sum(&[2.0, 2.0, -2.0, -2.0], 1.0).unwrap();
        assert_eq!(r.projected.values(), &[1.0, 1.0, -1.0, -1.0]);
        assert!(r.shift.abs() < 1e-12);
        assert_eq!(r.frozen_count, 4);
    }

    #[test]
    fn elo_overshoot_recaps() {
        let d = 0.1 * crate::rating::sigmoid(-2.0);
        let r = project_capped_zero_sum(&[1.0 + d, -1.0 - d], 1.0).unwrap();
        assert_eq!(r.projected.values(), &[1.0, -1.0]);
        assert_eq!(r.shift, 0.0);
    }

    #[test]
    fn uncapped_only_centres() {
        let r = project_capped_zero_sum(&[3.0, 1.0], f64::INFINITY).unwrap();
        assert_eq!(r.projected.values(), &[1.0, -1.0]);
        assert_eq!(r.shift, 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            project_capped_zero_sum(&[f64::NAN, 0.0], 1.0),
            Err(EloError::NonFinite(0))
        ));
        assert!(project_capped_zero_sum(&[1.0, -1.0], 0.0).is_err());
        assert!(project_capped_zero_sum(&[1.0], 1.0).is_err());
        assert!(matches!(
            project_capped_zero_sum(&[0.0, f64::INFINITY], 1.0),
            Err(EloError::NonFinite(1))
        ));
    }
}
