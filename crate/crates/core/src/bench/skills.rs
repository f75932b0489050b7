use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EloError, Result};
use crate::rating::{center, RatingVector};
use crate::rng::RngStream;

/// Attempts allowed to draw skills that fit under the cap.
pub const SKILL_RESAMPLE_BUDGET: usize = 100;

/// How true skills are generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkillSpec {
    /// Vertices split into `means.len()` consecutive equal blocks; block `b`
    /// draws from `N(means[b], sd²)`.
    GaussianBlocks { means: Vec<f64>, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// One value per line.
    File { path: PathBuf },
}

/// Reads one real per line, skipping blanks and `#` comments.
pub fn read_skills(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_skills(&text)
}

pub fn parse_skills(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse::<f64>().map_err(|e| EloError::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

fn draw(spec: &SkillSpec, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    match spec {
        SkillSpec::GaussianBlocks { means, sd } => {
            if means.is_empty() {
                return Err(EloError::InvalidParameter("need at least one block mean".into()));
            }
            let blocks: Vec<Normal<f64>> = means
                .iter()
                .map(|&m| Normal::new(m, *sd))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EloError::InvalidParameter(e.to_string()))?;
            Ok((0..n)
                .map(|v| blocks[v * means.len() / n].sample(rng))
                .collect())
        }
        SkillSpec::Uniform { lo, hi } => {
            if !(lo <= hi) {
                return Err(EloError::InvalidParameter(format!("empty range [{lo}, {hi}]")));
            }
            Ok((0..n).map(|_| rng.uniform_in(*lo, *hi)).collect())
        }
        SkillSpec::File { path } => {
            let v = read_skills(path)?;
            if v.len() != n {
                return Err(EloError::DimensionMismatch { expected: n, got: v.len() });
            }
            Ok(v)
        }
    }
}

/// Draws skills, centers them to zero sum, and redraws while some
/// `|ρ_k| > cap`.
pub fn sample_skills(spec: &SkillSpec, n: usize, cap: f64, rng: &mut RngStream) -> Result<RatingVector> {
    let attempts = if matches!(spec, SkillSpec::File { .. }) { 1 } else { SKILL_RESAMPLE_BUDGET };
    for _ in 0..attempts {
        let mut v = draw(spec, n, rng)?;
        center(&mut v);
        if v.iter().all(|x| x.abs() <= cap) {
            return RatingVector::new(v, f64::INFINITY);
        }
    }
    Err(EloError::CapViolation { cap, attempts })
}
