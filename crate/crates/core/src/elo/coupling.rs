use super::{sq_dist, ChainState, Draw, EloConfig};
use crate::error::Result;
use crate::rating::RatingVector;
use crate::rng::RngStream;

/// Two chains driven by the same pairs, winners and noise.
#[derive(Clone, Debug)]
pub struct CouplingState {
    pub chain_a: ChainState,
    pub chain_b: ChainState,
    pub distance_l2: f64,
    pub distance_l1: f64,
    draw: Draw,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

impl CouplingState {
    pub fn new(x0: RatingVector, y0: RatingVector) -> Self {
        let mut s = Self {
            chain_a: ChainState::new(x0, 0),
            chain_b: ChainState::new(y0, 0),
            distance_l2: 0.0,
            distance_l1: 0.0,
            draw: Draw::default(),
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        let (a, b) = (self.chain_a.values(), self.chain_b.values());
        self.distance_l2 = sq_dist(a, b).sqrt();
        self.distance_l1 = l1(a, b);
    }

    /// One coupled step. Outcomes are drawn from the true skills, so both
    /// chains see the same winner regardless of their current ratings.
    pub fn step(&mut self, config: &EloConfig, skills: &[f64], rng: &mut RngStream) -> Result<()> {
        self.draw.sample(config, skills, rng);
        self.chain_a.apply(config, &self.draw)?;
        self.chain_b.apply(config, &self.draw)?;
        self.refresh();
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSnapshot {
    pub step: u64,
    pub l2: f64,
    pub l1: f64,
}

#[derive(Clone, Debug)]
pub struct CouplingRun {
    /// Distances at steps `0..=steps`.
    pub snapshots: Vec<CouplingSnapshot>,
    /// Whether the ℓ₁ distance never increased (up to rounding).
    pub l1_monotone: bool,
    pub state: CouplingState,
}

/// Runs the trivial coupling for `steps` steps from `(x0, y0)`.
pub fn coupled_run(
    config: &EloConfig,
    true_skills: &RatingVector,
    x0: RatingVector,
    y0: RatingVector,
    steps: u64,
    rng: &mut RngStream,
) -> Result<CouplingRun> {
    config.check_skills(true_skills)?;
    config.check_start(&x0)?;
    config.check_start(&y0)?;
    let mut state = CouplingState::new(x0, y0);
    let mut snapshots = Vec::with_capacity(steps as usize + 1);
    snapshots.push(CouplingSnapshot {
        step: 0,
        l2: state.distance_l2,
        l1: state.distance_l1,
    });
    let mut l1_monotone = true;
    for t in 1..=steps {
        let before = state.distance_l1;
        state.step(config, true_skills.values(), rng)?;
        l1_monotone &= state.distance_l1 <= before + 1e-12 * (1.0 + before);
        snapshots.push(CouplingSnapshot {
            step: t,
            l2: state.distance_l2,
            l1: state.distance_l1,
        });
    }
    Ok(CouplingRun {
        snapshots,
        l1_monotone,
        state,
    })
}

/// Per-step contraction rate `κ` from a least-squares fit of
/// `ln v_t ≈ a + t ln(1 − κ)`. Non-positive values are skipped.
pub fn fit_decay_rate(times: &[u64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(&t, &v)| (t as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    Some(1.0 - (sxy / sxx).exp())
}
