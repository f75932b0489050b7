//! The Elo chain: sequential, parallel and noisy variants.
//!
//! A step is split into a [`Draw`] (the random choices: who plays, who wins,
//! which noise) and its deterministic application to a [`ChainState`]. The
//! split lets coupled chains share every random choice.

mod chain;
mod coupling;
mod stats;

pub use chain::{
    log_checkpoints, run_chain, run_chain_from, ChainOutput, Clock, ErrorObserver, GamesObserver,
    MaxAbsObserver, Metric, Observer, TimeUnit, TraceObserver, TraceRow, TrajectoryRecord,
};
pub use coupling::{coupled_run, fit_decay_rate, CouplingRun, CouplingSnapshot, CouplingState};
pub use stats::{
    check_win_probability_unbiasedness, estimate_equilibrium, estimate_equilibrium_parallel,
    EquilibriumEstimate, UnbiasednessCheck,
};

use crate::design::{Matching, MatchingDistribution};
use crate::error::{EloError, Result};
use crate::graph::{MatchupDistribution, PairSampler};
use crate::project::Projector;
use crate::rating::{center, draw_winner, sigmoid, RatingVector, StepSize};
use crate::rng::RngStream;
use crate::spectral::{gap_of, mixing_time};

/// Steps between re-centering passes that remove floating-point drift.
pub const RECENTER_EVERY: u64 = 100_000;

/// How games are scheduled in each step.
#[derive(Clone, Debug)]
pub enum Mode {
    /// One pair per step, drawn from `q`.
    Sequential(MatchupDistribution),
    /// One matching per step, every pair in it plays.
    Parallel(MatchingDistribution),
}

#[derive(Clone, Debug)]
pub struct EloConfig {
    cap: f64,
    eta: StepSize,
    noise_delta: f64,
    mode: Mode,
    sampler: Option<PairSampler>,
}

impl EloConfig {
    pub fn sequential(q: MatchupDistribution, cap: f64, eta: StepSize) -> Result<Self> {
        check_cap(cap)?;
        let sampler = PairSampler::new(&q)?;
        Ok(Self {
            cap,
            eta,
            noise_delta: 0.0,
            mode: Mode::Sequential(q),
            sampler: Some(sampler),
        })
    }

    pub fn parallel(q: MatchingDistribution, cap: f64, eta: StepSize) -> Result<Self> {
        check_cap(cap)?;
        Ok(Self {
            cap,
            eta,
            noise_delta: 0.0,
            mode: Mode::Parallel(q),
            sampler: None,
        })
    }

    /// Adds `Unif[-√δ, √δ]` noise to both players of every game.
    pub fn with_noise(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(EloError::InvalidParameter(format!("noise delta must be >= 0, got {delta}")));
        }
        self.noise_delta = delta;
        Ok(self)
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn eta(&self) -> StepSize {
        self.eta
    }

    pub fn noise_delta(&self) -> f64 {
        self.noise_delta
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn n(&self) -> usize {
        match &self.mode {
            Mode::Sequential(q) => q.n(),
            Mode::Parallel(m) => m.graph().n(),
        }
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self.mode, Mode::Parallel(_))
    }

    /// Per-step pair weights: `q` itself, or the edge marginals of `q̃`.
    pub fn pair_weights(&self) -> MatchupDistribution {
        match &self.mode {
            Mode::Sequential(q) => q.clone(),
            Mode::Parallel(m) => m.marginal_distribution(),
        }
    }

    pub fn gap(&self) -> Result<f64> {
        gap_of(&self.pair_weights())
    }

    /// `⌈t_mix⌉` for these weights. Uncapped chains use `‖ρ‖∞` in place of
    /// the cap.
    pub fn mixing_steps(&self, skills: &RatingVector) -> Result<u64> {
        let m = if self.cap.is_finite() {
            self.cap
        } else {
            skills.max_abs()
        };
        Ok(mixing_time(m, self.eta, self.gap()?, self.n())?.ceil() as u64)
    }

    pub(crate) fn check_skills(&self, skills: &RatingVector) -> Result<()> {
        if skills.len() != self.n() {
            return Err(EloError::DimensionMismatch {
                expected: self.n(),
                got: skills.len(),
            });
        }
        if self.cap.is_finite() {
            if let Some((index, &value)) = skills
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| v.abs() > self.cap + 1e-12)
            {
                return Err(EloError::SkillsExceedCap {
                    index,
                    value,
                    cap: self.cap,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn check_start(&self, x0: &RatingVector) -> Result<()> {
        if x0.len() != self.n() {
            return Err(EloError::DimensionMismatch {
                expected: self.n(),
                got: x0.len(),
            });
        }
        if x0.max_abs() > self.cap + 1e-12 {
            return Err(EloError::InvalidParameter(format!(
                "start state exceeds cap {}",
                self.cap
            )));
        }
        Ok(())
    }
}

fn check_cap(cap: f64) -> Result<()> {
    if cap > 0.0 {
        Ok(())
    } else {
        Err(EloError::InvalidParameter(format!("cap must be positive, got {cap}")))
    }
}

/// The random choices of one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Draw {
    /// `(winner, loser)` for every game played.
    pub games: Vec<(usize, usize)>,
    /// `(player, noise)` added after the Elo updates.
    pub noise: Vec<(usize, f64)>,
    matching: Matching,
}

impl Draw {
    pub fn clear(&mut self) {
        self.games.clear();
        self.noise.clear();
    }

    /// A draw with the given games and no noise.
    pub fn from_games(games: Vec<(usize, usize)>) -> Self {
        Self {
            games,
            ..Self::default()
        }
    }

    /// Samples the next step's pairs, outcomes and noise into `self`.
    pub fn sample(&mut self, config: &EloConfig, skills: &[f64], rng: &mut RngStream) {
        self.clear();
        match &config.mode {
            Mode::Sequential(_) => {
                let (i, j) = config
                    .sampler
                    .as_ref()
                    .expect("sequential configs own a sampler")
                    .sample(rng);
                self.push_game(config, skills, i, j, rng);
            }
            Mode::Parallel(md) => {
                let mut m = std::mem::take(&mut self.matching);
                md.sample_into(rng, &mut m);
                for &(i, j) in &m {
                    self.push_game(config, skills, i, j, rng);
                }
                self.matching = m;
            }
        }
    }

    #[inline]
    fn push_game(&mut self, config: &EloConfig, skills: &[f64], i: usize, j: usize, rng: &mut RngStream) {
        let w = draw_winner(skills, i, j, rng);
        let l = if w == i { j } else { i };
        self.games.push((w, l));
        if config.noise_delta > 0.0 {
            let r = config.noise_delta.sqrt();
            self.noise.push((i, rng.uniform_in(-r, r)));
            self.noise.push((j, rng.uniform_in(-r, r)));
        }
    }
}

/// State of one Elo chain plus the accumulator behind its time average.
///
/// The time average counts the state at the start of each step
/// `s = T, …, T + t - 1`. Accumulation is lazy: coordinate `k` remembers when
/// it last changed, so a step that moves two players costs O(1).
#[derive(Clone, Debug)]
pub struct ChainState {
    ratings: RatingVector,
    step_count: u64,
    games: u64,
    burn_in: u64,
    running_sum: Vec<f64>,
    since: Vec<u64>,
    stamp: Vec<u64>,
    peak: f64,
    projector: Projector,
    draw: Draw,
}

impl ChainState {
    pub fn new(start: RatingVector, burn_in: u64) -> Self {
        let n = start.len();
        let peak = start.max_abs();
        Self {
            ratings: start,
            step_count: 0,
            games: 0,
            burn_in,
            running_sum: vec![0.0; n],
            since: vec![0; n],
            stamp: vec![0; n],
            peak,
            projector: Projector::new(),
            draw: Draw::default(),
        }
    }

    /// `X^0 = 0`.
    pub fn zeros(n: usize, cap: f64, burn_in: u64) -> Self {
        Self::new(RatingVector::zeros(n, cap), burn_in)
    }

    pub fn ratings(&self) -> &RatingVector {
        &self.ratings
    }

    pub fn values(&self) -> &[f64] {
        self.ratings.values()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Total games played; equals the step count for sequential chains.
    pub fn games(&self) -> u64 {
        self.games
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    /// Largest `|X_k^s|` over all visited states.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// Number of states that entered the time average so far.
    pub fn averaged_steps(&self) -> u64 {
        self.step_count.saturating_sub(self.burn_in)
    }

    /// `Σ_{s=T}^{now-1} X^s`.
    pub fn running_sum(&self) -> Vec<f64> {
        let now = self.step_count;
        self.running_sum
            .iter()
            .zip(self.ratings.values())
            .zip(&self.since)
            .map(|((acc, x), &since)| acc + x * now.saturating_sub(since.max(self.burn_in)) as f64)
            .collect()
    }

    /// `A^{t,T}` with `t` the number of averaged steps, or `None` before any.
    pub fn time_average(&self) -> Option<Vec<f64>> {
        let t = self.averaged_steps();
        if t == 0 {
            return None;
        }
        let mut s = self.running_sum();
        s.iter_mut().for_each(|v| *v /= t as f64);
        Some(s)
    }

    /// `(1/n)‖A^{t,T} − ρ‖₂²`.
    pub fn average_error(&self, skills: &[f64]) -> Option<f64> {
        let a = self.time_average()?;
        Some(sq_dist(&a, skills) / a.len() as f64)
    }

    #[inline]
    fn touch(&mut self, k: usize) {
        let end = self.step_count + 1;
        let from = self.since[k].max(self.burn_in);
        if end > from {
            self.running_sum[k] += self.ratings.values()[k] * (end - from) as f64;
        }
        self.since[k] = end;
    }

    fn touch_all(&mut self) {
        for k in 0..self.ratings.len() {
            self.touch(k);
        }
    }

    fn refresh_peak(&mut self) {
        self.peak = self.peak.max(self.ratings.max_abs());
    }

    /// Applies one draw. Skills are not re-validated here.
    pub fn apply(&mut self, config: &EloConfig, draw: &Draw) -> Result<()> {
        let eta = config.eta.get();
        let cap = config.cap;
        let mark = self.step_count + 1;
        for &(w, l) in &draw.games {
            for v in [w, l] {
                if self.stamp[v] == mark {
                    return Err(EloError::NotAMatching(v));
                }
                self.stamp[v] = mark;
            }
        }
        let mut outside = false;
        for &(w, l) in &draw.games {
            self.touch(w);
            self.touch(l);
            let x = self.ratings.values_mut();
            let d = eta * sigmoid(x[l] - x[w]);
            x[w] += d;
            x[l] -= d;
            outside |= x[w].abs() > cap || x[l].abs() > cap;
        }
        for &(k, u) in &draw.noise {
            self.ratings.values_mut()[k] += u;
        }
        let recenter = mark.is_multiple_of(RECENTER_EVERY);
        if !draw.noise.is_empty() || outside || recenter {
            self.touch_all();
            let x = self.ratings.values_mut();
            if cap.is_finite() {
                self.projector.project_in_place(x, cap);
            } else {
                center(x);
            }
            self.refresh_peak();
        } else {
            let x = self.ratings.values();
            for &(w, l) in &draw.games {
                self.peak = self.peak.max(x[w].abs()).max(x[l].abs());
            }
        }
        self.step_count = mark;
        self.games += draw.games.len() as u64;
        Ok(())
    }

    /// Samples and applies one step without checking the skills.
    #[inline]
    pub(crate) fn advance(&mut self, config: &EloConfig, skills: &[f64], rng: &mut RngStream) -> Result<()> {
        let mut draw = std::mem::take(&mut self.draw);
        draw.sample(config, skills, rng);
        let r = self.apply(config, &draw);
        self.draw = draw;
        r
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One step of a sequential chain.
pub fn elo_step(
    state: &mut ChainState,
    config: &EloConfig,
    true_skills: &RatingVector,
    rng: &mut RngStream,
) -> Result<()> {
    if config.is_parallel() {
        return Err(EloError::InvalidParameter("elo_step needs a sequential config".into()));
    }
    config.check_skills(true_skills)?;
    state.advance(config, true_skills.values(), rng)
}

/// One round of a parallel chain: every pair of a sampled matching plays.
pub fn parallel_elo_step(
    state: &mut ChainState,
    config: &EloConfig,
    true_skills: &RatingVector,
    rng: &mut RngStream,
) -> Result<()> {
    if !config.is_parallel() {
        return Err(EloError::InvalidParameter(
            "parallel_elo_step needs a parallel config".into(),
        ));
    }
    config.check_skills(true_skills)?;
    state.advance(config, true_skills.values(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ComparisonGraph;

    fn eta(v: f64) -> StepSize {
        StepSize::new(v).unwrap()
    }

    fn two_player(cap: f64) -> EloConfig {
        EloConfig::sequential(MatchupDistribution::uniform(ComparisonGraph::path(2)), cap, eta(0.1))
            .unwrap()
    }

    fn state(values: Vec<f64>, cap: f64) -> ChainState {
        ChainState::new(RatingVector::new(values, cap).unwrap(), 0)
    }

    #[test]
    fn even_game_moves_half_eta() {
        let cfg = two_player(1.0);
        let mut s = state(vec![0.0, 0.0], 1.0);
        s.apply(&cfg, &Draw::from_games(vec![(0, 1)])).unwrap();
        assert!((s.values()[0] - 0.05).abs() < 1e-15);
        assert!((s.values()[1] + 0.05).abs() < 1e-15);
    }

    #[test]
    fn upset_moves_more() {
        let cfg = two_player(10.0);
        let mut s = state(vec![1.0, -1.0], 10.0);
        s.apply(&cfg, &Draw::from_games(vec![(1, 0)])).unwrap();
        assert!((s.values()[0] - 0.9119202922022118).abs() < 1e-12);
        assert!((s.values()[1] + 0.9119202922022118).abs() < 1e-12);
    }

    #[test]
    fn capped_overshoot_is_projected_back() {
        let cfg = two_player(1.0);
        let mut s = state(vec![1.0, -1.0], 1.0);
        s.apply(&cfg, &Draw::from_games(vec![(0, 1)])).unwrap();
        assert_eq!(s.values(), &[1.0, -1.0]);
    }

    #[test]
    fn parallel_two_games() {
        let g = ComparisonGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let md = MatchingDistribution::from_atoms(g, vec![(vec![(0, 1), (2, 3)], 1.0)]).unwrap();
        let cfg = EloConfig::parallel(md, 1.0, eta(0.1)).unwrap();
        let mut s = ChainState::zeros(4, 1.0, 0);
        s.apply(&cfg, &Draw::from_games(vec![(0, 1), (2, 3)])).unwrap();
        let want = [0.05, -0.05, 0.05, -0.05];
        for (a, b) in s.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(s.games(), 2);
    }

    #[test]
    fn overlapping_games_rejected() {
        let cfg = EloConfig::sequential(
            MatchupDistribution::uniform(ComparisonGraph::complete(3)),
            1.0,
            eta(0.1),
        )
        .unwrap();
        let mut s = ChainState::zeros(3, 1.0, 0);
        assert_eq!(
            s.apply(&cfg, &Draw::from_games(vec![(0, 1), (1, 2)])),
            Err(EloError::NotAMatching(1))
        );
    }

    #[test]
    fn empty_matching_only_counts_the_step() {
        let g = ComparisonGraph::path(2);
        let md = MatchingDistribution::from_atoms(g, vec![(vec![], 1.0)]).unwrap();
        let cfg = EloConfig::parallel(md, 1.0, eta(0.1)).unwrap();
        let skills = RatingVector::new(vec![0.5, -0.5], 1.0).unwrap();
        let mut s = ChainState::zeros(2, 1.0, 0);
        parallel_elo_step(&mut s, &cfg, &skills, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0]);
        assert_eq!(s.step_count(), 1);
        assert_eq!(s.games(), 0);
    }

    #[test]
    fn single_pair_matching_matches_sequential() {
        let g = ComparisonGraph::path(3);
        let md = MatchingDistribution::from_atoms(g.clone(), vec![(vec![(0, 1)], 1.0)]).unwrap();
        let par = EloConfig::parallel(md, 1.0, eta(0.1)).unwrap().with_noise(0.01).unwrap();
        let q = MatchupDistribution::new(g, vec![1.0, 0.0]).unwrap();
        let seq = EloConfig::sequential(q, 1.0, eta(0.1)).unwrap().with_noise(0.01).unwrap();
        let skills = RatingVector::new(vec![0.3, 0.2, -0.5], 1.0).unwrap();
        let (mut a, mut b) = (ChainState::zeros(3, 1.0, 0), ChainState::zeros(3, 1.0, 0));
        let (mut ra, mut rb) = (RngStream::new(9, 0), RngStream::new(9, 0));
        for _ in 0..1000 {
            parallel_elo_step(&mut a, &par, &skills, &mut ra).unwrap();
            elo_step(&mut b, &seq, &skills, &mut rb).unwrap();
        }
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn skills_over_cap_rejected() {
        let cfg = two_player(0.5);
        let skills = RatingVector::new(vec![0.8, -0.8], 1.0).unwrap();
        let mut s = ChainState::zeros(2, 0.5, 0);
        assert!(matches!(
            elo_step(&mut s, &cfg, &skills, &mut RngStream::new(0, 0)),
            Err(EloError::SkillsExceedCap { index: 0, .. })
        ));
    }

    #[test]
    fn time_average_counts_start_states() {
        let cfg = two_player(1.0);
        let mut s = ChainState::zeros(2, 1.0, 1);
        assert!(s.time_average().is_none());
        s.apply(&cfg, &Draw::from_games(vec![(0, 1)])).unwrap();
        // X^0 is burn-in; nothing averaged yet.
        assert!(s.time_average().is_none());
        s.apply(&cfg, &Draw::from_games(vec![(0, 1)])).unwrap();
        s.apply(&cfg, &Draw::from_games(vec![(1, 0)])).unwrap();
        let x1 = 0.05;
        let d = 0.1 * sigmoid(-2.0 * x1);
        let x2 = x1 + d;
        let a = s.time_average().unwrap();
        assert!((a[0] - (x1 + x2) / 2.0).abs() < 1e-15);

        let mut naive = ChainState::zeros(2, 1.0, 0);
        assert!(naive.time_average().is_none());
        naive.apply(&cfg, &Draw::from_games(vec![(0, 1)])).unwrap();
        assert_eq!(naive.time_average().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn noise_keeps_zero_sum_and_cap() {
        let q = MatchupDistribution::uniform(ComparisonGraph::complete(5));
        let cfg = EloConfig::sequential(q, 0.5, eta(0.2)).unwrap().with_noise(0.05).unwrap();
        let skills = RatingVector::new(vec![0.5, 0.25, 0.0, -0.25, -0.5], 0.5).unwrap();
        let mut s = ChainState::zeros(5, 0.5, 0);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..5000 {
            elo_step(&mut s, &cfg, &skills, &mut rng).unwrap();
            assert!(s.ratings().max_abs() <= 0.5 + 1e-12);
            assert!(s.values().iter().sum::<f64>().abs() < 1e-9);
        }
        assert!(s.peak() <= 0.5 + 1e-12);
    }
}
