use std::fmt;
use std::io::Write;

use serde::Serialize;

use super::{ChainState, EloConfig};
use crate::error::{EloError, Result};
use crate::rating::RatingVector;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Games,
    Rounds,
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeUnit::Games => "games",
            TimeUnit::Rounds => "rounds",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    /// `(1/n)‖A^{t,T} − ρ‖₂²`.
    Error,
    /// `max_{s ≤ t} max_k |X_k^s|`.
    MaxAbs,
    /// Games played so far, recorded against rounds.
    Games,
    /// The rating of one player.
    Rating(usize),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Error => f.write_str("error"),
            Metric::MaxAbs => f.write_str("maxabs"),
            Metric::Games => f.write_str("games"),
            Metric::Rating(k) => write!(f, "x{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub replication: usize,
    pub time_unit: TimeUnit,
    pub step: u64,
    pub metric: Metric,
    pub value: f64,
}

/// Rows of per-checkpoint statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub rows: Vec<TraceRow>,
}

impl TrajectoryRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn set_replication(&mut self, replication: usize) {
        self.rows.iter_mut().for_each(|r| r.replication = replication);
    }

    pub fn append(&mut self, other: &mut TrajectoryRecord) {
        self.rows.append(&mut other.rows);
    }

    /// Rows for one metric and unit, in time order.
    pub fn series(&self, metric: Metric, unit: TimeUnit) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && r.time_unit == unit)
            .map(|r| (r.step, r.value))
            .collect()
    }

    /// Last value of a series, if any.
    pub fn last(&self, metric: Metric, unit: TimeUnit) -> Option<(u64, f64)> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.metric == metric && r.time_unit == unit)
            .map(|r| (r.step, r.value))
    }

    /// Writes `replication,step,metric,value` rows for one time unit.
    pub fn write_csv<W: Write>(&self, mut out: W, unit: TimeUnit) -> Result<()> {
        writeln!(out, "replication,step,metric,value")?;
        for r in self.rows.iter().filter(|r| r.time_unit == unit) {
            writeln!(out, "{},{},{},{}", r.replication, r.step, r.metric, r.value)?;
        }
        Ok(())
    }
}

/// Time position handed to observers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clock {
    /// Steps (rounds, for parallel chains) since the end of burn-in.
    pub steps: u64,
    /// Games since the end of burn-in.
    pub games: u64,
}

/// Per-checkpoint hook into [`run_chain`].
pub trait Observer {
    /// Next averaged step count at which this observer wants to be called.
    fn next_due(&self) -> Option<u64>;
    fn observe(&mut self, state: &ChainState, clock: Clock);
    /// Moves collected rows into `out`.
    fn finish(&mut self, out: &mut TrajectoryRecord);
}

/// Roughly `per_decade` log-spaced integers in `[1, max]`, always ending at
/// `max`.
pub fn log_checkpoints(max: u64, per_decade: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    if max == 0 {
        return out;
    }
    let top = (max as f64).log10();
    let count = (top * per_decade as f64).ceil() as usize;
    for i in 0..=count {
        let v = (10f64.powf(i as f64 / per_decade as f64)).round() as u64;
        let v = v.clamp(1, max);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    if out.last() != Some(&max) {
        out.push(max);
    }
    out
}

#[derive(Clone, Debug)]
struct Schedule {
    checkpoints: Vec<u64>,
    next: usize,
    both_units: bool,
    last_games: Option<u64>,
}

impl Schedule {
    fn new(mut checkpoints: Vec<u64>, both_units: bool) -> Self {
        checkpoints.sort_unstable();
        checkpoints.dedup();
        checkpoints.retain(|&c| c > 0);
        Self {
            checkpoints,
            next: 0,
            both_units,
            last_games: None,
        }
    }

    fn due(&self) -> Option<u64> {
        self.checkpoints.get(self.next).copied()
    }

    fn emit(&mut self, rows: &mut Vec<TraceRow>, clock: Clock, metric: Metric, value: f64) {
        if self.last_games.is_none_or(|g| clock.games > g) {
            rows.push(TraceRow {
                replication: 0,
                time_unit: TimeUnit::Games,
                step: clock.games,
                metric,
                value,
            });
        }
        if self.both_units {
            rows.push(TraceRow {
                replication: 0,
                time_unit: TimeUnit::Rounds,
                step: clock.steps,
                metric,
                value,
            });
        }
    }

    fn advance(&mut self, clock: Clock) {
        if self.last_games.is_none_or(|g| clock.games > g) {
            self.last_games = Some(clock.games);
        }
        while self.due().is_some_and(|c| c <= clock.steps) {
            self.next += 1;
        }
    }
}

/// Records `(1/n)‖A − ρ‖₂²` at checkpoints. Parallel chains get both a games
/// and a rounds axis.
#[derive(Clone, Debug)]
pub struct ErrorObserver {
    skills: Vec<f64>,
    schedule: Schedule,
    rows: Vec<TraceRow>,
}

impl ErrorObserver {
    pub fn new(skills: &RatingVector, checkpoints: Vec<u64>, both_units: bool) -> Self {
        Self {
            skills: skills.values().to_vec(),
            schedule: Schedule::new(checkpoints, both_units),
            rows: Vec::new(),
        }
    }
}

impl Observer for ErrorObserver {
    fn next_due(&self) -> Option<u64> {
        self.schedule.due()
    }

    fn observe(&mut self, state: &ChainState, clock: Clock) {
        if let Some(err) = state.average_error(&self.skills) {
            self.schedule.emit(&mut self.rows, clock, Metric::Error, err);
        }
        self.schedule.advance(clock);
    }

    fn finish(&mut self, out: &mut TrajectoryRecord) {
        out.rows.append(&mut self.rows);
    }
}

/// Records the running maximum of `|X_k|` at checkpoints.
#[derive(Clone, Debug)]
pub struct MaxAbsObserver {
    schedule: Schedule,
    rows: Vec<TraceRow>,
}

impl MaxAbsObserver {
    pub fn new(checkpoints: Vec<u64>, both_units: bool) -> Self {
        Self {
            schedule: Schedule::new(checkpoints, both_units),
            rows: Vec::new(),
        }
    }
}

impl Observer for MaxAbsObserver {
    fn next_due(&self) -> Option<u64> {
        self.schedule.due()
    }

    fn observe(&mut self, state: &ChainState, clock: Clock) {
        self.schedule.emit(&mut self.rows, clock, Metric::MaxAbs, state.peak());
        self.schedule.advance(clock);
    }

    fn finish(&mut self, out: &mut TrajectoryRecord) {
        out.rows.append(&mut self.rows);
    }
}

/// Records every rating at checkpoints.
#[derive(Clone, Debug)]
pub struct TraceObserver {
    schedule: Schedule,
    rows: Vec<TraceRow>,
}

impl TraceObserver {
    pub fn new(checkpoints: Vec<u64>, both_units: bool) -> Self {
        Self {
            schedule: Schedule::new(checkpoints, both_units),
            rows: Vec::new(),
        }
    }
}

impl Observer for TraceObserver {
    fn next_due(&self) -> Option<u64> {
        self.schedule.due()
    }

    fn observe(&mut self, state: &ChainState, clock: Clock) {
        for (k, &v) in state.values().iter().enumerate() {
            self.schedule.emit(&mut self.rows, clock, Metric::Rating(k), v);
        }
        self.schedule.advance(clock);
    }

    fn finish(&mut self, out: &mut TrajectoryRecord) {
        out.rows.append(&mut self.rows);
    }
}

/// Records cumulative games against rounds at checkpoints.
#[derive(Clone, Debug)]
pub struct GamesObserver {
    checkpoints: Vec<u64>,
    next: usize,
    rows: Vec<TraceRow>,
}

impl GamesObserver {
    pub fn new(checkpoints: Vec<u64>) -> Self {
        Self {
            checkpoints: Schedule::new(checkpoints, true).checkpoints,
            next: 0,
            rows: Vec::new(),
        }
    }
}

impl Observer for GamesObserver {
    fn next_due(&self) -> Option<u64> {
        self.checkpoints.get(self.next).copied()
    }

    fn observe(&mut self, _state: &ChainState, clock: Clock) {
        self.rows.push(TraceRow {
            replication: 0,
            time_unit: TimeUnit::Rounds,
            step: clock.steps,
            metric: Metric::Games,
            value: clock.games as f64,
        });
        while self.next_due().is_some_and(|c| c <= clock.steps) {
            self.next += 1;
        }
    }

    fn finish(&mut self, out: &mut TrajectoryRecord) {
        out.rows.append(&mut self.rows);
    }
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    /// `A^{t,T}`.
    pub time_average: Vec<f64>,
    pub trace: TrajectoryRecord,
    pub state: ChainState,
    /// Games played after burn-in.
    pub games: u64,
}

/// Runs `burn_in` steps, then `steps` averaged steps, from `X^0 = 0`.
pub fn run_chain(
    config: &EloConfig,
    true_skills: &RatingVector,
    burn_in: u64,
    steps: u64,
    rng: &mut RngStream,
    observers: &mut [&mut dyn Observer],
) -> Result<ChainOutput> {
    let start = RatingVector::zeros(config.n(), config.cap());
    run_chain_from(config, true_skills, start, burn_in, steps, rng, observers)
}

/// [`run_chain`] from an arbitrary feasible start.
pub fn run_chain_from(
    config: &EloConfig,
    true_skills: &RatingVector,
    start: RatingVector,
    burn_in: u64,
    steps: u64,
    rng: &mut RngStream,
    observers: &mut [&mut dyn Observer],
) -> Result<ChainOutput> {
    if steps == 0 {
        return Err(EloError::InvalidParameter("need at least one averaged step".into()));
    }
    config.check_skills(true_skills)?;
    config.check_start(&start)?;
    let skills = true_skills.values();
    let mut state = ChainState::new(start, burn_in);
    for _ in 0..burn_in {
        state.advance(config, skills, rng)?;
    }
    let games0 = state.games();
    let mut due = next_due(observers);
    for t in 1..=steps {
        state.advance(config, skills, rng)?;
        if due.is_some_and(|d| d <= t) {
            let clock = Clock {
                steps: t,
                games: state.games() - games0,
            };
            for obs in observers.iter_mut() {
                if obs.next_due().is_some_and(|d| d <= t) {
                    obs.observe(&state, clock);
                }
            }
            due = next_due(observers);
        }
    }
    let mut trace = TrajectoryRecord::new();
    for obs in observers.iter_mut() {
        obs.finish(&mut trace);
    }
    Ok(ChainOutput {
        time_average: state.time_average().expect("steps >= 1"),
        trace,
        games: state.games() - games0,
        state,
    })
}

fn next_due(observers: &[&mut dyn Observer]) -> Option<u64> {
    observers.iter().filter_map(|o| o.next_due()).min()
}
