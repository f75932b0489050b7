use std::fmt::{self, Write as _};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graphs::GraphSpec;
use super::skills::{sample_skills, SkillSpec};
use crate::design::{build_matching_distribution, optimize, DesignProblem, Regime};
use crate::elo::{
    log_checkpoints, run_chain, EloConfig, ErrorObserver, GamesObserver, MaxAbsObserver, Metric,
    Observer, TimeUnit, TrajectoryRecord,
};
use crate::error::{EloError, Result};
use crate::graph::{format_edge_list, ComparisonGraph, MatchupDistribution};
use crate::rating::{RatingVector, StepSize};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Uniform weights over the edges.
    Uniform,
    /// Sequential weights maximizing the gap over the simplex.
    DesignSeq,
    /// Matchings realizing the substochastic gap optimum.
    DesignPar,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Uniform => "uniform",
            ScheduleKind::DesignSeq => "design_seq",
            ScheduleKind::DesignPar => "design_par",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Error,
    Maxabs,
    GamesVsRounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(v) => v,
    })
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::Error]
}

fn default_per_decade() -> usize {
    40
}

fn default_design_budget() -> usize {
    5000
}

/// One experiment, as read from JSON.
///
/// `steps` is a budget in games for every schedule; a parallel schedule runs
/// `⌈steps / N⌉` rounds so that the expected number of games matches. A
/// missing or `null` cap means uncapped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub graph: GraphSpec,
    pub skills: SkillSpec,
    #[serde(deserialize_with = "one_or_many")]
    pub schedule: Vec<ScheduleKind>,
    pub eta: f64,
    #[serde(default)]
    pub cap: Option<f64>,
    #[serde(default)]
    pub burn_in: u64,
    pub steps: u64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default = "default_per_decade")]
    pub checkpoints_per_decade: usize,
    #[serde(default = "default_design_budget")]
    pub design_budget: usize,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EloError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn cap_value(&self) -> f64 {
        self.cap.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(EloError::InvalidParameter("replications must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(EloError::InvalidParameter("steps must be >= 1".into()));
        }
        if self.schedule.is_empty() {
            return Err(EloError::InvalidParameter("no schedule given".into()));
        }
        if self.checkpoints_per_decade == 0 {
            return Err(EloError::InvalidParameter("checkpoints_per_decade must be >= 1".into()));
        }
        StepSize::new(self.eta)?;
        Ok(())
    }
}

/// A schedule with its chain configuration and spectral summary.
#[derive(Clone, Debug)]
pub struct PreparedSchedule {
    pub kind: ScheduleKind,
    pub config: EloConfig,
    /// Gap of the per-step pair weights (edge marginals for matchings).
    pub gap: f64,
    /// Gap of the optimized weights before realization as matchings.
    pub design_gap: Option<f64>,
    pub mean_matching_size: Option<f64>,
    /// Steps (rounds) per replication.
    pub steps: u64,
}

pub fn prepare_schedule(
    kind: ScheduleKind,
    graph: &ComparisonGraph,
    eta: StepSize,
    cap: f64,
    game_budget: u64,
    design_budget: usize,
) -> Result<PreparedSchedule> {
    match kind {
        ScheduleKind::Uniform | ScheduleKind::DesignSeq => {
            let q = if kind == ScheduleKind::Uniform {
                MatchupDistribution::uniform(graph.clone())
            } else {
                let problem = DesignProblem::new(graph.clone(), Regime::Continuous).with_budget(design_budget);
                optimize(&problem)?.weights
            };
            let config = EloConfig::sequential(q, cap, eta)?;
            Ok(PreparedSchedule {
                kind,
                gap: config.gap()?,
                design_gap: None,
                mean_matching_size: None,
                steps: game_budget,
                config,
            })
        }
        ScheduleKind::DesignPar => {
            let problem = DesignProblem::new(graph.clone(), Regime::Discrete).with_budget(design_budget);
            let outcome = optimize(&problem)?;
            let md = build_matching_distribution(&outcome.weights)?;
            let mean = md.mean_size();
            let config = EloConfig::parallel(md, cap, eta)?;
            Ok(PreparedSchedule {
                kind,
                gap: config.gap()?,
                design_gap: Some(outcome.gap),
                mean_matching_size: Some(mean),
                steps: (game_budget as f64 / mean).ceil() as u64,
                config,
            })
        }
    }
}

/// One chain of one replication.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub replication: usize,
    pub schedule: ScheduleKind,
    pub trace: TrajectoryRecord,
    pub final_error: f64,
    pub games: u64,
    pub rounds: u64,
    pub max_abs: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub graph: ComparisonGraph,
    pub schedules: Vec<PreparedSchedule>,
    /// Successful runs, ordered by replication then schedule.
    pub runs: Vec<RunResult>,
    /// Replications that failed, with the error message.
    pub failures: Vec<(usize, String)>,
}

#[derive(Serialize)]
struct ScheduleSummary {
    schedule: String,
    gap: f64,
    design_gap: Option<f64>,
    mean_matching_size: Option<f64>,
    steps: u64,
    final_error: Vec<f64>,
    final_error_mean: f64,
    games: Vec<u64>,
    max_abs: Vec<f64>,
}

#[derive(Serialize)]
struct Summary {
    n: usize,
    edges: usize,
    replications: usize,
    schedules: Vec<ScheduleSummary>,
    failures: Vec<(usize, String)>,
}

impl ExperimentOutput {
    pub fn runs_for(&self, kind: ScheduleKind) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.schedule == kind)
    }

    pub fn schedule(&self, kind: ScheduleKind) -> Option<&PreparedSchedule> {
        self.schedules.iter().find(|s| s.kind == kind)
    }

    /// `replication,schedule,time_unit,step,metric,value`, sorted by
    /// replication, schedule, unit, metric, then time.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("replication,schedule,time_unit,step,metric,value\n");
        for run in &self.runs {
            let mut rows: Vec<_> = run.trace.rows.iter().collect();
            rows.sort_by_key(|r| (r.time_unit, r.metric, r.step));
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    run.replication, run.schedule, r.time_unit, r.step, r.metric, r.value
                )
                .expect("writing to a String");
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let replications = self
            .runs
            .iter()
            .map(|r| r.replication + 1)
            .max()
            .unwrap_or(0);
        let schedules = self
            .schedules
            .iter()
            .map(|s| {
                let runs: Vec<&RunResult> = self.runs_for(s.kind).collect();
                let final_error: Vec<f64> = runs.iter().map(|r| r.final_error).collect();
                ScheduleSummary {
                    schedule: s.kind.to_string(),
                    gap: s.gap,
                    design_gap: s.design_gap,
                    mean_matching_size: s.mean_matching_size,
                    steps: s.steps,
                    final_error_mean: final_error.iter().sum::<f64>() / final_error.len().max(1) as f64,
                    final_error,
                    games: runs.iter().map(|r| r.games).collect(),
                    max_abs: runs.iter().map(|r| r.max_abs).collect(),
                }
            })
            .collect();
        let summary = Summary {
            n: self.graph.n(),
            edges: self.graph.num_edges(),
            replications,
            schedules,
            failures: self.failures.clone(),
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }

    /// Writes `trajectory.csv`, `summary.json` and `graph.edgelist` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trajectory.csv"), self.trajectory_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json() + "\n")?;
        std::fs::write(dir.join("graph.edgelist"), format_edge_list(&self.graph, None))?;
        Ok(())
    }
}

struct Plan<'a> {
    graph: &'a ComparisonGraph,
    skills: &'a SkillSpec,
    schedules: &'a [PreparedSchedule],
    metrics: &'a [MetricKind],
    cap: f64,
    burn_in: u64,
    per_decade: usize,
    seed: u64,
    extra_checkpoints: Vec<u64>,
}

impl Plan<'_> {
    fn replicate(&self, rep: usize) -> Result<Vec<RunResult>> {
        let base = rep as u64 * 16;
        let skills = sample_skills(self.skills, self.graph.n(), self.cap, &mut RngStream::new(self.seed, base))?;
        let skills = RatingVector::new(skills.into_values(), self.cap)?;
        let mut out = Vec::with_capacity(self.schedules.len());
        for (s, sched) in self.schedules.iter().enumerate() {
            let mut rng = RngStream::new(self.seed, base + 1 + s as u64);
            out.push(self.run_one(rep, sched, &skills, &mut rng)?);
        }
        Ok(out)
    }

    fn run_one(
        &self,
        rep: usize,
        sched: &PreparedSchedule,
        skills: &RatingVector,
        rng: &mut RngStream,
    ) -> Result<RunResult> {
        let parallel = sched.config.is_parallel();
        let mut cps = log_checkpoints(sched.steps, self.per_decade);
        if !parallel {
            cps.extend(self.extra_checkpoints.iter().filter(|&&c| c <= sched.steps));
        }
        let mut error = ErrorObserver::new(skills, cps.clone(), parallel);
        let mut maxabs = MaxAbsObserver::new(cps.clone(), parallel);
        let mut games = GamesObserver::new(cps);
        let mut observers: Vec<&mut dyn Observer> = Vec::new();
        if self.metrics.contains(&MetricKind::Error) {
            observers.push(&mut error);
        }
        if self.metrics.contains(&MetricKind::Maxabs) {
            observers.push(&mut maxabs);
        }
        if parallel && self.metrics.contains(&MetricKind::GamesVsRounds) {
            observers.push(&mut games);
        }
        let out = run_chain(&sched.config, skills, self.burn_in, sched.steps, rng, &mut observers)?;
        let mut trace = out.trace;
        trace.set_replication(rep);
        Ok(RunResult {
            replication: rep,
            schedule: sched.kind,
            trace,
            final_error: out.state.average_error(skills.values()).unwrap_or(f64::NAN),
            games: out.games,
            rounds: sched.steps,
            max_abs: out.state.peak(),
        })
    }
}

fn execute(plan: &Plan<'_>, replications: usize) -> (Vec<RunResult>, Vec<(usize, String)>) {
    let results: Vec<Result<Vec<RunResult>>> = (0..replications)
        .into_par_iter()
        .map(|rep| plan.replicate(rep))
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => runs.extend(v),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    (runs, failures)
}

/// Runs every replication of `spec`. Replications run in parallel with
/// independent streams; output is ordered and byte-for-byte reproducible.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let graph = spec.graph.build()?;
    if !graph.is_connected() {
        return Err(EloError::Disconnected);
    }
    let eta = StepSize::new(spec.eta)?;
    let cap = spec.cap_value();
    let schedules = spec
        .schedule
        .iter()
        .map(|&k| prepare_schedule(k, &graph, eta, cap, spec.steps, spec.design_budget))
        .collect::<Result<Vec<_>>>()?;
    // Sequential runs also report at the parallel round counts, so that
    // schedules can be compared at equal rounds.
    let extra_checkpoints: Vec<u64> = schedules
        .iter()
        .filter(|s| s.config.is_parallel())
        .map(|s| s.steps)
        .collect();
    let plan = Plan {
        graph: &graph,
        skills: &spec.skills,
        schedules: &schedules,
        metrics: &spec.metrics,
        cap,
        burn_in: spec.burn_in,
        per_decade: spec.checkpoints_per_decade,
        seed: spec.seed,
        extra_checkpoints,
    };
    let (runs, failures) = execute(&plan, spec.replications);
    Ok(ExperimentOutput {
        graph,
        schedules,
        runs,
        failures,
    })
}

/// Final errors of one replication under the three schedules.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub replication: usize,
    /// `[uniform, design_seq, design_par]` after the full game budget.
    pub games_error: [f64; 3],
    /// The same, after as many steps as the parallel schedule's rounds.
    pub rounds_error: [f64; 3],
    pub parallel_games: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleComparison {
    /// `[uniform, design_seq, design_par marginals]`.
    pub gaps: [f64; 3],
    /// Substochastic optimum before realization as matchings.
    pub discrete_gap: f64,
    pub mean_matching_size: f64,
    pub rounds: u64,
    pub rows: Vec<ComparisonRow>,
}

/// Options for [`compare_schedules`].
#[derive(Clone, Debug)]
pub struct CompareOptions {
    pub eta: f64,
    pub cap: f64,
    pub replications: usize,
    pub design_budget: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            eta: 0.1,
            cap: f64::INFINITY,
            replications: 10,
            design_budget: 5000,
        }
    }
}

/// Runs uniform, optimized sequential and optimized parallel schedules on the
/// same skills with matched expected game counts.
pub fn compare_schedules(
    graph: &ComparisonGraph,
    skills: &SkillSpec,
    budget_games: u64,
    seed: u64,
    options: &CompareOptions,
) -> Result<ScheduleComparison> {
    if budget_games < 1000 {
        return Err(EloError::InvalidParameter("game budget must be >= 1000".into()));
    }
    if options.replications == 0 {
        return Err(EloError::InvalidParameter("replications must be >= 1".into()));
    }
    if !graph.is_connected() {
        return Err(EloError::Disconnected);
    }
    let eta = StepSize::new(options.eta)?;
    let kinds = [ScheduleKind::Uniform, ScheduleKind::DesignSeq, ScheduleKind::DesignPar];
    let schedules = kinds
        .iter()
        .map(|&k| prepare_schedule(k, graph, eta, options.cap, budget_games, options.design_budget))
        .collect::<Result<Vec<_>>>()?;
    let rounds = schedules[2].steps;
    let plan = Plan {
        graph,
        skills,
        schedules: &schedules,
        metrics: &[MetricKind::Error],
        cap: options.cap,
        burn_in: 0,
        per_decade: 10,
        seed,
        extra_checkpoints: vec![rounds],
    };
    let (runs, failures) = execute(&plan, options.replications);
    if let Some((rep, msg)) = failures.first() {
        return Err(EloError::Internal(format!("replication {rep} failed: {msg}")));
    }
    let error_at = |run: &RunResult, unit: TimeUnit, step: u64| {
        run.trace
            .series(Metric::Error, unit)
            .into_iter()
            .find(|&(s, _)| s == step)
            .map(|(_, v)| v)
            .unwrap_or(f64::NAN)
    };
    let rows = runs
        .chunks(3)
        .map(|c| ComparisonRow {
            replication: c[0].replication,
            games_error: [c[0].final_error, c[1].final_error, c[2].final_error],
            rounds_error: [
                error_at(&c[0], TimeUnit::Games, rounds),
                error_at(&c[1], TimeUnit::Games, rounds),
                c[2].final_error,
            ],
            parallel_games: c[2].games,
        })
        .collect();
    Ok(ScheduleComparison {
        gaps: [schedules[0].gap, schedules[1].gap, schedules[2].gap],
        discrete_gap: schedules[2].design_gap.unwrap_or(f64::NAN),
        mean_matching_size: schedules[2].mean_matching_size.unwrap_or(f64::NAN),
        rounds,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec::from_json(
            r#"{
                "graph": {"kind": "dumbbell", "clique_size": 4, "k": 1},
                "skills": {"kind": "gaussian_blocks", "means": [1.0, 2.0], "sd": 0.2},
                "schedule": ["uniform", "design_seq", "design_par"],
                "eta": 0.1,
                "steps": 2000,
                "replications": 3,
                "seed": 11,
                "metrics": ["error", "maxabs", "games_vs_rounds"],
                "design_budget": 300
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn schedule_accepts_a_single_string() {
        let spec = ExperimentSpec::from_json(
            r#"{"graph": {"kind": "complete", "n": 5},
                "skills": {"kind": "uniform", "lo": -1, "hi": 1},
                "schedule": "uniform", "eta": 0.1, "steps": 10,
                "replications": 1, "seed": 0}"#,
        )
        .unwrap();
        assert_eq!(spec.schedule, vec![ScheduleKind::Uniform]);
        assert_eq!(spec.metrics, vec![MetricKind::Error]);
        assert!(spec.cap_value().is_infinite());
    }

    #[test]
    fn zero_steps_rejected() {
        let mut spec = small_spec();
        spec.steps = 0;
        assert!(run_experiment(&spec).is_err());
        let mut spec = small_spec();
        spec.replications = 0;
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn output_is_deterministic_and_ordered() {
        let spec = small_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.trajectory_csv(), b.trajectory_csv());
        assert_eq!(a.summary_json(), b.summary_json());
        assert!(a.failures.is_empty());
        assert_eq!(a.runs.len(), 9);

        let csv = a.trajectory_csv();
        let mut last: std::collections::HashMap<(String, String, String, String), u64> =
            Default::default();
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let key = (f[0].to_string(), f[1].to_string(), f[2].to_string(), f[4].to_string());
            let step: u64 = f[3].parse().unwrap();
            if let Some(prev) = last.insert(key, step) {
                assert!(step > prev, "{line}");
            }
        }
    }

    #[test]
    fn parallel_games_match_matching_sizes() {
        let out = run_experiment(&small_spec()).unwrap();
        for run in out.runs_for(ScheduleKind::DesignPar) {
            let games = run.trace.series(Metric::Games, TimeUnit::Rounds);
            assert_eq!(games.last().unwrap().1 as u64, run.games);
            assert!(games.windows(2).all(|w| w[0].1 <= w[1].1));
            let err_rounds = run.trace.series(Metric::Error, TimeUnit::Rounds);
            assert_eq!(err_rounds.last().unwrap().0, run.rounds);
        }
    }

    #[test]
    fn writes_output_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&small_spec()).unwrap();
        out.write(dir.path()).unwrap();
        for f in ["trajectory.csv", "summary.json", "graph.edgelist"] {
            assert!(dir.path().join(f).exists());
        }
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["n"], 8);
        assert_eq!(summary["schedules"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn comparison_reports_gaps() {
        let g = crate::bench::make_dumbbell(4, 1).unwrap();
        let skills = SkillSpec::GaussianBlocks { means: vec![1.0, 2.0], sd: 0.2 };
        let opts = CompareOptions {
            replications: 2,
            design_budget: 300,
            ..CompareOptions::default()
        };
        let cmp = compare_schedules(&g, &skills, 1000, 3, &opts).unwrap();
        assert!(cmp.gaps[0] < cmp.gaps[1]);
        assert_eq!(cmp.rows.len(), 2);
        assert!(cmp.rows.iter().all(|r| r.rounds_error.iter().all(|v| v.is_finite())));
        assert!(compare_schedules(&g, &skills, 999, 3, &opts).is_err());
    }
}
