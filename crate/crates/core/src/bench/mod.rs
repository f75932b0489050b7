//! Graph generators, skill samplers and the experiment runner.

mod experiment;
mod graphs;
mod skills;

pub use experiment::{
    compare_schedules, prepare_schedule, run_experiment, CompareOptions, ComparisonRow,
    ExperimentOutput, ExperimentSpec, MetricKind, PreparedSchedule, RunResult, ScheduleComparison,
    ScheduleKind,
};
pub use graphs::{
    default_cut, erdos_renyi_giant, make_dumbbell, make_pyramidal, make_pyramidal_with_cut,
    GraphSpec, RESAMPLE_BUDGET,
};
pub use skills::{parse_skills, read_skills, sample_skills, SkillSpec, SKILL_RESAMPLE_BUDGET};

use crate::graph::ComparisonGraph;

pub fn path(n: usize) -> ComparisonGraph {
    ComparisonGraph::path(n)
}

pub fn star(n: usize) -> ComparisonGraph {
    ComparisonGraph::star(n)
}

pub fn complete(n: usize) -> ComparisonGraph {
    ComparisonGraph::complete(n)
}
