use elomix::bench::{make_dumbbell, run_experiment, ExperimentSpec, GraphSpec, ScheduleKind};
use elomix::elo::{Metric, TimeUnit};

fn spec(seed: u64) -> ExperimentSpec {
    ExperimentSpec::from_json(&format!(
        r#"{{"graph": {{"kind": "dumbbell", "clique_size": 5, "k": 2}},
            "skills": {{"kind": "gaussian_blocks", "means": [0.0, 0.5], "sd": 0.2}},
            "schedule": ["uniform", "design_seq", "design_par"],
            "eta": 0.1, "steps": 3000, "replications": 3, "seed": {seed},
            "metrics": ["error", "maxabs", "games_vs_rounds"],
            "checkpoints_per_decade": 10, "design_budget": 500}}"#
    ))
    .unwrap()
}

#[test]
fn identical_specs_give_identical_bytes() {
    let a = run_experiment(&spec(4)).unwrap();
    let b = run_experiment(&spec(4)).unwrap();
    let c = run_experiment(&spec(5)).unwrap();
    assert_eq!(a.trajectory_csv(), b.trajectory_csv());
    assert_eq!(a.summary_json(), b.summary_json());
    assert_ne!(a.trajectory_csv(), c.trajectory_csv());
}

#[test]
fn parallel_runs_report_both_axes() {
    let out = run_experiment(&spec(1)).unwrap();
    assert!(out.failures.is_empty());
    for run in out.runs_for(ScheduleKind::DesignPar) {
        let rounds = run.trace.series(Metric::Error, TimeUnit::Rounds);
        let games = run.trace.series(Metric::Error, TimeUnit::Games);
        assert!(!rounds.is_empty() && !games.is_empty());
        assert!(rounds.windows(2).all(|w| w[0].0 < w[1].0));
        let counted = run.trace.series(Metric::Games, TimeUnit::Rounds);
        assert!(counted.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(counted.last().unwrap().1, run.games as f64);
        assert!(run.games <= run.rounds * 5);
    }
    for run in out.runs_for(ScheduleKind::Uniform) {
        assert_eq!(run.games, run.rounds);
    }
}

#[test]
fn writes_the_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&spec(2)).unwrap();
    out.write(dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("replication,schedule,time_unit,step,metric,value\n"));
    assert!(csv.contains(",design_par,rounds,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schedules"].as_array().unwrap().len(), 3);
    let edges = std::fs::read_to_string(dir.path().join("graph.edgelist")).unwrap();
    let expected = make_dumbbell(5, 2).unwrap().num_edges();
    assert_eq!(edges.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count(), expected);
}

#[test]
fn graph_specs_round_trip_through_json() {
    for g in [
        GraphSpec::Dumbbell { clique_size: 4, k: 1 },
        GraphSpec::Path { n: 5 },
        GraphSpec::ErdosRenyiGiant { n: 30, p: 0.1, seed: 3 },
    ] {
        let text = serde_json::to_string(&g).unwrap();
        let back: GraphSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap(), g.build().unwrap());
    }
}
