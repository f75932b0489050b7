use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use elomix::bench::{read_skills, run_experiment, ExperimentSpec};
use elomix::design::{build_matching_distribution, optimize, DesignProblem, Regime};
use elomix::elo::{
    log_checkpoints, run_chain, EloConfig, ErrorObserver, MaxAbsObserver, Observer, TimeUnit,
    TraceObserver, TrajectoryRecord,
};
use elomix::graph::{read_edge_list, ComparisonGraph};
use elomix::spectral::{build_laplacian, gap_of, spectral_gap};
use elomix::{MatchupDistribution, Normalization, RatingVector, RngStream, StepSize};

#[derive(Parser)]
#[command(name = "elomix", version, about = "Elo dynamics, spectral gaps and tournament design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Laplacian spectrum and gap of a weighted comparison graph.
    Gap {
        #[arg(long)]
        graph: PathBuf,
        /// `uniform`, or an edge list with a weight column.
        #[arg(long, default_value = "uniform")]
        weights: String,
    },
    /// Run sequential Elo chains and write per-checkpoint statistics.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "uniform")]
        weights: String,
        /// One true skill per line.
        #[arg(long)]
        skills: PathBuf,
        #[arg(long)]
        eta: f64,
        /// Sup-norm cap; `inf` for uncapped.
        #[arg(long, default_value = "inf")]
        cap: f64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "error")]
        record: Vec<Record>,
        #[arg(long, default_value_t = 40)]
        per_decade: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize edge weights for the largest spectral gap.
    Design {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        regime: RegimeArg,
        #[arg(long, default_value_t = 5000)]
        budget: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Weights CSV (`i,j,q`).
        #[arg(long)]
        out: PathBuf,
        /// For `par`: write the matching decomposition as JSON.
        #[arg(long)]
        matchings: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON spec.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Record {
    Error,
    Maxabs,
    Trace,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Seq,
    Par,
}

fn load_graph(path: &Path) -> Result<ComparisonGraph> {
    Ok(read_edge_list(path)
        .with_context(|| format!("reading graph {}", path.display()))?
        .graph)
}

fn load_weights(graph: &ComparisonGraph, spec: &str) -> Result<MatchupDistribution> {
    if spec == "uniform" {
        return Ok(MatchupDistribution::uniform(graph.clone()));
    }
    let list = read_edge_list(spec).with_context(|| format!("reading weights {spec}"))?;
    let Some(w) = list.weights else {
        bail!("weights file {spec} has no weight column");
    };
    let triples: Vec<(usize, usize, f64)> = list
        .graph
        .edges()
        .iter()
        .zip(w)
        .map(|(&(i, j), q)| (i, j, q))
        .collect();
    Ok(MatchupDistribution::from_triples(graph.clone(), &triples)?)
}

fn normalization(q: &MatchupDistribution) -> &'static str {
    if q.satisfies(Normalization::Sequential) {
        "sequential"
    } else if q.satisfies(Normalization::Substochastic) {
        "substochastic"
    } else {
        "none"
    }
}

fn cmd_gap(graph: &Path, weights: &str) -> Result<()> {
    let g = load_graph(graph)?;
    let q = load_weights(&g, weights)?;
    let summary = spectral_gap(&build_laplacian(&q)?)?;
    let n = g.n();
    let sequential = q.satisfies(Normalization::Sequential);
    let out = json!({
        "n": n,
        "edges": g.num_edges(),
        "normalization": normalization(&q),
        "eigenvalues": summary.eigenvalues.iter().take(3).collect::<Vec<_>>(),
        "gap": summary.gap,
        "four_over_n": 4.0 / n as f64,
        "within_four_over_n": !sequential || summary.gap <= 4.0 / n as f64 + 1e-10,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn load_skills(path: &Path, n: usize, cap: f64) -> Result<RatingVector> {
    let mut v = read_skills(path).with_context(|| format!("reading skills {}", path.display()))?;
    if v.len() != n {
        bail!("skills file has {} entries, graph has {n} vertices", v.len());
    }
    let sum: f64 = v.iter().sum();
    if sum.abs() > 1e-9 {
        eprintln!("warning: skills sum to {sum}; centering to zero sum");
        let mean = sum / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    }
    if let Some(x) = v.iter().find(|x| x.abs() > cap) {
        bail!("skill {x} exceeds cap {cap}");
    }
    Ok(RatingVector::uncapped(v)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    graph: &Path,
    weights: &str,
    skills: &Path,
    eta: f64,
    cap: f64,
    burn_in: u64,
    steps: u64,
    replications: usize,
    seed: u64,
    record: &[Record],
    per_decade: usize,
    out: &Path,
) -> Result<()> {
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let g = load_graph(graph)?;
    let q = load_weights(&g, weights)?.normalized()?;
    let skills = load_skills(skills, g.n(), cap)?;
    let config = EloConfig::sequential(q, cap, StepSize::new(eta)?)?;
    let cps = log_checkpoints(steps, per_decade.max(1));
    let mut all = TrajectoryRecord::new();
    for rep in 0..replications {
        let mut error = ErrorObserver::new(&skills, cps.clone(), false);
        let mut maxabs = MaxAbsObserver::new(cps.clone(), false);
        let mut trace = TraceObserver::new(cps.clone(), false);
        let mut observers: Vec<&mut dyn Observer> = Vec::new();
        if record.contains(&Record::Error) {
            observers.push(&mut error);
        }
        if record.contains(&Record::Maxabs) {
            observers.push(&mut maxabs);
        }
        if record.contains(&Record::Trace) {
            observers.push(&mut trace);
        }
        let mut rng = RngStream::new(seed, rep as u64);
        let mut result = run_chain(&config, &skills, burn_in, steps, &mut rng, &mut observers)?;
        result.trace.set_replication(rep);
        all.append(&mut result.trace);
    }
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    all.write_csv(&mut w, TimeUnit::Games)?;
    w.flush()?;
    Ok(())
}

fn weights_csv(q: &MatchupDistribution) -> String {
    let mut s = format!("# n = {}\ni,j,q\n", q.n());
    for (&(i, j), w) in q.graph().edges().iter().zip(q.weights()) {
        writeln!(s, "{i},{j},{w}").expect("writing to a String");
    }
    s
}

fn cmd_design(
    graph: &Path,
    regime: RegimeArg,
    budget: usize,
    tol: f64,
    out: &Path,
    matchings: Option<&Path>,
) -> Result<()> {
    let g = load_graph(graph)?;
    let regime = match regime {
        RegimeArg::Seq => Regime::Continuous,
        RegimeArg::Par => Regime::Discrete,
    };
    let problem = DesignProblem::new(g.clone(), regime)
        .with_budget(budget)
        .with_tolerance(tol);
    let outcome = optimize(&problem)?;
    fs::write(out, weights_csv(&outcome.weights)).with_context(|| format!("writing {}", out.display()))?;
    let uniform = MatchupDistribution::uniform(g.clone());
    let baseline = match regime {
        Regime::Continuous => uniform,
        Regime::Discrete => uniform.saturated(),
    };
    let mut report = json!({
        "regime": if regime == Regime::Continuous { "seq" } else { "par" },
        "gap": outcome.gap,
        "uniform_gap": gap_of(&baseline)?,
        "iterations": outcome.iterations,
        "converged": outcome.converged,
    });
    if let Some(path) = matchings {
        if regime != Regime::Discrete {
            bail!("--matchings needs --regime par");
        }
        let md = build_matching_distribution(&outcome.weights)?;
        let rep = md.report().context("decomposition report")?;
        fs::write(path, serde_json::to_string_pretty(&rep)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        report["mean_matching_size"] = json!(md.mean_size());
        report["marginal_gap"] = json!(gap_of(&md.marginal_distribution())?);
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_bench(spec: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec = ExperimentSpec::from_json(&text)?;
    let output = run_experiment(&spec)?;
    output.write(out)?;
    for (rep, msg) in &output.failures {
        eprintln!("warning: replication {rep} failed: {msg}");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gap { graph, weights } => cmd_gap(&graph, &weights),
        Command::Simulate {
            graph,
            weights,
            skills,
            eta,
            cap,
            burn_in,
            steps,
            replications,
            seed,
            record,
            per_decade,
            out,
        } => cmd_simulate(
            &graph,
            &weights,
            &skills,
            eta,
            cap,
            burn_in,
            steps,
            replications,
            seed,
            &record,
            per_decade,
            &out,
        ),
        Command::Design {
            graph,
            regime,
            budget,
            tol,
            out,
            matchings,
        } => cmd_design(&graph, regime, budget, tol, &out, matchings.as_deref()),
        Command::Bench { spec, out } => cmd_bench(&spec, &out),
    }
}
