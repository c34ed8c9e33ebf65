use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use matcons::design::{self, DescentReport, TimescaleBox, WeightBox};
use matcons::double_integrator::{self, Which};
use matcons::flocking::{self, DesignParams, Scenario, SimConfig, SimSummary, SimTrace};
use matcons::h2::{self, FactorBounds, NoiseModel};
use matcons::{io, MatrixWeightedGraph, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigFile, NoiseSpec};
use crate::output::{num, OutputDir, Report, RunManifest};
use crate::paper::{self, PaperParameters};
use crate::CliError;

const AFTER_HELP: &str = "\
Graph files (--graph) are JSON with 1-based node indices:
  {\"n\": 3, \"k\": 2, \"edges\": [[1, 2], [2, 3]],
   \"weights\": [[1, 0, 0, 1], [[2, 0.5], [0.5, 1]]],
   \"timescales\": [[1, 1], [1, 1], [1, 1]]}
Config files (--config) are JSON; every section is optional:
  {\"noise\": {\"kind\": \"special\", \"sigma_w\": 1, \"sigma_v\": 1},
   \"design\": {\"h\": 0.01, \"max_iter\": 200,
              \"weight_box\": {\"alpha_lo\": 0.05, \"alpha_hi\": 10},
              \"timescale_box\": {\"eps_min\": 0.1, \"eps_max\": 100, \"h\": 0.01, \"r\": 1}},
   \"simulation\": {\"dt\": 0.001, \"t_end\": 30, \"gust_window\": [10, 20],
                  \"sigma_w\": 5, \"sigma_v\": 5, \"formation\": {\"spiral\": 1.0}}}
  General noise: {\"kind\": \"general\", \"omega\": {\"diagonal\": [..]}, \"gamma\": [[..], ..]}
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
Set MATCONS_THREADS to bound the worker threads.";

#[derive(Debug, Parser)]
#[command(name = "matcons", version, about = "H2 analysis, design and gust simulation for matrix-weighted consensus networks", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Graph file (JSON)
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    /// Run configuration (JSON)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; reports also go to stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random boxes and gust noise
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Keep every N-th simulation step in trace files (1 keeps all)
    #[arg(long, global = true, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub decimate: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    /// Factors σ_w E^{1/2}, σ_v W^{1/2}; closed-form gramian
    Special,
    /// True factors from the config file; numerical gramian and factor bounds
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    Position,
    Velocity,
    Aggregate,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Position => Which::Position,
            WhichArg::Velocity => Which::Velocity,
            WhichArg::Aggregate => Which::Aggregate,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// H2 performance of the first-order network
    H2 {
        #[arg(long, value_enum, default_value_t = NoiseKind::Special)]
        noise: NoiseKind,
        #[arg(long, default_value_t = 1.0)]
        sigma_w: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_v: f64,
    },
    /// Sufficient and tight factor bounds for general noise from the config
    Bounds,
    /// Projected gradient descent on the edge weights
    OptimizeWeights {
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Random box lower generator scale (with --alpha-hi)
        #[arg(long, requires = "alpha_hi")]
        alpha_lo: Option<f64>,
        #[arg(long, requires = "alpha_lo")]
        alpha_hi: Option<f64>,
        /// Assign optimal time scales first
        #[arg(long)]
        with_timescales: bool,
    },
    /// Optimal per-node time scales
    AssignTimescales {
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        eps_min: Option<f64>,
        #[arg(long)]
        eps_max: Option<f64>,
    },
    /// H2 performance of the double-integrator network
    DiH2 {
        #[arg(long, default_value_t = 1.0)]
        sigma_w: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_v: f64,
        #[arg(long, value_enum, default_value_t = WhichArg::Aggregate)]
        which: WhichArg,
    },
    /// Gust simulation under all four update scenarios
    Flock {
        /// Number of consecutive seeds starting at --seed
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
    /// End-to-end reference experiment: design plus gust scenarios
    PaperExample {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
}

/// Result of one command: the stdout report and, with --out, the manifest.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub manifest: Option<RunManifest>,
}

fn load_graph(path: Option<&Path>) -> Result<MatrixWeightedGraph, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("this command needs --graph FILE".into()))?;
    if !path.exists() {
        return Err(CliError::Io { path: path.to_path_buf(), source: std::io::Error::from(std::io::ErrorKind::NotFound) });
    }
    Ok(io::read_graph(path)?)
}

#[derive(Serialize)]
struct Inputs<'a, P: Serialize> {
    graph: Option<io::GraphFile>,
    config: &'a ConfigFile,
    args: P,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let common = &cli.common;
    let config = ConfigFile::load(common.config.as_deref())?;
    let tol = Tolerances::default();
    match &cli.command {
        Command::H2 { noise, sigma_w, sigma_v } => {
            let graph = load_graph(common.graph.as_deref())?;
            let model = match noise {
                NoiseKind::Special => NoiseModel::Special { sigma_w: *sigma_w, sigma_v: *sigma_v },
                NoiseKind::General => general_noise(&config)?,
            };
            let report = cmd_h2(&graph, &model, &tol)?;
            let args = serde_json::json!({"noise": format!("{noise:?}"), "sigma_w": sigma_w, "sigma_v": sigma_v});
            finish_report("h2", common, &graph, &config, args, report)
        }
        Command::Bounds => {
            let graph = load_graph(common.graph.as_deref())?;
            let NoiseModel::General { omega, gamma } = general_noise(&config)? else {
                unreachable!("general_noise returns general factors")
            };
            let (report, table) = cmd_bounds(&graph, &omega, &gamma, &tol)?;
            let mut out = OutputDir::new(common.out.as_deref())?;
            out.write("bounds.csv", table.as_bytes())?;
            finish(out, "bounds", common, Some(&graph), &config, serde_json::Value::Null, report)
        }
        Command::OptimizeWeights { h, max_iter, alpha_lo, alpha_hi, with_timescales } => {
            let graph = load_graph(common.graph.as_deref())?;
            let mut design = config.design.clone();
            if let Some(h) = h {
                design.h = *h;
            }
            if let Some(m) = max_iter {
                design.max_iter = *m;
            }
            if let (Some(lo), Some(hi)) = (alpha_lo, alpha_hi) {
                design.weight_box = crate::config::WeightBoxSpec::Random { alpha_lo: *lo, alpha_hi: *hi };
            }
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let bounds = design.weight_box.build(graph.k(), &mut rng)?;
            let mut out = OutputDir::required(common.out.as_deref(), "optimize-weights")?;
            let mut report = Report::default();
            let mut graph = graph;
            if *with_timescales {
                let (updated, table) = cmd_assign_timescales(&graph, &design.timescale_box)?;
                report.number("p2_cost_initial", design::p2_cost(&graph, &design.timescale_box));
                report.number("p2_cost_final", design::p2_cost(&updated, &design.timescale_box));
                out.write("timescales.csv", table.as_bytes())?;
                graph = updated;
            }
            let descent = design::optimize_weights(&graph, &bounds, design.h, design.max_iter, &tol)?;
            write_descent(&mut out, &descent, "")?;
            let updated = graph.with_weights(descent.final_weights().to_vec())?;
            out.write("graph.json", io::graph_to_json(&updated).as_bytes())?;
            descent_report(&mut report, &descent);
            let mode = if *with_timescales { "both" } else { "weights" };
            let args = serde_json::json!({"mode": mode, "h": design.h, "max_iter": design.max_iter, "weight_box": design.weight_box});
            finish(out, "optimize-weights", common, Some(&graph), &config, args, report)
        }
        Command::AssignTimescales { h, r, eps_min, eps_max } => {
            let graph = load_graph(common.graph.as_deref())?;
            let mut tsbox = config.design.timescale_box;
            tsbox.h = h.unwrap_or(tsbox.h);
            tsbox.r = r.unwrap_or(tsbox.r);
            tsbox.eps_min = eps_min.unwrap_or(tsbox.eps_min);
            tsbox.eps_max = eps_max.unwrap_or(tsbox.eps_max);
            let mut out = OutputDir::required(common.out.as_deref(), "assign-timescales")?;
            let (updated, table) = cmd_assign_timescales(&graph, &tsbox)?;
            out.write("timescales.csv", table.as_bytes())?;
            out.write("graph.json", io::graph_to_json(&updated).as_bytes())?;
            let mut report = Report::default();
            report.number("p2_cost_initial", design::p2_cost(&graph, &tsbox));
            report.number("p2_cost_final", design::p2_cost(&updated, &tsbox));
            let mut stdout = report.to_csv();
            stdout.push_str(&table);
            let manifest = out.finish("assign-timescales", &inputs(Some(&graph), &config, &tsbox), Some(common.seed), &tsbox)?;
            Ok(Outcome { stdout, manifest: Some(manifest) })
        }
        Command::DiH2 { sigma_w, sigma_v, which } => {
            let graph = load_graph(common.graph.as_deref())?;
            let report = cmd_di_h2(&graph, *sigma_w, *sigma_v, (*which).into(), &tol)?;
            let args = serde_json::json!({"sigma_w": sigma_w, "sigma_v": sigma_v, "which": format!("{which:?}")});
            finish_report("di-h2", common, &graph, &config, args, report)
        }
        Command::Flock { seeds } => {
            let graph = load_graph(common.graph.as_deref())?;
            let mut out = OutputDir::required(common.out.as_deref(), "flock")?;
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let bounds = config.design.weight_box.build(graph.k(), &mut rng)?;
            let design = DesignParams {
                h: config.design.h,
                weight_box: bounds,
                max_iter: config.design.max_iter,
                timescale_box: config.design.timescale_box,
            };
            let sim = config.simulation.build(&graph, design, common.seed, common.decimate as usize)?;
            let stdout = cmd_flock(&mut out, &graph, &sim, *seeds, &tol)?;
            let args = serde_json::json!({"seeds": seeds, "decimate": common.decimate});
            let manifest = out.finish("flock", &inputs(Some(&graph), &config, &args), Some(common.seed), &args)?;
            Ok(Outcome { stdout, manifest: Some(manifest) })
        }
        Command::PaperExample { seeds } => {
            let mut out = OutputDir::required(common.out.as_deref(), "paper-example")?;
            let params = PaperParameters::default();
            let stdout = cmd_paper_example(&mut out, &params, common.seed, *seeds, common.decimate as usize, &tol)?;
            let args = serde_json::json!({"seeds": seeds, "decimate": common.decimate});
            let manifest = out.finish("paper-example", &inputs(None, &config, &args), Some(common.seed), &params)?;
            Ok(Outcome { stdout, manifest: Some(manifest) })
        }
    }
}

fn inputs<'a, P: Serialize>(graph: Option<&MatrixWeightedGraph>, config: &'a ConfigFile, args: P) -> Inputs<'a, P> {
    Inputs { graph: graph.map(io::GraphFile::from_graph), config, args }
}

fn general_noise(config: &ConfigFile) -> Result<NoiseModel, CliError> {
    match &config.noise {
        Some(spec @ NoiseSpec::General { .. }) => spec.to_model(),
        _ => Err(CliError::Usage("general noise needs a config file with noise.kind = \"general\"".into())),
    }
}

fn finish_report(
    command: &str,
    common: &CommonArgs,
    graph: &MatrixWeightedGraph,
    config: &ConfigFile,
    args: serde_json::Value,
    report: Report,
) -> Result<Outcome, CliError> {
    let out = OutputDir::new(common.out.as_deref())?;
    finish(out, command, common, Some(graph), config, args, report)
}

fn finish(
    mut out: OutputDir,
    command: &str,
    common: &CommonArgs,
    graph: Option<&MatrixWeightedGraph>,
    config: &ConfigFile,
    args: serde_json::Value,
    report: Report,
) -> Result<Outcome, CliError> {
    let stdout = report.to_csv();
    out.write("report.csv", stdout.as_bytes())?;
    let manifest = if out.is_enabled() {
        Some(out.finish(command, &inputs(graph, config, &args), Some(common.seed), &args)?)
    } else {
        None
    };
    Ok(Outcome { stdout, manifest })
}

/// H2 value and residual; with general noise, also the factor bounds.
pub fn cmd_h2(graph: &MatrixWeightedGraph, noise: &NoiseModel, tol: &Tolerances) -> Result<Report, CliError> {
    let mut report = Report::default();
    match noise {
        NoiseModel::Special { sigma_w, sigma_v } => {
            let r = h2::h2_closed_form(graph, *sigma_w, *sigma_v, tol)?;
            report.text("method", "closed_form").number("h2", r.h2).number("residual", r.residual);
            if graph.is_tree() {
                report.number("h2_tree_formula", h2::h2_tree_formula(graph, *sigma_w, *sigma_v)?);
            }
        }
        NoiseModel::General { omega, gamma } => {
            let r = h2::h2_general(graph, noise, tol)?;
            report.text("method", "lyapunov").number("h2", r.h2).number("residual", r.residual);
            for (kind, b) in factor_sets(graph, omega, gamma, tol)? {
                bounds_rows(&mut report, kind, &b, graph, tol)?;
            }
        }
    }
    Ok(report)
}

fn factor_sets(graph: &MatrixWeightedGraph, omega: &matcons::Mat, gamma: &matcons::Mat, tol: &Tolerances) -> Result<Vec<(&'static str, FactorBounds)>, CliError> {
    Ok(vec![
        ("sufficient", h2::sufficient_factors(omega, gamma, graph, tol)?),
        ("tight", h2::tight_factors(omega, gamma, graph, tol)?),
    ])
}

fn bracket(graph: &MatrixWeightedGraph, b: &FactorBounds, tol: &Tolerances) -> Result<(f64, f64), CliError> {
    let lo = h2::h2_closed_form(graph, b.alpha_lo, b.beta_lo, tol)?.h2;
    let hi = h2::h2_closed_form(graph, b.alpha_hi, b.beta_hi, tol)?.h2;
    Ok((lo, hi))
}

fn bounds_rows(report: &mut Report, kind: &str, b: &FactorBounds, graph: &MatrixWeightedGraph, tol: &Tolerances) -> Result<(), CliError> {
    let (lo, hi) = bracket(graph, b, tol)?;
    report
        .number(format!("{kind}_alpha_lo"), b.alpha_lo)
        .number(format!("{kind}_alpha_hi"), b.alpha_hi)
        .number(format!("{kind}_beta_lo"), b.beta_lo)
        .number(format!("{kind}_beta_hi"), b.beta_hi)
        .number(format!("{kind}_gap"), b.gap)
        .number(format!("{kind}_h2_lower"), lo)
        .number(format!("{kind}_h2_upper"), hi);
    Ok(())
}

/// Report plus a `bounds.csv` table with one row per factor kind.
pub fn cmd_bounds(graph: &MatrixWeightedGraph, omega: &matcons::Mat, gamma: &matcons::Mat, tol: &Tolerances) -> Result<(Report, String), CliError> {
    let noise = NoiseModel::General { omega: omega.clone(), gamma: gamma.clone() };
    let report = cmd_h2(graph, &noise, tol)?;
    let mut table = String::from("kind,alpha_lo,alpha_hi,beta_lo,beta_hi,gap,h2_lower,h2_upper\n");
    for (kind, b) in factor_sets(graph, omega, gamma, tol)? {
        let (lo, hi) = bracket(graph, &b, tol)?;
        let cells = [b.alpha_lo, b.alpha_hi, b.beta_lo, b.beta_hi, b.gap, lo, hi].map(num);
        let _ = writeln!(table, "{kind},{}", cells.join(","));
    }
    Ok((report, table))
}

pub fn cmd_di_h2(graph: &MatrixWeightedGraph, sigma_w: f64, sigma_v: f64, which: Which, tol: &Tolerances) -> Result<Report, CliError> {
    let gram = double_integrator::di_gramian(graph, sigma_w, sigma_v, tol)?;
    let mut report = Report::default();
    for (name, w) in [("position", Which::Position), ("velocity", Which::Velocity), ("aggregate", Which::Aggregate)] {
        report.number(format!("h2_{name}"), double_integrator::h2_from_gramian(graph, &gram, w));
    }
    report.number("h2", double_integrator::h2_from_gramian(graph, &gram, which)).number("residual", gram.residual);
    Ok(report)
}

/// Updated graph and the `node,substate,degree,epsilon,box_active` table.
pub fn cmd_assign_timescales(graph: &MatrixWeightedGraph, tsbox: &TimescaleBox) -> Result<(MatrixWeightedGraph, String), CliError> {
    let eps = design::assign_timescales(graph, tsbox)?;
    let mut table = String::from("node,substate,degree,epsilon,box_active\n");
    for (i, deg) in graph.degrees().into_iter().enumerate() {
        let (value, active) = design::timescale_target(deg, tsbox);
        for j in 0..graph.k() {
            let _ = writeln!(table, "{},{},{deg},{},{active}", i + 1, j + 1, num(value));
        }
    }
    Ok((graph.with_timescales(eps)?, table))
}

fn write_descent(out: &mut OutputDir, descent: &DescentReport, prefix: &str) -> Result<(), CliError> {
    let mut costs = String::from("iteration,cost,saturated\n");
    for (t, (c, s)) in descent.costs.iter().zip(&descent.saturated).enumerate() {
        let _ = writeln!(costs, "{t},{},{s}", num(*c));
    }
    let mut weights = String::from("iteration,edge,row,col,value\n");
    for (t, iterate) in descent.iterates.iter().enumerate() {
        for (e, w) in iterate.iter().enumerate() {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    let _ = writeln!(weights, "{t},{},{},{},{}", e + 1, i + 1, j + 1, num(w[(i, j)]));
                }
            }
        }
    }
    out.write(&format!("{prefix}costs.csv"), costs.as_bytes())?;
    out.write(&format!("{prefix}weights.csv"), weights.as_bytes())
}

fn descent_report(report: &mut Report, descent: &DescentReport) {
    report
        .number("p1_cost_initial", descent.costs[0])
        .number("p1_cost_final", *descent.costs.last().expect("start cost recorded"))
        .text("iterations", descent.iterations.to_string())
        .text("converged", descent.converged.to_string())
        .text("any_iterate_saturated", descent.saturated.iter().any(|&s| s).to_string())
        .text("final_saturated", descent.saturated.last().copied().unwrap_or(false).to_string());
}

fn trace_csv(trace: &SimTrace, k: usize) -> Vec<u8> {
    let mut buf = Vec::new();
    flocking::write_trace_csv(&mut buf, trace, k).expect("writing to memory cannot fail");
    buf
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioStats {
    pub scenario: Scenario,
    pub mean: f64,
    pub se: f64,
    pub gust_mean: f64,
    pub gust_se: f64,
    pub seeds: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-scenario mean and standard error over seeds, sorted by mean.
pub fn scenario_stats(batch: &[BTreeMap<Scenario, SimSummary>]) -> Vec<ScenarioStats> {
    let mut stats: Vec<ScenarioStats> = Scenario::ALL
        .iter()
        .map(|&sc| {
            let post: Vec<f64> = batch.iter().map(|m| m[&sc].mean_variance).collect();
            let gust: Vec<f64> = batch.iter().map(|m| m[&sc].gust_variance).collect();
            let (mean, se) = mean_se(&post);
            let (gust_mean, gust_se) = mean_se(&gust);
            ScenarioStats { scenario: sc, mean, se, gust_mean, gust_se, seeds: batch.len() }
        })
        .collect();
    stats.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    stats
}

fn summary_csv(runs: &BTreeMap<Scenario, (SimTrace, SimSummary)>, batch: Option<&[BTreeMap<Scenario, SimSummary>]>) -> String {
    let mut s = String::new();
    match batch {
        None => {
            s.push_str("scenario,mean_variance,gust_variance,seed\n");
            let mut rows: Vec<&SimSummary> = runs.values().map(|(_, summary)| summary).collect();
            rows.sort_by(|a, b| a.mean_variance.total_cmp(&b.mean_variance));
            for r in rows {
                let _ = writeln!(s, "{},{},{},{}", r.scenario, num(r.mean_variance), num(r.gust_variance), r.seed);
            }
        }
        Some(batch) => {
            s.push_str("scenario,mean,se,gust_mean,gust_se,seeds\n");
            for r in scenario_stats(batch) {
                let _ = writeln!(s, "{},{},{},{},{},{}", r.scenario, num(r.mean), num(r.se), num(r.gust_mean), num(r.gust_se), r.seeds);
            }
        }
    }
    s
}

/// Four trace files for the first seed and `summary.csv`; returns the summary.
pub fn cmd_flock(out: &mut OutputDir, graph: &MatrixWeightedGraph, sim: &SimConfig, seeds: u64, tol: &Tolerances) -> Result<String, CliError> {
    let runs = flocking::run_scenarios(graph, sim, tol)?;
    for (sc, (trace, _)) in &runs {
        out.write(&format!("trace_{sc}.csv"), &trace_csv(trace, graph.k()))?;
    }
    let batch = if seeds > 1 {
        let list: Vec<u64> = (0..seeds).map(|i| sim.seed.wrapping_add(i)).collect();
        Some(flocking::scenario_batch(graph, sim, &list, tol)?)
    } else {
        None
    };
    let summary = summary_csv(&runs, batch.as_deref());
    out.write("summary.csv", summary.as_bytes())?;
    Ok(summary)
}

/// Design and gust scenarios of the reference experiment.
pub fn cmd_paper_example(out: &mut OutputDir, params: &PaperParameters, seed: u64, seeds: u64, decimate: usize, tol: &Tolerances) -> Result<String, CliError> {
    let setup = paper::paper_setup(params, seed, decimate)?;
    let graph = &setup.graph;
    out.write("graph_initial.json", io::graph_to_json(graph).as_bytes())?;

    let mut formation = String::from("node,x,y\n");
    for (i, d) in setup.sim.formation.iter().enumerate() {
        let _ = writeln!(formation, "{},{},{}", i + 1, num(d[0]), num(d[1]));
    }
    out.write("formation.csv", formation.as_bytes())?;
    out.write("weight_box.json", weight_box_json(&setup.weight_box).as_bytes())?;

    let descent = design::optimize_weights(graph, &setup.weight_box, params.h, params.max_iter, tol)?;
    write_descent(out, &descent, "design_")?;
    let (scaled, table) = cmd_assign_timescales(graph, &params.timescale_box)?;
    out.write("timescales.csv", table.as_bytes())?;
    let designed = scaled.with_weights(descent.final_weights().to_vec())?;
    out.write("graph_designed.json", io::graph_to_json(&designed).as_bytes())?;

    let mut report = Report::default();
    descent_report(&mut report, &descent);
    report
        .number("p2_cost_initial", design::p2_cost(graph, &params.timescale_box))
        .number("p2_cost_final", design::p2_cost(&scaled, &params.timescale_box));
    let summary = cmd_flock(out, graph, &setup.sim, seeds, tol)?;
    out.write("design_report.csv", report.to_csv().as_bytes())?;
    Ok(format!("{}\n{summary}", report.to_csv()))
}

fn weight_box_json(b: &WeightBox) -> String {
    let repr = |m: &matcons::Mat| io::MatrixRepr::from_matrix(m);
    serde_json::to_string_pretty(&serde_json::json!({"w_min": repr(b.w_min()), "w_max": repr(b.w_max())})).expect("box serializes")
}
