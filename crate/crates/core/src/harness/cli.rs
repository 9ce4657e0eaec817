//! Command-line front end. Exit codes: 0 on success, 1 on usage or
//! validation errors, 2 on runtime failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use super::{
    run_convergence, run_phase_transition, run_scaling, ExperimentGrid, OutputFormat, RunSettings, SweepRange,
};
use crate::baselines::{mgd_recover, spectral_clustering, ScMatrix};
use crate::error::{Error, Result};
use crate::gpm::{two_stage_recover_observed, LabelVector, RecoveryObserver};
use crate::metrics::{is_exact, misclassification, Method};
use crate::sbm::io::{read_binary, read_edge_list, read_truth, write_binary, write_edge_list, write_labels};
use crate::sbm::{generate, GroundTruth, SbmGraph, SbmParams};

#[derive(Parser, Debug)]
#[command(name = "sbm-recover", version, about = "Exact community recovery in the binary symmetric SBM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a graph and its planted labels.
    Generate(GenerateArgs),
    /// Recover communities on a single graph and print a JSON summary.
    Recover(RecoverArgs),
    /// Success-ratio sweep over an (alpha, beta) grid.
    Phase(PhaseArgs),
    /// Per-iteration distance traces of the two-stage method and MGD.
    Converge(ConvergeArgs),
    /// Median two-stage wall time as a function of n.
    Scale(ScaleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScMatrixArg {
    /// Regularized matrix A - rho 11^T.
    B,
    /// Adjacency matrix, second eigenvector.
    A,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 20.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Comma-separated subset of two_stage, sc, mgd.
    #[arg(long, value_delimiter = ',', default_value = "two_stage")]
    method: Vec<Method>,
    /// Power-method iterations (default derived from n, alpha, beta).
    #[arg(long)]
    pm_iters: Option<usize>,
    #[arg(long, default_value_t = 100)]
    gpm_max_iters: usize,
    /// Output directory (or file prefix directory for `generate`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "SBM_RECOVER_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Count graph generation in recorded wall times.
    #[arg(long)]
    include_generation: bool,
    /// Matrix used by spectral clustering.
    #[arg(long, value_enum, default_value_t = ScMatrixArg::B)]
    sc_matrix: ScMatrixArg,
    /// Fixed MGD step size (default 1 / (2 lambda_1)).
    #[arg(long)]
    mgd_step: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    mgd_max_iters: usize,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Write a text edge list instead of the binary CSR format.
    #[arg(long)]
    edge_list: bool,
    /// Exclude self-loops.
    #[arg(long)]
    no_diagonal: bool,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    common: Common,
    /// Binary CSR graph to read instead of sampling one.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Edge-list graph (node count taken from --n).
    #[arg(long, conflicts_with = "graph")]
    edges: Option<PathBuf>,
    /// Planted labels for scoring a graph read from disk.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the per-iteration GPM trace (k, hamming, fixed_point) as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[command(flatten)]
    common: Common,
    /// Alpha sweep as start:stop:step (default: the single --alpha value).
    #[arg(long, value_parser = parse_range)]
    alpha_range: Option<SweepRange>,
    #[arg(long, value_parser = parse_range)]
    beta_range: Option<SweepRange>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated node counts (default: --n); may be empty.
    #[arg(long, value_parser = parse_n_list)]
    n_list: Option<NList>,
}

#[derive(Args, Debug)]
struct ScaleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_n_list, default_value = "1000,2000,4000,8000,16000")]
    n_list: NList,
}

#[derive(Debug, Clone)]
struct NList(Vec<usize>);

fn parse_n_list(s: &str) -> std::result::Result<NList, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(NList)
}

fn parse_range(s: &str) -> std::result::Result<SweepRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    SweepRange::new(num(a)?, num(b)?, num(c)?).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I>(args: I) -> i32
where
    I: IntoIterator<Item = OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn settings(c: &Common) -> std::result::Result<RunSettings, Failure> {
    if c.threads == 0 {
        return Err(Failure::Usage("--threads must be >= 1".into()));
    }
    if c.gpm_max_iters == 0 {
        return Err(Failure::Usage("--gpm-max-iters must be >= 1".into()));
    }
    if c.pm_iters == Some(0) {
        return Err(Failure::Usage("--pm-iters must be >= 1".into()));
    }
    if let Some(s) = c.mgd_step {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Failure::Usage(format!("--mgd-step must be positive, got {s}")));
        }
    }
    let mut s = RunSettings::default();
    s.recovery.pm_iters = c.pm_iters;
    s.recovery.gpm_max_iters = c.gpm_max_iters;
    s.sc.matrix = match c.sc_matrix {
        ScMatrixArg::B => ScMatrix::Regularized,
        ScMatrixArg::A => ScMatrix::Adjacency,
    };
    s.mgd.step_size = c.mgd_step;
    s.mgd.max_iters = c.mgd_max_iters;
    s.threads = c.threads;
    s.include_generation = c.include_generation;
    s.format = match c.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    Ok(s)
}

fn require_separation(c: &Common) -> std::result::Result<(), Failure> {
    if c.alpha > c.beta {
        Ok(())
    } else {
        Err(Failure::Usage(format!("recovery requires alpha > beta (got alpha = {}, beta = {})", c.alpha, c.beta)))
    }
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Generate(a) => generate_cmd(a),
        Command::Recover(a) => recover_cmd(a),
        Command::Phase(a) => phase_cmd(a),
        Command::Converge(a) => converge_cmd(a),
        Command::Scale(a) => scale_cmd(a),
    }
}

fn generate_cmd(a: GenerateArgs) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let params = SbmParams::new(c.n, c.alpha, c.beta, c.seed)?.with_diagonal(!a.no_diagonal);
    let (graph, truth) = generate(&params);
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let graph_path = if a.edge_list { dir.join("graph.edges") } else { dir.join("graph.bin") };
    let mut w = std::io::BufWriter::new(File::create(&graph_path)?);
    if a.edge_list {
        write_edge_list(&graph, &mut w)?;
    } else {
        write_binary(&graph, &mut w)?;
    }
    w.flush()?;
    let mut w = std::io::BufWriter::new(File::create(dir.join("truth.txt"))?);
    write_labels(truth.as_slice(), &mut w)?;
    w.flush()?;
    print_json(&json!({
        "n": c.n,
        "p": params.p(),
        "q": params.q(),
        "nnz": graph.nnz(),
        "expected_nnz": params.expected_nnz(),
        "graph": graph_path,
        "truth": dir.join("truth.txt"),
    }))
}

fn load_graph(a: &RecoverArgs) -> std::result::Result<(SbmGraph, Option<GroundTruth>, Option<SbmParams>), Failure> {
    let c = &a.common;
    let truth = match &a.truth {
        Some(p) => Some(read_truth(BufReader::new(File::open(p)?))?),
        None => None,
    };
    if let Some(p) = &a.graph {
        return Ok((read_binary(BufReader::new(File::open(p)?))?, truth, None));
    }
    if let Some(p) = &a.edges {
        return Ok((read_edge_list(c.n, BufReader::new(File::open(p)?))?, truth, None));
    }
    let params = SbmParams::new(c.n, c.alpha, c.beta, c.seed)?;
    let (graph, planted) = generate(&params);
    Ok((graph, truth.or(Some(planted)), Some(params)))
}

struct GpmTrace<'t> {
    truth: Option<&'t GroundTruth>,
    prev: Option<LabelVector>,
    rows: Vec<(usize, Option<usize>, bool)>,
}

impl RecoveryObserver for GpmTrace<'_> {
    fn gpm_step(&mut self, k: usize, x: &LabelVector) {
        let hamming = self.truth.map(|t| misclassification(x, t).expect("matching lengths"));
        let fixed = self.prev.as_ref() == Some(x);
        self.rows.push((k, hamming, fixed));
        self.prev = Some(x.clone());
    }
}

fn recover_cmd(a: RecoverArgs) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let from_disk = a.graph.is_some() || a.edges.is_some();
    if !from_disk {
        require_separation(c)?;
    }
    let settings = settings(c)?;
    if c.method.len() != 1 {
        return Err(Failure::Usage("recover takes exactly one --method".into()));
    }
    let (graph, truth, params) = load_graph(&a)?;
    if let Some(t) = &truth {
        if t.len() != graph.n() {
            return Err(Error::DimensionMismatch { expected: graph.n(), got: t.len() }.into());
        }
    }
    let algo_seed = super::algorithm_seed(c.seed);
    let mut summary = json!({
        "method": c.method[0],
        "n": graph.n(),
        "nnz": graph.nnz(),
        "seed": c.seed,
    });
    if let Some(p) = &params {
        summary["alpha"] = json!(c.alpha);
        summary["beta"] = json!(c.beta);
        summary["p"] = json!(p.p());
        summary["q"] = json!(p.q());
    }
    let labels = match c.method[0] {
        Method::TwoStage => {
            let mut trace = GpmTrace { truth: truth.as_ref(), prev: None, rows: Vec::new() };
            let r = two_stage_recover_observed(&graph, &settings.recovery, algo_seed, &mut trace)?;
            summary["pm_iterations"] = json!(r.pm_iterations);
            summary["gpm_iterations"] = json!(r.gpm_iterations);
            summary["converged"] = json!(r.converged);
            summary["cycled"] = json!(r.cycled);
            summary["wall_time_ns"] = json!(r.wall_time_ns as u64);
            if let Some(path) = &a.trace {
                write_trace(path, &trace.rows)?;
            }
            r.labels
        }
        Method::Sc => {
            let r = spectral_clustering(&graph, &settings.sc, algo_seed)?;
            summary["pm_iterations"] = json!(r.iterations);
            summary["wall_time_ns"] = json!(r.wall_time_ns as u64);
            r.labels
        }
        Method::Mgd => {
            let r = mgd_recover(&graph, &settings.mgd, algo_seed, truth.as_ref())?;
            summary["iterations"] = json!(r.iterations);
            summary["converged"] = json!(r.converged);
            summary["step_size"] = json!(r.step_size);
            summary["wall_time_ns"] = json!(r.wall_time_ns as u64);
            r.labels
        }
    };
    if let Some(t) = &truth {
        summary["exact"] = json!(is_exact(&labels, t)?);
        summary["misclassified"] = json!(misclassification(&labels, t)?);
    }
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(File::create(dir.join("labels.txt"))?);
        write_labels(labels.as_slice(), &mut w)?;
        w.flush()?;
    }
    print_json(&summary)
}

fn write_trace(path: &Path, rows: &[(usize, Option<usize>, bool)]) -> Result<()> {
    let mut w = super::output::create(path)?;
    writeln!(w, "k,hamming,fixed_point")?;
    for (k, h, f) in rows {
        let h = h.map(|h| h.to_string()).unwrap_or_default();
        writeln!(w, "{k},{h},{f}")?;
    }
    w.flush()?;
    Ok(())
}

fn phase_cmd(a: PhaseArgs) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let settings = settings(c)?;
    let grid = ExperimentGrid {
        n: c.n,
        alpha_range: a.alpha_range.unwrap_or(SweepRange::single(c.alpha)),
        beta_range: a.beta_range.unwrap_or(SweepRange::single(c.beta)),
        trials: c.trials,
        methods: dedup(&c.method),
        base_seed: c.seed,
        output_path: c.out.clone(),
    };
    let report = run_phase_transition(&grid, &settings)?;
    let cells: Vec<_> = report
        .aggregate
        .iter()
        .map(|s| json!({"alpha": s.alpha, "beta": s.beta, "method": s.method, "success_ratio": nan_to_null(s.success_ratio)}))
        .collect();
    print_json(&json!({
        "records": report.records.len(),
        "skipped_cells": report.skipped.len(),
        "timing_totals_ns": report.timing_totals.iter().map(|(m, t)| (m.to_string(), *t as u64)).collect::<std::collections::BTreeMap<_, _>>(),
        "cells": if cells.len() <= 64 { json!(cells) } else { json!(cells.len()) },
    }))
}

fn converge_cmd(a: ConvergeArgs) -> std::result::Result<(), Failure> {
    let c = &a.common;
    require_separation(c)?;
    let settings = settings(c)?;
    let n_list = a.n_list.clone().map_or_else(|| vec![c.n], |l| l.0);
    let report = run_convergence(&n_list, c.alpha, c.beta, c.seed, c.out.as_deref(), &settings)?;
    let runs: Vec<_> = report
        .runs
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "two_stage_exact": r.two_stage.exact,
                "gpm_zero_iter": r.gpm_zero_iter,
                "mgd_exact": r.mgd.exact,
                "mgd_hit_iter": r.mgd_hit_iter,
            })
        })
        .collect();
    print_json(&json!({ "runs": runs }))
}

fn scale_cmd(a: ScaleArgs) -> std::result::Result<(), Failure> {
    let c = &a.common;
    let settings = settings(c)?;
    let report = run_scaling(&a.n_list.0, c.alpha, c.beta, c.trials, c.seed, c.out.as_deref(), &settings)?;
    let rows: Vec<_> =
        report.rows.iter().map(|r| json!({"n": r.n, "median_ns": r.median_ns as u64, "nnz": r.nnz})).collect();
    print_json(&json!({ "rows": rows }))
}

fn dedup(methods: &[Method]) -> Vec<Method> {
    let mut out = Vec::new();
    for &m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn nan_to_null(v: f64) -> serde_json::Value {
    if v.is_nan() {
        serde_json::Value::Null
    } else {
        json!(v)
    }
}

fn print_json(v: &serde_json::Value) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(Error::Format(e.to_string())))?;
    println!("{text}");
    Ok(())
}
