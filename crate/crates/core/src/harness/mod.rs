//! Monte-Carlo experiments: phase transition over an `(alpha, beta)` grid,
//! per-iteration convergence traces, and runtime scaling in `n`.
//!
//! Every instance seed is a hash of the base seed and the instance's grid
//! coordinates, so any single cell can be re-run in isolation and results do
//! not depend on the number of worker threads.

pub mod cli;
pub mod output;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{mgd_recover, spectral_clustering, MgdConfig, ScConfig};
use crate::error::{Error, Result};
use crate::gpm::{two_stage_recover, two_stage_recover_observed, LabelVector, RecoveryConfig, RecoveryObserver};
use crate::metrics::{factor_distance, is_exact, misclassification, rank_one_distance, Method, TrialRecord};
use crate::rng::derive_seed;
use crate::sbm::{generate, GroundTruth, SbmGraph, SbmParams};
use output::{RecordWriter, AGGREGATE_HEADER, CONVERGENCE_HEADER, SCALING_HEADER, THRESHOLD_HEADER, TIMING_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Inclusive arithmetic sweep `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || !step.is_finite() {
            return Err(Error::InvalidParams(format!("sweep step must be positive and finite, got {step}")));
        }
        if stop < start {
            return Err(Error::InvalidParams(format!("sweep stop {stop} is below start {start}")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn single(value: f64) -> Self {
        Self { start: value, stop: value, step: 1.0 }
    }

    /// Values computed as `start + i * step`, rounded to 1e-9 so grid labels
    /// print cleanly.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub n: usize,
    pub alpha_range: SweepRange,
    pub beta_range: SweepRange,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Output directory; `None` keeps everything in memory.
    pub output_path: Option<PathBuf>,
}

/// Per-method settings and run options shared by all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub recovery: RecoveryConfig,
    pub sc: ScConfig,
    pub mgd: MgdConfig,
    pub threads: usize,
    /// Count graph generation in the recorded wall time.
    pub include_generation: bool,
    pub format: OutputFormat,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            recovery: RecoveryConfig::default(),
            sc: ScConfig::default(),
            mgd: MgdConfig::default(),
            threads: 1,
            include_generation: false,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub alpha: f64,
    pub beta: f64,
    pub method: Method,
    /// `NaN` marks a skipped cell.
    pub success_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub records: Vec<TrialRecord>,
    pub aggregate: Vec<CellSummary>,
    pub timing_totals: BTreeMap<Method, u128>,
    /// `(alpha, beta)` cells outside the generator's domain (`p > 1`).
    pub skipped: Vec<(f64, f64)>,
}

impl ExperimentReport {
    pub fn success_ratio(&self, alpha: f64, beta: f64, method: Method) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|c| c.alpha == alpha && c.beta == beta && c.method == method)
            .map(|c| c.success_ratio)
    }
}

/// Instance seed for grid coordinates; the algorithm seed is derived from it.
pub fn instance_seed(base: u64, alpha_idx: usize, beta_idx: usize, trial: usize) -> u64 {
    derive_seed(base, &[alpha_idx as u64, beta_idx as u64, trial as u64])
}

pub fn algorithm_seed(instance_seed: u64) -> u64 {
    derive_seed(instance_seed, &[1])
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot build thread pool: {e}")))
}

/// Runs one method on one instance. Algorithm errors (for example a power
/// iteration breakdown on an empty graph) are scored as failures.
pub fn run_method(
    method: Method,
    graph: &SbmGraph,
    settings: &RunSettings,
    seed: u64,
) -> (Result<LabelVector>, usize, usize, u128) {
    let start = Instant::now();
    let (labels, pm, gpm) = match method {
        Method::TwoStage => match two_stage_recover(graph, &settings.recovery, seed) {
            Ok(r) => (Ok(r.labels), r.pm_iterations, r.gpm_iterations),
            Err(e) => (Err(e), 0, 0),
        },
        Method::Sc => match spectral_clustering(graph, &settings.sc, seed) {
            Ok(r) => (Ok(r.labels), r.iterations, 0),
            Err(e) => (Err(e), 0, 0),
        },
        Method::Mgd => match mgd_recover(graph, &settings.mgd, seed, None) {
            Ok(r) => (Ok(r.labels), 0, r.iterations),
            Err(e) => (Err(e), 0, 0),
        },
    };
    (labels, pm, gpm, start.elapsed().as_nanos())
}

fn score(
    params: (f64, f64, usize, u64),
    method: Method,
    outcome: (Result<LabelVector>, usize, usize, u128),
    truth: &GroundTruth,
    nnz: usize,
) -> TrialRecord {
    let (alpha, beta, n, seed) = params;
    let (labels, pm_iters, gpm_iters, wall_time_ns) = outcome;
    let (exact, misclassified) = match labels {
        Ok(x) => (is_exact(&x, truth).unwrap_or(false), misclassification(&x, truth).unwrap_or(n / 2)),
        Err(e) => {
            log::warn!("{method} failed on instance seed {seed} (alpha = {alpha}, beta = {beta}): {e}");
            (false, n / 2)
        }
    };
    TrialRecord { alpha, beta, n, seed, method, exact, misclassified, pm_iters, gpm_iters, wall_time_ns, nnz }
}

struct Job {
    alpha: f64,
    beta: f64,
    params: SbmParams,
}

fn run_job(job: &Job, methods: &[Method], settings: &RunSettings) -> Vec<TrialRecord> {
    let t0 = Instant::now();
    let (graph, truth) = generate(&job.params);
    let gen_ns = t0.elapsed().as_nanos();
    let seed = job.params.seed;
    let n = job.params.n();
    methods
        .iter()
        .map(|&m| {
            let mut outcome = run_method(m, &graph, settings, algorithm_seed(seed));
            if settings.include_generation {
                outcome.3 += gen_ns;
            }
            score((job.alpha, job.beta, n, seed), m, outcome, &truth, graph.nnz())
        })
        .collect()
}

/// Success-ratio sweep over the `(alpha, beta)` grid.
///
/// With an output directory, writes `records.csv` incrementally plus
/// `aggregate.csv`, `threshold.csv` and `timing.csv` at the end (or a single
/// `report.json` in JSON mode).
pub fn run_phase_transition(grid: &ExperimentGrid, settings: &RunSettings) -> Result<ExperimentReport> {
    if grid.trials == 0 {
        return Err(Error::InvalidParams("trials must be >= 1".into()));
    }
    if grid.methods.is_empty() {
        return Err(Error::InvalidParams("at least one method is required".into()));
    }
    let alphas = grid.alpha_range.values();
    let betas = grid.beta_range.values();

    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (bi, &beta) in betas.iter().enumerate() {
            if SbmParams::new(grid.n, alpha, beta, 0).is_err() {
                skipped.push((alpha, beta));
                continue;
            }
            for t in 0..grid.trials {
                let seed = instance_seed(grid.base_seed, ai, bi, t);
                jobs.push(Job { alpha, beta, params: SbmParams::new(grid.n, alpha, beta, seed)? });
            }
        }
    }
    // Invalid n is reported even if every cell was skipped.
    if jobs.is_empty() {
        SbmParams::new(grid.n, 0.0, 0.0, 0)?;
    }

    let mut writer = match (&grid.output_path, settings.format) {
        (Some(dir), OutputFormat::Csv) => Some(RecordWriter::new(output::create(&dir.join("records.csv"))?)?),
        _ => None,
    };
    let pool = thread_pool(settings.threads)?;
    let mut by_job: Vec<Option<Vec<TrialRecord>>> = (0..jobs.len()).map(|_| None).collect();
    let mut write_error = None;
    let (tx, rx) = mpsc::channel::<(usize, Vec<TrialRecord>)>();
    std::thread::scope(|s| {
        let jobs = &jobs;
        let methods = &grid.methods;
        s.spawn(move || {
            pool.install(|| {
                jobs.par_iter().enumerate().for_each_with(tx, |tx, (idx, job)| {
                    let _ = tx.send((idx, run_job(job, methods, settings)));
                })
            })
        });
        for (idx, records) in rx {
            if let (Some(w), None) = (writer.as_mut(), &write_error) {
                if let Err(e) = w.push(idx, records.clone()) {
                    write_error = Some(e);
                }
            }
            by_job[idx] = Some(records);
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    let records: Vec<TrialRecord> = by_job.into_iter().flat_map(|r| r.expect("every job reports")).collect();
    let report = summarize(records, &alphas, &betas, &grid.methods, skipped);

    if let Some(dir) = &grid.output_path {
        match settings.format {
            OutputFormat::Csv => write_phase_csv(dir, &report, &betas)?,
            OutputFormat::Json => write_json(&dir.join("report.json"), &report)?,
        }
    }
    Ok(report)
}

fn summarize(
    records: Vec<TrialRecord>,
    alphas: &[f64],
    betas: &[f64],
    methods: &[Method],
    skipped: Vec<(f64, f64)>,
) -> ExperimentReport {
    let mut counts: BTreeMap<(usize, usize, Method), (usize, usize)> = BTreeMap::new();
    let mut timing_totals = BTreeMap::new();
    let index = |v: f64, grid: &[f64]| grid.iter().position(|&g| g == v).expect("value on grid");
    for r in &records {
        let e = counts.entry((index(r.alpha, alphas), index(r.beta, betas), r.method)).or_insert((0, 0));
        e.0 += usize::from(r.exact);
        e.1 += 1;
        *timing_totals.entry(r.method).or_insert(0u128) += r.wall_time_ns;
    }
    let mut aggregate = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (bi, &beta) in betas.iter().enumerate() {
            for &method in methods {
                let success_ratio = match counts.get(&(ai, bi, method)) {
                    Some(&(ok, total)) => ok as f64 / total as f64,
                    None => f64::NAN,
                };
                aggregate.push(CellSummary { alpha, beta, method, success_ratio });
            }
        }
    }
    for &m in methods {
        timing_totals.entry(m).or_insert(0);
    }
    ExperimentReport { records, aggregate, timing_totals, skipped }
}

/// `alpha` on the curve `sqrt(alpha) - sqrt(beta) = sqrt(2)`.
pub fn threshold_alpha(beta: f64) -> f64 {
    (beta.sqrt() + 2f64.sqrt()).powi(2)
}

fn write_phase_csv(dir: &Path, report: &ExperimentReport, betas: &[f64]) -> Result<()> {
    let mut w = output::create(&dir.join("aggregate.csv"))?;
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for c in &report.aggregate {
        writeln!(w, "{},{},{},{}", c.alpha, c.beta, c.method, c.success_ratio)?;
    }
    w.flush()?;

    let mut w = output::create(&dir.join("threshold.csv"))?;
    writeln!(w, "{THRESHOLD_HEADER}")?;
    for &b in betas {
        writeln!(w, "{},{}", b, threshold_alpha(b))?;
    }
    w.flush()?;

    let mut w = output::create(&dir.join("timing.csv"))?;
    writeln!(w, "{TIMING_HEADER}")?;
    for (m, t) in &report.timing_totals {
        writeln!(w, "{m},{t}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = output::create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub n: usize,
    pub method: Method,
    pub iter: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRun {
    pub n: usize,
    pub seed: u64,
    pub two_stage: TrialRecord,
    pub mgd: TrialRecord,
    pub gpm_converged: bool,
    /// First GPM iteration with distance exactly 0.
    pub gpm_zero_iter: Option<usize>,
    /// First MGD iteration with distance below [`MGD_HIT_TOL`].
    pub mgd_hit_iter: Option<usize>,
}

/// MGD never lands exactly on a `±1` point; it counts as having reached the
/// truth once its distance falls below this.
pub const MGD_HIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub runs: Vec<ConvergenceRun>,
    pub traces: Vec<TracePoint>,
}

impl ConvergenceReport {
    pub fn trace(&self, n: usize, method: Method) -> Vec<f64> {
        self.traces.iter().filter(|p| p.n == n && p.method == method).map(|p| p.distance).collect()
    }
}

#[derive(Default)]
struct DistanceTrace<'t> {
    truth: Option<&'t GroundTruth>,
    start: Vec<f64>,
    gpm: Vec<f64>,
}

impl RecoveryObserver for DistanceTrace<'_> {
    fn pm_step(&mut self, _k: usize, y: &[f64], _rayleigh: f64, _residual: f64) {
        self.start.clear();
        self.start.extend_from_slice(y);
    }

    fn gpm_step(&mut self, _k: usize, x: &LabelVector) {
        if let Some(t) = self.truth {
            self.gpm.push(rank_one_distance(x, t).expect("matching lengths"));
        }
    }
}

/// One instance per `n`, solved by the two-stage method and by MGD, with the
/// per-iteration distance `||x x^T - x* x*^T||_F` (resp. `Q Q^T`) recorded.
pub fn run_convergence(
    n_list: &[usize],
    alpha: f64,
    beta: f64,
    base_seed: u64,
    output_path: Option<&Path>,
    settings: &RunSettings,
) -> Result<ConvergenceReport> {
    if !(alpha > beta) {
        return Err(Error::InvalidParams(format!("convergence runs require alpha > beta (alpha = {alpha}, beta = {beta})")));
    }
    let params: Vec<SbmParams> = n_list
        .iter()
        .map(|&n| SbmParams::new(n, alpha, beta, derive_seed(base_seed, &[n as u64])))
        .collect::<Result<_>>()?;

    let mut report = ConvergenceReport::default();
    for p in &params {
        let n = p.n();
        let (graph, truth) = generate(p);
        let algo = algorithm_seed(p.seed);

        let mut obs = DistanceTrace { truth: Some(&truth), ..Default::default() };
        let res = two_stage_recover_observed(&graph, &settings.recovery, algo, &mut obs)?;
        let mut gpm_trace = Vec::with_capacity(obs.gpm.len() + 1);
        if !obs.start.is_empty() {
            let scale = (n as f64).sqrt() / crate::spectral::norm2(&obs.start);
            let x0: Vec<f64> = obs.start.iter().map(|v| v * scale).collect();
            gpm_trace.push(factor_distance(&[&x0], &truth)?);
        }
        gpm_trace.extend_from_slice(&obs.gpm);

        let mgd = mgd_recover(&graph, &settings.mgd, algo, Some(&truth))?;

        let two_stage = score(
            (alpha, beta, n, p.seed),
            Method::TwoStage,
            (Ok(res.labels.clone()), res.pm_iterations, res.gpm_iterations, res.wall_time_ns),
            &truth,
            graph.nnz(),
        );
        let mgd_record = score(
            (alpha, beta, n, p.seed),
            Method::Mgd,
            (Ok(mgd.labels.clone()), 0, mgd.iterations, mgd.wall_time_ns),
            &truth,
            graph.nnz(),
        );
        report.runs.push(ConvergenceRun {
            n,
            seed: p.seed,
            two_stage,
            mgd: mgd_record,
            gpm_converged: res.converged,
            gpm_zero_iter: gpm_trace.iter().position(|&d| d == 0.0),
            mgd_hit_iter: mgd.trace.iter().position(|&d| d < MGD_HIT_TOL),
        });
        for (method, trace) in [(Method::TwoStage, &gpm_trace), (Method::Mgd, &mgd.trace)] {
            report
                .traces
                .extend(trace.iter().enumerate().map(|(iter, &distance)| TracePoint { n, method, iter, distance }));
        }
    }

    if let Some(dir) = output_path {
        match settings.format {
            OutputFormat::Csv => {
                let mut w = output::create(&dir.join("convergence.csv"))?;
                writeln!(w, "{CONVERGENCE_HEADER}")?;
                for p in &report.traces {
                    writeln!(w, "{},{},{},{:e}", p.n, p.method, p.iter, p.distance)?;
                }
                w.flush()?;
                let mut w = RecordWriter::new(output::create(&dir.join("records.csv"))?)?;
                for (i, run) in report.runs.iter().enumerate() {
                    w.push(i, vec![run.two_stage.clone(), run.mgd.clone()])?;
                }
            }
            OutputFormat::Json => write_json(&dir.join("convergence.json"), &report)?,
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub median_ns: u128,
    pub nnz: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub records: Vec<TrialRecord>,
}

fn median<T: Copy + Ord>(values: &mut [T]) -> T {
    values.sort_unstable();
    values[values.len() / 2]
}

/// Median wall time of the two-stage method per `n`. Trials run one at a
/// time regardless of the thread setting so timings do not contend.
pub fn run_scaling(
    n_list: &[usize],
    alpha: f64,
    beta: f64,
    trials: usize,
    base_seed: u64,
    output_path: Option<&Path>,
    settings: &RunSettings,
) -> Result<ScalingReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be >= 1".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("n_list must be strictly increasing".into()));
    }
    for &n in n_list {
        SbmParams::new(n, alpha, beta, 0)?;
    }
    let mut report = ScalingReport::default();
    for (ni, &n) in n_list.iter().enumerate() {
        let mut times = Vec::with_capacity(trials);
        let mut nnzs = Vec::with_capacity(trials);
        for t in 0..trials {
            let seed = derive_seed(base_seed, &[ni as u64, t as u64]);
            let t0 = Instant::now();
            let (graph, truth) = generate(&SbmParams::new(n, alpha, beta, seed)?);
            let gen_ns = t0.elapsed().as_nanos();
            let mut outcome = run_method(Method::TwoStage, &graph, settings, algorithm_seed(seed));
            if settings.include_generation {
                outcome.3 += gen_ns;
            }
            times.push(outcome.3);
            nnzs.push(graph.nnz());
            report.records.push(score((alpha, beta, n, seed), Method::TwoStage, outcome, &truth, graph.nnz()));
        }
        report.rows.push(ScalingRow { n, median_ns: median(&mut times), nnz: median(&mut nnzs) });
    }

    if let Some(dir) = output_path {
        match settings.format {
            OutputFormat::Csv => {
                let mut w = output::create(&dir.join("scaling.csv"))?;
                writeln!(w, "{SCALING_HEADER}")?;
                for r in &report.rows {
                    writeln!(w, "{},{},{}", r.n, r.median_ns, r.nnz)?;
                }
                w.flush()?;
            }
            OutputFormat::Json => write_json(&dir.join("scaling.json"), &report)?,
        }
    }
    Ok(report)
}
