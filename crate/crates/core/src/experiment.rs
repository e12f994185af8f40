//! Privacy-utility sweeps and bound curves.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{
    calibrate_flip_prob, calibrate_sigma, diameter_degree_threshold, rho_diff, wasserstein_tau, AccountantQuery,
    BoundKind, CalibrationSettings, CalibrationTarget, DpBudget, PrivacyMode, Tracking, DEFAULT_ALPHA_GRID,
};
use crate::baseline::{diffusion_on_flipped, edge_flipping, FlipConfig, DEFAULT_NODE_LIMIT};
use crate::diffusion::{
    indicator, run_exact_diffusion, run_noisy_diffusion, DiffusionSchedule, NoisyDiffusion, StepCoefficients,
    ThresholdMode, ThresholdPolicy,
};
use crate::error::{invalid, Error, Result};
use crate::graph::{load_edge_list, LoadOptions, SparseGraph};
use crate::metrics::{ndcg_at_r_with, recall_at_r, Relevance};
use crate::noise::{NoiseKind, RngStream};
use crate::synthetic::barabasi_albert;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NoisyDiffusion,
    EdgeFlipping,
}

impl Method {
    fn label(self) -> u64 {
        match self {
            Method::NoisyDiffusion => 1,
            Method::EdgeFlipping => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::NoisyDiffusion => "noisy_diffusion",
            Method::EdgeFlipping => "edge_flipping",
        }
    }
}

/// A preferential-attachment graph used when no dataset file is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGraph {
    pub nodes: usize,
    pub attach: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub one_indexed: bool,
    pub extract_lcc: bool,
    pub synthetic: Option<SyntheticGraph>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { path: None, one_indexed: false, extract_lcc: true, synthetic: None }
    }
}

impl DatasetConfig {
    pub fn load(&self) -> Result<SparseGraph> {
        match (&self.path, &self.synthetic) {
            (Some(path), _) => {
                let file = BufReader::new(File::open(path)?);
                let options = LoadOptions { one_indexed: self.one_indexed, extract_lcc: self.extract_lcc };
                Ok(load_edge_list(file, options)?.graph)
            }
            (None, Some(s)) => barabasi_albert(s.nodes, s.attach, &RngStream::new(s.seed, u64::MAX)),
            (None, None) => Err(invalid("dataset needs either a path or a synthetic generator")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    /// Aggregate table, one row per (method, epsilon, eta).
    pub aggregate_csv: Option<PathBuf>,
    /// Per-trial reports as JSON lines.
    pub trials_jsonl: Option<PathBuf>,
}

/// Seven log-spaced thresholds from 1e-10 to 1e-4.
pub fn default_eta_grid() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-10.0 + i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub methods: Vec<Method>,
    pub beta: f64,
    pub steps: usize,
    pub eta_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    /// Defaults to `1 / |E|`.
    pub delta: Option<f64>,
    pub cutoff: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub bound: BoundKind,
    pub threshold_mode: ThresholdMode,
    pub noise: NoiseKind,
    /// Project onto the unit l1 ball after each noisy step.
    pub projection: bool,
    pub exclude_seed: bool,
    pub relevance: Relevance,
    pub alpha_grid: Vec<f64>,
    /// A row whose slowest trial exceeds this is marked skipped.
    pub trial_timeout_secs: Option<f64>,
    pub flip_node_limit: usize,
    pub outputs: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            methods: vec![Method::NoisyDiffusion, Method::EdgeFlipping],
            beta: 0.8,
            steps: 100,
            eta_grid: default_eta_grid(),
            epsilon_grid: vec![0.1, 0.5, 1.0],
            delta: None,
            cutoff: 100,
            trials: 100,
            base_seed: 0,
            bound: BoundKind::Personalized,
            threshold_mode: ThresholdMode::NonnegativeDegree,
            noise: NoiseKind::Laplace,
            projection: true,
            exclude_seed: true,
            relevance: Relevance::Graded,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            trial_timeout_secs: None,
            flip_node_limit: DEFAULT_NODE_LIMIT,
            outputs: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.epsilon_grid.is_empty() {
            return Err(invalid("method list and epsilon grid must be non-empty"));
        }
        if self.methods.contains(&Method::NoisyDiffusion) && self.eta_grid.is_empty() {
            return Err(invalid("eta grid must be non-empty"));
        }
        if self.trials == 0 || self.cutoff == 0 || self.steps == 0 {
            return Err(invalid("trials, cutoff and steps must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(invalid(format!("delta must lie in (0, 1), got {d}")));
            }
        }
        if let Some(e) = self.eta_grid.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(invalid(format!("eta values must be positive, got {e}")));
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(**e > 0.0)) {
            return Err(invalid(format!("epsilon values must be positive, got {e}")));
        }
        if (self.noise == NoiseKind::Gaussian) != (self.bound == BoundKind::Gaussian) {
            return Err(invalid("Gaussian noise goes with the Gaussian bound and only with it"));
        }
        Ok(())
    }

    fn privacy_mode(&self) -> PrivacyMode {
        match self.bound {
            BoundKind::Personalized => PrivacyMode::Personalized,
            _ => PrivacyMode::Standard,
        }
    }

    fn schedule(&self) -> Result<DiffusionSchedule> {
        let b = self.beta;
        DiffusionSchedule::constant(StepCoefficients::new(b / 2.0, b / 2.0, 1.0 - b), self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Infeasible,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub method: Method,
    pub epsilon: f64,
    pub eta: Option<f64>,
    pub trial: usize,
    pub seed_node: usize,
    /// Calibrated noise scale (noisy diffusion) or flip probability.
    pub noise_param: f64,
    pub ndcg: f64,
    pub recall: f64,
    pub runtime_secs: f64,
    pub stream: RngStream,
}

/// One aggregate row. Metric fields are empty unless `status` is `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: Option<f64>,
    pub bound: Option<BoundKind>,
    pub status: RowStatus,
    pub sigma: Option<f64>,
    pub flip_p: Option<f64>,
    pub achieved_epsilon: Option<f64>,
    pub alpha_star: Option<f64>,
    pub tau_star: Option<usize>,
    pub trials: usize,
    pub ndcg_mean: Option<f64>,
    pub ndcg_ci: Option<f64>,
    pub recall_mean: Option<f64>,
    pub recall_ci: Option<f64>,
    /// Highest mean NDCG among this method's rows at this epsilon.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<AggregateRow>,
    pub trials: Vec<TrialReport>,
    pub node_count: usize,
    pub edge_count: usize,
    pub delta: f64,
}

impl SweepResult {
    pub fn all_infeasible(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Infeasible)
    }

    /// The best row for `method` at `epsilon`, if any row was feasible.
    pub fn best(&self, method: Method, epsilon: f64) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.method == method && r.epsilon == epsilon && r.best)
    }

    pub fn write_aggregate_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_trials_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut w, t)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `(mean, 1.96 * sample_std / sqrt(n))`; the half-width is 0 for one
/// value.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

/// Seed node of trial `t`: uniform over nodes, drawn from the base stream
/// so every method and grid point sees the same seeds.
pub fn trial_seed_node(base_seed: u64, trial: usize, n: usize) -> usize {
    RngStream::new(base_seed, 0).derive(trial as u64).rng().gen_range(0..n)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var("PRIVDIFF_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(k.max(1));
    }
    builder.build().map_err(|e| invalid(format!("thread pool: {e}")))
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    g: &'a SparseGraph,
    schedule: DiffusionSchedule,
    seeds: Vec<usize>,
    truths: Vec<Vec<f64>>,
    delta: f64,
    settings: CalibrationSettings,
}

impl Context<'_> {
    fn stream(&self, method: Method, ei: usize, hi: usize, trial: usize) -> RngStream {
        RngStream::new(self.cfg.base_seed, method.label())
            .derive(ei as u64)
            .derive(hi as u64)
            .derive(trial as u64)
    }

    fn exclude(&self, trial: usize) -> Vec<u32> {
        if self.cfg.exclude_seed {
            vec![self.seeds[trial] as u32]
        } else {
            Vec::new()
        }
    }

    fn score(&self, trial: usize, approx: &[f64]) -> Result<(f64, f64)> {
        let truth = &self.truths[trial];
        let ex = self.exclude(trial);
        let ndcg = ndcg_at_r_with(approx, truth, self.cfg.cutoff, &ex, self.cfg.relevance)?;
        let recall = recall_at_r(approx, truth, self.cfg.cutoff, &ex)?;
        Ok((ndcg, recall))
    }

    fn noisy_row(&self, ei: usize, hi: usize) -> Result<(AggregateRow, Vec<TrialReport>)> {
        let cfg = self.cfg;
        let (epsilon, eta) = (cfg.epsilon_grid[ei], cfg.eta_grid[hi]);
        let mode = self.privacy_mode();
        let tracking = match cfg.bound {
            BoundKind::Diameter => Tracking::Diameter(diameter_degree_threshold(eta, self.g.degree_sum())),
            _ => Tracking::Wasserstein,
        };
        let query = AccountantQuery {
            alpha: 2.0,
            sigma: 1.0,
            steps: cfg.steps,
            rho_diff: rho_diff(&self.schedule, eta)?,
            gamma_max: self.schedule.gamma_max(),
            mode,
            tracking,
        };
        let mut row = self.empty_row(Method::NoisyDiffusion, epsilon, Some(eta));
        row.bound = Some(cfg.bound);
        let target = CalibrationTarget::Dp(DpBudget::new(epsilon, self.delta)?);
        let cal = match calibrate_sigma(target, &query, cfg.bound, &self.settings) {
            Ok(c) => c,
            Err(Error::Infeasible(msg)) => {
                log::warn!("epsilon {epsilon}, eta {eta}: {msg}");
                row.status = RowStatus::Infeasible;
                return Ok((row, Vec::new()));
            }
            Err(e) => return Err(e),
        };
        row.sigma = Some(cal.sigma);
        row.achieved_epsilon = Some(cal.achieved_epsilon);
        row.alpha_star = Some(cal.alpha_star);
        row.tau_star = cal.tau_star;

        let reports = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let start = Instant::now();
                let seed_node = self.seeds[t];
                let mut policy = ThresholdPolicy::new(eta, cfg.threshold_mode)?;
                if mode == PrivacyMode::Personalized {
                    policy = policy.with_seed(seed_node);
                }
                let params = NoisyDiffusion {
                    schedule: self.schedule.clone(),
                    policy,
                    sigma: cal.sigma,
                    noise: cfg.noise,
                    l1_radius: cfg.projection.then_some(1.0),
                };
                let stream = self.stream(Method::NoisyDiffusion, ei, hi, t);
                let s = indicator(self.g.node_count(), seed_node)?;
                let run = run_noisy_diffusion(self.g, &params, &s, cfg.steps, &stream)?;
                let (ndcg, recall) = self.score(t, &run.output)?;
                Ok(TrialReport {
                    method: Method::NoisyDiffusion,
                    epsilon,
                    eta: Some(eta),
                    trial: t,
                    seed_node,
                    noise_param: cal.sigma,
                    ndcg,
                    recall,
                    runtime_secs: start.elapsed().as_secs_f64(),
                    stream,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.finish_row(&mut row, &reports);
        Ok((row, reports))
    }

    fn flip_row(&self, ei: usize) -> Result<(AggregateRow, Vec<TrialReport>)> {
        let cfg = self.cfg;
        let epsilon = cfg.epsilon_grid[ei];
        let mut row = self.empty_row(Method::EdgeFlipping, epsilon, None);
        let cal = match calibrate_flip_prob(DpBudget::new(epsilon, self.delta)?, &self.settings) {
            Ok(c) => c,
            Err(Error::Infeasible(msg)) => {
                log::warn!("edge flipping at epsilon {epsilon}: {msg}");
                row.status = RowStatus::Infeasible;
                return Ok((row, Vec::new()));
            }
            Err(e) => return Err(e),
        };
        row.flip_p = Some(cal.p);
        row.achieved_epsilon = Some(cal.achieved_epsilon);
        row.alpha_star = Some(cal.alpha_star);
        let personalized = self.privacy_mode() == PrivacyMode::Personalized;
        // Trials run one at a time: each holds a dense flipped graph.
        let mut reports = Vec::with_capacity(cfg.trials);
        for t in 0..cfg.trials {
            let start = Instant::now();
            let seed_node = self.seeds[t];
            let mut flip = FlipConfig::new(cal.p);
            flip.node_limit = cfg.flip_node_limit;
            if personalized {
                flip = flip.with_seed(seed_node);
            }
            let stream = self.stream(Method::EdgeFlipping, ei, 0, t);
            let flipped = edge_flipping(self.g, &flip, &stream)?;
            let scores = match diffusion_on_flipped(&flipped, &self.schedule, seed_node, cfg.steps) {
                Ok((scores, comp)) => {
                    log::debug!("trial {t}: flipped component keeps {} nodes", comp.node_ids.len());
                    scores
                }
                Err(Error::IsolatedNode { .. }) => indicator(self.g.node_count(), seed_node)?,
                Err(e) => return Err(e),
            };
            drop(flipped);
            let (ndcg, recall) = self.score(t, &scores)?;
            reports.push(TrialReport {
                method: Method::EdgeFlipping,
                epsilon,
                eta: None,
                trial: t,
                seed_node,
                noise_param: cal.p,
                ndcg,
                recall,
                runtime_secs: start.elapsed().as_secs_f64(),
                stream,
            });
        }
        self.finish_row(&mut row, &reports);
        Ok((row, reports))
    }

    fn privacy_mode(&self) -> PrivacyMode {
        self.cfg.privacy_mode()
    }

    fn empty_row(&self, method: Method, epsilon: f64, eta: Option<f64>) -> AggregateRow {
        AggregateRow {
            method,
            epsilon,
            delta: self.delta,
            eta,
            bound: None,
            status: RowStatus::Ok,
            sigma: None,
            flip_p: None,
            achieved_epsilon: None,
            alpha_star: None,
            tau_star: None,
            trials: self.cfg.trials,
            ndcg_mean: None,
            ndcg_ci: None,
            recall_mean: None,
            recall_ci: None,
            best: false,
        }
    }

    fn finish_row(&self, row: &mut AggregateRow, reports: &[TrialReport]) {
        if let Some(limit) = self.cfg.trial_timeout_secs {
            if reports.iter().any(|r| r.runtime_secs > limit) {
                row.status = RowStatus::Skipped;
                return;
            }
        }
        let ndcg: Vec<f64> = reports.iter().map(|r| r.ndcg).collect();
        let recall: Vec<f64> = reports.iter().map(|r| r.recall).collect();
        let (m, c) = mean_ci(&ndcg);
        row.ndcg_mean = Some(m);
        row.ndcg_ci = Some(c);
        let (m, c) = mean_ci(&recall);
        row.recall_mean = Some(m);
        row.recall_ci = Some(c);
    }
}

/// Marks, per (method, epsilon), the `ok` row with the highest mean NDCG;
/// ties go to the smaller eta.
fn mark_best(rows: &mut [AggregateRow]) {
    let mut best: Vec<((Method, u64), usize)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let Some(m) = r.ndcg_mean else { continue };
        let key = (r.method, r.epsilon.to_bits());
        match best.iter_mut().find(|(k, _)| *k == key) {
            None => best.push((key, i)),
            Some((_, j)) => {
                let cur = &rows[*j];
                let cur_m = cur.ndcg_mean.unwrap();
                let smaller_eta = r.eta.unwrap_or(0.0) < cur.eta.unwrap_or(0.0);
                if m > cur_m || (m == cur_m && smaller_eta) {
                    *j = i;
                }
            }
        }
    }
    for (_, i) in best {
        rows[i].best = true;
    }
}

/// Runs the sweep on the configured dataset and writes configured outputs.
pub fn run_privacy_utility_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let g = cfg.dataset.load()?;
    let result = run_sweep_on_graph(cfg, &g)?;
    if let Some(path) = &cfg.outputs.aggregate_csv {
        result.write_aggregate_csv(File::create(path)?)?;
    }
    if let Some(path) = &cfg.outputs.trials_jsonl {
        result.write_trials_jsonl(std::io::BufWriter::new(File::create(path)?))?;
    }
    Ok(result)
}

/// As [`run_privacy_utility_sweep`] on an already loaded graph; writes
/// nothing.
pub fn run_sweep_on_graph(cfg: &ExperimentConfig, g: &SparseGraph) -> Result<SweepResult> {
    cfg.validate()?;
    let n = g.node_count();
    let delta = cfg.delta.unwrap_or(1.0 / g.edge_count() as f64);
    let schedule = cfg.schedule()?;
    let seeds: Vec<usize> = (0..cfg.trials).map(|t| trial_seed_node(cfg.base_seed, t, n)).collect();
    let pool = thread_pool()?;
    pool.install(|| {
        let truths = seeds
            .par_iter()
            .map(|&s| run_exact_diffusion(g, &schedule, &indicator(n, s)?, cfg.steps))
            .collect::<Result<Vec<_>>>()?;
        let settings = CalibrationSettings { alpha_grid: cfg.alpha_grid.clone(), ..CalibrationSettings::default() };
        let ctx = Context { cfg, g, schedule, seeds, truths, delta, settings };
        let mut rows = Vec::new();
        let mut trials = Vec::new();
        for &method in &cfg.methods {
            for ei in 0..cfg.epsilon_grid.len() {
                match method {
                    Method::NoisyDiffusion => {
                        for hi in 0..cfg.eta_grid.len() {
                            let (row, reports) = ctx.noisy_row(ei, hi)?;
                            log::info!("{} eps={} eta={}: {:?}", method.name(), row.epsilon, cfg.eta_grid[hi], row.ndcg_mean);
                            rows.push(row);
                            trials.extend(reports);
                        }
                    }
                    Method::EdgeFlipping => {
                        let (row, reports) = ctx.flip_row(ei)?;
                        log::info!("{} eps={}: {:?}", method.name(), row.epsilon, row.ndcg_mean);
                        rows.push(row);
                        trials.extend(reports);
                    }
                }
            }
        }
        mark_best(&mut rows);
        Ok(SweepResult { rows, trials, node_count: n, edge_count: g.edge_count(), delta })
    })
}

/// Parameters of the bound-curve tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub step: StepCoefficients,
    pub alpha: f64,
    pub sigma: f64,
    pub eta: f64,
    pub max_steps: usize,
    /// Degree sum used for the thresholding diameter `eta * sum d`.
    pub degree_sum: u64,
    pub max_tau: usize,
    /// Step count used for the noise-calibration table.
    pub calibration_steps: usize,
    pub epsilon_grid: Vec<f64>,
    pub delta: f64,
    pub alpha_grid: Vec<f64>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            step: StepCoefficients::new(0.8, 0.0, 0.2),
            alpha: 2.0,
            sigma: 0.01,
            eta: 1e-5,
            max_steps: 500,
            degree_sum: 667_966,
            max_tau: 100,
            calibration_steps: 100,
            epsilon_grid: vec![0.1, 0.3, 1.0],
            delta: 1.0 / 333_983.0,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsRow {
    pub steps: usize,
    pub standard: f64,
    pub personalized: f64,
    pub composition: f64,
    pub diameter: f64,
    pub gaussian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub tau: usize,
    pub w_tau: f64,
    pub diameter: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub sigma_standard: f64,
    pub sigma_composition: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurves {
    pub rho_diff: f64,
    pub gamma_max: f64,
    pub diameter: f64,
    pub by_steps: Vec<StepsRow>,
    pub by_tau: Vec<TauRow>,
    pub by_epsilon: Vec<EpsilonRow>,
}

fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

impl BoundCurves {
    /// Writes `bounds_by_steps.csv`, `w_tau_vs_diameter.csv` and
    /// `sigma_by_epsilon.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(File::create(dir.join("bounds_by_steps.csv"))?, &self.by_steps)?;
        write_csv(File::create(dir.join("w_tau_vs_diameter.csv"))?, &self.by_tau)?;
        write_csv(File::create(dir.join("sigma_by_epsilon.csv"))?, &self.by_epsilon)?;
        Ok(())
    }
}

/// Tabulates every bound against the step count, `w_tau` against the
/// thresholding diameter, and calibrated noise for the standard bound
/// against plain composition.
pub fn emit_bound_curves(cfg: &CurveConfig) -> Result<BoundCurves> {
    let schedule = DiffusionSchedule::constant(cfg.step, cfg.max_steps.max(cfg.calibration_steps))?;
    let rho = rho_diff(&schedule, cfg.eta)?;
    let gamma = schedule.gamma_max();
    let diameter = diameter_degree_threshold(cfg.eta, cfg.degree_sum);
    let base = AccountantQuery {
        alpha: cfg.alpha,
        sigma: cfg.sigma,
        steps: 1,
        rho_diff: rho,
        gamma_max: gamma,
        mode: PrivacyMode::Standard,
        tracking: Tracking::Wasserstein,
    };
    let by_steps = (1..=cfg.max_steps)
        .map(|k| {
            let q = AccountantQuery { steps: k, ..base };
            let with_d = AccountantQuery { tracking: Tracking::Diameter(diameter), ..q };
            Ok(StepsRow {
                steps: k,
                standard: BoundKind::Standard.evaluate(&q)?.epsilon,
                personalized: BoundKind::Personalized.evaluate(&q)?.epsilon,
                composition: BoundKind::Composition.evaluate(&q)?.epsilon,
                diameter: BoundKind::Diameter.evaluate(&with_d)?.epsilon,
                gaussian: BoundKind::Gaussian.evaluate(&q)?.epsilon,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let by_tau = (0..=cfg.max_tau)
        .map(|tau| {
            let w = wasserstein_tau(rho, gamma, tau);
            TauRow { tau, w_tau: w, diameter, ratio: w / diameter }
        })
        .collect();
    let settings = CalibrationSettings { alpha_grid: cfg.alpha_grid.clone(), ..CalibrationSettings::default() };
    let q = AccountantQuery { steps: cfg.calibration_steps, ..base };
    let by_epsilon = cfg
        .epsilon_grid
        .iter()
        .map(|&eps| {
            let target = CalibrationTarget::Dp(DpBudget::new(eps, cfg.delta)?);
            let s = calibrate_sigma(target, &q, BoundKind::Standard, &settings)?.sigma;
            let c = calibrate_sigma(target, &q, BoundKind::Composition, &settings)?.sigma;
            Ok(EpsilonRow { epsilon: eps, sigma_standard: s, sigma_composition: c, ratio: c / s })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurves { rho_diff: rho, gamma_max: gamma, diameter, by_steps, by_tau, by_epsilon })
}

/// Reads one seed node id per non-empty line.
pub fn read_node_list<R: BufRead>(r: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse().map_err(|_| Error::Parse { line: i + 1, message: format!("bad node id {t:?}") })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_connected;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            trials: 4,
            steps: 30,
            cutoff: 10,
            eta_grid: vec![1e-4, 1e-2],
            epsilon_grid: vec![1.0],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn mean_ci_formula() {
        let (m, c) = mean_ci(&[0.2, 0.4, 0.6]);
        assert!((m - 0.4).abs() < 1e-15);
        assert!((c - 1.96 * 0.2 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_ci(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn sweep_rows_and_best() {
        let g = random_connected(120, 300, &RngStream::new(9, 0)).unwrap();
        let res = run_sweep_on_graph(&small_config(), &g).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert_eq!(res.trials.len(), 12);
        assert!(res.best(Method::NoisyDiffusion, 1.0).is_some());
        assert!(res.best(Method::EdgeFlipping, 1.0).is_some());
        for r in &res.rows {
            assert_eq!(r.status, RowStatus::Ok);
            let m = r.ndcg_mean.unwrap();
            assert!((0.0..=1.0).contains(&m));
            assert!(r.achieved_epsilon.unwrap() <= 1.0);
        }
        for t in &res.trials {
            assert!((0.0..=1.0).contains(&t.ndcg) && (0.0..=1.0).contains(&t.recall));
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let g = random_connected(80, 200, &RngStream::new(3, 0)).unwrap();
        let mut cfg = small_config();
        cfg.trials = 1;
        let csv = |cfg: &ExperimentConfig| {
            let mut buf = Vec::new();
            run_sweep_on_graph(cfg, &g).unwrap().write_aggregate_csv(&mut buf).unwrap();
            buf
        };
        assert_eq!(csv(&cfg), csv(&cfg));
    }

    #[test]
    fn infeasible_rows_marked() {
        let g = random_connected(60, 100, &RngStream::new(4, 0)).unwrap();
        let mut cfg = small_config();
        cfg.epsilon_grid = vec![1e-4];
        let res = run_sweep_on_graph(&cfg, &g).unwrap();
        assert!(res.all_infeasible());
        assert!(res.rows.iter().all(|r| r.ndcg_mean.is_none() && !r.best));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { delta: Some(1.0), ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { noise: NoiseKind::Gaussian, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let parsed: ExperimentConfig =
            serde_json::from_str(r#"{"beta": 0.7, "dataset": {"synthetic": {"nodes": 50, "attach": 2}}}"#).unwrap();
        assert_eq!(parsed.beta, 0.7);
        assert_eq!(parsed.steps, 100);
        assert_eq!(parsed.dataset.load().unwrap().node_count(), 50);
    }

    #[test]
    fn curves_tables() {
        let cfg = CurveConfig { max_steps: 60, ..CurveConfig::default() };
        let c = emit_bound_curves(&cfg).unwrap();
        assert_eq!(c.by_steps.len(), 60);
        for (i, r) in c.by_steps.iter().enumerate() {
            assert!(r.standard <= r.composition * (1.0 + 1e-12));
            assert!((r.composition - (i + 1) as f64 * c.by_steps[0].composition).abs() <= 1e-12 * r.composition);
        }
        for r in &c.by_tau {
            assert_eq!(r.w_tau, wasserstein_tau(c.rho_diff, c.gamma_max, r.tau));
        }
        let dir = tempfile::tempdir().unwrap();
        c.write_csvs(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("bounds_by_steps.csv")).unwrap();
        assert!(text.starts_with("steps,standard,personalized,composition,diameter,gaussian\n"));
    }

    #[test]
    fn node_list_parsing() {
        assert_eq!(read_node_list("3\n# c\n\n7\n".as_bytes()).unwrap(), vec![3, 7]);
        assert!(read_node_list("x\n".as_bytes()).is_err());
    }
}
