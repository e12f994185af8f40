use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use privdiff::accountant::{
    calibrate_flip_prob, calibrate_sigma, diameter_degree_threshold, rdp_to_dp, rho_factor, AccountantQuery,
    BoundKind, CalibrationSettings, CalibrationTarget, DpBudget, PrivacyMode, Tracking,
};
use privdiff::baseline::{diffusion_on_flipped, edge_flipping, FlipConfig, DEFAULT_NODE_LIMIT};
use privdiff::diffusion::{
    indicator, ppr_schedule, run_exact_diffusion, run_noisy_diffusion, NoisyDiffusion, ThresholdMode, ThresholdPolicy,
};
use privdiff::experiment::{emit_bound_curves, run_privacy_utility_sweep, CurveConfig, ExperimentConfig, Method};
use privdiff::graph::{load_edge_list, LoadOptions, LoadedGraph};
use privdiff::io::write_vector;
use privdiff::noise::{NoiseKind, RngStream};
use privdiff::oracles::run_verify_suite;
use privdiff::{Error, Result};

#[derive(Parser)]
#[command(name = "privdiff", version, about = "Edge-level private graph diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an edge list and report (or write) its canonical form.
    Ingest(IngestArgs),
    /// Run exact or noisy PPR from one seed node.
    Diffuse(DiffuseArgs),
    /// Evaluate an RDP bound.
    Account(AccountArgs),
    /// Find the smallest noise scale meeting a privacy budget.
    Calibrate(CalibrateArgs),
    /// Run the oracle suite and print JSON lines.
    Verify {
        #[arg(long, default_value_t = 2024)]
        rng_seed: u64,
    },
    /// Run a privacy-utility sweep from a JSON config.
    Sweep(SweepArgs),
    /// Write bound-curve CSV tables.
    Curves(CurvesArgs),
    /// Release an edge-flipped graph.
    FlipBaseline(FlipArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list: two ids per line, whitespace or comma separated.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    one_indexed: bool,
    /// Keep only the largest connected component.
    #[arg(long)]
    lcc: bool,
}

impl GraphArgs {
    fn load(&self) -> Result<LoadedGraph> {
        load_edge_list(
            BufReader::new(File::open(&self.graph)?),
            LoadOptions { one_indexed: self.one_indexed, extract_lcc: self.lcc },
        )
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Write the canonical 0-based edge list here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    SymmetricDegree,
    NonnegativeDegree,
    Uniform,
    NonnegativeUniform,
}

impl From<ModeArg> for ThresholdMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SymmetricDegree => ThresholdMode::SymmetricDegree,
            ModeArg::NonnegativeDegree => ThresholdMode::NonnegativeDegree,
            ModeArg::Uniform => ThresholdMode::Uniform,
            ModeArg::NonnegativeUniform => ThresholdMode::NonnegativeUniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Standard,
    Personalized,
    Asymptotic,
    Composition,
    Diameter,
    Gaussian,
}

impl From<BoundArg> for BoundKind {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::Standard => BoundKind::Standard,
            BoundArg::Personalized => BoundKind::Personalized,
            BoundArg::Asymptotic => BoundKind::Asymptotic,
            BoundArg::Composition => BoundKind::Composition,
            BoundArg::Diameter => BoundKind::Diameter,
            BoundArg::Gaussian => BoundKind::Gaussian,
        }
    }
}

#[derive(Args)]
struct DiffuseArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    seed_node: usize,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Noise-free diffusion; ignores all privacy options.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 1e-6)]
    eta: f64,
    #[arg(long, value_enum, default_value = "nonnegative-degree")]
    mode: ModeArg,
    /// Noise scale. Without it, --epsilon and --delta calibrate one.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Account under standard rather than personalized edge-level privacy.
    #[arg(long)]
    standard: bool,
    #[arg(long)]
    no_projection: bool,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Score vector output (.json or .bin).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AccountArgs {
    #[arg(long, value_enum, default_value = "personalized")]
    bound: BoundArg,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// PPR teleport parameter; sets gamma_max and rho_diff = 2 beta eta.
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 1e-6)]
    eta: f64,
    /// Overrides the distortion derived from beta and eta.
    #[arg(long)]
    rho_diff: Option<f64>,
    /// Diameter for the diameter bound; defaults to eta * degree_sum.
    #[arg(long)]
    diameter: Option<f64>,
    #[arg(long)]
    degree_sum: Option<u64>,
    /// Also convert to (eps, delta)-DP over the default alpha grid.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_enum, default_value = "personalized")]
    bound: BoundArg,
    #[arg(long)]
    epsilon: f64,
    /// DP target; omit together with --rdp-alpha for an RDP target.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rdp_alpha: Option<f64>,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 1e-6)]
    eta: f64,
    #[arg(long)]
    diameter: Option<f64>,
    /// Extra orders appended to the default alpha grid.
    #[arg(long, value_delimiter = ',')]
    extra_alpha: Vec<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge list; overrides the config's dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    one_indexed: bool,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Only run the noisy diffusion rows.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    standard: bool,
    #[arg(long)]
    no_projection: bool,
    /// Aggregate CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial JSON lines path.
    #[arg(long)]
    trials_out: Option<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    degree_sum: Option<u64>,
}

#[derive(Args)]
struct FlipArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Defaults to 1 / |E|.
    #[arg(long)]
    delta: Option<f64>,
    /// Exempt pairs touching this node and run PPR from it.
    #[arg(long)]
    seed_node: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    node_limit: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Flipped edge list output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// PPR scores on the flipped graph (.json or .bin); needs --seed-node.
    #[arg(long)]
    scores: Option<PathBuf>,
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let loaded = a.graph.load()?;
    let g = &loaded.graph;
    if let Some(path) = &a.output {
        g.write_edge_list(BufWriter::new(File::create(path)?))?;
    }
    print_json(&json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "degree_sum": g.degree_sum(),
        "max_degree": g.degrees().into_iter().max(),
        "duplicate_edges": loaded.duplicate_edges,
        "self_loops": loaded.self_loops,
        "dropped_nodes": loaded.dropped_nodes,
        "connected": g.is_connected(),
    }))
}

fn diffuse(a: DiffuseArgs) -> Result<()> {
    let g = a.graph.load()?.graph;
    let n = g.node_count();
    let schedule = ppr_schedule(a.beta, a.steps)?;
    let s = indicator(n, a.seed_node)?;
    let (scores, summary) = if a.exact {
        (run_exact_diffusion(&g, &schedule, &s, a.steps)?, json!({"exact": true}))
    } else {
        let mode = if a.standard { PrivacyMode::Standard } else { PrivacyMode::Personalized };
        let (sigma, calibration) = match (a.sigma, a.epsilon) {
            (Some(sigma), _) => (sigma, serde_json::Value::Null),
            (None, Some(eps)) => {
                let delta = a.delta.unwrap_or(1.0 / g.edge_count() as f64);
                let q = AccountantQuery {
                    alpha: 2.0,
                    sigma: 1.0,
                    steps: a.steps,
                    rho_diff: rho_factor(&schedule) * a.eta,
                    gamma_max: schedule.gamma_max(),
                    mode,
                    tracking: Tracking::Wasserstein,
                };
                let kind = if a.standard { BoundKind::Standard } else { BoundKind::Personalized };
                let c = calibrate_sigma(
                    CalibrationTarget::Dp(DpBudget::new(eps, delta)?),
                    &q,
                    kind,
                    &CalibrationSettings::default(),
                )?;
                (c.sigma, serde_json::to_value(c)?)
            }
            (None, None) => return Err(Error::InvalidParameter("give --exact, --sigma or --epsilon".into())),
        };
        let mut policy = ThresholdPolicy::new(a.eta, a.mode.into())?;
        if mode == PrivacyMode::Personalized {
            policy = policy.with_seed(a.seed_node);
        }
        let params = NoisyDiffusion {
            schedule,
            policy,
            sigma,
            noise: NoiseKind::Laplace,
            l1_radius: (!a.no_projection).then_some(1.0),
        };
        let run = run_noisy_diffusion(&g, &params, &s, a.steps, &RngStream::new(a.rng_seed, 0))?;
        (run.output, json!({"exact": false, "sigma": sigma, "calibration": calibration}))
    };
    if let Some(path) = &a.output {
        write_vector(path, &scores)?;
    }
    let mass: f64 = scores.iter().sum();
    print_json(&json!({"nodes": n, "seed_node": a.seed_node, "steps": a.steps, "mass": mass, "run": summary}))
}

fn account(a: AccountArgs) -> Result<()> {
    let schedule = ppr_schedule(a.beta, a.steps)?;
    let rho = a.rho_diff.unwrap_or(rho_factor(&schedule) * a.eta);
    let kind: BoundKind = a.bound.into();
    let tracking = match kind {
        BoundKind::Diameter => Tracking::Diameter(match (a.diameter, a.degree_sum) {
            (Some(d), _) => d,
            (None, Some(sum)) => diameter_degree_threshold(a.eta, sum),
            (None, None) => return Err(Error::InvalidParameter("diameter bound needs --diameter or --degree-sum".into())),
        }),
        _ => Tracking::Wasserstein,
    };
    let q = AccountantQuery {
        alpha: a.alpha,
        sigma: a.sigma,
        steps: a.steps,
        rho_diff: rho,
        gamma_max: schedule.gamma_max(),
        mode: if kind == BoundKind::Personalized { PrivacyMode::Personalized } else { PrivacyMode::Standard },
        tracking,
    };
    let bound = kind.evaluate(&q)?;
    let dp = match a.delta {
        Some(delta) => {
            let grid = CalibrationSettings::default().alpha_grid;
            let conv = rdp_to_dp(
                |alpha| kind.evaluate(&AccountantQuery { alpha, ..q }).map(|b| b.epsilon).unwrap_or(f64::NAN),
                delta,
                &grid,
            )?;
            serde_json::to_value(conv)?
        }
        None => serde_json::Value::Null,
    };
    print_json(&json!({"query": q, "bound": kind, "rdp": bound, "dp": dp}))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let schedule = ppr_schedule(a.beta, a.steps)?;
    let kind: BoundKind = a.bound.into();
    let q = AccountantQuery {
        alpha: 2.0,
        sigma: 1.0,
        steps: a.steps,
        rho_diff: rho_factor(&schedule) * a.eta,
        gamma_max: schedule.gamma_max(),
        mode: if kind == BoundKind::Personalized { PrivacyMode::Personalized } else { PrivacyMode::Standard },
        tracking: a.diameter.map_or(Tracking::Wasserstein, Tracking::Diameter),
    };
    let target = match (a.delta, a.rdp_alpha) {
        (Some(delta), None) => CalibrationTarget::Dp(DpBudget::new(a.epsilon, delta)?),
        (None, Some(alpha)) => CalibrationTarget::Rdp { epsilon: a.epsilon, alpha },
        _ => return Err(Error::InvalidParameter("give exactly one of --delta and --rdp-alpha".into())),
    };
    let mut settings = CalibrationSettings::default();
    settings.alpha_grid.extend(&a.extra_alpha);
    let c = calibrate_sigma(target, &q, kind, &settings)?;
    print_json(&json!({"bound": kind, "rho_diff": q.rho_diff, "calibration": c}))
}

fn verify(rng_seed: u64) -> Result<bool> {
    let reports = run_verify_suite(&RngStream::new(rng_seed, 0))?;
    for r in &reports {
        print_json(&serde_json::to_value(r)?)?;
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn sweep(a: SweepArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = a.dataset {
        cfg.dataset.path = Some(p);
        cfg.dataset.one_indexed = a.one_indexed;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon_grid = v;
    }
    if let Some(v) = a.eta {
        cfg.eta_grid = v;
    }
    cfg.delta = a.delta.or(cfg.delta);
    cfg.trials = a.trials.unwrap_or(cfg.trials);
    cfg.steps = a.steps.unwrap_or(cfg.steps);
    cfg.beta = a.beta.unwrap_or(cfg.beta);
    cfg.cutoff = a.cutoff.unwrap_or(cfg.cutoff);
    cfg.base_seed = a.base_seed.unwrap_or(cfg.base_seed);
    if a.no_baseline {
        cfg.methods.retain(|m| *m != Method::EdgeFlipping);
    }
    if a.standard {
        cfg.bound = BoundKind::Standard;
    }
    if a.no_projection {
        cfg.projection = false;
    }
    if a.out.is_some() {
        cfg.outputs.aggregate_csv = a.out;
    }
    if a.trials_out.is_some() {
        cfg.outputs.trials_jsonl = a.trials_out;
    }
    let result = run_privacy_utility_sweep(&cfg)?;
    if cfg.outputs.aggregate_csv.is_none() {
        result.write_aggregate_csv(io::stdout().lock())?;
    }
    Ok(!result.all_infeasible())
}

fn curves(a: CurvesArgs) -> Result<()> {
    let mut cfg: CurveConfig = match &a.config {
        Some(p) => serde_json::from_reader(BufReader::new(File::open(p)?))?,
        None => CurveConfig::default(),
    };
    cfg.max_steps = a.max_steps.unwrap_or(cfg.max_steps);
    cfg.sigma = a.sigma.unwrap_or(cfg.sigma);
    cfg.eta = a.eta.unwrap_or(cfg.eta);
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    cfg.degree_sum = a.degree_sum.unwrap_or(cfg.degree_sum);
    let c = emit_bound_curves(&cfg)?;
    c.write_csvs(&a.out_dir)?;
    print_json(&json!({"out_dir": a.out_dir, "rho_diff": c.rho_diff, "gamma_max": c.gamma_max, "diameter": c.diameter}))
}

fn flip_baseline(a: FlipArgs) -> Result<()> {
    let g = a.graph.load()?.graph;
    let (p, calibration) = match (a.p, a.epsilon) {
        (Some(p), None) => (p, serde_json::Value::Null),
        (None, Some(eps)) => {
            let delta = a.delta.unwrap_or(1.0 / g.edge_count() as f64);
            let c = calibrate_flip_prob(DpBudget::new(eps, delta)?, &CalibrationSettings::default())?;
            (c.p, serde_json::to_value(c)?)
        }
        _ => return Err(Error::InvalidParameter("give exactly one of --p and --epsilon".into())),
    };
    let mut cfg = FlipConfig::new(p);
    cfg.node_limit = a.node_limit;
    if let Some(s) = a.seed_node {
        cfg = cfg.with_seed(s);
    }
    let flipped = edge_flipping(&g, &cfg, &RngStream::new(a.rng_seed, 0))?;
    if let Some(path) = &a.output {
        let mut w = BufWriter::new(File::create(path)?);
        for (u, v) in flipped.edges() {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()?;
    }
    let mut component = serde_json::Value::Null;
    if let Some(path) = &a.scores {
        let seed = a.seed_node.ok_or_else(|| Error::InvalidParameter("--scores needs --seed-node".into()))?;
        let (scores, comp) = diffusion_on_flipped(&flipped, &ppr_schedule(a.beta, a.steps)?, seed, a.steps)?;
        write_vector(path, &scores)?;
        component = json!({"nodes": comp.node_ids.len(), "dropped_nodes": comp.dropped_nodes});
    }
    print_json(&json!({
        "p": p,
        "calibration": calibration,
        "input_edges": g.edge_count(),
        "output_edges": flipped.edge_count(),
        "seed_component": component,
    }))
}

fn report(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Infeasible(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(a) => ingest(a).map(|_| true),
        Command::Diffuse(a) => diffuse(a).map(|_| true),
        Command::Account(a) => account(a).map(|_| true),
        Command::Calibrate(a) => calibrate(a).map(|_| true),
        Command::Verify { rng_seed } => match verify(rng_seed) {
            Ok(true) => Ok(true),
            Ok(false) => {
                eprintln!("error: some oracle checks failed");
                return ExitCode::from(1);
            }
            Err(e) => Err(e),
        },
        Command::Sweep(a) => sweep(a),
        Command::Curves(a) => curves(a).map(|_| true),
        Command::FlipBaseline(a) => flip_baseline(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: calibration infeasible for every row");
            ExitCode::from(2)
        }
        Err(e) => report(&e),
    }
}
