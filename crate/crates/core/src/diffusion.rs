//! Exact and noisy graph diffusion.
//!
//! A diffusion step is the affine map
//!
//! ```text
//! phi_k(x) = walk_k * P x + stay_k * x + restart_k * s
//! ```
//!
//! with `walk_k + stay_k + restart_k = 1`. The noisy variant clips the
//! state with a degree-aware threshold before each step, adds two
//! independent noise vectors after it, and optionally projects the result
//! back onto an l1 ball.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::graph::SparseGraph;
use crate::noise::{NoiseKind, RngStream};

const COEFF_SUM_TOL: f64 = 1e-12;
const SEED_MASS_TOL: f64 = 1e-9;

/// Coefficients of one diffusion step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCoefficients {
    /// Weight on the random-walk term `P x`.
    pub walk: f64,
    /// Weight on the current state `x`.
    pub stay: f64,
    /// Weight on the seed vector `s`.
    pub restart: f64,
}

impl StepCoefficients {
    pub fn new(walk: f64, stay: f64, restart: f64) -> Self {
        Self { walk, stay, restart }
    }

    /// Lipschitz constant of the step in l1.
    pub fn lipschitz(&self) -> f64 {
        self.walk.abs() + self.stay.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Coeffs {
    Constant { step: StepCoefficients, steps: usize },
    PerStep(Vec<StepCoefficients>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    coeffs: Coeffs,
    gamma_max: f64,
    gamma1_max: f64,
}

impl DiffusionSchedule {
    /// The same coefficients for each of `steps` steps.
    pub fn constant(step: StepCoefficients, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("a schedule needs at least one step"));
        }
        Self::validate_step(&step, 1)?;
        let schedule = Self {
            gamma_max: step.lipschitz(),
            gamma1_max: step.walk.abs(),
            coeffs: Coeffs::Constant { step, steps },
        };
        schedule.check_contraction()?;
        Ok(schedule)
    }

    pub fn per_step(steps: Vec<StepCoefficients>) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("a schedule needs at least one step"));
        }
        for (i, s) in steps.iter().enumerate() {
            Self::validate_step(s, i + 1)?;
        }
        let schedule = Self {
            gamma_max: steps.iter().map(StepCoefficients::lipschitz).fold(0.0, f64::max),
            gamma1_max: steps.iter().map(|s| s.walk.abs()).fold(0.0, f64::max),
            coeffs: Coeffs::PerStep(steps),
        };
        schedule.check_contraction()?;
        Ok(schedule)
    }

    fn validate_step(s: &StepCoefficients, k: usize) -> Result<()> {
        if ![s.walk, s.stay, s.restart].iter().all(|c| c.is_finite()) {
            return Err(invalid(format!("step {k}: non-finite coefficient")));
        }
        let sum = s.walk + s.stay + s.restart;
        if (sum - 1.0).abs() > COEFF_SUM_TOL {
            return Err(invalid(format!("step {k}: coefficients sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn check_contraction(&self) -> Result<()> {
        if self.gamma_max < 1.0 {
            Ok(())
        } else {
            Err(invalid(format!("schedule is not a strict contraction (gamma_max = {})", self.gamma_max)))
        }
    }

    pub fn steps(&self) -> usize {
        match &self.coeffs {
            Coeffs::Constant { steps, .. } => *steps,
            Coeffs::PerStep(v) => v.len(),
        }
    }

    /// Coefficients of step `k` (1-based).
    pub fn step(&self, k: usize) -> Result<StepCoefficients> {
        let steps = self.steps();
        if k == 0 || k > steps {
            return Err(Error::StepOutOfRange { k, steps });
        }
        Ok(match &self.coeffs {
            Coeffs::Constant { step, .. } => *step,
            Coeffs::PerStep(v) => v[k - 1],
        })
    }

    /// `max_k |walk_k| + |stay_k|`.
    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    /// `max_k |walk_k|`.
    pub fn gamma1_max(&self) -> f64 {
        self.gamma1_max
    }
}

/// Personalized PageRank with the lazy walk `W = (P + I)/2`:
/// `phi(x) = beta W x + (1 - beta) s`, i.e. the constant step
/// `(beta/2, beta/2, 1 - beta)`.
pub fn ppr_schedule(beta: f64, steps: usize) -> Result<DiffusionSchedule> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("PPR beta must lie in (0, 1), got {beta}")));
    }
    DiffusionSchedule::constant(StepCoefficients::new(beta / 2.0, beta / 2.0, 1.0 - beta), steps)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Clip coordinate `i` to `[-eta d_i, eta d_i]`.
    #[default]
    SymmetricDegree,
    /// Clip coordinate `i` to `[0, eta d_i]`.
    NonnegativeDegree,
    /// Clip every coordinate to `[-eta, eta]`.
    Uniform,
    /// Clip every coordinate to `[0, eta]`.
    NonnegativeUniform,
}

impl ThresholdMode {
    fn nonnegative(self) -> bool {
        matches!(self, Self::NonnegativeDegree | Self::NonnegativeUniform)
    }

    fn degree_scaled(self) -> bool {
        matches!(self, Self::SymmetricDegree | Self::NonnegativeDegree)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub eta: f64,
    pub mode: ThresholdMode,
    /// When set, this node has no upper clip.
    pub personalized_seed: Option<usize>,
}

impl ThresholdPolicy {
    pub fn new(eta: f64, mode: ThresholdMode) -> Result<Self> {
        if !(eta > 0.0) || eta.is_nan() {
            return Err(invalid(format!("threshold eta must be positive, got {eta}")));
        }
        Ok(Self { eta, mode, personalized_seed: None })
    }

    pub fn with_seed(mut self, seed: usize) -> Self {
        self.personalized_seed = Some(seed);
        self
    }

    fn check(&self, g: &SparseGraph, len: usize) -> Result<()> {
        check_len(g.node_count(), len)?;
        if !(self.eta > 0.0) {
            return Err(invalid(format!("threshold eta must be positive, got {}", self.eta)));
        }
        if let Some(s) = self.personalized_seed {
            if s >= g.node_count() {
                return Err(invalid(format!("personalized seed {s} is not a node")));
            }
        }
        Ok(())
    }

    /// Upper clip of coordinate `i` (ignoring the seed exemption).
    pub fn cap(&self, g: &SparseGraph, i: usize) -> f64 {
        if self.mode.degree_scaled() {
            self.eta * g.degree(i) as f64
        } else {
            self.eta
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.mode.nonnegative()
    }

    pub(crate) fn apply_in_place(&self, g: &SparseGraph, x: &mut [f64]) {
        let nonneg = self.mode.nonnegative();
        for (i, xi) in x.iter_mut().enumerate() {
            let cap = self.cap(g, i);
            let lower = if nonneg { 0.0 } else { -cap };
            *xi = if self.personalized_seed == Some(i) {
                if nonneg {
                    xi.max(0.0)
                } else {
                    *xi
                }
            } else {
                xi.max(lower).min(cap)
            };
        }
    }
}

/// The thresholding function `f`.
pub fn apply_threshold(policy: &ThresholdPolicy, g: &SparseGraph, x: &[f64]) -> Result<Vec<f64>> {
    policy.check(g, x.len())?;
    let mut y = x.to_vec();
    policy.apply_in_place(g, &mut y);
    Ok(y)
}

/// One diffusion step `phi_k(x)`.
pub fn diffusion_step(
    g: &SparseGraph,
    schedule: &DiffusionSchedule,
    k: usize,
    x: &[f64],
    seed: &[f64],
) -> Result<Vec<f64>> {
    check_len(g.node_count(), x.len())?;
    check_len(g.node_count(), seed.len())?;
    let c = schedule.step(k)?;
    let mut work = Workspace::new(g.node_count());
    let mut out = vec![0.0; x.len()];
    work.step(g, c, x, seed, &mut out);
    Ok(out)
}

struct Workspace {
    scaled: Vec<f64>,
    walked: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { scaled: vec![0.0; n], walked: vec![0.0; n] }
    }

    fn step(&mut self, g: &SparseGraph, c: StepCoefficients, x: &[f64], seed: &[f64], out: &mut [f64]) {
        g.random_walk_into(x, &mut self.scaled, &mut self.walked);
        for i in 0..out.len() {
            out[i] = c.walk * self.walked[i] + c.stay * x[i] + c.restart * seed[i];
        }
    }
}

/// Euclidean projection onto `{y : ||y||_1 <= radius}`.
pub fn project_l1_ball(x: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("l1 radius must be positive and finite, got {radius}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("cannot project a vector with non-finite entries"));
    }
    let mut y = x.to_vec();
    project_in_place(&mut y, radius, &mut Vec::new());
    Ok(y)
}

/// Sort-based simplex projection of `|x|`, signs restored afterwards.
fn project_in_place(x: &mut [f64], radius: f64, scratch: &mut Vec<f64>) {
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return;
    }
    scratch.clear();
    scratch.extend(x.iter().map(|v| v.abs()).filter(|&v| v > 0.0));
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for v in x.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

fn seed_is_stochastic(seed: &[f64]) -> bool {
    seed.iter().all(|&v| v >= 0.0) && (seed.iter().sum::<f64>() - 1.0).abs() <= SEED_MASS_TOL
}

/// `phi_K o ... o phi_1 (s)`, noise-free and unclipped. A seed that is not
/// a probability vector only logs a warning; see
/// [`run_exact_diffusion_strict`].
pub fn run_exact_diffusion(
    g: &SparseGraph,
    schedule: &DiffusionSchedule,
    seed: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    check_len(g.node_count(), seed.len())?;
    if !seed_is_stochastic(seed) {
        log::warn!("diffusion seed is not a probability vector");
    }
    exact_unchecked(g, schedule, seed, steps)
}

/// As [`run_exact_diffusion`] but a non-stochastic seed is an error.
pub fn run_exact_diffusion_strict(
    g: &SparseGraph,
    schedule: &DiffusionSchedule,
    seed: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    check_len(g.node_count(), seed.len())?;
    if !seed_is_stochastic(seed) {
        return Err(invalid("diffusion seed must be nonnegative and sum to 1"));
    }
    exact_unchecked(g, schedule, seed, steps)
}

fn check_steps(schedule: &DiffusionSchedule, steps: usize) -> Result<()> {
    if steps == 0 || steps > schedule.steps() {
        return Err(invalid(format!(
            "step count {steps} outside 1..={} for this schedule",
            schedule.steps()
        )));
    }
    Ok(())
}

fn exact_unchecked(g: &SparseGraph, schedule: &DiffusionSchedule, seed: &[f64], steps: usize) -> Result<Vec<f64>> {
    check_steps(schedule, steps)?;
    let mut work = Workspace::new(g.node_count());
    let mut x = seed.to_vec();
    let mut next = vec![0.0; x.len()];
    for k in 1..=steps {
        work.step(g, schedule.step(k)?, &x, seed, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(x)
}

/// Parameters of a noisy diffusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyDiffusion {
    pub schedule: DiffusionSchedule,
    pub policy: ThresholdPolicy,
    /// Noise scale: Laplace scale, or Gaussian standard deviation. Zero
    /// disables noise.
    pub sigma: f64,
    pub noise: NoiseKind,
    /// Radius of the l1 ball projected onto after each step, if any.
    pub l1_radius: Option<f64>,
}

/// Output of a noisy run together with the streams each step drew from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyRun {
    pub output: Vec<f64>,
    /// `step_streams[k - 1]` holds the two streams of step `k`.
    pub step_streams: Vec<[RngStream; 2]>,
}

/// Runs `s_k = phi_k(f(s_{k-1})) + xi1_k + xi2_k`, optionally projected
/// onto the l1 ball, for `steps` steps starting from `s_0 = seed`.
///
/// Both noise vectors of step `k` come from streams derived from `rng`
/// with labels `2k - 1` and `2k`.
pub fn run_noisy_diffusion(
    g: &SparseGraph,
    params: &NoisyDiffusion,
    seed: &[f64],
    steps: usize,
    rng: &RngStream,
) -> Result<NoisyRun> {
    params.policy.check(g, seed.len())?;
    check_steps(&params.schedule, steps)?;
    if !(params.sigma >= 0.0) || !params.sigma.is_finite() {
        return Err(invalid(format!("noise scale must be finite and >= 0, got {}", params.sigma)));
    }
    if let Some(r) = params.l1_radius {
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid(format!("l1 radius must be positive and finite, got {r}")));
        }
    }
    if !seed_is_stochastic(seed) {
        log::warn!("diffusion seed is not a probability vector");
    }

    let mut work = Workspace::new(g.node_count());
    let mut state = seed.to_vec();
    let mut clipped = vec![0.0; state.len()];
    let mut sort_scratch = Vec::new();
    let mut step_streams = Vec::with_capacity(steps);
    for k in 1..=steps {
        clipped.copy_from_slice(&state);
        params.policy.apply_in_place(g, &mut clipped);
        work.step(g, params.schedule.step(k)?, &clipped, seed, &mut state);
        let streams = [rng.derive(2 * k as u64 - 1), rng.derive(2 * k as u64)];
        if params.sigma > 0.0 {
            for s in &streams {
                params.noise.add_to(&mut state, params.sigma, s);
            }
        }
        if let Some(r) = params.l1_radius {
            project_in_place(&mut state, r, &mut sort_scratch);
        }
        step_streams.push(streams);
    }
    Ok(NoisyRun { output: state, step_streams })
}

/// Indicator vector `e_node` of length `n`.
pub fn indicator(n: usize, node: usize) -> Result<Vec<f64>> {
    if node >= n {
        return Err(invalid(format!("node {node} out of range for {n} nodes")));
    }
    let mut e = vec![0.0; n];
    e[node] = 1.0;
    Ok(e)
}
