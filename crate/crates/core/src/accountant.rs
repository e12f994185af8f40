//! Renyi-DP accounting for noisy graph diffusion.
//!
//! The central quantity is the order-`alpha` Renyi divergence between two
//! Laplace laws of scale `sigma` whose means differ by `rho` in l1,
//!
//! ```text
//! g_alpha(sigma, rho) = ln( a e^{(alpha-1) t} + b e^{-alpha t} ) / (alpha - 1),
//! t = rho / sigma,  a = alpha / (2 alpha - 1),  b = (alpha - 1) / (2 alpha - 1).
//! ```
//!
//! The main bound splits the `K` steps at an intermediate step `tau`: the
//! last `K - tau` steps each absorb the single-step distortion `rho_diff`,
//! and the state gap accumulated over the first `tau` steps (tracked as an
//! infinity-Wasserstein distance `w_tau`) decays by `gamma_max` per step:
//!
//! ```text
//! eps <= min_tau (K - tau) g(sigma, rho_diff) + g(sigma, w_tau gamma_max^{K - tau})
//! w_tau = rho_diff (1 - gamma_max^tau) / (1 - gamma_max)
//! ```
//!
//! Every bound here depends on `sigma` and `rho_diff` only through their
//! ratio, which is what calibration searches over.

use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSchedule;
use crate::error::{invalid, Error, Result};

/// Orders searched when converting RDP to (eps, delta)-DP.
pub const DEFAULT_ALPHA_GRID: [f64; 14] =
    [1.01, 1.05, 1.1, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyMode {
    /// Adjacent graphs may differ in any edge.
    #[default]
    Standard,
    /// Adjacent graphs differ in an edge not incident to the seed node.
    Personalized,
}

/// How the distance between coupled diffusions at step `tau` is bounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracking {
    #[default]
    Wasserstein,
    /// A fixed diameter `D` of the set the iterates live in.
    Diameter(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountantQuery {
    pub alpha: f64,
    pub sigma: f64,
    pub steps: usize,
    pub rho_diff: f64,
    pub gamma_max: f64,
    #[serde(default)]
    pub mode: PrivacyMode,
    #[serde(default)]
    pub tracking: Tracking,
}

impl AccountantQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !self.alpha.is_finite() {
            return Err(invalid(format!("Renyi order must be > 1, got {}", self.alpha)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid(format!("noise scale must be positive, got {}", self.sigma)));
        }
        if self.steps == 0 {
            return Err(invalid("step count must be at least 1"));
        }
        if !(self.rho_diff >= 0.0) || !self.rho_diff.is_finite() {
            return Err(invalid(format!("distortion must be >= 0, got {}", self.rho_diff)));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max < 1.0) {
            return Err(invalid(format!("gamma_max must lie in (0, 1), got {}", self.gamma_max)));
        }
        if let Tracking::Diameter(d) = self.tracking {
            if !(d > 0.0) || !d.is_finite() {
                return Err(invalid(format!("diameter must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// Distortion-to-noise ratio `rho_diff / sigma`.
    fn ratio(&self) -> f64 {
        self.rho_diff / self.sigma
    }
}

/// A bound value with the split step that attains it (if the bound has one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpBound {
    pub epsilon: f64,
    pub tau: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Wasserstein-tracked bound, any edge.
    Standard,
    /// Wasserstein-tracked bound, edges not incident to the seed.
    #[default]
    Personalized,
    /// Closed-form envelope of the standard bound.
    Asymptotic,
    /// Plain RDP composition over all steps.
    Composition,
    /// Standard bound with `w_tau` replaced by a set diameter.
    Diameter,
    /// Standard bound for Gaussian noise of standard deviation `sigma`.
    Gaussian,
}

impl BoundKind {
    /// Evaluates this bound. `mode` and `tracking` on the query are taken
    /// from the kind rather than checked, except that `Diameter` reads its
    /// diameter from `q.tracking`.
    pub fn evaluate(self, q: &AccountantQuery) -> Result<RdpBound> {
        q.validate()?;
        self.evaluate_unchecked(q.alpha, q.ratio(), q)
    }

    fn evaluate_unchecked(self, alpha: f64, t: f64, q: &AccountantQuery) -> Result<RdpBound> {
        let k = q.steps;
        let gamma = q.gamma_max;
        Ok(match self {
            BoundKind::Standard => tracked_scan(alpha, t, k, gamma, 0),
            BoundKind::Personalized => personalized(alpha, t, k, gamma),
            BoundKind::Asymptotic => asymptotic(t, q.rho_diff, k, gamma),
            BoundKind::Composition => RdpBound { epsilon: k as f64 * laplace_rdp(alpha, t), tau: None },
            BoundKind::Diameter => match q.tracking {
                Tracking::Diameter(d) => diameter_scan(alpha, t, d / q.sigma, k, gamma),
                Tracking::Wasserstein => {
                    return Err(invalid("the diameter bound needs tracking = diameter(D)"))
                }
            },
            BoundKind::Gaussian => gaussian_scan(alpha, t, k, gamma),
        })
    }
}

/// `g_alpha(sigma, rho)`: Renyi divergence of order `alpha` between
/// `Laplace(0, sigma)` and `Laplace(rho, sigma)`.
pub fn g_alpha(alpha: f64, sigma: f64, rho: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid(format!("Renyi order must be > 1, got {alpha}")));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("noise scale must be positive, got {sigma}")));
    }
    if !(rho >= 0.0) {
        return Err(invalid(format!("shift must be >= 0, got {rho}")));
    }
    Ok(laplace_rdp(alpha, rho / sigma))
}

/// `g_alpha` as a function of the shift-to-scale ratio `t`.
///
/// Three regimes keep the result accurate: a power series for small
/// `alpha t` (where the two exponentials cancel to second order),
/// `expm1`/`ln_1p` in the middle, and log-space for large `t`.
pub(crate) fn laplace_rdp(alpha: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return f64::INFINITY;
    }
    let am1 = alpha - 1.0;
    let denom = 2.0 * alpha - 1.0;
    let value = if alpha * t <= 0.5 {
        // u = sum_{n>=2} alpha (alpha-1) [(alpha-1)^{n-1} + (-alpha)^{n-1}(-1)] t^n / (n! (2 alpha - 1))
        let mut p = am1 * t * t / 2.0;
        let mut q = alpha * t * t / 2.0;
        let mut sum = p + q;
        let mut n = 2.0;
        loop {
            n += 1.0;
            p *= am1 * t / n;
            q *= -alpha * t / n;
            let term = p + q;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        let u = alpha * am1 / denom * sum;
        u.ln_1p() / am1
    } else if alpha * t <= 30.0 {
        let u = alpha / denom * (am1 * t).exp_m1() + am1 / denom * (-alpha * t).exp_m1();
        u.ln_1p() / am1
    } else {
        let ln_a = (alpha / denom).ln();
        let ratio = am1 / alpha;
        (am1 * t + ln_a + (ratio * (-denom * t).exp()).ln_1p()) / am1
    };
    value.max(0.0)
}

/// Worst-case l1 change of one diffusion step between edge-adjacent
/// graphs: `max(4 gamma1_max, 2 gamma_max) eta`.
pub fn rho_diff(schedule: &DiffusionSchedule, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("threshold eta must be positive, got {eta}")));
    }
    Ok(rho_factor(schedule) * eta)
}

/// `rho_diff / eta`.
pub fn rho_factor(schedule: &DiffusionSchedule) -> f64 {
    (4.0 * schedule.gamma1_max()).max(2.0 * schedule.gamma_max())
}

/// `w_tau = rho (1 - gamma^tau) / (1 - gamma)`; satisfies
/// `w_{tau+1} = gamma w_tau + rho`.
pub fn wasserstein_tau(rho: f64, gamma_max: f64, tau: usize) -> f64 {
    rho * geometric_fraction(gamma_max, tau)
}

/// `(1 - gamma^tau) / (1 - gamma)`.
fn geometric_fraction(gamma: f64, tau: usize) -> f64 {
    if tau == 0 {
        return 0.0;
    }
    if gamma == 0.0 {
        return 1.0;
    }
    -(tau as f64 * gamma.ln()).exp_m1() / (1.0 - gamma)
}

/// Smallest value over `tau_min..steps`; ties go to the larger `tau`.
fn scan_min(tau_min: usize, steps: usize, mut value: impl FnMut(usize) -> f64) -> RdpBound {
    let mut best = RdpBound { epsilon: f64::INFINITY, tau: Some(tau_min) };
    for tau in tau_min..steps {
        let v = value(tau);
        if v <= best.epsilon {
            best = RdpBound { epsilon: v, tau: Some(tau) };
        }
    }
    best
}

fn tracked_scan(alpha: f64, t: f64, steps: usize, gamma: f64, tau_min: usize) -> RdpBound {
    let per_step = laplace_rdp(alpha, t);
    scan_min(tau_min, steps, |tau| {
        let remaining = (steps - tau) as f64;
        let shift = t * geometric_fraction(gamma, tau) * gamma.powf(remaining);
        remaining * per_step + laplace_rdp(alpha, shift)
    })
}

fn personalized(alpha: f64, t: f64, steps: usize, gamma: f64) -> RdpBound {
    if steps == 1 {
        RdpBound { epsilon: 0.0, tau: Some(0) }
    } else {
        tracked_scan(alpha, t, steps, gamma, 1)
    }
}

/// `d_ratio` is the diameter divided by `sigma`.
fn diameter_scan(alpha: f64, t: f64, d_ratio: f64, steps: usize, gamma: f64) -> RdpBound {
    let per_step = laplace_rdp(alpha, t);
    scan_min(0, steps, |tau| {
        let remaining = (steps - tau) as f64;
        remaining * per_step + laplace_rdp(alpha, d_ratio * gamma.powf(remaining))
    })
}

fn gaussian_scan(alpha: f64, t: f64, steps: usize, gamma: f64) -> RdpBound {
    scan_min(0, steps, |tau| {
        let remaining = (steps - tau) as f64;
        let shift = t * geometric_fraction(gamma, tau) * gamma.powf(remaining);
        alpha / 2.0 * (remaining * t * t + shift * shift)
    })
}

fn asymptotic(t: f64, rho: f64, steps: usize, gamma: f64) -> RdpBound {
    if rho == 0.0 {
        return RdpBound { epsilon: 0.0, tau: Some(0) };
    }
    let log_inv_gamma = -gamma.ln();
    let inner = ((1.0 / rho + 1.0 / (1.0 - gamma)) * log_inv_gamma).ln();
    let epsilon = t / log_inv_gamma * (inner + 1.0);
    let tau = (steps as f64 - inner / log_inv_gamma).ceil();
    let tau = tau.clamp(0.0, (steps - 1) as f64) as usize;
    RdpBound { epsilon, tau: Some(tau) }
}

fn require(q: &AccountantQuery, mode: PrivacyMode, wasserstein: bool) -> Result<()> {
    q.validate()?;
    if q.mode != mode {
        return Err(invalid(format!("this bound needs mode {mode:?}, got {:?}", q.mode)));
    }
    if wasserstein && q.tracking != Tracking::Wasserstein {
        return Err(invalid("this bound needs Wasserstein tracking"));
    }
    Ok(())
}

/// Wasserstein-tracked bound for edge-level RDP, minimised exactly over
/// every split `tau in 0..K`.
pub fn rdp_bound_standard(q: &AccountantQuery) -> Result<RdpBound> {
    require(q, PrivacyMode::Standard, true)?;
    BoundKind::Standard.evaluate_unchecked(q.alpha, q.ratio(), q)
}

/// Personalized edge-level RDP: zero for a single step, otherwise the
/// standard scan restricted to `tau >= 1`.
pub fn rdp_bound_personalized(q: &AccountantQuery) -> Result<RdpBound> {
    require(q, PrivacyMode::Personalized, true)?;
    BoundKind::Personalized.evaluate_unchecked(q.alpha, q.ratio(), q)
}

/// Closed-form envelope of the standard bound and the split step it
/// suggests (clamped into `0..K`).
pub fn rdp_bound_asymptotic(q: &AccountantQuery) -> Result<RdpBound> {
    require(q, PrivacyMode::Standard, false)?;
    BoundKind::Asymptotic.evaluate_unchecked(q.alpha, q.ratio(), q)
}

/// `K g_alpha(sigma, rho_diff)`: one Laplace release per step, composed.
pub fn rdp_bound_composition(q: &AccountantQuery) -> Result<f64> {
    q.validate()?;
    Ok(BoundKind::Composition.evaluate_unchecked(q.alpha, q.ratio(), q)?.epsilon)
}

/// The standard scan with `w_tau` replaced by the diameter in
/// `q.tracking`.
pub fn rdp_bound_diameter(q: &AccountantQuery) -> Result<RdpBound> {
    q.validate()?;
    BoundKind::Diameter.evaluate_unchecked(q.alpha, q.ratio(), q)
}

/// Gaussian-noise analogue, reading `sigma` as a standard deviation and
/// using `rho_diff` as an l2 distortion bound.
pub fn rdp_bound_gaussian(q: &AccountantQuery) -> Result<RdpBound> {
    q.validate()?;
    BoundKind::Gaussian.evaluate_unchecked(q.alpha, q.ratio(), q)
}

/// Diameter of the unit l1 ball as used by the projection-based bound.
pub fn diameter_unit_l1() -> f64 {
    1.0
}

/// Diameter induced by degree thresholding: `eta * sum_i d_i`.
pub fn diameter_degree_threshold(eta: f64, degree_sum: u64) -> f64 {
    eta * degree_sum as f64
}

/// Diameter induced by uniform thresholding: `eta * n`.
pub fn diameter_uniform_threshold(eta: f64, node_count: usize) -> f64 {
    eta * node_count as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpBudget {
    pub eps_dp: f64,
    pub delta: f64,
}

impl DpBudget {
    pub fn new(eps_dp: f64, delta: f64) -> Result<Self> {
        let b = Self { eps_dp, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_dp > 0.0) || self.eps_dp.is_nan() {
            return Err(invalid(format!("DP epsilon must be positive, got {}", self.eps_dp)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// `eps_dp - ln(1/delta) / (alpha - 1)`: the RDP budget left at `alpha`.
    pub fn residual(&self, alpha: f64) -> f64 {
        self.eps_dp - (1.0 / self.delta).ln() / (alpha - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConversion {
    pub epsilon_dp: f64,
    pub alpha: f64,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("alpha grid is empty"));
    }
    if let Some(a) = grid.iter().find(|a| !(**a > 1.0) || !a.is_finite()) {
        return Err(invalid(format!("alpha grid entries must be finite and > 1, got {a}")));
    }
    Ok(())
}

/// `min_alpha eps_rdp(alpha) + ln(1/delta) / (alpha - 1)` over `grid`.
pub fn rdp_to_dp(curve: impl Fn(f64) -> f64, delta: f64, grid: &[f64]) -> Result<DpConversion> {
    check_grid(grid)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let log_inv_delta = (1.0 / delta).ln();
    let mut best = DpConversion { epsilon_dp: f64::INFINITY, alpha: grid[0] };
    for &alpha in grid {
        let rdp = curve(alpha);
        if rdp.is_nan() {
            continue;
        }
        let eps = rdp + log_inv_delta / (alpha - 1.0);
        if eps < best.epsilon_dp {
            best = DpConversion { epsilon_dp: eps, alpha };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationTarget {
    Dp(DpBudget),
    /// RDP budget at one fixed order.
    Rdp { epsilon: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub alpha_grid: Vec<f64>,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Returned when any positive noise scale meets the target.
    pub sigma_min: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { alpha_grid: DEFAULT_ALPHA_GRID.to_vec(), rel_tol: 1e-6, max_iter: 200, sigma_min: 1e-300 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCalibration {
    pub sigma: f64,
    /// DP epsilon for DP targets, RDP epsilon for RDP targets.
    pub achieved_epsilon: f64,
    pub alpha_star: f64,
    pub tau_star: Option<usize>,
}

/// Largest ratio `t` (up to `rel_tol`) with `h(t) <= target`, for `h`
/// increasing. `None` means every ratio up to 1e300 fits.
fn search_ratio(h: impl Fn(f64) -> f64, target: f64, rel_tol: f64, max_iter: usize) -> Option<f64> {
    let mut lo;
    let mut hi;
    if h(1.0) <= target {
        lo = 1.0;
        hi = 2.0;
        while h(hi) <= target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return None;
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        while h(lo) > target {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Some(lo);
            }
        }
    }
    for _ in 0..max_iter {
        if hi / lo - 1.0 <= rel_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        if h(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Smallest noise scale (to relative tolerance) at which the chosen bound
/// meets `target`. `query.sigma` is ignored. For DP targets every grid
/// order with positive residual budget is tried and the smallest scale
/// kept.
pub fn calibrate_sigma(
    target: CalibrationTarget,
    query: &AccountantQuery,
    kind: BoundKind,
    settings: &CalibrationSettings,
) -> Result<SigmaCalibration> {
    let mut q = *query;
    q.sigma = 1.0;
    q.validate()?;
    if let (BoundKind::Diameter, Tracking::Wasserstein) = (kind, q.tracking) {
        return Err(invalid("the diameter bound needs tracking = diameter(D)"));
    }
    let rho = q.rho_diff;
    // The diameter enters as D / sigma, i.e. as (D / rho) * t.
    let bound = |alpha: f64, t: f64| -> RdpBound {
        if let (BoundKind::Diameter, Tracking::Diameter(d)) = (kind, q.tracking) {
            let d_ratio = if rho > 0.0 { d / rho * t } else { f64::INFINITY };
            return diameter_scan(alpha, t, d_ratio, q.steps, q.gamma_max);
        }
        kind.evaluate_unchecked(alpha, t, &q).expect("validated above")
    };
    let ratio_for = |alpha: f64, eps: f64| -> Option<f64> {
        search_ratio(|t| bound(alpha, t).epsilon, eps, settings.rel_tol, settings.max_iter)
    };
    let sigma_from = |t: Option<f64>| -> f64 {
        match t {
            Some(t) if rho > 0.0 => (rho / t).max(settings.sigma_min),
            _ => settings.sigma_min,
        }
    };

    match target {
        CalibrationTarget::Rdp { epsilon, alpha } => {
            if !(epsilon > 0.0) {
                return Err(invalid(format!("target epsilon must be positive, got {epsilon}")));
            }
            if !(alpha > 1.0) || !alpha.is_finite() {
                return Err(invalid(format!("Renyi order must be > 1, got {alpha}")));
            }
            let mut sigma = if rho > 0.0 { sigma_from(ratio_for(alpha, epsilon)) } else { settings.sigma_min };
            let mut b = bound(alpha, ratio_of(rho, sigma));
            while b.epsilon > epsilon {
                sigma *= 1.0 + 1e-12;
                b = bound(alpha, ratio_of(rho, sigma));
            }
            Ok(SigmaCalibration { sigma, achieved_epsilon: b.epsilon, alpha_star: alpha, tau_star: b.tau })
        }
        CalibrationTarget::Dp(budget) => {
            budget.validate()?;
            check_grid(&settings.alpha_grid)?;
            let feasible: Vec<(f64, f64)> = settings
                .alpha_grid
                .iter()
                .map(|&a| (a, budget.residual(a)))
                .filter(|&(_, r)| r > 0.0)
                .collect();
            if feasible.is_empty() {
                return Err(Error::Infeasible(format!(
                    "no order in the alpha grid leaves a positive RDP budget for eps = {}, delta = {}",
                    budget.eps_dp, budget.delta
                )));
            }
            let mut sigma = f64::INFINITY;
            for &(alpha, residual) in &feasible {
                let s = if rho > 0.0 { sigma_from(ratio_for(alpha, residual)) } else { settings.sigma_min };
                sigma = sigma.min(s);
            }
            let convert = |sigma: f64| {
                let t = ratio_of(rho, sigma);
                rdp_to_dp(|a| bound(a, t).epsilon, budget.delta, &settings.alpha_grid)
            };
            let mut conv = convert(sigma)?;
            while conv.epsilon_dp > budget.eps_dp {
                sigma *= 1.0 + 1e-12;
                conv = convert(sigma)?;
            }
            let tau_star = bound(conv.alpha, ratio_of(rho, sigma)).tau;
            Ok(SigmaCalibration {
                sigma,
                achieved_epsilon: conv.epsilon_dp,
                alpha_star: conv.alpha,
                tau_star,
            })
        }
    }
}

fn ratio_of(rho: f64, sigma: f64) -> f64 {
    if rho == 0.0 {
        0.0
    } else {
        rho / sigma
    }
}

/// RDP of randomized response on one adjacency bit, where with
/// probability `p` the bit is redrawn uniformly from {0, 1}.
pub fn rr_rdp(p: f64, alpha: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("flip probability must lie in (0, 1], got {p}")));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid(format!("Renyi order must be > 1, got {alpha}")));
    }
    Ok(rr_rdp_unchecked(p, alpha))
}

fn rr_rdp_unchecked(p: f64, alpha: f64) -> f64 {
    let ln_keep = (-p / 2.0).ln_1p();
    let ln_flip = (p / 2.0).ln();
    let x = alpha * ln_keep + (1.0 - alpha) * ln_flip;
    let y = alpha * ln_flip + (1.0 - alpha) * ln_keep;
    let m = x.max(y);
    let lse = m + ((x - m).exp() + (y - m).exp()).ln();
    (lse / (alpha - 1.0)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipCalibration {
    pub p: f64,
    pub achieved_epsilon: f64,
    pub alpha_star: f64,
}

/// DP epsilon of randomized response at flip probability `p`.
pub fn rr_dp(p: f64, delta: f64, grid: &[f64]) -> Result<DpConversion> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("flip probability must lie in (0, 1], got {p}")));
    }
    rdp_to_dp(|a| rr_rdp_unchecked(p, a), delta, grid)
}

/// Smallest flip probability (to relative tolerance) meeting `target`.
pub fn calibrate_flip_prob(target: DpBudget, settings: &CalibrationSettings) -> Result<FlipCalibration> {
    target.validate()?;
    check_grid(&settings.alpha_grid)?;
    let eps = |p: f64| rr_dp(p, target.delta, &settings.alpha_grid).map(|c| c.epsilon_dp);
    if eps(1.0)? > target.eps_dp {
        return Err(Error::Infeasible(format!(
            "even p = 1 exceeds eps = {} at delta = {} on this alpha grid",
            target.eps_dp, target.delta
        )));
    }
    // Search in log p over [1e-300, 1]; the DP epsilon decreases in p.
    let (mut lo, mut hi) = (1e-300f64.ln(), 0.0f64);
    for _ in 0..settings.max_iter {
        if hi.exp() / lo.exp() - 1.0 <= settings.rel_tol && lo.exp() > 0.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eps(mid.exp())? <= target.eps_dp {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = hi.exp().min(1.0);
    let conv = rr_dp(p, target.delta, &settings.alpha_grid)?;
    Ok(FlipCalibration { p, achieved_epsilon: conv.epsilon_dp, alpha_star: conv.alpha })
}
