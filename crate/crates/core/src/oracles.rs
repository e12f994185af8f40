//! Brute-force references for the engine and the accountant.
//!
//! These are deliberately naive (dense matrices, direct sums, quadrature)
//! and guarded by size limits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::{self, g_alpha, rho_diff, rr_rdp, wasserstein_tau};
use crate::diffusion::{
    apply_threshold, diffusion_step, indicator, ppr_schedule, run_exact_diffusion, DiffusionSchedule, StepCoefficients,
    ThresholdMode, ThresholdPolicy,
};
use crate::error::{check_len, invalid, Error, Result};
use crate::graph::{EdgeOp, EdgePerturbation, SparseGraph};
use crate::noise::RngStream;
use crate::synthetic::{double_star, random_connected};

pub const DENSE_NODE_LIMIT: usize = 2000;
pub const DISTORTION_NODE_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|engine - oracle| <= tolerance`.
    Within,
    /// `engine <= oracle + tolerance`.
    AtMost,
    /// `engine >= oracle - tolerance`.
    AtLeast,
}

/// One oracle check, serialisable as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub engine: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, oracle: f64, engine: f64, comparison: Comparison, tolerance: f64) -> Self {
        let abs_error = (engine - oracle).abs();
        let rel_error = if oracle != 0.0 { abs_error / oracle.abs() } else { abs_error };
        let pass = match comparison {
            Comparison::Within => abs_error <= tolerance,
            Comparison::AtMost => engine <= oracle + tolerance,
            Comparison::AtLeast => engine >= oracle - tolerance,
        };
        Self { quantity: quantity.into(), oracle, engine, abs_error, rel_error, comparison, tolerance, pass }
    }
}

fn dense_adjacency(g: &SparseGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut a = vec![0.0; n * n];
    for (u, v) in g.edges() {
        a[u * n + v] = 1.0;
        a[v * n + u] = 1.0;
    }
    a
}

/// `(1 - beta) sum_k beta^k W^k e_seed` with `W = (P + I) / 2`, summed
/// with dense matrices until the remaining mass `beta^{k+1}` drops below
/// `tol`.
pub fn dense_ppr(g: &SparseGraph, beta: f64, seed: usize, tol: f64) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n > DENSE_NODE_LIMIT {
        return Err(Error::SizeLimit { n, limit: DENSE_NODE_LIMIT });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let a = dense_adjacency(g);
    let deg: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[i * n + j]).sum()).collect();
    let mut term = indicator(n, seed)?;
    let mut acc = vec![0.0; n];
    let mut weight = 1.0 - beta;
    let mut tail = beta;
    loop {
        for i in 0..n {
            acc[i] += weight * term[i];
        }
        if tail < tol {
            break;
        }
        let next: Vec<f64> = (0..n)
            .map(|i| 0.5 * term[i] + 0.5 * (0..n).map(|j| a[i * n + j] * term[j] / deg[j]).sum::<f64>())
            .collect();
        term = next;
        weight *= beta;
        tail *= beta;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSampler {
    /// A few random coordinates, biased towards the perturbed endpoints.
    Sparse,
    /// Every coordinate within twice its clip.
    Dense,
    /// Coordinates on the clip boundaries of either graph.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub max_observed: f64,
    pub rho_diff: f64,
    pub trials: usize,
    pub worst_sampler: InputSampler,
}

fn sample_input(
    sampler: InputSampler,
    caps: &[f64],
    caps_alt: &[f64],
    nonneg: bool,
    ends: (usize, usize),
    r: &mut impl Rng,
) -> Vec<f64> {
    let n = caps.len();
    let mut x = vec![0.0; n];
    let sign = |r: &mut dyn rand::RngCore| if nonneg || r.gen_bool(0.5) { 1.0 } else { -1.0 };
    match sampler {
        InputSampler::Sparse => {
            for _ in 0..r.gen_range(1..=4) {
                let i = match r.gen_range(0..4) {
                    0 => ends.0,
                    1 => ends.1,
                    _ => r.gen_range(0..n),
                };
                x[i] = r.gen_range(-2.0..=2.0) * caps[i];
            }
        }
        InputSampler::Dense => {
            for i in 0..n {
                x[i] = r.gen_range(-2.0..=2.0) * caps[i];
            }
        }
        InputSampler::Boundary => {
            for i in 0..n {
                let on = i == ends.0 || i == ends.1 || r.gen_bool(0.5);
                if on {
                    let cap = if r.gen_bool(0.5) { caps[i] } else { caps_alt[i] };
                    x[i] = sign(r) * cap;
                }
            }
        }
    }
    x
}

/// Largest observed `|| phi_k(f_g(x)) - phi_k(f_g'(x)) ||_1` over `trials`
/// random inputs, where `g'` is `g` with `perturbation` applied and `k` is
/// drawn uniformly from the schedule's steps.
pub fn measure_distortion(
    g: &SparseGraph,
    perturbation: EdgePerturbation,
    schedule: &DiffusionSchedule,
    policy: &ThresholdPolicy,
    trials: usize,
    rng: &RngStream,
) -> Result<DistortionReport> {
    let n = g.node_count();
    if n > DISTORTION_NODE_LIMIT {
        return Err(Error::SizeLimit { n, limit: DISTORTION_NODE_LIMIT });
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if let Some(s) = policy.personalized_seed {
        if s == perturbation.u || s == perturbation.v {
            return Err(invalid("the perturbed edge must not touch the personalized seed"));
        }
    }
    let g_alt = g.perturb_edge(perturbation)?;
    let caps: Vec<f64> = (0..n).map(|i| policy.cap(g, i)).collect();
    let caps_alt: Vec<f64> = (0..n).map(|i| policy.cap(&g_alt, i)).collect();
    let zero = vec![0.0; n];
    let samplers = [InputSampler::Sparse, InputSampler::Dense, InputSampler::Boundary];
    let mut report = DistortionReport {
        max_observed: 0.0,
        rho_diff: rho_diff(schedule, policy.eta)?,
        trials,
        worst_sampler: InputSampler::Sparse,
    };
    for t in 0..trials {
        let mut r = rng.derive(t as u64).rng();
        let sampler = samplers[t % 3];
        let k = r.gen_range(1..=schedule.steps());
        let x = sample_input(sampler, &caps, &caps_alt, policy.is_nonnegative(), (perturbation.u, perturbation.v), &mut r);
        let a = diffusion_step(g, schedule, k, &apply_threshold(policy, g, &x)?, &zero)?;
        let b = diffusion_step(&g_alt, schedule, k, &apply_threshold(policy, &g_alt, &x)?, &zero)?;
        let d: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum();
        if d > report.max_observed {
            report.max_observed = d;
            report.worst_sampler = sampler;
        }
    }
    Ok(report)
}

/// A random single-edge change of `g` that leaves no node isolated:
/// removal of an edge whose endpoints both have degree >= 2, or addition
/// of a non-edge. `None` if neither exists.
pub fn random_perturbation(g: &SparseGraph, avoid: Option<usize>, rng: &RngStream) -> Option<EdgePerturbation> {
    let n = g.node_count();
    let mut r = rng.rng();
    let ok = |u: usize, v: usize| Some(u) != avoid && Some(v) != avoid;
    let removable: Vec<(usize, usize)> =
        g.edges().filter(|&(u, v)| g.degree(u) >= 2 && g.degree(v) >= 2 && ok(u, v)).collect();
    let want_remove = r.gen_bool(0.5);
    if want_remove && !removable.is_empty() {
        let (u, v) = removable[r.gen_range(0..removable.len())];
        return Some(EdgePerturbation { u, v, op: EdgeOp::Remove });
    }
    for _ in 0..(4 * n * n) {
        let (u, v) = (r.gen_range(0..n), r.gen_range(0..n));
        if u != v && !g.has_edge(u, v) && ok(u, v) {
            return Some(EdgePerturbation { u: u.min(v), v: u.max(v), op: EdgeOp::Add });
        }
    }
    removable.first().map(|&(u, v)| EdgePerturbation { u, v, op: EdgeOp::Remove })
}

/// Renyi divergence of order `alpha` between unit-scale Laplace densities
/// `shift` apart, by composite Simpson quadrature on `[-60, 60 + shift]`.
pub fn renyi_laplace_quadrature(alpha: f64, shift: f64) -> f64 {
    let p = |x: f64| 0.5 * (-(x - shift).abs()).exp();
    let q = |x: f64| 0.5 * (-x.abs()).exp();
    let f = |x: f64| p(x).powf(alpha) * q(x).powf(1.0 - alpha);
    // Split at the kinks 0 and shift so each panel is smooth.
    let simpson = |a: f64, b: f64, m: usize| {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let total = simpson(-60.0, 0.0, 200_000) + simpson(0.0, shift, 2_000) + simpson(shift, 60.0 + shift, 200_000);
    total.ln() / (alpha - 1.0)
}

/// `ln sum_b P(b)^alpha Q(b)^{1 - alpha}` over the two-point laws of
/// randomized response, evaluated directly.
pub fn renyi_bernoulli(p: f64, alpha: f64) -> f64 {
    let keep = 1.0 - p / 2.0;
    let flip = p / 2.0;
    let s = keep.powf(alpha) * flip.powf(1.0 - alpha) + flip.powf(alpha) * keep.powf(1.0 - alpha);
    s.ln() / (alpha - 1.0)
}

fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Runs every oracle comparison once.
pub fn run_verify_suite(rng: &RngStream) -> Result<Vec<OracleReport>> {
    let mut reports = Vec::new();

    let path = SparseGraph::from_edges(2, [(0, 1)])?;
    let pi = dense_ppr(&path, 0.5, 0, 1e-14)?;
    reports.push(OracleReport::new("dense_ppr_two_node_path[0]", 0.75, pi[0], Comparison::Within, 1e-12));

    let beta: f64 = 0.8;
    let tol: f64 = 1e-10;
    let steps = (tol.ln() / beta.ln()).ceil() as usize;
    let sched = ppr_schedule(beta, steps)?;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let g = random_connected(20 + 18 * i, 30 + 20 * i, &rng.derive(100 + i as u64))?;
        let seed = i % g.node_count();
        let s = indicator(g.node_count(), seed)?;
        let engine = run_exact_diffusion(&g, &sched, &s, steps)?;
        let oracle = dense_ppr(&g, beta, seed, tol * 1e-3)?;
        worst = worst.max(l1_distance(&engine, &oracle)?);
    }
    reports.push(OracleReport::new("exact_diffusion_vs_dense_ppr_l1", 0.0, worst, Comparison::Within, 2.0 * tol));

    let quad = renyi_laplace_quadrature(2.0, 1.0);
    reports.push(OracleReport::new("g_alpha(2,1,1)", quad, g_alpha(2.0, 1.0, 1.0)?, Comparison::Within, 1e-8));
    let quad = renyi_laplace_quadrature(8.0, 0.25);
    reports.push(OracleReport::new("g_alpha(8,1,0.25)", quad, g_alpha(8.0, 1.0, 0.25)?, Comparison::Within, 1e-8));

    for (p, alpha) in [(0.5, 2.0), (0.1, 16.0)] {
        reports.push(OracleReport::new(
            format!("rr_rdp(p={p},alpha={alpha})"),
            renyi_bernoulli(p, alpha),
            rr_rdp(p, alpha)?,
            Comparison::Within,
            1e-10,
        ));
    }

    let mut w = 0.0;
    let mut worst_w = 0.0f64;
    for tau in 0..200 {
        worst_w = worst_w.max((wasserstein_tau(1.6e-5, 0.8, tau) - w).abs());
        w = 0.8 * w + 1.6e-5;
    }
    reports.push(OracleReport::new("w_tau_recursion_max_error", 0.0, worst_w, Comparison::Within, 1e-18));

    let families = [
        ("ppr", StepCoefficients::new(0.4, 0.4, 0.2), ThresholdMode::NonnegativeDegree),
        ("fast", StepCoefficients::new(0.6, 0.2, 0.2), ThresholdMode::SymmetricDegree),
        ("slow", StepCoefficients::new(0.1, 0.7, 0.2), ThresholdMode::SymmetricDegree),
    ];
    for (name, step, mode) in families {
        let sched = DiffusionSchedule::constant(step, 1)?;
        let policy = ThresholdPolicy::new(1e-3, mode)?;
        let mut worst = 0.0f64;
        let mut rho = 0.0;
        for i in 0..20u64 {
            let g = random_connected(30, 40, &rng.derive(200 + i))?;
            let Some(pert) = random_perturbation(&g, None, &rng.derive(300 + i)) else { continue };
            let rep = measure_distortion(&g, pert, &sched, &policy, 150, &rng.derive(400 + i))?;
            worst = worst.max(rep.max_observed);
            rho = rep.rho_diff;
        }
        reports.push(OracleReport::new(format!("distortion_{name}_random_graphs"), rho, worst, Comparison::AtMost, 1e-12));

        if step.walk >= step.stay {
            let g = double_star(100)?;
            let rep = measure_distortion(&g, EdgePerturbation::remove(0, 1), &sched, &policy, 900, &rng.derive(500))?;
            reports.push(OracleReport::new(
                format!("distortion_{name}_double_star"),
                0.8 * rep.rho_diff,
                rep.max_observed,
                Comparison::AtLeast,
                0.0,
            ));
        }
    }

    let q = accountant::AccountantQuery {
        alpha: 2.0,
        sigma: 0.01,
        steps: 100,
        rho_diff: 1.6e-5,
        gamma_max: 0.8,
        mode: accountant::PrivacyMode::Standard,
        tracking: accountant::Tracking::Wasserstein,
    };
    let brute = (0..100)
        .map(|tau| {
            let shift = wasserstein_tau(q.rho_diff, q.gamma_max, tau) * q.gamma_max.powi(100 - tau as i32);
            (100 - tau) as f64 * renyi_closed_form(2.0, q.rho_diff / q.sigma) + renyi_closed_form(2.0, shift / q.sigma)
        })
        .fold(f64::INFINITY, f64::min);
    let engine = accountant::rdp_bound_standard(&q)?.epsilon;
    reports.push(OracleReport::new("standard_bound_brute_force_scan", brute, engine, Comparison::Within, 1e-9 * brute));

    Ok(reports)
}

/// The closed form of `g_alpha` with unit scale, without any
/// stabilisation.
fn renyi_closed_form(alpha: f64, t: f64) -> f64 {
    let a = alpha / (2.0 * alpha - 1.0);
    let b = (alpha - 1.0) / (2.0 * alpha - 1.0);
    (a * ((alpha - 1.0) * t).exp() + b * (-alpha * t).exp()).ln() / (alpha - 1.0)
}
