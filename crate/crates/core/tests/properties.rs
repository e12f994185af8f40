//! Randomized invariants across the graph, noise, diffusion, accountant,
//! baseline, metric and experiment layers.

use std::io::Cursor;

use proptest::prelude::*;
use rand::Rng;

use privdiff::accountant::{
    g_alpha, rdp_bound_personalized, rdp_bound_standard, rdp_to_dp, rho_diff, rr_dp, wasserstein_tau,
    AccountantQuery, PrivacyMode, Tracking, DEFAULT_ALPHA_GRID,
};
use privdiff::baseline::{edge_flipping, FlipConfig};
use privdiff::diffusion::{
    apply_threshold, diffusion_step, indicator, ppr_schedule, project_l1_ball, run_exact_diffusion,
    DiffusionSchedule, StepCoefficients, ThresholdMode, ThresholdPolicy,
};
use privdiff::experiment::{mean_ci, run_sweep_on_graph, ExperimentConfig, Method, RowStatus};
use privdiff::graph::{load_edge_list, EdgeOp, EdgePerturbation, LoadOptions, SparseGraph};
use privdiff::metrics::{ndcg_at_r, recall_at_r};
use privdiff::noise::{sample_laplace_vec, RngStream};
use privdiff::oracles::random_perturbation;
use privdiff::synthetic::random_connected;

fn graph(seed: u64, n: usize, extra: usize) -> SparseGraph {
    random_connected(n, extra, &RngStream::new(seed, 0)).unwrap()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn step_strategy() -> impl Strategy<Value = StepCoefficients> {
    (0.0..0.9f64, 0.0..1.0f64).prop_map(|(lip, split)| {
        let walk = lip * split;
        StepCoefficients::new(walk, lip - walk, 1.0 - lip)
    })
}

fn mode_strategy() -> impl Strategy<Value = ThresholdMode> {
    prop_oneof![Just(ThresholdMode::SymmetricDegree), Just(ThresholdMode::NonnegativeDegree)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn walk_preserves_mass(seed in any::<u64>(), n in 2usize..80, extra in 0usize..120) {
        let g = graph(seed, n, extra);
        let mut r = RngStream::new(seed, 1).rng();
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let y = g.random_walk_matvec(&x).unwrap();
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!((y.iter().sum::<f64>() - x.iter().sum::<f64>()).abs() <= n as f64 * 1e-12 * max);
    }

    #[test]
    fn remove_then_add_restores_graph(seed in any::<u64>(), n in 3usize..60, extra in 0usize..100) {
        let g = graph(seed, n, extra);
        if let Some(p) = random_perturbation(&g, None, &RngStream::new(seed, 2)) {
            let inverse = match p.op {
                EdgeOp::Remove => EdgePerturbation::add(p.u, p.v),
                EdgeOp::Add => EdgePerturbation::remove(p.u, p.v),
            };
            prop_assert_eq!(g.perturb_edge(p).unwrap().perturb_edge(inverse).unwrap(), g);
        }
    }

    #[test]
    fn loading_own_output_is_idempotent(seed in any::<u64>(), n in 2usize..60, extra in 0usize..100) {
        let g = graph(seed, n, extra);
        let mut once = Vec::new();
        g.write_edge_list(&mut once).unwrap();
        let loaded = load_edge_list(Cursor::new(&once), LoadOptions::default()).unwrap().graph;
        let mut twice = Vec::new();
        loaded.write_edge_list(&mut twice).unwrap();
        prop_assert_eq!(&loaded, &g);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn step_contracts(seed in any::<u64>(), n in 2usize..60, step in step_strategy(), mode in mode_strategy(), eta in 1e-4..1.0f64) {
        let g = graph(seed, n, n);
        let sched = DiffusionSchedule::constant(step, 1).unwrap();
        let policy = ThresholdPolicy::new(eta, mode).unwrap();
        let mut r = RngStream::new(seed, 3).rng();
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let s = indicator(n, 0).unwrap();
        let fx = diffusion_step(&g, &sched, 1, &apply_threshold(&policy, &g, &x).unwrap(), &s).unwrap();
        let fy = diffusion_step(&g, &sched, 1, &apply_threshold(&policy, &g, &y).unwrap(), &s).unwrap();
        prop_assert!(l1(&fx, &fy) <= sched.gamma_max() * l1(&x, &y) + 1e-12);
    }

    #[test]
    fn distortion_bounded_with_projection(
        seed in any::<u64>(), n in 3usize..60, step in step_strategy(), mode in mode_strategy(), eta in 1e-4..0.5f64,
    ) {
        let g = graph(seed, n, n);
        let Some(p) = random_perturbation(&g, None, &RngStream::new(seed, 4)) else { return Ok(()) };
        let g2 = g.perturb_edge(p).unwrap();
        let sched = DiffusionSchedule::constant(step, 1).unwrap();
        let policy = ThresholdPolicy::new(eta, mode).unwrap();
        let mut r = RngStream::new(seed, 5).rng();
        let zero = vec![0.0; n];
        let bound = rho_diff(&sched, eta).unwrap() + 1e-12;
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0) * eta * g.degree(0) as f64).collect();
            for input in [x.clone(), project_l1_ball(&x, 1.0).unwrap()] {
                let a = diffusion_step(&g, &sched, 1, &apply_threshold(&policy, &g, &input).unwrap(), &zero).unwrap();
                let b = diffusion_step(&g2, &sched, 1, &apply_threshold(&policy, &g2, &input).unwrap(), &zero).unwrap();
                prop_assert!(l1(&a, &b) <= bound);
            }
        }
    }

    #[test]
    fn personalized_first_step_has_no_distortion(seed in any::<u64>(), n in 4usize..60, eta in 1e-4..0.5f64) {
        let g = graph(seed, n, n);
        let Some(p) = random_perturbation(&g, Some(0), &RngStream::new(seed, 6)) else { return Ok(()) };
        let g2 = g.perturb_edge(p).unwrap();
        let sched = ppr_schedule(0.8, 1).unwrap();
        let policy = ThresholdPolicy::new(eta, ThresholdMode::NonnegativeDegree).unwrap().with_seed(0);
        let s = indicator(n, 0).unwrap();
        let a = diffusion_step(&g, &sched, 1, &apply_threshold(&policy, &g, &s).unwrap(), &s).unwrap();
        let b = diffusion_step(&g2, &sched, 1, &apply_threshold(&policy, &g2, &s).unwrap(), &s).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn projection_is_nonexpansive(x in prop::collection::vec(-3.0..3.0f64, 1..50), shift in prop::collection::vec(-1.0..1.0f64, 50)) {
        let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let px = project_l1_ball(&x, 1.0).unwrap();
        let py = project_l1_ball(&y, 1.0).unwrap();
        prop_assert!(l1(&px, &py) <= l1(&x, &y) + 1e-12);
        prop_assert!(px.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn exact_ppr_is_a_distribution(seed in any::<u64>(), n in 2usize..100, beta in 0.1..0.99f64, steps in 1usize..200) {
        let g = graph(seed, n, n / 2);
        let out = run_exact_diffusion(&g, &ppr_schedule(beta, steps).unwrap(), &indicator(n, n / 2).unwrap(), steps).unwrap();
        prop_assert!(out.iter().all(|&v| v >= 0.0));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn g_alpha_is_monotone(alpha in 1.01..200.0f64, sigma in 1e-3..10.0f64, rho in 1e-3..10.0f64) {
        let g = g_alpha(alpha, sigma, rho).unwrap();
        prop_assert!(g_alpha(alpha, sigma, rho * 1.01).unwrap() > g);
        prop_assert!(g_alpha(alpha, sigma * 1.01, rho).unwrap() < g);
    }

    #[test]
    fn personalized_never_exceeds_standard(
        alpha in 1.01..64.0f64, sigma in 1e-6..1.0f64, eta in 1e-8..1e-2f64, beta in 0.3..0.95f64, steps in 1usize..300,
    ) {
        let sched = ppr_schedule(beta, steps).unwrap();
        let q = AccountantQuery {
            alpha, sigma, steps,
            rho_diff: rho_diff(&sched, eta).unwrap(),
            gamma_max: sched.gamma_max(),
            mode: PrivacyMode::Standard,
            tracking: Tracking::Wasserstein,
        };
        let standard = rdp_bound_standard(&q).unwrap().epsilon;
        let personal = rdp_bound_personalized(&AccountantQuery { mode: PrivacyMode::Personalized, ..q }).unwrap().epsilon;
        prop_assert!(personal <= standard);
    }

    #[test]
    fn w_tau_recursion_and_diameter(rho in 1e-9..1.0f64, gamma in 0.01..0.99f64, seed in any::<u64>(), n in 3usize..60) {
        for tau in 0..200 {
            let next = wasserstein_tau(rho, gamma, tau + 1);
            let rec = gamma * wasserstein_tau(rho, gamma, tau) + rho;
            prop_assert!((next - rec).abs() <= 1e-12 * rec.max(1e-300));
        }
        // With rho = 2 gamma eta the limit is 2 gamma eta / (1 - gamma), so the
        // tracked distance stays below eta * sum(d) exactly when the degree
        // sum reaches 2 gamma / (1 - gamma).
        let g = graph(seed, n, n);
        let eta = rho;
        let d = eta * g.degree_sum() as f64;
        let w_inf = 2.0 * gamma * eta / (1.0 - gamma);
        if g.degree_sum() as f64 >= 2.0 * gamma / (1.0 - gamma) {
            for tau in [1, 10, 100, 1000] {
                prop_assert!(wasserstein_tau(2.0 * gamma * eta, gamma, tau) < d);
            }
        } else {
            prop_assert!(w_inf > d);
        }
    }

    #[test]
    fn dp_conversion_is_grid_minimum(p in 0.01..1.0f64, delta in 1e-10..1e-2f64) {
        let conv = rr_dp(p, delta, &DEFAULT_ALPHA_GRID).unwrap();
        let curve = |a: f64| privdiff::accountant::rr_rdp(p, a).unwrap();
        let direct = rdp_to_dp(curve, delta, &DEFAULT_ALPHA_GRID).unwrap();
        prop_assert_eq!(conv.epsilon_dp, direct.epsilon_dp);
        for &a in &DEFAULT_ALPHA_GRID {
            let at = curve(a) + (1.0 / delta).ln() / (a - 1.0);
            prop_assert!(conv.epsilon_dp <= at);
        }
    }

    #[test]
    fn metrics_ignore_monotone_transforms(scores in prop::collection::vec(0.0..1.0f64, 5..60), truth_seed in any::<u64>(), r in 1usize..20) {
        let mut rng = RngStream::new(truth_seed, 0).rng();
        let truth: Vec<f64> = scores.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let warped: Vec<f64> = scores.iter().map(|&v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(ndcg_at_r(&scores, &truth, r, &[]).unwrap(), ndcg_at_r(&warped, &truth, r, &[]).unwrap());
        prop_assert_eq!(recall_at_r(&scores, &truth, r, &[]).unwrap(), recall_at_r(&warped, &truth, r, &[]).unwrap());
    }
}

#[test]
fn laplace_matches_its_cdf() {
    let mut x = sample_laplace_vec(100_000, 1.0, &RngStream::new(42, 0)).unwrap();
    x.sort_by(f64::total_cmp);
    let cdf = |v: f64| if v < 0.0 { 0.5 * v.exp() } else { 1.0 - 0.5 * (-v).exp() };
    let n = x.len() as f64;
    let ks = x
        .iter()
        .enumerate()
        .map(|(i, &v)| (cdf(v) - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf(v)).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS statistic {ks}");
}

#[test]
fn distinct_streams_are_uncorrelated() {
    let a = sample_laplace_vec(100_000, 1.0, &RngStream::new(42, 0)).unwrap();
    let b = sample_laplace_vec(100_000, 1.0, &RngStream::new(42, 1)).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let corr = cov / (va * vb).sqrt();
    assert!(corr.abs() < 0.02, "correlation {corr}");
}

#[test]
fn flipping_matches_expected_density() {
    let g = graph(9, 200, 300);
    let p = 0.1;
    let pairs = 200.0 * 199.0 / 2.0;
    let expected = (1.0 - p) * g.edge_count() as f64 + p / 2.0 * pairs;
    // Each pair is an independent Bernoulli, so the count's variance is
    // the sum over pairs.
    let on_edge = 1.0 - p / 2.0;
    let off_edge = p / 2.0;
    let e = g.edge_count() as f64;
    let var = e * on_edge * (1.0 - on_edge) + (pairs - e) * off_edge * (1.0 - off_edge);
    let reps = 50;
    let mean = (0..reps)
        .map(|i| edge_flipping(&g, &FlipConfig::new(p), &RngStream::new(77, i)).unwrap().edge_count() as f64)
        .sum::<f64>()
        / reps as f64;
    let sd = (var / reps as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * sd, "mean {mean}, expected {expected} +- {}", 3.0 * sd);

    let a = edge_flipping(&g, &FlipConfig::new(p), &RngStream::new(5, 5)).unwrap();
    let b = edge_flipping(&g, &FlipConfig::new(p), &RngStream::new(5, 5)).unwrap();
    assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
}

#[test]
fn sweep_rows_are_honest_and_recomputable() {
    let g = graph(3, 150, 400);
    let cfg = ExperimentConfig {
        eta_grid: vec![1e-6, 1e-3],
        epsilon_grid: vec![0.5, 2.0],
        trials: 6,
        cutoff: 20,
        ..ExperimentConfig::default()
    };
    let res = run_sweep_on_graph(&cfg, &g).unwrap();
    let sched = ppr_schedule(cfg.beta, cfg.steps).unwrap();
    for row in res.rows.iter().filter(|r| r.status == RowStatus::Ok) {
        let reaccounted = match row.method {
            Method::NoisyDiffusion => {
                let q = AccountantQuery {
                    alpha: 2.0,
                    sigma: row.sigma.unwrap(),
                    steps: cfg.steps,
                    rho_diff: rho_diff(&sched, row.eta.unwrap()).unwrap(),
                    gamma_max: sched.gamma_max(),
                    mode: PrivacyMode::Personalized,
                    tracking: Tracking::Wasserstein,
                };
                rdp_to_dp(
                    |alpha| rdp_bound_personalized(&AccountantQuery { alpha, ..q }).unwrap().epsilon,
                    res.delta,
                    &cfg.alpha_grid,
                )
                .unwrap()
                .epsilon_dp
            }
            Method::EdgeFlipping => rr_dp(row.flip_p.unwrap(), res.delta, &cfg.alpha_grid).unwrap().epsilon_dp,
        };
        let reported = row.achieved_epsilon.unwrap();
        assert!(reported >= reaccounted * (1.0 - 1e-12), "{reported} < {reaccounted}");
        assert!(reported <= row.epsilon);

        let ndcgs: Vec<f64> = res
            .trials
            .iter()
            .filter(|t| t.method == row.method && t.epsilon == row.epsilon && t.eta == row.eta)
            .map(|t| t.ndcg)
            .collect();
        assert_eq!(ndcgs.len(), cfg.trials);
        let n = ndcgs.len() as f64;
        let mean = ndcgs.iter().sum::<f64>() / n;
        let sd = (ndcgs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((row.ndcg_mean.unwrap() - mean).abs() <= 1e-12);
        assert!((row.ndcg_ci.unwrap() - 1.96 * sd / n.sqrt()).abs() <= 1e-12);
        assert_eq!(mean_ci(&ndcgs), (row.ndcg_mean.unwrap(), row.ndcg_ci.unwrap()));
    }
}
