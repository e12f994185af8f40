// How the contraction-aware bound saturates while composition grows
// linearly with the number of steps.

use privdiff::accountant::{
    diameter_degree_threshold, rho_diff, wasserstein_tau, AccountantQuery, BoundKind, PrivacyMode, Tracking,
};
use privdiff::diffusion::{DiffusionSchedule, StepCoefficients};

pub fn run_example() -> privdiff::Result<()> {
    let eta = 1e-5;
    let schedule = DiffusionSchedule::constant(StepCoefficients::new(0.8, 0.0, 0.2), 500)?;
    let rho = rho_diff(&schedule, eta)?;
    let base = AccountantQuery {
        alpha: 2.0,
        sigma: 0.01,
        steps: 1,
        rho_diff: rho,
        gamma_max: schedule.gamma_max(),
        mode: PrivacyMode::Standard,
        tracking: Tracking::Wasserstein,
    };
    println!("rho_diff = {rho:e}, gamma_max = {}", schedule.gamma_max());
    println!("{:>5} {:>12} {:>12} {:>12} {:>6}", "K", "standard", "personal.", "composition", "tau*");
    for k in [1, 2, 5, 10, 50, 100, 200, 500] {
        let q = AccountantQuery { steps: k, ..base };
        let standard = BoundKind::Standard.evaluate(&q)?;
        println!(
            "{k:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>6?}",
            standard.epsilon,
            BoundKind::Personalized.evaluate(&q)?.epsilon,
            BoundKind::Composition.evaluate(&q)?.epsilon,
            standard.tau
        );
    }

    let asymptotic = BoundKind::Asymptotic.evaluate(&AccountantQuery { steps: 500, ..base })?;
    println!("closed-form envelope at K = 500: {:.4e} (tau {:?})", asymptotic.epsilon, asymptotic.tau);

    // Tracked distance versus the diameter implied by degree thresholding
    // on a graph with degree sum 667,966.
    let d = diameter_degree_threshold(eta, 667_966);
    let ppr = DiffusionSchedule::constant(StepCoefficients::new(0.4, 0.4, 0.2), 1)?;
    let rho_ppr = rho_diff(&ppr, eta)?;
    for tau in [1, 10, 100] {
        let w = wasserstein_tau(rho_ppr, ppr.gamma_max(), tau);
        println!("tau {tau:>3}: w = {w:.3e}, D = {d:.3e}, w / D = {:.3e}", w / d);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
