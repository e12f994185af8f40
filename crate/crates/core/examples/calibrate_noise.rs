// Calibrate the Laplace scale for a DP budget and check it by
// re-accounting.

use privdiff::accountant::{
    calibrate_sigma, rdp_to_dp, rho_diff, AccountantQuery, BoundKind, CalibrationSettings, CalibrationTarget, DpBudget,
    PrivacyMode, Tracking,
};
use privdiff::diffusion::ppr_schedule;

pub fn run_example() -> privdiff::Result<()> {
    let steps = 100;
    let schedule = ppr_schedule(0.8, steps)?;
    let settings = CalibrationSettings::default();
    let delta = 1.0 / 333_983.0;
    for eta in [1e-8, 1e-6] {
        let query = AccountantQuery {
            alpha: 2.0,
            sigma: 1.0,
            steps,
            rho_diff: rho_diff(&schedule, eta)?,
            gamma_max: schedule.gamma_max(),
            mode: PrivacyMode::Personalized,
            tracking: Tracking::Wasserstein,
        };
        for eps in [0.1, 0.5, 1.0] {
            let target = CalibrationTarget::Dp(DpBudget::new(eps, delta)?);
            let personal = calibrate_sigma(target, &query, BoundKind::Personalized, &settings)?;
            let composed = calibrate_sigma(target, &query, BoundKind::Composition, &settings)?;

            let at = AccountantQuery { sigma: personal.sigma, ..query };
            let check = rdp_to_dp(
                |alpha| BoundKind::Personalized.evaluate(&AccountantQuery { alpha, ..at }).unwrap().epsilon,
                delta,
                &settings.alpha_grid,
            )?;
            println!(
                "eta {eta:e}, eps {eps}: sigma {:.4e} (alpha* {}, tau* {:?}), re-accounted eps {:.6}; composition needs {:.1}x more noise",
                personal.sigma,
                personal.alpha_star,
                personal.tau_star,
                check.epsilon_dp,
                composed.sigma / personal.sigma
            );
        }
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
