// Exact and private personalized PageRank from one seed node.

use privdiff::diffusion::{
    indicator, ppr_schedule, run_exact_diffusion, run_noisy_diffusion, NoisyDiffusion, ThresholdMode, ThresholdPolicy,
};
use privdiff::metrics::{ndcg_at_r, recall_at_r, top_r};
use privdiff::noise::{NoiseKind, RngStream};
use privdiff::synthetic::barabasi_albert;

pub fn run_example() -> privdiff::Result<()> {
    let g = barabasi_albert(2000, 8, &RngStream::new(11, 0))?;
    let seed_node = 17;
    let steps = 100;
    let schedule = ppr_schedule(0.8, steps)?;
    let s = indicator(g.node_count(), seed_node)?;

    let exact = run_exact_diffusion(&g, &schedule, &s, steps)?;
    let top = top_r(&exact, 5, &[seed_node as u32])?;
    println!("exact top 5: {:?}", top.ids);

    for sigma in [1e-6, 1e-4, 1e-3] {
        let params = NoisyDiffusion {
            schedule: schedule.clone(),
            policy: ThresholdPolicy::new(1e-3, ThresholdMode::NonnegativeDegree)?.with_seed(seed_node),
            sigma,
            noise: NoiseKind::Laplace,
            l1_radius: Some(1.0),
        };
        let run = run_noisy_diffusion(&g, &params, &s, steps, &RngStream::new(5, 0))?;
        let ex = [seed_node as u32];
        println!(
            "sigma {sigma:e}: NDCG@100 {:.4}, Recall@100 {:.4}",
            ndcg_at_r(&run.output, &exact, 100, &ex)?,
            recall_at_r(&run.output, &exact, 100, &ex)?
        );
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
