// Randomized-response graph release and PPR on the released graph.

use privdiff::accountant::{calibrate_flip_prob, CalibrationSettings, DpBudget};
use privdiff::baseline::{diffusion_on_flipped, edge_flipping, FlipConfig};
use privdiff::diffusion::{indicator, ppr_schedule, run_exact_diffusion};
use privdiff::metrics::ndcg_at_r;
use privdiff::noise::RngStream;
use privdiff::synthetic::barabasi_albert;

pub fn run_example() -> privdiff::Result<()> {
    let g = barabasi_albert(1000, 6, &RngStream::new(3, 0))?;
    let seed_node = 4;
    let schedule = ppr_schedule(0.8, 100)?;
    let exact = run_exact_diffusion(&g, &schedule, &indicator(g.node_count(), seed_node)?, 100)?;
    let delta = 1.0 / g.edge_count() as f64;
    for eps in [1.0, 4.0, 10.0] {
        let cal = calibrate_flip_prob(DpBudget::new(eps, delta)?, &CalibrationSettings::default())?;
        let flipped = edge_flipping(&g, &FlipConfig::new(cal.p).with_seed(seed_node), &RngStream::new(8, 0))?;
        let (scores, comp) = diffusion_on_flipped(&flipped, &schedule, seed_node, 100)?;
        println!(
            "eps {eps}: p = {:.4}, {} -> {} edges, component of {} nodes, NDCG@100 = {:.4}",
            cal.p,
            g.edge_count(),
            flipped.edge_count(),
            comp.node_ids.len(),
            ndcg_at_r(&scores, &exact, 100, &[seed_node as u32])?
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
