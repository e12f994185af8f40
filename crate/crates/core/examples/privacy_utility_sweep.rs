// A small privacy-utility sweep: noisy diffusion over an eta grid against
// the edge-flipping baseline, with paired seed nodes.

use privdiff::experiment::{run_privacy_utility_sweep, DatasetConfig, ExperimentConfig, SyntheticGraph};

pub fn run_example() -> privdiff::Result<()> {
    let cfg = ExperimentConfig {
        dataset: DatasetConfig {
            synthetic: Some(SyntheticGraph { nodes: 600, attach: 5, seed: 1 }),
            ..DatasetConfig::default()
        },
        eta_grid: vec![1e-6, 1e-4, 1e-2],
        epsilon_grid: vec![1.0, 4.0],
        trials: 5,
        cutoff: 50,
        ..ExperimentConfig::default()
    };
    let result = run_privacy_utility_sweep(&cfg)?;
    println!("{} nodes, {} edges, delta = {:.3e}", result.node_count, result.edge_count, result.delta);
    let mut csv = Vec::new();
    result.write_aggregate_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
