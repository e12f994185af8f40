// Top-R rankings, NDCG and recall on a toy score vector.

use privdiff::metrics::{ndcg_at_r, ndcg_at_r_with, recall_at_r, top_r, Relevance};

pub fn run_example() -> privdiff::Result<()> {
    let truth = [0.5, 0.3, 0.2];
    let approx = [0.3, 0.5, 0.2];
    println!("true ranking {:?}, approximate ranking {:?}", top_r(&truth, 3, &[])?.ids, top_r(&approx, 3, &[])?.ids);
    println!("NDCG@3 (graded) = {:.5}", ndcg_at_r(&approx, &truth, 3, &[])?);
    println!("NDCG@3 (binary) = {:.5}", ndcg_at_r_with(&approx, &truth, 3, &[], Relevance::Binary)?);
    println!("Recall@2 = {}", recall_at_r(&approx, &truth, 2, &[])?);

    // Ties resolve to the smaller id; excluded ids never appear.
    let tied = [0.4, 0.9, 0.4, 0.1];
    println!("top 3 excluding node 1: {:?}", top_r(&tied, 3, &[1])?.ids);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
