// Parse an edge list, keep the largest component and inspect the result.

use std::io::Cursor;

use privdiff::graph::{load_edge_list, EdgePerturbation, LoadOptions};

const EDGES: &str = "\
# 1-indexed ids, comma or whitespace separated
1,2
2 3
3 1
3 4
4 4
5 6
";

pub fn run_example() -> privdiff::Result<()> {
    let loaded = load_edge_list(Cursor::new(EDGES), LoadOptions { one_indexed: true, extract_lcc: true })?;
    let g = &loaded.graph;
    println!(
        "kept {} nodes and {} edges; dropped {} nodes, {} self-loops",
        g.node_count(),
        g.edge_count(),
        loaded.dropped_nodes,
        loaded.self_loops
    );
    println!("internal -> original ids: {:?}", loaded.id_map);
    for i in 0..g.node_count() {
        println!("node {i}: degree {}, neighbours {:?}", g.degree(i), g.neighbors(i));
    }

    let mut canonical = Vec::new();
    g.write_edge_list(&mut canonical)?;
    print!("canonical edge list:\n{}", String::from_utf8_lossy(&canonical));

    let added = g.perturb_edge(EdgePerturbation::add(0, 3))?;
    println!("after adding (0, 3): {} edges, degree of 3 is {}", added.edge_count(), added.degree(3));

    let walked = g.random_walk_matvec(&[1.0, 0.0, 0.0, 0.0])?;
    println!("one random-walk step from node 0: {walked:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
