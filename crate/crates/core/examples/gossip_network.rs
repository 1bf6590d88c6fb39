//! Random matchings on a graph, their mean matrix, and how filter states
//! (particles) move through the network.

use gikf::network::{check_connectivity, default_matching_distribution, Graph, NetworkTrace};

fn main() -> gikf::Result<()> {
    let graph = Graph::cycle(5)?;
    let dist = default_matching_distribution(graph, 0.8)?;
    let abar = dist.mean_matrix();
    println!("mean matching matrix (Monte-Carlo estimate):\n{abar:.3}");
    let conn = check_connectivity(&abar);
    println!("irreducible {} aperiodic {}", conn.irreducible, conn.aperiodic);

    let trace = NetworkTrace::sample(&dist, 12, 42);
    for (t, (a, pi)) in trace.matchings.iter().zip(trace.permutations()).enumerate() {
        println!("t={t:>2} matching {:<12} particle positions {pi:?}", a.id());
    }
    Ok(())
}
