use gikf::harness::verify::particle_statistics;
use gikf::network::{default_matching_distribution, estimate_mean_matrix, Graph, NetworkTrace};
use gikf::harness::reference;
use gikf::seed::stream_rng;

#[test]
fn explicit_mean_matches_sampled_frequencies() {
    let exp = reference::path3_unstable();
    let abar = exp.dist.mean_matrix();
    let est = estimate_mean_matrix(&exp.dist, 40_000, &mut stream_rng(1, 0));
    // Each entry is a mean of 0/1 variables; 4σ at p = 1/2 is 0.01.
    assert!((&abar - est).abs().max() < 0.01);
    let expect = nalgebra::DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5]);
    assert_eq!(abar, expect);
}

#[test]
fn particle_transitions_follow_mean_matrix() {
    let (ok, detail) = particle_statistics(&reference::path3_unstable().dist, 100_000, 5).unwrap();
    assert!(ok, "{detail}");
    let dist = default_matching_distribution(Graph::cycle(5).unwrap(), 0.7).unwrap();
    let (ok, detail) = particle_statistics(&dist, 100_000, 6).unwrap();
    assert!(ok, "{detail}");
}

#[test]
fn procedural_matchings_respect_the_graph() {
    let graph = Graph::path(6).unwrap();
    let dist = default_matching_distribution(graph.clone(), 0.9).unwrap();
    let trace = NetworkTrace::sample(&dist, 2000, 8);
    assert!(trace.matchings[0].is_identity());
    assert!(trace.matchings.iter().all(|a| a.respects(&graph)));
    let abar = dist.mean_matrix();
    for i in 0..6 {
        assert!((abar.row(i).sum() - 1.0).abs() < 1e-12);
        assert!((abar.column(i).sum() - 1.0).abs() < 1e-12);
    }
}
