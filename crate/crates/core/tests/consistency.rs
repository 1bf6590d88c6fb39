use gikf::filter::{covariance_consistency_check, run_gikf};
use gikf::harness::reference;
use gikf::seed::trial_seed;

fn records(exp: &gikf::harness::Experiment, runs: usize, horizon: usize, snaps: &[usize]) -> Vec<gikf::filter::TrajectoryRecord> {
    (0..runs as u64)
        .map(|i| run_gikf(&exp.model, &exp.dist, horizon, trial_seed(99, i), snaps).unwrap())
        .collect()
}

#[test]
fn scalar_kalman_errors_match_reported_covariance() {
    let exp = reference::scalar_kalman();
    let mut recs = records(&exp, 10_000, 20, &[5, 20]);
    let rep = covariance_consistency_check(&recs, 5..=20, 3.0).unwrap();
    assert!(rep.consistent, "{rep:?}");
    assert_eq!(rep.samples, 20_000);

    // Overstated covariance shows up as a statistic near M/2.
    for r in &mut recs {
        for s in &mut r.snapshots {
            for p in &mut s.covariances {
                *p = p.scale(2.0).unwrap();
            }
        }
    }
    let rep = covariance_consistency_check(&recs, 5..=20, 3.0).unwrap();
    assert!(!rep.consistent);
    assert!((rep.statistic - 0.5).abs() < 0.05, "{}", rep.statistic);
}

#[test]
fn network_errors_match_reported_covariance() {
    for exp in [reference::path3_unstable(), reference::rotation_pair()] {
        let recs = records(&exp, 2000, 60, &[10, 30, 60]);
        let rep = covariance_consistency_check(&recs, 0..=60, 3.0).unwrap();
        assert!(rep.consistent, "{rep:?}");
    }
}
