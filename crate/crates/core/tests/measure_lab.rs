use gikf::harness::reference;
use gikf::matrix::PsdMatrix;
use gikf::measure::{
    coupled_initial_condition_bound, ks_critical_value, randomly_probed_sensor_test, run_auxiliary_chain,
    stochastic_boundedness_test, stochastic_dominance_test, weak_consensus_test, AuxiliaryChainSpec, InitMeasure,
    ProbeRule, Projection,
};

#[test]
fn uniform_probe_matches_auxiliary_chain_in_two_dimensions() {
    let exp = reference::rotation_pair();
    let trials = 4000;
    let rep = randomly_probed_sensor_test(&exp.model, &exp.dist, &[3, 20], trials, 17, ProbeRule::Uniform).unwrap();
    // Ten comparisons (five projections at two times), so hold the family
    // to 1% with a Bonferroni split.
    let comparisons = rep.times.iter().map(|t| t.distances.len()).sum::<usize>();
    let crit = ks_critical_value(trials, trials, 0.01 / comparisons as f64);
    for t in &rep.times {
        for d in &t.distances {
            assert!(d.distance < crit, "t = {}: {} {} >= {crit}", t.t, d.projection, d.distance);
        }
    }
}

#[test]
fn biased_probe_is_flagged() {
    let exp = reference::path3_unstable();
    let rep = randomly_probed_sensor_test(&exp.model, &exp.dist, &[25], 4000, 18, ProbeRule::Fixed(0)).unwrap();
    assert!(!rep.passed);
    let worst = rep.times[0].distances.iter().map(|d| d.distance).fold(0.0, f64::max);
    assert!(worst > 3.0 * rep.critical_value, "{worst}");
}

#[test]
fn single_sensor_probe_is_deterministic() {
    let exp = reference::scalar_kalman();
    let rep = randomly_probed_sensor_test(&exp.model, &exp.dist, &[10], 200, 1, ProbeRule::Uniform).unwrap();
    assert!(rep.times[0].distances.iter().all(|d| d.distance == 0.0));
}

#[test]
fn initial_condition_is_forgotten() {
    let exp = reference::path3_unstable();
    let inits = [PsdMatrix::zeros(1), PsdMatrix::scaled_identity(1, 100.0).unwrap()];
    let trials = 3000;
    let slack = ks_critical_value(trials, trials, 0.01);
    let mut prev = f64::INFINITY;
    for t in [0, 2, 5, 10, 40] {
        let rep = weak_consensus_test(&exp.model, &exp.dist, &inits, t, trials, 9, 0.05).unwrap();
        let d = rep.pairs[0].distances.iter().map(|d| d.distance).fold(0.0, f64::max);
        if t == 0 {
            assert_eq!(d, 1.0);
        }
        assert!(d <= prev + slack, "t = {t}: {d} after {prev}");
        prev = d;
    }
    assert!(prev < 0.05);
}

#[test]
fn dominance_at_mid_quantiles() {
    let exp = reference::path3_unstable();
    let spec = AuxiliaryChainSpec::from_distribution(&exp.dist, InitMeasure::PointMass(exp.model.p0().clone())).unwrap();
    let mut norms = run_auxiliary_chain(&exp.model, &spec, 100, 2000, 77).unwrap().project(&Projection::SpectralNorm);
    norms.sort_by(f64::total_cmp);
    let thresholds: Vec<f64> = [0.25, 0.5, 0.75, 0.95].iter().map(|q| norms[(q * 1999.0) as usize]).collect();
    for particle in 0..3 {
        let rep = stochastic_dominance_test(&exp.model, &exp.dist, particle, &thresholds, 100, 10_000, 31, 1e-3).unwrap();
        assert!(rep.passed, "{rep:#?}");
    }
}

#[test]
fn majorization_holds_on_random_traces() {
    for exp in [reference::path3_unstable(), reference::rotation_pair()] {
        for seed in 0..30 {
            let rep = coupled_initial_condition_bound(&exp.model, &exp.dist, 5, 50, seed, 1e-9).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }
}

#[test]
fn majorant_at_start_dominates_every_path() {
    // At t = s the coupled iterate is f₀ˢ(P̂_0), above any s-fold Riccati composition.
    let exp = reference::path3_unstable();
    for seed in 0..30 {
        let rep = coupled_initial_condition_bound(&exp.model, &exp.dist, 12, 12, seed, 1e-9).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.checks, 3);
    }
}

#[test]
fn stable_dynamics_have_collapsing_tails() {
    let exp = reference::path3_unstable();
    let model = gikf::matrix::SystemModel::new(
        nalgebra::DMatrix::from_element(1, 1, 0.5),
        exp.model.q().clone(),
        exp.model.p0().clone(),
        exp.model.sensors().to_vec(),
    )
    .unwrap();
    // Lyapunov fixed point q / (1 - f²) = 4/3 bounds every iterate.
    let rep = stochastic_boundedness_test(&model, &exp.dist, &[0.5, 1.0, 1.4], &[10, 50], 500, 3, 0.05).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.rows[2].tail, 0.0);
    assert!(rep.medians.iter().all(|m| m.median_norm <= 4.0 / 3.0 + 1e-12));
}
