//! Sampling the auxiliary switched Riccati chain and comparing it with the
//! covariance of a randomly probed sensor.

use gikf::harness::reference;
use gikf::measure::{randomly_probed_sensor_test, run_auxiliary_chain, AuxiliaryChainSpec, InitMeasure, ProbeRule, Projection};

fn main() -> gikf::Result<()> {
    let exp = reference::path3_unstable();
    let spec = AuxiliaryChainSpec::from_distribution(&exp.dist, InitMeasure::PointMass(exp.model.p0().clone()))?;
    let mu = run_auxiliary_chain(&exp.model, &spec, 200, 5000, 1)?;
    let mut norms = mu.project(&Projection::SpectralNorm);
    norms.sort_by(f64::total_cmp);
    for q in [0.1, 0.5, 0.9, 0.99] {
        println!("{:>4.0}% quantile of ‖P̃(200)‖: {:.4}", q * 100.0, norms[(q * (norms.len() - 1) as f64) as usize]);
    }

    for probe in [ProbeRule::Uniform, ProbeRule::Fixed(0)] {
        let rep = randomly_probed_sensor_test(&exp.model, &exp.dist, &[5, 25], 5000, 2, probe)?;
        for t in &rep.times {
            let worst = t.distances.iter().map(|d| d.distance).fold(0.0, f64::max);
            println!("{probe:?} t={:>2}: max KS {worst:.4} (critical {:.4})", t.t, rep.critical_value);
        }
    }
    Ok(())
}
