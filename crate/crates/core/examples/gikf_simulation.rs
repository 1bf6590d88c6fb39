//! Running the gossip interactive Kalman filter and checking that the
//! reported covariances match the actual errors.

use gikf::filter::{covariance_consistency_check, run_gikf};
use gikf::harness::reference;
use gikf::seed::trial_seed;

fn main() -> gikf::Result<()> {
    let exp = reference::rotation_pair();
    let rec = run_gikf(&exp.model, &exp.dist, 60, 7, &[20, 40, 60])?;
    println!("t sensor ‖P‖ squared-error particle matching");
    for t in [1, 2, 3, 30, 60] {
        for r in rec.rows_at(t) {
            println!("{:>2} {} {:>9.4} {:>9.4} {} {}", r.t, r.sensor, r.norm_p, r.sq_err, r.particle_pos, r.matching_id);
        }
    }

    let records = (0..2000)
        .map(|i| run_gikf(&exp.model, &exp.dist, 60, trial_seed(7, i), &[20, 40, 60]))
        .collect::<gikf::Result<Vec<_>>>()?;
    let rep = covariance_consistency_check(&records, 20..=60, 3.0)?;
    println!(
        "mean eᵀP⁻¹e = {:.4} (expected {}, band [{:.4}, {:.4}]) consistent: {}",
        rep.statistic, rep.expected, rep.lower, rep.upper, rep.consistent
    );
    Ok(())
}
