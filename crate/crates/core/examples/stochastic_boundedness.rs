//! Tail probabilities of the sensor covariances with and without a
//! detectable network.

use gikf::harness::verify::{blinded, Suite};
use gikf::measure::stochastic_boundedness_test;

fn main() -> gikf::Result<()> {
    let suite = Suite::reference();
    let exp = &suite.network;
    let alpha0 = suite.certificate()?.alpha0;
    let grid: Vec<f64> = [0.5, 1.0, 2.0, 5.0, 10.0].iter().map(|k| k * alpha0).collect();
    let times = [50, 200];

    let rep = stochastic_boundedness_test(&exp.model, &exp.dist, &grid, &times, 2000, 5, 0.05)?;
    println!("observing sensor present (alpha0 = {alpha0:.4}):");
    for r in &rep.rows {
        println!("  J = {:>7.3}  sup_t P(‖P‖ ≥ J) = {:.4}", r.j, r.tail);
    }
    println!("  passed: {}", rep.passed);

    let blind = blinded(&exp.model)?;
    let rep = stochastic_boundedness_test(&blind, &exp.dist, &grid, &times, 200, 5, 0.05)?;
    println!("all sensors blind:");
    for m in &rep.medians {
        println!("  median ‖P‖ at t = {:>3}: {:.3e}", m.t, m.median_norm);
    }
    println!("  passed: {}", rep.passed);
    Ok(())
}
