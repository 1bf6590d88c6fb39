//! Chains started from very different covariances forget their start.

use gikf::harness::reference;
use gikf::matrix::PsdMatrix;
use gikf::measure::weak_consensus_test;

fn main() -> gikf::Result<()> {
    let exp = reference::path3_unstable();
    let inits = [PsdMatrix::zeros(1), PsdMatrix::scaled_identity(1, 100.0)?];
    for t in [0, 1, 2, 4, 8, 16, 32, 64] {
        let rep = weak_consensus_test(&exp.model, &exp.dist, &inits, t, 4000, 3, 0.05)?;
        let worst = rep.pairs[0].distances.iter().map(|d| d.distance).fold(0.0, f64::max);
        println!("t={t:>3} max KS distance {worst:.4} {}", if rep.passed { "(below 0.05)" } else { "" });
    }
    Ok(())
}
