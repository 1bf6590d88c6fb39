//! Searching for a walk whose observability Grammian is invertible, and the
//! resulting uniform bound on the covariance.

use gikf::detect::{boundedness_horizon, default_max_len, find_detectability_walk, DetectabilitySearch};
use gikf::harness::reference;
use gikf::harness::verify::blinded;
use gikf::matrix::{operator_norm, spectral_norm};

fn main() -> gikf::Result<()> {
    for exp in [reference::path3_unstable(), reference::rotation_pair()] {
        let model = &exp.model;
        let abar = exp.dist.mean_matrix();
        match find_detectability_walk(model, &abar, default_max_len(model))? {
            DetectabilitySearch::Found(cert) => {
                let alpha = operator_norm(model.f());
                let j = 10.0 * cert.alpha0;
                println!(
                    "{}: walk {:?}, alpha0 {:.4}, Grammian min eigenvalue {:.4}",
                    exp.config.name, cert.walk, cert.alpha0, cert.grammian_min_eigenvalue
                );
                if alpha > 1.0 {
                    let k = boundedness_horizon(alpha, cert.alpha0, spectral_norm(model.q()), j)?;
                    println!("  norm stays below {j:.2} for {k} steps after each occurrence of the walk");
                }
            }
            DetectabilitySearch::NotFound { max_len } => println!("{}: no walk up to length {max_len}", exp.config.name),
        }
    }

    let exp = reference::path3_unstable();
    let blind = blinded(&exp.model)?;
    let search = find_detectability_walk(&blind, &exp.dist.mean_matrix(), 12)?;
    println!("all sensors blinded: certificate found = {}", search.certificate().is_some());
    Ok(())
}
