//! The Riccati and Lyapunov operators and the PSD order between them.

use gikf::matrix::{lyapunov_step, psd_gap, riccati_step, PsdMatrix, SensorModel, SystemModel};
use nalgebra::DMatrix;

fn main() -> gikf::Result<()> {
    let f = DMatrix::from_row_slice(2, 2, &[1.1, 0.3, 0.0, 0.9]);
    let sensor = SensorModel::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), PsdMatrix::from_diagonal(&[0.5])?)?;
    let model = SystemModel::new(f, PsdMatrix::from_diagonal(&[0.2, 0.1])?, PsdMatrix::identity(2), vec![sensor])?;

    let mut p = model.p0().clone();
    for t in 1..=30 {
        let next = riccati_step(&model, 0, &p)?;
        let lyap = lyapunov_step(&model, &p)?;
        if t <= 3 || t % 10 == 0 {
            println!(
                "t={t:>2} trace {:.6}  gap to Lyapunov {:.3e}  gap above Q {:.3e}",
                next.trace(),
                psd_gap(&next, &lyap)?,
                psd_gap(model.q(), &next)?
            );
        }
        p = next;
    }
    println!("steady-state covariance:\n{}", p.as_matrix());
    Ok(())
}
