use gikf::matrix::{lyapunov_step, psd_leq, riccati_step, spectral_norm, PsdMatrix, SensorModel, SystemModel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn gram(z: DMatrix<f64>) -> DMatrix<f64> {
    &z * z.transpose()
}

#[derive(Debug, Clone)]
struct Instance {
    model: SystemModel,
    x: PsdMatrix,
    y: PsdMatrix,
    lambda: f64,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=3, 1usize..=2).prop_flat_map(|(m, p)| {
        (mat(m, m), mat(m, m), mat(p, m), mat(p, p), mat(m, m), mat(m, m), -1.0..1.0f64, 0.01..0.99f64).prop_map(
            move |(f, qz, c, rz, xz, wz, log_scale, lambda)| {
                let q = gram(qz) + DMatrix::identity(m, m) * 0.1;
                let r = gram(rz) + DMatrix::identity(p, p) * 0.1;
                let sensor = SensorModel::new(c, PsdMatrix::new(r).unwrap()).unwrap();
                let model = SystemModel::new(f, PsdMatrix::new(q).unwrap(), PsdMatrix::identity(m), vec![sensor]).unwrap();
                let s = 10f64.powf(log_scale);
                let x = gram(xz) * s;
                let y = &x + gram(wz) * s;
                Instance {
                    model,
                    x: PsdMatrix::new(x).unwrap(),
                    y: PsdMatrix::new(y).unwrap(),
                    lambda,
                }
            },
        )
    })
}

fn tol(x: &PsdMatrix) -> f64 {
    1e-9 * spectral_norm(x).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn order_preserving(inst in instance()) {
        let fx = riccati_step(&inst.model, 0, &inst.x).unwrap();
        let fy = riccati_step(&inst.model, 0, &inst.y).unwrap();
        prop_assert!(psd_leq(&fx, &fy, tol(&fy)).unwrap());
    }

    #[test]
    fn floor_at_process_noise(inst in instance()) {
        let fx = riccati_step(&inst.model, 0, &inst.x).unwrap();
        prop_assert!(psd_leq(inst.model.q(), &fx, tol(&fx)).unwrap());
    }

    #[test]
    fn dominated_by_lyapunov(inst in instance()) {
        let fx = riccati_step(&inst.model, 0, &inst.x).unwrap();
        let lx = lyapunov_step(&inst.model, &inst.x).unwrap();
        prop_assert!(psd_leq(&fx, &lx, tol(&lx)).unwrap());
    }

    #[test]
    fn concave_along_rays(inst in instance()) {
        let m = inst.model.state_dim();
        let x = PsdMatrix::new(inst.x.as_matrix() + DMatrix::identity(m, m) * 0.1).unwrap();
        let lhs = riccati_step(&inst.model, 0, &x).unwrap().scale(inst.lambda).unwrap();
        let rhs = riccati_step(&inst.model, 0, &x.scale(inst.lambda).unwrap()).unwrap();
        prop_assert!(psd_leq(&lhs, &rhs, tol(&rhs)).unwrap());
    }

    #[test]
    fn output_is_symmetric(inst in instance()) {
        let fx = riccati_step(&inst.model, 0, &inst.x).unwrap();
        let a = fx.as_matrix();
        prop_assert_eq!(a.clone(), a.transpose());
    }

    #[test]
    fn matches_schur_complement_oracle(inst in instance()) {
        // f(X) is the Schur complement of the top-left block of
        //   [ C X Cᵀ + R    C X Fᵀ     ]
        //   [ F X Cᵀ        F X Fᵀ + Q ],
        // read off the trailing block of its Cholesky factor.
        let model = &inst.model;
        let s = &model.sensors()[0];
        let (f, c, x) = (model.f(), s.c(), inst.x.as_matrix());
        let (p, m) = (c.nrows(), f.nrows());
        let mut block = DMatrix::<f64>::zeros(p + m, p + m);
        block.view_mut((0, 0), (p, p)).copy_from(&(c * x * c.transpose() + s.r().as_matrix()));
        block.view_mut((0, p), (p, m)).copy_from(&(c * x * f.transpose()));
        block.view_mut((p, 0), (m, p)).copy_from(&(f * x * c.transpose()));
        block.view_mut((p, p), (m, m)).copy_from(&(f * x * f.transpose() + model.q().as_matrix()));
        let l = block.cholesky().expect("block is positive definite").l();
        let l22 = l.view((p, p), (m, m));
        let oracle = l22 * l22.transpose();
        let fx = riccati_step(model, 0, &inst.x).unwrap();
        let scale = oracle.abs().max().max(1.0);
        prop_assert!((fx.as_matrix() - &oracle).abs().max() <= 1e-9 * scale);
    }
}

#[test]
fn scalar_closed_form() {
    // f(x) = f²x + q - f²x²c²/(c²x + r)
    let (f, q, c, r) = (1.3, 0.7, 2.0, 0.5);
    let sensor = SensorModel::new(DMatrix::from_element(1, 1, c), PsdMatrix::from_diagonal(&[r]).unwrap()).unwrap();
    let model = SystemModel::new(
        DMatrix::from_element(1, 1, f),
        PsdMatrix::from_diagonal(&[q]).unwrap(),
        PsdMatrix::identity(1),
        vec![sensor],
    )
    .unwrap();
    for x in [0.0, 0.3, 1.0, 17.0, 1e6] {
        let expect = f * f * x + q - f * f * x * x * c * c / (c * c * x + r);
        let got = riccati_step(&model, 0, &PsdMatrix::from_diagonal(&[x]).unwrap()).unwrap().trace();
        assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0), "x = {x}: {got} vs {expect}");
    }
}
