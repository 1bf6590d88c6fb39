use gikf::filter::{generate_truth, gikf_step, NetworkState};
use gikf::harness::reference;
use gikf::matrix::SystemModel;
use gikf::network::Matching;
use gikf::seed::stream_rng;
use nalgebra::{DMatrix, DVector};

/// One-step predictor written from the innovation form:
/// `K = F P Cᵀ S⁻¹`, `x⁺ = F x + K (y - C x)`, `P⁺ = F P Fᵀ + Q - K S Kᵀ`,
/// symmetrized.
struct Predictor {
    x: DVector<f64>,
    p: DMatrix<f64>,
}

impl Predictor {
    fn step(&mut self, model: &SystemModel, y: &DVector<f64>) {
        let s0 = &model.sensors()[0];
        let (f, c, r, q) = (model.f(), s0.c(), s0.r().as_matrix(), model.q().as_matrix());
        let s = c * &self.p * c.transpose() + r;
        let k = f * &self.p * c.transpose() * s.clone().try_inverse().unwrap();
        self.x = f * &self.x + &k * (y - c * &self.x);
        let p = f * &self.p * f.transpose() + q - &k * s * k.transpose();
        // Without this the antisymmetric rounding error grows like ‖F‖^{2t}.
        self.p = (&p + p.transpose()) * 0.5;
    }
}

fn compare(model: &SystemModel, horizon: usize, seed: u64) {
    let truth = generate_truth(model, horizon, &mut stream_rng(seed, 1));
    let mut state = NetworkState::initial(model);
    let mut oracle = Predictor {
        x: DVector::zeros(model.state_dim()),
        p: model.p0().as_matrix().clone(),
    };
    let id = Matching::identity(1);
    for t in 0..horizon {
        state = gikf_step(model, &state, &id, &truth.observations[t]).unwrap();
        oracle.step(model, &truth.observations[t][0]);
        let got = &state.states[0];
        let dp = (got.p.as_matrix() - &oracle.p).abs().max() / oracle.p.abs().max().max(1.0);
        let dx = (&got.xhat - &oracle.x).abs().max() / oracle.x.abs().max().max(1.0);
        assert!(dp <= 1e-9, "covariance deviates at t = {}: {dp:e}", t + 1);
        assert!(dx <= 1e-9, "estimate deviates at t = {}: {dx:e}", t + 1);
    }
}

#[test]
fn single_sensor_network_is_a_kalman_filter() {
    compare(&reference::scalar_kalman().model, 200, 11);
}

#[test]
fn single_sensor_two_dimensional() {
    let rot = reference::rotation_pair().model;
    let model = SystemModel::new(rot.f().clone(), rot.q().clone(), rot.p0().clone(), vec![rot.sensors()[0].clone()]).unwrap();
    compare(&model, 200, 12);
}
