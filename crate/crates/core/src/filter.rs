//! The gossip interactive Kalman filter.
//!
//! At the start of slot `t` matched sensors swap their whole filter state
//! (estimate and covariance); then every sensor runs one Kalman
//! predict-update on the state it now holds, using its own observation.
//! The covariance of sensor `n` therefore follows
//! `P̂ⁿ_{t+1} = f_n(P̂^{→(n,t)}_t)`.
//!
//! Time indexing: a run of horizon `T` holds `P̂_0 … P̂_T`; the step from
//! `t` to `t + 1` uses the matching `A(t)` (with `A(0) = I`) and the
//! observations `yⁿ_t`.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GikfError, Result};
use crate::matrix::{riccati_step, riccati_with_gain, spd_factor, spectral_norm, PsdMatrix, SystemModel};
use crate::network::{advance_particles, check_connectivity, initial_positions, GossipDistribution, Matching, NetworkTrace};
use crate::seed;

/// Draws from `N(0, cov)` for a PSD `cov` using a symmetric square root,
/// so singular covariances are fine.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &PsdMatrix) -> Self {
        let m = cov.as_matrix();
        let factor = if m.nrows() == 1 {
            DMatrix::from_element(1, 1, m[(0, 0)].max(0.0).sqrt())
        } else {
            let eig = SymmetricEigen::new(m.clone());
            let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
        };
        GaussianSampler { factor }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * z
    }
}

/// A realization of the signal and of every sensor's observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// `x_0 … x_T`.
    pub states: Vec<DVector<f64>>,
    /// `observations[t][n] = yⁿ_t` for `t < T`.
    pub observations: Vec<Vec<DVector<f64>>>,
}

/// `x_0 ~ N(0, P̂_0)`, `x_{t+1} = F x_t + w_t`, `yⁿ_t = C_n x_t + vⁿ_t`, with
/// all noises independent Gaussians.
pub fn generate_truth<R: Rng + ?Sized>(model: &SystemModel, horizon: usize, rng: &mut R) -> Truth {
    let x0 = GaussianSampler::new(model.p0());
    let w = GaussianSampler::new(model.q());
    let v: Vec<_> = model
        .sensors()
        .iter()
        .map(|s| GaussianSampler::new(s.r()))
        .collect();

    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon);
    let mut x = x0.sample(rng);
    for _ in 0..horizon {
        let ys = model
            .sensors()
            .iter()
            .zip(&v)
            .map(|(s, vs)| s.c() * &x + vs.sample(rng))
            .collect();
        observations.push(ys);
        let next = model.f() * &x + w.sample(rng);
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Truth {
        states,
        observations,
    }
}

/// The state held by one sensor: predicted estimate and its error
/// covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub xhat: DVector<f64>,
    pub p: PsdMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: usize,
    pub states: Vec<FilterState>,
    /// Particle positions `p_n(t)`; `P_n(t) = P̂_{positions[n]}(t)`.
    pub positions: Vec<usize>,
    pub truth: Option<DVector<f64>>,
}

impl NetworkState {
    /// Every sensor starts from the prior `(0, P̂_0)`.
    pub fn initial(model: &SystemModel) -> Self {
        let n = model.num_sensors();
        let init = FilterState {
            xhat: DVector::zeros(model.state_dim()),
            p: model.p0().clone(),
        };
        NetworkState {
            t: 0,
            states: vec![init; n],
            positions: initial_positions(n),
            truth: None,
        }
    }
}

/// One Kalman predict-update of sensor `n` applied to an adopted state.
pub fn kalman_predict(model: &SystemModel, n: usize, state: &FilterState, y: &DVector<f64>) -> Result<FilterState> {
    let (p, gain) = riccati_with_gain(model, n, &state.p)?;
    let c = model.sensor(n)?.c();
    let innovation = y - c * &state.xhat;
    let xhat = model.f() * &state.xhat + gain * innovation;
    Ok(FilterState { xhat, p })
}

fn check_matching(model: &SystemModel, a: &Matching) -> Result<()> {
    if a.num_nodes() != model.num_sensors() {
        return Err(GikfError::DimensionMismatch {
            context: "matching vs sensor count",
            expected: model.num_sensors().to_string(),
            found: a.num_nodes().to_string(),
        });
    }
    Ok(())
}

/// One slot: swap states along `a`, then update each sensor with its own
/// observation.
pub fn gikf_step(
    model: &SystemModel,
    state: &NetworkState,
    a: &Matching,
    observations: &[DVector<f64>],
) -> Result<NetworkState> {
    check_matching(model, a)?;
    if observations.len() != model.num_sensors() {
        return Err(GikfError::DimensionMismatch {
            context: "observations per slot",
            expected: model.num_sensors().to_string(),
            found: observations.len().to_string(),
        });
    }
    let states = (0..model.num_sensors())
        .map(|n| kalman_predict(model, n, &state.states[a.neighbor(n)], &observations[n]))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkState {
        t: state.t + 1,
        states,
        positions: advance_particles(&state.positions, a),
        truth: None,
    })
}

/// Covariance part of [`gikf_step`] alone: `P̂ⁿ ← f_n(P̂^{→(n)})`.
pub fn covariance_step(model: &SystemModel, covs: &[PsdMatrix], a: &Matching) -> Result<Vec<PsdMatrix>> {
    check_matching(model, a)?;
    (0..model.num_sensors())
        .map(|n| riccati_step(model, n, &covs[a.neighbor(n)]))
        .collect()
}

/// Sensor covariances `P̂_0 … P̂_T` along a trace.
pub fn run_covariances(model: &SystemModel, trace: &NetworkTrace) -> Result<Vec<Vec<PsdMatrix>>> {
    let mut out = Vec::with_capacity(trace.horizon() + 1);
    out.push(vec![model.p0().clone(); model.num_sensors()]);
    for a in &trace.matchings {
        let next = covariance_step(model, out.last().expect("non-empty"), a)?;
        out.push(next);
    }
    Ok(out)
}

/// Sensor covariances at time `T = trace.horizon()` only.
pub fn final_covariances(model: &SystemModel, trace: &NetworkTrace) -> Result<Vec<PsdMatrix>> {
    let mut covs = vec![model.p0().clone(); model.num_sensors()];
    for a in &trace.matchings {
        covs = covariance_step(model, &covs, a)?;
    }
    Ok(covs)
}

/// Particle-view iterates `P_n(0) … P_n(T)` with
/// `P_n(t+1) = f_{p_n(t)}(P_n(t))`, computed independently of the
/// sensor-indexed recursion.
pub fn run_particle_view(model: &SystemModel, trace: &NetworkTrace) -> Result<Vec<Vec<PsdMatrix>>> {
    let n = model.num_sensors();
    let mut out = Vec::with_capacity(trace.horizon() + 1);
    out.push(vec![model.p0().clone(); n]);
    let mut positions = initial_positions(n);
    for a in &trace.matchings {
        positions = advance_particles(&positions, a);
        let prev = out.last().expect("non-empty");
        let next = (0..n)
            .map(|k| riccati_step(model, positions[k], &prev[k]))
            .collect::<Result<Vec<_>>>()?;
        out.push(next);
    }
    Ok(out)
}

/// Particle-view iterates `P_n(T)` at the horizon only.
pub fn final_particle_view(model: &SystemModel, trace: &NetworkTrace) -> Result<Vec<PsdMatrix>> {
    let n = model.num_sensors();
    let mut positions = initial_positions(n);
    let mut ps = vec![model.p0().clone(); n];
    for a in &trace.matchings {
        positions = advance_particles(&positions, a);
        ps = (0..n)
            .map(|k| riccati_step(model, positions[k], &ps[k]))
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(ps)
}

/// Largest relative discrepancy between the particle view and the
/// permuted sensor covariances, `‖P_n(t) - P̂_{π_{t-1}(n)}(t)‖ / max(1, ‖P_n(t)‖)`.
pub fn swap_identity_discrepancy(model: &SystemModel, trace: &NetworkTrace) -> Result<f64> {
    let sensors = run_covariances(model, trace)?;
    let particles = run_particle_view(model, trace)?;
    let perms = trace.permutations();
    let mut worst: f64 = 0.0;
    for (t, pi) in perms.iter().enumerate() {
        for (k, &pos) in pi.iter().enumerate() {
            let a = particles[t + 1][k].as_matrix();
            let b = sensors[t + 1][pos].as_matrix();
            let scale = a.abs().max().max(1.0);
            worst = worst.max((a - b).abs().max() / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: usize,
    pub sensor: usize,
    pub norm_p: f64,
    pub sq_err: f64,
    /// Particle `sensor` sits at this node at time `t`.
    pub particle_pos: usize,
    /// Matching that produced time `t` (empty at `t = 0`).
    pub matching_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub covariances: Vec<PsdMatrix>,
    /// Prediction errors `x_t - x̂ⁿ_{t|t-1}`, one per sensor.
    pub errors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub horizon: usize,
    pub num_sensors: usize,
    pub state_dim: usize,
    pub seed: u64,
    pub rows: Vec<RecordRow>,
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<String>,
}

impl TrajectoryRecord {
    pub fn rows_at(&self, t: usize) -> &[RecordRow] {
        let n = self.num_sensors;
        &self.rows[t * n..(t + 1) * n]
    }
}

fn record_slot(
    rows: &mut Vec<RecordRow>,
    state: &NetworkState,
    x: &DVector<f64>,
    matching_id: &str,
) {
    for (n, s) in state.states.iter().enumerate() {
        rows.push(RecordRow {
            t: state.t,
            sensor: n,
            norm_p: spectral_norm(&s.p),
            sq_err: (x - &s.xhat).norm_squared(),
            particle_pos: state.positions[n],
            matching_id: matching_id.to_string(),
        });
    }
}

fn snapshot(state: &NetworkState, x: &DVector<f64>) -> Snapshot {
    Snapshot {
        t: state.t,
        covariances: state.states.iter().map(|s| s.p.clone()).collect(),
        errors: state
            .states
            .iter()
            .map(|s| (x - &s.xhat).iter().copied().collect())
            .collect(),
    }
}

/// Full simulation along a given trace. The signal is drawn from the noise
/// stream of `trace.seed`.
pub fn simulate(model: &SystemModel, trace: &NetworkTrace, snapshots: &[usize]) -> Result<TrajectoryRecord> {
    let horizon = trace.horizon();
    let mut rng = seed::stream_rng(trace.seed, seed::NOISE_STREAM);
    let truth = generate_truth(model, horizon, &mut rng);

    let mut rows = Vec::with_capacity((horizon + 1) * model.num_sensors());
    let mut snaps = Vec::new();
    let mut state = NetworkState::initial(model);
    state.truth = Some(truth.states[0].clone());
    record_slot(&mut rows, &state, &truth.states[0], "");
    if snapshots.contains(&0) {
        snaps.push(snapshot(&state, &truth.states[0]));
    }
    for (t, a) in trace.matchings.iter().enumerate() {
        state = gikf_step(model, &state, a, &truth.observations[t])?;
        let x = &truth.states[t + 1];
        state.truth = Some(x.clone());
        record_slot(&mut rows, &state, x, &a.id());
        if snapshots.contains(&(t + 1)) {
            snaps.push(snapshot(&state, x));
        }
    }
    Ok(TrajectoryRecord {
        horizon,
        num_sensors: model.num_sensors(),
        state_dim: model.state_dim(),
        seed: trace.seed,
        rows,
        snapshots: snaps,
        warnings: Vec::new(),
    })
}

/// Samples a trace from `dist` and simulates it. Deterministic in `seed`.
pub fn run_gikf(
    model: &SystemModel,
    dist: &GossipDistribution,
    horizon: usize,
    seed: u64,
    snapshots: &[usize],
) -> Result<TrajectoryRecord> {
    if dist.num_nodes() != model.num_sensors() {
        return Err(GikfError::DimensionMismatch {
            context: "network size vs sensor count",
            expected: model.num_sensors().to_string(),
            found: dist.num_nodes().to_string(),
        });
    }
    let trace = NetworkTrace::sample(dist, horizon, seed);
    let mut record = simulate(model, &trace, snapshots)?;
    let conn = check_connectivity(&dist.mean_matrix());
    if !conn.irreducible {
        record.warnings.push("mean matrix is not irreducible".into());
    }
    if !conn.aperiodic {
        record.warnings.push("mean matrix is not aperiodic".into());
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Mean of `eᵀ P̂⁻¹ e` over all pooled samples.
    pub statistic: f64,
    /// State dimension, the expected value of the statistic.
    pub expected: f64,
    pub lower: f64,
    pub upper: f64,
    pub runs: usize,
    pub samples: usize,
    pub consistent: bool,
}

/// Checks that recorded covariances match the spread of the actual
/// prediction errors across independent runs.
///
/// Pools `eᵀ P̂⁻¹ e` over every snapshot in `window` and every sensor. Under
/// a correct filter each term is χ² with `M` degrees of freedom. Terms
/// within a run are correlated, so the band `M ± sigmas·√(2M/K)` uses only
/// the number of runs `K`, which is conservative.
pub fn covariance_consistency_check(
    records: &[TrajectoryRecord],
    window: RangeInclusive<usize>,
    sigmas: f64,
) -> Result<ConsistencyReport> {
    if records.len() < 2 {
        return Err(GikfError::InsufficientSamples(format!(
            "{} runs; at least 2 are needed",
            records.len()
        )));
    }
    let m = records[0].state_dim as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for rec in records {
        for snap in rec.snapshots.iter().filter(|s| window.contains(&s.t)) {
            for (p, e) in snap.covariances.iter().zip(&snap.errors) {
                let e = DVector::from_column_slice(e);
                let chol = spd_factor(p.as_matrix()).ok_or_else(|| {
                    GikfError::InvalidArgument(format!("singular recorded covariance at t = {}", snap.t))
                })?;
                total += e.dot(&chol.solve(&e));
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(GikfError::InsufficientSamples(format!(
            "no snapshots inside {window:?}"
        )));
    }
    let statistic = total / count as f64;
    let half = sigmas * (2.0 * m / records.len() as f64).sqrt();
    Ok(ConsistencyReport {
        statistic,
        expected: m,
        lower: m - half,
        upper: m + half,
        runs: records.len(),
        samples: count,
        consistent: (m - half..=m + half).contains(&statistic),
    })
}
