//! The acceptance suite: ten checks run against a scalar single-sensor
//! configuration and a multi-sensor network configuration.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::Experiment;
use super::reference;
use crate::detect::{compose_along_walk, default_max_len, find_detectability_walk, WalkCertificate};
use crate::error::{GikfError, Result};
use crate::filter::{run_covariances, swap_identity_discrepancy};
use crate::matrix::{lyapunov_step, psd_leq, riccati_step, spectral_norm, PsdMatrix, SensorModel, SystemModel};
use crate::measure::{
    coupled_initial_condition_bound, randomly_probed_sensor_test, stochastic_boundedness_test, weak_consensus_test,
    ProbeRule,
};
use crate::network::{advance_particles, GossipDistribution, NetworkTrace, TransitionKernel};
use crate::seed::{splitmix64, stream_rng, trial_seed};

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "swap identity"),
    (2, "Kalman oracle equivalence"),
    (3, "operator properties"),
    (4, "uniform walk bound"),
    (5, "finite-time distributional identity"),
    (6, "weak consensus"),
    (7, "stochastic boundedness"),
    (8, "negative control"),
    (9, "pathwise majorization"),
    (10, "particle chain statistics"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<36} {:>8.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_secs,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

/// Inputs of the suite. `trials` sizes the statistical criteria (5 to 7).
#[derive(Debug, Clone)]
pub struct Suite {
    pub kalman: Experiment,
    pub network: Experiment,
    pub trials: usize,
    pub seed: u64,
}

impl Suite {
    pub fn reference() -> Self {
        Self::with_network(reference::path3_unstable())
    }

    pub fn with_network(network: Experiment) -> Self {
        Suite {
            kalman: reference::scalar_kalman(),
            trials: network.config.trials,
            seed: network.config.seed,
            network,
        }
    }

    fn seed_for(&self, id: u8) -> u64 {
        splitmix64(self.seed.wrapping_add(id as u64))
    }

    pub fn run_all(&self) -> SuiteReport {
        self.run(&CRITERIA.map(|(id, _)| id))
    }

    pub fn run(&self, ids: &[u8]) -> SuiteReport {
        let criteria: Vec<_> = ids.iter().map(|&id| self.run_criterion(id)).collect();
        let passed = criteria.iter().all(|c| c.passed);
        SuiteReport { criteria, passed }
    }

    pub fn run_criterion(&self, id: u8) -> CriterionOutcome {
        let start = Instant::now();
        let name = CRITERIA
            .iter()
            .find(|(k, _)| *k == id)
            .map_or("unknown criterion", |(_, n)| n);
        let seed = self.seed_for(id);
        let (m, d) = (&self.network.model, &self.network.dist);
        let result = match id {
            1 => swap_identity(m, d, 100, 500, seed),
            2 => kalman_equivalence(&self.kalman.model, 200),
            3 => operator_properties(10_000, seed),
            4 => self.certificate().and_then(|c| uniform_walk_bound(m, &c, 1000, 1e6, seed)),
            5 => finite_time_identity(self, seed),
            6 => weak_consensus(self, seed),
            7 => stochastic_boundedness(self, seed),
            8 => negative_control(self, seed),
            9 => pathwise_majorization(self, 100, seed),
            10 => particle_statistics(d, 100_000, seed),
            _ => Err(GikfError::InvalidArgument(format!("no criterion {id}"))),
        };
        let (passed, detail) = match result {
            Ok(c) => c,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionOutcome {
            id,
            name: name.to_string(),
            passed,
            detail,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    }

    /// Detectability certificate of the network configuration.
    pub fn certificate(&self) -> Result<WalkCertificate> {
        let model = &self.network.model;
        let search = find_detectability_walk(model, &self.network.dist.mean_matrix(), default_max_len(model))?;
        search
            .certificate()
            .cloned()
            .ok_or_else(|| GikfError::InvalidArgument("network configuration has no detectability walk".into()))
    }
}

type Check = Result<(bool, String)>;

pub fn swap_identity(model: &SystemModel, dist: &GossipDistribution, runs: usize, horizon: usize, seed: u64) -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..runs as u64 {
        let trace = NetworkTrace::sample(dist, horizon, trial_seed(seed, i));
        worst = worst.max(swap_identity_discrepancy(model, &trace)?);
    }
    Ok((worst <= 1e-12, format!("max relative discrepancy {worst:.3e} over {runs} runs, T = {horizon}")))
}

/// Covariance recursion written out with an explicit inverse and the
/// Joseph-form update.
pub fn textbook_kalman_covariances(
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    horizon: usize,
) -> Option<Vec<DMatrix<f64>>> {
    let m = f.nrows();
    let eye = DMatrix::<f64>::identity(m, m);
    let mut p = p0.clone();
    let mut out = vec![p.clone()];
    for _ in 0..horizon {
        let s = c * &p * c.transpose() + r;
        let k = &p * c.transpose() * s.try_inverse()?;
        let ikc = &eye - &k * c;
        let filtered = &ikc * &p * ikc.transpose() + &k * r * k.transpose();
        p = f * filtered * f.transpose() + q;
        out.push(p.clone());
    }
    Some(out)
}

pub fn kalman_equivalence(model: &SystemModel, horizon: usize) -> Check {
    if model.num_sensors() != 1 {
        return Err(GikfError::InvalidArgument("Kalman oracle needs a single sensor".into()));
    }
    let trace = NetworkTrace {
        matchings: vec![crate::network::Matching::identity(1); horizon],
        seed: 0,
    };
    let gikf = run_covariances(model, &trace)?;
    let s = model.sensor(0)?;
    let oracle = textbook_kalman_covariances(
        model.f(),
        model.q().as_matrix(),
        s.c(),
        s.r().as_matrix(),
        model.p0().as_matrix(),
        horizon,
    )
    .ok_or_else(|| GikfError::InvalidArgument("singular innovation in oracle".into()))?;
    let worst = gikf
        .iter()
        .zip(&oracle)
        .map(|(g, o)| (g[0].as_matrix() - o).abs().max() / o.abs().max().max(1.0))
        .fold(0.0, f64::max);
    Ok((worst <= 1e-9, format!("max relative deviation {worst:.3e} over T = {horizon}")))
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn random_psd<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let z = random_matrix(dim, dim, scale, rng);
    &z * z.transpose()
}

fn random_model<R: Rng>(rng: &mut R) -> Result<SystemModel> {
    let m = rng.random_range(1..=3);
    let p = rng.random_range(1..=2);
    let f = random_matrix(m, m, 0.8, rng);
    let q = random_psd(m, 0.5, rng) + DMatrix::identity(m, m) * 0.1;
    let r = random_psd(p, 0.5, rng) + DMatrix::identity(p, p) * 0.1;
    let c = random_matrix(p, m, 1.0, rng);
    let sensor = SensorModel::new(c, PsdMatrix::new(r)?)?;
    SystemModel::new(f, PsdMatrix::new(q)?, PsdMatrix::identity(m), vec![sensor])
}

fn rel_tol(x: &PsdMatrix) -> f64 {
    1e-9 * spectral_norm(x).max(1.0)
}

/// Order preservation, floor `f(X) ⪰ Q`, Lyapunov domination and
/// concavity `λ f(X) ⪯ f(λX)` on random models and matrices.
pub fn operator_properties(instances: usize, seed: u64) -> Check {
    let mut rng = stream_rng(seed, 0);
    let mut failures = [0usize; 4];
    for _ in 0..instances {
        let model = random_model(&mut rng)?;
        let m = model.state_dim();
        let xscale = 10f64.powf(rng.random_range(-1.0..1.0));
        let x = PsdMatrix::new(random_psd(m, xscale, &mut rng))?;
        let y = PsdMatrix::new(x.as_matrix() + random_psd(m, xscale, &mut rng))?;
        let fx = riccati_step(&model, 0, &x)?;
        let fy = riccati_step(&model, 0, &y)?;
        if !psd_leq(&fx, &fy, rel_tol(&fy))? {
            failures[0] += 1;
        }
        if !psd_leq(model.q(), &fx, rel_tol(&fx))? {
            failures[1] += 1;
        }
        let lx = lyapunov_step(&model, &x)?;
        if !psd_leq(&fx, &lx, rel_tol(&lx))? {
            failures[2] += 1;
        }
        let lambda: f64 = rng.random_range(0.01..0.99);
        let xpd = PsdMatrix::new(x.as_matrix() + DMatrix::identity(m, m) * 0.1)?;
        let lhs = riccati_step(&model, 0, &xpd)?.scale(lambda)?;
        let rhs = riccati_step(&model, 0, &xpd.scale(lambda)?)?;
        if !psd_leq(&lhs, &rhs, rel_tol(&rhs))? {
            failures[3] += 1;
        }
    }
    Ok((
        failures.iter().all(|&f| f == 0),
        format!(
            "{instances} instances; failures order {} floor {} lyapunov {} concavity {}",
            failures[0], failures[1], failures[2], failures[3]
        ),
    ))
}

/// `g_w(X) ⪯ α₀ I` for random `X` with norms spread up to `max_norm`.
pub fn uniform_walk_bound(
    model: &SystemModel,
    cert: &WalkCertificate,
    samples: usize,
    max_norm: f64,
    seed: u64,
) -> Check {
    let mut rng = stream_rng(seed, 0);
    let m = model.state_dim();
    let bound = PsdMatrix::scaled_identity(m, cert.alpha0)?;
    let tol = 1e-8 * cert.alpha0.max(1.0);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for k in 0..samples {
        let x = if k == 0 {
            PsdMatrix::zeros(m)
        } else if k == 1 {
            PsdMatrix::scaled_identity(m, max_norm)?
        } else {
            let raw = random_psd(m, 1.0, &mut rng);
            let target = 10f64.powf(rng.random_range(-3.0..max_norm.log10()));
            let norm = crate::matrix::operator_norm(&raw).max(f64::MIN_POSITIVE);
            PsdMatrix::new(raw * (target / norm))?
        };
        let g = compose_along_walk(model, &cert.walk, &x)?;
        worst = worst.max(g.max_eigenvalue());
        if !psd_leq(&g, &bound, tol)? {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!(
            "walk {:?}, alpha0 {:.6}, largest eigenvalue seen {worst:.6}, {violations} violations in {samples}",
            cert.walk, cert.alpha0
        ),
    ))
}

fn finite_time_identity(suite: &Suite, seed: u64) -> Check {
    let exp = &suite.network;
    let rep = randomly_probed_sensor_test(
        &exp.model,
        &exp.dist,
        &exp.config.tests.probe_times,
        suite.trials,
        seed,
        ProbeRule::Uniform,
    )?;
    let worst = rep
        .times
        .iter()
        .map(|t| {
            let d = t.distances.iter().map(|d| d.distance).fold(0.0, f64::max);
            format!("t={} {d:.4}", t.t)
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok((
        rep.passed,
        format!("max KS per time [{worst}] vs critical {:.4}, {} trials", rep.critical_value, rep.trials),
    ))
}

fn weak_consensus(suite: &Suite, seed: u64) -> Check {
    let exp = &suite.network;
    let m = exp.model.state_dim();
    let t = &exp.config.tests;
    let inits = [PsdMatrix::zeros(m), PsdMatrix::scaled_identity(m, 100.0)?];
    let rep = weak_consensus_test(&exp.model, &exp.dist, &inits, t.consensus_horizon, suite.trials, seed, t.consensus_threshold)?;
    let worst = rep
        .pairs
        .iter()
        .flat_map(|p| p.distances.iter().map(|d| d.distance))
        .fold(0.0, f64::max);
    Ok((
        rep.passed,
        format!(
            "max KS {worst:.4} < {} at t = {}, {} trials",
            t.consensus_threshold, t.consensus_horizon, suite.trials
        ),
    ))
}

fn tail_grid(suite: &Suite) -> Result<(f64, Vec<f64>)> {
    let alpha0 = suite.certificate()?.alpha0;
    let grid = suite.network.config.tests.tail_multiples.iter().map(|k| k * alpha0).collect();
    Ok((alpha0, grid))
}

fn stochastic_boundedness(suite: &Suite, seed: u64) -> Check {
    let exp = &suite.network;
    let t = &exp.config.tests;
    let (alpha0, grid) = tail_grid(suite)?;
    let rep = stochastic_boundedness_test(&exp.model, &exp.dist, &grid, &t.boundedness_times, suite.trials, seed, t.epsilon_tail)?;
    let tails = rep
        .rows
        .iter()
        .map(|r| format!("{:.3}", r.tail))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((
        rep.passed,
        format!(
            "alpha0 {alpha0:.4}; tails [{tails}] over J = {:?}·alpha0; monotone {}, final < {} {}, N-scaled bound {}",
            t.tail_multiples, rep.monotone, t.epsilon_tail, rep.final_tail_below, rep.scaled_bound_holds
        ),
    ))
}

/// Blinds every sensor of `model`.
pub fn blinded(model: &SystemModel) -> Result<SystemModel> {
    let m = model.state_dim();
    let mut out = model.clone();
    for n in 0..model.num_sensors() {
        out = out.with_sensor(n, SensorModel::blind(m))?;
    }
    Ok(out)
}

fn negative_control(suite: &Suite, seed: u64) -> Check {
    let exp = &suite.network;
    let model = blinded(&exp.model)?;
    let (_, grid) = tail_grid(suite)?;
    let times = [50, 100, 200];
    let trials = suite.trials.min(500);
    let rep = stochastic_boundedness_test(&model, &exp.dist, &grid, &times, trials, seed, exp.config.tests.epsilon_tail)?;
    let medians: Vec<f64> = rep.medians.iter().map(|m| m.median_norm).collect();
    let growing = medians.windows(2).all(|w| w[1] > w[0]);
    let last = *medians.last().expect("nonempty grid");
    let passed = last > 1e6 && growing && !rep.passed;
    Ok((
        passed,
        format!(
            "medians {:?} at t = {times:?}; growing {growing}; boundedness test passed {}",
            medians.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>(),
            rep.passed
        ),
    ))
}

fn pathwise_majorization(suite: &Suite, traces: usize, seed: u64) -> Check {
    let exp = &suite.network;
    let t = &exp.config.tests;
    let mut checks = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..traces as u64 {
        let rep = coupled_initial_condition_bound(
            &exp.model,
            &exp.dist,
            t.majorization_start,
            t.majorization_horizon,
            trial_seed(seed, i),
            t.psd_tolerance,
        )?;
        checks += rep.checks;
        violations += rep.violations;
        worst = worst.min(rep.worst_relative_gap);
    }
    Ok((
        violations == 0,
        format!(
            "{checks} ordered pairs over {traces} traces (s = {}, T = {}); {violations} violations; worst gap {worst:.3e}",
            t.majorization_start, t.majorization_horizon
        ),
    ))
}

/// Transition frequencies of one particle over `steps` slots against the
/// mean matrix, and end-point marginals of independent stationary chains
/// against the uniform law, all within 3σ binomial bands.
pub fn particle_statistics(dist: &GossipDistribution, steps: usize, seed: u64) -> Check {
    let abar = dist.mean_matrix();
    let n = abar.nrows();
    let trace = NetworkTrace::sample(dist, steps, seed);
    let mut counts = DMatrix::<f64>::zeros(n, n);
    let mut pos = vec![0usize; n];
    for (k, p) in pos.iter_mut().enumerate() {
        *p = k;
    }
    for a in &trace.matchings {
        let next = advance_particles(&pos, a);
        counts[(pos[0], next[0])] += 1.0;
        pos = next;
    }
    let mut worst_z: f64 = 0.0;
    let mut bad = 0;
    for i in 0..n {
        let row: f64 = counts.row(i).sum();
        for j in 0..n {
            let p = abar[(i, j)];
            if row == 0.0 {
                continue;
            }
            let phat = counts[(i, j)] / row;
            let sigma = (p * (1.0 - p) / row).sqrt();
            if sigma == 0.0 {
                if phat != p {
                    bad += 1;
                }
                continue;
            }
            let z = (phat - p).abs() / sigma;
            worst_z = worst_z.max(z);
            if z > 3.0 {
                bad += 1;
            }
        }
    }

    let kernel = TransitionKernel::new(abar)?;
    let chains = steps / 10;
    let mut rng = stream_rng(seed, crate::seed::CHAIN_STREAM);
    let mut hist = vec![0usize; n];
    for _ in 0..chains {
        let mut s = rng.random_range(0..n);
        for _ in 0..10 {
            s = kernel.step(s, &mut rng);
        }
        hist[s] += 1;
    }
    let expect = chains as f64 / n as f64;
    let sigma = (chains as f64 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64)).sqrt();
    let worst_marginal = hist
        .iter()
        .map(|&h| if sigma > 0.0 { (h as f64 - expect).abs() / sigma } else { 0.0 })
        .fold(0.0, f64::max);
    Ok((
        bad == 0 && worst_marginal <= 3.0,
        format!(
            "{steps} steps: worst transition z {worst_z:.2}, {bad} outside 3σ; {chains} stationary chains: worst marginal z {worst_marginal:.2}"
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_oracle_scalar_fixed_point() {
        // F = 1, Q = 1, C = 1, R = 1: the predictor Riccati fixed point is the golden ratio.
        let one = DMatrix::from_element(1, 1, 1.0);
        let ps = textbook_kalman_covariances(&one, &one, &one, &one, &one, 60).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((ps[60][(0, 0)] - golden).abs() < 1e-12);
    }

    #[test]
    fn cheap_criteria_pass_on_reference() {
        let suite = Suite::reference();
        for id in [1, 2, 4, 9] {
            let out = suite.run_criterion(id);
            assert!(out.passed, "{}", out.line());
        }
    }

    #[test]
    fn unknown_criterion_fails() {
        let out = Suite::reference().run_criterion(42);
        assert!(!out.passed);
    }

    #[test]
    fn blinded_model_has_no_certificate() {
        let mut suite = Suite::reference();
        suite.network.model = blinded(&suite.network.model).unwrap();
        assert!(suite.certificate().is_err());
    }
}
