//! Monte-Carlo laboratory for the invariant measure of the switched
//! Riccati recursion, and the statistical checks built on it.
//!
//! Distributions over PSD matrices are compared through a panel of scalar
//! projections (spectral norm, trace, extreme eigenvalues, fixed quadratic
//! forms) using the two-sample Kolmogorov–Smirnov statistic. Convergence
//! of every such continuous functional is implied by weak convergence, so a
//! large KS distance on any projection refutes it; small distances are
//! evidence, not proof.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GikfError, Result};
use crate::matrix::{lyapunov_step, psd_gap, riccati_step, spectral_norm, PsdMatrix, SystemModel};
use crate::filter::final_particle_view;
use crate::network::{advance_particles, check_connectivity, initial_positions, GossipDistribution, NetworkTrace, TransitionKernel};
use crate::seed::{self, stream_rng, trial_seed};

/// Two-sided 99% standard-normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

const PROJECTION_SEED: u64 = 0x0051_DE5E;

/// Scalar functional of a PSD matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    SpectralNorm,
    Trace,
    MaxEigenvalue,
    MinEigenvalue,
    QuadraticForm(Vec<f64>),
}

impl Projection {
    pub fn apply(&self, x: &PsdMatrix) -> f64 {
        match self {
            Projection::SpectralNorm => spectral_norm(x),
            Projection::Trace => x.trace(),
            Projection::MaxEigenvalue => x.max_eigenvalue(),
            Projection::MinEigenvalue => x.min_eigenvalue(),
            Projection::QuadraticForm(v) => x.quadratic_form(&DVector::from_column_slice(v)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Projection::SpectralNorm => "spectral_norm".into(),
            Projection::Trace => "trace".into(),
            Projection::MaxEigenvalue => "max_eigenvalue".into(),
            Projection::MinEigenvalue => "min_eigenvalue".into(),
            Projection::QuadraticForm(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
                format!("quadratic_form[{}]", parts.join(","))
            }
        }
    }
}

/// Spectral norm, trace, max eigenvalue and `min(2, dim)` quadratic forms
/// along fixed pseudo-random unit vectors.
pub fn default_projections(dim: usize) -> Vec<Projection> {
    let mut out = vec![Projection::SpectralNorm, Projection::Trace, Projection::MaxEigenvalue];
    let mut rng = stream_rng(PROJECTION_SEED, 0);
    for _ in 0..dim.min(2) {
        let v = DVector::<f64>::from_fn(dim, |_, _| rng.sample(StandardNormal));
        let v = v.normalize();
        out.push(Projection::QuadraticForm(v.iter().copied().collect()));
    }
    out
}

/// A finite sample of PSD matrices of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    samples: Vec<PsdMatrix>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<PsdMatrix>) -> Result<Self> {
        let dim = samples
            .first()
            .ok_or_else(|| GikfError::InsufficientSamples("empirical measure needs samples".into()))?
            .dim();
        if samples.iter().any(|s| s.dim() != dim) {
            return Err(GikfError::DimensionMismatch {
                context: "empirical measure samples",
                expected: format!("{dim}x{dim}"),
                found: "mixed dimensions".into(),
            });
        }
        Ok(EmpiricalMeasure { samples })
    }

    pub fn samples(&self) -> &[PsdMatrix] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn project(&self, projection: &Projection) -> Vec<f64> {
        self.samples.iter().map(|s| projection.apply(s)).collect()
    }

    /// Fraction of samples satisfying `pred`.
    pub fn probability(&self, pred: impl Fn(&PsdMatrix) -> bool) -> f64 {
        self.samples.iter().filter(|s| pred(s)).count() as f64 / self.samples.len() as f64
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`, ties
/// handled by advancing both samples past equal values together.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(GikfError::InsufficientSamples("KS statistic of an empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at significance `alpha`,
/// `√(-ln(α/2)/2) · √((n+m)/(nm))`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn distribution_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure, projection: &Projection) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GikfError::DimensionMismatch {
            context: "distribution distance",
            expected: format!("{0}x{0}", a.dim()),
            found: format!("{0}x{0}", b.dim()),
        });
    }
    ks_statistic(&a.project(projection), &b.project(projection))
}

/// 99% margin for comparing two binomial proportions, plus one count of
/// slack for proportions at 0 or 1.
pub fn binomial_margin(p1: f64, n1: usize, p2: f64, n2: usize) -> f64 {
    let var = p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64;
    Z99 * var.sqrt() + 1.0 / n1.min(n2) as f64
}

/// Distribution of the initial covariance `P̃(0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMeasure {
    PointMass(PsdMatrix),
    /// Uniform over the listed matrices.
    Samples(Vec<PsdMatrix>),
}

impl InitMeasure {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PsdMatrix {
        match self {
            InitMeasure::PointMass(p) => p.clone(),
            InitMeasure::Samples(s) => s[rng.random_range(0..s.len())].clone(),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            InitMeasure::PointMass(p) => Some(p.dim()),
            InitMeasure::Samples(s) => s.first().map(PsdMatrix::dim),
        }
    }
}

/// The stationary switching chain (uniform start, kernel `Ā`) and the law of
/// `P̃(0)`, drawn independently of the chain.
#[derive(Debug, Clone)]
pub struct AuxiliaryChainSpec {
    kernel: TransitionKernel,
    init: InitMeasure,
}

impl AuxiliaryChainSpec {
    pub fn new(abar: DMatrix<f64>, init: InitMeasure) -> Result<Self> {
        if !check_connectivity(&abar).holds() {
            return Err(GikfError::InvalidArgument(
                "mean matrix must be irreducible and aperiodic".into(),
            ));
        }
        if let InitMeasure::Samples(s) = &init {
            if s.is_empty() {
                return Err(GikfError::InsufficientSamples("empty initial sample set".into()));
            }
        }
        Ok(AuxiliaryChainSpec {
            kernel: TransitionKernel::new(abar)?,
            init,
        })
    }

    pub fn from_distribution(dist: &GossipDistribution, init: InitMeasure) -> Result<Self> {
        Self::new(dist.mean_matrix(), init)
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }
}

/// One auxiliary trajectory: the switching nodes `p̃(0..T)` and the iterates
/// `P̃(0) … P̃(T)`.
pub fn auxiliary_path(
    model: &SystemModel,
    spec: &AuxiliaryChainSpec,
    horizon: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<PsdMatrix>)> {
    check_chain(model, spec)?;
    let mut chain_rng = stream_rng(seed, seed::CHAIN_STREAM);
    let mut init_rng = stream_rng(seed, seed::INIT_STREAM);
    let n = spec.kernel.num_states();
    let mut node = chain_rng.random_range(0..n);
    let mut p = spec.init.draw(&mut init_rng);
    let mut nodes = Vec::with_capacity(horizon);
    let mut iterates = Vec::with_capacity(horizon + 1);
    iterates.push(p.clone());
    for t in 0..horizon {
        if t > 0 {
            node = spec.kernel.step(node, &mut chain_rng);
        }
        nodes.push(node);
        p = riccati_step(model, node, &p)?;
        iterates.push(p.clone());
    }
    Ok((nodes, iterates))
}

fn check_chain(model: &SystemModel, spec: &AuxiliaryChainSpec) -> Result<()> {
    if spec.kernel.num_states() != model.num_sensors() {
        return Err(GikfError::DimensionMismatch {
            context: "chain states vs sensor count",
            expected: model.num_sensors().to_string(),
            found: spec.kernel.num_states().to_string(),
        });
    }
    if spec.init.dim() != Some(model.state_dim()) {
        return Err(GikfError::DimensionMismatch {
            context: "initial measure vs state dimension",
            expected: model.state_dim().to_string(),
            found: format!("{:?}", spec.init.dim()),
        });
    }
    Ok(())
}

// P̃ at each requested time for one trial.
fn auxiliary_trial(
    model: &SystemModel,
    spec: &AuxiliaryChainSpec,
    times: &[usize],
    seed: u64,
) -> Result<Vec<PsdMatrix>> {
    let horizon = times.iter().copied().max().unwrap_or(0);
    let mut chain_rng = stream_rng(seed, seed::CHAIN_STREAM);
    let mut init_rng = stream_rng(seed, seed::INIT_STREAM);
    let n = spec.kernel.num_states();
    let mut node = chain_rng.random_range(0..n);
    let mut p = spec.init.draw(&mut init_rng);
    let mut at = vec![None; times.len()];
    for t in 0..=horizon {
        for (k, &s) in times.iter().enumerate() {
            if s == t {
                at[k] = Some(p.clone());
            }
        }
        if t == horizon {
            break;
        }
        if t > 0 {
            node = spec.kernel.step(node, &mut chain_rng);
        }
        p = riccati_step(model, node, &p)?;
    }
    Ok(at.into_iter().map(|p| p.expect("every time visited")).collect())
}

/// Empirical measures of `P̃(t)` at each of `times`, one sample per trial.
pub fn run_auxiliary_chain_at(
    model: &SystemModel,
    spec: &AuxiliaryChainSpec,
    times: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<EmpiricalMeasure>> {
    check_chain(model, spec)?;
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|i| auxiliary_trial(model, spec, times, trial_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    transpose_samples(per_trial, times.len())
}

/// Empirical measure of `P̃(T)` from `trials` independent chains.
pub fn run_auxiliary_chain(
    model: &SystemModel,
    spec: &AuxiliaryChainSpec,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    Ok(run_auxiliary_chain_at(model, spec, &[horizon], trials, seed)?.remove(0))
}

fn transpose_samples(per_trial: Vec<Vec<PsdMatrix>>, k: usize) -> Result<Vec<EmpiricalMeasure>> {
    let mut cols: Vec<Vec<PsdMatrix>> = vec![Vec::with_capacity(per_trial.len()); k];
    for row in per_trial {
        for (c, p) in cols.iter_mut().zip(row) {
            c.push(p);
        }
    }
    cols.into_iter().map(EmpiricalMeasure::new).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDistance {
    pub projection: String,
    pub distance: f64,
    pub threshold: f64,
    pub passed: bool,
}

fn compare_panel(a: &EmpiricalMeasure, b: &EmpiricalMeasure, threshold: f64) -> Result<Vec<ProjectionDistance>> {
    default_projections(a.dim())
        .iter()
        .map(|p| {
            let distance = distribution_distance(a, b, p)?;
            Ok(ProjectionDistance {
                projection: p.name(),
                distance,
                threshold,
                passed: distance < threshold,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitPairReport {
    pub first: usize,
    pub second: usize,
    pub distances: Vec<ProjectionDistance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConsensusReport {
    pub horizon: usize,
    pub trials: usize,
    pub pairs: Vec<InitPairReport>,
    pub passed: bool,
}

/// Runs the auxiliary chain from each initial covariance and checks that
/// the time-`T` laws agree on every projection (KS distance below
/// `threshold`). Each initial condition gets an independent seed.
pub fn weak_consensus_test(
    model: &SystemModel,
    dist: &GossipDistribution,
    inits: &[PsdMatrix],
    horizon: usize,
    trials: usize,
    seed: u64,
    threshold: f64,
) -> Result<WeakConsensusReport> {
    if inits.len() < 2 {
        return Err(GikfError::InvalidArgument("need at least two initial conditions".into()));
    }
    let abar = dist.mean_matrix();
    let measures = inits
        .iter()
        .enumerate()
        .map(|(k, p0)| {
            let spec = AuxiliaryChainSpec::new(abar.clone(), InitMeasure::PointMass(p0.clone()))?;
            run_auxiliary_chain(model, &spec, horizon, trials, seed::splitmix64(seed ^ k as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for i in 0..measures.len() {
        for j in i + 1..measures.len() {
            pairs.push(InitPairReport {
                first: i,
                second: j,
                distances: compare_panel(&measures[i], &measures[j], threshold)?,
            });
        }
    }
    let passed = pairs.iter().all(|p| p.distances.iter().all(|d| d.passed));
    Ok(WeakConsensusReport {
        horizon,
        trials,
        pairs,
        passed,
    })
}

/// Which sensor's covariance is read at the end of each run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeRule {
    /// `q` uniform on the nodes, independent of the matchings.
    Uniform,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTimeReport {
    pub t: usize,
    pub distances: Vec<ProjectionDistance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: ProbeRule,
    pub trials: usize,
    pub critical_value: f64,
    pub times: Vec<ProbeTimeReport>,
    pub passed: bool,
}

/// Sensor covariances at the requested times along a freshly sampled trace.
fn sensor_covariances_at(
    model: &SystemModel,
    dist: &GossipDistribution,
    times: &[usize],
    seed: u64,
) -> Result<Vec<Vec<PsdMatrix>>> {
    let horizon = times.iter().copied().max().unwrap_or(0);
    let trace = NetworkTrace::sample(dist, horizon, seed);
    let mut covs = vec![model.p0().clone(); model.num_sensors()];
    let mut out = vec![Vec::new(); times.len()];
    for t in 0..=horizon {
        for (k, &s) in times.iter().enumerate() {
            if s == t {
                out[k] = covs.clone();
            }
        }
        if t < horizon {
            covs = crate::filter::covariance_step(model, &covs, &trace.matchings[t])?;
        }
    }
    Ok(out)
}

/// Compares the law of `P̂_q(t)` across GIKF runs with that of the
/// auxiliary chain started at `P̂_0`. For a uniform probe the two laws are
/// identical at every finite `t`, so each KS distance should fall below the
/// 99% two-sample critical value.
pub fn randomly_probed_sensor_test(
    model: &SystemModel,
    dist: &GossipDistribution,
    times: &[usize],
    trials: usize,
    seed: u64,
    probe: ProbeRule,
) -> Result<ProbeReport> {
    let n = model.num_sensors();
    if let ProbeRule::Fixed(q) = probe {
        model.sensor(q)?;
    }
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let q = match probe {
                ProbeRule::Uniform => stream_rng(s, seed::PROBE_STREAM).random_range(0..n),
                ProbeRule::Fixed(q) => q,
            };
            let covs = sensor_covariances_at(model, dist, times, s)?;
            Ok(covs.into_iter().map(|mut row| row.swap_remove(q)).collect())
        })
        .collect::<Result<Vec<Vec<PsdMatrix>>>>()?;
    let probed = transpose_samples(per_trial, times.len())?;

    let spec = AuxiliaryChainSpec::from_distribution(dist, InitMeasure::PointMass(model.p0().clone()))?;
    let aux = run_auxiliary_chain_at(model, &spec, times, trials, seed::splitmix64(seed ^ 0xA0C5))?;

    let critical_value = ks_critical_value(trials, trials, 0.01);
    let reports = times
        .iter()
        .zip(probed.iter().zip(&aux))
        .map(|(&t, (a, b))| {
            Ok(ProbeTimeReport {
                t,
                distances: compare_panel(a, b, critical_value)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.distances.iter().all(|d| d.passed));
    Ok(ProbeReport {
        probe,
        trials,
        critical_value,
        times: reports,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub alpha: f64,
    /// Empirical `P(‖P_n(T)‖ ≥ α)` for the tracked particle.
    pub particle_norm_tail: f64,
    /// Empirical `μ({‖X‖ ≥ α})`.
    pub invariant_norm_tail: f64,
    /// Empirical `P(P_n(T) ⪰ αI)` and `μ({X ⪰ αI})`.
    pub particle_floor_tail: f64,
    pub invariant_floor_tail: f64,
    /// Average over particles of `P(‖P_n(T)‖ ≥ α - ε)`.
    pub averaged_enlarged_tail: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub particle: usize,
    pub horizon: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub rows: Vec<DominanceRow>,
    pub passed: bool,
}

/// Checks, for each threshold `α`, that the tracked particle's tails are
/// dominated by those of the invariant-measure estimate, and that the
/// particle-averaged tail of the `ε`-enlarged set is not smaller than the
/// invariant tail, all within 99% binomial margins.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_dominance_test(
    model: &SystemModel,
    dist: &GossipDistribution,
    particle: usize,
    thresholds: &[f64],
    horizon: usize,
    trials: usize,
    seed: u64,
    epsilon: f64,
) -> Result<DominanceReport> {
    model.sensor(particle)?;
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|i| final_particle_view(model, &NetworkTrace::sample(dist, horizon, trial_seed(seed, i))))
        .collect::<Result<Vec<_>>>()?;
    let spec = AuxiliaryChainSpec::from_distribution(dist, InitMeasure::PointMass(model.p0().clone()))?;
    let mu = run_auxiliary_chain(model, &spec, horizon, trials, seed::splitmix64(seed ^ 0xD0A1))?;

    let n = model.num_sensors();
    let norms: Vec<Vec<f64>> = per_trial
        .iter()
        .map(|row| row.iter().map(spectral_norm).collect())
        .collect();
    let floors: Vec<f64> = per_trial.iter().map(|row| row[particle].min_eigenvalue()).collect();
    let frac = |count: usize| count as f64 / trials as f64;

    let rows = thresholds
        .iter()
        .map(|&alpha| {
            let particle_norm_tail = frac(norms.iter().filter(|r| r[particle] >= alpha).count());
            let particle_floor_tail = frac(floors.iter().filter(|&&f| f >= alpha).count());
            let invariant_norm_tail = mu.probability(|x| spectral_norm(x) >= alpha);
            let invariant_floor_tail = mu.probability(|x| x.min_eigenvalue() >= alpha);
            let averaged_enlarged_tail = norms
                .iter()
                .map(|r| r.iter().filter(|&&v| v >= alpha - epsilon).count())
                .sum::<usize>() as f64
                / (trials * n) as f64;
            let margin = binomial_margin(particle_norm_tail, trials, invariant_norm_tail, trials);
            let floor_margin = binomial_margin(particle_floor_tail, trials, invariant_floor_tail, trials);
            let passed = particle_norm_tail <= invariant_norm_tail + margin
                && particle_floor_tail <= invariant_floor_tail + floor_margin
                && averaged_enlarged_tail >= invariant_norm_tail - margin;
            DominanceRow {
                alpha,
                particle_norm_tail,
                invariant_norm_tail,
                particle_floor_tail,
                invariant_floor_tail,
                averaged_enlarged_tail,
                margin,
                passed,
            }
        })
        .collect::<Vec<_>>();
    let passed = rows.iter().all(|r| r.passed);
    Ok(DominanceReport {
        particle,
        horizon,
        trials,
        epsilon,
        rows,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub j: f64,
    /// `sup_{t, n} P(‖P̂ⁿ_t‖ ≥ J)`.
    pub tail: f64,
    /// Worst excess of a sensor tail over `N` times the auxiliary tail,
    /// net of the binomial margin; nonpositive when the bound holds.
    pub worst_scaled_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub t: usize,
    pub median_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub trials: usize,
    pub epsilon_tail: f64,
    pub rows: Vec<TailRow>,
    pub medians: Vec<MedianRow>,
    pub monotone: bool,
    pub final_tail_below: bool,
    pub scaled_bound_holds: bool,
    pub passed: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Tail map `J ↦ sup_t P(‖P̂ⁿ_t‖ ≥ J)` over the time grid. Passes when the
/// map is nonincreasing in `J`, falls below `epsilon_tail` at the largest
/// `J`, and every sensor's tail stays below `N` times the auxiliary tail up
/// to binomial margins.
pub fn stochastic_boundedness_test(
    model: &SystemModel,
    dist: &GossipDistribution,
    j_grid: &[f64],
    t_grid: &[usize],
    trials: usize,
    seed: u64,
    epsilon_tail: f64,
) -> Result<BoundednessReport> {
    if j_grid.is_empty() || t_grid.is_empty() {
        return Err(GikfError::InvalidArgument("empty J or t grid".into()));
    }
    let n = model.num_sensors();
    // norms[trial][k][sensor] at t_grid[k]
    let norms = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let covs = sensor_covariances_at(model, dist, t_grid, trial_seed(seed, i))?;
            Ok(covs
                .iter()
                .map(|row| row.iter().map(spectral_norm).collect::<Vec<_>>())
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = AuxiliaryChainSpec::from_distribution(dist, InitMeasure::PointMass(model.p0().clone()))?;
    let aux = run_auxiliary_chain_at(model, &spec, t_grid, trials, seed::splitmix64(seed ^ 0xB0B0))?;
    let aux_norms: Vec<Vec<f64>> = aux.iter().map(|m| m.project(&Projection::SpectralNorm)).collect();

    let frac = |count: usize| count as f64 / trials as f64;
    let rows: Vec<TailRow> = j_grid
        .iter()
        .map(|&j| {
            let mut tail: f64 = 0.0;
            let mut worst = f64::NEG_INFINITY;
            for k in 0..t_grid.len() {
                let aux_tail = frac(aux_norms[k].iter().filter(|&&v| v >= j).count());
                for s in 0..n {
                    let p = frac(norms.iter().filter(|r| r[k][s] >= j).count());
                    tail = tail.max(p);
                    let margin = binomial_margin(p, trials, aux_tail, trials) * n as f64;
                    worst = worst.max(p - (n as f64 * aux_tail).min(1.0) - margin);
                }
            }
            TailRow {
                j,
                tail,
                worst_scaled_excess: worst,
            }
        })
        .collect();
    let medians = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| MedianRow {
            t,
            median_norm: median(norms.iter().flat_map(|r| r[k].iter().copied()).collect()),
        })
        .collect();

    let mut sorted: Vec<&TailRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.j.total_cmp(&b.j));
    let monotone = sorted.windows(2).all(|w| w[1].tail <= w[0].tail);
    let final_tail_below = sorted.last().is_some_and(|r| r.tail < epsilon_tail);
    let scaled_bound_holds = rows.iter().all(|r| r.worst_scaled_excess <= 0.0);
    Ok(BoundednessReport {
        trials,
        epsilon_tail,
        rows,
        medians,
        monotone,
        final_tail_below,
        scaled_bound_holds,
        passed: monotone && final_tail_below && scaled_bound_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationReport {
    pub start: usize,
    pub horizon: usize,
    pub checks: usize,
    pub violations: usize,
    /// Most negative `λ_min(P^s_n(t) - P_n(t))` relative to `max(1, ‖P^s_n(t)‖)`.
    pub worst_relative_gap: f64,
    pub passed: bool,
}

/// Runs each particle chain both from `P̂_0` and, from time `s`, from the
/// Lyapunov majorant `f_0^s(P̂_0)` along the same switching path, and checks
/// `P_n(t) ⪯ P^s_n(t)` for `t ∈ [s, T]` at relative tolerance `tol`.
pub fn coupled_initial_condition_bound(
    model: &SystemModel,
    dist: &GossipDistribution,
    start: usize,
    horizon: usize,
    seed: u64,
    tol: f64,
) -> Result<MajorizationReport> {
    if start > horizon {
        return Err(GikfError::InvalidArgument(format!(
            "coupling start {start} exceeds horizon {horizon}"
        )));
    }
    let n = model.num_sensors();
    let trace = NetworkTrace::sample(dist, horizon, seed);
    let mut majorant = model.p0().clone();
    for _ in 0..start {
        majorant = lyapunov_step(model, &majorant)?;
    }

    let mut positions = initial_positions(n);
    let mut ps = vec![model.p0().clone(); n];
    let mut upper: Vec<PsdMatrix> = Vec::new();
    let mut checks = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for t in 0..=horizon {
        if t == start {
            upper = vec![majorant.clone(); n];
        }
        if t >= start {
            for k in 0..n {
                let scale = spectral_norm(&upper[k]).max(1.0);
                let gap = psd_gap(&ps[k], &upper[k])? / scale;
                worst = worst.min(gap);
                checks += 1;
                if gap < -tol {
                    violations += 1;
                }
            }
        }
        if t == horizon {
            break;
        }
        positions = advance_particles(&positions, &trace.matchings[t]);
        for k in 0..n {
            ps[k] = riccati_step(model, positions[k], &ps[k])?;
            if t >= start {
                upper[k] = riccati_step(model, positions[k], &upper[k])?;
            }
        }
    }
    Ok(MajorizationReport {
        start,
        horizon,
        checks,
        violations,
        worst_relative_gap: worst,
        passed: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SensorModel;
    use crate::network::{Graph, Matching};

    #[test]
    fn ks_basic_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        // Atoms shared by both samples: F_a = (.5, 1), F_b = (.25, 1) at {0, 1}.
        assert_eq!(ks_statistic(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0]).unwrap(), 0.25);
        assert!(ks_statistic(&[], &a).is_err());
    }

    #[test]
    fn ks_matches_brute_force() {
        // sup over all sample points of |F_a(x) - F_b(x)|.
        let mut rng = stream_rng(77, 0);
        for _ in 0..50 {
            let a: Vec<f64> = (0..rng.random_range(1..30)).map(|_| (rng.random_range(0..8)) as f64).collect();
            let b: Vec<f64> = (0..rng.random_range(1..30)).map(|_| (rng.random_range(0..8)) as f64).collect();
            let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
            let brute = a
                .iter()
                .chain(&b)
                .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
                .fold(0.0, f64::max);
            assert!((ks_statistic(&a, &b).unwrap() - brute).abs() < 1e-15);
        }
    }

    #[test]
    fn ks_critical_value_reference() {
        // 1.628 · √(2/10⁴) ≈ 0.023
        let c = ks_critical_value(10_000, 10_000, 0.01);
        assert!((c - 0.02302).abs() < 1e-4, "{c}");
    }

    fn scalar_network(n: usize, f: f64, observer: usize) -> (SystemModel, GossipDistribution) {
        let sensors = (0..n)
            .map(|k| {
                let c = if k == observer { 1.0 } else { 0.0 };
                SensorModel::new(DMatrix::from_element(1, 1, c), PsdMatrix::identity(1)).unwrap()
            })
            .collect();
        let model = SystemModel::new(
            DMatrix::from_element(1, 1, f),
            PsdMatrix::identity(1),
            PsdMatrix::identity(1),
            sensors,
        )
        .unwrap();
        let pairs: Vec<Matching> = (1..n).map(|i| Matching::from_pairs(n, &[(i - 1, i)]).unwrap()).collect();
        let k = pairs.len();
        let dist = GossipDistribution::explicit(Graph::path(n).unwrap(), pairs, vec![1.0 / k as f64; k]).unwrap();
        (model, dist)
    }

    #[test]
    fn single_node_chain_is_deterministic() {
        let model = SystemModel::new(
            DMatrix::from_element(1, 1, 1.3),
            PsdMatrix::identity(1),
            PsdMatrix::identity(1),
            vec![SensorModel::new(DMatrix::from_element(1, 1, 1.0), PsdMatrix::identity(1)).unwrap()],
        )
        .unwrap();
        let spec = AuxiliaryChainSpec::new(DMatrix::identity(1, 1), InitMeasure::PointMass(PsdMatrix::identity(1))).unwrap();
        let mu = run_auxiliary_chain(&model, &spec, 7, 20, 1).unwrap();
        let mut expect = PsdMatrix::identity(1);
        for _ in 0..7 {
            expect = riccati_step(&model, 0, &expect).unwrap();
        }
        assert!(mu.samples().iter().all(|s| *s == expect));
    }

    #[test]
    fn zero_horizon_returns_initial_samples() {
        let (model, dist) = scalar_network(3, 1.2, 1);
        let init = vec![PsdMatrix::identity(1), PsdMatrix::scaled_identity(1, 5.0).unwrap()];
        let spec = AuxiliaryChainSpec::from_distribution(&dist, InitMeasure::Samples(init.clone())).unwrap();
        let mu = run_auxiliary_chain(&model, &spec, 0, 50, 3).unwrap();
        assert!(mu.samples().iter().all(|s| init.contains(s)));
    }

    #[test]
    fn stable_chain_is_bounded_by_lyapunov_fixed_point() {
        let (model, dist) = scalar_network(3, 0.8, 1);
        // Lyapunov fixed point q / (1 - f²) and the iterate from P̂_0 both
        // dominate every switched Riccati iterate.
        let fixed: f64 = 1.0 / (1.0 - 0.64);
        let bound = fixed.max(1.0);
        let spec = AuxiliaryChainSpec::from_distribution(&dist, InitMeasure::PointMass(PsdMatrix::identity(1))).unwrap();
        let mu = run_auxiliary_chain(&model, &spec, 60, 500, 5).unwrap();
        assert!(mu.project(&Projection::SpectralNorm).iter().all(|&v| v <= bound + 1e-12));
    }

    #[test]
    fn auxiliary_path_is_reproducible() {
        let (model, dist) = scalar_network(3, 1.2, 1);
        let spec = AuxiliaryChainSpec::from_distribution(&dist, InitMeasure::PointMass(PsdMatrix::identity(1))).unwrap();
        let a = auxiliary_path(&model, &spec, 40, 9).unwrap();
        let b = auxiliary_path(&model, &spec, 40, 9).unwrap();
        assert_eq!(a, b);
        let (nodes, iterates) = a;
        assert_eq!(nodes.len(), 40);
        assert_eq!(iterates.len(), 41);
    }

    #[test]
    fn weak_consensus_zero_horizon_separates_point_masses() {
        let (model, dist) = scalar_network(3, 1.2, 1);
        let inits = [PsdMatrix::zeros(1), PsdMatrix::scaled_identity(1, 100.0).unwrap()];
        let rep = weak_consensus_test(&model, &dist, &inits, 0, 100, 1, 0.05).unwrap();
        assert!(!rep.passed);
        assert!(rep.pairs[0].distances.iter().all(|d| d.distance == 1.0));

        let same = [PsdMatrix::identity(1), PsdMatrix::identity(1)];
        let rep = weak_consensus_test(&model, &dist, &same, 10, 2000, 1, 0.05).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn majorization_with_zero_start_is_tight() {
        let (model, dist) = scalar_network(3, 1.2, 1);
        let rep = coupled_initial_condition_bound(&model, &dist, 0, 30, 4, 1e-9).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.worst_relative_gap, 0.0);
        assert_eq!(rep.checks, 31 * 3);
        assert!(coupled_initial_condition_bound(&model, &dist, 40, 30, 4, 1e-9).is_err());
    }

    #[test]
    fn dominance_trivial_thresholds() {
        let (model, dist) = scalar_network(3, 1.2, 1);
        let rep = stochastic_dominance_test(&model, &dist, 0, &[0.0, 1e12], 50, 500, 2, 1e-6).unwrap();
        let lo = &rep.rows[0];
        assert_eq!((lo.particle_norm_tail, lo.invariant_norm_tail), (1.0, 1.0));
        let hi = &rep.rows[1];
        assert_eq!((hi.particle_norm_tail, hi.invariant_norm_tail), (0.0, 0.0));
        assert!(rep.passed);
    }

    #[test]
    fn measure_rejects_empty_and_mixed() {
        assert!(EmpiricalMeasure::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![PsdMatrix::identity(1), PsdMatrix::identity(2)]).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
