//! Weak-detectability certificates.
//!
//! A certificate is a walk `(n_1, …, n_ℓ)` on the positive entries of the
//! mean matrix that visits every node and whose observability Grammian
//! `Σ (F^{i-1})ᵀ C_{n_i}ᵀ C_{n_i} F^{i-1}` is invertible, together with a
//! constant `α₀` such that the composed Riccati map along the walk never
//! leaves `[0, α₀ I]`, whatever its input.
//!
//! `α₀` is the exact error covariance of a suboptimal linear predictor that
//! uses only the `ℓ` observations collected along the walk. Because that
//! predictor ignores the initial state, its error is a fixed linear map of
//! the process and measurement noises, and the optimal (Kalman) predictor
//! can only do better.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GikfError, Result};
use crate::matrix::{riccati_step, spd_factor, symmetrize, PsdMatrix, SystemModel};
use crate::network::check_connectivity;

/// Relative threshold on the minimum eigenvalue of a Grammian,
/// `tol_inv = INV_REL_TOL * (1 + trace)`.
pub const INV_REL_TOL: f64 = 1e-8;

pub fn tol_inv(g: &PsdMatrix) -> f64 {
    INV_REL_TOL * (1.0 + g.trace())
}

/// `𝒢 = Σ_n C_nᵀ C_n`.
pub fn network_grammian(model: &SystemModel) -> PsdMatrix {
    let m = model.state_dim();
    let mut g = DMatrix::zeros(m, m);
    for s in model.sensors() {
        g += s.c().transpose() * s.c();
    }
    PsdMatrix::from_operator(g)
}

fn check_walk(model: &SystemModel, walk: &[usize]) -> Result<()> {
    if walk.is_empty() {
        return Err(GikfError::InvalidWalk("walk is empty".into()));
    }
    if let Some(&bad) = walk.iter().find(|&&n| n >= model.num_sensors()) {
        return Err(GikfError::InvalidWalk(format!(
            "node {bad} outside 0..{}",
            model.num_sensors()
        )));
    }
    Ok(())
}

fn walk_grammian_weighted(model: &SystemModel, walk: &[usize], noise_weighted: bool) -> Result<DMatrix<f64>> {
    check_walk(model, walk)?;
    let m = model.state_dim();
    let mut g = DMatrix::zeros(m, m);
    let mut fpow = DMatrix::identity(m, m);
    for &n in walk {
        let s = model.sensor(n)?;
        let cf = s.c() * &fpow;
        let term = if noise_weighted {
            let chol = spd_factor(s.r().as_matrix()).ok_or(GikfError::SingularInnovation { sensor: n })?;
            cf.transpose() * chol.solve(&cf)
        } else {
            cf.transpose() * &cf
        };
        g += term;
        fpow = model.f() * fpow;
    }
    Ok(symmetrize(&g))
}

/// Observability Grammian along a walk,
/// `Σ_i (F^{i-1})ᵀ C_{n_i}ᵀ C_{n_i} F^{i-1}`.
pub fn walk_grammian(model: &SystemModel, walk: &[usize]) -> Result<PsdMatrix> {
    walk_grammian_weighted(model, walk, false).map(PsdMatrix::from_operator)
}

/// Grammian weighted by the measurement noise,
/// `Σ_i (F^{i-1})ᵀ C_{n_i}ᵀ R_{n_i}⁻¹ C_{n_i} F^{i-1}`.
pub fn noise_weighted_walk_grammian(model: &SystemModel, walk: &[usize]) -> Result<PsdMatrix> {
    walk_grammian_weighted(model, walk, true).map(PsdMatrix::from_operator)
}

/// `g_w(X) = f_{n_ℓ} ∘ … ∘ f_{n_1}(X)`.
pub fn compose_along_walk(model: &SystemModel, walk: &[usize], x: &PsdMatrix) -> Result<PsdMatrix> {
    check_walk(model, walk)?;
    let mut p = x.clone();
    for &n in walk {
        p = riccati_step(model, n, &p)?;
    }
    Ok(p)
}

/// Error covariance of the walk-based suboptimal predictor of `x_{ℓ+1}`,
///
/// `x̄ = F^ℓ G̃⁻¹ Σ_t (F^{t-1})ᵀ C_tᵀ R_t⁻¹ y_t`.
///
/// The error is `Σ_s B_s w_s - Σ_t D_t v_t` with
/// `D_t = F^ℓ G̃⁻¹ (F^{t-1})ᵀ C_tᵀ R_t⁻¹` and
/// `B_s = F^{ℓ-s} - F^ℓ G̃⁻¹ Σ_{t>s} (F^{t-1})ᵀ C_tᵀ R_t⁻¹ C_t F^{t-1-s}`,
/// so its covariance is `Σ_s B_s Q B_sᵀ + Σ_t D_t R_t D_tᵀ`.
pub fn suboptimal_error_covariance(model: &SystemModel, walk: &[usize]) -> Result<PsdMatrix> {
    check_walk(model, walk)?;
    let m = model.state_dim();
    let len = walk.len();
    let f = model.f();

    let mut fpow = Vec::with_capacity(len + 1);
    fpow.push(DMatrix::<f64>::identity(m, m));
    for k in 0..len {
        fpow.push(f * &fpow[k]);
    }

    // Per position t (0-based here, i.e. t-1 in the 1-based formulas):
    // a_t = (F^{t})ᵀ C_tᵀ R_t⁻¹ (m × obs_dim).
    let mut a = Vec::with_capacity(len);
    for (t, &n) in walk.iter().enumerate() {
        let s = model.sensor(n)?;
        let chol = spd_factor(s.r().as_matrix()).ok_or(GikfError::SingularInnovation { sensor: n })?;
        let rinv_c = chol.solve(s.c());
        a.push(fpow[t].transpose() * rinv_c.transpose());
    }

    let gt = walk_grammian_weighted(model, walk, true)?;
    let gt_chol = spd_factor(&gt).ok_or(GikfError::SingularGrammian)?;
    let h = &fpow[len] * gt_chol.inverse();

    let mut cov = DMatrix::zeros(m, m);
    for (t, &n) in walk.iter().enumerate() {
        let d = &h * &a[t];
        cov += &d * model.sensor(n)?.r().as_matrix() * d.transpose();
    }
    for s in 0..len {
        // w_s (0-based s) enters x_{t} for every later position t > s with
        // coefficient F^{t-1-s}; it enters x_{ℓ+1} with F^{ℓ-1-s}.
        let mut acc = DMatrix::zeros(m, m);
        for t in (s + 1)..len {
            let c = model.sensor(walk[t])?.c();
            acc += &a[t] * c * &fpow[t - 1 - s];
        }
        let b = &fpow[len - 1 - s] - &h * acc;
        cov += &b * model.q().as_matrix() * b.transpose();
    }
    Ok(PsdMatrix::from_operator(cov))
}

/// The uniform bound `α₀` for a walk: the largest eigenvalue of
/// [`suboptimal_error_covariance`].
pub fn alpha0_bound(model: &SystemModel, walk: &[usize]) -> Result<f64> {
    Ok(suboptimal_error_covariance(model, walk)?.max_eigenvalue())
}

/// Bound on `‖P(t)‖` when the walk's bound `α₀` held `k` steps earlier and
/// the iterate has since grown at most like the Lyapunov recursion:
/// `α^{2k} α₀ + (α^{2k} - 1)/(α² - 1) ‖Q‖`.
pub fn cycle_bound(alpha: f64, alpha0: f64, norm_q: f64, k: u64) -> f64 {
    let a2 = alpha * alpha;
    let a2k = a2.powf(k as f64);
    let geometric = if (a2 - 1.0).abs() < 1e-12 {
        k as f64
    } else {
        (a2k - 1.0) / (a2 - 1.0)
    };
    a2k * alpha0 + geometric * norm_q
}

/// The largest `k ≥ 0` with `cycle_bound(α, α₀, ‖Q‖, k) ≤ J`; 0 when even
/// `k = 0` does not qualify. Requires `α > 1`.
pub fn boundedness_horizon(alpha: f64, alpha0: f64, norm_q: f64, j: f64) -> Result<u64> {
    if !(alpha > 1.0) {
        return Err(GikfError::InvalidArgument(format!(
            "boundedness horizon needs an unstable F (‖F‖ = {alpha} ≤ 1)"
        )));
    }
    let mut k = 0u64;
    while cycle_bound(alpha, alpha0, norm_q, k + 1) <= j {
        k += 1;
    }
    Ok(k)
}

/// End positions `e` (inclusive) with `seq[e + 1 - ℓ ..= e] == walk`.
pub fn walk_occurrences(seq: &[usize], walk: &[usize]) -> Vec<usize> {
    if walk.is_empty() || seq.len() < walk.len() {
        return Vec::new();
    }
    seq.windows(walk.len())
        .enumerate()
        .filter(|(_, w)| *w == walk)
        .map(|(i, _)| i + walk.len() - 1)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkCertificate {
    pub walk: Vec<usize>,
    pub grammian: PsdMatrix,
    pub grammian_min_eigenvalue: f64,
    pub alpha0: f64,
}

impl WalkCertificate {
    pub fn len(&self) -> usize {
        self.walk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walk.is_empty()
    }
}

/// Outcome of a bounded walk search. `NotFound` is inconclusive: a longer
/// walk may still exist.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectabilitySearch {
    Found(WalkCertificate),
    NotFound { max_len: usize },
}

impl DetectabilitySearch {
    pub fn certificate(&self) -> Option<&WalkCertificate> {
        match self {
            DetectabilitySearch::Found(c) => Some(c),
            DetectabilitySearch::NotFound { .. } => None,
        }
    }
}

pub fn default_max_len(model: &SystemModel) -> usize {
    4 * model.num_sensors() * model.state_dim()
}

struct SearchState {
    walk: Vec<usize>,
    visited: Vec<bool>,
    grammian: DMatrix<f64>,
}

// Projector onto the range of `g`, rounded, as a hashable fingerprint.
fn range_fingerprint(g: &DMatrix<f64>) -> Vec<i64> {
    let m = g.nrows();
    let tol = INV_REL_TOL * (1.0 + g.trace());
    let eig = SymmetricEigen::new(g.clone());
    let mut proj = DMatrix::<f64>::zeros(m, m);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let v = eig.eigenvectors.column(k);
            proj += v * v.transpose();
        }
    }
    proj.iter().map(|x| (x * 1e6).round() as i64).collect()
}

fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 1 {
        return g[(0, 0)];
    }
    SymmetricEigen::new(g.clone()).eigenvalues.min()
}

/// Breadth-first search for the shortest covering walk with an invertible
/// Grammian.
///
/// All walks of a given length share the same future weights `F^{i-1}`, and
/// invertibility of a sum of PSD terms depends only on their ranges, so
/// `(last node, visited set, range of the Grammian)` is a sufficient search
/// state at each depth. Only one representative walk per state is kept.
pub fn find_detectability_walk(
    model: &SystemModel,
    abar: &DMatrix<f64>,
    max_len: usize,
) -> Result<DetectabilitySearch> {
    let n = model.num_sensors();
    if abar.nrows() != n || abar.ncols() != n {
        return Err(GikfError::DimensionMismatch {
            context: "mean matrix vs sensor count",
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", abar.nrows(), abar.ncols()),
        });
    }
    if !check_connectivity(abar).irreducible {
        return Err(GikfError::NotIrreducible);
    }
    let m = model.state_dim();
    let terms_at = |fpow: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
        model
            .sensors()
            .iter()
            .map(|s| {
                let cf = s.c() * fpow;
                cf.transpose() * cf
            })
            .collect()
    };

    let mut fpow = DMatrix::<f64>::identity(m, m);
    let mut terms = terms_at(&fpow);
    let mut frontier: Vec<SearchState> = (0..n)
        .map(|v| {
            let mut visited = vec![false; n];
            visited[v] = true;
            SearchState {
                walk: vec![v],
                visited,
                grammian: terms[v].clone(),
            }
        })
        .collect();

    for depth in 1..=max_len {
        for st in &frontier {
            if st.visited.iter().all(|&b| b) {
                let g = symmetrize(&st.grammian);
                let lo = min_eigenvalue(&g);
                if lo > INV_REL_TOL * (1.0 + g.trace()) {
                    let walk = st.walk.clone();
                    let alpha0 = alpha0_bound(model, &walk)?;
                    return Ok(DetectabilitySearch::Found(WalkCertificate {
                        walk,
                        grammian: PsdMatrix::from_operator(g),
                        grammian_min_eigenvalue: lo,
                        alpha0,
                    }));
                }
            }
        }
        if depth == max_len {
            break;
        }
        fpow = model.f() * fpow;
        terms = terms_at(&fpow);
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for st in &frontier {
            let last = *st.walk.last().expect("walks are non-empty");
            for v in 0..n {
                if !(abar[(last, v)] > 0.0) {
                    continue;
                }
                let grammian = &st.grammian + &terms[v];
                let mut visited = st.visited.clone();
                visited[v] = true;
                let key = (v, visited.clone(), range_fingerprint(&grammian));
                if seen.insert(key) {
                    let mut walk = st.walk.clone();
                    walk.push(v);
                    next.push(SearchState {
                        walk,
                        visited,
                        grammian,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(DetectabilitySearch::NotFound { max_len })
}
