//! Symmetric matrix algebra, the positive-semidefinite order, and the
//! Riccati and Lyapunov operators the rest of the crate is built from.
//!
//! All operator outputs are symmetrized as `(X + Xᵀ)/2` so that asymmetry
//! from floating-point rounding cannot accumulate over long recursions.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GikfError, Result};

/// Relative factor of the PSD membership tolerance, see [`tol_psd`].
pub const PSD_REL_TOL: f64 = 1e-9;

/// Cholesky pivots below this fraction of the largest diagonal entry are
/// treated as singular.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Tolerance used when checking that `x` lies in the PSD cone.
pub fn tol_psd(x: &DMatrix<f64>) -> f64 {
    PSD_REL_TOL * matrix_norm(x).max(1.0)
}

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 1 {
        return DVector::from_element(1, m[(0, 0)]);
    }
    SymmetricEigen::new(m.clone()).eigenvalues
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).min()
}

// Largest eigenvalue magnitude of a symmetric matrix.
fn matrix_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigenvalues(m).amax()
}

/// A symmetric positive-semidefinite matrix.
///
/// Construction symmetrizes the input exactly and rejects matrices whose
/// minimum eigenvalue falls below `-tol_psd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PsdMatrix(DMatrix<f64>);

impl PsdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::named(m, "matrix")
    }

    /// Like [`PsdMatrix::new`], but errors name the offending quantity.
    pub fn named(m: DMatrix<f64>, name: &str) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(GikfError::DimensionMismatch {
                context: "PsdMatrix",
                expected: "non-empty square matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GikfError::InvalidArgument(format!(
                "{name} has non-finite entries"
            )));
        }
        let s = symmetrize(&m);
        let lo = min_eig(&s);
        if lo < -tol_psd(&s) {
            return Err(GikfError::NotPsd {
                name: name.to_string(),
                min_eigenvalue: lo,
            });
        }
        Ok(PsdMatrix(s))
    }

    /// Wraps an operator output known to be PSD up to rounding. Only
    /// symmetrizes; the eigenvalue check is skipped on this hot path.
    pub(crate) fn from_operator(m: DMatrix<f64>) -> Self {
        PsdMatrix(symmetrize(&m))
    }

    pub fn zeros(dim: usize) -> Self {
        PsdMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        PsdMatrix(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim) * scale)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = sym_eigenvalues(&self.0).iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eig(&self.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        sym_eigenvalues(&self.0).max()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.0 * v))
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::new(&self.0 * s)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for PsdMatrix {
    type Error = GikfError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        PsdMatrix::from_rows(&rows)
    }
}

impl From<PsdMatrix> for Vec<Vec<f64>> {
    fn from(m: PsdMatrix) -> Self {
        m.rows()
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(GikfError::DimensionMismatch {
            context: "matrix rows",
            expected: format!("{ncols} columns"),
            found: format!("{} columns in row {bad}", rows[bad].len()),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Observation model `y = C x + v`, `v ~ N(0, R)` of a single sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    c: DMatrix<f64>,
    r: PsdMatrix,
}

impl SensorModel {
    /// `r` must be strictly positive definite; `c` may be all zero.
    pub fn new(c: DMatrix<f64>, r: PsdMatrix) -> Result<Self> {
        if c.nrows() != r.dim() {
            return Err(GikfError::DimensionMismatch {
                context: "sensor observation matrix vs noise covariance",
                expected: format!("{} rows", r.dim()),
                found: format!("{} rows", c.nrows()),
            });
        }
        let lo = r.min_eigenvalue();
        if lo <= 0.0 {
            return Err(GikfError::NotPositiveDefinite {
                name: "R".into(),
                min_eigenvalue: lo,
            });
        }
        Ok(SensorModel { c, r })
    }

    /// A sensor that sees nothing: `C = 0` with unit noise.
    pub fn blind(state_dim: usize) -> Self {
        SensorModel {
            c: DMatrix::zeros(1, state_dim),
            r: PsdMatrix::identity(1),
        }
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn r(&self) -> &PsdMatrix {
        &self.r
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_blind(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }
}

/// Signal dynamics `x_{t+1} = F x_t + w_t`, `w_t ~ N(0, Q)`, the prior
/// covariance `P0` and one observation model per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    f: DMatrix<f64>,
    q: PsdMatrix,
    p0: PsdMatrix,
    sensors: Vec<SensorModel>,
}

impl SystemModel {
    /// `Q` is only required to be PSD here so that degenerate noise-free
    /// models can be simulated; [`SystemModel::has_nondegenerate_noise`]
    /// reports whether the stabilizability premise holds.
    pub fn new(
        f: DMatrix<f64>,
        q: PsdMatrix,
        p0: PsdMatrix,
        sensors: Vec<SensorModel>,
    ) -> Result<Self> {
        let m = f.nrows();
        if f.ncols() != m || m == 0 {
            return Err(GikfError::DimensionMismatch {
                context: "F",
                expected: "non-empty square matrix".into(),
                found: format!("{}x{}", f.nrows(), f.ncols()),
            });
        }
        for (name, dim) in [("Q", q.dim()), ("P0", p0.dim())] {
            if dim != m {
                return Err(GikfError::DimensionMismatch {
                    context: if name == "Q" { "Q" } else { "P0" },
                    expected: format!("{m}x{m}"),
                    found: format!("{dim}x{dim}"),
                });
            }
        }
        if sensors.is_empty() {
            return Err(GikfError::InvalidArgument("model has no sensors".into()));
        }
        for (i, s) in sensors.iter().enumerate() {
            if s.c.ncols() != m {
                return Err(GikfError::DimensionMismatch {
                    context: "sensor observation matrix columns",
                    expected: format!("{m}"),
                    found: format!("{} (sensor {i})", s.c.ncols()),
                });
            }
        }
        Ok(SystemModel { f, q, p0, sensors })
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn q(&self) -> &PsdMatrix {
        &self.q
    }

    pub fn p0(&self) -> &PsdMatrix {
        &self.p0
    }

    pub fn sensors(&self) -> &[SensorModel] {
        &self.sensors
    }

    pub fn sensor(&self, n: usize) -> Result<&SensorModel> {
        self.sensors.get(n).ok_or(GikfError::SensorOutOfRange {
            index: n,
            count: self.sensors.len(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn has_nondegenerate_noise(&self) -> bool {
        self.q.min_eigenvalue() > 0.0
    }

    /// Same model with a different prior covariance.
    pub fn with_p0(&self, p0: PsdMatrix) -> Result<Self> {
        Self::new(self.f.clone(), self.q.clone(), p0, self.sensors.clone())
    }

    /// Same model with sensor `n` replaced.
    pub fn with_sensor(&self, n: usize, sensor: SensorModel) -> Result<Self> {
        self.sensor(n)?;
        let mut sensors = self.sensors.clone();
        sensors[n] = sensor;
        Self::new(self.f.clone(), self.q.clone(), self.p0.clone(), sensors)
    }

    fn check_dim(&self, x: &PsdMatrix) -> Result<()> {
        if x.dim() != self.state_dim() {
            return Err(GikfError::DimensionMismatch {
                context: "covariance vs state dimension",
                expected: format!("{0}x{0}", self.state_dim()),
                found: format!("{0}x{0}", x.dim()),
            });
        }
        Ok(())
    }
}

/// Riccati operator of sensor `n` together with its Kalman gain.
///
/// Returns `(f_n(X), K)` with `K = F X Cᵀ (C X Cᵀ + R)⁻¹` and
/// `f_n(X) = F X Fᵀ + Q - K (F X Cᵀ)ᵀ`.
pub fn riccati_with_gain(
    model: &SystemModel,
    n: usize,
    x: &PsdMatrix,
) -> Result<(PsdMatrix, DMatrix<f64>)> {
    model.check_dim(x)?;
    let sensor = model.sensor(n)?;
    let f = &model.f;
    let xm = x.as_matrix();
    let c = &sensor.c;

    let fx = f * xm;
    let lyap = &fx * f.transpose() + model.q.as_matrix();
    let fxct = &fx * c.transpose();
    let innovation = c * xm * c.transpose() + sensor.r.as_matrix();

    let chol = spd_factor(&innovation).ok_or(GikfError::SingularInnovation { sensor: n })?;
    // K = fxct * S^{-1}  <=>  S Kᵀ = fxctᵀ
    let gain = chol.solve(&fxct.transpose()).transpose();
    let out = lyap - &gain * fxct.transpose();
    Ok((PsdMatrix::from_operator(out), gain))
}

/// Cholesky factor of a symmetric matrix, or `None` when a pivot falls
/// below `PIVOT_REL_TOL` times the largest diagonal entry.
pub(crate) fn spd_factor(s: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let max_diag = s.diagonal().max();
    if !(max_diag > 0.0) {
        return None;
    }
    let chol = Cholesky::new(symmetrize(s))?;
    let floor = PIVOT_REL_TOL * max_diag;
    let l = chol.l_dirty();
    if (0..s.nrows()).any(|i| l[(i, i)] * l[(i, i)] < floor) {
        return None;
    }
    Some(chol)
}

/// The Riccati operator `f_n`: one-step predicted error covariance of a
/// Kalman filter using sensor `n`'s observation (0-based).
pub fn riccati_step(model: &SystemModel, n: usize, x: &PsdMatrix) -> Result<PsdMatrix> {
    riccati_with_gain(model, n, x).map(|(p, _)| p)
}

/// The Lyapunov operator `f_0(X) = F X Fᵀ + Q`.
pub fn lyapunov_step(model: &SystemModel, x: &PsdMatrix) -> Result<PsdMatrix> {
    model.check_dim(x)?;
    let f = &model.f;
    let out = f * x.as_matrix() * f.transpose() + model.q.as_matrix();
    Ok(PsdMatrix::from_operator(out))
}

/// `X ⪯ Y` up to `tol`: the minimum eigenvalue of `Y - X` is at least `-tol`.
pub fn psd_leq(x: &PsdMatrix, y: &PsdMatrix, tol: f64) -> Result<bool> {
    Ok(psd_gap(x, y)? >= -tol)
}

/// Minimum eigenvalue of `Y - X`; nonnegative iff `X ⪯ Y`.
pub fn psd_gap(x: &PsdMatrix, y: &PsdMatrix) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(GikfError::DimensionMismatch {
            context: "psd order",
            expected: format!("{0}x{0}", x.dim()),
            found: format!("{0}x{0}", y.dim()),
        });
    }
    Ok(min_eig(&symmetrize(&(y.as_matrix() - x.as_matrix()))))
}

/// Induced 2-norm, which for a PSD matrix is its largest eigenvalue.
pub fn spectral_norm(x: &PsdMatrix) -> f64 {
    matrix_norm(&x.0)
}

/// Induced 2-norm of a general square matrix (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}
