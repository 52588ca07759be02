//! Bipartite Gaussian states in shot-noise units.
//!
//! Quadratures are ordered `(x_A, p_A, x_B, p_B)`. The vacuum quadrature
//! variance `v0` is carried by every covariance matrix (default 1), so code
//! that works in another normalization converts explicitly at its boundary.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Vacuum quadrature variance in shot-noise units.
pub const DEFAULT_V0: f64 = 1.0;
/// Largest tolerated asymmetry `|σ_ij − σ_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest tolerated eigenvalue of `σ + i·v0·Ω`.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Condition number above which the Wigner density is refused.
pub const MAX_CONDITION: f64 = 1e13;

/// Mean quadrature vector `(x̄_A, p̄_A, x̄_B, p̄_B)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureMeans(pub Vector4<f64>);

impl QuadratureMeans {
    pub fn zero() -> Self {
        QuadratureMeans(Vector4::zeros())
    }

    pub fn new(values: [f64; 4]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("non-finite mean".into()));
        }
        Ok(QuadratureMeans(Vector4::from(values)))
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }
}

/// Two-mode symplectic form, block diagonal in `[[0, 1], [-1, 0]]`.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    o[(0, 1)] = 1.0;
    o[(1, 0)] = -1.0;
    o[(2, 3)] = 1.0;
    o[(3, 2)] = -1.0;
    o
}

/// Outcome of one invariant check together with the value it was judged on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The measured quantity: max asymmetry, or smallest eigenvalue.
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn first_failure(&self) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

fn physical_min_eigenvalue(m: &Matrix4<f64>, v0: f64) -> f64 {
    let omega = symplectic_form();
    let h: Matrix4<Complex64> = Matrix4::from_fn(|i, j| Complex64::new(m[(i, j)], v0 * omega[(i, j)]));
    h.symmetric_eigenvalues().min()
}

/// Checks symmetry, positive definiteness, and the uncertainty relation of a
/// 4×4 matrix.
pub fn validate_matrix(m: &Matrix4<f64>, v0: f64) -> ValidationReport {
    let mut asym: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let sym = 0.5 * (m + m.transpose());
    let min_eig = sym.symmetric_eigenvalues().min();
    let min_phys = physical_min_eigenvalue(&sym, v0);
    ValidationReport {
        checks: vec![
            InvariantCheck {
                name: "symmetric",
                passed: asym <= SYMMETRY_TOL,
                measured: asym,
                threshold: SYMMETRY_TOL,
            },
            InvariantCheck {
                name: "positive_definite",
                passed: min_eig > 0.0,
                measured: min_eig,
                threshold: 0.0,
            },
            InvariantCheck {
                name: "physical",
                passed: min_phys >= -PHYSICALITY_TOL,
                measured: min_phys,
                threshold: -PHYSICALITY_TOL,
            },
        ],
    }
}

/// Validates a covariance matrix supplied as rows of reals.
pub fn validate_covariance(rows: &[Vec<f64>], v0: f64) -> Result<ValidationReport> {
    let m = matrix_from_rows(rows)?;
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::MalformedInput(format!("vacuum variance must be positive, got {v0}")));
    }
    Ok(validate_matrix(&m, v0))
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix4<f64>> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
        return Err(Error::MalformedInput(format!(
            "expected a 4x4 matrix, got {}x{}",
            rows.len(),
            cols
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::MalformedInput("non-finite matrix entry".into()));
    }
    Ok(Matrix4::from_fn(|i, j| rows[i][j]))
}

/// Covariance matrix `σ = [[A, C], [Cᵀ, B]]` of a two-mode Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    m: Matrix4<f64>,
    v0: f64,
}

impl CovarianceMatrix {
    pub fn new(m: Matrix4<f64>, v0: f64) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("non-finite matrix entry".into()));
        }
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::MalformedInput(format!("vacuum variance must be positive, got {v0}")));
        }
        let report = validate_matrix(&m, v0);
        if let Some(fail) = report.first_failure() {
            return Err(Error::NonPhysical(format!(
                "{} check failed (measured {:.3e})",
                fail.name, fail.measured
            )));
        }
        Ok(CovarianceMatrix { m, v0 })
    }

    pub fn from_rows(rows: &[Vec<f64>], v0: f64) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?, v0)
    }

    pub fn vacuum(v0: f64) -> Self {
        CovarianceMatrix {
            m: Matrix4::identity() * v0,
            v0,
        }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn block_a(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn block_b(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn block_c(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[(i, j)];
            }
        }
        out
    }

    /// Congruence `T σ Tᵀ` for a symplectic `T`; the result is symmetrized
    /// and revalidated.
    fn congruence(&self, t: &Matrix4<f64>) -> Result<Self> {
        let out = t * self.m * t.transpose();
        Self::new(0.5 * (out + out.transpose()), self.v0)
    }
}

/// A single-mode Gaussian state `(x̄, p̄)`, 2×2 covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeState {
    means: Vector2<f64>,
    cov: Matrix2<f64>,
    v0: f64,
}

impl SingleModeState {
    pub fn new(means: [f64; 2], cov: Matrix2<f64>, v0: f64) -> Result<Self> {
        if means.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("non-finite single-mode state".into()));
        }
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > SYMMETRY_TOL {
            return Err(Error::NonPhysical("asymmetric single-mode covariance".into()));
        }
        // σ + i·v0·Ω ≥ 0 for one mode is: σ > 0 and det σ ≥ v0².
        if cov[(0, 0)] <= 0.0 || cov.determinant() < v0 * v0 * (1.0 - PHYSICALITY_TOL) {
            return Err(Error::NonPhysical(format!(
                "single-mode covariance violates the uncertainty relation (det {:.6})",
                cov.determinant()
            )));
        }
        Ok(SingleModeState {
            means: Vector2::from(means),
            cov,
            v0,
        })
    }

    pub fn vacuum(v0: f64) -> Self {
        SingleModeState {
            means: Vector2::zeros(),
            cov: Matrix2::identity() * v0,
            v0,
        }
    }

    /// Thermal state of mean photon number `nbar`: variance `v0(2n̄+1)`.
    pub fn thermal(nbar: f64, v0: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::Domain(format!("mean photon number must be >= 0, got {nbar}")));
        }
        Self::new([0.0, 0.0], Matrix2::identity() * v0 * (2.0 * nbar + 1.0), v0)
    }

    /// Coherent state `|α⟩`; quadrature means `2√v0·(Re α, Im α)`.
    pub fn coherent(alpha: Complex64, v0: f64) -> Self {
        let s = 2.0 * v0.sqrt();
        SingleModeState {
            means: Vector2::new(s * alpha.re, s * alpha.im),
            cov: Matrix2::identity() * v0,
            v0,
        }
    }

    pub fn means(&self) -> [f64; 2] {
        [self.means[0], self.means[1]]
    }

    pub fn cov(&self) -> &Matrix2<f64> {
        &self.cov
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Variances `(V_x, V_p)`.
    pub fn variances(&self) -> (f64, f64) {
        (self.cov[(0, 0)], self.cov[(1, 1)])
    }
}

/// Vacuum displaced by Gaussian noise of `depth_x`, `depth_p` vacuum standard
/// deviations: variances `(1 + d_x², 1 + d_p²)·v0`.
pub fn modulated_beam(depth_x: f64, depth_p: f64) -> Result<SingleModeState> {
    modulated_beam_v0(depth_x, depth_p, DEFAULT_V0)
}

pub fn modulated_beam_v0(depth_x: f64, depth_p: f64, v0: f64) -> Result<SingleModeState> {
    for d in [depth_x, depth_p] {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::Domain(format!("modulation depth must be finite and >= 0, got {d}")));
        }
    }
    let cov = Matrix2::new(1.0 + depth_x * depth_x, 0.0, 0.0, 1.0 + depth_p * depth_p) * v0;
    SingleModeState::new([0.0, 0.0], cov, v0)
}

/// A two-mode Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBipartiteState {
    means: QuadratureMeans,
    cov: CovarianceMatrix,
}

impl GaussianBipartiteState {
    pub fn new(means: QuadratureMeans, cov: CovarianceMatrix) -> Self {
        GaussianBipartiteState { means, cov }
    }

    pub fn zero_mean(cov: CovarianceMatrix) -> Self {
        Self::new(QuadratureMeans::zero(), cov)
    }

    pub fn vacuum(v0: f64) -> Self {
        Self::zero_mean(CovarianceMatrix::vacuum(v0))
    }

    /// Tensor product `a ⊗ b`.
    pub fn product(a: &SingleModeState, b: &SingleModeState) -> Result<Self> {
        if (a.v0 - b.v0).abs() > 0.0 {
            return Err(Error::Domain("modes use different vacuum variances".into()));
        }
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a.cov);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b.cov);
        let means = QuadratureMeans(Vector4::new(a.means[0], a.means[1], b.means[0], b.means[1]));
        Ok(Self::new(means, CovarianceMatrix::new(m, a.v0)?))
    }

    pub fn means(&self) -> &QuadratureMeans {
        &self.means
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn v0(&self) -> f64 {
        self.cov.v0
    }

    /// Reduced state of mode A or B.
    pub fn reduced(&self, mode: Mode) -> SingleModeState {
        let (off, block) = match mode {
            Mode::A => (0, self.cov.block_a()),
            Mode::B => (2, self.cov.block_b()),
        };
        SingleModeState {
            means: Vector2::new(self.means.0[off], self.means.0[off + 1]),
            cov: block,
            v0: self.cov.v0,
        }
    }

    /// Prepared evaluator for the Wigner function.
    pub fn wigner(&self) -> Result<WignerFunction> {
        WignerFunction::new(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StateDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: StateDocument = serde_json::from_str(s)?;
        doc.try_into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

/// JSON form: `{ "means": [4], "cov": [[4×4]], "v0": real }`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateDocument {
    pub means: [f64; 4],
    pub cov: Vec<Vec<f64>>,
    #[serde(default = "default_v0")]
    pub v0: f64,
}

fn default_v0() -> f64 {
    DEFAULT_V0
}

impl From<&GaussianBipartiteState> for StateDocument {
    fn from(s: &GaussianBipartiteState) -> Self {
        StateDocument {
            means: s.means.as_array(),
            cov: s.cov.rows().iter().map(|r| r.to_vec()).collect(),
            v0: s.cov.v0,
        }
    }
}

impl TryFrom<StateDocument> for GaussianBipartiteState {
    type Error = Error;

    fn try_from(doc: StateDocument) -> Result<Self> {
        let means = QuadratureMeans::new(doc.means)?;
        let cov = CovarianceMatrix::from_rows(&doc.cov, doc.v0)?;
        Ok(GaussianBipartiteState::new(means, cov))
    }
}

/// Beam splitter of amplitude transmissivity `η`; `η̃ = √(1 − η²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitter {
    eta: f64,
    eta_tilde: f64,
}

impl BeamSplitter {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!("transmissivity must lie in (0, 1], got {eta}")));
        }
        Ok(BeamSplitter {
            eta,
            eta_tilde: (1.0 - eta * eta).max(0.0).sqrt(),
        })
    }

    pub fn balanced() -> Self {
        BeamSplitter {
            eta: std::f64::consts::FRAC_1_SQRT_2,
            eta_tilde: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eta_tilde(&self) -> f64 {
        self.eta_tilde
    }

    /// `M` with `W_out(x) = W_in(M x)`: each quadrature pair maps
    /// `(x₁, x₂) → (ηx₁ + η̃x₂, ηx₂ − η̃x₁)`.
    pub fn argument_map(&self) -> Matrix4<f64> {
        let (e, t) = (self.eta, self.eta_tilde);
        Matrix4::new(
            e, 0.0, t, 0.0, //
            0.0, e, 0.0, t, //
            -t, 0.0, e, 0.0, //
            0.0, -t, 0.0, e,
        )
    }
}

/// Sends a two-mode state through the beam splitter. Since `M` is
/// orthogonal, moments transform with `Mᵀ`.
pub fn apply_beam_splitter(state: &GaussianBipartiteState, bs: &BeamSplitter) -> Result<GaussianBipartiteState> {
    transform(state, &bs.argument_map().transpose())
}

/// Undoes [`apply_beam_splitter`].
pub fn apply_beam_splitter_inverse(state: &GaussianBipartiteState, bs: &BeamSplitter) -> Result<GaussianBipartiteState> {
    transform(state, &bs.argument_map())
}

fn transform(state: &GaussianBipartiteState, t: &Matrix4<f64>) -> Result<GaussianBipartiteState> {
    let cov = state.cov.congruence(t)?;
    Ok(GaussianBipartiteState::new(QuadratureMeans(t * state.means.0), cov))
}

/// Splits a single-mode state on a 50:50 beam splitter with vacuum in the
/// idle port.
pub fn split_balanced(input: &SingleModeState) -> Result<GaussianBipartiteState> {
    let joint = GaussianBipartiteState::product(input, &SingleModeState::vacuum(input.v0))?;
    apply_beam_splitter(&joint, &BeamSplitter::balanced())
}

/// Block-diagonal local-oscillator rotation `U_{θA,θB}`.
pub fn rotation_matrix(theta_a: f64, theta_b: f64) -> Matrix4<f64> {
    let (sa, ca) = theta_a.sin_cos();
    let (sb, cb) = theta_b.sin_cos();
    Matrix4::new(
        ca, sa, 0.0, 0.0, //
        -sa, ca, 0.0, 0.0, //
        0.0, 0.0, cb, sb, //
        0.0, 0.0, -sb, cb,
    )
}

/// `σ → U σ Uᵀ`, `x̄ → U x̄`.
pub fn rotate_local(state: &GaussianBipartiteState, theta_a: f64, theta_b: f64) -> Result<GaussianBipartiteState> {
    transform(state, &rotation_matrix(theta_a, theta_b))
}

/// Analytic zero-discord test for Gaussian states: every entry of `C` is
/// within `tol` of zero.
pub fn c_block_is_zero(state: &GaussianBipartiteState, tol: f64) -> bool {
    state.cov.block_c().iter().all(|c| c.abs() <= tol)
}

/// Gaussian Wigner function with a precomputed inverse covariance.
#[derive(Clone, Debug)]
pub struct WignerFunction {
    mean: Vector4<f64>,
    inv: Matrix4<f64>,
    norm: f64,
}

impl WignerFunction {
    pub fn new(state: &GaussianBipartiteState) -> Result<Self> {
        let m = state.cov.matrix();
        let eig = m.symmetric_eigenvalues();
        let condition = eig.max() / eig.min();
        if !(eig.min() > 0.0) || condition > MAX_CONDITION {
            return Err(Error::Numeric {
                msg: format!("covariance is numerically singular (condition number {condition:.3e})"),
                condition: Some(condition),
            });
        }
        let chol = m.cholesky().ok_or_else(|| Error::Numeric {
            msg: "Cholesky factorization failed".into(),
            condition: Some(condition),
        })?;
        let det = chol.determinant();
        Ok(WignerFunction {
            mean: state.means.0,
            inv: chol.inverse(),
            norm: 1.0 / (4.0 * PI * PI * det.sqrt()),
        })
    }

    pub fn eval(&self, point: &[f64; 4]) -> f64 {
        let d = Vector4::from(*point) - self.mean;
        self.norm * (-0.5 * (d.transpose() * self.inv * d)[(0, 0)]).exp()
    }
}

/// Wigner density of `state` at `point = (x_A, p_A, x_B, p_B)`.
pub fn wigner_density(state: &GaussianBipartiteState, point: &[f64; 4]) -> Result<f64> {
    Ok(WignerFunction::new(state)?.eval(point))
}
