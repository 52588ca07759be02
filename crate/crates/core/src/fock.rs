//! Truncated number-basis states for the two counterexamples that bound the
//! peak-separation method: a classical-on-B state whose conditionals do
//! separate, and a discordant state whose conditionals do not.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::marginals::Side;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Largest probability mass allowed beyond the truncation.
pub const TAIL_TOL: f64 = 1e-8;
pub const DEFAULT_DIM: usize = 20;
pub const MAX_DIM: usize = 40;
/// Grid spacing for quadrature integrals, in units of √v0.
pub const GRID_SPACING: f64 = 0.01;
/// Minimum half-width of quadrature grids, in units of √v0.
pub const GRID_HALF_WIDTH: f64 = 12.0;

type CMatrix = DMatrix<Complex64>;
type CVector = DVector<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Tries the default truncation, then the largest one.
pub fn with_escalation<T>(build: impl Fn(usize) -> Result<T>) -> Result<T> {
    match build(DEFAULT_DIM) {
        Err(Error::Truncation { .. }) => build(MAX_DIM),
        other => other,
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Domain(format!("truncation dimension must lie in 1..={MAX_DIM}, got {dim}")));
    }
    Ok(())
}

/// Normalized truncated coherent state `|α⟩`.
pub fn coherent_fock(alpha: Complex64, dim: usize) -> Result<CVector> {
    check_dim(dim)?;
    let mut v = CVector::zeros(dim);
    let mut amp = c((-0.5 * alpha.norm_sqr()).exp());
    for n in 0..dim {
        v[n] = amp;
        amp = amp * alpha / ((n + 1) as f64).sqrt();
    }
    let kept = v.norm_squared();
    let tail = 1.0 - kept;
    if tail > TAIL_TOL {
        return Err(Error::Truncation { tail, dim });
    }
    Ok(v / c(kept.sqrt()))
}

/// Squeezed vacuum with squeezing along the measured `x` quadrature
/// (variance `v0·e^{−2r}`).
pub fn squeezed_vacuum_fock(r: f64, dim: usize) -> Result<CVector> {
    check_dim(dim)?;
    if !r.is_finite() {
        return Err(Error::Domain("squeeze parameter must be finite".into()));
    }
    let t = r.tanh();
    let mut v = CVector::zeros(dim);
    let mut amp = 1.0 / r.cosh().sqrt();
    let mut n = 0;
    while n < dim {
        v[n] = c(amp);
        let m = (n / 2 + 1) as f64;
        amp *= -t * ((2.0 * m - 1.0) / (2.0 * m)).sqrt();
        n += 2;
    }
    let kept = v.norm_squared();
    let tail = 1.0 - kept;
    if tail > TAIL_TOL {
        return Err(Error::Truncation { tail, dim });
    }
    Ok(v / c(kept.sqrt()))
}

/// Thermal state with mean photon number `nbar`.
pub fn thermal_fock(nbar: f64, dim: usize) -> Result<CMatrix> {
    check_dim(dim)?;
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::Domain(format!("n̄ must be >= 0, got {nbar}")));
    }
    let q = nbar / (nbar + 1.0);
    let tail = q.powi(dim as i32);
    if tail > TAIL_TOL {
        return Err(Error::Truncation { tail, dim });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = c((1.0 - q) * q.powi(n as i32) / (1.0 - tail));
    }
    Ok(m)
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Bipartite density matrix on `C^{dim_A} ⊗ C^{dim_B}`, row index
/// `a·dim_B + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockDensityMatrix {
    dim_a: usize,
    dim_b: usize,
    data: CMatrix,
    trace: f64,
    min_eigenvalue: f64,
}

#[derive(Serialize, Deserialize)]
struct FockDocument {
    #[serde(rename = "dim_A")]
    dim_a: usize,
    #[serde(rename = "dim_B")]
    dim_b: usize,
    entries: Vec<[f64; 2]>,
    #[serde(default, skip_deserializing)]
    trace: f64,
    #[serde(default, skip_deserializing)]
    min_eigenvalue: f64,
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).camax()
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

impl FockDensityMatrix {
    pub fn new(dim_a: usize, dim_b: usize, data: CMatrix) -> Result<Self> {
        let n = dim_a * dim_b;
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch(n, data.nrows()));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::MalformedInput("density matrix has non-finite entries".into()));
        }
        let herm = hermitian_defect(&data);
        if herm > HERMITIAN_TOL {
            return Err(Error::NonPhysical(format!("not Hermitian (defect {herm:.3e})")));
        }
        let trace = data.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::NonPhysical(format!("trace {trace} differs from 1")));
        }
        let min_eigenvalue = min_hermitian_eigenvalue(&data);
        if min_eigenvalue < -POSITIVITY_TOL {
            return Err(Error::NonPhysical(format!("negative eigenvalue {min_eigenvalue:.3e}")));
        }
        Ok(FockDensityMatrix {
            dim_a,
            dim_b,
            data,
            trace,
            min_eigenvalue,
        })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `Tr_A[ρ·(op ⊗ 1)]`.
    pub fn partial_trace_a_with(&self, op: &CMatrix) -> CMatrix {
        let (da, db) = (self.dim_a, self.dim_b);
        let mut out = CMatrix::zeros(db, db);
        for a in 0..da {
            for a2 in 0..da {
                let w = op[(a2, a)];
                if w == c(0.0) {
                    continue;
                }
                for b in 0..db {
                    for b2 in 0..db {
                        out[(b, b2)] += self.data[(a * db + b, a2 * db + b2)] * w;
                    }
                }
            }
        }
        out
    }

    /// Reduced state of B.
    pub fn reduced_b(&self) -> CMatrix {
        self.partial_trace_a_with(&CMatrix::identity(self.dim_a, self.dim_a))
    }

    /// Reduced state of A.
    pub fn reduced_a(&self) -> CMatrix {
        let (da, db) = (self.dim_a, self.dim_b);
        CMatrix::from_fn(da, da, |a, a2| (0..db).map(|b| self.data[(a * db + b, a2 * db + b)]).sum())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FockDocument {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            entries: self.data.transpose().iter().map(|z| [z.re, z.im]).collect(),
            trace: self.trace,
            min_eigenvalue: self.min_eigenvalue,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FockDocument = serde_json::from_str(s)?;
        let n = doc.dim_a * doc.dim_b;
        if doc.entries.len() != n * n {
            return Err(Error::DimensionMismatch(n * n, doc.entries.len()));
        }
        let data = CMatrix::from_row_iterator(n, n, doc.entries.iter().map(|&[re, im]| Complex64::new(re, im)));
        FockDensityMatrix::new(doc.dim_a, doc.dim_b, data)
    }
}

/// `½[|α⟩⟨α| ⊗ |+⟩⟨+| + |−α⟩⟨−α| ⊗ |−⟩⟨−|]` with `|±⟩ = (|0⟩ ± |1⟩)/√2`:
/// classical on B by construction.
pub fn build_ce_zero_discord(alpha: Complex64, dims: Option<(usize, usize)>) -> Result<FockDensityMatrix> {
    let build = |da: usize, db: usize| -> Result<FockDensityMatrix> {
        if db < 2 {
            return Err(Error::Domain("B needs at least two levels".into()));
        }
        check_dim(db)?;
        let basis = plus_minus_basis(db);
        let plus = projector(&basis.column(0).into_owned());
        let minus = projector(&basis.column(1).into_owned());
        let a1 = projector(&coherent_fock(alpha, da)?);
        let a2 = projector(&coherent_fock(-alpha, da)?);
        let rho = (kron(&a1, &plus) + kron(&a2, &minus)) * c(0.5);
        FockDensityMatrix::new(da, db, rho)
    };
    match dims {
        Some((da, db)) => build(da, db),
        None => with_escalation(|d| build(d, DEFAULT_DIM)),
    }
}

/// Parameters of `½ρ_{A,1} ⊗ ρ_th(n̄) + ½ρ_{A,2} ⊗ ρ_sq(r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenDiscordConfig {
    pub nbar: f64,
    pub r: f64,
    pub dim_b: Option<usize>,
    pub rho_a1: CMatrix,
    pub rho_a2: CMatrix,
}

impl HiddenDiscordConfig {
    /// Defaults to the orthogonal pair `ρ_{A,1} = |+⟩⟨+|`, `ρ_{A,2} = |−⟩⟨−|`,
    /// which the sign of Alice's amplitude quadrature distinguishes.
    pub fn new(nbar: f64, r: f64) -> Self {
        let basis = plus_minus_basis(2);
        HiddenDiscordConfig {
            nbar,
            r,
            dim_b: None,
            rho_a1: projector(&basis.column(0).into_owned()),
            rho_a2: projector(&basis.column(1).into_owned()),
        }
    }
}

pub fn build_ce_hidden_discord(cfg: &HiddenDiscordConfig) -> Result<FockDensityMatrix> {
    let da = cfg.rho_a1.nrows();
    if cfg.rho_a2.shape() != (da, da) || cfg.rho_a1.ncols() != da {
        return Err(Error::DimensionMismatch(da, cfg.rho_a2.nrows()));
    }
    let build = |db: usize| -> Result<FockDensityMatrix> {
        let th = thermal_fock(cfg.nbar, db)?;
        let sq = projector(&squeezed_vacuum_fock(cfg.r, db)?);
        let rho = (kron(&cfg.rho_a1, &th) + kron(&cfg.rho_a2, &sq)) * c(0.5);
        FockDensityMatrix::new(da, db, rho)
    };
    match cfg.dim_b {
        Some(db) => build(db),
        None => with_escalation(build),
    }
}

/// Columns `|+⟩, |−⟩, |2⟩, …, |dim−1⟩`.
pub fn plus_minus_basis(dim: usize) -> CMatrix {
    let mut u = CMatrix::identity(dim, dim);
    if dim >= 2 {
        let s = c(std::f64::consts::FRAC_1_SQRT_2);
        u[(0, 0)] = s;
        u[(1, 0)] = s;
        u[(0, 1)] = s;
        u[(1, 1)] = -s;
    }
    u
}

/// Uniform quadrature grid, in the units of the given vacuum variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    v0: f64,
}

impl QuadratureGrid {
    /// `−L..=L` with spacing `h·√v0`, always containing 0; the half-width
    /// covers the classical turning point of the highest level kept.
    pub fn symmetric(dim: usize, v0: f64) -> Self {
        let s0 = v0.sqrt();
        let h = GRID_SPACING * s0;
        let half = Self::half_width(dim, v0);
        let k = (half / h).ceil() as i64;
        QuadratureGrid {
            points: (-k..=k).map(|i| i as f64 * h).collect(),
            v0,
        }
    }

    fn half_width(dim: usize, v0: f64) -> f64 {
        let turning = (2.0 * v0).sqrt() * ((2 * dim + 1) as f64).sqrt();
        (GRID_HALF_WIDTH * v0.sqrt()).max(turning + 6.0 * v0.sqrt())
    }

    pub fn new(points: Vec<f64>, v0: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("grid needs at least two points".into()));
        }
        let h = points[1] - points[0];
        let uniform = points
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
        if !uniform || !(v0 > 0.0) {
            return Err(Error::Domain("grid must be uniform and ascending with v0 > 0".into()));
        }
        Ok(QuadratureGrid { points, v0 })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn spacing(&self) -> f64 {
        self.points[1] - self.points[0]
    }
}

/// `ψ_0(x) … ψ_{n−1}(x)` for `x = √v0·(a + a†)`.
pub fn hermite_functions(x: f64, v0: f64, n: usize) -> Vec<f64> {
    let xi = x / (2.0 * v0).sqrt();
    let scale = (2.0 * v0).powf(-0.25);
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    out.push(scale * cur);
    for k in 0..n.saturating_sub(1) {
        let next = (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        out.push(scale * cur);
    }
    out
}

/// Homodyne density `p(x) = Σ ρ_mn e^{−i(m−n)θ} ψ_m(x) ψ_n(x)` on the grid.
pub fn homodyne_marginal_fock(rho: &CMatrix, grid: &QuadratureGrid, theta: f64) -> Vec<f64> {
    let d = rho.nrows();
    let phased = CMatrix::from_fn(d, d, |m, n| rho[(m, n)] * Complex64::from_polar(1.0, -(m as f64 - n as f64) * theta));
    grid.points
        .iter()
        .map(|&x| {
            let psi = hermite_functions(x, grid.v0, d);
            let mut s = 0.0;
            for m in 0..d {
                for n in 0..d {
                    s += (phased[(m, n)] * psi[m] * psi[n]).re;
                }
            }
            s
        })
        .collect()
}

/// Composite Simpson rule on a uniform grid with an odd number of points.
fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n % 2 == 1);
    let inner: f64 = values[1..n - 1]
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    h / 3.0 * (values[0] + inner + values[n - 1])
}

/// `⟨m|Π_+|n⟩` for the projector on `x > 0` at phase 0. Entries with `m + n`
/// even are `δ_mn/2` by parity; the rest are integrated on the grid.
pub fn half_line_projector(dim: usize) -> CMatrix {
    let h = GRID_SPACING;
    let half = QuadratureGrid::half_width(dim, 1.0);
    let mut k = (half / h).ceil() as usize;
    if k % 2 == 1 {
        k += 1;
    }
    let psis: Vec<Vec<f64>> = (0..=k).map(|i| hermite_functions(i as f64 * h, 1.0, dim)).collect();
    CMatrix::from_fn(dim, dim, |m, n| {
        if (m + n) % 2 == 0 {
            c(if m == n { 0.5 } else { 0.0 })
        } else {
            let vals: Vec<f64> = psis.iter().map(|p| p[m] * p[n]).collect();
            c(simpson(&vals, h))
        }
    })
}

/// Projector on Alice's quadrature at phase `theta` falling on `side` of 0.
pub fn sign_projector(dim: usize, side: Side, theta: f64) -> CMatrix {
    let p = half_line_projector(dim);
    CMatrix::from_fn(dim, dim, |m, n| {
        let parity = if side == Side::Minus && (m + n) % 2 == 1 { -1.0 } else { 1.0 };
        p[(m, n)] * parity * Complex64::from_polar(1.0, (m as f64 - n as f64) * theta)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalState {
    pub probability: f64,
    pub rho_b: CMatrix,
}

/// `ρ_{B|±} ∝ Tr_A[ρ(Π_± ⊗ 1)]`, trace-normalized.
pub fn conditional_b_given_sign(rho: &FockDensityMatrix, side: Side, theta_a: f64) -> Result<ConditionalState> {
    let proj = sign_projector(rho.dim_a, side, theta_a);
    let unnorm = rho.partial_trace_a_with(&proj);
    let probability = unnorm.trace().re;
    if !(probability > 1e-12) {
        return Err(Error::DegenerateSplit {
            plus: usize::from(side == Side::Plus && probability > 0.0),
            minus: usize::from(side == Side::Minus && probability > 0.0),
        });
    }
    Ok(ConditionalState {
        probability,
        rho_b: unnorm / c(probability),
    })
}

/// Frobenius norm of `ρ₁ρ₂ − ρ₂ρ₁`.
pub fn commutator_norm(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    if rho1.shape() != rho2.shape() || rho1.nrows() != rho1.ncols() {
        return Err(Error::DimensionMismatch(rho1.nrows(), rho2.nrows()));
    }
    Ok((rho1 * rho2 - rho2 * rho1).norm())
}

/// True iff every B-off-diagonal block in the given orthonormal basis
/// (columns of `basis`) has Frobenius norm at most `tol`.
pub fn verify_classical_on_b(rho: &FockDensityMatrix, basis: &CMatrix, tol: f64) -> Result<bool> {
    let db = rho.dim_b;
    if basis.shape() != (db, db) {
        return Err(Error::DimensionMismatch(db, basis.nrows()));
    }
    let gram_defect = (basis.adjoint() * basis - CMatrix::identity(db, db)).camax();
    if gram_defect > 1e-10 {
        return Err(Error::Domain(format!("basis is not orthonormal (defect {gram_defect:.3e})")));
    }
    let u = kron(&CMatrix::identity(rho.dim_a, rho.dim_a), basis);
    let t = u.adjoint() * &rho.data * &u;
    let da = rho.dim_a;
    for j in 0..db {
        for k in 0..db {
            if j == k {
                continue;
            }
            let block: f64 = (0..da)
                .flat_map(|a| (0..da).map(move |a2| (a, a2)))
                .map(|(a, a2)| t[(a * db + j, a2 * db + k)].norm_sqr())
                .sum();
            if block.sqrt() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Location, variance and normalization of a density sampled on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub peak: f64,
    pub mean: f64,
    pub variance: f64,
    pub norm: f64,
}

/// Peak by grid maximum refined with a parabola through its neighbours.
pub fn summarize_curve(grid: &QuadratureGrid, p: &[f64]) -> CurveSummary {
    let x = grid.points();
    let h = grid.spacing();
    let i = p
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0;
    let peak = if i == 0 || i + 1 == p.len() {
        x[i]
    } else {
        let denom = p[i - 1] - 2.0 * p[i] + p[i + 1];
        if denom < 0.0 {
            x[i] + 0.5 * h * (p[i - 1] - p[i + 1]) / denom
        } else {
            x[i]
        }
    };
    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        let n = p.len();
        h * ((0..n).map(f).sum::<f64>() - 0.5 * (f(0) + f(n - 1)))
    };
    let norm = trap(&|k| p[k]);
    let mean = trap(&|k| x[k] * p[k]) / norm;
    let variance = trap(&|k| (x[k] - mean).powi(2) * p[k]) / norm;
    CurveSummary {
        peak,
        mean,
        variance,
        norm,
    }
}

/// Grid with the unconditional, plus and minus densities of B.
pub type ConditionalCurves = (QuadratureGrid, Vec<f64>, Vec<f64>, Vec<f64>);

/// Sign-conditioned B marginals of a Fock state together with the
/// classicality and commutation diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub name: String,
    #[serde(rename = "dim_A")]
    pub dim_a: usize,
    #[serde(rename = "dim_B")]
    pub dim_b: usize,
    pub v0: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub plus: CurveSummary,
    pub minus: CurveSummary,
    pub peak_separation: f64,
    pub variance_ratio: f64,
    pub classical_on_b: Option<bool>,
    pub commutator_norm: Option<f64>,
    /// Grid and both conditional densities, for plotting.
    #[serde(skip)]
    pub curves: Option<ConditionalCurves>,
}

/// Conditions on the sign of Alice's amplitude quadrature and measures
/// Bob's amplitude quadrature.
pub fn conditional_report(name: &str, rho: &FockDensityMatrix, v0: f64) -> Result<CounterexampleReport> {
    let plus = conditional_b_given_sign(rho, Side::Plus, 0.0)?;
    let minus = conditional_b_given_sign(rho, Side::Minus, 0.0)?;
    let grid = QuadratureGrid::symmetric(rho.dim_b, v0);
    let pp = homodyne_marginal_fock(&plus.rho_b, &grid, 0.0);
    let pm = homodyne_marginal_fock(&minus.rho_b, &grid, 0.0);
    let pu = homodyne_marginal_fock(&rho.reduced_b(), &grid, 0.0);
    let (sp, sm) = (summarize_curve(&grid, &pp), summarize_curve(&grid, &pm));
    Ok(CounterexampleReport {
        name: name.into(),
        dim_a: rho.dim_a,
        dim_b: rho.dim_b,
        v0,
        p_plus: plus.probability,
        p_minus: minus.probability,
        plus: sp,
        minus: sm,
        peak_separation: sp.peak - sm.peak,
        variance_ratio: sp.variance.max(sm.variance) / sp.variance.min(sm.variance),
        classical_on_b: None,
        commutator_norm: None,
        curves: Some((grid, pu, pp, pm)),
    })
}

pub fn certify_zero_discord(alpha: Complex64, v0: f64) -> Result<CounterexampleReport> {
    let rho = build_ce_zero_discord(alpha, None)?;
    let mut rep = conditional_report("ce_zero_discord", &rho, v0)?;
    rep.classical_on_b = Some(verify_classical_on_b(&rho, &plus_minus_basis(rho.dim_b), 1e-10)?);
    Ok(rep)
}

pub fn certify_hidden_discord(cfg: &HiddenDiscordConfig, v0: f64) -> Result<CounterexampleReport> {
    let rho = build_ce_hidden_discord(cfg)?;
    let mut rep = conditional_report("ce_hidden_discord", &rho, v0)?;
    let db = rho.dim_b;
    let th = thermal_fock(cfg.nbar, db)?;
    let sq = projector(&squeezed_vacuum_fock(cfg.r, db)?);
    rep.commutator_norm = Some(commutator_norm(&th, &sq)?);
    rep.classical_on_b = Some(verify_classical_on_b(&rho, &CMatrix::identity(db, db), 1e-10)?);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_basics() {
        let v = coherent_fock(c(0.0), 5).unwrap();
        assert_eq!(v[0], c(1.0));
        assert!(v.iter().skip(1).all(|z| *z == c(0.0)));
        let v = coherent_fock(c(1.0), 20).unwrap();
        let n: f64 = v.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-6);
        assert!(matches!(coherent_fock(c(3.0), 10), Err(Error::Truncation { .. })));
        for a in [0.5, 1.0, 1.5, 2.0] {
            assert!((coherent_fock(Complex64::new(0.0, a), 30).unwrap().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hermite_orthonormal() {
        let grid = QuadratureGrid::symmetric(30, 0.5);
        let h = grid.spacing();
        let psis: Vec<Vec<f64>> = grid.points().iter().map(|&x| hermite_functions(x, 0.5, 30)).collect();
        for m in [0, 3, 17, 29] {
            for n in [0, 3, 17, 29] {
                let s: f64 = psis.iter().map(|p| p[m] * p[n]).sum::<f64>() * h;
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-9, "{m},{n}: {s}");
            }
        }
    }

    #[test]
    fn vacuum_and_one_photon_marginals() {
        let grid = QuadratureGrid::symmetric(2, 1.0);
        let mut r = CMatrix::zeros(2, 2);
        r[(0, 0)] = c(1.0);
        let p = homodyne_marginal_fock(&r, &grid, 0.0);
        for (x, v) in grid.points().iter().zip(&p).step_by(97) {
            assert!((v - (-0.5 * x * x).exp() / (2.0 * PI).sqrt()).abs() < 1e-14);
        }
        r[(0, 0)] = c(0.0);
        r[(1, 1)] = c(1.0);
        let p = homodyne_marginal_fock(&r, &grid, 0.0);
        let mid = grid.points().len() / 2;
        assert_eq!(grid.points()[mid], 0.0);
        assert!(p[mid].abs() < 1e-15);
        let s = summarize_curve(&grid, &p);
        assert!((s.norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn superposition_peaks_right() {
        let v = plus_minus_basis(2).column(0).into_owned();
        let grid = QuadratureGrid::symmetric(2, 1.0);
        let p = homodyne_marginal_fock(&projector(&v), &grid, 0.0);
        let s = summarize_curve(&grid, &p);
        // Stationary point of (1 + √2ξ)² e^{−ξ²} is ξ = 1/√2, i.e. x = 1.
        assert!((s.peak - 1.0).abs() < 1e-4, "{}", s.peak);
    }

    #[test]
    fn squeezed_and_thermal_variances() {
        let grid = QuadratureGrid::symmetric(40, 1.0);
        let sq = projector(&squeezed_vacuum_fock(0.5, 40).unwrap());
        let s = summarize_curve(&grid, &homodyne_marginal_fock(&sq, &grid, 0.0));
        assert!((s.variance - (-1.0f64).exp()).abs() < 1e-8);
        let s = summarize_curve(&grid, &homodyne_marginal_fock(&sq, &grid, PI / 2.0));
        assert!((s.variance - 1.0f64.exp()).abs() < 1e-6);
        let th = thermal_fock(1.0, 40).unwrap();
        let s = summarize_curve(&grid, &homodyne_marginal_fock(&th, &grid, 0.3));
        assert!((s.variance - 3.0).abs() < 1e-8);
        assert!(matches!(thermal_fock(1.0, 20), Err(Error::Truncation { .. })));
    }

    #[test]
    fn projectors_sum_to_identity() {
        let p = sign_projector(12, Side::Plus, 0.4);
        let m = sign_projector(12, Side::Minus, 0.4);
        assert!((p.clone() + m - CMatrix::identity(12, 12)).camax() < 1e-12);
        assert!(hermitian_defect(&p) < 1e-14);
        // ⟨0|Π_+|1⟩ = 1/√(2π).
        let h = half_line_projector(4);
        assert!((h[(0, 1)].re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = CMatrix::identity(2, 2) * c(0.5);
        m[(0, 1)] = c(0.1);
        assert!(matches!(FockDensityMatrix::new(1, 2, m.clone()), Err(Error::NonPhysical(_))));
        m[(1, 0)] = c(0.1);
        assert!(FockDensityMatrix::new(1, 2, m.clone()).is_ok());
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(matches!(FockDensityMatrix::new(1, 2, m), Err(Error::NonPhysical(_))));
        assert!(FockDensityMatrix::new(2, 2, CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let rho = build_ce_zero_discord(c(0.7), Some((14, 3))).unwrap();
        let s = rho.to_json().unwrap();
        assert!(s.contains("\"dim_A\":14"));
        let back = FockDensityMatrix::from_json(&s).unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        assert!(FockDensityMatrix::from_json(r#"{"dim_A":1,"dim_B":1,"entries":[]}"#).is_err());
    }

    #[test]
    fn commutators() {
        let th = thermal_fock(1.0, 30).unwrap();
        assert_eq!(commutator_norm(&th, &th).unwrap(), 0.0);
        let th2 = thermal_fock(0.3, 30).unwrap();
        assert_eq!(commutator_norm(&th, &th2).unwrap(), 0.0);
        let sq = projector(&squeezed_vacuum_fock(0.5, 30).unwrap());
        assert!(commutator_norm(&th, &sq).unwrap() > 1e-3);
        assert!(commutator_norm(&th, &CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn classicality_checks() {
        let rho = build_ce_zero_discord(c(1.0), None).unwrap();
        assert!(verify_classical_on_b(&rho, &plus_minus_basis(rho.dim_b()), 1e-10).unwrap());
        assert!(!verify_classical_on_b(&rho, &CMatrix::identity(rho.dim_b(), rho.dim_b()), 1e-10).unwrap());
        let mixed = FockDensityMatrix::new(2, 2, CMatrix::identity(4, 4) * c(0.25)).unwrap();
        assert!(verify_classical_on_b(&mixed, &plus_minus_basis(2), 1e-12).unwrap());
        let bad = CMatrix::identity(2, 2) * c(2.0);
        assert!(verify_classical_on_b(&mixed, &bad, 1e-12).is_err());
    }
}
