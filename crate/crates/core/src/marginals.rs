//! Homodyne marginals: the joint and conditional distributions of two
//! homodyne outcomes for Gaussian states, and the beam-splitter output of a
//! P-function mixture of coherent states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, bisect_decreasing, inverse_mills, normal_pdf, std_normal_sf};
use crate::states::{rotate_local, GaussianBipartiteState, DEFAULT_V0};

/// Location tolerance for analytic peak finding.
pub const PEAK_TOL: f64 = 1e-10;
/// Iteration cap for the bracketed peak search.
pub const PEAK_MAX_ITER: usize = 200;
/// Absolute tolerance for the phase average of arcsine components.
pub const PHASE_AVERAGE_TOL: f64 = 1e-9;

/// Which side of the threshold Alice's outcome fell on. Outcomes equal to
/// the threshold belong to `Plus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Joint outcome density `∝ exp(−λx_A² − μx_B² + 2νx_Ax_B)` about the means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalForm {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    #[serde(default)]
    pub mean_a: f64,
    #[serde(default)]
    pub mean_b: f64,
}

impl MarginalForm {
    pub fn new(lambda: f64, mu: f64, nu: f64, theta_a: f64, theta_b: f64) -> Result<Self> {
        let form = MarginalForm {
            lambda,
            mu,
            nu,
            theta_a,
            theta_b,
            mean_a: 0.0,
            mean_b: 0.0,
        };
        form.check()?;
        Ok(form)
    }

    pub fn with_means(mut self, mean_a: f64, mean_b: f64) -> Self {
        self.mean_a = mean_a;
        self.mean_b = mean_b;
        self
    }

    fn check(&self) -> Result<()> {
        let finite = [self.lambda, self.mu, self.nu].iter().all(|v| v.is_finite());
        if !finite || self.lambda <= 0.0 || self.mu <= 0.0 || self.discriminant() <= 0.0 {
            return Err(Error::Domain(format!(
                "marginal form is not integrable (λ={}, μ={}, ν={})",
                self.lambda, self.mu, self.nu
            )));
        }
        Ok(())
    }

    /// `λμ − ν²`.
    pub fn discriminant(&self) -> f64 {
        self.lambda * self.mu - self.nu * self.nu
    }

    /// Outcome covariance `(var_A, var_B, cov_AB)`.
    pub fn covariance(&self) -> (f64, f64, f64) {
        let d2 = 2.0 * self.discriminant();
        (self.mu / d2, self.lambda / d2, self.nu / d2)
    }

    /// Normalized joint density.
    pub fn density(&self, x_a: f64, x_b: f64) -> f64 {
        let (u, v) = (x_a - self.mean_a, x_b - self.mean_b);
        self.discriminant().sqrt() / PI * (-self.lambda * u * u - self.mu * v * v + 2.0 * self.nu * u * v).exp()
    }

    /// Unconditional density of Bob's outcome.
    pub fn marginal_b(&self, x_b: f64) -> f64 {
        let (_, vb, _) = self.covariance();
        normal_pdf(x_b, self.mean_b, vb)
    }
}

/// Rotates the state to the measured quadratures and reads the `(x_A, x_B)`
/// covariance; `λ`, `μ`, `−ν` are half its inverse.
pub fn joint_marginal_form(state: &GaussianBipartiteState, theta_a: f64, theta_b: f64) -> Result<MarginalForm> {
    let rot = rotate_local(state, theta_a, theta_b)?;
    let m = rot.cov().matrix();
    let (va, vb, c) = (m[(0, 0)], m[(2, 2)], m[(0, 2)]);
    let det = va * vb - c * c;
    if !(det > 0.0) || det < 1e-14 * va * vb {
        return Err(Error::Numeric {
            msg: format!("outcome covariance is singular (det {det:.3e})"),
            condition: Some(va * vb / det.abs()),
        });
    }
    let means = rot.means().as_array();
    MarginalForm::new(vb / (2.0 * det), va / (2.0 * det), c / (2.0 * det), theta_a, theta_b)
        .map(|f| f.with_means(means[0], means[2]))
}

pub fn joint_marginal_density(form: &MarginalForm, x_a: f64, x_b: f64) -> f64 {
    form.density(x_a, x_b)
}

/// `ν` at the four local-oscillator settings `{0, π/2}²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuTable {
    pub nu_00: f64,
    pub nu_0_90: f64,
    pub nu_90_0: f64,
    pub nu_90_90: f64,
}

impl NuTable {
    /// Entries keyed by `(θ_A, θ_B)`.
    pub fn entries(&self) -> [((f64, f64), f64); 4] {
        [
            ((0.0, 0.0), self.nu_00),
            ((0.0, FRAC_PI_2), self.nu_0_90),
            ((FRAC_PI_2, 0.0), self.nu_90_0),
            ((FRAC_PI_2, FRAC_PI_2), self.nu_90_90),
        ]
    }
}

pub fn nu_table(state: &GaussianBipartiteState) -> Result<NuTable> {
    let nu = |a, b| joint_marginal_form(state, a, b).map(|f| f.nu);
    Ok(NuTable {
        nu_00: nu(0.0, 0.0)?,
        nu_0_90: nu(0.0, FRAC_PI_2)?,
        nu_90_0: nu(FRAC_PI_2, 0.0)?,
        nu_90_90: nu(FRAC_PI_2, FRAC_PI_2)?,
    })
}

/// Bob's marginal conditioned on the sign of Alice's outcome, in the
/// closed `1 ± Erf` form for a zero-mean form and threshold 0. Each side has
/// probability ½, so the pair averages to the unconditional marginal.
pub fn conditional_marginal_density(form: &MarginalForm, x_b: f64, side: Side) -> f64 {
    let (l, m, n) = (form.lambda, form.mu, form.nu);
    let gauss = ((l * m - n * n) / (PI * l)).sqrt() * (((n * n - m * l) / l) * x_b * x_b).exp();
    gauss * (1.0 + side.sign() * erf(n * x_b / l.sqrt()))
}

/// Conditional marginals of Bob's outcome for an arbitrary threshold `t` on
/// Alice's outcome and arbitrary means.
#[derive(Clone, Copy, Debug)]
pub struct ConditionalMarginal {
    form: MarginalForm,
    threshold: f64,
    var_a: f64,
    var_b: f64,
    /// Regression slope of `x_A` on `x_B`.
    slope: f64,
    /// Residual standard deviation of `x_A` given `x_B`.
    resid: f64,
}

impl ConditionalMarginal {
    pub fn new(form: MarginalForm, threshold: f64) -> Self {
        let (var_a, var_b, c) = form.covariance();
        let slope = c / var_b;
        let resid = (var_a - c * c / var_b).sqrt();
        ConditionalMarginal {
            form,
            threshold,
            var_a,
            var_b,
            slope,
            resid,
        }
    }

    fn z(&self, x_b: f64) -> f64 {
        let cond_mean = self.form.mean_a + self.slope * (x_b - self.form.mean_b);
        (self.threshold - cond_mean) / self.resid
    }

    /// Probability that Alice's outcome lands on `side`.
    pub fn probability(&self, side: Side) -> f64 {
        let z = (self.threshold - self.form.mean_a) / self.var_a.sqrt();
        match side {
            Side::Plus => std_normal_sf(z),
            Side::Minus => std_normal_sf(-z),
        }
    }

    pub fn density(&self, x_b: f64, side: Side) -> f64 {
        let z = self.z(x_b);
        let tail = match side {
            Side::Plus => std_normal_sf(z),
            Side::Minus => std_normal_sf(-z),
        };
        self.form.marginal_b(x_b) * tail / self.probability(side)
    }

    /// Derivative of the log conditional density; strictly decreasing.
    fn log_slope(&self, x_b: f64, side: Side) -> f64 {
        let gauss = -(x_b - self.form.mean_b) / self.var_b;
        let k = self.slope / self.resid;
        let z = self.z(x_b);
        match side {
            Side::Plus => gauss + k * inverse_mills(z),
            Side::Minus => gauss - k * inverse_mills(-z),
        }
    }

    /// Mode of the conditional density by bracketed root search on the
    /// log-derivative.
    pub fn peak(&self, side: Side) -> Result<f64> {
        let s = self.var_b.sqrt();
        let (lo, hi) = (self.form.mean_b - 10.0 * s, self.form.mean_b + 10.0 * s);
        bisect_decreasing(|x| self.log_slope(x, side), lo, hi, PEAK_TOL, PEAK_MAX_ITER)
    }

    pub fn peak_separation(&self) -> Result<f64> {
        Ok(self.peak(Side::Plus)? - self.peak(Side::Minus)?)
    }
}

/// Separation `argmax D_{B|+} − argmax D_{B|−}` at threshold 0.
pub fn analytic_peak_separation(form: &MarginalForm) -> Result<f64> {
    ConditionalMarginal::new(*form, 0.0).peak_separation()
}

pub fn analytic_peak_separation_at(form: &MarginalForm, threshold: f64) -> Result<f64> {
    ConditionalMarginal::new(*form, threshold).peak_separation()
}

/// One term of a Glauber–Sudarshan mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PComponent {
    /// Delta at a single coherent amplitude.
    Coherent { weight: f64, alpha: Complex64 },
    /// Gaussian P function of mean photon number `nbar`.
    Thermal { weight: f64, nbar: f64 },
    /// Real amplitude `amplitude·cos φ` with φ uniform: a sine-modulated
    /// quadrature sampled at random phase.
    Arcsine { weight: f64, amplitude: f64 },
}

impl PComponent {
    pub fn weight(&self) -> f64 {
        match *self {
            PComponent::Coherent { weight, .. }
            | PComponent::Thermal { weight, .. }
            | PComponent::Arcsine { weight, .. } => weight,
        }
    }

    fn check(&self) -> Result<()> {
        let w = self.weight();
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain(format!("component weight {w} outside [0, 1]")));
        }
        match *self {
            PComponent::Coherent { alpha, .. } if !(alpha.re.is_finite() && alpha.im.is_finite()) => {
                Err(Error::Domain("non-finite coherent amplitude".into()))
            }
            PComponent::Thermal { nbar, .. } if !(nbar >= 0.0 && nbar.is_finite()) => {
                Err(Error::Domain(format!("thermal n̄ must be >= 0, got {nbar}")))
            }
            PComponent::Arcsine { amplitude, .. } if !(amplitude > 0.0 && amplitude.is_finite()) => {
                Err(Error::Domain(format!("arcsine amplitude must be > 0, got {amplitude}")))
            }
            _ => Ok(()),
        }
    }
}

fn check_components(components: &[PComponent]) -> Result<()> {
    if components.is_empty() {
        return Err(Error::Domain("mixture has no components".into()));
    }
    for c in components {
        c.check()?;
    }
    let total: f64 = components.iter().map(PComponent::weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("component weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Mixture of coherent states on one beam-splitter port, vacuum on the other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PMixtureDocument")]
pub struct PMixtureState {
    components: Vec<PComponent>,
    eta: f64,
    v0: f64,
}

#[derive(Deserialize)]
struct PMixtureDocument {
    components: Vec<PComponent>,
    eta: f64,
    #[serde(default = "default_v0")]
    v0: f64,
}

fn default_v0() -> f64 {
    DEFAULT_V0
}

impl TryFrom<PMixtureDocument> for PMixtureState {
    type Error = Error;

    fn try_from(d: PMixtureDocument) -> Result<Self> {
        PMixtureState::new(d.components, d.eta, d.v0)
    }
}

impl PMixtureState {
    pub fn new(components: Vec<PComponent>, eta: f64, v0: f64) -> Result<Self> {
        check_components(&components)?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!("transmissivity must lie in (0, 1], got {eta}")));
        }
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::Domain(format!("vacuum variance must be positive, got {v0}")));
        }
        Ok(PMixtureState { components, eta, v0 })
    }

    pub fn components(&self) -> &[PComponent] {
        &self.components
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eta_tilde(&self) -> f64 {
        (1.0 - self.eta * self.eta).max(0.0).sqrt()
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// True when the P function is a single delta, i.e. the output is a
    /// product state.
    pub fn is_coherent(&self) -> bool {
        let live: Vec<_> = self.components.iter().filter(|c| c.weight() > 0.0).collect();
        match live.as_slice() {
            [PComponent::Coherent { .. }] => true,
            [first, rest @ ..] => {
                matches!(first, PComponent::Coherent { .. }) && rest.iter().all(|c| *c == *first)
            }
            [] => false,
        }
    }
}

/// Marginal of the input Wigner function along the quadrature at angle
/// `theta` (`D₁` for `theta = 0`).
#[derive(Clone, Debug)]
pub struct InputMarginal {
    components: Vec<PComponent>,
    v0: f64,
    cos_t: f64,
    sin_t: f64,
}

pub fn input_marginal_d1(components: &[PComponent], v0: f64) -> Result<InputMarginal> {
    input_marginal_at(components, v0, 0.0)
}

pub fn input_marginal_at(components: &[PComponent], v0: f64, theta: f64) -> Result<InputMarginal> {
    check_components(components)?;
    let (sin_t, cos_t) = theta.sin_cos();
    Ok(InputMarginal {
        components: components.to_vec(),
        v0,
        cos_t,
        sin_t,
    })
}

impl InputMarginal {
    pub fn density(&self, x: f64) -> f64 {
        let scale = 2.0 * self.v0.sqrt();
        self.components
            .iter()
            .map(|c| match *c {
                PComponent::Coherent { weight, alpha } => {
                    let mean = scale * (alpha.re * self.cos_t + alpha.im * self.sin_t);
                    weight * normal_pdf(x, mean, self.v0)
                }
                PComponent::Thermal { weight, nbar } => weight * normal_pdf(x, 0.0, self.v0 * (2.0 * nbar + 1.0)),
                PComponent::Arcsine { weight, amplitude } => {
                    let a = scale * amplitude * self.cos_t;
                    let f = |phi: f64| normal_pdf(x, a * phi.cos(), self.v0);
                    weight * adaptive_simpson(&f, 0.0, PI, PHASE_AVERAGE_TOL) / PI
                }
            })
            .sum()
    }
}

/// Joint density of the two output homodyne outcomes (same quadrature on
/// both modes): `D(x₁, x₂) = D₁(ηx₁ + η̃x₂)·N(ηx₂ − η̃x₁; 0, v0)`.
pub fn output_joint_density(pmix: &PMixtureState, x1: f64, x2: f64) -> f64 {
    output_joint_density_at(pmix, 0.0, x1, x2)
}

pub fn output_joint_density_at(pmix: &PMixtureState, theta: f64, x1: f64, x2: f64) -> f64 {
    // Components were validated when the mixture was built.
    let d1 = InputMarginal {
        components: pmix.components.clone(),
        v0: pmix.v0,
        cos_t: theta.cos(),
        sin_t: theta.sin(),
    };
    output_joint_with(&d1, pmix, x1, x2)
}

/// Same as [`output_joint_density_at`] but reuses a prepared input marginal.
pub fn output_joint_with(d1: &InputMarginal, pmix: &PMixtureState, x1: f64, x2: f64) -> f64 {
    let (e, t) = (pmix.eta, pmix.eta_tilde());
    d1.density(e * x1 + t * x2) * normal_pdf(e * x2 - t * x1, 0.0, pmix.v0)
}

fn gaussian2_pdf(x: f64, p: f64, mx: f64, mp: f64, var: f64) -> f64 {
    let (dx, dp) = (x - mx, p - mp);
    (-(dx * dx + dp * dp) / (2.0 * var)).exp() / (2.0 * PI * var)
}

/// Output Wigner function at `(x₁, p₁, x₂, p₂)`: each component's input
/// Wigner function evaluated at the mixed arguments times the vacuum
/// Wigner function of the idle port.
pub fn output_wigner_from_p(pmix: &PMixtureState, point: &[f64; 4]) -> f64 {
    let [x1, p1, x2, p2] = *point;
    let (e, t, v0) = (pmix.eta, pmix.eta_tilde(), pmix.v0);
    let (xi, pi) = (e * x1 + t * x2, e * p1 + t * p2);
    let idle = gaussian2_pdf(e * x2 - t * x1, e * p2 - t * p1, 0.0, 0.0, v0);
    let scale = 2.0 * v0.sqrt();
    let w1: f64 = pmix
        .components
        .iter()
        .map(|c| match *c {
            PComponent::Coherent { weight, alpha } => {
                weight * gaussian2_pdf(xi, pi, scale * alpha.re, scale * alpha.im, v0)
            }
            PComponent::Thermal { weight, nbar } => weight * gaussian2_pdf(xi, pi, 0.0, 0.0, v0 * (2.0 * nbar + 1.0)),
            PComponent::Arcsine { weight, amplitude } => {
                let f = |phi: f64| gaussian2_pdf(xi, pi, scale * amplitude * phi.cos(), 0.0, v0);
                weight * adaptive_simpson(&f, 0.0, PI, PHASE_AVERAGE_TOL) / PI
            }
        })
        .sum();
    w1 * idle
}

/// Sampled curve `(x, value)` for export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
}

impl DensityCurve {
    pub fn sample<F: Fn(f64) -> f64>(grid: &[f64], f: F) -> Self {
        DensityCurve {
            x: grid.to_vec(),
            value: grid.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,value")?;
        for (x, v) in self.x.iter().zip(&self.value) {
            writeln!(w, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{
        modulated_beam, split_balanced, CovarianceMatrix, GaussianBipartiteState, SingleModeState,
    };
    use nalgebra::Matrix4;

    fn reference_state() -> GaussianBipartiteState {
        GaussianBipartiteState::zero_mean(
            CovarianceMatrix::new(
                Matrix4::new(
                    15.96, 0.0, 17.58, 0.0, 0.0, 14.37, 0.0, 13.55, 17.58, 0.0, 22.62, 0.0, 0.0, 13.55, 0.0, 14.81,
                ),
                1.0,
            )
            .unwrap(),
        )
    }

    fn trapezoid<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn product_state_form() {
        let a = SingleModeState::thermal(1.0, 1.0).unwrap();
        let b = SingleModeState::thermal(2.0, 1.0).unwrap();
        let st = GaussianBipartiteState::product(&a, &b).unwrap();
        let f = joint_marginal_form(&st, 0.0, 0.0).unwrap();
        assert!((f.lambda - 1.0 / 6.0).abs() < 1e-14);
        assert!((f.mu - 1.0 / 10.0).abs() < 1e-14);
        assert_eq!(f.nu, 0.0);
        let t = nu_table(&st).unwrap();
        assert!(t.entries().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn reference_nu_values() {
        let t = nu_table(&reference_state()).unwrap();
        let nu00 = 17.58 / (2.0 * (15.96 * 22.62 - 17.58 * 17.58));
        let nu11 = 13.55 / (2.0 * (14.37 * 14.81 - 13.55 * 13.55));
        assert!((t.nu_00 - nu00).abs() < 1e-12);
        assert!((t.nu_00 - 0.1692).abs() < 1e-3);
        assert!((t.nu_90_90 - nu11).abs() < 1e-12);
        assert!(t.nu_0_90.abs() < 1e-14 && t.nu_90_0.abs() < 1e-14);
    }

    #[test]
    fn only_c12_shows_in_one_entry() {
        let mut m = Matrix4::identity() * 2.0;
        m[(0, 3)] = 0.8;
        m[(3, 0)] = 0.8;
        let st = GaussianBipartiteState::zero_mean(CovarianceMatrix::new(m, 1.0).unwrap());
        let t = nu_table(&st).unwrap();
        assert!(t.nu_0_90.abs() > 0.1);
        assert!(t.nu_00.abs() < 1e-14 && t.nu_90_0.abs() < 1e-14 && t.nu_90_90.abs() < 1e-14);
    }

    #[test]
    fn standard_normal_density_at_origin() {
        let f = MarginalForm::new(0.5, 0.5, 0.0, 0.0, 0.0).unwrap();
        assert!((f.density(0.0, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(MarginalForm::new(1.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn conditional_closed_form_matches_general_route() {
        let f = joint_marginal_form(&reference_state(), 0.0, 0.0).unwrap();
        let cm = ConditionalMarginal::new(f, 0.0);
        for &x in &[-7.0, -2.0, 0.0, 0.5, 3.0, 9.0] {
            for side in [Side::Plus, Side::Minus] {
                let a = conditional_marginal_density(&f, x, side);
                let b = cm.density(x, side);
                assert!((a - b).abs() < 1e-12 * (1.0 + a), "x={x} {side:?}: {a} vs {b}");
            }
            let avg = 0.5 * (conditional_marginal_density(&f, x, Side::Plus) + conditional_marginal_density(&f, x, Side::Minus));
            assert!((avg - f.marginal_b(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_nu_conditionals_coincide() {
        let f = MarginalForm::new(0.3, 0.2, 0.0, 0.0, 0.0).unwrap();
        for &x in &[-2.0, 0.1, 1.7] {
            let p = conditional_marginal_density(&f, x, Side::Plus);
            let m = conditional_marginal_density(&f, x, Side::Minus);
            assert!((p - m).abs() < 1e-16 && (p - f.marginal_b(x)).abs() < 1e-15);
        }
        assert_eq!(analytic_peak_separation(&f).unwrap(), 0.0);
    }

    #[test]
    fn reference_peaks_mirror() {
        let f = joint_marginal_form(&reference_state(), 0.0, 0.0).unwrap();
        let cm = ConditionalMarginal::new(f, 0.0);
        let p = cm.peak(Side::Plus).unwrap();
        let m = cm.peak(Side::Minus).unwrap();
        assert!(p > 0.0);
        assert!((p + m).abs() < 1e-9);
        // Brute-force maximization on a fine grid agrees.
        let grid = linspace(-2.0, 10.0, 120_001);
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| cm.density(*a, Side::Plus).total_cmp(&cm.density(*b, Side::Plus)))
            .unwrap();
        assert!((best - p).abs() < 2e-4);
    }

    #[test]
    fn separation_increases_with_depth() {
        let mut prev = -1.0;
        for i in 0..=50 {
            let d = 0.1 * i as f64;
            let st = split_balanced(&modulated_beam(d, d).unwrap()).unwrap();
            let f = joint_marginal_form(&st, 0.0, 0.0).unwrap();
            let sep = analytic_peak_separation(&f).unwrap();
            assert!(sep > prev || (i == 0 && sep == 0.0), "d={d}: {sep} after {prev}");
            prev = sep;
        }
    }

    #[test]
    fn mixed_threshold_conditionals_average_out() {
        let f = joint_marginal_form(&reference_state(), 0.0, 0.0).unwrap().with_means(0.7, -1.1);
        let cm = ConditionalMarginal::new(f, -1.5);
        let (pp, pm) = (cm.probability(Side::Plus), cm.probability(Side::Minus));
        assert!((pp + pm - 1.0).abs() < 1e-15);
        for &x in &[-8.0, -1.0, 0.0, 4.0] {
            let mix = pp * cm.density(x, Side::Plus) + pm * cm.density(x, Side::Minus);
            assert!((mix - f.marginal_b(x)).abs() < 1e-14);
        }
        let norm = trapezoid(|x| cm.density(x, Side::Minus), -40.0, 40.0, 8000);
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn input_marginal_cases() {
        let vac = input_marginal_d1(&[PComponent::Coherent { weight: 1.0, alpha: Complex64::new(0.0, 0.0) }], 1.0).unwrap();
        assert!((vac.density(0.3) - normal_pdf(0.3, 0.0, 1.0)).abs() < 1e-16);

        // ½ vacuum + ½ thermal: excess kurtosis of a variance mixture.
        let mix = input_marginal_d1(
            &[
                PComponent::Coherent { weight: 0.5, alpha: Complex64::new(0.0, 0.0) },
                PComponent::Thermal { weight: 0.5, nbar: 2.0 },
            ],
            1.0,
        )
        .unwrap();
        let m2 = trapezoid(|x| x * x * mix.density(x), -40.0, 40.0, 8000);
        let m4 = trapezoid(|x| x.powi(4) * mix.density(x), -40.0, 40.0, 8000);
        assert!((m2 - 3.0).abs() < 1e-9);
        assert!(m4 / (m2 * m2) > 3.0 + 0.5);

        // Arcsine with large amplitude: peaks near ±2√v0·α₀.
        let arc = input_marginal_d1(&[PComponent::Arcsine { weight: 1.0, amplitude: 5.0 }], 1.0).unwrap();
        let grid = linspace(0.0, 15.0, 3001);
        let peak = grid.iter().copied().max_by(|a, b| arc.density(*a).total_cmp(&arc.density(*b))).unwrap();
        assert!((peak - 10.0).abs() < 1.0, "peak {peak}");
        assert!(arc.density(0.0) < 0.5 * arc.density(peak));
        let norm = trapezoid(|x| arc.density(x), -30.0, 30.0, 6000);
        assert!((norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixture_validation() {
        assert!(PMixtureState::new(vec![PComponent::Thermal { weight: 0.4, nbar: 1.0 }], 0.7, 1.0).is_err());
        assert!(PMixtureState::new(vec![PComponent::Arcsine { weight: 1.0, amplitude: 0.0 }], 0.7, 1.0).is_err());
        assert!(PMixtureState::new(vec![PComponent::Thermal { weight: 1.0, nbar: -1.0 }], 0.7, 1.0).is_err());
        let ok = PMixtureState::new(vec![PComponent::Thermal { weight: 1.0, nbar: 1.0 }], 0.7, 1.0).unwrap();
        let json = serde_json::to_string(&ok).unwrap();
        assert!(json.contains(r#""kind":"thermal""#));
        let back: PMixtureState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ok);
        let bad = r#"{"components":[{"kind":"thermal","weight":0.5,"nbar":1.0}],"eta":0.7}"#;
        assert!(serde_json::from_str::<PMixtureState>(bad).is_err());
    }

    #[test]
    fn coherent_output_factorizes() {
        let pm = PMixtureState::new(
            vec![PComponent::Coherent { weight: 1.0, alpha: Complex64::new(1.2, 0.0) }],
            std::f64::consts::FRAC_1_SQRT_2,
            1.0,
        )
        .unwrap();
        assert!(pm.is_coherent());
        // Product of N(2ηα, 1) and N(2η̃α, 1).
        let m = 2.0 * 1.2 * std::f64::consts::FRAC_1_SQRT_2;
        for &(x1, x2) in &[(0.0, 0.0), (1.0, 2.0), (-1.0, 3.5)] {
            let d = output_joint_density(&pm, x1, x2);
            let e = normal_pdf(x1, m, 1.0) * normal_pdf(x2, m, 1.0);
            assert!((d - e).abs() < 1e-15);
        }
    }

    #[test]
    fn half_vacuum_units_bridge() {
        // At v0 = ½ the joint density is (1/√π)·D₁(ηx₁+η̃x₂)·exp(−(ηx₂−η̃x₁)²).
        let pm = PMixtureState::new(
            vec![
                PComponent::Coherent { weight: 0.5, alpha: Complex64::new(0.0, 0.0) },
                PComponent::Thermal { weight: 0.5, nbar: 3.0 },
            ],
            0.6,
            0.5,
        )
        .unwrap();
        let d1 = input_marginal_d1(pm.components(), 0.5).unwrap();
        let (e, t) = (0.6, 0.8);
        for &(x1, x2) in &[(0.1, -0.4), (1.5, 2.0)] {
            let lit = d1.density(e * x1 + t * x2) * (-(e * x2 - t * x1).powi(2)).exp() / PI.sqrt();
            assert!((output_joint_density(&pm, x1, x2) - lit).abs() < 1e-15);
        }
    }

    #[test]
    fn curve_csv_export() {
        let c = DensityCurve::sample(&linspace(-1.0, 1.0, 3), |x| x * x);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,value\n"));
        assert_eq!(s.lines().count(), 4);
        assert!(c.to_json().unwrap().contains("\"value\""));
    }
}
