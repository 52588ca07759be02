//! Small numerical kernels shared across modules: normal tail ratios,
//! bracketed root finding, adaptive quadrature, and seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Upper tail `P(Z > z)` of the standard normal.
#[inline]
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Density of `N(mean, var)` at `x`.
#[inline]
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Inverse Mills ratio `φ(z) / Q(z)`, stable for large positive `z` where
/// the tail probability underflows.
pub fn inverse_mills(z: f64) -> f64 {
    if z < 5.0 {
        std_normal_pdf(z) / std_normal_sf(z)
    } else {
        // Laplace continued fraction for Q(z)/φ(z).
        let mut frac = 0.0;
        for k in (1..=80).rev() {
            frac = k as f64 / (z + frac);
        }
        z + frac
    }
}

/// Root of a monotonically decreasing function. The bracket `[lo, hi]` is
/// widened (bounded number of doublings) until it straddles a sign change,
/// then bisected until its width is below `tol`.
pub fn bisect_decreasing<F>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut widen = 0;
    while f(lo) < 0.0 || f(hi) > 0.0 {
        let w = hi - lo;
        if f(lo) < 0.0 {
            lo -= w;
        }
        if f(hi) > 0.0 {
            hi += w;
        }
        widen += 1;
        if widen > 60 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::numeric("could not bracket root"));
        }
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if !v.is_finite() {
            return Err(Error::numeric("non-finite derivative during root search"));
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::numeric(format!(
        "root search did not converge in {max_iter} iterations"
    )))
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Depth floor keeps coarse initial panels from accepting a lucky estimate.
    if depth == 0 || (depth < 44 && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// SplitMix64 finalizer; derives independent child seeds from `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based substream: the generator for `stream` under `seed` does not
/// depend on how many other streams exist or which thread draws from it.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - r, mean + r)
}
