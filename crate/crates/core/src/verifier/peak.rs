use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::Histogram;
use crate::error::{Error, Result};
use crate::numeric::stream_rng;

pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Half-width of the log-count fit window in units of the sample's
/// standard deviation.
pub const FIT_WINDOW: f64 = 1.2;
const FIT_ITERATIONS: usize = 6;
const SMOOTH_SIGMA_BINS: f64 = 2.0;
const SMOOTH_RADIUS_BINS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeakMethod {
    /// Weighted cubic fit to log-counts in a window around the mode,
    /// iterated to re-center the window.
    #[default]
    LogPolyFit,
    /// Parabola through the maximal bin and its two neighbours.
    BinParabolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub location: f64,
    pub std_error: f64,
    pub method: PeakMethod,
    /// The mode sits in the first or last bin.
    pub boundary: bool,
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

fn smoothed(counts: &[u64]) -> Vec<f64> {
    let r = SMOOTH_RADIUS_BINS as isize;
    let kernel: Vec<f64> = (-r..=r)
        .map(|k| (-0.5 * (k as f64 / SMOOTH_SIGMA_BINS).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = counts.len() as isize;
    (0..n)
        .map(|i| {
            (-r..=r)
                .filter(|k| (0..n).contains(&(i + k)))
                .map(|k| kernel[(k + r) as usize] * counts[(i + k) as usize] as f64)
                .sum::<f64>()
                / norm
        })
        .collect()
}

fn bin_parabolic(h: &Histogram) -> (f64, bool) {
    let counts = h.counts();
    let centers = h.centers();
    let i = argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    if i == 0 || i + 1 == counts.len() {
        return (centers[i], true);
    }
    let (a, b, c) = (counts[i - 1] as f64, counts[i] as f64, counts[i + 1] as f64);
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let w = 0.5 * (centers[i + 1] - centers[i - 1]);
    (centers[i] + offset.clamp(-0.5, 0.5) * w, false)
}

/// Weighted least-squares polynomial in `u` fitted to `ln n` with weights `n`.
fn fit_log_poly(u: &[f64], n: &[f64], degree: usize) -> Option<Vec<f64>> {
    if u.len() < degree + 2 {
        return None;
    }
    let rows = u.len();
    let a = DMatrix::from_fn(rows, degree + 1, |r, c| n[r].sqrt() * u[r].powi(c as i32));
    let y = DVector::from_fn(rows, |r, _| n[r].sqrt() * n[r].ln());
    let svd = a.svd(true, true);
    svd.solve(&y, 1e-12).ok().map(|s| s.iter().copied().collect())
}

/// Stationary point with negative curvature nearest the origin.
fn poly_vertex(coef: &[f64]) -> Option<f64> {
    match coef.len() {
        3 => (coef[2] < 0.0).then(|| -coef[1] / (2.0 * coef[2])),
        4 => {
            let (b, c, d) = (coef[1], 2.0 * coef[2], 3.0 * coef[3]);
            let curv = |u: f64| 2.0 * coef[2] + 6.0 * coef[3] * u;
            let roots: Vec<f64> = if d.abs() < 1e-14 * (b.abs() + c.abs()).max(1e-300) {
                if c != 0.0 { vec![-b / c] } else { vec![] }
            } else {
                let disc = c * c - 4.0 * d * b;
                if disc < 0.0 {
                    vec![]
                } else {
                    // Numerically stable quadratic roots.
                    let q = -0.5 * (c + c.signum() * disc.sqrt());
                    let mut r = vec![q / d];
                    if q != 0.0 {
                        r.push(b / q);
                    }
                    r
                }
            };
            roots
                .into_iter()
                .filter(|&u| curv(u) < 0.0)
                .min_by(|x, y| x.abs().total_cmp(&y.abs()))
        }
        _ => None,
    }
}

fn log_poly_fit(h: &Histogram) -> Option<f64> {
    let centers = h.centers();
    let counts: Vec<f64> = h.counts().iter().map(|&c| c as f64).collect();
    let (_, var) = h.binned_moments();
    let scale = var.sqrt();
    if !(scale > 0.0) {
        return None;
    }
    let mut m = centers[argmax(&smoothed(h.counts()))];
    for _ in 0..FIT_ITERATIONS {
        let (u, n): (Vec<f64>, Vec<f64>) = centers
            .iter()
            .zip(&counts)
            .filter(|&(&c, &k)| k > 0.0 && (c - m).abs() <= FIT_WINDOW * scale)
            .map(|(&c, &k)| ((c - m) / scale, k))
            .unzip();
        let step = fit_log_poly(&u, &n, 3)
            .and_then(|c| poly_vertex(&c))
            .filter(|v| v.abs() <= FIT_WINDOW)
            .or_else(|| fit_log_poly(&u, &n, 2).and_then(|c| poly_vertex(&c)).filter(|v| v.abs() <= FIT_WINDOW))?;
        m += step * scale;
        if step.abs() < 1e-10 {
            break;
        }
    }
    Some(m)
}

fn point_estimate(h: &Histogram, method: PeakMethod) -> (f64, bool) {
    let (bp, boundary) = bin_parabolic(h);
    match method {
        PeakMethod::BinParabolic => (bp, boundary),
        PeakMethod::LogPolyFit if boundary => (bp, true),
        PeakMethod::LogPolyFit => (log_poly_fit(h).unwrap_or(bp), false),
    }
}

/// Multinomial redraw of the histogram's counts with the same total, via
/// sequential conditional binomials.
pub fn resample_counts<R: Rng>(h: &Histogram, rng: &mut R) -> Vec<u64> {
    let mut remaining = h.total();
    let mut mass = h.total() as f64;
    h.counts()
        .iter()
        .map(|&c| {
            if remaining == 0 || c == 0 {
                return 0;
            }
            let p = (c as f64 / mass).min(1.0);
            mass -= c as f64;
            let k = if p >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, p).map_or(0, |b| b.sample(rng))
            };
            remaining -= k;
            k
        })
        .collect()
}

/// Mode of the histogram with a bootstrap standard error. Resampling the
/// records with replacement and rebinning them on the same edges is the
/// same as a multinomial redraw of the counts, which is what is done here.
pub fn estimate_peak(h: &Histogram, method: PeakMethod, replicates: usize, seed: u64) -> Result<PeakEstimate> {
    if h.occupied_bins() < 3 {
        return Err(Error::InsufficientData(format!(
            "peak estimation needs at least 3 occupied bins, found {}",
            h.occupied_bins()
        )));
    }
    let (location, boundary) = point_estimate(h, method);
    let std_error = if replicates < 2 {
        0.0
    } else {
        let reps: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed, b as u64);
                let counts = resample_counts(h, &mut rng);
                Histogram::new(h.edges().to_vec(), counts).map(|r| point_estimate(&r, method).0)
            })
            .collect::<Result<_>>()?;
        let mean = reps.iter().sum::<f64>() / reps.len() as f64;
        (reps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
    };
    if !std_error.is_finite() {
        return Err(Error::numeric("bootstrap standard error is not finite"));
    }
    Ok(PeakEstimate {
        location,
        std_error,
        method,
        boundary,
    })
}
