use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::histogram::Histogram;
use crate::error::{Error, Result};

/// Minimum expected count per merged bin, for both samples.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Groups adjacent bins, left to right, until each group's expected count
/// under the pooled null is at least [`MIN_EXPECTED`] for both samples. A
/// short remainder joins the last group.
fn merge_bins(c1: &[u64], c2: &[u64], n1: f64, n2: f64) -> Vec<(f64, f64)> {
    let n = n1 + n2;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let (mut a, mut b) = (0.0, 0.0);
    for (&x, &y) in c1.iter().zip(c2) {
        a += x as f64;
        b += y as f64;
        let pooled = a + b;
        if pooled * n1.min(n2) / n >= MIN_EXPECTED {
            out.push((a, b));
            a = 0.0;
            b = 0.0;
        }
    }
    if a + b > 0.0 {
        match out.last_mut() {
            Some(last) => {
                last.0 += a;
                last.1 += b;
            }
            None => out.push((a, b)),
        }
    }
    out
}

/// Two-sample χ² homogeneity test on histograms with common edges.
pub fn chi_square_two_sample(h1: &Histogram, h2: &Histogram) -> Result<ChiSquareResult> {
    if !h1.same_edges(h2) {
        return Err(Error::DimensionMismatch(h1.edges().len(), h2.edges().len()));
    }
    chi_square_counts(h1.counts(), h2.counts())
}

pub fn chi_square_counts(c1: &[u64], c2: &[u64]) -> Result<ChiSquareResult> {
    if c1.len() != c2.len() {
        return Err(Error::DimensionMismatch(c1.len(), c2.len()));
    }
    let n1 = c1.iter().sum::<u64>() as f64;
    let n2 = c2.iter().sum::<u64>() as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::InsufficientData("a histogram is empty".into()));
    }
    let merged = merge_bins(c1, c2, n1, n2);
    if merged.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} bin(s) left after merging to expected count {MIN_EXPECTED}",
            merged.len()
        )));
    }
    let (r1, r2) = ((n2 / n1).sqrt(), (n1 / n2).sqrt());
    let statistic: f64 = merged
        .iter()
        .map(|&(a, b)| {
            let d = r1 * a - r2 * b;
            d * d / (a + b)
        })
        .sum();
    let dof = merged.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::numeric(e.to_string()))?;
    let p_value = if statistic == 0.0 { 1.0 } else { dist.sf(statistic).clamp(0.0, 1.0) };
    Ok(ChiSquareResult { statistic, dof, p_value })
}

/// One-sample Kolmogorov–Smirnov test against U(0, 1); returns `(D, p)`
/// with the asymptotic Kolmogorov distribution.
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_sf(lambda))
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_histograms() {
        let h = Histogram::new(vec![0.0, 1.0, 2.0, 3.0], vec![40, 80, 40]).unwrap();
        let r = chi_square_two_sample(&h, &h).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn scaled_copy_is_homogeneous() {
        let r = chi_square_counts(&[10, 20, 30], &[20, 40, 60]).unwrap();
        assert!(r.statistic < 1e-12);
    }

    #[test]
    fn sparse_bins_merge() {
        // Tails merge into neighbours; too little data overall is an error.
        let r = chi_square_counts(&[1, 1, 50, 50, 1, 1], &[1, 0, 50, 50, 0, 2]).unwrap();
        assert_eq!(r.dof, 1);
        assert!(matches!(chi_square_counts(&[2, 2], &[2, 2]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn different_shapes_reject() {
        let r = chi_square_counts(&[100, 300, 100], &[300, 100, 300]).unwrap();
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_tail() {
        // Critical value at 5% is about 1.358.
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&grid).1 > 0.99);
        let skew: Vec<f64> = grid.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&skew).1 < 1e-6);
    }
}
