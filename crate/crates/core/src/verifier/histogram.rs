use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::sampler::format_f64;

pub const MIN_BINS: usize = 50;
pub const MAX_BINS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

/// How bin edges are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    /// Freedman–Diaconis width, bin count clamped to `[MIN_BINS, MAX_BINS]`,
    /// range padded by one bin on each side.
    FreedmanDiaconis,
    /// `bins` equal-width bins over the data range, padded as above.
    Count { bins: usize },
    /// Explicit ascending edges; values outside are not counted.
    Fixed { edges: Vec<f64> },
}

impl Histogram {
    pub fn new(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if edges.len() < 2 || counts.len() + 1 != edges.len() {
            return Err(Error::DimensionMismatch(edges.len(), counts.len()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain("histogram edges must be finite and strictly ascending".into()));
        }
        let total = counts.iter().sum();
        Ok(Histogram { edges, counts, total })
    }

    /// Counts `values` into the given edges.
    pub fn from_edges(edges: Vec<f64>, values: &[f64]) -> Result<Self> {
        let mut counts = vec![0u64; edges.len().saturating_sub(1)];
        let h = Histogram::new(edges, counts.clone())?;
        let (lo, hi) = (h.edges[0], h.edges[h.edges.len() - 1]);
        for &x in values {
            if x < lo || x > hi || !x.is_finite() {
                continue;
            }
            // Bins are [e_i, e_{i+1}); the top edge closes the last bin.
            let i = h.edges.partition_point(|&e| e <= x).saturating_sub(1);
            let last = counts.len() - 1;
            counts[i.min(last)] += 1;
        }
        Histogram::new(h.edges, counts)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Same edges, different counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        Histogram::new(self.edges.clone(), counts)
    }

    /// Density estimate per bin (integrates to 1 over the edges).
    pub fn density(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().zip(self.widths()).map(|(&c, w)| c as f64 / (n * w)).collect()
    }

    /// Mean and variance using bin centers.
    pub fn binned_moments(&self) -> (f64, f64) {
        let n = self.total as f64;
        let c = self.centers();
        let mean = c.iter().zip(&self.counts).map(|(x, &k)| x * k as f64).sum::<f64>() / n;
        let var = c.iter().zip(&self.counts).map(|(x, &k)| (x - mean).powi(2) * k as f64).sum::<f64>() / n;
        (mean, var)
    }

    pub fn same_edges(&self, other: &Histogram) -> bool {
        self.edges == other.edges
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "left_edge,right_edge,count")?;
        for (e, c) in self.edges.windows(2).zip(&self.counts) {
            writeln!(w, "{},{},{}", format_f64(e[0]), format_f64(e[1]), c)?;
        }
        Ok(())
    }
}

/// Quantile by linear interpolation on the sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Edges for `values` under the binning rule.
pub fn bin_edges(values: &[f64], binning: &Binning) -> Result<Vec<f64>> {
    if let Binning::Fixed { edges } = binning {
        return Ok(edges.clone());
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("cannot bin an empty sample".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("sample contains non-finite values".into()));
    }
    let bins = match binning {
        Binning::Count { bins } => (*bins).max(1),
        _ => {
            let mut sorted = values.to_vec();
            sorted.sort_unstable_by(f64::total_cmp);
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let h = 2.0 * iqr / (values.len() as f64).cbrt();
            let raw = if h > 0.0 { ((hi - lo) / h).ceil() } else { MIN_BINS as f64 };
            (raw as usize).clamp(MIN_BINS, MAX_BINS)
        }
    };
    let span = if hi > lo { hi - lo } else { 1.0 };
    // Slightly wide bins keep the maximum out of the upper padding bin.
    let w = span / bins as f64 * (1.0 + 1e-9);
    let start = if hi > lo { lo } else { lo - 0.5 };
    Ok((0..=bins + 2).map(|i| start + (i as f64 - 1.0) * w).collect())
}

pub fn estimate_density(values: &[f64], binning: &Binning) -> Result<Histogram> {
    Histogram::from_edges(bin_edges(values, binning)?, values)
}
