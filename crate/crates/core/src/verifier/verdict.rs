use serde::{Deserialize, Serialize};

use super::chisq::{chi_square_two_sample, ChiSquareResult};
use super::histogram::{bin_edges, Binning, Histogram};
use super::peak::{estimate_peak, PeakEstimate, PeakMethod, DEFAULT_BOOTSTRAP};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::sampler::{RecordSet, QUADRATURE_PAIRS};

pub const DEFAULT_K_MIN: f64 = 3.0;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Largest allowed relative spread of per-pair sample sizes.
pub const PAIR_SIZE_TOLERANCE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub k_min: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub method: PeakMethod,
    pub binning: Binning,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            k_min: DEFAULT_K_MIN,
            alpha: DEFAULT_ALPHA,
            replicates: DEFAULT_BOOTSTRAP,
            method: PeakMethod::default(),
            binning: Binning::FreedmanDiaconis,
            seed: 0,
        }
    }
}

impl VerifyOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0 && self.k_min.is_finite()) {
            return Err(Error::Domain(format!("k_min must be positive, got {}", self.k_min)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.replicates < 2 {
            return Err(Error::Domain("at least 2 bootstrap replicates are needed".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Discordant,
    NotDetected,
}

/// Partition on Alice's outcome: `x_A ≥ t` goes to the plus side.
pub fn split_by_threshold(rs: &RecordSet, t: f64) -> Result<(RecordSet, RecordSet)> {
    if rs.is_empty() {
        return Err(Error::InsufficientData("cannot split an empty record set".into()));
    }
    let (plus, minus): (Vec<_>, Vec<_>) = rs.records.iter().partition(|r| r.x_a >= t);
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::DegenerateSplit {
            plus: plus.len(),
            minus: minus.len(),
        });
    }
    let side = |records| RecordSet {
        records,
        provenance: rs.provenance.clone(),
    };
    Ok((side(plus), side(minus)))
}

/// Unconditional and conditional histograms of Bob's outcome on common edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalHistograms {
    pub unconditional: Histogram,
    pub plus: Histogram,
    pub minus: Histogram,
}

pub fn conditional_histograms(rs: &RecordSet, t: f64, binning: &Binning) -> Result<ConditionalHistograms> {
    let (plus, minus) = split_by_threshold(rs, t)?;
    let all = rs.x_b();
    let edges = bin_edges(&all, binning)?;
    Ok(ConditionalHistograms {
        unconditional: Histogram::from_edges(edges.clone(), &all)?,
        plus: Histogram::from_edges(edges.clone(), &plus.x_b())?,
        minus: Histogram::from_edges(edges, &minus.x_b())?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub delta: f64,
    pub sigma_delta: f64,
    pub plus: PeakEstimate,
    pub minus: PeakEstimate,
    pub n_plus: u64,
    pub n_minus: u64,
}

impl Separation {
    pub fn significance(&self) -> f64 {
        if self.sigma_delta > 0.0 {
            self.delta.abs() / self.sigma_delta
        } else if self.delta == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn separation_from(h: &ConditionalHistograms, opts: &VerifyOptions, seed: u64) -> Result<Separation> {
    let plus = estimate_peak(&h.plus, opts.method, opts.replicates, derive_seed(seed, 1))?;
    let minus = estimate_peak(&h.minus, opts.method, opts.replicates, derive_seed(seed, 2))?;
    Ok(Separation {
        delta: plus.location - minus.location,
        sigma_delta: plus.std_error.hypot(minus.std_error),
        plus,
        minus,
        n_plus: h.plus.total(),
        n_minus: h.minus.total(),
    })
}

fn pair_records(rs: &RecordSet, theta_a: f64, theta_b: f64) -> Result<RecordSet> {
    let sub = rs.for_pair(theta_a, theta_b);
    if sub.is_empty() {
        return Err(Error::IncompleteInput(format!(
            "no records for phase pair (θ_A={theta_a:.6}, θ_B={theta_b:.6})"
        )));
    }
    Ok(sub)
}

/// Peak separation of Bob's conditionals at one phase pair.
pub fn separation_statistic(
    rs: &RecordSet,
    t: f64,
    theta_a: f64,
    theta_b: f64,
    opts: &VerifyOptions,
) -> Result<Separation> {
    let sub = pair_records(rs, theta_a, theta_b)?;
    separation_from(&conditional_histograms(&sub, t, &opts.binning)?, opts, opts.seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    #[serde(rename = "theta_A")]
    pub theta_a: f64,
    #[serde(rename = "theta_B")]
    pub theta_b: f64,
    pub delta: f64,
    pub sigma_delta: f64,
    pub k: f64,
    /// Smaller of the two conditional-vs-unconditional p-values.
    pub chi2_p: f64,
    pub n: u64,
    pub n_plus: u64,
    pub n_minus: u64,
    pub peak_plus: PeakEstimate,
    pub peak_minus: PeakEstimate,
    pub chi2_plus: ChiSquareResult,
    pub chi2_minus: ChiSquareResult,
}

impl PairResult {
    pub fn triggers(&self, k_min: f64, alpha: f64) -> bool {
        self.k >= k_min || self.chi2_p < alpha
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscordVerdict {
    pub mode: String,
    pub threshold: f64,
    pub per_pair: Vec<PairResult>,
    pub decision: Decision,
    pub config: serde_json::Value,
}

impl DiscordVerdict {
    pub fn pair(&self, theta_a: f64, theta_b: f64) -> Option<&PairResult> {
        self.per_pair
            .iter()
            .find(|p| (p.theta_a - theta_a).abs() < 1e-9 && (p.theta_b - theta_b).abs() < 1e-9)
    }

    /// Pairs whose statistics cross the decision rule.
    pub fn triggering_pairs(&self) -> Vec<(f64, f64)> {
        let (k, a) = (self.config["k_min"].as_f64().unwrap_or(DEFAULT_K_MIN), self.config["alpha"].as_f64().unwrap_or(DEFAULT_ALPHA));
        self.per_pair
            .iter()
            .filter(|p| p.triggers(k, a))
            .map(|p| (p.theta_a, p.theta_b))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn analyse_pair(sub: &RecordSet, t: f64, theta: (f64, f64), opts: &VerifyOptions, seed: u64) -> Result<PairResult> {
    let h = conditional_histograms(sub, t, &opts.binning)?;
    let sep = separation_from(&h, opts, seed)?;
    let chi2_plus = chi_square_two_sample(&h.plus, &h.unconditional)?;
    let chi2_minus = chi_square_two_sample(&h.minus, &h.unconditional)?;
    Ok(PairResult {
        theta_a: theta.0,
        theta_b: theta.1,
        delta: sep.delta,
        sigma_delta: sep.sigma_delta,
        k: sep.significance(),
        chi2_p: chi2_plus.p_value.min(chi2_minus.p_value),
        n: h.unconditional.total(),
        n_plus: sep.n_plus,
        n_minus: sep.n_minus,
        peak_plus: sep.plus,
        peak_minus: sep.minus,
        chi2_plus,
        chi2_minus,
    })
}

/// Four-pair decision for Gaussian states: discordant when any pair's peak
/// separation reaches `k_min` standard errors or any conditional differs
/// from the unconditional marginal at level `alpha`.
pub fn verdict_gaussian(rs: &RecordSet, t: f64, opts: &VerifyOptions) -> Result<DiscordVerdict> {
    verdict_gaussian_pairs(rs, t, &QUADRATURE_PAIRS, opts)
}

/// [`verdict_gaussian`] restricted to the given phase pairs.
pub fn verdict_gaussian_pairs(rs: &RecordSet, t: f64, pairs: &[(f64, f64)], opts: &VerifyOptions) -> Result<DiscordVerdict> {
    opts.validate()?;
    if pairs.is_empty() {
        return Err(Error::IncompleteInput("no phase pairs requested".into()));
    }
    let subs = pairs
        .iter()
        .map(|&(a, b)| pair_records(rs, a, b))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = subs.iter().map(RecordSet::len).collect();
    let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
    if (hi - lo) as f64 > PAIR_SIZE_TOLERANCE * hi as f64 {
        return Err(Error::Domain(format!(
            "per-pair sample sizes differ by more than {:.0}%: {sizes:?}",
            100.0 * PAIR_SIZE_TOLERANCE
        )));
    }
    let per_pair = subs
        .iter()
        .zip(pairs.iter().copied())
        .enumerate()
        .map(|(i, (sub, pair))| analyse_pair(sub, t, pair, opts, derive_seed(opts.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let decision = if per_pair.iter().any(|p| p.triggers(opts.k_min, opts.alpha)) {
        Decision::Discordant
    } else {
        Decision::NotDetected
    };
    Ok(DiscordVerdict {
        mode: "gaussian".into(),
        threshold: t,
        per_pair,
        decision,
        config: config_echo(opts, t),
    })
}

fn config_echo(opts: &VerifyOptions, t: f64) -> serde_json::Value {
    let mut v = serde_json::to_value(opts).unwrap_or_default();
    v["threshold"] = t.into();
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub n: u64,
    pub chi2: ChiSquareResult,
    pub mean: f64,
    pub variance: f64,
    pub mean_shift: f64,
    pub variance_ratio: f64,
    pub peak: Option<PeakEstimate>,
}

/// Comparison of each conditional marginal with the unconditional one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub mode: String,
    pub threshold: f64,
    #[serde(rename = "theta_A")]
    pub theta_a: f64,
    #[serde(rename = "theta_B")]
    pub theta_b: f64,
    pub n: u64,
    pub unconditional_mean: f64,
    pub unconditional_variance: f64,
    pub plus: SideReport,
    pub minus: SideReport,
    pub plus_vs_minus: ChiSquareResult,
    pub decision: Decision,
    pub config: serde_json::Value,
}

impl MixtureReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn min_p(&self) -> f64 {
        self.plus.chi2.p_value.min(self.minus.chi2.p_value)
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

/// Verdict for beam-split P-mixtures: discordant when either conditional
/// marginal differs from the unconditional one at level `alpha`.
pub fn verdict_mixture(rs: &RecordSet, t: f64, opts: &VerifyOptions) -> Result<MixtureReport> {
    opts.validate()?;
    let first = rs
        .records
        .first()
        .ok_or_else(|| Error::InsufficientData("empty record set".into()))?;
    let (theta_a, theta_b) = (first.theta_a, first.theta_b);
    if rs.records.iter().any(|r| !r.matches_pair(theta_a, theta_b)) {
        return Err(Error::Domain("mixture verdict expects records from a single phase pair".into()));
    }
    let (plus, minus) = split_by_threshold(rs, t)?;
    let h = conditional_histograms(rs, t, &opts.binning)?;
    let (um, uv) = mean_var(&rs.x_b());
    let side = |set: &RecordSet, hist: &Histogram, tag: u64| -> Result<SideReport> {
        let (m, v) = mean_var(&set.x_b());
        Ok(SideReport {
            n: hist.total(),
            chi2: chi_square_two_sample(hist, &h.unconditional)?,
            mean: m,
            variance: v,
            mean_shift: m - um,
            variance_ratio: v / uv,
            peak: estimate_peak(hist, opts.method, opts.replicates, derive_seed(opts.seed, tag)).ok(),
        })
    };
    let plus_r = side(&plus, &h.plus, 1)?;
    let minus_r = side(&minus, &h.minus, 2)?;
    let decision = if plus_r.chi2.p_value < opts.alpha || minus_r.chi2.p_value < opts.alpha {
        Decision::Discordant
    } else {
        Decision::NotDetected
    };
    Ok(MixtureReport {
        mode: "mixture".into(),
        threshold: t,
        theta_a,
        theta_b,
        n: h.unconditional.total(),
        unconditional_mean: um,
        unconditional_variance: uv,
        plus_vs_minus: chi_square_two_sample(&h.plus, &h.minus)?,
        plus: plus_r,
        minus: minus_r,
        decision,
        config: config_echo(opts, t),
    })
}
