//! From records to a verdict: threshold splits, histograms, peak
//! separations with bootstrap errors, two-sample χ² tests, and the
//! decision rules for Gaussian and mixture preparations.

pub mod chisq;
pub mod histogram;
pub mod peak;
pub mod sweep;
pub mod verdict;

pub use chisq::{chi_square_counts, chi_square_two_sample, ks_uniform, ChiSquareResult};
pub use histogram::{bin_edges, estimate_density, Binning, Histogram};
pub use peak::{estimate_peak, PeakEstimate, PeakMethod};
pub use sweep::{parse_depths, phase_modulated_state, sweep_modulation, write_sweep_csv, SweepConfig, SweepRow};
pub use verdict::{
    conditional_histograms, separation_statistic, split_by_threshold, verdict_gaussian, verdict_gaussian_pairs, verdict_mixture,
    ConditionalHistograms, Decision, DiscordVerdict, MixtureReport, PairResult, Separation, SideReport,
    VerifyOptions,
};
