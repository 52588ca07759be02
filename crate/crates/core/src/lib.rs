//! Gaussian and P-mixture two-mode states, their homodyne marginals, a
//! record sampler, and a statistical verifier for sign-conditioned peak
//! separation.

pub mod error;
pub mod fock;
pub mod marginals;
pub mod numeric;
pub mod sampler;
pub mod states;
pub mod verifier;

pub use error::{Error, Result};
pub use marginals::{MarginalForm, NuTable, PComponent, PMixtureState, Side};
pub use states::{BeamSplitter, CovarianceMatrix, GaussianBipartiteState, QuadratureMeans, SingleModeState};
pub use sampler::{HomodyneRecord, ModulationScheme, RecordSet, SimulationConfig};
pub use verifier::{Decision, DiscordVerdict, Histogram, MixtureReport, PeakEstimate, VerifyOptions};
pub use fock::FockDensityMatrix;
