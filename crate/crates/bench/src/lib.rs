//! Shared fixtures for the benchmarks.

use cvdiscord_core::{CovarianceMatrix, GaussianBipartiteState};
use nalgebra::Matrix4;

/// Correlated two-mode state with unequal quadrature blocks.
pub fn correlated_state() -> GaussianBipartiteState {
    let m = Matrix4::new(
        15.96, 0.0, 17.58, 0.0, //
        0.0, 14.37, 0.0, 13.55, //
        17.58, 0.0, 22.62, 0.0, //
        0.0, 13.55, 0.0, 14.81,
    );
    GaussianBipartiteState::zero_mean(CovarianceMatrix::new(m, 1.0).expect("physical covariance"))
}
