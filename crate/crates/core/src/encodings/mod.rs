//! Deterministic per-token feature encoders: cyclical time and
//! spherical-harmonic location features fed to a sinusoidal network.

mod harmonics;
mod siren;
mod time_features;

pub use harmonics::{
    basis_len, gauss_legendre, gram_matrix_monte_carlo, gram_matrix_quadrature, harmonic_basis,
    harmonic_matrix, HarmonicBasis, MAX_DEGREE,
};
pub use siren::{location_embedding, siren_forward, LocationEncoderParams, SirenLayer, SirenVars};
pub use time_features::{encode_time, TimeFeatures};
