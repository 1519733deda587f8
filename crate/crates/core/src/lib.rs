//! Exact spectral analysis of Boolean functions on the p-biased hypercube.
//!
//! The crate computes p-biased Fourier spectra, influences, spectral entropy
//! and restriction moments exactly, and ships batch checkers and an
//! extremal-function search built on top of them.
//!
//! ```
//! use bblab_core::{forward_transform, spectral_entropy, Bias, BooleanFunction};
//!
//! let dictator: BooleanFunction = "01".parse().unwrap();
//! let bias = Bias::new(0.3).unwrap();
//! let ent = spectral_entropy(&forward_transform(&dictator, bias)).unwrap();
//! assert!((ent.value() - bias.conjecture_constant()).abs() < 1e-12);
//! ```

pub mod cube;
pub mod error;
pub mod quantities;
pub mod report;
pub mod restriction;
pub mod rng;
pub mod search;
pub mod transform;
pub mod verify;

/// Largest supported number of coordinates for dense tables.
pub const MAX_VARS: usize = 24;

pub use cube::{
    binary_entropy, flip_point, parse_truth_table, point_measure, Bias, BooleanFunction, PointMask,
    SubsetMask,
};
pub use error::{Error, Result};
pub use quantities::{
    cross_correlation, derivative_spectrum, influence, influences, influences_spectral,
    min_entropy, noise_stability, noise_stability_mc, spectral_entropy, support_size,
    total_influence, EntropyValue, InfluenceVector,
};
pub use restriction::{
    entropy_via_moments, increment, moment, phi, phi_derivative0, proof_slack_report, restrict,
    restricted_spectrum, Chain, Increment, LedgerStep, MomentValue, ProofLedger, Restriction,
};
pub use search::{ExtremalRecord, SearchReport};
pub use transform::{basis_value, forward_transform, inverse_transform, plancherel, Spectrum};
pub use verify::{CheckResult, VerificationReport};
