//! Microcanonical geometry, sampling, spectral gaps and equivalence of ensembles.

pub mod circle;
pub mod ensembles;
pub mod gap;
pub mod kac;
pub mod mcmc;
pub mod rate;

pub use ensembles::{ensembles_gap_curve, micro_expectation, GapCurve, MicroOptions, Observable};
pub use gap::{spectral_gap_estimate, GapEstimate, GapMethod, VampOptions};
pub use kac::tau_k;
pub use mcmc::{mcmc_microcanonical, MicrostateK};
pub use rate::{large_deviation_bound, rate_function};
