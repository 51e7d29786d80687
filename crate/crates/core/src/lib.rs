//! Anharmonic chains with conservative noise.
//!
//! The crate covers the equilibrium thermodynamics of a single site
//! ([`thermo`]), simulation of the chain ([`chain`]), fluctuation fields
//! ([`field`]), the linearized Euler reference ([`euler`]) and the
//! microcanonical constructions ([`micro`]).

pub mod chain;
pub mod error;
pub mod euler;
pub mod field;
pub mod micro;
pub mod potential;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod stats;
pub mod thermo;

pub use chain::{sample_equilibrium, Boundary, ChainState, Dynamics, NoiseScheme, SimConfig, SweepOrder};
pub use error::{Error, Result};
pub use euler::{LinearizedSystem, TestFunction};
pub use field::{Branch, Mode, ModeSeries};
pub use micro::circle::{Site, TwoPointCoords};
pub use stats::Estimate;
pub use potential::{CurvatureBounds, PotentialKind, PotentialSpec};
pub use thermo::{CanonicalParams, Multipliers, ThermoPoint};
