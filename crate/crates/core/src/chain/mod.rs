//! The N-site chain under `N(A_N + γS_N)`.

mod dynamics;
mod sampling;

pub use dynamics::{Dynamics, NoiseScheme, SimConfig, SweepOrder};
pub use sampling::{sample_equilibrium, StretchSampler};

use serde::{Deserialize, Serialize};

use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Site 0 is a fixed wall (`p₀ = 0`, never stored); tension `τ` pulls site `N`.
    WallTension(f64),
    Periodic,
}

impl Boundary {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub boundary: Boundary,
    pub t_macro: f64,
}

impl ChainState {
    pub fn new(p: Vec<f64>, r: Vec<f64>, boundary: Boundary) -> Self {
        assert_eq!(p.len(), r.len(), "momenta and stretches must have equal length");
        assert!(p.len() >= 2, "a chain needs at least two sites");
        ChainState { p, r, boundary, t_macro: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn energy(&self, spec: &PotentialSpec, i: usize) -> f64 {
        0.5 * self.p[i] * self.p[i] + spec.value(self.r[i])
    }

    pub fn energies(&self, spec: &PotentialSpec) -> Vec<f64> {
        (0..self.len()).map(|i| self.energy(spec, i)).collect()
    }

    /// `(Σp, Σr, Σe)`.
    pub fn conserved_totals(&self, spec: &PotentialSpec) -> [f64; 3] {
        let mut t = [0.0; 3];
        for i in 0..self.len() {
            t[0] += self.p[i];
            t[1] += self.r[i];
            t[2] += self.energy(spec, i);
        }
        t
    }

    /// `H_N − τΣr`, conserved by the drift with a wall.
    pub fn drift_invariant(&self, spec: &PotentialSpec) -> f64 {
        let t = self.conserved_totals(spec);
        match self.boundary {
            Boundary::WallTension(tau) => t[2] - tau * t[1],
            Boundary::Periodic => t[2],
        }
    }

    pub fn is_finite_within(&self, limit: f64) -> bool {
        self.p.iter().chain(self.r.iter()).all(|v| v.abs() <= limit)
    }
}
