//! Shared fixtures for the kernel benchmarks.

use chainfluct::rng::replica_rng;
use chainfluct::{sample_equilibrium, Boundary, CanonicalParams, ChainState, PotentialSpec, Site};

pub fn softened() -> PotentialSpec {
    PotentialSpec::softened_quadratic(0.2).unwrap()
}

/// Equilibrium wall chain at β = 1, τ = 0.3.
pub fn equilibrium_chain(n: usize, seed: u64) -> (CanonicalParams, ChainState) {
    let params = CanonicalParams::new(softened(), 1.0, 0.3).unwrap();
    let mut rng = replica_rng(seed, 0);
    let state = sample_equilibrium(&params.potential, params.multipliers(), n, Boundary::WallTension(0.3), &mut rng).unwrap();
    (params, state)
}

pub fn sites(state: &ChainState) -> Vec<Site> {
    state.p.iter().zip(&state.r).map(|(&p, &r)| Site::new(p, r)).collect()
}
