use rand::Rng;

use super::{Boundary, ChainState};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::rng::{normal, uniform};
use crate::thermo::Multipliers;

/// Exact sampler for the stretch law `∝ exp(−βV(r) + βτr)`.
///
/// Proposals come from `N(m, 1/(βδ₋))` with `V'(m) = τ`. The log acceptance is
/// `−β[B(m, r−m) − δ₋(r−m)²/2] ≤ 0` by convexity.
#[derive(Clone, Copy, Debug)]
pub struct StretchSampler {
    spec: PotentialSpec,
    beta: f64,
    mode: f64,
    delta_minus: f64,
    scale: f64,
}

impl StretchSampler {
    pub fn new(spec: PotentialSpec, m: Multipliers) -> Self {
        let delta_minus = spec.curvature_bounds().lower;
        StretchSampler {
            spec,
            beta: m.beta,
            mode: spec.tilted_minimizer(m.tau),
            delta_minus,
            scale: 1.0 / (m.beta * delta_minus).sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        loop {
            let d = self.scale * normal(rng);
            if self.spec.is_harmonic() && self.delta_minus == 1.0 {
                return Ok(self.mode + d);
            }
            let log_acc = -self.beta * (self.spec.bregman(self.mode, d) - 0.5 * self.delta_minus * d * d);
            if log_acc > 1e-12 {
                return Err(Error::Envelope(format!("log acceptance {log_acc:e} > 0 at r = {}", self.mode + d)));
            }
            if uniform(rng) < log_acc.exp() {
                return Ok(self.mode + d);
            }
        }
    }
}

/// i.i.d. Gibbs sites: `p ~ N(0, 1/β)`, `r` from the tilted stretch law.
pub fn sample_equilibrium<R: Rng + ?Sized>(
    spec: &PotentialSpec,
    m: Multipliers,
    n: usize,
    boundary: Boundary,
    rng: &mut R,
) -> Result<ChainState> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("chain needs N >= 2, got {n}")));
    }
    let sampler = StretchSampler::new(*spec, m);
    let sd = 1.0 / m.beta.sqrt();
    let mut p = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for _ in 0..n {
        p.push(sd * normal(rng));
        r.push(sampler.sample(rng)?);
    }
    Ok(ChainState::new(p, r, boundary))
}
