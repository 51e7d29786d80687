//! Legendre transform of the single-site log-partition function and the
//! large-deviation bound for sample means of `(p, r, e)`.
//!
//! With `λ = (λ_p, βτ, −β)`, `Z(λ) = G(β, τ) + λ_p²/(2β)` and
//! `Z*(p, r, e) = −S(r, e − p²/2)`.

use rand::Rng;

use crate::chain::StretchSampler;
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::rng::normal;
use crate::thermo::{entropy_and_multipliers, CanonicalParams};

/// `(Z*(u), λ(u) = ∇Z*(u))`; `u` must satisfy `e > p²/2 + V(r)`.
pub fn conjugate(spec: &PotentialSpec, u: [f64; 3]) -> Result<(f64, [f64; 3])> {
    let [p, r, e] = u;
    let t = entropy_and_multipliers(spec, r, e - 0.5 * p * p)?;
    Ok((-t.entropy, [t.beta * p, t.beta * t.tau, -t.beta]))
}

/// `I_λ(u) = Z*(u) − Z*(u_λ) − λ·(u − u_λ)` at `u_λ = (0, r̄, ē)`.
pub fn rate_function(params: &CanonicalParams, u: [f64; 3]) -> Result<f64> {
    let spec = &params.potential;
    if !(u[2] > 0.5 * u[0] * u[0] + spec.value(u[1])) {
        return Err(Error::Domain(format!("u = {u:?} lies outside the domain e > p^2/2 + V(r)")));
    }
    let ul = params.mean_vector();
    let lambda = [0.0, params.beta * params.tau, -params.beta];
    // Z*(u_λ) = λ·u_λ − Z(λ)
    let z_ul = lambda[1] * ul[1] + lambda[2] * ul[2] - params.gibbs;
    let (z_u, _) = conjugate(spec, u)?;
    let lin: f64 = (0..3).map(|j| lambda[j] * (u[j] - ul[j])).sum();
    Ok((z_u - z_ul - lin).max(0.0))
}

/// `2^d exp(−nδ²/(2dM))`, the exponential-Chebyshev bound for `P(|f̄ₙ − u_λ| ≥ δ)`.
pub fn large_deviation_bound(n: usize, delta: f64, m: f64, d: usize) -> f64 {
    2f64.powi(d as i32) * (-(n as f64) * delta * delta / (2.0 * d as f64 * m)).exp()
}

/// Fraction of `samples` canonical `n`-site means with `|f̄ₙ − u_λ| ≥ δ`.
pub fn empirical_tail<R: Rng + ?Sized>(params: &CanonicalParams, n: usize, delta: f64, samples: usize, rng: &mut R) -> Result<f64> {
    let spec = params.potential;
    let sampler = StretchSampler::new(spec, params.multipliers());
    let sd = 1.0 / params.beta.sqrt();
    let ul = params.mean_vector();
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut m = [0.0; 3];
        for _ in 0..n {
            let p = sd * normal(rng);
            let r = sampler.sample(rng)?;
            m[0] += p;
            m[1] += r;
            m[2] += 0.5 * p * p + spec.value(r);
        }
        let dist: f64 = (0..3).map(|j| (m[j] / n as f64 - ul[j]).powi(2)).sum::<f64>().sqrt();
        if dist >= delta {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}
