//! Two-point circle coordinates.
//!
//! A pair of sites `(p₁, r₁), (p₂, r₂)` is described by its means `p, r`, the
//! internal energy `E = (p₁−p₂)²/8 + W` with `W = (V(r₁) + V(r₂) − 2V(r))/2`, and
//! an angle `θ` with `√E cosθ = √2(p₁−p₂)/4`, `√E sinθ = sgn(r₁−r₂)√W`.
//! Moving `θ` with `(p, r, E)` fixed preserves the pair sums of momentum,
//! stretch and energy. The inverse solves `V(r+h) + V(r−h) − 2V(r) = 2E sin²θ`
//! for the half gap `h = |r₁ − r₂|/2`.
//!
//! The bond field of the noise is `𝒴 = √2·𝔍⁻¹∂_θ`, where
//! `𝔍 = √2·√(V(r₁)+V(r₂)−2V(r)) / |V'(r₁) − V'(r₂)|`. In the harmonic case
//! `𝔍 = 1/√2` and `𝒴 = 2∂_θ`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::potential::{PairGeometry, PotentialSpec};
use crate::rng::{normal, uniform};
use crate::roots::newton_in_bracket;

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2, TAU};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Site {
    pub p: f64,
    pub r: f64,
}

impl Site {
    pub fn new(p: f64, r: f64) -> Self {
        Site { p, r }
    }

    pub fn energy(&self, spec: &PotentialSpec) -> f64 {
        0.5 * self.p * self.p + spec.value(self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPointCoords {
    pub p: f64,
    pub r: f64,
    pub energy: f64,
    /// In `[0, 2π)`; `0` when `energy == 0`.
    pub theta: f64,
}

/// Half gap `h ≥ 0` with `V(m+h) + V(m−h) − 2V(m) = target`, to machine precision.
pub fn solve_half_gap(spec: &PotentialSpec, m: f64, target: f64, guess: f64) -> f64 {
    if !(target > 0.0) {
        return 0.0;
    }
    if spec.is_harmonic() {
        return target.sqrt();
    }
    let b = spec.curvature_bounds();
    let lo = (target / b.upper).sqrt();
    let hi = (target / b.lower).sqrt();
    let x0 = if guess > lo && guess < hi { guess } else { (target / spec.curvature(m)).sqrt().clamp(lo, hi) };
    // sd is squeezed between δ₋h² and δ₊h², so [lo, hi] brackets the root
    newton_in_bracket(
        |h| {
            let g = spec.pair_geometry(m, h);
            (g.sd - target, g.slope_gap)
        },
        lo,
        hi,
        x0,
    )
    .max(0.0)
}

pub fn to_circle(spec: &PotentialSpec, x1: Site, x2: Site) -> TwoPointCoords {
    let p = 0.5 * (x1.p + x2.p);
    let r = 0.5 * (x1.r + x2.r);
    let h = 0.5 * (x1.r - x2.r).abs();
    let w = 0.5 * spec.pair_geometry(r, h).sd;
    let x = (x1.p - x2.p) * SQRT_2 / 4.0;
    let energy = x * x + w;
    if energy == 0.0 {
        return TwoPointCoords { p, r, energy, theta: 0.0 };
    }
    let y = if x1.r >= x2.r { w.sqrt() } else { -w.sqrt() };
    TwoPointCoords { p, r, energy, theta: y.atan2(x).rem_euclid(TAU) }
}

fn sites_from(p: f64, r: f64, energy: f64, cos: f64, sin: f64, h: f64) -> (Site, Site) {
    let a = 2.0 * SQRT_2 * energy.sqrt() * cos;
    let b = if sin >= 0.0 { h } else { -h };
    (Site { p: p + 0.5 * a, r: r + b }, Site { p: p - 0.5 * a, r: r - b })
}

pub fn from_circle(spec: &PotentialSpec, c: TwoPointCoords) -> Result<(Site, Site)> {
    if !(c.energy >= 0.0) {
        return Err(Error::Domain(format!("internal energy must be non-negative, got {}", c.energy)));
    }
    let (sin, cos) = c.theta.sin_cos();
    let h = solve_half_gap(spec, c.r, 2.0 * c.energy * sin * sin, 0.0);
    Ok(sites_from(c.p, c.r, c.energy, cos, sin, h))
}

/// `(√δ₋/(√2δ₊), √δ₊/(√2δ₋))`.
pub fn jacobian_bounds(spec: &PotentialSpec) -> (f64, f64) {
    let b = spec.curvature_bounds();
    (b.lower.sqrt() * FRAC_1_SQRT_2 / b.upper, b.upper.sqrt() * FRAC_1_SQRT_2 / b.lower)
}

// 𝔍⁻¹ at half gap h; the h = 0 limit is √(2V''(m)).
#[inline]
fn inverse_jacobian(g: &PairGeometry, h: f64) -> f64 {
    if h > 0.0 && g.sd > 0.0 && g.slope_gap > 0.0 {
        g.slope_gap * FRAC_1_SQRT_2 / g.sd.sqrt()
    } else {
        g.curvature_sum.sqrt()
    }
}

// (𝔍⁻¹, ∂_θ𝔍⁻¹) at a point with √E cosθ = x, √E sinθ = y.
#[inline]
fn speed(g: &PairGeometry, h: f64, x: f64, y: f64) -> (f64, f64) {
    if !(h > 0.0 && g.sd > 0.0 && g.slope_gap > 0.0) {
        return (g.curvature_sum.sqrt(), 0.0);
    }
    let root = g.sd.sqrt();
    let inv = g.slope_gap * FRAC_1_SQRT_2 / root;
    let d_dh = (2.0 * g.curvature_sum * g.sd - g.slope_gap * g.slope_gap) / (2.0 * SQRT_2 * g.sd * root);
    let dh_dtheta = 4.0 * x * y / g.slope_gap;
    (inv, d_dh * dh_dtheta)
}

/// `𝔍⁻¹` at `(r, E, θ)` without bound checks.
pub(crate) fn inverse_jacobian_at(spec: &PotentialSpec, r: f64, energy: f64, theta: f64) -> f64 {
    let sin = theta.sin();
    let h = solve_half_gap(spec, r, 2.0 * energy * sin * sin, 0.0);
    inverse_jacobian(&spec.pair_geometry(r, h), h)
}

/// `𝔍` at the given coordinates; asserts the analytic bounds.
pub fn jacobian(spec: &PotentialSpec, c: TwoPointCoords) -> Result<f64> {
    if !(c.energy >= 0.0) {
        return Err(Error::Domain(format!("internal energy must be non-negative, got {}", c.energy)));
    }
    let sin = c.theta.sin();
    let h = solve_half_gap(spec, c.r, 2.0 * c.energy * sin * sin, 0.0);
    let j = 1.0 / inverse_jacobian(&spec.pair_geometry(c.r, h), h);
    let (lo, hi) = jacobian_bounds(spec);
    if j < lo * (1.0 - 1e-12) || j > hi * (1.0 + 1e-12) {
        return Err(Error::Consistency(format!("jacobian {j} outside [{lo}, {hi}]")));
    }
    Ok(j)
}

/// One Metropolis-adjusted Euler–Maruyama step of the bond angle for the
/// generator `κ(𝔍⁻¹∂_θ)²` over time `kdt = κ·dt`, which is `κ·½𝒴²`. The
/// conditional law `∝ 𝔍 dθ` is preserved exactly; in the harmonic case the
/// proposal is exact and always accepted. Returns whether the move was taken.
pub(crate) fn diffuse_bond<R: Rng + ?Sized>(spec: &PotentialSpec, x1: &mut Site, x2: &mut Site, kdt: f64, rng: &mut R) -> bool {
    let p = 0.5 * (x1.p + x2.p);
    let r = 0.5 * (x1.r + x2.r);
    let h = 0.5 * (x1.r - x2.r).abs();
    let geo = spec.pair_geometry(r, h);
    let x = (x1.p - x2.p) * SQRT_2 / 4.0;
    let w = 0.5 * geo.sd;
    let energy = x * x + w;
    let xi = normal(rng);
    if energy == 0.0 {
        return false;
    }
    let y = if x1.r >= x2.r { w.sqrt() } else { -w.sqrt() };
    let theta = y.atan2(x);
    let (g0, gp0) = speed(&geo, h, x, y);
    let mean0 = theta + kdt * g0 * gp0;
    let sd0 = (2.0 * kdt).sqrt() * g0;
    let theta1 = mean0 + sd0 * xi;
    let (sin1, cos1) = theta1.sin_cos();
    let guess = if y != 0.0 { h * (sin1 * energy.sqrt() / y).abs() } else { 0.0 };
    let h1 = solve_half_gap(spec, r, 2.0 * energy * sin1 * sin1, guess);
    if !spec.is_harmonic() {
        let geo1 = spec.pair_geometry(r, h1);
        let root_e = energy.sqrt();
        let (g1, gp1) = speed(&geo1, h1, root_e * cos1, root_e * sin1);
        let mean1 = theta1 + kdt * g1 * gp1;
        let sd1 = (2.0 * kdt).sqrt() * g1;
        let fwd = -0.5 * xi * xi - sd0.ln();
        let z = (theta - mean1) / sd1;
        let bwd = -0.5 * z * z - sd1.ln();
        // target density ∝ 𝔍 = 1/g
        let log_alpha = (g0.ln() - g1.ln()) + bwd - fwd;
        if log_alpha < 0.0 && uniform(rng) >= log_alpha.exp() {
            return false;
        }
    }
    let (s1, s2) = sites_from(p, r, energy, cos1, sin1, h1);
    *x1 = s1;
    *x2 = s2;
    true
}

/// Resamples the bond angle from its conditional law `∝ 𝔍(θ)dθ` by rejection
/// against the uniform envelope `𝔍_max`.
pub(crate) fn resample_bond<R: Rng + ?Sized>(spec: &PotentialSpec, x1: &mut Site, x2: &mut Site, rng: &mut R) {
    let c = to_circle(spec, *x1, *x2);
    if c.energy == 0.0 {
        return;
    }
    let (_, j_max) = jacobian_bounds(spec);
    let h_old = 0.5 * (x1.r - x2.r).abs();
    loop {
        let theta = TAU * uniform(rng);
        let (sin, cos) = theta.sin_cos();
        let h = solve_half_gap(spec, c.r, 2.0 * c.energy * sin * sin, h_old);
        let accept = if spec.is_harmonic() {
            true
        } else {
            let j = 1.0 / inverse_jacobian(&spec.pair_geometry(c.r, h), h);
            uniform(rng) * j_max < j
        };
        if accept {
            let (s1, s2) = sites_from(c.p, c.r, c.energy, cos, sin, h);
            *x1 = s1;
            *x2 = s2;
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use proptest::prelude::*;

    fn soft02() -> PotentialSpec {
        PotentialSpec::softened_quadratic(0.2).unwrap()
    }

    #[test]
    fn degenerate_pair() {
        let c = to_circle(&soft02(), Site::new(0.3, -1.0), Site::new(0.3, -1.0));
        assert_eq!((c.energy, c.theta), (0.0, 0.0));
        assert_eq!((c.p, c.r), (0.3, -1.0));
    }

    #[test]
    fn harmonic_example() {
        // E = 4/8 + (1/2 + 1/2)/2 = 1; √E cosθ = √2/2, √E sinθ = √(1/2) ⇒ θ = π/4.
        let c = to_circle(&PotentialSpec::harmonic(), Site::new(1.0, 1.0), Site::new(-1.0, -1.0));
        assert_eq!((c.p, c.r), (0.0, 0.0));
        assert!((c.energy - 1.0).abs() < 1e-15);
        assert!((c.theta - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let (a, b) = from_circle(&PotentialSpec::harmonic(), c).unwrap();
        assert!((a.p - 1.0).abs() < 1e-15 && (a.r - 1.0).abs() < 1e-15);
        assert!((b.p + 1.0).abs() < 1e-15 && (b.r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn harmonic_jacobian_is_constant() {
        let h = PotentialSpec::harmonic();
        let (lo, hi) = jacobian_bounds(&h);
        assert!((lo - FRAC_1_SQRT_2).abs() < 1e-16 && (hi - FRAC_1_SQRT_2).abs() < 1e-16);
        for theta in [0.0, 0.3, 1.7, 3.0, 5.9] {
            let j = jacobian(&h, TwoPointCoords { p: 0.1, r: -0.4, energy: 2.0, theta }).unwrap();
            assert!((j - FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_energy_rejected() {
        let c = TwoPointCoords { p: 0.0, r: 0.0, energy: -1.0, theta: 0.0 };
        assert!(from_circle(&soft02(), c).is_err());
        assert!(jacobian(&soft02(), c).is_err());
    }

    #[test]
    fn anharmonic_jacobian_within_bounds() {
        let spec = soft02();
        let (lo, hi) = jacobian_bounds(&spec);
        let mut rng = replica_rng(11, 0);
        for _ in 0..10_000 {
            let c = TwoPointCoords {
                p: 4.0 * (uniform(&mut rng) - 0.5),
                r: 20.0 * (uniform(&mut rng) - 0.5),
                energy: 10.0 * uniform(&mut rng).powi(3),
                theta: TAU * uniform(&mut rng),
            };
            let j = jacobian(&spec, c).unwrap();
            assert!(lo <= j && j <= hi);
        }
    }

    #[test]
    fn angular_derivative_matches_finite_difference() {
        let spec = soft02();
        let (r, energy) = (0.7, 1.3);
        let inv_at = |theta: f64| {
            let s = theta.sin();
            let h = solve_half_gap(&spec, r, 2.0 * energy * s * s, 0.0);
            inverse_jacobian(&spec.pair_geometry(r, h), h)
        };
        for theta in [0.4f64, 1.2, 2.0, 4.0, 5.5] {
            let (s, c) = theta.sin_cos();
            let h = solve_half_gap(&spec, r, 2.0 * energy * s * s, 0.0);
            let (_, d) = speed(&spec.pair_geometry(r, h), h, energy.sqrt() * c, energy.sqrt() * s);
            let fd = (inv_at(theta + 1e-5) - inv_at(theta - 1e-5)) / 2e-5;
            assert!((d - fd).abs() < 1e-8, "theta {theta}: {d} vs {fd}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(p1 in -5.0f64..5.0, r1 in -8.0f64..8.0, p2 in -5.0f64..5.0, r2 in -8.0f64..8.0) {
            let spec = soft02();
            let c = to_circle(&spec, Site::new(p1, r1), Site::new(p2, r2));
            let (a, b) = from_circle(&spec, c).unwrap();
            prop_assert!((a.p - p1).abs() < 1e-10 && (a.r - r1).abs() < 1e-10);
            prop_assert!((b.p - p2).abs() < 1e-10 && (b.r - r2).abs() < 1e-10);
        }

        #[test]
        fn rotation_preserves_pair_sums(p1 in -5.0f64..5.0, r1 in -8.0f64..8.0, p2 in -5.0f64..5.0, r2 in -8.0f64..8.0, theta in 0.0f64..TAU) {
            let spec = soft02();
            let mut c = to_circle(&spec, Site::new(p1, r1), Site::new(p2, r2));
            c.theta = theta;
            let (a, b) = from_circle(&spec, c).unwrap();
            let e0 = Site::new(p1, r1).energy(&spec) + Site::new(p2, r2).energy(&spec);
            prop_assert!((a.p + b.p - p1 - p2).abs() < 1e-12);
            prop_assert!((a.r + b.r - r1 - r2).abs() < 1e-12);
            prop_assert!((a.energy(&spec) + b.energy(&spec) - e0).abs() < 1e-12 * (1.0 + e0));
        }
    }
}
