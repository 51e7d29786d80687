//! The map `τ_K` from the microcanonical manifold onto the Kac sphere.
//!
//! `ζ` sends stretches to running-mean increments `r'ₖ` with
//! `(r'ₖ)² = 2k/(k+1)·(V(r_{k+1}) + kV(αₖ) − (k+1)V(α_{k+1}))` and
//! `r'_K = α_K`; `ζ*` unfolds them into `r''`. Momenta are untouched.

use nalgebra::DMatrix;

use super::circle::Site;
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// `R = 2e − 2V(r) + r²` for `w = (p, r, e)`.
pub fn kac_radius(spec: &PotentialSpec, w: [f64; 3]) -> f64 {
    2.0 * w[2] - 2.0 * spec.value(w[1]) + w[1] * w[1]
}

/// Mean vector `w = (p̄, r̄, ē)` of a configuration.
pub fn mean_vector(spec: &PotentialSpec, sites: &[Site]) -> [f64; 3] {
    let k = sites.len() as f64;
    let mut w = [0.0; 3];
    for s in sites {
        w[0] += s.p;
        w[1] += s.r;
        w[2] += s.energy(spec);
    }
    w.map(|v| v / k)
}

/// `ζ`: stretches to `(r'₁, …, r'_{K−1}, α_K)`.
///
/// The sign of `r'ₖ` follows `r_{k+1} − αₖ`, which makes `ζ` injective.
pub fn zeta(spec: &PotentialSpec, r: &[f64]) -> Vec<f64> {
    let kk = r.len();
    let mut out = vec![0.0; kk];
    let mut alpha = r[0];
    for k in 1..kk {
        let kf = k as f64;
        let next = alpha + (r[k] - alpha) / (kf + 1.0);
        // V(r_{k+1}) + kV(αₖ) − (k+1)V(α_{k+1}) as Bregman terms around α_{k+1}
        let rad = spec.bregman(next, r[k] - next) + kf * spec.bregman(next, alpha - next);
        let mag = (2.0 * kf / (kf + 1.0) * rad.max(0.0)).sqrt();
        out[k - 1] = if r[k] >= alpha { mag } else { -mag };
        alpha = next;
    }
    out[kk - 1] = alpha;
    out
}

/// `ζ*`: increments to unfolded coordinates.
pub fn zeta_star(rp: &[f64]) -> Vec<f64> {
    let kk = rp.len();
    let mean = rp[kk - 1];
    // tail[k] = Σ_{i=k}^{K−1} r'ᵢ/i (1-based i)
    let mut tail = vec![0.0; kk + 1];
    for i in (1..kk).rev() {
        tail[i] = tail[i + 1] + rp[i - 1] / i as f64;
    }
    (1..=kk)
        .map(|k| match k {
            1 => mean - tail[1],
            _ if k == kk => mean + rp[kk - 2],
            _ => mean + rp[k - 2] - tail[k],
        })
        .collect()
}

pub fn tau_k_stretches(spec: &PotentialSpec, r: &[f64]) -> Vec<f64> {
    zeta_star(&zeta(spec, r))
}

/// `τ_K` on a configuration of `K ≥ 3` sites.
pub fn tau_k(spec: &PotentialSpec, sites: &[Site]) -> Result<Vec<Site>> {
    if sites.len() < 3 {
        return Err(Error::InvalidParameter(format!("tau_K needs K >= 3, got {}", sites.len())));
    }
    let r: Vec<f64> = sites.iter().map(|s| s.r).collect();
    Ok(sites.iter().zip(tau_k_stretches(spec, &r)).map(|(s, rr)| Site::new(s.p, rr)).collect())
}

/// `((1/K)Σxₖ, (1/K)Σ|xₖ|²)` of points in the plane.
pub fn sphere_moments(sites: &[Site]) -> ([f64; 2], f64) {
    let k = sites.len() as f64;
    let (mut a, mut q) = ([0.0; 2], 0.0);
    for s in sites {
        a[0] += s.p;
        a[1] += s.r;
        q += s.p * s.p + s.r * s.r;
    }
    ([a[0] / k, a[1] / k], q / k)
}

/// `(c₋^{K−1}, c₊^{K−1})` with `c₋ = δ₋/√δ₊`, `c₊ = δ₊/√δ₋`.
pub fn determinant_bounds(spec: &PotentialSpec, k: usize) -> (f64, f64) {
    let b = spec.curvature_bounds();
    let e = (k - 1) as i32;
    ((b.lower / b.upper.sqrt()).powi(e), (b.upper / b.lower.sqrt()).powi(e))
}

/// Finite-difference Jacobian determinant of the stretch part of `τ_K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeterminantEstimate {
    /// Central differences at `h = 1e-6`.
    pub det: f64,
    /// Same at `h = 1e-5`.
    pub coarse: f64,
}

impl DeterminantEstimate {
    pub fn richardson_gap(&self) -> f64 {
        (self.det - self.coarse).abs() / self.det.abs().max(f64::MIN_POSITIVE)
    }
}

fn fd_determinant(spec: &PotentialSpec, r: &[f64], h: f64) -> f64 {
    let k = r.len();
    let mut jac = DMatrix::zeros(k, k);
    let mut x = r.to_vec();
    for j in 0..k {
        let step = h * (1.0 + r[j].abs());
        x[j] = r[j] + step;
        let up = tau_k_stretches(spec, &x);
        x[j] = r[j] - step;
        let dn = tau_k_stretches(spec, &x);
        x[j] = r[j];
        for i in 0..k {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * step);
        }
    }
    jac.determinant().abs()
}

pub fn determinant_fd(spec: &PotentialSpec, r: &[f64]) -> DeterminantEstimate {
    DeterminantEstimate { det: fd_determinant(spec, r, 1e-6), coarse: fd_determinant(spec, r, 1e-5) }
}

/// `|det τ'_K|` from the product formula of the triangular structure.
pub fn determinant_exact(spec: &PotentialSpec, r: &[f64]) -> f64 {
    let mut det = 1.0;
    let mut alpha = r[0];
    for k in 1..r.len() {
        let kf = k as f64;
        let next = alpha + (r[k] - alpha) / (kf + 1.0);
        let rad = spec.bregman(next, r[k] - next) + kf * spec.bregman(next, alpha - next);
        let slope = spec.slope_difference(r[k], alpha).abs();
        det *= if rad > 0.0 {
            (kf / (2.0 * (kf + 1.0))).sqrt() * slope / rad.sqrt()
        } else {
            // coincident points: the factor tends to √V''(αₖ)
            spec.curvature(alpha).sqrt()
        };
        alpha = next;
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, replica_rng};

    fn random_sites(k: usize, seed: u64) -> Vec<Site> {
        let mut rng = replica_rng(seed, 0);
        (0..k).map(|_| Site::new(normal(&mut rng), 0.3 + normal(&mut rng))).collect()
    }

    #[test]
    fn harmonic_sphere_and_mean() {
        let spec = PotentialSpec::harmonic();
        for seed in 0..50 {
            let s = random_sites(3, seed);
            let w = mean_vector(&spec, &s);
            let (a, q) = sphere_moments(&tau_k(&spec, &s).unwrap());
            assert!((a[0] - w[0]).abs() < 1e-12 && (a[1] - w[1]).abs() < 1e-12);
            assert!((q - kac_radius(&spec, w)).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_determinant_is_one() {
        let spec = PotentialSpec::harmonic();
        let r: Vec<f64> = random_sites(5, 3).iter().map(|s| s.r).collect();
        assert!((determinant_fd(&spec, &r).det - 1.0).abs() < 1e-6);
        assert!((determinant_exact(&spec, &r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anharmonic_determinant_matches_product_formula() {
        let spec = PotentialSpec::softened_quadratic(0.2).unwrap();
        let r: Vec<f64> = random_sites(4, 9).iter().map(|s| s.r).collect();
        let fd = determinant_fd(&spec, &r);
        let exact = determinant_exact(&spec, &r);
        assert!((fd.det - exact).abs() < 1e-7 * exact);
        let (lo, hi) = determinant_bounds(&spec, 4);
        assert!(lo <= exact && exact <= hi);
    }

    #[test]
    fn small_k_rejected() {
        assert!(tau_k(&PotentialSpec::harmonic(), &random_sites(2, 1)).is_err());
    }
}
