//! Equilibrium thermodynamics of a single site.
//!
//! Under the Gibbs measure with multipliers `λ = (βτ, −β)` the momentum is
//! `N(0, 1/β)` and the stretch has density `∝ exp(−βV(r) + βτr)`. All
//! derivatives of the Gibbs potential `G(λ)` are tilted moments of that
//! density, integrated by adaptive quadrature around its mode `m` (where
//! `V'(m) = τ`). Writing `V(r) − τr = V(m) − τm + B(m, r − m)` with the Bregman
//! remainder `B ≥ δ₋(r−m)²/2` keeps the integrands free of cancellation.

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::quadrature::{integrate, Tolerance};

/// Exponent of the neglected Gaussian tail, `exp(−TAIL)` relative to the mode.
const TAIL: f64 = 46.0;

/// Inverse temperature and tension; `λ = (βτ, −β)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multipliers {
    pub beta: f64,
    pub tau: f64,
}

impl Multipliers {
    pub fn new(beta: f64, tau: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive and finite, got {beta}")));
        }
        if !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be finite, got {tau}")));
        }
        Ok(Multipliers { beta, tau })
    }

    pub fn from_lambda(lambda: [f64; 2]) -> Result<Self> {
        if !(lambda[1] < 0.0) {
            return Err(Error::Domain(format!("lambda[1] = -beta must be negative, got {}", lambda[1])));
        }
        let beta = -lambda[1];
        Self::new(beta, lambda[0] / beta)
    }

    pub fn lambda(&self) -> [f64; 2] {
        [self.beta * self.tau, -self.beta]
    }
}

/// Tilted single-site moments. `B` denotes `V(r) − τr` up to its minimum.
#[derive(Clone, Copy, Debug)]
pub struct TiltedMoments {
    /// `ln ∫ exp(−βV + βτr) dr`
    pub log_z: f64,
    pub mean_r: f64,
    pub mean_v: f64,
    pub var_r: f64,
    pub cov_rv: f64,
    pub var_v: f64,
    /// `Var(V − τr)`
    pub var_b: f64,
    /// `E[V'(r)] − τ`, zero up to quadrature error
    pub slope_residual: f64,
}

fn window(spec: &PotentialSpec, beta: f64, tau: f64) -> (f64, f64, f64) {
    let m = spec.tilted_minimizer(tau);
    let delta_minus = spec.curvature_bounds().lower;
    let w = (2.0 * TAIL / (beta * delta_minus)).sqrt();
    (m, m - w, m + w)
}

fn tolerance() -> Tolerance {
    Tolerance { abs: 1e-300, rel: 1e-13, max_panels: 4000 }
}

/// Expectations of `f(r)` under the tilted stretch law.
pub fn tilted_expectation<const M: usize, F>(spec: &PotentialSpec, m: Multipliers, f: F) -> Result<[f64; M]>
where
    F: Fn(f64) -> [f64; M],
{
    let (mode, lo, hi) = window(spec, m.beta, m.tau);
    let beta = m.beta;
    let z = integrate(|r: f64| [(-beta * spec.bregman(mode, r - mode)).exp()], lo, hi, tolerance())?.value[0];
    let res = integrate(
        |r: f64| {
            let w = (-beta * spec.bregman(mode, r - mode)).exp();
            let mut out = f(r);
            for v in out.iter_mut() {
                *v *= w;
            }
            out
        },
        lo,
        hi,
        tolerance(),
    )?;
    let mut out = res.value;
    for v in out.iter_mut() {
        *v /= z;
    }
    Ok(out)
}

pub fn tilted_moments(spec: &PotentialSpec, m: Multipliers) -> Result<TiltedMoments> {
    let Multipliers { beta, tau } = m;
    let (mode, lo, hi) = window(spec, beta, tau);
    let first = integrate(
        |r: f64| {
            let d = r - mode;
            let b = spec.bregman(mode, d);
            let w = (-beta * b).exp();
            [w, d * w, b * w]
        },
        lo,
        hi,
        tolerance(),
    )?
    .value;
    let z = first[0];
    let mean_d = first[1] / z;
    let mean_b = first[2] / z;
    let mean_r = mode + mean_d;
    let v_mode = spec.value(mode);
    let mean_v = v_mode + tau * mean_d + mean_b;
    let second = integrate(
        |r: f64| {
            let d = r - mode;
            let b = spec.bregman(mode, d);
            let w = (-beta * b).exp();
            let x = d - mean_d;
            let y = b - mean_b;
            let v = tau * x + y;
            [x * x * w, x * v * w, v * v * w, y * y * w, (spec.slope(r) - tau) * w]
        },
        lo,
        hi,
        tolerance(),
    )?
    .value;
    Ok(TiltedMoments {
        log_z: z.ln() - beta * (v_mode - tau * mode),
        mean_r,
        mean_v,
        var_r: second[0] / z,
        cov_rv: second[1] / z,
        var_v: second[2] / z,
        var_b: second[3] / z,
        slope_residual: second[4] / z,
    })
}

fn gibbs_from(m: &Multipliers, t: &TiltedMoments) -> f64 {
    t.log_z + 0.5 * (2.0 * std::f64::consts::PI / m.beta).ln()
}

/// `G(λ) = ln ∫ exp(−βV + βτr) dr + ½ ln(2π/β)`.
pub fn gibbs_potential(spec: &PotentialSpec, lambda: [f64; 2]) -> Result<f64> {
    let m = Multipliers::from_lambda(lambda)?;
    Ok(gibbs_from(&m, &tilted_moments(spec, m)?))
}

/// `(r̄, ē) = ∇_λ G`.
pub fn mean_quantities(spec: &PotentialSpec, lambda: [f64; 2]) -> Result<(f64, f64)> {
    let m = Multipliers::from_lambda(lambda)?;
    let t = tilted_moments(spec, m)?;
    Ok((t.mean_r, 0.5 / m.beta + t.mean_v))
}

fn covariance_from(m: &Multipliers, t: &TiltedMoments) -> Matrix3<f64> {
    let var_e = 0.5 / (m.beta * m.beta) + t.var_v;
    Matrix3::new(
        1.0 / m.beta, 0.0, 0.0,
        0.0, t.var_r, t.cov_rv,
        0.0, t.cov_rv, var_e,
    )
}

/// Covariance of `(p, r, e)`: `block-diag(1/β, G''(λ))`.
pub fn covariance(spec: &PotentialSpec, lambda: [f64; 2]) -> Result<Matrix3<f64>> {
    let m = Multipliers::from_lambda(lambda)?;
    Ok(covariance_from(&m, &tilted_moments(spec, m)?))
}

/// Entropy and conjugate multipliers at a thermodynamic point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoPoint {
    pub r: f64,
    pub e: f64,
    pub entropy: f64,
    pub beta: f64,
    pub tau: f64,
}

struct DualEval {
    lambda: [f64; 2],
    phi: f64,
    grad: Vector2<f64>,
    hess: Matrix2<f64>,
}

fn dual_eval(spec: &PotentialSpec, lambda: [f64; 2], r: f64, e: f64) -> Result<DualEval> {
    let m = Multipliers::from_lambda(lambda)?;
    let t = tilted_moments(spec, m)?;
    let g = gibbs_from(&m, &t);
    let e_bar = 0.5 / m.beta + t.mean_v;
    let var_e = 0.5 / (m.beta * m.beta) + t.var_v;
    Ok(DualEval {
        lambda,
        phi: g - lambda[0] * r - lambda[1] * e,
        grad: Vector2::new(t.mean_r - r, e_bar - e),
        hess: Matrix2::new(t.var_r, t.cov_rv, t.cov_rv, var_e),
    })
}

fn converged(d: &DualEval, r: f64, e: f64) -> bool {
    d.grad[0].abs() <= 1e-12 * (1.0 + r.abs()) && d.grad[1].abs() <= 1e-12 * (1.0 + e.abs())
}

fn newton_multipliers(spec: &PotentialSpec, r: f64, e: f64) -> Result<Option<[f64; 2]>> {
    let beta0 = 1.0 / (e - spec.value(r));
    let tau0 = spec.slope(r);
    let mut cur = dual_eval(spec, [beta0 * tau0, -beta0], r, e)?;
    for _ in 0..60 {
        if converged(&cur, r, e) {
            return Ok(Some(cur.lambda));
        }
        let step = match cur.hess.cholesky() {
            Some(ch) => -ch.solve(&cur.grad),
            None => return Ok(None),
        };
        let decrement = -cur.grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = [cur.lambda[0] + t * step[0], cur.lambda[1] + t * step[1]];
            if cand[1] < 0.0 {
                if let Ok(next) = dual_eval(spec, cand, r, e) {
                    let armijo = next.phi <= cur.phi - 1e-4 * t * decrement;
                    let residual_drop = next.grad.norm() < cur.grad.norm();
                    if armijo || (t == 1.0 && residual_drop) {
                        accepted = Some(next);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => cur = next,
            None => return Ok(None),
        }
    }
    Ok(if converged(&cur, r, e) { Some(cur.lambda) } else { None })
}

// Outer bisection on β (ē decreases in β along r̄ = r), inner bisection on τ (r̄ increases in τ).
fn bisection_multipliers(spec: &PotentialSpec, r: f64, e: f64) -> Result<[f64; 2]> {
    let tau_for = |beta: f64| -> Result<f64> {
        let mean_r = |tau: f64| -> Result<f64> { Ok(tilted_moments(spec, Multipliers::new(beta, tau)?)?.mean_r) };
        let center = spec.slope(r);
        let mut width = 1.0;
        let (mut lo, mut hi) = (center - width, center + width);
        while mean_r(lo)? > r {
            width *= 2.0;
            lo = center - width;
        }
        while mean_r(hi)? < r {
            width *= 2.0;
            hi = center + width;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mean_r(mid)? < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let e_at = |beta: f64| -> Result<f64> {
        let tau = tau_for(beta)?;
        let t = tilted_moments(spec, Multipliers::new(beta, tau)?)?;
        Ok(0.5 / beta + t.mean_v)
    };
    let guess = 1.0 / (e - spec.value(r));
    let (mut lo, mut hi) = (0.5 * guess, 2.0 * guess);
    let mut expansions = 0;
    while e_at(lo)? < e {
        lo *= 0.5;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence(format!("no beta bracket for (r, e) = ({r}, {e})")));
        }
    }
    while e_at(hi)? > e {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence(format!("no beta bracket for (r, e) = ({r}, {e})")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if e_at(mid)? > e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let tau = tau_for(beta)?;
    Ok([beta * tau, -beta])
}

/// Solves `∇G(λ) = (r, e)`; `S(r, e) = G(λ) − λ·(r, e)`.
pub fn entropy_and_multipliers(spec: &PotentialSpec, r: f64, e: f64) -> Result<ThermoPoint> {
    if !(r.is_finite() && e.is_finite()) || e <= spec.value(r) {
        return Err(Error::Domain(format!("need e > V(r); got r = {r}, e = {e}, V(r) = {}", spec.value(r))));
    }
    let lambda = match newton_multipliers(spec, r, e)? {
        Some(l) => l,
        None => bisection_multipliers(spec, r, e)?,
    };
    let m = Multipliers::from_lambda(lambda)?;
    let g = gibbs_from(&m, &tilted_moments(spec, m)?);
    Ok(ThermoPoint { r, e, entropy: g - lambda[0] * r - lambda[1] * e, beta: m.beta, tau: m.tau })
}

fn linear_from(m: &Multipliers, t: &TiltedMoments) -> Result<(f64, f64, f64)> {
    let var_e = 0.5 / (m.beta * m.beta) + t.var_v;
    let h = Matrix2::new(t.var_r, t.cov_rv, t.cov_rv, var_e);
    let rhs = Vector2::new(1.0 / m.beta, m.tau / m.beta);
    let sol = h
        .cholesky()
        .ok_or_else(|| Error::Consistency("G'' is not positive definite".into()))?
        .solve(&rhs);
    let c2 = sol[0] + m.tau * sol[1];
    if !(c2 > 0.0) {
        return Err(Error::Consistency(format!("c^2 = {c2} is not positive")));
    }
    Ok((sol[0], sol[1], c2.sqrt()))
}

/// `(τ_r, τ_e, c)` from `G''(λ)(τ_r, τ_e)ᵀ = (1/β, τ/β)ᵀ`.
pub fn linear_coefficients(spec: &PotentialSpec, lambda: [f64; 2]) -> Result<(f64, f64, f64)> {
    let m = Multipliers::from_lambda(lambda)?;
    linear_from(&m, &tilted_moments(spec, m)?)
}

fn rotation_from(m: &Multipliers, t: &TiltedMoments, tau_r: f64, tau_e: f64, c: f64) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let (beta, tau) = (m.beta, m.tau);
    let rot = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0, tau_r, -beta * tau,
        0.0, tau_e, beta,
    );
    let q33 = 0.5 + beta * beta * t.var_b;
    let q = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0 / beta, c * c / beta, q33));
    let sigma = covariance_from(m, t);
    let defect = (rot.transpose() * sigma * rot - q).amax();
    let tol = 1e-8 * q.amax().max(1.0);
    if defect > tol {
        return Err(Error::Consistency(format!("|R^T Sigma R - Q|_max = {defect:e} exceeds {tol:e}")));
    }
    Ok((rot, q))
}

/// `R` and `Q = RᵀΣR = diag(1/β, c²/β, β²Var(e − τr))`.
pub fn rotation_matrix(spec: &PotentialSpec, lambda: [f64; 2]) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let m = Multipliers::from_lambda(lambda)?;
    let t = tilted_moments(spec, m)?;
    let (tau_r, tau_e, c) = linear_from(&m, &t)?;
    rotation_from(&m, &t, tau_r, tau_e, c)
}

/// Everything derived from `(spec, β, τ)`; immutable once built.
#[derive(Clone, Debug)]
pub struct CanonicalParams {
    pub potential: PotentialSpec,
    pub beta: f64,
    pub tau: f64,
    pub gibbs: f64,
    pub mean_r: f64,
    pub mean_e: f64,
    pub sigma: Matrix3<f64>,
    pub tau_r: f64,
    pub tau_e: f64,
    pub sound_speed: f64,
    pub rotation: Matrix3<f64>,
    pub mode_covariance: Matrix3<f64>,
}

impl CanonicalParams {
    pub fn new(potential: PotentialSpec, beta: f64, tau: f64) -> Result<Self> {
        let m = Multipliers::new(beta, tau)?;
        let t = tilted_moments(&potential, m)?;
        let (tau_r, tau_e, c) = linear_from(&m, &t)?;
        let (rotation, mode_covariance) = rotation_from(&m, &t, tau_r, tau_e, c)?;
        Ok(CanonicalParams {
            potential,
            beta,
            tau,
            gibbs: gibbs_from(&m, &t),
            mean_r: t.mean_r,
            mean_e: 0.5 / beta + t.mean_v,
            sigma: covariance_from(&m, &t),
            tau_r,
            tau_e,
            sound_speed: c,
            rotation,
            mode_covariance,
        })
    }

    pub fn multipliers(&self) -> Multipliers {
        Multipliers { beta: self.beta, tau: self.tau }
    }

    pub fn lambda(&self) -> [f64; 2] {
        self.multipliers().lambda()
    }

    /// `w̄ = (0, r̄, ē)`.
    pub fn mean_vector(&self) -> [f64; 3] {
        [0.0, self.mean_r, self.mean_e]
    }
}
