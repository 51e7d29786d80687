//! Linearized Euler reference: stationary mode covariances and the backward
//! evolution of test functions in the decoupled coordinates.
//!
//! With `f = R⁻¹h`, the first coordinate expands on `√2 sin(θₙx)`, the second
//! on `√2 cos(θₙx)` and the third (entropy) is frozen. Per mode the pair
//! `(aₙ, c·bₙ)` rotates at frequency `cθₙ`.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Branch, Mode};
use crate::quadrature::composite_rule;
use crate::thermo::CanonicalParams;

#[derive(Clone, Debug, Serialize)]
pub struct LinearizedSystem {
    pub beta: f64,
    pub tau: f64,
    pub tau_r: f64,
    pub tau_e: f64,
    pub c: f64,
    #[serde(skip)]
    pub b: Matrix3<f64>,
    #[serde(skip)]
    pub rotation: Matrix3<f64>,
    /// Diagonal of `Q = RᵀΣR`.
    pub q: [f64; 3],
}

impl LinearizedSystem {
    /// Builds the system and checks that `B` has eigenvalues `{0, ±c}` to 1e-10.
    pub fn new(params: &CanonicalParams) -> Result<Self> {
        let b = Matrix3::new(
            0.0, params.tau_r, params.tau_e,
            1.0, 0.0, 0.0,
            params.tau, 0.0, 0.0,
        );
        let c = params.sound_speed;
        let mut ev: Vec<_> = b.complex_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| x.re.total_cmp(&y.re));
        let expect = [-c, 0.0, c];
        for (z, e) in ev.iter().zip(expect) {
            if z.im.abs() > 1e-10 || (z.re - e).abs() > 1e-10 * c.max(1.0) {
                return Err(Error::Consistency(format!("eigenvalues of B {ev:?} differ from (0, ±{c})")));
            }
        }
        let q = params.mode_covariance;
        Ok(LinearizedSystem {
            beta: params.beta,
            tau: params.tau,
            tau_r: params.tau_r,
            tau_e: params.tau_e,
            c,
            b,
            rotation: params.rotation,
            q: [q[(0, 0)], q[(1, 1)], q[(2, 2)]],
        })
    }

    /// `R⁻¹h`.
    pub fn decouple(&self, h: [f64; 3]) -> [f64; 3] {
        let c2 = self.c * self.c;
        [h[0], (h[1] + self.tau * h[2]) / c2, (-self.tau_e * h[1] + self.tau_r * h[2]) / (self.beta * c2)]
    }

    /// `R f`.
    pub fn recouple(&self, f: [f64; 3]) -> [f64; 3] {
        let v = self.rotation * nalgebra::Vector3::from(f);
        [v[0], v[1], v[2]]
    }
}

/// `E[Y(t, R·a) Y(0, R·b)]` for the stationary linearized solution.
pub fn predicted_mode_covariance(sys: &LinearizedSystem, a: Mode, b: Mode, t: f64) -> f64 {
    if a.n != b.n {
        return 0.0;
    }
    let (beta, c) = (sys.beta, sys.c);
    let phase = c * a.wavenumber() * t;
    match (a.branch, b.branch) {
        (Branch::Sine, Branch::Sine) => phase.cos() / beta,
        (Branch::Cosine, Branch::Cosine) => c * c * phase.cos() / beta,
        (Branch::Sine, Branch::Cosine) => -(c / beta) * phase.sin(),
        (Branch::Cosine, Branch::Sine) => (c / beta) * phase.sin(),
        (x, y) if x == y => sys.q[2] * a.profile_norm_sq(),
        _ => 0.0,
    }
}

/// A test function stored as coefficients in the decoupled eigenbasis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    /// First coordinate on `√2 sin(θₙx)`.
    pub sine: Vec<f64>,
    /// Second coordinate `(h₂+τh₃)/c²` on `√2 cos(θₙx)`.
    pub cosine: Vec<f64>,
    /// Entropy coordinate on `√2 cos(κₙx)`.
    pub entropy_cos: Vec<f64>,
    /// Entropy coordinate on `√2 sin(κₙx)`, `n ≥ 1` (index 0 unused).
    pub entropy_sin: Vec<f64>,
}

const PANELS: usize = 64;
const BOUNDARY_TOL: f64 = 1e-10;

impl TestFunction {
    pub fn zero(n_max: usize) -> Self {
        let z = vec![0.0; n_max + 1];
        TestFunction { sine: z.clone(), cosine: z.clone(), entropy_cos: z.clone(), entropy_sin: z }
    }

    pub fn n_max(&self) -> usize {
        self.sine.len() - 1
    }

    /// Projects `h` on modes `0..=n_max` after checking `h₁(0) = 0` and `h₂(1) + τh₃(1) = 0`.
    pub fn project<F: Fn(f64) -> [f64; 3]>(sys: &LinearizedSystem, h: F, n_max: usize) -> Result<Self> {
        let h0 = h(0.0);
        let h1 = h(1.0);
        let scale = 1.0 + h0.iter().chain(h1.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if h0[0].abs() > BOUNDARY_TOL * scale {
            return Err(Error::InvalidParameter(format!("test function violates h1(0) = 0: h1(0) = {:e}", h0[0])));
        }
        let edge = h1[1] + sys.tau * h1[2];
        if edge.abs() > BOUNDARY_TOL * scale {
            return Err(Error::InvalidParameter(format!("test function violates h2(1) + tau*h3(1) = 0: value {edge:e}")));
        }
        let mut out = TestFunction::zero(n_max);
        for (x, w) in composite_rule(0.0, 1.0, PANELS) {
            let f = sys.decouple(h(x));
            for n in 0..=n_max {
                out.sine[n] += w * f[0] * Mode::new(Branch::Sine, n).profile(x);
                out.cosine[n] += w * f[1] * Mode::new(Branch::Cosine, n).profile(x);
                let ec = Mode::new(Branch::EntropyCosine, n);
                out.entropy_cos[n] += w * f[2] * ec.profile(x) / ec.profile_norm_sq();
                if n > 0 {
                    out.entropy_sin[n] += w * f[2] * Mode::new(Branch::EntropySine, n).profile(x);
                }
            }
        }
        Ok(out)
    }

    /// Decoupled coordinates `f(x)`.
    pub fn decoupled_at(&self, x: f64) -> [f64; 3] {
        let mut f = [0.0; 3];
        for n in 0..=self.n_max() {
            f[0] += self.sine[n] * Mode::new(Branch::Sine, n).profile(x);
            f[1] += self.cosine[n] * Mode::new(Branch::Cosine, n).profile(x);
            f[2] += self.entropy_cos[n] * Mode::new(Branch::EntropyCosine, n).profile(x)
                + self.entropy_sin[n] * Mode::new(Branch::EntropySine, n).profile(x);
        }
        f
    }

    /// `h(x) = R f(x)`.
    pub fn evaluate(&self, sys: &LinearizedSystem, x: f64) -> [f64; 3] {
        sys.recouple(self.decoupled_at(x))
    }

    /// `Σ aₙ² + (c bₙ)²`, conserved by the evolution.
    pub fn sound_energy(&self, sys: &LinearizedSystem) -> f64 {
        self.sine.iter().zip(&self.cosine).map(|(a, b)| a * a + (sys.c * b).powi(2)).sum()
    }
}

/// `H(t)` solving the backward system from `H(0) = h`; negative `t` runs it backwards.
pub fn backward_evolve(sys: &LinearizedSystem, h: &TestFunction, t: f64) -> Result<TestFunction> {
    let c = sys.c;
    let mut out = h.clone();
    for n in 0..=h.n_max() {
        let (s, co) = (c * Mode::new(Branch::Sine, n).wavenumber() * t).sin_cos();
        let (a, cb) = (h.sine[n], c * h.cosine[n]);
        out.sine[n] = a * co + cb * s;
        out.cosine[n] = (cb * co - a * s) / c;
    }
    let h0 = out.evaluate(sys, 0.0);
    let h1 = out.evaluate(sys, 1.0);
    let scale = 1.0 + out.sound_energy(sys).sqrt() * (2.0 * (h.n_max() + 1) as f64).sqrt();
    if h0[0].abs() > BOUNDARY_TOL * scale || (h1[1] + sys.tau * h1[2]).abs() > BOUNDARY_TOL * scale {
        return Err(Error::Consistency(format!("evolved test function left the boundary core: H1(0) = {:e}", h0[0])));
    }
    Ok(out)
}

const FD_STEP: f64 = 1e-3;
const COMPAT_TOL: f64 = 1e-6;

fn one_sided_d1(f: [f64; 5], d: f64) -> f64 {
    (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * d)
}

fn one_sided_d2(f: [f64; 6], d: f64) -> f64 {
    (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) / (12.0 * d * d)
}

/// Endpoint compatibility of `h` with the boundary conditions.
///
/// Checks `∂ₓh₁(0) = 0`, `∂ₓ(h₂+τh₃)(1) = 0` and the second time derivatives
/// at `t = 0`, which by the equation are `c²∂²ₓh₁(0)` and `c²∂²ₓ(h₂+τh₃)(1)`.
/// Derivatives are one-sided fourth-order differences with step 1e-3.
pub fn check_compatibility<F: Fn(f64) -> [f64; 3]>(sys: &LinearizedSystem, h: F) -> bool {
    let d = FD_STEP;
    let left: [f64; 6] = std::array::from_fn(|k| h(k as f64 * d)[0]);
    let right: [f64; 6] = std::array::from_fn(|k| {
        let v = h(1.0 - k as f64 * d);
        v[1] + sys.tau * v[2]
    });
    let scale = 1.0 + left.iter().chain(right.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let c2 = sys.c * sys.c;
    let checks = [
        one_sided_d1([left[0], left[1], left[2], left[3], left[4]], d),
        one_sided_d1([right[0], right[1], right[2], right[3], right[4]], d),
        c2 * one_sided_d2(left, d),
        c2 * one_sided_d2(right, d),
    ];
    checks.iter().all(|v| v.abs() <= COMPAT_TOL * scale)
}
