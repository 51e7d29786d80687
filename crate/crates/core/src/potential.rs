//! Spring potentials of the chain.
//!
//! Two families are supported: the harmonic spring `V(r) = r²/2` and the
//! softened quadratic `V(r) = r²/2 + a(√(1+r²) − 1)`. Both satisfy
//! `V(0) = V'(0) = 0` and have curvature bounded between `δ₋` and `δ₊`, so no
//! renormalizing shift is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::solve_increasing;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Harmonic,
    SoftenedQuadratic,
}

/// A validated member of the potential family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    kind: PotentialKind,
    a: f64,
}

/// `δ₋ = inf V''` and `δ₊ = sup V''`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Values of a bond pair centered at `m` with half gap `h`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairGeometry {
    /// `V(m+h) + V(m−h) − 2V(m)`
    pub sd: f64,
    /// `V'(m+h) − V'(m−h)`
    pub slope_gap: f64,
    /// `V''(m+h) + V''(m−h)`
    pub curvature_sum: f64,
}

#[inline]
fn soft(x: f64) -> f64 {
    // hypot is several times slower; 1 + x² only overflows for |x| > 1e154
    if x.abs() < 1e150 { (1.0 + x * x).sqrt() } else { x.abs() }
}

// Softened part of the Bregman remainder, a·[s₁ − s₀ − (α/s₀)d] with s = √(1+x²).
#[inline]
fn bregman_soft(alpha: f64, d: f64, s0: f64, s1: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let u1 = alpha + d;
    // u₁s₀ − αs₁ without cancellation
    let num = if u1 * alpha > 0.0 {
        d * (u1 + alpha) / (u1 * s0 + alpha * s1)
    } else {
        u1 * s0 - alpha * s1
    };
    d * num / ((s1 + s0) * s0)
}

// u/s_u − v/s_v without cancellation.
#[inline]
fn ratio_gap(u: f64, v: f64, su: f64, sv: f64) -> f64 {
    if u * v > 0.0 {
        (u - v) * (u + v) / ((u * sv + v * su) * su * sv)
    } else {
        u / su - v / sv
    }
}

impl PotentialSpec {
    pub fn harmonic() -> Self {
        PotentialSpec { kind: PotentialKind::Harmonic, a: 0.0 }
    }

    /// Softened quadratic with anharmonicity `a`; requires `a > −1` (uniform convexity).
    pub fn softened_quadratic(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= -1.0 {
            return Err(Error::NonConvex(format!(
                "softened-quadratic needs a > -1 for inf V'' > 0, got a = {a}"
            )));
        }
        Ok(PotentialSpec { kind: PotentialKind::SoftenedQuadratic, a })
    }

    pub fn new(kind: PotentialKind, a: f64) -> Result<Self> {
        match kind {
            PotentialKind::Harmonic => Ok(Self::harmonic()),
            PotentialKind::SoftenedQuadratic => Self::softened_quadratic(a),
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn anharmonicity(&self) -> f64 {
        self.a
    }

    pub fn is_harmonic(&self) -> bool {
        self.kind == PotentialKind::Harmonic || self.a == 0.0
    }

    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => 0.5 * r * r,
            // √(1+r²) − 1 = r²/(√(1+r²) + 1)
            PotentialKind::SoftenedQuadratic => 0.5 * r * r + self.a * r * r / (soft(r) + 1.0),
        }
    }

    pub fn slope(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => r,
            PotentialKind::SoftenedQuadratic => r + self.a * r / soft(r),
        }
    }

    pub fn curvature(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => 1.0,
            PotentialKind::SoftenedQuadratic => {
                let s = soft(r);
                1.0 + self.a / (s * s * s)
            }
        }
    }

    /// `(V, V', V'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        (self.value(r), self.slope(r), self.curvature(r))
    }

    /// Closed-form curvature bounds. `V''` is monotone in `|r|`, so the extremes are
    /// `V''(0) = 1 + a` and the tail limit `1`.
    pub fn curvature_bounds(&self) -> CurvatureBounds {
        match self.kind {
            PotentialKind::Harmonic => CurvatureBounds { lower: 1.0, upper: 1.0 },
            PotentialKind::SoftenedQuadratic => {
                let (lo, hi) = if self.a >= 0.0 { (1.0, 1.0 + self.a) } else { (1.0 + self.a, 1.0) };
                CurvatureBounds { lower: lo, upper: hi }
            }
        }
    }

    /// `δ₊ < (1 + δ)δ₋`.
    pub fn check_gap_assumption(&self, delta: f64) -> bool {
        let b = self.curvature_bounds();
        b.upper < (1.0 + delta) * b.lower
    }

    /// `V(base + d) − V(base) − V'(base)·d`, accurate for small `d`.
    pub fn bregman(&self, base: f64, d: f64) -> f64 {
        let quad = 0.5 * d * d;
        match self.kind {
            PotentialKind::Harmonic => quad,
            PotentialKind::SoftenedQuadratic => {
                quad + self.a * bregman_soft(base, d, soft(base), soft(base + d))
            }
        }
    }

    /// `V(r+h) + V(r−h) − 2V(r)`.
    pub fn second_difference(&self, r: f64, h: f64) -> f64 {
        self.bregman(r, h) + self.bregman(r, -h)
    }

    /// `V'(u) − V'(v)`, accurate when `u ≈ v`.
    pub fn slope_difference(&self, u: f64, v: f64) -> f64 {
        match self.kind {
            PotentialKind::Harmonic => u - v,
            PotentialKind::SoftenedQuadratic => {
                (u - v) + self.a * ratio_gap(u, v, soft(u), soft(v))
            }
        }
    }

    pub(crate) fn pair_geometry(&self, m: f64, h: f64) -> PairGeometry {
        match self.kind {
            PotentialKind::Harmonic => PairGeometry { sd: h * h, slope_gap: 2.0 * h, curvature_sum: 2.0 },
            PotentialKind::SoftenedQuadratic => {
                let a = self.a;
                let (u, v) = (m + h, m - h);
                let (s0, su, sv) = (soft(m), soft(u), soft(v));
                let sd = h * h + a * (bregman_soft(m, h, s0, su) + bregman_soft(m, -h, s0, sv));
                let slope_gap = 2.0 * h + a * ratio_gap(u, v, su, sv);
                let curvature_sum = 2.0 + a * (1.0 / (su * su * su) + 1.0 / (sv * sv * sv));
                PairGeometry { sd, slope_gap, curvature_sum }
            }
        }
    }

    /// The unique `m` with `V'(m) = τ`, i.e. the mode of `exp(−βV(r) + βτr)`.
    pub fn tilted_minimizer(&self, tau: f64) -> f64 {
        if self.is_harmonic() {
            return tau;
        }
        let b = self.curvature_bounds();
        let (lo, hi) = if tau >= 0.0 { (tau / b.upper, tau / b.lower) } else { (tau / b.lower, tau / b.upper) };
        solve_increasing(|x| (self.slope(x) - tau, self.curvature(x)), lo, hi, tau / b.upper)
    }
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::harmonic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn soft02() -> PotentialSpec {
        PotentialSpec::softened_quadratic(0.2).unwrap()
    }

    #[test]
    fn eval_examples() {
        let h = PotentialSpec::harmonic();
        assert_eq!(h.eval(0.0), (0.0, 0.0, 1.0));
        assert_eq!(h.eval(2.0), (2.0, 2.0, 1.0));
        let (v, dv, ddv) = soft02().eval(0.0);
        assert_eq!((v, dv), (0.0, 0.0));
        assert!((ddv - 1.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_convex() {
        assert!(PotentialSpec::softened_quadratic(-1.0).is_err());
        assert!(PotentialSpec::softened_quadratic(f64::NAN).is_err());
        assert!(PotentialSpec::softened_quadratic(-0.5).is_ok());
    }

    #[test]
    fn bounds_match_brute_force_grid() {
        // Independent oracle: dense grid on [-1e4, 1e4] plus the analytic tail limit 1.
        for a in [0.0, 0.005, 0.05, 0.2, -0.3] {
            let spec = PotentialSpec::softened_quadratic(a).unwrap();
            let (mut lo, mut hi) = (1.0f64, 1.0f64);
            let n = 400_000;
            for i in 0..=n {
                let t = -1.0 + 2.0 * i as f64 / n as f64;
                let r = 1e4 * t * t * t;
                let c = spec.curvature(r);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            let b = spec.curvature_bounds();
            assert!((b.lower - lo).abs() < 1e-10, "a={a}: {} vs {}", b.lower, lo);
            assert!((b.upper - hi).abs() < 1e-10, "a={a}: {} vs {}", b.upper, hi);
        }
        let zero = PotentialSpec::softened_quadratic(0.0).unwrap().curvature_bounds();
        assert_eq!((zero.lower, zero.upper), (1.0, 1.0));
    }

    #[test]
    fn gap_assumption_examples() {
        assert!(PotentialSpec::harmonic().check_gap_assumption(0.01));
        assert!(!soft02().check_gap_assumption(0.01));
        assert!(PotentialSpec::softened_quadratic(0.005).unwrap().check_gap_assumption(0.01));
    }

    #[test]
    fn finite_difference_derivatives() {
        let spec = soft02();
        for &r in &[-3.0, -0.7, 0.0, 0.4, 2.5, 10.0] {
            for &h in &[1e-3, 1e-4] {
                let d1 = (spec.value(r + h) - spec.value(r - h)) / (2.0 * h);
                let d2 = (spec.slope(r + h) - spec.slope(r - h)) / (2.0 * h);
                assert!((d1 - spec.slope(r)).abs() <= 0.5 * h * h + 1e-11);
                assert!((d2 - spec.curvature(r)).abs() <= 1.0 * h * h + 1e-11);
            }
        }
    }

    #[test]
    fn tilted_minimizer_solves_slope_equation() {
        let spec = soft02();
        for &tau in &[-2.0, -0.3, 0.0, 0.5, 4.0] {
            let m = spec.tilted_minimizer(tau);
            assert!((spec.slope(m) - tau).abs() < 1e-14 * (1.0 + tau.abs()));
        }
    }

    proptest! {
        #[test]
        fn curvature_within_bounds(r in -50.0f64..50.0, a in 0.0f64..1.0) {
            let spec = PotentialSpec::softened_quadratic(a).unwrap();
            let b = spec.curvature_bounds();
            let c = spec.curvature(r);
            prop_assert!(b.lower <= c && c <= b.upper);
            prop_assert!(spec.value(r) >= 0.0);
        }

        #[test]
        fn bregman_matches_direct_evaluation(base in -20.0f64..20.0, d in -5.0f64..5.0) {
            let spec = soft02();
            let direct = spec.value(base + d) - spec.value(base) - spec.slope(base) * d;
            let scale = spec.value(base + d).abs() + spec.value(base).abs() + (spec.slope(base) * d).abs();
            prop_assert!((spec.bregman(base, d) - direct).abs() <= 1e-13 * scale + 1e-300);
            prop_assert!(spec.bregman(base, d) >= 0.0);
        }

        #[test]
        fn slope_difference_matches_direct(u in -20.0f64..20.0, v in -20.0f64..20.0) {
            let spec = soft02();
            let direct = spec.slope(u) - spec.slope(v);
            let scale = spec.slope(u).abs() + spec.slope(v).abs();
            prop_assert!((spec.slope_difference(u, v) - direct).abs() <= 1e-14 * scale + 1e-300);
        }

        #[test]
        fn pair_geometry_consistent(m in -10.0f64..10.0, h in 0.0f64..4.0) {
            let spec = soft02();
            let g = spec.pair_geometry(m, h);
            prop_assert!((g.sd - spec.second_difference(m, h)).abs() <= 1e-14 * (1.0 + g.sd));
            prop_assert!((g.slope_gap - spec.slope_difference(m + h, m - h)).abs() <= 1e-14 * (1.0 + g.slope_gap));
            let cs = spec.curvature(m + h) + spec.curvature(m - h);
            prop_assert!((g.curvature_sum - cs).abs() <= 1e-14);
        }
    }

    #[test]
    fn second_difference_small_gap_is_accurate() {
        let spec = soft02();
        let (m, h) = (3.0, 1e-7);
        let expect = spec.curvature(m) * h * h;
        assert!((spec.second_difference(m, h) / expect - 1.0).abs() < 1e-9);
    }
}
