//! Thermodynamic values frozen from the 40-digit mpmath oracle in
//! `tests/oracles/thermo_oracle.py`.

use chainfluct::thermo::{entropy_and_multipliers, gibbs_potential, mean_quantities, rotation_matrix};
use chainfluct::{CanonicalParams, Multipliers, PotentialSpec};

fn soft(a: f64) -> PotentialSpec {
    PotentialSpec::softened_quadratic(a).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn gibbs_potential_softened() {
    let g = gibbs_potential(&soft(0.2), Multipliers::new(2.0, 0.3).unwrap().lambda()).unwrap();
    assert!(rel(g, 1.1480505936855501763) < 1e-10, "G = {g}");
}

#[test]
fn covariance_softened() {
    let p = CanonicalParams::new(soft(0.2), 1.0, 0.5).unwrap();
    let s = p.sigma;
    assert!(rel(s[(0, 0)], 1.0) < 1e-14);
    assert!(rel(s[(1, 1)], 0.90201418030849875207) < 1e-9, "{s}");
    assert!(rel(s[(1, 2)], 0.46414538459643960865) < 1e-9, "{s}");
    assert!(rel(s[(2, 1)], 0.46414538459643960865) < 1e-9, "{s}");
    assert!(rel(s[(2, 2)], 1.2512539153628063017) < 1e-9, "{s}");
    assert_eq!(s[(0, 1)], 0.0);
    assert_eq!(s[(0, 2)], 0.0);
}

#[test]
fn means_and_linear_coefficients_at_zero_tension() {
    let spec = soft(0.2);
    let (r, e) = mean_quantities(&spec, [0.0, -1.0]).unwrap();
    assert!(r.abs() < 1e-12);
    assert!(rel(e, 1.0126562082749296839) < 1e-10, "e = {e}");
    let p = CanonicalParams::new(spec, 1.0, 0.0).unwrap();
    // the oracle differentiates τ(r, e) numerically at step 1e-8
    assert!(rel(p.tau_r, 1.11628088643141) < 1e-7, "tau_r = {}", p.tau_r);
    assert!(p.tau_e.abs() < 1e-9, "tau_e = {}", p.tau_e);
    assert!(rel(p.sound_speed, 1.05654194731274) < 1e-7, "c = {}", p.sound_speed);
}

#[test]
fn energy_direction_curvature_is_q33() {
    // d²G/dβ² at fixed τ and β = 1 equals Q33 = ½ + β²Var(V − τr)
    let spec = soft(0.2);
    let (_, q) = rotation_matrix(&spec, Multipliers::new(1.0, 0.5).unwrap().lambda()).unwrap();
    assert!(rel(q[(2, 2)], 1.012612075844) < 1e-8, "Q33 = {}", q[(2, 2)]);
    let h = 1e-4;
    let g = |b: f64| gibbs_potential(&spec, [b * 0.5, -b]).unwrap();
    let d2 = (g(1.0 + h) - 2.0 * g(1.0) + g(1.0 - h)) / (h * h);
    assert!(rel(d2, 1.012612075844) < 1e-5, "d2G = {d2}");
}

#[test]
fn entropy_inverts_the_means() {
    let spec = soft(0.2);
    for (beta, tau) in [(1.0, 0.0), (2.0, 0.3), (0.7, -0.8)] {
        let p = CanonicalParams::new(spec, beta, tau).unwrap();
        let t = entropy_and_multipliers(&spec, p.mean_r, p.mean_e).unwrap();
        assert!(rel(t.beta, beta) < 1e-9 && (t.tau - tau).abs() < 1e-9, "{t:?}");
        // S(r̄, ē) = −λ·(r̄, ē) + G
        let s = p.gibbs - beta * tau * p.mean_r + beta * p.mean_e;
        assert!((t.entropy - s).abs() < 1e-9 * (1.0 + s.abs()));
    }
}
