//! Invariants of the public API, as property tests and small statistical checks.

use proptest::prelude::*;

use chainfluct::euler::{backward_evolve, predicted_mode_covariance};
use chainfluct::field::{field, hk_norm, mode_profile, static_covariance};
use chainfluct::micro::rate::{empirical_tail, large_deviation_bound, rate_function};
use chainfluct::rng::{normal, replica_rng};
use chainfluct::stats::Welford;
use chainfluct::thermo::{entropy_and_multipliers, tilted_expectation};
use chainfluct::*;

fn soft(a: f64) -> PotentialSpec {
    PotentialSpec::softened_quadratic(a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvature_stays_in_bounds(a in 0.0f64..2.0, r in -50.0f64..50.0) {
        let spec = soft(a);
        let b = spec.curvature_bounds();
        let v2 = spec.curvature(r);
        prop_assert!(b.lower <= v2 && v2 <= b.upper);
        prop_assert!(spec.value(r) >= 0.0);
        prop_assert_eq!(spec.value(0.0), 0.0);
        prop_assert_eq!(spec.slope(0.0), 0.0);
    }

    #[test]
    fn multipliers_invert_means(a in 0.0f64..0.5, beta in 0.5f64..2.0, tau in -1.0f64..1.0) {
        let spec = soft(a);
        let p = CanonicalParams::new(spec, beta, tau).unwrap();
        let t = entropy_and_multipliers(&spec, p.mean_r, p.mean_e).unwrap();
        prop_assert!((t.beta - beta).abs() < 1e-8 * beta && (t.tau - tau).abs() < 1e-8);
        prop_assert!(p.sound_speed > 0.0);
        prop_assert!((p.sigma[(0, 0)] * beta - 1.0).abs() < 1e-14);
        let q = p.mode_covariance;
        prop_assert!((q[(1, 1)] / q[(0, 0)] - p.sound_speed.powi(2)).abs() < 1e-8);
        // the equilibrium tension identity E[V'(r)] = τ
        let [m] = tilted_expectation(&spec, p.multipliers(), |r| [spec.slope(r)]).unwrap();
        prop_assert!((m - tau).abs() < 1e-9);
    }

    #[test]
    fn backward_evolution_is_a_group(beta in 0.5f64..2.0, tau in -1.0f64..1.0, t1 in -2.0f64..2.0, t2 in -2.0f64..2.0, seed in 0u64..1000) {
        let p = CanonicalParams::new(soft(0.2), beta, tau).unwrap();
        let sys = LinearizedSystem::new(&p).unwrap();
        let mut rng = replica_rng(seed, 0);
        let mut h = TestFunction::zero(4);
        for v in [&mut h.sine, &mut h.cosine, &mut h.entropy_cos].into_iter() {
            v.iter_mut().for_each(|x| *x = normal(&mut rng));
        }
        h.entropy_sin.iter_mut().skip(1).for_each(|x| *x = normal(&mut rng));
        let both = backward_evolve(&sys, &h, t1 + t2).unwrap();
        let split = backward_evolve(&sys, &backward_evolve(&sys, &h, t1).unwrap(), t2).unwrap();
        let back = backward_evolve(&sys, &both, -(t1 + t2)).unwrap();
        for (x, y) in [(&both, &split), (&back, &h)] {
            for (u, v) in [(&x.sine, &y.sine), (&x.cosine, &y.cosine), (&x.entropy_cos, &y.entropy_cos), (&x.entropy_sin, &y.entropy_sin)] {
                for (a, b) in u.iter().zip(v) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn mode_covariance_solves_the_wave_equation(beta in 0.5f64..2.0, tau in -1.0f64..1.0, n in 0usize..4, t in 0.0f64..5.0) {
        let p = CanonicalParams::new(soft(0.2), beta, tau).unwrap();
        let sys = LinearizedSystem::new(&p).unwrap();
        let (a, b) = (Mode::new(Branch::Sine, n), Mode::new(Branch::Cosine, n));
        let w2 = (sys.c * a.wavenumber()).powi(2);
        let h = 1e-3;
        for (x, y) in [(a, a), (b, b), (a, b), (b, a)] {
            let c = |s: f64| predicted_mode_covariance(&sys, x, y, s);
            let d2 = (c(t + h) - 2.0 * c(t) + c(t - h)) / (h * h);
            prop_assert!((d2 + w2 * c(t)).abs() < 1e-4 * w2.max(1.0) * w2);
        }
        let e = Mode::new(Branch::EntropyCosine, n);
        prop_assert_eq!(predicted_mode_covariance(&sys, e, e, t), predicted_mode_covariance(&sys, e, e, 0.0));
    }

    #[test]
    fn field_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let p = CanonicalParams::new(soft(0.2), 1.0, 0.3).unwrap();
        let mut rng = replica_rng(seed, 0);
        let s = sample_equilibrium(&p.potential, p.multipliers(), 32, Boundary::WallTension(0.3), &mut rng).unwrap();
        let h = mode_profile(&p, Mode::new(Branch::Sine, 1), 32);
        let g = mode_profile(&p, Mode::new(Branch::EntropyCosine, 2), 32);
        let combo: Vec<[f64; 3]> = h.iter().zip(&g).map(|(x, y)| [0, 1, 2].map(|j| a * x[j] + b * y[j])).collect();
        let lhs = field(&s, &p, &combo).unwrap();
        let rhs = a * field(&s, &p, &h).unwrap() + b * field(&s, &p, &g).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn higher_k_norm_is_smaller_on_entropy_modes(ys in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
        let vals: Vec<(Mode, f64)> = ys.iter().enumerate().map(|(i, y)| (Mode::new(Branch::EntropyCosine, i + 1), *y)).collect();
        prop_assert!(hk_norm(&vals, 3.0) <= hk_norm(&vals, 2.0));
    }
}

#[test]
fn harmonic_rate_function_is_locally_quadratic() {
    let p = CanonicalParams::new(PotentialSpec::harmonic(), 1.3, 0.4).unwrap();
    let inv = p.sigma.try_inverse().unwrap();
    let ul = p.mean_vector();
    let mut rng = replica_rng(21, 0);
    for _ in 0..20 {
        let mut d = nalgebra::Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng));
        d *= 1e-3 / d.norm();
        let u = [ul[0] + d[0], ul[1] + d[1], ul[2] + d[2]];
        let quad = 0.5 * (d.transpose() * inv * d)[0];
        let i = rate_function(&p, u).unwrap();
        assert!((i - quad).abs() <= 1e-3 * quad, "I = {i}, quadratic = {quad}");
    }
}

#[test]
fn empirical_tail_respects_the_bound() {
    let p = CanonicalParams::new(PotentialSpec::harmonic(), 1.0, 0.0).unwrap();
    let m = 2.0 * p.sigma.symmetric_eigenvalues().max();
    let mut rng = replica_rng(22, 0);
    for delta in [0.3, 0.4, 0.5] {
        let tail = empirical_tail(&p, 64, delta, 20_000, &mut rng).unwrap();
        assert!(tail <= large_deviation_bound(64, delta, m, 3), "delta {delta}: {tail}");
    }
}

#[test]
fn canonical_covariance_matches_sampling() {
    use chainfluct::chain::StretchSampler;
    let p = CanonicalParams::new(soft(0.2), 1.0, 0.5).unwrap();
    let spec = p.potential;
    let sampler = StretchSampler::new(spec, p.multipliers());
    let mut rng = replica_rng(23, 0);
    let ul = p.mean_vector();
    let pairs = [(1, 1), (1, 2), (2, 2)];
    let mut acc = vec![Welford::default(); 3];
    for _ in 0..2_000_000 {
        let r = sampler.sample(&mut rng).unwrap();
        let q = normal(&mut rng);
        let w = [q, r - ul[1], 0.5 * q * q + spec.value(r) - ul[2]];
        for (a, &(i, j)) in acc.iter_mut().zip(&pairs) {
            a.push(w[i] * w[j]);
        }
    }
    for (a, &(i, j)) in acc.iter().zip(&pairs) {
        assert!(a.estimate().consistent_with(p.sigma[(i, j)], 4.0), "Sigma[{i},{j}] {:?} vs {}", a.estimate(), p.sigma[(i, j)]);
    }
}

#[test]
fn static_field_covariance() {
    let p = CanonicalParams::new(soft(0.2), 1.0, 0.3).unwrap();
    let n = 64;
    let modes = [Mode::new(Branch::Sine, 0), Mode::new(Branch::Sine, 1), Mode::new(Branch::EntropyCosine, 0), Mode::new(Branch::Cosine, 0)];
    let profiles: Vec<Vec<[f64; 3]>> = modes.iter().map(|m| mode_profile(&p, *m, n)).collect();
    let mut rng = replica_rng(24, 0);
    let samples: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let s = sample_equilibrium(&p.potential, p.multipliers(), n, Boundary::WallTension(0.3), &mut rng).unwrap();
            profiles.iter().map(|h| field(&s, &p, h).unwrap()).collect()
        })
        .collect();
    for i in 0..modes.len() {
        for j in i..modes.len() {
            let acc: Welford = samples.iter().map(|y| y[i] * y[j]).collect();
            let target = static_covariance(&p, &profiles[i], &profiles[j]).unwrap();
            assert!(acc.estimate().consistent_with(target, 4.0), "{:?}/{:?}: {:?} vs {target}", modes[i], modes[j], acc.estimate());
        }
    }
    // distinct sine modes are nearly orthogonal on the grid
    let cross = static_covariance(&p, &profiles[0], &profiles[1]).unwrap();
    assert!(cross.abs() < 0.05, "{cross}");
}

// Replicas of (C(lag)/C(0) numerator and variance) pooled for the sine n = 0 mode.
fn sine_lag_product(d: &Dynamics, p: &CanonicalParams, lag: f64, replicas: usize, seed: u64) -> (Welford, Welford) {
    let n = d.len();
    let h = mode_profile(p, Mode::new(Branch::Sine, 0), n);
    let mut prod = Welford::default();
    let mut var = Welford::default();
    for k in 0..replicas {
        let mut rng = replica_rng(seed, k as u64);
        let mut s = sample_equilibrium(&p.potential, p.multipliers(), n, d.boundary(), &mut rng).unwrap();
        let y0 = field(&s, p, &h).unwrap();
        d.advance(&mut s, lag, &mut rng).unwrap();
        let y1 = field(&s, p, &h).unwrap();
        prod.push(y0 * y1);
        var.push(y0 * y0);
    }
    (prod, var)
}

#[test]
fn sweep_orders_and_backends_agree_in_law() {
    let p = CanonicalParams::new(PotentialSpec::harmonic(), 1.0, 0.2).unwrap();
    let boundary = Boundary::WallTension(0.2);
    let configs = [
        SimConfig::default(),
        SimConfig { sweep: SweepOrder::OddFirst, ..SimConfig::default() },
        SimConfig { integrator: NoiseScheme::DirectEm, h_micro: Some(0.02 / 32.0), ..SimConfig::default() },
    ];
    let mut est = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let d = Dynamics::new(p.potential, *cfg, 32, boundary).unwrap();
        est.push(sine_lag_product(&d, &p, 0.6, 3000, 30 + i as u64).0.estimate());
    }
    for e in &est[1..] {
        let se = (e.stderr.powi(2) + est[0].stderr.powi(2)).sqrt();
        assert!((e.value - est[0].value).abs() < 4.0 * se, "{est:?}");
    }
}

#[test]
fn harmonic_sine_mode_follows_the_sound_cosine() {
    let p = CanonicalParams::new(PotentialSpec::harmonic(), 1.0, 0.0).unwrap();
    let d = Dynamics::new(p.potential, SimConfig::default(), 128, Boundary::WallTension(0.0)).unwrap();
    let omega = p.sound_speed * std::f64::consts::FRAC_PI_2;
    for (j, t) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let (prod, var) = sine_lag_product(&d, &p, t, 1000, 40 + j as u64);
        let ratio = prod.mean() / var.mean();
        let se = prod.estimate().stderr / var.mean();
        assert!((ratio - (omega * t).cos()).abs() <= 0.05 + 4.0 * se, "t = {t}: {ratio} vs {}", (omega * t).cos());
    }
}

#[test]
fn single_site_moments_are_stationary() {
    let p = CanonicalParams::new(soft(0.2), 1.0, 0.3).unwrap();
    let spec = p.potential;
    let boundary = Boundary::WallTension(0.3);
    let n = 32;
    for drift in [true, false] {
        let d = Dynamics::new(spec, SimConfig { drift, ..SimConfig::default() }, n, boundary).unwrap();
        let mut at = [vec![Welford::default(); 4], vec![Welford::default(); 4]];
        for k in 0..300 {
            let mut rng = replica_rng(50 + drift as u64, k);
            let mut s = sample_equilibrium(&spec, p.multipliers(), n, boundary, &mut rng).unwrap();
            for acc in at.iter_mut() {
                for i in 0..n {
                    let (x, r) = (s.p[i], s.r[i] - p.mean_r);
                    for (a, v) in acc.iter_mut().zip([x * x, x.powi(4), r * r, r.powi(4)]) {
                        a.push(v);
                    }
                }
                d.advance(&mut s, 0.5, &mut rng).unwrap();
            }
        }
        for m in 0..4 {
            let (e0, e1) = (at[0][m].estimate(), at[1][m].estimate());
            let se = (e0.stderr.powi(2) + e1.stderr.powi(2)).sqrt();
            assert!((e0.value - e1.value).abs() < 4.0 * se, "drift {drift}, moment {m}: {e0:?} vs {e1:?}");
        }
    }
}

#[test]
fn drift_invariant_is_conserved_without_noise() {
    let spec = PotentialSpec::harmonic();
    let boundary = Boundary::WallTension(0.4);
    let d = Dynamics::new(spec, SimConfig { gamma: 0.0, h_micro: Some(2e-5), ..SimConfig::default() }, 32, boundary).unwrap();
    let m = Multipliers::new(1.0, 0.4).unwrap();
    let mut rng = replica_rng(60, 0);
    let mut s = sample_equilibrium(&spec, m, 32, boundary, &mut rng).unwrap();
    let h0 = s.drift_invariant(&spec);
    d.advance(&mut s, 1.0, &mut rng).unwrap();
    // Verlet conserves energy up to O((N·h)²) per site
    assert!((s.drift_invariant(&spec) - h0).abs() <= 1e-4 * 32.0, "{h0} vs {}", s.drift_invariant(&spec));
}

#[test]
fn harmonic_fourth_moment_gap_decays_like_one_over_n() {
    use chainfluct::micro::ensembles::{ensembles_gap_curve, MicroOptions, Observable};
    let p = CanonicalParams::new(PotentialSpec::harmonic(), 1.5, 0.2).unwrap();
    let curve = ensembles_gap_curve(&p, Observable::MomentumFourth, &[8, 16, 32, 64], &MicroOptions::default()).unwrap();
    assert!((curve.slope() + 1.0).abs() < 1e-6, "slope {}", curve.slope());
}

#[test]
fn anharmonic_slope_gap_shrinks_with_n() {
    use chainfluct::micro::ensembles::{ensembles_gap_curve, MicroOptions, Observable};
    let p = CanonicalParams::new(soft(1.0), 1.0, 0.5).unwrap();
    let opts = MicroOptions { sweeps: 200_000, seed: 70, ..Default::default() };
    let curve = ensembles_gap_curve(&p, Observable::Slope, &[3, 12], &opts).unwrap();
    let (a, b) = (&curve.points[0], &curve.points[1]);
    assert!(a.gap.abs() > 4.0 * a.micro.stderr, "{a:?}");
    assert!(b.gap.abs() < a.gap.abs() - 2.0 * (a.micro.stderr.powi(2) + b.micro.stderr.powi(2)).sqrt(), "{a:?} {b:?}");
}
