//! One function per subcommand; each writes its artifacts and `summary.json` into the output directory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use chainfluct::euler::predicted_mode_covariance;
use chainfluct::field::{autocorrelation, bg_residual_variance, default_bg_gradient, fit_oscillation, run_mode_ensemble};
use chainfluct::micro::{ensembles_gap_curve, spectral_gap_estimate, GapMethod, MicroOptions, VampOptions};
use chainfluct::micro::gap::two_point_gap;
use chainfluct::rng::replica_rng;
use chainfluct::stats::{linear_fit, Estimate};
use chainfluct::{sample_equilibrium, Branch, CanonicalParams, ChainState, Dynamics, LinearizedSystem, Mode, SimConfig};

use crate::config::{Config, Kind};

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(dir, name, &s)
}

fn est(e: Estimate) -> Value {
    json!({ "value": e.value, "stderr": e.stderr })
}

fn matrix(m: &nalgebra::Matrix3<f64>) -> Value {
    json!((0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn params(cfg: &Config) -> Result<CanonicalParams> {
    Ok(CanonicalParams::new(cfg.potential, cfg.beta, cfg.tau)?)
}

fn dynamics(cfg: &Config, n: usize) -> Result<Dynamics> {
    let ch = cfg.chain.as_ref().expect("validated chain section");
    let sim = SimConfig { gamma: ch.gamma, h_micro: ch.h_micro, integrator: ch.integrator, sweep: ch.sweep, ..SimConfig::default() };
    Ok(Dynamics::new(cfg.potential, sim, n, ch.boundary(cfg.tau))?)
}

fn header(cfg: &Config) -> Value {
    json!({
        "experiment": cfg.kind.name(),
        "potential": { "kind": if cfg.potential.is_harmonic() { "harmonic" } else { "softened-quadratic" }, "a": cfg.potential.anharmonicity() },
        "beta": cfg.beta,
        "tau": cfg.tau,
        "seed": cfg.seed,
    })
}

fn summary(cfg: &Config, mut body: Value) -> Result<()> {
    let mut h = header(cfg);
    h.as_object_mut().unwrap().append(body.as_object_mut().expect("summary body is an object"));
    write_json(&cfg.out, "summary.json", &h)
}

pub fn run(cfg: &Config) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    match cfg.kind {
        Kind::Thermo => thermo(cfg),
        Kind::Simulate => simulate(cfg),
        Kind::Modes => modes(cfg),
        Kind::Euler => euler(cfg),
        Kind::Gap => gap(cfg),
        Kind::Ensembles => ensembles(cfg),
        Kind::BgResidual => bg_residual(cfg),
    }
}

fn thermo(cfg: &Config) -> Result<()> {
    let p = params(cfg)?;
    let record = json!({
        "beta": p.beta,
        "tau": p.tau,
        "G": p.gibbs,
        "r_bar": p.mean_r,
        "e_bar": p.mean_e,
        "Sigma": matrix(&p.sigma),
        "tau_r": p.tau_r,
        "tau_e": p.tau_e,
        "c": p.sound_speed,
        "R": matrix(&p.rotation),
        "Q": matrix(&p.mode_covariance),
    });
    write_json(&cfg.out, "thermo.json", &record)?;
    println!("{}", serde_json::to_string(&record)?);
    summary(cfg, json!({ "G": p.gibbs, "c": p.sound_speed, "r_bar": p.mean_r, "e_bar": p.mean_e }))
}

fn dump(csv: &mut String, s: &ChainState, spec: &chainfluct::PotentialSpec) {
    for i in 0..s.len() {
        let _ = writeln!(csv, "{},{},{},{},{}", s.t_macro, i + 1, s.p[i], s.r[i], s.energy(spec, i));
    }
}

fn simulate(cfg: &Config) -> Result<()> {
    let p = params(cfg)?;
    let ch = cfg.chain.as_ref().unwrap();
    let d = dynamics(cfg, ch.n)?;
    let mut rng = replica_rng(cfg.seed, 0);
    let mut s = sample_equilibrium(&p.potential, p.multipliers(), ch.n, d.boundary(), &mut rng)?;
    let start = s.conserved_totals(&p.potential);
    let mut csv = String::from("t,site,p,r,e\n");
    let mut failure = None;
    for &t in &cfg.times {
        let dt = t - s.t_macro;
        if dt > 0.0 {
            if let Err(e) = d.advance(&mut s, dt, &mut rng) {
                failure = Some(e);
                break;
            }
        }
        dump(&mut csv, &s, &p.potential);
    }
    write_file(&cfg.out, "trajectory.csv", &csv)?;
    if let Some(e) = failure {
        anyhow::bail!("{e}; trajectory.csv holds the samples up to the last valid checkpoint");
    }
    let end = s.conserved_totals(&p.potential);
    summary(
        cfg,
        json!({
            "n": ch.n,
            "gamma": ch.gamma,
            "h_micro": d.h_micro(),
            "t_final": s.t_macro,
            "totals_initial": start,
            "totals_final": end,
            "drift_invariant_final": s.drift_invariant(&p.potential),
        }),
    )
}

fn modes(cfg: &Config) -> Result<()> {
    let p = params(cfg)?;
    let sys = LinearizedSystem::new(&p)?;
    let ch = cfg.chain.as_ref().unwrap();
    let d = dynamics(cfg, ch.n)?;
    let series = run_mode_ensemble(&d, &p, &cfg.modes, &cfg.times, cfg.replicas, cfg.seed)?;
    let mut csv = String::from("t,mode_branch,mode_n,replica,value\n");
    for s in &series {
        for (k, row) in s.values.iter().enumerate() {
            for (t, v) in s.times.iter().zip(row) {
                let _ = writeln!(csv, "{t},{},{},{k},{v}", s.mode.branch.name(), s.mode.n);
            }
        }
    }
    write_file(&cfg.out, "modes.csv", &csv)?;
    let c = p.sound_speed;
    let mut rows = Vec::new();
    for s in &series {
        let m = s.mode;
        let corr = autocorrelation(s, cfg.max_lag)?;
        let mut row = json!({
            "branch": m.branch.name(),
            "n": m.n,
            "variance": est(Estimate::new(corr.value[0], corr.stderr[0])),
            "predicted_variance": predicted_mode_covariance(&sys, m, m, 0.0),
        });
        if !m.branch.is_entropy() {
            let omega = c * m.wavenumber();
            let fit = fit_oscillation(s, cfg.max_lag, cfg.fit_window.0 * omega, cfg.fit_window.1 * omega);
            let obj = row.as_object_mut().unwrap();
            obj.insert("predicted_frequency".into(), json!(omega));
            match fit {
                Ok(f) => {
                    obj.insert("frequency".into(), est(f.omega));
                    obj.insert("amplitude".into(), est(f.amplitude));
                }
                Err(e) => {
                    obj.insert("frequency".into(), Value::Null);
                    obj.insert("fit_error".into(), json!(e.to_string()));
                }
            }
        }
        rows.push(row);
    }
    summary(cfg, json!({ "n": ch.n, "gamma": ch.gamma, "replicas": cfg.replicas, "h_micro": d.h_micro(), "c": c, "modes": rows }))
}

fn euler(cfg: &Config) -> Result<()> {
    let p = params(cfg)?;
    let sys = LinearizedSystem::new(&p)?;
    let pairs = [
        (Branch::Sine, Branch::Sine),
        (Branch::Cosine, Branch::Cosine),
        (Branch::Sine, Branch::Cosine),
        (Branch::Cosine, Branch::Sine),
        (Branch::EntropyCosine, Branch::EntropyCosine),
        (Branch::EntropySine, Branch::EntropySine),
    ];
    let mut csv = String::from("t,branch_pair,n,value\n");
    for &t in &cfg.times {
        for n in 0..=cfg.euler_n_max {
            for (a, b) in pairs {
                let v = predicted_mode_covariance(&sys, Mode::new(a, n), Mode::new(b, n), t);
                let _ = writeln!(csv, "{t},{}/{},{n},{v}", a.name(), b.name());
            }
        }
    }
    write_file(&cfg.out, "euler.csv", &csv)?;
    let freqs: Vec<f64> = (0..=cfg.euler_n_max).map(|n| sys.c * Mode::new(Branch::Sine, n).wavenumber()).collect();
    summary(cfg, json!({ "c": sys.c, "tau_r": sys.tau_r, "tau_e": sys.tau_e, "Q": sys.q, "frequencies": freqs }))
}

#[derive(Serialize)]
struct GapRow {
    #[serde(rename = "K")]
    k: usize,
    estimate: f64,
    stderr: f64,
    method: GapMethod,
    converged: bool,
    lag: f64,
}

fn gap(cfg: &Config) -> Result<()> {
    let w = cfg.gap_w.expect("validated");
    let opts = VampOptions { dt: cfg.gap_dt, chains: cfg.gap_chains, horizon: cfg.gap_horizon, seed: cfg.seed };
    let mut rows = Vec::new();
    for &k in &cfg.gap_k {
        let method = cfg.gap_method.unwrap_or(if k == 2 { GapMethod::Galerkin } else { GapMethod::Vamp });
        let row = if method == GapMethod::Galerkin {
            GapRow { k, estimate: two_point_gap(&cfg.potential, w, cfg.galerkin_modes)?, stderr: 0.0, method, converged: true, lag: 0.0 }
        } else {
            let g = spectral_gap_estimate(&cfg.potential, w, k, method, &opts)?;
            GapRow { k, estimate: g.estimate, stderr: g.stderr, method, converged: g.converged, lag: g.lag }
        };
        rows.push(row);
    }
    write_json(&cfg.out, "gap.json", &rows)?;
    let scaled: Vec<f64> = rows.iter().map(|r| r.estimate * (r.k * r.k) as f64).collect();
    let exponent = if rows.len() >= 3 {
        let x: Vec<f64> = rows.iter().map(|r| (r.k as f64).ln()).collect();
        let y: Vec<f64> = scaled.iter().map(|v| v.ln()).collect();
        linear_fit(&x, &y).ok().map(|f| est(f.slope))
    } else {
        None
    };
    let band = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    summary(cfg, json!({ "w": w, "gaps": rows, "gap_times_k2": scaled, "band": band, "k2_exponent": exponent }))
}

fn ensembles(cfg: &Config) -> Result<()> {
    let p = params(cfg)?;
    let opts = MicroOptions { sweeps: cfg.sweeps, burn_in: cfg.burn_in, batches: cfg.batches, seed: cfg.seed };
    let curve = ensembles_gap_curve(&p, cfg.observable, &cfg.n_list, &opts)?;
    let rows: Vec<Value> = curve
        .points
        .iter()
        .map(|q| json!({ "n": q.n, "estimate": q.micro.value, "stderr": q.micro.stderr, "canonical": q.canonical, "gap": q.gap }))
        .collect();
    write_json(&cfg.out, "ensembles.json", &rows)?;
    summary(
        cfg,
        json!({
            "observable": cfg.observable,
            "exact_oracle": curve.exact,
            "points": rows,
            "slope": curve.fit.map(|f| est(f.slope)),
            "inconclusive": curve.inconclusive,
            "required_sweeps": curve.required_sweeps,
        }),
    )
}

fn bg_residual(cfg: &Config) -> Result<()> {
    let p = params(cfg)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let d = dynamics(cfg, n)?;
        let v = bg_residual_variance(&d, &p, default_bg_gradient, cfg.bg_horizon, cfg.replicas, cfg.seed)?;
        rows.push(json!({ "N": n, "estimate": v.value, "stderr": v.stderr }));
    }
    write_json(&cfg.out, "bg_residual.json", &rows)?;
    let slope = if rows.len() >= 2 {
        let x: Vec<f64> = cfg.n_list.iter().map(|n| (*n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r["estimate"].as_f64().unwrap().ln()).collect();
        if rows.len() >= 3 { linear_fit(&x, &y).ok().map(|f| est(f.slope)) } else { Some(json!({ "value": (y[1] - y[0]) / (x[1] - x[0]), "stderr": null })) }
    } else {
        None
    };
    summary(cfg, json!({ "horizon": cfg.bg_horizon, "replicas": cfg.replicas, "points": rows, "loglog_slope": slope }))
}
