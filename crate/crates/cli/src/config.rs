//! TOML experiment configs: schema, lookup and validation.
//!
//! Every problem found is collected; the run starts only when the list is empty.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use toml::{Table, Value};

use chainfluct::chain::{Boundary, NoiseScheme, SweepOrder};
use chainfluct::micro::{GapMethod, Observable};
use chainfluct::{Branch, Mode, PotentialKind, PotentialSpec};

/// Every accepted key, dotted.
pub const SCHEMA: &[&str] = &[
    "experiment",
    "seed",
    "replicas",
    "threads",
    "potential.kind",
    "potential.a",
    "thermo.beta",
    "thermo.tau",
    "chain.n",
    "chain.gamma",
    "chain.boundary",
    "chain.integrator",
    "chain.sweep",
    "chain.h_micro",
    "time.t_max",
    "time.dt",
    "modes.list",
    "modes.max_lag",
    "modes.fit_lo",
    "modes.fit_hi",
    "euler.n_max",
    "gap.k",
    "gap.method",
    "gap.w",
    "gap.dt",
    "gap.chains",
    "gap.horizon",
    "gap.galerkin_modes",
    "ensembles.observable",
    "ensembles.n_list",
    "ensembles.sweeps",
    "ensembles.burn_in",
    "ensembles.batches",
    "bg.n_list",
    "bg.horizon",
    "output.dir",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Thermo,
    Simulate,
    Modes,
    Euler,
    Gap,
    Ensembles,
    BgResidual,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Thermo => "thermo",
            Kind::Simulate => "simulate",
            Kind::Modes => "modes",
            Kind::Euler => "euler",
            Kind::Gap => "gap",
            Kind::Ensembles => "ensembles",
            Kind::BgResidual => "bg-residual",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainSpec {
    pub n: usize,
    pub gamma: f64,
    pub boundary_wall: bool,
    pub integrator: NoiseScheme,
    pub sweep: SweepOrder,
    pub h_micro: Option<f64>,
}

impl ChainSpec {
    pub fn boundary(&self, tau: f64) -> Boundary {
        if self.boundary_wall {
            Boundary::WallTension(tau)
        } else {
            Boundary::Periodic
        }
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub kind: Kind,
    pub seed: u64,
    pub replicas: usize,
    pub threads: Option<usize>,
    pub potential: PotentialSpec,
    pub beta: f64,
    pub tau: f64,
    pub chain: Option<ChainSpec>,
    pub times: Vec<f64>,
    pub modes: Vec<Mode>,
    pub max_lag: usize,
    pub fit_window: (f64, f64),
    pub euler_n_max: usize,
    pub gap_k: Vec<usize>,
    pub gap_method: Option<GapMethod>,
    pub gap_w: Option<[f64; 3]>,
    pub gap_dt: f64,
    pub gap_chains: usize,
    pub gap_horizon: f64,
    pub galerkin_modes: usize,
    pub observable: Observable,
    pub n_list: Vec<usize>,
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub bg_horizon: f64,
    pub out: PathBuf,
}

struct Reader<'a> {
    table: &'a Table,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn lookup(&self, key: &str) -> Option<&'a Value> {
        let mut parts = key.split('.');
        let mut v = self.table.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn missing(&mut self, key: &str) {
        self.errors.push(format!("missing required key `{key}`"));
    }

    fn bad(&mut self, key: &str, want: &str) {
        self.errors.push(format!("`{key}` must be {want}"));
    }

    fn float(&mut self, key: &str, required: bool) -> Option<f64> {
        match self.lookup(key) {
            None => {
                if required {
                    self.missing(key);
                }
                None
            }
            Some(Value::Float(x)) if x.is_finite() => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.bad(key, "a finite number");
                None
            }
        }
    }

    fn int(&mut self, key: &str, required: bool) -> Option<u64> {
        match self.lookup(key) {
            None => {
                if required {
                    self.missing(key);
                }
                None
            }
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(_) => {
                self.bad(key, "a non-negative integer");
                None
            }
        }
    }

    fn string(&mut self, key: &str, required: bool) -> Option<String> {
        match self.lookup(key) {
            None => {
                if required {
                    self.missing(key);
                }
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.bad(key, "a string");
                None
            }
        }
    }

    fn array(&mut self, key: &str, required: bool) -> Option<&'a Vec<Value>> {
        match self.lookup(key) {
            None => {
                if required {
                    self.missing(key);
                }
                None
            }
            Some(Value::Array(a)) => Some(a),
            Some(_) => {
                self.bad(key, "an array");
                None
            }
        }
    }

    fn int_list(&mut self, key: &str, required: bool) -> Vec<usize> {
        let Some(a) = self.array(key, required) else { return Vec::new() };
        let out: Option<Vec<usize>> = a.iter().map(|v| v.as_integer().filter(|i| *i >= 0).map(|i| i as usize)).collect();
        out.unwrap_or_else(|| {
            self.bad(key, "an array of non-negative integers");
            Vec::new()
        })
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.errors.push(msg.into());
        }
    }
}

fn leaves(prefix: &str, t: &Table, out: &mut Vec<String>) {
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(sub) => leaves(&key, sub, out),
            _ => out.push(key),
        }
    }
}

fn parse_mode(s: &str) -> Option<Mode> {
    let (b, n) = s.rsplit_once(':')?;
    let branch: Branch = b.trim().parse().ok()?;
    Some(Mode::new(branch, n.trim().parse().ok()?))
}

pub fn load(path: &Path, kind: Kind, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    parse(&table, kind, seed, out)
}

pub fn parse(table: &Table, kind: Kind, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<Config> {
    let mut r = Reader { table, errors: Vec::new() };

    let schema: BTreeSet<&str> = SCHEMA.iter().copied().collect();
    let mut keys = Vec::new();
    leaves("", table, &mut keys);
    for k in &keys {
        if !schema.contains(k.as_str()) {
            r.errors.push(format!("unknown key `{k}`"));
        }
    }
    if let Some(e) = r.string("experiment", false) {
        r.check(e == kind.name(), format!("`experiment` is `{e}` but the subcommand is `{}`", kind.name()));
    }

    let needs_chain = matches!(kind, Kind::Simulate | Kind::Modes | Kind::BgResidual);
    let needs_thermo = kind != Kind::Gap;
    let needs_time = matches!(kind, Kind::Simulate | Kind::Modes | Kind::Euler);

    let seed = seed.or_else(|| r.int("seed", false)).unwrap_or(0);
    let replicas = r.int("replicas", matches!(kind, Kind::Modes | Kind::BgResidual)).unwrap_or(1) as usize;
    r.check(replicas >= 1, "`replicas` must be at least 1");
    let threads = r.int("threads", false).map(|t| t as usize);
    r.check(threads.map_or(true, |t| t >= 1), "`threads` must be at least 1");

    let kind_name = r.string("potential.kind", true);
    let a = r.float("potential.a", false);
    let potential = match kind_name.as_deref() {
        Some("harmonic") => {
            r.check(a.map_or(true, |a| a == 0.0), "`potential.a` must be absent or 0 for the harmonic potential");
            Some(PotentialSpec::harmonic())
        }
        Some("softened-quadratic") => match a {
            None => {
                r.missing("potential.a");
                None
            }
            Some(a) => match PotentialSpec::new(PotentialKind::SoftenedQuadratic, a) {
                Ok(p) => Some(p),
                Err(e) => {
                    r.errors.push(format!("`potential.a`: {e}"));
                    None
                }
            },
        },
        Some(other) => {
            r.errors.push(format!("`potential.kind` must be `harmonic` or `softened-quadratic`, got `{other}`"));
            None
        }
        None => None,
    };

    let beta = r.float("thermo.beta", needs_thermo).unwrap_or(1.0);
    r.check(beta > 0.0, "`thermo.beta` must be positive");
    let tau = r.float("thermo.tau", needs_thermo).unwrap_or(0.0);

    let chain = if needs_chain {
        let n = r.int("chain.n", kind != Kind::BgResidual).unwrap_or(2) as usize;
        r.check(n >= 2, "`chain.n` must be at least 2");
        let gamma = r.float("chain.gamma", false).unwrap_or(1.0);
        r.check(gamma >= 0.0, "`chain.gamma` must be >= 0");
        let boundary = r.string("chain.boundary", false).unwrap_or_else(|| "wall".into());
        r.check(boundary == "wall" || boundary == "periodic", format!("`chain.boundary` must be `wall` or `periodic`, got `{boundary}`"));
        r.check(
            boundary == "wall" || kind == Kind::Simulate,
            "`chain.boundary = \"periodic\"` is only available for `simulate`; mode and residual runs need the wall",
        );
        let integrator = match r.string("chain.integrator", false).as_deref() {
            None | Some("strang-circle") => NoiseScheme::StrangCircle,
            Some("direct-em") => NoiseScheme::DirectEm,
            Some(o) => {
                r.errors.push(format!("`chain.integrator` must be `strang-circle` or `direct-em`, got `{o}`"));
                NoiseScheme::StrangCircle
            }
        };
        let sweep = match r.string("chain.sweep", false).as_deref() {
            None | Some("even-first") => SweepOrder::EvenFirst,
            Some("odd-first") => SweepOrder::OddFirst,
            Some(o) => {
                r.errors.push(format!("`chain.sweep` must be `even-first` or `odd-first`, got `{o}`"));
                SweepOrder::EvenFirst
            }
        };
        let h_micro = r.float("chain.h_micro", false);
        r.check(h_micro.map_or(true, |h| h > 0.0), "`chain.h_micro` must be positive");
        Some(ChainSpec { n, gamma, boundary_wall: boundary == "wall", integrator, sweep, h_micro })
    } else {
        None
    };

    let mut times = Vec::new();
    if needs_time {
        let t_max = r.float("time.t_max", true);
        let dt = r.float("time.dt", true);
        if let (Some(t_max), Some(dt)) = (t_max, dt) {
            if !(dt > 0.0) || !(t_max >= 0.0) {
                r.errors.push("`time.dt` must be positive and `time.t_max` non-negative".into());
            } else {
                let steps = (t_max / dt + 1e-9).floor() as usize;
                r.check(steps <= 1_000_000, "the time grid has more than 10^6 points");
                if steps <= 1_000_000 {
                    times = (0..=steps).map(|j| j as f64 * dt).collect();
                }
            }
        }
    }

    let mut modes = Vec::new();
    if kind == Kind::Modes {
        if let Some(list) = r.array("modes.list", true) {
            for v in list {
                match v.as_str().and_then(parse_mode) {
                    Some(m) => modes.push(m),
                    None => r.errors.push(format!("`modes.list` entry {v} must look like \"sine:0\" (branches sine, cosine, entropy-sine, entropy-cosine)")),
                }
            }
            r.check(!list.is_empty(), "`modes.list` must not be empty");
        }
    }
    let max_lag = r.int("modes.max_lag", false).map_or(times.len().saturating_sub(1) * 2 / 3, |v| v as usize);
    if kind == Kind::Modes {
        r.check(max_lag >= 4 && max_lag < times.len().max(1), "`modes.max_lag` must be at least 4 and below the number of sample times");
    }
    let fit_lo = r.float("modes.fit_lo", false).unwrap_or(0.5);
    let fit_hi = r.float("modes.fit_hi", false).unwrap_or(2.0);
    r.check(fit_lo > 0.0 && fit_hi > fit_lo, "`modes.fit_lo` and `modes.fit_hi` must satisfy 0 < fit_lo < fit_hi");

    let euler_n_max = r.int("euler.n_max", false).unwrap_or(2) as usize;
    r.check(euler_n_max <= 1000, "`euler.n_max` must be at most 1000");

    let gap_k = r.int_list("gap.k", kind == Kind::Gap);
    if kind == Kind::Gap {
        r.check(!gap_k.is_empty() && gap_k.iter().all(|k| *k >= 2), "`gap.k` must be a non-empty list of integers >= 2");
    }
    let gap_method = match r.string("gap.method", false).as_deref() {
        None | Some("auto") => None,
        Some("galerkin") => Some(GapMethod::Galerkin),
        Some("vamp") => Some(GapMethod::Vamp),
        Some(o) => {
            r.errors.push(format!("`gap.method` must be `auto`, `galerkin` or `vamp`, got `{o}`"));
            None
        }
    };
    if gap_method == Some(GapMethod::Galerkin) {
        r.check(gap_k.iter().all(|k| *k == 2), "`gap.method = \"galerkin\"` needs every `gap.k` equal to 2");
    }
    let gap_w = match r.array("gap.w", kind == Kind::Gap) {
        Some(a) => {
            let v: Option<Vec<f64>> = a.iter().map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64))).collect();
            match v {
                Some(v) if v.len() == 3 => Some([v[0], v[1], v[2]]),
                _ => {
                    r.bad("gap.w", "an array of three numbers (p, r, e)");
                    None
                }
            }
        }
        None => None,
    };
    let gap_dt = r.float("gap.dt", false).unwrap_or(0.01);
    let gap_chains = r.int("gap.chains", false).unwrap_or(8) as usize;
    let gap_horizon = r.float("gap.horizon", false).unwrap_or(400.0);
    let galerkin_modes = r.int("gap.galerkin_modes", false).unwrap_or(24) as usize;
    if kind == Kind::Gap {
        r.check(gap_dt > 0.0, "`gap.dt` must be positive");
        r.check(gap_chains >= 2, "`gap.chains` must be at least 2");
        r.check(gap_horizon > 0.0, "`gap.horizon` must be positive");
        r.check(galerkin_modes >= 2, "`gap.galerkin_modes` must be at least 2");
    }

    let observable = match r.string("ensembles.observable", kind == Kind::Ensembles) {
        Some(s) => s.parse().unwrap_or_else(|e| {
            r.errors.push(format!("`ensembles.observable`: {e}"));
            Observable::Constant
        }),
        None => Observable::Constant,
    };
    let n_key = if kind == Kind::BgResidual { "bg.n_list" } else { "ensembles.n_list" };
    let n_list = r.int_list(n_key, matches!(kind, Kind::Ensembles | Kind::BgResidual));
    if matches!(kind, Kind::Ensembles | Kind::BgResidual) {
        r.check(!n_list.is_empty() && n_list.iter().all(|n| *n >= 2), format!("`{n_key}` must be a non-empty list of integers >= 2"));
    }
    let sweeps = r.int("ensembles.sweeps", false).unwrap_or(20_000) as usize;
    let burn_in = r.int("ensembles.burn_in", false).unwrap_or(500) as usize;
    let batches = r.int("ensembles.batches", false).unwrap_or(20) as usize;
    if kind == Kind::Ensembles {
        r.check(batches >= 2 && sweeps >= 2 * batches, "`ensembles.sweeps` must be at least twice `ensembles.batches`, which must be >= 2");
    }
    let bg_horizon = r.float("bg.horizon", kind == Kind::BgResidual).unwrap_or(0.5);
    r.check(bg_horizon > 0.0, "`bg.horizon` must be positive");

    let out = out.or_else(|| r.string("output.dir", false).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));

    if !r.errors.is_empty() {
        bail!("invalid config:\n  - {}", r.errors.join("\n  - "));
    }
    Ok(Config {
        kind,
        seed,
        replicas,
        threads,
        potential: potential.expect("validated"),
        beta,
        tau,
        chain,
        times,
        modes,
        max_lag,
        fit_window: (fit_lo, fit_hi),
        euler_n_max,
        gap_k,
        gap_method,
        gap_w,
        gap_dt,
        gap_chains,
        gap_horizon,
        galerkin_modes,
        observable,
        n_list,
        sweeps,
        burn_in,
        batches,
        bg_horizon,
        out,
    })
}
