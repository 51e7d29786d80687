//! Fluctuation fields, boundary-adapted Fourier modes and time correlations.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{sample_equilibrium, Boundary, ChainState, Dynamics};
use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::stats::{batch_means, fit_cosine, jackknife, mean_estimate, Estimate};
use crate::thermo::CanonicalParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `√2 sin(θₙx)` on the first rotated coordinate.
    Sine,
    /// `√2 cos(θₙx)` on the second rotated coordinate.
    Cosine,
    EntropySine,
    EntropyCosine,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::Sine, Branch::Cosine, Branch::EntropySine, Branch::EntropyCosine];

    pub fn name(&self) -> &'static str {
        match self {
            Branch::Sine => "sine",
            Branch::Cosine => "cosine",
            Branch::EntropySine => "entropy-sine",
            Branch::EntropyCosine => "entropy-cosine",
        }
    }

    pub fn is_entropy(&self) -> bool {
        matches!(self, Branch::EntropySine | Branch::EntropyCosine)
    }

    /// Index of the rotated coordinate this branch lives on.
    pub fn column(&self) -> usize {
        match self {
            Branch::Sine => 0,
            Branch::Cosine => 1,
            _ => 2,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mode branch `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub branch: Branch,
    pub n: usize,
}

impl Mode {
    pub fn new(branch: Branch, n: usize) -> Self {
        Mode { branch, n }
    }

    /// `θₙ = (2n+1)π/2` for the sound branches, `κₙ = 2nπ` for entropy.
    pub fn wavenumber(&self) -> f64 {
        if self.branch.is_entropy() {
            2.0 * PI * self.n as f64
        } else {
            (2 * self.n + 1) as f64 * PI / 2.0
        }
    }

    /// Scalar profile at `x`.
    pub fn profile(&self, x: f64) -> f64 {
        let k = self.wavenumber();
        match self.branch {
            Branch::Sine | Branch::EntropySine => SQRT_2 * (k * x).sin(),
            Branch::Cosine | Branch::EntropyCosine => SQRT_2 * (k * x).cos(),
        }
    }

    /// `∫₀¹ profile²`: 1 except entropy-sine n=0 (0) and entropy-cosine n=0 (2).
    pub fn profile_norm_sq(&self) -> f64 {
        match (self.branch, self.n) {
            (Branch::EntropySine, 0) => 0.0,
            (Branch::EntropyCosine, 0) => 2.0,
            _ => 1.0,
        }
    }

    /// Weight in the `H₋ₖ` norm; the `κ₀ = 0` term gets weight 1.
    pub fn hk_weight(&self, k: f64) -> f64 {
        let w = self.wavenumber();
        if w == 0.0 {
            1.0
        } else {
            w.powf(-2.0 * k)
        }
    }
}

/// Samples of the rotated test function `R·(profile e_j)` at `x = i/N`, `i = 1..N`.
pub fn mode_profile(params: &CanonicalParams, mode: Mode, n: usize) -> Vec<[f64; 3]> {
    let col = params.rotation.column(mode.branch.column());
    (1..=n)
        .map(|i| {
            let s = mode.profile(i as f64 / n as f64);
            [col[0] * s, col[1] * s, col[2] * s]
        })
        .collect()
}

/// `Y_N(H) = N^{-1/2} Σᵢ H(i/N)·(wᵢ − w̄)` with `H` sampled on `x = i/N`.
pub fn field(state: &ChainState, params: &CanonicalParams, h: &[[f64; 3]]) -> Result<f64> {
    let n = state.len();
    if h.len() != n {
        return Err(Error::GridMismatch { expected: n, got: h.len() });
    }
    let spec = &params.potential;
    let (rbar, ebar) = (params.mean_r, params.mean_e);
    let mut acc = 0.0;
    for i in 0..n {
        let e = state.energy(spec, i);
        acc += h[i][0] * state.p[i] + h[i][1] * (state.r[i] - rbar) + h[i][2] * (e - ebar);
    }
    Ok(acc / (n as f64).sqrt())
}

/// `⟨H, ΣG⟩` as the Riemann sum on `x = i/N`.
pub fn static_covariance(params: &CanonicalParams, h: &[[f64; 3]], g: &[[f64; 3]]) -> Result<f64> {
    if h.len() != g.len() {
        return Err(Error::GridMismatch { expected: h.len(), got: g.len() });
    }
    let s = &params.sigma;
    let mut acc = 0.0;
    for (a, b) in h.iter().zip(g) {
        for j in 0..3 {
            for k in 0..3 {
                acc += a[j] * s[(j, k)] * b[k];
            }
        }
    }
    Ok(acc / h.len() as f64)
}

/// Precomputed mode profiles for repeated projection of states of one size.
#[derive(Clone, Debug)]
pub struct FieldProjector {
    modes: Vec<Mode>,
    profiles: Vec<Vec<[f64; 3]>>,
    n: usize,
}

impl FieldProjector {
    pub fn new(params: &CanonicalParams, modes: &[Mode], n: usize) -> Self {
        FieldProjector { modes: modes.to_vec(), profiles: modes.iter().map(|m| mode_profile(params, *m, n)).collect(), n }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn project(&self, state: &ChainState, params: &CanonicalParams) -> Result<Vec<f64>> {
        if state.len() != self.n {
            return Err(Error::GridMismatch { expected: self.n, got: state.len() });
        }
        self.profiles.iter().map(|h| field(state, params, h)).collect()
    }
}

/// Truncated `Σ w(mode)^{-2k} Y²` over the supplied modes.
pub fn hk_norm(values: &[(Mode, f64)], k: f64) -> f64 {
    values.iter().map(|(m, y)| m.hk_weight(k) * y * y).sum::<f64>().sqrt()
}

/// Bound on the expected squared `H₋ₖ` tail beyond `n_max`, for `k > 1/2`.
///
/// Each mode variance is at most `max Q·‖profile‖²`; the wavenumber sums are
/// bounded by their integrals.
pub fn hk_tail_bound(params: &CanonicalParams, n_max: usize, k: f64) -> Result<f64> {
    if k <= 0.5 {
        return Err(Error::InvalidParameter(format!("H_-k tail is summable only for k > 1/2, got {k}")));
    }
    let q = params.mode_covariance.diagonal().amax();
    let m = n_max as f64 + 1.0;
    let sound = (PI / 2.0).powf(-2.0 * k) * (2.0 * m).powf(1.0 - 2.0 * k) / (2.0 * (2.0 * k - 1.0));
    let entropy = (2.0 * PI).powf(-2.0 * k) * (m - 1.0).max(0.5).powf(1.0 - 2.0 * k) / (2.0 * k - 1.0);
    Ok(q * 2.0 * (sound + entropy))
}

/// Replica ensemble of one mode's field values on a common time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSeries {
    pub mode: Mode,
    pub times: Vec<f64>,
    /// `values[replica][time]`.
    pub values: Vec<Vec<f64>>,
}

impl ModeSeries {
    pub fn new(mode: Mode, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("mode series times must be strictly increasing".into()));
        }
        if let Some(bad) = values.iter().find(|row| row.len() != times.len()) {
            return Err(Error::GridMismatch { expected: times.len(), got: bad.len() });
        }
        Ok(ModeSeries { mode, times, values })
    }

    pub fn replicas(&self) -> usize {
        self.values.len()
    }

    fn uniform_step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Ok(0.0);
        }
        let dt = self.times[1] - self.times[0];
        if self.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
            return Err(Error::InvalidParameter("correlations need a uniform time grid".into()));
        }
        Ok(dt)
    }
}

/// Correlation function estimate at lags `k·Δt`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correlation {
    pub lags: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Replicas below which the estimator switches to batch means.
pub const MIN_REPLICAS: usize = 30;
const BATCHES: usize = 10;

/// `E[a(s+t) b(s)]` averaged over time origins `s`.
///
/// With at least [`MIN_REPLICAS`] replicas the error comes from the spread of
/// per-replica averages; otherwise from batch means of the pooled products.
pub fn cross_correlation(a: &ModeSeries, b: &ModeSeries, max_lag: usize) -> Result<Correlation> {
    if a.times != b.times || a.replicas() != b.replicas() {
        return Err(Error::GridMismatch { expected: a.times.len(), got: b.times.len() });
    }
    let dt = a.uniform_step()?;
    let nt = a.times.len();
    if max_lag >= nt {
        return Err(Error::InsufficientData(format!("lag {max_lag} needs more than {nt} time points")));
    }
    let reps = a.replicas();
    let mut out = Correlation { lags: Vec::new(), value: Vec::new(), stderr: Vec::new() };
    for lag in 0..=max_lag {
        let origins = nt - lag;
        let est = if reps >= MIN_REPLICAS {
            let per: Vec<f64> = (0..reps)
                .map(|k| (0..origins).map(|s| a.values[k][s + lag] * b.values[k][s]).sum::<f64>() / origins as f64)
                .collect();
            mean_estimate(&per)
        } else {
            let pooled: Vec<f64> =
                (0..reps).flat_map(|k| (0..origins).map(move |s| a.values[k][s + lag] * b.values[k][s])).collect();
            if reps == 0 || pooled.len() < 2 * BATCHES {
                return Err(Error::InsufficientData(format!(
                    "{reps} replicas and {origins} origins at lag {lag}; need >= {MIN_REPLICAS} replicas or a long trajectory"
                )));
            }
            batch_means(&pooled, BATCHES)?
        };
        out.lags.push(lag as f64 * dt);
        out.value.push(est.value);
        out.stderr.push(est.stderr);
    }
    Ok(out)
}

pub fn autocorrelation(series: &ModeSeries, max_lag: usize) -> Result<Correlation> {
    cross_correlation(series, series, max_lag)
}

/// Frequency and amplitude of `C(t) ≈ A cos(ωt)`, with jackknife errors over replica blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillationFit {
    pub omega: Estimate,
    pub amplitude: Estimate,
}

pub fn fit_oscillation(series: &ModeSeries, max_lag: usize, omega_lo: f64, omega_hi: f64) -> Result<OscillationFit> {
    let reps = series.replicas();
    if reps < 2 {
        return Err(Error::InsufficientData("oscillation fit needs >= 2 replicas".into()));
    }
    series.uniform_step()?;
    let nt = series.times.len();
    if max_lag >= nt {
        return Err(Error::InsufficientData(format!("lag {max_lag} needs more than {nt} time points")));
    }
    // Per-replica correlation rows; blocks are left out for the jackknife.
    let rows: Vec<Vec<f64>> = series
        .values
        .iter()
        .map(|v| (0..=max_lag).map(|lag| (0..nt - lag).map(|s| v[s + lag] * v[s]).sum::<f64>() / (nt - lag) as f64).collect())
        .collect();
    let blocks = reps.min(20);
    let lags: Vec<f64> = (0..=max_lag).map(|k| series.times[k] - series.times[0]).collect();
    let fit = |skip: Option<usize>| -> Result<(f64, f64)> {
        let mut c = vec![0.0; max_lag + 1];
        let mut used = 0usize;
        for (k, row) in rows.iter().enumerate() {
            if Some(k * blocks / reps) == skip {
                continue;
            }
            used += 1;
            for (ci, ri) in c.iter_mut().zip(row) {
                *ci += ri;
            }
        }
        c.iter_mut().for_each(|v| *v /= used as f64);
        let f = fit_cosine(&lags, &c, omega_lo, omega_hi)?;
        Ok((f.omega, f.amplitude))
    };
    let full = fit(None)?;
    let mut leave = Vec::with_capacity(blocks);
    for b in 0..blocks {
        leave.push(fit(Some(b))?);
    }
    let omega = jackknife(blocks, |s| s.map_or(full.0, |b| leave[b].0));
    let amplitude = jackknife(blocks, |s| s.map_or(full.1, |b| leave[b].1));
    Ok(OscillationFit { omega, amplitude })
}

/// Equilibrium-started replicas of a wall chain, projected on `modes` at `times`.
///
/// Replica `k` uses stream `k` of `seed`; output order is by replica index.
pub fn run_mode_ensemble(
    dynamics: &Dynamics,
    params: &CanonicalParams,
    modes: &[Mode],
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<ModeSeries>> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidParameter("sampling times must be non-negative and strictly increasing".into()));
    }
    let n = dynamics.len();
    let projector = FieldProjector::new(params, modes, n);
    let rows: Vec<Vec<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|k| -> Result<Vec<Vec<f64>>> {
            let mut rng = replica_rng(seed, k as u64);
            let mut s = sample_equilibrium(&params.potential, params.multipliers(), n, dynamics.boundary(), &mut rng)?;
            let mut out = vec![Vec::with_capacity(times.len()); modes.len()];
            for &t in times {
                let dt = t - s.t_macro;
                if dt > 0.0 {
                    dynamics.advance(&mut s, dt, &mut rng)?;
                }
                for (row, v) in out.iter_mut().zip(projector.project(&s, params)?) {
                    row.push(v);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    modes
        .iter()
        .enumerate()
        .map(|(j, m)| ModeSeries::new(*m, times.to_vec(), rows.iter().map(|r| r[j].clone()).collect()))
        .collect()
}

/// `∂ₓH` for `H(t, x) = (sin πx, 0, sin πx)`.
pub fn default_bg_gradient(_t: f64, x: f64) -> [f64; 3] {
    let d = PI * (PI * x).cos();
    [d, 0.0, d]
}

/// Centered nonlinear currents `Φᵢ`, `i = 1..N−1`, written into `out`.
fn bg_currents(s: &ChainState, params: &CanonicalParams, out: &mut [[f64; 3]]) {
    let spec = &params.potential;
    let tau = params.tau;
    for i in 0..s.len() - 1 {
        let f = spec.slope(s.r[i + 1]) - tau;
        let e = s.energy(spec, i);
        out[i] = [f - params.tau_r * (s.r[i] - params.mean_r) - params.tau_e * (e - params.mean_e), 0.0, s.p[i] * f];
    }
}

/// `E[sup_{t≤T} |N^{-1/2} ∫₀ᵗ Σᵢ ∂ₓH(s, i/N)·Φᵢ ds|²]` over equilibrium replicas.
///
/// The integrand is sampled after every micro step and integrated by the
/// trapezoid rule.
pub fn bg_residual_variance<F>(
    dynamics: &Dynamics,
    params: &CanonicalParams,
    grad_h: F,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(f64, f64) -> [f64; 3] + Sync,
{
    let Boundary::WallTension(tau) = dynamics.boundary() else {
        return Err(Error::InvalidParameter("the Boltzmann-Gibbs residual needs a wall-tension chain".into()));
    };
    if (tau - params.tau).abs() > 1e-14 * (1.0 + tau.abs()) {
        return Err(Error::InvalidParameter(format!("wall tension {tau} differs from the multiplier {}", params.tau)));
    }
    if replicas < 2 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter("need >= 2 replicas and a positive horizon".into()));
    }
    let n = dynamics.len();
    let h = dynamics.h_micro();
    let steps = (horizon / h - 1e-9).ceil() as usize;
    let h = horizon / steps as f64;
    let scale = 1.0 / (n as f64).sqrt();
    let sups: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = replica_rng(seed, k as u64);
            let mut s = sample_equilibrium(&params.potential, params.multipliers(), n, dynamics.boundary(), &mut rng)?;
            let mut phi = vec![[0.0; 3]; n - 1];
            let integrand = |s: &ChainState, phi: &mut [[f64; 3]], t: f64| {
                bg_currents(s, params, phi);
                let mut acc = 0.0;
                for (i, f) in phi.iter().enumerate() {
                    let g = grad_h(t, (i + 1) as f64 / n as f64);
                    acc += g[0] * f[0] + g[1] * f[1] + g[2] * f[2];
                }
                acc * scale
            };
            let mut prev = integrand(&s, &mut phi, 0.0);
            let (mut integral, mut sup) = (0.0f64, 0.0f64);
            for j in 1..=steps {
                dynamics.step(&mut s, h, &mut rng)?;
                let t = j as f64 * h;
                s.t_macro = t;
                let cur = integrand(&s, &mut phi, t);
                integral += 0.5 * h * (prev + cur);
                sup = sup.max(integral * integral);
                prev = cur;
            }
            Ok(sup)
        })
        .collect::<Result<_>>()?;
    Ok(mean_estimate(&sups))
}
