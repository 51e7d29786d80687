use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Boundary, ChainState};
use crate::error::{Error, Result};
use crate::micro::circle::{diffuse_bond, Site};
use crate::potential::PotentialSpec;
use crate::rng::normal;

/// States with `|p|` or `|r|` above this are declared unstable.
const BLOWUP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScheme {
    /// Exact bond rotation on the two-point circle.
    #[default]
    StrangCircle,
    /// Simultaneous Euler–Maruyama on the momentum and stretch currents.
    DirectEm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    #[default]
    EvenFirst,
    OddFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Noise strength `γ ≥ 0`.
    pub gamma: f64,
    /// Macroscopic step; `None` selects `0.2/(N√δ₊·max(1, γ))`.
    pub h_micro: Option<f64>,
    pub integrator: NoiseScheme,
    pub sweep: SweepOrder,
    pub drift: bool,
    pub noise: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { gamma: 1.0, h_micro: None, integrator: NoiseScheme::StrangCircle, sweep: SweepOrder::EvenFirst, drift: true, noise: true }
    }
}

/// The stepping machinery for one chain length and boundary.
#[derive(Clone, Debug)]
pub struct Dynamics {
    potential: PotentialSpec,
    n: usize,
    boundary: Boundary,
    gamma: f64,
    h: f64,
    scheme: NoiseScheme,
    drift: bool,
    noise: bool,
    colors: Vec<Vec<usize>>,
}

impl Dynamics {
    pub fn default_h_micro(potential: &PotentialSpec, n: usize, gamma: f64) -> f64 {
        0.2 / (n as f64 * potential.curvature_bounds().upper.sqrt() * gamma.max(1.0))
    }

    /// `0.5/(N·max(√δ₊, γδ₊))`; Verlet on the chain is unstable beyond `1/(N√δ₊)`.
    pub fn stability_bound(potential: &PotentialSpec, n: usize, gamma: f64) -> f64 {
        let up = potential.curvature_bounds().upper;
        0.5 / (n as f64 * up.sqrt().max(gamma * up))
    }

    pub fn new(potential: PotentialSpec, config: SimConfig, n: usize, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("chain needs N >= 2, got {n}")));
        }
        if !(config.gamma >= 0.0 && config.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be finite and >= 0, got {}", config.gamma)));
        }
        let h = config.h_micro.unwrap_or_else(|| Self::default_h_micro(&potential, n, config.gamma));
        let bound = Self::stability_bound(&potential, n, config.gamma);
        if !(h > 0.0) || h > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("h_micro = {h} must lie in (0, {bound}]")));
        }
        let periodic = boundary.is_periodic();
        let bonds = if periodic { n } else { n - 1 };
        let even: Vec<usize> = (0..bonds).filter(|b| b % 2 == 0 && !(periodic && n % 2 == 1 && *b == n - 1)).collect();
        let odd: Vec<usize> = (0..bonds).filter(|b| b % 2 == 1).collect();
        let mut colors = match config.sweep {
            SweepOrder::EvenFirst => vec![even, odd],
            SweepOrder::OddFirst => vec![odd, even],
        };
        if periodic && n % 2 == 1 {
            colors.push(vec![n - 1]);
        }
        Ok(Dynamics { potential, n, boundary, gamma: config.gamma, h, scheme: config.integrator, drift: config.drift, noise: config.noise, colors })
    }

    pub fn h_micro(&self) -> f64 {
        self.h
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn check(&self, s: &ChainState) -> Result<()> {
        if s.len() != self.n {
            return Err(Error::GridMismatch { expected: self.n, got: s.len() });
        }
        if s.boundary != self.boundary {
            return Err(Error::InvalidParameter("state boundary differs from the dynamics boundary".into()));
        }
        Ok(())
    }

    fn kick(&self, s: &mut ChainState, dt: f64) {
        let scale = self.n as f64 * dt;
        let v = &self.potential;
        let first = v.slope(s.r[0]);
        let mut prev = first;
        for i in 0..self.n - 1 {
            let next = v.slope(s.r[i + 1]);
            s.p[i] += scale * (next - prev);
            prev = next;
        }
        let end = match self.boundary {
            Boundary::WallTension(tau) => tau,
            Boundary::Periodic => first,
        };
        s.p[self.n - 1] += scale * (end - prev);
    }

    fn stream(&self, s: &mut ChainState, dt: f64) {
        let scale = self.n as f64 * dt;
        let left = match self.boundary {
            Boundary::WallTension(_) => 0.0,
            Boundary::Periodic => s.p[self.n - 1],
        };
        for i in (1..self.n).rev() {
            s.r[i] += scale * (s.p[i] - s.p[i - 1]);
        }
        s.r[0] += scale * (s.p[0] - left);
    }

    /// One velocity-Verlet step of the drift `N·A_N` over macroscopic time `h`.
    pub fn hamiltonian_substep(&self, s: &mut ChainState, h: f64) {
        self.kick(s, 0.5 * h);
        self.stream(s, h);
        self.kick(s, 0.5 * h);
    }

    fn bond(&self, b: usize) -> (usize, usize) {
        (b, if b + 1 == self.n { 0 } else { b + 1 })
    }

    /// Noise `γN·S_N` over macroscopic time `h`.
    pub fn noise_substep<R: Rng + ?Sized>(&self, s: &mut ChainState, h: f64, rng: &mut R) {
        let kdt = self.gamma * self.n as f64 * h;
        if kdt == 0.0 {
            return;
        }
        match self.scheme {
            NoiseScheme::StrangCircle => {
                for color in &self.colors {
                    for &b in color {
                        let (i, j) = self.bond(b);
                        let mut x1 = Site::new(s.p[i], s.r[i]);
                        let mut x2 = Site::new(s.p[j], s.r[j]);
                        if diffuse_bond(&self.potential, &mut x1, &mut x2, kdt, rng) {
                            s.p[i] = x1.p;
                            s.r[i] = x1.r;
                            s.p[j] = x2.p;
                            s.r[j] = x2.r;
                        }
                    }
                }
            }
            NoiseScheme::DirectEm => {
                let v = &self.potential;
                let root = kdt.sqrt();
                let bonds = if self.boundary.is_periodic() { self.n } else { self.n - 1 };
                let mut jumps = Vec::with_capacity(bonds);
                for b in 0..bonds {
                    let (i, j) = self.bond(b);
                    let dp = s.p[j] - s.p[i];
                    let dv = v.slope_difference(s.r[j], s.r[i]);
                    let curv = v.curvature(s.r[j]) + v.curvature(s.r[i]);
                    let xi = normal(rng);
                    let jp = 0.5 * kdt * curv * dp + root * dv * xi;
                    let jr = kdt * dv - root * dp * xi;
                    jumps.push((jp, jr));
                }
                for (b, (jp, jr)) in jumps.into_iter().enumerate() {
                    let (i, j) = self.bond(b);
                    s.p[i] += jp;
                    s.p[j] -= jp;
                    s.r[i] += jr;
                    s.r[j] -= jr;
                }
            }
        }
    }

    /// One Strang step (half drift, noise, half drift) of macroscopic length `h`.
    pub fn step<R: Rng + ?Sized>(&self, s: &mut ChainState, h: f64, rng: &mut R) -> Result<()> {
        let t0 = s.t_macro;
        if self.drift {
            self.hamiltonian_substep(s, 0.5 * h);
        }
        if self.noise {
            self.noise_substep(s, h, rng);
        }
        if self.drift {
            self.hamiltonian_substep(s, 0.5 * h);
        }
        if !s.is_finite_within(BLOWUP) {
            return Err(Error::Unstable { last_valid_time: t0 });
        }
        s.t_macro = t0 + h;
        Ok(())
    }

    /// Advances by `dt_macro` in `⌈dt_macro/h_micro⌉` equal Strang steps.
    pub fn advance<R: Rng + ?Sized>(&self, s: &mut ChainState, dt_macro: f64, rng: &mut R) -> Result<()> {
        self.check(s)?;
        if !(dt_macro >= 0.0) {
            return Err(Error::InvalidParameter(format!("dt_macro must be >= 0, got {dt_macro}")));
        }
        let steps = (dt_macro / self.h - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return Ok(());
        }
        let h = dt_macro / steps as f64;
        let t0 = s.t_macro;
        for _ in 0..steps {
            self.step(s, h, rng)?;
        }
        s.t_macro = t0 + dt_macro;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use nalgebra::{Matrix4, Vector4};

    fn harmonic_wall(n: usize, gamma: f64) -> Dynamics {
        let cfg = SimConfig { gamma, ..SimConfig::default() };
        Dynamics::new(PotentialSpec::harmonic(), cfg, n, Boundary::WallTension(0.3)).unwrap()
    }

    #[test]
    fn verlet_is_reversible() {
        let spec = PotentialSpec::softened_quadratic(0.2).unwrap();
        let dyn_ = Dynamics::new(spec, SimConfig::default(), 8, Boundary::WallTension(0.4)).unwrap();
        let p: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let r: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos()).collect();
        let s0 = ChainState::new(p, r, Boundary::WallTension(0.4));
        let mut s = s0.clone();
        dyn_.hamiltonian_substep(&mut s, 0.003);
        dyn_.hamiltonian_substep(&mut s, -0.003);
        for i in 0..8 {
            assert!((s.p[i] - s0.p[i]).abs() < 1e-12 && (s.r[i] - s0.r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_site_wall_matches_matrix_exponential() {
        // x = (p1, p2, r1, r2): p1' = 2(r2 − r1), p2' = 2(τ − r2), r1' = 2p1, r2' = 2(p2 − p1).
        let tau = 0.3;
        let cfg = SimConfig { gamma: 0.0, h_micro: Some(5e-4), ..SimConfig::default() };
        let dyn_ = Dynamics::new(PotentialSpec::harmonic(), cfg, 2, Boundary::WallTension(tau)).unwrap();
        let mut s = ChainState::new(vec![0.5, -0.2], vec![0.1, 0.7], Boundary::WallTension(tau));
        let mut rng = replica_rng(0, 0);
        dyn_.advance(&mut s, 0.1, &mut rng).unwrap();
        let a = Matrix4::new(
            0.0, 0.0, -2.0, 2.0,
            0.0, 0.0, 0.0, -2.0,
            2.0, 0.0, 0.0, 0.0,
            -2.0, 2.0, 0.0, 0.0,
        );
        // Affine part: steady state has p = 0, r = τ.
        let eq = Vector4::new(0.0, 0.0, tau, tau);
        let x0 = Vector4::new(0.5, -0.2, 0.1, 0.7);
        let x = (a * 0.1).exp() * (x0 - eq) + eq;
        let got = Vector4::new(s.p[0], s.p[1], s.r[0], s.r[1]);
        assert!((got - x).amax() < 1e-6, "{got} vs {x}");
    }

    #[test]
    fn strang_noise_conserves_bond_sums() {
        let spec = PotentialSpec::softened_quadratic(0.2).unwrap();
        let cfg = SimConfig { drift: false, ..SimConfig::default() };
        let dyn_ = Dynamics::new(spec, cfg, 7, Boundary::Periodic).unwrap();
        let mut rng = replica_rng(3, 0);
        let mut s = ChainState::new((0..7).map(|i| i as f64 * 0.3 - 1.0).collect(), (0..7).map(|i| (i as f64).sin()).collect(), Boundary::Periodic);
        let t0 = s.conserved_totals(&spec);
        for _ in 0..1000 {
            dyn_.step(&mut s, dyn_.h_micro(), &mut rng).unwrap();
        }
        let t1 = s.conserved_totals(&spec);
        for k in 0..3 {
            assert!((t1[k] - t0[k]).abs() < 1e-11, "{k}: {} vs {}", t0[k], t1[k]);
        }
    }

    #[test]
    fn direct_em_conserves_momentum_and_stretch() {
        let spec = PotentialSpec::softened_quadratic(0.2).unwrap();
        let cfg = SimConfig { integrator: NoiseScheme::DirectEm, ..SimConfig::default() };
        let dyn_ = Dynamics::new(spec, cfg, 6, Boundary::Periodic).unwrap();
        let mut rng = replica_rng(4, 0);
        let mut s = ChainState::new(vec![0.1, -0.3, 0.5, 0.0, 0.2, -0.1], vec![0.3, 0.1, -0.4, 0.8, 0.0, 0.2], Boundary::Periodic);
        let t0 = s.conserved_totals(&spec);
        dyn_.advance(&mut s, 1.0, &mut rng).unwrap();
        let t1 = s.conserved_totals(&spec);
        assert!((t1[0] - t0[0]).abs() < 1e-12 && (t1[1] - t0[1]).abs() < 1e-12);
    }

    #[test]
    fn rejects_unstable_step() {
        let cfg = SimConfig { h_micro: Some(1.0), ..SimConfig::default() };
        assert!(Dynamics::new(PotentialSpec::harmonic(), cfg, 16, Boundary::Periodic).is_err());
    }

    #[test]
    fn instability_reports_last_valid_time() {
        let dyn_ = harmonic_wall(4, 1.0);
        let mut s = ChainState::new(vec![2e6, 0.0, 0.0, 0.0], vec![0.0; 4], Boundary::WallTension(0.3));
        s.t_macro = 1.5;
        let err = dyn_.advance(&mut s, 0.1, &mut replica_rng(0, 0)).unwrap_err();
        assert_eq!(err, Error::Unstable { last_valid_time: 1.5 });
    }

    #[test]
    fn replay_is_bit_identical() {
        let spec = PotentialSpec::softened_quadratic(0.2).unwrap();
        let dyn_ = Dynamics::new(spec, SimConfig::default(), 16, Boundary::WallTension(0.3)).unwrap();
        let run = || {
            let mut rng = replica_rng(99, 2);
            let mut s = ChainState::new(vec![0.1; 16], (0..16).map(|i| (i as f64).cos()).collect(), Boundary::WallTension(0.3));
            dyn_.advance(&mut s, 0.5, &mut rng).unwrap();
            s
        };
        assert_eq!(run(), run());
    }
}
