//! Heat-bath sampling of the microcanonical law on `Ω_{w,K}`.

use rand::Rng;

use super::circle::{from_circle, resample_bond, Site, TwoPointCoords};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// `K` sites whose means are `w = (p, r, e)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MicrostateK {
    pub sites: Vec<Site>,
    pub w: [f64; 3],
}

impl MicrostateK {
    pub fn from_sites(spec: &PotentialSpec, sites: Vec<Site>) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::InvalidParameter(format!("a microstate needs K >= 2, got {}", sites.len())));
        }
        let w = super::kac::mean_vector(spec, &sites);
        Ok(MicrostateK { sites, w })
    }

    /// A point of `Ω_{w,K}`: all sites at `(p, r)` except one bond carrying the excess energy.
    pub fn initial(spec: &PotentialSpec, w: [f64; 3], k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("a microstate needs K >= 2, got {k}")));
        }
        let excess = w[2] - 0.5 * w[0] * w[0] - spec.value(w[1]);
        if !(excess > 0.0) || !w.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("infeasible w = {w:?}: need e > p^2/2 + V(r)")));
        }
        let mut sites = vec![Site::new(w[0], w[1]); k];
        let c = TwoPointCoords { p: w[0], r: w[1], energy: 0.5 * k as f64 * excess, theta: std::f64::consts::FRAC_PI_4 };
        let (a, b) = from_circle(spec, c)?;
        sites[0] = a;
        sites[1] = b;
        Ok(MicrostateK { sites, w })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Largest deviation of the current means from `w`.
    pub fn constraint_defect(&self, spec: &PotentialSpec) -> f64 {
        let m = super::kac::mean_vector(spec, &self.sites);
        (0..3).map(|j| (m[j] - self.w[j]).abs()).fold(0.0, f64::max)
    }
}

/// Which pairs the random scan visits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairChoice {
    /// Bonds `(k, k+1)`.
    #[default]
    Adjacent,
    /// Any unordered pair; same invariant law, faster mixing of global modes.
    Any,
}

/// Random-scan heat bath: each update resamples one pair's angle from `∝ 𝔍(θ)dθ`.
#[derive(Clone, Debug)]
pub struct MicroSampler {
    spec: PotentialSpec,
    pub state: MicrostateK,
    pairs: PairChoice,
}

impl MicroSampler {
    pub fn new(spec: PotentialSpec, state: MicrostateK, pairs: PairChoice) -> Self {
        MicroSampler { spec, state, pairs }
    }

    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = self.state.len();
        let (i, j) = match self.pairs {
            PairChoice::Adjacent => {
                let i = rng.random_range(0..k - 1);
                (i, i + 1)
            }
            PairChoice::Any => {
                let i = rng.random_range(0..k);
                let j = (i + 1 + rng.random_range(0..k - 1)) % k;
                (i, j)
            }
        };
        let (lo, hi) = (i.min(j), i.max(j));
        let (left, right) = self.state.sites.split_at_mut(hi);
        resample_bond(&self.spec, &mut left[lo], &mut right[0], rng);
    }

    /// `K` updates.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for _ in 0..self.state.len() {
            self.update(rng);
        }
    }
}

/// Snapshots after each of `sweeps` sweeps of adjacent-bond updates, started from
/// [`MicrostateK::initial`] after `sweeps/10` burn-in sweeps.
pub fn mcmc_microcanonical<R: Rng + ?Sized>(
    spec: &PotentialSpec,
    w: [f64; 3],
    k: usize,
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<MicrostateK>> {
    let mut s = MicroSampler::new(*spec, MicrostateK::initial(spec, w, k)?, PairChoice::Adjacent);
    for _ in 0..sweeps / 10 {
        s.sweep(rng);
    }
    Ok((0..sweeps)
        .map(|_| {
            s.sweep(rng);
            s.state.clone()
        })
        .collect())
}
