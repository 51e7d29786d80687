//! Microcanonical expectations and their distance to canonical ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::circle::Site;
use super::mcmc::{MicroSampler, MicrostateK, PairChoice};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::rng::replica_rng;
use crate::stats::{batch_means, linear_fit, Estimate, LinearFit};
use crate::thermo::{tilted_expectation, CanonicalParams};

/// Single-site observables `G(x₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Momentum,
    Energy,
    MomentumSquared,
    MomentumFourth,
    /// `V'(r₁)`
    Slope,
    Constant,
}

impl Observable {
    pub fn eval(&self, spec: &PotentialSpec, x: Site) -> f64 {
        match self {
            Observable::Momentum => x.p,
            Observable::Energy => x.energy(spec),
            Observable::MomentumSquared => x.p * x.p,
            Observable::MomentumFourth => x.p.powi(4),
            Observable::Slope => spec.slope(x.r),
            Observable::Constant => 1.0,
        }
    }

    pub fn canonical_mean(&self, params: &CanonicalParams) -> Result<f64> {
        let b = params.beta;
        Ok(match self {
            Observable::Momentum => 0.0,
            Observable::Energy => params.mean_e,
            Observable::MomentumSquared => 1.0 / b,
            Observable::MomentumFourth => 3.0 / (b * b),
            Observable::Slope => tilted_expectation(&params.potential, params.multipliers(), |r| [params.potential.slope(r)])?[0],
            Observable::Constant => 1.0,
        })
    }

    /// `⟨G|w⟩_n` for the harmonic potential, where `Ω_{w,n}` is a round sphere.
    ///
    /// The centered configuration is uniform on a sphere of dimension `2n−3`
    /// and radius² `n·R₀`, `R₀ = 2e − p² − r²`; a single centered coordinate has
    /// `E u² = R₀/2` and `E u⁴ = 3R₀²(n−1)/(4n)`.
    pub fn harmonic_exact(&self, w: [f64; 3], n: usize) -> Result<f64> {
        let [p, r, e] = w;
        let r0 = 2.0 * e - p * p - r * r;
        if !(r0 > 0.0) || n < 2 {
            return Err(Error::Domain(format!("infeasible w = {w:?} for n = {n}")));
        }
        let nf = n as f64;
        let u2 = 0.5 * r0;
        let u4 = 3.0 * r0 * r0 * (nf - 1.0) / (4.0 * nf);
        Ok(match self {
            Observable::Momentum => p,
            Observable::Energy => e,
            Observable::MomentumSquared => p * p + u2,
            Observable::MomentumFourth => p.powi(4) + 6.0 * p * p * u2 + u4,
            Observable::Slope => r,
            Observable::Constant => 1.0,
        })
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "p1" => Observable::Momentum,
            "e1" => Observable::Energy,
            "p1^2" => Observable::MomentumSquared,
            "p1^4" => Observable::MomentumFourth,
            "dV(r1)" => Observable::Slope,
            "1" => Observable::Constant,
            _ => return Err(Error::InvalidParameter(format!("unknown observable `{s}` (p1, e1, p1^2, p1^4, dV(r1), 1)"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicroOptions {
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for MicroOptions {
    fn default() -> Self {
        MicroOptions { sweeps: 20_000, burn_in: 500, batches: 20, seed: 0 }
    }
}

/// `⟨G|w⟩_n` by heat-bath MCMC over uniformly chosen pairs.
///
/// Each sweep contributes the site average `(1/n)Σₖ G(xₖ)`, which has the same
/// expectation by exchangeability; the error is from batch means.
pub fn micro_expectation(spec: &PotentialSpec, g: Observable, w: [f64; 3], n: usize, opts: &MicroOptions) -> Result<Estimate> {
    let mut rng = replica_rng(opts.seed, n as u64);
    let mut s = MicroSampler::new(*spec, MicrostateK::initial(spec, w, n)?, PairChoice::Any);
    for _ in 0..opts.burn_in {
        s.sweep(&mut rng);
    }
    let series: Vec<f64> = (0..opts.sweeps)
        .map(|_| {
            s.sweep(&mut rng);
            s.state.sites.iter().map(|x| g.eval(spec, *x)).sum::<f64>() / n as f64
        })
        .collect();
    batch_means(&series, opts.batches)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapPoint {
    pub n: usize,
    pub micro: Estimate,
    pub canonical: f64,
    /// `|⟨G|u_λ⟩_n − E_λ[G]|`
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCurve {
    pub points: Vec<GapPoint>,
    /// Fit of `ln gap` on `ln n`; absent when some gap is not positive.
    pub fit: Option<LinearFit>,
    /// Some gap is not resolved above twice its standard error.
    pub inconclusive: bool,
    /// Sweeps per point that would bring every error below a quarter of its gap.
    pub required_sweeps: Option<f64>,
    pub exact: bool,
}

impl GapCurve {
    pub fn slope(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope.value)
    }
}

/// Gap curve at `u_λ = (0, r̄, ē)`; harmonic potentials use the exact sphere moments.
pub fn ensembles_gap_curve(params: &CanonicalParams, g: Observable, n_list: &[usize], opts: &MicroOptions) -> Result<GapCurve> {
    let spec = params.potential;
    let w = params.mean_vector();
    let canonical = g.canonical_mean(params)?;
    let exact = spec.is_harmonic();
    let points: Vec<GapPoint> = n_list
        .par_iter()
        .map(|&n| -> Result<GapPoint> {
            let micro = if exact {
                Estimate::new(g.harmonic_exact(w, n)?, 0.0)
            } else {
                micro_expectation(&spec, g, w, n, opts)?
            };
            Ok(GapPoint { n, micro, canonical, gap: (micro.value - canonical).abs() })
        })
        .collect::<Result<_>>()?;
    let inconclusive = points.iter().any(|p| !(p.gap > 2.0 * p.micro.stderr));
    let fit = if points.len() >= 3 && points.iter().all(|p| p.gap > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.gap.ln()).collect();
        linear_fit(&x, &y).ok()
    } else {
        None
    };
    let required_sweeps = if exact {
        None
    } else {
        let worst = points.iter().map(|p| (4.0 * p.micro.stderr / p.gap).powi(2)).fold(0.0, f64::max);
        Some(opts.sweeps as f64 * worst)
    };
    Ok(GapCurve { points, fit, inconclusive, required_sweeps, exact })
}
