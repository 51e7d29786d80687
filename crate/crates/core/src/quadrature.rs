//! Globally adaptive Gauss–Kronrod (G7/K15) quadrature for vector integrands.
//!
//! Several moments of the same density are integrated together so that every
//! component sees the same nodes; the error estimate of a panel is the largest
//! component error scaled by that component's tolerance.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule: component `j` is accepted when its error is at most
/// `max(abs, rel·∫|f_j|)`, so integrands that cancel are judged against their mass.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-14, rel: 1e-13, max_panels: 2000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<const M: usize> {
    pub value: [f64; M],
    pub error: [f64; M],
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Panel<const M: usize> {
    lo: f64,
    hi: f64,
    value: [f64; M],
    error: [f64; M],
    mass: [f64; M],
    score: f64,
}

impl<const M: usize> PartialEq for Panel<M> {
    fn eq(&self, other: &Self) -> bool {
        self.score == other.score
    }
}
impl<const M: usize> Eq for Panel<M> {}
impl<const M: usize> PartialOrd for Panel<M> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const M: usize> Ord for Panel<M> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.score.total_cmp(&other.score)
    }
}

type Estimate<const M: usize> = ([f64; M], [f64; M], [f64; M]);

fn kronrod<const M: usize, F: Fn(f64) -> [f64; M]>(f: &F, lo: f64, hi: f64) -> Estimate<M> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut k = [0.0; M];
    let mut g = [0.0; M];
    let mut mass = [0.0; M];
    let fc = f(c);
    for j in 0..M {
        k[j] = WGK[7] * fc[j];
        g[j] = WG[3] * fc[j];
        mass[j] = WGK[7] * fc[j].abs();
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..M {
            let s = f1[j] + f2[j];
            k[j] += WGK[i] * s;
            mass[j] += WGK[i] * (f1[j].abs() + f2[j].abs());
            if i % 2 == 1 {
                g[j] += WG[i / 2] * s;
            }
        }
    }
    let mut value = [0.0; M];
    let mut error = [0.0; M];
    for j in 0..M {
        value[j] = k[j] * h;
        mass[j] *= h.abs();
        error[j] = ((k[j] - g[j]) * h).abs().max(10.0 * f64::EPSILON * mass[j]);
    }
    (value, error, mass)
}

fn score<const M: usize>(error: &[f64; M], scale: &[f64; M]) -> f64 {
    error.iter().zip(scale).map(|(e, s)| e / s).fold(0.0, f64::max)
}

/// Integrates `f` over `[lo, hi]`.
pub fn integrate<const M: usize, F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<QuadResult<M>>
where
    F: Fn(f64) -> [f64; M],
{
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::InvalidParameter(format!("quadrature interval [{lo}, {hi}]")));
    }
    let initial = 8;
    let mut heap = BinaryHeap::new();
    let mut total = [0.0; M];
    let mut total_err = [0.0; M];
    let mut total_mass = [0.0; M];
    let step = (hi - lo) / initial as f64;
    let mut panels = Vec::with_capacity(initial);
    for i in 0..initial {
        let a = lo + step * i as f64;
        let b = if i + 1 == initial { hi } else { a + step };
        let (v, e, w) = kronrod(&f, a, b);
        for j in 0..M {
            total[j] += v[j];
            total_err[j] += e[j];
            total_mass[j] += w[j];
        }
        panels.push((a, b, v, e, w));
    }
    let mut evaluations = 15 * initial;
    let scale_of = |mass: &[f64; M]| {
        let mut s = [0.0; M];
        for j in 0..M {
            s[j] = tol.abs.max(tol.rel * mass[j]);
        }
        s
    };
    let scale = scale_of(&total_mass);
    for (a, b, v, e, w) in panels {
        heap.push(Panel { lo: a, hi: b, value: v, error: e, mass: w, score: score(&e, &scale) });
    }
    loop {
        let scale = scale_of(&total_mass);
        if score(&total_err, &scale) <= 1.0 {
            return Ok(QuadResult { value: total, error: total_err, evaluations });
        }
        if heap.len() >= tol.max_panels {
            let worst = heap.peek().copied().expect("panels exist");
            return Err(Error::Quadrature {
                lo: worst.lo,
                hi: worst.hi,
                evaluations,
                error: total_err.iter().copied().fold(0.0, f64::max),
                tolerance: scale.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        let worst = heap.pop().expect("panels exist");
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1, w1) = kronrod(&f, worst.lo, mid);
        let (v2, e2, w2) = kronrod(&f, mid, worst.hi);
        evaluations += 30;
        for j in 0..M {
            total[j] += v1[j] + v2[j] - worst.value[j];
            total_err[j] += e1[j] + e2[j] - worst.error[j];
            total_mass[j] += w1[j] + w2[j] - worst.mass[j];
        }
        heap.push(Panel { lo: worst.lo, hi: mid, value: v1, error: e1, mass: w1, score: score(&e1, &scale) });
        heap.push(Panel { lo: mid, hi: worst.hi, value: v2, error: e2, mass: w2, score: score(&e2, &scale) });
    }
}

/// Nodes and weights of the composite Kronrod-15 rule with `panels` equal panels.
pub fn composite_rule(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(15 * panels);
    let width = (hi - lo) / panels as f64;
    for k in 0..panels {
        let c = lo + width * (k as f64 + 0.5);
        let h = 0.5 * width;
        out.push((c, WGK[7] * h));
        for i in 0..7 {
            out.push((c - h * XGK[i], WGK[i] * h));
            out.push((c + h * XGK[i], WGK[i] * h));
        }
    }
    out
}
