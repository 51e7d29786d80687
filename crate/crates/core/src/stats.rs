//! Small statistical estimators shared by the field and micro modules.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// `|value − target| ≤ k·stderr`.
    pub fn consistent_with(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Streaming mean and variance; `merge` is associative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean, (self.variance() / self.n as f64).sqrt())
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

pub fn mean_estimate(xs: &[f64]) -> Estimate {
    xs.iter().copied().collect::<Welford>().estimate()
}

/// Mean of a correlated series with the error from `batches` contiguous batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> Result<Estimate> {
    if batches < 2 || xs.len() < 2 * batches {
        return Err(Error::InsufficientData(format!(
            "batch means need >= 2 batches of >= 2 samples, got {} samples for {batches} batches",
            xs.len()
        )));
    }
    let b = xs.len() / batches;
    let w: Welford = xs.chunks_exact(b).take(batches).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    Ok(w.estimate())
}

/// Sample covariance of paired data (unbiased).
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: Estimate,
    pub intercept: Estimate,
    pub residual_sd: f64,
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InsufficientData(format!("linear fit needs >= 3 paired points, got {}", x.len().min(y.len()))));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("linear fit with constant abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let s2 = rss / (n - 2.0);
    Ok(LinearFit {
        slope: Estimate::new(b, (s2 / sxx).sqrt()),
        intercept: Estimate::new(a, (s2 * (1.0 / n + mx * mx / sxx)).sqrt()),
        residual_sd: s2.sqrt(),
    })
}

/// Weighted least squares `y = a + b x` with known standard deviations `sd`.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sd: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() != sd.len() || x.len() < 2 {
        return Err(Error::InsufficientData("weighted fit needs >= 2 points with errors".into()));
    }
    let w: Vec<f64> = sd.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let chi2: f64 = (0..x.len()).map(|i| w[i] * (y[i] - a - b * x[i]).powi(2)).sum();
    Ok(LinearFit {
        slope: Estimate::new(b, (1.0 / sxx).sqrt()),
        intercept: Estimate::new(a, (1.0 / sw + mx * mx / sxx).sqrt()),
        residual_sd: (chi2 / (x.len().max(3) - 2) as f64).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CosineFit {
    pub omega: f64,
    pub amplitude: f64,
    pub rss: f64,
}

/// Least-squares fit of `y ≈ A cos(ωt)` with `ω ∈ [lo, hi]`.
///
/// `A` is profiled out; the profile residual is scanned on a grid and refined
/// by golden section around the best cell.
pub fn fit_cosine(t: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<CosineFit> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(Error::InsufficientData(format!("cosine fit needs >= 3 points, got {}", t.len())));
    }
    if !(0.0 <= lo && lo < hi) {
        return Err(Error::InvalidParameter(format!("bad frequency window [{lo}, {hi}]")));
    }
    let profile = |w: f64| -> (f64, f64) {
        let (mut cc, mut cy) = (0.0, 0.0);
        for (ti, yi) in t.iter().zip(y) {
            let c = (w * ti).cos();
            cc += c * c;
            cy += c * yi;
        }
        let a = if cc > 0.0 { cy / cc } else { 0.0 };
        let rss = t.iter().zip(y).map(|(ti, yi)| (yi - a * (w * ti).cos()).powi(2)).sum();
        (rss, a)
    };
    let grid = 400;
    let step = (hi - lo) / grid as f64;
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..=grid {
        let r = profile(lo + step * k as f64).0;
        if r < best.0 {
            best = (r, k);
        }
    }
    let (mut a, mut b) = (lo + step * (best.1 as f64 - 1.0).max(0.0), (lo + step * (best.1 as f64 + 1.0)).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (profile(x1).0, profile(x2).0);
    while b - a > 1e-12 * (1.0 + b.abs()) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = profile(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = profile(x2).0;
        }
    }
    let omega = 0.5 * (a + b);
    let (rss, amplitude) = profile(omega);
    Ok(CosineFit { omega, amplitude, rss })
}

/// Delete-one jackknife of a statistic over `groups` units.
///
/// `stat(k)` evaluates the statistic with unit `k` left out; `full` uses all.
pub fn jackknife<F: Fn(Option<usize>) -> f64>(groups: usize, stat: F) -> Estimate {
    let full = stat(None);
    let g = groups as f64;
    let leave: Vec<f64> = (0..groups).map(|k| stat(Some(k))).collect();
    let mean = leave.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * leave.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Estimate::new(full, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 0.25];
        let w: Welford = xs.iter().copied().collect();
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((w.mean() - m).abs() < 1e-15);
        assert!((w.variance() - v).abs() < 1e-13);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope.value + 0.5).abs() < 1e-13);
        assert!((f.intercept.value - 2.0).abs() < 1e-13);
        assert!(f.slope.stderr < 1e-12);
    }

    #[test]
    fn cosine_fit_recovers_frequency() {
        let t: Vec<f64> = (0..200).map(|k| 0.01 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.7 * (1.66 * t).cos()).collect();
        let f = fit_cosine(&t, &y, 0.5, 4.0).unwrap();
        assert!((f.omega - 1.66).abs() < 1e-8);
        assert!((f.amplitude - 0.7).abs() < 1e-8);
    }

    #[test]
    fn batch_means_rejects_short_series() {
        assert!(matches!(batch_means(&[1.0, 2.0, 3.0], 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs = [1.0, 3.0, 2.0, 5.0, 4.0, 0.5];
        let est = jackknife(xs.len(), |skip| {
            let v: Vec<f64> = xs.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, x)| *x).collect();
            v.iter().sum::<f64>() / v.len() as f64
        });
        let se = mean_estimate(&xs).stderr;
        assert!((est.stderr - se).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn welford_merge_is_associative(xs in prop::collection::vec(-1e3f64..1e3, 2..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let mut a: Welford = xs[..cut].iter().copied().collect();
            let b: Welford = xs[cut..].iter().copied().collect();
            a.merge(&b);
            let all: Welford = xs.iter().copied().collect();
            prop_assert!((a.mean() - all.mean()).abs() < 1e-9);
            prop_assert!((a.variance() - all.variance()).abs() < 1e-7 * (1.0 + all.variance()));
        }
    }
}
