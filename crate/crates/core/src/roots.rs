//! Safeguarded Newton iteration for increasing scalar functions.

/// Root of an increasing `f` (given as `x ↦ (f(x), f'(x))`) inside `[lo, hi]`.
///
/// The bracket is widened geometrically if it does not straddle the root.
/// Newton steps that leave the bracket fall back to bisection; iteration stops
/// at machine precision.
pub fn solve_increasing<F>(f: F, mut lo: f64, mut hi: f64, x0: f64) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut width = (hi - lo).max(1.0);
    while f(lo).0 > 0.0 {
        lo -= width;
        width *= 2.0;
    }
    let mut width = (hi - lo).max(1.0);
    while f(hi).0 < 0.0 {
        hi += width;
        width *= 2.0;
    }
    newton_in_bracket(f, lo, hi, x0)
}

/// As [`solve_increasing`] for a bracket `[lo, hi]` known to contain the root.
pub fn newton_in_bracket<F>(f: F, mut lo: f64, mut hi: f64, x0: f64) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let inside = dfx > 0.0 && newton > lo && newton < hi;
        // a Newton step this small leaves an error of order its square
        if inside && (newton - x).abs() <= 1e-9 * x.abs() {
            return newton;
        }
        let next = if inside { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}
