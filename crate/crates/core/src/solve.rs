//! Scalar root finding and maximisation.
//!
//! Every fixed point in this crate is the root of a monotone scalar
//! function, so plain bisection is enough and always converges. The
//! reward problems are one-dimensional maximisations solved by a coarse
//! grid followed by golden-section refinement around the best grid cell.

use crate::error::{Error, Result};
use crate::math::abs;

/// Stopping rules shared by the solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Bisection stops once |f(x)| falls to this level.
    pub residual: f64,
    /// Golden-section search stops once the bracket is this narrow.
    pub argument: f64,
    /// Iteration cap for both methods.
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            residual: 1e-12,
            argument: 1e-8,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn with_residual(residual: f64) -> Self {
        Tolerance {
            residual,
            ..Tolerance::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds a root of `f` on `[lo, hi]` by bisection.
///
/// `f(lo)` and `f(hi)` must have opposite signs (a zero at either end is
/// returned directly). Infinite endpoint values are allowed; only their
/// sign is used.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: &Tolerance) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0, iterations: 0 });
    }
    if f_lo.is_nan() || f_hi.is_nan() || (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let lo_positive = f_lo > 0.0;
    let mut best = Root {
        x: 0.5 * (lo + hi),
        residual: f64::INFINITY,
        iterations: 0,
    };
    for i in 1..=tol.max_iter {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        best = Root { x: mid, residual: fm, iterations: i };
        if abs(fm) <= tol.residual || mid <= lo || mid >= hi {
            break;
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: &Tolerance) -> Maximum
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while b - a > tol.argument && iter < tol.max_iter {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    if fc >= fd {
        Maximum { x: c, value: fc }
    } else {
        Maximum { x: d, value: fd }
    }
}

/// Maximises `f` over `[lo, hi]`: a uniform pre-grid of `grid` points
/// (endpoints included) locates the best cell, then golden-section search
/// refines inside the neighbouring cells. The grid guards against
/// multimodal objectives; the larger of the grid and refined values wins,
/// with ties going to the smaller argument.
pub fn maximize<F>(mut f: F, lo: f64, hi: f64, grid: usize, tol: &Tolerance) -> Maximum
where
    F: FnMut(f64) -> f64,
{
    let n = grid.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let best_x = if best_i == n - 1 { hi } else { lo + step * best_i as f64 };
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = if best_i + 1 >= n - 1 { hi } else { lo + step * (best_i + 1) as f64 };
    let refined = golden_section_max(&mut f, a, b, tol);
    if refined.value > best_v + 1e-10 * (1.0 + abs(best_v))
        || (refined.value >= best_v && refined.x < best_x)
    {
        refined
    } else {
        Maximum { x: best_x, value: best_v }
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (stop - start) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if n > 1 && i == n - 1 { stop } else { start + step * i as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| 2.0 - x * x, 0.0, 2.0, &Tolerance::default()).unwrap();
        assert!((r.x - core::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_accepts_infinite_endpoint() {
        let r = bisect(|x| if x == 0.0 { f64::INFINITY } else { 1.0 / x - 4.0 }, 0.0, 1.0, &Tolerance::default())
            .unwrap();
        assert!((r.x - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_same_sign() {
        let err = bisect(|x| x * x + 1.0, -1.0, 1.0, &Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn golden_finds_vertex() {
        let m = golden_section_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, &Tolerance::default());
        assert!((m.x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn maximize_handles_endpoint_and_bimodal() {
        let tol = Tolerance::default();
        let m = maximize(|x| x, 0.0, 2.0, 50, &tol);
        assert_eq!(m.x, 2.0);
        // Two bumps; the taller one is near 0.8.
        let f = |x: f64| (-(x - 0.2) * (x - 0.2) * 400.0).exp() + 1.5 * (-(x - 0.8) * (x - 0.8) * 400.0).exp();
        let m = maximize(f, 0.0, 1.0, 1000, &tol);
        assert!((m.x - 0.8).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v: alloc::vec::Vec<f64> = linspace(1.0, 2.0, 5).collect();
        assert_eq!(v, [1.0, 1.25, 1.5, 1.75, 2.0]);
    }
}
