//! Bracketed root finding.

use crate::{Error, Result};

/// Absolute tolerance on the bracket width used throughout the crate.
pub const BISECTION_TOL: f64 = 1e-13;
/// Iteration cap for every bisection.
pub const BISECTION_MAX_ITER: usize = 200;

/// Finds a root of `f` in `[lo, hi]` by bisection.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them must be zero).
/// Iterates until the bracket is narrower than `tol` or `max_iter` halvings
/// have been made, and returns the midpoint of the final bracket.
pub fn bisect<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "bisection bracket [{lo}, {hi}] does not enclose a sign change (f = {fa:e}, {fb:e})"
        )));
    }
    let a_negative = fa < 0.0;
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == a_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection with the crate-wide tolerance and iteration cap.
pub fn bisect_default<F>(f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    bisect(f, lo, hi, BISECTION_TOL, BISECTION_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect_default(|x| x * x - 2.0, 0.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect_default(|x| 1.0 - x, 0.0, 3.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_bracketing_interval() {
        assert!(matches!(
            bisect_default(|x| x * x + 1.0, -1.0, 1.0),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn respects_iteration_cap() {
        let r = bisect(|x| x - 0.3, 0.0, 1.0, 0.0, 3).unwrap();
        assert!((r - 0.3).abs() <= 1.0 / 16.0);
    }
}
