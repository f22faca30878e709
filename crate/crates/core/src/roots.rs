//! Bracketed scalar root finding: bisection down to a width tolerance, then
//! a few secant steps kept inside the final bracket.

use crate::error::{Error, Result};

/// Successive brackets produced by bisection of a sign-changing function.
///
/// Each item is the bracket `(lo, hi)` after one halving; `f(lo)` and `f(hi)`
/// keep opposite signs throughout.
pub struct Bisection<F> {
    f: F,
    lo: f64,
    hi: f64,
    f_lo: f64,
}

impl<F: FnMut(f64) -> f64> Bisection<F> {
    pub fn new(what: &'static str, mut f: F, lo: f64, hi: f64) -> Result<Self> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        if f_lo.is_nan() || f_hi.is_nan() || f_lo == 0.0 || f_hi == 0.0 || f_lo.signum() == f_hi.signum() {
            return Err(Error::NotBracketed {
                what,
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
        Ok(Self { f, lo, hi, f_lo })
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

impl<F: FnMut(f64) -> f64> Iterator for Bisection<F> {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        let mid = 0.5 * (self.lo + self.hi);
        if mid <= self.lo || mid >= self.hi {
            return None;
        }
        let f_mid = (self.f)(mid);
        if f_mid == 0.0 {
            self.lo = mid;
            self.hi = mid;
        } else if f_mid.signum() == self.f_lo.signum() {
            self.lo = mid;
            self.f_lo = f_mid;
        } else {
            self.hi = mid;
        }
        Some((self.lo, self.hi))
    }
}

/// Root of `f` on `[lo, hi]`, where `f(lo)` and `f(hi)` differ in sign.
///
/// Bisects until the bracket is narrower than `xtol` (or cannot shrink in
/// binary64), then polishes with up to four secant steps that are only
/// accepted while they stay inside the bracket and reduce `|f|`.
pub fn find_root<F: FnMut(f64) -> f64>(what: &'static str, mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    for x in [lo, hi] {
        if f(x) == 0.0 {
            return Ok(x);
        }
    }
    let mut bisect = Bisection::new(what, &mut f, lo, hi)?;
    let mut iterations = 0;
    loop {
        let (a, b) = bisect.bracket();
        if b - a <= xtol {
            break;
        }
        if bisect.next().is_none() {
            break;
        }
        iterations += 1;
        if iterations > 2000 {
            return Err(Error::NoConvergence {
                what,
                iterations,
                residual: b - a,
            });
        }
    }
    let (a, b) = bisect.bracket();
    drop(bisect);
    if a == b {
        return Ok(a);
    }

    let (mut x0, mut f0) = (a, f(a));
    let (mut x1, mut f1) = (b, f(b));
    let (mut best, mut f_best) = if f0.abs() < f1.abs() { (x0, f0) } else { (x1, f1) };
    for _ in 0..4 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 >= a && x2 <= b) {
            break;
        }
        let f2 = f(x2);
        if f2.abs() < f_best.abs() {
            best = x2;
            f_best = f2;
        }
        if f2 == 0.0 {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
    }
    Ok(best)
}
