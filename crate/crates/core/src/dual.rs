//! Legendre inversion of the dual solution: from wealth `w` to the dual
//! variable `y = -m'(w)`, the value `m(w)`, and the feedback allocations.
//!
//! For `w` in `(0, c/r)` the value has the explicit form `beta (c/r - w)^p`;
//! for negative wealth everything goes through the dual variable, using
//! `m = mhat(y) - w y`, `m' = -y`, `m'' = -1/mhat''(y)`,
//! `m''' = mhat'''(y) / mhat''(y)^3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbp::{outer_weights, FbpSolution, Side};
use crate::model::{MarketConstants, ModelParams};
use crate::roots::find_root;

/// Everything known about the optimum at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub w: f64,
    /// Dual variable `-m'(w)`.
    pub y: f64,
    /// Minimum expected occupation time in years, excluding time already accrued.
    pub m: f64,
    pub m1: f64,
    /// One-sided at `w = 0`.
    pub m2: f64,
    /// Optimal amount held in the risky asset.
    pub pi_star: f64,
    /// Allocation that minimises the probability of lifetime ruin.
    pub pi_ruin: f64,
}

/// Coefficient of the positive-wealth branch `m(w) = beta (c/r - w)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaL {
    pub beta: f64,
}

/// Ruin-minimising allocation `((mu - r)/sigma^2) (c/r - w) / (p - 1)`.
pub fn pi_ruin(k: &MarketConstants, params: &ModelParams, w: f64) -> f64 {
    params.merton_ratio() * (k.safe_level - w) / (k.p - 1.0)
}

impl FbpSolution {
    pub fn beta(&self) -> BetaL {
        let k = &self.constants;
        BetaL {
            beta: self.y0 / (k.p * k.safe_level.powf(k.p - 1.0)),
        }
    }

    fn check_wealth(&self, w: f64) -> Result<()> {
        let (lo, hi) = (-self.params.ruin_depth, self.constants.safe_level);
        if w >= lo && w <= hi {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                what: "wealth",
                value: w,
                lo,
                hi,
            })
        }
    }

    /// Dual variable `I(w)` solving `mhat'(y) = w`, for `w` in `[-L, c/r]`.
    pub fn invert(&self, w: f64) -> Result<f64> {
        self.check_wealth(w)?;
        let k = &self.constants;
        if w >= 0.0 {
            return Ok(self.y0 * (1.0 - w / k.safe_level).powf(1.0 / (k.b1 - 1.0)));
        }
        if w == -self.params.ruin_depth {
            return Ok(self.yl);
        }
        // mhat' is a difference of terms of size c/r + L.
        let tol = 1e-12 * self.params.wealth_span();
        let f = |y: f64| self.outer_prime(y) - w;
        let at_y0 = f(self.y0);
        if at_y0 <= 0.0 {
            // w is zero to within rounding of the boundary condition.
            if at_y0.abs() <= tol {
                return Ok(self.y0);
            }
            return Err(Error::NotBracketed {
                what: "dual variable",
                lo: self.y0,
                hi: self.yl,
                f_lo: at_y0,
                f_hi: f(self.yl),
            });
        }
        let mut y = find_root("dual variable", f, self.y0, self.yl, 1e-15 * self.yl)?;
        // One Newton step removes the last bits of bisection error.
        if let Ok(d) = self.mhat_derivs(y, Some(Side::Right)) {
            let next = y - (d.first - w) / d.second;
            if next >= self.y0 && next <= self.yl && (self.outer_prime(next) - w).abs() < (d.first - w).abs() {
                y = next;
            }
        }
        let residual = (self.outer_prime(y) - w).abs();
        if residual > tol {
            return Err(Error::NoConvergence {
                what: "dual variable",
                iterations: 0,
                residual,
            });
        }
        Ok(y)
    }

    /// `m(w) = M_L(w, 0)` on the whole real line.
    pub fn m(&self, w: f64) -> Result<f64> {
        let k = &self.constants;
        if w >= k.safe_level {
            return Ok(0.0);
        }
        if w <= -self.params.ruin_depth {
            return Ok(1.0 / self.params.lambda);
        }
        if w > 0.0 {
            return Ok(self.beta().beta * (k.safe_level - w).powf(k.p));
        }
        let y = self.invert(w)?;
        let [k1, k2] = outer_weights(k, &self.params);
        let s = y / self.yl;
        Ok(y * ((k.safe_level - w) - k1 * s.powf(k.b1 - 1.0) - k2 * s.powf(k.b2 - 1.0)) + 1.0 / self.params.lambda)
    }

    /// Minimum expected occupation time `M_L(w, a) = m(w) + a`.
    pub fn value(&self, w: f64, a: f64) -> Result<f64> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!("accrued occupation time must be finite and >= 0, got {a}")));
        }
        Ok(self.m(w)? + a)
    }

    /// `(m', m'', m''')` on `[-L, c/r]`; `side` is required at `w = 0`.
    pub fn m_derivs(&self, w: f64, side: Option<Side>) -> Result<[f64; 3]> {
        self.check_wealth(w)?;
        let k = &self.constants;
        let positive_branch = match (w == 0.0, side) {
            (false, _) => w > 0.0,
            (true, Some(Side::Right)) => true,
            (true, Some(Side::Left)) => false,
            (true, None) => {
                return Err(Error::AmbiguousSide {
                    what: "second derivative of the value function",
                    at: 0.0,
                })
            }
        };
        if positive_branch {
            let beta = self.beta().beta;
            let (p, x) = (k.p, k.safe_level - w);
            return Ok([
                -beta * p * x.powf(p - 1.0),
                beta * p * (p - 1.0) * x.powf(p - 2.0),
                -beta * p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
            ]);
        }
        let y = self.invert(w)?;
        let d = self.mhat_derivs(y, Some(Side::Right))?;
        Ok([-y, -1.0 / d.second, d.third / d.second.powi(3)])
    }

    /// Optimal feedback allocation on `(-L, c/r)`; `side` is required at `w = 0`.
    pub fn pi_star(&self, w: f64, side: Option<Side>) -> Result<f64> {
        let (lo, hi) = (-self.params.ruin_depth, self.constants.safe_level);
        if !(w > lo && w < hi) {
            return Err(Error::OutOfDomain {
                what: "wealth (open interval)",
                value: w,
                lo,
                hi,
            });
        }
        self.allocation(w, side)
    }

    /// Allocation on the closed interval, using limits at the end points.
    pub(crate) fn allocation(&self, w: f64, side: Option<Side>) -> Result<f64> {
        let k = &self.constants;
        let right = match (w == 0.0, side) {
            (false, _) => w > 0.0,
            (true, Some(s)) => s == Side::Right,
            (true, None) => {
                return Err(Error::AmbiguousSide {
                    what: "optimal allocation",
                    at: 0.0,
                })
            }
        };
        if right {
            return Ok(pi_ruin(k, &self.params, w));
        }
        let y = self.invert(w)?;
        let d = self.mhat_derivs(y, Some(Side::Right))?;
        Ok(-self.params.merton_ratio() * y * d.second)
    }

    /// Slope of the optimal allocation, `-k (1 + y mhat''' / mhat'')`, for `w < 0`.
    pub(crate) fn pi_star_slope_negative(&self, w: f64) -> Result<f64> {
        let y = self.invert(w)?;
        let d = self.mhat_derivs(y, Some(Side::Right))?;
        Ok(-self.params.merton_ratio() * (1.0 + y * d.third / d.second))
    }

    /// Full record at `w` in `[-L, c/r]`, with limits at the end points.
    pub fn value_point(&self, w: f64, side: Option<Side>) -> Result<ValuePoint> {
        self.check_wealth(w)?;
        let [m1, m2, _] = self.m_derivs(w, side)?;
        Ok(ValuePoint {
            w,
            y: -m1,
            m: self.m(w)?,
            m1,
            m2,
            pi_star: self.allocation(w, side)?,
            pi_ruin: pi_ruin(&self.constants, &self.params, w),
        })
    }
}
