//! Closed-form solution of the dual free-boundary problem
//!
//! ```text
//! lambda m(y) = (lambda - r) y m'(y) + delta y^2 m''(y) + c y + 1{y > y0}   on (0, yL)
//! m(0) = 0,  m'(y0) = 0,  m(yL) = 1/lambda - L yL,  m'(yL) = -L
//! ```
//!
//! Region 1 is `[0, y0]`, region 2 is `(y0, yL]`. The ratio `rho = y0 / yL`
//! solves a scalar equation whose right-hand side is strictly increasing on
//! `(0, 1)`, so it is found by bracketing; `y0` then follows from value
//! matching and `yL = y0 / rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarketConstants, ModelParams};
use crate::roots::find_root;

/// Which one-sided limit to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// First three derivatives of the dual function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualDerivs {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbpSolution {
    /// `y0 / yL`, in `(0, 1)`.
    pub rho: f64,
    /// Inner free boundary: the dual variable at zero wealth.
    pub y0: f64,
    /// Outer free boundary: the dual variable at `w = -L`.
    pub yl: f64,
    /// Coefficient of `y^b1` on region 1.
    pub inner_coef: f64,
    /// Coefficients of `y^b1` and `y^b2` on region 2.
    pub outer_coefs: [f64; 2],
    pub constants: MarketConstants,
    pub params: ModelParams,
}

/// Right-hand side of the ratio equation, as a function of `s = y / yL`.
///
/// Equals 1 at `s = 1` and tends to `-inf` as `s -> 0+`.
pub fn ratio_rhs(k: &MarketConstants, s: f64) -> f64 {
    let (b1, b2) = (k.b1, k.b2);
    (b1 * (1.0 - b2) * s.powf(b1 - 1.0) + (b1 - 1.0) * b2 * s.powf(b2 - 1.0)) / (b1 - b2)
}

/// Solves `ratio_rhs(rho) = c / (c + r L)` on `(0, 1)`.
pub fn solve_ratio(k: &MarketConstants, params: &ModelParams) -> Result<f64> {
    let target = params.c / (params.c + params.r * params.ruin_depth);
    let f = |s: f64| ratio_rhs(k, s) - target;
    let mut lo = 0.5;
    while f(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NotBracketed {
                what: "free-boundary ratio",
                lo,
                hi: 1.0,
                f_lo: f(lo),
                f_hi: f(1.0),
            });
        }
    }
    find_root("free-boundary ratio", f, lo, 1.0, 1e-15)
}

/// Free boundaries and region coefficients given the ratio from [`solve_ratio`].
pub fn solve_boundaries(rho: f64, k: &MarketConstants, params: &ModelParams) -> Result<FbpSolution> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::OutOfDomain {
            what: "free-boundary ratio",
            value: rho,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let (b1, b2) = (k.b1, k.b2);
    let cr = params.safe_level();
    let [k1, k2] = outer_weights(k, params);
    let bracket = -cr / b1 + k1 * rho.powf(b1 - 1.0) + k2 * rho.powf(b2 - 1.0);
    if !(bracket > 0.0) {
        return Err(Error::invalid(format!(
            "value-matching denominator {bracket:e} is not positive (ratio {rho})"
        )));
    }
    let y0 = 1.0 / (params.lambda * bracket);
    let yl = y0 / rho;
    Ok(FbpSolution {
        rho,
        y0,
        yl,
        inner_coef: -cr / b1 * y0.powf(1.0 - b1),
        outer_coefs: [-k1 * yl.powf(1.0 - b1), -k2 * yl.powf(1.0 - b2)],
        constants: *k,
        params: *params,
    })
}

/// `(c/r + L) (1 - b2) / (b1 - b2)` and `(c/r + L) (b1 - 1) / (b1 - b2)`.
pub(crate) fn outer_weights(k: &MarketConstants, params: &ModelParams) -> [f64; 2] {
    let span = params.wealth_span();
    [
        span * (1.0 - k.b2) / (k.b1 - k.b2),
        span * (k.b1 - 1.0) / (k.b1 - k.b2),
    ]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Region {
    Inner,
    Outer,
}

impl FbpSolution {
    /// Solves the free-boundary problem for a validated parameter set.
    pub fn solve(params: &ModelParams) -> Result<Self> {
        let k = MarketConstants::new(params);
        let rho = solve_ratio(&k, params)?;
        solve_boundaries(rho, &k, params)
    }

    fn check_domain(&self, y: f64) -> Result<()> {
        if y >= 0.0 && y <= self.yl {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                what: "dual variable",
                value: y,
                lo: 0.0,
                hi: self.yl,
            })
        }
    }

    fn region(&self, y: f64, side: Option<Side>) -> Option<Region> {
        if y < self.y0 {
            Some(Region::Inner)
        } else if y > self.y0 {
            Some(Region::Outer)
        } else {
            side.map(|s| match s {
                Side::Left => Region::Inner,
                Side::Right => Region::Outer,
            })
        }
    }

    /// Dual value function on `[0, yL]`.
    pub fn mhat(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        let region = self.region(y, Some(Side::Left)).unwrap();
        Ok(self.mhat_in(region, y))
    }

    fn mhat_in(&self, region: Region, y: f64) -> f64 {
        let k = &self.constants;
        let cr = k.safe_level;
        match region {
            Region::Inner => {
                let t = y / self.y0;
                cr * y * (1.0 - t.powf(k.b1 - 1.0) / k.b1)
            }
            Region::Outer => {
                let [k1, k2] = outer_weights(k, &self.params);
                let s = y / self.yl;
                y * (cr - k1 * s.powf(k.b1 - 1.0) - k2 * s.powf(k.b2 - 1.0)) + 1.0 / self.params.lambda
            }
        }
    }

    /// First derivative; continuous on `[0, yL]` so no side is needed.
    pub fn mhat_prime(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        let region = self.region(y, Some(Side::Left)).unwrap();
        Ok(self.mhat_prime_in(region, y))
    }

    fn mhat_prime_in(&self, region: Region, y: f64) -> f64 {
        let k = &self.constants;
        let cr = k.safe_level;
        match region {
            Region::Inner => cr * (1.0 - (y / self.y0).powf(k.b1 - 1.0)),
            Region::Outer => {
                let [k1, k2] = outer_weights(k, &self.params);
                let s = y / self.yl;
                cr - k.b1 * k1 * s.powf(k.b1 - 1.0) - k.b2 * k2 * s.powf(k.b2 - 1.0)
            }
        }
    }

    /// Region-2 formula for the first derivative, usable at and below `y0`.
    pub(crate) fn outer_prime(&self, y: f64) -> f64 {
        self.mhat_prime_in(Region::Outer, y)
    }

    /// `(m', m'', m''')` at `y` in `(0, yL]`.
    ///
    /// At `y = y0` the second and third derivatives jump, so `side` must be
    /// given there; elsewhere it is ignored.
    pub fn mhat_derivs(&self, y: f64, side: Option<Side>) -> Result<DualDerivs> {
        self.check_domain(y)?;
        if y <= 0.0 {
            return Err(Error::OutOfDomain {
                what: "dual variable (second derivative)",
                value: y,
                lo: f64::MIN_POSITIVE,
                hi: self.yl,
            });
        }
        let region = self.region(y, side).ok_or(Error::AmbiguousSide {
            what: "second derivative of the dual function",
            at: y,
        })?;
        Ok(self.derivs_in(region, y))
    }

    fn derivs_in(&self, region: Region, y: f64) -> DualDerivs {
        let k = &self.constants;
        let (b1, b2) = (k.b1, k.b2);
        let cr = k.safe_level;
        match region {
            Region::Inner => {
                let t = y / self.y0;
                let tp = t.powf(b1 - 1.0);
                DualDerivs {
                    first: cr * (1.0 - tp),
                    second: -cr * (b1 - 1.0) * tp / y,
                    third: -cr * (b1 - 1.0) * (b1 - 2.0) * tp / (y * y),
                }
            }
            Region::Outer => {
                let [k1, k2] = outer_weights(k, &self.params);
                let s = y / self.yl;
                let p1 = k1 * s.powf(b1 - 1.0);
                let p2 = k2 * s.powf(b2 - 1.0);
                DualDerivs {
                    first: cr - b1 * p1 - b2 * p2,
                    second: -(b1 * (b1 - 1.0) * p1 + b2 * (b2 - 1.0) * p2) / y,
                    third: -(b1 * (b1 - 1.0) * (b1 - 2.0) * p1 + b2 * (b2 - 1.0) * (b2 - 2.0) * p2) / (y * y),
                }
            }
        }
    }

    /// `min((c/r) y, 1/lambda - L y)`, which dominates the dual function.
    pub fn upper_envelope(&self, y: f64) -> f64 {
        (self.constants.safe_level * y).min(1.0 / self.params.lambda - self.params.ruin_depth * y)
    }

    /// Residual of the dual ODE,
    /// `lambda m - (lambda - r) y m' - delta y^2 m'' - c y - 1{y > y0}`.
    pub fn ode_residual(&self, y: f64, side: Option<Side>) -> Result<f64> {
        let d = self.mhat_derivs(y, side)?;
        let region = self.region(y, side).unwrap();
        let m = self.mhat_in(region, y);
        let p = &self.params;
        let source = if region == Region::Outer { 1.0 } else { 0.0 };
        Ok(p.lambda * m - (p.lambda - p.r) * y * d.first - self.constants.delta * y * y * d.second - p.c * y - source)
    }

    /// Both one-sided values of the dual function at `y0`.
    pub fn value_match_gap(&self) -> f64 {
        self.mhat_in(Region::Inner, self.y0) - self.mhat_in(Region::Outer, self.y0)
    }

    /// Copy with `y0` scaled by `factor` and the region-1 coefficient
    /// recomputed, leaving region 2 untouched. Only meant for fault-injection
    /// tests of the verification pipeline.
    #[doc(hidden)]
    pub fn with_scaled_y0(&self, factor: f64) -> Self {
        let y0 = self.y0 * factor;
        let k = &self.constants;
        Self {
            y0,
            rho: y0 / self.yl,
            inner_coef: -k.safe_level / k.b1 * y0.powf(1.0 - k.b1),
            ..*self
        }
    }
}
