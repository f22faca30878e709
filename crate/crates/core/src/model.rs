//! Model inputs and the constants derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market and mortality inputs. All rates are annualised continuous rates.
///
/// The JSON form uses the field names `r`, `mu`, `sigma`, `c`, `lambda`, `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Riskless rate.
    pub r: f64,
    /// Drift of the risky asset.
    pub mu: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Net consumption rate.
    pub c: f64,
    /// Mortality hazard rate.
    pub lambda: f64,
    /// Depth below zero at which the game ends with the lifetime penalty.
    #[serde(rename = "L")]
    pub ruin_depth: f64,
}

impl ModelParams {
    /// Builds and validates a parameter set.
    pub fn new(r: f64, mu: f64, sigma: f64, c: f64, lambda: f64, ruin_depth: f64) -> Result<Self> {
        Self {
            r,
            mu,
            sigma,
            c,
            lambda,
            ruin_depth,
        }
        .validated()
    }

    /// Returns `self` if every constraint holds, otherwise the first violated one.
    pub fn validated(self) -> Result<Self> {
        let fields = [
            ("r", self.r),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("c", self.c),
            ("lambda", self.lambda),
            ("L", self.ruin_depth),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be finite")));
        }
        if self.r < 0.0 {
            return Err(Error::invalid("r must be non-negative"));
        }
        if self.r == 0.0 {
            return Err(Error::invalid("safe level undefined: r must be positive so that c/r is finite"));
        }
        if self.mu <= self.r {
            return Err(Error::invalid("mu must exceed r"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::invalid("sigma must be positive"));
        }
        if self.c <= 0.0 {
            return Err(Error::invalid("c must be positive"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.ruin_depth <= 0.0 {
            return Err(Error::invalid("L must be positive"));
        }
        Ok(self)
    }

    /// Same market, different ruin depth.
    pub fn with_depth(self, ruin_depth: f64) -> Result<Self> {
        Self { ruin_depth, ..self }.validated()
    }

    /// Wealth `c/r` at which riskless investment funds consumption forever.
    pub fn safe_level(&self) -> f64 {
        self.c / self.r
    }

    /// `(mu - r) / sigma^2`, the factor in every feedback allocation.
    pub fn merton_ratio(&self) -> f64 {
        (self.mu - self.r) / (self.sigma * self.sigma)
    }

    /// Length of the wealth interval `[-L, c/r]` on which the value is non-trivial.
    pub fn wealth_span(&self) -> f64 {
        self.safe_level() + self.ruin_depth
    }
}

/// Quantities shared by every closed-form expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConstants {
    /// Half the squared Sharpe ratio.
    pub delta: f64,
    /// Positive root of `delta B^2 - (r - lambda + delta) B - lambda = 0`; always > 1.
    pub b1: f64,
    /// Negative root of the same quadratic.
    pub b2: f64,
    /// Dual exponent `b1 / (b1 - 1)`.
    pub p: f64,
    pub safe_level: f64,
}

impl MarketConstants {
    pub fn new(params: &ModelParams) -> Self {
        let sharpe = (params.mu - params.r) / params.sigma;
        let delta = 0.5 * sharpe * sharpe;
        let b = params.r - params.lambda + delta;
        let root = (b * b + 4.0 * delta * params.lambda).sqrt();
        // Take whichever root has no cancellation and recover the other from
        // the product b1 * b2 = -lambda / delta.
        let (b1, b2) = if b >= 0.0 {
            let b1 = (b + root) / (2.0 * delta);
            (b1, -params.lambda / (delta * b1))
        } else {
            let b2 = (b - root) / (2.0 * delta);
            (-params.lambda / (delta * b2), b2)
        };
        Self {
            delta,
            b1,
            b2,
            p: b1 / (b1 - 1.0),
            safe_level: params.safe_level(),
        }
    }

    /// Residual of the characteristic quadratic at `b`.
    pub fn characteristic(&self, params: &ModelParams, b: f64) -> f64 {
        self.delta * b * b - (params.r - params.lambda + self.delta) * b - params.lambda
    }
}
