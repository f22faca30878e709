//! Step-function penalties: occupation time weighted by a piecewise-constant
//! `f` that grows as wealth falls.
//!
//! The indicator `1{w<0}` is the one-step case `w_1 = 0`, `f_1 = 1`.
//!
//! On the dual segment between consecutive free boundaries the value is
//!
//! ```text
//! mhat = A_k y^B1 + C_k y^B2 + (c/r) y + f_k / lambda
//! ```
//!
//! with `C_0 = 0`, the baseline conditions at `yL`, and `mhat`, `mhat'`
//! continuous at each `y_k` where `mhat'(y_k) = w_k`. The outer segment is
//! fixed by `yL`; marching down through the thresholds leaves a mismatch in
//! `C_0` that is driven to zero by bisection on `yL`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbp::{DualDerivs, FbpSolution, Side};
use crate::interp::HermiteTable;
use crate::model::{MarketConstants, ModelParams};
use crate::roots::find_root;
use crate::sim::FeedbackRule;

/// `f(w) = 0` on `[w_1, inf)`, `f_k` on `[w_{k+1}, w_k)` and `f_K` below `w_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPenalty {
    /// Strictly decreasing: `0 >= w_1 > w_2 > ... > w_K`.
    pub thresholds: Vec<f64>,
    /// `f_1 <= f_2 <= ... <= f_K`, all non-negative.
    pub levels: Vec<f64>,
}

impl StepPenalty {
    pub fn new(thresholds: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        Self { thresholds, levels }.validated()
    }

    /// The baseline `1{w<0}`.
    pub fn indicator() -> Self {
        Self {
            thresholds: vec![0.0],
            levels: vec![1.0],
        }
    }

    pub fn validated(self) -> Result<Self> {
        let (t, f) = (&self.thresholds, &self.levels);
        if t.is_empty() || t.len() != f.len() {
            return Err(Error::invalid(format!(
                "penalty needs as many levels as thresholds (at least one), got {} and {}",
                t.len(),
                f.len()
            )));
        }
        if t.iter().chain(f).any(|v| !v.is_finite()) {
            return Err(Error::invalid("penalty thresholds and levels must be finite"));
        }
        if t[0] > 0.0 {
            return Err(Error::invalid(format!("first threshold must be <= 0, got {}", t[0])));
        }
        if t.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::invalid("penalty thresholds must be strictly decreasing"));
        }
        if f[0] < 0.0 || f.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::invalid("penalty levels must be non-negative and non-decreasing as wealth falls"));
        }
        Ok(self)
    }

    /// Checks that every threshold lies in `(-L, 0]`.
    pub fn check_depth(&self, params: &ModelParams) -> Result<()> {
        let last = *self.thresholds.last().expect("validated penalty");
        if last <= -params.ruin_depth {
            return Err(Error::OutOfDomain {
                what: "penalty threshold",
                value: last,
                lo: -params.ruin_depth,
                hi: 0.0,
            });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.thresholds.len()
    }

    /// `f(w)`.
    pub fn level_at(&self, w: f64) -> f64 {
        let below = self.thresholds.iter().take_while(|&&t| w < t).count();
        if below == 0 {
            0.0
        } else {
            self.levels[below - 1]
        }
    }

    /// `f(-L) = f_K`, charged as `f_K / lambda` on ruin.
    pub fn terminal(&self) -> f64 {
        *self.levels.last().expect("validated penalty")
    }

    /// Same thresholds with every level multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.thresholds.clone(), self.levels.iter().map(|f| f * k).collect())
    }

    pub fn is_indicator(&self) -> bool {
        self.thresholds == [0.0] && self.levels == [1.0]
    }
}

/// Coefficients of one dual segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    /// Coefficient of `y^B1`.
    pub a: f64,
    /// Coefficient of `y^B2`; zero on the innermost segment.
    pub c: f64,
    /// Penalty level `f_k` on this segment.
    pub level: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

#[derive(Clone, Copy)]
struct Shape {
    b1: f64,
    b2: f64,
    safe: f64,
    lambda: f64,
}

impl Shape {
    fn new(k: &MarketConstants, params: &ModelParams) -> Self {
        Self {
            b1: k.b1,
            b2: k.b2,
            safe: k.safe_level,
            lambda: params.lambda,
        }
    }

    /// `a y^e`, reading `0 * y^e` as zero even where `y^e` is infinite.
    fn term(a: f64, y: f64, e: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else {
            a * y.powf(e)
        }
    }

    fn value(&self, s: &Segment, y: f64) -> f64 {
        Self::term(s.a, y, self.b1) + Self::term(s.c, y, self.b2) + self.safe * y + s.level / self.lambda
    }

    fn slope(&self, s: &Segment, y: f64) -> f64 {
        Self::term(self.b1 * s.a, y, self.b1 - 1.0) + Self::term(self.b2 * s.c, y, self.b2 - 1.0) + self.safe
    }

    fn second(&self, s: &Segment, y: f64) -> f64 {
        let (b1, b2) = (self.b1, self.b2);
        Self::term(b1 * (b1 - 1.0) * s.a, y, b1 - 2.0) + Self::term(b2 * (b2 - 1.0) * s.c, y, b2 - 2.0)
    }

    fn third(&self, s: &Segment, y: f64) -> f64 {
        let (b1, b2) = (self.b1, self.b2);
        Self::term(b1 * (b1 - 1.0) * (b1 - 2.0) * s.a, y, b1 - 3.0)
            + Self::term(b2 * (b2 - 1.0) * (b2 - 2.0) * s.c, y, b2 - 3.0)
    }

    /// Largest `y` below `upper` with `mhat'(y) = w`, where `mhat'(upper) < w`.
    fn crossing(&self, s: &Segment, upper: f64, w: f64) -> std::result::Result<f64, String> {
        if !(self.second(s, upper) < 0.0) {
            return Err(format!("mhat' is not decreasing at y = {upper}"));
        }
        // Stationary point of mhat', if any.
        let ratio = -self.b2 * (self.b2 - 1.0) * s.c / (self.b1 * (self.b1 - 1.0) * s.a);
        let turning = if ratio > 0.0 { ratio.powf(1.0 / (self.b1 - self.b2)) } else { 0.0 };
        let f = |y: f64| self.slope(s, y) - w;
        let lo = if turning > 0.0 && turning < upper {
            if f(turning) < 0.0 {
                return Err(format!("mhat' peaks at {} below threshold {w}", self.slope(s, turning)));
            }
            turning
        } else {
            let mut lo = upper;
            let mut halvings = 0;
            while !(f(lo) > 0.0) {
                lo *= 0.5;
                halvings += 1;
                if halvings > 2000 || lo == 0.0 {
                    return Err(format!("mhat' never reaches threshold {w} below y = {upper}"));
                }
            }
            lo
        };
        find_root("penalty free boundary", f, lo, upper, 1e-15 * upper).map_err(|e| e.to_string())
    }
}

/// Segments from a trial `yL`, inner one first, and the scaled mismatch in `C_0`.
struct March {
    segments: Vec<Segment>,
    mismatch: f64,
    scale: f64,
}

fn march(shape: Shape, penalty: &StepPenalty, span: f64, yl: f64) -> std::result::Result<March, String> {
    let (b1, b2) = (shape.b1, shape.b2);
    let outer = Segment {
        a: -span * (1.0 - b2) / (b1 - b2) * yl.powf(1.0 - b1),
        c: -span * (b1 - 1.0) / (b1 - b2) * yl.powf(1.0 - b2),
        level: penalty.terminal(),
        y_lo: 0.0,
        y_hi: yl,
    };
    let mut segments = vec![outer];
    let mut upper = yl;
    let (mut mismatch, mut scale) = (0.0, 1.0);
    for k in (0..penalty.steps()).rev() {
        let w = penalty.thresholds[k];
        let cur = *segments.last().expect("non-empty");
        let y = shape.crossing(&cur, upper, w)?;
        let level = if k == 0 { 0.0 } else { penalty.levels[k - 1] };
        let p = shape.value(&cur, y) - shape.safe * y - level / shape.lambda;
        let q = (w - shape.safe) * y;
        segments.last_mut().expect("non-empty").y_lo = y;
        mismatch = b1 * p - q;
        scale = (b1 * p).abs() + q.abs();
        let (a, c) = if k == 0 {
            // Bounded at zero: keep the slope match and drop C.
            (q / (b1 * y.powf(b1)), 0.0)
        } else {
            ((q - b2 * p) / ((b1 - b2) * y.powf(b1)), mismatch / ((b1 - b2) * y.powf(b2)))
        };
        segments.push(Segment {
            a,
            c,
            level,
            y_lo: 0.0,
            y_hi: y,
        });
        upper = y;
    }
    segments.reverse();
    Ok(March {
        segments,
        mismatch,
        scale,
    })
}

/// Dual solution for a step penalty.
#[derive(Debug, Clone, Serialize)]
pub struct MultiFbpSolution {
    pub penalty: StepPenalty,
    /// Segments from the innermost (`y` near 0, `f = 0`) outwards; empty when
    /// every level is zero.
    pub segments: Vec<Segment>,
    /// Free boundaries `y_1 < ... < y_K`, dual to the thresholds.
    pub boundaries: Vec<f64>,
    pub yl: f64,
    /// Relative mismatch in `C_0` left by the shooting.
    pub shooting_residual: f64,
    pub status: &'static str,
    pub constants: MarketConstants,
    pub params: ModelParams,
}

impl MultiFbpSolution {
    pub const STATUS: &'static str = "conjectural: smooth pasting assumed at every threshold";

    /// `true` when every level is zero and any strategy is optimal.
    pub fn is_trivial(&self) -> bool {
        self.segments.is_empty()
    }

    fn shape(&self) -> Shape {
        Shape::new(&self.constants, &self.params)
    }

    /// Segment holding wealth `w`; on a threshold `Side::Left` picks the
    /// segment below it.
    fn segment_for_wealth(&self, w: f64, side: Option<Side>) -> usize {
        let t = &self.penalty.thresholds;
        let below = t.iter().take_while(|&&x| w < x).count();
        if below < t.len() && w == t[below] && side == Some(Side::Left) {
            below + 1
        } else {
            below
        }
    }

    fn segment_for_dual(&self, y: f64, side: Option<Side>) -> usize {
        let b = &self.boundaries;
        let j = b.iter().take_while(|&&x| y > x).count();
        if j < b.len() && y == b[j] && side == Some(Side::Right) {
            j + 1
        } else {
            j
        }
    }

    fn check_dual(&self, y: f64) -> Result<()> {
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

    pub fn mhat(&self, y: f64) -> Result<f64> {
        self.check_dual(y)?;
        if self.is_trivial() {
            return Ok(0.0);
        }
        let s = &self.segments[self.segment_for_dual(y, None)];
        Ok(self.shape().value(s, y))
    }

    pub fn mhat_prime(&self, y: f64) -> Result<f64> {
        self.check_dual(y)?;
        if self.is_trivial() {
            return Ok(self.constants.safe_level);
        }
        let s = &self.segments[self.segment_for_dual(y, None)];
        Ok(self.shape().slope(s, y))
    }

    /// Derivatives at `y > 0`; on a free boundary `side` picks the segment
    /// (left = smaller `y`).
    pub fn mhat_derivs(&self, y: f64, side: Option<Side>) -> Result<DualDerivs> {
        self.check_dual(y)?;
        if y == 0.0 || self.is_trivial() {
            return Err(Error::OutOfDomain {
                what: "dual variable (derivatives)",
                value: y,
                lo: 0.0,
                hi: self.yl,
            });
        }
        if self.boundaries.contains(&y) && side.is_none() {
            return Err(Error::AmbiguousSide {
                what: "penalised mhat''",
                at: y,
            });
        }
        let shape = self.shape();
        let s = &self.segments[self.segment_for_dual(y, side)];
        Ok(DualDerivs {
            first: shape.slope(s, y),
            second: shape.second(s, y),
            third: shape.third(s, y),
        })
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

    /// Dual variable of `w` within segment `j`.
    fn invert_in(&self, j: usize, w: f64) -> Result<f64> {
        let shape = self.shape();
        let s = &self.segments[j];
        if j == 0 {
            return Ok(((w - shape.safe) / (shape.b1 * s.a)).powf(1.0 / (shape.b1 - 1.0)));
        }
        let (at_lo, at_hi) = (shape.slope(s, s.y_lo), shape.slope(s, s.y_hi));
        if w >= at_lo {
            return Ok(s.y_lo);
        }
        if w <= at_hi {
            return Ok(s.y_hi);
        }
        find_root("penalised dual variable", |y| shape.slope(s, y) - w, s.y_lo, s.y_hi, 1e-15 * s.y_hi)
    }

    /// Dual variable `y` with `mhat'(y) = w`, for `w` in `[-L, c/r]`.
    pub fn invert(&self, w: f64) -> Result<f64> {
        self.check_wealth(w)?;
        if self.is_trivial() {
            return Ok(0.0);
        }
        if w == -self.params.ruin_depth {
            return Ok(self.yl);
        }
        if let Some(i) = self.penalty.thresholds.iter().position(|&t| t == w) {
            return Ok(self.boundaries[i]);
        }
        self.invert_in(self.segment_for_wealth(w, None), w)
    }

    /// Minimum expected weighted occupation time with `af` already accrued.
    pub fn value(&self, w: f64, af: f64) -> Result<f64> {
        if !(af >= 0.0 && af.is_finite()) {
            return Err(Error::invalid(format!("accrued penalty must be finite and >= 0, got {af}")));
        }
        if w >= self.constants.safe_level || self.is_trivial() {
            return Ok(af);
        }
        if w <= -self.params.ruin_depth {
            return Ok(af + self.penalty.terminal() / self.params.lambda);
        }
        let y = self.invert(w)?;
        Ok(af + self.mhat(y)? - w * y)
    }

    /// Optimal allocation on `(-L, c/r)`; `side` is required on a threshold.
    pub fn allocation(&self, w: f64, side: Option<Side>) -> Result<f64> {
        let (lo, hi) = (-self.params.ruin_depth, self.constants.safe_level);
        if !(w > lo && w < hi) {
            return Err(Error::OutOfDomain {
                what: "wealth (open interval)",
                value: w,
                lo,
                hi,
            });
        }
        if self.is_trivial() {
            return Ok(0.0);
        }
        if self.penalty.thresholds.contains(&w) && side.is_none() {
            return Err(Error::AmbiguousSide {
                what: "penalised allocation",
                at: w,
            });
        }
        let j = self.segment_for_wealth(w, side);
        let y = self.invert_in(j, w)?;
        Ok(-self.params.merton_ratio() * y * self.shape().second(&self.segments[j], y))
    }

    /// Allocation and its wealth derivative `-k (1 + y mhat''' / mhat'')` in segment `j`.
    fn allocation_slope_in(&self, j: usize, w: f64) -> Result<(f64, f64)> {
        let shape = self.shape();
        let s = &self.segments[j];
        let y = self.invert_in(j, w)?;
        let (m2, m3) = (shape.second(s, y), shape.third(s, y));
        let k = self.params.merton_ratio();
        Ok((-k * y * m2, -k * (1.0 + y * m3 / m2)))
    }

    /// Ordering of the free boundaries and strict concavity of `mhat`.
    fn validate(&self) -> Result<()> {
        let ordered = self.boundaries.windows(2).all(|b| b[0] < b[1]);
        if !ordered || self.boundaries.last().is_some_and(|&b| b >= self.yl) {
            return Err(Error::Shooting("free boundaries are not increasing".into()));
        }
        let shape = self.shape();
        for (j, s) in self.segments.iter().enumerate() {
            for i in 1..=32 {
                let y = s.y_lo + (s.y_hi - s.y_lo) * i as f64 / 32.0;
                let m2 = shape.second(s, y);
                if !(m2 < 0.0) {
                    return Err(Error::Shooting(format!("mhat'' = {m2} >= 0 at y = {y} on segment {j}")));
                }
            }
        }
        Ok(())
    }
}

/// Solves the step-penalty problem by shooting on `yL`.
pub fn solve_penalized(params: &ModelParams, penalty: &StepPenalty) -> Result<MultiFbpSolution> {
    let params = params.validated()?;
    let penalty = penalty.clone().validated()?;
    penalty.check_depth(&params)?;
    let constants = MarketConstants::new(&params);
    let mut sol = MultiFbpSolution {
        penalty: penalty.clone(),
        segments: Vec::new(),
        boundaries: Vec::new(),
        yl: 0.0,
        shooting_residual: 0.0,
        status: MultiFbpSolution::STATUS,
        constants,
        params,
    };
    if penalty.terminal() == 0.0 {
        return Ok(sol);
    }
    let shape = Shape::new(&constants, &params);
    let span = params.wealth_span();
    // A failed march means yL is too small, like a positive mismatch.
    let too_small = |yl: f64| match march(shape, &penalty, span, yl) {
        Ok(m) => m.mismatch > 0.0,
        Err(_) => true,
    };
    // The value is homogeneous in f, so the indicator scaled by f_K is a close start.
    let guess = FbpSolution::solve(&params)?.yl * penalty.terminal();
    let (mut lo, mut hi) = (guess, guess);
    let mut expansions = 0;
    while too_small(hi) {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::Shooting(format!("no yL above {guess} closes the march")));
        }
    }
    while !too_small(lo) {
        lo *= 0.5;
        expansions += 1;
        if expansions > 400 || lo == 0.0 {
            return Err(Error::Shooting(format!("mismatch stays negative for yL down to {lo}")));
        }
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if too_small(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m = march(shape, &penalty, span, hi).map_err(Error::Shooting)?;
    let residual = m.mismatch.abs() / m.scale;
    if residual > 1e-8 {
        return Err(Error::Shooting(format!("mismatch {residual:e} at yL = {hi} (bracket [{lo}, {hi}])")));
    }
    sol.boundaries = m.segments[1..].iter().map(|s| s.y_lo).collect();
    sol.segments = m.segments;
    sol.yl = hi;
    sol.shooting_residual = residual;
    sol.validate()?;
    Ok(sol)
}

/// Interpolation nodes per segment of the penalised rule.
const RULE_NODES: usize = 2048;

/// Optimal penalised allocation as a fast feedback rule for simulation.
#[derive(Debug, Clone)]
pub struct PenalizedRule {
    thresholds: Vec<f64>,
    /// One table per segment below the first threshold.
    tables: Vec<HermiteTable>,
    /// Allocation above the first threshold is this times `c/r - w`.
    inner_slope: f64,
    safe: f64,
}

impl PenalizedRule {
    pub fn new(sol: &MultiFbpSolution) -> Result<Self> {
        let safe = sol.constants.safe_level;
        if sol.is_trivial() {
            return Ok(Self {
                thresholds: Vec::new(),
                tables: Vec::new(),
                inner_slope: 0.0,
                safe,
            });
        }
        let t = &sol.penalty.thresholds;
        let mut tables = Vec::new();
        for j in 1..sol.segments.len() {
            let lo = if j < t.len() { t[j] } else { -sol.params.ruin_depth };
            tables.push(HermiteTable::build(lo, t[j - 1], RULE_NODES, |w| sol.allocation_slope_in(j, w))?);
        }
        Ok(Self {
            thresholds: t.clone(),
            tables,
            inner_slope: sol.params.merton_ratio() * (sol.constants.b1 - 1.0),
            safe,
        })
    }
}

impl FeedbackRule for PenalizedRule {
    fn allocation(&self, w: f64) -> f64 {
        let below = self.thresholds.iter().take_while(|&&t| w < t).count();
        if below == 0 {
            self.inner_slope * (self.safe - w)
        } else {
            self.tables[below - 1].eval(w)
        }
    }
}
