//! Qualitative properties of the optimal allocation and value, as checks.
//!
//! Each check evaluates a claim on a grid and returns a [`PropReport`] with
//! one [`PointCheck`] per evaluation. A point passes when its margin is
//! non-negative; strict inequalities are asserted with a margin of
//! [`STRICT_MARGIN`] so that roundoff cannot pass for strictness.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dual::pi_ruin;
use crate::error::{Error, Result};
use crate::fbp::{FbpSolution, Side};
use crate::model::{MarketConstants, ModelParams};

/// Required excess for strict inequalities, in natural units.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Relative tolerance for equalities between closed-form quantities.
pub const EQUALITY_TOL: f64 = 1e-10;
/// Relative finite-difference step.
pub const REL_STEP: f64 = 1e-4;
const GRID_POINTS: usize = 60;

#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub at: f64,
    pub value: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropReport {
    pub id: String,
    pub claim: String,
    pub params: ModelParams,
    /// Tolerance or strictness margin the points were held to.
    pub tolerance: f64,
    pub points: Vec<PointCheck>,
    /// Smallest margin over all points; negative if any point failed.
    pub worst_margin: f64,
    pub passed: bool,
    pub facts: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
}

impl PropReport {
    fn new(id: &str, claim: &str, params: &ModelParams, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            claim: claim.into(),
            params: *params,
            tolerance,
            points: Vec::new(),
            worst_margin: f64::INFINITY,
            passed: true,
            facts: BTreeMap::new(),
            labels: BTreeMap::new(),
        }
    }

    fn record(&mut self, at: f64, value: f64, margin: f64) {
        let pass = margin >= 0.0;
        self.passed &= pass;
        self.worst_margin = self.worst_margin.min(if margin.is_nan() { f64::NEG_INFINITY } else { margin });
        self.points.push(PointCheck { at, value, margin, pass });
    }

    /// `|err| <= tol`.
    fn within(&mut self, at: f64, err: f64, tol: f64) {
        self.record(at, err, tol - err.abs());
    }

    /// `diff > STRICT_MARGIN`.
    fn strictly_positive(&mut self, at: f64, diff: f64) {
        self.record(at, diff, diff - STRICT_MARGIN);
    }

    /// A point whose quantities could not be evaluated.
    fn failed(&mut self, at: f64, err: &Error) {
        self.record(at, f64::NAN, f64::NEG_INFINITY);
        self.labels.insert(format!("error_at_{at}"), err.to_string());
    }

    fn fact(&mut self, name: &str, value: f64) {
        self.facts.insert(name.into(), value);
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `n` midpoints of equal cells of `(lo, hi)`.
fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

/// The optimal allocation equals the ruin-minimising one above zero and
/// strictly exceeds it below zero; the gap at `0-` is the allocation jump.
pub fn check_pi_comparison(sol: &FbpSolution) -> PropReport {
    let p = &sol.params;
    let k = &sol.constants;
    let mut rep = PropReport::new(
        "allocation_vs_ruin_minimising",
        "pi* = pi_ruin on (0, c/r) and pi* > pi_ruin on (-L, 0)",
        p,
        EQUALITY_TOL,
    );
    for w in midpoints(0.0, k.safe_level, GRID_POINTS) {
        match sol.pi_star(w, None) {
            Ok(pi) => rep.within(w, rel_err(pi, pi_ruin(k, p, w)), EQUALITY_TOL),
            Err(e) => rep.failed(w, &e),
        }
    }
    for w in midpoints(-p.ruin_depth, 0.0, GRID_POINTS) {
        match sol.pi_star(w, None) {
            Ok(pi) => rep.strictly_positive(w, pi - pi_ruin(k, p, w)),
            Err(e) => rep.failed(w, &e),
        }
    }
    let jump = p.merton_ratio() / (k.delta * sol.y0);
    match sol.pi_star(0.0, Some(Side::Left)) {
        Ok(left) => {
            let gap = left - pi_ruin(k, p, 0.0);
            rep.fact("gap_at_zero", gap);
            rep.within(0.0, rel_err(gap, jump), EQUALITY_TOL);
        }
        Err(e) => rep.failed(0.0, &e),
    }
    rep.fact("jump_formula", jump);
    rep
}

/// `B1 (B1 - 1) s^(B1 - B2) + B2 (1 - B2)`; the optimal allocation falls
/// with wealth where this is positive, `s = y / yL`.
pub fn slope_indicator(k: &MarketConstants, s: f64) -> f64 {
    k.b1 * (k.b1 - 1.0) * s.powf(k.b1 - k.b2) + k.b2 * (1.0 - k.b2)
}

/// Numeric sign of `d pi*/dw` on `(-L, 0)` against the closed criterion.
pub fn check_pi_monotone(sol: &FbpSolution) -> PropReport {
    let p = &sol.params;
    let k = &sol.constants;
    let mut rep = PropReport::new(
        "allocation_monotonicity_below_zero",
        "sign(d pi*/dw) = -sign(B1(B1-1)(y/yL)^(B1-B2) + B2(1-B2)) on (-L, 0); \
         decreasing iff B1(B1-1)(y0/yL)^(B1-B2) > -B2(1-B2); increasing if r < lambda",
        p,
        0.0,
    );
    let at_inner = slope_indicator(k, sol.rho);
    let at_outer = slope_indicator(k, 1.0);
    rep.fact("criterion_at_y0", at_inner);
    rep.fact("criterion_at_yL", at_outer);
    let branch = if at_inner > 0.0 {
        "decreasing"
    } else if at_outer < 0.0 {
        "increasing"
    } else {
        "changes_direction"
    };
    rep.labels.insert("branch".into(), branch.into());

    // B1(B1-1) < -B2(1-B2) exactly when r < lambda.
    let ordering = (p.lambda - p.r).signum();
    if ordering == 0.0 {
        rep.within(p.r - p.lambda, at_outer, 1e-12);
    } else {
        rep.record(p.r - p.lambda, at_outer, -ordering * at_outer);
    }
    if p.r < p.lambda && branch != "increasing" {
        rep.record(p.r - p.lambda, at_outer, f64::NEG_INFINITY);
    }

    for w in midpoints(-p.ruin_depth, 0.0, GRID_POINTS) {
        let h = REL_STEP * w.abs();
        let eval = || -> Result<(f64, f64)> {
            let slope = (sol.pi_star(w + h, None)? - sol.pi_star(w - h, None)?) / (2.0 * h);
            Ok((slope, slope_indicator(k, sol.invert(w)? / sol.yl)))
        };
        match eval() {
            Ok((slope, g)) => {
                let expected = -g.signum();
                let margin = if slope.signum() == expected { slope.abs() } else { -slope.abs() };
                rep.record(w, slope, margin);
            }
            Err(e) => rep.failed(w, &e),
        }
    }
    rep
}

/// Allocation non-decreasing and value strictly decreasing along increasing
/// ruin depths, on a common grid inside `(-min L, 0.9 c/r)`.
pub fn check_depth_monotonicity(params: &ModelParams, depths: &[f64]) -> Result<PropReport> {
    if depths.len() < 3 || depths.windows(2).any(|d| d[1] <= d[0]) {
        return Err(Error::invalid("ruin depths must be strictly increasing with at least three entries"));
    }
    let sols = depths
        .iter()
        .map(|&l| FbpSolution::solve(&params.with_depth(l)?))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = PropReport::new(
        "monotone_in_ruin_depth",
        "along increasing L: pi* equal for w > 0, strictly increasing for w < 0; M_L(w, 0) strictly decreasing",
        params,
        STRICT_MARGIN,
    );
    for (i, l) in depths.iter().enumerate() {
        rep.fact(&format!("depth_{i}"), *l);
    }
    let safe = params.safe_level();
    for w in midpoints(-depths[0], 0.9 * safe, GRID_POINTS) {
        let eval = || -> Result<Vec<(f64, f64)>> {
            sols.iter().map(|s| Ok((s.pi_star(w, None)?, s.m(w)?))).collect()
        };
        let rows = match eval() {
            Ok(rows) => rows,
            Err(e) => {
                rep.failed(w, &e);
                continue;
            }
        };
        for pair in rows.windows(2) {
            let ((pi_a, m_a), (pi_b, m_b)) = (pair[0], pair[1]);
            if w > 0.0 {
                rep.within(w, rel_err(pi_b, pi_a), EQUALITY_TOL);
            } else {
                rep.strictly_positive(w, pi_b - pi_a);
            }
            rep.strictly_positive(w, m_a - m_b);
        }
    }
    Ok(rep)
}

/// Large-depth behaviour of the free boundary ratio and the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConstants {
    /// Limit of `y0 / yL` as `L -> inf`.
    pub z: f64,
    /// Limit of `pi*_L(w) / L` as `L -> inf`, the same for every `w < 0`.
    pub slope: f64,
}

pub fn limit_constants(params: &ModelParams) -> LimitConstants {
    let k = MarketConstants::new(params);
    let (b1, b2) = (k.b1, k.b2);
    let z = (-((b1 - 1.0) / b1) * (b2 / (1.0 - b2))).powf(1.0 / (b1 - b2));
    let slope = params.merton_ratio() * (b1 - 1.0) * (1.0 - b2) / (b1 - b2)
        * (b1 * z.powf(b1 - 1.0) - b2 * z.powf(b2 - 1.0));
    LimitConstants { z, slope }
}

/// `pi*_L(w) / L` at two large depths.
///
/// Always checks that the ratio moves toward [`LimitConstants::slope`] from
/// `shallow` to `deep`; with `rel_tol` also that it changes by at most that
/// relative amount.
pub fn check_allocation_growth(
    params: &ModelParams,
    ws: &[f64],
    shallow: f64,
    deep: f64,
    rel_tol: Option<f64>,
) -> Result<PropReport> {
    let lim = limit_constants(params);
    let a = FbpSolution::solve(&params.with_depth(shallow)?)?;
    let b = FbpSolution::solve(&params.with_depth(deep)?)?;
    let mut rep = PropReport::new(
        "allocation_linear_in_depth",
        "pi*_L(w)/L approaches a w-independent positive slope as L grows",
        params,
        rel_tol.unwrap_or(0.0),
    );
    rep.fact("z", lim.z);
    rep.fact("slope", lim.slope);
    rep.fact("depth_shallow", shallow);
    rep.fact("depth_deep", deep);
    rep.labels
        .insert("mode".into(), if rel_tol.is_some() { "threshold" } else { "trend" }.into());
    rep.record(f64::NAN, lim.slope, lim.slope);
    rep.record(f64::NAN, lim.z, lim.z.min(1.0 - lim.z));
    for &w in ws {
        let eval = || -> Result<(f64, f64)> { Ok((a.pi_star(w, None)? / shallow, b.pi_star(w, None)? / deep)) };
        match eval() {
            Ok((ra, rb)) => {
                rep.fact(&format!("ratio_shallow_{w}"), ra);
                rep.fact(&format!("ratio_deep_{w}"), rb);
                rep.record(w, rb, rel_err(ra, lim.slope) - rel_err(rb, lim.slope));
                if let Some(tol) = rel_tol {
                    rep.within(w, rel_err(rb, ra), tol);
                }
            }
            Err(e) => rep.failed(w, &e),
        }
    }
    Ok(rep)
}

/// `M_L(w, 0)` strictly decreasing along `depths`, optionally ending below `bound`.
pub fn check_value_vanishes(params: &ModelParams, w: f64, depths: &[f64], bound: Option<f64>) -> Result<PropReport> {
    let mut rep = PropReport::new(
        "value_vanishes_with_depth",
        "M_L(w, 0) decreases toward zero as L grows",
        params,
        bound.unwrap_or(STRICT_MARGIN),
    );
    rep.labels
        .insert("mode".into(), if bound.is_some() { "threshold" } else { "trend" }.into());
    let mut values = Vec::with_capacity(depths.len());
    for &l in depths {
        let m = FbpSolution::solve(&params.with_depth(l)?)?.m(w)?;
        rep.fact(&format!("value_at_depth_{l}"), m);
        values.push(m);
    }
    for (pair, l) in values.windows(2).zip(&depths[1..]) {
        rep.strictly_positive(*l, pair[0] - pair[1]);
    }
    if let (Some(b), Some(&last)) = (bound, values.last()) {
        rep.record(*depths.last().unwrap(), last, b - last);
    }
    Ok(rep)
}

/// Closed form of `d yL / dL`.
pub fn dyl_dl_closed(sol: &FbpSolution) -> f64 {
    let (b1, b2) = (sol.constants.b1, sol.constants.b2);
    let safe = sol.constants.safe_level;
    let span = safe + sol.params.ruin_depth;
    sol.yl / span * (-1.0 + b2 * safe / ((b1 - 1.0) * safe - b1 * b2 / (sol.params.lambda * sol.y0)))
}

/// `d yL / dL` assembled from `d y0/dL` and `d(y0/yL)/dL` before
/// simplification, with `(y0/yL)^(B1-1)` taken from its `1/y0` identity.
fn dyl_dl_unsimplified(sol: &FbpSolution) -> f64 {
    let (b1, b2) = (sol.constants.b1, sol.constants.b2);
    let safe = sol.constants.safe_level;
    let span = safe + sol.params.ruin_depth;
    let lambda = sol.params.lambda;
    let q = ((b1 - b2) / (b1 * b2) * safe - 1.0 / (lambda * sol.y0)) * b2 / ((1.0 - b2) * span);
    let theta = safe / span;
    let denom = b1 * q - theta;
    sol.y0 * sol.yl * lambda / b2 * q * (b1 * (1.0 - b2) * q - (b1 - b2) * theta) / denom
        + sol.yl * safe / (span * span) / (1.0 - b2) / denom
}

/// Closed-form `d yL/dL` against a central difference, plus the
/// inequality that makes the value decrease in `L`, evaluated at `y = y0`.
pub fn check_dyl_dl(params: &ModelParams) -> Result<PropReport> {
    let depth = params.ruin_depth;
    let h = REL_STEP * depth;
    let sol = FbpSolution::solve(params)?;
    let up = FbpSolution::solve(&params.with_depth(depth + h)?)?;
    let down = FbpSolution::solve(&params.with_depth(depth - h)?)?;
    let numeric = (up.yl - down.yl) / (2.0 * h);
    let closed = dyl_dl_closed(&sol);
    let unsimplified = dyl_dl_unsimplified(&sol);
    let mut rep = PropReport::new(
        "outer_boundary_depth_derivative",
        "closed-form d yL/dL matches central differences; the value-decrease inequality holds at y0",
        params,
        1e-6,
    );
    rep.fact("numeric", numeric);
    rep.fact("closed_form", closed);
    rep.fact("unsimplified", unsimplified);
    rep.labels
        .insert("closed_form_sign".into(), if closed < 0.0 { "negative" } else { "non_negative" }.into());
    rep.within(depth, rel_err(closed, numeric), 1e-6);
    rep.within(depth, rel_err(unsimplified, closed), EQUALITY_TOL);

    let k = &sol.constants;
    let (b1, b2, rho) = (k.b1, k.b2, sol.rho);
    let bracket = -1.0 + b2 * k.safe_level / ((b1 - 1.0) * k.safe_level - b1 * b2 / (params.lambda * sol.y0));
    let master = (b1 - 1.0) * (1.0 - b2) * (rho.powf(b1) - rho.powf(b2)) * bracket
        - ((1.0 - b2) * rho.powf(b1) + (b1 - 1.0) * rho.powf(b2));
    let reduced = -(b1 - b2) / b1 * k.safe_level + b2 / (params.lambda * sol.y0);
    rep.fact("master_inequality_at_y0", master);
    rep.fact("reduced_inequality", reduced);
    rep.strictly_positive(sol.y0, -master);
    rep.strictly_positive(sol.y0, -reduced);
    Ok(rep)
}

/// Every property check for one parameter set, with the large-depth checks
/// in trend mode (no absolute thresholds).
pub fn suite(params: &ModelParams) -> Result<Vec<PropReport>> {
    let sol = FbpSolution::solve(params)?;
    let l = params.ruin_depth;
    Ok(vec![
        check_pi_comparison(&sol),
        check_pi_monotone(&sol),
        check_depth_monotonicity(params, &[0.5 * l, l, 2.0 * l])?,
        check_allocation_growth(params, &[-0.5, -1.0, -2.0], 1e3, 1e4, None)?,
        check_value_vanishes(params, (-1.0_f64).max(-0.5 * l), &[l, 10.0 * l, 100.0 * l], None)?,
        check_dyl_dl(params)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ModelParams {
        ModelParams::new(0.02, 0.06, 0.20, 1.0, 0.04, 10.0).unwrap()
    }

    fn r_above_lambda() -> ModelParams {
        ModelParams::new(0.06, 0.10, 0.20, 1.0, 0.02, 10.0).unwrap()
    }

    #[test]
    fn comparison_holds() {
        for p in [canonical(), r_above_lambda()] {
            let rep = check_pi_comparison(&FbpSolution::solve(&p).unwrap());
            assert!(rep.passed, "{rep:?}");
            assert_eq!(rep.points.len(), 2 * GRID_POINTS + 1);
        }
    }

    #[test]
    fn monotone_branches() {
        let rep = check_pi_monotone(&FbpSolution::solve(&canonical()).unwrap());
        assert!(rep.passed && rep.labels["branch"] == "increasing", "{rep:?}");
        let rep = check_pi_monotone(&FbpSolution::solve(&r_above_lambda()).unwrap());
        assert!(rep.passed && rep.labels["branch"] == "decreasing", "{rep:?}");
        assert!((rep.facts["criterion_at_y0"] - 4.14).abs() < 0.01);
    }

    #[test]
    fn criterion_vanishes_when_rates_match() {
        let p = ModelParams::new(0.04, 0.08, 0.2, 1.0, 0.04, 10.0).unwrap();
        let k = MarketConstants::new(&p);
        assert!((k.b1 * (k.b1 - 1.0) + k.b2 * (1.0 - k.b2)).abs() < 1e-12);
        assert!(check_pi_monotone(&FbpSolution::solve(&p).unwrap()).passed);
    }

    #[test]
    fn depth_monotonicity() {
        let rep = check_depth_monotonicity(&canonical(), &[5.0, 10.0, 20.0]).unwrap();
        assert!(rep.passed, "worst {}", rep.worst_margin);
        assert!(check_depth_monotonicity(&canonical(), &[5.0, 10.0]).is_err());
        assert!(check_depth_monotonicity(&canonical(), &[5.0, 20.0, 10.0]).is_err());
    }

    #[test]
    fn canonical_limit_ratio() {
        let lim = limit_constants(&canonical());
        let expected = (2f64.sqrt() - 1.0).powf(1.0 / 2f64.sqrt());
        assert!((lim.z - expected).abs() < 1e-14);
        assert!(lim.z > 0.0 && lim.z < 1.0 && lim.slope > 0.0);
        // y0/yL approaches z at great depth.
        let sol = FbpSolution::solve(&canonical().with_depth(1e6).unwrap()).unwrap();
        assert!((sol.rho - lim.z).abs() < 1e-3);
    }

    #[test]
    fn allocation_growth_trend() {
        let rep = check_allocation_growth(&canonical(), &[-0.5, -1.0, -2.0], 1e3, 1e4, None).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!((rep.facts["ratio_deep_-1"] - 2.64041).abs() < 1e-4);
    }

    #[test]
    fn value_decreases_with_depth() {
        let rep = check_value_vanishes(&canonical(), -1.0, &[10.0, 100.0, 1000.0], None).unwrap();
        assert!(rep.passed);
        assert!((rep.facts["value_at_depth_1000"] - 0.2953).abs() < 1e-3);
    }

    #[test]
    fn dyl_dl_fixtures() {
        for (p, expected) in [
            (canonical(), -0.0379660831306808),
            (ModelParams::new(0.03, 0.08, 0.25, 1.0, 0.05, 5.0).unwrap(), -0.0596210989093683),
            (r_above_lambda(), -0.104582228427813),
        ] {
            let rep = check_dyl_dl(&p).unwrap();
            assert!(rep.passed, "{rep:?}");
            assert!((rep.facts["closed_form"] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn suite_passes() {
        for p in [canonical(), r_above_lambda()] {
            for rep in suite(&p).unwrap() {
                assert!(rep.passed, "{} failed: {rep:?}", rep.id);
            }
        }
    }
}
