//! The five commands. Each returns the artifact text and whether every
//! check it ran passed.

use std::fmt::Write as _;

use occupation_core::hjb::{self, GridSpec};
use occupation_core::penalty::solve_penalized;
use occupation_core::sim::{self, RunningCost};
use occupation_core::{
    props, FbpSolution, ModelParams, MultiFbpSolution, PenalizedRule, PropReport, SimConfig, SimEstimate, Side,
    StepPenalty, Strategy,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

/// Grid size of the finite-difference comparison in `verify`.
pub const HJB_NODES: usize = 4000;
/// Largest accepted gap between the grid and closed-form values, in years.
pub const HJB_TOL: f64 = 1e-4;
/// Interior points at which the closed form is substituted into the HJB equation.
pub const RESIDUAL_POINTS: usize = 2000;
/// Largest accepted relative HJB residual of the closed form.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Allowance for time-discretisation bias in Monte Carlo comparisons, in years.
pub const MC_BIAS: f64 = 0.05;
/// Standard errors allowed in Monte Carlo comparisons.
pub const MC_SIGMAS: f64 = 3.0;
/// Tolerance of the indicator reduction and of the scaling check.
pub const REDUCTION_TOL: f64 = 1e-9;
pub const SCALING_TOL: f64 = 1e-10;

pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

impl Outcome {
    fn json(value: &impl Serialize, passed: bool) -> Result<Self, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        Ok(Self { text, passed })
    }

    fn csv(text: String) -> Self {
        Self { text, passed: true }
    }
}

/// Fault injection for `verify`: the closed form is checked with `y0` scaled.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks {
    pub corrupt_y0: Option<f64>,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    // Adding zero turns -0 into +0.
    format!("{:.16e}", x + 0.0)
}

fn penalty_summary(msol: &MultiFbpSolution) -> Value {
    json!({
        "status": MultiFbpSolution::STATUS,
        "penalty": msol.penalty,
        "yL": msol.yl,
        "boundaries": msol.boundaries,
        "segments": msol.segments,
        "shooting_residual": msol.shooting_residual,
    })
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sol = FbpSolution::solve(&cfg.params)?;
    let k = &sol.constants;
    let mut out = json!({
        "delta": k.delta,
        "B1": k.b1,
        "B2": k.b2,
        "p": k.p,
        "rho": sol.rho,
        "y0": sol.y0,
        "yL": sol.yl,
        "beta_L": sol.beta().beta,
        "safe_level": k.safe_level,
        "inputs": { "params": cfg.params },
    });
    if let Some(f) = &cfg.penalty {
        out["inputs"]["penalty"] = json!(f);
        out["penalized"] = penalty_summary(&solve_penalized(&cfg.params, f)?);
    }
    Outcome::json(&out, true)
}

pub fn curve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let sol = FbpSolution::solve(&cfg.params)?;
    grid.check(-cfg.params.ruin_depth, sol.constants.safe_level)?;
    let mut text = String::from("w,y,M_L,m1,m2_left,m2_right,pi_star,pi_ruin\n");
    for w in grid.points() {
        let right = sol.value_point(w, Some(Side::Right))?;
        let left = if w == 0.0 { sol.value_point(w, Some(Side::Left))?.m2 } else { right.m2 };
        let cols = [w, right.y, right.m, right.m1, left, right.m2, right.pi_star, right.pi_ruin];
        let row: Vec<String> = cols.iter().map(|&x| num(x)).collect();
        writeln!(text, "{}", row.join(",")).expect("write to String");
    }
    Ok(Outcome::csv(text))
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let depths = cfg.sweep_l()?;
    let shallowest = depths.iter().copied().fold(f64::INFINITY, f64::min);
    grid.check(-shallowest, cfg.params.safe_level())?;
    let mut text = String::from("L,w,M_L,pi_star,pi_star_over_L\n");
    for &l in depths {
        let sol = FbpSolution::solve(&cfg.params.with_depth(l)?)?;
        for w in grid.points() {
            let pt = sol.value_point(w, Some(Side::Right))?;
            let row = [l, w, pt.m, pt.pi_star, pt.pi_star / l];
            let row: Vec<String> = row.iter().map(|&x| num(x)).collect();
            writeln!(text, "{}", row.join(",")).expect("write to String");
        }
    }
    Ok(Outcome::csv(text))
}

#[derive(Serialize)]
struct StrategyRow {
    strategy: String,
    estimate: SimEstimate,
    /// `mean - closed form`.
    gap: f64,
    /// `3 stderr + bias allowance`.
    allowance: f64,
    /// Optimal: `|gap| <= allowance`. Others: `gap >= -allowance`.
    consistent: bool,
}

fn strategy_row(label: String, estimate: SimEstimate, exact: f64, optimal: bool) -> StrategyRow {
    let gap = estimate.mean - exact;
    let allowance = MC_SIGMAS * estimate.stderr + MC_BIAS;
    let consistent = if optimal { gap.abs() <= allowance } else { gap >= -allowance };
    StrategyRow {
        strategy: label,
        estimate,
        gap,
        allowance,
        consistent,
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sc = cfg.sim()?;
    let params = cfg.params;
    let sol = FbpSolution::solve(&params)?;
    let exact = sol.value(sc.w0, sc.a0)?;
    let strategies = cfg
        .strategies
        .clone()
        .unwrap_or_else(|| vec![Strategy::Optimal, Strategy::RuinMin, Strategy::Zero]);
    let mut rows = Vec::new();
    for (s, est) in sim::compare(&sol, &strategies, &sc)? {
        rows.push(strategy_row(s.label(), est, exact, s == Strategy::Optimal));
    }
    let mut passed = rows.iter().all(|r| r.consistent);
    let mut out = json!({
        "params": params,
        "sim": SimConfig { t_max: Some(sc.horizon(&params)), ..sc },
        "closed_form": { "w0": sc.w0, "a0": sc.a0, "value": exact },
        "strategies": rows,
    });
    if let Some(f) = &cfg.penalty {
        let msol = solve_penalized(&params, f)?;
        let exact = msol.value(sc.w0, sc.a0)?;
        let est = sim::simulate_rule(&params, &PenalizedRule::new(&msol)?, &RunningCost::Step(f.clone()), &sc)?;
        let row = strategy_row("penalized_optimal".into(), est, exact, true);
        passed &= row.consistent;
        out["penalized"] = json!({
            "status": MultiFbpSolution::STATUS,
            "penalty": f,
            "closed_form": exact,
            "result": row,
        });
    }
    out["passed"] = json!(passed);
    Outcome::json(&out, passed)
}

#[derive(Serialize)]
struct Check {
    id: String,
    passed: bool,
    detail: Value,
}

fn residual_points(params: &ModelParams) -> Vec<f64> {
    let (lo, hi) = (-params.ruin_depth, params.safe_level());
    let n = RESIDUAL_POINTS;
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

fn penalty_checks(params: &ModelParams, f: &StepPenalty) -> Result<Vec<Check>, CliError> {
    let base = FbpSolution::solve(params)?;
    let ind = solve_penalized(params, &StepPenalty::indicator())?;
    let ws = residual_points(params);
    let worst_reduction = ws
        .iter()
        .filter(|&&w| w != 0.0)
        .map(|&w| {
            let (a, b) = (ind.value(w, 0.0)?, base.m(w)?);
            Ok((a - b).abs() / b.abs().max(1.0))
        })
        .collect::<Result<Vec<f64>, CliError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let boundary_gap = [
        (ind.yl - base.yl).abs() / base.yl,
        (ind.boundaries[0] - base.y0).abs() / base.y0,
    ]
    .into_iter()
    .fold(worst_reduction, f64::max);

    let one = solve_penalized(params, f)?;
    let twice = solve_penalized(params, &f.scaled(2.0)?)?;
    let mut worst_scaling: f64 = 0.0;
    for &w in &ws {
        let (a, b) = (twice.value(w, 0.0)?, 2.0 * one.value(w, 0.0)?);
        worst_scaling = worst_scaling.max((a - b).abs() / b.abs().max(1.0));
    }
    Ok(vec![
        Check {
            id: "penalty_indicator_reduction".into(),
            passed: boundary_gap <= REDUCTION_TOL,
            detail: json!({ "max_rel_error": boundary_gap, "tolerance": REDUCTION_TOL }),
        },
        Check {
            id: "penalty_scaling".into(),
            passed: worst_scaling <= SCALING_TOL,
            detail: json!({
                "status": MultiFbpSolution::STATUS,
                "factor": 2.0,
                "max_rel_error": worst_scaling,
                "tolerance": SCALING_TOL,
            }),
        },
    ])
}

pub fn verify(cfg: &RunConfig, hooks: Hooks) -> Result<Outcome, CliError> {
    let params = cfg.params;
    let mut sol = FbpSolution::solve(&params)?;
    if let Some(factor) = hooks.corrupt_y0 {
        sol = sol.with_scaled_y0(factor);
    }
    let reports: Vec<PropReport> = props::suite(&params)?;
    let mut checks: Vec<Check> = reports
        .iter()
        .map(|r| Check {
            id: r.id.clone(),
            passed: r.passed,
            detail: json!({ "worst_margin": r.worst_margin, "tolerance": r.tolerance, "labels": r.labels }),
        })
        .collect();

    let res = hjb::residual_of_closed_form(&sol, &residual_points(&params));
    checks.push(Check {
        id: "hjb_residual".into(),
        passed: res.failures.is_empty() && res.max_rel <= RESIDUAL_TOL,
        detail: json!({ "report": res, "tolerance": RESIDUAL_TOL }),
    });

    let grid = hjb::solve_grid(&params, &GridSpec::new(HJB_NODES))?;
    let err = hjb::max_error(&sol, &grid).unwrap_or(f64::INFINITY);
    checks.push(Check {
        id: "hjb_oracle".into(),
        passed: err <= HJB_TOL,
        detail: json!({
            "nodes": HJB_NODES,
            "max_error": err,
            "tolerance": HJB_TOL,
            "iterations": grid.iterations,
            "discrete_residual": grid.residual,
            "max_increase": grid.max_increase,
        }),
    });

    if let Some(f) = &cfg.penalty {
        checks.extend(penalty_checks(&params, f)?);
    }

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
    let passed = failed.is_empty();
    let out = json!({
        "params": params,
        "passed": passed,
        "failed": failed,
        "checks": checks,
        "properties": reports,
    });
    Outcome::json(&out, passed)
}
