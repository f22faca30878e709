//! Finite-difference policy iteration for the primal HJB equation
//!
//! ```text
//! lambda m = 1{w<0} + (r w - c) m' + min_pi [ (mu - r) pi m' + 0.5 sigma^2 pi^2 m'' ]
//! m(-L) = 1/lambda,  m(c/r) = 0
//! ```
//!
//! This solver never looks at the closed form; it exists to check it.
//! Second derivatives are central. First derivatives are central wherever
//! that keeps both neighbour weights non-negative and upwinded on the sign of
//! the total drift elsewhere, so every policy-evaluation matrix is an
//! M-matrix and policy iteration is monotone.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbp::FbpSolution;
use crate::model::ModelParams;

/// Resolution and stopping rule for [`solve_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Number of interior nodes.
    pub n: usize,
    /// Stop when successive value iterates differ by at most this (sup norm, years).
    pub tol: f64,
    pub max_iters: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            tol: 1e-11,
            max_iters: 500,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::invalid(format!("grid needs at least 100 interior nodes, got {}", self.n)));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid("grid tolerance and iteration cap must be positive"));
        }
        Ok(())
    }

    /// Nodes on `[-L, c/r]`, boundaries included, with a node exactly at zero.
    ///
    /// The `n + 1` cells are split between `[-L, 0]` and `[0, c/r]` in
    /// proportion to their lengths, each part uniform; the two steps differ
    /// only by the rounding of that split.
    pub fn nodes(&self, params: &ModelParams) -> Vec<f64> {
        let (depth, top) = (params.ruin_depth, params.safe_level());
        let cells = self.n + 1;
        let neg = ((cells as f64 * depth / (depth + top)).round() as usize).clamp(1, cells - 1);
        let pos = cells - neg;
        let (h_neg, h_pos) = (depth / neg as f64, top / pos as f64);
        let mut nodes = Vec::with_capacity(cells + 1);
        nodes.extend((0..neg).map(|i| -depth + h_neg * i as f64));
        nodes.push(0.0);
        nodes.extend((1..pos).map(|i| h_pos * i as f64));
        nodes.push(top);
        nodes
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSolution {
    /// Node locations, boundaries included.
    pub nodes: Vec<f64>,
    /// Value at each node; the ends are pinned to `1/lambda` and `0`.
    pub values: Vec<f64>,
    /// Allocation at each node (zero at the two ends).
    pub policies: Vec<f64>,
    pub iterations: usize,
    /// Largest discrete HJB residual at the final iterate.
    pub residual: f64,
    /// Largest pointwise increase of the value between consecutive policy
    /// evaluations with the same zero-node source; zero for a monotone
    /// iteration.
    pub max_increase: f64,
    /// Upper clip applied to the allocation.
    pub pi_cap: f64,
    /// Source value used at the node on zero, where `1{w<0}` jumps.
    pub kink_source: f64,
}

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Tridiagonal {
    /// Positive diagonal, non-positive off-diagonals, strict row diagonal dominance.
    pub fn is_m_matrix(&self) -> bool {
        (0..self.diag.len()).all(|i| {
            self.diag[i] > 0.0
                && self.lower[i] <= 0.0
                && self.upper[i] <= 0.0
                && self.diag[i] > self.lower[i].abs() + self.upper[i].abs()
        })
    }

    /// Thomas algorithm; stable for diagonally dominant systems.
    pub fn solve(&self) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = self.upper[0] / self.diag[0];
        d[0] = self.rhs[0] / self.diag[0];
        for i in 1..n {
            let denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / denom;
            d[i] = (self.rhs[i] - self.lower[i] * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}

/// Local finite-difference data at an interior node.
struct Stencil {
    h_minus: f64,
    h_plus: f64,
    /// `v[i-1] - v[i]`
    down: f64,
    /// `v[i+1] - v[i]`
    up: f64,
}

impl Stencil {
    fn at(nodes: &[f64], values: &[f64], i: usize) -> Self {
        Self {
            h_minus: nodes[i] - nodes[i - 1],
            h_plus: nodes[i + 1] - nodes[i],
            down: values[i - 1] - values[i],
            up: values[i + 1] - values[i],
        }
    }

    fn second(&self) -> f64 {
        2.0 * (self.down / self.h_minus + self.up / self.h_plus) / (self.h_minus + self.h_plus)
    }
}

struct Coefficients<'a> {
    params: &'a ModelParams,
}

impl Coefficients<'_> {
    fn drift(&self, w: f64, pi: f64) -> f64 {
        let p = self.params;
        p.r * w - p.c + (p.mu - p.r) * pi
    }

    fn diffusion(&self, pi: f64) -> f64 {
        0.5 * self.params.sigma * self.params.sigma * pi * pi
    }

    /// Transition weights towards the lower and upper neighbour.
    ///
    /// Central first differences when both weights stay non-negative,
    /// upwind on the sign of the drift otherwise.
    fn weights(&self, w: f64, pi: f64, h_minus: f64, h_plus: f64) -> (f64, f64) {
        let a = self.diffusion(pi);
        let b = self.drift(w, pi);
        let span = h_minus + h_plus;
        let (dl, du) = (2.0 * a / (h_minus * span), 2.0 * a / (h_plus * span));
        let (cl, cu) = (dl - b / span, du + b / span);
        if cl >= 0.0 && cu >= 0.0 {
            (cl, cu)
        } else if b >= 0.0 {
            (dl, du + b / h_plus)
        } else {
            (dl - b / h_minus, du)
        }
    }

    /// Discrete generator applied to the current values, for allocation `pi`.
    fn generator(&self, w: f64, pi: f64, s: &Stencil) -> f64 {
        let (lo, hi) = self.weights(w, pi, s.h_minus, s.h_plus);
        lo * s.down + hi * s.up
    }

    /// Allocation in `[0, cap]` minimising the discrete generator.
    ///
    /// The generator is quadratic in `pi` between the points where the
    /// drift changes sign or the stencil switches between central and
    /// upwind, so its minimum is at one of those points, at a vertex, or at
    /// an end of `[0, cap]`.
    fn improve(&self, w: f64, s: &Stencil, cap: f64) -> f64 {
        let p = self.params;
        let excess = p.mu - p.r;
        let sig2 = p.sigma * p.sigma;
        let base = p.r * w - p.c;
        let mut candidates = vec![0.0, cap, -base / excess];
        // sig2 pi^2 / h -/+ (excess pi + base) = 0
        for (h, sign) in [(s.h_minus, -1.0), (s.h_plus, 1.0)] {
            let (qa, qb, qc) = (sig2 / h, sign * excess, sign * base);
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let root = disc.sqrt();
                candidates.push((-qb + root) / (2.0 * qa));
                candidates.push((-qb - root) / (2.0 * qa));
            }
        }
        let second = s.second();
        if second > 0.0 {
            let span = s.h_minus + s.h_plus;
            for slope in [(s.up - s.down) / span, s.up / s.h_plus, -s.down / s.h_minus] {
                candidates.push(-excess * slope / (sig2 * second));
            }
        }
        let mut best = (0.0, self.generator(w, 0.0, s));
        for pi in candidates {
            if !(pi > 0.0 && pi <= cap) {
                continue;
            }
            let v = self.generator(w, pi, s);
            if v < best.1 {
                best = (pi, v);
            }
        }
        best.0
    }
}

const KINK_TOL: f64 = 1e-9;

/// Right-hand side `1{w<0}` at node `i`, with `kink` standing in at the node
/// on zero where the indicator jumps.
fn source(nodes: &[f64], i: usize, kink: f64) -> f64 {
    let w = nodes[i];
    if w < 0.0 {
        1.0
    } else if w > 0.0 {
        0.0
    } else {
        kink
    }
}

/// Source weight at the zero node consistent with the optimised equation.
///
/// The value is `C^1` at zero while its curvature jumps from `M-` to `M+`.
/// With the Hamiltonian `(r w - c) m' - delta m'^2 / M`, the two one-sided
/// equations and the central stencil (which sees the mean curvature `M`)
/// agree to first order when the indicator is replaced by
/// `(1/M - 1/M+) / (1/M- - 1/M+)`. `M-` and `M+` come from one-sided second
/// differences of the current iterate; the cell average of the indicator is
/// used until they are usable.
pub fn kink_weight(nodes: &[f64], values: &[f64]) -> f64 {
    let cell_average = |i: usize| {
        let (h_minus, h_plus) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        h_minus / (h_minus + h_plus)
    };
    let Some(i) = nodes.iter().position(|&w| w == 0.0) else {
        return 0.5;
    };
    if i < 2 || i + 2 >= nodes.len() {
        return cell_average(i);
    }
    let (h_minus, h_plus) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
    let left = (values[i] - 2.0 * values[i - 1] + values[i - 2]) / (h_minus * h_minus);
    let right = (values[i + 2] - 2.0 * values[i + 1] + values[i]) / (h_plus * h_plus);
    let weight = (2.0 / (left + right) - 1.0 / right) / (1.0 / left - 1.0 / right);
    if left > 0.0 && right > 0.0 && weight.is_finite() {
        weight.clamp(0.0, 1.0)
    } else {
        cell_average(i)
    }
}

/// Assembles the policy-evaluation system on the interior nodes; `kink` is
/// the source value used at the node on zero.
pub fn assemble(params: &ModelParams, nodes: &[f64], policies: &[f64], kink: f64) -> Tridiagonal {
    let coef = Coefficients { params };
    let n = nodes.len() - 2;
    let mut sys = Tridiagonal {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
        rhs: vec![0.0; n],
    };
    let top_value = 0.0;
    let bottom_value = 1.0 / params.lambda;
    for row in 0..n {
        let i = row + 1;
        let w = nodes[i];
        let (to_lower, to_upper) = coef.weights(w, policies[i], w - nodes[i - 1], nodes[i + 1] - w);
        sys.diag[row] = params.lambda + to_lower + to_upper;
        sys.lower[row] = -to_lower;
        sys.upper[row] = -to_upper;
        sys.rhs[row] = source(nodes, i, kink);
        if row == 0 {
            sys.rhs[row] += to_lower * bottom_value;
        }
        if row == n - 1 {
            sys.rhs[row] += to_upper * top_value;
        }
    }
    sys
}

fn evaluate(params: &ModelParams, nodes: &[f64], policies: &[f64], kink: f64) -> Vec<f64> {
    let interior = assemble(params, nodes, policies, kink).solve();
    let mut values = Vec::with_capacity(nodes.len());
    values.push(1.0 / params.lambda);
    values.extend(interior);
    values.push(0.0);
    values
}

/// `50 (mu - r)/sigma^2 (c/r + L)`: scales with the ruin depth like the optimum does.
pub fn allocation_cap(params: &ModelParams) -> f64 {
    50.0 * params.merton_ratio() * params.wealth_span()
}

fn discrete_residual(params: &ModelParams, nodes: &[f64], values: &[f64], cap: f64, kink: f64) -> f64 {
    let coef = Coefficients { params };
    (1..nodes.len() - 1)
        .map(|i| {
            let s = Stencil::at(nodes, values, i);
            let w = nodes[i];
            let best = coef.generator(w, coef.improve(w, &s, cap), &s);
            (params.lambda * values[i] - source(nodes, i, kink) - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Value of a fixed feedback rule: one policy evaluation, no improvement.
pub fn evaluate_policy(params: &ModelParams, spec: &GridSpec, rule: impl Fn(f64) -> f64) -> Result<GridSolution> {
    spec.validate()?;
    let nodes = spec.nodes(params);
    let last = nodes.len() - 1;
    let policies: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &w)| if i == 0 || i == last { 0.0 } else { rule(w) })
        .collect();
    let zero = nodes.iter().position(|&w| w == 0.0).unwrap_or(1);
    let kink = (nodes[zero] - nodes[zero - 1]) / (nodes[zero + 1] - nodes[zero - 1]);
    let values = evaluate(params, &nodes, &policies, kink);
    let cap = allocation_cap(params);
    Ok(GridSolution {
        residual: discrete_residual(params, &nodes, &values, cap, kink),
        kink_source: kink,
        nodes,
        values,
        policies,
        iterations: 1,
        max_increase: 0.0,
        pi_cap: cap,
    })
}

/// Solves the HJB equation by policy iteration.
///
/// Policy iteration runs to convergence with the zero-node source frozen;
/// the source is then re-estimated (see [`kink_weight`]) and the iteration
/// restarts from the current policy until the source settles. Starts from the linear interpolation of the boundary values with the
/// ruin-minimising allocation as the incumbent policy. The improvement step
/// minimises the discrete generator exactly over `[0, cap]`; away from stencil
/// switches this is the clipped `-(mu - r)/sigma^2 m'/m''` whenever the
/// second difference is positive.
pub fn solve_grid(params: &ModelParams, spec: &GridSpec) -> Result<GridSolution> {
    spec.validate()?;
    let nodes = spec.nodes(params);
    let last = nodes.len() - 1;
    let (bottom, top) = (nodes[0], nodes[last]);
    let cap = allocation_cap(params);
    let coef = Coefficients { params };

    let mut values: Vec<f64> = nodes
        .iter()
        .map(|&w| (top - w) / (top - bottom) / params.lambda)
        .collect();
    let k = crate::model::MarketConstants::new(params);
    let mut policies: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if i == 0 || i == last {
                0.0
            } else {
                crate::dual::pi_ruin(&k, params, w).clamp(0.0, cap)
            }
        })
        .collect();

    let mut kink = kink_weight(&nodes, &values);
    let mut max_increase: f64 = 0.0;
    let mut change = f64::INFINITY;
    let mut fresh_stage = true;
    for iteration in 1..=spec.max_iters {
        let next = evaluate(params, &nodes, &policies, kink);
        change = next.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !fresh_stage {
            let up = next.iter().zip(&values).map(|(a, b)| a - b).fold(0.0, f64::max);
            max_increase = max_increase.max(up);
        }
        values = next;
        fresh_stage = false;
        if change <= spec.tol {
            let updated = kink_weight(&nodes, &values);
            if (updated - kink).abs() <= KINK_TOL {
                return Ok(GridSolution {
                    residual: discrete_residual(params, &nodes, &values, cap, kink),
                    kink_source: kink,
                    nodes,
                    values,
                    policies,
                    iterations: iteration,
                    max_increase,
                    pi_cap: cap,
                });
            }
            kink = updated;
            fresh_stage = true;
            continue;
        }
        for i in 1..last {
            let s = Stencil::at(&nodes, &values, i);
            let w = nodes[i];
            let pi = coef.improve(w, &s, cap);
            // Only move on strict improvement, so ties cannot cycle.
            if coef.generator(w, pi, &s) < coef.generator(w, policies[i], &s) {
                policies[i] = pi;
            }
        }
    }
    Err(Error::NoConvergence {
        what: "policy iteration",
        iterations: spec.max_iters,
        residual: change,
    })
}

/// Largest `|grid value - closed-form value|` over the nodes, in years.
pub fn max_error(sol: &FbpSolution, grid: &GridSolution) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (&w, &v) in grid.nodes.iter().zip(&grid.values) {
        worst = worst.max((v - sol.m(w)?).abs());
    }
    Ok(worst)
}

/// Closed-form HJB residual over a set of wealth points.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub max_abs: f64,
    /// Residual divided by the sum of the absolute values of its terms.
    pub max_rel: f64,
    /// Wealth points at which the closed form could not be evaluated.
    pub failures: Vec<f64>,
}

/// Evaluates `lambda m - 1{w<0} - (r w - c) m' + delta m'^2 / m''` on `ws`,
/// skipping `w = 0`.
pub fn residual_of_closed_form(sol: &FbpSolution, ws: &[f64]) -> ResidualReport {
    let p = &sol.params;
    let delta = sol.constants.delta;
    let mut report = ResidualReport {
        points: 0,
        max_abs: 0.0,
        max_rel: 0.0,
        failures: Vec::new(),
    };
    for &w in ws.iter().filter(|&&w| w != 0.0) {
        report.points += 1;
        let evaluated = sol.m(w).and_then(|m| sol.m_derivs(w, None).map(|d| (m, d)));
        let Ok((m, [m1, m2, _])) = evaluated else {
            report.failures.push(w);
            continue;
        };
        let terms = [
            p.lambda * m,
            if w < 0.0 { -1.0 } else { 0.0 },
            -(p.r * w - p.c) * m1,
            delta * m1 * m1 / m2,
        ];
        let res: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        if !res.is_finite() {
            report.failures.push(w);
            continue;
        }
        report.max_abs = report.max_abs.max(res.abs());
        report.max_rel = report.max_rel.max(res.abs() / scale.max(f64::MIN_POSITIVE));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ModelParams {
        ModelParams::new(0.02, 0.06, 0.20, 1.0, 0.04, 10.0).unwrap()
    }

    #[test]
    fn nodes_include_zero_and_ends() {
        let p = canonical();
        for n in [100, 257, 4000] {
            let nodes = GridSpec::new(n).nodes(&p);
            assert_eq!(nodes.len(), n + 2);
            assert_eq!(nodes[0], -10.0);
            assert_eq!(*nodes.last().unwrap(), 50.0);
            assert!(nodes.contains(&0.0));
            assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(solve_grid(&canonical(), &GridSpec::new(50)).is_err());
    }

    #[test]
    fn boundary_values_are_pinned() {
        let g = solve_grid(&canonical(), &GridSpec::new(400)).unwrap();
        assert_eq!(g.values[0], 25.0);
        assert_eq!(*g.values.last().unwrap(), 0.0);
        assert!(g.values.iter().all(|&v| (0.0..=25.0).contains(&v)));
    }

    #[test]
    fn thomas_solves_small_system() {
        let sys = Tridiagonal {
            lower: vec![0.0, -1.0, -1.0],
            diag: vec![4.0, 4.0, 4.0],
            upper: vec![-1.0, -1.0, 0.0],
            rhs: vec![2.0, 4.0, 10.0],
        };
        let x = sys.solve();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14 && (x[2] - 3.0).abs() < 1e-14);
        assert!(sys.is_m_matrix());
    }

    #[test]
    fn every_policy_matrix_is_m_matrix() {
        let p = canonical();
        let nodes = GridSpec::new(300).nodes(&p);
        let cap = allocation_cap(&p);
        for rule in [0.0, 1.0, 0.5 * cap, cap] {
            let policies = vec![rule; nodes.len()];
            assert!(assemble(&p, &nodes, &policies, 0.5).is_m_matrix());
        }
        let g = solve_grid(&p, &GridSpec::new(300)).unwrap();
        assert!(assemble(&p, &g.nodes, &g.policies, g.kink_source).is_m_matrix());
    }

    #[test]
    fn policy_iteration_is_monotone() {
        let g = solve_grid(&canonical(), &GridSpec::new(1000)).unwrap();
        assert!(g.max_increase <= 1e-9, "increase {}", g.max_increase);
        assert!(g.residual < 1e-8, "residual {}", g.residual);
        assert!(g.kink_source > 0.0 && g.kink_source < 1.0);
    }

    #[test]
    fn matches_closed_form_at_4000() {
        let p = canonical();
        let sol = FbpSolution::solve(&p).unwrap();
        let g = solve_grid(&p, &GridSpec::new(4000)).unwrap();
        let err = max_error(&sol, &g).unwrap();
        assert!(err <= 1e-4, "error {err}");
    }

    #[test]
    fn second_set_matches_closed_form() {
        let p = ModelParams::new(0.03, 0.08, 0.25, 1.0, 0.05, 5.0).unwrap();
        let sol = FbpSolution::solve(&p).unwrap();
        let g = solve_grid(&p, &GridSpec::new(2000)).unwrap();
        assert!(max_error(&sol, &g).unwrap() <= 1e-4);
        let ws: Vec<f64> = (0..400).map(|i| -5.0 + i as f64 * (5.0 + 100.0 / 3.0) / 400.0).collect();
        let r = residual_of_closed_form(&sol, &ws);
        assert!(r.failures.is_empty() && r.max_rel <= 1e-8, "{r:?}");
    }

    #[test]
    fn halving_step_shrinks_error() {
        // 600, 1200, 2400, 4800 cells: both parts of the grid halve exactly.
        let p = canonical();
        let sol = FbpSolution::solve(&p).unwrap();
        let errs: Vec<f64> = [599, 1199, 2399, 4799]
            .iter()
            .map(|&n| max_error(&sol, &solve_grid(&p, &GridSpec::new(n)).unwrap()).unwrap())
            .collect();
        for pair in errs.windows(2) {
            assert!(pair[0] / pair[1] >= 1.7, "{errs:?}");
        }
    }

    #[test]
    fn kink_weight_falls_back_on_flat_values() {
        let p = canonical();
        let nodes = GridSpec::new(599).nodes(&p);
        let linear: Vec<f64> = nodes.iter().map(|w| 50.0 - w).collect();
        assert!((kink_weight(&nodes, &linear) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_form_residual_canonical() {
        let sol = FbpSolution::solve(&canonical()).unwrap();
        let ws: Vec<f64> = (0..600).map(|i| -10.0 + i as f64 * 0.1).collect();
        let r = residual_of_closed_form(&sol, &ws);
        assert_eq!(r.points, 599);
        assert!(r.failures.is_empty() && r.max_rel <= 1e-8, "{r:?}");
    }

    #[test]
    fn no_trading_value_dominates_optimum() {
        let p = canonical();
        let sol = FbpSolution::solve(&p).unwrap();
        let g = evaluate_policy(&p, &GridSpec::new(1200), |_| 0.0).unwrap();
        for (&w, &v) in g.nodes.iter().zip(&g.values) {
            assert!(v >= sol.m(w).unwrap() - 1e-9, "w = {w}");
        }
        // Without trading, negative wealth can never recover.
        let i = g.nodes.iter().position(|&w| w == 0.0).unwrap();
        assert!((g.values[i - 1] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_residual_jumps_by_indicator() {
        let sol = FbpSolution::solve(&canonical()).unwrap();
        let r = residual_of_closed_form(&sol, &[-1e-7, 1e-7]);
        assert!(r.failures.is_empty() && r.max_rel < 1e-8);
        // Same m-terms on both sides; only the indicator differs.
        let p = sol.params;
        let m = sol.m(0.0).unwrap();
        let [m1, ..] = sol.m_derivs(0.0, Some(Side::Left)).unwrap();
        let left2 = sol.m_derivs(0.0, Some(Side::Left)).unwrap()[1];
        let right2 = sol.m_derivs(0.0, Some(Side::Right)).unwrap()[1];
        let core = |m2: f64| p.lambda * m + p.c * m1 + sol.constants.delta * m1 * m1 / m2;
        assert!((core(left2) - 1.0).abs() < 1e-8);
        assert!(core(right2).abs() < 1e-8);
    }

    use crate::fbp::Side;
}
