//! Monte Carlo estimate of the expected occupation-time payoff.
//!
//! Each path draws an exponential death time, then runs explicit
//! Euler–Maruyama on
//!
//! ```text
//! dW = (r W + (mu - r) pi(W) - c) dt + sigma pi(W) dB
//! ```
//!
//! accruing `f(W) dt` at the left end point of every step. A path stops at
//! death (payoff `A`), at `c/r` (payoff `A`, wealth stays safe from then on)
//! or at `-L` (payoff `A + f(-L)/lambda`, the expected remaining lifetime).
//!
//! Path `i` uses its own ChaCha8 stream `i` under the root seed, so results
//! do not depend on batching or thread count, and batches are merged in
//! index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::pi_ruin;
use crate::error::{Error, Result};
use crate::fbp::{FbpSolution, Side};
use crate::interp::HermiteTable;
use crate::model::{MarketConstants, ModelParams};
use crate::penalty::StepPenalty;

const BATCH: usize = 1024;
/// Nodes of the interpolation table for the optimal rule on `[-L, 0]`.
const TABLE_NODES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub w0: f64,
    #[serde(default)]
    pub a0: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Hard cap on simulated years; defaults to `20 / lambda`.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub crossing: Crossing,
}

/// How absorption at `-L` and `c/r` is detected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// Only the end point of each step is compared with the barriers.
    PostStep,
    /// Also kills the step with the probability that a Brownian bridge
    /// between its end points touched a barrier.
    #[default]
    Bridge,
}

impl SimConfig {
    pub fn new(w0: f64, dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            w0,
            a0: 0.0,
            dt,
            n_paths,
            seed,
            t_max: None,
            crossing: Crossing::default(),
        }
    }

    pub fn horizon(&self, params: &ModelParams) -> f64 {
        self.t_max.unwrap_or(20.0 / params.lambda)
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !self.w0.is_finite() {
            return Err(Error::invalid("initial wealth must be finite"));
        }
        if !(self.a0 >= 0.0 && self.a0.is_finite()) {
            return Err(Error::invalid(format!("a0 must be finite and >= 0, got {}", self.a0)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be at least 1"));
        }
        let t_max = self.horizon(params);
        if !(t_max >= 10.0 / params.lambda) || !t_max.is_finite() {
            return Err(Error::invalid(format!(
                "t_max must be finite and at least 10/lambda = {}, got {t_max}",
                10.0 / params.lambda
            )));
        }
        Ok(())
    }
}

/// A risky allocation that depends on current wealth only.
pub trait FeedbackRule: Sync {
    fn allocation(&self, w: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> FeedbackRule for F {
    fn allocation(&self, w: f64) -> f64 {
        self(w)
    }
}

/// Built-in strategies. Serialised as `"optimal"`, `"ruin_min"`, `"zero"`
/// or `{"constant": k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Optimal,
    RuinMin,
    Constant(f64),
    Zero,
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Optimal => "optimal".into(),
            Strategy::RuinMin => "ruin_min".into(),
            Strategy::Constant(k) => format!("constant({k})"),
            Strategy::Zero => "zero".into(),
        }
    }
}

/// The optimal feedback rule, tabulated on `[-L, 0]` and exact on `[0, c/r]`.
#[derive(Debug, Clone)]
pub struct OptimalRule {
    negative: HermiteTable,
    ruin: LinearRule,
}

impl OptimalRule {
    pub fn new(sol: &FbpSolution) -> Result<Self> {
        let depth = sol.params.ruin_depth;
        let negative = HermiteTable::build(-depth, 0.0, TABLE_NODES, |w| {
            let side = if w == 0.0 { Some(Side::Left) } else { None };
            Ok::<_, Error>((sol.allocation(w, side)?, sol.pi_star_slope_negative(w)?))
        })?;
        Ok(Self {
            negative,
            ruin: LinearRule::ruin_min(&sol.params),
        })
    }
}

impl FeedbackRule for OptimalRule {
    fn allocation(&self, w: f64) -> f64 {
        if w < 0.0 {
            self.negative.eval(w)
        } else {
            self.ruin.allocation(w)
        }
    }
}

/// `slope * (safe - w)`, floored at zero; covers ruin-minimising, constant and zero rules.
#[derive(Debug, Clone, Copy)]
struct LinearRule {
    slope: f64,
    safe: f64,
    constant: f64,
}

impl LinearRule {
    fn ruin_min(params: &ModelParams) -> Self {
        let k = MarketConstants::new(params);
        Self {
            slope: pi_ruin(&k, params, 0.0) / k.safe_level,
            safe: k.safe_level,
            constant: 0.0,
        }
    }

    fn constant(value: f64) -> Self {
        Self {
            slope: 0.0,
            safe: 0.0,
            constant: value,
        }
    }
}

impl FeedbackRule for LinearRule {
    fn allocation(&self, w: f64) -> f64 {
        self.constant + self.slope * (self.safe - w)
    }
}

enum BuiltinRule {
    Optimal(OptimalRule),
    Linear(LinearRule),
}

impl FeedbackRule for BuiltinRule {
    #[inline]
    fn allocation(&self, w: f64) -> f64 {
        match self {
            BuiltinRule::Optimal(r) => r.allocation(w),
            BuiltinRule::Linear(r) => r.allocation(w),
        }
    }
}

fn builtin(sol: &FbpSolution, strategy: Strategy) -> Result<BuiltinRule> {
    Ok(match strategy {
        Strategy::Optimal => BuiltinRule::Optimal(OptimalRule::new(sol)?),
        Strategy::RuinMin => BuiltinRule::Linear(LinearRule::ruin_min(&sol.params)),
        Strategy::Constant(k) if k.is_finite() => BuiltinRule::Linear(LinearRule::constant(k)),
        Strategy::Constant(k) => return Err(Error::invalid(format!("constant allocation must be finite, got {k}"))),
        Strategy::Zero => BuiltinRule::Linear(LinearRule::constant(0.0)),
    })
}

/// Running cost rate `f(W)` and its terminal charge `f(-L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunningCost {
    /// `1{W < 0}`.
    Indicator,
    Step(StepPenalty),
}

impl RunningCost {
    #[inline]
    fn rate(&self, w: f64) -> f64 {
        match self {
            RunningCost::Indicator => {
                if w < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            RunningCost::Step(f) => f.level_at(w),
        }
    }

    fn terminal(&self) -> f64 {
        match self {
            RunningCost::Indicator => 1.0,
            RunningCost::Step(f) => f.terminal(),
        }
    }
}

/// Distribution of the running minimum of wealth `Z` over the simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinWealthStats {
    pub mean: f64,
    pub min: f64,
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
    /// Fraction of paths whose minimum went below zero.
    pub frac_below_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Estimated expected payoff, `a0 + mean_excess`.
    pub mean: f64,
    pub stderr: f64,
    /// Mean payoff accrued after time zero; independent of `a0`.
    pub mean_excess: f64,
    pub n_paths: usize,
    pub n_death: usize,
    pub n_ruin: usize,
    pub n_safe: usize,
    /// Paths stopped by `t_max`.
    pub n_timeout: usize,
    pub min_wealth: MinWealthStats,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum End {
    Death,
    Ruin,
    Safe,
    Timeout,
}

struct Market {
    r: f64,
    excess: f64,
    c: f64,
    sigma: f64,
    floor: f64,
    safe: f64,
    terminal: f64,
    bridge: bool,
}

/// Bridge crossing is ignored where its probability is below `exp(-BRIDGE_CUTOFF)`.
const BRIDGE_CUTOFF: f64 = 40.0;

/// Probability that a Brownian bridge from distance `d0` to `d1` above a
/// barrier, with variance `var`, touches it.
#[inline]
fn bridge_hit(d0: f64, d1: f64, var: f64) -> f64 {
    let x = 2.0 * d0 * d1 / var;
    if x > BRIDGE_CUTOFF {
        0.0
    } else {
        (-x).exp()
    }
}

/// Welford accumulator plus end-state counts for one batch.
#[derive(Default)]
struct Tally {
    n: usize,
    mean: f64,
    m2: f64,
    ends: [usize; 4],
    minima: Vec<f64>,
}

impl Tally {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: Tally) {
        if other.n > 0 {
            let n = self.n + other.n;
            let d = other.mean - self.mean;
            self.mean += d * other.n as f64 / n as f64;
            self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
            self.n = n;
        }
        for (a, b) in self.ends.iter_mut().zip(other.ends) {
            *a += b;
        }
        self.minima.extend(other.minima);
    }
}

fn run_path<R: FeedbackRule>(
    rule: &R,
    cost: &RunningCost,
    m: &Market,
    w0: f64,
    dt: f64,
    steps: u64,
    rng: &mut ChaCha8Rng,
    death: &Exp<f64>,
) -> (f64, End, f64) {
    let tau = death.sample(rng);
    let sqrt_dt = dt.sqrt();
    let mut w = w0;
    let mut lowest = w0;
    let mut acc = 0.0;
    if w <= m.floor {
        return (m.terminal, End::Ruin, w);
    }
    if w >= m.safe {
        return (0.0, End::Safe, w);
    }
    for i in 0..steps {
        let t = i as f64 * dt;
        let rate = cost.rate(w);
        if t + dt >= tau {
            return (acc + rate * (tau - t), End::Death, lowest);
        }
        let pi = rule.allocation(w);
        let xi: f64 = StandardNormal.sample(rng);
        acc += rate * dt;
        let prev = w;
        w += (m.r * w + m.excess * pi - m.c) * dt + m.sigma * pi * sqrt_dt * xi;
        lowest = lowest.min(w);
        if w <= m.floor {
            return (acc + m.terminal, End::Ruin, lowest);
        }
        if w >= m.safe {
            return (acc, End::Safe, lowest);
        }
        if m.bridge && pi != 0.0 {
            let var = (m.sigma * pi).powi(2) * dt;
            let down = bridge_hit(prev - m.floor, w - m.floor, var);
            let up = bridge_hit(m.safe - prev, m.safe - w, var);
            if down > 0.0 || up > 0.0 {
                let u: f64 = rng.gen();
                if u < down {
                    lowest = m.floor;
                    return (acc + m.terminal, End::Ruin, lowest);
                }
                if u < down + up {
                    return (acc, End::Safe, lowest);
                }
            }
        }
    }
    (acc, End::Timeout, lowest)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Simulates an arbitrary feedback rule and running cost.
pub fn simulate_rule<R: FeedbackRule>(
    params: &ModelParams,
    rule: &R,
    cost: &RunningCost,
    config: &SimConfig,
) -> Result<SimEstimate> {
    config.validate(params)?;
    let market = Market {
        r: params.r,
        excess: params.mu - params.r,
        c: params.c,
        sigma: params.sigma,
        floor: -params.ruin_depth,
        safe: params.safe_level(),
        terminal: cost.terminal() / params.lambda,
        bridge: config.crossing == Crossing::Bridge,
    };
    let death = Exp::new(params.lambda).map_err(|e| Error::invalid(e.to_string()))?;
    let steps = (config.horizon(params) / config.dt).ceil() as u64;
    let batches = config.n_paths.div_ceil(BATCH);
    let tallies: Vec<Tally> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut tally = Tally::default();
            let end = ((b + 1) * BATCH).min(config.n_paths);
            for path in b * BATCH..end {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(path as u64);
                let (payoff, stop, lowest) = run_path(rule, cost, &market, config.w0, config.dt, steps, &mut rng, &death);
                tally.push(payoff);
                tally.ends[stop as usize] += 1;
                tally.minima.push(lowest);
            }
            tally
        })
        .collect();
    let mut total = Tally::default();
    for t in tallies {
        total.merge(t);
    }

    let n = total.n;
    let stderr = if n > 1 {
        (total.m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    let mut minima = std::mem::take(&mut total.minima);
    minima.sort_by(f64::total_cmp);
    let min_wealth = MinWealthStats {
        mean: minima.iter().sum::<f64>() / n as f64,
        min: minima[0],
        p05: quantile(&minima, 0.05),
        p50: quantile(&minima, 0.50),
        p95: quantile(&minima, 0.95),
        frac_below_zero: minima.iter().filter(|&&z| z < 0.0).count() as f64 / n as f64,
    };
    let [n_death, n_ruin, n_safe, n_timeout] = total.ends;
    let mut warnings = Vec::new();
    if n_timeout as f64 > 1e-3 * n as f64 {
        warnings.push(format!(
            "{n_timeout} of {n} paths reached t_max = {}; check dt and the strategy",
            config.horizon(params)
        ));
    }
    Ok(SimEstimate {
        mean: config.a0 + total.mean,
        stderr,
        mean_excess: total.mean,
        n_paths: n,
        n_death,
        n_ruin,
        n_safe,
        n_timeout,
        min_wealth,
        warnings,
    })
}

/// Simulates a built-in strategy under the baseline indicator cost.
pub fn simulate(sol: &FbpSolution, strategy: Strategy, config: &SimConfig) -> Result<SimEstimate> {
    let rule = builtin(sol, strategy)?;
    simulate_rule(&sol.params, &rule, &RunningCost::Indicator, config)
}

/// Common-random-numbers comparison; the optimal strategy is added first if
/// it is missing.
pub fn compare(sol: &FbpSolution, strategies: &[Strategy], config: &SimConfig) -> Result<Vec<(Strategy, SimEstimate)>> {
    let mut list = strategies.to_vec();
    if !list.contains(&Strategy::Optimal) {
        list.insert(0, Strategy::Optimal);
    }
    if list.len() < 2 {
        return Err(Error::invalid("comparison needs at least two strategies"));
    }
    list.into_iter().map(|s| Ok((s, simulate(sol, s, config)?))).collect()
}

/// `sqrt(a.stderr^2 + b.stderr^2)`.
pub fn pooled_stderr(a: &SimEstimate, b: &SimEstimate) -> f64 {
    a.stderr.hypot(b.stderr)
}
