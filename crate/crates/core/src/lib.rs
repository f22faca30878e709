//! Minimum expected occupation time below zero for a retiree who consumes at
//! a constant rate and invests in a riskless and a lognormal risky asset.
//!
//! The crate is organised around one closed-form solution and two
//! independent ways of checking it:
//!
//! - [`model`] validates market/mortality inputs and derives the shared
//!   constants (half squared Sharpe ratio, characteristic roots).
//! - [`fbp`] solves the dual free-boundary problem in closed form.
//! - [`dual`] maps wealth to the dual variable and evaluates the value
//!   function and the optimal feedback allocation.
//! - [`hjb`] re-solves the primal HJB equation by policy iteration on a
//!   finite-difference grid.
//! - [`sim`] estimates the same objective by Euler–Maruyama Monte Carlo.
//! - [`props`] turns the qualitative properties of the solution (allocation
//!   ordering, monotonicity in the ruin depth, asymptotics) into checks.
//! - [`penalty`] generalises the objective to step-function penalties.

pub mod dual;
pub mod error;
pub mod fbp;
pub mod hjb;
pub mod interp;
pub mod model;
pub mod penalty;
pub mod props;
pub mod roots;
pub mod sim;

pub use dual::{pi_ruin, BetaL, ValuePoint};
pub use error::{Error, Result};
pub use fbp::{DualDerivs, FbpSolution, Side};
pub use hjb::{GridSolution, GridSpec};
pub use model::{MarketConstants, ModelParams};
pub use penalty::{MultiFbpSolution, PenalizedRule, StepPenalty};
pub use props::{LimitConstants, PropReport};
pub use sim::{Crossing, RunningCost, SimConfig, SimEstimate, Strategy};
