//! Shared inputs for the criterion benchmarks.

use occupation_core::ModelParams;

/// The reference market: r = 2%, mu = 6%, sigma = 20%, c = 1, lambda = 4%, L = 10.
pub fn reference_params() -> ModelParams {
    ModelParams::new(0.02, 0.06, 0.20, 1.0, 0.04, 10.0).expect("reference parameters are valid")
}
