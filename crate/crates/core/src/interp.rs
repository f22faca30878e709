//! Cubic Hermite interpolation on a uniform grid.

/// Values and slopes of a smooth function sampled on a uniform grid over
/// `[lo, hi]`; evaluation is O(1) with fourth-order accuracy.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    lo: f64,
    step: f64,
    inv_step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    /// Samples `f`, which returns `(value, slope)`, at `n + 1` equally spaced nodes.
    pub fn build<E>(lo: f64, hi: f64, n: usize, mut f: impl FnMut(f64) -> Result<(f64, f64), E>) -> Result<Self, E> {
        assert!(n >= 1 && hi > lo);
        let step = (hi - lo) / n as f64;
        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let x = if i == n { hi } else { lo + step * i as f64 };
            let (v, s) = f(x)?;
            values.push(v);
            slopes.push(s);
        }
        Ok(Self {
            lo,
            step,
            inv_step: 1.0 / step,
            values,
            slopes,
        })
    }

    /// Interpolated value; arguments outside the table are clamped to it.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.values.len() - 2;
        let u = ((x - self.lo) * self.inv_step).max(0.0);
        let i = (u as usize).min(last);
        let t = (u - i as f64).min(1.0);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (s0, s1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * v0 + (t3 - 2.0 * t2 + t) * s0 + (-2.0 * t3 + 3.0 * t2) * v1 + (t3 - t2) * s1
    }
}
