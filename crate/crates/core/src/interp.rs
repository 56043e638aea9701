//! One-dimensional interpolation: monotone piecewise cubic (Fritsch–Carlson)
//! and cubic Hermite segments with prescribed slopes.

use crate::error::{Error, Result};

/// Cubic Hermite interpolation on `[x0, x1]` with values and slopes at both ends.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to `x`.
#[inline]
pub fn hermite_derivative(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1
}

/// Monotonicity-preserving piecewise cubic interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant; `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::domain("MonotoneCubic::new", "need at least two matching abscissae and values"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("MonotoneCubic::new", "abscissae must be strictly increasing"));
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
            } else {
                let a = d[i] / delta[i];
                let b = d[i + 1] / delta[i];
                let s = a * a + b * b;
                if s > 9.0 {
                    let tau = 3.0 / s.sqrt();
                    d[i] = tau * a * delta[i];
                    d[i + 1] = tau * b * delta[i];
                }
            }
        }
        Ok(MonotoneCubic { x, y, d })
    }

    /// Locates the segment containing `t` (clamped to the end segments).
    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Evaluates the interpolant; outside the data range the end values are held constant.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.segment(t);
        hermite(self.x[i], self.x[i + 1], self.y[i], self.y[i + 1], self.d[i], self.d[i + 1], t)
    }

    /// Data abscissae.
    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    /// Data values.
    pub fn ys(&self) -> &[f64] {
        &self.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x + 0.5;
        let df = |x: f64| 6.0 * x * x - 1.0;
        let (a, b) = (0.3, 1.7);
        for &x in &[0.3, 0.9, 1.3, 1.7] {
            let v = hermite(a, b, f(a), f(b), df(a), df(b), x);
            assert!((v - f(x)).abs() < 1e-13);
            let dv = hermite_derivative(a, b, f(a), f(b), df(a), df(b), x);
            assert!((dv - df(x)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in proptest::collection::vec(0.0f64..1.0, 3..12)) {
            let x: Vec<f64> = (0..steps.len()).map(|i| i as f64 + 0.1 * (i as f64).sin()).collect();
            let mut y = Vec::new();
            let mut acc = 0.0;
            for s in &steps { acc += s; y.push(acc); }
            let m = MonotoneCubic::new(x.clone(), y).unwrap();
            let mut prev = f64::NEG_INFINITY;
            let n = 400;
            for k in 0..=n {
                let t = x[0] + (x[x.len() - 1] - x[0]) * k as f64 / n as f64;
                let v = m.eval(t);
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
