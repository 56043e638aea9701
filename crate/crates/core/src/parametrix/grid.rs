//! Master time grid of the Levi construction and product-integration weights
//! for Volterra convolutions `∫₀^t K(t-s) f(s) ds`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad::{geometric_breaks, GaussLegendre};

/// Gauss–Legendre order on each τ-panel.
const TAU_ORDER: usize = 8;
/// Width of the first τ-panel; kernels are smooth in τ below the lattice time scale.
const TAU_FLOOR: f64 = 1e-6;
/// Ratio of consecutive τ-panels.
const TAU_RATIO: f64 = 2.0;
/// Geometric nodes closer than this factor to a required time are dropped.
const MERGE_FACTOR: f64 = 1.1;

fn tau_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(TAU_ORDER))
}

/// Time nodes `0 = s_0 < s_1 < … < s_M`: geometric from `t_min` to the horizon
/// with the required output times inserted exactly.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_min: f64, horizon: f64, ratio: f64, required: &[f64]) -> Result<Self> {
        if !(t_min > 0.0 && t_min < horizon) {
            return Err(Error::param("parametrix.t_min", format!("must lie in (0, T), got {t_min}")));
        }
        if !(ratio > 1.0 && ratio <= 2.0) {
            return Err(Error::param("parametrix.time_ratio", format!("must lie in (1, 2], got {ratio}")));
        }
        let mut req: Vec<f64> = Vec::new();
        for &t in required {
            if !(t > 0.0 && t <= horizon) {
                return Err(Error::param("parametrix.required_times", format!("{t} is outside (0, T]")));
            }
            req.push(t);
        }
        req.push(horizon);
        let mut nodes: Vec<f64> = geometric_breaks(t_min, horizon, ratio)
            .into_iter()
            .filter(|&s| req.iter().all(|&r| s * MERGE_FACTOR < r || s > r * MERGE_FACTOR))
            .collect();
        nodes.extend(req);
        nodes.push(0.0);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of a node equal to `t` up to rounding.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.nodes.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1e-300))
    }

    /// The four nodes of the cubic Lagrange interpolant on `[s_k, s_{k+1}]`.
    pub fn stencil(&self, k: usize) -> [usize; 4] {
        let m = self.nodes.len();
        let start = k.saturating_sub(1).min(m.saturating_sub(4));
        [start, start + 1, start + 2, start + 3]
    }

    /// Lagrange basis values at `s` for the given stencil.
    pub fn lagrange(&self, stencil: &[usize; 4], s: f64) -> [f64; 4] {
        let x = stencil.map(|i| self.nodes[i]);
        let mut out = [1.0; 4];
        for m in 0..4 {
            for n in 0..4 {
                if n != m {
                    out[m] *= (s - x[n]) / (x[m] - x[n]);
                }
            }
        }
        out
    }

    /// Product-integration weights for `∫₀^t K(t-s) f(s) ds`, with `f` the cubic
    /// interpolant of its node values.
    ///
    /// `rows(τ, out)` writes the kernel `K(τ)` into `out` (length `width`).  The
    /// result lists, for every node `j` that contributes, the array
    /// `∫ K(t-s) ℓ_j(s) ds`.
    pub fn weights<F>(&self, t: f64, width: usize, mut rows: F) -> Vec<(usize, Vec<f64>)>
    where
        F: FnMut(f64, &mut [f64]),
    {
        let rule = tau_rule();
        let mut acc: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut buf = vec![0.0; width];
        for k in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            if a >= t {
                break;
            }
            let upper = b.min(t);
            let stencil = self.stencil(k);
            for w in tau_breaks(t - upper, t - a).windows(2) {
                let c = 0.5 * (w[0] + w[1]);
                let hw = 0.5 * (w[1] - w[0]);
                if hw <= 0.0 {
                    continue;
                }
                for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let tau = c + hw * x;
                    rows(tau, &mut buf);
                    let ell = self.lagrange(&stencil, t - tau);
                    for (m, &j) in stencil.iter().enumerate() {
                        let coef = wt * hw * ell[m];
                        let dst = acc[j].get_or_insert_with(|| vec![0.0; width]);
                        for (d, v) in dst.iter_mut().zip(&buf) {
                            *d += coef * v;
                        }
                    }
                }
            }
        }
        acc.into_iter().enumerate().filter_map(|(j, v)| v.map(|v| (j, v))).collect()
    }
}

/// τ-panels on `[lo, hi]`, graded geometrically towards `τ = 0`.
fn tau_breaks(lo: f64, hi: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo, hi];
    }
    if lo <= 0.0 && hi <= TAU_FLOOR {
        return vec![0.0, hi];
    }
    if lo <= 0.0 {
        let first = TAU_FLOOR.min(hi);
        let mut out = vec![0.0];
        out.extend(geometric_breaks(first, hi, TAU_RATIO));
        out
    } else if hi > TAU_RATIO * lo {
        geometric_breaks(lo, hi, TAU_RATIO)
    } else {
        vec![lo, hi]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_required_times_and_zero() {
        let g = TimeGrid::new(2.5e-4, 1.0, 1.3, &[0.01, 0.1, 0.25, 0.5]).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        for t in [0.01, 0.1, 0.25, 0.5, 1.0] {
            assert!(g.index_of(t).is_some(), "missing {t}");
        }
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.nodes().windows(2).skip(1).all(|w| w[1] / w[0] < 1.3 * 1.1 + 1e-12));
    }

    #[test]
    fn lagrange_basis_reproduces_cubics() {
        let g = TimeGrid::new(0.01, 1.0, 1.5, &[]).unwrap();
        let st = g.stencil(3);
        let f = |s: f64| 1.0 - 2.0 * s + 0.5 * s * s * s;
        let s = 0.5 * (g.nodes()[3] + g.nodes()[4]);
        let l = g.lagrange(&st, s);
        let interp: f64 = st.iter().zip(l).map(|(&i, li)| li * f(g.nodes()[i])).sum();
        assert!((interp - f(s)).abs() < 1e-13);
    }

    #[test]
    fn weights_integrate_exponential_convolution() {
        // ∫₀^t e^{-(t-s)} s² ds = t² - 2t + 2 - 2e^{-t}
        let g = TimeGrid::new(1e-3, 1.0, 1.3, &[0.5]).unwrap();
        let t = 0.5;
        let w = g.weights(t, 1, |tau, out| out[0] = (-tau).exp());
        let approx: f64 = w.iter().map(|(j, v)| v[0] * g.nodes()[*j].powi(2)).sum();
        let exact = t * t - 2.0 * t + 2.0 - 2.0 * (-t).exp();
        assert!((approx - exact).abs() < 1e-12, "{approx} vs {exact}");
    }

    #[test]
    fn weights_handle_off_grid_times() {
        let g = TimeGrid::new(1e-3, 1.0, 1.3, &[]).unwrap();
        let t = 0.3337;
        let w = g.weights(t, 1, |_, out| out[0] = 1.0);
        let total: f64 = w.iter().map(|(j, v)| v[0] * (1.0 + g.nodes()[*j])).sum();
        assert!((total - (t + 0.5 * t * t)).abs() < 1e-13);
    }
}
