//! Fitting the constants of "there exists c" estimates from sampled ratio fields.

use serde::Serialize;

use crate::error::{Error, Result};

/// Which side of a comparison estimate a ratio field tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `f ≤ c g`: the fitted constant is the supremum of `f/g`.
    Upper,
    /// `f ≥ c g`: the fitted constant is the infimum of `f/g`.
    Lower,
    /// `f ≍ g`: both extremes are fitted.
    TwoSided,
}

/// Sampled values of a ratio `f/g` with their grid coordinates, optionally
/// paired with the same ratio on the next coarser grid.
#[derive(Debug, Clone)]
pub struct RatioField {
    pub axes: Vec<&'static str>,
    pub bound: Bound,
    coords: Vec<f64>,
    values: Vec<f64>,
    coarse: Option<Box<RatioField>>,
}

impl RatioField {
    pub fn new(axes: &[&'static str], bound: Bound) -> Self {
        RatioField { axes: axes.to_vec(), bound, coords: Vec::new(), values: Vec::new(), coarse: None }
    }

    /// Appends `value` at `coords` (one coordinate per axis).
    pub fn push(&mut self, coords: &[f64], value: f64) {
        debug_assert_eq!(coords.len(), self.axes.len());
        self.coords.extend_from_slice(coords);
        self.values.push(value);
    }

    /// Attaches the same ratio sampled one refinement level coarser.
    pub fn with_coarse(mut self, coarse: RatioField) -> Self {
        self.coarse = Some(Box::new(coarse));
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn location(&self, k: usize) -> String {
        let n = self.axes.len();
        self.axes
            .iter()
            .zip(&self.coords[k * n..(k + 1) * n])
            .map(|(a, v)| format!("{a}={v:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn extremes(&self) -> Result<(f64, usize, f64, usize)> {
        if self.values.is_empty() {
            return Err(Error::domain("fit_constant", "empty ratio field"));
        }
        let (mut sup, mut ks, mut inf, mut ki) = (f64::NEG_INFINITY, 0, f64::INFINITY, 0);
        for (k, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { value: v, location: self.location(k) });
            }
            if v > sup {
                sup = v;
                ks = k;
            }
            if v < inf {
                inf = v;
                ki = k;
            }
        }
        Ok((sup, ks, inf, ki))
    }
}

/// Fitted extremes of a ratio field.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Fit {
    pub sup: f64,
    pub inf: f64,
    pub sup_at: String,
    pub inf_at: String,
    /// Relative change of the fitted constant(s) between the coarser grid and
    /// this one; `None` without a coarser field.
    pub stability_delta: Option<f64>,
    pub points: usize,
}

fn relative_change(fine: f64, coarse: f64) -> f64 {
    if fine == coarse {
        0.0
    } else {
        (fine - coarse).abs() / fine.abs().max(coarse.abs())
    }
}

/// Sup and inf of a ratio field plus their relative change under one
/// refinement level.  Any NaN or infinity fails with its grid location.
pub fn fit_constant(field: &RatioField) -> Result<Fit> {
    let (sup, ks, inf, ki) = field.extremes()?;
    let stability_delta = match &field.coarse {
        None => None,
        Some(c) => {
            let (cs, _, ci, _) = c.extremes()?;
            Some(match field.bound {
                Bound::Upper => relative_change(sup, cs),
                Bound::Lower => relative_change(inf, ci),
                Bound::TwoSided => relative_change(sup, cs).max(relative_change(inf, ci)),
            })
        }
    };
    Ok(Fit {
        sup,
        inf,
        sup_at: field.location(ks),
        inf_at: field.location(ki),
        stability_delta,
        points: field.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_field_fits_exactly() {
        let mut f = RatioField::new(&["t", "x"], Bound::TwoSided);
        let mut c = RatioField::new(&["t", "x"], Bound::TwoSided);
        for k in 0..10 {
            f.push(&[0.1, k as f64], 2.5);
            if k % 2 == 0 {
                c.push(&[0.1, k as f64], 2.5);
            }
        }
        let fit = fit_constant(&f.with_coarse(c)).unwrap();
        assert_eq!((fit.sup, fit.inf, fit.stability_delta), (2.5, 2.5, Some(0.0)));
    }

    #[test]
    fn infinite_value_fails_with_location() {
        let mut f = RatioField::new(&["t", "x"], Bound::Upper);
        f.push(&[0.1, 0.0], 1.0);
        f.push(&[0.25, 1.5], f64::INFINITY);
        match fit_constant(&f) {
            Err(Error::NonFinite { location, .. }) => assert!(location.contains("t=0.25") && location.contains("x=1.5")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_in_coarse_field_is_reported() {
        let mut f = RatioField::new(&["x"], Bound::Upper);
        f.push(&[0.0], 1.0);
        let mut c = RatioField::new(&["x"], Bound::Upper);
        c.push(&[3.0], f64::NAN);
        assert!(matches!(fit_constant(&f.with_coarse(c)), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn stability_tracks_the_tested_side() {
        let mut f = RatioField::new(&["x"], Bound::Upper);
        let mut c = RatioField::new(&["x"], Bound::Upper);
        f.push(&[0.0], 1.0);
        f.push(&[1.0], 0.001);
        c.push(&[0.0], 0.95);
        c.push(&[1.0], 0.5);
        let fit = fit_constant(&f.with_coarse(c)).unwrap();
        assert!((fit.stability_delta.unwrap() - 0.05).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn extremes_bracket_every_value(v in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let mut f = RatioField::new(&["k"], Bound::TwoSided);
            for (k, &x) in v.iter().enumerate() {
                f.push(&[k as f64], x);
            }
            let fit = fit_constant(&f).unwrap();
            prop_assert!(v.iter().all(|&x| fit.inf <= x && x <= fit.sup));
            prop_assert!(v.contains(&fit.sup) && v.contains(&fit.inf));
        }
    }
}
