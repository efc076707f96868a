//! Revenue, surplus and weighted objective curves, their concave hulls and ironed intervals.

use alloc::vec::Vec;
use serde::Serialize;

use crate::distributions::{last_argmax, Shape, ValueCurve, TIE_TOL};
use crate::error::{Error, Result};

/// Weight on welfare in the objective `Λ = λ·S + (1 − λ)·R`; `Infinite` selects the
/// buyer-surplus curve `W = S − R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    Finite(f64),
    Infinite,
}

impl Weight {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(crate::invalid!("objective weight must be non-negative, got {lambda}"));
        }
        Ok(if lambda.is_infinite() {
            Weight::Infinite
        } else {
            Weight::Finite(lambda)
        })
    }

    /// `λ` as a float, `+∞` for the surplus curve.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Weight::Finite(l) => l,
            Weight::Infinite => f64::INFINITY,
        }
    }

    /// Combine sampled `S` and `R` values.
    #[inline]
    pub fn combine(&self, s: f64, r: f64) -> f64 {
        match *self {
            Weight::Finite(l) => l * s + (1.0 - l) * r,
            Weight::Infinite => s - r,
        }
    }

    /// Slope of `Λ` inside a piece: `λ·v + (1 − λ)·R'`, or `−q·v'` for the surplus curve.
    #[inline]
    pub fn slope(&self, shape: &Shape, q: f64) -> f64 {
        match *self {
            Weight::Finite(l) => {
                if l == 0.0 {
                    shape.revenue_slope(q)
                } else {
                    shape.value(q) - (1.0 - l) * shape.neg_q_deriv(q)
                }
            }
            Weight::Infinite => shape.neg_q_deriv(q),
        }
    }
}

/// `S`, `R` and `W` sampled on a quantile grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

impl CurveTable {
    pub fn new(curve: &ValueCurve, cells: usize) -> Self {
        let q = curve.grid(cells);
        let v: Vec<f64> = q.iter().map(|&x| curve.v(x)).collect();
        let s: Vec<f64> = q.iter().map(|&x| curve.s(x)).collect();
        let r: Vec<f64> = q.iter().zip(&v).map(|(&x, &y)| if x == 0.0 { 0.0 } else { x * y }).collect();
        let w = s.iter().zip(&r).map(|(a, b)| a - b).collect();
        CurveTable { q, v, s, r, w }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `Λ` at every grid point.
    pub fn mixed(&self, weight: Weight) -> Vec<f64> {
        self.s.iter().zip(&self.r).map(|(&s, &r)| weight.combine(s, r)).collect()
    }
}

/// Concave hull of a sampled curve, stored as its vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hull {
    pub vertices: Vec<(f64, f64)>,
}

impl Hull {
    /// Upper concave envelope of points sorted by abscissa.
    pub fn upper(xs: &[f64], ys: &[f64]) -> Self {
        let mut v: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
        for (&x, &y) in xs.iter().zip(ys) {
            while v.len() >= 2 {
                let (x1, y1) = v[v.len() - 2];
                let (x2, y2) = v[v.len() - 1];
                // Drop the middle point when it lies on or below the chord.
                if (y2 - y1) * (x - x1) <= (y - y1) * (x2 - x1) {
                    v.pop();
                } else {
                    break;
                }
            }
            v.push((x, y));
        }
        Hull { vertices: v }
    }

    /// Evaluate the envelope at `x` by linear interpolation between vertices.
    pub fn eval(&self, x: f64) -> f64 {
        let v = &self.vertices;
        if v.is_empty() {
            return f64::NAN;
        }
        let i = v.partition_point(|p| p.0 < x);
        if i == 0 {
            return v[0].1;
        }
        if i >= v.len() {
            return v[v.len() - 1].1;
        }
        let (x0, y0) = v[i - 1];
        let (x1, y1) = v[i];
        if x1 == x0 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Shape of `Λ` for one weight: its maximisers, hull and ironed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedAnalysis {
    pub weight: Weight,
    /// Smallest maximiser of `Λ`.
    pub left: f64,
    /// Largest maximiser of `Λ`; types beyond it are never served.
    pub right: f64,
    pub max_value: f64,
    /// Maximal intervals in `[0, right]` where `Λ` lies strictly below its concave hull.
    pub ironed: Vec<(f64, f64)>,
}

/// Analyse `Λ` for `weight` on a precomputed table.
pub fn analyze(curve: &ValueCurve, table: &CurveTable, weight: Weight) -> Result<MixedAnalysis> {
    if table.len() < 2 {
        return Err(Error::Numerical("curve table needs at least two points".into()));
    }
    let lam = table.mixed(weight);
    if lam.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("objective curve is not finite on the grid".into()));
    }
    let scale = lam.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol = TIE_TOL * scale.max(f64::MIN_POSITIVE);
    let (ri, max_value) = last_argmax(&lam);
    let li = lam.iter().position(|&x| x >= max_value - tol).unwrap_or(ri);
    let right = curve.refine_stationary(&table.q, ri, |s, q| weight.slope(s, q));
    let same_piece = curve.piece_index(table.q[li]) == curve.piece_index(table.q[ri]);
    let left = if ri - li <= 2 && same_piece { right } else { table.q[li] };

    let hull = Hull::upper(&table.q, &lam);
    let mut ironed = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..table.len() {
        if table.q[i] > right {
            break;
        }
        let below = hull.eval(table.q[i]) - lam[i] > tol;
        match (below, start) {
            (true, None) => start = Some(i.saturating_sub(1)),
            (false, Some(s)) => {
                ironed.push((table.q[s], table.q[i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        ironed.push((table.q[s], right));
    }
    Ok(MixedAnalysis {
        weight,
        left,
        right,
        max_value,
        ironed,
    })
}
