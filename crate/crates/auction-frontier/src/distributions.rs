//! Valuation distributions in quantile space.
//!
//! A distribution is stored through its value curve `v(q)`, the value of a buyer whose
//! quantile is `q = 1 - F(v)`. High values sit at low quantiles. Every curve is an
//! ordered list of analytic pieces on `(lo, hi]` (the first piece also owns `q = 0`),
//! which keeps `v` left-continuous and lets the cumulative value `S(q) = ∫₀^q v`
//! be evaluated exactly from per-piece antiderivatives.

use alloc::string::ToString;
use alloc::vec::Vec;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::invalid;
use crate::math::{erfc, exp, ln, powf, sqrt, PI};

/// Closed-form shape of `v` on one piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// `v(q) = value`.
    Const { value: f64 },
    /// `v(q) = intercept + slope·q`.
    Linear { intercept: f64, slope: f64 },
    /// `v(q) = coef·q^exponent + offset`.
    Power { coef: f64, exponent: f64, offset: f64 },
    /// `v(q) = offset − scale·ln q`.
    NegLog { scale: f64, offset: f64 },
    /// `v(q) = scale·√(−ln q)`.
    SqrtNegLog { scale: f64 },
}

impl Shape {
    pub fn value(&self, q: f64) -> f64 {
        match *self {
            Shape::Const { value } => value,
            Shape::Linear { intercept, slope } => intercept + slope * q,
            Shape::Power { coef, exponent, offset } => coef * powf(q, exponent) + offset,
            Shape::NegLog { scale, offset } => offset - scale * ln(q),
            Shape::SqrtNegLog { scale } => scale * sqrt(neg_ln(q)),
        }
    }

    pub fn deriv(&self, q: f64) -> f64 {
        match *self {
            Shape::Const { .. } => 0.0,
            Shape::Linear { slope, .. } => slope,
            Shape::Power { coef, exponent, .. } => coef * exponent * powf(q, exponent - 1.0),
            Shape::NegLog { scale, .. } => -scale / q,
            Shape::SqrtNegLog { scale } => {
                let l = neg_ln(q);
                if l == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -scale / (2.0 * q * sqrt(l))
                }
            }
        }
    }

    /// `−q·v'(q)`, the per-quantile information rent density.
    pub fn neg_q_deriv(&self, q: f64) -> f64 {
        match *self {
            Shape::Const { .. } => 0.0,
            Shape::Linear { slope, .. } => -slope * q,
            Shape::Power { coef, exponent, .. } => -coef * exponent * powf(q, exponent),
            Shape::NegLog { scale, .. } => scale,
            Shape::SqrtNegLog { scale } => {
                let l = neg_ln(q);
                if l == 0.0 {
                    f64::INFINITY
                } else {
                    scale / (2.0 * sqrt(l))
                }
            }
        }
    }

    /// Marginal revenue `R'(q) = v(q) + q·v'(q)`.
    pub fn revenue_slope(&self, q: f64) -> f64 {
        match *self {
            Shape::NegLog { scale, offset } => offset - scale * ln(q) - scale,
            Shape::Power { coef, exponent, offset } => coef * (1.0 + exponent) * powf(q, exponent) + offset,
            _ => self.value(q) - self.neg_q_deriv(q),
        }
    }

    /// An antiderivative of `v`, continuous on the closed piece.
    pub fn antideriv(&self, q: f64) -> f64 {
        match *self {
            Shape::Const { value } => value * q,
            Shape::Linear { intercept, slope } => intercept * q + 0.5 * slope * q * q,
            Shape::Power { coef, exponent, offset } => {
                if exponent == -1.0 {
                    coef * ln(q) + offset * q
                } else if q == 0.0 {
                    0.0
                } else {
                    coef * powf(q, exponent + 1.0) / (exponent + 1.0) + offset * q
                }
            }
            Shape::NegLog { scale, offset } => {
                if q == 0.0 {
                    0.0
                } else {
                    offset * q + scale * (q - q * ln(q))
                }
            }
            Shape::SqrtNegLog { scale } => {
                if q == 0.0 {
                    0.0
                } else {
                    let s = sqrt(neg_ln(q));
                    scale * (q * s + 0.5 * sqrt(PI) * erfc(s))
                }
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        match *self {
            Shape::Const { .. } => true,
            Shape::Linear { slope, .. } => slope == 0.0,
            Shape::Power { coef, .. } => coef == 0.0,
            Shape::NegLog { scale, .. } | Shape::SqrtNegLog { scale } => scale == 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Shape {
        match *self {
            Shape::Const { value } => Shape::Const { value: c * value },
            Shape::Linear { intercept, slope } => Shape::Linear {
                intercept: c * intercept,
                slope: c * slope,
            },
            Shape::Power { coef, exponent, offset } => Shape::Power {
                coef: c * coef,
                exponent,
                offset: c * offset,
            },
            Shape::NegLog { scale, offset } => Shape::NegLog {
                scale: c * scale,
                offset: c * offset,
            },
            Shape::SqrtNegLog { scale } => Shape::SqrtNegLog { scale: c * scale },
        }
    }
}

fn neg_ln(q: f64) -> f64 {
    let l = -ln(q);
    if l > 0.0 {
        l
    } else {
        0.0
    }
}

/// One analytic piece of a value curve, covering `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
}

/// Named distribution families. Unbounded tails carry an optional cap whose
/// tail mass becomes an atom at the cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64, cap: Option<f64> },
    #[serde(rename = "equal-revenue")]
    EqualRevenue { cap: f64 },
    Lomax { shape: f64, scale: f64, cap: Option<f64> },
    /// `F(v) = 1 − e^{−v²}` capped at `K = ½√(ln buyers)` with the remaining mass `buyers^{−1/4}` on `K`.
    #[serde(rename = "mhr-hard-instance")]
    MhrHard { buyers: f64 },
    /// Four-step instance on which single posted prices lose almost all revenue.
    #[serde(rename = "price-gap")]
    PriceGap { k: f64 },
    /// Quasi-regular instance with a top atom on `[0, ell]`, a `(1−q)/q` middle and an equal-revenue tail after `pivot`.
    #[serde(rename = "quasi-regular-tight")]
    QuasiRegularTight { ell: f64, pivot: f64 },
    /// Linear interpolation between `(q, v)` knots; repeated `q` encodes a downward jump.
    Piecewise { knots: Vec<[f64; 2]> },
    /// Built directly from pieces.
    Custom,
}

impl Family {
    pub fn build(&self) -> Result<ValueCurve> {
        ValueCurve::from_family(self.clone())
    }
}

/// Regularity class flags, with a witness quantile where a defining monotonicity fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub is_regular: bool,
    pub is_mhr: bool,
    pub is_anti_mhr: bool,
    pub witness: Option<f64>,
}

/// A valuation distribution expressed through its value curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueCurve {
    family: Family,
    pieces: Vec<Piece>,
    #[serde(skip)]
    cum: Vec<f64>,
    atom: f64,
}

/// Default number of uniform grid cells.
pub const DEFAULT_GRID: usize = 4096;

/// Relative tolerance for ties in argmax and monotonicity scans.
pub const TIE_TOL: f64 = 1e-9;

impl ValueCurve {
    pub fn from_family(family: Family) -> Result<Self> {
        let pieces = match &family {
            Family::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && *low >= 0.0 && high > low) {
                    return Err(invalid!("uniform needs 0 <= low < high, got [{low}, {high}]"));
                }
                alloc::vec![Piece {
                    lo: 0.0,
                    hi: 1.0,
                    shape: Shape::Linear {
                        intercept: *high,
                        slope: -(high - low),
                    },
                }]
            }
            Family::Exponential { rate, cap } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(invalid!("exponential rate must be positive, got {rate}"));
                }
                let tail = Shape::NegLog {
                    scale: 1.0 / rate,
                    offset: 0.0,
                };
                match cap {
                    None => alloc::vec![Piece { lo: 0.0, hi: 1.0, shape: tail }],
                    Some(h) => {
                        if !(h.is_finite() && *h > 0.0) {
                            return Err(invalid!("exponential cap must be positive, got {h}"));
                        }
                        capped(*h, exp(-rate * h), tail)
                    }
                }
            }
            Family::EqualRevenue { cap } => {
                if !(cap.is_finite() && *cap > 1.0) {
                    return Err(invalid!("equal-revenue cap must exceed 1, got {cap}"));
                }
                capped(
                    *cap,
                    1.0 / cap,
                    Shape::Power {
                        coef: 1.0,
                        exponent: -1.0,
                        offset: 0.0,
                    },
                )
            }
            Family::Lomax { shape, scale, cap } => {
                if !(shape.is_finite() && *shape > 0.0 && scale.is_finite() && *scale > 0.0) {
                    return Err(invalid!("lomax needs positive shape and scale"));
                }
                let tail = Shape::Power {
                    coef: *scale,
                    exponent: -1.0 / shape,
                    offset: -scale,
                };
                match cap {
                    None => {
                        if *shape <= 1.0 {
                            return Err(invalid!("an uncapped lomax needs shape > 1 for a finite mean"));
                        }
                        alloc::vec![Piece { lo: 0.0, hi: 1.0, shape: tail }]
                    }
                    Some(h) => {
                        if !(h.is_finite() && *h > 0.0) {
                            return Err(invalid!("lomax cap must be positive, got {h}"));
                        }
                        capped(*h, powf(1.0 + h / scale, -shape), tail)
                    }
                }
            }
            Family::MhrHard { buyers } => {
                if !(buyers.is_finite() && *buyers > 1.0) {
                    return Err(invalid!("mhr-hard-instance needs buyers > 1, got {buyers}"));
                }
                let k = 0.5 * sqrt(ln(*buyers));
                capped(k, powf(*buyers, -0.25), Shape::SqrtNegLog { scale: 1.0 })
            }
            Family::PriceGap { k } => {
                if !(k.is_finite() && *k > 2.0) {
                    return Err(invalid!("price-gap needs k > 2, got {k}"));
                }
                let k = *k;
                alloc::vec![
                    Piece {
                        lo: 0.0,
                        hi: 0.5 / k,
                        shape: Shape::Const { value: k * k },
                    },
                    Piece {
                        lo: 0.5 / k,
                        hi: 1.0 / k,
                        shape: Shape::Const { value: 0.5 * k },
                    },
                    Piece {
                        lo: 1.0 / k,
                        hi: 0.5,
                        shape: Shape::Power {
                            coef: 0.5,
                            exponent: -1.0,
                            offset: 0.0,
                        },
                    },
                    Piece {
                        lo: 0.5,
                        hi: 1.0,
                        shape: Shape::Const { value: 0.0 },
                    },
                ]
            }
            Family::QuasiRegularTight { ell, pivot } => {
                if !(*ell > 0.0 && ell < pivot && *pivot < 1.0) {
                    return Err(invalid!("quasi-regular-tight needs 0 < ell < pivot < 1"));
                }
                let c = pivot / (1.0 - pivot);
                alloc::vec![
                    Piece {
                        lo: 0.0,
                        hi: *ell,
                        shape: Shape::Const {
                            value: c * (1.0 - ell) / ell,
                        },
                    },
                    Piece {
                        lo: *ell,
                        hi: *pivot,
                        shape: Shape::Power {
                            coef: c,
                            exponent: -1.0,
                            offset: -c,
                        },
                    },
                    Piece {
                        lo: *pivot,
                        hi: 1.0,
                        shape: Shape::Power {
                            coef: *pivot,
                            exponent: -1.0,
                            offset: 0.0,
                        },
                    },
                ]
            }
            Family::Piecewise { knots } => knots_to_pieces(knots)?,
            Family::Custom => {
                return Err(invalid!("custom curves are built with ValueCurve::from_pieces"));
            }
        };
        Self::assemble(family, pieces)
    }

    /// Build a curve from explicit pieces. Pieces must tile `[0, 1]` in order and
    /// describe a non-negative, non-increasing function.
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        Self::assemble(Family::Custom, pieces)
    }

    fn assemble(family: Family, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid!("a value curve needs at least one piece"));
        }
        if pieces[0].lo != 0.0 || pieces[pieces.len() - 1].hi != 1.0 {
            return Err(invalid!("pieces must start at q = 0 and end at q = 1"));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.hi > p.lo) {
                return Err(invalid!("piece {i} has empty range ({}, {}]", p.lo, p.hi));
            }
            if i > 0 && pieces[i - 1].hi != p.lo {
                return Err(invalid!("piece {i} does not start where piece {} ends", i - 1));
            }
            let probes = [p.lo, 0.25 * (3.0 * p.lo + p.hi), 0.5 * (p.lo + p.hi), p.hi];
            for &q in &probes {
                let v = p.shape.value(q);
                if v.is_nan() || v < -1e-12 {
                    return Err(invalid!("piece {i} takes value {v} at q = {q}"));
                }
                if q > 0.0 && p.shape.deriv(q) > 1e-12 {
                    return Err(invalid!("piece {i} is increasing at q = {q}"));
                }
            }
            if i > 0 {
                let left = pieces[i - 1].shape.value(p.lo);
                let right = p.shape.value(p.lo);
                if right > left * (1.0 + 1e-12) + 1e-15 {
                    return Err(invalid!("value jumps upward at q = {}", p.lo));
                }
            }
            if p.lo == 0.0 {
                let s = p.shape.antideriv(p.hi) - p.shape.antideriv(0.0);
                if !s.is_finite() {
                    return Err(invalid!("the first piece has an infinite mean"));
                }
            }
        }
        let mut cum = Vec::with_capacity(pieces.len());
        let mut s = 0.0;
        for p in &pieces {
            cum.push(s);
            s += p.shape.antideriv(p.hi) - p.shape.antideriv(p.lo);
        }
        let mut atom = 0.0;
        let top = pieces[0].shape.value(0.0);
        for p in &pieces {
            if p.shape.is_flat() && p.shape.value(p.lo) == top && top.is_finite() {
                atom = p.hi;
            } else {
                break;
            }
        }
        if atom >= 1.0 {
            return Err(invalid!("a point mass distribution has no quantile structure"));
        }
        Ok(ValueCurve {
            family,
            pieces,
            cum,
            atom,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Probability mass at the top value `v_H`.
    pub fn atom_mass(&self) -> f64 {
        self.atom
    }

    /// Lowest value `v_L = v(1)`.
    pub fn v_low(&self) -> f64 {
        self.v(1.0)
    }

    /// Highest value `v_H = v(0)`; `+∞` for uncapped tails.
    pub fn v_high(&self) -> f64 {
        self.v(0.0)
    }

    /// Mean value `E[v] = ∫₀¹ v`.
    pub fn mean(&self) -> f64 {
        self.s(1.0)
    }

    /// Curve with every value multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<ValueCurve> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid!("scale factor must be positive, got {c}"));
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                shape: p.shape.scaled(c),
            })
            .collect();
        Self::assemble(Family::Custom, pieces)
    }

    /// Index of the piece owning `q` (pieces own `(lo, hi]`, the first one also owns 0).
    pub fn piece_index(&self, q: f64) -> usize {
        let mut lo = 0usize;
        let mut hi = self.pieces.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if q <= self.pieces[mid].hi {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// `v(q)` without range checks.
    #[inline]
    pub fn v(&self, q: f64) -> f64 {
        self.pieces[self.piece_index(q)].shape.value(q)
    }

    /// Right limit `v(q⁺)`.
    pub fn v_right(&self, q: f64) -> f64 {
        let i = self.piece_index(q);
        if q == self.pieces[i].hi && i + 1 < self.pieces.len() {
            self.pieces[i + 1].shape.value(q)
        } else {
            self.pieces[i].shape.value(q)
        }
    }

    /// `v'(q)` taken inside the piece that owns `q`.
    pub fn v_prime(&self, q: f64) -> f64 {
        self.pieces[self.piece_index(q)].shape.deriv(q)
    }

    /// Checked value lookup.
    pub fn value_at(&self, q: f64) -> Result<f64> {
        check_quantile(q)?;
        Ok(self.v(q))
    }

    /// Cumulative value `S(q) = ∫₀^q v`.
    pub fn s(&self, q: f64) -> f64 {
        let i = self.piece_index(q);
        let p = &self.pieces[i];
        self.cum[i] + p.shape.antideriv(q) - p.shape.antideriv(p.lo)
    }

    /// Revenue curve `R(q) = q·v(q)` with `R(0) = 0`.
    pub fn r(&self, q: f64) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        q * self.v(q)
    }

    /// Checked revenue curve lookup.
    pub fn revenue_curve_at(&self, q: f64) -> Result<f64> {
        check_quantile(q)?;
        Ok(self.r(q))
    }

    /// Information-rent curve `W(q) = S(q) − R(q)`, the surplus of posting price `v(q)` to one buyer.
    pub fn w(&self, q: f64) -> f64 {
        self.s(q) - self.r(q)
    }

    /// Hazard rate `φ` and virtual value `ψ` of the type at quantile `q`.
    pub fn hazard_and_virtual(&self, q: f64) -> Result<(f64, f64)> {
        check_quantile(q)?;
        if q <= 0.0 || q >= 1.0 {
            return Err(Error::Singular(alloc::format!("q = {q} is not interior")));
        }
        if q < self.atom {
            return Err(Error::Singular(alloc::format!("q = {q} lies in the top atom")));
        }
        let shape = &self.pieces[self.piece_index(q)].shape;
        let rent = shape.neg_q_deriv(q);
        if !(rent > 0.0) {
            return Err(Error::Singular(alloc::format!("v' vanishes at q = {q}")));
        }
        Ok((1.0 / rent, shape.revenue_slope(q)))
    }

    /// Interior piece boundaries.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces[..self.pieces.len() - 1].iter().map(|p| p.hi)
    }

    /// Downward jumps of `v`: `(q, v(q), v(q⁺))`.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for w in self.pieces.windows(2) {
            let q = w[0].hi;
            let left = w[0].shape.value(q);
            let right = w[1].shape.value(q);
            if left - right > 1e-14 * left.abs().max(1.0) {
                out.push((q, left, right));
            }
        }
        out
    }

    /// Maximal quantile intervals on which `v` is constant (ties among buyers have positive probability).
    pub fn flat_intervals(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut last_value = f64::NAN;
        for p in &self.pieces {
            if p.shape.is_flat() {
                let value = p.shape.value(p.hi);
                if let Some(prev) = out.last_mut() {
                    if prev.1 == p.lo && value == last_value {
                        prev.1 = p.hi;
                        continue;
                    }
                }
                out.push((p.lo, p.hi));
                last_value = value;
            }
        }
        out
    }

    /// Mass of types whose value is at least `value`: `sup{q : v(q) ≥ value}`.
    pub fn quantile_ge(&self, value: f64) -> f64 {
        self.sup_where(|v| v >= value)
    }

    /// Mass of types whose value strictly exceeds `value`.
    pub fn quantile_gt(&self, value: f64) -> f64 {
        self.sup_where(|v| v > value)
    }

    fn sup_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        // The predicate is monotone: true on an initial segment of quantiles.
        for (i, p) in self.pieces.iter().enumerate().rev() {
            let start_ok = if i == 0 {
                pred(p.shape.value(0.0))
            } else {
                // smallest quantile owned by piece i is approached from the right of lo
                pred(p.shape.value(p.lo))
            };
            if !start_ok && i > 0 {
                continue;
            }
            if pred(p.shape.value(p.hi)) {
                return p.hi;
            }
            if !start_ok {
                return 0.0;
            }
            let (mut a, mut b) = (p.lo, p.hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if pred(p.shape.value(m)) {
                    a = m;
                } else {
                    b = m;
                }
            }
            return a;
        }
        0.0
    }

    /// Sorted quantile grid: `cells + 1` uniform points plus every piece boundary.
    pub fn grid(&self, cells: usize) -> Vec<f64> {
        let cells = cells.max(1);
        let mut pts: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        pts.extend(self.breakpoints());
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        pts
    }

    /// Largest maximiser `q_m` of `R`; the lowest monopoly reserve is `v(q_m)`.
    ///
    /// The maximiser is first located on the grid with the tie rule, then, when it lies
    /// inside a smooth piece, refined to the exact zero of `R'`.
    pub fn monopoly_quantile(&self, cells: usize) -> f64 {
        let grid = self.grid(cells.max(2));
        let vals: Vec<f64> = grid.iter().map(|&q| self.r(q)).collect();
        let (i, _) = last_argmax(&vals);
        self.refine_stationary(&grid, i, |s, q| s.revenue_slope(q))
    }

    /// Given a grid maximiser `i` of some curve with slope `slope(shape, q)` inside pieces,
    /// return the right end of the exact argmax within the neighbouring cells.
    pub(crate) fn refine_stationary(&self, grid: &[f64], i: usize, slope: impl Fn(&Shape, f64) -> f64) -> f64 {
        let qi = grid[i];
        let p = &self.pieces[self.piece_index(qi)];
        let inside = |q: f64| q >= p.lo && q <= p.hi;
        let d = slope(&p.shape, qi);
        let bracket = if d > 0.0 && i + 1 < grid.len() && inside(grid[i + 1]) && qi < p.hi {
            Some((qi, grid[i + 1]))
        } else if d < 0.0 && i > 0 && inside(grid[i - 1]) && qi > p.lo {
            Some((grid[i - 1], qi))
        } else {
            None
        };
        let Some((mut a, mut b)) = bracket else {
            return qi;
        };
        if !(slope(&p.shape, a) >= 0.0 && slope(&p.shape, b) < 0.0) {
            return qi;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if slope(&p.shape, m) >= 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        a
    }

    /// Regular / MHR / anti-MHR flags from grid scans.
    ///
    /// Regularity is concavity of the sampled `R`. The hazard classes are monotonicity of
    /// `q·v'(q)` over quantiles past the top atom. A downward jump of `v` (a gap in the
    /// support) violates both hazard classes, and a top atom, whose hazard rate is
    /// infinite, is compatible with MHR but not with anti-MHR.
    pub fn classify(&self, cells: usize) -> Classification {
        let grid = self.grid(cells.max(2));
        let rs: Vec<f64> = grid.iter().map(|&q| self.r(q)).collect();
        let rmax = rs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let rtol = TIE_TOL * rmax.max(f64::MIN_POSITIVE);
        let mut is_regular = true;
        let mut witness = None;
        for i in 1..grid.len() - 1 {
            let t = (grid[i] - grid[i - 1]) / (grid[i + 1] - grid[i - 1]);
            let chord = rs[i - 1] + t * (rs[i + 1] - rs[i - 1]);
            if rs[i] < chord - rtol {
                is_regular = false;
                witness = Some(grid[i]);
                break;
            }
        }

        // q·v'(q) sampled left-to-right, with both one-sided values at piece boundaries.
        let mut gs: Vec<(f64, f64)> = Vec::new();
        for &q in &grid {
            if q <= self.atom || q <= 0.0 {
                continue;
            }
            let i = self.piece_index(q);
            gs.push((q, -self.pieces[i].shape.neg_q_deriv(q)));
            if q == self.pieces[i].hi && i + 1 < self.pieces.len() {
                gs.push((q, -self.pieces[i + 1].shape.neg_q_deriv(q)));
            }
        }
        gs.retain(|(_, g)| g.is_finite());
        let gmax = gs.iter().fold(0.0f64, |m, &(_, g)| m.max(g.abs()));
        let gtol = TIE_TOL * gmax.max(f64::MIN_POSITIVE);
        let mut is_mhr = true;
        let mut is_anti = true;
        for w in gs.windows(2) {
            if w[1].1 > w[0].1 + gtol {
                if is_mhr && witness.is_none() {
                    witness = Some(w[1].0);
                }
                is_mhr = false;
            }
            if w[1].1 < w[0].1 - gtol {
                if is_anti && witness.is_none() {
                    witness = Some(w[1].0);
                }
                is_anti = false;
            }
        }
        let jumps = self.jumps();
        if let Some(&(q, _, _)) = jumps.iter().find(|j| j.0 > self.atom) {
            is_mhr = false;
            is_anti = false;
            witness = witness.or(Some(q));
        }
        if self.atom > 0.0 {
            is_anti = false;
            witness = witness.or(Some(self.atom));
        }
        Classification {
            is_regular,
            is_mhr,
            is_anti_mhr: is_anti,
            witness,
        }
    }
}

fn check_quantile(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::QuantileOutOfRange(q))
    }
}

fn capped(cap: f64, mass: f64, tail: Shape) -> Vec<Piece> {
    if mass <= 0.0 {
        return alloc::vec![Piece { lo: 0.0, hi: 1.0, shape: tail }];
    }
    alloc::vec![
        Piece {
            lo: 0.0,
            hi: mass,
            shape: Shape::Const { value: cap },
        },
        Piece {
            lo: mass,
            hi: 1.0,
            shape: tail,
        },
    ]
}

fn knots_to_pieces(knots: &[[f64; 2]]) -> Result<Vec<Piece>> {
    if knots.len() < 2 {
        return Err(invalid!("piecewise curves need at least two knots"));
    }
    if knots[0][0] != 0.0 || knots[knots.len() - 1][0] != 1.0 {
        return Err(invalid!("knots must start at q = 0 and end at q = 1"));
    }
    for (i, k) in knots.iter().enumerate() {
        if !(k[0].is_finite() && k[1].is_finite()) || k[1] < 0.0 {
            return Err(invalid!("knot {i} = ({}, {}) is not a finite non-negative point", k[0], k[1]));
        }
        if i > 0 {
            if k[0] < knots[i - 1][0] {
                return Err(invalid!("knots are not sorted by q at index {i}"));
            }
            if k[1] > knots[i - 1][1] {
                return Err(invalid!("knot values increase at index {i}"));
            }
        }
    }
    let mut pieces = Vec::new();
    for w in knots.windows(2) {
        let ([q0, v0], [q1, v1]) = (w[0], w[1]);
        if q1 == q0 {
            continue;
        }
        let shape = if v0 == v1 {
            Shape::Const { value: v0 }
        } else {
            let slope = (v1 - v0) / (q1 - q0);
            Shape::Linear {
                intercept: v0 - slope * q0,
                slope,
            }
        };
        pieces.push(Piece { lo: q0, hi: q1, shape });
    }
    if pieces.is_empty() {
        return Err(invalid!("knots span no quantile range"));
    }
    Ok(pieces)
}

/// Index and value of the largest index within the tie tolerance of the maximum.
pub(crate) fn last_argmax(vals: &[f64]) -> (usize, f64) {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = vals.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol = TIE_TOL * scale;
    let i = vals.iter().rposition(|&x| x >= max - tol).unwrap_or(0);
    (i, max)
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Family::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            Family::Exponential { rate, cap: None } => write!(f, "exponential({rate})"),
            Family::Exponential { rate, cap: Some(h) } => write!(f, "exponential({rate},cap={h})"),
            Family::EqualRevenue { cap } => write!(f, "equal-revenue(cap={cap})"),
            Family::Lomax { shape, scale, cap: None } => write!(f, "lomax({shape},{scale})"),
            Family::Lomax { shape, scale, cap: Some(h) } => write!(f, "lomax({shape},{scale},cap={h})"),
            Family::MhrHard { buyers } => write!(f, "mhr-hard-instance(n={buyers})"),
            Family::PriceGap { k } => write!(f, "price-gap(k={k})"),
            Family::QuasiRegularTight { ell, pivot } => write!(f, "quasi-regular-tight({ell},{pivot})"),
            Family::Piecewise { knots } => write!(f, "piecewise({} knots)", knots.len()),
            Family::Custom => f.write_str("custom"),
        }
    }
}

impl Family {
    /// Short machine-friendly family tag.
    pub fn tag(&self) -> alloc::string::String {
        match self {
            Family::Uniform { .. } => "uniform",
            Family::Exponential { .. } => "exponential",
            Family::EqualRevenue { .. } => "equal-revenue",
            Family::Lomax { .. } => "lomax",
            Family::MhrHard { .. } => "mhr-hard-instance",
            Family::PriceGap { .. } => "price-gap",
            Family::QuasiRegularTight { .. } => "quasi-regular-tight",
            Family::Piecewise { .. } => "piecewise",
            Family::Custom => "custom",
        }
        .to_string()
    }
}
