//! Ex-ante revenue, buyers' surplus and welfare of interim allocations, and the
//! efficient-welfare benchmark.
//!
//! With `n` symmetric buyers and interim allocation `x`:
//! revenue `Π = n·∫ x·R'`, surplus `U = n·∫ x·(−q·v')`, welfare `n·∫ x·v`.
//! Downward jumps of `v` add point masses weighted by `x(q⁺)`, and a positive utility
//! left to the lowest type moves `n·rent` from revenue to surplus.

use serde::Serialize;

use crate::allocations::{InterimAllocation, Segment};
use crate::distributions::{Shape, ValueCurve};
use crate::math::{pow_one_minus, pow_one_minus_diff, Accumulator};
use crate::quad::Quadrature;

/// Revenue, surplus and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffPoint {
    pub revenue: f64,
    pub surplus: f64,
    pub welfare: f64,
}

impl PayoffPoint {
    pub fn new(revenue: f64, surplus: f64) -> Self {
        PayoffPoint {
            revenue,
            surplus,
            welfare: revenue + surplus,
        }
    }

    /// `α·self + (1 − α)·other`.
    pub fn mix(&self, other: &PayoffPoint, alpha: f64) -> PayoffPoint {
        PayoffPoint::new(
            alpha * self.revenue + (1.0 - alpha) * other.revenue,
            alpha * self.surplus + (1.0 - alpha) * other.surplus,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Density {
    MarginalRevenue,
    Rent,
    Value,
}

fn density(shape: &Shape, kind: Density, q: f64) -> f64 {
    match kind {
        Density::MarginalRevenue => shape.revenue_slope(q),
        Density::Rent => shape.neg_q_deriv(q),
        Density::Value => shape.value(q),
    }
}

fn rev(shape: &Shape, q: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else {
        q * shape.value(q)
    }
}

/// `∫_lo^hi density` within one piece, in closed form.
fn density_integral(shape: &Shape, kind: Density, lo: f64, hi: f64) -> f64 {
    let s = shape.antideriv(hi) - shape.antideriv(lo);
    let r = rev(shape, hi) - rev(shape, lo);
    match kind {
        Density::MarginalRevenue => r,
        Density::Rent => s - r,
        Density::Value => s,
    }
}

/// `∫_lo^hi (1 − q)^{n−1}·density` within one piece.
fn weighted_integral(shape: &Shape, kind: Density, n: u32, lo: f64, hi: f64) -> f64 {
    if n == 1 {
        return density_integral(shape, kind, lo, hi);
    }
    if shape.is_flat() {
        let c = match kind {
            Density::Rent => return 0.0,
            _ => shape.value(hi),
        };
        return c * pow_one_minus_diff(lo, hi, n as f64) / n as f64;
    }
    let k = n as f64 - 1.0;
    let f = |q: f64| pow_one_minus(q, k) * density(shape, kind, q);
    let quad = Quadrature::default();
    let mut acc = Accumulator::default();
    // The weight decays on the scale 1/(n−1); integrate over geometrically growing cells.
    let scale = 1.0 / k;
    let mut a = lo;
    let mut step = scale;
    while a < hi {
        let b = if hi - a > 4.0 * step { a + step } else { hi };
        acc.add(quad.run(&f, a, b).value);
        if pow_one_minus(b, k) == 0.0 {
            break;
        }
        a = b;
        step *= 2.0;
    }
    acc.total()
}

fn segment_integral(curve: &ValueCurve, n: u32, seg: &Segment, kind: Density) -> f64 {
    let mut acc = Accumulator::default();
    let pieces = curve.pieces();
    let start = curve.piece_index(seg.lo).min(pieces.len() - 1);
    for p in &pieces[start..] {
        let lo = p.lo.max(seg.lo);
        let hi = p.hi.min(seg.hi);
        if hi <= lo {
            if p.lo >= seg.hi {
                break;
            }
            continue;
        }
        if seg.b != 0.0 {
            acc.add(seg.b * density_integral(&p.shape, kind, lo, hi));
        }
        if seg.a != 0.0 {
            acc.add(seg.a * weighted_integral(&p.shape, kind, n, lo, hi));
        }
    }
    acc.total()
}

fn total(a: &InterimAllocation, curve: &ValueCurve, kind: Density) -> f64 {
    let mut acc = Accumulator::default();
    for s in a.segments() {
        acc.add(segment_integral(curve, a.n, s, kind));
    }
    let n = a.n as f64;
    if kind != Density::Value {
        for (q0, left, right) in curve.jumps() {
            let mass = q0 * (left - right) * a.x_right(q0);
            acc.add(if kind == Density::Rent { mass } else { -mass });
        }
        acc.add(if kind == Density::Rent { a.rent } else { -a.rent });
    }
    n * acc.total()
}

/// Expected revenue `Π`.
pub fn revenue(a: &InterimAllocation, curve: &ValueCurve) -> f64 {
    total(a, curve, Density::MarginalRevenue)
}

/// Expected total buyers' surplus `U`.
pub fn surplus(a: &InterimAllocation, curve: &ValueCurve) -> f64 {
    total(a, curve, Density::Rent)
}

/// Expected welfare `n·∫ x·v`, computed directly rather than as `Π + U`.
pub fn allocated_welfare(a: &InterimAllocation, curve: &ValueCurve) -> f64 {
    total(a, curve, Density::Value)
}

/// Revenue and surplus of an allocation.
pub fn evaluate(a: &InterimAllocation, curve: &ValueCurve) -> PayoffPoint {
    PayoffPoint::new(revenue(a, curve), surplus(a, curve))
}

/// Expected highest of `n` values, `∫ v·n(1 − q)^{n−1}`.
pub fn opt_welfare(curve: &ValueCurve, n: u32) -> f64 {
    let mut acc = Accumulator::default();
    for p in curve.pieces() {
        acc.add(weighted_integral(&p.shape, Density::Value, n.max(1), p.lo, p.hi));
    }
    n.max(1) as f64 * acc.total()
}
