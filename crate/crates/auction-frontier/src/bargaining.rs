//! Bargaining solutions on a swept frontier: Kalai–Smorodinsky, Nash (seller and every
//! buyer as separate traders) and cross-side Nash (seller against the buyers as a group).
//!
//! Every weight `λ` is optimal for `Π + λ·U`, so the frontier's slope at a canonical point
//! is `−λ`. The Nash point therefore satisfies `λ = m·Π/U` with `m = n` (or `m = 1` for the
//! cross-side product), a monotone condition in `λ` that is bisected exactly.

use serde::{Deserialize, Serialize};

use crate::allocations::MechanismSpec;
use crate::error::{Error, Result};
use crate::evaluate::{opt_welfare, PayoffPoint};
use crate::frontier::{mix_with, single, Frontier, FrontierChoice, FrontierPoint};
use crate::math::ln;

/// Which bargaining solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    Ks,
    Nash,
    #[serde(alias = "csnash")]
    CrossSideNash,
}

impl SolutionKind {
    pub fn label(&self) -> &'static str {
        match self {
            SolutionKind::Ks => "ks",
            SolutionKind::Nash => "nash",
            SolutionKind::CrossSideNash => "csnash",
        }
    }
}

/// A bargaining outcome and its welfare relative to the efficient allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BargainingSolution {
    pub kind: SolutionKind,
    pub n: u32,
    pub payoff: PayoffPoint,
    pub mechanism: MechanismSpec,
    /// Probability of the first of two mixed mechanisms; 1 for a single mechanism.
    pub alpha: f64,
    /// `Π/Π*`, equal to `U/U*` for the KS solution.
    pub revenue_ratio: f64,
    pub surplus_ratio: f64,
    pub opt: f64,
    pub welfare_ratio: f64,
    /// Set when every frontier point has a zero product and the welfare-maximal one was returned.
    pub degenerate: bool,
}

fn finish(kind: SolutionKind, f: &Frontier, choice: FrontierChoice, degenerate: bool) -> BargainingSolution {
    let opt = opt_welfare(f.curve(), f.n);
    BargainingSolution {
        kind,
        n: f.n,
        payoff: choice.payoff,
        mechanism: choice.mechanism,
        alpha: choice.alpha,
        revenue_ratio: choice.payoff.revenue / f.pi_star,
        surplus_ratio: choice.payoff.surplus / f.u_star,
        opt,
        welfare_ratio: choice.payoff.welfare / opt,
        degenerate,
    }
}

fn check(f: &Frontier) -> Result<()> {
    if !(f.pi_star > 0.0 && f.u_star > 0.0) {
        return Err(Error::Precondition(alloc::format!(
            "bargaining needs positive ideal payoffs, got Π* = {} and U* = {}",
            f.pi_star, f.u_star
        )));
    }
    Ok(())
}

/// Point where both sides get the same fraction of their ideal payoff.
pub fn ks_solution(f: &Frontier) -> Result<BargainingSolution> {
    check(f)?;
    let score = |p: &PayoffPoint| p.surplus / f.u_star - p.revenue / f.pi_star;
    let vertices: alloc::vec::Vec<&FrontierPoint> = f.vertices().collect();
    // Score is −1 at the revenue end at worst and +1 at the surplus end at worst.
    let upper = vertices.iter().position(|p| score(&p.payoff) >= 0.0).unwrap_or(vertices.len() - 1);
    let choice = if upper == 0 {
        single(vertices[0].clone(), false)
    } else {
        let (a, b) = f.bisect_between(upper - 1, |p| score(&p.payoff))?;
        match b {
            None => single(a, false),
            Some(b) => {
                let (sa, sb) = (score(&a.payoff), score(&b.payoff));
                let alpha = if sb != sa { (sb / (sb - sa)).clamp(0.0, 1.0) } else { 1.0 };
                mix_with(a, b, alpha)
            }
        }
    };
    Ok(finish(SolutionKind::Ks, f, choice, false))
}

/// `ln Π + m·ln U`, with `−∞` for a zero coordinate.
fn log_product(p: &PayoffPoint, m: f64) -> f64 {
    if p.revenue > 0.0 && p.surplus > 0.0 {
        ln(p.revenue) + m * ln(p.surplus)
    } else {
        f64::NEG_INFINITY
    }
}

/// Best mixture of two points for `ln Π + m·ln U`; the objective is concave in the weight.
fn best_mix(a: FrontierPoint, b: FrontierPoint, m: f64) -> FrontierChoice {
    let (pa, pb) = (a.payoff, b.payoff);
    let dp = pa.revenue - pb.revenue;
    let du = pa.surplus - pb.surplus;
    let alpha = if dp != 0.0 && du != 0.0 {
        (-(dp * pb.surplus + m * du * pb.revenue) / ((1.0 + m) * dp * du)).clamp(0.0, 1.0)
    } else if log_product(&pa, m) >= log_product(&pb, m) {
        1.0
    } else {
        0.0
    };
    mix_with(a, b, alpha)
}

/// Golden-section maximisation of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn product_solution(f: &Frontier, kind: SolutionKind, m: f64) -> Result<BargainingSolution> {
    if f.points.is_empty() {
        return Err(Error::Precondition("empty frontier".into()));
    }
    let objective = |u: f64| match f.revenue_at(u) {
        Some(pi) => log_product(&PayoffPoint::new(pi, u), m),
        None => f64::NEG_INFINITY,
    };
    // Seed: scan the piecewise-linear frontier, then golden-section around the best sample.
    const SCAN: usize = 512;
    let (u0, u1) = (f.u_mye, f.u_star);
    let step = (u1 - u0) / SCAN as f64;
    let (best_i, best_val) = (0..=SCAN)
        .map(|i| (i, objective(u0 + step * i as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if best_val == f64::NEG_INFINITY {
        let p = f.vertices().max_by(|a, b| a.payoff.welfare.total_cmp(&b.payoff.welfare)).cloned();
        let p = p.ok_or_else(|| Error::Precondition("empty frontier".into()))?;
        return Ok(finish(kind, f, single(p, false), true));
    }
    let lo = u0 + step * best_i.saturating_sub(1) as f64;
    let hi = (u0 + step * (best_i + 1) as f64).min(u1);
    let u_seed = golden_max(objective, lo, hi);
    let (k, _) = f.segment(u_seed).ok_or_else(|| Error::Numerical("seed off the frontier".into()))?;
    let seed_choice = {
        let a = f.points[f.extreme[k]].clone();
        match f.extreme.get(k + 1) {
            Some(&j) => best_mix(a, f.points[j].clone(), m),
            None => single(a, false),
        }
    };
    // Tangency along the weight path: the frontier slope `−λ` meets `−m·Π/U`.
    let tangency = |p: &FrontierPoint| {
        if p.eps != 0.0 || p.payoff.surplus <= 0.0 {
            return f64::NAN;
        }
        p.lambda.as_f64() - m * p.payoff.revenue / p.payoff.surplus
    };
    let mut best = seed_choice;
    if f.extreme.get(k + 1).is_some() {
        let a = &f.points[f.extreme[k]];
        let b = &f.points[f.extreme[k + 1]];
        if tangency(a) < 0.0 && tangency(b) > 0.0 {
            let (x, y) = f.bisect_between(k, tangency)?;
            let refined = match y {
                None => single(x, false),
                Some(y) => best_mix(x, y, m),
            };
            if log_product(&refined.payoff, m) >= log_product(&best.payoff, m) {
                best = refined;
            }
        }
    }
    Ok(finish(kind, f, best, false))
}

/// Maximiser of `Π·(U/n)ⁿ`.
pub fn nash_solution(f: &Frontier) -> Result<BargainingSolution> {
    product_solution(f, SolutionKind::Nash, f.n as f64)
}

/// Maximiser of `Π·U`.
pub fn cross_side_nash_solution(f: &Frontier) -> Result<BargainingSolution> {
    product_solution(f, SolutionKind::CrossSideNash, 1.0)
}

pub fn solve(f: &Frontier, kind: SolutionKind) -> Result<BargainingSolution> {
    match kind {
        SolutionKind::Ks => ks_solution(f),
        SolutionKind::Nash => nash_solution(f),
        SolutionKind::CrossSideNash => cross_side_nash_solution(f),
    }
}
