//! Revenue/surplus Pareto frontier traced by sweeping the objective weight `λ`, plus a
//! discretised linear-programming oracle for independent verification.
//!
//! Every `λ` yields an optimal allocation of `n·∫ x·Λ'_λ`, hence a point on the frontier.
//! Where consecutive grid weights land far apart the sweep bisects `λ`; gaps that survive
//! down to a negligible bracket are jumps, bridged by mixtures of the two neighbours.

use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::Serialize;

use crate::allocations::{canonical, cumulative_cap, InterimAllocation, MechanismSpec};
use crate::curves::{CurveTable, Weight};
use crate::distributions::{ValueCurve, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, PayoffPoint};
use crate::invalid;
use crate::simplex;

/// Parameters of the `λ` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    /// Uniform quantile cells of the curve table.
    pub cells: usize,
    /// Steps of the linear part of the grid on `[0, 1]`.
    pub linear_steps: usize,
    /// Steps of the geometric part of the grid on `[1, lambda_max]`.
    pub geometric_steps: usize,
    pub lambda_max: f64,
    /// Neighbouring points further apart than this (in units of `Π*` plus units of `U*`) are bisected.
    pub refine_tol: f64,
    pub max_depth: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            cells: DEFAULT_GRID,
            linear_steps: 256,
            geometric_steps: 256,
            lambda_max: 64.0,
            refine_tol: 1e-3,
            max_depth: 48,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 || self.linear_steps < 1 || self.geometric_steps < 1 {
            return Err(invalid!("sweep needs at least two cells and one step per grid part"));
        }
        if !(self.lambda_max > 1.0 && self.lambda_max.is_finite()) {
            return Err(invalid!("lambda_max must be a finite number above 1"));
        }
        if !(self.refine_tol > 0.0) {
            return Err(invalid!("refine_tol must be positive"));
        }
        Ok(())
    }

    /// `{i/L}` on `[0, 1]`, then `λ_max^{k/M}` on `(1, λ_max]`, then `∞`.
    pub fn lambda_grid(&self) -> Vec<Weight> {
        let mut out: Vec<Weight> = (0..=self.linear_steps)
            .map(|i| Weight::Finite(i as f64 / self.linear_steps as f64))
            .collect();
        let m = self.geometric_steps as f64;
        for k in 1..=self.geometric_steps {
            out.push(Weight::Finite(libm::pow(self.lambda_max, k as f64 / m)));
        }
        out.push(Weight::Infinite);
        out
    }
}

/// One optimal mechanism on the frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub lambda: Weight,
    /// Mixing weight toward the neighbouring side of a jump; zero for canonical points.
    pub eps: f64,
    pub payoff: PayoffPoint,
    /// Largest served quantile `r(λ)`.
    pub served: f64,
    /// Reserve `v(r(λ))`.
    pub reserve: f64,
    pub pools: Vec<(f64, f64)>,
    pub mechanism: MechanismSpec,
    #[serde(skip)]
    pub allocation: InterimAllocation,
}

/// Swept frontier.
#[derive(Debug, Clone, Serialize)]
pub struct Frontier {
    pub n: u32,
    pub cells: usize,
    /// Every evaluated point, sorted by surplus.
    pub points: Vec<FrontierPoint>,
    /// Indices into `points` of the frontier's extreme points, from the revenue-optimal end.
    pub extreme: Vec<usize>,
    pub pi_star: f64,
    pub u_star: f64,
    /// Surplus at the revenue-optimal point.
    pub u_mye: f64,
    /// `U*` minus the surplus reached at `λ_max`.
    pub lambda_cap_gap: f64,
    #[serde(skip)]
    curve: ValueCurve,
    #[serde(skip)]
    table: CurveTable,
}

/// Point of the frontier chosen for a target, possibly a mixture of two optimal mechanisms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierChoice {
    pub payoff: PayoffPoint,
    /// Probability of running `first`.
    pub alpha: f64,
    pub first: FrontierPoint,
    pub second: Option<FrontierPoint>,
    pub mechanism: MechanismSpec,
    /// Set when the surplus target was below the revenue-optimal surplus and got raised to it.
    pub clamped: bool,
}

impl FrontierPoint {
    /// Quantile mass covered by pools that are not flat stretches of the value curve.
    pub fn coarsened_mass(&self, curve: &ValueCurve) -> f64 {
        let flats = curve.flat_intervals();
        self.pools
            .iter()
            .map(|&(a, b)| {
                let covered: f64 = flats.iter().map(|&(c, d)| (b.min(d) - a.max(c)).max(0.0)).sum();
                (b - a - covered).max(0.0)
            })
            .sum()
    }

    /// Whether the mechanism is a second-price auction with reserve: no pooling beyond
    /// value ties and no randomisation.
    pub fn is_spa_with_reserve(&self, curve: &ValueCurve, tol: f64) -> bool {
        self.eps == 0.0 && self.coarsened_mass(curve) <= tol
    }
}

fn evaluate_weight(curve: &ValueCurve, table: &CurveTable, n: u32, weight: Weight) -> Result<FrontierPoint> {
    let can = canonical(curve, table, weight, n)?;
    let payoff = evaluate(&can.allocation, curve);
    if !(payoff.revenue.is_finite() && payoff.surplus.is_finite()) {
        return Err(Error::Numerical(alloc::format!("non-finite payoff at weight {weight:?}")));
    }
    let mechanism = can.mechanism(curve);
    Ok(FrontierPoint {
        lambda: weight,
        eps: 0.0,
        payoff,
        served: can.analysis.right,
        reserve: curve.v(can.analysis.right),
        pools: can.pools,
        mechanism,
        allocation: can.allocation,
    })
}

/// Weight halfway between two others; doubles toward the surplus-only end.
pub fn mid_weight(a: Weight, b: Weight) -> Weight {
    match (a, b) {
        (Weight::Finite(x), Weight::Finite(y)) => Weight::Finite(0.5 * (x + y)),
        (Weight::Finite(x), Weight::Infinite) => Weight::Finite((2.0 * x).max(1.0)),
        (Weight::Infinite, _) => Weight::Infinite,
    }
}

fn bracket_exhausted(a: Weight, b: Weight) -> bool {
    match (a, b) {
        (Weight::Finite(x), Weight::Finite(y)) => (y - x).abs() <= 1e-10 * y.abs().max(1.0),
        (Weight::Finite(x), Weight::Infinite) => x > 1e15,
        _ => true,
    }
}

fn blended(a: &FrontierPoint, b: &FrontierPoint, eps: f64) -> Result<FrontierPoint> {
    // The canonical side is `b` for weights up to 1 and `a` above 1, mixed toward the other.
    let (base, side) = if b.lambda.as_f64() <= 1.0 { (b, a) } else { (a, b) };
    Ok(FrontierPoint {
        lambda: base.lambda,
        eps,
        payoff: base.payoff.mix(&side.payoff, 1.0 - eps),
        served: base.served.max(side.served),
        reserve: base.reserve.min(side.reserve),
        pools: base.pools.clone(),
        mechanism: MechanismSpec::Mixture {
            alpha: 1.0 - eps,
            first: Box::new(base.mechanism.clone()),
            second: Box::new(side.mechanism.clone()),
        },
        allocation: base.allocation.blend(&side.allocation, eps)?,
    })
}

struct Sweeper<'a> {
    curve: &'a ValueCurve,
    table: &'a CurveTable,
    n: u32,
    cfg: SweepConfig,
    pi_scale: f64,
    u_scale: f64,
}

impl Sweeper<'_> {
    fn gap(&self, a: &PayoffPoint, b: &PayoffPoint) -> f64 {
        (a.revenue - b.revenue).abs() / self.pi_scale + (a.surplus - b.surplus).abs() / self.u_scale
    }

    fn refine(&self, a: &FrontierPoint, b: &FrontierPoint, depth: u32, out: &mut Vec<FrontierPoint>) -> Result<()> {
        if self.gap(&a.payoff, &b.payoff) <= self.cfg.refine_tol {
            return Ok(());
        }
        if depth >= self.cfg.max_depth || bracket_exhausted(a.lambda, b.lambda) {
            for eps in [0.25, 0.5, 0.75] {
                out.push(blended(a, b, eps)?);
            }
            return Ok(());
        }
        let mid = evaluate_weight(self.curve, self.table, self.n, mid_weight(a.lambda, b.lambda))?;
        self.refine(a, &mid, depth + 1, out)?;
        self.refine(&mid, b, depth + 1, out)?;
        out.push(mid);
        Ok(())
    }
}

/// Trace the frontier for `n` buyers.
pub fn sweep(curve: &ValueCurve, n: u32, cfg: &SweepConfig) -> Result<Frontier> {
    cfg.validate()?;
    if n == 0 {
        return Err(invalid!("need at least one buyer"));
    }
    let table = CurveTable::new(curve, cfg.cells);
    let grid = cfg.lambda_grid();
    let mut base = Vec::with_capacity(grid.len());
    for &w in &grid {
        base.push(evaluate_weight(curve, &table, n, w)?);
    }
    let pi_scale = base.iter().fold(0.0f64, |m, p| m.max(p.payoff.revenue));
    let u_scale = base.iter().fold(0.0f64, |m, p| m.max(p.payoff.surplus));
    if !(pi_scale > 0.0 && u_scale > 0.0) {
        return Err(Error::Precondition("the frontier is degenerate: zero optimal revenue or surplus".into()));
    }
    let sweeper = Sweeper {
        curve,
        table: &table,
        n,
        cfg: *cfg,
        pi_scale,
        u_scale,
    };
    let mut extra = Vec::new();
    for w in base.windows(2) {
        sweeper.refine(&w[0], &w[1], 0, &mut extra)?;
    }
    let at_cap = base[base.len() - 2].payoff.surplus;
    let mut points = base;
    points.extend(extra);
    Frontier::assemble(curve.clone(), table, n, cfg.cells, points, at_cap)
}

impl Frontier {
    fn assemble(curve: ValueCurve, table: CurveTable, n: u32, cells: usize, mut points: Vec<FrontierPoint>, at_cap: f64) -> Result<Self> {
        points.sort_by(|a, b| {
            a.payoff
                .surplus
                .total_cmp(&b.payoff.surplus)
                .then(b.payoff.revenue.total_cmp(&a.payoff.revenue))
                .then(a.lambda.as_f64().total_cmp(&b.lambda.as_f64()))
        });
        let extreme = pareto_hull(&points);
        let first = &points[extreme[0]];
        let last = &points[extreme[extreme.len() - 1]];
        let pi_star = first.payoff.revenue;
        let u_mye = first.payoff.surplus;
        let u_star = last.payoff.surplus;
        Ok(Frontier {
            n,
            cells,
            lambda_cap_gap: u_star - at_cap,
            points,
            extreme,
            pi_star,
            u_star,
            u_mye,
            curve,
            table,
        })
    }

    pub fn curve(&self) -> &ValueCurve {
        &self.curve
    }

    /// Extreme points in frontier order.
    pub fn vertices(&self) -> impl Iterator<Item = &FrontierPoint> + '_ {
        self.extreme.iter().map(move |&i| &self.points[i])
    }

    /// Revenue-optimal point.
    pub fn myerson(&self) -> &FrontierPoint {
        &self.points[self.extreme[0]]
    }

    /// Surplus-optimal point.
    pub fn buyer_optimal(&self) -> &FrontierPoint {
        &self.points[self.extreme[self.extreme.len() - 1]]
    }

    /// Optimal point for one weight, computed on the sweep's curve table.
    pub fn point_at(&self, weight: Weight) -> Result<FrontierPoint> {
        evaluate_weight(&self.curve, &self.table, self.n, weight)
    }

    /// Smallest and largest weight among canonical points with the same payoff as `p`.
    pub fn weight_range(&self, p: &FrontierPoint) -> (f64, f64) {
        if p.eps != 0.0 {
            return (p.lambda.as_f64(), p.lambda.as_f64());
        }
        let tol = 1e-12 * (self.pi_star + self.u_star);
        self.points
            .iter()
            .filter(|o| o.eps == 0.0)
            .filter(|o| (o.payoff.revenue - p.payoff.revenue).abs() <= tol && (o.payoff.surplus - p.payoff.surplus).abs() <= tol)
            .map(|o| o.lambda.as_f64())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l), hi.max(l)))
    }

    /// Weight at which the optimum jumps from `a` to `b`, located to the sweep's bisection precision.
    pub fn jump_weight(&self, a: &FrontierPoint, b: &FrontierPoint) -> f64 {
        let (_, a_hi) = self.weight_range(a);
        let (b_lo, _) = self.weight_range(b);
        0.5 * (a_hi + b_lo)
    }

    /// Largest revenue of a mixture of extreme points with surplus `u`, if `u ∈ [u_mye, U*]`.
    pub fn revenue_at(&self, u: f64) -> Option<f64> {
        let (k, alpha) = self.segment(u)?;
        let a = &self.points[self.extreme[k]].payoff;
        match self.extreme.get(k + 1) {
            Some(&j) => Some(alpha * a.revenue + (1.0 - alpha) * self.points[j].payoff.revenue),
            None => Some(a.revenue),
        }
    }

    /// Index `k` into `extreme` and weight `α` with `α·U_k + (1 − α)·U_{k+1} = u`.
    pub fn segment(&self, u: f64) -> Option<(usize, f64)> {
        let tol = 1e-12 * self.u_star.abs().max(1e-300);
        if u < self.u_mye - tol || u > self.u_star + tol {
            return None;
        }
        let us: Vec<f64> = self.vertices().map(|p| p.payoff.surplus).collect();
        if us.len() == 1 {
            return Some((0, 1.0));
        }
        let k = us.partition_point(|&x| x <= u).clamp(1, us.len() - 1) - 1;
        let (u0, u1) = (us[k], us[k + 1]);
        let alpha = if u1 > u0 { ((u1 - u) / (u1 - u0)).clamp(0.0, 1.0) } else { 1.0 };
        Some((k, alpha))
    }

    /// Search along the weight path between extreme points `k` and `k + 1` for the point where
    /// the non-decreasing score `phi` crosses zero, accepting `|phi| ≤ 1e-13`. Returns either a
    /// single optimal point or the two sides of a jump.
    pub fn bisect_between(&self, k: usize, phi: impl Fn(&FrontierPoint) -> f64) -> Result<(FrontierPoint, Option<FrontierPoint>)> {
        let mut lo = self.points[self.extreme[k]].clone();
        let Some(&j) = self.extreme.get(k + 1) else {
            return Ok((lo, None));
        };
        let mut hi = self.points[j].clone();
        if lo.eps != 0.0 || hi.eps != 0.0 {
            return Ok((lo, Some(hi)));
        }
        for _ in 0..200 {
            if phi(&lo) >= -1e-13 {
                return Ok((lo, None));
            }
            if phi(&hi).abs() <= 1e-13 {
                return Ok((hi, None));
            }
            if bracket_exhausted(lo.lambda, hi.lambda) {
                break;
            }
            let mid = self.point_at(mid_weight(lo.lambda, hi.lambda))?;
            let s = phi(&mid);
            if s.abs() <= 1e-13 {
                return Ok((mid, None));
            }
            if s < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, Some(hi)))
    }

    /// Best revenue subject to surplus at least `u_target`.
    pub fn max_revenue_given_surplus(&self, u_target: f64) -> Result<FrontierChoice> {
        let tol = 1e-9 * self.u_star.abs().max(1e-300);
        if !u_target.is_finite() || u_target > self.u_star + tol {
            return Err(Error::Infeasible(alloc::format!(
                "surplus target {u_target} exceeds the largest achievable surplus {}",
                self.u_star
            )));
        }
        if u_target <= self.u_mye {
            let p = self.myerson().clone();
            return Ok(single(p, u_target < self.u_mye));
        }
        let target = u_target.min(self.u_star);
        let (k, _) = self.segment(target).ok_or_else(|| Error::Numerical("surplus target not bracketed".into()))?;
        let scale = self.u_star;
        let (a, b) = self.bisect_between(k, |p| (p.payoff.surplus - target) / scale)?;
        match b {
            None => Ok(single(a, false)),
            Some(b) => Ok(mixture(a, b, |p| p.surplus, target)),
        }
    }
}

pub(crate) fn single(p: FrontierPoint, clamped: bool) -> FrontierChoice {
    FrontierChoice {
        payoff: p.payoff,
        alpha: 1.0,
        mechanism: p.mechanism.clone(),
        first: p,
        second: None,
        clamped,
    }
}

/// Mixture of `a` and `b` whose coordinate `f` equals `target`.
pub(crate) fn mixture(a: FrontierPoint, b: FrontierPoint, f: impl Fn(&PayoffPoint) -> f64, target: f64) -> FrontierChoice {
    let (fa, fb) = (f(&a.payoff), f(&b.payoff));
    let alpha = if fb != fa { ((fb - target) / (fb - fa)).clamp(0.0, 1.0) } else { 1.0 };
    mix_with(a, b, alpha)
}

pub(crate) fn mix_with(a: FrontierPoint, b: FrontierPoint, alpha: f64) -> FrontierChoice {
    FrontierChoice {
        payoff: a.payoff.mix(&b.payoff, alpha),
        alpha,
        mechanism: MechanismSpec::Mixture {
            alpha,
            first: Box::new(a.mechanism.clone()),
            second: Box::new(b.mechanism.clone()),
        },
        first: a,
        second: Some(b),
        clamped: false,
    }
}

/// Indices of the upper-right concave hull of points sorted by surplus, starting at the
/// revenue-optimal point with the largest surplus.
fn pareto_hull(points: &[FrontierPoint]) -> Vec<usize> {
    let mut chain: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (x, y) = (p.payoff.surplus, p.payoff.revenue);
        if let Some(&last) = chain.last() {
            if points[last].payoff.surplus == x {
                continue;
            }
        }
        while chain.len() >= 2 {
            let a = &points[chain[chain.len() - 2]].payoff;
            let b = &points[chain[chain.len() - 1]].payoff;
            let lhs = (b.revenue - a.revenue) * (x - a.surplus);
            let rhs = (y - a.revenue) * (b.surplus - a.surplus);
            // Points on a chord up to rounding are dropped, so mixtures span canonical points.
            if lhs <= rhs + 1e-12 * (lhs.abs() + rhs.abs()) {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(i);
    }
    let top = chain.iter().map(|&i| points[i].payoff.revenue).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * top.abs();
    let start = chain.iter().rposition(|&i| points[i].payoff.revenue >= top - tol).unwrap_or(0);
    chain.split_off(start)
}

/// Payoff reached by the linear-programming oracle for one scalarisation weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OraclePoint {
    /// Weight on revenue; surplus gets `1 − weight`.
    pub weight: f64,
    pub payoff: PayoffPoint,
    pub iterations: usize,
}

/// Maximise `w·Π + (1 − w)·U` over allocations that are constant on `cells` equal quantile cells,
/// subject to monotonicity, `x ≤ 1` and the cumulative cap at every cell boundary.
pub fn lp_oracle_frontier(curve: &ValueCurve, n: u32, cells: usize, weights: &[f64]) -> Result<Vec<OraclePoint>> {
    if !(2..=256).contains(&cells) {
        return Err(invalid!("the oracle grid must have between 2 and 256 cells, got {cells}"));
    }
    if n == 0 {
        return Err(invalid!("need at least one buyer"));
    }
    let m = cells;
    let h = 1.0 / m as f64;
    let qs: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    let d_rev: Vec<f64> = (0..m).map(|j| curve.r(qs[j + 1]) - curve.r(qs[j])).collect();
    let d_sur: Vec<f64> = (0..m).map(|j| curve.w(qs[j + 1]) - curve.w(qs[j])).collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * m);
    let mut rhs = Vec::with_capacity(2 * m);
    let mut cap = alloc::vec![0.0; m];
    cap[0] = 1.0;
    rows.push(cap);
    rhs.push(1.0);
    for j in 0..m - 1 {
        let mut row = alloc::vec![0.0; m];
        row[j] = -1.0;
        row[j + 1] = 1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    for k in 0..m {
        let mut row = alloc::vec![0.0; m];
        row[..=k].iter_mut().for_each(|x| *x = h);
        rows.push(row);
        rhs.push(cumulative_cap(n, qs[k + 1]));
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(weights.len());
    for &w in weights {
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid!("scalarisation weights must lie in [0, 1], got {w}"));
        }
        let c: Vec<f64> = (0..m).map(|j| nf * (w * d_rev[j] + (1.0 - w) * d_sur[j])).collect();
        let sol = simplex::maximize(&c, &rows, &rhs, 200_000)?;
        let revenue = nf * sol.x.iter().zip(&d_rev).map(|(x, d)| x * d).sum::<f64>();
        let surplus = nf * sol.x.iter().zip(&d_sur).map(|(x, d)| x * d).sum::<f64>();
        out.push(OraclePoint {
            weight: w,
            payoff: PayoffPoint::new(revenue, surplus),
            iterations: sol.iterations,
        });
    }
    Ok(out)
}

/// Disagreement between the sweep and oracle payoffs, relative to `Π*` and `U*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleGap {
    /// Largest amount by which an oracle point lies above the sweep frontier.
    pub oracle_over_sweep: f64,
    /// Largest amount by which the sweep's scalarised optimum beats the oracle's.
    pub sweep_over_oracle: f64,
}

impl OracleGap {
    pub fn max(&self) -> f64 {
        self.oracle_over_sweep.max(self.sweep_over_oracle)
    }
}

/// Compare oracle payoffs against the swept frontier in both directions.
pub fn oracle_gap(frontier: &Frontier, oracle: &[OraclePoint]) -> OracleGap {
    let (ps, us) = (frontier.pi_star, frontier.u_star);
    let mut above: f64 = 0.0;
    let mut below: f64 = 0.0;
    for o in oracle {
        let (pi, u) = (o.payoff.revenue, o.payoff.surplus);
        let excess = if u > us {
            (u - us) / us
        } else if u < frontier.u_mye {
            (pi - ps) / ps
        } else {
            (pi - frontier.revenue_at(u).unwrap_or(ps)) / ps
        };
        above = above.max(excess);
        let w = o.weight;
        let best = frontier
            .vertices()
            .map(|p| w * p.payoff.revenue + (1.0 - w) * p.payoff.surplus)
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = w * ps + (1.0 - w) * us;
        below = below.max((best - (w * pi + (1.0 - w) * u)) / scale);
    }
    OracleGap {
        oracle_over_sweep: above,
        sweep_over_oracle: below,
    }
}
