//! Symmetric interim allocations, Border feasibility, canonical optimal allocations
//! and the allocations induced by concrete mechanisms.
//!
//! An interim allocation is the probability `x(q)` that a buyer at quantile `q` wins.
//! Every allocation built here is piecewise of the form `x(q) = a·(1 − q)^{n−1} + b`:
//! unpooled stretches use `a = 1, b = 0` (win against every lower type), pools and
//! lotteries use `a = 0`. The family is closed under mixing, so blends stay exact.

use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::curves::{analyze, CurveTable, MixedAnalysis, Weight};
use crate::distributions::ValueCurve;
use crate::error::{Error, Result};
use crate::invalid;
use crate::math::{one_minus_pow_one_minus, pow_one_minus, pow_one_minus_diff};

/// Tolerance used by [`InterimAllocation::border_check`].
pub const BORDER_TOL: f64 = 1e-9;

/// `x(q) = a·(1 − q)^{n−1} + b` on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
}

/// A symmetric interim allocation for `n` buyers.
///
/// `rent` is the interim utility of the lowest type `q = 1`, which the payment rule
/// may leave positive (a free lottery, or a bid level below the lowest value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterimAllocation {
    pub n: u32,
    segments: Vec<Segment>,
    #[serde(skip)]
    cum: Vec<f64>,
    pub rent: f64,
}

/// The first Border constraint found violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BorderViolation {
    /// `x` increases at `q`.
    NotMonotone { q: f64, excess: f64 },
    /// `x(q) > 1`.
    PerBuyerCap { q: f64, excess: f64 },
    /// `X(q) > (1 − (1 − q)^n)/n`.
    CumulativeCap { q: f64, excess: f64 },
}

/// Largest feasible cumulative allocation `X̂(q) = (1 − (1 − q)^n)/n`.
pub fn cumulative_cap(n: u32, q: f64) -> f64 {
    one_minus_pow_one_minus(q, n as f64) / n as f64
}

/// Interim winning probability of a pool of types on quantiles `(lo, hi]` whose ties are
/// broken uniformly: `((1 − lo)^n − (1 − hi)^n)/(n·(hi − lo))`.
pub fn pool_share(n: u32, lo: f64, hi: f64) -> f64 {
    let p = hi - lo;
    if !(p > 0.0) {
        return pow_one_minus(lo, n as f64 - 1.0);
    }
    pow_one_minus_diff(lo, hi, n as f64) / (n as f64 * p)
}

impl InterimAllocation {
    pub fn new(n: u32, segments: Vec<Segment>, rent: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid!("an allocation needs at least one buyer"));
        }
        if segments.is_empty() || segments[0].lo != 0.0 || segments[segments.len() - 1].hi != 1.0 {
            return Err(invalid!("allocation segments must tile [0, 1]"));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.hi > s.lo) || !s.a.is_finite() || !s.b.is_finite() {
                return Err(invalid!("segment {i} is empty or not finite"));
            }
            if i > 0 && segments[i - 1].hi != s.lo {
                return Err(invalid!("segment {i} does not start where segment {} ends", i - 1));
            }
        }
        let mut cum = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for s in &segments {
            cum.push(acc);
            acc += seg_integral(n, s, s.hi);
        }
        Ok(InterimAllocation { n, segments, cum, rent })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn seg_index(&self, q: f64) -> usize {
        self.segments.partition_point(|s| s.hi < q).min(self.segments.len() - 1)
    }

    /// `x(q)`, left-continuous.
    pub fn x(&self, q: f64) -> f64 {
        seg_value(self.n, &self.segments[self.seg_index(q)], q)
    }

    /// Right limit `x(q⁺)`.
    pub fn x_right(&self, q: f64) -> f64 {
        let i = self.seg_index(q);
        if q == self.segments[i].hi && i + 1 < self.segments.len() {
            seg_value(self.n, &self.segments[i + 1], q)
        } else {
            seg_value(self.n, &self.segments[i], q)
        }
    }

    /// Cumulative allocation `X(q) = ∫₀^q x`.
    pub fn cum(&self, q: f64) -> f64 {
        let i = self.seg_index(q);
        self.cum[i] + seg_integral(self.n, &self.segments[i], q)
    }

    /// Probability that the item is sold, `n·X(1)`.
    pub fn sale_probability(&self) -> f64 {
        self.n as f64 * self.cum(1.0)
    }

    /// `(1 − α)·self + α·other`.
    pub fn blend(&self, other: &InterimAllocation, alpha: f64) -> Result<InterimAllocation> {
        if self.n != other.n {
            return Err(invalid!("cannot blend allocations for {} and {} buyers", self.n, other.n));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid!("blend weight must lie in [0, 1], got {alpha}"));
        }
        let mut cuts: Vec<f64> = self
            .segments
            .iter()
            .chain(&other.segments)
            .map(|s| s.hi)
            .collect();
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let mut segments = Vec::with_capacity(cuts.len());
        let mut lo = 0.0;
        for &hi in &cuts {
            if hi <= lo {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let s1 = self.segments[self.seg_index(mid)];
            let s2 = other.segments[other.seg_index(mid)];
            segments.push(Segment {
                lo,
                hi,
                a: (1.0 - alpha) * s1.a + alpha * s2.a,
                b: (1.0 - alpha) * s1.b + alpha * s2.b,
            });
            lo = hi;
        }
        InterimAllocation::new(self.n, segments, (1.0 - alpha) * self.rent + alpha * other.rent)
    }

    /// Check monotonicity, `x ≤ 1` and the cumulative cap `X ≤ X̂` with tolerance [`BORDER_TOL`].
    pub fn border_check(&self) -> core::result::Result<(), BorderViolation> {
        let n = self.n;
        let x_cap = 1.0;
        for (i, s) in self.segments.iter().enumerate() {
            let top = seg_value(n, s, s.lo);
            if top > x_cap + BORDER_TOL {
                return Err(BorderViolation::PerBuyerCap {
                    q: s.lo,
                    excess: top - x_cap,
                });
            }
            if n > 1 && s.a < -BORDER_TOL {
                return Err(BorderViolation::NotMonotone {
                    q: s.lo,
                    excess: -s.a,
                });
            }
            if i > 0 {
                let prev = seg_value(n, &self.segments[i - 1], s.lo);
                if top > prev + BORDER_TOL {
                    return Err(BorderViolation::NotMonotone {
                        q: s.lo,
                        excess: top - prev,
                    });
                }
            }
        }
        let mut probes: Vec<f64> = (0..=4096).map(|i| i as f64 / 4096.0).collect();
        for s in &self.segments {
            for k in 0..=16 {
                probes.push(s.lo + (s.hi - s.lo) * k as f64 / 16.0);
            }
        }
        probes.sort_by(|a, b| a.total_cmp(b));
        for q in probes {
            let excess = self.cum(q) - cumulative_cap(n, q);
            if excess > BORDER_TOL {
                return Err(BorderViolation::CumulativeCap { q, excess });
            }
        }
        Ok(())
    }

    /// Rows `(q, x, X, X̂)` on a uniform grid with `cells` cells.
    pub fn table(&self, cells: usize) -> Vec<[f64; 4]> {
        let cells = cells.max(1);
        (0..=cells)
            .map(|i| {
                let q = i as f64 / cells as f64;
                [q, self.x(q), self.cum(q), cumulative_cap(self.n, q)]
            })
            .collect()
    }
}

#[inline]
fn seg_value(n: u32, s: &Segment, q: f64) -> f64 {
    if s.a == 0.0 {
        s.b
    } else {
        s.a * pow_one_minus(q, n as f64 - 1.0) + s.b
    }
}

#[inline]
fn seg_integral(n: u32, s: &Segment, q: f64) -> f64 {
    let mut v = s.b * (q - s.lo);
    if s.a != 0.0 {
        v += s.a * pow_one_minus_diff(s.lo, q, n as f64) / n as f64;
    }
    v
}

/// Merge overlapping intervals, dropping empty ones.
fn merge_pools(mut pools: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pools.retain(|p| p.1 > p.0);
    pools.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pools.len());
    for p in pools {
        match out.last_mut() {
            Some(last) if p.0 < last.1 => last.1 = last.1.max(p.1),
            _ => out.push(p),
        }
    }
    out
}

/// Allocation that serves quantiles `[0, served]`, pooling each interval of `pools` and
/// every flat stretch of `v`, and giving unpooled types `(1 − q)^{n−1}`.
fn pooled_allocation(curve: &ValueCurve, n: u32, pools: Vec<(f64, f64)>, served: f64, rent: f64) -> Result<(Vec<(f64, f64)>, InterimAllocation)> {
    let mut all = pools;
    all.extend(curve.flat_intervals());
    let pools: Vec<(f64, f64)> = merge_pools(
        all.into_iter()
            .filter(|p| p.0 < served)
            .map(|(lo, hi)| (lo, hi.min(served)))
            .collect(),
    );
    let mut segments = Vec::new();
    let mut at = 0.0;
    for &(lo, hi) in &pools {
        if lo > at {
            segments.push(Segment { lo: at, hi: lo, a: 1.0, b: 0.0 });
        }
        segments.push(Segment {
            lo,
            hi,
            a: 0.0,
            b: pool_share(n, lo, hi),
        });
        at = hi;
    }
    if served > at {
        segments.push(Segment { lo: at, hi: served, a: 1.0, b: 0.0 });
        at = served;
    }
    if at < 1.0 {
        segments.push(Segment { lo: at, hi: 1.0, a: 0.0, b: 0.0 });
    }
    let alloc = InterimAllocation::new(n, segments, rent)?;
    Ok((pools, alloc))
}

/// Optimal allocation for one objective weight, with the data needed to implement it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Canonical {
    pub analysis: MixedAnalysis,
    /// Quantile intervals whose types share one winning probability.
    pub pools: Vec<(f64, f64)>,
    pub allocation: InterimAllocation,
}

/// Canonical maximiser of `n·∫ x·Λ'` over Border-feasible allocations: `X = X̂` off the
/// ironed intervals, the chord of `X̂` across each ironed interval, and nothing beyond `r`.
pub fn canonical(curve: &ValueCurve, table: &CurveTable, weight: Weight, n: u32) -> Result<Canonical> {
    if n == 0 {
        return Err(invalid!("need at least one buyer"));
    }
    let analysis = analyze(curve, table, weight)?;
    let (pools, allocation) = pooled_allocation(curve, n, analysis.ironed.clone(), analysis.right, 0.0)?;
    Ok(Canonical {
        analysis,
        pools,
        allocation,
    })
}

/// The canonical allocation at `weight`, blended with weight `eps` toward the canonical
/// allocation just below `λ` (just above when `λ > 1`). `eps = 0` gives the canonical one.
pub fn canonical_allocation(curve: &ValueCurve, table: &CurveTable, weight: Weight, eps: f64, n: u32) -> Result<InterimAllocation> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid!("eps must lie in [0, 1], got {eps}"));
    }
    let base = canonical(curve, table, weight, n)?.allocation;
    if eps == 0.0 {
        return Ok(base);
    }
    let neighbour = match weight {
        Weight::Finite(l) if l > 1.0 => Weight::Finite(l + 1e-7 * l),
        Weight::Finite(l) if l > 0.0 => Weight::Finite(l - 1e-7 * l.max(1.0)),
        other => other,
    };
    let side = canonical(curve, table, neighbour, n)?.allocation;
    base.blend(&side, eps)
}

impl Canonical {
    /// An indirect Vickrey auction implementing this allocation: each pool becomes a gap in
    /// the bid space whose members bid the pool's lowest value, with reserve `v(r)`.
    pub fn mechanism(&self, curve: &ValueCurve) -> MechanismSpec {
        let mut gaps = Vec::new();
        for &(p0, p1) in &self.pools {
            let lo = curve.v(p1);
            let hi = if p0 == 0.0 { f64::INFINITY } else { curve.v_right(p0) };
            if hi <= lo {
                continue;
            }
            let pieces = curve.pieces();
            let mut i = curve.piece_index(p0);
            if pieces[i].hi == p0 && i + 1 < pieces.len() {
                i += 1;
            }
            gaps.push(Gap {
                lo,
                hi,
                closed_top: p0 > 0.0 && pieces[i].shape.is_flat(),
            });
        }
        gaps.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        // Neighbouring pools meet at a value computed from both sides; snap away rounding overlap.
        for i in 1..gaps.len() {
            let next_lo = gaps[i].lo;
            let prev = &mut gaps[i - 1];
            if prev.hi > next_lo && prev.hi - next_lo <= 1e-12 * next_lo.max(1.0) {
                prev.hi = next_lo;
            }
        }
        MechanismSpec::IndirectVickrey {
            bids: BidSpace::Gaps(gaps),
            reserve: curve.v(self.analysis.right),
        }
    }
}

/// Values excluded from a bid space: bids in `(lo, hi)` are not allowed, and neither is `hi`
/// itself when `closed_top` is set. A buyer whose value falls in the gap bids `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lo: f64,
    /// `null` in serialized form when the gap is unbounded above.
    #[serde(with = "unbounded")]
    pub hi: f64,
    #[serde(default)]
    pub closed_top: bool,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Gap {
    fn contains(&self, v: f64) -> bool {
        (v > self.lo && v < self.hi) || (self.closed_top && v == self.hi)
    }
}

/// Allowed bids of an indirect Vickrey auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BidSpace {
    /// Any non-negative bid.
    Continuous,
    /// Finitely many bid levels, sorted strictly increasing.
    Levels(Vec<f64>),
    /// All non-negative bids except the listed gaps, sorted and disjoint.
    Gaps(Vec<Gap>),
}

impl BidSpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            BidSpace::Continuous => Ok(()),
            BidSpace::Levels(levels) => {
                if levels.is_empty() {
                    return Err(invalid!("bid levels must not be empty"));
                }
                if levels.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return Err(invalid!("bid levels must be finite and non-negative"));
                }
                if levels.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid!("bid levels must be strictly increasing"));
                }
                Ok(())
            }
            BidSpace::Gaps(gaps) => {
                for (i, g) in gaps.iter().enumerate() {
                    if !(g.lo >= 0.0 && g.hi > g.lo) || g.lo.is_infinite() {
                        return Err(invalid!("gap {i} must satisfy 0 <= lo < hi"));
                    }
                    if i > 0 && g.lo < gaps[i - 1].hi {
                        return Err(invalid!("gaps must be sorted and disjoint"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Largest allowed bid not exceeding `v`, if any.
    pub fn effective_bid(&self, v: f64) -> Option<f64> {
        match self {
            BidSpace::Continuous => Some(v),
            BidSpace::Levels(levels) => {
                let i = levels.partition_point(|&b| b <= v);
                if i == 0 {
                    None
                } else {
                    Some(levels[i - 1])
                }
            }
            BidSpace::Gaps(gaps) => Some(gaps.iter().find(|g| g.contains(v)).map_or(v, |g| g.lo)),
        }
    }

    /// Smallest allowed bid at or above `r` (the infimum when it is not attained).
    pub fn lowest_at_least(&self, r: f64) -> Option<f64> {
        match self {
            BidSpace::Continuous => Some(r),
            BidSpace::Levels(levels) => levels.iter().copied().find(|&b| b >= r),
            BidSpace::Gaps(gaps) => {
                let hi = gaps.iter().find(|g| g.contains(r)).map_or(r, |g| g.hi);
                if hi.is_finite() {
                    Some(hi)
                } else {
                    None
                }
            }
        }
    }

    /// Smallest allowed bid strictly above `t` (the infimum when it is not attained).
    pub fn next_above(&self, t: f64) -> Option<f64> {
        match self {
            BidSpace::Continuous => Some(t),
            BidSpace::Levels(levels) => levels.iter().copied().find(|&b| b > t),
            BidSpace::Gaps(gaps) => {
                let hi = gaps.iter().find(|g| g.lo == t).map_or(t, |g| g.hi);
                if hi.is_finite() {
                    Some(hi)
                } else {
                    None
                }
            }
        }
    }

    /// Value sets `[lo, hi)` (or `[lo, hi]` when the flag is set) whose members all place the same bid.
    fn value_pools(&self, floor: f64) -> Vec<(f64, f64, bool)> {
        match self {
            BidSpace::Continuous => Vec::new(),
            BidSpace::Levels(levels) => {
                let mut out = Vec::new();
                for (i, &b) in levels.iter().enumerate() {
                    if b < floor {
                        continue;
                    }
                    let hi = levels.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    out.push((b, hi, false));
                }
                out
            }
            BidSpace::Gaps(gaps) => gaps
                .iter()
                .filter(|g| g.lo >= floor)
                .map(|g| (g.lo, g.hi, g.closed_top))
                .collect(),
        }
    }
}

/// A concrete selling mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MechanismSpec {
    /// Take-it-or-leave-it price for a single buyer.
    PostedPrice { price: f64 },
    /// Second-price auction with an anonymous reserve.
    SpaWithReserve { reserve: f64 },
    /// Second-price auction in which bids must come from `bids` and be at least `reserve`;
    /// every buyer bids the largest allowed bid not above her value and ties are broken uniformly.
    IndirectVickrey { bids: BidSpace, reserve: f64 },
    /// Give the item to a uniformly random buyer for free.
    Lottery,
    /// Run `first` with probability `alpha`, otherwise `second`.
    Mixture {
        alpha: f64,
        first: Box<MechanismSpec>,
        second: Box<MechanismSpec>,
    },
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MechanismSpec::PostedPrice { price } | MechanismSpec::SpaWithReserve { reserve: price } => {
                if price.is_finite() && *price >= 0.0 {
                    Ok(())
                } else {
                    Err(invalid!("price must be finite and non-negative, got {price}"))
                }
            }
            MechanismSpec::IndirectVickrey { bids, reserve } => {
                if !(reserve.is_finite() && *reserve >= 0.0) {
                    return Err(invalid!("reserve must be finite and non-negative, got {reserve}"));
                }
                bids.validate()
            }
            MechanismSpec::Lottery => Ok(()),
            MechanismSpec::Mixture { alpha, first, second } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(invalid!("mixture weight must lie in [0, 1], got {alpha}"));
                }
                first.validate()?;
                second.validate()
            }
        }
    }

    /// Short human-readable label.
    pub fn label(&self) -> alloc::string::String {
        use alloc::format;
        match self {
            MechanismSpec::PostedPrice { price } => format!("posted-price({price})"),
            MechanismSpec::SpaWithReserve { reserve } => format!("spa(reserve={reserve})"),
            MechanismSpec::IndirectVickrey { bids, reserve } => match bids {
                BidSpace::Continuous => format!("indirect-vickrey(continuous, reserve={reserve})"),
                BidSpace::Levels(l) => format!("indirect-vickrey({} levels, reserve={reserve})", l.len()),
                BidSpace::Gaps(g) if g.is_empty() => format!("spa(reserve={reserve})"),
                BidSpace::Gaps(g) => format!("indirect-vickrey({} gaps, reserve={reserve})", g.len()),
            },
            MechanismSpec::Lottery => "lottery".into(),
            MechanismSpec::Mixture { alpha, first, second } => {
                format!("mix({alpha}: {} | {})", first.label(), second.label())
            }
        }
    }
}

/// Interim allocation induced by dominant-strategy play of `spec`.
pub fn allocation_of_mechanism(spec: &MechanismSpec, curve: &ValueCurve, n: u32) -> Result<InterimAllocation> {
    spec.validate()?;
    if n == 0 {
        return Err(invalid!("need at least one buyer"));
    }
    match spec {
        MechanismSpec::PostedPrice { price } => {
            if n != 1 {
                return Err(Error::Unsupported("posted prices are defined for a single buyer".into()));
            }
            let served = curve.quantile_ge(*price);
            let rent = if served >= 1.0 { curve.v_low() - price } else { 0.0 };
            let mut segments = Vec::new();
            if served > 0.0 {
                segments.push(Segment { lo: 0.0, hi: served, a: 0.0, b: 1.0 });
            }
            if served < 1.0 {
                segments.push(Segment { lo: served, hi: 1.0, a: 0.0, b: 0.0 });
            }
            InterimAllocation::new(1, segments, rent)
        }
        MechanismSpec::SpaWithReserve { reserve } => vickrey(curve, n, &BidSpace::Continuous, *reserve),
        MechanismSpec::IndirectVickrey { bids, reserve } => vickrey(curve, n, bids, *reserve),
        MechanismSpec::Lottery => InterimAllocation::new(
            n,
            alloc::vec![Segment {
                lo: 0.0,
                hi: 1.0,
                a: 0.0,
                b: 1.0 / n as f64,
            }],
            curve.v_low() / n as f64,
        ),
        MechanismSpec::Mixture { alpha, first, second } => {
            let a = allocation_of_mechanism(first, curve, n)?;
            let b = allocation_of_mechanism(second, curve, n)?;
            a.blend(&b, 1.0 - alpha)
        }
    }
}

fn vickrey(curve: &ValueCurve, n: u32, bids: &BidSpace, reserve: f64) -> Result<InterimAllocation> {
    let Some(floor) = bids.lowest_at_least(reserve) else {
        return pooled_allocation(curve, n, Vec::new(), 0.0, 0.0).map(|p| p.1);
    };
    let served = curve.quantile_ge(floor);
    let pools: Vec<(f64, f64)> = bids
        .value_pools(floor)
        .into_iter()
        .map(|(lo, hi, closed)| {
            let top = if hi.is_infinite() {
                0.0
            } else if closed {
                curve.quantile_gt(hi)
            } else {
                curve.quantile_ge(hi)
            };
            (top, curve.quantile_ge(lo))
        })
        .collect();
    let (_, mut alloc) = pooled_allocation(curve, n, pools, served, 0.0)?;
    if served >= 1.0 {
        let v_low = curve.v_low();
        if let Some(b) = bids.effective_bid(v_low) {
            alloc.rent = alloc.x(1.0) * (v_low - b).max(0.0);
        }
    }
    Ok(alloc)
}
