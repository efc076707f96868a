//! One buyer: how much revenue a single posted price loses against the optimal two-price
//! randomisation when the buyer must keep a minimum surplus.
//!
//! Posting the price `v(q)` sells with probability `q`, earns `R(q) = q·v(q)` and leaves the
//! buyer `W(q) = ∫₀^q v − q·v(q)`, which is non-decreasing in `q`.

use alloc::vec::Vec;
use serde::Serialize;

use crate::distributions::{Family, ValueCurve, DEFAULT_GRID, TIE_TOL};
use crate::error::{Error, Result};
use crate::frontier::{sweep, SweepConfig};
use crate::invalid;
use crate::math::{exp, ln};

/// Outcome of the quasi-regularity check: `R(q)/(1 − q)` must be non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiRegularity {
    pub holds: bool,
    /// Quantiles `q < q′` with `R(q′)/(1 − q′) < R(q)/(1 − q)`.
    pub witness: Option<(f64, f64)>,
}

/// Check quasi-regularity on the grid in one pass over `R(q)/(1 − q)`.
pub fn is_quasi_regular(curve: &ValueCurve, cells: usize) -> QuasiRegularity {
    let grid = curve.grid(cells.max(2));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &q in grid.iter().filter(|&&q| q < 1.0) {
        let ratio = curve.r(q) / (1.0 - q);
        if ratio < best.0 - TIE_TOL * best.0.abs().max(1.0) {
            return QuasiRegularity {
                holds: false,
                witness: Some((best.1, q)),
            };
        }
        if ratio > best.0 {
            best = (ratio, q);
        }
    }
    QuasiRegularity { holds: true, witness: None }
}

/// A posted price and its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PostedPrice {
    pub quantile: f64,
    pub price: f64,
    pub revenue: f64,
    pub surplus: f64,
}

impl PostedPrice {
    fn at(curve: &ValueCurve, q: f64) -> Self {
        PostedPrice {
            quantile: q,
            price: curve.v(q),
            revenue: curve.r(q),
            surplus: curve.w(q),
        }
    }
}

/// Smallest quantile whose posted price leaves the buyer at least `u_target`.
fn surplus_threshold(curve: &ValueCurve, u_target: f64) -> f64 {
    if curve.w(0.0) >= u_target {
        return 0.0;
    }
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if curve.w(m) >= u_target {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Revenue-maximising posted price among those leaving surplus at least `u_target`; ties go
/// to the lowest price.
pub fn best_single_price(curve: &ValueCurve, u_target: f64, cells: usize) -> Result<PostedPrice> {
    let top = curve.w(1.0);
    if !(u_target <= top * (1.0 + 1e-12)) {
        return Err(Error::Infeasible(alloc::format!(
            "no posted price leaves surplus {u_target}; the most is {top}"
        )));
    }
    let q_min = surplus_threshold(curve, u_target.min(top));
    let mut candidates: Vec<f64> = alloc::vec![q_min];
    candidates.extend(curve.grid(cells.max(2)).into_iter().filter(|&q| q > q_min));
    let vals: Vec<f64> = candidates.iter().map(|&q| curve.r(q)).collect();
    let (i, _) = crate::distributions::last_argmax(&vals);
    let q = curve.refine_stationary(&candidates, i, |s, q| s.revenue_slope(q)).max(q_min);
    let refined = PostedPrice::at(curve, q);
    let gridded = PostedPrice::at(curve, candidates[i]);
    Ok(if refined.revenue > gridded.revenue { refined } else { gridded })
}

/// The two-price lower-bound expression at `(ℓ, q)`.
pub fn approximation_bound(ell: f64, q: f64) -> f64 {
    let d = q * (ln(q) - ln(ell));
    (d + (1.0 - q) * (1.0 - q)) / (d + (1.0 - ell) * (1.0 - q))
}

/// Single-price revenue over two-price revenue on the tight quasi-regular instance.
pub fn inapproximability_ratio(ell: f64, q: f64) -> f64 {
    (q * ln(q) - ln(ell)) / (ell * ln(q) - ln(ell))
}

/// The printed ratio for the price-gap instance, `(K + ln K − ln 2)/(K ln K + K − K ln 2)`.
pub fn price_gap_ratio_printed(k: f64) -> f64 {
    let l = ln(k / 2.0);
    (k + l) / (k * (l + 1.0))
}

/// The same ratio with the buyer's surplus at quantile ½ computed exactly, which lowers the
/// logarithmic term by ½.
pub fn price_gap_ratio_exact(k: f64) -> f64 {
    let l = ln(k / 2.0) - 0.5;
    (k + l) / (k * (l + 1.0))
}

/// Location and value of a minimum over `0 < ℓ < q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimizer {
    pub ell: f64,
    pub q: f64,
    pub value: f64,
}

fn restricted(f: impl Fn(f64, f64) -> f64) -> impl Fn(f64, f64) -> f64 {
    move |ell, q| {
        if ell > 0.0 && ell < q && q < 1.0 {
            f(ell, q)
        } else {
            f64::INFINITY
        }
    }
}

/// Nelder–Mead on two variables.
fn nelder_mead(f: &impl Fn(f64, f64) -> f64, start: (f64, f64), step: f64) -> Minimizer {
    let mut s = [
        (start.0, start.1),
        (start.0 + step, start.1),
        (start.0, start.1 + step),
    ];
    let mut fs = s.map(|p| f(p.0, p.1));
    for _ in 0..2000 {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        s = idx.map(|i| s[i]);
        fs = idx.map(|i| fs[i]);
        let size = (s[1].0 - s[0].0).abs().max((s[1].1 - s[0].1).abs()).max((s[2].0 - s[0].0).abs()).max((s[2].1 - s[0].1).abs());
        if size < 1e-12 && (fs[2] - fs[0]).abs() < 1e-15 {
            break;
        }
        let c = (0.5 * (s[0].0 + s[1].0), 0.5 * (s[0].1 + s[1].1));
        let at = |t: f64| (c.0 + t * (s[2].0 - c.0), c.1 + t * (s[2].1 - c.1));
        let r = at(-1.0);
        let fr = f(r.0, r.1);
        if fr < fs[0] {
            let e = at(-2.0);
            let fe = f(e.0, e.1);
            if fe < fr {
                (s[2], fs[2]) = (e, fe);
            } else {
                (s[2], fs[2]) = (r, fr);
            }
        } else if fr < fs[1] {
            (s[2], fs[2]) = (r, fr);
        } else {
            let k = if fr < fs[2] { at(-0.5) } else { at(0.5) };
            let fk = f(k.0, k.1);
            if fk < fs[2].min(fr) {
                (s[2], fs[2]) = (k, fk);
            } else {
                for j in 1..3 {
                    s[j] = (0.5 * (s[0].0 + s[j].0), 0.5 * (s[0].1 + s[j].1));
                    fs[j] = f(s[j].0, s[j].1);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap_or(0);
    Minimizer {
        ell: s[best].0,
        q: s[best].1,
        value: fs[best],
    }
}

/// Minimise over `0 < ℓ < q < 1`: scan a `steps × steps` grid, then polish with Nelder–Mead.
pub fn minimize_ratio(f: impl Fn(f64, f64) -> f64, steps: usize) -> Minimizer {
    let g = restricted(f);
    let h = 1.0 / steps as f64;
    let mut best = Minimizer {
        ell: 0.0,
        q: 0.0,
        value: f64::INFINITY,
    };
    for i in 0..steps {
        for j in 0..steps {
            let (ell, q) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let value = g(ell, q);
            if value < best.value {
                best = Minimizer { ell, q, value };
            }
        }
    }
    let polished = nelder_mead(&g, (best.ell, best.q), h);
    if polished.value <= best.value {
        polished
    } else {
        best
    }
}

/// Values on a `steps × steps` grid over `0 < ℓ < q < 1`, as `(ℓ, q, value)` rows.
pub fn ratio_heatmap(f: impl Fn(f64, f64) -> f64, steps: usize) -> Vec<[f64; 3]> {
    let g = restricted(f);
    let h = 1.0 / steps as f64;
    let mut out = Vec::new();
    for i in 0..steps {
        for j in 0..steps {
            let (ell, q) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let v = g(ell, q);
            if v.is_finite() {
                out.push([ell, q, v]);
            }
        }
    }
    out
}

/// Single-price versus two-price revenue for one instance and surplus target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxReport {
    pub instance: alloc::string::String,
    pub surplus_target: f64,
    pub single_price: PostedPrice,
    pub two_price_revenue: f64,
    /// Probability on the higher of the two prices.
    pub two_price_alpha: f64,
    /// Objective weight at which the two optimal prices tie.
    pub tie_weight: Option<f64>,
    pub ratio: f64,
    /// The instance's closed-form ratio.
    pub closed_form: f64,
}

/// Run the frontier at one buyer and the best single price for the same surplus target,
/// both on a quantile grid of `cells` cells.
pub fn compare_on_curve(curve: &ValueCurve, u_target: f64, closed_form: f64, cells: usize) -> Result<ApproxReport> {
    let cfg = SweepConfig {
        cells,
        ..SweepConfig::default()
    };
    let frontier = sweep(curve, 1, &cfg)?;
    let choice = frontier.max_revenue_given_surplus(u_target)?;
    let single = best_single_price(curve, u_target, cells)?;
    let tie_weight = choice.second.as_ref().map(|b| frontier.jump_weight(&choice.first, b));
    Ok(ApproxReport {
        instance: curve.family().tag(),
        surplus_target: u_target,
        single_price: single,
        two_price_revenue: choice.payoff.revenue,
        two_price_alpha: choice.alpha,
        tie_weight,
        ratio: single.revenue / choice.payoff.revenue,
        closed_form,
    })
}

/// Paper-scale parameters of the two quasi-regular bounds.
pub const BOUND_MINIMIZER: (f64, f64) = (0.238405, 0.528482);
pub const TIGHT_MINIMIZER: (f64, f64) = (0.325268, 0.589198);

/// All single-buyer constants at once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardInstanceRatios {
    /// Approximation guarantee at the published minimiser, and its grid minimum.
    pub bound_at_published: f64,
    pub bound_minimum: Minimizer,
    /// Inapproximability ratio at the published minimiser, and its grid minimum.
    pub tight_at_published: f64,
    pub tight_minimum: Minimizer,
    /// End-to-end comparison on the tight quasi-regular instance.
    pub tight_instance: ApproxReport,
    /// End-to-end comparison on the price-gap instance.
    pub price_gap: ApproxReport,
    pub price_gap_printed: f64,
}

/// Evaluate every closed form and check the tight instances end to end.
pub fn hard_instance_ratios(price_gap_k: f64, grid_steps: usize) -> Result<HardInstanceRatios> {
    hard_instance_ratios_on_grid(price_gap_k, grid_steps, DEFAULT_GRID)
}

/// [`hard_instance_ratios`] with the end-to-end checks run on `cells` quantile cells.
pub fn hard_instance_ratios_on_grid(price_gap_k: f64, grid_steps: usize, cells: usize) -> Result<HardInstanceRatios> {
    if !(price_gap_k > 2.0) {
        return Err(invalid!("price-gap parameter must exceed 2, got {price_gap_k}"));
    }
    let (l0, q0) = TIGHT_MINIMIZER;
    let tight_curve = Family::QuasiRegularTight { ell: l0, pivot: q0 }.build()?;
    let tight_instance = compare_on_curve(&tight_curve, tight_curve.w(q0), inapproximability_ratio(l0, q0), cells)?;
    let gap_curve = Family::PriceGap { k: price_gap_k }.build()?;
    let price_gap = compare_on_curve(&gap_curve, price_gap_k / 2.0, price_gap_ratio_exact(price_gap_k), cells)?;
    Ok(HardInstanceRatios {
        bound_at_published: approximation_bound(BOUND_MINIMIZER.0, BOUND_MINIMIZER.1),
        bound_minimum: minimize_ratio(approximation_bound, grid_steps),
        tight_at_published: inapproximability_ratio(l0, q0),
        tight_minimum: minimize_ratio(inapproximability_ratio, grid_steps),
        tight_instance,
        price_gap,
        price_gap_printed: price_gap_ratio_printed(price_gap_k),
    })
}

/// `K = e^{2/ε}`, the price-gap parameter for a target ratio `ε`.
pub fn price_gap_parameter(eps: f64) -> f64 {
    exp(2.0 / eps)
}
