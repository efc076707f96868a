//! Welfare benchmarks for selling `m` identical units to `n` unit-demand buyers, and the
//! two-case mixture that lower-bounds the KS solution's welfare on MHR distributions.
//!
//! Everything reduces to expectations of order statistics. The `i`-th highest of `n`
//! values has quantile density `n·C(n−1, i−1)·q^{i−1}·(1 − q)^{n−i}`.

use alloc::vec::Vec;
use serde::Serialize;

use crate::distributions::{ValueCurve, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::invalid;
use crate::math::{exp, harmonic, ln, ln1p, ln_choose, sqrt, Accumulator, E};
use crate::quad::Quadrature;

/// The two branches of the guarantee and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiValue {
    pub tau: f64,
    pub value: f64,
    /// Bound from mixing the efficient auction with the free uniform allocation.
    pub pooling_branch: f64,
    /// Bound from mixing the efficient auction with the revenue-optimal auction.
    pub reserve_branch: f64,
}

/// `min{(2 − ln τ)/(2 − 2 ln τ), (e − 1)/e + 1/(e + e²·τ)}` for `τ ∈ (0, 1]`.
pub fn psi(tau: f64) -> Result<PsiValue> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(invalid!("unit ratio must lie in (0, 1], got {tau}"));
    }
    let l = ln(tau);
    let pooling_branch = (2.0 - l) / (2.0 - 2.0 * l);
    let reserve_branch = (E - 1.0) / E + 1.0 / (E + E * E * tau);
    Ok(PsiValue {
        tau,
        value: pooling_branch.min(reserve_branch),
        pooling_branch,
        reserve_branch,
    })
}

/// `∫_lo^hi v(q)·g_{i,n}(q) dq`, with integration cells concentrated around the density's mode.
fn order_stat_integral(curve: &ValueCurve, i: u32, n: u32, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (a, b) = ((i - 1) as f64, (n - i) as f64);
    let log_coef = ln(n as f64) + ln_choose(n - 1, i - 1);
    let density = |q: f64| {
        let mut e = log_coef;
        if a > 0.0 {
            e += a * ln(q);
        }
        if b > 0.0 {
            e += b * ln1p(-q);
        }
        exp(e)
    };
    let f = |q: f64| curve.v(q) * density(q);
    let nf = n as f64;
    let mode = if n > 1 { a / (nf - 1.0) } else { 0.5 };
    let width = sqrt(mode * (1.0 - mode) / nf).max(1.0 / nf);
    let mut cuts: Vec<f64> = Vec::with_capacity(96);
    cuts.extend([lo, hi, mode]);
    for k in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        cuts.push(mode - k * width);
        cuts.push(mode + k * width);
    }
    for j in 1..32 {
        cuts.push(j as f64 / 32.0);
    }
    for p in curve.pieces() {
        cuts.push(p.lo);
    }
    cuts.retain(|&c| c >= lo && c <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let quad = Quadrature::default();
    let mut acc = Accumulator::default();
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            acc.add(quad.run(&f, w[0], w[1]).value);
        }
    }
    acc.total()
}

fn check_order(i: u32, n: u32) -> Result<()> {
    if i == 0 || i > n {
        return Err(invalid!("order statistic index must satisfy 1 <= i <= n, got i={i}, n={n}"));
    }
    Ok(())
}

/// Expected `i`-th highest of `n` independent values.
pub fn order_stat_expectation(curve: &ValueCurve, i: u32, n: u32) -> Result<f64> {
    check_order(i, n)?;
    Ok(order_stat_integral(curve, i, n, 0.0, 1.0))
}

/// Benchmarks for `m` units and `n` buyers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiUnitReport {
    pub m: u32,
    pub n: u32,
    pub tau: f64,
    pub psi: PsiValue,
    pub harmonic_n: f64,
    pub harmonic_m: f64,
    /// Welfare of the efficient (VCG) allocation.
    pub opt_welfare: f64,
    pub vcg_revenue: f64,
    pub vcg_surplus: f64,
    /// Welfare of the free uniform allocation of the `m` units.
    pub bom_welfare: f64,
    /// Reserve of the auction with the lowest monopoly reserve.
    pub reserve: f64,
    pub myerson_revenue: f64,
    pub myerson_welfare: f64,
    /// Welfare of the two-case KS mixture, when the curve is MHR.
    pub ks_lower_bound: Option<KsMixture>,
}

/// Mixture of the efficient auction with a benchmark that satisfies KS fairness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsMixture {
    /// 1 when mixing with the free allocation, 2 when mixing with the revenue-optimal auction.
    pub case: u8,
    pub vcg_probability: f64,
    pub welfare: f64,
    /// `Ψ(m/n)·OPT`.
    pub guarantee: f64,
}

/// Compute all benchmarks by quadrature over order statistics.
pub fn multiunit_benchmarks(curve: &ValueCurve, m: u32, n: u32) -> Result<MultiUnitReport> {
    if m == 0 || m > n {
        return Err(invalid!("need 1 <= m <= n units, got m={m}, n={n}"));
    }
    Ok(multiunit_table_upto(curve, n, m)?.pop().expect("table has m rows"))
}

/// Benchmarks for every unit count `m = 1..=n`, sharing the order-statistic integrals.
pub fn multiunit_table(curve: &ValueCurve, n: u32) -> Result<Vec<MultiUnitReport>> {
    if n == 0 {
        return Err(invalid!("need at least one buyer"));
    }
    multiunit_table_upto(curve, n, n)
}

fn multiunit_table_upto(curve: &ValueCurve, n: u32, m_max: u32) -> Result<Vec<MultiUnitReport>> {
    let mean = curve.mean();
    let is_mhr = curve.classify(DEFAULT_GRID).is_mhr;
    let qm = curve.monopoly_quantile(DEFAULT_GRID);
    let reserve = curve.v(qm);
    let above = curve.quantile_ge(reserve);
    let top = m_max.min(n - 1) + 1;
    let full: Vec<f64> = (1..=top).map(|i| order_stat_integral(curve, i, n, 0.0, 1.0)).collect();
    let cleared: Vec<f64> = (1..=top).map(|i| order_stat_integral(curve, i, n, 0.0, above)).collect();
    let mut out = Vec::with_capacity(m_max as usize);
    let (mut opt, mut welfare, mut at_reserve) = (Accumulator::default(), Accumulator::default(), Accumulator::default());
    for m in 1..=m_max {
        let i = (m - 1) as usize;
        opt.add(full[i]);
        welfare.add(cleared[i]);
        at_reserve.add(reserve * m as f64 * binomial_pmf(n, m, above));
        let (vcg_revenue, competitive) = if m < n {
            (m as f64 * full[i + 1], m as f64 * cleared[i + 1])
        } else {
            (0.0, 0.0)
        };
        // Winners pay the highest losing value when at least m + 1 clear the reserve, else the reserve.
        let myerson_revenue = competitive + at_reserve.total();
        let tau = m as f64 / n as f64;
        let opt_welfare = opt.total();
        let ks_lower_bound = if is_mhr {
            Some(ks_mixture(opt_welfare, vcg_revenue, m as f64 * mean, myerson_revenue, welfare.total(), tau)?)
        } else {
            None
        };
        out.push(MultiUnitReport {
            m,
            n,
            tau,
            psi: psi(tau)?,
            harmonic_n: harmonic(n),
            harmonic_m: harmonic(m),
            opt_welfare,
            vcg_revenue,
            vcg_surplus: opt_welfare - vcg_revenue,
            bom_welfare: m as f64 * mean,
            reserve,
            myerson_revenue,
            myerson_welfare: welfare.total(),
            ks_lower_bound,
        });
    }
    Ok(out)
}

fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    exp(ln_choose(n, k) + k as f64 * ln(p) + (n - k) as f64 * ln1p(-p))
}

/// The revenue-optimal benchmark is the reserve auction and the surplus-optimal benchmark is
/// the free allocation, whose surplus is its welfare.
fn ks_mixture(opt: f64, vcg_revenue: f64, u_star: f64, pi_star: f64, myerson_welfare: f64, tau: f64) -> Result<KsMixture> {
    if !(pi_star > 0.0 && u_star > 0.0) {
        return Err(Error::Precondition("KS mixture needs positive ideal revenue and surplus".into()));
    }
    let pi_v = vcg_revenue / pi_star;
    let mu_v = (opt - vcg_revenue) / u_star;
    let (case, p, other_welfare) = if pi_v >= mu_v {
        (1, 1.0 / (1.0 + pi_v - mu_v), u_star)
    } else {
        let mu_m = (myerson_welfare - pi_star) / u_star;
        (2, (1.0 - mu_m) / (1.0 + mu_v - pi_v - mu_m), myerson_welfare)
    };
    Ok(KsMixture {
        case,
        vcg_probability: p,
        welfare: p * opt + (1.0 - p) * other_welfare,
        guarantee: psi(tau)?.value * opt,
    })
}

/// Welfare of the two-case KS mixture; requires an MHR curve.
pub fn ks_lower_bound_multiunit(curve: &ValueCurve, m: u32, n: u32) -> Result<KsMixture> {
    if !curve.classify(DEFAULT_GRID).is_mhr {
        return Err(Error::Precondition("the multi-unit KS bound requires a monotone-hazard-rate curve".into()));
    }
    multiunit_benchmarks(curve, m, n)?
        .ks_lower_bound
        .ok_or_else(|| Error::Numerical("mixture missing for an MHR curve".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;

    fn exponential() -> ValueCurve {
        Family::Exponential { rate: 1.0, cap: None }.build().unwrap()
    }

    #[test]
    fn psi_values() {
        let p = psi(1.0).unwrap();
        assert!((p.value - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(p.pooling_branch, 1.0);
        assert!((psi(1e-300).unwrap().value - 0.5).abs() < 2e-3);
        assert!(psi(0.0).is_err() && psi(1.5).is_err());
    }

    #[test]
    fn order_statistics() {
        let e = exponential();
        assert!((order_stat_expectation(&e, 1, 2).unwrap() - 1.5).abs() < 1e-12);
        let u = Family::Uniform { low: 0.0, high: 1.0 }.build().unwrap();
        assert!((order_stat_expectation(&u, 1, 2).unwrap() - 2.0 / 3.0).abs() < 1e-13);
        assert!((order_stat_expectation(&u, 3, 4).unwrap() - 0.4).abs() < 1e-13);
        assert!((order_stat_expectation(&e, 1, 1).unwrap() - 1.0).abs() < 1e-12);
        for i in 1..=40 {
            let h = harmonic(40) - harmonic(i - 1);
            assert!((order_stat_expectation(&e, i, 40).unwrap() - h).abs() < 1e-10, "i={i}");
        }
        assert!(order_stat_expectation(&e, 0, 3).is_err());
    }

    #[test]
    fn benchmarks_small_cases() {
        let r = multiunit_benchmarks(&exponential(), 1, 2).unwrap();
        assert!((r.opt_welfare - 1.5).abs() < 1e-12);
        assert!((r.bom_welfare - 1.0).abs() < 1e-12);
        let u = Family::Uniform { low: 0.0, high: 1.0 }.build().unwrap();
        let r = multiunit_benchmarks(&u, 2, 4).unwrap();
        assert!((r.vcg_revenue - 0.8).abs() < 1e-12);
        // One unit, reserve ½: revenue 5/12 with two buyers.
        let r = multiunit_benchmarks(&u, 1, 2).unwrap();
        assert!((r.myerson_revenue - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn non_mhr_is_rejected() {
        let c = Family::EqualRevenue { cap: 10.0 }.build().unwrap();
        assert!(matches!(ks_lower_bound_multiunit(&c, 1, 2), Err(Error::Precondition(_))));
    }
}
