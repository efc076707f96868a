use auction_frontier::math::harmonic;
use auction_frontier::multiunit::{ks_lower_bound_multiunit, multiunit_benchmarks, multiunit_table, order_stat_expectation, psi};
use auction_frontier::Family;

#[test]
fn free_allocation_bound_is_tight_for_exponential() {
    let c = Family::Exponential { rate: 1.0, cap: None }.build().unwrap();
    for n in 1..=64u32 {
        for r in multiunit_table(&c, n).unwrap() {
            let m = r.m;
            let bound = r.bom_welfare * (1.0 + harmonic(n) - harmonic(m));
            assert!((bound - r.opt_welfare).abs() < 1e-6, "m={m} n={n}: {bound} vs {}", r.opt_welfare);
        }
    }
}

#[test]
fn reserve_auction_keeps_one_over_e_minus_one_on_truncated_exponential() {
    let c = Family::Exponential { rate: 1.0, cap: Some(1.0) }.build().unwrap();
    let target = 1.0 / (std::f64::consts::E - 1.0);
    assert!((ks_lower_bound_multiunit(&c, 2, 3).unwrap().guarantee > 0.0));
    for n in [1u32, 2, 5, 16] {
        let r = multiunit_benchmarks(&c, n, n).unwrap();
        assert!((r.reserve - 1.0).abs() < 1e-12);
        let ratio = r.myerson_welfare / r.opt_welfare;
        assert!((ratio - target).abs() < 1e-6, "n={n}: {ratio}");
        for r in multiunit_table(&c, n).unwrap() {
            let m = r.m;
            assert!(r.myerson_welfare / r.opt_welfare >= ratio - 1e-9, "m={m} n={n}");
        }
    }
}

#[test]
fn ks_mixture_meets_guarantee_for_exponential() {
    let c = Family::Exponential { rate: 1.0, cap: None }.build().unwrap();
    for n in 1..=32u32 {
        for r in multiunit_table(&c, n).unwrap() {
            let m = r.m;
            let k = r.ks_lower_bound.unwrap();
            assert!(k.welfare >= k.guarantee - 1e-6, "m={m} n={n}: {k:?}");
            assert!((0.0..=1.0).contains(&k.vcg_probability));
        }
    }
}

#[test]
fn order_statistics_sum_to_total_mean() {
    for fam in [
        Family::Uniform { low: 0.0, high: 1.0 },
        Family::Exponential { rate: 2.0, cap: Some(1.5) },
        Family::MhrHard { buyers: 100.0 },
        Family::Lomax { shape: 3.0, scale: 1.0, cap: None },
    ] {
        let c = fam.build().unwrap();
        for n in [1u32, 3, 10, 50] {
            let total: f64 = (1..=n).map(|i| order_stat_expectation(&c, i, n).unwrap()).sum();
            assert!((total - n as f64 * c.mean()).abs() < 1e-9 * n as f64, "{fam} n={n}");
        }
    }
}

#[test]
fn psi_stays_above_one_half() {
    for k in 1..=1000 {
        let tau = k as f64 / 1000.0;
        let p = psi(tau).unwrap();
        assert!(p.value > 0.5 && p.value <= 1.0);
    }
    assert!((psi(1.0).unwrap().value - 0.73106).abs() < 1e-5);
}

#[test]
fn large_buyer_counts_stay_finite() {
    let c = Family::Exponential { rate: 1.0, cap: None }.build().unwrap();
    let n = 10_000;
    let e = order_stat_expectation(&c, 1, n).unwrap();
    assert!((e - harmonic(n)).abs() < 1e-9);
    let e = order_stat_expectation(&c, n / 2, n).unwrap();
    assert!((e - (harmonic(n) - harmonic(n / 2 - 1))).abs() < 1e-9);
}
