use approx::assert_relative_eq;
use auction_frontier::allocations::canonical_allocation;
use auction_frontier::curves::{analyze, CurveTable, Weight};
use auction_frontier::evaluate::{allocated_welfare, evaluate, opt_welfare};
use auction_frontier::{Family, ValueCurve};
use proptest::prelude::*;

const CELLS: usize = 1024;

fn smooth_family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (0.0..2.0f64, 0.1..3.0f64).prop_map(|(low, w)| Family::Uniform { low, high: low + w }),
        (0.2..5.0f64).prop_map(|rate| Family::Exponential { rate, cap: None }),
        (1.5..5.0f64, 0.5..2.0f64).prop_map(|(shape, scale)| Family::Lomax { shape, scale, cap: None }),
    ]
}

fn mhr_family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (0.0..2.0f64, 0.1..3.0f64).prop_map(|(low, w)| Family::Uniform { low, high: low + w }),
        (0.2..5.0f64, proptest::option::of(0.5..5.0f64)).prop_map(|(rate, cap)| Family::Exponential { rate, cap }),
    ]
}

fn piecewise() -> impl Strategy<Value = Family> {
    (2usize..6)
        .prop_flat_map(|k| (proptest::collection::vec(0.02..0.98f64, k - 1), proptest::collection::vec(0.05..2.0f64, k), 0.0..1.0f64))
        .prop_map(|(mut qs, drops, floor)| {
            qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            qs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let mut qs_full = vec![0.0];
            qs_full.extend(qs);
            qs_full.push(1.0);
            let mut v = floor;
            let mut knots = vec![[0.0, 0.0]; qs_full.len()];
            for (i, q) in qs_full.iter().enumerate().rev() {
                knots[i] = [*q, v];
                v += drops[i.saturating_sub(1)];
            }
            Family::Piecewise { knots }
        })
}

fn any_family() -> impl Strategy<Value = Family> {
    prop_oneof![
        smooth_family(),
        (0.2..5.0f64, 0.5..5.0f64).prop_map(|(rate, cap)| Family::Exponential { rate, cap: Some(cap) }),
        (1.5..5.0f64, 0.5..2.0f64, 5.0..50.0f64).prop_map(|(shape, scale, cap)| Family::Lomax { shape, scale, cap: Some(cap) }),
        (1.5..50.0f64).prop_map(|cap| Family::EqualRevenue { cap }),
        (2.0..1e6f64).prop_map(|buyers| Family::MhrHard { buyers }),
        piecewise(),
    ]
}

fn weight() -> impl Strategy<Value = Weight> {
    prop_oneof![
        4 => (0.0..1.0f64).prop_map(Weight::Finite),
        3 => (1.0..64.0f64).prop_map(Weight::Finite),
        1 => Just(Weight::Infinite),
    ]
}

fn build(f: &Family) -> ValueCurve {
    f.build().unwrap_or_else(|e| panic!("{f}: {e}"))
}

fn cum_grid(curve: &ValueCurve, w: Weight, n: u32) -> Vec<f64> {
    let table = CurveTable::new(curve, CELLS);
    let a = canonical_allocation(curve, &table, w, 0.0, n).unwrap();
    (0..=256).map(|i| a.cum(i as f64 / 256.0)).collect()
}

/// Every ironed interval at `inner` lies in the ironed or unserved region at `outer`.
fn nested(f: &Family, c: &ValueCurve, table: &CurveTable, inner: f64, outer: f64) -> Result<(), TestCaseError> {
    let tol = 2.0 / CELLS as f64;
    let small = analyze(c, table, Weight::Finite(inner)).unwrap().ironed;
    let big = analyze(c, table, Weight::Finite(outer)).unwrap();
    let mut cover = big.ironed.clone();
    cover.push((big.right, 1.0));
    for (s, e) in small {
        let mut reach = s;
        for &(cs, ce) in &cover {
            if cs <= reach + tol && ce > reach {
                reach = ce;
            }
        }
        prop_assert!(reach >= e - tol, "{f}: ({s}, {e}) at λ={inner} not inside {cover:?} at λ={outer}");
    }
    Ok(())
}

proptest! {
    #[test]
    fn value_curve_is_non_increasing_and_non_negative(f in any_family()) {
        let c = build(&f);
        let mut last = f64::INFINITY;
        for q in c.grid(512) {
            let v = c.v(q);
            prop_assert!(v >= 0.0, "{f}: v({q}) = {v}");
            prop_assert!(v <= last * (1.0 + 1e-12), "{f}: v rises at {q}");
            last = v;
        }
    }

    #[test]
    fn exponential_value_is_a_log(rate in 0.1..10.0f64, q in 1e-9..1.0f64) {
        let c = build(&Family::Exponential { rate, cap: None });
        assert_relative_eq!(c.v(q), -q.ln() / rate, max_relative = 1e-12, epsilon = 1e-300);
    }

    #[test]
    fn virtual_value_is_the_revenue_slope(f in smooth_family(), q in 0.05..0.95f64) {
        let c = build(&f);
        let (hazard, virt) = c.hazard_and_virtual(q).unwrap();
        let h = 1e-6;
        let fd = (c.r(q + h) - c.r(q - h)) / (2.0 * h);
        assert_relative_eq!(virt, fd, max_relative = 1e-5, epsilon = 1e-6);
        let dv = -(c.v(q + h) - c.v(q - h)) / (2.0 * h);
        assert_relative_eq!(hazard, 1.0 / (q * dv), max_relative = 1e-5);
    }

    #[test]
    fn hard_instance_atom_matches_the_cap(buyers in 2.0..1e9f64) {
        let c = build(&Family::MhrHard { buyers });
        let cap = 0.5 * buyers.ln().sqrt();
        assert_relative_eq!(c.atom_mass(), buyers.powf(-0.25), max_relative = 1e-12);
        assert_relative_eq!(c.atom_mass(), (-cap * cap).exp(), max_relative = 1e-12);
        assert_relative_eq!(c.v_high(), cap, max_relative = 1e-12);
    }

    #[test]
    fn information_rent_is_non_decreasing(f in any_family()) {
        let c = build(&f);
        let mut last = 0.0f64;
        for q in c.grid(512) {
            let w = c.w(q);
            prop_assert!(w >= last - 1e-12 * c.mean().max(1.0), "{f}: W falls at {q}");
            last = w;
        }
    }

    #[test]
    fn service_region_grows_with_the_weight(f in any_family(), a in weight(), b in weight()) {
        let c = build(&f);
        let table = CurveTable::new(&c, CELLS);
        let (lo, hi) = if a.as_f64() <= b.as_f64() { (a, b) } else { (b, a) };
        let x = analyze(&c, &table, lo).unwrap();
        let y = analyze(&c, &table, hi).unwrap();
        let tol = 2.0 / CELLS as f64;
        prop_assert!(x.left <= y.left + tol, "{f}: left {} vs {}", x.left, y.left);
        prop_assert!(x.right <= y.right + tol, "{f}: right {} vs {}", x.right, y.right);
    }

    #[test]
    fn regular_curves_need_no_ironing_below_one(f in smooth_family(), l in 0.0..=1.0f64) {
        let c = build(&f);
        let table = CurveTable::new(&c, CELLS);
        let a = analyze(&c, &table, Weight::Finite(l)).unwrap();
        prop_assert!(a.ironed.is_empty(), "{f} λ={l}: {:?}", a.ironed);
    }

    #[test]
    fn ironed_sets_nest_away_from_one(f in any_family(), a in 0.0..1.0f64, b in 0.0..1.0f64, c1 in 1.0..64.0f64, c2 in 1.0..64.0f64) {
        let c = build(&f);
        let table = CurveTable::new(&c, CELLS);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        nested(&f, &c, &table, hi, lo)?;
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        nested(&f, &c, &table, lo, hi)?;
    }

    #[test]
    fn optimal_objective_is_lipschitz_in_the_weight(f in any_family(), a in 0.0..64.0f64, b in 0.0..64.0f64) {
        let c = build(&f);
        let table = CurveTable::new(&c, CELLS);
        let x = analyze(&c, &table, Weight::Finite(a)).unwrap().max_value;
        let y = analyze(&c, &table, Weight::Finite(b)).unwrap().max_value;
        prop_assert!((x - y).abs() <= (a - b).abs() * c.mean() * (1.0 + 1e-9) + 1e-12, "{f}: {x} vs {y}");
    }

    #[test]
    fn canonical_allocations_are_feasible(f in any_family(), w in weight(), eps in 0.0..=1.0f64, n in 1u32..64) {
        let c = build(&f);
        let table = CurveTable::new(&c, CELLS);
        let a = canonical_allocation(&c, &table, w, eps, n).unwrap();
        prop_assert!(a.border_check().is_ok(), "{f} {w:?} ε={eps} n={n}: {:?}", a.border_check());
    }

    #[test]
    fn payoffs_respect_welfare_identity_and_benchmarks(f in any_family(), w in weight(), n in 1u32..64) {
        let c = build(&f);
        let table = CurveTable::new(&c, CELLS);
        let a = canonical_allocation(&c, &table, w, 0.0, n).unwrap();
        let p = evaluate(&a, &c);
        assert_relative_eq!(p.revenue + p.surplus, allocated_welfare(&a, &c), max_relative = 1e-6, epsilon = 1e-12);
        let opt = opt_welfare(&c, n);
        prop_assert!(p.welfare <= opt * (1.0 + 1e-9), "{f}: {} > OPT {opt}", p.welfare);
        let mye = evaluate(&canonical_allocation(&c, &table, Weight::Finite(0.0), 0.0, n).unwrap(), &c);
        prop_assert!(p.revenue <= mye.revenue * (1.0 + 1e-9) + 1e-12, "{f}: {} > Myerson {}", p.revenue, mye.revenue);
    }

    #[test]
    fn interim_allocation_rises_with_the_weight_below_one(f in any_family(), a in 0.0..=1.0f64, b in 0.0..=1.0f64, n in 1u32..16) {
        let c = build(&f);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = cum_grid(&c, Weight::Finite(lo), n);
        let y = cum_grid(&c, Weight::Finite(hi), n);
        for (i, (p, r)) in x.iter().zip(&y).enumerate() {
            prop_assert!(*p <= r + 1e-5, "{f} n={n}: X at {} is {p} > {r}", i as f64 / 256.0);
        }
    }

    #[test]
    fn mhr_sells_always_above_one(f in mhr_family(), l in 1.0..64.0f64, n in 1u32..64) {
        let c = build(&f);
        let x = cum_grid(&c, Weight::Finite(l), n);
        assert_relative_eq!(*x.last().unwrap(), 1.0 / n as f64, max_relative = 1e-9);
    }
}
