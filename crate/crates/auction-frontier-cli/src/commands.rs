use auction_frontier::allocations::{allocation_of_mechanism, canonical_allocation};
use auction_frontier::bargaining::{solve, BargainingSolution, SolutionKind};
use auction_frontier::curves::{analyze, CurveTable, Hull, Weight};
use auction_frontier::evaluate::evaluate;
use auction_frontier::frontier::{sweep, Frontier};
use auction_frontier::multiunit::{multiunit_table, psi};
use auction_frontier::simulate::{simulate, GENERATOR};
use auction_frontier::singlebuyer::{approximation_bound, hard_instance_ratios_on_grid, inapproximability_ratio, ratio_heatmap};
use auction_frontier::Family;
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{Cell, Meta, Payload};

/// Run one configured command and return its table and record.
pub fn execute(cfg: &RunConfig) -> Result<(Meta, Payload)> {
    cfg.validate()?;
    let mut meta = Meta::new(cfg);
    let payload = match cfg.command {
        Command::Frontier => frontier(cfg)?,
        Command::Solve => solve_cmd(cfg)?,
        Command::RevenueAt => revenue_at(cfg)?,
        Command::Table1 => table1(cfg)?,
        Command::Psi => psi_curve(cfg)?,
        Command::AppendixE => appendix_e(cfg)?,
        Command::Simulate => {
            meta.generator = Some(GENERATOR);
            simulate_cmd(cfg)?
        }
        Command::Curve => curve(cfg)?,
        Command::Allocation => allocation(cfg)?,
        Command::Multiunit => multiunit(cfg)?,
    };
    Ok((meta, payload))
}

fn swept(cfg: &RunConfig) -> Result<Frontier> {
    let n = cfg.buyers()?;
    let curve = cfg.curve()?;
    Ok(sweep(&curve, n, &cfg.sweep_config()?)?)
}

fn weight(cfg: &RunConfig) -> Result<Weight> {
    let w = cfg
        .weight
        .ok_or_else(|| CliError::Config(format!("{} needs an objective weight --lambda", cfg.command.name())))?;
    Ok(Weight::new(w.as_f64())?)
}

fn frontier(cfg: &RunConfig) -> Result<Payload> {
    let f = swept(cfg)?;
    let rows = f
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                Cell::from(p.lambda.as_f64()),
                p.eps.into(),
                p.payoff.surplus.into(),
                p.payoff.revenue.into(),
                p.payoff.welfare.into(),
                p.reserve.into(),
                u32::from(f.extreme.contains(&i)).into(),
                p.mechanism.label().into(),
            ]
        })
        .collect();
    Payload::new(vec!["lambda", "eps", "U", "Pi", "welfare", "reserve", "vertex", "mechanism"], rows, &f)
}

#[derive(Serialize)]
struct Ratios {
    revenue: f64,
    surplus: f64,
    welfare: f64,
}

#[derive(Serialize)]
struct SolutionRecord<'a> {
    kind: &'static str,
    n: u32,
    pi: f64,
    u: f64,
    welfare: f64,
    opt: f64,
    ratios: Ratios,
    alpha: f64,
    degenerate: bool,
    mechanism: &'a auction_frontier::allocations::MechanismSpec,
}

impl<'a> SolutionRecord<'a> {
    fn new(s: &'a BargainingSolution) -> Self {
        SolutionRecord {
            kind: s.kind.label(),
            n: s.n,
            pi: s.payoff.revenue,
            u: s.payoff.surplus,
            welfare: s.payoff.welfare,
            opt: s.opt,
            ratios: Ratios {
                revenue: s.revenue_ratio,
                surplus: s.surplus_ratio,
                welfare: s.welfare_ratio,
            },
            alpha: s.alpha,
            degenerate: s.degenerate,
            mechanism: &s.mechanism,
        }
    }
}

fn solve_cmd(cfg: &RunConfig) -> Result<Payload> {
    let kind = cfg.kind.ok_or_else(|| CliError::Config("solve needs --kind (ks, nash or csnash)".into()))?;
    let f = swept(cfg)?;
    let s = solve(&f, kind)?;
    let row = vec![
        Cell::from(s.kind.label()),
        s.n.into(),
        s.payoff.revenue.into(),
        s.payoff.surplus.into(),
        s.payoff.welfare.into(),
        s.opt.into(),
        s.revenue_ratio.into(),
        s.surplus_ratio.into(),
        s.welfare_ratio.into(),
        s.mechanism.label().into(),
    ];
    Payload::new(
        vec!["kind", "n", "pi", "u", "welfare", "opt", "revenue_ratio", "surplus_ratio", "welfare_ratio", "mechanism"],
        vec![row],
        SolutionRecord::new(&s),
    )
}

fn revenue_at(cfg: &RunConfig) -> Result<Payload> {
    let u = cfg.surplus.ok_or_else(|| CliError::Config("revenue-at needs a surplus target --surplus".into()))?;
    let f = swept(cfg)?;
    let c = f.max_revenue_given_surplus(u)?;
    let row = vec![
        Cell::from(u),
        c.payoff.revenue.into(),
        c.payoff.surplus.into(),
        c.alpha.into(),
        u32::from(c.clamped).into(),
        c.mechanism.label().into(),
    ];
    Payload::new(vec!["target", "pi", "u", "alpha", "clamped", "mechanism"], vec![row], &c)
}

#[derive(Serialize)]
struct Table1Row {
    solution: &'static str,
    family: String,
    n: u32,
    welfare_ratio: f64,
}

fn table1(cfg: &RunConfig) -> Result<Payload> {
    let sweep_cfg = cfg.sweep_config()?;
    let regular = match &cfg.distribution {
        Some(_) => cfg.distribution()?.family(None)?,
        None => Family::Exponential { rate: 1.0, cap: None },
    };
    let mut jobs: Vec<(Family, u32)> = cfg.hard_n.iter().map(|&n| (Family::MhrHard { buyers: n as f64 }, n)).collect();
    jobs.extend((1..=cfg.regular_n).map(|n| (regular.clone(), n)));
    let mut records = Vec::new();
    for (fam, n) in jobs {
        let f = sweep(&fam.build()?, n, &sweep_cfg)?;
        for kind in [SolutionKind::Ks, SolutionKind::Nash, SolutionKind::CrossSideNash] {
            records.push(Table1Row {
                solution: kind.label(),
                family: fam.tag(),
                n,
                welfare_ratio: solve(&f, kind)?.welfare_ratio,
            });
        }
    }
    let rows = records
        .iter()
        .map(|r| vec![Cell::from(r.solution), r.family.clone().into(), r.n.into(), r.welfare_ratio.into()])
        .collect();
    Payload::new(vec!["solution", "family", "n", "welfare_ratio"], rows, &records)
}

fn psi_curve(cfg: &RunConfig) -> Result<Payload> {
    let steps = cfg.steps.unwrap_or(100);
    let values = (1..=steps).map(|k| psi(k as f64 / steps as f64)).collect::<auction_frontier::Result<Vec<_>>>()?;
    let rows = values
        .iter()
        .map(|p| vec![Cell::from(p.tau), p.value.into(), p.pooling_branch.into(), p.reserve_branch.into()])
        .collect();
    Payload::new(vec!["tau", "psi", "branch1", "branch2"], rows, &values)
}

fn appendix_e(cfg: &RunConfig) -> Result<Payload> {
    let steps = cfg.steps.unwrap_or(512);
    let r = hard_instance_ratios_on_grid(cfg.price_gap, steps, cfg.grid)?;
    let bound = ratio_heatmap(approximation_bound, steps.min(256));
    let tight = ratio_heatmap(inapproximability_ratio, steps.min(256));
    let mut rows = Vec::new();
    for [ell, q, b] in &bound {
        let t = tight.iter().find(|t| t[0] == *ell && t[1] == *q).map_or(f64::NAN, |t| t[2]);
        rows.push(vec![Cell::from(*ell), (*q).into(), (*b).into(), t.into()]);
    }
    Payload::new(vec!["ell", "q", "bound", "tight"], rows, &r)
}

fn simulate_cmd(cfg: &RunConfig) -> Result<Payload> {
    let n = cfg.buyers()?;
    let spec = cfg
        .mechanism
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs a mechanism (--mechanism JSON or --reserve)".into()))?;
    spec.validate()?;
    let curve = cfg.curve()?;
    let rep = simulate(spec, &curve, n, cfg.trials, cfg.seed)?;
    let exact = evaluate(&allocation_of_mechanism(spec, &curve, n)?, &curve);
    let record = json!({
        "mechanism": spec,
        "n": n,
        "trials": rep.trials,
        "seed": rep.seed,
        "pi": rep.revenue.mean,
        "pi_se": rep.revenue.stderr,
        "u": rep.surplus.mean,
        "u_se": rep.surplus.stderr,
        "analytic": { "pi": exact.revenue, "u": exact.surplus },
    });
    let row = vec![
        Cell::from(spec.label()),
        n.into(),
        rep.trials.into(),
        rep.seed.into(),
        rep.revenue.mean.into(),
        rep.revenue.stderr.into(),
        rep.surplus.mean.into(),
        rep.surplus.stderr.into(),
        exact.revenue.into(),
        exact.surplus.into(),
    ];
    Payload::new(
        vec!["mechanism", "n", "trials", "seed", "pi", "pi_se", "u", "u_se", "pi_exact", "u_exact"],
        vec![row],
        record,
    )
}

fn curve(cfg: &RunConfig) -> Result<Payload> {
    let w = weight(cfg)?;
    let c = cfg.curve()?;
    let table = CurveTable::new(&c, cfg.grid);
    let lam = table.mixed(w);
    let hull = Hull::upper(&table.q, &lam);
    let analysis = analyze(&c, &table, w)?;
    let rows = table
        .q
        .iter()
        .zip(&lam)
        .map(|(&q, &l)| vec![Cell::from(q), l.into(), hull.eval(q).into()])
        .collect();
    Payload::new(vec!["q", "lambda_curve", "hull"], rows, &analysis)
}

fn allocation(cfg: &RunConfig) -> Result<Payload> {
    let n = cfg.buyers()?;
    let w = weight(cfg)?;
    let c = cfg.curve()?;
    let table = CurveTable::new(&c, cfg.grid);
    let a = canonical_allocation(&c, &table, w, cfg.eps, n)?;
    let payoff = evaluate(&a, &c);
    let rows = a
        .table(cfg.grid)
        .into_iter()
        .map(|r| r.into_iter().map(Cell::from).collect())
        .collect();
    let record = json!({ "weight": w, "eps": cfg.eps, "n": n, "payoff": payoff, "border_feasible": a.border_check().is_ok() });
    Payload::new(vec!["q", "x", "X", "X_hat"], rows, record)
}

fn multiunit(cfg: &RunConfig) -> Result<Payload> {
    let n = cfg.buyers()?;
    let c = cfg.curve()?;
    let reports = multiunit_table(&c, n)?;
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.m),
                r.n.into(),
                r.opt_welfare.into(),
                r.bom_welfare.into(),
                r.myerson_revenue.into(),
                r.myerson_welfare.into(),
                r.psi.value.into(),
                r.ks_lower_bound.map_or(f64::NAN, |k| k.welfare).into(),
            ]
        })
        .collect();
    Payload::new(
        vec!["m", "n", "opt_welfare", "free_welfare", "myerson_revenue", "myerson_welfare", "psi", "ks_welfare"],
        rows,
        &reports,
    )
}
