use std::collections::BTreeMap;
use std::path::PathBuf;

use auction_frontier::allocations::MechanismSpec;
use auction_frontier::bargaining::SolutionKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Command, DistributionDoc, DistributionSpec, Format, LambdaGrid, RunConfig, WeightValue};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "auction-frontier", version, about = "Revenue/surplus frontiers and bargaining solutions for i.i.d. auctions")]
pub struct Cli {
    /// Read the whole run from a JSON config instead of a subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; defaults to a file in $AUCTION_FRONTIER_OUT, or standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Option<Sub>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Sweep the revenue/surplus frontier.
    Frontier(SweepArgs),
    /// Compute a bargaining solution on the frontier.
    Solve {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Largest revenue at a given buyer surplus.
    RevenueAt {
        #[arg(long)]
        surplus: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Welfare ratios of every solution on the hard instance and on a regular family.
    #[command(name = "table1", alias = "welfare-table")]
    Table1 {
        /// Buyer counts for the hard instance.
        #[arg(long = "hard-n", value_delimiter = ',')]
        hard_n: Option<Vec<u32>>,
        /// Largest buyer count for the regular family.
        #[arg(long = "regular-n")]
        regular_n: Option<u32>,
        #[command(flatten)]
        dist: DistArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Multi-unit guarantee curve.
    Psi {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Single-buyer posted-price constants and their hard instances.
    #[command(name = "appendix-e", alias = "price-posting")]
    AppendixE {
        /// Minimisation grid steps per axis.
        #[arg(long)]
        steps: Option<usize>,
        /// Parameter of the price-gap instance.
        #[arg(long = "price-gap")]
        price_gap: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Monte Carlo estimate of a mechanism's revenue and surplus.
    Simulate {
        /// Mechanism as JSON, e.g. '{"kind":"spa-with-reserve","reserve":0.5}'.
        #[arg(long, conflicts_with = "reserve")]
        mechanism: Option<String>,
        /// Shorthand for a second-price auction with this reserve.
        #[arg(long)]
        reserve: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<u32>,
        #[command(flatten)]
        dist: DistArgs,
    },
    /// Weighted objective curve and its concave hull.
    Curve {
        #[arg(long = "lambda")]
        weight: Option<WeightValue>,
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        n: Option<u32>,
    },
    /// Canonical interim allocation for one objective weight.
    Allocation {
        #[arg(long = "lambda")]
        weight: Option<WeightValue>,
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Multi-unit benchmarks for every unit count.
    Multiunit {
        #[arg(long)]
        n: Option<u32>,
        #[command(flatten)]
        dist: DistArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Ks,
    Nash,
    Csnash,
}

impl From<KindArg> for SolutionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ks => SolutionKind::Ks,
            KindArg::Nash => SolutionKind::Nash,
            KindArg::Csnash => SolutionKind::CrossSideNash,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: Option<u32>,
    #[command(flatten)]
    pub dist: DistArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Default, Args)]
pub struct GridArgs {
    /// Quantile cells.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub linear_steps: Option<usize>,
    #[arg(long)]
    pub geometric_steps: Option<usize>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct DistArgs {
    /// Named family: uniform, exponential, equal-revenue, lomax, mhr-hard-instance, price-gap, quasi-regular-tight, piecewise.
    #[arg(long, conflicts_with = "dist")]
    pub family: Option<String>,
    /// Distribution document, inline JSON or a path to a JSON file.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub low: Option<f64>,
    #[arg(long)]
    pub high: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    /// Truncation point.
    #[arg(long = "H", alias = "cap")]
    pub cap: Option<f64>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub buyers: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub pivot: Option<f64>,
    /// Piecewise knots as a JSON array of [q, v] pairs.
    #[arg(long)]
    pub knots: Option<String>,
}

impl DistArgs {
    fn spec(&self) -> Result<Option<DistributionSpec>> {
        if let Some(d) = &self.dist {
            if d.trim_start().starts_with('{') {
                let doc = serde_json::from_str(d).map_err(|e| CliError::Config(format!("--dist: {e}")))?;
                return Ok(Some(DistributionSpec::Inline(doc)));
            }
            return Ok(Some(DistributionSpec::File(PathBuf::from(d))));
        }
        let Some(family) = &self.family else {
            return Ok(None);
        };
        let mut params = BTreeMap::new();
        for (key, val) in [
            ("low", self.low),
            ("high", self.high),
            ("rate", self.rate),
            ("H", self.cap),
            ("shape", self.shape),
            ("scale", self.scale),
            ("buyers", self.buyers),
            ("k", self.k),
            ("ell", self.ell),
            ("pivot", self.pivot),
        ] {
            if let Some(v) = val {
                params.insert(key.to_string(), v);
            }
        }
        let knots = match &self.knots {
            Some(k) => Some(serde_json::from_str(k).map_err(|e| CliError::Config(format!("--knots: {e}")))?),
            None => None,
        };
        Ok(Some(DistributionSpec::Inline(DistributionDoc {
            family: family.clone(),
            params,
            knots,
        })))
    }
}

impl GridArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        let d = LambdaGrid::default();
        cfg.lambda = LambdaGrid {
            linear_steps: self.linear_steps.unwrap_or(d.linear_steps),
            geometric_steps: self.geometric_steps.unwrap_or(d.geometric_steps),
            lambda_max: self.lambda_max.unwrap_or(d.lambda_max),
            ..d
        };
    }
}

impl SweepArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        cfg.n = self.n;
        cfg.distribution = self.dist.spec()?;
        self.grid.apply(cfg);
        Ok(())
    }
}

impl Cli {
    /// The run this invocation describes.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.command) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either --config or a subcommand, not both".into())),
            (None, None) => return Err(CliError::Config("no subcommand given; see --help".into())),
            (Some(path), None) => RunConfig::load(path)?,
            (None, Some(sub)) => sub.run_config()?,
        };
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        Ok(cfg)
    }
}

impl Sub {
    fn run_config(&self) -> Result<RunConfig> {
        let cfg = match self {
            Sub::Frontier(s) => {
                let mut cfg = RunConfig::new(Command::Frontier);
                s.apply(&mut cfg)?;
                cfg
            }
            Sub::Solve { kind, sweep } => {
                let mut cfg = RunConfig::new(Command::Solve);
                sweep.apply(&mut cfg)?;
                cfg.kind = Some((*kind).into());
                cfg
            }
            Sub::RevenueAt { surplus, sweep } => {
                let mut cfg = RunConfig::new(Command::RevenueAt);
                sweep.apply(&mut cfg)?;
                cfg.surplus = Some(*surplus);
                cfg
            }
            Sub::Table1 { hard_n, regular_n, dist, grid } => {
                let mut cfg = RunConfig::new(Command::Table1);
                if let Some(h) = hard_n {
                    cfg.hard_n = h.clone();
                }
                if let Some(r) = regular_n {
                    cfg.regular_n = *r;
                }
                cfg.distribution = dist.spec()?;
                grid.apply(&mut cfg);
                cfg
            }
            Sub::Psi { steps } => {
                let mut cfg = RunConfig::new(Command::Psi);
                cfg.steps = *steps;
                cfg
            }
            Sub::AppendixE { steps, price_gap, grid } => {
                let mut cfg = RunConfig::new(Command::AppendixE);
                cfg.steps = *steps;
                if let Some(k) = price_gap {
                    cfg.price_gap = *k;
                }
                if let Some(g) = grid {
                    cfg.grid = *g;
                }
                cfg
            }
            Sub::Simulate {
                mechanism,
                reserve,
                trials,
                seed,
                n,
                dist,
            } => {
                let mut cfg = RunConfig::new(Command::Simulate);
                cfg.mechanism = match (mechanism, reserve) {
                    (Some(m), _) => Some(serde_json::from_str::<MechanismSpec>(m).map_err(|e| CliError::Config(format!("--mechanism: {e}")))?),
                    (None, Some(r)) => Some(MechanismSpec::SpaWithReserve { reserve: *r }),
                    (None, None) => None,
                };
                if let Some(t) = trials {
                    cfg.trials = *t;
                }
                if let Some(s) = seed {
                    cfg.seed = *s;
                }
                cfg.n = *n;
                cfg.distribution = dist.spec()?;
                cfg
            }
            Sub::Curve { weight, dist, grid, n } => {
                let mut cfg = RunConfig::new(Command::Curve);
                cfg.weight = *weight;
                cfg.distribution = dist.spec()?;
                cfg.n = *n;
                if let Some(g) = grid {
                    cfg.grid = *g;
                }
                cfg
            }
            Sub::Allocation { weight, eps, sweep } => {
                let mut cfg = RunConfig::new(Command::Allocation);
                sweep.apply(&mut cfg)?;
                cfg.weight = *weight;
                cfg.eps = eps.unwrap_or(0.0);
                cfg
            }
            Sub::Multiunit { n, dist } => {
                let mut cfg = RunConfig::new(Command::Multiunit);
                cfg.n = *n;
                cfg.distribution = dist.spec()?;
                cfg
            }
        };
        Ok(cfg)
    }
}
