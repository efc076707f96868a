use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use auction_frontier::allocations::MechanismSpec;
use auction_frontier::bargaining::SolutionKind;
use auction_frontier::frontier::SweepConfig;
use auction_frontier::singlebuyer::TIGHT_MINIMIZER;
use auction_frontier::{Family, ValueCurve};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Frontier,
    Solve,
    RevenueAt,
    Table1,
    Psi,
    AppendixE,
    Simulate,
    Curve,
    Allocation,
    Multiunit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Frontier => "frontier",
            Command::Solve => "solve",
            Command::RevenueAt => "revenue-at",
            Command::Table1 => "table1",
            Command::Psi => "psi",
            Command::AppendixE => "appendix-e",
            Command::Simulate => "simulate",
            Command::Curve => "curve",
            Command::Allocation => "allocation",
            Command::Multiunit => "multiunit",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Frontier | Command::Table1 | Command::Psi | Command::Curve | Command::Allocation => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// A distribution document: a named family with numeric parameters, or piecewise knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionDoc {
    pub family: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<[f64; 2]>>,
}

/// Inline distribution or a path to a JSON file holding one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionSpec {
    Inline(DistributionDoc),
    File(PathBuf),
}

impl DistributionSpec {
    pub fn resolve(&self) -> Result<DistributionDoc> {
        match self {
            DistributionSpec::Inline(d) => Ok(d.clone()),
            DistributionSpec::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }
}

impl DistributionDoc {
    /// Build the family; `buyers` supplies the default size of the hard instance.
    pub fn family(&self, buyers: Option<u32>) -> Result<Family> {
        let mut p = Params::new(&self.params);
        let fam = match self.family.as_str() {
            "uniform" => Family::Uniform {
                low: p.get_or("low", 0.0),
                high: p.get_or("high", 1.0),
            },
            "exponential" => Family::Exponential {
                rate: p.get_or("rate", 1.0),
                cap: p.cap(),
            },
            "equal-revenue" | "equal-revenue-truncated" => Family::EqualRevenue {
                cap: p.cap().ok_or_else(|| CliError::Config("equal-revenue needs a cap `H`".into()))?,
            },
            "lomax" => Family::Lomax {
                shape: p.get_or("shape", 2.0),
                scale: p.get_or("scale", 1.0),
                cap: p.cap(),
            },
            "mhr-hard-instance" => {
                let buyers = match p.get("buyers") {
                    Some(b) => b,
                    None => buyers.ok_or_else(|| CliError::Config("mhr-hard-instance needs `buyers` or --n".into()))? as f64,
                };
                Family::MhrHard { buyers }
            }
            "price-gap" => Family::PriceGap { k: p.get_or("k", 8.0) },
            "quasi-regular-tight" => Family::QuasiRegularTight {
                ell: p.get_or("ell", TIGHT_MINIMIZER.0),
                pivot: p.get_or("pivot", TIGHT_MINIMIZER.1),
            },
            "piecewise" => {
                let knots = self
                    .knots
                    .clone()
                    .ok_or_else(|| CliError::Config("piecewise distribution needs `knots`".into()))?;
                check_knots(&knots)?;
                Family::Piecewise { knots }
            }
            other => return Err(CliError::Config(format!("unknown distribution family `{other}`"))),
        };
        if self.knots.is_some() && self.family != "piecewise" {
            return Err(CliError::Config("`knots` is only valid for the piecewise family".into()));
        }
        p.finish(&self.family)?;
        Ok(fam)
    }

    pub fn build(&self, buyers: Option<u32>) -> Result<ValueCurve> {
        Ok(self.family(buyers)?.build()?)
    }
}

fn check_knots(knots: &[[f64; 2]]) -> Result<()> {
    for w in knots.windows(2) {
        let ([q0, v0], [q1, v1]) = (w[0], w[1]);
        if q1 < q0 {
            return Err(CliError::Config(format!("knots must be sorted by q: {q1} follows {q0}")));
        }
        if v1 > v0 {
            return Err(CliError::Config(format!("knot values must not increase: {v1} follows {v0} at q = {q1}")));
        }
    }
    Ok(())
}

struct Params<'a> {
    raw: &'a BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(raw: &'a BTreeMap<String, f64>) -> Self {
        Params { raw, used: Vec::new() }
    }

    fn get(&mut self, key: &'static str) -> Option<f64> {
        self.used.push(key);
        self.raw.get(key).copied()
    }

    fn get_or(&mut self, key: &'static str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    /// Truncation point, spelled `H` or `cap`.
    fn cap(&mut self) -> Option<f64> {
        self.get("H").or_else(|| self.get("cap"))
    }

    fn finish(&self, family: &str) -> Result<()> {
        match self.raw.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(CliError::Config(format!("unknown parameter `{k}` for {family}"))),
            None => Ok(()),
        }
    }
}

/// Objective weight as given on the command line or in a config: a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightValue {
    Number(f64),
    Text(InfiniteTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfiniteTag {
    #[serde(rename = "inf")]
    Inf,
}

impl WeightValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            WeightValue::Number(x) => *x,
            WeightValue::Text(InfiniteTag::Inf) => f64::INFINITY,
        }
    }
}

impl std::str::FromStr for WeightValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inf" | "infinity" => Ok(WeightValue::Text(InfiniteTag::Inf)),
            _ => s.parse::<f64>().map(WeightValue::Number).map_err(|e| e.to_string()),
        }
    }
}

/// Objective-weight schedule of the frontier sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaGrid {
    pub linear_steps: usize,
    pub geometric_steps: usize,
    pub lambda_max: f64,
    pub refine_tol: f64,
    pub max_depth: u32,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        let d = SweepConfig::default();
        LambdaGrid {
            linear_steps: d.linear_steps,
            geometric_steps: d.geometric_steps,
            lambda_max: d.lambda_max,
            refine_tol: d.refine_tol,
            max_depth: d.max_depth,
        }
    }
}

fn default_grid() -> usize {
    SweepConfig::default().cells
}

fn default_trials() -> u64 {
    1_000_000
}

fn default_hard_n() -> Vec<u32> {
    vec![1_000, 10_000, 100_000, 1_000_000]
}

fn default_regular_n() -> u32 {
    5
}

fn default_price_gap() -> f64 {
    8.0
}

/// Everything one run depends on. Two runs with equal configs write identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub lambda: LambdaGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SolutionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surplus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightValue>,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default = "default_price_gap")]
    pub price_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismSpec>,
    #[serde(default = "default_hard_n")]
    pub hard_n: Vec<u32>,
    #[serde(default = "default_regular_n")]
    pub regular_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Where to write; excluded from the config hash so that moving an artifact does not change it.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            distribution: None,
            n: None,
            grid: default_grid(),
            lambda: LambdaGrid::default(),
            kind: None,
            surplus: None,
            weight: None,
            eps: 0.0,
            seed: 0,
            trials: default_trials(),
            steps: None,
            price_gap: default_price_gap(),
            mechanism: None,
            hard_n: default_hard_n(),
            regular_n: default_regular_n(),
            format: None,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_else(|| self.command.default_format())
    }

    /// SHA-256 of the canonical JSON encoding, as lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let cfg = SweepConfig {
            cells: self.grid,
            linear_steps: self.lambda.linear_steps,
            geometric_steps: self.lambda.geometric_steps,
            lambda_max: self.lambda.lambda_max,
            refine_tol: self.lambda.refine_tol,
            max_depth: self.lambda.max_depth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn buyers(&self) -> Result<u32> {
        match self.n {
            Some(0) => Err(CliError::Config("--n must be positive".into())),
            Some(n) => Ok(n),
            None => Err(CliError::Config(format!("{} needs the number of buyers --n", self.command.name()))),
        }
    }

    pub fn distribution(&self) -> Result<DistributionDoc> {
        self.distribution
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{} needs a distribution (--family or --dist)", self.command.name())))?
            .resolve()
    }

    pub fn curve(&self) -> Result<ValueCurve> {
        self.distribution()?.build(self.n)
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(CliError::Config(format!("grid must have at least 2 cells, got {}", self.grid)));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be positive".into()));
        }
        if self.steps == Some(0) {
            return Err(CliError::Config("steps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(CliError::Config(format!("eps must lie in [0, 1], got {}", self.eps)));
        }
        if self.n == Some(0) || self.regular_n == 0 || self.hard_n.contains(&0) {
            return Err(CliError::Config("buyer counts must be positive".into()));
        }
        if !(self.price_gap > 2.0) {
            return Err(CliError::Config(format!("price-gap parameter must exceed 2, got {}", self.price_gap)));
        }
        if let Some(w) = self.weight {
            if w.as_f64().is_nan() || w.as_f64() < 0.0 {
                return Err(CliError::Config(format!("weight must be non-negative, got {}", w.as_f64())));
            }
        }
        self.sweep_config().map(|_| ())
    }
}
