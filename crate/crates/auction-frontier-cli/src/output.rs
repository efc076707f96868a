use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};

/// Environment variable naming the default directory for artifacts.
pub const OUT_DIR_ENV: &str = "AUCTION_FRONTIER_OUT";

/// Provenance written at the top of every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub grid: usize,
    pub lambda_grid: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<&'static str>,
}

impl Meta {
    pub fn new(cfg: &RunConfig) -> Self {
        Meta {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command.name(),
            config_sha256: cfg.hash(),
            grid: cfg.grid,
            lambda_grid: format!(
                "{} linear + {} geometric to {}, refine {:e}, depth {}",
                cfg.lambda.linear_steps, cfg.lambda.geometric_steps, cfg.lambda.lambda_max, cfg.lambda.refine_tol, cfg.lambda.max_depth
            ),
            seed: cfg.seed,
            generator: None,
        }
    }
}

/// A number or a label in a CSV row.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// 17 significant digits, `inf`/`nan` spelled out.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn write_cell(out: &mut String, c: &Cell) {
    match c {
        Cell::Num(x) => out.push_str(&fmt_num(*x)),
        Cell::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Cell::Text(s) if s.contains([',', '"', '\n']) => {
            out.push('"');
            out.push_str(&s.replace('"', "\"\""));
            out.push('"');
        }
        Cell::Text(s) => out.push_str(s),
    }
}

/// A table plus the structured record it was derived from.
pub struct Payload {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub record: Value,
}

impl Payload {
    pub fn new(columns: Vec<&'static str>, rows: Vec<Vec<Cell>>, record: impl Serialize) -> Result<Self> {
        let record = serde_json::to_value(record).map_err(|e| CliError::Numerical(format!("cannot encode result: {e}")))?;
        Ok(Payload { columns, rows, record })
    }
}

/// Rendered artifact.
pub struct Artifact {
    pub format: Format,
    pub body: String,
}

pub fn render(meta: &Meta, payload: &Payload, format: Format) -> Result<Artifact> {
    let body = match format {
        Format::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# tool: {} {}", meta.tool, meta.version);
            let _ = writeln!(out, "# command: {}", meta.command);
            let _ = writeln!(out, "# config_sha256: {}", meta.config_sha256);
            let _ = writeln!(out, "# grid: {}", meta.grid);
            let _ = writeln!(out, "# lambda_grid: {}", meta.lambda_grid);
            let _ = writeln!(out, "# seed: {}", meta.seed);
            if let Some(g) = meta.generator {
                let _ = writeln!(out, "# generator: {g}");
            }
            out.push_str(&payload.columns.join(","));
            out.push('\n');
            for row in &payload.rows {
                for (i, c) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_cell(&mut out, c);
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let doc = json!({ "meta": meta, "data": payload.record });
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numerical(format!("cannot encode result: {e}")))?;
            s.push('\n');
            s
        }
    };
    Ok(Artifact { format, body })
}

/// Destination for an artifact: explicit path, the default directory, or standard output.
pub fn destination(cfg: &RunConfig, out_dir: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = &cfg.output {
        return Some(p.clone());
    }
    out_dir.map(|d| d.join(format!("{}-{}.{}", cfg.command.name(), &cfg.hash()[..12], cfg.format().extension())))
}

pub fn write(artifact: &Artifact, dest: Option<&Path>) -> Result<()> {
    match dest {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                    path: parent.display().to_string(),
                    source,
                })?;
            }
            std::fs::write(p, &artifact.body).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(artifact.body.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: "<stdout>".into(),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}
