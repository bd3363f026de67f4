use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bk_core::parse_rational;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};

/// Environment variable overriding the default float precision.
pub const PRECISION_ENV: &str = "BK_PRECISION_BITS";

#[derive(Parser, Debug)]
#[command(name = "bk", version, about = "Weighted Bergman kernels and radial balanced metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Residual of the balanced identity for 1 - x against its own moments
    VerifyHyperbolic,
    /// Residual of the balanced identity for a weight file
    Residual,
    /// Damped balancing iteration from a starting weight
    Iterate,
    /// Boundary derivatives, a_j sequence and decay fit
    Asymptotics,
    /// Simplex identity residuals for f = 1 - x_1 - ... - x_n
    ConjectureScan,
    /// Gauge drift of log K + alpha log h
    BalancedCheck,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default, deserialize_with = "num_or_string")]
    pub start: Option<String>,
    #[serde(default, deserialize_with = "num_or_string")]
    pub stop: Option<String>,
    pub count: Option<u32>,
}

/// Every option, settable as a flag or as a key of the `--config` JSON file.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(skip)]
    pub command: Option<Command>,

    /// Weight: "hyperbolic" or a series JSON file
    #[arg(long, global = true)]
    pub weight: Option<String>,

    /// Float precision in bits (>= 64)
    #[arg(long = "precision", global = true)]
    #[serde(alias = "precision")]
    pub precision_bits: Option<u32>,

    /// Truncation order M (kernel degree for conjecture-scan)
    #[arg(long, global = true)]
    #[serde(alias = "order_m")]
    pub order: Option<u32>,

    #[arg(long, global = true)]
    #[serde(default, deserialize_with = "num_or_string")]
    pub grid_start: Option<String>,

    #[arg(long, global = true)]
    #[serde(default, deserialize_with = "num_or_string")]
    pub grid_stop: Option<String>,

    /// Point count (n = 1) or lattice divisions (n >= 2)
    #[arg(long, global = true)]
    pub grid_count: Option<u32>,

    #[arg(skip)]
    pub grid: Option<GridFile>,

    #[arg(long, global = true)]
    #[serde(default, deserialize_with = "num_or_string")]
    pub alpha: Option<String>,

    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Fixed lambda for residual (default: pinned at the origin)
    #[arg(long, global = true)]
    #[serde(default, deserialize_with = "num_or_string")]
    pub lambda: Option<String>,

    #[arg(long, global = true)]
    #[serde(default, deserialize_with = "num_or_string")]
    pub theta: Option<String>,

    #[arg(long, global = true)]
    pub maxiter: Option<usize>,

    #[arg(long, global = true)]
    pub tol: Option<f64>,

    #[arg(long, global = true)]
    pub jmax: Option<u32>,

    /// Highest boundary derivative for asymptotics
    #[arg(long, global = true)]
    pub k: Option<u32>,

    #[arg(long, global = true)]
    #[serde(alias = "output_path")]
    pub output: Option<PathBuf>,

    /// Per-iteration CSV for iterate
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Omit timestamp and timings so reports are byte-comparable
    #[arg(long, global = true)]
    #[serde(default)]
    pub no_timestamp: bool,
}

fn num_or_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    let v = Option::<serde_json::Value>::deserialize(d)?;
    match v {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(s)),
        Some(serde_json::Value::Number(n)) => Ok(Some(n.to_string())),
        Some(other) => Err(serde::de::Error::custom(format!(
            "expected number or string, got {other}"
        ))),
    }
}

impl Flags {
    /// Field-wise `self` over `base`.
    fn over(self, base: Flags) -> Flags {
        Flags {
            config: self.config.or(base.config),
            command: self.command.or(base.command),
            weight: self.weight.or(base.weight),
            precision_bits: self.precision_bits.or(base.precision_bits),
            order: self.order.or(base.order),
            grid_start: self.grid_start.or(base.grid_start),
            grid_stop: self.grid_stop.or(base.grid_stop),
            grid_count: self.grid_count.or(base.grid_count),
            grid: self.grid.or(base.grid),
            alpha: self.alpha.or(base.alpha),
            n: self.n.or(base.n),
            lambda: self.lambda.or(base.lambda),
            theta: self.theta.or(base.theta),
            maxiter: self.maxiter.or(base.maxiter),
            tol: self.tol.or(base.tol),
            jmax: self.jmax.or(base.jmax),
            k: self.k.or(base.k),
            output: self.output.or(base.output),
            trace: self.trace.or(base.trace),
            format: self.format.or(base.format),
            threads: self.threads.or(base.threads),
            no_timestamp: self.no_timestamp || base.no_timestamp,
        }
    }
}

#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub start: String,
    pub stop: String,
    pub count: u32,
}

/// Fully resolved configuration; echoed into every report.
#[derive(Serialize, Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub weight: String,
    pub precision_bits: u32,
    pub order: u32,
    pub grid: GridSpec,
    pub alpha: String,
    pub n: usize,
    pub lambda: Option<String>,
    pub theta: String,
    pub maxiter: usize,
    pub tol: f64,
    pub jmax: u32,
    pub k: u32,
    pub format: Format,
    pub no_timestamp: bool,
    // Where and how the run executes; excluded from the echo so reports compare equal.
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub trace: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn read_file(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Number of variables declared by a weight file, if `weight` names one.
fn weight_vars(weight: &str) -> Result<Option<usize>> {
    if weight == "hyperbolic" {
        return Ok(None);
    }
    let text = std::fs::read_to_string(weight).with_context(|| format!("reading weight {weight}"))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing weight {weight}"))?;
    Ok(v.get("n_vars").and_then(|n| n.as_u64()).map(|n| n as usize))
}

impl RunConfig {
    /// Merge flags over the config file over `BK_PRECISION_BITS` over defaults.
    pub fn resolve(command: Command, flags: Flags, env_precision: Option<String>) -> Result<RunConfig> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => Flags::default(),
        };
        if let Some(c) = file.command {
            if c != command {
                bail!("config file is for {:?}, command line asks for {:?}", c, command);
            }
        }
        let f = flags.over(file);
        let env_bits = match env_precision {
            Some(s) => Some(
                s.trim()
                    .parse::<u32>()
                    .with_context(|| format!("{PRECISION_ENV}={s} is not an integer"))?,
            ),
            None => None,
        };
        let precision_bits = f.precision_bits.or(env_bits).unwrap_or(bk_core::DEFAULT_PRECISION_BITS);
        if precision_bits < 64 {
            bail!("precision must be at least 64 bits, got {precision_bits}");
        }

        let weight = f.weight.clone().unwrap_or_else(|| "hyperbolic".into());
        let file_n = weight_vars(&weight)?;
        let n = match (f.n, file_n) {
            (Some(a), Some(b)) if a != b => bail!("--n {a} disagrees with the weight file ({b} variables)"),
            (a, b) => a.or(b).unwrap_or(1),
        };
        if n == 0 {
            bail!("n must be positive");
        }
        let alpha = f
            .alpha
            .clone()
            .unwrap_or_else(|| if n == 1 { "3".into() } else { (n + 2).to_string() });

        let order = f.order.unwrap_or(match command {
            Command::Iterate => 80,
            Command::ConjectureScan | Command::Residual if n > 1 => 60,
            _ => 300,
        });

        let grid_file = f.grid.clone().unwrap_or_default();
        let (d_start, d_stop, d_count) = match (command, n) {
            (_, 1) => ("1/20", "9/10", 18),
            (Command::ConjectureScan, _) => ("0", "4/5", 8),
            _ => ("0", "9/10", 9),
        };
        let grid = GridSpec {
            start: f
                .grid_start
                .clone()
                .or(grid_file.start)
                .unwrap_or_else(|| d_start.into()),
            stop: f.grid_stop.clone().or(grid_file.stop).unwrap_or_else(|| d_stop.into()),
            count: f.grid_count.or(grid_file.count).unwrap_or(d_count),
        };
        let tol = f.tol.unwrap_or(match command {
            Command::BalancedCheck => 1e-20,
            _ => 1e-6,
        });
        let jmax = f.jmax.unwrap_or(match command {
            Command::BalancedCheck => 400,
            _ => 100,
        });

        let cfg = RunConfig {
            command,
            weight,
            precision_bits,
            order,
            grid,
            alpha,
            n,
            lambda: f.lambda.clone(),
            theta: f.theta.clone().unwrap_or_else(|| "1/2".into()),
            maxiter: f.maxiter.unwrap_or(200),
            tol,
            jmax,
            k: f.k.unwrap_or(3),
            output: f.output.clone(),
            trace: f.trace.clone(),
            format: f.format.unwrap_or_default(),
            threads: f.threads,
            no_timestamp: f.no_timestamp,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let start = rational(&self.grid.start, "grid start")?;
        let stop = rational(&self.grid.stop, "grid stop")?;
        if stop >= 1 || stop <= 0 {
            bail!("grid stop must lie in (0, 1), got {}", self.grid.stop);
        }
        if self.n == 1 && (start <= 0 || start >= stop) {
            bail!("grid start must lie in (0, stop), got {}", self.grid.start);
        }
        if self.grid.count < 8 {
            bail!("grid count must be at least 8, got {}", self.grid.count);
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            bail!("tol must be positive, got {}", self.tol);
        }
        rational(&self.alpha, "alpha")?;
        let theta = rational(&self.theta, "theta")?;
        if theta <= 0 || theta > 1 {
            bail!("theta must lie in (0, 1], got {}", self.theta);
        }
        if let Some(l) = &self.lambda {
            if rational(l, "lambda")? <= 0 {
                bail!("lambda must be positive");
            }
        }
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        Ok(())
    }
}

pub fn rational(s: &str, what: &str) -> Result<bk_core::rug::Rational> {
    parse_rational(s).with_context(|| format!("cannot parse {what} {s:?}"))
}
