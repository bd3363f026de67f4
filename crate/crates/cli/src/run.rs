use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use bk_core::asymptotics::{asymptotics_report, z_remainder};
use bk_core::balancing::{self, conjecture_scan, iterate, normalize_lambda, IterateOptions};
use bk_core::geometry::balanced_check;
use bk_core::moments::weighted_moment_table;
use bk_core::rug::Rational;
use bk_core::weight::{linspace, simplex_grid};
use bk_core::{Backend, GridPoint, PotentialProfile, RadialWeight, Scalar, TruncatedSeries};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{rational, Command, Format, RunConfig};

/// Rows for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct Results {
    pub value: Value,
    pub table: Table,
    pub trusted: bool,
    pub exploratory: bool,
    /// Iteration trace CSV, written next to the report.
    pub trace: Option<Table>,
}

#[derive(Serialize, Debug)]
pub struct Timings {
    pub total_ms: u128,
}

#[derive(Serialize, Debug)]
pub struct Report {
    pub config_echo: RunConfig,
    pub results: Value,
    pub trusted: bool,
    pub exploratory: bool,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub timings: Option<Timings>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNTRUSTED: i32 = 2;

fn grid(cfg: &RunConfig) -> Result<Vec<GridPoint>> {
    let start = rational(&cfg.grid.start, "grid start")?;
    let stop = rational(&cfg.grid.stop, "grid stop")?;
    Ok(if cfg.n == 1 {
        linspace(&start, &stop, cfg.grid.count as usize)
    } else {
        simplex_grid(cfg.n, &stop, cfg.grid.count)
    })
}

fn float_backend(cfg: &RunConfig) -> Result<Backend> {
    Ok(Backend::float(cfg.precision_bits)?)
}

/// `"hyperbolic"` (`1 - x_1 - ... - x_n` at `order`) or a series JSON file.
/// `backend = None` keeps a file's own backend and builds the hyperbolic weight exactly.
fn load_weight(cfg: &RunConfig, order: u32, backend: Option<Backend>) -> Result<RadialWeight> {
    if cfg.weight == "hyperbolic" {
        let b = backend.unwrap_or(Backend::Exact);
        return Ok(RadialWeight::simplex_linear(cfg.n, order, Scalar::one(b))?);
    }
    let text = std::fs::read_to_string(&cfg.weight).with_context(|| format!("reading weight {}", cfg.weight))?;
    let mut s = TruncatedSeries::from_json_str(&text)?;
    s = match (backend, s.backend()) {
        (Some(b), _) => s.to_backend(b),
        (None, Backend::Float { .. }) => s.to_backend(float_backend(cfg)?),
        (None, Backend::Exact) => s,
    };
    Ok(RadialWeight::new(s)?)
}

fn alpha(cfg: &RunConfig) -> Result<Rational> {
    rational(&cfg.alpha, "alpha")
}

fn exploratory(cfg: &RunConfig, alpha: &Rational) -> bool {
    cfg.n == 1 && *alpha != 3
}

fn residual_table(r: &balancing::ResidualReport) -> Table {
    Table {
        header: vec!["point", "lhs", "rhs", "residual", "tail", "tail_valid"],
        rows: r
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.point.join(";"),
                    row.lhs.to_repr_string(),
                    row.rhs.to_repr_string(),
                    row.residual.to_repr_string(),
                    format!("{:e}", row.tail.value),
                    row.tail.valid.to_string(),
                ]
            })
            .collect(),
    }
}

fn residual_results(cfg: &RunConfig, f: &RadialWeight, lambda: Option<Scalar>) -> Result<Results> {
    let a = alpha(cfg)?;
    let table = weighted_moment_table(f, &a, cfg.n, cfg.order)?;
    let lambda = match lambda {
        Some(l) => l,
        None => normalize_lambda(f, &table)?,
    };
    let report = balancing::residual(f, &lambda, &table, &grid(cfg)?, cfg.order, cfg.tol)?;
    let within = report.within_tail_bounds();
    Ok(Results {
        table: residual_table(&report),
        trusted: report.trusted && within,
        exploratory: exploratory(cfg, &a),
        value: json!({ "within_tail_bounds": within, "residual": report }),
        trace: None,
    })
}

fn verify_hyperbolic(cfg: &RunConfig) -> Result<Results> {
    let b = float_backend(cfg)?;
    let f = RadialWeight::simplex_linear(cfg.n, cfg.order, Scalar::one(b))?;
    residual_results(cfg, &f, None)
}

fn residual(cfg: &RunConfig) -> Result<Results> {
    let b = float_backend(cfg)?;
    let f = load_weight(cfg, cfg.order, Some(b))?;
    let lambda = match &cfg.lambda {
        Some(l) => Some(Scalar::from_rational(&rational(l, "lambda")?, b)),
        None => None,
    };
    residual_results(cfg, &f, lambda)
}

fn run_iterate(cfg: &RunConfig) -> Result<Results> {
    let b = float_backend(cfg)?;
    let f0 = load_weight(cfg, cfg.order, Some(b))?;
    let a = alpha(cfg)?;
    let opts = IterateOptions {
        theta: rational(&cfg.theta, "theta")?,
        maxiter: cfg.maxiter,
        tol: cfg.tol,
        order: cfg.order,
        alpha: a.clone(),
        n: cfg.n,
        backend: b,
        reference: (cfg.n == 1 && a == 3).then(|| RadialWeight::hyperbolic(cfg.order, Backend::Exact)),
        residual_grid: grid(cfg)?,
    };
    let trace = iterate(&f0, &opts)?;
    let table = Table {
        header: vec!["iter", "lambda", "residual_sup", "coeff_distance", "positivity_ok"],
        rows: trace
            .steps
            .iter()
            .map(|s| {
                vec![
                    s.iter.to_string(),
                    s.lambda.to_repr_string(),
                    format!("{:e}", s.residual_sup),
                    s.coeff_distance.map(|d| format!("{d:e}")).unwrap_or_default(),
                    s.positivity_ok.to_string(),
                ]
            })
            .collect(),
    };
    let last = trace.last();
    let value = json!({
        "converged": trace.converged,
        "stop_reason": trace.stop_reason,
        "iterations": last.iter,
        "final_residual_sup": last.residual_sup,
        "final_distance": last.coeff_distance,
        "trace": trace,
    });
    Ok(Results {
        value,
        trusted: trace.converged,
        exploratory: exploratory(cfg, &a),
        trace: Some(table.clone()),
        table,
    })
}

fn asymptotics(cfg: &RunConfig) -> Result<Results> {
    if cfg.n != 1 {
        bail!("asymptotics needs a one-variable weight");
    }
    let f = load_weight(cfg, cfg.k.max(1), None)?;
    let report = asymptotics_report(&f, cfg.k, cfg.jmax, cfg.tol)?;
    let z = if report.boundary.f_vanishes && report.boundary.slope_minus_one {
        let pts = [Rational::from((9, 10)), Rational::from((99, 100))];
        let vals = z_remainder(&f, &pts, cfg.tol)?;
        Some(
            pts.iter()
                .zip(vals)
                .map(|(x, v)| json!({ "x": x.to_string(), "z": v }))
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let table = Table {
        header: vec!["j", "a_j"],
        rows: report
            .csv_rows()
            .into_iter()
            .map(|(j, a)| vec![j.to_string(), a])
            .collect(),
    };
    Ok(Results {
        value: json!({ "report": report, "z_remainder": z }),
        table,
        trusted: true,
        exploratory: false,
        trace: None,
    })
}

fn scan(cfg: &RunConfig) -> Result<Results> {
    let a = alpha(cfg)?;
    let report = conjecture_scan(cfg.n, &a, cfg.order, &grid(cfg)?, float_backend(cfg)?, cfg.tol)?;
    let within = report.within_tail_bounds();
    Ok(Results {
        table: residual_table(&report),
        trusted: report.trusted && within,
        exploratory: false,
        value: json!({ "within_tail_bounds": within, "scan": report }),
        trace: None,
    })
}

fn balanced(cfg: &RunConfig) -> Result<Results> {
    if cfg.n != 1 {
        bail!("balanced-check needs a one-variable weight");
    }
    let b = float_backend(cfg)?;
    let h = load_weight(cfg, 1, Some(b))?;
    let profile = PotentialProfile::new(h, alpha(cfg)?)?;
    let pts: Vec<Rational> = grid(cfg)?.into_iter().map(|mut p| p.swap_remove(0)).collect();
    let diag = balanced_check(&profile, &pts, cfg.jmax)?;
    let table = Table {
        header: vec!["x", "K", "g", "gauge_derivative"],
        rows: diag.csv_rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    Ok(Results {
        value: json!({ "balanced": diag.gauge_drift <= cfg.tol, "diagnostic": diag }),
        table,
        trusted: true,
        exploratory: false,
        trace: None,
    })
}

pub fn dispatch(cfg: &RunConfig) -> Result<Results> {
    match cfg.command {
        Command::VerifyHyperbolic => verify_hyperbolic(cfg),
        Command::Residual => residual(cfg),
        Command::Iterate => run_iterate(cfg),
        Command::Asymptotics => asymptotics(cfg),
        Command::ConjectureScan => scan(cfg),
        Command::BalancedCheck => balanced(cfg),
    }
}

fn csv_string(t: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn trace_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.trace.clone().or_else(|| match (cfg.format, &cfg.output) {
        (Format::Json, Some(out)) => Some(out.with_extension("trace.csv")),
        _ => None,
    })
}

fn is_untrusted(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<bk_core::Error>(),
        Some(bk_core::Error::UntrustedTail { .. })
    )
}

/// Run the configured command, write the report and return the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let start = Instant::now();
    let outcome = dispatch(cfg);
    let (results, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) if is_untrusted(&e) => (None, Some(e)),
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_INPUT;
        }
    };
    let trusted = results.as_ref().is_some_and(|r| r.trusted);
    let written = (|| -> Result<()> {
        if cfg.format == Format::Csv {
            if let Some(r) = &results {
                emit(cfg.output.as_deref(), &csv_string(&r.table)?)?;
            }
        } else {
            let report = Report {
                config_echo: cfg.clone(),
                results: results.as_ref().map(|r| r.value.clone()).unwrap_or(Value::Null),
                trusted,
                exploratory: results.as_ref().is_some_and(|r| r.exploratory),
                error: error.as_ref().map(|e| format!("{e:#}")),
                timestamp: (!cfg.no_timestamp).then(|| {
                    SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map(|d| d.as_secs())
                        .unwrap_or(0)
                }),
                timings: (!cfg.no_timestamp).then(|| Timings {
                    total_ms: start.elapsed().as_millis(),
                }),
            };
            emit(cfg.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            if let (Some(t), Some(p)) = (results.as_ref().and_then(|r| r.trace.as_ref()), trace_path(cfg)) {
                emit(Some(&p), &csv_string(t)?)?;
            }
        }
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return EXIT_INPUT;
    }
    if let Some(e) = &error {
        eprintln!("untrusted: {e:#}");
    }
    if trusted {
        EXIT_OK
    } else {
        EXIT_UNTRUSTED
    }
}
