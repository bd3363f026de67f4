//! The balanced identity `c_{alpha,n} lambda^2 / f^alpha = sum_J x^J / I_J(alpha)`,
//! with `c_{alpha,n} = (alpha-1)...(alpha-n)`, and a damped fixed-point iteration for it.
//!
//! In the disk case (`n = 1`, `alpha = 3`) the identity reads
//! `2 lambda^2 / f^3 = sum x^j / I_j`, and `f = lambda (1 - x)` is its only
//! entire analytic solution.

use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{weighted_moment_table, MomentTable};
use crate::scalar::{height_constant, Backend, Scalar};
use crate::series::{MultiIndex, TailBound, TruncatedSeries};
use crate::weight::{linspace, point_on, point_strings, simplex_grid, GridPoint, RadialWeight};

/// Series with coefficient `1 / I_J` at every `|J| <= order`.
pub fn kernel_series(table: &MomentTable, order: u32) -> Result<TruncatedSeries> {
    if order > table.max_order() {
        return Err(Error::OrderExceedsTable {
            order,
            max_order: table.max_order(),
        });
    }
    let terms = table
        .entries()
        .filter(|(j, _)| j.degree() <= order)
        .map(|(j, v)| (j.clone(), v.recip()));
    TruncatedSeries::new(table.n(), order, table.backend(), terms)
}

/// Default residual grid: 18 points up to 0.9 on (0,1), or a simplex lattice up to 0.9.
pub fn default_residual_grid(n: usize) -> Vec<GridPoint> {
    if n == 1 {
        linspace(&Rational::from((1, 20)), &Rational::from((9, 10)), 18)
    } else {
        simplex_grid(n, &Rational::from((9, 10)), 9)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub point: Vec<String>,
    pub lhs: Scalar,
    pub rhs: Scalar,
    pub residual: Scalar,
    /// Combined tail of both truncated sides.
    pub tail: TailBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub n: usize,
    pub alpha: String,
    pub lambda: Scalar,
    pub order: u32,
    pub rows: Vec<ResidualRow>,
    pub sup_norm: f64,
    /// Root mean square of the grid residuals.
    pub l2_norm: f64,
    pub max_tail: f64,
    pub tol: f64,
    /// Every tail bound valid and at most `tol`.
    pub trusted: bool,
}

impl ResidualReport {
    /// Residual magnitude is within the combined tail bound at every grid point.
    pub fn within_tail_bounds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.tail.valid && r.residual.abs().to_f64() <= r.tail.value)
    }
}

fn check_grid(grid: &[GridPoint], n: usize) -> Result<()> {
    for p in grid {
        if p.len() != n {
            return Err(Error::VarCountMismatch {
                expected: n,
                found: p.len(),
            });
        }
        let sum: Rational = p.iter().sum();
        if p.iter().any(|c| *c <= 0) || sum >= 1 {
            return Err(Error::InvalidArgument(format!(
                "grid point {:?} is outside the open domain",
                point_strings(p)
            )));
        }
    }
    Ok(())
}

/// `c_{alpha,n} lambda^2 f^{-alpha}` as a series truncated at `order`.
fn lhs_series(f: &TruncatedSeries, lambda: &Scalar, alpha: &Rational, n: usize, order: u32) -> Result<TruncatedSeries> {
    let backend = f.backend();
    let c = Scalar::from_rational(&height_constant(alpha, n as u32), backend);
    let lambda = lambda.to_backend(backend);
    let scale = &c * &(&lambda * &lambda);
    Ok(f.power(&Rational::from(-alpha), order)?.scale(&scale))
}

/// Grid residuals of the balanced identity.
///
/// Both sides are truncated series of order `order`: the left side is
/// `c lambda^2 f^{-alpha}` expanded by the power recurrence, the right side the
/// kernel series. Each row carries the sum of both tail bounds.
pub fn residual(
    f: &RadialWeight,
    lambda: &Scalar,
    table: &MomentTable,
    grid: &[GridPoint],
    order: u32,
    tol: f64,
) -> Result<ResidualReport> {
    let s = f.series();
    if s.n_vars() != table.n() {
        return Err(Error::VarCountMismatch {
            expected: table.n(),
            found: s.n_vars(),
        });
    }
    if s.backend() != table.backend() {
        return Err(Error::BackendMismatch);
    }
    check_grid(grid, table.n())?;
    let backend = s.backend();
    let lhs = lhs_series(s, lambda, table.alpha(), table.n(), order)?;
    let rhs = kernel_series(table, order)?;
    let rows = grid
        .par_iter()
        .map(|p| {
            let x = point_on(p, backend);
            let l = lhs.eval(&x)?;
            let r = rhs.eval(&x)?;
            Ok(ResidualRow {
                point: point_strings(p),
                residual: &l.value - &r.value,
                lhs: l.value,
                rhs: r.value,
                tail: l.tail.combine(&r.tail),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(summarize(table, lambda.to_backend(backend), order, rows, tol))
}

fn summarize(table: &MomentTable, lambda: Scalar, order: u32, rows: Vec<ResidualRow>, tol: f64) -> ResidualReport {
    let mut sup = Scalar::zero(lambda.backend());
    let mut sq = Float::with_val(64, 0);
    let mut max_tail = 0f64;
    for r in &rows {
        let a = r.residual.abs();
        if a.cmp_value(&sup).is_gt() {
            sup = a.clone();
        }
        let af = a.to_float(64);
        sq += Float::with_val(64, &af * &af);
        max_tail = max_tail.max(r.tail.value);
    }
    let l2 = if rows.is_empty() {
        0.0
    } else {
        (sq / rows.len() as u64).sqrt().to_f64()
    };
    let trusted = rows.iter().all(|r| r.tail.valid && r.tail.value <= tol);
    ResidualReport {
        n: table.n(),
        alpha: table.alpha().to_string(),
        lambda,
        order,
        rows,
        sup_norm: sup.to_f64(),
        l2_norm: l2,
        max_tail,
        tol,
        trusted,
    }
}

/// Default grid for [`conjecture_scan`]: the residual grid for `n = 1`, otherwise
/// the simplex lattice with coordinate sum up to 0.8.
pub fn default_scan_grid(n: usize) -> Vec<GridPoint> {
    if n == 1 {
        default_residual_grid(1)
    } else {
        simplex_grid(n, &Rational::from((4, 5)), 8)
    }
}

/// Residual of `c_{alpha,n} / f(x)^alpha - sum_{|J| <= degree} x^J / I_J(alpha)` for
/// `f = 1 - x_1 - ... - x_n`, `lambda = 1`.
///
/// The left side is evaluated in closed form at each point, so each residual is the
/// actual truncation error of the kernel sum and each row's tail is the kernel tail.
pub fn conjecture_scan(
    n: usize,
    alpha: &Rational,
    degree: u32,
    grid: &[GridPoint],
    backend: Backend,
    tol: f64,
) -> Result<ResidualReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "conjecture scan supports n in 1..=3, got {n}"
        )));
    }
    if *alpha.denom() != 1 {
        return Err(Error::NonIntegerAlpha(alpha.to_string()));
    }
    let f = RadialWeight::simplex_linear(n, degree, Scalar::one(backend))?;
    let table = weighted_moment_table(&f, alpha, n, degree)?;
    check_grid(grid, n)?;
    let rhs = kernel_series(&table, degree)?;
    let c = Scalar::from_rational(&height_constant(alpha, n as u32), backend);
    let a = alpha
        .numer()
        .to_i32()
        .ok_or_else(|| Error::InvalidArgument("alpha out of range".into()))?;
    let rows = grid
        .par_iter()
        .map(|p| {
            let x = point_on(p, backend);
            let fx = f.series().eval(&x)?.value;
            let lhs = &c / &fx.powi(a);
            let r = rhs.eval(&x)?;
            Ok(ResidualRow {
                point: point_strings(p),
                residual: &lhs - &r.value,
                lhs,
                rhs: r.value,
                tail: r.tail,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&table, Scalar::one(backend), degree, rows, tol))
}

/// The `lambda` that makes the identity hold at the origin,
/// `lambda^2 = f(0)^alpha / (c_{alpha,n} I_0)`.
pub fn normalize_lambda(f: &RadialWeight, table: &MomentTable) -> Result<Scalar> {
    let f0 = f.series().constant_term().to_backend(table.backend());
    if !f0.is_positive() {
        return Err(Error::NonpositiveConstantTerm);
    }
    let i0 = table
        .get(&MultiIndex::zero(table.n()))
        .ok_or(Error::OrderExceedsTable {
            order: 0,
            max_order: table.max_order(),
        })?;
    let c = Scalar::from_rational(&height_constant(table.alpha(), table.n() as u32), table.backend());
    let lambda_sq = &f0.pow_rational(table.alpha())? / &(&c * i0);
    lambda_sq.sqrt()
}

fn balancing_map_from_table(
    f: &RadialWeight,
    table: &MomentTable,
    lambda: &Scalar,
    order: u32,
) -> Result<RadialWeight> {
    let alpha = table.alpha();
    let backend = table.backend();
    let s = kernel_series(table, order)?;
    let inv_alpha = alpha.clone().recip();
    let lambda = lambda.to_backend(backend);
    let c = Scalar::from_rational(&height_constant(alpha, table.n() as u32), backend);
    let front = (&c * &(&lambda * &lambda)).pow_rational(&inv_alpha)?;
    let t = s.power(&Rational::from(-&inv_alpha), order)?.scale(&front);
    f.replace_series(t, true)
}

/// `T(f) = (c lambda^2 / S)^{1/alpha}` with `S` the kernel series of `f`'s moments, truncated at `order`.
///
/// Needs a float backend (the `1/alpha` power). Fails with `PositivityLost`
/// when the image is not positive on `f`'s grid.
pub fn balancing_map(
    f: &RadialWeight,
    lambda: &Scalar,
    order: u32,
    alpha: &Rational,
    n: usize,
) -> Result<RadialWeight> {
    let table = weighted_moment_table(f, alpha, n, order)?;
    balancing_map_from_table(f, &table, lambda, order)
}

#[derive(Clone, Debug)]
pub struct IterateOptions {
    /// Damping in (0, 1].
    pub theta: Rational,
    pub maxiter: usize,
    pub tol: f64,
    pub order: u32,
    pub alpha: Rational,
    pub n: usize,
    pub backend: Backend,
    pub reference: Option<RadialWeight>,
    pub residual_grid: Vec<GridPoint>,
}

impl IterateOptions {
    /// Disk-mode defaults: `theta = 1/2`, 200 steps, `tol = 1e-6`, `alpha = 3`, 256-bit floats.
    pub fn disk(order: u32) -> Self {
        IterateOptions {
            theta: Rational::from((1, 2)),
            maxiter: 200,
            tol: 1e-6,
            order,
            alpha: Rational::from(3),
            n: 1,
            backend: Backend::default_float(),
            reference: None,
            residual_grid: default_residual_grid(1),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationStep {
    pub iter: usize,
    pub lambda: Scalar,
    pub residual_sup: f64,
    pub coeff_distance: Option<f64>,
    pub positivity_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationTrace {
    pub steps: Vec<IterationStep>,
    pub final_weight: TruncatedSeries,
    pub converged: bool,
    pub stop_reason: String,
}

impl IterationTrace {
    pub fn last(&self) -> &IterationStep {
        self.steps.last().expect("trace has the initial step")
    }
}

/// `sup_J |f_J / lambda - r_J|`.
fn coeff_distance(f: &TruncatedSeries, lambda: &Scalar, reference: &TruncatedSeries) -> f64 {
    let backend = f.backend();
    let reference = reference.to_backend(backend);
    let lambda = lambda.to_backend(backend);
    let mut keys: Vec<&MultiIndex> = f.terms().map(|(i, _)| i).collect();
    keys.extend(reference.terms().map(|(i, _)| i));
    keys.sort();
    keys.dedup();
    let mut sup = Scalar::zero(backend);
    for k in keys {
        let d = (&(&f.coeff(k) / &lambda) - &reference.coeff(k)).abs();
        if d.cmp_value(&sup).is_gt() {
            sup = d;
        }
    }
    sup.to_f64()
}

/// Damped balancing iteration `f <- (1 - theta) f + theta T(f)`, re-pinning `lambda`
/// at the origin every step.
///
/// Step 0 records the starting weight; the stopping test `residual_sup <= tol`
/// is applied after each map application. Loss of positivity stops the run with
/// `converged = false`.
pub fn iterate(f0: &RadialWeight, opts: &IterateOptions) -> Result<IterationTrace> {
    if !(opts.theta > 0 && opts.theta <= 1) {
        return Err(Error::InvalidArgument("theta must lie in (0, 1]".into()));
    }
    if opts.backend.is_exact() {
        return Err(Error::ExactBackendFractionalPower);
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let backend = opts.backend;
    let theta = Scalar::from_rational(&opts.theta, backend);
    let keep = Scalar::from_rational(&Rational::from(1 - &opts.theta), backend);
    let reference = opts.reference.as_ref().map(|r| r.series().clone());

    let mut f = f0.replace_series(f0.series().to_backend(backend).with_order(opts.order), false)?;
    let mut steps = Vec::new();
    let mut converged = false;
    let mut stop_reason = "maxiter reached".to_string();

    let observe = |f: &RadialWeight, iter: usize| -> Result<(IterationStep, MomentTable)> {
        let table = weighted_moment_table(f, &opts.alpha, opts.n, opts.order)?;
        let lambda = normalize_lambda(f, &table)?;
        let report = residual(f, &lambda, &table, &opts.residual_grid, opts.order, opts.tol)?;
        let distance = reference.as_ref().map(|r| coeff_distance(f.series(), &lambda, r));
        Ok((
            IterationStep {
                iter,
                lambda,
                residual_sup: report.sup_norm,
                coeff_distance: distance,
                positivity_ok: true,
            },
            table,
        ))
    };

    let (step, mut table) = observe(&f, 0)?;
    steps.push(step);
    for iter in 1..=opts.maxiter {
        let lambda = steps.last().expect("nonempty").lambda.clone();
        let mapped = match balancing_map_from_table(&f, &table, &lambda, opts.order) {
            Ok(m) => m,
            Err(Error::PositivityLost { point }) => {
                steps.last_mut().expect("nonempty").positivity_ok = false;
                stop_reason = format!("positivity lost at {point:?}");
                break;
            }
            Err(e) => return Err(e),
        };
        let next = f.series().scale(&keep).add(&mapped.series().scale(&theta))?;
        f = match f.replace_series(next, true) {
            Ok(w) => w,
            Err(Error::PositivityLost { point }) => {
                steps.last_mut().expect("nonempty").positivity_ok = false;
                stop_reason = format!("positivity lost at {point:?}");
                break;
            }
            Err(e) => return Err(e),
        };
        let (step, t) = observe(&f, iter)?;
        table = t;
        let done = step.residual_sup <= opts.tol;
        steps.push(step);
        if done {
            converged = steps.iter().all(|s| s.positivity_ok);
            stop_reason = "residual below tolerance".into();
            break;
        }
    }
    Ok(IterationTrace {
        steps,
        final_weight: f.series().clone(),
        converged,
        stop_reason,
    })
}
