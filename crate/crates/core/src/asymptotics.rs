//! Boundary behavior at `x = 1`: derivatives, the `a_j` sequence, the remainder `z(x)`
//! and coefficient-growth witnesses.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{moment_table, MomentTable};
use crate::scalar::{Backend, Scalar};
use crate::series::TruncatedSeries;
use crate::weight::{linspace, RadialWeight};

/// Derivatives `f^(k)(1)` plus the checks `f(1) = 0`, `f'(1) = -1`, `f''(1) = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryProfile {
    pub derivatives: Vec<Scalar>,
    pub f_vanishes: bool,
    pub slope_minus_one: bool,
    pub curvature_zero: bool,
    pub tol: f64,
}

impl BoundaryProfile {
    pub fn all_pass(&self) -> bool {
        self.f_vanishes && self.slope_minus_one && self.curvature_zero
    }
}

fn within(v: &Scalar, target: i64, tol: f64) -> bool {
    let d = (v - &Scalar::from_i64(target, v.backend())).abs();
    if v.backend().is_exact() && tol == 0.0 {
        d.is_zero()
    } else {
        d.to_f64() <= tol
    }
}

/// `f^(k)(1)` for `k <= k_max` with the low-order flags checked to `tol`.
pub fn boundary_profile(f: &RadialWeight, k_max: u32, tol: f64) -> Result<BoundaryProfile> {
    let s = f.series();
    let derivatives = s.recenter_at_one(k_max)?;
    let low = s.derivatives_at_one(2);
    Ok(BoundaryProfile {
        derivatives,
        f_vanishes: within(&low[0], 0, tol),
        slope_minus_one: within(&low[1], -1, tol),
        curvature_zero: within(&low[2], 0, tol),
        tol,
    })
}

/// `f'''(1)`, read from the recentered polynomial.
pub fn third_derivative_at_one(f: &RadialWeight) -> Result<Scalar> {
    if f.n_vars() != 1 {
        return Err(Error::VarCountMismatch {
            expected: 1,
            found: f.n_vars(),
        });
    }
    Ok(f.series().derivatives_at_one(3).swap_remove(3))
}

/// `a_j = 1/I_j - (j+1)(j+2) - f'''(1)` for `j <= jmax`.
pub fn a_sequence(table: &MomentTable, f3_at_one: &Scalar, jmax: u32) -> Result<Vec<Scalar>> {
    if table.n() != 1 || *table.alpha() != 3 {
        return Err(Error::InvalidArgument(
            "a_j needs a one-variable table of height 3".into(),
        ));
    }
    if jmax > table.max_order() {
        return Err(Error::OrderExceedsTable {
            order: jmax,
            max_order: table.max_order(),
        });
    }
    let backend = table.backend();
    let f3 = f3_at_one.to_backend(backend);
    Ok((0..=jmax)
        .map(|j| {
            let inv = table.get_j(j).expect("table covers jmax").recip();
            let quad = Scalar::from_i64((j as i64 + 1) * (j as i64 + 2), backend);
            &(&inv - &quad) - &f3
        })
        .collect())
}

/// `z(x) = 2/f(x)^3 - 2/(1-x)^3 - f'''(1)/(1-x)` at each point of `grid` in `(0, 1)`.
///
/// Requires `f(1) = 0` and `f'(1) = -1` to within `tol`; otherwise `z` blows up at 1.
pub fn z_remainder(f: &RadialWeight, grid: &[Rational], tol: f64) -> Result<Vec<Scalar>> {
    let s = f.series();
    if s.n_vars() != 1 {
        return Err(Error::VarCountMismatch {
            expected: 1,
            found: s.n_vars(),
        });
    }
    let d = s.derivatives_at_one(3);
    if !within(&d[0], 0, tol) {
        return Err(Error::SingularProfile(format!("f(1) = {} is not 0", d[0])));
    }
    if !within(&d[1], -1, tol) {
        return Err(Error::SingularProfile(format!("f'(1) = {} is not -1", d[1])));
    }
    let backend = s.backend();
    let f3 = d[3].clone();
    let two = Scalar::from_i64(2, backend);
    grid.par_iter()
        .map(|x| {
            if *x <= 0 || *x >= 1 {
                return Err(Error::InvalidArgument(format!("z(x) needs 0 < x < 1, got {x}")));
            }
            let xs = Scalar::from_rational(x, backend);
            let fx = s.eval(std::slice::from_ref(&xs))?.value;
            if !fx.is_positive() {
                return Err(Error::SingularProfile(format!("f({x}) is not positive")));
            }
            let u = &Scalar::one(backend) - &xs;
            let a = &two / &fx.powi(3);
            let b = &two / &u.powi(3);
            let c = &f3 / &u;
            Ok(&(&a - &b) - &c)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaOResult {
    pub r0: u32,
    pub jmax: u32,
    /// `max_j |c_j| / (j+1)^r0`.
    pub c_bound: f64,
    pub coeff_bounded: bool,
    /// `max_x |S(x)| (1-x)^(r0+1)` over the grid; absent when the coefficient test already failed.
    pub s_bound: Option<f64>,
    pub s_bounded: bool,
    pub holds: bool,
}

/// Relative tail tolerance used by [`lemma_o_check`].
pub const LEMMA_O_TAIL_TOL: f64 = 1e-6;

/// Default grid for [`lemma_o_check`]: 19 points from 0.05 to 0.95.
pub fn lemma_o_grid() -> Vec<Rational> {
    linspace(&Rational::from((1, 20)), &Rational::from((19, 20)), 19)
        .into_iter()
        .map(|mut p| p.swap_remove(0))
        .collect()
}

/// Max over the upper half is at most twice the max over the lower half.
fn witness_flat(values: &[Float]) -> bool {
    let mid = values.len() / 2;
    let lo = values[..mid].iter().max_by(|a, b| a.total_cmp(b));
    let hi = values[mid..].iter().max_by(|a, b| a.total_cmp(b));
    match (lo, hi) {
        (Some(lo), Some(hi)) => hi.is_finite() && *hi <= Float::with_val(lo.prec(), lo * 2u32),
        _ => false,
    }
}

/// Finite witnesses for `c_j = O(j^r0)` and `S(x) = sum c_j x^j = O((1-x)^(-r0-1))`.
///
/// A witness "holds" when its maximum over the upper half of the tested range is at
/// most twice its maximum over the lower half. The series test runs only after the
/// coefficient test passes; any grid point whose tail bound is invalid or above
/// `LEMMA_O_TAIL_TOL` relative to `|S(x)|` raises `UntrustedTail`.
pub fn lemma_o_check<F>(c: F, r0: u32, jmax: u32, grid: &[Rational], backend: Backend) -> Result<LemmaOResult>
where
    F: Fn(u32) -> Scalar + Sync,
{
    if jmax < 10 {
        return Err(Error::InvalidArgument("jmax must be at least 10".into()));
    }
    let edge = Rational::from((999, 1000));
    if grid.is_empty() || grid.iter().any(|x| *x <= 0 || *x > edge) {
        return Err(Error::InvalidArgument("grid must lie in (0, 0.999]".into()));
    }
    let prec = backend.precision_bits().max(64);
    let coeffs: Vec<Scalar> = (0..=jmax).into_par_iter().map(|j| c(j).to_backend(backend)).collect();
    let ratios: Vec<Float> = coeffs
        .iter()
        .enumerate()
        .map(|(j, cj)| {
            let denom = Float::with_val(prec, j as u32 + 1).pow(r0);
            Float::with_val(prec, cj.abs().to_float(prec) / denom)
        })
        .collect();
    let c_bound = ratios.iter().max_by(|a, b| a.total_cmp(b)).expect("nonempty").to_f64();
    let coeff_bounded = witness_flat(&ratios);
    if !coeff_bounded {
        return Ok(LemmaOResult {
            r0,
            jmax,
            c_bound,
            coeff_bounded,
            s_bound: None,
            s_bounded: false,
            holds: false,
        });
    }
    let series = TruncatedSeries::univariate(jmax, backend, coeffs)?;
    let weighted: Vec<Float> = grid
        .par_iter()
        .map(|x| {
            let ev = series.eval(&[Scalar::from_rational(x, backend)])?;
            let mag = ev.value.abs().to_f64();
            if !ev.tail.valid || ev.tail.value > LEMMA_O_TAIL_TOL * mag {
                return Err(Error::UntrustedTail {
                    point: vec![x.to_string()],
                });
            }
            let u = Float::with_val(prec, &Rational::from(1 - x)).pow(r0 + 1);
            Ok(Float::with_val(prec, ev.value.abs().to_float(prec) * u))
        })
        .collect::<Result<_>>()?;
    let s_bound = weighted
        .iter()
        .max_by(|a, b| a.total_cmp(b))
        .expect("nonempty")
        .to_f64();
    let s_bounded = witness_flat(&weighted);
    Ok(LemmaOResult {
        r0,
        jmax,
        c_bound,
        coeff_bounded,
        s_bound: Some(s_bound),
        s_bounded,
        holds: coeff_bounded && s_bounded && s_bound.is_finite() && c_bound.is_finite(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub all_zero: bool,
    /// `d` in `|a_j| ~ C j^(-d)`; `None` when all-zero or too few nonzero entries.
    pub decay_slope: Option<f64>,
}

fn negligible(a_seq: &[Scalar], precision_bits: u32) -> bool {
    let threshold = 10f64.powf(-(precision_bits as f64) / 4.0);
    a_seq.iter().all(|a| a.abs().to_f64() <= threshold)
}

/// Decay of `a_j`: all-zero below `10^(-precision_bits/4)`, otherwise a least-squares
/// slope of `log|a_j|` against `log j` over the upper half of indices, skipping exact zeros.
pub fn decay_diagnostic(a_seq: &[Scalar], precision_bits: u32) -> Result<DecayFit> {
    if a_seq.len() < 20 {
        return Err(Error::InvalidArgument("decay fit needs at least 20 terms".into()));
    }
    if negligible(a_seq, precision_bits) {
        return Ok(DecayFit {
            all_zero: true,
            decay_slope: None,
        });
    }
    let start = a_seq.len() / 2;
    let pts: Vec<(f64, f64)> = a_seq[start..]
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .map(|(i, a)| {
            let j = (start + i) as f64;
            (j.ln(), a.abs().ln_float().to_f64())
        })
        .collect();
    if pts.len() < 2 {
        return Ok(DecayFit {
            all_zero: false,
            decay_slope: None,
        });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(DecayFit {
        all_zero: false,
        decay_slope: Some(-sxy / sxx),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub boundary: BoundaryProfile,
    pub boundary_derivatives: Vec<Scalar>,
    pub f3_at_one: Scalar,
    pub a_seq: Vec<Scalar>,
    pub decay_slope: Option<f64>,
    pub all_zero: bool,
}

impl AsymptoticsReport {
    pub fn csv_rows(&self) -> Vec<(u32, String)> {
        self.a_seq
            .iter()
            .enumerate()
            .map(|(j, a)| (j as u32, a.to_repr_string()))
            .collect()
    }
}

/// Boundary derivatives up to `k_max`, `a_j` for `j <= jmax` and its decay fit.
pub fn asymptotics_report(f: &RadialWeight, k_max: u32, jmax: u32, tol: f64) -> Result<AsymptoticsReport> {
    let boundary = boundary_profile(f, k_max, tol)?;
    let f3 = third_derivative_at_one(f)?;
    let table = moment_table(f, jmax)?;
    let a_seq = a_sequence(&table, &f3, jmax)?;
    let bits = if f.backend().is_exact() {
        crate::scalar::DEFAULT_PRECISION_BITS
    } else {
        f.backend().precision_bits()
    };
    // Short sequences get the zero test but no slope.
    let fit = if a_seq.len() < 20 {
        DecayFit {
            all_zero: negligible(&a_seq, bits),
            decay_slope: None,
        }
    } else {
        decay_diagnostic(&a_seq, bits)?
    };
    Ok(AsymptoticsReport {
        boundary_derivatives: boundary.derivatives.clone(),
        boundary,
        f3_at_one: f3,
        a_seq,
        decay_slope: fit.decay_slope,
        all_zero: fit.all_zero,
    })
}
