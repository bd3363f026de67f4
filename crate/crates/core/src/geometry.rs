//! Radial potentials `Phi = -log h` on the disk: monomial norms, the diagonal Bergman
//! kernel, the balanced-condition drift and the metric coefficient.

use rayon::prelude::*;
use rug::float::Constant;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::moment;
use crate::scalar::{Backend, Scalar};
use crate::series::{Evaluation, MultiIndex, TailBound, TruncatedSeries};
use crate::weight::{linspace, RadialWeight};

/// Series order used for `log h` in [`metric_coefficient`].
pub const METRIC_ORDER: u32 = 1024;

/// Step of the centered differences in [`balanced_check`].
pub const FD_STEP: (i64, i64) = (1, 1_000_000);

/// `h = e^{-Phi}` together with the height `alpha`.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialProfile {
    pub h: RadialWeight,
    #[serde(serialize_with = "crate::scalar::serialize_rational")]
    pub alpha: Rational,
    /// `Phi(0) - log K(0) / alpha`; filled in by [`balanced_check`].
    pub phi0_gauge: Option<Scalar>,
}

impl PotentialProfile {
    pub fn new(h: RadialWeight, alpha: Rational) -> Result<Self> {
        if h.n_vars() != 1 {
            return Err(Error::VarCountMismatch {
                expected: 1,
                found: h.n_vars(),
            });
        }
        Ok(PotentialProfile {
            h,
            alpha,
            phi0_gauge: None,
        })
    }
}

fn float_backend(b: Backend) -> Backend {
    if b.is_exact() {
        Backend::default_float()
    } else {
        b
    }
}

fn pi(backend: Backend) -> Scalar {
    let prec = backend.precision_bits();
    Scalar::Float(Float::with_val(prec, Constant::Pi))
}

/// `b_j = 1 / (pi I_j)` for `j <= jmax`, on a float backend (the default one for exact weights).
pub fn basis_norms(h: &RadialWeight, jmax: u32) -> Result<Vec<Scalar>> {
    let backend = float_backend(h.backend());
    let pi = pi(backend);
    (0..=jmax)
        .into_par_iter()
        .map(|j| Ok((&pi * &moment(h, j)?.to_backend(backend)).recip()))
        .collect()
}

fn kernel_series(b: &[Scalar]) -> Result<TruncatedSeries> {
    let backend = b
        .first()
        .map(Scalar::backend)
        .ok_or_else(|| Error::InvalidArgument("kernel needs at least one coefficient".into()))?;
    TruncatedSeries::univariate(b.len() as u32 - 1, backend, b.to_vec())
}

/// `K(x) = sum_j b_j x^j` with its tail bound; `UntrustedTail` when the bound is invalid.
pub fn kernel_diagonal(b: &[Scalar], x: &Scalar) -> Result<Evaluation> {
    if x.abs().cmp_value(&Scalar::one(x.backend())).is_ge() {
        return Err(Error::InvalidArgument("kernel_diagonal needs |x| < 1".into()));
    }
    let k = kernel_series(b)?;
    let ev = k.eval(&[x.to_backend(k.backend())])?;
    if !ev.tail.valid {
        return Err(Error::UntrustedTail {
            point: vec![x.to_repr_string()],
        });
    }
    Ok(ev)
}

/// Coefficients of `g(x) = Phi'(x) + x Phi''(x) = sum_d d^2 Phi_d x^(d-1)` with `Phi = -log h`.
pub fn metric_series(h: &RadialWeight, order: u32) -> Result<TruncatedSeries> {
    let backend = float_backend(h.backend());
    let phi = h
        .series()
        .to_backend(backend)
        .log(order)?
        .scale(&Scalar::from_i64(-1, backend));
    let terms = phi.terms().filter(|(i, _)| i.degree() > 0).map(|(i, c)| {
        let d = i.degree();
        (MultiIndex::univariate(d - 1), c.mul_int(&Integer::from(d * d)))
    });
    TruncatedSeries::new(1, order - 1, backend, terms)
}

/// `g(x) = Phi'(x) + x Phi''(x)` from the series of `log h` at order [`METRIC_ORDER`].
pub fn metric_coefficient(profile: &PotentialProfile, x: &Rational) -> Result<Scalar> {
    let g = metric_series(&profile.h, METRIC_ORDER)?;
    metric_at(&profile.h, &g, x).map(|e| e.value)
}

fn metric_at(h: &RadialWeight, g: &TruncatedSeries, x: &Rational) -> Result<Evaluation> {
    let backend = g.backend();
    let xs = [Scalar::from_rational(x, backend)];
    if !h.series().to_backend(backend).eval(&xs)?.value.is_positive() {
        return Err(Error::NonpositiveWeight {
            point: vec![x.to_string()],
        });
    }
    g.eval(&xs)
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelRow {
    pub x: String,
    pub k: Scalar,
    pub tail: TailBound,
    /// `d/dx (log K + alpha log h)` by centered differences.
    pub gauge_derivative: f64,
    pub metric: Scalar,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelDiagnostic {
    pub alpha: String,
    pub jmax: u32,
    pub b: Vec<Scalar>,
    pub rows: Vec<KernelRow>,
    pub gauge_drift: f64,
    pub phi0_gauge: Scalar,
}

impl KernelDiagnostic {
    /// `(x, K, g, gauge_derivative)` rows.
    pub fn csv_rows(&self) -> Vec<[String; 4]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.x.clone(),
                    r.k.to_repr_string(),
                    r.metric.to_repr_string(),
                    format!("{:e}", r.gauge_derivative),
                ]
            })
            .collect()
    }
}

/// Default grid for [`balanced_check`]: 18 points from 0.05 to 0.9.
pub fn balanced_grid() -> Vec<Rational> {
    linspace(&Rational::from((1, 20)), &Rational::from((9, 10)), 18)
        .into_iter()
        .map(|mut p| p.swap_remove(0))
        .collect()
}

/// `F(x) = log K(x) + alpha log h(x)`, with `K` truncated at `b.len() - 1`.
fn gauge(k: &TruncatedSeries, h: &TruncatedSeries, alpha: &Scalar, x: &Rational) -> Result<Float> {
    let backend = k.backend();
    let xs = [Scalar::from_rational(x, backend)];
    let kv = k.eval(&xs)?;
    if !kv.tail.valid {
        return Err(Error::UntrustedTail {
            point: vec![x.to_string()],
        });
    }
    let hv = h.eval(&xs)?.value;
    if !hv.is_positive() {
        return Err(Error::NonpositiveWeight {
            point: vec![x.to_string()],
        });
    }
    let prec = backend.precision_bits();
    let a = alpha.to_float(prec);
    Ok(Float::with_val(prec, kv.value.ln_float() + a * hv.ln_float()))
}

/// Gauge drift `sup_x |d/dx (log K + alpha log h)|` over `grid`, zero exactly when
/// `Phi - log K / alpha` is constant, i.e. the metric is balanced of height `alpha`.
pub fn balanced_check(profile: &PotentialProfile, grid: &[Rational], jmax: u32) -> Result<KernelDiagnostic> {
    if profile.alpha <= 0 {
        return Err(Error::InvalidAlpha(profile.alpha.to_string()));
    }
    let edge = Rational::from((9, 10));
    if grid.iter().any(|x| *x <= 0 || *x > edge) {
        return Err(Error::InvalidArgument("grid must lie in (0, 0.9]".into()));
    }
    let h = &profile.h;
    let b = basis_norms(h, jmax)?;
    let k = kernel_series(&b)?;
    let backend = k.backend();
    let prec = backend.precision_bits();
    let hs = h.series().to_backend(backend);
    let alpha = Scalar::from_rational(&profile.alpha, backend);
    let g = metric_series(h, METRIC_ORDER)?;
    let delta = Rational::from(FD_STEP);

    let rows = grid
        .par_iter()
        .map(|x| {
            let up = gauge(&k, &hs, &alpha, &Rational::from(x + &delta))?;
            let down = gauge(&k, &hs, &alpha, &Rational::from(x - &delta))?;
            let two_delta = Float::with_val(prec, Rational::from(&delta * 2u32));
            let deriv = Float::with_val(prec, up - down) / two_delta;
            let kv = k.eval(&[Scalar::from_rational(x, backend)])?;
            let metric = metric_at(h, &g, x)?.value;
            Ok(KernelRow {
                x: x.to_string(),
                k: kv.value,
                tail: kv.tail,
                gauge_derivative: deriv.to_f64(),
                metric,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gauge_drift = rows.iter().map(|r| r.gauge_derivative.abs()).fold(0.0, f64::max);

    let h0 = hs.constant_term();
    if !h0.is_positive() {
        return Err(Error::NonpositiveWeight {
            point: vec!["0".into()],
        });
    }
    let phi0 = Float::with_val(prec, -h0.ln_float()) - Float::with_val(prec, b[0].ln_float() / alpha.to_float(prec));
    Ok(KernelDiagnostic {
        alpha: profile.alpha.to_string(),
        jmax,
        b,
        rows,
        gauge_drift,
        phi0_gauge: Scalar::Float(phi0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fb() -> Backend {
        Backend::default_float()
    }

    fn close(a: &Scalar, b: f64, tol: f64) -> bool {
        (a.to_f64() - b).abs() <= tol
    }

    #[test]
    fn basis_norm_examples() {
        let pi = std::f64::consts::PI;
        let b = basis_norms(&RadialWeight::hyperbolic(2, Backend::Exact), 2).unwrap();
        for (j, bj) in b.iter().enumerate() {
            assert!(close(bj, ((j + 1) * (j + 2)) as f64 / pi, 1e-14));
        }
        let one = RadialWeight::new(TruncatedSeries::constant(1, 0, Scalar::one(fb()))).unwrap();
        assert!(close(&basis_norms(&one, 0).unwrap()[0], 1.0 / pi, 1e-15));
        let two = RadialWeight::simplex_linear(1, 1, Scalar::from_i64(2, fb())).unwrap();
        assert!(close(&basis_norms(&two, 1).unwrap()[1], 3.0 / pi, 1e-15));
    }

    #[test]
    fn kernel_diagonal_examples() {
        let b = basis_norms(&RadialWeight::hyperbolic(1, fb()), 300).unwrap();
        let pi = pi(fb());
        let k0 = kernel_diagonal(&b, &Scalar::zero(fb())).unwrap();
        assert!((&k0.value - &(&Scalar::from_i64(2, fb()) / &pi)).abs().to_f64() < 1e-70);
        let half = Scalar::from_rational(&Rational::from((1, 2)), fb());
        let k = kernel_diagonal(&b, &half).unwrap();
        let err = (&k.value - &(&Scalar::from_i64(16, fb()) / &pi)).abs().to_f64();
        assert!(err <= k.tail.value && k.tail.value < 1e-20);

        let single = [Scalar::one(fb())];
        assert_eq!(kernel_diagonal(&single, &half).unwrap().value, Scalar::one(fb()));
        assert!(kernel_diagonal(&single, &Scalar::one(fb())).is_err());
    }

    #[test]
    fn metric_examples() {
        let hyp = PotentialProfile::new(RadialWeight::hyperbolic(1, fb()), Rational::from(3)).unwrap();
        let g = metric_coefficient(&hyp, &Rational::from((1, 2))).unwrap();
        assert!(close(&g, 4.0, 1e-60));
        assert!(close(&metric_coefficient(&hyp, &Rational::new()).unwrap(), 1.0, 0.0));

        // e^{-x} to order 30
        let mut c = Scalar::one(fb());
        let mut coeffs = vec![c.clone()];
        for j in 1..=30 {
            c = c.div_int(&Integer::from(-j));
            coeffs.push(c.clone());
        }
        let h = RadialWeight::new(TruncatedSeries::univariate(30, fb(), coeffs).unwrap()).unwrap();
        let p = PotentialProfile::new(h, Rational::from(3)).unwrap();
        assert!(close(
            &metric_coefficient(&p, &Rational::from((3, 10))).unwrap(),
            1.0,
            1e-15
        ));
    }

    #[test]
    fn balanced_check_rejects_nonpositive_alpha() {
        let one = RadialWeight::new(TruncatedSeries::constant(1, 0, Scalar::one(fb()))).unwrap();
        let p = PotentialProfile::new(one, Rational::new()).unwrap();
        assert!(matches!(
            balanced_check(&p, &balanced_grid(), 10),
            Err(Error::InvalidAlpha(_))
        ));
    }

    #[test]
    fn wrong_height_has_large_drift() {
        let p = PotentialProfile::new(RadialWeight::hyperbolic(1, fb()), Rational::from(2)).unwrap();
        let d = balanced_check(&p, &balanced_grid(), 400).unwrap();
        assert!(d.gauge_drift >= 0.1);
        // d/dx(-log(1-x)) = 1/(1-x)
        for r in &d.rows {
            let x = parse(&r.x);
            assert!((r.gauge_derivative - 1.0 / (1.0 - x)).abs() < 1e-6);
        }
    }

    fn parse(s: &str) -> f64 {
        crate::scalar::parse_rational(s).unwrap().to_f64()
    }
}
