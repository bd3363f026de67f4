//! Moment integrals of a weight on (0,1) and on the open simplex.
//!
//! Everything is computed from coefficients in closed form:
//! `int_{D_n} x^K dx = prod(k_i!) / (|K| + n)!`, with `D_1 = (0,1)`. Sums are
//! formed exactly over the rationals and rounded once, so float results are
//! correctly rounded.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{factorial, rising_product, Backend, Scalar};
use crate::series::{graded_indices, MultiIndex, TruncatedSeries};
use crate::weight::RadialWeight;

/// `J -> I_J(alpha)` for all `|J| <= max_order`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    n: usize,
    alpha: Rational,
    max_order: u32,
    backend: Backend,
    entries: BTreeMap<MultiIndex, Scalar>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentTableJson {
    pub n: usize,
    pub alpha: String,
    pub max_order: u32,
    pub backend: Backend,
    pub entries: Vec<(Vec<u32>, String)>,
}

impl MomentTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn get(&self, idx: &MultiIndex) -> Option<&Scalar> {
        self.entries.get(idx)
    }

    /// `I_j` of a one-dimensional table.
    pub fn get_j(&self, j: u32) -> Option<&Scalar> {
        self.entries.get(&MultiIndex::univariate(j))
    }

    /// Entries in graded-lex order.
    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, &Scalar)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> MomentTableJson {
        MomentTableJson {
            n: self.n,
            alpha: self.alpha.to_string(),
            max_order: self.max_order,
            backend: self.backend,
            entries: self
                .entries
                .iter()
                .map(|(j, v)| (j.exponents().to_vec(), v.to_repr_string()))
                .collect(),
        }
    }

    /// `(J, I)` rows for CSV export.
    pub fn csv_rows(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(j, v)| (j.to_string(), v.to_repr_string()))
            .collect()
    }
}

impl Serialize for MomentTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

struct Factorials(Vec<Integer>);

impl Factorials {
    fn upto(n: u32) -> Self {
        let mut v = Vec::with_capacity(n as usize + 1);
        v.push(Integer::from(1));
        for k in 1..=n {
            let next = Integer::from(&v[k as usize - 1] * k);
            v.push(next);
        }
        Factorials(v)
    }

    fn get(&self, k: u32) -> &Integer {
        &self.0[k as usize]
    }
}

/// Exact `int_{D_n} g(x) x^J dx` for a polynomial `g` given as rational terms.
fn simplex_integral(g: &[(MultiIndex, Rational)], j: &MultiIndex, facts: &Factorials) -> Rational {
    let n = j.n_vars() as u32;
    let mut acc = Rational::new();
    for (k, c) in g {
        let mut num = Integer::from(1);
        for (a, b) in j.exponents().iter().zip(k.exponents()) {
            num *= facts.get(a + b);
        }
        let den = facts.get(j.degree() + k.degree() + n);
        acc += Rational::from((num, den.clone())) * c;
    }
    acc
}

fn rational_terms(s: &TruncatedSeries) -> Vec<(MultiIndex, Rational)> {
    s.terms().map(|(i, c)| (i.clone(), c.to_rational())).collect()
}

fn positive_or(index: &MultiIndex, v: Scalar) -> Result<Scalar> {
    if v.is_positive() {
        Ok(v)
    } else {
        Err(Error::NonpositiveMoment {
            index: index.exponents().to_vec(),
        })
    }
}

/// `int_0^1 s(t) t^j dt` with no sign check.
pub(crate) fn raw_moment(s: &TruncatedSeries, j: u32) -> Scalar {
    let mut acc = Rational::new();
    for (m, c) in s.terms() {
        acc += c.to_rational() / (m.degree() + j + 1);
    }
    Scalar::from_rational(&acc, s.backend())
}

/// `I_j = int_0^1 f(t) t^j dt`.
pub fn moment(f: &RadialWeight, j: u32) -> Result<Scalar> {
    require_univariate(f.series())?;
    positive_or(&MultiIndex::univariate(j), raw_moment(f.series(), j))
}

fn require_univariate(s: &TruncatedSeries) -> Result<()> {
    if s.n_vars() != 1 {
        return Err(Error::VarCountMismatch {
            expected: 1,
            found: s.n_vars(),
        });
    }
    Ok(())
}

/// `I_0, ..., I_{max_order}` of a one-variable weight (disk mode, height 3).
pub fn moment_table(f: &RadialWeight, max_order: u32) -> Result<MomentTable> {
    require_univariate(f.series())?;
    weighted_moment_table(f, &Rational::from(3), 1, max_order)
}

fn validate_height(alpha: &Rational, n: usize) -> Result<()> {
    if *alpha <= 0 {
        return Err(Error::InvalidAlpha(alpha.to_string()));
    }
    if n >= 2 && *alpha.denom() != 1 {
        return Err(Error::NonIntegerAlpha(alpha.to_string()));
    }
    if *alpha <= n as u32 + 1 {
        return Err(Error::AlphaTooSmall {
            alpha: alpha.to_string(),
            n: n as u32,
        });
    }
    Ok(())
}

/// The integrand weight `f^(alpha - (n+1))`. Integer exponents are expanded to the
/// full polynomial degree so the result is exact.
fn integrand_weight(f: &TruncatedSeries, alpha: &Rational, n: usize) -> Result<TruncatedSeries> {
    let e = Rational::from(alpha - (n as u32 + 1));
    if e == 1 {
        return Ok(f.clone());
    }
    if *e.denom() == 1 {
        let k = e
            .numer()
            .to_u32()
            .ok_or_else(|| Error::InvalidArgument("height exponent out of range".into()))?;
        let order = (k * f.poly_degree()).max(f.order());
        return f.with_order(order).power(&e, order);
    }
    f.power(&e, f.order())
}

/// `I_J(alpha) = int_{D_n} f^(alpha-(n+1)) x^J dx` for every `|J| <= max_order`.
///
/// For `n >= 2` `alpha` must be an integer; for `n = 1` non-integer heights are
/// accepted on float backends as an exploratory mode.
pub fn weighted_moment_table(f: &RadialWeight, alpha: &Rational, n: usize, max_order: u32) -> Result<MomentTable> {
    let s = f.series();
    if s.n_vars() != n {
        return Err(Error::VarCountMismatch {
            expected: n,
            found: s.n_vars(),
        });
    }
    validate_height(alpha, n)?;
    let g = integrand_weight(s, alpha, n)?;
    let terms = rational_terms(&g);
    let facts = Factorials::upto(max_order + g.poly_degree() + n as u32);
    let backend = s.backend();
    let indices = graded_indices(n, max_order);
    let values: Vec<Result<Scalar>> = indices
        .par_iter()
        .map(|j| {
            let v = Scalar::from_rational(&simplex_integral(&terms, j, &facts), backend);
            positive_or(j, v)
        })
        .collect();
    let mut entries = BTreeMap::new();
    for (j, v) in indices.into_iter().zip(values) {
        entries.insert(j, v?);
    }
    Ok(MomentTable {
        n,
        alpha: alpha.clone(),
        max_order,
        backend,
        entries,
    })
}

/// Single simplex moment `I_J(alpha)`; `alpha` must be an integer above `n + 1`.
pub fn simplex_moment(f: &RadialWeight, j: &MultiIndex, alpha: &Rational, n: usize) -> Result<Scalar> {
    if *alpha.denom() != 1 {
        return Err(Error::NonIntegerAlpha(alpha.to_string()));
    }
    validate_height(alpha, n)?;
    if f.n_vars() != n || j.n_vars() != n {
        return Err(Error::VarCountMismatch {
            expected: n,
            found: if f.n_vars() != n { f.n_vars() } else { j.n_vars() },
        });
    }
    let g = integrand_weight(f.series(), alpha, n)?;
    let facts = Factorials::upto(j.degree() + g.poly_degree() + n as u32);
    let v = simplex_integral(&rational_terms(&g), j, &facts);
    positive_or(j, Scalar::from_rational(&v, f.backend()))
}

/// Integration-by-parts expansion of `I_j` around `t = 1`:
///
/// `sum_{k<=k0} (-1)^k f^(k)(1) / ((j+1)...(j+k+1))
///   + (-1)^(k0+1) / ((j+1)...(j+k0+1)) * int_0^1 f^(k0+1)(t) t^(j+k0+1) dt`.
///
/// Derivatives beyond the stored polynomial read as zero.
pub fn ibp_expansion(f: &RadialWeight, j: u32, k0: u32) -> Result<Scalar> {
    let s = f.series();
    require_univariate(s)?;
    let backend = s.backend();
    let derivs = s.derivatives_at_one(k0);
    let mut acc = Scalar::zero(backend);
    for (k, d) in derivs.iter().enumerate() {
        let term = d.div_int(&rising_product(j, k as u32 + 1));
        acc = if k % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    let mut deriv = s.clone();
    for _ in 0..=k0 {
        if deriv.is_zero() {
            break;
        }
        deriv = deriv.derivative()?;
    }
    if !deriv.is_zero() {
        let rem = raw_moment(&deriv, j + k0 + 1).div_int(&rising_product(j, k0 + 1));
        acc = if (k0 + 1).is_multiple_of(2) {
            &acc + &rem
        } else {
            &acc - &rem
        };
    }
    Ok(acc)
}

/// `int_{D_n} x^K dx` as an exact rational.
pub fn simplex_monomial_integral(k: &MultiIndex) -> Rational {
    let num = k
        .exponents()
        .iter()
        .fold(Integer::from(1), |acc, &e| acc * factorial(e));
    Rational::from((num, factorial(k.degree() + k.n_vars() as u32)))
}
