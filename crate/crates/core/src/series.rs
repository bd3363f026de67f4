//! Truncated power series in one or several variables.
//!
//! A series stores coefficients for exponents of total degree at most `order`
//! on a single [`Backend`]. Every operation sums in a fixed order (ascending
//! total degree, graded-lex inside a degree), so results do not depend on how
//! callers schedule work across threads.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{falling_factorial, Backend, Scalar};

/// Exponent multi-index `J = (j_1, ..., j_n)`.
///
/// Ordered graded-lexicographically: by total degree, then with larger
/// leading exponents first, so `(1,0) < (0,1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn univariate(j: u32) -> Self {
        MultiIndex(vec![j])
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of exactly degree `d`, in graded-lex order.
pub fn homogeneous_indices(n: usize, d: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if n == 1 {
            prefix.push(d);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=d).rev() {
            prefix.push(first);
            rec(n - 1, d - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, d, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// All multi-indices with total degree `<= max_degree`, in graded-lex order.
pub fn graded_indices(n: usize, max_degree: u32) -> Vec<MultiIndex> {
    (0..=max_degree).flat_map(|d| homogeneous_indices(n, d)).collect()
}

/// Heuristic truncation-error estimate for a series evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBound {
    /// `truncation + rounding`.
    pub value: f64,
    pub valid: bool,
    /// Largest growth factor of consecutive degree contributions over the last ten degrees.
    pub ratio_estimate: f64,
    pub truncation: f64,
    pub rounding: f64,
}

impl TailBound {
    pub fn zero() -> Self {
        TailBound {
            value: 0.0,
            valid: true,
            ratio_estimate: 0.0,
            truncation: 0.0,
            rounding: 0.0,
        }
    }

    /// Componentwise sum, valid only if both are.
    pub fn combine(&self, other: &TailBound) -> TailBound {
        TailBound {
            value: self.value + other.value,
            valid: self.valid && other.valid,
            ratio_estimate: self.ratio_estimate.max(other.ratio_estimate),
            truncation: self.truncation + other.truncation,
            rounding: self.rounding + other.rounding,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Scalar,
    pub tail: TailBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

type Terms = BTreeMap<MultiIndex, Scalar>;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    n_vars: usize,
    order: u32,
    backend: Backend,
    coeffs: Terms,
}

impl TruncatedSeries {
    /// Build a series from exponent/coefficient pairs. Duplicate exponents are summed
    /// and zero coefficients dropped.
    pub fn new<I>(n_vars: usize, order: u32, backend: Backend, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Scalar)>,
    {
        if n_vars == 0 {
            return Err(Error::InvalidArgument("a series needs at least one variable".into()));
        }
        let mut coeffs = Terms::new();
        for (idx, c) in terms {
            if idx.n_vars() != n_vars {
                return Err(Error::VarCountMismatch {
                    expected: n_vars,
                    found: idx.n_vars(),
                });
            }
            if idx.degree() > order {
                return Err(Error::DegreeOverflow {
                    degree: idx.degree(),
                    order,
                });
            }
            if c.backend() != backend {
                return Err(Error::BackendMismatch);
            }
            if !c.is_finite() {
                return Err(Error::BackendParse("non-finite coefficient".into()));
            }
            add_term(&mut coeffs, idx, c);
        }
        Ok(TruncatedSeries {
            n_vars,
            order,
            backend,
            coeffs,
        })
    }

    /// Parse coefficients given as decimal or `p/q` strings.
    pub fn make<S: AsRef<str>>(n_vars: usize, order: u32, coeffs: &[(Vec<u32>, S)], backend: Backend) -> Result<Self> {
        let terms = coeffs
            .iter()
            .map(|(e, s)| Ok((MultiIndex::new(e.clone()), Scalar::parse(s.as_ref(), backend)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_vars, order, backend, terms)
    }

    /// One-variable series from a dense coefficient list (index = degree).
    pub fn univariate(order: u32, backend: Backend, coeffs: Vec<Scalar>) -> Result<Self> {
        let terms = coeffs
            .into_iter()
            .enumerate()
            .map(|(j, c)| (MultiIndex::univariate(j as u32), c));
        Self::new(1, order, backend, terms)
    }

    pub fn univariate_i64(order: u32, backend: Backend, coeffs: &[i64]) -> Result<Self> {
        let cs = coeffs.iter().map(|&c| Scalar::from_i64(c, backend)).collect();
        Self::univariate(order, backend, cs)
    }

    pub fn zero(n_vars: usize, order: u32, backend: Backend) -> Self {
        TruncatedSeries {
            n_vars,
            order,
            backend,
            coeffs: Terms::new(),
        }
    }

    pub fn constant(n_vars: usize, order: u32, value: Scalar) -> Self {
        let backend = value.backend();
        let mut coeffs = Terms::new();
        add_term(&mut coeffs, MultiIndex::zero(n_vars), value);
        TruncatedSeries {
            n_vars,
            order,
            backend,
            coeffs,
        }
    }

    /// `c (1 - x_1 - ... - x_n)`.
    pub fn simplex_linear(n_vars: usize, order: u32, scale: Scalar) -> Self {
        let backend = scale.backend();
        let mut terms = vec![(MultiIndex::zero(n_vars), scale.clone())];
        for i in 0..n_vars {
            let mut e = vec![0; n_vars];
            e[i] = 1;
            terms.push((MultiIndex::new(e), -&scale));
        }
        Self::new(n_vars, order.max(1), backend, terms).expect("well-formed linear series")
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nonzero terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Scalar)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Scalar {
        self.coeffs
            .get(idx)
            .cloned()
            .unwrap_or_else(|| Scalar::zero(self.backend))
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(&MultiIndex::zero(self.n_vars))
    }

    /// Dense coefficient vector of a one-variable series, length `order + 1`.
    pub fn dense(&self) -> Result<Vec<Scalar>> {
        self.require_univariate()?;
        let mut out = vec![Scalar::zero(self.backend); self.order as usize + 1];
        for (idx, c) in &self.coeffs {
            out[idx.degree() as usize] = c.clone();
        }
        Ok(out)
    }

    /// Highest total degree carrying a nonzero coefficient (0 for the zero series).
    pub fn poly_degree(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    fn require_univariate(&self) -> Result<()> {
        if self.n_vars != 1 {
            return Err(Error::VarCountMismatch {
                expected: 1,
                found: self.n_vars,
            });
        }
        Ok(())
    }

    fn check_compatible(&self, other: &TruncatedSeries) -> Result<()> {
        if self.backend != other.backend {
            return Err(Error::BackendMismatch);
        }
        if self.n_vars != other.n_vars {
            return Err(Error::VarCountMismatch {
                expected: self.n_vars,
                found: other.n_vars,
            });
        }
        Ok(())
    }

    /// Drop every term above `order` and lower the cap.
    pub fn truncate(&self, order: u32) -> TruncatedSeries {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(idx, _)| idx.degree() <= order)
            .map(|(i, c)| (i.clone(), c.clone()))
            .collect();
        TruncatedSeries {
            n_vars: self.n_vars,
            order,
            backend: self.backend,
            coeffs,
        }
    }

    /// Same coefficients under a new cap. Raising the cap treats the series as a polynomial.
    pub fn with_order(&self, order: u32) -> TruncatedSeries {
        let mut s = self.truncate(order);
        s.order = order;
        s
    }

    pub fn to_backend(&self, backend: Backend) -> TruncatedSeries {
        let mut coeffs = Terms::new();
        for (i, c) in &self.coeffs {
            add_term(&mut coeffs, i.clone(), c.to_backend(backend));
        }
        TruncatedSeries {
            n_vars: self.n_vars,
            order: self.order,
            backend,
            coeffs,
        }
    }

    pub fn scale(&self, factor: &Scalar) -> TruncatedSeries {
        let mut coeffs = Terms::new();
        for (i, c) in &self.coeffs {
            add_term(&mut coeffs, i.clone(), c * factor);
        }
        TruncatedSeries {
            n_vars: self.n_vars,
            order: self.order,
            backend: self.backend,
            coeffs,
        }
    }

    pub fn add(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.combine(other, true)
    }

    fn combine(&self, other: &TruncatedSeries, negate: bool) -> Result<TruncatedSeries> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        let mut out = self.truncate(order);
        for (i, c) in &other.coeffs {
            if i.degree() <= order {
                let c = if negate { -c } else { c.clone() };
                add_term(&mut out.coeffs, i.clone(), c);
            }
        }
        Ok(out)
    }

    /// Cauchy product truncated to the smaller of the two orders.
    pub fn mul(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        Ok(TruncatedSeries {
            n_vars: self.n_vars,
            order,
            backend: self.backend,
            coeffs: mul_terms(&self.coeffs, &other.coeffs, order),
        })
    }

    pub fn arith(&self, op: ArithOp, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        match op {
            ArithOp::Add => self.add(other),
            ArithOp::Sub => self.sub(other),
            ArithOp::Mul => self.mul(other),
        }
    }

    /// Coefficients split by total degree, index `d` holding the degree-`d` part.
    fn homogeneous_parts(&self, up_to: u32) -> Vec<Terms> {
        let mut parts = vec![Terms::new(); up_to as usize + 1];
        for (i, c) in &self.coeffs {
            let d = i.degree();
            if d <= up_to {
                parts[d as usize].insert(i.clone(), c.clone());
            }
        }
        parts
    }

    /// `f^p` truncated at `order`.
    ///
    /// Uses the Euler-operator form of `g' f = p f' g`: for each degree `d`,
    /// `d f_0 g_d = sum_{k=1..d} (p k - (d - k)) f_k g_{d-k}` with homogeneous
    /// parts `f_k`, `g_k`; in one variable this is the usual coefficient
    /// recurrence. The seed is `g_0 = f(0)^p`.
    pub fn power(&self, p: &Rational, order: u32) -> Result<TruncatedSeries> {
        let f0 = self.constant_term();
        if !f0.is_positive() {
            return Err(Error::NonpositiveConstantTerm);
        }
        if self.backend.is_exact() && *p.denom() != 1 {
            return Err(Error::ExactBackendFractionalPower);
        }
        let g0 = f0.pow_rational(p)?;
        let p_s = Scalar::from_rational(p, self.backend);
        let fparts = self.homogeneous_parts(order);
        let f_top = fparts.iter().rposition(|t| !t.is_empty()).unwrap_or(0);
        let mut gparts: Vec<Terms> = Vec::with_capacity(order as usize + 1);
        let mut seed = Terms::new();
        add_term(&mut seed, MultiIndex::zero(self.n_vars), g0);
        gparts.push(seed);
        for d in 1..=order {
            let mut acc = Terms::new();
            for k in 1..=(d as usize).min(f_top) {
                if fparts[k].is_empty() || gparts[d as usize - k].is_empty() {
                    continue;
                }
                let weight = &p_s.mul_int(&Integer::from(k)) - &Scalar::from_i64(d as i64 - k as i64, self.backend);
                if weight.is_zero() {
                    continue;
                }
                for (i, c) in mul_terms(&fparts[k], &gparts[d as usize - k], d) {
                    add_term(&mut acc, i, &c * &weight);
                }
            }
            let denom = f0.mul_int(&Integer::from(d));
            let part = acc.into_iter().map(|(i, c)| (i, &c / &denom)).collect();
            gparts.push(part);
        }
        let mut coeffs = Terms::new();
        for part in gparts {
            for (i, c) in part {
                add_term(&mut coeffs, i, c);
            }
        }
        Ok(TruncatedSeries {
            n_vars: self.n_vars,
            order,
            backend: self.backend,
            coeffs,
        })
    }

    /// Natural logarithm of a one-variable series with positive constant term, on a float backend.
    pub fn log(&self, order: u32) -> Result<TruncatedSeries> {
        self.require_univariate()?;
        let h = self.with_order(order).dense()?;
        if !h[0].is_positive() {
            return Err(Error::NonpositiveConstantTerm);
        }
        let Backend::Float { precision_bits } = self.backend else {
            return Err(Error::ExactBackendIrrational("logarithm"));
        };
        let mut l = Vec::with_capacity(order as usize + 1);
        l.push(Scalar::Float(Float::with_val(precision_bits, h[0].ln_float())));
        for d in 1..=order as usize {
            let mut acc = h[d].mul_int(&Integer::from(d));
            for k in 1..d {
                if h[d - k].is_zero() {
                    continue;
                }
                acc = &acc - &(&l[k] * &h[d - k]).mul_int(&Integer::from(k));
            }
            l.push(&acc / &h[0].mul_int(&Integer::from(d)));
        }
        Self::univariate(order, self.backend, l)
    }

    /// Term-wise derivative of a one-variable series; the order drops by one.
    pub fn derivative(&self) -> Result<TruncatedSeries> {
        self.require_univariate()?;
        let terms = self.coeffs.iter().filter(|(i, _)| i.degree() > 0).map(|(i, c)| {
            let d = i.degree();
            (MultiIndex::univariate(d - 1), c.mul_int(&Integer::from(d)))
        });
        Self::new(1, self.order.saturating_sub(1), self.backend, terms)
    }

    /// `f^(k)(1)` for `k = 0..=k_max`, exact binomial recentering of the stored polynomial.
    pub fn recenter_at_one(&self, k_max: u32) -> Result<Vec<Scalar>> {
        self.require_univariate()?;
        if k_max > self.order {
            return Err(Error::KTooLarge {
                k: k_max,
                order: self.order,
            });
        }
        Ok(self.derivatives_at_one(k_max))
    }

    /// Like [`recenter_at_one`](Self::recenter_at_one) but reads derivatives above the order as zero.
    pub(crate) fn derivatives_at_one(&self, k_max: u32) -> Vec<Scalar> {
        (0..=k_max)
            .map(|k| {
                let mut acc = Scalar::zero(self.backend);
                for (i, c) in &self.coeffs {
                    let m = i.degree();
                    if m >= k {
                        acc = &acc + &c.mul_int(&falling_factorial(m, k));
                    }
                }
                acc
            })
            .collect()
    }

    /// Evaluate at `point` by summing degree contributions in ascending order.
    ///
    /// The tail estimate takes the per-degree absolute contributions `A_d`,
    /// the largest ratio `q = A_d / A_{d-1}` over the last ten degrees, and
    /// reports `A_top q / (1 - q)`, invalid when `q >= 1`. On float backends a
    /// rounding allowance proportional to `sum A_d` is added.
    pub fn eval(&self, point: &[Scalar]) -> Result<Evaluation> {
        if point.len() != self.n_vars {
            return Err(Error::VarCountMismatch {
                expected: self.n_vars,
                found: point.len(),
            });
        }
        if point.iter().any(|x| x.backend() != self.backend) {
            return Err(Error::BackendMismatch);
        }
        let order = self.order as usize;
        let powers: Vec<Vec<Scalar>> = point
            .iter()
            .map(|x| {
                let mut pw = Vec::with_capacity(order + 1);
                pw.push(Scalar::one(self.backend));
                for k in 1..=order {
                    let next = &pw[k - 1] * x;
                    pw.push(next);
                }
                pw
            })
            .collect();

        let mut degree_sums = vec![Scalar::zero(self.backend); order + 1];
        let mut degree_abs = vec![Float::new(64); order + 1];
        for (idx, c) in &self.coeffs {
            let mut term = c.clone();
            for (v, &e) in idx.exponents().iter().enumerate() {
                if e > 0 {
                    term = &term * &powers[v][e as usize];
                }
            }
            let d = idx.degree() as usize;
            degree_abs[d] += term.abs().to_float(64);
            degree_sums[d] = &degree_sums[d] + &term;
        }
        let mut value = Scalar::zero(self.backend);
        for s in &degree_sums {
            value = &value + s;
        }

        let mut q = Float::with_val(64, 0);
        let mut unbounded = false;
        for d in order.saturating_sub(9).max(1)..=order {
            let (prev, cur) = (&degree_abs[d - 1], &degree_abs[d]);
            if cur.is_zero() {
                continue;
            }
            if prev.is_zero() {
                unbounded = true;
                continue;
            }
            let r = Float::with_val(64, cur / prev);
            if r > q {
                q = r;
            }
        }
        let valid = !unbounded && q < 1;
        let truncation = if !valid {
            f64::INFINITY
        } else if q.is_zero() {
            0.0
        } else {
            let one_minus = Float::with_val(64, 1 - &q);
            let t = Float::with_val(64, &degree_abs[order] * &q) / one_minus;
            t.to_f64_round(rug::float::Round::Up)
        };
        let total_abs = degree_abs.iter().fold(Float::with_val(64, 0), |acc, a| acc + a);
        let ops = 2 * (self.coeffs.len() + self.n_vars * (order + 1) + 1);
        let rounding = match self.backend {
            Backend::Exact => 0.0,
            Backend::Float { precision_bits } => {
                let r = total_abs * ops as u64;
                let r = r >> precision_bits;
                r.to_f64_round(rug::float::Round::Up)
            }
        };
        let ratio_estimate = if unbounded { f64::INFINITY } else { q.to_f64() };
        Ok(Evaluation {
            value,
            tail: TailBound {
                value: truncation + rounding,
                valid,
                ratio_estimate,
                truncation,
                rounding,
            },
        })
    }

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            n_vars: self.n_vars,
            order: self.order,
            backend: self.backend,
            coeffs: self
                .coeffs
                .iter()
                .map(|(i, c)| (i.exponents().to_vec(), c.to_repr_string()))
                .collect(),
        }
    }

    pub fn from_json(json: &SeriesJson) -> Result<Self> {
        Self::make(json.n_vars, json.order, &json.coeffs, json.backend)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("series serializes")
    }

    pub fn from_json_str(src: &str) -> Result<Self> {
        let json: SeriesJson = serde_json::from_str(src).map_err(|e| Error::BackendParse(e.to_string()))?;
        Self::from_json(&json)
    }
}

/// Wire form of a series shared by every report and weight file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub n_vars: usize,
    pub order: u32,
    pub backend: Backend,
    pub coeffs: Vec<(Vec<u32>, String)>,
}

impl Serialize for TruncatedSeries {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

fn add_term(terms: &mut Terms, idx: MultiIndex, c: Scalar) {
    match terms.get_mut(&idx) {
        Some(existing) => {
            let sum = &*existing + &c;
            if sum.is_zero() {
                terms.remove(&idx);
            } else {
                *existing = sum;
            }
        }
        None => {
            if !c.is_zero() {
                terms.insert(idx, c);
            }
        }
    }
}

fn mul_terms(a: &Terms, b: &Terms, order: u32) -> Terms {
    let mut out = Terms::new();
    for (ia, ca) in a {
        let da = ia.degree();
        if da > order {
            break;
        }
        for (ib, cb) in b {
            if da + ib.degree() > order {
                break;
            }
            add_term(&mut out, ia.plus(ib), ca * cb);
        }
    }
    out
}

pub fn series_make<S: AsRef<str>>(
    n_vars: usize,
    order: u32,
    coeffs: &[(Vec<u32>, S)],
    backend: Backend,
) -> Result<TruncatedSeries> {
    TruncatedSeries::make(n_vars, order, coeffs, backend)
}

pub fn series_arith(op: ArithOp, a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.arith(op, b)
}

pub fn series_power(f: &TruncatedSeries, p: &Rational, order: u32) -> Result<TruncatedSeries> {
    f.power(p, order)
}

pub fn series_eval(f: &TruncatedSeries, point: &[Scalar]) -> Result<Evaluation> {
    f.eval(point)
}

pub fn recenter_at_one(f: &TruncatedSeries, k_max: u32) -> Result<Vec<Scalar>> {
    f.recenter_at_one(k_max)
}
