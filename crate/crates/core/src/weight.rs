//! Sample grids and weights certified positive on them.

use rug::Rational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{Backend, Scalar};
use crate::series::TruncatedSeries;

/// Grid point stored exactly; converted to a backend on evaluation.
pub type GridPoint = Vec<Rational>;

pub fn point_on(point: &[Rational], backend: Backend) -> Vec<Scalar> {
    point.iter().map(|c| Scalar::from_rational(c, backend)).collect()
}

pub fn point_strings(point: &[Rational]) -> Vec<String> {
    point.iter().map(|c| c.to_string()).collect()
}

/// `count` equally spaced one-dimensional points from `start` to `stop` inclusive.
pub fn linspace(start: &Rational, stop: &Rational, count: usize) -> Vec<GridPoint> {
    match count {
        0 => Vec::new(),
        1 => vec![vec![start.clone()]],
        _ => {
            let step = Rational::from(stop - start) / (count as u64 - 1);
            (0..count)
                .map(|i| vec![(start + Rational::from(&step * i as u64))])
                .collect()
        }
    }
}

/// Lattice points `x = k * stop / divisions` with every `k_i >= 1` and `sum k_i <= divisions`,
/// in graded-lex order of `k`. Every point has coordinate sum at most `stop`.
pub fn simplex_grid(n: usize, stop: &Rational, divisions: u32) -> Vec<GridPoint> {
    let step = Rational::from(stop / divisions);
    let mut out = Vec::new();
    if n == 0 || divisions < n as u32 {
        return out;
    }
    for total in n as u32..=divisions {
        for idx in crate::series::homogeneous_indices(n, total - n as u32) {
            out.push(
                idx.exponents()
                    .iter()
                    .map(|&e| Rational::from(&step * (e + 1)))
                    .collect(),
            );
        }
    }
    out
}

/// Default positivity grid: `k/64` on (0,1) for one variable, interior lattice `k/16` otherwise.
pub fn default_positivity_grid(n: usize) -> Vec<GridPoint> {
    if n == 1 {
        (1..64).map(|k| vec![Rational::from((k, 64))]).collect()
    } else {
        let denom = 16u32;
        simplex_grid(n, &Rational::from((denom - 1, denom)), denom - 1)
    }
}

/// A weight `f` (or `h = e^{-Phi}`) known to be positive on a sample grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialWeight {
    series: TruncatedSeries,
    #[serde(serialize_with = "serialize_grid")]
    positivity_grid: Vec<GridPoint>,
    lambda_hint: Option<Scalar>,
}

fn serialize_grid<S: serde::Serializer>(grid: &[GridPoint], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(grid.len()))?;
    for p in grid {
        seq.serialize_element(&point_strings(p))?;
    }
    seq.end()
}

impl RadialWeight {
    pub fn new(series: TruncatedSeries) -> Result<Self> {
        let grid = default_positivity_grid(series.n_vars());
        Self::with_grid(series, grid)
    }

    pub fn with_grid(series: TruncatedSeries, grid: Vec<GridPoint>) -> Result<Self> {
        if series.n_vars() == 1 {
            let near_edge = Rational::from((19, 20));
            if grid.len() < 32 || !grid.iter().any(|p| p[0] >= near_edge) {
                return Err(Error::InvalidArgument(
                    "a one-variable positivity grid needs at least 32 points, one of them >= 0.95".into(),
                ));
            }
        }
        check_positive(&series, &grid, false)?;
        Ok(RadialWeight {
            series,
            positivity_grid: grid,
            lambda_hint: None,
        })
    }

    /// `scale (1 - x_1 - ... - x_n)` viewed at the given order.
    pub fn simplex_linear(n: usize, order: u32, scale: Scalar) -> Result<Self> {
        Self::new(TruncatedSeries::simplex_linear(n, order, scale))
    }

    /// The hyperbolic weight `1 - x`.
    pub fn hyperbolic(order: u32, backend: Backend) -> Self {
        Self::simplex_linear(1, order, Scalar::one(backend)).expect("1 - x is positive on (0,1)")
    }

    pub fn with_lambda_hint(mut self, lambda: Scalar) -> Self {
        self.lambda_hint = Some(lambda);
        self
    }

    pub fn series(&self) -> &TruncatedSeries {
        &self.series
    }

    pub fn positivity_grid(&self) -> &[GridPoint] {
        &self.positivity_grid
    }

    pub fn lambda_hint(&self) -> Option<&Scalar> {
        self.lambda_hint.as_ref()
    }

    pub fn n_vars(&self) -> usize {
        self.series.n_vars()
    }

    pub fn backend(&self) -> Backend {
        self.series.backend()
    }

    /// Same grid, different series; re-checks positivity.
    pub fn replace_series(&self, series: TruncatedSeries, lost_is_error: bool) -> Result<Self> {
        check_positive(&series, &self.positivity_grid, lost_is_error)?;
        Ok(RadialWeight {
            series,
            positivity_grid: self.positivity_grid.clone(),
            lambda_hint: None,
        })
    }

    pub fn to_backend(&self, backend: Backend) -> Result<Self> {
        self.replace_series(self.series.to_backend(backend), false)
    }
}

fn check_positive(series: &TruncatedSeries, grid: &[GridPoint], lost: bool) -> Result<()> {
    for p in grid {
        if p.len() != series.n_vars() {
            return Err(Error::VarCountMismatch {
                expected: series.n_vars(),
                found: p.len(),
            });
        }
        let v = series.eval(&point_on(p, series.backend()))?;
        if !v.value.is_positive() {
            let point = point_strings(p);
            return Err(if lost {
                Error::PositivityLost { point }
            } else {
                Error::NotPositiveOnGrid { point }
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let g = linspace(&Rational::from((1, 20)), &Rational::from((9, 10)), 18);
        assert_eq!(g.len(), 18);
        assert_eq!(g[0][0], Rational::from((1, 20)));
        assert_eq!(g[17][0], Rational::from((9, 10)));
    }

    #[test]
    fn simplex_grid_stays_inside() {
        let stop = Rational::from((4, 5));
        let g = simplex_grid(2, &stop, 8);
        assert_eq!(g.len(), 28);
        for p in &g {
            let s: Rational = p.iter().sum();
            assert!(s <= stop && p.iter().all(|c| *c > 0));
        }
        assert_eq!(simplex_grid(1, &stop, 4).len(), 4);
    }

    #[test]
    fn default_grid_requirements() {
        let g = default_positivity_grid(1);
        assert!(g.len() >= 32);
        assert!(g.iter().any(|p| p[0] >= Rational::from((19, 20))));
        for p in default_positivity_grid(3) {
            let s: Rational = p.iter().sum();
            assert!(s < 1);
        }
    }

    #[test]
    fn rejects_weight_with_interior_zero() {
        let s = TruncatedSeries::univariate_i64(4, Backend::Exact, &[1, -2]).unwrap();
        assert!(matches!(RadialWeight::new(s), Err(Error::NotPositiveOnGrid { .. })));
    }

    #[test]
    fn accepts_hyperbolic() {
        let w = RadialWeight::hyperbolic(10, Backend::Exact);
        assert_eq!(w.series().order(), 10);
        let w2 = RadialWeight::simplex_linear(2, 3, Scalar::one(Backend::Exact)).unwrap();
        assert_eq!(w2.n_vars(), 2);
    }
}
