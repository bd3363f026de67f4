//! Cross-checks against independently computed values: Gauss-Legendre quadrature,
//! binomial coefficients and brute-force polynomial integration.

use bk_core::moments::{ibp_expansion, moment, moment_table, simplex_moment, weighted_moment_table};
use bk_core::series::series_power;
use bk_core::{Backend, MultiIndex, RadialWeight, Scalar, TruncatedSeries};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rug::{Float, Rational};

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push(((1.0 - x) / 2.0, 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `int_{D_2} g` via the map `(u, v) -> (u, (1-u) v)`.
fn triangle_quadrature(g: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = gauss_legendre(24);
    let mut acc = 0.0;
    for &(u, wu) in &rule {
        for &(v, wv) in &rule {
            acc += wu * wv * (1.0 - u) * g(u, (1.0 - u) * v);
        }
    }
    acc
}

#[test]
fn quadrature_rule_integrates_polynomials() {
    let rule = gauss_legendre(24);
    let i: f64 = rule.iter().map(|&(x, w)| w * x.powi(9)).sum();
    assert!((i - 0.1).abs() < 1e-14);
}

#[test]
fn simplex_moments_match_quadrature() {
    let b = Backend::Exact;
    let weights = [
        TruncatedSeries::make(2, 1, &[(vec![0, 0], "1"), (vec![1, 0], "-1"), (vec![0, 1], "-1")], b).unwrap(),
        TruncatedSeries::make(2, 2, &[(vec![0, 0], "2"), (vec![1, 0], "-1"), (vec![1, 1], "1/2")], b).unwrap(),
        TruncatedSeries::constant(2, 0, Scalar::one(b)),
    ];
    for s in weights {
        let f = RadialWeight::new(s.clone()).unwrap();
        let dense = |x1: f64, x2: f64| {
            s.terms()
                .map(|(i, c)| c.to_f64() * x1.powi(i.exponents()[0] as i32) * x2.powi(i.exponents()[1] as i32))
                .sum::<f64>()
        };
        for alpha in [4i32, 5, 6] {
            for j in [vec![0, 0], vec![1, 0], vec![0, 3], vec![2, 2], vec![5, 1]] {
                let exact = simplex_moment(&f, &MultiIndex::new(j.clone()), &Rational::from(alpha), 2).unwrap();
                let q = triangle_quadrature(|x1, x2| {
                    dense(x1, x2).powi(alpha - 3) * x1.powi(j[0] as i32) * x2.powi(j[1] as i32)
                });
                let rel = (exact.to_f64() - q).abs() / q;
                assert!(rel < 1e-12, "alpha {alpha} J {j:?}: {} vs {q}", exact.to_f64());
            }
        }
    }
}

#[test]
fn simplex_moment_spec_values() {
    let one = RadialWeight::new(TruncatedSeries::constant(2, 0, Scalar::one(Backend::Exact))).unwrap();
    let four = Rational::from(4);
    let q = |n, d| Scalar::Exact(Rational::from((n, d)));
    assert_eq!(
        simplex_moment(&one, &MultiIndex::new(vec![0, 0]), &four, 2).unwrap(),
        q(1, 2)
    );
    assert_eq!(
        simplex_moment(&one, &MultiIndex::new(vec![1, 0]), &four, 2).unwrap(),
        q(1, 6)
    );
    let lin = RadialWeight::simplex_linear(2, 1, Scalar::one(Backend::Exact)).unwrap();
    assert_eq!(
        simplex_moment(&lin, &MultiIndex::new(vec![0, 0]), &four, 2).unwrap(),
        q(1, 6)
    );
}

#[test]
fn disk_mode_agrees_with_simplex_mode() {
    let s = TruncatedSeries::univariate_i64(3, Backend::Exact, &[3, -1, 2, -1]).unwrap();
    let f = RadialWeight::new(s).unwrap();
    for j in 0..20 {
        let a = moment(&f, j).unwrap();
        let b = simplex_moment(&f, &MultiIndex::univariate(j), &Rational::from(3), 1).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn hyperbolic_moments_symbolic() {
    let t = moment_table(&RadialWeight::hyperbolic(1, Backend::Exact), 100).unwrap();
    for j in 0..=100i64 {
        assert_eq!(
            t.get_j(j as u32).unwrap(),
            &Scalar::Exact(Rational::from((1, (j + 1) * (j + 2))))
        );
    }
}

fn binomial(p: &Rational, k: u32) -> Rational {
    let mut c = Rational::from(1);
    for i in 0..k {
        c *= Rational::from(p - i) / (i + 1);
    }
    c
}

#[test]
fn integer_powers_match_binomial_series() {
    let s = TruncatedSeries::univariate_i64(40, Backend::Exact, &[1, -1]).unwrap();
    for p in [-5i32, -3, -1, 2, 4] {
        let g = series_power(&s, &Rational::from(p), 40).unwrap();
        for k in 0..=40u32 {
            let mut expect = binomial(&Rational::from(p), k);
            if k % 2 == 1 {
                expect = -expect;
            }
            assert_eq!(
                g.coeff(&MultiIndex::univariate(k)),
                Scalar::Exact(expect),
                "p={p} k={k}"
            );
        }
    }
}

#[test]
fn fractional_powers_match_binomial_series() {
    let b = Backend::float(320).unwrap();
    let s = TruncatedSeries::univariate_i64(60, b, &[1, 1]).unwrap();
    for (n, d) in [(1, 2), (-1, 3), (2, 3), (-7, 4)] {
        let p = Rational::from((n, d));
        let g = series_power(&s, &p, 60).unwrap();
        for k in 0..=60u32 {
            let expect = Float::with_val(320, &binomial(&p, k));
            let got = g.coeff(&MultiIndex::univariate(k)).to_float(320);
            let err = Float::with_val(320, &got - &expect).abs();
            let scale = Float::with_val(320, expect.abs_ref()).max(&Float::with_val(320, 1));
            assert!(err / scale < 1e-90, "p={p} k={k}");
        }
    }
}

fn random_positive_polynomial(rng: &mut StdRng) -> RadialWeight {
    loop {
        let degree = rng.gen_range(1..=6);
        let coeffs: Vec<Scalar> = (0..=degree)
            .map(|_| Scalar::Exact(Rational::from((rng.gen_range(-9i64..=9), rng.gen_range(1i64..=7)))))
            .collect();
        let s = TruncatedSeries::univariate(degree, Backend::Exact, coeffs).unwrap();
        if let Ok(w) = RadialWeight::new(s) {
            if (0..=30).all(|j| moment(&w, j).is_ok()) {
                return w;
            }
        }
    }
}

/// `int_0^1 f(t) t^j dt` term by term.
fn brute_moment(f: &RadialWeight, j: u32) -> Rational {
    f.series()
        .dense()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(m, c)| c.to_rational() / (m as u32 + j + 1))
        .sum()
}

#[test]
fn ibp_expansion_equals_moment_for_random_polynomials() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..20 {
        let f = random_positive_polynomial(&mut rng);
        for j in 0..=30 {
            let m = moment(&f, j).unwrap();
            assert_eq!(m, Scalar::Exact(brute_moment(&f, j)));
            for k0 in 0..=5 {
                assert_eq!(ibp_expansion(&f, j, k0).unwrap(), m, "j={j} k0={k0}");
            }
        }
    }
}

#[test]
fn float_moments_are_correctly_rounded() {
    let b = Backend::float(128).unwrap();
    let s = TruncatedSeries::make(1, 4, &[(vec![0], "1/3"), (vec![1], "-1/7"), (vec![4], "1/11")], b).unwrap();
    let f = RadialWeight::new(s).unwrap();
    let exact = f.to_backend(Backend::Exact).unwrap();
    let table = weighted_moment_table(&f, &Rational::from(3), 1, 40).unwrap();
    for j in 0..=40 {
        let r = moment(&exact, j).unwrap().to_rational();
        assert_eq!(table.get_j(j).unwrap().to_float(128), Float::with_val(128, &r));
    }
}
