use bk_core::moments::moment;
use bk_core::{Backend, MultiIndex, RadialWeight, Scalar, TruncatedSeries};
use proptest::prelude::*;
use rug::{Integer, Rational};

fn rational() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=9).prop_map(|(n, d)| Rational::from((n, d)))
}

fn exact_series(max_len: usize) -> impl Strategy<Value = TruncatedSeries> {
    prop::collection::vec(rational(), 1..=max_len).prop_map(|c| {
        let order = c.len() as u32 + 2;
        TruncatedSeries::univariate(order, Backend::Exact, c.into_iter().map(Scalar::Exact).collect()).unwrap()
    })
}

fn with_positive_constant(max_len: usize) -> impl Strategy<Value = TruncatedSeries> {
    (exact_series(max_len), 1i64..=5).prop_map(|(s, c0)| {
        let shift = &Scalar::from_i64(c0, Backend::Exact) - &s.constant_term();
        s.add(&TruncatedSeries::constant(1, s.order(), shift)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integer_power_inverse_pairs(f in with_positive_constant(5), p in 1i32..=4) {
        let m = f.order();
        let a = f.power(&Rational::from(p), m).unwrap();
        let b = f.power(&Rational::from(-p), m).unwrap();
        let prod = a.mul(&b).unwrap();
        prop_assert_eq!(prod, TruncatedSeries::constant(1, m, Scalar::one(Backend::Exact)));
    }

    #[test]
    fn fractional_power_inverse_pairs(f in with_positive_constant(5), n in 1i64..=5, d in 2i64..=5) {
        let b = Backend::default_float();
        let f = f.to_backend(b);
        let m = f.order();
        let p = Rational::from((n, d));
        let prod = f.power(&p, m).unwrap().mul(&f.power(&Rational::from(-&p), m).unwrap()).unwrap();
        let scale: f64 = f.terms().map(|(_, c)| c.abs().to_f64()).sum::<f64>() / f.constant_term().to_f64();
        for k in 1..=m {
            let c = prod.coeff(&MultiIndex::univariate(k)).abs().to_f64();
            prop_assert!(c <= 1e-60 * scale.powi(2 * m as i32 + 2), "k={} c={}", k, c);
        }
    }

    #[test]
    fn mul_commutes_and_associates(a in exact_series(5), b in exact_series(5), c in exact_series(5)) {
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        let zero = TruncatedSeries::zero(1, a.order(), Backend::Exact);
        prop_assert_eq!(a.add(&zero).unwrap(), a.clone());
    }

    #[test]
    fn recentering_reexpands(f in exact_series(7)) {
        let k = f.order();
        let d = f.recenter_at_one(k).unwrap();
        // sum_k f^(k)(1)/k! (x-1)^k
        let mut acc = TruncatedSeries::zero(1, k, Backend::Exact);
        let shift = TruncatedSeries::univariate_i64(k, Backend::Exact, &[-1, 1]).unwrap();
        let mut pow = TruncatedSeries::constant(1, k, Scalar::one(Backend::Exact));
        let mut fact = Integer::from(1);
        for (i, dk) in d.iter().enumerate() {
            if i > 0 {
                fact *= i as u32;
                pow = pow.mul(&shift).unwrap();
            }
            acc = acc.add(&pow.scale(&dk.div_int(&fact))).unwrap();
        }
        prop_assert_eq!(acc, f);
    }

    #[test]
    fn eval_is_bit_deterministic(f in exact_series(8), num in 1i64..99) {
        let b = Backend::default_float();
        let f = f.to_backend(b);
        let x = [Scalar::from_rational(&Rational::from((num, 100)), b)];
        let a = f.eval(&x).unwrap();
        let c = f.eval(&x).unwrap();
        prop_assert_eq!(a.value.to_repr_string(), c.value.to_repr_string());
        prop_assert_eq!(a.tail.value.to_bits(), c.tail.value.to_bits());
    }

    #[test]
    fn moments_scale_and_decrease(f in with_positive_constant(4), c in 1i64..=7) {
        if let Ok(w) = RadialWeight::new(f.clone()) {
            let scaled = RadialWeight::new(f.scale(&Scalar::from_i64(c, Backend::Exact))).unwrap();
            let mut prev: Option<Scalar> = None;
            for j in 0..12 {
                let Ok(m) = moment(&w, j) else { break };
                prop_assert_eq!(moment(&scaled, j).unwrap(), m.mul_int(&Integer::from(c)));
                if let Some(p) = prev {
                    prop_assert!(m.cmp_value(&p).is_lt());
                }
                prev = Some(m);
            }
        }
    }
}
