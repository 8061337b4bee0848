//! Discriminants, conductors and splitting against independent oracles.

use crate::common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use tamek::ideal::decompose_prime;

#[test]
fn discriminant_of_d29_is_24389() {
    let ctx = context(29);
    assert_eq!(ctx.discriminant, BigInt::from(24389));
    assert_eq!(expected_discriminant(2, 29), BigInt::from(24389));
}

#[test]
fn discriminants_of_d2_and_d13_match_conductor_formula() {
    assert_eq!(expected_discriminant(1, 2), BigInt::from(2048));
    assert_eq!(expected_discriminant(2, 13), BigInt::from(2197));
    assert_eq!(context(2).discriminant, BigInt::from(2048));
    assert_eq!(context(13).discriminant, BigInt::from(2197));
}

#[test]
fn trace_form_agrees_for_all_seven_fields() {
    for ctx in contexts() {
        let p = &ctx.params;
        let tf = trace_form_discriminant(ctx);
        let exp = expected_discriminant(p.b, p.d);
        assert_eq!(tf, BigRational::from_integer(exp.clone()), "{p}");
        assert_eq!(ctx.discriminant, exp, "{p}");
        assert_eq!(ctx.conductor, conductor(p.b, p.d), "{p}");
        // index^2 * disc(O_F) = disc(minimal polynomial)
        let idx = &ctx.index;
        assert_eq!(
            polynomial_discriminant(ctx.c2, ctx.c0),
            idx * idx * &exp,
            "{p}"
        );
    }
}

#[test]
fn splitting_matches_artin_map_below_2000() {
    for ctx in contexts() {
        let p = ctx.params;
        let oracle = ArtinOracle::new(p.b, p.d);
        for q in primes_below(2000) {
            let primes = decompose_prime(ctx, q).unwrap();
            let mut got: Vec<(u32, u32)> = primes.iter().map(|pr| (pr.e, pr.f)).collect();
            got.sort();
            assert_eq!(got, oracle.splitting(q), "{p}, p = {q}");
            assert_eq!(got.iter().map(|(e, f)| e * f).sum::<u32>(), 4);
        }
    }
}

#[test]
fn artin_oracle_sanity() {
    // Q(zeta_16)^+ style check: for D = 2 the subgroup is {1, 7} mod 16
    let o = ArtinOracle::new(1, 2);
    assert_eq!(o.f, 16);
    assert_eq!(o.splitting(7), vec![(1, 1); 4]);
    assert_eq!(o.splitting(2), vec![(4, 1)]);
    assert_eq!(o.splitting(3), vec![(1, 4)]);
    assert_eq!(o.splitting(17), vec![(1, 1); 4]);
    let o = ArtinOracle::new(2, 13);
    assert_eq!(o.splitting(13), vec![(4, 1)]);
    assert_eq!(o.splitting(3), vec![(1, 1); 4]);
    assert_eq!(kronecker(8, 7), 1);
    assert_eq!(kronecker(13, 3), 1);
    assert_eq!(kronecker(13, 5), -1);
}

#[test]
fn minimal_polynomial_coefficients() {
    for ctx in contexts() {
        let p = ctx.params;
        assert_eq!(ctx.c2, 2 * p.d);
        assert_eq!(ctx.c0, p.d * p.d - p.d * p.b * p.b);
        // beta^4 + c2 beta^2 + c0 = 0 in the library's arithmetic
        let beta = tamek::QuarticElement::beta();
        let b2 = ctx.mul(&beta, &beta);
        let b4 = ctx.mul(&b2, &b2);
        let v = b4
            .add(&b2.scale(&BigRational::from_integer(ctx.c2.into())))
            .add(&tamek::QuarticElement::from_int(ctx.c0));
        assert!(v.is_zero());
    }
}
