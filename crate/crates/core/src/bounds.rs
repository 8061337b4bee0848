//! Theoretical cutoffs: corner constants c1, c2, the condition I and II
//! bounds, and Groenewegen's c_F.

use crate::field::{FieldContext, Quad, QuarticElement};
use crate::real::{self, Real};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// A real enclosure flattened for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl From<&Real> for Enclosure {
    fn from(r: &Real) -> Self {
        Enclosure {
            value: r.mid_f64(),
            lo: r.lo_f64(),
            hi: r.hi_f64(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bounds {
    pub c1: Real,
    pub c2: Real,
    /// Corner indices (bit i set = +1/2 in coordinate i) attaining c1 and c2.
    pub c1_corner: u8,
    pub c2_corner: u8,
    pub c_prime: Real,
    pub delta: Real,
    pub bound_i: Real,
    pub bound_ii: Real,
    pub c_f: Real,
    pub effective_i: Real,
    pub effective_ii: Real,
    pub rho: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub c1: Enclosure,
    pub c2: Enclosure,
    pub c1_corner: u8,
    pub c2_corner: u8,
    pub same_corner: bool,
    pub c_prime: Enclosure,
    pub delta: Enclosure,
    pub bound_i: Enclosure,
    pub bound_ii: Enclosure,
    pub c_f: Enclosure,
    pub effective_i: Enclosure,
    pub effective_ii: Enclosure,
    pub rho: String,
    /// Bounds actually driving the run (after overrides).
    pub used_i: Enclosure,
    pub used_ii: Enclosure,
    pub c_n_reading: String,
}

pub fn default_rho() -> BigRational {
    BigRational::new(3.into(), 4.into())
}

/// Parses "0.75", "3/4" or "1" into an exact rational.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{}{}", ip, fp);
    let n: BigInt = digits.parse().ok()?;
    let d = BigInt::from(10).pow(fp.len() as u32);
    let q = BigRational::new(n, d);
    Some(if neg { -q } else { q })
}

fn corner(ctx: &FieldContext, bits: u8) -> QuarticElement {
    let half = BigRational::new(1.into(), 2.into());
    let mut x = QuarticElement::zero();
    for (j, g) in ctx.gamma.iter().enumerate() {
        let s = if bits >> j & 1 == 1 {
            half.clone()
        } else {
            -half.clone()
        };
        x = x.add(&QuarticElement::new(g.clone()).scale(&s));
    }
    x
}

/// Exact squared corner maxima (c1^2, c2^2) with their corners.
pub fn corner_constants_exact(ctx: &FieldContext) -> ((Quad, u8), (Quad, u8)) {
    let mut best1: Option<(Quad, u8)> = None;
    let mut best2: Option<(Quad, u8)> = None;
    for bits in 0..16u8 {
        let x = corner(ctx, bits);
        let v1 = ctx.abs2(&x);
        let v2 = v1.conj();
        if best1
            .as_ref()
            .is_none_or(|(b, _)| v1.cmp_value(b) == Ordering::Greater)
        {
            best1 = Some((v1, bits));
        }
        if best2
            .as_ref()
            .is_none_or(|(b, _)| v2.cmp_value(b) == Ordering::Greater)
        {
            best2 = Some((v2, bits));
        }
    }
    (best1.unwrap(), best2.unwrap())
}

pub fn corner_constants(ctx: &FieldContext, prec: u32) -> (Real, Real) {
    let ((s1, _), (s2, _)) = corner_constants_exact(ctx);
    (s1.to_real(prec).sqrt(), s2.to_real(prec).sqrt())
}

pub fn c_prime(ctx: &FieldContext, c1: &Real, c2: &Real, prec: u32) -> Real {
    let x = ctx.unit.abs2.to_real(prec).sqrt();
    let s = ctx.unit.abs2.conj().to_real(prec).sqrt();
    let r = s.div(&x);
    let ri = x.div(&s);
    c1.mul(&r)
        .add(&c2.mul(&ri))
        .max(&c2.mul(&r).add(&c1.mul(&ri)))
}

pub fn delta(d: i64, prec: u32) -> Real {
    let two_over_pi = Real::from_int(2, prec).div(&real::pi(prec));
    two_over_pi.sqrt().mul(&Real::from_int(d, prec).root(8))
}

pub fn bound_condition_one(c1: &Real, c2: &Real, cp: &Real) -> Real {
    let one = Real::from_int(1, c1.prec());
    one.add(&c1.mul(c2)).add(cp).powi(2)
}

pub fn bound_condition_two(c1: &Real, c2: &Real, delta: &Real) -> Real {
    let prec = c1.prec();
    let cc = c1.mul(c2);
    let scc = cc.sqrt();
    let half = Real::from_ratio(1, 2, prec);
    let quarter = Real::from_ratio(1, 4, prec);
    let t = delta.mul(&scc).mul(&half);
    let inner = cc.mul(&delta.powi(2)).mul(&quarter).add(&scc);
    t.add(&inner.sqrt()).powi(8)
}

/// c_F for n = 4, s = 2.
pub fn groenewegen_bound(disc: &BigInt, rho: &BigRational, prec: u32) -> Real {
    let pi = real::pi(prec);
    let sd = Real::from_rational(&BigRational::from_integer(disc.clone()), prec).sqrt();
    let pi2 = pi.powi(2);
    // d = 2^n Gamma(3) / (4 pi)^2 * sqrt|Delta| = 2 sqrt|Delta| / pi^2
    let d = Real::from_int(2, prec).mul(&sd).div(&pi2);
    // d~ = (2/pi)^2 sqrt|Delta|
    let dt = Real::from_int(4, prec).mul(&sd).div(&pi2);
    let r = Real::from_rational(rho, prec);
    let a = Real::from_int(256, prec).mul(&r).mul(&d.powi(2));
    let b = Real::from_int(256, prec).root(3);
    let c = r.mul(&d.mul(&dt.powi(2)).powi(2)).root(3);
    let e = r.mul(&d.powi(3));
    a.max(&b).max(&c).max(&e)
}

pub fn compute(ctx: &FieldContext, rho: &BigRational) -> Bounds {
    let prec = ctx.precision;
    let ((s1, k1), (s2, k2)) = corner_constants_exact(ctx);
    let c1 = s1.to_real(prec).sqrt();
    let c2 = s2.to_real(prec).sqrt();
    let cp = c_prime(ctx, &c1, &c2, prec);
    let dl = delta(ctx.d(), prec);
    let bi = bound_condition_one(&c1, &c2, &cp);
    let bii = bound_condition_two(&c1, &c2, &dl);
    let cf = groenewegen_bound(&ctx.discriminant, rho, prec);
    let ei = bi.min(&cf);
    let eii = bii.min(&cf);
    Bounds {
        c1,
        c2,
        c1_corner: k1,
        c2_corner: k2,
        c_prime: cp,
        delta: dl,
        bound_i: bi,
        bound_ii: bii,
        c_f: cf,
        effective_i: ei,
        effective_ii: eii,
        rho: rho.clone(),
    }
}

impl Bounds {
    pub fn report(&self, used_i: &Real, used_ii: &Real) -> BoundsReport {
        BoundsReport {
            c1: (&self.c1).into(),
            c2: (&self.c2).into(),
            c1_corner: self.c1_corner,
            c2_corner: self.c2_corner,
            same_corner: self.c1_corner == self.c2_corner || self.c1_corner == 15 - self.c2_corner,
            c_prime: (&self.c_prime).into(),
            delta: (&self.delta).into(),
            bound_i: (&self.bound_i).into(),
            bound_ii: (&self.bound_ii).into(),
            c_f: (&self.c_f).into(),
            effective_i: (&self.effective_i).into(),
            effective_ii: (&self.effective_ii).into(),
            rho: self.rho.to_string(),
            used_i: used_i.into(),
            used_ii: used_ii.into(),
            c_n_reading: "c_N = c1*c2".into(),
        }
    }
}

/// Whether a prime of norm `n` may lie strictly below `bound` (conservative:
/// ambiguous cases are included).
pub fn norm_below(n: u64, bound: &Real) -> bool {
    let nr = Real::from_rational(&BigRational::from_integer(n.into()), bound.prec());
    !matches!(nr.try_cmp(bound), Some(Ordering::Greater | Ordering::Equal))
}

/// Largest integer that may lie strictly below `bound`.
pub fn max_norm_below(bound: &Real) -> u64 {
    use num_traits::ToPrimitive;
    let f = bound.floor_upper();
    let f = f.to_u64().unwrap_or(u64::MAX);
    // include the floor unless the bound is certainly <= it
    if norm_below(f, bound) {
        f
    } else {
        f.saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_decimal_forms() {
        assert_eq!(
            parse_decimal("0.75"),
            Some(BigRational::new(3.into(), 4.into()))
        );
        assert_eq!(
            parse_decimal("3/4"),
            Some(BigRational::new(3.into(), 4.into()))
        );
        assert_eq!(
            parse_decimal("172.525"),
            Some(BigRational::new(172525.into(), 1000.into()))
        );
        assert_eq!(parse_decimal("x"), None);
    }

    #[test]
    fn norm_below_is_strict() {
        let b = Real::from_ratio(172525, 1000, 64);
        assert!(norm_below(172, &b));
        assert!(!norm_below(173, &b));
        assert_eq!(max_norm_below(&b), 172);
        assert_eq!(max_norm_below(&Real::from_int(17, 64)), 16);
    }
}
