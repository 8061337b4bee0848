//! Outward-rounded interval enclosures with dyadic endpoints.
//!
//! A [`Real`] is the closed interval `[lo, hi] / 2^prec`. Every operation
//! rounds the lower endpoint down and the upper endpoint up, so the true
//! value is always contained.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Real {
    lo: BigInt,
    hi: BigInt,
    prec: u32,
}

fn floor_shr(x: &BigInt, s: u32) -> BigInt {
    x.div_floor(&(BigInt::one() << s))
}

fn ceil_shr(x: &BigInt, s: u32) -> BigInt {
    -((-x).div_floor(&(BigInt::one() << s)))
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

// Floor and ceiling of the k-th root of a nonnegative integer.
fn root_floor(n: &BigInt, k: u32) -> BigInt {
    n.nth_root(k)
}

fn root_ceil(n: &BigInt, k: u32) -> BigInt {
    let r = n.nth_root(k);
    if r.pow(k) == *n {
        r
    } else {
        r + 1
    }
}

impl Real {
    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn from_rational(q: &BigRational, prec: u32) -> Real {
        let scaled = q.numer() << prec;
        let lo = scaled.div_floor(q.denom());
        let hi = ceil_div(&scaled, q.denom());
        Real { lo, hi, prec }
    }

    pub fn from_int(n: i64, prec: u32) -> Real {
        let v = BigInt::from(n) << prec;
        Real {
            lo: v.clone(),
            hi: v,
            prec,
        }
    }

    pub fn from_ratio(n: i64, d: i64, prec: u32) -> Real {
        Real::from_rational(&BigRational::new(n.into(), d.into()), prec)
    }

    pub fn lo_rational(&self) -> BigRational {
        BigRational::new(self.lo.clone(), BigInt::one() << self.prec)
    }

    pub fn hi_rational(&self) -> BigRational {
        BigRational::new(self.hi.clone(), BigInt::one() << self.prec)
    }

    /// Width of the enclosure.
    pub fn width(&self) -> f64 {
        let w = BigRational::new(&self.hi - &self.lo, BigInt::one() << self.prec);
        w.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn mid_f64(&self) -> f64 {
        let s = BigRational::new(&self.hi + &self.lo, BigInt::one() << (self.prec + 1));
        s.to_f64().unwrap_or(f64::NAN)
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo_rational().to_f64().unwrap_or(f64::NAN)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi_rational().to_f64().unwrap_or(f64::NAN)
    }

    pub fn contains_rational(&self, q: &BigRational) -> bool {
        &self.lo_rational() <= q && q <= &self.hi_rational()
    }

    pub fn is_positive(&self) -> bool {
        self.lo.sign() == Sign::Plus
    }

    pub fn add(&self, o: &Real) -> Real {
        assert_eq!(self.prec, o.prec);
        Real {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
            prec: self.prec,
        }
    }

    pub fn sub(&self, o: &Real) -> Real {
        assert_eq!(self.prec, o.prec);
        Real {
            lo: &self.lo - &o.hi,
            hi: &self.hi - &o.lo,
            prec: self.prec,
        }
    }

    pub fn neg(&self) -> Real {
        Real {
            lo: -&self.hi,
            hi: -&self.lo,
            prec: self.prec,
        }
    }

    pub fn mul(&self, o: &Real) -> Real {
        assert_eq!(self.prec, o.prec);
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let mn = c.iter().min().unwrap();
        let mx = c.iter().max().unwrap();
        Real {
            lo: floor_shr(mn, self.prec),
            hi: ceil_shr(mx, self.prec),
            prec: self.prec,
        }
    }

    /// Reciprocal; the interval must exclude zero.
    pub fn recip(&self) -> Real {
        assert!(
            self.lo.sign() == Sign::Plus || self.hi.sign() == Sign::Minus,
            "reciprocal of an interval containing zero"
        );
        let one = BigInt::one() << (2 * self.prec);
        Real {
            lo: one.div_floor(&self.hi),
            hi: ceil_div(&one, &self.lo),
            prec: self.prec,
        }
    }

    pub fn div(&self, o: &Real) -> Real {
        self.mul(&o.recip())
    }

    pub fn powi(&self, n: u32) -> Real {
        let mut r = Real::from_int(1, self.prec);
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// k-th root of a nonnegative enclosure.
    pub fn root(&self, k: u32) -> Real {
        assert!(
            self.lo.sign() != Sign::Minus,
            "root of a possibly negative interval"
        );
        let s = self.prec * (k - 1);
        let lo = root_floor(&(&self.lo << s), k);
        let hi = root_ceil(&(&self.hi << s), k);
        Real {
            lo,
            hi,
            prec: self.prec,
        }
    }

    pub fn sqrt(&self) -> Real {
        self.root(2)
    }

    pub fn max(&self, o: &Real) -> Real {
        Real {
            lo: self.lo.clone().max(o.lo.clone()),
            hi: self.hi.clone().max(o.hi.clone()),
            prec: self.prec,
        }
    }

    pub fn min(&self, o: &Real) -> Real {
        Real {
            lo: self.lo.clone().min(o.lo.clone()),
            hi: self.hi.clone().min(o.hi.clone()),
            prec: self.prec,
        }
    }

    /// Certain comparison; `None` when the enclosures overlap.
    pub fn try_cmp(&self, o: &Real) -> Option<Ordering> {
        assert_eq!(self.prec, o.prec);
        if self.hi < o.lo {
            Some(Ordering::Less)
        } else if self.lo > o.hi {
            Some(Ordering::Greater)
        } else if self.lo == self.hi && o.lo == o.hi && self.lo == o.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn overlaps(&self, o: &Real) -> bool {
        !(self.hi < o.lo || o.hi < self.lo)
    }

    /// Largest integer `n` that might satisfy `n < self`.
    pub fn floor_upper(&self) -> BigInt {
        floor_shr(&self.hi, self.prec)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12e}, {:.12e}]", self.lo_f64(), self.hi_f64())
    }
}

// arctan(1/x) for integer x > 1, at `bits` fractional bits, as (lo, hi) numerators.
fn arctan_inv(x: u64, bits: u32) -> (BigInt, BigInt) {
    let one = BigInt::one() << bits;
    let x2 = BigInt::from(x * x);
    let mut power = one.div_floor(&BigInt::from(x));
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    let mut terms = 0i64;
    while !power.is_zero() {
        let term = power.div_floor(&BigInt::from(2 * k + 1));
        if k % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        power = power.div_floor(&x2);
        k += 1;
        terms += 1;
    }
    // Each truncated term and power contributes at most one unit of error,
    // and the tail after the last nonzero power is below one unit.
    let slack = BigInt::from(2 * terms + 2);
    (&sum - &slack, &sum + &slack)
}

/// Enclosure of pi via Machin's formula.
pub fn pi(prec: u32) -> Real {
    let guard = 16;
    let bits = prec + guard;
    let (a_lo, a_hi) = arctan_inv(5, bits);
    let (b_lo, b_hi) = arctan_inv(239, bits);
    let lo = BigInt::from(16) * a_lo - BigInt::from(4) * b_hi;
    let hi = BigInt::from(16) * a_hi - BigInt::from(4) * b_lo;
    Real {
        lo: floor_shr(&lo, guard),
        hi: ceil_shr(&hi, guard),
        prec,
    }
}

pub fn abs_rational(q: &BigRational) -> BigRational {
    q.abs()
}
