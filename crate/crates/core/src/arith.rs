//! Rational-integer helpers: modular arithmetic, primality, factoring.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

#[inline]
pub fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn powmod(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn invmod(a: u64, m: u64) -> Option<u64> {
    let (mut t, mut nt) = (0i128, 1i128);
    let (mut r, mut nr) = (m as i128, (a % m) as i128);
    while nr != 0 {
        let q = r / nr;
        (t, nt) = (nt, t - q * nt);
        (r, nr) = (nr, r - q * nr);
    }
    if r != 1 {
        return None;
    }
    Some(t.rem_euclid(m as i128) as u64)
}

#[inline]
pub fn mod_i128(x: i128, p: u64) -> u64 {
    x.rem_euclid(p as i128) as u64
}

pub fn mod_bigint(x: &BigInt, p: u64) -> u64 {
    let r = x.mod_floor(&BigInt::from(p));
    r.to_u64().expect("residue fits u64")
}

/// Image of a rational in F_p, or `None` when p divides the denominator.
pub fn rat_mod_p(q: &BigRational, p: u64) -> Option<u64> {
    let n = mod_bigint(q.numer(), p);
    let d = mod_bigint(q.denom(), p);
    invmod(d, p).map(|di| mulmod(n, di, p))
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for sp in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % sp == 0 {
            return n == sp;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as u64)
        .collect()
}

pub fn is_squarefree(n: u64) -> bool {
    let mut m = n;
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            m /= d;
            if m % d == 0 {
                return false;
            }
        }
        d += 1;
    }
    true
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

// Brent's variant; returns a nontrivial factor of composite odd n.
fn pollard_rho(n: u64, max_iter: u64) -> Option<u64> {
    if n % 2 == 0 {
        return Some(2);
    }
    for c in 1..20u64 {
        let f = |x: u64| (mulmod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        let mut iters = 0;
        while d == 1 && iters < max_iter {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
            iters += 1;
        }
        if d != 1 && d != n {
            return Some(d);
        }
    }
    None
}

fn factor_u64_into(n: u64, out: &mut Vec<u64>, effort: u64) -> bool {
    if n == 1 {
        return true;
    }
    if is_prime_u64(n) {
        out.push(n);
        return true;
    }
    match pollard_rho(n, effort) {
        Some(d) => factor_u64_into(d, out, effort) && factor_u64_into(n / d, out, effort),
        None => false,
    }
}

/// Prime factorisation as sorted `(prime, exponent)` pairs.
pub fn factor_u64(n: u64) -> Vec<(u64, u32)> {
    factor_biguint(&BigUint::from(n), 1 << 20).expect("u64 always factors")
}

/// Factor with bounded effort; `None` when a cofactor resists.
pub fn factor_biguint(n: &BigUint, effort: u64) -> Option<Vec<(u64, u32)>> {
    let mut primes: Vec<u64> = Vec::new();
    let mut m = n.clone();
    if m.is_zero() {
        return None;
    }
    let mut d = 2u64;
    while d < 1 << 12 {
        let bd = BigUint::from(d);
        if &bd * &bd > m {
            break;
        }
        while (&m % &bd).is_zero() {
            primes.push(d);
            m /= &bd;
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if !m.is_one() {
        let small = m.to_u64()?;
        if !factor_u64_into(small, &mut primes, effort) {
            return None;
        }
    }
    primes.sort_unstable();
    let mut out: Vec<(u64, u32)> = Vec::new();
    for q in primes {
        match out.last_mut() {
            Some((l, e)) if *l == q => *e += 1,
            _ => out.push((q, 1)),
        }
    }
    Some(out)
}

pub fn factor_bigint_abs(n: &BigInt, effort: u64) -> Option<Vec<(u64, u32)>> {
    factor_biguint(&n.magnitude().clone(), effort)
}

pub fn valuation_bigint(n: &BigInt, p: u64) -> u32 {
    if n.is_zero() {
        return u32::MAX;
    }
    let bp = BigInt::from(p);
    let mut m = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&bp);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

pub fn isqrt_bigint(n: &BigInt) -> BigInt {
    assert!(n.sign() != Sign::Minus);
    n.sqrt()
}

pub fn is_square_bigint(n: &BigInt) -> Option<BigInt> {
    if n.sign() == Sign::Minus {
        return None;
    }
    let r = n.sqrt();
    if &r * &r == *n {
        Some(r)
    } else {
        None
    }
}

/// Multiplicative order of `a` in F_p^*, given the factorisation of p-1.
pub fn order_mod(a: u64, p: u64, pm1: &[(u64, u32)]) -> u64 {
    let mut ord = p - 1;
    for &(q, _) in pm1 {
        while ord % q == 0 && powmod(a, ord / q, p) == 1 {
            ord /= q;
        }
    }
    ord
}

/// Least positive primitive root modulo the prime `p`.
pub fn least_primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let fac = factor_u64(p - 1);
    (2..p)
        .find(|&g| order_mod(g, p, &fac) == p - 1)
        .expect("prime has a primitive root")
}
