//! Dense polynomials over F_p (little-endian coefficient vectors) and
//! factorisation by distinct-degree plus equal-degree splitting.

use crate::arith::{invmod, mulmod, powmod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Poly = Vec<u64>;

pub fn trim(mut a: Poly) -> Poly {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

pub fn deg(a: &[u64]) -> isize {
    a.len() as isize - 1
}

pub fn add(a: &[u64], b: &[u64], p: u64) -> Poly {
    let n = a.len().max(b.len());
    let r = (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0) + b.get(i).copied().unwrap_or(0)) % p)
        .collect();
    trim(r)
}

pub fn sub(a: &[u64], b: &[u64], p: u64) -> Poly {
    let n = a.len().max(b.len());
    let r = (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0) + p - b.get(i).copied().unwrap_or(0)) % p)
        .collect();
    trim(r)
}

pub fn mul(a: &[u64], b: &[u64], p: u64) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut r = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            r[i + j] = (r[i + j] + mulmod(x, y, p)) % p;
        }
    }
    trim(r)
}

pub fn scale(a: &[u64], c: u64, p: u64) -> Poly {
    trim(a.iter().map(|&x| mulmod(x, c, p)).collect())
}

pub fn monic(a: &[u64], p: u64) -> Poly {
    match a.last() {
        None => Vec::new(),
        Some(&lc) => scale(a, invmod(lc, p).expect("nonzero leading coefficient"), p),
    }
}

pub fn divrem(a: &[u64], b: &[u64], p: u64) -> (Poly, Poly) {
    assert!(!b.is_empty(), "division by zero polynomial");
    let mut r = trim(a.to_vec());
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let inv = invmod(*b.last().unwrap(), p).unwrap();
    let mut q = vec![0u64; r.len() - b.len() + 1];
    while r.len() >= b.len() {
        let shift = r.len() - b.len();
        let c = mulmod(*r.last().unwrap(), inv, p);
        q[shift] = c;
        for (i, &bi) in b.iter().enumerate() {
            let t = mulmod(c, bi, p);
            r[shift + i] = (r[shift + i] + p - t) % p;
        }
        r = trim(r);
    }
    (trim(q), r)
}

pub fn rem(a: &[u64], b: &[u64], p: u64) -> Poly {
    divrem(a, b, p).1
}

pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Poly {
    let (mut x, mut y) = (trim(a.to_vec()), trim(b.to_vec()));
    while !y.is_empty() {
        let r = rem(&x, &y, p);
        x = y;
        y = r;
    }
    monic(&x, p)
}

pub fn mulmod_poly(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Poly {
    rem(&mul(a, b, p), m, p)
}

pub fn powmod_poly(base: &[u64], mut e: u128, m: &[u64], p: u64) -> Poly {
    let mut r: Poly = vec![1];
    let mut b = rem(base, m, p);
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod_poly(&r, &b, m, p);
        }
        b = mulmod_poly(&b, &b, m, p);
        e >>= 1;
    }
    rem(&r, m, p)
}

pub fn derivative(a: &[u64], p: u64) -> Poly {
    trim(
        a.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| mulmod(c, i as u64 % p, p))
            .collect(),
    )
}

pub fn eval(a: &[u64], x: u64, p: u64) -> u64 {
    a.iter()
        .rev()
        .fold(0, |acc, &c| (mulmod(acc, x, p) + c) % p)
}

// Distinct-degree factorisation of a monic squarefree polynomial.
fn ddf(f: &[u64], p: u64) -> Vec<(Poly, usize)> {
    let mut out = Vec::new();
    let mut rest = f.to_vec();
    let x: Poly = vec![0, 1];
    let mut h = x.clone();
    let mut d = 1;
    while deg(&rest) >= 2 * d as isize {
        h = powmod_poly(&h, p as u128, &rest, p);
        let g = gcd(&rest, &sub(&h, &x, p), p);
        if deg(&g) > 0 {
            out.push((g.clone(), d));
            rest = divrem(&rest, &g, p).0;
            h = rem(&h, &rest, p);
        }
        d += 1;
    }
    if deg(&rest) > 0 {
        let dd = deg(&rest) as usize;
        out.push((rest, dd));
    }
    out
}

// Cantor-Zassenhaus splitting of a product of degree-d irreducibles, p odd.
fn edf(f: &[u64], d: usize, p: u64, rng: &mut ChaCha8Rng) -> Vec<Poly> {
    let n = deg(f) as usize;
    if n == d {
        return vec![f.to_vec()];
    }
    let q = (p as u128).pow(d as u32);
    loop {
        let a: Poly = trim((0..n).map(|_| rng.gen_range(0..p)).collect());
        if deg(&a) < 1 {
            continue;
        }
        let b = powmod_poly(&a, (q - 1) / 2, f, p);
        let g = gcd(f, &sub(&b, &[1], p), p);
        if deg(&g) > 0 && deg(&g) < n as isize {
            let h = divrem(f, &g, p).0;
            let mut out = edf(&g, d, p, rng);
            out.extend(edf(&monic(&h, p), d, p, rng));
            return out;
        }
    }
}

fn is_monic_irreducible_brute(t: &[u64], p: u64) -> bool {
    let n = deg(t) as usize;
    for d in 1..=n / 2 {
        for cand in monic_polys(d, p) {
            if rem(t, &cand, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn monic_polys(d: usize, p: u64) -> impl Iterator<Item = Poly> {
    let count = (p as u128).pow(d as u32);
    (0..count).map(move |mut k| {
        let mut v = Vec::with_capacity(d + 1);
        for _ in 0..d {
            v.push((k % p as u128) as u64);
            k /= p as u128;
        }
        v.push(1);
        v
    })
}

// Trial division by all monic polynomials of small degree; for tiny p.
fn factor_brute(f: &[u64], p: u64) -> Vec<(Poly, u32)> {
    let mut rest = monic(f, p);
    let mut out = Vec::new();
    let mut d = 1;
    while 2 * d as isize <= deg(&rest) {
        for cand in monic_polys(d, p) {
            if !is_monic_irreducible_brute(&cand, p) {
                continue;
            }
            let mut e = 0;
            loop {
                let (q, r) = divrem(&rest, &cand, p);
                if !r.is_empty() {
                    break;
                }
                rest = q;
                e += 1;
            }
            if e > 0 {
                out.push((cand, e));
            }
        }
        d += 1;
    }
    if deg(&rest) > 0 {
        out.push((rest, 1));
    }
    out
}

/// Monic irreducible factors with multiplicities, sorted by degree then
/// coefficients (deterministic).
pub fn factor(f: &[u64], p: u64) -> Vec<(Poly, u32)> {
    let f = monic(&trim(f.to_vec()), p);
    let n = deg(&f);
    assert!(n >= 1, "cannot factor a constant");
    let mut out = if p <= 7 || p <= n as u64 {
        factor_brute(&f, p)
    } else {
        // Yun's squarefree decomposition is valid since p > deg f.
        let mut res: Vec<(Poly, u32)> = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(p ^ 0x5eed);
        let fp = derivative(&f, p);
        let mut a = gcd(&f, &fp, p);
        let mut b = divrem(&f, &a, p).0;
        let mut c = divrem(&fp, &a, p).0;
        let mut d = sub(&c, &derivative(&b, p), p);
        let mut i = 1;
        while deg(&b) > 0 {
            a = gcd(&b, &d, p);
            if deg(&a) > 0 {
                for (g, dd) in ddf(&a, p) {
                    for h in edf(&g, dd, p, &mut rng) {
                        res.push((monic(&h, p), i));
                    }
                }
            }
            b = divrem(&b, &a, p).0;
            c = divrem(&d, &a, p).0;
            d = sub(&c, &derivative(&b, p), p);
            i += 1;
        }
        res
    };
    out.sort_by(|x, y| {
        x.0.len()
            .cmp(&y.0.len())
            .then_with(|| x.0.iter().rev().cmp(y.0.iter().rev()))
    });
    out
}

pub fn roots(f: &[u64], p: u64) -> Vec<u64> {
    if p < 64 {
        return (0..p).filter(|&x| eval(f, x, p) == 0).collect();
    }
    factor(f, p)
        .into_iter()
        .filter(|(g, _)| g.len() == 2)
        .map(|(g, _)| (p - g[0]) % p)
        .collect()
}

/// x^e for a residue represented by `base` modulo `m`, u64 exponent.
pub fn pow_u64(base: &[u64], e: u64, m: &[u64], p: u64) -> Poly {
    powmod_poly(base, e as u128, m, p)
}

pub fn const_poly(c: u64) -> Poly {
    trim(vec![c])
}

pub fn is_one(a: &[u64]) -> bool {
    a.len() == 1 && a[0] == 1
}

pub fn from_coeffs(c: &[u64]) -> Poly {
    trim(c.to_vec())
}

pub fn powmod_scalar(a: u64, e: u64, p: u64) -> u64 {
    powmod(a, e, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product(fs: &[(Poly, u32)], p: u64) -> Poly {
        let mut r = vec![1];
        for (g, e) in fs {
            for _ in 0..*e {
                r = mul(&r, g, p);
            }
        }
        r
    }

    #[test]
    fn factor_reassembles() {
        for p in [3u64, 5, 7, 11, 13, 101, 1009] {
            // x^4 + 4x^2 + 2 (D = 2 minimal polynomial) and a square factor.
            for f in [vec![2, 0, 4, 0, 1], vec![1, 2, 1, 0, 0, 1]] {
                let fm: Poly = f.iter().map(|c| c % p).collect();
                let fs = factor(&fm, p);
                assert_eq!(product(&fs, p), monic(&trim(fm.clone()), p), "p={p}");
                for (g, _) in &fs {
                    assert!(is_monic_irreducible_brute(g, p) || p > 200);
                }
            }
        }
    }

    #[test]
    fn repeated_factor() {
        let p = 13;
        // (x-2)^2 (x^2+1)
        let f = mul(&mul(&[11, 1], &[11, 1], p), &[1, 0, 1], p);
        let fs = factor(&f, p);
        let total: u32 = fs.iter().map(|(g, e)| (g.len() as u32 - 1) * e).sum();
        assert_eq!(total, 4);
        assert!(fs.iter().any(|(g, e)| g == &vec![11, 1] && *e == 2));
    }
}
