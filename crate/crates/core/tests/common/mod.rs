//! Independent oracles shared by the integration tests.
//!
//! Nothing here goes through the library's own discriminant or splitting
//! code: decompositions are predicted from the Artin map on (Z/f)^*, and
//! discriminants from the trace form built out of Newton power sums.
#![allow(dead_code)]

pub mod props;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};
use tamek::{FieldContext, FieldParams};

/// Bounds table: (B, C, D, condition I, condition II, c_F).
pub const PUBLISHED_BOUNDS: [(i64, i64, i64, f64, f64, f64); 6] = [
    (1, 1, 2, 172.525, 3253.539, 16146.993),
    (2, 3, 13, 1173.677, 45879.279, 17321.1),
    (2, 5, 29, 48710.067, 1867701099.860, 192289.567),
    (6, 1, 37, 5284749.383, 61546835.003, 399362.147),
    (2, 7, 53, 114166.647, 4086894943.478, 1173787.115),
    (6, 5, 61, 180648285.891, 1680328728.448, 1789580.481),
];

pub const SEVEN: [(i64, i64, i64); 7] = [
    (2, 1, 5),
    (2, 3, 13),
    (1, 1, 2),
    (2, 5, 29),
    (6, 1, 37),
    (2, 7, 53),
    (6, 5, 61),
];

pub fn params(b: i64, c: i64, d: i64) -> FieldParams {
    FieldParams::new(b, c, d).expect("class-number-one field")
}

/// The seven fields, built once per test binary.
pub fn contexts() -> &'static [Arc<FieldContext>] {
    static CTX: OnceLock<Vec<Arc<FieldContext>>> = OnceLock::new();
    CTX.get_or_init(|| {
        SEVEN
            .iter()
            .map(|&(b, c, d)| {
                Arc::new(FieldContext::new(params(b, c, d), 256).expect("field builds"))
            })
            .collect()
    })
}

pub fn context(d: i64) -> Arc<FieldContext> {
    contexts()
        .iter()
        .find(|c| c.params.d == d)
        .expect("known field")
        .clone()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn powmod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

/// Kronecker symbol (a/n) for n > 0.
pub fn kronecker(a: i64, mut n: u64) -> i32 {
    let mut t = 1;
    while n % 2 == 0 {
        n /= 2;
        match a.rem_euclid(8) {
            1 | 7 => {}
            3 | 5 => t = -t,
            _ => return 0,
        }
    }
    // Jacobi (a/n), n odd
    let mut a = a.rem_euclid(n as i64) as u64;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if n % 8 == 3 || n % 8 == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Conductor of Q(sqrt(-(D + B sqrt D))) from the congruence conditions on D and B.
pub fn conductor(b: i64, d: i64) -> u64 {
    let l = if d % 8 == 2 || (d % 4 == 1 && b % 2 == 1) {
        3
    } else if (-1 + b).rem_euclid(4) == 3 {
        2
    } else {
        0
    };
    (1u64 << l) * d as u64
}

pub fn quadratic_discriminant(d: i64) -> i64 {
    if d % 4 == 1 {
        d
    } else {
        4 * d
    }
}

/// Conductor-discriminant formula: the quartic characters contribute f each,
/// the quadratic one d_k.
pub fn expected_discriminant(b: i64, d: i64) -> BigInt {
    let f = BigInt::from(conductor(b, d));
    &f * &f * quadratic_discriminant(d)
}

/// Splitting predicted by the Artin map on (Z/f)^*.
pub struct ArtinOracle {
    pub f: u64,
    /// chi: (Z/f)^* -> Z/4 with kernel H; entries for non-units are unused.
    chi: Vec<u8>,
}

impl ArtinOracle {
    /// Finds the order-4 characters with chi(-1) = 2 whose square is the
    /// character of Q(sqrt D); panics unless they share one kernel.
    pub fn new(b: i64, d: i64) -> Self {
        let f = conductor(b, d);
        let dk = quadratic_discriminant(d);
        let units: Vec<u64> = (1..f).filter(|&x| gcd(x, f) == 1).collect();
        // greedy generating set
        let mut gens: Vec<u64> = Vec::new();
        let mut span: BTreeSet<u64> = [1].into();
        for &u in &units {
            if !span.contains(&u) {
                gens.push(u);
                let mut frontier: Vec<u64> = span.iter().copied().collect();
                while let Some(x) = frontier.pop() {
                    for &g in &gens {
                        let y = x * g % f;
                        if span.insert(y) {
                            frontier.push(y);
                        }
                    }
                }
            }
        }
        let mut kernels: BTreeSet<Vec<u64>> = BTreeSet::new();
        let mut found = None;
        for code in 0..4usize.pow(gens.len() as u32) {
            let imgs: Vec<u8> = (0..gens.len())
                .map(|k| ((code >> (2 * k)) & 3) as u8)
                .collect();
            let mut chi = vec![u8::MAX; f as usize];
            chi[1 % f as usize] = 0;
            let mut stack = vec![1 % f];
            let mut ok = true;
            while let Some(x) = stack.pop() {
                for (g, &img) in gens.iter().zip(&imgs) {
                    let y = (x * g % f) as usize;
                    let v = (chi[x as usize] + img) % 4;
                    if chi[y] == u8::MAX {
                        chi[y] = v;
                        stack.push(y as u64);
                    } else if chi[y] != v {
                        ok = false;
                    }
                }
            }
            if !ok || !units.iter().any(|&u| chi[u as usize] % 2 == 1) || chi[(f - 1) as usize] != 2
            {
                continue;
            }
            if !units
                .iter()
                .all(|&u| (chi[u as usize] % 2 == 0) == (kronecker(dk, u) == 1))
            {
                continue;
            }
            kernels.insert(
                units
                    .iter()
                    .copied()
                    .filter(|&u| chi[u as usize] == 0)
                    .collect(),
            );
            found = Some(chi);
        }
        assert_eq!(kernels.len(), 1, "expected one index-4 subgroup for D={d}");
        ArtinOracle {
            f,
            chi: found.unwrap(),
        }
    }

    fn chi(&self, x: u64) -> u8 {
        self.chi[(x % self.f) as usize]
    }

    /// Multiset of (e, f) over p, sorted.
    pub fn splitting(&self, p: u64) -> Vec<(u32, u32)> {
        let mut pa = 1;
        while self.f % (pa * p) == 0 {
            pa *= p;
        }
        let m = self.f / pa;
        // inertia: chi of x = 1 mod m, x a unit mod f
        let inertia: BTreeSet<u8> = (0..pa)
            .map(|k| 1 + k * m)
            .filter(|&x| gcd(x, self.f) == 1)
            .map(|x| self.chi(x))
            .collect();
        let e = inertia.len() as u32;
        // Frobenius: x = p mod m, x = 1 mod p^a
        let frob = (0..pa)
            .map(|k| (p % m.max(1)) + k * m)
            .find(|&x| x % pa == 1 % pa && gcd(x, self.f) == 1);
        let frob = if m == 1 { 1 } else { frob.expect("CRT lift") };
        let c = self.chi(frob);
        let fdeg = (1..=4u32)
            .find(|&k| inertia.contains(&(((c as u32 * k) % 4) as u8)))
            .expect("order divides 4");
        let g = 4 / (e * fdeg);
        vec![(e, fdeg); g as usize]
    }
}

/// Power sums p_k of the roots of x^4 + a x^2 + b, k = 0..=6.
fn power_sums(a: i64, b: i64) -> [BigInt; 7] {
    let (a, b) = (BigInt::from(a), BigInt::from(b));
    let two = BigInt::from(2);
    let p2 = -&two * &a;
    let p4 = &two * &a * &a - BigInt::from(4) * &b;
    let p6 = -&two * &a * &a * &a + BigInt::from(6) * &a * &b;
    [
        BigInt::from(4),
        BigInt::zero(),
        p2,
        BigInt::zero(),
        p4,
        BigInt::zero(),
        p6,
    ]
}

/// det Tr(gamma_i gamma_j) over the library's integral basis.
pub fn trace_form_discriminant(ctx: &FieldContext) -> BigRational {
    let p = power_sums(ctx.c2, ctx.c0);
    let tr = |x: &[BigRational; 4], y: &[BigRational; 4]| {
        let mut s = BigRational::zero();
        for i in 0..4 {
            for j in 0..4 {
                s += &x[i] * &y[j] * BigRational::from_integer(p[i + j].clone());
            }
        }
        s
    };
    let mut m: Vec<Vec<BigRational>> = (0..4)
        .map(|i| (0..4).map(|j| tr(&ctx.gamma[i], &ctx.gamma[j])).collect())
        .collect();
    let mut det = BigRational::one();
    for c in 0..4 {
        let piv = (c..4)
            .find(|&r| !m[r][c].is_zero())
            .expect("nondegenerate trace form");
        if piv != c {
            m.swap(c, piv);
            det = -det;
        }
        det *= &m[c][c];
        for r in c + 1..4 {
            let f = &m[r][c] / &m[c][c];
            for j in c..4 {
                let t = &f * &m[c][j];
                m[r][j] -= t;
            }
        }
    }
    det
}

/// disc(x^4 + a x^2 + b) = 16 b (a^2 - 4b)^2.
pub fn polynomial_discriminant(a: i64, b: i64) -> BigInt {
    let (a, b) = (BigInt::from(a), BigInt::from(b));
    let t = &a * &a - BigInt::from(4) * &b;
    BigInt::from(16) * b * &t * &t
}

pub fn primes_below(n: u64) -> Vec<u64> {
    (2..n)
        .filter(|&k| (2..).take_while(|d| d * d <= k).all(|d| k % d != 0))
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn abs_big(x: &BigInt) -> BigInt {
    x.abs()
}

/// Multiplicative order of a mod m by direct powering.
pub fn naive_order(a: u64, m: u64) -> u64 {
    (1..m).find(|&k| powmod(a, k, m) == 1).unwrap_or(0)
}
