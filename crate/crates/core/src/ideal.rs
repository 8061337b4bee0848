//! Prime ideals of O_F: decomposition of rational primes, residue fields,
//! reduced principal generators, valuations and S-unit membership.

use crate::arith::{self, factor_bigint_abs, invmod, mod_bigint, mod_i128, mulmod, powmod};
use crate::field::{FieldContext, FieldError, IntegralCoords, OElem, Quad, QuarticElement};
use crate::lattice;
use crate::linalg::{self, Mat};
use crate::poly;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum IdealError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("no generator found for the prime of norm {norm} over {p}")]
    GeneratorNotFound { p: u64, norm: u64 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("valuation of zero")]
    ZeroElement,
    #[error("element has negative valuation and cannot be reduced")]
    NegativeValuation,
    #[error("residue field too large to enumerate")]
    ResidueTooLarge,
}

/// Ordering key of a prime ideal: (norm, p, index among primes over p).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrimeKey {
    pub norm: u64,
    pub p: u64,
    pub idx: u32,
}

/// Residue element: polynomial coefficients of degree < f.
pub type Res = [u64; 4];

/// F_p[X]/(t) together with the images of the integral basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueField {
    pub p: u64,
    pub f: u32,
    pub q: u64,
    /// Monic modulus, low degree first, length f+1.
    pub modulus: Vec<u64>,
    pub images: [Res; 4],
    /// Prime factors of q - 1.
    pub qm1_factors: Vec<u64>,
}

impl ResidueField {
    fn new(p: u64, modulus: Vec<u64>, images: [Res; 4]) -> ResidueField {
        let f = (modulus.len() - 1) as u32;
        // Saturates for residue fields beyond u64; such primes lie far past
        // every cutoff and only serve valuations.
        let q = p.checked_pow(f).unwrap_or(u64::MAX);
        let qm1_factors = if q > 2 && q < u64::MAX {
            arith::factor_u64(q - 1)
                .into_iter()
                .map(|(l, _)| l)
                .collect()
        } else {
            Vec::new()
        };
        ResidueField {
            p,
            f,
            q,
            modulus,
            images,
            qm1_factors,
        }
    }

    pub fn zero(&self) -> Res {
        [0; 4]
    }

    pub fn one(&self) -> Res {
        [1, 0, 0, 0]
    }

    pub fn from_int(&self, n: i128) -> Res {
        [mod_i128(n, self.p), 0, 0, 0]
    }

    pub fn is_zero(a: &Res) -> bool {
        *a == [0; 4]
    }

    /// Reduction O_F -> F_q of an integral element.
    #[inline]
    pub fn reduce(&self, x: &OElem) -> Res {
        let p = self.p;
        if self.f == 1 {
            let mut s = 0u64;
            for j in 0..4 {
                if x.0[j] != 0 {
                    s = (s + mulmod(mod_i128(x.0[j], p), self.images[j][0], p)) % p;
                }
            }
            return [s, 0, 0, 0];
        }
        let mut r = [0u64; 4];
        for j in 0..4 {
            if x.0[j] == 0 {
                continue;
            }
            let c = mod_i128(x.0[j], p);
            for k in 0..self.f as usize {
                r[k] = (r[k] + mulmod(c, self.images[j][k], p)) % p;
            }
        }
        r
    }

    pub fn reduce_coords(&self, y: &IntegralCoords) -> Result<Res, IdealError> {
        let p = self.p;
        let mut r = [0u64; 4];
        for j in 0..4 {
            let n = mod_bigint(y.0[j].numer(), p);
            let d = mod_bigint(y.0[j].denom(), p);
            let di = invmod(d, p).ok_or(IdealError::NegativeValuation)?;
            let c = mulmod(n, di, p);
            for k in 0..self.f as usize {
                r[k] = (r[k] + mulmod(c, self.images[j][k], p)) % p;
            }
        }
        Ok(r)
    }

    pub fn add(&self, a: &Res, b: &Res) -> Res {
        std::array::from_fn(|i| (a[i] + b[i]) % self.p)
    }

    pub fn sub(&self, a: &Res, b: &Res) -> Res {
        std::array::from_fn(|i| (a[i] + self.p - b[i]) % self.p)
    }

    #[inline]
    pub fn mul(&self, a: &Res, b: &Res) -> Res {
        let p = self.p;
        if self.f == 1 {
            return [mulmod(a[0], b[0], p), 0, 0, 0];
        }
        let f = self.f as usize;
        let mut t = [0u64; 8];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                t[i + j] = (t[i + j] + mulmod(a[i], b[j], p)) % p;
            }
        }
        for k in (f..2 * f - 1).rev() {
            let c = t[k];
            if c == 0 {
                continue;
            }
            t[k] = 0;
            for i in 0..f {
                let s = mulmod(c, self.modulus[i], p);
                t[k - f + i] = (t[k - f + i] + p - s) % p;
            }
        }
        [t[0], t[1], t[2], t[3]]
    }

    pub fn pow(&self, a: &Res, mut e: u64) -> Res {
        let mut r = self.one();
        let mut b = *a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        r
    }

    /// Whether `a` generates F_q^*.
    pub fn is_generator(&self, a: &Res) -> bool {
        if Self::is_zero(a) {
            return false;
        }
        if self.q == 2 {
            return true;
        }
        self.pow(a, self.q - 1) == self.one()
            && self
                .qm1_factors
                .iter()
                .all(|&l| self.pow(a, (self.q - 1) / l) != self.one())
    }

    pub fn order(&self, a: &Res) -> u64 {
        let mut ord = self.q - 1;
        for &l in &self.qm1_factors {
            while ord % l == 0 && self.pow(a, ord / l) == self.one() {
                ord /= l;
            }
        }
        ord
    }

    /// Injective code of a residue in [0, q).
    #[inline]
    pub fn encode(&self, a: &Res) -> u64 {
        let mut c = 0u64;
        for i in (0..self.f as usize).rev() {
            c = c * self.p + a[i];
        }
        c
    }

    pub fn decode(&self, mut c: u64) -> Res {
        let mut r = [0u64; 4];
        for x in r.iter_mut().take(self.f as usize) {
            *x = c % self.p;
            c /= self.p;
        }
        r
    }
}

/// A prime ideal P = (alpha) of O_F.
#[derive(Clone, Debug)]
pub struct PrimeIdeal {
    pub key: PrimeKey,
    pub p: u64,
    pub e: u32,
    pub f: u32,
    /// Second element of the two-element representation (p, h).
    pub two_elem: QuarticElement,
    pub alpha: QuarticElement,
    pub alpha_o: OElem,
    /// sigma(alpha) sigma^2(alpha) sigma^3(alpha), so alpha * cofactor = N(P).
    pub alpha_cofactor: OElem,
    pub residue: ResidueField,
}

impl PrimeIdeal {
    pub fn norm(&self) -> u64 {
        self.key.norm
    }

    pub fn contains(&self, x: &OElem) -> bool {
        ResidueField::is_zero(&self.residue.reduce(x))
    }

    /// v_P(x) for nonzero integral x.
    pub fn valuation_o(&self, ctx: &FieldContext, x: &OElem) -> Result<u32, IdealError> {
        if x.is_zero() {
            return Err(IdealError::ZeroElement);
        }
        let n = self.key.norm as i128;
        let mut y = *x;
        let mut v = 0;
        while self.contains(&y) {
            match ctx.omul(&y, &self.alpha_cofactor) {
                Some(t) if t.0.iter().all(|c| c % n == 0) => {
                    y = OElem(t.0.map(|c| c / n));
                    v += 1;
                }
                Some(_) => unreachable!("alpha divides y but quotient is not integral"),
                None => return self.valuation_big(ctx, &ctx.from_oelem(&y)).map(|w| w + v),
            }
        }
        Ok(v)
    }

    fn valuation_big(&self, ctx: &FieldContext, x: &QuarticElement) -> Result<u32, IdealError> {
        let mut y = x.clone();
        let mut v = 0;
        loop {
            let r = self.residue.reduce_coords(&ctx.to_integral(&y))?;
            if !ResidueField::is_zero(&r) {
                return Ok(v);
            }
            y = ctx.div(&y, &self.alpha)?;
            v += 1;
        }
    }

    /// v_P(x) for any nonzero x in F.
    pub fn valuation(&self, ctx: &FieldContext, x: &QuarticElement) -> Result<i64, IdealError> {
        if x.is_zero() {
            return Err(IdealError::ZeroElement);
        }
        let y = ctx.to_integral(x);
        let d = y.denominator();
        let num = IntegralCoords(y.0.map(|c| c * BigRational::from_integer(d.clone())));
        let vn = match num.to_oelem() {
            Ok(o) => self.valuation_o(ctx, &o)?,
            Err(_) => self.valuation_big(ctx, &ctx.from_integral(&num))?,
        };
        let vd = arith::valuation_bigint(&d, self.p) as i64 * self.e as i64;
        Ok(vn as i64 - vd)
    }

    /// Reduction of an element with v_P(x) >= 0.
    pub fn reduce(&self, ctx: &FieldContext, x: &QuarticElement) -> Result<Res, IdealError> {
        let y = ctx.to_integral(x);
        if let Ok(o) = y.to_oelem() {
            return Ok(self.residue.reduce(&o));
        }
        if self.valuation(ctx, x)? < 0 {
            return Err(IdealError::NegativeValuation);
        }
        // Multiply by an element that is a unit at P and clears denominators.
        let d = y.denominator();
        let vp = arith::valuation_bigint(&d, self.p);
        let mut cleared = x.clone();
        let mut scale = self.residue.one();
        if vp > 0 {
            // d = p^vp * d'; p^vp / alpha^(e vp) is a P-unit.
            let pe = BigInt::from(self.p).pow(vp);
            let unit = ctx.div(
                &QuarticElement::from_rational(BigRational::from_integer(pe)),
                &ctx.pow(&self.alpha, (self.e * vp) as i64)?,
            )?;
            cleared = ctx.div(&cleared, &unit)?;
            let ur = self.residue.reduce_coords(&ctx.to_integral(&unit))?;
            scale = ur;
        }
        let r = self.residue.reduce_coords(&ctx.to_integral(&cleared))?;
        Ok(self.residue.mul(&r, &scale))
    }
}

// The F_p-algebra O_F/pO_F in integral coordinates.
struct Algebra<'a> {
    ctx: &'a FieldContext,
    p: u64,
}

impl Algebra<'_> {
    fn mul(&self, u: &[u64], v: &[u64]) -> Vec<u64> {
        let p = self.p;
        let mut r = vec![0u64; 4];
        for i in 0..4 {
            if u[i] == 0 {
                continue;
            }
            for j in 0..4 {
                if v[j] == 0 {
                    continue;
                }
                let c = mulmod(u[i], v[j], p);
                for k in 0..4 {
                    let t = mod_i128(self.ctx.mult[i][j][k], p);
                    r[k] = (r[k] + mulmod(c, t, p)) % p;
                }
            }
        }
        r
    }

    fn pow(&self, u: &[u64], mut e: u64) -> Vec<u64> {
        let mut r = vec![1, 0, 0, 0];
        let mut b = u.to_vec();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        r
    }

    // Matrix (rows = output coordinates) of multiplication by u.
    fn mult_matrix(&self, u: &[u64]) -> Mat {
        let cols: Vec<Vec<u64>> = (0..4).map(|j| self.mul(u, &unit_vec(j))).collect();
        linalg::transpose(&cols)
    }

    fn image(&self, u: &[u64]) -> Mat {
        let cols: Vec<Vec<u64>> = (0..4).map(|j| self.mul(u, &unit_vec(j))).collect();
        linalg::span(&cols, self.p)
    }
}

fn unit_vec(j: usize) -> Vec<u64> {
    let mut v = vec![0u64; 4];
    v[j] = 1;
    v
}

struct RawPrime {
    e: u32,
    f: u32,
    modulus: Vec<u64>,
    images: [Res; 4],
    two_elem: QuarticElement,
}

fn decompose_fast(ctx: &FieldContext, p: u64) -> Vec<RawPrime> {
    let f: Vec<u64> = [ctx.c0, 0, ctx.c2, 0, 1]
        .iter()
        .map(|&c| mod_i128(c as i128, p))
        .collect();
    let mut out = Vec::new();
    for (t, e) in poly::factor(&f, p) {
        let deg = t.len() - 1;
        let mut images = [[0u64; 4]; 4];
        for (j, img) in images.iter_mut().enumerate() {
            let coeffs: Vec<u64> = ctx.gamma[j]
                .iter()
                .map(|c| arith::rat_mod_p(c, p).expect("p does not divide the index"))
                .collect();
            let r = poly::rem(&poly::trim(coeffs), &t, p);
            for (k, &c) in r.iter().enumerate() {
                img[k] = c;
            }
        }
        // (p, t(beta)) with t lifted to Z[x]; t(beta) is 0 when p is inert.
        let two = if deg < 4 {
            QuarticElement::new(std::array::from_fn(|k| {
                BigRational::from_integer(BigInt::from(if k == deg {
                    1
                } else {
                    t.get(k).copied().unwrap_or(0)
                }))
            }))
        } else {
            QuarticElement::from_int(p as i64)
        };
        out.push(RawPrime {
            e,
            f: deg as u32,
            modulus: t,
            images,
            two_elem: two,
        });
    }
    out
}

fn decompose_slow(ctx: &FieldContext, p: u64) -> Vec<RawPrime> {
    let alg = Algebra { ctx, p };
    // Frobenius x -> x^p is F_p-linear; column j is gamma_j^p.
    let frob_cols: Vec<Vec<u64>> = (0..4).map(|j| alg.pow(&unit_vec(j), p)).collect();
    let frob = linalg::transpose(&frob_cols);
    let mut k = 1;
    while p.pow(k) < 4 {
        k += 1;
    }
    let mut fk = linalg::identity(4);
    for _ in 0..k {
        fk = linalg::mat_mul(&frob, &fk, p);
    }
    let radical = linalg::kernel(&fk, 4, p);
    let mut fm = frob.clone();
    for (i, row) in fm.iter_mut().enumerate() {
        row[i] = (row[i] + p - 1) % p;
    }
    let fixed = linalg::kernel(&fm, 4, p);
    let g = fixed.len();

    let mut idems: Vec<Vec<u64>> = vec![vec![1, 0, 0, 0]];
    for z in &fixed {
        if idems.len() == g {
            break;
        }
        let mut next = Vec::new();
        for e in &idems {
            let ze = alg.mul(z, e);
            let rank_e = linalg::rank(&alg.mult_matrix(e), p);
            let eigen: Vec<u64> = (0..p)
                .filter(|&lam| {
                    let shifted: Vec<u64> = (0..4)
                        .map(|i| (ze[i] + p - mulmod(lam, e[i], p)) % p)
                        .collect();
                    linalg::rank(&alg.mult_matrix(&shifted), p) < rank_e
                })
                .collect();
            if eigen.len() <= 1 {
                next.push(e.clone());
                continue;
            }
            for &lam in &eigen {
                let mut piece = e.clone();
                for &mu in eigen.iter().filter(|&&m| m != lam) {
                    let inv = invmod((lam + p - mu) % p, p).unwrap();
                    let factor: Vec<u64> = (0..4)
                        .map(|i| (ze[i] + p - mulmod(mu, e[i], p)) % p)
                        .collect();
                    let factor: Vec<u64> = factor.iter().map(|&c| mulmod(c, inv, p)).collect();
                    piece = alg.mul(&piece, &factor);
                }
                next.push(piece);
            }
        }
        idems = next;
    }
    assert_eq!(idems.len(), g, "idempotent splitting incomplete");

    let mut out = Vec::new();
    for e in &idems {
        let ea = alg.image(e);
        let er: Mat = linalg::span(&radical.iter().map(|r| alg.mul(r, e)).collect(), p);
        let f = ea.len() - er.len();
        let ram = ea.len() / f;
        // M = R + (1 - e) A
        let one_minus: Vec<u64> = (0..4).map(|i| ((i == 0) as u64 + p - e[i]) % p).collect();
        let mut gens = radical.clone();
        gens.extend(alg.image(&one_minus));
        let m = linalg::span(&gens, p);
        debug_assert_eq!(m.len(), 4 - f);
        let (modulus, images) = residue_presentation(&alg, &m, f);
        // second generator filled in after the generator search
        out.push(RawPrime {
            e: ram as u32,
            f: f as u32,
            modulus,
            images,
            two_elem: QuarticElement::zero(),
        });
    }
    out
}

// Presents A/M as F_p[X]/(t) via a primitive element; images of gamma_j.
fn residue_presentation(alg: &Algebra, m: &Mat, f: usize) -> (Vec<u64>, [Res; 4]) {
    let p = alg.p;
    let candidates = (0..p.pow(4).min(100_000)).map(|mut c| {
        let mut v = vec![0u64; 4];
        for x in v.iter_mut() {
            *x = c % p;
            c /= p;
        }
        v
    });
    for z in candidates {
        let mut powers = vec![vec![1, 0, 0, 0]];
        for i in 1..=f {
            let nxt = alg.mul(&powers[i - 1], &z);
            powers.push(nxt);
        }
        let mut rows = m.clone();
        rows.extend(powers[..f].iter().cloned());
        if linalg::rank(&rows, p) != m.len() + f {
            continue;
        }
        let solve = |target: &[u64]| -> Vec<u64> {
            let c = linalg::solve_combination(&rows, target, p).expect("quotient basis spans A");
            c[m.len()..].to_vec()
        };
        let top = solve(&powers[f]);
        let mut modulus: Vec<u64> = top.iter().map(|&c| (p - c) % p).collect();
        modulus.push(1);
        let mut images = [[0u64; 4]; 4];
        for (j, img) in images.iter_mut().enumerate() {
            let c = solve(&unit_vec(j));
            img[..f].copy_from_slice(&c);
        }
        return (modulus, images);
    }
    panic!("no primitive element found for residue field");
}

/// Z-basis (rows, integral coordinates) of the kernel of the reduction map.
fn kernel_lattice(res: &ResidueField) -> Vec<[i128; 4]> {
    let p = res.p;
    let f = res.f as usize;
    let a: Mat = (0..f)
        .map(|k| (0..4).map(|j| res.images[j][k]).collect())
        .collect();
    let (r, pivots) = linalg::rref(&a, p);
    let mut basis = Vec::new();
    for c in 0..4 {
        let mut v = [0i128; 4];
        if pivots.contains(&c) {
            v[c] = p as i128;
        } else {
            v[c] = 1;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -(r[i][c] as i128);
            }
        }
        basis.push(v);
    }
    basis
}

/// Reduced generator of the prime with the given residue data and norm.
pub fn principal_generator(
    ctx: &FieldContext,
    res: &ResidueField,
) -> Result<QuarticElement, IdealError> {
    let norm = res.q;
    let basis = kernel_lattice(res);
    let xi_abs = ctx.unit.abs2.to_f64().sqrt();
    let mut bound = (4.0 * (norm as f64).sqrt() * xi_abs).ceil() as i128 + 2;
    for _ in 0..12 {
        if let Some(vs) = lattice::short_vectors(&basis, &ctx.gram, bound, 2_000_000) {
            let mut best: Option<(i128, OElem)> = None;
            for v in vs {
                let o = OElem(v);
                if ctx.onorm(&o) != BigInt::from(norm) {
                    continue;
                }
                let t = ctx.ot2(&o).unwrap_or(i128::MAX);
                let better = match &best {
                    None => true,
                    Some((bt, bo)) => (t, o.tiebreak_key()) < (*bt, bo.tiebreak_key()),
                };
                if better {
                    best = Some((t, o));
                }
            }
            if let Some((_, o)) = best {
                return normalize_generator(ctx, &ctx.from_oelem(&o));
            }
        }
        bound *= 2;
    }
    Err(IdealError::GeneratorNotFound { p: res.p, norm })
}

/// All primes above p, with generators, sorted by (norm, generator).
/// Generator of a prime with e = 1, f = 2: it is extended from a prime of
/// norm p in k = Q(sqrt D), found from u^2 - D v^2 = +-p (or +-4p).
fn subfield_generator(
    ctx: &FieldContext,
    res: &ResidueField,
) -> Result<QuarticElement, IdealError> {
    let d = ctx.d() as i128;
    let p = res.p as i128;
    let (scale, half) = if d % 4 == 1 { (4, true) } else { (1, false) };
    let not_found = || IdealError::GeneratorNotFound {
        p: res.p,
        norm: res.q,
    };
    for v in 0i128..=1 << 22 {
        for target in [scale * p, -scale * p] {
            let u2 = d * v * v + target;
            if u2 < 0 {
                continue;
            }
            let u = (u2 as u128).isqrt() as i128;
            if u * u != u2 || (half && (u - v) % 2 != 0) {
                continue;
            }
            let den = if half { 2 } else { 1 };
            for sv in [v, -v] {
                let z = Quad::new(
                    BigRational::new(u.into(), den.into()),
                    BigRational::new(sv.into(), den.into()),
                    ctx.d(),
                );
                let x = ctx.embed_quad(&z);
                let xo = ctx.to_oelem(&x)?;
                if ResidueField::is_zero(&res.reduce(&xo)) {
                    return normalize_generator(ctx, &x);
                }
            }
        }
    }
    Err(not_found())
}

fn normalize_generator(
    ctx: &FieldContext,
    x: &QuarticElement,
) -> Result<QuarticElement, IdealError> {
    let (mut alpha, _) = ctx.reduce_to_band(x)?;
    let ao = ctx.to_oelem(&alpha)?;
    if ao.0.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        alpha = alpha.neg();
    }
    Ok(alpha)
}

pub fn decompose_prime(ctx: &FieldContext, p: u64) -> Result<Vec<PrimeIdeal>, IdealError> {
    if !arith::is_prime_u64(p) {
        return Err(IdealError::NotPrime(p));
    }
    let index_divisible = (&ctx.index % BigInt::from(p)).is_zero();
    let raws = if index_divisible {
        decompose_slow(ctx, p)
    } else {
        decompose_fast(ctx, p)
    };
    let mut out = Vec::new();
    for raw in raws {
        let res = ResidueField::new(p, raw.modulus, raw.images);
        let alpha = match (raw.e, raw.f) {
            (1, 4) => normalize_generator(ctx, &QuarticElement::from_int(p as i64))?,
            (1, 2) => subfield_generator(ctx, &res)?,
            _ => principal_generator(ctx, &res)?,
        };
        let alpha_o = ctx.to_oelem(&alpha)?;
        let s1 = ctx.osigma(&alpha_o).ok_or(FieldError::Overflow)?;
        let s2 = ctx.osigma(&s1).ok_or(FieldError::Overflow)?;
        let s3 = ctx.osigma(&s2).ok_or(FieldError::Overflow)?;
        let cof = ctx
            .omul(&ctx.omul(&s1, &s2).ok_or(FieldError::Overflow)?, &s3)
            .ok_or(FieldError::Overflow)?;
        let two_elem = if raw.two_elem.is_zero() {
            alpha.clone()
        } else {
            raw.two_elem
        };
        out.push(PrimeIdeal {
            key: PrimeKey {
                norm: res.q,
                p,
                idx: 0,
            },
            p,
            e: raw.e,
            f: raw.f,
            two_elem,
            alpha,
            alpha_o,
            alpha_cofactor: cof,
            residue: res,
        });
    }
    out.sort_by(|a, b| {
        (a.key.norm, a.alpha_o.tiebreak_key()).cmp(&(b.key.norm, b.alpha_o.tiebreak_key()))
    });
    for (i, pr) in out.iter_mut().enumerate() {
        pr.key.idx = i as u32;
    }
    Ok(out)
}

/// Concurrent memo of decompositions.
pub struct PrimeCache {
    ctx: Arc<FieldContext>,
    map: RwLock<HashMap<u64, Arc<Vec<Arc<PrimeIdeal>>>>>,
    /// Pollard-rho iteration cap for norm factorisation.
    pub factor_effort: u64,
}

impl PrimeCache {
    pub fn new(ctx: Arc<FieldContext>) -> PrimeCache {
        PrimeCache {
            ctx,
            map: RwLock::new(HashMap::new()),
            factor_effort: 1 << 22,
        }
    }

    pub fn ctx(&self) -> &FieldContext {
        &self.ctx
    }

    pub fn ctx_arc(&self) -> Arc<FieldContext> {
        self.ctx.clone()
    }

    pub fn primes_over(&self, p: u64) -> Result<Arc<Vec<Arc<PrimeIdeal>>>, IdealError> {
        if let Some(v) = self.map.read().get(&p) {
            return Ok(v.clone());
        }
        let v: Arc<Vec<Arc<PrimeIdeal>>> = Arc::new(
            decompose_prime(&self.ctx, p)?
                .into_iter()
                .map(Arc::new)
                .collect(),
        );
        let mut w = self.map.write();
        Ok(w.entry(p).or_insert(v).clone())
    }

    pub fn prime(&self, key: &PrimeKey) -> Result<Arc<PrimeIdeal>, IdealError> {
        let v = self.primes_over(key.p)?;
        v.get(key.idx as usize)
            .cloned()
            .ok_or(IdealError::NotPrime(key.p))
    }
}

/// Primes of norm at most `max_norm`, sorted by key; position = ordinal.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    pub primes: Vec<Arc<PrimeIdeal>>,
}

impl PrimeTable {
    pub fn ordinal(&self, key: &PrimeKey) -> Option<usize> {
        self.primes.binary_search_by(|p| p.key.cmp(key)).ok()
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }
}

pub fn prime_ideals_up_to(cache: &PrimeCache, max_norm: u64) -> Result<PrimeTable, IdealError> {
    use rayon::prelude::*;
    let ps = arith::primes_up_to(max_norm);
    let lists: Vec<Arc<Vec<Arc<PrimeIdeal>>>> = ps
        .par_iter()
        .map(|&p| cache.primes_over(p))
        .collect::<Result<_, _>>()?;
    let mut primes: Vec<Arc<PrimeIdeal>> = lists
        .iter()
        .flat_map(|l| l.iter().filter(|pr| pr.key.norm <= max_norm).cloned())
        .collect();
    primes.sort_by_key(|p| p.key);
    Ok(PrimeTable { primes })
}

/// An integral ideal as a product of prime powers (ordinals into a table).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealEntry {
    pub norm: u64,
    pub factors: Vec<(usize, u32)>,
    pub generator: OElem,
}

/// Streams every integral ideal of norm <= bound in increasing norm order
/// (ties by factorisation). Ideals whose generator overflows are skipped.
pub fn for_each_ideal_up_to(
    ctx: &FieldContext,
    table: &PrimeTable,
    bound: u64,
    mut visit: impl FnMut(&IdealEntry),
) {
    // Depth-first over primes in table order, so each generator is built by
    // the same sequence of multiplications regardless of the bound.
    fn walk(
        ctx: &FieldContext,
        table: &PrimeTable,
        bound: u64,
        from: usize,
        norm: u64,
        fac: &mut Vec<(usize, u32)>,
        g: OElem,
        out: &mut Vec<IdealEntry>,
    ) {
        out.push(IdealEntry {
            norm,
            factors: fac.clone(),
            generator: g,
        });
        for ord in from..table.primes.len() {
            let pr = &table.primes[ord];
            let q = pr.key.norm;
            if q > bound / norm {
                break;
            }
            let mut m = norm * q;
            let mut e = 1;
            let mut gen = ctx.omul(&g, &pr.alpha_o);
            while let Some(gg) = gen {
                fac.push((ord, e));
                walk(ctx, table, bound, ord + 1, m, fac, gg, out);
                fac.pop();
                if q > bound / m {
                    break;
                }
                m *= q;
                e += 1;
                gen = ctx.omul(&gg, &pr.alpha_o);
            }
        }
    }
    if bound == 0 {
        return;
    }
    let mut all = Vec::new();
    walk(
        ctx,
        table,
        bound,
        0,
        1,
        &mut Vec::new(),
        OElem::ONE,
        &mut all,
    );
    all.sort_by(|a, b| (a.norm, &a.factors).cmp(&(b.norm, &b.factors)));
    for e in &all {
        visit(e);
    }
}

pub fn ideals_up_to(ctx: &FieldContext, table: &PrimeTable, bound: u64) -> Vec<IdealEntry> {
    let mut out = Vec::new();
    for_each_ideal_up_to(ctx, table, bound, |e| out.push(e.clone()));
    out
}

/// Residue generator: least integer primitive root when f = 1, else the
/// integral element of least height whose residue generates F_q^*.
pub fn residue_generator(
    ctx: &FieldContext,
    pr: &PrimeIdeal,
) -> Result<QuarticElement, IdealError> {
    let res = &pr.residue;
    if res.f == 1 {
        return Ok(QuarticElement::from_int(
            arith::least_primitive_root(res.p) as i64
        ));
    }
    for h in 1..=64i128 {
        for x in height_shell(h) {
            let o = OElem(x);
            if res.is_generator(&res.reduce(&o)) {
                return Ok(ctx.from_oelem(&o));
            }
        }
    }
    Err(IdealError::ResidueTooLarge)
}

/// Integral coordinate vectors of sup-norm exactly h, in a fixed order.
pub fn height_shell(h: i128) -> Vec<[i128; 4]> {
    let mut out = Vec::new();
    let r = -h..=h;
    for a in r.clone() {
        for b in r.clone() {
            for c in r.clone() {
                for d in r.clone() {
                    let v = [a, b, c, d];
                    if v.iter().map(|x| x.abs()).max() == Some(h) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out.sort_by_key(|v| (v.map(|x| x.unsigned_abs()), v.map(|x| x < 0)));
    out
}

/// Set S of prime ideals.
#[derive(Clone, Debug)]
pub enum PrimeSet {
    /// Every prime with key strictly below the given one.
    Before(PrimeKey),
    Keys(BTreeSet<PrimeKey>),
}

impl PrimeSet {
    pub fn contains(&self, k: &PrimeKey) -> bool {
        match self {
            PrimeSet::Before(b) => k < b,
            PrimeSet::Keys(s) => s.contains(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SUnitStatus {
    Yes,
    No,
    Unknown,
}

impl SUnitStatus {
    pub fn and(self, o: SUnitStatus) -> SUnitStatus {
        match (self, o) {
            (SUnitStatus::No, _) | (_, SUnitStatus::No) => SUnitStatus::No,
            (SUnitStatus::Yes, SUnitStatus::Yes) => SUnitStatus::Yes,
            _ => SUnitStatus::Unknown,
        }
    }
}

/// S-unit test for a nonzero integral element.
pub fn is_s_unit_o(cache: &PrimeCache, x: &OElem, s: &PrimeSet) -> SUnitStatus {
    if x.is_zero() {
        return SUnitStatus::No;
    }
    let n = cache.ctx().onorm(x);
    let Some(fac) = factor_bigint_abs(&n, cache.factor_effort) else {
        return SUnitStatus::Unknown;
    };
    for (l, _) in fac {
        let Ok(primes) = cache.primes_over(l) else {
            return SUnitStatus::Unknown;
        };
        for pr in primes.iter() {
            if !s.contains(&pr.key) && pr.contains(x) {
                return SUnitStatus::No;
            }
        }
    }
    SUnitStatus::Yes
}

/// S-unit test for any nonzero element of F.
pub fn is_s_unit(cache: &PrimeCache, x: &QuarticElement, s: &PrimeSet) -> SUnitStatus {
    if x.is_zero() {
        return SUnitStatus::No;
    }
    let ctx = cache.ctx();
    let y = ctx.to_integral(x);
    if let Ok(o) = y.to_oelem() {
        return is_s_unit_o(cache, &o, s);
    }
    let d = y.denominator();
    let num = ctx.from_integral(&IntegralCoords(
        y.0.map(|c| c * BigRational::from_integer(d.clone())),
    ));
    let n = ctx.norm(&num).to_integer();
    let (Some(f1), Some(f2)) = (
        factor_bigint_abs(&n, cache.factor_effort),
        factor_bigint_abs(&d, cache.factor_effort),
    ) else {
        return SUnitStatus::Unknown;
    };
    let ls: BTreeSet<u64> = f1.iter().chain(&f2).map(|&(l, _)| l).collect();
    for l in ls {
        let Ok(primes) = cache.primes_over(l) else {
            return SUnitStatus::Unknown;
        };
        for pr in primes.iter() {
            if s.contains(&pr.key) {
                continue;
            }
            match pr.valuation(ctx, x) {
                Ok(0) => {}
                Ok(_) => return SUnitStatus::No,
                Err(_) => return SUnitStatus::Unknown,
            }
        }
    }
    SUnitStatus::Yes
}

/// Whether every prime factor of the integer m lies in S.
pub fn integer_is_s_unit(cache: &PrimeCache, m: i128, s: &PrimeSet) -> SUnitStatus {
    if m == 0 {
        return SUnitStatus::No;
    }
    let fac = arith::factor_biguint(
        &num_bigint::BigUint::from(m.unsigned_abs()),
        cache.factor_effort,
    );
    let Some(fac) = fac else {
        return SUnitStatus::Unknown;
    };
    for (l, _) in fac {
        let Ok(primes) = cache.primes_over(l) else {
            return SUnitStatus::Unknown;
        };
        if primes.iter().any(|pr| !s.contains(&pr.key)) {
            return SUnitStatus::No;
        }
    }
    SUnitStatus::Yes
}

pub fn norm_u64(n: &BigInt) -> Option<u64> {
    n.abs().to_u64()
}

pub fn powmod_u64(a: u64, e: u64, m: u64) -> u64 {
    powmod(a, e, m)
}
