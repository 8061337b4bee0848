//! Exact arithmetic in F = Q(beta), beta = i*sqrt(D + B*sqrt(D)).
//!
//! Elements are kept over the power basis 1, beta, beta^2, beta^3. The
//! integral basis is a view through a rational transition matrix. A second,
//! fixed-width representation [`OElem`] (integral-basis coordinates in
//! `i128`) carries the hot loops of the verifier.

use crate::arith::{self, is_square_bigint};
use crate::real::Real;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("invalid field parameters: {0}")]
    InvalidParams(String),
    #[error("(B={b}, C={c}, D={d}) is not one of the seven class-number-one fields")]
    OutsideClassNumberOneList { b: i64, c: i64, d: i64 },
    #[error("precision of {0} bits cannot separate the embeddings")]
    PrecisionTooSmall(u32),
    #[error("integral basis discriminant {trace} disagrees with conductor-discriminant value {conductor}")]
    BasisDiscriminantMismatch { trace: BigInt, conductor: BigInt },
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow in fixed-width arithmetic")]
    Overflow,
    #[error("element is not integral")]
    NotIntegral,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("field has roots of unity beyond +-1")]
    UnexpectedTorsion,
}

/// Parameters (A, B, C, D) of F = Q(sqrt(A(D + B sqrt D))). Only A = -1 is supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldParams {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// The seven imaginary cyclic quartic fields of class number one, as (B, C, D).
pub const CLASS_NUMBER_ONE: [(i64, i64, i64); 7] = [
    (2, 1, 5),
    (2, 3, 13),
    (1, 1, 2),
    (2, 5, 29),
    (6, 1, 37),
    (2, 7, 53),
    (6, 5, 61),
];

impl FieldParams {
    /// Validates D = B^2 + C^2, D squarefree, and the class-number-one list.
    pub fn new(b: i64, c: i64, d: i64) -> Result<Self, FieldError> {
        Self::with_override(b, c, d, false)
    }

    /// As [`FieldParams::new`]; `allow_any_class_number` skips the list check.
    pub fn with_override(
        b: i64,
        c: i64,
        d: i64,
        allow_any_class_number: bool,
    ) -> Result<Self, FieldError> {
        if b <= 0 || c <= 0 || d <= 1 {
            return Err(FieldError::InvalidParams(
                "B, C must be positive and D > 1".into(),
            ));
        }
        if b.checked_mul(b).and_then(|x| x.checked_add(c * c)) != Some(d) {
            return Err(FieldError::InvalidParams(format!(
                "D = {d} is not B^2 + C^2 = {}",
                b * b + c * c
            )));
        }
        if !arith::is_squarefree(d as u64) {
            return Err(FieldError::InvalidParams(format!(
                "D = {d} is not squarefree"
            )));
        }
        if d > 1 << 20 {
            return Err(FieldError::InvalidParams("D too large".into()));
        }
        let p = FieldParams { a: -1, b, c, d };
        if !allow_any_class_number && !p.is_class_number_one() {
            return Err(FieldError::OutsideClassNumberOneList { b, c, d });
        }
        Ok(p)
    }

    pub fn is_class_number_one(&self) -> bool {
        CLASS_NUMBER_ONE.contains(&(self.b, self.c, self.d))
    }

    pub fn all_class_number_one() -> Vec<FieldParams> {
        CLASS_NUMBER_ONE
            .iter()
            .map(|&(b, c, d)| FieldParams { a: -1, b, c, d })
            .collect()
    }
}

impl fmt::Display for FieldParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B={} C={} D={}", self.b, self.c, self.d)
    }
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn qr(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Element u + v*sqrt(D) of the real quadratic subfield k = Q(sqrt D).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Quad {
    pub u: BigRational,
    pub v: BigRational,
    pub d: i64,
}

impl Quad {
    pub fn new(u: BigRational, v: BigRational, d: i64) -> Quad {
        Quad { u, v, d }
    }

    pub fn rational(u: BigRational, d: i64) -> Quad {
        Quad {
            u,
            v: BigRational::zero(),
            d,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    pub fn add(&self, o: &Quad) -> Quad {
        Quad::new(&self.u + &o.u, &self.v + &o.v, self.d)
    }

    pub fn sub(&self, o: &Quad) -> Quad {
        Quad::new(&self.u - &o.u, &self.v - &o.v, self.d)
    }

    pub fn mul(&self, o: &Quad) -> Quad {
        let dd = q(self.d);
        Quad::new(
            &self.u * &o.u + &dd * &self.v * &o.v,
            &self.u * &o.v + &self.v * &o.u,
            self.d,
        )
    }

    pub fn scale(&self, c: &BigRational) -> Quad {
        Quad::new(&self.u * c, &self.v * c, self.d)
    }

    pub fn conj(&self) -> Quad {
        Quad::new(self.u.clone(), -&self.v, self.d)
    }

    pub fn norm(&self) -> BigRational {
        &self.u * &self.u - q(self.d) * &self.v * &self.v
    }

    pub fn inv(&self) -> Option<Quad> {
        let n = self.norm();
        if n.is_zero() {
            return None;
        }
        Some(self.conj().scale(&n.recip()))
    }

    /// Exact sign of u + v*sqrt(D) (real embedding with sqrt(D) > 0).
    pub fn sign(&self) -> Ordering {
        let su = self.u.cmp(&BigRational::zero());
        let sv = self.v.cmp(&BigRational::zero());
        if su == sv || sv == Ordering::Equal {
            return su;
        }
        if su == Ordering::Equal {
            return sv;
        }
        // Opposite signs: compare u^2 with D v^2.
        let lhs = &self.u * &self.u;
        let rhs = q(self.d) * &self.v * &self.v;
        match lhs.cmp(&rhs) {
            Ordering::Greater => su,
            Ordering::Less => sv,
            Ordering::Equal => Ordering::Equal,
        }
    }

    pub fn cmp_value(&self, o: &Quad) -> Ordering {
        self.sub(o).sign()
    }

    pub fn to_real(&self, prec: u32) -> Real {
        let s = Real::from_int(self.d, prec).sqrt();
        Real::from_rational(&self.u, prec).add(&Real::from_rational(&self.v, prec).mul(&s))
    }

    pub fn to_f64(&self) -> f64 {
        self.u.to_f64().unwrap_or(f64::NAN)
            + self.v.to_f64().unwrap_or(f64::NAN) * (self.d as f64).sqrt()
    }

    /// Square root inside k, if one exists.
    pub fn sqrt_in_k(&self) -> Option<Quad> {
        if self.is_zero() {
            return Some(self.clone());
        }
        let d = self.d;
        if self.v.is_zero() {
            if let Some(r) = rational_sqrt(&self.u) {
                return Some(Quad::rational(r, d));
            }
            if let Some(r) = rational_sqrt(&(&self.u / q(d))) {
                return Some(Quad::new(BigRational::zero(), r, d));
            }
            return None;
        }
        let m = rational_sqrt(&self.norm())?;
        for sgn in [1i64, -1] {
            let s2 = (&self.u + q(sgn) * &m) / q(2);
            if let Some(s) = rational_sqrt(&s2) {
                if s.is_zero() {
                    continue;
                }
                let t = &self.v / (q(2) * &s);
                let cand = Quad::new(s, t, d);
                if &cand.mul(&cand) == self {
                    return Some(cand);
                }
            }
        }
        None
    }
}

fn rational_sqrt(x: &BigRational) -> Option<BigRational> {
    if x.is_negative() {
        return None;
    }
    let n = is_square_bigint(x.numer())?;
    let d = is_square_bigint(x.denom())?;
    Some(BigRational::new(n, d))
}

/// x0 + x1*beta + x2*beta^2 + x3*beta^3 with exact rational coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuarticElement {
    pub coords: [BigRational; 4],
}

impl QuarticElement {
    pub fn new(coords: [BigRational; 4]) -> Self {
        QuarticElement { coords }
    }

    pub fn from_ints(c: [i64; 4]) -> Self {
        QuarticElement { coords: c.map(q) }
    }

    pub fn from_rational(r: BigRational) -> Self {
        QuarticElement {
            coords: [
                r,
                BigRational::zero(),
                BigRational::zero(),
                BigRational::zero(),
            ],
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(q(n))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn beta() -> Self {
        Self::from_ints([0, 1, 0, 0])
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn is_rational(&self) -> bool {
        self.coords[1..].iter().all(|c| c.is_zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        QuarticElement {
            coords: std::array::from_fn(|i| &self.coords[i] + &o.coords[i]),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        QuarticElement {
            coords: std::array::from_fn(|i| &self.coords[i] - &o.coords[i]),
        }
    }

    pub fn neg(&self) -> Self {
        QuarticElement {
            coords: std::array::from_fn(|i| -&self.coords[i]),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        QuarticElement {
            coords: std::array::from_fn(|i| &self.coords[i] * c),
        }
    }

    /// Complex conjugation, which is sigma^2: beta -> -beta.
    pub fn conj(&self) -> Self {
        let c = &self.coords;
        QuarticElement::new([c[0].clone(), -&c[1], c[2].clone(), -&c[3]])
    }
}

impl fmt::Display for QuarticElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coords
            .iter()
            .map(|c| format!("{}/{}", c.numer(), c.denom()))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for QuarticElement {
    type Err = FieldError;

    /// Parses four `n/d` tokens (a bare integer is accepted as `n/1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(FieldError::Parse(format!(
                "expected 4 coordinates, found {}",
                toks.len()
            )));
        }
        let mut out: Vec<BigRational> = Vec::with_capacity(4);
        for t in toks {
            out.push(parse_rational(t)?);
        }
        Ok(QuarticElement::new([
            out[0].clone(),
            out[1].clone(),
            out[2].clone(),
            out[3].clone(),
        ]))
    }
}

pub fn parse_rational(t: &str) -> Result<BigRational, FieldError> {
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n, d),
        None => (t, "1"),
    };
    let n =
        BigInt::from_str(n).map_err(|_| FieldError::Parse(format!("bad numerator in `{t}`")))?;
    let d =
        BigInt::from_str(d).map_err(|_| FieldError::Parse(format!("bad denominator in `{t}`")))?;
    if d.is_zero() {
        return Err(FieldError::Parse(format!("zero denominator in `{t}`")));
    }
    Ok(BigRational::new(n, d))
}

/// Coordinates over the integral basis gamma_0..gamma_3.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegralCoords(pub [BigRational; 4]);

impl IntegralCoords {
    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|c| c.is_integer())
    }

    pub fn to_oelem(&self) -> Result<OElem, FieldError> {
        if !self.is_integral() {
            return Err(FieldError::NotIntegral);
        }
        let mut out = [0i128; 4];
        for (o, c) in out.iter_mut().zip(&self.0) {
            *o = c.numer().to_i128().ok_or(FieldError::Overflow)?;
        }
        Ok(OElem(out))
    }

    /// Least positive integer d with d * self integral.
    pub fn denominator(&self) -> BigInt {
        self.0
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }
}

/// Algebraic integer in integral-basis coordinates (fixed width).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OElem(pub [i128; 4]);

impl OElem {
    pub const ONE: OElem = OElem([1, 0, 0, 0]);
    pub const MINUS_ONE: OElem = OElem([-1, 0, 0, 0]);
    pub const ZERO: OElem = OElem([0, 0, 0, 0]);

    pub fn from_int(n: i128) -> OElem {
        OElem([n, 0, 0, 0])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn checked_add(&self, o: &OElem) -> Option<OElem> {
        let mut r = [0i128; 4];
        for i in 0..4 {
            r[i] = self.0[i].checked_add(o.0[i])?;
        }
        Some(OElem(r))
    }

    pub fn checked_sub(&self, o: &OElem) -> Option<OElem> {
        let mut r = [0i128; 4];
        for i in 0..4 {
            r[i] = self.0[i].checked_sub(o.0[i])?;
        }
        Some(OElem(r))
    }

    pub fn checked_scale(&self, c: i128) -> Option<OElem> {
        let mut r = [0i128; 4];
        for i in 0..4 {
            r[i] = self.0[i].checked_mul(c)?;
        }
        Some(OElem(r))
    }

    pub fn neg(&self) -> OElem {
        OElem(self.0.map(|x| -x))
    }

    /// Tie-break key: coordinates by magnitude, positive before negative.
    pub fn tiebreak_key(&self) -> [(u128, bool); 4] {
        self.0.map(|x| (x.unsigned_abs(), x < 0))
    }

    pub fn to_compact(&self) -> String {
        format!("{} {} {} {}", self.0[0], self.0[1], self.0[2], self.0[3])
    }

    pub fn parse_compact(s: &str) -> Result<OElem, FieldError> {
        let v: Vec<i128> = s
            .split_whitespace()
            .map(|t| {
                t.parse::<i128>()
                    .map_err(|_| FieldError::Parse(format!("bad integer `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        if v.len() != 4 {
            return Err(FieldError::Parse("expected 4 integral coordinates".into()));
        }
        Ok(OElem([v[0], v[1], v[2], v[3]]))
    }
}

/// Which case of the integral-basis lemma applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisCase {
    I,
    II,
    III,
    IV,
    V,
}

#[derive(Clone, Debug)]
pub struct FundamentalUnit {
    pub xi: QuarticElement,
    pub xi_o: OElem,
    pub xi_inv_o: OElem,
    /// Fundamental unit of Q(sqrt D).
    pub eps_d: Quad,
    /// N_{k/Q}(eps_d).
    pub eps_d_norm: i64,
    /// |xi|^2 at the first embedding, as an element of k.
    pub abs2: Quad,
    /// 2 when xi is a square root of +-eps_d, else 1.
    pub hasse_index: u8,
}

/// Immutable description of F shared by every computation.
#[derive(Clone, Debug)]
pub struct FieldContext {
    pub params: FieldParams,
    pub precision: u32,
    /// Minimal polynomial x^4 + c2 x^2 + c0.
    pub c2: i64,
    pub c0: i64,
    pub basis_case: BasisCase,
    /// Row j = gamma_j in power-basis coordinates.
    pub gamma: [[BigRational; 4]; 4],
    gamma_inv: [[BigRational; 4]; 4],
    /// Column k = sigma(beta)^k in power-basis coordinates.
    sigma_pow: [[BigRational; 4]; 4],
    /// gamma_i * gamma_j in integral coordinates.
    pub mult: [[[i128; 4]; 4]; 4],
    /// sigma(gamma_j) in integral coordinates (row j).
    pub sigma_int: [[i128; 4]; 4],
    /// T2 Gram matrix Tr(gamma_i * conj(gamma_j)).
    pub gram: [[i128; 4]; 4],
    pub discriminant: BigInt,
    pub conductor: u64,
    pub quadratic_disc: i64,
    /// [O_F : Z[beta]].
    pub index: BigInt,
    pub a: Real,
    pub b: Real,
    pub unit: FundamentalUnit,
    /// Number of roots of unity in F.
    pub torsion: u32,
}

fn mat_inverse(m: &[[BigRational; 4]; 4]) -> Option<[[BigRational; 4]; 4]> {
    let mut a: Vec<Vec<BigRational>> = m.iter().map(|r| r.to_vec()).collect();
    let mut inv: Vec<Vec<BigRational>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { q(1) } else { q(0) }).collect())
        .collect();
    for c in 0..4 {
        let piv = (c..4).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, piv);
        inv.swap(c, piv);
        let f = a[c][c].recip();
        for j in 0..4 {
            a[c][j] = &a[c][j] * &f;
            inv[c][j] = &inv[c][j] * &f;
        }
        for r in 0..4 {
            if r != c && !a[r][c].is_zero() {
                let g = a[r][c].clone();
                for j in 0..4 {
                    let t = &g * &a[c][j];
                    a[r][j] -= t;
                    let t = &g * &inv[c][j];
                    inv[r][j] -= t;
                }
            }
        }
    }
    Some(std::array::from_fn(|i| {
        std::array::from_fn(|j| inv[i][j].clone())
    }))
}

pub(crate) fn det_rational(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let mut det = q(1);
    for c in 0..n {
        let Some(piv) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return q(0);
        };
        if piv != c {
            a.swap(c, piv);
            det = -det;
        }
        det *= &a[c][c];
        for r in c + 1..n {
            if !a[r][c].is_zero() {
                let f = &a[r][c] / &a[c][c];
                for j in c..n {
                    let t = &f * &a[c][j];
                    a[r][j] -= t;
                }
            }
        }
    }
    det
}

// Fraction-free determinant of a 4x4 integer matrix; None on overflow.
fn det4_i128(m: &[[i128; 4]; 4]) -> Option<i128> {
    let mut a = *m;
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..3 {
        if a[k][k] == 0 {
            let piv = (k + 1..4).find(|&r| a[r][k] != 0);
            match piv {
                None => return Some(0),
                Some(p) => {
                    a.swap(k, p);
                    sign = -sign;
                }
            }
        }
        for i in k + 1..4 {
            for j in k + 1..4 {
                let t = a[i][j]
                    .checked_mul(a[k][k])?
                    .checked_sub(a[i][k].checked_mul(a[k][j])?)?;
                a[i][j] = t / prev;
            }
        }
        prev = a[k][k];
    }
    a[3][3].checked_mul(sign)
}

// Fraction-free (Bareiss) determinant over BigInt.
fn det4_big(m: &[[i128; 4]; 4]) -> BigInt {
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let mut neg = false;
    let mut prev = BigInt::one();
    for k in 0..3 {
        if a[k][k].is_zero() {
            match (k + 1..4).find(|&r| !a[r][k].is_zero()) {
                None => return BigInt::zero(),
                Some(p) => {
                    a.swap(k, p);
                    neg = !neg;
                }
            }
        }
        for i in k + 1..4 {
            for j in k + 1..4 {
                let t = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = t / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[3][3].clone();
    if neg {
        -d
    } else {
        d
    }
}

impl FieldContext {
    /// Builds the field, selects and verifies the integral basis, and finds xi.
    pub fn new(params: FieldParams, precision: u32) -> Result<FieldContext, FieldError> {
        if params.a != -1 {
            return Err(FieldError::InvalidParams("only A = -1 is supported".into()));
        }
        let (bb, cc, dd) = (params.b, params.c, params.d);
        let c2 = 2 * dd;
        let c0 = dd * dd - dd * bb * bb;

        let sqrt_d = Real::from_int(dd, precision).sqrt();
        let bsd = Real::from_int(bb, precision).mul(&sqrt_d);
        let dr = Real::from_int(dd, precision);
        let a2 = dr.add(&bsd);
        let b2 = dr.sub(&bsd);
        if !b2.is_positive() || a2.overlaps(&b2) {
            return Err(FieldError::PrecisionTooSmall(precision));
        }
        let a = a2.sqrt();
        let b = b2.sqrt();

        let bc = bb * cc;
        // ((D+B^2)/(BC)) beta + beta^3/(BC) takes the value -i*b at beta = i*a, so
        // b' = i*b of the basis lemma is its negative, which is also sigma(beta).
        let beta3 = QuarticElement::new([q(0), qr(dd + bb * bb, bc), q(0), qr(1, bc)]);
        let bprime = beta3.neg();
        let sqrt_d_el = QuarticElement::new([qr(-dd, bb), q(0), qr(-1, bb), q(0)]);
        let one = QuarticElement::one();
        let beta = QuarticElement::beta();

        let case = if dd % 2 == 0 {
            BasisCase::I
        } else if bb % 2 != 0 {
            BasisCase::II
        } else if (params.a + bb).rem_euclid(4) == 3 {
            BasisCase::III
        } else if (params.a - cc).rem_euclid(4) == 0 {
            BasisCase::IV
        } else {
            BasisCase::V
        };
        let half = qr(1, 2);
        let quarter = qr(1, 4);
        let omega = one.add(&sqrt_d_el).scale(&half);
        let basis: [QuarticElement; 4] = match case {
            BasisCase::I => [one.clone(), sqrt_d_el.clone(), beta.clone(), bprime.clone()],
            BasisCase::II => [one.clone(), omega, beta.clone(), bprime.clone()],
            BasisCase::III => [
                one.clone(),
                omega,
                beta.add(&bprime).scale(&half),
                beta.sub(&bprime).scale(&half),
            ],
            BasisCase::IV => [
                one.clone(),
                omega,
                one.add(&sqrt_d_el).add(&beta).add(&bprime).scale(&quarter),
                one.sub(&sqrt_d_el).add(&beta).sub(&bprime).scale(&quarter),
            ],
            BasisCase::V => [
                one.clone(),
                omega,
                one.add(&sqrt_d_el).add(&beta).sub(&bprime).scale(&quarter),
                one.sub(&sqrt_d_el).add(&beta).add(&bprime).scale(&quarter),
            ],
        };
        let gamma: [[BigRational; 4]; 4] = std::array::from_fn(|i| basis[i].coords.clone());
        let gamma_inv = mat_inverse(&gamma)
            .ok_or_else(|| FieldError::InvalidParams("singular basis".into()))?;

        let dummy_unit = FundamentalUnit {
            xi: one.clone(),
            xi_o: OElem::ONE,
            xi_inv_o: OElem::ONE,
            eps_d: Quad::rational(q(1), dd),
            eps_d_norm: 1,
            abs2: Quad::rational(q(1), dd),
            hasse_index: 1,
        };
        let mut ctx = FieldContext {
            params,
            precision,
            c2,
            c0,
            basis_case: case,
            gamma,
            gamma_inv,
            sigma_pow: std::array::from_fn(|_| std::array::from_fn(|_| q(0))),
            mult: [[[0; 4]; 4]; 4],
            sigma_int: [[0; 4]; 4],
            gram: [[0; 4]; 4],
            discriminant: BigInt::zero(),
            conductor: 0,
            quadratic_disc: 0,
            index: BigInt::zero(),
            a,
            b,
            unit: dummy_unit,
            torsion: 2,
        };

        // Column k holds sigma(beta)^k.
        let sb = bprime.clone();
        let mut pw = one.clone();
        for k in 0..4 {
            for j in 0..4 {
                ctx.sigma_pow[j][k] = pw.coords[j].clone();
            }
            pw = ctx.mul(&pw, &sb);
        }

        for i in 0..4 {
            for j in 0..4 {
                let prod = ctx.mul(&basis[i], &basis[j]);
                let ic = ctx.to_integral(&prod);
                let o = ic.to_oelem().map_err(|_| {
                    FieldError::InvalidParams(format!(
                        "basis product gamma_{i}*gamma_{j} not integral"
                    ))
                })?;
                ctx.mult[i][j] = o.0;
            }
            let s = ctx
                .to_integral(&ctx.sigma(&basis[i]))
                .to_oelem()
                .map_err(|_| {
                    FieldError::InvalidParams("sigma does not preserve the integral basis".into())
                })?;
            ctx.sigma_int[i] = s.0;
        }

        let trace_rows: Vec<Vec<BigRational>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| ctx.trace(&ctx.mul(&basis[i], &basis[j])))
                    .collect()
            })
            .collect();
        let disc = det_rational(&trace_rows);
        let (conductor, kdisc) = conductor_of(&params, case);
        let cd = BigInt::from(conductor).pow(2) * BigInt::from(kdisc);
        if !disc.is_integer() || disc.to_integer() != cd {
            return Err(FieldError::BasisDiscriminantMismatch {
                trace: disc.to_integer(),
                conductor: cd,
            });
        }
        ctx.discriminant = cd;
        ctx.conductor = conductor;
        ctx.quadratic_disc = kdisc;
        // disc(minpoly) = 256 D^3 B^4 C^2 = index^2 * disc(F)
        let poly_disc = BigInt::from(256)
            * BigInt::from(dd).pow(3)
            * BigInt::from(bb).pow(4)
            * BigInt::from(cc).pow(2);
        let (idx2, r) = poly_disc.div_rem(&ctx.discriminant);
        debug_assert!(r.is_zero());
        ctx.index = idx2.sqrt();

        for i in 0..4 {
            for j in 0..4 {
                let t = ctx.trace(&ctx.mul(&basis[i], &basis[j].conj()));
                ctx.gram[i][j] = t.to_integer().to_i128().expect("small Gram entry");
            }
        }

        ctx.torsion = ctx.torsion_order()?;
        ctx.unit = ctx.compute_fundamental_unit()?;
        Ok(ctx)
    }

    pub fn d(&self) -> i64 {
        self.params.d
    }

    /// Product with reduction modulo the minimal polynomial.
    pub fn mul(&self, x: &QuarticElement, y: &QuarticElement) -> QuarticElement {
        let mut t: Vec<BigRational> = vec![q(0); 7];
        for i in 0..4 {
            if x.coords[i].is_zero() {
                continue;
            }
            for j in 0..4 {
                if y.coords[j].is_zero() {
                    continue;
                }
                t[i + j] += &x.coords[i] * &y.coords[j];
            }
        }
        let c2 = q(self.c2);
        let c0 = q(self.c0);
        for k in (4..7).rev() {
            let top = std::mem::replace(&mut t[k], q(0));
            if top.is_zero() {
                continue;
            }
            // beta^k = beta^(k-4) * (-c2 beta^2 - c0)
            t[k - 2] -= &top * &c2;
            t[k - 4] -= &top * &c0;
        }
        QuarticElement::new([t[0].clone(), t[1].clone(), t[2].clone(), t[3].clone()])
    }

    pub fn pow(&self, x: &QuarticElement, e: i64) -> Result<QuarticElement, FieldError> {
        let mut base = if e < 0 { self.inv(x)? } else { x.clone() };
        let mut n = e.unsigned_abs();
        let mut r = QuarticElement::one();
        while n > 0 {
            if n & 1 == 1 {
                r = self.mul(&r, &base);
            }
            base = self.mul(&base, &base);
            n >>= 1;
        }
        Ok(r)
    }

    /// x * conj(x) as an element of k (its value at the first embedding is |x|^2).
    pub fn abs2(&self, x: &QuarticElement) -> Quad {
        let p = self.mul(x, &x.conj());
        let dd = q(self.params.d);
        let bb = q(self.params.b);
        Quad::new(
            &p.coords[0] - &dd * &p.coords[2],
            -(&bb * &p.coords[2]),
            self.params.d,
        )
    }

    /// |sigma(x)|^2 as an element of k.
    pub fn abs2_sigma(&self, x: &QuarticElement) -> Quad {
        self.abs2(x).conj()
    }

    pub fn inv(&self, x: &QuarticElement) -> Result<QuarticElement, FieldError> {
        if x.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        let n = self.abs2(x).inv().ok_or(FieldError::DivisionByZero)?;
        Ok(self.mul(&x.conj(), &self.embed_quad(&n)))
    }

    pub fn div(
        &self,
        x: &QuarticElement,
        y: &QuarticElement,
    ) -> Result<QuarticElement, FieldError> {
        Ok(self.mul(x, &self.inv(y)?))
    }

    /// Embeds u + v*sqrt(D) into F via sqrt(D) = -D/B - beta^2/B.
    pub fn embed_quad(&self, z: &Quad) -> QuarticElement {
        let bb = q(self.params.b);
        let dd = q(self.params.d);
        QuarticElement::new([&z.u - &z.v * &dd / &bb, q(0), -(&z.v / &bb), q(0)])
    }

    pub fn norm(&self, x: &QuarticElement) -> BigRational {
        self.abs2(x).norm()
    }

    pub fn trace(&self, x: &QuarticElement) -> BigRational {
        q(4) * &x.coords[0] - q(2 * self.c2) * &x.coords[2]
    }

    pub fn sigma(&self, x: &QuarticElement) -> QuarticElement {
        QuarticElement::new(std::array::from_fn(|j| {
            (0..4).fold(q(0), |acc, k| acc + &self.sigma_pow[j][k] * &x.coords[k])
        }))
    }

    pub fn to_integral(&self, x: &QuarticElement) -> IntegralCoords {
        IntegralCoords(std::array::from_fn(|j| {
            (0..4).fold(q(0), |acc, i| acc + &x.coords[i] * &self.gamma_inv[i][j])
        }))
    }

    pub fn from_integral(&self, y: &IntegralCoords) -> QuarticElement {
        QuarticElement::new(std::array::from_fn(|i| {
            (0..4).fold(q(0), |acc, j| acc + &y.0[j] * &self.gamma[j][i])
        }))
    }

    pub fn is_integral(&self, x: &QuarticElement) -> bool {
        self.to_integral(x).is_integral()
    }

    pub fn to_oelem(&self, x: &QuarticElement) -> Result<OElem, FieldError> {
        self.to_integral(x).to_oelem()
    }

    pub fn from_oelem(&self, x: &OElem) -> QuarticElement {
        self.from_integral(&IntegralCoords(
            x.0.map(|c| BigRational::from_integer(BigInt::from(c))),
        ))
    }

    /// Product in integral coordinates; `None` on overflow.
    pub fn omul(&self, x: &OElem, y: &OElem) -> Option<OElem> {
        let mut r = [0i128; 4];
        for i in 0..4 {
            if x.0[i] == 0 {
                continue;
            }
            for j in 0..4 {
                if y.0[j] == 0 {
                    continue;
                }
                let c = x.0[i].checked_mul(y.0[j])?;
                let t = &self.mult[i][j];
                for k in 0..4 {
                    if t[k] != 0 {
                        r[k] = r[k].checked_add(c.checked_mul(t[k])?)?;
                    }
                }
            }
        }
        Some(OElem(r))
    }

    pub fn opow(&self, x: &OElem, mut e: u64) -> Option<OElem> {
        let mut r = OElem::ONE;
        let mut b = *x;
        while e > 0 {
            if e & 1 == 1 {
                r = self.omul(&r, &b)?;
            }
            e >>= 1;
            if e > 0 {
                b = self.omul(&b, &b)?;
            }
        }
        Some(r)
    }

    pub fn osigma(&self, x: &OElem) -> Option<OElem> {
        let mut r = [0i128; 4];
        for j in 0..4 {
            for k in 0..4 {
                r[k] = r[k].checked_add(x.0[j].checked_mul(self.sigma_int[j][k])?)?;
            }
        }
        Some(OElem(r))
    }

    /// Norm N_{F/Q}, exact (always positive for nonzero x since F is totally imaginary).
    pub fn onorm(&self, x: &OElem) -> BigInt {
        if let Some(n) = self.onorm_small(x) {
            return BigInt::from(n);
        }
        let mut m = [[0i128; 4]; 4];
        let mut overflow = false;
        'outer: for j in 0..4 {
            let mut e = [0i128; 4];
            e[j] = 1;
            match self.omul(x, &OElem(e)) {
                Some(col) => {
                    for i in 0..4 {
                        m[i][j] = col.0[i];
                    }
                }
                None => {
                    overflow = true;
                    break 'outer;
                }
            }
        }
        if !overflow {
            if let Some(d) = det4_i128(&m) {
                return BigInt::from(d);
            }
            return det4_big(&m);
        }
        self.norm(&self.from_oelem(x)).to_integer()
    }

    // x sigma^2(x) lies in k, and its product with its conjugate is N(x).
    fn onorm_small(&self, x: &OElem) -> Option<i128> {
        let s1 = self.osigma(x)?;
        let s2 = self.osigma(&s1)?;
        let y = self.omul(x, &s2)?;
        let n = self.omul(&y, &self.osigma(&y)?)?;
        debug_assert_eq!(&n.0[1..], &[0, 0, 0]);
        Some(n.0[0])
    }

    /// T2(x) = sum over the four embeddings of |x|^2, exact.
    pub fn ot2(&self, x: &OElem) -> Option<i128> {
        let mut s = 0i128;
        for i in 0..4 {
            if x.0[i] == 0 {
                continue;
            }
            for j in 0..4 {
                let t = x.0[i].checked_mul(x.0[j])?.checked_mul(self.gram[i][j])?;
                s = s.checked_add(t)?;
            }
        }
        Some(s)
    }

    /// Enclosures of (|x|, |sigma(x)|) at the context precision.
    pub fn abs_embeddings(&self, x: &QuarticElement) -> (Real, Real) {
        self.abs_embeddings_at(x, self.precision)
    }

    pub fn abs_embeddings_at(&self, x: &QuarticElement, prec: u32) -> (Real, Real) {
        let t = self.abs2(x);
        (t.to_real(prec).sqrt(), t.conj().to_real(prec).sqrt())
    }

    /// |sigma(xi)| <= |sigma(x)/x| <= |xi|, decided exactly.
    pub fn in_unit_band(&self, x: &QuarticElement) -> bool {
        self.band_position(x) == Ordering::Equal
    }

    /// Less when |sigma(x)/x| < |sigma(xi)|, Greater when above |xi|.
    pub fn band_position(&self, x: &QuarticElement) -> Ordering {
        let t = self.abs2(x);
        let ts = t.conj();
        let big = &self.unit.abs2;
        let small = big.conj();
        if ts.cmp_value(&small.mul(&t)) == Ordering::Less {
            Ordering::Less
        } else if ts.cmp_value(&big.mul(&t)) == Ordering::Greater {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }

    /// Multiplies by powers of xi until the band condition holds; returns (x*xi^k, k).
    pub fn reduce_to_band(&self, x: &QuarticElement) -> Result<(QuarticElement, i64), FieldError> {
        let mut y = x.clone();
        let mut k = 0i64;
        let xi = &self.unit.xi;
        let xi_inv = self.inv(xi)?;
        loop {
            match self.band_position(&y) {
                Ordering::Equal => return Ok((y, k)),
                // ratio too large: multiplying by xi scales it by |sigma xi|/|xi| < 1
                Ordering::Greater => {
                    y = self.mul(&y, xi);
                    k += 1;
                }
                Ordering::Less => {
                    y = self.mul(&y, &xi_inv);
                    k -= 1;
                }
            }
            if k.abs() > 10_000 {
                return Err(FieldError::Overflow);
            }
        }
    }

    // Roots of unity: i or zeta_3 would need -1 or -3 to be a square in F.
    // Larger cyclotomic fields of degree <= 4 are either biquadratic or
    // Q(zeta_5), the cyclic quartic field of conductor 5.
    fn torsion_order(&self) -> Result<u32, FieldError> {
        for n in [-1i64, -3] {
            if self
                .sqrt_of_subfield(&Quad::rational(q(n), self.params.d))
                .is_some()
            {
                return Err(FieldError::UnexpectedTorsion);
            }
        }
        Ok(if self.conductor == 5 { 10 } else { 2 })
    }

    /// Square root in F of an element of k, if any (a root is s or v*beta).
    pub fn sqrt_of_subfield(&self, z: &Quad) -> Option<QuarticElement> {
        if let Some(s) = z.sqrt_in_k() {
            return Some(self.embed_quad(&s));
        }
        let mu = Quad::new(q(-self.params.d), q(-self.params.b), self.params.d);
        let v = z.mul(&mu.inv()?).sqrt_in_k()?;
        Some(self.mul(&self.embed_quad(&v), &QuarticElement::beta()))
    }

    fn compute_fundamental_unit(&self) -> Result<FundamentalUnit, FieldError> {
        let d = self.params.d;
        let (eps, n) = quadratic_fundamental_unit(d);
        let mut xi = self.embed_quad(&eps);
        let mut hasse = 1;
        for s in [1i64, -1] {
            if let Some(eta) = self.sqrt_of_subfield(&eps.scale(&q(s))) {
                if self.is_integral(&eta) {
                    xi = eta;
                    hasse = 2;
                    break;
                }
            }
        }
        let xi_o = self.to_oelem(&xi)?;
        let xi_inv = self.inv(&xi)?;
        let xi_inv_o = self.to_oelem(&xi_inv)?;
        let abs2 = self.abs2(&xi);
        Ok(FundamentalUnit {
            xi,
            xi_o,
            xi_inv_o,
            eps_d: eps,
            eps_d_norm: n,
            abs2,
            hasse_index: hasse,
        })
    }
}

/// Conductor and quadratic-subfield discriminant for A = -1.
pub fn conductor_of(p: &FieldParams, case: BasisCase) -> (u64, i64) {
    let d = p.d as u64;
    let l = match case {
        BasisCase::I | BasisCase::II => 3,
        BasisCase::III => 2,
        BasisCase::IV | BasisCase::V => 0,
    };
    let kdisc = if p.d % 4 == 1 { p.d } else { 4 * p.d };
    ((1u64 << l) * p.a.unsigned_abs() * d, kdisc)
}

/// Fundamental unit eps > 1 of Q(sqrt D) and its norm, by continued fractions.
pub fn quadratic_fundamental_unit(d: i64) -> (Quad, i64) {
    let one_mod4 = d % 4 == 1;
    // theta = (P + sqrt D)/Q; units are x + y*phi with x/y convergents of theta.
    let (mut pp, mut qq) = if one_mod4 {
        (BigInt::from(-1), BigInt::from(2))
    } else {
        (BigInt::zero(), BigInt::one())
    };
    let dd = BigInt::from(d);
    let s = dd.sqrt();
    let (mut h1, mut h2) = (BigInt::one(), BigInt::zero());
    let (mut k1, mut k2) = (BigInt::zero(), BigInt::one());
    for _ in 0..100_000 {
        // floor((P + sqrt D)/Q), exact for Q > 0
        assert!(qq.is_positive());
        let a = (&pp + &s).div_floor(&qq);
        let h = &a * &h1 + &h2;
        let k = &a * &k1 + &k2;
        (h2, h1) = (h1, h.clone());
        (k2, k1) = (k1, k.clone());
        if k.is_positive() {
            let n = if one_mod4 {
                &h * &h + &h * &k - &k * &k * (&dd - 1) / 4
            } else {
                &h * &h - &dd * &k * &k
            };
            if n.abs().is_one() {
                let hq = BigRational::from_integer(h);
                let kq = BigRational::from_integer(k);
                let eps = if one_mod4 {
                    Quad::new(&hq + &kq / q(2), &kq / q(2), d)
                } else {
                    Quad::new(hq, kq, d)
                };
                return (eps, n.to_i64().unwrap());
            }
        }
        pp = &a * &qq - &pp;
        qq = (&dd - &pp * &pp) / &qq;
    }
    panic!("continued fraction did not reach a unit");
}
