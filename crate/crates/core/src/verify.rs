//! Per-prime checks of conditions I and II through U'_1 certificates, and
//! the final conclusion from the 2-rank formula.

use crate::field::{FieldContext, OElem};
use crate::ideal::{is_s_unit_o, PrimeCache, PrimeIdeal, PrimeKey, PrimeSet, SUnitStatus};
use crate::tate::{CSet, ClassIndex, GeneratorSource};
use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

/// Witness that x / y lies in U'_1: x = y, or x = y mod P with
/// |N(x - y)| < N(P)^2 and both x, y S-units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct U1Certificate {
    pub x: OElem,
    pub y: OElem,
    pub norm: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CertFailure {
    #[error("difference is not divisible by the prime")]
    NotCongruent,
    #[error("|N(x - y)| = {0} is not below N(P)^2")]
    NormTooLarge(BigInt),
    #[error("x is not a certified S-unit ({0:?})")]
    XNotSUnit(SUnitStatus),
    #[error("y is not a certified S-unit ({0:?})")]
    YNotSUnit(SUnitStatus),
    #[error("arithmetic overflow")]
    Overflow,
}

pub fn certify_u1(
    cache: &PrimeCache,
    x: &OElem,
    y: &OElem,
    pr: &PrimeIdeal,
    s: &PrimeSet,
) -> Result<U1Certificate, CertFailure> {
    if x == y {
        return Ok(U1Certificate {
            x: *x,
            y: *y,
            norm: BigInt::from(0),
        });
    }
    let d = x.checked_sub(y).ok_or(CertFailure::Overflow)?;
    if !pr.contains(&d) {
        return Err(CertFailure::NotCongruent);
    }
    let n = cache.ctx().onorm(&d).abs();
    let q = BigInt::from(pr.key.norm);
    if n >= &q * &q {
        return Err(CertFailure::NormTooLarge(n));
    }
    match is_s_unit_o(cache, x, s) {
        SUnitStatus::Yes => {}
        st => return Err(CertFailure::XNotSUnit(st)),
    }
    match is_s_unit_o(cache, y, s) {
        SUnitStatus::Yes => {}
        st => return Err(CertFailure::YNotSUnit(st)),
    }
    Ok(U1Certificate {
        x: *x,
        y: *y,
        norm: n,
    })
}

/// One proof obligation x in y U'_1, discharged by a chain of certificates
/// x = n_0, n_1, ..., n_k = y.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    /// Index of w in W (condition I) or class index of c (condition II).
    pub i: u64,
    /// Intermediate nodes of the chain, compact integral coordinates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub via: Vec<String>,
    /// |N(n_j - n_{j+1})| per link; empty when x = y.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub norms: Vec<String>,
    /// Alternative witness: x = y * prod (a/b)^exp over certified pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product: Vec<Factor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// A certified pair (a, b), a/b in U'_1, raised to `exp`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub a: String,
    pub b: String,
    pub exp: i64,
    pub norm: String,
}

impl Obligation {
    fn failed(i: u64, why: String) -> Self {
        Obligation {
            i,
            via: vec![],
            norms: vec![],
            product: vec![],
            failure: Some(why),
        }
    }

    pub fn certified(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub condition: Condition,
    pub certified: bool,
    pub count: usize,
    /// Number of obligations closed only by a multi-link chain.
    pub chained: usize,
    /// Number of obligations that also pass the S-unit prefilter.
    pub prefilter_passed: usize,
    /// One token per obligation, in order: `=` when x = y, the norm witness
    /// |N(x - y)| for a single link, `*` when the obligation is in `special`.
    pub witnesses: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub special: Vec<Obligation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionOutcome {
    pub fn new(condition: Condition, obligations: &[Obligation]) -> Self {
        let mut witnesses = String::new();
        let mut special = Vec::new();
        for (k, o) in obligations.iter().enumerate() {
            if k > 0 {
                witnesses.push(' ');
            }
            if o.failure.is_none() && o.via.is_empty() && o.product.is_empty() && o.norms.len() <= 1
            {
                witnesses.push_str(o.norms.first().map_or("=", |n| n.as_str()));
            } else {
                witnesses.push('*');
                special.push(o.clone());
            }
        }
        ConditionOutcome {
            condition,
            certified: obligations.iter().all(|o| o.certified()),
            count: obligations.len(),
            chained: obligations.iter().filter(|o| o.norms.len() > 1).count(),
            prefilter_passed: 0,
            witnesses,
            special,
            note: None,
        }
    }

    /// Expands the witness string back into obligations; `first` is the index of the first one.
    pub fn obligations(&self, first: u64) -> Result<Vec<Obligation>, String> {
        if self.count == 0 {
            return if self.witnesses.is_empty() {
                Ok(Vec::new())
            } else {
                Err("witnesses without obligations".into())
            };
        }
        let toks: Vec<&str> = self.witnesses.split(' ').collect();
        if toks.len() != self.count {
            return Err(format!(
                "{} witness tokens for {} obligations",
                toks.len(),
                self.count
            ));
        }
        let mut special = self.special.iter();
        toks.iter()
            .enumerate()
            .map(|(k, t)| {
                let i = first + k as u64;
                match *t {
                    "=" => Ok(Obligation {
                        i,
                        via: vec![],
                        norms: vec![],
                        product: vec![],
                        failure: None,
                    }),
                    "*" => {
                        let o = special.next().ok_or("missing special obligation")?;
                        if o.i != i {
                            return Err(format!(
                                "special obligation {} out of order (expected {i})",
                                o.i
                            ));
                        }
                        Ok(o.clone())
                    }
                    n if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => Ok(Obligation {
                        i,
                        via: vec![],
                        norms: vec![n.to_string()],
                        product: vec![],
                        failure: None,
                    }),
                    other => Err(format!("bad witness token {other:?} at obligation {i}")),
                }
            })
            .collect()
    }

    pub fn failed(&self) -> usize {
        self.special.iter().filter(|o| !o.certified()).count()
    }
}

/// Data needed to discharge obligations at one prime.
pub struct PrimeContext<'a> {
    pub cache: &'a PrimeCache,
    pub prime: &'a PrimeIdeal,
    pub index: &'a ClassIndex,
    pub cset: &'a CSet,
    pub alternates: &'a [Vec<OElem>],
    /// Units u = +-xi^k (|k| <= K) with u = 1 mod P.
    pub unit_shifts: Vec<OElem>,
    /// Primes before P, in order.
    pub preceding: &'a [Arc<PrimeIdeal>],
    /// Short S-units used to build the relation lattice.
    pub relation_nodes: Vec<OElem>,
    relations: OnceLock<Option<RelationLattice>>,
}

impl<'a> PrimeContext<'a> {
    pub fn new(
        cache: &'a PrimeCache,
        prime: &'a PrimeIdeal,
        index: &'a ClassIndex,
        cset: &'a CSet,
        alternates: &'a [Vec<OElem>],
        unit_range: u32,
        preceding: &'a [Arc<PrimeIdeal>],
        relation_nodes: Vec<OElem>,
    ) -> Self {
        let ctx = cache.ctx();
        let mut unit_shifts = Vec::new();
        for (step, sign) in [
            (ctx.unit.xi_o, 1),
            (ctx.unit.xi_inv_o, 1),
            (ctx.unit.xi_o, -1),
            (ctx.unit.xi_inv_o, -1),
        ] {
            let mut u = OElem::from_int(sign);
            for _ in 0..unit_range {
                let Some(n) = ctx.omul(&u, &step) else { break };
                u = n;
                if prime.residue.reduce(&u) == prime.residue.one() {
                    unit_shifts.push(u);
                }
            }
        }
        if prime.residue.reduce(&OElem::MINUS_ONE) == prime.residue.one() {
            unit_shifts.push(OElem::MINUS_ONE);
        }
        PrimeContext {
            cache,
            prime,
            index,
            cset,
            alternates,
            unit_shifts,
            preceding,
            relation_nodes,
            relations: OnceLock::new(),
        }
    }

    fn relations(&self) -> Option<&RelationLattice> {
        self.relations
            .get_or_init(|| RelationLattice::build(self))
            .as_ref()
    }

    /// Writes x / y as a product of certified ratios, if it lies in their span.
    fn express(&self, x: &OElem, y: &OElem) -> Option<Vec<Factor>> {
        let lat = self.relations()?;
        let ulog = UnitLog::new(self.cache.ctx(), self.preceding);
        let lx = ulog.log(x)?;
        let ly = ulog.log(y)?;
        let t: Vec<i128> = lx.iter().zip(&ly).map(|(p, q)| p - q).collect();
        let combo = lat.reduce(t)?;
        let mut out = Vec::new();
        for (k, &c) in combo.iter().enumerate() {
            if c != 0 {
                let (a, b, n) = &lat.pairs[k];
                out.push(Factor {
                    a: a.to_compact(),
                    b: b.to_compact(),
                    exp: i64::try_from(c).ok()?,
                    norm: n.to_string(),
                });
            }
        }
        Some(out)
    }

    fn s(&self) -> PrimeSet {
        PrimeSet::Before(self.prime.key)
    }

    /// Obligation x in C[class(x)] U'_1.
    pub fn discharge(&self, i: u64, x: &OElem) -> Obligation {
        let ctx = self.cache.ctx();
        let Some(class) = self.index.index_of(x) else {
            return Obligation::failed(i, "element is divisible by the prime".into());
        };
        let y = *self.cset.lift(class);
        let s = self.s();
        let direct = certify_u1(self.cache, x, &y, self.prime, &s);
        let first_err = match direct {
            Ok(c) => {
                let norms = if c.x == c.y {
                    vec![]
                } else {
                    vec![c.norm.to_string()]
                };
                return Obligation {
                    i,
                    via: vec![],
                    norms,
                    product: vec![],
                    failure: None,
                };
            }
            Err(e) => e,
        };
        // Fallback: shortest chain through other lifts of the same class.
        let mut nodes: Vec<OElem> = vec![*x, y];
        for a in &self.alternates[class as usize - 1] {
            if !nodes.contains(a) {
                nodes.push(*a);
            }
        }
        for u in &self.unit_shifts {
            for base in [*x, y] {
                if let Some(v) = ctx.omul(&base, u) {
                    if !nodes.contains(&v) {
                        nodes.push(v);
                    }
                }
            }
        }
        let n = nodes.len();
        let mut memo: HashMap<(usize, usize), Option<BigInt>> = HashMap::new();
        let mut edge = |a: usize, b: usize| -> Option<BigInt> {
            let k = (a.min(b), a.max(b));
            memo.entry(k)
                .or_insert_with(|| {
                    certify_u1(self.cache, &nodes[k.0], &nodes[k.1], self.prime, &s)
                        .ok()
                        .map(|c| c.norm)
                })
                .clone()
        };
        let mut prev: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            if a == 1 {
                break;
            }
            for b in 0..n {
                if !seen[b] && edge(a, b).is_some() {
                    seen[b] = true;
                    prev[b] = Some(a);
                    queue.push_back(b);
                }
            }
        }
        if !seen[1] {
            return match self.express(x, &y) {
                Some(product) => Obligation {
                    i,
                    via: vec![],
                    norms: vec![],
                    product,
                    failure: None,
                },
                None => Obligation::failed(i, first_err.to_string()),
            };
        }
        let mut path = vec![1usize];
        while let Some(p) = prev[*path.last().unwrap()] {
            path.push(p);
        }
        path.reverse();
        let norms = path
            .windows(2)
            .map(|w| edge(w[0], w[1]).unwrap().to_string())
            .collect();
        let via = path[1..path.len() - 1]
            .iter()
            .map(|&k| nodes[k].to_compact())
            .collect();
        Obligation {
            i,
            via,
            norms,
            product: vec![],
            failure: None,
        }
    }

    /// Whether x / y - 1 is an S-unit including P (the weaker test used as a
    /// prefilter only).
    pub fn prefilter(&self, x: &OElem, y: &OElem) -> bool {
        if x == y {
            return true;
        }
        let Some(d) = x.checked_sub(y) else {
            return false;
        };
        let mut upto = self.prime.key;
        upto.idx += 1;
        is_s_unit_o(self.cache, &d, &PrimeSet::Before(upto)) == SUnitStatus::Yes
    }
}

fn summarize(
    condition: Condition,
    obligations: Vec<Obligation>,
    pc: &PrimeContext,
    xs: &[OElem],
) -> ConditionOutcome {
    let prefilter_passed = xs
        .iter()
        .filter(|x| {
            pc.index
                .index_of(x)
                .is_some_and(|c| pc.prefilter(x, pc.cset.lift(c)))
        })
        .count();
    ConditionOutcome {
        prefilter_passed,
        ..ConditionOutcome::new(condition, &obligations)
    }
}

pub fn check_condition_one(pc: &PrimeContext, w: &[OElem]) -> ConditionOutcome {
    use rayon::prelude::*;
    let obligations: Vec<Obligation> = w
        .par_iter()
        .enumerate()
        .map(|(j, x)| pc.discharge(j as u64, x))
        .collect();
    summarize(Condition::One, obligations, pc, w)
}

pub fn check_condition_two(pc: &PrimeContext, g: &OElem) -> ConditionOutcome {
    use rayon::prelude::*;
    let ctx = pc.cache.ctx();
    let xs: Vec<Option<OElem>> = pc.cset.entries.iter().map(|c| ctx.omul(c, g)).collect();
    let obligations: Vec<Obligation> = xs
        .par_iter()
        .enumerate()
        .map(|(k, x)| match x {
            Some(x) => pc.discharge(k as u64 + 1, x),
            None => Obligation::failed(k as u64 + 1, "overflow".into()),
        })
        .collect();
    let flat: Vec<OElem> = xs.into_iter().flatten().collect();
    summarize(Condition::Two, obligations, pc, &flat)
}

/// Re-checks a stored obligation from scratch.
pub fn recheck_obligation(pc: &PrimeContext, x: &OElem, ob: &Obligation) -> Result<(), String> {
    if ob.failure.is_some() {
        return Err("obligation recorded as failed".into());
    }
    let class = pc
        .index
        .index_of(x)
        .ok_or("element divisible by the prime")?;
    let y = *pc.cset.lift(class);
    if !ob.product.is_empty() {
        return recheck_product(pc, x, &y, &ob.product);
    }
    let mut nodes = vec![*x];
    for v in &ob.via {
        nodes.push(OElem::parse_compact(v).map_err(|e| e.to_string())?);
    }
    nodes.push(y);
    if nodes.len() == 2 && x == &y {
        return if ob.norms.is_empty() {
            Ok(())
        } else {
            Err("norm witness on a trivial link".into())
        };
    }
    if ob.norms.len() != nodes.len() - 1 {
        return Err(format!(
            "expected {} norm witnesses, found {}",
            nodes.len() - 1,
            ob.norms.len()
        ));
    }
    let s = PrimeSet::Before(pc.prime.key);
    for (k, pair) in nodes.windows(2).enumerate() {
        let c = certify_u1(pc.cache, &pair[0], &pair[1], pc.prime, &s)
            .map_err(|e| format!("link {k}: {e}"))?;
        if c.norm.to_string() != ob.norms[k] {
            return Err(format!(
                "link {k}: norm witness {} but |N(x - y)| = {}",
                ob.norms[k], c.norm
            ));
        }
    }
    Ok(())
}

/// Everything recorded for one prime ideal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeOutcome {
    pub ordinal: usize,
    pub key: PrimeKey,
    pub e: u32,
    pub f: u32,
    pub alpha: String,
    pub cset_digest: String,
    /// Classes whose lift is not an S-unit (no pool candidate found).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub germ_entries: Vec<u64>,
    pub scanned: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_i: Option<ConditionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_ii: Option<ConditionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_source: Option<GeneratorSource>,
}

impl PrimeOutcome {
    pub fn status(&self) -> PrimeStatus {
        PrimeStatus {
            ordinal: self.ordinal as u64,
            norm: self.key.norm,
            cond_i: self.condition_i.as_ref().map(|c| c.certified),
            cond_ii: self.condition_ii.as_ref().map(|c| c.certified),
        }
    }
}

fn recheck_product(
    pc: &PrimeContext,
    x: &OElem,
    y: &OElem,
    product: &[Factor],
) -> Result<(), String> {
    let ctx = pc.cache.ctx();
    let s = PrimeSet::Before(pc.prime.key);
    let mut acc = ctx.from_oelem(y);
    for (k, f) in product.iter().enumerate() {
        let a = OElem::parse_compact(&f.a).map_err(|e| e.to_string())?;
        let b = OElem::parse_compact(&f.b).map_err(|e| e.to_string())?;
        let c =
            certify_u1(pc.cache, &a, &b, pc.prime, &s).map_err(|e| format!("factor {k}: {e}"))?;
        if c.norm.to_string() != f.norm {
            return Err(format!(
                "factor {k}: norm witness {} but |N(a - b)| = {}",
                f.norm, c.norm
            ));
        }
        let r = ctx
            .div(&ctx.from_oelem(&a), &ctx.from_oelem(&b))
            .map_err(|e| e.to_string())?;
        acc = ctx.mul(&acc, &ctx.pow(&r, f.exp).map_err(|e| e.to_string())?);
    }
    if acc != ctx.from_oelem(x) {
        return Err("product of certified ratios does not equal x / y".into());
    }
    Ok(())
}

/// Relation lattices are built only for small S, where certified pairs
/// among short S-units can span the kernel of the residue map.
pub const RELATION_MAX_S: usize = 16;

/// Exponent coordinates of S-units: valuations at the primes of S, the
/// exponent of xi, and the sign.
struct UnitLog<'a> {
    ctx: &'a FieldContext,
    s: &'a [Arc<PrimeIdeal>],
    ln_xi: f64,
}

impl<'a> UnitLog<'a> {
    fn new(ctx: &'a FieldContext, s: &'a [Arc<PrimeIdeal>]) -> Self {
        UnitLog {
            ctx,
            s,
            ln_xi: ctx.unit.abs2.to_f64().ln(),
        }
    }

    fn dim(&self) -> usize {
        self.s.len() + 2
    }

    fn log(&self, z: &OElem) -> Option<Vec<i128>> {
        let ctx = self.ctx;
        let mut rest = *z;
        let mut v = Vec::with_capacity(self.dim());
        for pr in self.s {
            let n = pr.key.norm as i128;
            let mut e = 0;
            // exact division by alpha: multiply by its cofactor, divide by N(alpha)
            while pr.contains(&rest) {
                let t = ctx.omul(&rest, &pr.alpha_cofactor)?;
                if t.0.iter().any(|c| c % n != 0) {
                    break;
                }
                rest = OElem(t.0.map(|c| c / n));
                e += 1;
            }
            v.push(e);
        }
        if ctx.onorm(&rest).abs() != BigInt::from(1) {
            return None;
        }
        let k = (ctx.abs2(&ctx.from_oelem(&rest)).to_f64().ln() / self.ln_xi).round();
        if !k.is_finite() || k.abs() > 100_000.0 {
            return None;
        }
        let k = k as i64;
        let base = if k >= 0 {
            &ctx.unit.xi_o
        } else {
            &ctx.unit.xi_inv_o
        };
        let xk = ctx.opow(base, k.unsigned_abs())?;
        let sign = if rest == xk {
            0
        } else if rest == xk.neg() {
            1
        } else {
            return None;
        };
        v.push(k as i128);
        v.push(sign);
        Some(v)
    }
}

struct Row {
    v: Vec<i128>,
    /// Coefficients over the certified pairs.
    combo: Vec<i128>,
}

/// Echelon basis of the exponent lattice spanned by certified ratios a/b.
struct RelationLattice {
    pairs: Vec<(OElem, OElem, BigInt)>,
    rows: Vec<Option<Row>>,
    dim: usize,
}

fn axpy(y: &mut [i128], a: i128, x: &[i128]) -> Option<()> {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = yi.checked_add(a.checked_mul(*xi)?)?;
    }
    Some(())
}

fn lincomb(a: i128, x: &[i128], b: i128, y: &[i128]) -> Option<Vec<i128>> {
    x.iter()
        .zip(y)
        .map(|(p, q)| a.checked_mul(*p)?.checked_add(b.checked_mul(*q)?))
        .collect()
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        return if a < 0 { (-a, -1, 0) } else { (a, 1, 0) };
    }
    let (g, x, y) = ext_gcd(b, a % b);
    (g, y, x - (a / b) * y)
}

impl RelationLattice {
    fn build(pc: &PrimeContext) -> Option<RelationLattice> {
        if pc.preceding.len() > RELATION_MAX_S || pc.relation_nodes.is_empty() {
            return None;
        }
        let ulog = UnitLog::new(pc.cache.ctx(), pc.preceding);
        let dim = ulog.dim();
        let s = pc.s();
        let mut by_class: HashMap<u64, Vec<(OElem, Vec<i128>)>> = HashMap::new();
        for z in &pc.relation_nodes {
            let Some(c) = pc.index.index_of(z) else {
                continue;
            };
            let Some(l) = ulog.log(z) else { continue };
            by_class.entry(c).or_default().push((*z, l));
        }
        let mut classes: Vec<_> = by_class.into_iter().collect();
        classes.sort_by_key(|(c, _)| *c);
        let mut lat = RelationLattice {
            pairs: Vec::new(),
            rows: (0..dim).map(|_| None).collect(),
            dim,
        };
        // (-1)^2 = 1: the sign coordinate lives mod 2
        let mut two = vec![0; dim];
        two[dim - 1] = 2;
        lat.rows[dim - 1] = Some(Row {
            v: two,
            combo: Vec::new(),
        });
        let mut pending: Vec<(Vec<i128>, usize)> = Vec::new();
        for (_, members) in &classes {
            for (j, (b, lb)) in members.iter().enumerate() {
                for (a, la) in &members[..j] {
                    let Ok(cert) = certify_u1(pc.cache, a, b, pc.prime, &s) else {
                        continue;
                    };
                    let v: Vec<i128> = la.iter().zip(lb).map(|(p, q)| p - q).collect();
                    if v.iter().all(|&t| t == 0) {
                        continue;
                    }
                    pending.push((v, lat.pairs.len()));
                    lat.pairs.push((*a, *b, cert.norm));
                }
            }
        }
        let n = lat.pairs.len();
        for row in lat.rows.iter_mut().flatten() {
            row.combo = vec![0; n];
        }
        for (v, k) in pending {
            let mut combo = vec![0; n];
            combo[k] = 1;
            if lat.insert(v, combo).is_none() {
                log::debug!("relation lattice overflow at prime {:?}", pc.prime.key);
                return None;
            }
        }
        Some(lat)
    }

    fn insert(&mut self, mut v: Vec<i128>, mut combo: Vec<i128>) -> Option<()> {
        for col in 0..self.dim {
            if v[col] == 0 {
                continue;
            }
            let Some(r) = self.rows[col].as_mut() else {
                if v[col] < 0 {
                    v.iter_mut().for_each(|t| *t = -*t);
                    combo.iter_mut().for_each(|t| *t = -*t);
                }
                self.rows[col] = Some(Row { v, combo });
                return Some(());
            };
            let (p, q) = (r.v[col], v[col]);
            if q % p == 0 {
                axpy(&mut v, -(q / p), &r.v)?;
                axpy(&mut combo, -(q / p), &r.combo)?;
                continue;
            }
            let (g, a, b) = ext_gcd(p, q);
            let new_v = lincomb(a, &r.v, b, &v)?;
            let new_c = lincomb(a, &r.combo, b, &combo)?;
            v = lincomb(p / g, &v, -(q / g), &r.v)?;
            combo = lincomb(p / g, &combo, -(q / g), &r.combo)?;
            r.v = new_v;
            r.combo = new_c;
        }
        Some(())
    }

    fn reduce(&self, mut t: Vec<i128>) -> Option<Vec<i128>> {
        let mut combo = vec![0i128; self.pairs.len()];
        for col in 0..self.dim {
            if t[col] == 0 {
                continue;
            }
            let r = self.rows[col].as_ref()?;
            if t[col] % r.v[col] != 0 {
                return None;
            }
            let m = t[col] / r.v[col];
            axpy(&mut t, -m, &r.v)?;
            if !r.combo.is_empty() {
                axpy(&mut combo, m, &r.combo)?;
            }
        }
        Some(combo)
    }
}

pub fn two_rank_k2(r1: u32, g2: u32, cl2rank: u32) -> Result<u32, String> {
    if g2 == 0 {
        return Err("no prime above 2".into());
    }
    Ok(r1 + g2 - 1 + cl2rank)
}

/// Number of real roots of x^4 + c2 x^2 + c0.
pub fn real_places(c2: i64, c0: i64) -> u32 {
    let (c2, c0) = (c2 as i128, c0 as i128);
    let disc = c2 * c2 - 4 * c0;
    match c0.cmp(&0) {
        // y-roots of opposite sign
        std::cmp::Ordering::Less => 2,
        std::cmp::Ordering::Equal => 1 + if c2 < 0 { 2 } else { 0 },
        std::cmp::Ordering::Greater if disc < 0 || c2 >= 0 => 0,
        std::cmp::Ordering::Greater if disc == 0 => 2,
        std::cmp::Ordering::Greater => 4,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statement {
    Trivial,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct K2Conclusion {
    pub r1: u32,
    pub g2: u32,
    pub cl2rank: u32,
    pub two_rank: u32,
    pub statement: Statement,
    pub uncertified_i: Vec<u64>,
    pub uncertified_ii: Vec<u64>,
    pub reasons: Vec<String>,
}

/// Per-prime summary fed to `conclude`.
pub struct PrimeStatus {
    pub ordinal: u64,
    pub norm: u64,
    pub cond_i: Option<bool>,
    pub cond_ii: Option<bool>,
}

pub struct ConclusionInputs<'a> {
    pub ctx: &'a FieldContext,
    pub g2: u32,
    pub statuses: &'a [PrimeStatus],
    /// Whether every prime below the bound was examined, per condition.
    pub covers_i: bool,
    pub covers_ii: bool,
    pub need_i: &'a dyn Fn(u64) -> bool,
    pub need_ii: &'a dyn Fn(u64) -> bool,
}

pub fn conclude(inp: &ConclusionInputs) -> K2Conclusion {
    let ctx = inp.ctx;
    let r1 = real_places(ctx.c2, ctx.c0);
    let cl_known = ctx.params.is_class_number_one();
    let cl2rank = 0;
    let mut reasons = Vec::new();
    let two_rank = two_rank_k2(r1, inp.g2, cl2rank).unwrap_or(u32::MAX);
    let mut un_i = Vec::new();
    let mut un_ii = Vec::new();
    for st in inp.statuses {
        if (inp.need_i)(st.norm) && st.cond_i != Some(true) {
            un_i.push(st.ordinal);
        }
        if (inp.need_ii)(st.norm) && st.cond_ii != Some(true) {
            un_ii.push(st.ordinal);
        }
    }
    if !inp.covers_i {
        reasons.push("condition I not examined up to its bound".into());
    }
    if !inp.covers_ii {
        reasons.push("condition II not examined up to its bound".into());
    }
    if !un_i.is_empty() {
        reasons.push(format!(
            "{} primes without a condition I certificate",
            un_i.len()
        ));
    }
    if !un_ii.is_empty() {
        reasons.push(format!(
            "{} primes without a condition II certificate",
            un_ii.len()
        ));
    }
    if !cl_known {
        reasons.push("class number one is assumed, not known, for these parameters".into());
    }
    if two_rank != 0 {
        reasons.push(format!("2-rank formula gives {two_rank}"));
    }
    let statement = if reasons.is_empty() {
        Statement::Trivial
    } else {
        Statement::Undetermined
    };
    K2Conclusion {
        r1,
        g2: inp.g2,
        cl2rank,
        two_rank,
        statement,
        uncertified_i: un_i,
        uncertified_ii: un_ii,
        reasons,
    }
}
