//! The sets W, G and C attached to a prime ideal, the shared pool of small
//! S-unit candidates they are drawn from, and the C-set text format.

use crate::field::{FieldContext, FieldParams, OElem, QuarticElement};
use crate::ideal::{
    for_each_ideal_up_to, integer_is_s_unit, is_s_unit_o, PrimeCache, PrimeIdeal, PrimeKey,
    PrimeSet, PrimeTable, Res, ResidueField, SUnitStatus,
};
use crate::linalg;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use parking_lot::Mutex;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CsetError {
    #[error("line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("C-set header {found} does not match the field or prime {expected}")]
    FieldMismatch { expected: String, found: String },
    #[error("C-set invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Search knobs for lifts and fallbacks.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Effort {
    /// Largest |k| in unit powers xi^k.
    pub unit_range: u32,
    /// Extra lifts kept per residue class for fallback chains.
    pub alternates: usize,
    /// Hard cap on candidate pool size.
    pub pool_cap: usize,
    /// Largest |m| tried when looking for an integer residue generator.
    pub integer_generator_limit: u64,
    /// Candidates scanned for alternates after every class has a lift.
    pub alternate_scan: usize,
    /// Short S-units feeding the relation lattice at primes with small S.
    pub relation_nodes: usize,
    /// Residue generators g tried for condition II before giving up.
    pub generators: usize,
    /// Candidates beyond this position are only used when no generator precedes them.
    pub generator_scan: usize,
}

impl Default for Effort {
    fn default() -> Self {
        Effort {
            unit_range: 70,
            alternates: 8,
            pool_cap: 6_000_000,
            integer_generator_limit: 100_000,
            generators: 16,
            generator_scan: 200_000,
            alternate_scan: 20_000,
            relation_nodes: 400,
        }
    }
}

/// A small integral element with known factorisation support.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub elem: OElem,
    pub t2: i128,
    /// Largest prime key dividing the element; `None` for units.
    pub maxkey: Option<PrimeKey>,
}

impl Candidate {
    /// Whether the element is a unit outside `key` and everything after it.
    pub fn usable_before(&self, key: &PrimeKey) -> bool {
        self.maxkey.is_none_or(|m| m < *key)
    }
}

/// All ±g xi^k (g an ideal generator over primes of norm <= max_prime_norm)
/// with T2 <= t2_max, sorted by (T2, coordinates).
pub struct CandidatePool {
    pub t2_max: i128,
    pub max_prime_norm: u64,
    pub elems: Vec<Candidate>,
}

fn balance(ctx: &FieldContext, g: &OElem) -> Option<(OElem, i128)> {
    let xi = &ctx.unit.xi_o;
    let xinv = &ctx.unit.xi_inv_o;
    let mut cur = *g;
    let mut t = ctx.ot2(&cur)?;
    for step in [xi, xinv] {
        loop {
            let Some(n) = ctx.omul(&cur, step) else { break };
            let Some(nt) = ctx.ot2(&n) else { break };
            if nt < t {
                cur = n;
                t = nt;
            } else {
                break;
            }
        }
    }
    Some((cur, t))
}

impl CandidatePool {
    pub fn build(
        ctx: &FieldContext,
        table: &PrimeTable,
        max_prime_norm: u64,
        t2_max: i128,
        effort: &Effort,
    ) -> Self {
        // N(x) <= (T2/4)^2 for every x.
        let u = (t2_max / 4).max(1) as u64;
        let norm_bound = u.saturating_mul(u);
        let sub = PrimeTable {
            primes: table
                .primes
                .iter()
                .filter(|p| p.key.norm <= max_prime_norm)
                .cloned()
                .collect(),
        };
        let mut elems = Vec::new();
        let k_max = effort.unit_range as i64;
        for_each_ideal_up_to(ctx, &sub, norm_bound, |entry| {
            let maxkey = entry.factors.last().map(|&(o, _)| sub.primes[o].key);
            let Some((g, t)) = balance(ctx, &entry.generator) else {
                return;
            };
            if t > t2_max {
                return;
            }
            let mut push = |x: OElem, t: i128| {
                elems.push(Candidate {
                    elem: x,
                    t2: t,
                    maxkey,
                });
                elems.push(Candidate {
                    elem: x.neg(),
                    t2: t,
                    maxkey,
                });
            };
            push(g, t);
            for step in [&ctx.unit.xi_o, &ctx.unit.xi_inv_o] {
                let mut cur = g;
                for _ in 0..k_max {
                    let Some(n) = ctx.omul(&cur, step) else { break };
                    let Some(nt) = ctx.ot2(&n) else { break };
                    if nt > t2_max {
                        break;
                    }
                    push(n, nt);
                    cur = n;
                }
            }
        });
        elems.sort_by(|a, b| (a.t2, a.elem.tiebreak_key()).cmp(&(b.t2, b.elem.tiebreak_key())));
        elems.truncate(effort.pool_cap);
        CandidatePool {
            t2_max,
            max_prime_norm,
            elems,
        }
    }
}

/// Pools stop growing past this T2 even below the size cap.
const POOL_T2_LIMIT: i128 = 1 << 44;

/// Lazily grown candidate pool shared by all workers.
pub struct PoolSource {
    ctx: Arc<FieldContext>,
    table: Arc<PrimeTable>,
    max_prime_norm: u64,
    effort: Effort,
    current: Mutex<Arc<CandidatePool>>,
}

impl PoolSource {
    pub fn new(
        ctx: Arc<FieldContext>,
        table: Arc<PrimeTable>,
        max_prime_norm: u64,
        effort: Effort,
    ) -> Self {
        let t0 = 4 * ((2.0 * (max_prime_norm as f64).sqrt()) as i128 + 8);
        let pool = CandidatePool::build(&ctx, &table, max_prime_norm, t0, &effort);
        PoolSource {
            ctx,
            table,
            max_prime_norm,
            effort,
            current: Mutex::new(Arc::new(pool)),
        }
    }

    pub fn get(&self) -> Arc<CandidatePool> {
        self.current.lock().clone()
    }

    /// Returns a pool strictly larger than `seen`, or `None` at the cap.
    pub fn grow(&self, seen: &CandidatePool) -> Option<Arc<CandidatePool>> {
        let mut cur = self.current.lock();
        if cur.t2_max > seen.t2_max {
            return Some(cur.clone());
        }
        if cur.elems.len() >= self.effort.pool_cap || cur.t2_max > POOL_T2_LIMIT {
            return None;
        }
        let t = cur.t2_max * 3 / 2;
        log::info!("growing candidate pool to T2 <= {t}");
        let pool = Arc::new(CandidatePool::build(
            &self.ctx,
            &self.table,
            self.max_prime_norm,
            t,
            &self.effort,
        ));
        *cur = pool.clone();
        Some(pool)
    }
}

/// Discrete-log indexing of residue classes: class i has residue i (f = 1)
/// or g^i (f > 1), i in 1..q-1.
pub struct ClassIndex {
    pub residue: ResidueField,
    /// Residue generator used for indexing when f > 1.
    pub base: Option<Res>,
    dlog: Vec<u32>,
}

impl ClassIndex {
    pub fn new(ctx: &FieldContext, pr: &PrimeIdeal) -> Result<Self, crate::ideal::IdealError> {
        let res = pr.residue.clone();
        if res.f == 1 {
            return Ok(ClassIndex {
                residue: res,
                base: None,
                dlog: Vec::new(),
            });
        }
        let g = crate::ideal::residue_generator(ctx, pr)?;
        let gr = res.reduce(&ctx.to_oelem(&g)?);
        let mut dlog = vec![0u32; res.q as usize];
        let mut x = gr;
        for i in 1..res.q {
            dlog[res.encode(&x) as usize] = i as u32;
            x = res.mul(&x, &gr);
        }
        Ok(ClassIndex {
            residue: res,
            base: Some(gr),
            dlog,
        })
    }

    pub fn q(&self) -> u64 {
        self.residue.q
    }

    /// Index of the class of 1.
    pub fn one_index(&self) -> u64 {
        if self.residue.f == 1 {
            1
        } else {
            self.q() - 1
        }
    }

    pub fn index_of_residue(&self, r: &Res) -> Option<u64> {
        if ResidueField::is_zero(r) {
            return None;
        }
        if self.residue.f == 1 {
            return Some(r[0]);
        }
        Some(self.dlog[self.residue.encode(r) as usize] as u64)
    }

    pub fn index_of(&self, x: &OElem) -> Option<u64> {
        self.index_of_residue(&self.residue.reduce(x))
    }

    pub fn residue_of_index(&self, i: u64) -> Res {
        match &self.base {
            None => [i, 0, 0, 0],
            Some(g) => self.residue.pow(g, i),
        }
    }

    /// Small integral element with the residue of class i.
    pub fn germ(&self, i: u64) -> OElem {
        if self.residue.f == 1 {
            return OElem::from_int(i as i128);
        }
        let r = self.residue_of_index(i);
        let p = self.residue.p;
        let rows: linalg::Mat = (0..4)
            .map(|j| self.residue.images[j][..self.residue.f as usize].to_vec())
            .collect();
        let c = linalg::solve_combination(&rows, &r[..self.residue.f as usize], p)
            .expect("reduction is surjective");
        OElem([c[0] as i128, c[1] as i128, c[2] as i128, c[3] as i128])
    }
}

/// C-set for one prime: entries[i-1] lifts class i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CSet {
    pub params: FieldParams,
    pub p: u64,
    pub f: u32,
    pub norm: u64,
    pub entries: Vec<OElem>,
}

/// A built C-set plus the extra lifts used by fallback chains.
#[derive(Clone, Debug)]
pub struct CSetBuild {
    pub cset: CSet,
    /// Classes whose entry is a bare germ (no S-unit lift found).
    pub unreduced: Vec<u64>,
    pub alternates: Vec<Vec<OElem>>,
    pub scanned: usize,
    pub pool_t2: i128,
}

pub fn build_w(ctx: &FieldContext, preceding: &[Arc<PrimeIdeal>]) -> Vec<OElem> {
    let mut w = vec![OElem::MINUS_ONE, ctx.unit.xi_o];
    w.extend(preceding.iter().map(|p| p.alpha_o));
    w
}

/// How the element of G was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GeneratorSource {
    LeastPrimitiveRoot,
    IntegerSUnit,
    Pool,
    Search,
}

/// Residue generator that is also an S-unit for the primes before `pr`.
pub fn build_g(
    cache: &PrimeCache,
    pr: &PrimeIdeal,
    pools: &PoolSource,
    effort: &Effort,
) -> Option<(OElem, GeneratorSource)> {
    generator_candidates(cache, pr, pools, effort, 1)
        .into_iter()
        .next()
}

/// Up to `limit` S-unit residue generators, shortest first.
pub fn generator_candidates(
    cache: &PrimeCache,
    pr: &PrimeIdeal,
    pools: &PoolSource,
    effort: &Effort,
    limit: usize,
) -> Vec<(OElem, GeneratorSource)> {
    let ctx = cache.ctx();
    let s = PrimeSet::Before(pr.key);
    let res = &pr.residue;
    let mut out = Vec::new();
    // Condition II compares c*g with another lift, so a short g keeps the
    // differences small.
    let mut pool = pools.get();
    let mut start = 0;
    'grow: loop {
        for (pos, c) in pool.elems.iter().enumerate().skip(start) {
            // Positions in the canonical order, so the choice does not depend
            // on how far other workers have grown the pool.
            if pos >= effort.generator_scan && !out.is_empty() {
                return out;
            }
            if c.usable_before(&pr.key) && res.is_generator(&res.reduce(&c.elem)) {
                out.push((c.elem, GeneratorSource::Pool));
                if out.len() >= limit {
                    return out;
                }
            }
        }
        start = pool.elems.len();
        match pools.grow(&pool) {
            Some(p) => pool = p,
            None => break 'grow,
        }
    }
    if !out.is_empty() {
        return out;
    }
    if let Ok(g) = crate::ideal::residue_generator(ctx, pr) {
        if let Ok(go) = ctx.to_oelem(&g) {
            if is_s_unit_o(cache, &go, &s) == SUnitStatus::Yes {
                let src = if res.f == 1 {
                    GeneratorSource::LeastPrimitiveRoot
                } else {
                    GeneratorSource::Search
                };
                return vec![(go, src)];
            }
        }
    }
    if res.f == 1 {
        for m in 2..=effort.integer_generator_limit.min(res.p.saturating_mul(64)) {
            for sm in [m as i128, -(m as i128)] {
                let o = OElem::from_int(sm);
                if res.is_generator(&res.reduce(&o))
                    && integer_is_s_unit(cache, sm, &s) == SUnitStatus::Yes
                {
                    return vec![(o, GeneratorSource::IntegerSUnit)];
                }
            }
        }
    }
    out
}

/// The `n` shortest S-units generated by -1, xi and the generators of `s`,
/// enumerated directly (pool growth would be wasteful for small S).
pub fn small_s_units(
    ctx: &FieldContext,
    s: &[Arc<PrimeIdeal>],
    n: usize,
    unit_range: u32,
) -> Vec<OElem> {
    const T2_LIMIT: i128 = 1 << 40;
    let mut t2_max: i128 = 64;
    loop {
        let u = (t2_max / 4).max(1) as u64;
        let norm_bound = u.saturating_mul(u);
        let mut gens = Vec::new();
        let mut stack = vec![(0usize, OElem::ONE, 1u64)];
        while let Some((k, g, nm)) = stack.pop() {
            if k == s.len() {
                gens.push(g);
                continue;
            }
            stack.push((k + 1, g, nm));
            let (mut g, mut nm) = (g, nm);
            loop {
                let Some(n2) = nm.checked_mul(s[k].key.norm).filter(|&x| x <= norm_bound) else {
                    break;
                };
                let Some(g2) = ctx.omul(&g, &s[k].alpha_o) else {
                    break;
                };
                g = g2;
                nm = n2;
                stack.push((k + 1, g, nm));
            }
        }
        let mut out: Vec<(i128, OElem)> = Vec::new();
        for g in gens {
            let Some((b, t)) = balance(ctx, &g) else {
                continue;
            };
            if t > t2_max {
                continue;
            }
            out.push((t, b));
            out.push((t, b.neg()));
            for step in [&ctx.unit.xi_o, &ctx.unit.xi_inv_o] {
                let mut cur = b;
                for _ in 0..unit_range {
                    let Some(nx) = ctx.omul(&cur, step) else {
                        break;
                    };
                    let Some(nt) = ctx.ot2(&nx) else { break };
                    if nt > t2_max {
                        break;
                    }
                    out.push((nt, nx));
                    out.push((nt, nx.neg()));
                    cur = nx;
                }
            }
        }
        out.sort_by(|x, y| (x.0, x.1.tiebreak_key()).cmp(&(y.0, y.1.tiebreak_key())));
        out.dedup();
        if out.len() >= n || t2_max >= T2_LIMIT {
            return out.into_iter().take(n).map(|(_, e)| e).collect();
        }
        t2_max *= 2;
    }
}

pub fn build_c(
    ctx: &FieldContext,
    pr: &PrimeIdeal,
    idx: &ClassIndex,
    pools: &PoolSource,
    effort: &Effort,
) -> CSetBuild {
    let q = idx.q();
    let n = (q - 1) as usize;
    let mut lifts: Vec<Option<OElem>> = vec![None; n];
    let mut alts: Vec<Vec<OElem>> = vec![Vec::new(); n];
    let one = idx.one_index() as usize - 1;
    lifts[one] = Some(OElem::ONE);
    let mut filled = 1;
    let mut pool = pools.get();
    let mut pos = 0;
    let mut scanned = 0;
    let (mut extra, mut full_alts) = (0usize, 0usize);
    'outer: loop {
        while pos < pool.elems.len() {
            let c = &pool.elems[pos];
            pos += 1;
            // past the last missing lift, every candidate counts toward the
            // alternate budget, so scarce S-units cannot force pool growth
            if filled == n {
                extra += 1;
                if full_alts == n || extra > effort.alternate_scan {
                    break 'outer;
                }
            }
            if !c.usable_before(&pr.key) {
                continue;
            }
            scanned += 1;
            let Some(i) = idx.index_of(&c.elem) else {
                continue;
            };
            let slot = i as usize - 1;
            match lifts[slot] {
                None => {
                    lifts[slot] = Some(c.elem);
                    filled += 1;
                }
                Some(l) if l != c.elem && alts[slot].len() < effort.alternates => {
                    alts[slot].push(c.elem);
                    if alts[slot].len() == effort.alternates {
                        full_alts += 1;
                    }
                }
                _ => {}
            }
        }
        match pools.grow(&pool) {
            Some(p) => pool = p,
            None => break,
        }
    }
    let mut unreduced = Vec::new();
    let entries = lifts
        .into_iter()
        .enumerate()
        .map(|(slot, l)| {
            l.unwrap_or_else(|| {
                unreduced.push(slot as u64 + 1);
                idx.germ(slot as u64 + 1)
            })
        })
        .collect();
    CSetBuild {
        cset: CSet {
            params: ctx.params,
            p: pr.p,
            f: pr.f,
            norm: q,
            entries,
        },
        unreduced,
        alternates: alts,
        scanned,
        pool_t2: pool.t2_max,
    }
}

fn rat_text(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

impl CSet {
    pub fn header(&self) -> String {
        format!(
            "CSET v1 B={} C={} D={} p={} f={} norm={}",
            self.params.b, self.params.c, self.params.d, self.p, self.f, self.norm
        )
    }

    pub fn lift(&self, i: u64) -> &OElem {
        &self.entries[i as usize - 1]
    }

    pub fn to_text(&self, ctx: &FieldContext) -> String {
        let mut s = self.header();
        s.push('\n');
        for (k, e) in self.entries.iter().enumerate() {
            let x = ctx.from_oelem(e);
            let _ = writeln!(
                s,
                "{} : {} {} {} {}",
                k + 1,
                rat_text(&x.coords[0]),
                rat_text(&x.coords[1]),
                rat_text(&x.coords[2]),
                rat_text(&x.coords[3])
            );
        }
        s
    }

    pub fn digest(&self, ctx: &FieldContext) -> String {
        hex::encode(Sha256::digest(self.to_text(ctx).as_bytes()))
    }

    pub fn save(&self, ctx: &FieldContext, path: &Path) -> Result<(), CsetError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text(ctx))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(ctx: &FieldContext, path: &Path) -> Result<CSet, CsetError> {
        let text = std::fs::read_to_string(path)?;
        CSet::parse(ctx, &text)
    }

    pub fn parse(ctx: &FieldContext, text: &str) -> Result<CSet, CsetError> {
        let perr = |line: usize, col: usize, msg: &str| CsetError::Parse {
            line,
            col,
            msg: msg.to_string(),
        };
        let mut lines = text
            .split('\n')
            .enumerate()
            .filter(|(_, l)| !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| perr(1, 1, "missing header"))?;
        if header.contains('\r') {
            return Err(perr(
                hl + 1,
                header.find('\r').unwrap() + 1,
                "CR in line ending",
            ));
        }
        let toks: Vec<&str> = header.split(' ').collect();
        if toks.len() != 8 || toks[0] != "CSET" || toks[1] != "v1" {
            return Err(perr(
                hl + 1,
                1,
                "expected `CSET v1 B=.. C=.. D=.. p=.. f=.. norm=..`",
            ));
        }
        let mut vals = [0u64; 6];
        let mut col = toks[0].len() + toks[1].len() + 3;
        for (k, name) in ["B", "C", "D", "p", "f", "norm"].iter().enumerate() {
            let t = toks[k + 2];
            let v = t
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix('='))
                .and_then(|r| r.parse::<u64>().ok())
                .ok_or_else(|| perr(hl + 1, col, &format!("expected {name}=<int>")))?;
            vals[k] = v;
            col += t.len() + 1;
        }
        let [b, c, d, p, f, norm] = vals;
        let fp = &ctx.params;
        if (b as i64, c as i64, d as i64) != (fp.b, fp.c, fp.d) {
            return Err(CsetError::FieldMismatch {
                expected: format!("B={} C={} D={}", fp.b, fp.c, fp.d),
                found: format!("B={b} C={c} D={d}"),
            });
        }
        if f == 0 || f > 4 || p.checked_pow(f as u32) != Some(norm) {
            return Err(perr(hl + 1, 1, "norm is not p^f"));
        }
        let mut entries: Vec<Option<OElem>> = vec![None; (norm - 1) as usize];
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(pos) = line.find('\r') {
                return Err(perr(ln + 1, pos + 1, "CR in line ending"));
            }
            let (is, rest) = line
                .split_once(" : ")
                .ok_or_else(|| perr(ln + 1, 1, "expected `<i> : ...`"))?;
            let i: u64 = is.parse().map_err(|_| perr(ln + 1, 1, "bad index"))?;
            if i == 0 || i >= norm {
                return Err(perr(ln + 1, 1, "index out of range"));
            }
            let mut coords: Vec<BigRational> = Vec::new();
            let mut col = is.len() + 4;
            for t in rest.split(' ') {
                let (n, dd) = t
                    .split_once('/')
                    .ok_or_else(|| perr(ln + 1, col, "expected n/d"))?;
                let n: BigInt = n.parse().map_err(|_| perr(ln + 1, col, "bad numerator"))?;
                let dd: BigInt = dd
                    .parse()
                    .map_err(|_| perr(ln + 1, col, "bad denominator"))?;
                if dd <= BigInt::zero() {
                    return Err(perr(ln + 1, col, "denominator must be positive"));
                }
                let q = BigRational::new(n.clone(), dd.clone());
                if q.numer() != &n || q.denom() != &dd {
                    return Err(perr(ln + 1, col, "not in lowest terms"));
                }
                coords.push(q);
                col += t.len() + 1;
            }
            if coords.len() != 4 {
                return Err(perr(ln + 1, 1, "expected four coordinates"));
            }
            let x = QuarticElement::new([
                coords[0].clone(),
                coords[1].clone(),
                coords[2].clone(),
                coords[3].clone(),
            ]);
            let o = ctx
                .to_oelem(&x)
                .map_err(|_| perr(ln + 1, is.len() + 4, "entry is not an algebraic integer"))?;
            let slot = &mut entries[(i - 1) as usize];
            if slot.is_some() {
                return Err(perr(ln + 1, 1, "duplicate index"));
            }
            *slot = Some(o);
        }
        let entries: Vec<OElem> = if norm == 2 && entries[0].is_none() {
            vec![OElem::ONE]
        } else {
            entries
                .into_iter()
                .enumerate()
                .map(|(k, e)| {
                    e.ok_or_else(|| CsetError::Invariant(format!("missing entry {}", k + 1)))
                })
                .collect::<Result<_, _>>()?
        };
        Ok(CSet {
            params: ctx.params,
            p,
            f: f as u32,
            norm,
            entries,
        })
    }

    /// Checks residues, the class of 1 and (optionally) S-unit status.
    pub fn validate(
        &self,
        cache: &PrimeCache,
        pr: &PrimeIdeal,
        idx: &ClassIndex,
    ) -> Result<Vec<u64>, CsetError> {
        if (self.p, self.f, self.norm) != (pr.p, pr.f, pr.key.norm) {
            return Err(CsetError::FieldMismatch {
                expected: format!("p={} f={} norm={}", pr.p, pr.f, pr.key.norm),
                found: format!("p={} f={} norm={}", self.p, self.f, self.norm),
            });
        }
        let mut seen = vec![false; self.norm as usize];
        for (k, e) in self.entries.iter().enumerate() {
            let i = k as u64 + 1;
            match idx.index_of(e) {
                None => {
                    return Err(CsetError::Invariant(format!(
                        "entry {i} is divisible by the prime"
                    )))
                }
                Some(j) if j != i => {
                    return Err(CsetError::Invariant(format!(
                        "entry {i} lies in residue class {j}"
                    )));
                }
                Some(j) => {
                    if seen[j as usize] {
                        return Err(CsetError::Invariant(format!("class {j} repeated")));
                    }
                    seen[j as usize] = true;
                }
            }
        }
        if *self.lift(idx.one_index()) != OElem::ONE {
            return Err(CsetError::Invariant(
                "the class of 1 is not lifted by 1".into(),
            ));
        }
        let s = PrimeSet::Before(pr.key);
        Ok(self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| is_s_unit_o(cache, e, &s) != SUnitStatus::Yes)
            .map(|(k, _)| k as u64 + 1)
            .collect())
    }
}

pub fn cset_file_name(key: &PrimeKey) -> String {
    format!("cset_{}_{}_{}.txt", key.norm, key.p, key.idx)
}
