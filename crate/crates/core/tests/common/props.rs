//! Property suites, each run by the acceptance check on property invariants.

use super::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};
use tamek::ideal::{
    decompose_prime, prime_ideals_up_to, residue_generator, PrimeTable, ResidueField,
};
use tamek::runner::{self, RunConfig};
use tamek::tate::{build_c, build_w, generator_candidates, CSetBuild, ClassIndex, PoolSource};
use tamek::verify::{
    check_condition_one, check_condition_two, recheck_obligation, Obligation, PrimeContext,
};
use tamek::{CSet, Effort, FieldContext, OElem, PrimeCache, QuarticElement};

fn field_index() -> impl Strategy<Value = usize> {
    0..SEVEN.len()
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-60i64..=60, 1i64..=6).prop_map(|(n, d)| BigRational::new(n.into(), d.into()))
}

fn element() -> impl Strategy<Value = QuarticElement> {
    [rational(), rational(), rational(), rational()].prop_map(QuarticElement::new)
}

fn oelem(r: i128) -> impl Strategy<Value = OElem> {
    [-r..=r, -r..=r, -r..=r, -r..=r].prop_map(OElem)
}

use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Runs `test` on `cases` inputs drawn deterministically from `strategy`.
fn check<S: Strategy>(
    cases: u32,
    strategy: &S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(
        config,
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    );
    runner.run(strategy, test).map_err(|e| e.to_string())
}

pub const SUITES: &[(&str, fn(u32) -> Result<(), String>)] = &[
    ("norm_is_multiplicative", norm_is_multiplicative),
    (
        "integral_norm_agrees_with_rational_norm",
        integral_norm_agrees_with_rational_norm,
    ),
    (
        "sigma_has_order_four_and_is_multiplicative",
        sigma_has_order_four_and_is_multiplicative,
    ),
    ("sigma_on_integral_elements", sigma_on_integral_elements),
    ("integral_round_trip", integral_round_trip),
    ("rational_round_trip", rational_round_trip),
    (
        "splitting_agrees_with_artin_map",
        splitting_agrees_with_artin_map,
    ),
    ("valuation_is_additive", valuation_is_additive),
    ("reduction_is_a_ring_morphism", reduction_is_a_ring_morphism),
    (
        "residue_generator_has_order_q_minus_one",
        residue_generator_has_order_q_minus_one,
    ),
    (
        "cset_is_a_bijection_onto_residue_classes",
        cset_is_a_bijection_onto_residue_classes,
    ),
    (
        "perturbed_certificates_are_rejected",
        perturbed_certificates_are_rejected,
    ),
    (
        "report_is_independent_of_worker_count",
        report_is_independent_of_worker_count,
    ),
];

pub fn norm_is_multiplicative(cases: u32) -> Result<(), String> {
    check(
        cases,
        &(field_index(), element(), element()),
        |(k, x, y)| {
            let ctx = &contexts()[k];
            prop_assert_eq!(ctx.norm(&ctx.mul(&x, &y)), ctx.norm(&x) * ctx.norm(&y));

            Ok(())
        },
    )
}

pub fn integral_norm_agrees_with_rational_norm(cases: u32) -> Result<(), String> {
    check(cases, &(field_index(), oelem(1 << 20)), |(k, x)| {
        let ctx = &contexts()[k];
        let n = ctx.norm(&ctx.from_oelem(&x));
        prop_assert_eq!(BigRational::from_integer(ctx.onorm(&x)), n.clone());
        // totally imaginary: norms are nonnegative
        prop_assert!(n >= BigRational::zero());

        Ok(())
    })
}

pub fn sigma_has_order_four_and_is_multiplicative(cases: u32) -> Result<(), String> {
    check(
        cases,
        &(field_index(), element(), element()),
        |(k, x, y)| {
            let ctx = &contexts()[k];
            let s = |z: &QuarticElement| ctx.sigma(z);
            prop_assert_eq!(s(&s(&s(&s(&x)))), x.clone());
            prop_assert_eq!(s(&ctx.mul(&x, &y)), ctx.mul(&s(&x), &s(&y)));
            prop_assert_eq!(s(&x.add(&y)), s(&x).add(&s(&y)));
            prop_assert_eq!(ctx.norm(&s(&x)), ctx.norm(&x));

            Ok(())
        },
    )
}

pub fn sigma_on_integral_elements(cases: u32) -> Result<(), String> {
    check(cases, &(field_index(), oelem(1000)), |(k, x)| {
        let ctx = &contexts()[k];
        let so = ctx.osigma(&x).unwrap();
        prop_assert_eq!(ctx.from_oelem(&so), ctx.sigma(&ctx.from_oelem(&x)));

        Ok(())
    })
}

pub fn integral_round_trip(cases: u32) -> Result<(), String> {
    check(cases, &(field_index(), oelem(1 << 40)), |(k, x)| {
        let ctx = &contexts()[k];
        let q = ctx.from_oelem(&x);
        prop_assert!(ctx.is_integral(&q));
        prop_assert_eq!(ctx.to_oelem(&q).unwrap(), x);
        prop_assert_eq!(ctx.from_integral(&ctx.to_integral(&q)), q);
        prop_assert_eq!(OElem::parse_compact(&x.to_compact()).unwrap(), x);

        Ok(())
    })
}

pub fn rational_round_trip(cases: u32) -> Result<(), String> {
    check(cases, &(field_index(), element()), |(k, x)| {
        let ctx = &contexts()[k];
        prop_assert_eq!(ctx.from_integral(&ctx.to_integral(&x)), x.clone());
        let text = x.to_string();
        prop_assert_eq!(text.parse::<QuarticElement>().unwrap(), x);

        Ok(())
    })
}

pub fn splitting_agrees_with_artin_map(cases: u32) -> Result<(), String> {
    check(cases, &(field_index(), 0usize..303), |(k, i)| {
        let ctx = &contexts()[k];
        let p = small_primes()[i % small_primes().len()];
        let primes = decompose_prime(ctx, p).unwrap();
        let mut got: Vec<(u32, u32)> = primes.iter().map(|pr| (pr.e, pr.f)).collect();
        got.sort();
        prop_assert_eq!(got.iter().map(|(e, f)| e * f).sum::<u32>(), 4);
        prop_assert_eq!(got, oracles()[k].splitting(p));
        for pr in primes.iter() {
            prop_assert_eq!(pr.key.norm, p.pow(pr.f));
            prop_assert_eq!(BigInt::from(pr.key.norm), ctx.onorm(&pr.alpha_o));
        }

        Ok(())
    })
}

pub fn valuation_is_additive(cases: u32) -> Result<(), String> {
    check(
        cases,
        &(field_index(), 0usize..64, oelem(5000), oelem(5000)),
        |(k, j, x, y)| {
            prop_assume!(!x.is_zero() && !y.is_zero());
            let ctx = &contexts()[k];
            let pr = &small_ideals()[k][j % small_ideals()[k].len()];
            let xy = ctx.omul(&x, &y).unwrap();
            let v = |z: &OElem| pr.valuation_o(ctx, z).unwrap();
            prop_assert_eq!(v(&xy), v(&x) + v(&y));
            let ax = ctx.omul(&x, &pr.alpha_o).unwrap();
            prop_assert_eq!(v(&ax), v(&x) + 1);
            prop_assert_eq!(v(&OElem::from_int(pr.p as i128)), pr.e);

            Ok(())
        },
    )
}

pub fn reduction_is_a_ring_morphism(cases: u32) -> Result<(), String> {
    check(
        cases,
        &(field_index(), 0usize..64, oelem(1 << 30), oelem(1 << 30)),
        |(k, j, x, y)| {
            let ctx = &contexts()[k];
            let pr = &small_ideals()[k][j % small_ideals()[k].len()];
            let r = &pr.residue;
            let sum = x.checked_add(&y).unwrap();
            let prod = ctx.omul(&x, &y).unwrap();
            prop_assert_eq!(r.reduce(&sum), r.add(&r.reduce(&x), &r.reduce(&y)));
            prop_assert_eq!(r.reduce(&prod), r.mul(&r.reduce(&x), &r.reduce(&y)));
            prop_assert_eq!(r.reduce(&OElem::ONE), r.one());
            prop_assert!(ResidueField::is_zero(&r.reduce(&pr.alpha_o)));
            prop_assert_eq!(pr.contains(&x), ResidueField::is_zero(&r.reduce(&x)));
            if pr.f == 1 && !(ctx.index.clone() % BigInt::from(pr.p)).is_zero() {
                // evaluation at beta = t (mod p) on power-basis coordinates
                let t = r.reduce(&ctx.to_oelem(&QuarticElement::beta()).unwrap())[0];
                let q = ctx.from_oelem(&x);
                let p = BigInt::from(pr.p);
                let mut acc = BigInt::zero();
                let mut tp = BigInt::one();
                for c in &q.coords {
                    let inv_den = c.denom().modpow(&(&p - 2u32), &p);
                    acc += c.numer() * inv_den * &tp;
                    tp = tp * t % &p;
                }
                let acc = ((acc % &p) + &p) % &p;
                prop_assert_eq!(acc, BigInt::from(r.reduce(&x)[0]));
            }

            Ok(())
        },
    )
}

pub fn residue_generator_has_order_q_minus_one(cases: u32) -> Result<(), String> {
    check(cases, &(field_index(), 0usize..64), |(k, j)| {
        let ctx = &contexts()[k];
        let pr = &small_ideals()[k][j % small_ideals()[k].len()];
        let r = &pr.residue;
        let g = residue_generator(ctx, pr).unwrap();
        let gr = pr.reduce(ctx, &g).unwrap();
        prop_assert_eq!(r.order(&gr), r.q - 1);
        prop_assert!(r.is_generator(&gr));
        // direct powering
        let mut z = gr;
        let mut n = 1;
        while z != r.one() {
            z = r.mul(&z, &gr);
            n += 1;
        }
        prop_assert_eq!(n, r.q - 1);
        if pr.f == 1 {
            let g0 = g.coords[0].to_integer();
            prop_assert!(g.is_rational());
            let g0: u64 = g0.try_into().unwrap();
            prop_assert_eq!(naive_order(g0, pr.p), pr.p - 1);
            prop_assert!(
                (2..g0).all(|h| naive_order(h, pr.p) != pr.p - 1),
                "least primitive root"
            );
        }

        Ok(())
    })
}

pub fn cset_is_a_bijection_onto_residue_classes(cases: u32) -> Result<(), String> {
    check(
        cases,
        &(0usize..2, 0usize..64, 1u64..10_000),
        |(f, j, i)| {
            let fx = &fixtures()[f];
            let (pr, idx, b) = fx.prime(j);
            let cs = &b.cset;
            let q = idx.q();
            prop_assert_eq!(cs.entries.len() as u64, q - 1);
            let classes: BTreeSet<u64> = cs
                .entries
                .iter()
                .map(|e| idx.index_of(e).unwrap())
                .collect();
            prop_assert_eq!(classes, (1..q).collect::<BTreeSet<u64>>());
            let i = 1 + i % (q - 1);
            prop_assert_eq!(idx.index_of(cs.lift(i)), Some(i));
            prop_assert_eq!(idx.index_of_residue(&idx.residue_of_index(i)), Some(i));
            prop_assert_eq!(*cs.lift(idx.one_index()), OElem::ONE);
            prop_assert!(!pr.contains(cs.lift(i)));
            let text = cs.to_text(&fx.ctx);
            prop_assert!(!text.contains('\r'));
            prop_assert_eq!(&CSet::parse(&fx.ctx, &text).unwrap(), cs);

            Ok(())
        },
    )
}

pub fn perturbed_certificates_are_rejected(cases: u32) -> Result<(), String> {
    check(
        cases,
        &(0usize..2, 0usize..64, 0usize..100_000, 1u64..1000, 0u8..3),
        |(f, j, o, delta, mode)| {
            let fx = &fixtures()[f];
            let (j, cases) = &fx.cases[j % fx.cases.len()];
            let (pr, idx, b) = fx.prime(*j);
            let preceding = &fx.table.primes[..*j];
            let pc = PrimeContext::new(
                &fx.cache,
                pr,
                idx,
                &b.cset,
                &b.alternates,
                fx.effort.unit_range,
                preceding,
                Vec::new(),
            );
            let (x, ob) = &cases[o % cases.len()];
            prop_assert_eq!(recheck_obligation(&pc, x, ob), Ok(()));
            let mut bad = ob.clone();
            match mode {
                0 if !bad.norms.is_empty() => {
                    let n: BigInt = bad.norms[0].parse().unwrap();
                    bad.norms[0] = (n + delta).to_string();
                }
                0 | 1 if !bad.product.is_empty() => bad.product[0].exp += delta as i64,
                1 => {
                    bad.norms.clear();
                    bad.via.clear();
                }
                _ => {
                    // same residue class, different element
                    let moved = OElem::from_int((delta * pr.p) as i128)
                        .checked_add(x)
                        .unwrap();
                    if ob.product.is_empty() {
                        let next = match ob.via.first() {
                            Some(v) => OElem::parse_compact(v).unwrap(),
                            None => *b.cset.lift(idx.index_of(x).unwrap()),
                        };
                        let n = fx.ctx.onorm(&moved.checked_sub(&next).unwrap());
                        prop_assume!(n.to_string() != ob.norms[0]);
                    }
                    prop_assert!(recheck_obligation(&pc, &moved, ob).is_err());
                    return Ok(());
                }
            }
            prop_assert!(recheck_obligation(&pc, x, &bad).is_err());

            Ok(())
        },
    )
}

pub fn report_is_independent_of_worker_count(cases: u32) -> Result<(), String> {
    check(cases, &(0usize..2, 0usize..3, 1usize..=8), |(f, l, w)| {
        let (b, c, d) = [(1, 1, 2), (2, 3, 13)][f];
        let limit = [3, 6, 10][l];
        let reference = small_run(b, c, d, limit, 1);
        prop_assert!(*small_run(b, c, d, limit, w) == *reference);

        Ok(())
    })
}

fn small_primes() -> &'static [u64] {
    static P: OnceLock<Vec<u64>> = OnceLock::new();
    P.get_or_init(|| primes_below(2000))
}

fn oracles() -> &'static [ArtinOracle] {
    static O: OnceLock<Vec<ArtinOracle>> = OnceLock::new();
    O.get_or_init(|| {
        SEVEN
            .iter()
            .map(|&(b, _, d)| ArtinOracle::new(b, d))
            .collect()
    })
}

/// Prime ideals over p < 60 (so including some residue degrees 2 and 4).
fn small_ideals() -> &'static [Vec<Arc<tamek::PrimeIdeal>>] {
    static I: OnceLock<Vec<Vec<Arc<tamek::PrimeIdeal>>>> = OnceLock::new();
    I.get_or_init(|| {
        contexts()
            .iter()
            .map(|ctx| {
                primes_below(60)
                    .into_iter()
                    .flat_map(|p| decompose_prime(ctx, p).unwrap())
                    .filter(|pr| pr.key.norm < 20_000)
                    .map(Arc::new)
                    .collect()
            })
            .collect()
    })
}

/// C-sets and certified obligations for the first primes of a field.
struct Fixture {
    ctx: Arc<FieldContext>,
    cache: PrimeCache,
    table: PrimeTable,
    effort: Effort,
    indices: Vec<ClassIndex>,
    builds: Vec<CSetBuild>,
    /// Nontrivial certified obligations (element, certificate), by prime ordinal.
    cases: Vec<(usize, Vec<(OElem, Obligation)>)>,
}

impl Fixture {
    fn new(d: i64, n: usize) -> Fixture {
        let ctx = context(d);
        let cache = PrimeCache::new(ctx.clone());
        let mut table = prime_ideals_up_to(&cache, 400).unwrap();
        table.primes.truncate(n);
        let effort = Effort::default();
        let max_norm = table.primes.last().unwrap().key.norm;
        let table_arc = Arc::new(PrimeTable {
            primes: table.primes.clone(),
        });
        let pools = PoolSource::new(ctx.clone(), table_arc, max_norm, effort.clone());
        let mut indices = Vec::new();
        let mut builds = Vec::new();
        for pr in &table.primes {
            let idx = ClassIndex::new(&ctx, pr).unwrap();
            builds.push(build_c(&ctx, pr, &idx, &pools, &effort));
            indices.push(idx);
        }
        let mut all = Vec::new();
        for (j, pr) in table.primes.iter().enumerate() {
            let preceding = &table.primes[..j];
            let b = &builds[j];
            let pc = PrimeContext::new(
                &cache,
                pr,
                &indices[j],
                &b.cset,
                &b.alternates,
                effort.unit_range,
                preceding,
                Vec::new(),
            );
            let w = build_w(&ctx, preceding);
            let mut cases = Vec::new();
            let one = check_condition_one(&pc, &w);
            cases.extend(w.iter().copied().zip(one.obligations(0).unwrap()));
            if let Some((g, _)) = generator_candidates(&cache, pr, &pools, &effort, 1)
                .into_iter()
                .next()
            {
                let xs: Vec<OElem> = b
                    .cset
                    .entries
                    .iter()
                    .map(|c| ctx.omul(c, &g).unwrap())
                    .collect();
                let two = check_condition_two(&pc, &g);
                cases.extend(xs.into_iter().zip(two.obligations(1).unwrap()));
            }
            // keep only nontrivial certified links
            cases.retain(|(_, ob)| {
                ob.certified() && (!ob.norms.is_empty() || !ob.product.is_empty())
            });
            if !cases.is_empty() {
                all.push((j, cases));
            }
        }
        assert!(
            all.len() > n / 2,
            "most fixture primes have certified links"
        );
        Fixture {
            ctx,
            cache,
            table,
            effort,
            indices,
            builds,
            cases: all,
        }
    }

    fn prime(&self, j: usize) -> (&tamek::PrimeIdeal, &ClassIndex, &CSetBuild) {
        let j = j % self.table.primes.len();
        (&self.table.primes[j], &self.indices[j], &self.builds[j])
    }
}

fn fixtures() -> &'static [Fixture] {
    static F: OnceLock<Vec<Fixture>> = OnceLock::new();
    F.get_or_init(|| vec![Fixture::new(2, 14), Fixture::new(13, 14)])
}

type RunKey = (i64, usize, usize);

fn small_run(b: i64, c: i64, d: i64, limit: usize, workers: usize) -> Arc<String> {
    static RUNS: OnceLock<Mutex<HashMap<RunKey, Arc<String>>>> = OnceLock::new();
    let runs = RUNS.get_or_init(Default::default);
    if let Some(r) = runs.lock().unwrap().get(&(d, limit, workers)) {
        return r.clone();
    }
    let mut cfg = RunConfig::new(params(b, c, d));
    cfg.workers = workers;
    cfg.prime_limit = Some(limit);
    let json = Arc::new(runner::run(&cfg).unwrap().report.to_json());
    runs.lock()
        .unwrap()
        .insert((d, limit, workers), json.clone());
    json
}
