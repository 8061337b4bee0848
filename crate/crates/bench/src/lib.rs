//! Fixtures shared by the benchmarks.

use std::sync::Arc;
use tamek::ideal::{prime_ideals_up_to, PrimeTable};
use tamek::tate::{build_c, generator_candidates, CSetBuild, ClassIndex, PoolSource};
use tamek::{Effort, FieldContext, FieldParams, OElem, PrimeCache};

pub fn context(b: i64, c: i64, d: i64) -> Arc<FieldContext> {
    Arc::new(FieldContext::new(FieldParams::new(b, c, d).unwrap(), 256).unwrap())
}

/// Deterministic integral elements with coordinates in [-r, r].
pub fn elements(n: usize, r: i128) -> Vec<OElem> {
    let mut s: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s % (2 * r as u64 + 1)) as i128 - r
    };
    (0..n)
        .map(|_| OElem([next(), next(), next(), next()]))
        .collect()
}

/// Everything needed to check the conditions at one prime.
pub struct PrimeSetup {
    pub ctx: Arc<FieldContext>,
    pub cache: PrimeCache,
    pub table: PrimeTable,
    pub ordinal: usize,
    pub index: ClassIndex,
    pub build: CSetBuild,
    pub effort: Effort,
    pub generator: OElem,
}

impl PrimeSetup {
    /// The prime at `ordinal` in the table of primes of norm below `max_norm`.
    pub fn new(ctx: Arc<FieldContext>, max_norm: u64, ordinal: usize) -> PrimeSetup {
        let cache = PrimeCache::new(ctx.clone());
        let table = prime_ideals_up_to(&cache, max_norm).unwrap();
        let effort = Effort::default();
        let pools = PoolSource::new(
            ctx.clone(),
            Arc::new(PrimeTable {
                primes: table.primes.clone(),
            }),
            max_norm,
            effort.clone(),
        );
        let pr = table.primes[ordinal].clone();
        let index = ClassIndex::new(&ctx, &pr).unwrap();
        let build = build_c(&ctx, &pr, &index, &pools, &effort);
        let generator = generator_candidates(&cache, &pr, &pools, &effort, 1)
            .into_iter()
            .next()
            .unwrap()
            .0;
        PrimeSetup {
            ctx,
            cache,
            table,
            ordinal,
            index,
            build,
            effort,
            generator,
        }
    }
}
