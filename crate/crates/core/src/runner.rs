//! Full runs: prime enumeration, C-set persistence, parallel condition
//! checks, checkpoint/resume, the JSON report, and revalidation.

use crate::bounds::{self, max_norm_below, norm_below, BoundsReport, Enclosure};
use crate::field::{FieldContext, FieldError, FieldParams, OElem};
use crate::ideal::{prime_ideals_up_to, IdealError, PrimeCache, PrimeSet, PrimeTable, SUnitStatus};
use crate::real::Real;
use crate::tate::{
    build_c, build_w, cset_file_name, generator_candidates, small_s_units, CSet, ClassIndex,
    CsetError, Effort, GeneratorSource, PoolSource,
};
use crate::verify::{
    check_condition_one, check_condition_two, conclude, recheck_obligation, ConclusionInputs,
    Condition, ConditionOutcome, K2Conclusion, PrimeContext, PrimeOutcome, PrimeStatus, Statement,
};
use num_rational::BigRational;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering as AtOrd};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Ideal(#[from] IdealError),
    #[error(transparent)]
    Cset(#[from] CsetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported field: {0}")]
    Unsupported(String),
    #[error("stopped with {completed} primes done and {remaining} remaining")]
    Interrupted { completed: usize, remaining: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionSel {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
    #[serde(rename = "both")]
    Both,
}

impl ConditionSel {
    pub fn includes_i(self) -> bool {
        matches!(self, ConditionSel::One | ConditionSel::Both)
    }
    pub fn includes_ii(self) -> bool {
        matches!(self, ConditionSel::Two | ConditionSel::Both)
    }
}

impl FromStr for ConditionSel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "I" | "i" | "1" => Ok(ConditionSel::One),
            "II" | "ii" | "2" => Ok(ConditionSel::Two),
            "both" => Ok(ConditionSel::Both),
            _ => Err(format!("expected I, II or both, got {s:?}")),
        }
    }
}

impl fmt::Display for ConditionSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionSel::One => "I",
            ConditionSel::Two => "II",
            ConditionSel::Both => "both",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: FieldParams,
    pub workers: usize,
    pub precision: u32,
    pub condition: ConditionSel,
    pub bound_i: Option<BigRational>,
    pub bound_ii: Option<BigRational>,
    pub rho: BigRational,
    pub effort: Effort,
    pub factor_effort: u64,
    pub cset_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub resume: bool,
    /// Examine only the first n primes (the conclusion is then undetermined).
    pub prime_limit: Option<usize>,
    /// Stop after computing n new primes, leaving the checkpoint behind.
    pub stop_after: Option<usize>,
}

impl RunConfig {
    pub fn new(params: FieldParams) -> Self {
        RunConfig {
            params,
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            precision: 256,
            condition: ConditionSel::Both,
            bound_i: None,
            bound_ii: None,
            rho: bounds::default_rho(),
            effort: Effort::default(),
            factor_effort: 1 << 22,
            cset_dir: None,
            checkpoint: None,
            report: None,
            resume: false,
            prime_limit: None,
            stop_after: None,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.workers == 0 {
            return Err(RunError::Config("worker count must be at least 1".into()));
        }
        if self.precision < 64 {
            return Err(RunError::Config(
                "precision must be at least 64 bits".into(),
            ));
        }
        let two = BigRational::from_integer(2.into());
        for b in [&self.bound_i, &self.bound_ii].into_iter().flatten() {
            if *b < two {
                return Err(RunError::Config(format!("bound override {b} is below 2")));
            }
        }
        if self.resume && self.checkpoint.is_none() {
            return Err(RunError::Config("--resume needs --checkpoint".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            condition: self.condition,
            bound_i_override: self.bound_i.as_ref().map(|b| b.to_string()),
            bound_ii_override: self.bound_ii.as_ref().map(|b| b.to_string()),
            rho: self.rho.to_string(),
            precision: self.precision,
            effort: self.effort.clone(),
            factor_effort: self.factor_effort,
            prime_limit: self.prime_limit,
        }
    }

    /// Hash of everything that affects the report (worker count and paths excluded).
    pub fn fingerprint(&self) -> String {
        let json =
            serde_json::to_string(&(self.params, self.settings())).expect("settings serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Settings echoed into the report so that it can be re-checked standalone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub condition: ConditionSel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_i_override: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_ii_override: Option<String>,
    pub rho: String,
    pub precision: u32,
    pub effort: Effort,
    pub factor_effort: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime_limit: Option<usize>,
}

impl RunSettings {
    fn to_config(&self, params: FieldParams) -> Result<RunConfig, RunError> {
        let parse = |s: &str| {
            bounds::parse_decimal(s)
                .ok_or_else(|| RunError::Config(format!("cannot parse number {s:?}")))
        };
        let mut cfg = RunConfig::new(params);
        cfg.condition = self.condition;
        cfg.bound_i = self.bound_i_override.as_deref().map(parse).transpose()?;
        cfg.bound_ii = self.bound_ii_override.as_deref().map(parse).transpose()?;
        cfg.rho = parse(&self.rho)?;
        cfg.precision = self.precision;
        cfg.effort = self.effort.clone();
        cfg.factor_effort = self.factor_effort;
        cfg.prime_limit = self.prime_limit;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldFacts {
    pub b: i64,
    pub c: i64,
    pub d: i64,
    pub minimal_polynomial: String,
    pub basis_case: String,
    pub discriminant: String,
    pub conductor: u64,
    pub quadratic_discriminant: i64,
    pub index: String,
    /// Fundamental unit xi in integral coordinates.
    pub xi: String,
    pub torsion: u32,
    pub g2: u32,
    pub class_number_one_assumed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FieldFacts {
    fn new(ctx: &FieldContext, g2: u32) -> Self {
        let mut notes = Vec::new();
        if ctx.params.d == 13 {
            notes.push(format!(
                "discriminant computed as {} = 13^3; the value 2917 printed for this field elsewhere does not match \
                 the conductor-discriminant formula",
                ctx.discriminant
            ));
        }
        notes.push("c_N is read as c1*c2".into());
        FieldFacts {
            b: ctx.params.b,
            c: ctx.params.c,
            d: ctx.params.d,
            minimal_polynomial: format!("x^4 + {} x^2 + {}", ctx.c2, ctx.c0),
            basis_case: format!("{:?}", ctx.basis_case),
            discriminant: ctx.discriminant.to_string(),
            conductor: ctx.conductor,
            quadratic_discriminant: ctx.quadratic_disc,
            index: ctx.index.to_string(),
            xi: ctx.unit.xi_o.to_compact(),
            torsion: ctx.torsion,
            g2,
            class_number_one_assumed: ctx.params.is_class_number_one(),
            notes,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub settings: Option<RunSettings>,
    pub primes: usize,
    pub primes_condition_i: usize,
    pub primes_condition_ii: usize,
    pub obligations_i: usize,
    pub obligations_ii: usize,
    pub failed_i: usize,
    pub failed_ii: usize,
    pub chained: usize,
    pub prefilter_passed: usize,
    pub germ_entries: usize,
    pub max_candidates_scanned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub field: FieldFacts,
    pub bounds: BoundsReport,
    pub primes: Vec<PrimeOutcome>,
    pub conclusion: K2Conclusion,
    pub stats: Stats,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Wall-clock data kept out of the report so that reports stay reproducible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub workers: usize,
    pub setup_seconds: f64,
    pub primes_seconds: f64,
    pub total_seconds: f64,
    /// Primes computed by this invocation.
    pub computed: usize,
    /// Primes taken from the checkpoint.
    pub resumed: usize,
    pub pool_t2: i128,
    pub pool_size: usize,
}

pub struct RunOutput {
    pub report: Report,
    pub timing: Timing,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        match self.report.conclusion.statement {
            Statement::Trivial => 0,
            Statement::Undetermined => 2,
        }
    }
}

fn write_atomic(path: &Path, data: &str) -> Result<(), RunError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, data).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Bounds driving a run after overrides.
struct UsedBounds {
    computed: bounds::Bounds,
    used_i: Real,
    used_ii: Real,
}

impl UsedBounds {
    fn new(ctx: &FieldContext, cfg: &RunConfig) -> Self {
        let computed = bounds::compute(ctx, &cfg.rho);
        let pick = |o: &Option<BigRational>, e: &Real| match o {
            Some(b) => Real::from_rational(b, ctx.precision),
            None => e.clone(),
        };
        let used_i = pick(&cfg.bound_i, &computed.effective_i);
        let used_ii = pick(&cfg.bound_ii, &computed.effective_ii);
        UsedBounds {
            computed,
            used_i,
            used_ii,
        }
    }

    fn max_norm(&self, sel: ConditionSel) -> u64 {
        let mut m = 0;
        if sel.includes_i() {
            m = m.max(max_norm_below(&self.used_i));
        }
        if sel.includes_ii() {
            m = m.max(max_norm_below(&self.used_ii));
        }
        m
    }

    fn report(&self) -> BoundsReport {
        self.computed.report(&self.used_i, &self.used_ii)
    }
}

/// Shared state of a run.
struct Env {
    ctx: Arc<FieldContext>,
    cache: PrimeCache,
    table: Arc<PrimeTable>,
    pools: PoolSource,
    cfg: RunConfig,
    used: UsedBounds,
}

impl Env {
    fn setup(cfg: &RunConfig) -> Result<Env, RunError> {
        let ctx = Arc::new(FieldContext::new(cfg.params, cfg.precision)?);
        if ctx.torsion != 2 {
            return Err(RunError::Unsupported(format!(
                "{} has {} roots of unity; W and C assume only +-1",
                cfg.params, ctx.torsion
            )));
        }
        let used = UsedBounds::new(&ctx, cfg);
        let mut cache = PrimeCache::new(ctx.clone());
        cache.factor_effort = cfg.factor_effort;
        let mut table = prime_ideals_up_to(&cache, used.max_norm(cfg.condition))?;
        if let Some(n) = cfg.prime_limit {
            table.primes.truncate(n);
        }
        let table = Arc::new(table);
        let max_prime_norm = table.primes.last().map_or(2, |p| p.key.norm);
        let pools = PoolSource::new(
            ctx.clone(),
            table.clone(),
            max_prime_norm,
            cfg.effort.clone(),
        );
        Ok(Env {
            ctx,
            cache,
            table,
            pools,
            cfg: cfg.clone(),
            used,
        })
    }

    fn need_i(&self, norm: u64) -> bool {
        self.cfg.condition.includes_i() && norm_below(norm, &self.used.used_i)
    }

    fn need_ii(&self, norm: u64) -> bool {
        self.cfg.condition.includes_ii() && norm_below(norm, &self.used.used_ii)
    }

    fn g2(&self) -> Result<u32, RunError> {
        Ok(self.cache.primes_over(2)?.len() as u32)
    }

    /// C-set for a prime, reusing a valid file from the C-set directory.
    fn obtain_cset(
        &self,
        ordinal: usize,
        idx: &ClassIndex,
    ) -> Result<(CSet, Vec<Vec<OElem>>, Vec<u64>, usize), RunError> {
        let pr = &self.table.primes[ordinal];
        let built = build_c(&self.ctx, pr, idx, &self.pools, &self.cfg.effort);
        let mut cset = built.cset;
        let mut germs = built.unreduced;
        if let Some(dir) = &self.cfg.cset_dir {
            let path = dir.join(cset_file_name(&pr.key));
            let reuse = path.exists().then(|| {
                CSet::load(&self.ctx, &path)
                    .and_then(|c| c.validate(&self.cache, pr, idx).map(|bad| (c, bad)))
            });
            match reuse {
                Some(Ok((c, bad))) => {
                    cset = c;
                    germs = bad;
                }
                Some(Err(e)) => {
                    log::warn!("{}: {e}; rebuilding", path.display());
                    cset.save(&self.ctx, &path)?;
                }
                None => cset.save(&self.ctx, &path)?,
            }
        }
        Ok((cset, built.alternates, germs, built.scanned))
    }

    fn relation_nodes(&self, ordinal: usize) -> Vec<OElem> {
        if ordinal > RELATION_MAX_S {
            return Vec::new();
        }
        small_s_units(
            &self.ctx,
            &self.table.primes[..ordinal],
            self.cfg.effort.relation_nodes,
            self.cfg.effort.unit_range,
        )
    }

    fn process(&self, ordinal: usize) -> Result<PrimeOutcome, RunError> {
        let pr = &self.table.primes[ordinal];
        let idx = ClassIndex::new(&self.ctx, pr)?;
        let (cset, alternates, germ_entries, scanned) = self.obtain_cset(ordinal, &idx)?;
        let preceding = &self.table.primes[..ordinal];
        let pc = PrimeContext::new(
            &self.cache,
            pr,
            &idx,
            &cset,
            &alternates,
            self.cfg.effort.unit_range,
            preceding,
            self.relation_nodes(ordinal),
        );
        let condition_i = self.need_i(pr.key.norm).then(|| {
            let w = build_w(&self.ctx, &self.table.primes[..ordinal]);
            check_condition_one(&pc, &w)
        });
        let (mut condition_ii, mut generator, mut generator_source) = (None, None, None);
        if self.need_ii(pr.key.norm) {
            let gens = generator_candidates(
                &self.cache,
                pr,
                &self.pools,
                &self.cfg.effort,
                self.cfg.effort.generators,
            );
            let mut best: Option<(usize, ConditionOutcome, OElem, GeneratorSource)> = None;
            for (g, src) in gens {
                let out = check_condition_two(&pc, &g);
                let failed = out.failed();
                if best.as_ref().is_none_or(|b| failed < b.0) {
                    best = Some((failed, out, g, src));
                }
                if failed == 0 {
                    break;
                }
            }
            match best {
                Some((_, out, g, src)) => {
                    condition_ii = Some(out);
                    generator = Some(g.to_compact());
                    generator_source = Some(src);
                }
                None => {
                    condition_ii = Some(ConditionOutcome {
                        certified: false,
                        note: Some("no residue generator found among S-unit candidates".into()),
                        ..ConditionOutcome::new(Condition::Two, &[])
                    })
                }
            }
        }
        log::debug!("prime #{ordinal} norm {} done", pr.key.norm);
        Ok(PrimeOutcome {
            ordinal,
            key: pr.key,
            e: pr.e,
            f: pr.f,
            alpha: pr.alpha_o.to_compact(),
            cset_digest: cset.digest(&self.ctx),
            germ_entries,
            scanned,
            condition_i,
            condition_ii,
            generator,
            generator_source,
        })
    }

    /// Whether each condition was examined up to its cutoff.
    fn covers(&self) -> (bool, bool) {
        let complete = self.cfg.prime_limit.is_none();
        let reaches = |used: &Real, eff: &Real| {
            same_value(used, eff)
                || matches!(used.try_cmp(eff), Some(Ordering::Greater | Ordering::Equal))
        };
        let u = &self.used;
        (
            self.cfg.condition.includes_i()
                && complete
                && reaches(&u.used_i, &u.computed.effective_i),
            self.cfg.condition.includes_ii()
                && complete
                && reaches(&u.used_ii, &u.computed.effective_ii),
        )
    }

    fn conclusion(&self, outcomes: &[PrimeOutcome]) -> Result<K2Conclusion, RunError> {
        let statuses: Vec<PrimeStatus> = outcomes.iter().map(|o| o.status()).collect();
        let (covers_i, covers_ii) = self.covers();
        let need_i = |n: u64| self.need_i(n);
        let need_ii = |n: u64| self.need_ii(n);
        Ok(conclude(&ConclusionInputs {
            ctx: &self.ctx,
            g2: self.g2()?,
            statuses: &statuses,
            covers_i,
            covers_ii,
            need_i: &need_i,
            need_ii: &need_ii,
        }))
    }

    fn report(&self, primes: Vec<PrimeOutcome>) -> Result<Report, RunError> {
        let conclusion = self.conclusion(&primes)?;
        let mut stats = Stats {
            settings: Some(self.cfg.settings()),
            primes: primes.len(),
            ..Default::default()
        };
        for o in &primes {
            if let Some(c) = &o.condition_i {
                stats.primes_condition_i += 1;
                stats.obligations_i += c.count;
                stats.failed_i += c.failed();
                stats.chained += c.chained;
                stats.prefilter_passed += c.prefilter_passed;
            }
            if let Some(c) = &o.condition_ii {
                stats.primes_condition_ii += 1;
                stats.obligations_ii += c.count;
                stats.failed_ii += c.failed();
                stats.chained += c.chained;
                stats.prefilter_passed += c.prefilter_passed;
            }
            stats.germ_entries += o.germ_entries.len();
            stats.max_candidates_scanned = stats.max_candidates_scanned.max(o.scanned);
        }
        Ok(Report {
            field: FieldFacts::new(&self.ctx, self.g2()?),
            bounds: self.used.report(),
            primes,
            conclusion,
            stats,
        })
    }
}

/// Enclosures with the same exact endpoints (an override equal to the computed bound).
fn same_value(a: &Real, b: &Real) -> bool {
    a.lo_rational() == b.lo_rational() && a.hi_rational() == b.hi_rational()
}

const RELATION_MAX_S: usize = crate::verify::RELATION_MAX_S;

const CHECKPOINT_MAGIC: &str = "TAMEK-CHECKPOINT v1";

fn outcome_dir(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".d");
    PathBuf::from(s)
}

fn outcome_path(ckpt: &Path, ordinal: usize) -> PathBuf {
    outcome_dir(ckpt).join(format!("prime_{ordinal}.json"))
}

/// Reads the completed outcomes recorded in a checkpoint.
fn load_checkpoint(
    ckpt: &Path,
    fingerprint: &str,
) -> Result<BTreeMap<usize, PrimeOutcome>, RunError> {
    let text = std::fs::read_to_string(ckpt).map_err(io_err(ckpt))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let Some(fp) = header.strip_prefix(CHECKPOINT_MAGIC).map(str::trim) else {
        return Err(RunError::Checkpoint(format!(
            "{} has no checkpoint header",
            ckpt.display()
        )));
    };
    if fp != fingerprint {
        return Err(RunError::Checkpoint(format!(
            "configuration fingerprint {fp} does not match this run ({fingerprint}); refusing to resume"
        )));
    }
    let mut done = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        let toks: Vec<&str> = line.split(' ').collect();
        let [tag, ord, digest] = toks[..] else {
            // a torn final line from an interrupted write
            log::warn!("checkpoint line {} ignored: {line:?}", n + 2);
            continue;
        };
        let Ok(ord) = ord.parse::<usize>() else {
            continue;
        };
        if tag != "DONE" {
            continue;
        }
        let path = outcome_path(ckpt, ord);
        let Ok(body) = std::fs::read_to_string(&path) else {
            log::warn!(
                "{} missing; prime #{ord} will be recomputed",
                path.display()
            );
            continue;
        };
        if sha256_hex(&body) != digest {
            log::warn!(
                "{} does not match its digest; prime #{ord} will be recomputed",
                path.display()
            );
            continue;
        }
        done.insert(ord, serde_json::from_str(&body)?);
    }
    Ok(done)
}

struct CheckpointWriter {
    path: PathBuf,
    file: Mutex<std::fs::File>,
}

impl CheckpointWriter {
    fn open(path: &Path, fingerprint: &str, fresh: bool) -> Result<Self, RunError> {
        std::fs::create_dir_all(outcome_dir(path)).map_err(io_err(path))?;
        let file = if fresh {
            let mut f = std::fs::File::create(path).map_err(io_err(path))?;
            writeln!(f, "{CHECKPOINT_MAGIC} {fingerprint}").map_err(io_err(path))?;
            f.sync_data().map_err(io_err(path))?;
            f
        } else {
            std::fs::OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(io_err(path))?
        };
        Ok(CheckpointWriter {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    fn record(&self, o: &PrimeOutcome) -> Result<(), RunError> {
        let body = serde_json::to_string(o)?;
        let p = outcome_path(&self.path, o.ordinal);
        write_atomic(&p, &body)?;
        let mut f = self.file.lock();
        writeln!(f, "DONE {} {}", o.ordinal, sha256_hex(&body)).map_err(io_err(&self.path))?;
        f.sync_data().map_err(io_err(&self.path))
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    pool.install(|| run_in_pool(cfg, t0))
}

fn run_in_pool(cfg: &RunConfig, t0: Instant) -> Result<RunOutput, RunError> {
    let env = Env::setup(cfg)?;
    if let Some(dir) = &cfg.cset_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let fingerprint = cfg.fingerprint();
    let mut done = BTreeMap::new();
    let writer = match &cfg.checkpoint {
        Some(p) if cfg.resume && p.exists() => {
            done = load_checkpoint(p, &fingerprint)?;
            Some(CheckpointWriter::open(p, &fingerprint, false)?)
        }
        Some(p) => Some(CheckpointWriter::open(p, &fingerprint, true)?),
        None => None,
    };
    done.retain(|&k, _| k < env.table.len());
    let resumed = done.len();
    let setup = t0.elapsed().as_secs_f64();
    log::info!(
        "{}: {} primes, {} from checkpoint, bounds I < {:.3}, II < {:.3}",
        cfg.params,
        env.table.len(),
        resumed,
        env.used.used_i.mid_f64(),
        env.used.used_ii.mid_f64()
    );

    let pending: Vec<usize> = (0..env.table.len())
        .filter(|k| !done.contains_key(k))
        .collect();
    let batch: &[usize] = match cfg.stop_after {
        Some(n) => &pending[..n.min(pending.len())],
        None => &pending,
    };
    let t1 = Instant::now();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results: Mutex<Vec<PrimeOutcome>> = Mutex::new(Vec::new());
    let first_err: Mutex<Option<RunError>> = Mutex::new(None);
    let progress = AtomicUsize::new(0);
    rayon::scope(|s| {
        for _ in 0..cfg.workers {
            s.spawn(|_| loop {
                let k = next.fetch_add(1, AtOrd::SeqCst);
                if k >= batch.len() || failed.load(AtOrd::SeqCst) {
                    break;
                }
                let res = env.process(batch[k]).and_then(|o| {
                    if let Some(w) = &writer {
                        w.record(&o)?;
                    }
                    Ok(o)
                });
                match res {
                    Ok(o) => {
                        let n = progress.fetch_add(1, AtOrd::SeqCst) + 1;
                        if n % 50 == 0 || n == batch.len() {
                            log::info!("{n}/{} primes (norm {})", batch.len(), o.key.norm);
                        }
                        results.lock().push(o);
                    }
                    Err(e) => {
                        failed.store(true, AtOrd::SeqCst);
                        first_err.lock().get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = first_err.into_inner() {
        return Err(e);
    }
    let computed = batch.len();
    for o in results.into_inner() {
        done.insert(o.ordinal, o);
    }
    if done.len() < env.table.len() {
        return Err(RunError::Interrupted {
            completed: done.len(),
            remaining: env.table.len() - done.len(),
        });
    }
    let primes_seconds = t1.elapsed().as_secs_f64();
    let report = env.report(done.into_values().collect())?;
    let pool = env.pools.get();
    let timing = Timing {
        workers: cfg.workers,
        setup_seconds: setup,
        primes_seconds,
        total_seconds: t0.elapsed().as_secs_f64(),
        computed,
        resumed,
        pool_t2: pool.t2_max,
        pool_size: pool.elems.len(),
    };
    if let Some(path) = &cfg.report {
        write_atomic(path, &report.to_json())?;
        let mut tp = path.as_os_str().to_owned();
        tp.push(".timing.json");
        write_atomic(Path::new(&tp), &serde_json::to_string_pretty(&timing)?)?;
    }
    Ok(RunOutput { report, timing })
}

/// One row of the bounds table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub b: i64,
    pub c: i64,
    pub d: i64,
    pub bound_i: Enclosure,
    pub bound_ii: Enclosure,
    pub c_f: Enclosure,
    pub detail: BoundsReport,
}

/// The fields listed in the bounds table (D = 5 is not among them).
pub fn table_fields() -> Vec<FieldParams> {
    let mut v: Vec<FieldParams> = FieldParams::all_class_number_one()
        .into_iter()
        .filter(|p| p.d != 5)
        .collect();
    v.sort_by_key(|p| p.d);
    v
}

pub fn emit_bounds(
    params: &[FieldParams],
    rho: &BigRational,
    precision: u32,
) -> Result<Vec<BoundsRow>, RunError> {
    use rayon::prelude::*;
    params
        .par_iter()
        .map(|p| {
            let ctx = FieldContext::new(*p, precision)?;
            let b = bounds::compute(&ctx, rho);
            Ok(BoundsRow {
                b: p.b,
                c: p.c,
                d: p.d,
                bound_i: (&b.bound_i).into(),
                bound_ii: (&b.bound_ii).into(),
                c_f: (&b.c_f).into(),
                detail: b.report(&b.effective_i, &b.effective_ii),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevalidateOutcome {
    pub artifact: &'static str,
    pub checked: usize,
    pub errors: Vec<String>,
}

impl RevalidateOutcome {
    pub fn passed(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Re-checks a report or a C-set file from scratch.
pub fn revalidate(
    path: &Path,
    cset_dir: Option<&Path>,
    workers: usize,
) -> Result<RevalidateOutcome, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let first = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    if first.starts_with("CSET") {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        pool.install(|| revalidate_cset(&text, name))
    } else {
        let report: Report = serde_json::from_str(&text)?;
        pool.install(|| revalidate_report(&report, cset_dir))
    }
}

fn header_field(header: &str, name: &str) -> Option<i64> {
    header
        .split(' ')
        .find_map(|t| t.strip_prefix(name)?.strip_prefix('=')?.parse().ok())
}

/// idx from a file name `cset_{norm}_{p}_{idx}.txt`.
fn idx_from_name(name: &str) -> Option<u32> {
    name.strip_prefix("cset_")?
        .strip_suffix(".txt")?
        .rsplit('_')
        .next()?
        .parse()
        .ok()
}

pub fn revalidate_cset(text: &str, file_name: &str) -> Result<RevalidateOutcome, RunError> {
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    let get = |n: &str| {
        header_field(header, n).ok_or_else(|| RunError::Config(format!("C-set header lacks {n}=")))
    };
    let params = FieldParams::with_override(get("B")?, get("C")?, get("D")?, true)?;
    let ctx = Arc::new(FieldContext::new(params, 256)?);
    let cset = CSet::parse(&ctx, text)?;
    let cache = PrimeCache::new(ctx.clone());
    let idx_hint = idx_from_name(file_name);
    let candidates: Vec<_> = cache
        .primes_over(cset.p)?
        .iter()
        .filter(|pr| pr.key.norm == cset.norm && idx_hint.is_none_or(|i| pr.key.idx == i))
        .cloned()
        .collect();
    if candidates.is_empty() {
        return Ok(RevalidateOutcome {
            artifact: "cset",
            checked: 0,
            errors: vec![format!("no prime of norm {} above {}", cset.norm, cset.p)],
        });
    }
    let mut errors = Vec::new();
    for pr in &candidates {
        let idx = ClassIndex::new(&ctx, pr)?;
        match cset.validate(&cache, pr, &idx) {
            Ok(bad) if bad.is_empty() => {
                return Ok(RevalidateOutcome {
                    artifact: "cset",
                    checked: cset.entries.len(),
                    errors: vec![],
                })
            }
            Ok(bad) => errors.push(format!(
                "prime {:?}: entries {:?} are not S-units for the preceding primes",
                pr.key, bad
            )),
            Err(e) => errors.push(format!("prime {:?}: {e}", pr.key)),
        }
    }
    Ok(RevalidateOutcome {
        artifact: "cset",
        checked: cset.entries.len(),
        errors,
    })
}

fn prime_label(o: &PrimeOutcome) -> String {
    format!(
        "prime #{} (norm {}, p {}, idx {})",
        o.ordinal, o.key.norm, o.key.p, o.key.idx
    )
}

fn recheck_condition(
    pc: &PrimeContext,
    label: &str,
    name: &str,
    outcome: &ConditionOutcome,
    xs: &[OElem],
    first_index: u64,
) -> Vec<String> {
    use rayon::prelude::*;
    let mut errors = Vec::new();
    let obligations = match outcome.obligations(first_index) {
        Ok(o) => o,
        Err(e) => return vec![format!("{label}: condition {name}: {e}")],
    };
    if obligations.len() != xs.len() {
        errors.push(format!(
            "{label}: condition {name} lists {} obligations, expected {}",
            obligations.len(),
            xs.len()
        ));
        return errors;
    }
    let per: Vec<Option<String>> = obligations
        .par_iter()
        .zip(xs.par_iter())
        .map(|(ob, x)| {
            if !ob.certified() {
                return None;
            }
            recheck_obligation(pc, x, ob)
                .err()
                .map(|e| format!("{label}: condition {name} obligation {}: {e}", ob.i))
        })
        .collect();
    errors.extend(per.into_iter().flatten());
    let all = obligations.iter().all(|o| o.certified());
    if outcome.certified != all {
        errors.push(format!(
            "{label}: condition {name} certified flag disagrees with its obligations"
        ));
    }
    errors
}

pub fn revalidate_report(
    report: &Report,
    cset_dir: Option<&Path>,
) -> Result<RevalidateOutcome, RunError> {
    let f = &report.field;
    let params = FieldParams::with_override(f.b, f.c, f.d, true)?;
    let settings = report
        .stats
        .settings
        .as_ref()
        .ok_or_else(|| RunError::Config("report lacks run settings".into()))?;
    let cfg = settings.to_config(params)?;
    let env = Env::setup(&cfg)?;
    let mut errors = Vec::new();
    if FieldFacts::new(&env.ctx, env.g2()?) != report.field {
        errors.push("field facts differ from a fresh computation".into());
    }
    if env.used.report() != report.bounds {
        errors.push("bounds differ from a fresh computation".into());
    }
    if report.primes.len() != env.table.len() {
        errors.push(format!(
            "report lists {} primes, expected {}",
            report.primes.len(),
            env.table.len()
        ));
    }
    let mut checked = 0;
    for (k, o) in report.primes.iter().enumerate() {
        let label = prime_label(o);
        if o.ordinal != k || k >= env.table.len() {
            errors.push(format!("{label}: out of order or beyond the prime table"));
            continue;
        }
        let pr = &env.table.primes[k];
        if pr.key != o.key || pr.e != o.e || pr.f != o.f || pr.alpha_o.to_compact() != o.alpha {
            errors.push(format!(
                "{label}: prime data differ from a fresh decomposition"
            ));
            continue;
        }
        let idx = ClassIndex::new(&env.ctx, pr)?;
        let built = build_c(&env.ctx, pr, &idx, &env.pools, &env.cfg.effort);
        let mut cset = built.cset;
        if let Some(dir) = cset_dir {
            let path = dir.join(cset_file_name(&pr.key));
            if path.exists() {
                match CSet::load(&env.ctx, &path) {
                    Ok(c) => cset = c,
                    Err(e) => {
                        errors.push(format!("{label}: {}: {e}", path.display()));
                        continue;
                    }
                }
            }
        }
        if cset.digest(&env.ctx) != o.cset_digest {
            errors.push(format!("{label}: C-set digest mismatch"));
            continue;
        }
        match cset.validate(&env.cache, pr, &idx) {
            Ok(bad) if bad != o.germ_entries => errors.push(format!(
                "{label}: non-S-unit C-set entries {bad:?}, report lists {:?}",
                o.germ_entries
            )),
            Ok(_) => {}
            Err(e) => {
                errors.push(format!("{label}: {e}"));
                continue;
            }
        }
        let pc = PrimeContext::new(
            &env.cache,
            pr,
            &idx,
            &cset,
            &built.alternates,
            env.cfg.effort.unit_range,
            &env.table.primes[..k],
            Vec::new(),
        );
        match (&o.condition_i, env.need_i(pr.key.norm)) {
            (Some(c), true) => {
                let w = build_w(&env.ctx, &env.table.primes[..k]);
                errors.extend(recheck_condition(&pc, &label, "I", c, &w, 0));
                checked += c.count;
            }
            (None, false) => {}
            _ => errors.push(format!(
                "{label}: condition I presence does not match the bound"
            )),
        }
        match (&o.condition_ii, env.need_ii(pr.key.norm)) {
            (Some(c), true) => match &o.generator {
                Some(g) => {
                    let g = OElem::parse_compact(g).map_err(RunError::Field)?;
                    let res = &pr.residue;
                    if !res.is_generator(&res.reduce(&g)) {
                        errors.push(format!(
                            "{label}: recorded g does not generate the residue field"
                        ));
                    } else if crate::ideal::is_s_unit_o(&env.cache, &g, &PrimeSet::Before(pr.key))
                        != SUnitStatus::Yes
                    {
                        errors.push(format!("{label}: recorded g is not an S-unit"));
                    } else {
                        let xs: Option<Vec<OElem>> =
                            cset.entries.iter().map(|c| env.ctx.omul(c, &g)).collect();
                        match xs {
                            Some(xs) => {
                                errors.extend(recheck_condition(&pc, &label, "II", c, &xs, 1))
                            }
                            None => errors.push(format!("{label}: overflow forming c*g")),
                        }
                        checked += c.count;
                    }
                }
                None if !c.certified => {}
                None => errors.push(format!(
                    "{label}: condition II certified without a generator"
                )),
            },
            (None, false) => {}
            _ => errors.push(format!(
                "{label}: condition II presence does not match the bound"
            )),
        }
    }
    if env.conclusion(&report.primes)? != report.conclusion {
        errors.push("conclusion differs from the one implied by the per-prime outcomes".into());
    }
    Ok(RevalidateOutcome {
        artifact: "report",
        checked,
        errors,
    })
}

/// Completed-prime ordinals recorded in a checkpoint (for inspection and tests).
pub fn checkpoint_ordinals(path: &Path) -> Result<Vec<usize>, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|l| l.strip_prefix("DONE ")?.split(' ').next()?.parse().ok())
        .collect())
}
