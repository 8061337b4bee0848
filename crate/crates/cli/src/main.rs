use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tamek::bounds::parse_decimal;
use tamek::field::FieldParams;
use tamek::runner::{self, ConditionSel, RunConfig, RunError};
use tamek::verify::Statement;

#[derive(Parser)]
#[command(
    name = "tamek",
    version,
    about = "Certify trivial tame kernels of imaginary cyclic quartic fields"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full verification for one field.
    Verify(VerifyArgs),
    /// Print the condition I / II bounds and c_F.
    Bounds(BoundsArgs),
    /// Re-check a report or a C-set file from scratch.
    Revalidate(RevalidateArgs),
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long = "B")]
    b: i64,
    #[arg(long = "C")]
    c: i64,
    #[arg(long = "D")]
    d: i64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, default_value_t = 256)]
    precision: u32,
    #[arg(long, default_value = "both")]
    condition: ConditionSel,
    #[arg(long = "bound-I")]
    bound_i: Option<String>,
    #[arg(long = "bound-II")]
    bound_ii: Option<String>,
    #[arg(long, default_value = "3/4")]
    rho: String,
    #[arg(long)]
    cset_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    resume: bool,
    /// Largest |k| in the unit shifts xi^k.
    #[arg(long, default_value_t = 70)]
    unit_range: u32,
    #[arg(long, default_value_t = 6_000_000)]
    pool_cap: usize,
    /// Short S-units used for relation lattices at the first primes.
    #[arg(long, default_value_t = 400)]
    relation_nodes: usize,
    #[arg(long, default_value_t = 1 << 22)]
    factor_effort: u64,
    /// Examine only the first N primes.
    #[arg(long)]
    prime_limit: Option<usize>,
    /// Stop after N primes (leaves a resumable checkpoint).
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, conflicts_with_all = ["b", "c", "d"])]
    all: bool,
    #[arg(long = "B", requires_all = ["c", "d"])]
    b: Option<i64>,
    #[arg(long = "C")]
    c: Option<i64>,
    #[arg(long = "D")]
    d: Option<i64>,
    #[arg(long, default_value = "3/4")]
    rho: String,
    #[arg(long, default_value_t = 256)]
    precision: u32,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RevalidateArgs {
    path: PathBuf,
    /// Directory holding the C-set files referenced by a report.
    #[arg(long)]
    cset_dir: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn rational(s: &str, what: &str) -> Result<num_rational::BigRational> {
    parse_decimal(s).ok_or_else(|| anyhow!("cannot parse {what} {s:?}"))
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let params = FieldParams::new(a.field.b, a.field.c, a.field.d)?;
    let mut cfg = RunConfig::new(params);
    cfg.workers = a.workers;
    cfg.precision = a.precision;
    cfg.condition = a.condition;
    cfg.bound_i = a
        .bound_i
        .as_deref()
        .map(|s| rational(s, "--bound-I"))
        .transpose()?;
    cfg.bound_ii = a
        .bound_ii
        .as_deref()
        .map(|s| rational(s, "--bound-II"))
        .transpose()?;
    cfg.rho = rational(&a.rho, "--rho")?;
    cfg.effort.unit_range = a.unit_range;
    cfg.effort.pool_cap = a.pool_cap;
    cfg.effort.relation_nodes = a.relation_nodes;
    cfg.factor_effort = a.factor_effort;
    cfg.cset_dir = a.cset_dir;
    cfg.checkpoint = a.checkpoint;
    cfg.report = a.report;
    cfg.resume = a.resume;
    cfg.prime_limit = a.prime_limit;
    cfg.stop_after = a.stop_after;
    let out = match runner::run(&cfg) {
        Err(RunError::Interrupted {
            completed,
            remaining,
        }) => {
            eprintln!(
                "stopped: {completed} primes done, {remaining} remaining; rerun with --resume"
            );
            return Ok(ExitCode::from(2));
        }
        r => r?,
    };
    let c = &out.report.conclusion;
    let s = &out.report.stats;
    println!(
        "{}: {} primes, condition I on {} ({} obligations, {} failed), condition II on {} ({} obligations, {} failed)",
        params,
        s.primes,
        s.primes_condition_i,
        s.obligations_i,
        s.failed_i,
        s.primes_condition_ii,
        s.obligations_ii,
        s.failed_ii
    );
    match c.statement {
        Statement::Trivial => println!("K2 O_F is trivial (2-rank {})", c.two_rank),
        Statement::Undetermined => {
            println!("undetermined");
            for r in &c.reasons {
                println!("  {r}");
            }
        }
    }
    eprintln!(
        "{:.1}s on {} workers",
        out.timing.total_seconds, out.timing.workers
    );
    Ok(ExitCode::from(out.exit_code() as u8))
}

fn bounds(a: BoundsArgs) -> Result<ExitCode> {
    let rho = rational(&a.rho, "--rho")?;
    let fields = if a.all {
        runner::table_fields()
    } else {
        match (a.b, a.c, a.d) {
            (Some(b), Some(c), Some(d)) => vec![FieldParams::with_override(b, c, d, true)?],
            _ => return Err(anyhow!("give --all or all of --B --C --D")),
        }
    };
    let rows = runner::emit_bounds(&fields, &rho, a.precision)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!(
            "{:>3} {:>3} {:>3} {:>20} {:>20} {:>20}",
            "B", "C", "D", "condition I", "condition II", "c_F"
        );
        for r in rows {
            println!(
                "{:>3} {:>3} {:>3} {:>20.3} {:>20.3} {:>20.3}",
                r.b, r.c, r.d, r.bound_i.value, r.bound_ii.value, r.c_f.value
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn revalidate(a: RevalidateArgs) -> Result<ExitCode> {
    let out = runner::revalidate(&a.path, a.cset_dir.as_deref(), a.workers)
        .with_context(|| format!("revalidating {}", a.path.display()))?;
    if out.passed() {
        println!("PASS {} ({} items re-checked)", out.artifact, out.checked);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL {}", out.artifact);
        for e in &out.errors {
            println!("  {e}");
        }
        Ok(ExitCode::from(2))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Verify(a) => verify(a),
        Cmd::Bounds(a) => bounds(a),
        Cmd::Revalidate(a) => revalidate(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
