//! `banach-forge`: exact norms, generic runs, embedding ladders,
//! back-and-forth almost-isometries, and run verification.
//!
//! Exit codes: 0 ok, 2 parse error, 3 shape/dimension error, 4 budget
//! exhaustion, 5 certificate failure.

use banach_forge::fraisse::{ComplexityBudget, FraisseError, GenericRun};
use banach_forge::manifest::{self, LockGuard, ManifestError};
use banach_forge::rational::{format_rational, parse_rational, Rational};
use banach_forge::textio::{self, FormatError};
use banach_forge::universal::{back_and_forth, embed_chain, SeedIsometry, UniversalError};
use banach_forge::{Certificate, ConstructError, SpaceError};
use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_PARSE: u8 = 2;
const EXIT_SHAPE: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_CERT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "banach-forge",
    about = "Exact-arithmetic toolkit for polyhedral normed spaces",
    long_about = "All arithmetic is exact rational. Runs are stored as a JSON manifest plus \
canonical text files and are crash-resumable and byte-reproducible. The \
BANACH_FORGE_BUDGET_CAP environment variable (format: DIM,DEN[,VERTICES]) \
caps every budget given on the command line."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact norm of a vector in the space read from FILE.
    Norm {
        /// Space file (`space <name> dim <d>` + `vertex` lines).
        space: PathBuf,
        /// Vector components, integers or p/q.
        #[arg(required = true)]
        vector: Vec<String>,
    },
    /// Build or resume a generic run.
    Generic {
        /// Total number of realization steps the run should reach.
        #[arg(long)]
        steps: usize,
        #[arg(long = "budget-dim", default_value_t = 3)]
        budget_dim: usize,
        #[arg(long = "budget-den", default_value_t = 2)]
        budget_den: u64,
        #[arg(long = "budget-vertices", default_value_t = 8)]
        budget_vertices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run directory (created if absent, resumed if present).
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a chain into a run, certifying the ladder bounds per stage.
    Embed {
        #[arg(long)]
        run: PathBuf,
        /// Chain file (stage space blocks plus bond operator blocks).
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        stages: usize,
    },
    /// Back-and-forth almost-isometry between two runs (trivial seed).
    Bnf {
        #[arg(long = "run-a")]
        run_a: PathBuf,
        #[arg(long = "run-b")]
        run_b: PathBuf,
        /// Closeness target, e.g. 1/2.
        #[arg(long)]
        eps: String,
        #[arg(long)]
        stages: usize,
    },
    /// Re-verify every exact check of a persisted run.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        let code = match &e {
            FormatError::Parse { .. } | FormatError::Io(_) => EXIT_PARSE,
            _ => EXIT_SHAPE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SpaceError> for Failure {
    fn from(e: SpaceError) -> Self {
        Failure::new(EXIT_SHAPE, e.to_string())
    }
}

impl From<ManifestError> for Failure {
    fn from(e: ManifestError) -> Self {
        let code = match &e {
            ManifestError::Io(_) | ManifestError::Json(_) => EXIT_PARSE,
            ManifestError::Format(FormatError::Parse { .. }) => EXIT_PARSE,
            ManifestError::Invalid(_) => EXIT_CERT,
            _ => EXIT_SHAPE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<FraisseError> for Failure {
    fn from(e: FraisseError) -> Self {
        let code = match &e {
            FraisseError::BudgetExhausted { .. } => EXIT_BUDGET,
            FraisseError::LedgerBroken { .. } => EXIT_CERT,
            _ => EXIT_SHAPE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<UniversalError> for Failure {
    fn from(e: UniversalError) -> Self {
        let code = match &e {
            UniversalError::Fraisse(FraisseError::BudgetExhausted { .. }) => EXIT_BUDGET,
            UniversalError::Construct(ConstructError::BudgetTooCoarse { .. }) => EXIT_BUDGET,
            UniversalError::BoundViolated { .. } => EXIT_CERT,
            UniversalError::ChainInvalid(_)
            | UniversalError::BadInput(_)
            | UniversalError::BadSeedIsometry(_) => EXIT_SHAPE,
            _ => EXIT_SHAPE,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("banach-forge: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Norm { space, vector } => cmd_norm(&space, &vector),
        Command::Generic {
            steps,
            budget_dim,
            budget_den,
            budget_vertices,
            seed,
            out,
        } => cmd_generic(steps, budget_dim, budget_den, budget_vertices, seed, &out),
        Command::Embed { run, chain, stages } => cmd_embed(&run, &chain, stages),
        Command::Bnf {
            run_a,
            run_b,
            eps,
            stages,
        } => cmd_bnf(&run_a, &run_b, &eps, stages),
        Command::Verify { run } => cmd_verify(&run),
    }
}

fn cmd_norm(space_file: &PathBuf, vector: &[String]) -> Result<(), Failure> {
    let text = std::fs::read_to_string(space_file)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", space_file.display())))?;
    let (_, space) = textio::parse_space(&text)?;
    let point: Vec<Rational> = vector
        .iter()
        .flat_map(|chunk| chunk.split_whitespace())
        .map(|tok| parse_rational(tok).map_err(|e| Failure::new(EXIT_PARSE, e.to_string())))
        .collect::<Result<_, _>>()?;
    let value = space.norm(&point).map_err(|e| match e {
        SpaceError::DimensionMismatch { .. } => Failure::new(EXIT_SHAPE, e.to_string()),
        other => Failure::new(EXIT_SHAPE, other.to_string()),
    })?;
    println!("{}", format_rational(&value));
    Ok(())
}

/// Applies the BANACH_FORGE_BUDGET_CAP override, format `DIM,DEN[,VERTICES]`.
fn capped_budget(requested: ComplexityBudget) -> Result<ComplexityBudget, Failure> {
    let Ok(raw) = std::env::var("BANACH_FORGE_BUDGET_CAP") else {
        return Ok(requested);
    };
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let parse =
        |s: &str| -> Result<u64, Failure> {
            s.parse()
                .map_err(|_| Failure::new(EXIT_PARSE, format!("BANACH_FORGE_BUDGET_CAP: bad field `{s}`")))
        };
    match parts.as_slice() {
        [d, q] => Ok(ComplexityBudget::new(
            requested.max_dim.min(parse(d)? as usize),
            requested.max_denominator.min(parse(q)?),
            requested.max_vertex_count,
        )),
        [d, q, v] => Ok(ComplexityBudget::new(
            requested.max_dim.min(parse(d)? as usize),
            requested.max_denominator.min(parse(q)?),
            requested.max_vertex_count.min(parse(v)? as usize),
        )),
        _ => Err(Failure::new(
            EXIT_PARSE,
            "BANACH_FORGE_BUDGET_CAP must be DIM,DEN or DIM,DEN,VERTICES",
        )),
    }
}

fn cmd_generic(
    steps: usize,
    budget_dim: usize,
    budget_den: u64,
    budget_vertices: usize,
    seed: u64,
    out: &PathBuf,
) -> Result<(), Failure> {
    let cap = capped_budget(ComplexityBudget::new(budget_dim, budget_den, budget_vertices))?;
    let _lock = LockGuard::acquire(out)?;
    let mut run = if out.join(manifest::MANIFEST_FILE).exists() {
        let run = manifest::load_run(out)?;
        if run.seed() != seed || run.cap() != &cap {
            return Err(Failure::new(
                EXIT_SHAPE,
                "existing run was created with different seed or budget flags",
            ));
        }
        run
    } else {
        GenericRun::new(seed, cap)
    };
    if run.steps_done() < steps {
        let remaining = steps - run.steps_done();
        let result = run.extend(remaining);
        // Persist whatever was realized even when the budget ran out.
        manifest::save_run(out, &run)?;
        result.map_err(|e| match e {
            FraisseError::BudgetExhausted { ref detail } => Failure::new(
                EXIT_BUDGET,
                format!("budget exhausted after {} steps: {detail}", run.steps_done()),
            ),
            other => other.into(),
        })?;
    } else {
        manifest::save_run(out, &run)?;
    }
    println!(
        "run at {} : {} stages, {} realized requirements, epoch {}",
        out.display(),
        run.num_stages(),
        run.ledger().len(),
        run.epoch()
    );
    Ok(())
}

#[derive(Serialize)]
struct LadderReport {
    stages: Vec<LadderStageReport>,
    cert: Certificate,
}

#[derive(Serialize)]
struct LadderStageReport {
    stage: usize,
    run_stage: usize,
    roundtrip_defect: String,
    roundtrip_bound: String,
    embed_drift: String,
    retract_drift: String,
}

fn cmd_embed(run_dir: &PathBuf, chain_file: &PathBuf, stages: usize) -> Result<(), Failure> {
    let _lock = LockGuard::acquire(run_dir)?;
    let mut run = manifest::load_run(run_dir)?;
    let chain_text = std::fs::read_to_string(chain_file)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", chain_file.display())))?;
    let chain = textio::parse_chain(&chain_text)?;
    let ladder = embed_chain(&mut run, &chain, stages)?;
    manifest::save_run(run_dir, &run)?;
    let report = LadderReport {
        stages: ladder
            .stages
            .iter()
            .enumerate()
            .map(|(n, s)| LadderStageReport {
                stage: n,
                run_stage: s.run_stage,
                roundtrip_defect: format_rational(&s.roundtrip_defect),
                roundtrip_bound: format!("2^-{n}"),
                embed_drift: format_rational(&s.embed_drift),
                retract_drift: format_rational(&s.retract_drift),
            })
            .collect(),
        cert: ladder.cert.clone(),
    };
    let rel = manifest::write_report(run_dir, &format!("embed_{stages}"), &report)?;
    for (n, s) in ladder.stages.iter().enumerate() {
        println!(
            "stage {n}: run stage {}, || R e - id || = {} < 2^-{n}",
            s.run_stage,
            format_rational(&s.roundtrip_defect)
        );
    }
    if !ladder.cert.holds() {
        return Err(Failure::new(EXIT_CERT, "ladder certificate failed"));
    }
    println!("ladder certified ({} conditions); report at {rel}", ladder.cert.conditions.len());
    Ok(())
}

#[derive(Serialize)]
struct BnfReport {
    eps: String,
    eps_zero: String,
    schedule: Vec<String>,
    levels: Vec<BnfLevelReport>,
    cert: Certificate,
}

#[derive(Serialize)]
struct BnfLevelReport {
    level: usize,
    a_stage: usize,
    b_stage: usize,
    cond_back: Option<String>,
    cond_forth: Option<String>,
    drift: Option<String>,
}

fn cmd_bnf(
    run_a_dir: &PathBuf,
    run_b_dir: &PathBuf,
    eps: &str,
    stages: usize,
) -> Result<(), Failure> {
    let eps = parse_rational(eps).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))?;
    let _lock_a = LockGuard::acquire(run_a_dir)?;
    let _lock_b = if run_a_dir != run_b_dir {
        Some(LockGuard::acquire(run_b_dir)?)
    } else {
        None
    };
    let mut run_a = manifest::load_run(run_a_dir)?;
    let mut run_b = manifest::load_run(run_b_dir)?;
    let seed = SeedIsometry::trivial(&run_a, &run_b);
    let state = back_and_forth(&mut run_a, &mut run_b, &seed, &eps, stages)?;
    manifest::save_run(run_a_dir, &run_a)?;
    if run_a_dir != run_b_dir {
        manifest::save_run(run_b_dir, &run_b)?;
    }
    let report = BnfReport {
        eps: format_rational(&state.eps),
        eps_zero: format_rational(&state.eps_zero),
        schedule: state.schedule.iter().map(format_rational).collect(),
        levels: state
            .stages
            .iter()
            .enumerate()
            .map(|(n, l)| BnfLevelReport {
                level: n,
                a_stage: l.a_stage,
                b_stage: l.b_stage,
                cond_back: l.cond_back.as_ref().map(format_rational),
                cond_forth: l.cond_forth.as_ref().map(format_rational),
                drift: l.drift.as_ref().map(format_rational),
            })
            .collect(),
        cert: state.cert.clone(),
    };
    let rel = manifest::write_report(run_a_dir, &format!("bnf_{stages}"), &report)?;
    for (n, l) in state.stages.iter().enumerate() {
        match (&l.cond_back, &l.cond_forth) {
            (Some(b), Some(f)) => println!(
                "level {n}: || g f - id || = {}, || f' g - id || = {}",
                format_rational(b),
                format_rational(f)
            ),
            _ => println!("level {n}: truncation endpoint"),
        }
    }
    if !state.cert.holds() {
        return Err(Failure::new(EXIT_CERT, "back-and-forth certificate failed"));
    }
    println!(
        "back-and-forth certified ({} conditions); report at {rel}",
        state.cert.conditions.len()
    );
    Ok(())
}

fn cmd_verify(run_dir: &PathBuf) -> Result<(), Failure> {
    let report = manifest::verify_run(run_dir)?;
    for e in &report.entries {
        let status = if e.ok { "ok  " } else { "FAIL" };
        if e.detail.is_empty() {
            println!("{status} {}: {}", e.subject, e.condition);
        } else {
            println!("{status} {}: {} [{}]", e.subject, e.condition, e.detail);
        }
    }
    // Replays the scheduler-level checks too.
    let run = match manifest::load_run(run_dir) {
        Ok(run) => Some(run),
        Err(_) => None,
    };
    if let Some(run) = run {
        if let Err(e) = run.verify_ledger() {
            println!("FAIL ledger replay: {e}");
            return Err(Failure::new(EXIT_CERT, format!("ledger replay failed: {e}")));
        }
        println!("ok   ledger replay: {} entries", run.ledger().len());
    }
    if report.ok() {
        println!("verify: all {} checks passed", report.entries.len());
        Ok(())
    } else {
        let first = report.failures().next().expect("some failure");
        Err(Failure::new(
            EXIT_CERT,
            format!("{}: {}", first.subject, first.condition),
        ))
    }
}
