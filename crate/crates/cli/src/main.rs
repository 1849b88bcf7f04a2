use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use molenum::oracle::{classes, naive_enumerate, DEFAULT_ORACLE_CAP};
use molenum::smiles::graph_to_smiles;
use molenum::{write_smiles, ElementTable, MolecularFormula, StopReason};
use molenum_cli::corpus::{check_entry, parse_corpus, Summary};
use molenum_cli::job::{Dedup, Defaults, JobSpec, SpecError};
use molenum_cli::render::graph_json;
use molenum_cli::service::{router, ServiceConfig};
use molenum_cli::DEFAULT_LISTEN;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Enumerates non-isomorphic molecular graphs for a molecular formula.
#[derive(Debug, Parser)]
#[command(name = "molenum", version)]
struct Cli {
    /// Element table overrides, one `symbol atomic_number valence` per line.
    #[arg(long, global = true)]
    elements: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate the structures of a formula.
    Enumerate(EnumerateArgs),
    /// Check that every molecule of a corpus is rediscovered.
    Validate(ValidateArgs),
    /// Brute-force reference enumeration for small formulas.
    Oracle(OracleArgs),
    /// Run the JSON HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Smiles,
    Json,
    Count,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DedupArg {
    Exact,
    Off,
}

#[derive(Debug, clap::Args)]
struct EnumerateArgs {
    #[arg(long)]
    formula: String,
    /// Required substructure as SMILES; repeatable.
    #[arg(long = "fragment")]
    fragments: Vec<String>,
    /// Bond order (2 or 3) that may not occur; repeatable.
    #[arg(long = "forbid-bond")]
    forbidden: Vec<u8>,
    #[arg(long)]
    max_models: Option<u64>,
    #[arg(long, value_enum, default_value = "exact")]
    dedup: DedupArg,
    #[arg(long, value_enum, default_value = "smiles")]
    format: Format,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Print search counters to standard error.
    #[arg(long)]
    stats: bool,
}

#[derive(Debug, clap::Args)]
struct ValidateArgs {
    /// TSV file of `name<TAB>formula<TAB>smiles` lines.
    #[arg(long)]
    corpus: PathBuf,
    /// Per-entry limit in seconds.
    #[arg(long, default_value_t = 420.0)]
    timeout: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleFormat {
    Smiles,
    Count,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    #[arg(long)]
    formula: String,
    /// Largest heavy-atom count attempted.
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    cap: usize,
    #[arg(long, value_enum, default_value = "count")]
    format: OracleFormat,
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long, env = "MOLENUM_LISTEN", default_value = DEFAULT_LISTEN)]
    listen: String,
    /// Jobs queued or running at once.
    #[arg(long, default_value_t = 4)]
    max_jobs: usize,
    /// Seconds an idle finished job is kept.
    #[arg(long, default_value_t = 3600)]
    ttl: u64,
    /// Model limit for jobs that set none.
    #[arg(long)]
    max_models: Option<u64>,
    /// Time limit in seconds for jobs that set none.
    #[arg(long)]
    timeout: Option<f64>,
    /// Directory of UI assets served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // exit code 2 is reserved for infeasible formulas
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let table = match load_table(cli.elements.as_ref()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let code = match cli.command {
        Command::Enumerate(args) => enumerate(args, &table),
        Command::Validate(args) => validate(args, &table),
        Command::Oracle(args) => oracle(args, &table),
        Command::Serve(args) => serve(args, table),
    };
    ExitCode::from(code)
}

fn load_table(path: Option<&PathBuf>) -> Result<ElementTable, String> {
    let Some(path) = path else {
        return Ok(ElementTable::builtin());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ElementTable::load(Some(&text)).map_err(|e| e.to_string())
}

fn seconds(t: Option<f64>) -> Result<Option<Duration>, String> {
    match t {
        Some(s) if !(s.is_finite() && s > 0.0) => Err("timeout must be a positive number".into()),
        Some(s) => Ok(Some(Duration::from_secs_f64(s))),
        None => Ok(None),
    }
}

fn enumerate(args: EnumerateArgs, table: &ElementTable) -> u8 {
    let spec = JobSpec {
        formula: args.formula,
        fragments: args.fragments,
        forbidden_bond_orders: args.forbidden,
        max_models: args.max_models,
        dedup: match args.dedup {
            DedupArg::Exact => Dedup::Exact,
            DedupArg::Off => Dedup::Off,
        },
        timeout_seconds: args.timeout,
    };
    let enumerator = match spec.prepare(table, Defaults::default()) {
        Ok(e) => e,
        Err(SpecError::Infeasible(m)) => {
            eprintln!("error: {m}");
            return EXIT_INFEASIBLE;
        }
        Err(SpecError::Invalid(fields)) => {
            for (field, message) in fields {
                eprintln!("error: {field}: {message}");
            }
            return EXIT_ERROR;
        }
    };
    let start = Instant::now();
    let mut out = BufWriter::new(io::stdout().lock());
    let mut count = 0u64;
    let mut graphs = Vec::new();
    let result = enumerator.run(|rep| {
        count += 1;
        match args.format {
            Format::Smiles => {
                if writeln!(out, "{}", write_smiles(&rep)).is_err() {
                    return ControlFlow::Break(());
                }
            }
            Format::Json => graphs.push(graph_json(&rep, table)),
            Format::Count => {}
        }
        ControlFlow::Continue(())
    });
    let stats = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let written = match args.format {
        Format::Smiles => Ok(()),
        Format::Json => serde_json::to_string_pretty(&graphs)
            .map_err(io::Error::other)
            .and_then(|s| writeln!(out, "{s}")),
        Format::Count => writeln!(out, "{count}"),
    };
    if written.and_then(|()| out.flush()).is_err() {
        return EXIT_ERROR;
    }
    if args.stats {
        eprintln!("raw {}", stats.raw);
        eprintln!("deduped {}", stats.emitted);
        eprintln!("pruned {}", stats.pruned);
        eprintln!("nodes {}", stats.nodes);
        if stats.unkeyed > 0 {
            eprintln!("unkeyed {}", stats.unkeyed);
        }
        eprintln!("elapsed {:.3}s", start.elapsed().as_secs_f64());
    }
    match stats.stop {
        StopReason::MaxModels => {
            eprintln!("warning: model limit reached, output is partial");
            EXIT_BUDGET
        }
        StopReason::TimeLimit => {
            eprintln!("warning: time limit reached, output is partial");
            EXIT_BUDGET
        }
        _ => 0,
    }
}

fn validate(args: ValidateArgs, table: &ElementTable) -> u8 {
    let timeout = match seconds(Some(args.timeout)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let text = match std::fs::read_to_string(&args.corpus) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.corpus.display());
            return EXIT_ERROR;
        }
    };
    let (entries, skipped) = parse_corpus(&text);
    let mut summary = Summary {
        skipped: skipped.len(),
        ..Summary::default()
    };
    for s in &skipped {
        eprintln!("warning: line {}: {}", s.line, s.reason);
    }
    let mut out = io::stdout().lock();
    for entry in &entries {
        match check_entry(entry, table, timeout, None) {
            Ok(report) => {
                summary.add(report.outcome);
                let _ = writeln!(
                    out,
                    "{}\t{}\t{:.2}s",
                    report.name,
                    report.outcome,
                    report.elapsed.as_secs_f64()
                );
                let _ = out.flush();
            }
            Err(s) => {
                summary.skipped += 1;
                eprintln!("warning: line {}: {}", s.line, s.reason);
            }
        }
    }
    let _ = writeln!(out, "{summary}");
    if summary.not_found > 0 {
        EXIT_ERROR
    } else {
        0
    }
}

fn oracle(args: OracleArgs, table: &ElementTable) -> u8 {
    let result = MolecularFormula::parse(&args.formula, table)
        .and_then(|f| naive_enumerate(&f, table, args.cap));
    let graphs = match result {
        Ok(g) => classes(&g),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match args.format {
        OracleFormat::Count => println!("{}", graphs.len()),
        OracleFormat::Smiles => {
            for g in &graphs {
                match graph_to_smiles(g) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_ERROR;
                    }
                }
            }
        }
    }
    0
}

fn serve(args: ServeArgs, table: ElementTable) -> u8 {
    let timeout = match seconds(args.timeout) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let config = ServiceConfig {
        max_jobs: args.max_jobs.max(1),
        ttl: Duration::from_secs(args.ttl),
        defaults: Defaults {
            max_models: args.max_models,
            timeout,
        },
        static_dir: args.static_dir,
        table,
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let served = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(config)).await
    });
    match served {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", args.listen);
            EXIT_ERROR
        }
    }
}
