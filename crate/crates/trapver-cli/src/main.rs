//! Command-line front end for the trapver verifier.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use trapver::pipeline::{
    self, run_benchmarks, run_bundled_benchmarks, PipelineError, Verdict, VerdictKind,
};
use trapver::smt::SmtTheory;
use trapver::Limits;

/// Deadlock-freedom verifier for component-based systems.
#[derive(Parser)]
#[command(name = "trapver", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a single system file.
    Verify(VerifyArgs),
    /// Run the benchmark corpus (bundled systems, or every .sys file in a
    /// directory) through the parametric verifier.
    Bench(BenchArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// System description file.
    file: PathBuf,
    /// Verification mode: parametric, bounded or exact. Defaults to
    /// parametric when some instance count is `param`, bounded otherwise.
    #[arg(long)]
    mode: Option<trapver::Mode>,
    /// Instance count for a parametric type in the bounded modes,
    /// e.g. --n Task=3. Repeatable.
    #[arg(long = "n", value_name = "TYPE=K")]
    sizes: Vec<String>,
    /// Write the verification condition as an SMT-LIB2 script.
    #[arg(long, value_name = "PATH")]
    emit_smt: Option<PathBuf>,
    /// SMT theory for --emit-smt: lia or sets.
    #[arg(long, default_value = "lia")]
    theory: SmtTheory,
    /// Print the computed invariant.
    #[arg(long)]
    dump_invariant: bool,
    /// Write GraphViz dumps `<PREFIX>.net.dot` and `<PREFIX>.reach.dot`
    /// (bounded and exact modes).
    #[arg(long, value_name = "PREFIX")]
    dot: Option<PathBuf>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
    /// Cap on DNF sizes in the symbolic engines.
    #[arg(long, value_name = "N")]
    max_dnf: Option<usize>,
    /// Cap on explored markings in exact mode.
    #[arg(long, value_name = "N")]
    max_markings: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of .sys files; the bundled corpus when omitted.
    dir: Option<PathBuf>,
    /// Emit the table as JSON.
    #[arg(long)]
    json: bool,
}

// Exit codes: 0 deadlock-free, 1 unknown, 2 exact deadlock, 3 input error,
// 4 resource cap.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify(args) => run_verify(args),
        Command::Bench(args) => run_bench(args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn limits_from(max_dnf: Option<usize>, max_markings: Option<usize>) -> Limits {
    let mut limits = Limits::default();
    if let Some(n) = max_dnf {
        limits.dnf_minterms = n;
    }
    if let Some(n) = max_markings {
        limits.reach_markings = n;
    }
    limits
}

fn parse_sizes(args: &[String]) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for raw in args {
        let (ty, count) = raw
            .split_once('=')
            .with_context(|| format!("--n expects TYPE=K, got `{raw}`"))?;
        let count: usize = count
            .parse()
            .with_context(|| format!("invalid instance count in `{raw}`"))?;
        out.insert(ty.to_string(), count);
    }
    Ok(out)
}

fn run_verify(args: VerifyArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.file)
        .with_context(|| format!("cannot read `{}`", args.file.display()))?;
    let cfg = pipeline::RunConfig {
        mode: args.mode,
        sizes: parse_sizes(&args.sizes)?,
        limits: limits_from(args.max_dnf, args.max_markings),
        emit_smt: args.emit_smt.clone(),
        theory: args.theory,
        dot: args.dot.clone(),
    };
    match pipeline::verify_source(&text, &cfg) {
        Ok(verdict) => {
            print_verdict(&verdict, args.json, args.dump_invariant);
            Ok(verdict.kind.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(if e.is_resource_cap() { 4 } else { 3 })
        }
    }
}

fn print_verdict(verdict: &Verdict, json: bool, dump_invariant: bool) {
    if json {
        let report = verdict.report();
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
        return;
    }
    println!(
        "{}: {} [{} mode, gen {:.1} ms, solve {:.1} ms]",
        verdict.system,
        verdict.kind.label(),
        match verdict.mode {
            trapver::Mode::Parametric => "parametric",
            trapver::Mode::Bounded => "bounded",
            trapver::Mode::Exact => "exact",
        },
        verdict.t_gen.as_secs_f64() * 1e3,
        verdict.t_solve.as_secs_f64() * 1e3,
    );
    match &verdict.kind {
        VerdictKind::Unknown(witness) => {
            println!("potential deadlock shape:");
            println!("  {witness}");
        }
        VerdictKind::ExactDeadlock(trace) => {
            println!("deadlock trace:");
            for step in trace {
                println!("  {step}");
            }
        }
        _ => {}
    }
    if dump_invariant {
        println!("invariant: {}", verdict.invariant);
    }
    if let Some(path) = &verdict.smt_file {
        println!("smt script: {}", path.display());
    }
}

fn run_bench(args: BenchArgs) -> Result<u8> {
    let limits = Limits::default();
    let report = match &args.dir {
        None => map_pipeline_err(run_bundled_benchmarks(&limits))?,
        Some(dir) => {
            let mut entries = Vec::new();
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("cannot read directory `{}`", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "sys"))
                .collect();
            paths.sort();
            for path in paths {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("cannot read `{}`", path.display()))?;
                entries.push((name, text));
            }
            if entries.is_empty() {
                anyhow::bail!("no .sys files in `{}`", dir.display());
            }
            map_pipeline_err(run_benchmarks(&entries, &limits))?
        }
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        print!("{}", report.render_table());
    }
    Ok(0)
}

fn map_pipeline_err<T>(r: Result<T, PipelineError>) -> Result<T> {
    r.map_err(|e| anyhow::anyhow!("{e}"))
}
