//! `dbarlab` command-line front end.

mod cache;
mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cache::ResultCache;
use config::RunConfig;
use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "dbarlab", version, about = "Weighted ∂̄ solves, magnetic spectra and compactness diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; `--section.key=value` flags override it.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Bypass the result cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Worker threads for parallel kernels and ball eigenproblems.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 3 when diagnose is inconclusive.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check subharmonicity and the doubling property of the weight.
    WeightsCheck,
    /// Lowest eigenvalues of the magnetic operator.
    Eigs,
    /// Canonical solution of ∂̄u = f.
    Solve,
    /// Compactness classification.
    Diagnose,
    /// Local ground-energy profile only.
    ScanMu,
    /// Merge the artifacts in the output directory.
    Report,
}

/// Splits `--a.b=v` / `--a.b v` overrides from the arguments clap sees.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), Failure> {
    let mut plain = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            plain.push(a);
            continue;
        };
        let (name, value) = match body.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        if !name.contains('.') {
            plain.push(a);
            continue;
        }
        let value = match value {
            Some(v) => v,
            None => it.next().ok_or_else(|| Failure::config(format!("override --{name} has no value")))?,
        };
        overrides.push((name, value));
    }
    Ok((plain, overrides))
}

fn run() -> Result<(), Failure> {
    let (plain, overrides) = split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(plain) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Failure::config(e.to_string().trim().to_string())),
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::config("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let out_dir = cfg.output.directory.clone();
    let cache = ResultCache::from_env(&out_dir.join(".cache"), !cli.no_cache);
    let (artifacts, outcome) = match cli.command {
        Command::WeightsCheck => commands::weights_check(&cfg)?,
        Command::Eigs => commands::eigs(&cfg, &cache)?,
        Command::Solve => commands::solve(&cfg, &cache)?,
        Command::Diagnose => commands::diagnose(&cfg, &cache, cli.strict)?,
        Command::ScanMu => commands::scan_mu(&cfg, &cache)?,
        Command::Report => commands::report(&out_dir)?,
    };
    commands::write_artifacts(&out_dir, &artifacts)?;
    println!("{}", outcome.summary);
    match outcome.deferred {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code as u8)
        }
    }
}
