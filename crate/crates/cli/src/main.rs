use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::{RunArgs, RunConfig};
use error::{CliError, CliResult};

/// Finite-rank Hardy-Lieb-Thirring bounds for radial potentials.
#[derive(Debug, Parser)]
#[command(name = "hardy-lt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Self-consistent optimization of the potential.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Shooting solve for the rank-one ground state.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Diagnostic checks on a stored run directory, or on a fresh run.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Run directory holding manifest.json and potential.csv.
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
    },
    /// Optimization over lists of s, N and c.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Negative spectrum of a potential file.
    Spectrum {
        #[command(flatten)]
        run: RunArgs,
        /// File with columns t,r,V.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
    },
}

/// Resolved configuration plus the hashes of what was read to build it.
pub struct Context {
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    /// `--out` was given explicitly (on the command line or in the file).
    pub out_explicit: bool,
}

fn context(run: &RunArgs) -> CliResult<Context> {
    let (config, file_text) = RunConfig::resolve(run)?;
    let mut inputs = BTreeMap::new();
    if let (Some(path), Some(text)) = (&run.config, &file_text) {
        inputs.insert(path.display().to_string(), output::sha256_hex(text.as_bytes()));
    }
    let out_explicit = run.out.is_some()
        || file_text.as_deref().is_some_and(|t| config::parse_config_text(t).is_ok_and(|m| m.contains_key("out")));
    Ok(Context { config, inputs, out_explicit })
}

type Action<'a> = Box<dyn FnOnce(Context) -> CliResult<()> + Send + 'a>;

fn dispatch(cli: Cli) -> CliResult<()> {
    let (run, action): (&RunArgs, Action) = match &cli.command {
        Command::Optimize { run } => (run, Box::new(commands::optimize::run)),
        Command::Oracle { run } => (run, Box::new(commands::oracle::run)),
        Command::Verify { run, input } => {
            let input = input.clone();
            (run, Box::new(move |ctx| commands::verify::run(ctx, input)))
        }
        Command::Sweep { run } => (run, Box::new(commands::sweep::run)),
        Command::Spectrum { run, input } => {
            let input = input.clone();
            (run, Box::new(move |ctx| commands::spectrum::run(ctx, &input)))
        }
    };
    let ctx = context(run)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.workers)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| action(ctx))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hardy-lt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
