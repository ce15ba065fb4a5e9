//! The `mifs` command-line tool.
//!
//! Every subcommand writes its outputs under `--out` and records a
//! `run.json` beside them; `mifs replay --run <file>` re-executes it.

pub mod args;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use mifs_core::{Error, Result};

use args::{Cli, Command};
use output::{RunRecord, RUN_FILE};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_FORMAT: u8 = 5;
pub const EXIT_EXTERNAL: u8 = 6;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Dimension { .. } => EXIT_DOMAIN,
        Error::Io { .. } => EXIT_IO,
        Error::Format { .. } | Error::Manifest(_) => EXIT_FORMAT,
        Error::ExternalCodec(_) => EXIT_EXTERNAL,
    }
}

/// Parses `argv`, runs, and maps failures to exit codes.
pub fn main_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "mifs: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one parsed invocation, including the `run.json` record.
pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Replay(r) = &cli.command {
        let record = RunRecord::read(&r.run)?;
        if matches!(record.command, Command::Replay(_)) {
            return Err(Error::Domain("a run record cannot itself be a replay".into()));
        }
        let replay = Cli {
            global: args::Global {
                out: cli.global.out.clone(),
                threads: cli.global.threads,
                format: record.format,
                seed: Some(record.seed),
            },
            command: record.command,
        };
        return dispatch(&replay);
    }
    let command = commands::absolutize(&cli.command)?;
    let seed = cli.global.seed.unwrap_or_else(|| command.default_seed());
    let ctx = commands::Context {
        out: cli.global.out.clone(),
        format: cli.global.format,
        seed,
    };
    output::ensure_dir(&ctx.out)?;
    commands::execute(&command, &ctx)?;
    let record = RunRecord {
        tool: "mifs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        format: cli.global.format,
        command,
    };
    output::write_json(&ctx.out.join(RUN_FILE), &record)
}
