#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;
mod manifest;
mod units;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use commands::{Context, Outcome};
use error::{CliError, CliResult};
use manifest::{RunManifest, SCHEMA_VERSION};

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn manifest_path(cli: &Cli) -> Option<PathBuf> {
    cli.global.manifest.clone().or_else(|| {
        cli.global.output.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

fn emit(cli: &Cli, out: Outcome) -> CliResult<()> {
    let mut outputs = Vec::new();
    match &cli.global.output {
        Some(path) => {
            write_file(path, &out.data)?;
            outputs.push(path.display().to_string());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.data.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    for (path, text) in &out.extra_outputs {
        write_file(path, text)?;
        outputs.push(path.display().to_string());
    }
    if let Some(path) = manifest_path(cli) {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: cli.command.name().to_string(),
            parameters: out.parameters,
            scheme: out.scheme,
            inputs: out.inputs,
            outputs,
            summary: out.summary,
        };
        write_file(&path, &manifest.to_json())?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    let out = commands::run(&cli.command, Context::new(&cli.global))?;
    emit(cli, out)
}

fn report(err: &CliError) -> ExitCode {
    eprintln!("{}", err.diagnostic());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    report(&CliError::Usage("no subcommand given".into()))
                }
                _ => {
                    let text = e.render().to_string();
                    let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                    report(&CliError::Usage(first.to_string()))
                }
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
