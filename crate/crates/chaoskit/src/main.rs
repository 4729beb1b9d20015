use std::path::PathBuf;
use std::process::ExitCode;

use chaoskit::{dispatch, load_config, Command, Exit, Invocation, RunConfig};
use clap::{CommandFactory, Parser};

/// Propagation-of-chaos experiments for interacting particle systems with
/// cut-off singular kernels.
#[derive(Parser)]
#[command(name = "chaoskit", version)]
struct Cli {
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON schema of the configuration and exit.
    #[arg(long)]
    print_schema: bool,
    /// Suppress progress lines.
    #[arg(long, short)]
    quiet: bool,
}

fn fail(exit: Exit, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(exit.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(Exit::Error.code() as u8),
            };
        }
    };
    if cli.print_schema {
        println!("{}", serde_json::to_string_pretty(&RunConfig::schema()).expect("schema prints"));
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("{}", Cli::command().render_usage());
        return fail(Exit::Error, "missing command");
    };
    let config = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(mut c) => {
                if let Some(s) = cli.seed {
                    c.sim.seed = s;
                }
                Some(c)
            }
            Err(e) => return fail(Exit::Error, e),
        },
        None => None,
    };
    let inv = Invocation {
        command,
        config,
        out: cli.out,
        seed: cli.seed.unwrap_or(0),
        verbose: !cli.quiet,
    };
    match dispatch(&inv) {
        Ok(o) => {
            if let Some(d) = &o.dir {
                println!("{}: {} ({})", command.name(), o.summary, d.display());
            }
            if o.exit != Exit::Ok {
                eprintln!("{} finished with status {}", command.name(), o.exit.code());
            }
            ExitCode::from(o.exit.code() as u8)
        }
        Err(e) => fail(Exit::of_error(&e), format!("{e:#}")),
    }
}
