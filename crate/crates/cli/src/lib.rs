//! Command-line harness: each subcommand writes one run directory with its
//! outputs and a manifest that reproduces it.

pub mod args;
pub mod checks;
pub mod commands;
pub mod error;
pub mod experiment;
pub mod figure;
pub mod manifest;

use args::{Cli, Command};
use error::CliResult;

/// Runs a parsed command line. `argv` excludes the program name and is
/// recorded verbatim in the manifest.
pub fn execute(cli: &Cli, argv: &[String]) -> CliResult<u8> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a, argv),
        Command::Train(a) => commands::train(a, argv),
        Command::Dlp(a) => commands::dlp(a, argv),
        Command::Threshold(a) => commands::threshold(a, argv),
        Command::Audit(a) => commands::audit(a, argv),
        Command::Verify(a) => commands::verify(a, argv),
        Command::Figure(a) => commands::figure(a, argv),
        Command::Reproduce(a) => commands::reproduce(a, argv),
    }
}

/// Parses, runs and maps errors to exit codes, reporting them on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let raw: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&raw) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::EXIT_USAGE } else { error::EXIT_OK };
        }
    };
    let argv: Vec<String> = raw.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
