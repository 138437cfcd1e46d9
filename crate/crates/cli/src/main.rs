use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(impact_parity_cli::run(std::env::args_os()))
}
