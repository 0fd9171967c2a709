use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(microelast::cli::run_cli() as u8)
}
