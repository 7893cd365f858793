use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ncscale::cli::run())
}
