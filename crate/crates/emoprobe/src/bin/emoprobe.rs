use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(emoprobe::cli::run(std::env::args_os()))
}
