use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(csx_cli::run(std::env::args_os()))
}
