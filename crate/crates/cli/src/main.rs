use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(binife_cli::cli_main(std::env::args_os()))
}
