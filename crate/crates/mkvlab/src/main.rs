use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mkvlab::cli::main_with_args(std::env::args_os()))
}
