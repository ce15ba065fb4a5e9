use std::process::ExitCode;

fn main() -> ExitCode {
    mifs_cli::main_with(std::env::args_os())
}
