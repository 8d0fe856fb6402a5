use std::process::ExitCode;

fn main() -> ExitCode {
    momsps::cli::main_with(std::env::args_os())
}
