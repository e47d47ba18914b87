use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hgg::harness::run_cli(std::env::args_os()) as u8)
}
