use std::process::ExitCode;

fn main() -> ExitCode {
    let code = timechange_cn::cli::main_with_args(std::env::args_os());
    ExitCode::from(code as u8)
}
