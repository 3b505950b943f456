use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let outcome = hzl::cli::execute(&args);
    print!("{}", outcome.report);
    ExitCode::from(outcome.exit_code as u8)
}
