use std::process::ExitCode;

fn main() -> ExitCode {
    spores::cli::run()
}
