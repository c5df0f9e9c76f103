use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use edmp_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.stdout.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("edmp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
