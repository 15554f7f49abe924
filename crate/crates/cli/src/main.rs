use std::process::ExitCode;

use gampinn_cli::{run, CliError, OUT_ENV};

fn main() -> ExitCode {
    let env_out = std::env::var(OUT_ENV).ok();
    match run(std::env::args_os(), env_out.as_deref()) {
        Ok(report) => {
            for a in &report.artifacts {
                println!("{}", a.display());
            }
            println!("{}", report.manifest.display());
            ExitCode::SUCCESS
        }
        Err(CliError::Args(e)) => e.exit(),
        Err(e) => {
            eprintln!("gampinn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
