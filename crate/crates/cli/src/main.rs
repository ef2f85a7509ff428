use std::process::ExitCode;

use clap::Parser;

use adaptive_brdf_cli::{run, RunConfig};

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("adbrdf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
