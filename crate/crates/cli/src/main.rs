use std::process::ExitCode;

use clap::Parser;
use qecstep_cli::{configure_threads, execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| cli.settings()).and_then(|s| execute(&s).map(|o| (s, o)));
    match result {
        Ok((settings, outcome)) => {
            print!("{}", outcome.summary);
            for a in &outcome.assertions {
                println!("{a}");
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed(settings.assert) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
