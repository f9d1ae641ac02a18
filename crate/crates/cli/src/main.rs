use std::io::Write;

use clap::Parser;
use synthforge::{run, Cli};

fn main() {
    let outcome = run(Cli::parse());
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    if !outcome.summary.is_empty() {
        // a closed pipe is not a failure of the command
        let _ = writeln!(std::io::stdout(), "{}", outcome.summary);
    }
    std::process::exit(outcome.code);
}
