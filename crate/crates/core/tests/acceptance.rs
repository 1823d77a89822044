//! Acceptance criteria 1 to 10 with the default configuration.
//!
//! Prints one line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use wiener::suite::{verify, SuiteConfig};

fn main() -> ExitCode {
    let start = Instant::now();
    let report = match verify(&SuiteConfig::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    print!("{}", report.render());
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        report.criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
