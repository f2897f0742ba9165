//! One line per acceptance criterion; exits non-zero if any fails.

use std::process::ExitCode;

use cascadet::selfcheck::CHECKS;

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("scratch directory");
    let mut results = Vec::new();
    for check in CHECKS {
        let r = check(dir.path());
        println!("{r}");
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
