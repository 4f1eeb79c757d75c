//! Acceptance gate: runs the full suite (including the byte-identical
//! replay) and prints one verdict line per criterion.

use std::process::ExitCode;

use spindle::suite::run_suite;

fn main() -> ExitCode {
    let out = std::env::temp_dir().join("spindle-acceptance");
    let _ = std::fs::remove_dir_all(&out);
    let results = run_suite(&out);
    let mut failed = 0;
    for r in &results {
        let mark = if r.passed { "pass" } else { "FAIL" };
        println!("[{mark}] {:>2}. {}: {}", r.id, r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria FAILED", results.len());
        ExitCode::FAILURE
    }
}
