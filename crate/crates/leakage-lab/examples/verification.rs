//! Run the full cross-module verification suite and print one line per
//! check; exits nonzero if any check fails.

use leakage_lab::verify::run_verification_suite;

fn main() {
    let results = run_verification_suite();
    let mut failures = 0;
    for r in &results {
        println!("{} {} — {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        failures += usize::from(!r.passed);
    }
    println!("{} checks, {failures} failures", results.len());
    if failures > 0 {
        std::process::exit(2);
    }
}
