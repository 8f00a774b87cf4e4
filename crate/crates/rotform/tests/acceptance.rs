//! Acceptance suite: runs every check at its pinned tolerance and prints
//! one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines and timings.

use rotform::selfcheck::run_all;

#[test]
fn acceptance_criteria() {
    let results = run_all(None, None);
    assert_eq!(results.len(), 12, "every criterion must run");
    let mut failed = Vec::new();
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2}. {:<28} {:>7.2}s  {}", r.id, r.name, r.seconds, r.detail);
        if !r.passed {
            failed.push(format!("{}: {}", r.name, r.detail));
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
