//! Runs the fourteen acceptance criteria and prints one line per criterion.
//!
//! Criteria run on separate threads; results print in order. A criterion
//! listed in `KNOWN_FAILURES` must fail on exactly the named check and pass
//! every other check; anything else failing fails the target.

use std::process::ExitCode;
use std::thread;

use granular_cli::verify::{CriterionResult, run_criterion};

/// `(criterion, check)` pairs that fail on a correct build because the
/// stated identity does not hold for general inputs.
const KNOWN_FAILURES: &[(u8, &str)] = &[(3, "interpolation residual")];

fn judge(r: &CriterionResult) -> Result<&'static str, String> {
    let known: Vec<&str> = KNOWN_FAILURES.iter().filter(|(id, _)| *id == r.id).map(|(_, c)| *c).collect();
    if known.is_empty() {
        return match (r.passed, r.soft) {
            (true, _) => Ok("PASS"),
            (false, true) => Ok("SOFT-FAIL"),
            (false, false) => Err("failed".into()),
        };
    }
    for c in &r.checks {
        let expected_red = known.contains(&c.name.as_str());
        if expected_red && c.passed {
            return Err(format!("check `{}` was expected to fail but passed; update KNOWN_FAILURES", c.name));
        }
        if !expected_red && !c.passed {
            return Err(format!("check `{}` failed", c.name));
        }
    }
    Ok("FAIL (known)")
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let results: Vec<CriterionResult> = thread::scope(|s| {
        let handles: Vec<_> = (1..=14u8).map(|id| s.spawn(move || run_criterion(id, None))).collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread panicked")).collect()
    });
    let mut bad = Vec::new();
    println!();
    for r in &results {
        let verdict = judge(r);
        let label = match &verdict {
            Ok(l) => *l,
            Err(_) => "FAIL",
        };
        println!("criterion {:>2} {:<13} {:<30} {:>7.1} s", r.id, label, r.name, r.seconds);
        for c in &r.checks {
            println!("    {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.measured);
        }
        if let Err(why) = verdict {
            bad.push(format!("criterion {}: {why}", r.id));
        }
    }
    let known = results.iter().filter(|r| judge(r) == Ok("FAIL (known)")).count();
    println!(
        "\nacceptance: {} passed, {known} known failure(s), {} unexpected failure(s)",
        results.iter().filter(|r| r.passed).count(),
        bad.len()
    );
    if bad.is_empty() {
        ExitCode::SUCCESS
    } else {
        for b in &bad {
            eprintln!("{b}");
        }
        ExitCode::FAILURE
    }
}
