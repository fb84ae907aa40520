//! Acceptance criteria 1 to 12. Prints one PASS/FAIL line per criterion.
//!
//! Two criteria cannot pass as stated and stay red (see notes/decisions.md):
//! 5 asks for 1e-3 relative accuracy of the raw scaled difference at n = 256
//! while the first correction is O(1/n), and 9 asks for the disc median of
//! lambda_k / k within 2% of 4 while the boundary term contributes about 2.6%
//! at k ~ 1500. For those the test pins the failure to exactly that check
//! and its size, so any other regression still fails the test.

use std::io::Write;

use calderon_core::suite::{run_suite, Criterion, SuiteConfig};

const SEED: u64 = 7;

fn failing(c: &Criterion) -> Vec<&str> {
    c.checks.iter().filter(|k| !k.pass).map(|k| k.name.as_str()).collect()
}

fn known_red(c: &Criterion) {
    let bad = failing(c);
    match c.id {
        5 => {
            assert_eq!(bad.len(), 1, "criterion 5: unexpected failures {bad:?}");
            assert!(bad[0].contains("relative error of |n|"), "{bad:?}");
            let v = c.checks.iter().find(|k| !k.pass).unwrap().value;
            // -(3 alpha' + alpha'') / (8 n alpha'/4) at n = 256 for the cubic profile
            assert!((v - 0.0135).abs() < 0.002, "raw relative error {v}");
            let rich = c.informational.iter().find(|k| k.name.contains("Richardson")).unwrap().value;
            assert!(rich < 1e-3, "Richardson estimate {rich}");
        }
        9 => {
            assert_eq!(bad.len(), 1, "criterion 9: unexpected failures {bad:?}");
            assert!(bad[0].contains("disc median"), "{bad:?}");
            let v = c.checks.iter().find(|k| !k.pass).unwrap().value;
            assert!((v - 0.0258).abs() < 0.002, "median offset {v}");
        }
        _ => unreachable!(),
    }
    assert!(c.runtime_limit_seconds.is_none_or(|l| c.seconds <= l), "criterion {} over time", c.id);
}

#[test]
fn acceptance_criteria() {
    let (criteria, report) = run_suite(&SuiteConfig::new(SEED));
    // through the handle, not println!, so the lines survive output capture
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for c in &criteria {
        writeln!(out, "{}", c.line()).unwrap();
    }
    drop(out);
    if let Some(path) = std::env::var_os("CALDERON_ACCEPTANCE_REPORT") {
        std::fs::write(path, report.to_json()).unwrap();
    }
    assert_eq!(criteria.len(), 12);
    for c in &criteria {
        if [5, 9].contains(&c.id) {
            known_red(c);
        } else {
            assert!(c.pass, "{}\n{:#?}", c.line(), c.checks.iter().filter(|k| !k.pass).collect::<Vec<_>>());
        }
    }
}
