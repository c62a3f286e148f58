//! Finite-difference suite as a pass/fail report.

use std::fmt::Write as _;

use nirmal_core::gradcheck::{run_suite_with, CheckResult, CHECK_NAMES};

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-5;
pub const DEFAULT_SEED: u64 = 2024;

/// Runs every check. With `corrupt`, the named check's analytic gradient is
/// scaled by 1.01 first, which must make that check fail.
pub fn run(seed: u64, corrupt: Option<&str>) -> Result<Vec<CheckResult>> {
    if let Some(name) = corrupt {
        if !CHECK_NAMES.contains(&name) {
            return Err(Error::Config(format!(
                "unknown check {name:?}; expected one of {}",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    let mut tamper = |name: &'static str, grad: &mut [f64]| {
        if Some(name) == corrupt {
            grad.iter_mut().for_each(|g| *g *= 1.01);
        }
    };
    Ok(run_suite_with(seed, TOLERANCE, &mut tamper)?)
}

pub fn format_report(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(
            out,
            "{:<22} {} max_rel_error={:.3e} checked={}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.max_rel_error,
            r.checked
        );
    }
    out
}

/// `Err(GradCheck)` naming every failed check.
pub fn verdict(results: &[CheckResult]) -> Result<()> {
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::GradCheck(format!(
            "{} above {TOLERANCE:e}",
            failed.join(", ")
        )))
    }
}
