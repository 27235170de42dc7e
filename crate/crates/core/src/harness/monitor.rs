//! Standalone robustness check of a formula against a recorded trace.

use std::path::Path;

use stlmarl_stl::{parse_formula, robustness, StlError, Trace};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOutcome {
    pub robustness: f64,
    pub satisfied: bool,
}

impl MonitorOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.satisfied {
            0
        } else {
            1
        }
    }
}

/// Formula text with `#` comment lines and blank lines dropped.
pub fn formula_text(raw: &str) -> String {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn monitor_text(formula: &str, trace_csv: &str, t: usize) -> Result<MonitorOutcome> {
    let f = parse_formula(&formula_text(formula))?;
    let trace = Trace::read_csv(trace_csv.as_bytes(), 1.0)?;
    if t >= trace.len() {
        return Err(StlError::IndexOutOfRange { t, len: trace.len() }.into());
    }
    let rho = robustness(&f, &trace, t)?;
    Ok(MonitorOutcome {
        robustness: rho,
        satisfied: rho >= 0.0,
    })
}

pub fn monitor(formula: &Path, trace: &Path, t: usize) -> Result<MonitorOutcome> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CoreError::io(p, e));
    monitor_text(&read(formula)?, &read(trace)?, t)
}
