//! Pass/fail records shared by the invariant suites and the batch driver.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: &str) -> Check {
        Check {
            name: name.to_string(),
            pass,
            detail: detail.to_string(),
        }
    }

    pub fn fail(name: &str, detail: String) -> Check {
        Check {
            name: name.to_string(),
            pass: false,
            detail,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// One line per check, stable across runs.
pub fn render(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(if c.pass { "pass" } else { "FAIL" });
        out.push_str("  ");
        out.push_str(&c.name);
        if !c.detail.is_empty() {
            out.push_str("  -- ");
            out.push_str(&c.detail);
        }
        out.push('\n');
    }
    out
}
