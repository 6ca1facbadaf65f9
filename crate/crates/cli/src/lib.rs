//! Scenario runner behind the `irrevkit` binary.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical extraction failure,
//! 4 a checked inequality or agreement failed.

pub mod fixtures;
pub mod io;
pub mod run;
pub mod scenario;
pub mod sweep;

use std::fmt;

pub use run::{run_scenario, Check, Report};
pub use scenario::{Kind, Scenario, SCHEMA};

pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_EXTRACTION: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn schema(message: impl Into<String>) -> Self {
        CliError { code: EXIT_SCHEMA, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<irrevkit::Error> for CliError {
    fn from(e: irrevkit::Error) -> Self {
        use irrevkit::Error as E;
        let code = match &e {
            E::Extraction { .. } | E::BranchProbability { .. } => EXIT_EXTRACTION,
            _ => EXIT_SCHEMA,
        };
        let message = match &e {
            E::Extraction { theta_grid, .. } if !theta_grid.is_empty() => {
                let pts: Vec<String> = theta_grid.iter().map(|(t, d)| format!("({t}, {d:e})")).collect();
                format!("{e}; δ² on the grid: {}", pts.join(", "))
            }
            _ => e.to_string(),
        };
        CliError { code, message }
    }
}
