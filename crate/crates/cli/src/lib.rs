//! Batch front door for qclimit experiments.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Exit-code class of a failed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitClass {
    Config = 2,
    Assumption = 3,
    Solver = 4,
    Verdict = 5,
}

#[derive(Clone, Debug)]
pub struct CliError {
    pub class: ExitClass,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self { class: ExitClass::Config, message }
    }

    pub fn io(e: std::io::Error) -> Self {
        Self { class: ExitClass::Config, message: format!("output: {e}") }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<qclimit::Error> for CliError {
    fn from(e: qclimit::Error) -> Self {
        use qclimit::Error::*;
        let class = match &e {
            Assumption(_) | NoKlmnPair { .. } | NonReal(_) | CurlMismatch(_) => ExitClass::Assumption,
            NoConvergence(_) | NegativeForm(_) | IndefiniteShift { .. } | BudgetExceeded { .. } | TruncationTail { .. }
            | DegenerateDenominator => ExitClass::Solver,
            _ => ExitClass::Config,
        };
        Self { class, message: e.to_string() }
    }
}
