//! Command-line plumbing: configuration, diagnostics files, the verification
//! suite, the scaling sweep and run reports.

pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod report;
pub mod scaling;
pub mod verify;

use crate::error::Error;

/// Exit status for a failed command: 1 for a failed check (including a
/// blown-up run), 2 for usage, configuration or I/O problems.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Blowup { .. } => 1,
        _ => 2,
    }
}
