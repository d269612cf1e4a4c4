//! Command-line front end: configuration parsing, dispatch, result
//! persistence and plot emission for the identification lab.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numeric or regime failure
//! (e.g. a bound request on an irregular matrix), 3 I/O failure.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

pub use commands::{run_command, Cli};

/// Process exit codes (the external contract).
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const NUMERIC: i32 = 2;
    pub const IO: i32 = 3;
}

/// Map a core error to its exit code.
pub fn exit_code_for(err: &sysid_core::Error) -> i32 {
    use sysid_core::Error::*;
    match err {
        Io(_) => exit::IO,
        InvalidDimension(_) | DimensionMismatch(_) | InvalidParameter(_) | Missing(_) => {
            exit::USAGE
        }
        NonFinite(_) | Singular(_) | Numeric(_) | Overflow(_) | Regime(_) | Irregular(_) => {
            exit::NUMERIC
        }
    }
}
