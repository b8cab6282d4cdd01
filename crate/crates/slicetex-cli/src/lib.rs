//! Library half of the `slicetex` command-line tool: run configuration,
//! manifest plumbing, image I/O, and the command implementations. The binary
//! in `main.rs` only parses flags and maps errors to exit codes, so
//! everything here is callable (and tested) in-process.

pub mod backend;
pub mod cmd_ablate;
pub mod cmd_gen;
pub mod cmd_report;
pub mod cmd_sweep;
pub mod cmd_synth;
pub mod config;
pub mod grid;
pub mod io;
pub mod manifest;

use thiserror::Error;

/// Command failures split by exit code: usage problems (bad flags, bad
/// config files, missing inputs the user named wrong) exit with 2, runtime
/// failures (I/O, numerical trouble, undersized images) with 1.
#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CmdError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CmdError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CmdError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Runtime(_) => 1,
        }
    }
}

impl From<slicetex::Error> for CmdError {
    fn from(e: slicetex::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CmdError {
    fn from(e: csv::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

pub type CmdResult<T> = std::result::Result<T, CmdError>;
