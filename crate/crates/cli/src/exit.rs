//! Exit-code contract.

use std::fmt;

use diglacian_core::Error;

pub const VERIFY_FAILED: i32 = 1;
pub const PARSE_ERROR: i32 = 2;
pub const PRECONDITION: i32 = 3;
pub const MISSING_ARTIFACTS: i32 = 4;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for Exit {}

pub fn with_code(code: i32, error: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(Exit { code, error: error.into() })
}

/// Input problems are parse errors; everything else the library rejects
/// is a violated precondition.
pub fn classify(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::InconsistentCounts(_) => PARSE_ERROR,
        _ => PRECONDITION,
    }
}

/// Exit code for an error that bubbled up to `main`.
pub fn code_of(err: &anyhow::Error) -> i32 {
    if let Some(exit) = err.downcast_ref::<Exit>() {
        return exit.code;
    }
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        return classify(e);
    }
    if err.chain().any(|c| c.is::<std::io::Error>() || c.is::<serde_json::Error>()) {
        return PARSE_ERROR;
    }
    PRECONDITION
}
