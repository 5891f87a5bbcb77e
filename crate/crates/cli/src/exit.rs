//! Exit codes and the error type commands return.

use std::fmt;

use pxplore_core::Error;

pub const OK: u8 = 0;
pub const INPUT: u8 = 2;
pub const INSUFFICIENT: u8 = 3;
pub const DOMAIN: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, msg: impl fmt::Display) -> Self {
        Self {
            code,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::EmptyCandidates | Error::NonFinite(_) | Error::Diverged { .. } => DOMAIN,
        _ => INPUT,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: core_code(&e),
            error: e.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Attaches an exit code and context to any error.
pub trait WithCode<T> {
    fn code(self, code: u8, ctx: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for std::result::Result<T, E> {
    fn code(self, code: u8, ctx: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into().context(ctx.to_string()),
        })
    }
}
