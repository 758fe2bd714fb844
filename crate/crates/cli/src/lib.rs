//! Experiment runner and verification harness for `granular-core`.

pub mod config;
pub mod runner;
pub mod verify;

use std::fmt;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug)]
pub enum Failure {
    Verify(anyhow::Error),
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verify(e) => write!(f, "verification failed: {e:#}"),
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Numeric(e) => write!(f, "numerical failure: {e:#}"),
        }
    }
}

impl std::error::Error for Failure {}
