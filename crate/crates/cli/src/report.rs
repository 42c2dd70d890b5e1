//! Shared output plumbing: exit-code-typed failures and report emission.

use clap::ValueEnum;
use std::path::Path;

/// Usage/format failures exit 2, verification failures exit 3.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::format(e.to_string())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes a report to a file, or to stdout when no path was given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}
