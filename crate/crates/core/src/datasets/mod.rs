//! Record schemas, pack files, validation and episode replay.

mod episode;
pub mod jsonl;
mod qa;
mod replay;
mod validate;

use std::path::Path;

use thiserror::Error;

pub use episode::{Completion, EpisodeHeader, EpisodeRecord, EpisodeTarget, Frame, Outcome, StepTrace, VisibleBlock};
pub use jsonl::{from_jsonl, read_records, scan, to_jsonl, write_records, Record, Violation};
pub use qa::{QAPair, QaCategory, QA_FIXTURE_JSONL};
pub use replay::{replay, ReplayVerdict};
pub use validate::{validate_pack, validate_text, PackKind, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("record {index} (line {line}): {field}: {message}")]
    SchemaViolation { index: usize, line: usize, field: String, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        DatasetError::Io(format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests;
