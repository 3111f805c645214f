use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::jsonl::{scan, Violation};
use super::{DatasetError, EpisodeRecord, QAPair};
use crate::skills::SkillCodeEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackKind {
    Qa,
    Episode,
    Skill,
}

impl FromStr for PackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa" => Ok(PackKind::Qa),
            "episode" => Ok(PackKind::Episode),
            "skill" => Ok(PackKind::Skill),
            other => Err(format!("unknown pack kind `{other}` (expected qa, episode or skill)")),
        }
    }
}

impl fmt::Display for PackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PackKind::Qa => "qa",
            PackKind::Episode => "episode",
            PackKind::Skill => "skill",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: usize,
    pub errors: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn validate_text(text: &str, kind: PackKind) -> ValidationReport {
    fn count<T: super::jsonl::Record>(text: &str) -> ValidationReport {
        let (records, errors) = scan::<T>(text);
        ValidationReport { valid: records.len(), errors }
    }
    match kind {
        PackKind::Qa => count::<QAPair>(text),
        PackKind::Episode => count::<EpisodeRecord>(text),
        PackKind::Skill => count::<SkillCodeEntry>(text),
    }
}

/// Checks every line of a pack. Only failing to read the file is an error.
pub fn validate_pack(path: &Path, kind: PackKind) -> Result<ValidationReport, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(validate_text(&text, kind))
}
