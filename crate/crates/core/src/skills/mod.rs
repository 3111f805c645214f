//! Skill database, retrieval and script execution.

mod db;
mod exec;
mod script;

use thiserror::Error;

use crate::backends::BackendError;
use crate::datasets::DatasetError;

pub use db::{
    cosine, encode_query, Category, Query, Ranked, Retrieval, Skill, SkillCodeEntry, SkillDatabase,
    DEFAULT_THRESHOLD, SHIPPED_SKILLS_JSONL,
};
pub use exec::{execute_observed, execute_skill, execute_with_cap, Bindings, ExecStep, SkillRun, STEP_CAP};
pub use script::{parse_script, CmpOp, Predicate, Quantity, SkillScript, Stmt, Sym, SyntaxError, SyntaxKind, Value};

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero or unnormalized vector")]
    ZeroVector,
    #[error("skill database is empty")]
    EmptyDatabase,
    #[error("k must be at least 1")]
    BadK,
    #[error("duplicate skill id `{0}`")]
    DuplicateId(String),
    #[error("skill `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("skill `{0}` has no embedding")]
    MissingEmbedding(String),
    #[error("skill `{id}`: {err}")]
    Script { id: String, err: SyntaxError },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Pack(#[from] DatasetError),
    #[error("io: {0}")]
    Io(String),
}
