//! Sweeps, metrics and report files.

mod qa;
mod report;
mod stats;
mod sweeps;

use thiserror::Error;

use crate::backends::BackendError;
use crate::instruction::InstructionError;

pub use qa::{judge_prompt, parse_score, score_qa, weighted_overall, CategoryMean, ItemError, QAScore, QaReport, JUDGE_ROLE};
pub use report::{emit_report, render, Report, ReportFormat};
pub use stats::{mean, pearson, sample_sd};
pub use sweeps::{
    run_block_search, run_tech_tree, BlockSearchResult, BlockSearchSeed, TechTreeResult, TechTreeTrial, TierResult,
    BLOCK_SEARCH_CAP, BLOCK_SEARCH_FREE_TASK, BLOCK_SEARCH_TASK, TECH_TREE_CAP, TECH_TREE_CURRICULUM,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("LengthMismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("DegenerateSeries: a series has zero variance")]
    DegenerateSeries,
    #[error("MalformedScore: {0}")]
    MalformedScore(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Instruction(InstructionError),
}
