//! The four-role reasoning engine: planning, critique, curriculum and
//! memory summarization, and the episode loop that drives them.

mod agents;
mod episode;
mod memory;
mod prompts;
mod steps;

use thiserror::Error;

use crate::backends::BackendError;
use crate::skills::SkillError;
use crate::world::WorldError;

pub use agents::{
    candidates, critique, decompose, parse_plan, plan, propose_task, summarize, ChatTurn, Critique, Plan, StepOutcome,
    Verdict,
};
pub use episode::{locate_block, run_episode, snapshot, AgentConfig, EpisodeSpec, Runtime};
pub use memory::{compact, EntryKind, MemoryEntry, MemoryStore, MemoryView, Summary};
pub use prompts::{PromptTemplate, Role, RoleConfig, RoleSet};
pub use steps::{extract_steps, parse_step, resolve_object, ActionStep, Verb, EXPLORE_OBJECT};

#[derive(Debug, Error)]
pub enum InstructionError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not parse reply: {0}")]
    ParseFailure(String),
    #[error("curriculum `{0}` has no task left")]
    CurriculumExhausted(String),
    #[error("summary needs {needed} tokens but the budget is {budget}")]
    BudgetInfeasible { budget: usize, needed: usize },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Skill(SkillError),
    #[error(transparent)]
    World(WorldError),
}
