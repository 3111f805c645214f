use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::jsonl::Record;
use crate::instruction::{ChatTurn, Critique};
use crate::perception::{PerceptionConfig, TokenBundle};
use crate::skills::ExecStep;
use crate::world::{Dims, Pos, Scenario};

/// What an episode pursues: one task, or a curriculum of tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EpisodeTarget {
    Task(String),
    Curriculum(String),
}

impl std::fmt::Display for EpisodeTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpisodeTarget::Task(id) => write!(f, "task:{id}"),
            EpisodeTarget::Curriculum(id) => write!(f, "curriculum:{id}"),
        }
    }
}

/// Timestamps are world ticks, which makes records reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeHeader {
    pub seed: u64,
    pub scenario: Scenario,
    pub dims: Dims,
    pub target: EpisodeTarget,
    pub cap: u32,
    pub perception: PerceptionConfig,
    pub agent_config_hash: String,
    /// Hash of the invoking run configuration, when there is one.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub run_config_hash: String,
    pub start_tick: u64,
    pub end_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibleBlock {
    pub pos: Pos,
    pub block: String,
}

/// How one plan step was matched to a skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepTrace {
    pub step: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_confidence: bool,
}

/// One planner iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub iteration: u32,
    pub tick: u64,
    pub task: String,
    pub visible: Vec<VisibleBlock>,
    pub bundle: TokenBundle,
    pub chat: Vec<ChatTurn>,
    pub steps: Vec<StepTrace>,
    pub actions: Vec<ExecStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<Critique>,
    /// Target blocks found so far, counted at the end of the frame.
    pub found: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Completion {
    pub task: String,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub success: bool,
    pub iterations: u32,
    pub items: BTreeMap<String, u32>,
    pub completed: Vec<Completion>,
    /// Target blocks in the found-set at the end, for locate goals.
    pub found: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub header: EpisodeHeader,
    pub frames: Vec<Frame>,
    pub outcome: Outcome,
}

impl EpisodeRecord {
    pub fn completion(&self, task: &str) -> Option<u32> {
        self.outcome.completed.iter().find(|c| c.task == task).map(|c| c.iteration)
    }

    pub fn actions(&self) -> impl Iterator<Item = &ExecStep> {
        self.frames.iter().flat_map(|f| f.actions.iter())
    }
}

impl Record for EpisodeRecord {
    const KIND: &'static str = "episode";

    fn check(&self) -> Result<(), (String, String)> {
        for (i, w) in self.frames.windows(2).enumerate() {
            if w[1].tick <= w[0].tick {
                return Err((format!("frames[{}].tick", i + 1), "frames must be strictly ordered by tick".into()));
            }
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.iteration as usize != i + 1 {
                return Err((format!("frames[{i}].iteration"), format!("expected {}", i + 1)));
            }
        }
        if self.outcome.iterations as usize != self.frames.len() {
            return Err(("outcome.iterations".into(), "must equal the number of frames".into()));
        }
        Ok(())
    }
}
