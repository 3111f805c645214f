//! Deterministic voxel world: block registry, recipes, scenario generation,
//! primitive actions, visibility and task goals.

mod action;
mod nav;
mod rules;
mod scenario;
mod state;
mod task;
mod view;

use thiserror::Error;

pub use action::{
    advance_clock, apply_action, explore_route_step, facing, in_reach, station_in_reach, ActionResult,
    FailureCode, PrimitiveAction,
};
pub use nav::{find_path, nearest_exposed, placement_spot};
pub use rules::{BlockId, BlockType, Recipe, Station, WorldRules, SHIPPED_WORLD_TOML};
pub use scenario::{generate_world, survey_lanes, survey_turns, Scenario, MIN_DIMS};
pub use state::{AgentState, Dims, Dir, Pos, WorldState, MAX_VITAL};
pub use task::{check_task, Curriculum, FoundSet, Goal, Task, TaskRegistry, SHIPPED_TASKS_TOML};
pub use view::{eye, gaze, proximity_set, visible_set, ViewConfig, Visible, EYE_HEIGHT, FOOTPRINT};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world config: {0}")]
    Config(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("dims {dims} too small for {scenario} (minimum {min})")]
    DimsTooSmall { scenario: Scenario, dims: Dims, min: Dims },
    #[error("malformed action `{0}`")]
    BadAction(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task config: {0}")]
    TaskConfig(String),
}
