//! Turns what the agent sees, its state and its task into one text-space
//! token bundle.

mod tokens;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{
    eye, proximity_set, visible_set, AgentState, Task, ViewConfig, Visible, WorldRules, WorldState,
};

pub use tokens::{KeyValue, VisualToken, COUNT_SEP};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerceptionError {
    #[error("malformed token `{0}`")]
    BadToken(String),
    #[error("malformed bundle: {0}")]
    BadBundle(String),
    #[error("invalid perception config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    /// Ray-cast visibility inside the view frustum.
    Vision,
    /// Every block in the 8x8 footprint, ignoring occlusion.
    Proximity,
}

impl fmt::Display for PerceptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerceptionMode::Vision => "vision",
            PerceptionMode::Proximity => "proximity",
        })
    }
}

impl FromStr for PerceptionMode {
    type Err = PerceptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vision" => Ok(PerceptionMode::Vision),
            "proximity" => Ok(PerceptionMode::Proximity),
            _ => Err(PerceptionError::Config(format!("unknown perception mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionConfig {
    pub mode: PerceptionMode,
    pub view: ViewConfig,
    /// Upper edges of distance bands 0, 1 and 2; band 3 is everything beyond.
    pub band_edges: [f64; 3],
    /// Maximum number of visual tokens; the farthest bands are dropped first.
    pub visual_budget: usize,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            mode: PerceptionMode::Vision,
            view: ViewConfig::default(),
            band_edges: [4.0, 8.0, 16.0],
            visual_budget: 64,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        self.view.validate().map_err(PerceptionError::Config)?;
        let e = self.band_edges;
        if !(e[0] > 0.0 && e[0] < e[1] && e[1] < e[2] && e[2].is_finite()) {
            return Err(PerceptionError::Config(format!("band edges must increase: {e:?}")));
        }
        Ok(())
    }

    pub fn band(&self, distance: f64) -> u8 {
        self.band_edges.iter().position(|&edge| distance < edge).unwrap_or(3) as u8
    }
}

/// Maps a visible set to visual tokens. The symbolic encoder is the only
/// implementation shipped; a learned encoder would slot in here.
pub trait VisualEncoder: Send + Sync {
    fn encode(&self, rules: &WorldRules, visible: &Visible, agent: &AgentState) -> Vec<VisualToken>;
}

#[derive(Debug, Clone)]
pub struct SymbolicEncoder {
    pub band_edges: [f64; 3],
}

impl VisualEncoder for SymbolicEncoder {
    fn encode(&self, rules: &WorldRules, visible: &Visible, agent: &AgentState) -> Vec<VisualToken> {
        let cfg = PerceptionConfig { band_edges: self.band_edges, ..PerceptionConfig::default() };
        encode_visual(rules, visible, agent, &cfg)
    }
}

/// One token per (block, distance band), ordered by band then block id.
/// Distance runs from the eye to the block center.
pub fn encode_visual(rules: &WorldRules, visible: &Visible, agent: &AgentState, cfg: &PerceptionConfig) -> Vec<VisualToken> {
    let e = eye(agent);
    let mut groups: BTreeMap<(u8, &str), u32> = BTreeMap::new();
    for (p, &b) in visible {
        let c = p.center();
        let d = ((c[0] - e[0]).powi(2) + (c[1] - e[1]).powi(2) + (c[2] - e[2]).powi(2)).sqrt();
        *groups.entry((cfg.band(d), rules.block_name(b))).or_insert(0) += 1;
    }
    groups
        .into_iter()
        .map(|((band, block), count)| VisualToken { band, block: block.to_string(), count })
        .collect()
}

/// Visual tokens cut to the budget, dropping the farthest bands first.
pub fn budgeted_visual(rules: &WorldRules, visible: &Visible, agent: &AgentState, cfg: &PerceptionConfig) -> Vec<VisualToken> {
    let mut visual = encode_visual(rules, visible, agent, cfg);
    visual.truncate(cfg.visual_budget);
    visual
}

pub fn tokenize_state(agent: &AgentState) -> Vec<String> {
    let mut out = vec![
        format!("health={}", agent.health),
        format!("hunger={}", agent.hunger),
        format!("equipped={}", agent.equipped.as_deref().unwrap_or("none")),
    ];
    out.extend(agent.inventory.iter().map(|(k, v)| format!("{k}={v}")));
    out
}

pub fn tokenize_task(task: &Task) -> Vec<String> {
    vec![format!("task={}", task.id), format!("goal={}", task.goal)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBundle {
    pub mode: PerceptionMode,
    pub visual: Vec<String>,
    pub state: Vec<String>,
    pub task: Vec<String>,
}

impl TokenBundle {
    /// Number of visual tokens.
    pub fn n_visual(&self) -> usize {
        self.visual.len()
    }

    pub fn len(&self) -> usize {
        self.visual.len() + self.state.len() + self.task.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn visual_tokens(&self) -> Result<Vec<VisualToken>, PerceptionError> {
        self.visual.iter().map(|t| t.parse()).collect()
    }

    /// Value of a `key=value` token in the state section.
    pub fn state_value(&self, key: &str) -> Option<&str> {
        self.state.iter().find_map(|t| t.strip_prefix(key)?.strip_prefix('='))
    }

    pub fn task_value(&self, key: &str) -> Option<&str> {
        self.task.iter().find_map(|t| t.strip_prefix(key)?.strip_prefix('='))
    }

    /// Sectioned text form fed to prompts; `parse` inverts it.
    pub fn render(&self) -> String {
        format!(
            "[visual mode={}]\n{}\n[state]\n{}\n[task]\n{}\n",
            self.mode,
            self.visual.join(" "),
            self.state.join(" "),
            self.task.join(" ")
        )
    }

    pub fn parse(text: &str) -> Result<TokenBundle, PerceptionError> {
        let bad = |m: &str| PerceptionError::BadBundle(m.to_string());
        let lines: Vec<&str> = text.lines().collect();
        let [head, visual, state_h, state, task_h, task] = lines.as_slice() else {
            return Err(bad("expected six lines"));
        };
        let mode = head
            .strip_prefix("[visual mode=")
            .and_then(|m| m.strip_suffix(']'))
            .ok_or_else(|| bad("missing [visual] header"))?
            .parse()?;
        if *state_h != "[state]" || *task_h != "[task]" {
            return Err(bad("missing [state] or [task] header"));
        }
        let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let bundle = TokenBundle { mode, visual: words(visual), state: words(state), task: words(task) };
        bundle.visual_tokens()?;
        for t in bundle.state.iter().chain(&bundle.task) {
            t.parse::<KeyValue>()?;
        }
        Ok(bundle)
    }
}

/// Bundle plus the raw block set it was built from.
#[derive(Debug, Clone)]
pub struct Perception {
    pub bundle: TokenBundle,
    pub visible: Visible,
}

pub fn observe(rules: &WorldRules, world: &WorldState, agent: &AgentState, cfg: &PerceptionConfig) -> Visible {
    match cfg.mode {
        PerceptionMode::Vision => visible_set(rules, world, agent, &cfg.view),
        PerceptionMode::Proximity => proximity_set(world, agent),
    }
}

pub fn perceive(
    rules: &WorldRules,
    world: &WorldState,
    agent: &AgentState,
    task: &Task,
    cfg: &PerceptionConfig,
) -> Perception {
    let visible = observe(rules, world, agent, cfg);
    let visual = budgeted_visual(rules, &visible, agent, cfg);
    let bundle = TokenBundle {
        mode: cfg.mode,
        visual: visual.iter().map(ToString::to_string).collect(),
        state: tokenize_state(agent),
        task: tokenize_task(task),
    };
    Perception { bundle, visible }
}
