use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rules::{BlockId, WorldRules};
use super::state::{AgentState, Pos};
use super::view::Visible;
use super::WorldError;

pub const SHIPPED_TASKS_TOML: &str = include_str!("../../assets/tasks.toml");

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Goal {
    Possess { item: String, count: u32 },
    Locate { block: String, count: u32 },
}

impl Goal {
    pub fn count(&self) -> u32 {
        match self {
            Goal::Possess { count, .. } | Goal::Locate { count, .. } => *count,
        }
    }

    pub fn target(&self) -> &str {
        match self {
            Goal::Possess { item, .. } => item,
            Goal::Locate { block, .. } => block,
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Possess { item, count } => write!(f, "possess:{item}:{count}"),
            Goal::Locate { block, count } => write!(f, "locate:{block}:{count}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub goal: Goal,
    /// Tasks that must be done before a curriculum may propose this one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curriculum {
    pub id: String,
    pub tasks: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    version: u32,
    tasks: Vec<Task>,
    #[serde(default)]
    curricula: Vec<Curriculum>,
}

/// Cumulative set of blocks seen during an episode, keyed by position.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoundSet {
    seen: BTreeMap<Pos, BlockId>,
}

impl FoundSet {
    /// Adds every block of type `block` in `visible`; returns how many were new.
    pub fn record(&mut self, visible: &Visible, block: BlockId) -> usize {
        let before = self.seen.len();
        for (&p, &b) in visible {
            if b == block {
                self.seen.entry(p).or_insert(b);
            }
        }
        self.seen.len() - before
    }

    pub fn count(&self, block: BlockId) -> usize {
        self.seen.values().filter(|&&b| b == block).count()
    }

    pub fn positions(&self) -> BTreeSet<Pos> {
        self.seen.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Pure goal predicate: possess goals read the inventory, locate goals read
/// the episode's cumulative found-set.
pub fn check_task(rules: &WorldRules, agent: &AgentState, found: &FoundSet, task: &Task) -> bool {
    match &task.goal {
        Goal::Possess { item, count } => agent.count(item) >= *count,
        Goal::Locate { block, count } => match rules.block(block) {
            Some(b) => found.count(b) >= *count as usize,
            None => false,
        },
    }
}

#[derive(Debug, Clone)]
pub struct TaskRegistry {
    tasks: BTreeMap<String, Task>,
    curricula: BTreeMap<String, Curriculum>,
}

impl TaskRegistry {
    pub fn shipped(rules: &WorldRules) -> Self {
        Self::from_toml(SHIPPED_TASKS_TOML, rules).expect("shipped task config is valid")
    }

    pub fn load(path: &Path, rules: &WorldRules) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::TaskConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, rules)
    }

    pub fn from_toml(text: &str, rules: &WorldRules) -> Result<Self, WorldError> {
        let file: TaskFile = toml::from_str(text).map_err(|e| WorldError::TaskConfig(e.to_string()))?;
        if file.version != 1 {
            return Err(WorldError::TaskConfig(format!("unsupported task config version {}", file.version)));
        }
        let mut tasks = BTreeMap::new();
        for t in file.tasks {
            match &t.goal {
                Goal::Possess { item, .. } if !rules.is_known_item(item) => {
                    return Err(WorldError::TaskConfig(format!("task `{}`: unknown item `{item}`", t.id)));
                }
                Goal::Locate { block, .. } if rules.block(block).is_none() => {
                    return Err(WorldError::TaskConfig(format!("task `{}`: unknown block `{block}`", t.id)));
                }
                _ => {}
            }
            if t.goal.count() == 0 {
                return Err(WorldError::TaskConfig(format!("task `{}`: goal count is zero", t.id)));
            }
            if tasks.insert(t.id.clone(), t.clone()).is_some() {
                return Err(WorldError::TaskConfig(format!("duplicate task `{}`", t.id)));
            }
        }
        for t in tasks.values() {
            if let Some(r) = t.requires.iter().find(|r| !tasks.contains_key(*r)) {
                return Err(WorldError::TaskConfig(format!("task `{}` requires unknown `{r}`", t.id)));
            }
        }
        let mut curricula = BTreeMap::new();
        for c in file.curricula {
            if c.tasks.is_empty() {
                return Err(WorldError::TaskConfig(format!("curriculum `{}` is empty", c.id)));
            }
            if let Some(t) = c.tasks.iter().find(|t| !tasks.contains_key(*t)) {
                return Err(WorldError::TaskConfig(format!("curriculum `{}` names unknown task `{t}`", c.id)));
            }
            curricula.insert(c.id.clone(), c);
        }
        Ok(TaskRegistry { tasks, curricula })
    }

    pub fn get(&self, id: &str) -> Result<&Task, WorldError> {
        self.tasks.get(id).ok_or_else(|| WorldError::UnknownTask(id.to_string()))
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values()
    }

    pub fn curriculum(&self, id: &str) -> Option<&Curriculum> {
        self.curricula.get(id)
    }

    pub fn curricula(&self) -> impl Iterator<Item = &Curriculum> {
        self.curricula.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, Dims, Scenario};

    #[test]
    fn shipped_tasks_load() {
        let rules = WorldRules::shipped();
        let reg = TaskRegistry::shipped(&rules);
        let t = reg.get("tech_tree").unwrap();
        assert_eq!(t.goal, Goal::Possess { item: "diamond_pickaxe".into(), count: 1 });
        let c = reg.curriculum("tech_tree").unwrap();
        assert_eq!(c.tasks, ["wooden_tool", "stone_tool", "iron_tool", "diamond_tool"]);
        assert!(matches!(reg.get("nope"), Err(WorldError::UnknownTask(_))));
    }

    #[test]
    fn bad_goal_rejected() {
        let rules = WorldRules::shipped();
        let text = "version = 1\n[[tasks]]\nid = \"x\"\ngoal = { kind = \"possess\", item = \"unobtainium\", count = 1 }\n";
        assert!(TaskRegistry::from_toml(text, &rules).is_err());
    }

    #[test]
    fn goals_read_inventory_and_found_set() {
        let rules = WorldRules::shipped();
        let world = generate_world(&rules, 1, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let mut agent = AgentState::spawn(&world);
        let possess = Task {
            id: "t".into(),
            description: String::new(),
            goal: Goal::Possess { item: "wooden_pickaxe".into(), count: 1 },
            requires: vec![],
        };
        let mut found = FoundSet::default();
        assert!(!check_task(&rules, &agent, &found, &possess));
        agent.add("wooden_pickaxe", 1);
        assert!(check_task(&rules, &agent, &found, &possess));

        let locate = Task {
            id: "l".into(),
            description: String::new(),
            goal: Goal::Locate { block: "diamond_ore".into(), count: 10 },
            requires: vec![],
        };
        let diamond = rules.block("diamond_ore").unwrap();
        let vis: Visible = (0..9).map(|i| (Pos::new(i, 3, 0), diamond)).collect();
        assert_eq!(found.record(&vis, diamond), 9);
        assert_eq!(found.record(&vis, diamond), 0);
        assert!(!check_task(&rules, &agent, &found, &locate));
        found.record(&[(Pos::new(9, 3, 0), diamond)].into(), diamond);
        assert!(check_task(&rules, &agent, &found, &locate));
    }
}
