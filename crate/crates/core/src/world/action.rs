use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rules::{Station, WorldRules};
use super::scenario::{survey_lanes, survey_turns};
use super::state::{AgentState, Dir, Pos, WorldState};
use super::WorldError;

/// One executable simulator action. Parameters are typed per kind, so a
/// deserialized action is always well formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveAction {
    Move { dir: Dir },
    Turn { yaw: f64, pitch: f64 },
    Mine { target: Pos },
    Craft { item: String },
    Smelt { item: String },
    Place { item: String, target: Pos },
    Equip { item: String },
    ExploreStep,
    Eat { item: String },
}

impl PrimitiveAction {
    pub fn kind(&self) -> &'static str {
        match self {
            PrimitiveAction::Move { .. } => "move",
            PrimitiveAction::Turn { .. } => "turn",
            PrimitiveAction::Mine { .. } => "mine",
            PrimitiveAction::Craft { .. } => "craft",
            PrimitiveAction::Smelt { .. } => "smelt",
            PrimitiveAction::Place { .. } => "place",
            PrimitiveAction::Equip { .. } => "equip",
            PrimitiveAction::ExploreStep => "explore_step",
            PrimitiveAction::Eat { .. } => "eat",
        }
    }
}

impl fmt::Display for PrimitiveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimitiveAction::Move { dir } => write!(f, "move {}", dir.name()),
            PrimitiveAction::Turn { yaw, pitch } => write!(f, "turn {yaw} {pitch}"),
            PrimitiveAction::Mine { target } => write!(f, "mine {} {} {}", target.x, target.y, target.z),
            PrimitiveAction::Craft { item } => write!(f, "craft {item}"),
            PrimitiveAction::Smelt { item } => write!(f, "smelt {item}"),
            PrimitiveAction::Place { item, target } => {
                write!(f, "place {item} {} {} {}", target.x, target.y, target.z)
            }
            PrimitiveAction::Equip { item } => write!(f, "equip {item}"),
            PrimitiveAction::ExploreStep => f.write_str("explore_step"),
            PrimitiveAction::Eat { item } => write!(f, "eat {item}"),
        }
    }
}

impl FromStr for PrimitiveAction {
    type Err = WorldError;

    /// Parses the `Display` form, validating arity and parameter types.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || WorldError::BadAction(s.to_string());
        let int = |t: &str| t.parse::<i32>().map_err(|_| bad());
        let float = |t: &str| t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        let ident = |t: &str| {
            if !t.is_empty() && t.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                Ok(t.to_string())
            } else {
                Err(bad())
            }
        };
        Ok(match parts.as_slice() {
            ["move", d] => PrimitiveAction::Move { dir: Dir::parse(d).ok_or_else(bad)? },
            ["turn", y, p] => PrimitiveAction::Turn { yaw: float(y)?, pitch: float(p)? },
            ["mine", x, y, z] => PrimitiveAction::Mine { target: Pos::new(int(x)?, int(y)?, int(z)?) },
            ["craft", i] => PrimitiveAction::Craft { item: ident(i)? },
            ["smelt", i] => PrimitiveAction::Smelt { item: ident(i)? },
            ["place", i, x, y, z] => PrimitiveAction::Place {
                item: ident(i)?,
                target: Pos::new(int(x)?, int(y)?, int(z)?),
            },
            ["equip", i] => PrimitiveAction::Equip { item: ident(i)? },
            ["explore_step"] => PrimitiveAction::ExploreStep,
            ["eat", i] => PrimitiveAction::Eat { item: ident(i)? },
            _ => return Err(bad()),
        })
    }
}

/// Distinct failure codes reported back to the Critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureCode {
    OutOfRange,
    InsufficientTier,
    MissingInputs,
    MissingStation,
    UnknownRecipe,
    InvalidTarget,
    Blocked,
    MissingItem,
    NotPlaceable,
    NotFood,
    NoTarget,
    Unreachable,
    StepCapExceeded,
    UnboundParameter,
    NoMatchingSkill,
}

impl FailureCode {
    pub const ALL: [FailureCode; 15] = [
        FailureCode::OutOfRange,
        FailureCode::InsufficientTier,
        FailureCode::MissingInputs,
        FailureCode::MissingStation,
        FailureCode::UnknownRecipe,
        FailureCode::InvalidTarget,
        FailureCode::Blocked,
        FailureCode::MissingItem,
        FailureCode::NotPlaceable,
        FailureCode::NotFood,
        FailureCode::NoTarget,
        FailureCode::Unreachable,
        FailureCode::StepCapExceeded,
        FailureCode::UnboundParameter,
        FailureCode::NoMatchingSkill,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureCode::OutOfRange => "OutOfRange",
            FailureCode::InsufficientTier => "InsufficientTier",
            FailureCode::MissingInputs => "MissingInputs",
            FailureCode::MissingStation => "MissingStation",
            FailureCode::UnknownRecipe => "UnknownRecipe",
            FailureCode::InvalidTarget => "InvalidTarget",
            FailureCode::Blocked => "Blocked",
            FailureCode::MissingItem => "MissingItem",
            FailureCode::NotPlaceable => "NotPlaceable",
            FailureCode::NotFood => "NotFood",
            FailureCode::NoTarget => "NoTarget",
            FailureCode::Unreachable => "Unreachable",
            FailureCode::StepCapExceeded => "StepCapExceeded",
            FailureCode::UnboundParameter => "UnboundParameter",
            FailureCode::NoMatchingSkill => "NoMatchingSkill",
        }
    }

    pub fn parse(s: &str) -> Option<FailureCode> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for FailureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one primitive action. `tick` is the world tick at which the
/// action was applied; `delta` is the exact inventory change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub tick: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<FailureCode>,
    pub message: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub delta: BTreeMap<String, i64>,
}

impl ActionResult {
    pub fn success(tick: u64, message: String, delta: BTreeMap<String, i64>) -> Self {
        ActionResult { tick, ok: true, code: None, message, delta }
    }

    pub fn failure(tick: u64, code: FailureCode, message: String) -> Self {
        ActionResult { tick, ok: false, code: Some(code), message, delta: BTreeMap::new() }
    }
}

/// Advances the world clock by one tick, decaying hunger on schedule.
pub fn advance_clock(rules: &WorldRules, world: &mut WorldState, agent: &mut AgentState) {
    world.tick += 1;
    let every = rules.interaction.hunger_decay_ticks.max(1);
    if world.tick.is_multiple_of(every) {
        agent.hunger = agent.hunger.saturating_sub(1);
    }
}

pub fn in_reach(rules: &WorldRules, agent: &AgentState, target: Pos) -> bool {
    agent.position.distance(target) <= rules.interaction.range
}

/// True if a block with id `station` lies within interaction range.
pub fn station_in_reach(rules: &WorldRules, world: &WorldState, agent: &AgentState, station: &str) -> bool {
    let Some(block) = rules.block(station) else { return false };
    let r = rules.interaction.range.ceil() as i32;
    let p = agent.position;
    for dy in -r..=r {
        for dz in -r..=r {
            for dx in -r..=r {
                let q = p.offset(dx, dy, dz);
                if world.get(q) == block && world.dims.contains(q) && in_reach(rules, agent, q) {
                    return true;
                }
            }
        }
    }
    false
}

/// Applies one action. Every call consumes one tick, success or not.
pub fn apply_action(
    rules: &WorldRules,
    world: &mut WorldState,
    agent: &mut AgentState,
    action: &PrimitiveAction,
) -> ActionResult {
    let tick = world.tick;
    let result = execute(rules, world, agent, action, tick);
    advance_clock(rules, world, agent);
    result
}

fn execute(
    rules: &WorldRules,
    world: &mut WorldState,
    agent: &mut AgentState,
    action: &PrimitiveAction,
    tick: u64,
) -> ActionResult {
    use FailureCode::*;
    let fail = |code, msg: String| ActionResult::failure(tick, code, msg);
    match action {
        PrimitiveAction::Move { dir } => {
            let next = agent.position.step(*dir);
            if !world.dims.contains(next) || !world.get(next).is_air() {
                return fail(Blocked, format!("cannot move {} into {next}", dir.name()));
            }
            agent.position = next;
            if let Some(yaw) = dir.yaw() {
                agent.yaw = yaw;
            }
            ActionResult::success(tick, format!("moved {} to {next}", dir.name()), BTreeMap::new())
        }
        PrimitiveAction::Turn { yaw, pitch } => {
            if !yaw.is_finite() || !pitch.is_finite() {
                return fail(InvalidTarget, "non-finite angle".into());
            }
            agent.yaw = yaw.rem_euclid(360.0);
            agent.pitch = pitch.clamp(-90.0, 90.0);
            ActionResult::success(tick, format!("turned to {} {}", agent.yaw, agent.pitch), BTreeMap::new())
        }
        PrimitiveAction::Mine { target } => {
            if !world.dims.contains(*target) {
                return fail(InvalidTarget, format!("{target} is outside the world"));
            }
            let block = world.get(*target);
            if block.is_air() {
                return fail(InvalidTarget, format!("nothing to mine at {target}"));
            }
            if !in_reach(rules, agent, *target) {
                return fail(OutOfRange, format!("{target} is out of reach"));
            }
            let bt = rules.block_type(block);
            let tier = agent.tool_tier(rules);
            if !rules.can_mine(tier, block) {
                return fail(
                    InsufficientTier,
                    format!("{} needs tool tier {}, equipped tier {tier}", bt.id, bt.tier),
                );
            }
            let drop = bt.drop.clone();
            world.set(*target, super::rules::BlockId::AIR);
            agent.add(&drop, 1);
            ActionResult::success(
                tick,
                format!("mined {} at {target}", bt.id),
                BTreeMap::from([(drop, 1)]),
            )
        }
        PrimitiveAction::Craft { item } | PrimitiveAction::Smelt { item } => {
            let smelting = matches!(action, PrimitiveAction::Smelt { .. });
            let Some(recipe) = rules.recipe(item) else {
                return fail(UnknownRecipe, format!("no recipe for {item}"));
            };
            if recipe.is_smelting() != smelting {
                let verb = if recipe.is_smelting() { "smelted" } else { "crafted" };
                return fail(UnknownRecipe, format!("{item} must be {verb}"));
            }
            if let Some(station) = recipe.station.block_id() {
                if !station_in_reach(rules, world, agent, station) {
                    return fail(MissingStation, format!("{item} needs a {station} within reach"));
                }
            }
            let missing: Vec<String> = recipe
                .inputs
                .iter()
                .filter(|(i, &n)| agent.count(i) < n)
                .map(|(i, &n)| format!("{i} {}/{n}", agent.count(i)))
                .collect();
            if !missing.is_empty() {
                return fail(MissingInputs, format!("{item} is missing {}", missing.join(", ")));
            }
            let mut delta = BTreeMap::new();
            for (i, &n) in &recipe.inputs {
                agent.remove(i, n);
                delta.insert(i.clone(), -(n as i64));
            }
            agent.add(&recipe.output, recipe.count);
            *delta.entry(recipe.output.clone()).or_insert(0) += recipe.count as i64;
            let verb = if recipe.station == Station::Furnace { "smelted" } else { "crafted" };
            ActionResult::success(tick, format!("{verb} {} {item}", recipe.count), delta)
        }
        PrimitiveAction::Place { item, target } => {
            let Some(block) = rules.block(item).filter(|b| !b.is_air()) else {
                return fail(NotPlaceable, format!("{item} is not a block"));
            };
            if agent.count(item) == 0 {
                return fail(MissingItem, format!("no {item} in inventory"));
            }
            if !world.dims.contains(*target) || !world.get(*target).is_air() || *target == agent.position {
                return fail(InvalidTarget, format!("cannot place at {target}"));
            }
            if !in_reach(rules, agent, *target) {
                return fail(OutOfRange, format!("{target} is out of reach"));
            }
            world.set(*target, block);
            agent.remove(item, 1);
            ActionResult::success(
                tick,
                format!("placed {item} at {target}"),
                BTreeMap::from([(item.clone(), -1)]),
            )
        }
        PrimitiveAction::Equip { item } => {
            if agent.count(item) == 0 {
                return fail(MissingItem, format!("no {item} to equip"));
            }
            agent.equipped = Some(item.clone());
            ActionResult::success(tick, format!("equipped {item}"), BTreeMap::new())
        }
        PrimitiveAction::Eat { item } => {
            let Some(restore) = rules.food_value(item) else {
                return fail(NotFood, format!("{item} is not food"));
            };
            if agent.count(item) == 0 {
                return fail(MissingItem, format!("no {item} to eat"));
            }
            agent.remove(item, 1);
            agent.hunger = (agent.hunger + restore).min(super::state::MAX_VITAL);
            ActionResult::success(
                tick,
                format!("ate {item}, hunger {}", agent.hunger),
                BTreeMap::from([(item.clone(), -1)]),
            )
        }
        PrimitiveAction::ExploreStep => {
            let (dir, next) = explore_route_step(rules, world, agent);
            if !world.dims.contains(next) || !world.get(next).is_air() {
                return fail(Blocked, format!("survey route blocked at {next}"));
            }
            agent.position = next;
            agent.yaw = dir.yaw().unwrap_or(agent.yaw);
            ActionResult::success(tick, format!("explored {} to {next}", dir.name()), BTreeMap::new())
        }
    }
}

/// The survey route: walk each lane (a fixed z row) between the two turn
/// columns, alternating direction, step south between lanes, and after the
/// last lane walk north back to the first. The agent's yaw carries the route
/// state.
pub fn explore_route_step(rules: &WorldRules, world: &WorldState, agent: &AgentState) -> (Dir, Pos) {
    let lanes = survey_lanes(rules, world.dims);
    let p = agent.position;
    let (west, east) = survey_turns(rules, world.dims);
    let heading = facing(agent.yaw);

    let dir = match lanes.iter().position(|&z| z == p.z) {
        None => match heading {
            Dir::North if lanes.first().is_some_and(|&z| z < p.z) => Dir::North,
            _ if lanes.iter().any(|&z| z > p.z) => Dir::South,
            _ => Dir::North,
        },
        Some(k) => {
            let lane_dir = if k % 2 == 0 { Dir::East } else { Dir::West };
            let at_end = match lane_dir {
                Dir::East => p.x >= east,
                _ => p.x <= west,
            };
            if heading == Dir::North && k > 0 {
                // Returning to the first lane.
                Dir::North
            } else if !at_end {
                lane_dir
            } else if k + 1 < lanes.len() {
                Dir::South
            } else if k > 0 {
                Dir::North
            } else {
                // Single lane: walk back the other way.
                if lane_dir == Dir::East { Dir::West } else { Dir::East }
            }
        }
    };
    (dir, p.step(dir))
}

/// Horizontal direction nearest to `yaw`.
pub fn facing(yaw: f64) -> Dir {
    let q = ((yaw.rem_euclid(360.0) + 45.0) / 90.0).floor() as i32 % 4;
    match q {
        0 => Dir::East,
        1 => Dir::South,
        2 => Dir::West,
        _ => Dir::North,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, Dims, Scenario};

    fn setup() -> (WorldRules, WorldState, AgentState) {
        let rules = WorldRules::shipped();
        let world = generate_world(&rules, 7, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let agent = AgentState::spawn(&world);
        (rules, world, agent)
    }

    fn put(rules: &WorldRules, world: &mut WorldState, p: Pos, name: &str) {
        world.set(p, rules.block(name).unwrap());
    }

    #[test]
    fn mine_log_by_hand() {
        let (rules, mut world, mut agent) = setup();
        let target = agent.position.offset(1, 0, 0);
        put(&rules, &mut world, target, "log");
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Mine { target });
        assert!(r.ok, "{r:?}");
        assert_eq!(agent.count("log"), 1);
        assert_eq!(r.delta, BTreeMap::from([("log".to_string(), 1)]));
        assert!(world.get(target).is_air());
        assert_eq!(world.tick, 1);
    }

    #[test]
    fn mine_diamond_with_stone_tool_fails() {
        let (rules, mut world, mut agent) = setup();
        let target = agent.position.offset(2, 0, 0);
        put(&rules, &mut world, target, "diamond_ore");
        agent.add("stone_pickaxe", 1);
        agent.equipped = Some("stone_pickaxe".into());
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Mine { target });
        assert_eq!(r.code, Some(FailureCode::InsufficientTier));
        assert!(!world.get(target).is_air());
        agent.add("iron_pickaxe", 1);
        agent.equipped = Some("iron_pickaxe".into());
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Mine { target });
        assert!(r.ok);
        assert_eq!(agent.count("diamond"), 1);
    }

    #[test]
    fn craft_wooden_pickaxe_ledger() {
        let (rules, mut world, mut agent) = setup();
        agent.add("plank", 3);
        agent.add("stick", 2);
        let craft = PrimitiveAction::Craft { item: "wooden_pickaxe".into() };
        let r = apply_action(&rules, &mut world, &mut agent, &craft);
        assert_eq!(r.code, Some(FailureCode::MissingStation));
        put(&rules, &mut world, agent.position.offset(0, 0, 1), "crafting_table");
        let r = apply_action(&rules, &mut world, &mut agent, &craft);
        assert!(r.ok, "{r:?}");
        assert_eq!(agent.count("plank"), 0);
        assert_eq!(agent.count("stick"), 0);
        assert_eq!(agent.count("wooden_pickaxe"), 1);
        let expected: BTreeMap<String, i64> =
            [("plank", -3), ("stick", -2), ("wooden_pickaxe", 1)].map(|(k, v)| (k.to_string(), v)).into();
        assert_eq!(r.delta, expected);
    }

    #[test]
    fn failure_codes_are_distinct() {
        let (rules, mut world, mut agent) = setup();
        let far = agent.position.offset(6, 0, 0);
        put(&rules, &mut world, far, "log");
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Mine { target: far });
        assert_eq!(r.code, Some(FailureCode::OutOfRange));
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Craft { item: "plank".into() });
        assert_eq!(r.code, Some(FailureCode::MissingInputs));
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Craft { item: "iron_ingot".into() });
        assert_eq!(r.code, Some(FailureCode::UnknownRecipe));
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Smelt { item: "iron_ingot".into() });
        assert_eq!(r.code, Some(FailureCode::MissingStation));
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Move { dir: Dir::Down });
        assert_eq!(r.code, Some(FailureCode::Blocked));
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Eat { item: "log".into() });
        assert_eq!(r.code, Some(FailureCode::NotFood));
        assert_eq!(world.tick, 6);
    }

    #[test]
    fn place_and_eat() {
        let (rules, mut world, mut agent) = setup();
        agent.add("crafting_table", 1);
        agent.equipped = Some("crafting_table".into());
        let target = agent.position.offset(1, 0, 0);
        let r = apply_action(
            &rules,
            &mut world,
            &mut agent,
            &PrimitiveAction::Place { item: "crafting_table".into(), target },
        );
        assert!(r.ok);
        assert_eq!(agent.count("crafting_table"), 0);
        assert_eq!(agent.equipped, None);
        agent.hunger = 10;
        agent.add("apple", 2);
        let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::Eat { item: "apple".into() });
        assert!(r.ok);
        assert_eq!(agent.hunger, 14);
        assert_eq!(agent.count("apple"), 1);
    }

    #[test]
    fn hunger_decays_every_fifty_ticks() {
        let (rules, mut world, mut agent) = setup();
        for _ in 0..149 {
            advance_clock(&rules, &mut world, &mut agent);
        }
        assert_eq!(agent.hunger, 18);
        advance_clock(&rules, &mut world, &mut agent);
        assert_eq!(agent.hunger, 17);
    }

    #[test]
    fn action_text_round_trip() {
        for text in ["move north", "turn 90 -10", "mine 1 2 3", "craft plank", "place dirt 4 3 2", "explore_step", "eat apple"] {
            let a: PrimitiveAction = text.parse().unwrap();
            assert_eq!(a.to_string(), text);
        }
        assert!("mine 1 2".parse::<PrimitiveAction>().is_err());
        assert!("move sideways".parse::<PrimitiveAction>().is_err());
        assert!("fly".parse::<PrimitiveAction>().is_err());
    }

    #[test]
    fn survey_route_covers_lanes() {
        let rules = WorldRules::shipped();
        let world = generate_world(&rules, 3, Scenario::FlatSearch, Dims::new(32, 8, 32)).unwrap();
        let mut world = world;
        let mut agent = AgentState::spawn(&world);
        let mut visited_lanes = std::collections::BTreeSet::new();
        for _ in 0..400 {
            let r = apply_action(&rules, &mut world, &mut agent, &PrimitiveAction::ExploreStep);
            assert!(r.ok, "{r:?}");
            visited_lanes.insert(agent.position.z);
        }
        for z in survey_lanes(&rules, world.dims) {
            assert!(visited_lanes.contains(&z), "lane {z} never visited");
        }
    }
}
