//! Interprets skill scripts against the simulator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::script::{Predicate, Quantity, SkillScript, Stmt, Sym, Value};
use crate::world::{
    apply_action, find_path, nearest_exposed, placement_spot, station_in_reach, ActionResult, AgentState, BlockId,
    FailureCode, PrimitiveAction, WorldRules, WorldState,
};

/// Primitive actions plus loop iterations allowed per skill invocation.
pub const STEP_CAP: usize = 10_000;

/// One entry of a skill run. Checks that fail before reaching the simulator
/// (no target, unreachable, step cap) carry no action and consume no tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<PrimitiveAction>,
    pub result: ActionResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkillRun {
    pub steps: Vec<ExecStep>,
}

impl SkillRun {
    pub fn failure(&self) -> Option<&ActionResult> {
        self.steps.last().map(|s| &s.result).filter(|r| !r.ok)
    }

    pub fn ok(&self) -> bool {
        self.failure().is_none()
    }

    pub fn actions(&self) -> usize {
        self.steps.iter().filter(|s| s.action.is_some()).count()
    }
}

pub type Bindings = BTreeMap<String, String>;

struct Exec<'a> {
    rules: &'a WorldRules,
    world: &'a mut WorldState,
    agent: &'a mut AgentState,
    bindings: &'a Bindings,
    start: BTreeMap<String, u32>,
    run: SkillRun,
    primitives: i64,
    budget: usize,
    cap: usize,
    observe: &'a mut dyn FnMut(&WorldState, &AgentState),
}

/// Why a statement stopped: a failed result has already been recorded.
struct Halt;

impl Exec<'_> {
    fn sym(&self, s: &Sym) -> String {
        match s {
            Sym::Lit(v) => v.clone(),
            Sym::Param(p) => self.bindings[p].clone(),
        }
    }

    fn synthetic(&mut self, code: FailureCode, message: String) -> Halt {
        let result = ActionResult::failure(self.world.tick, code, message);
        self.run.steps.push(ExecStep { action: None, result });
        Halt
    }

    fn charge(&mut self) -> Result<(), Halt> {
        if self.budget >= self.cap {
            return Err(self.synthetic(FailureCode::StepCapExceeded, format!("skill exceeded {} steps", self.cap)));
        }
        self.budget += 1;
        Ok(())
    }

    fn act(&mut self, action: PrimitiveAction) -> Result<(), Halt> {
        self.charge()?;
        let result = apply_action(self.rules, self.world, self.agent, &action);
        self.primitives += 1;
        (self.observe)(self.world, self.agent);
        let ok = result.ok;
        self.run.steps.push(ExecStep { action: Some(action), result });
        if ok { Ok(()) } else { Err(Halt) }
    }

    /// Items resolve to the block that drops them; bare block names also work.
    fn resolve(&mut self, name: &str, prefer_block: bool) -> Result<BlockId, Halt> {
        let direct = self.rules.block(name).filter(|b| !b.is_air());
        let source = self.rules.source_block(name);
        let found = if prefer_block { direct.or(source) } else { source.or(direct) };
        found.ok_or_else(|| self.synthetic(FailureCode::InvalidTarget, format!("no block yields `{name}`")))
    }

    fn approach(&mut self, block: BlockId, name: &str) -> Result<crate::world::Pos, Halt> {
        let Some(target) = nearest_exposed(self.rules, self.world, self.agent.position, block) else {
            return Err(self.synthetic(FailureCode::NoTarget, format!("no {name} within search radius")));
        };
        let Some(path) = find_path(self.rules, self.world, self.agent, target) else {
            return Err(self.synthetic(FailureCode::Unreachable, format!("cannot reach {name} at {target}")));
        };
        for dir in path {
            self.act(PrimitiveAction::Move { dir })?;
        }
        Ok(target)
    }

    fn ensure_near(&mut self, station: &str) -> Result<(), Halt> {
        if station_in_reach(self.rules, self.world, self.agent, station) {
            return Ok(());
        }
        if self.agent.count(station) > 0 {
            let Some(target) = placement_spot(self.world, self.agent) else {
                return Err(self.synthetic(FailureCode::Blocked, format!("no free cell to place {station}")));
            };
            return self.act(PrimitiveAction::Place { item: station.to_string(), target });
        }
        let block = self.rules.block(station);
        if let Some(b) = block.filter(|&b| nearest_exposed(self.rules, self.world, self.agent.position, b).is_some()) {
            self.approach(b, station).map(|_| ())
        } else {
            Err(self.synthetic(FailureCode::MissingStation, format!("no {station} nearby or in inventory")))
        }
    }

    fn quantity(&self, q: &Quantity) -> i64 {
        match q {
            Quantity::Steps => self.primitives,
            Quantity::Inventory(s) => self.agent.count(&self.sym(s)) as i64,
            Quantity::Gained(s) => {
                let item = self.sym(s);
                self.agent.count(&item) as i64 - self.start.get(&item).copied().unwrap_or(0) as i64
            }
        }
    }

    fn holds(&self, p: &Predicate) -> bool {
        let rhs = match &p.rhs {
            Value::Int(v) => *v,
            Value::Param(name) => self.bindings[name].parse().expect("numeric bindings checked up front"),
        };
        p.op.eval(self.quantity(&p.lhs), rhs)
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), Halt> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), Halt> {
        match stmt {
            Stmt::MineNearest(s) => {
                let name = self.sym(s);
                let block = self.resolve(&name, false)?;
                let target = self.approach(block, &name)?;
                self.act(PrimitiveAction::Mine { target })
            }
            Stmt::GotoNearest(s) => {
                let name = self.sym(s);
                let block = self.resolve(&name, true)?;
                self.approach(block, &name).map(|_| ())
            }
            Stmt::Craft(s) => self.act(PrimitiveAction::Craft { item: self.sym(s) }),
            Stmt::Smelt(s) => self.act(PrimitiveAction::Smelt { item: self.sym(s) }),
            Stmt::Place(s) => {
                let item = self.sym(s);
                let Some(target) = placement_spot(self.world, self.agent) else {
                    return Err(self.synthetic(FailureCode::Blocked, format!("no free cell to place {item}")));
                };
                self.act(PrimitiveAction::Place { item, target })
            }
            Stmt::EnsureNear(s) => {
                let station = self.sym(s);
                self.ensure_near(&station)
            }
            Stmt::EnsureStation(s) => {
                let item = self.sym(s);
                let station = self.rules.recipe(&item).and_then(|r| r.station.block_id());
                match station {
                    Some(st) => self.ensure_near(st),
                    None => Ok(()),
                }
            }
            Stmt::Equip(s) => self.act(PrimitiveAction::Equip { item: self.sym(s) }),
            Stmt::Eat(s) => self.act(PrimitiveAction::Eat { item: self.sym(s) }),
            Stmt::Move(dir) => self.act(PrimitiveAction::Move { dir: *dir }),
            Stmt::Turn(yaw, pitch) => self.act(PrimitiveAction::Turn { yaw: *yaw, pitch: *pitch }),
            Stmt::ExploreStep => self.act(PrimitiveAction::ExploreStep),
            Stmt::RepeatUntil { pred, body } => {
                while !self.holds(pred) {
                    self.charge()?;
                    self.block(body)?;
                }
                Ok(())
            }
        }
    }
}

/// Runs `script` with `bindings`. Missing or ill-typed bindings fail before
/// the world is touched. Execution stops at the first failed result.
pub fn execute_skill(
    rules: &WorldRules,
    script: &SkillScript,
    bindings: &Bindings,
    world: &mut WorldState,
    agent: &mut AgentState,
) -> SkillRun {
    execute_with_cap(rules, script, bindings, world, agent, STEP_CAP)
}

pub fn execute_with_cap(
    rules: &WorldRules,
    script: &SkillScript,
    bindings: &Bindings,
    world: &mut WorldState,
    agent: &mut AgentState,
    cap: usize,
) -> SkillRun {
    execute_observed(rules, script, bindings, world, agent, cap, &mut |_, _| {})
}

/// As [`execute_with_cap`], calling `observe` after every primitive action.
pub fn execute_observed(
    rules: &WorldRules,
    script: &SkillScript,
    bindings: &Bindings,
    world: &mut WorldState,
    agent: &mut AgentState,
    cap: usize,
    observe: &mut dyn FnMut(&WorldState, &AgentState),
) -> SkillRun {
    let numeric = script.numeric_params();
    for p in &script.params {
        let problem = match bindings.get(p) {
            None => Some(format!("parameter `{p}` is unbound")),
            Some(v) if v.is_empty() => Some(format!("parameter `{p}` is empty")),
            Some(v) if numeric.contains(p) && v.parse::<i64>().is_err() => {
                Some(format!("parameter `{p}` expects an integer, got `{v}`"))
            }
            _ => None,
        };
        if let Some(message) = problem {
            let result = ActionResult::failure(world.tick, FailureCode::UnboundParameter, message);
            return SkillRun { steps: vec![ExecStep { action: None, result }] };
        }
    }
    let start = agent.inventory.clone();
    let mut exec = Exec { rules, world, agent, bindings, start, run: SkillRun::default(), primitives: 0, budget: 0, cap, observe };
    let _ = exec.block(&script.body);
    exec.run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::parse_script;
    use crate::world::{generate_world, Dims, Pos, Scenario};

    fn fixture() -> (WorldRules, WorldState, AgentState) {
        let rules = WorldRules::shipped();
        let mut world = generate_world(&rules, 3, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let log = rules.block("log").unwrap();
        for z in [4, 6, 12] {
            world.set(Pos::new(12, 3, z), log);
        }
        let agent = AgentState::spawn(&world);
        (rules, world, agent)
    }

    fn bind(pairs: &[(&str, &str)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn collect_three_logs() {
        let (rules, mut world, mut agent) = fixture();
        let script = parse_script("params: count\nrepeat_until gained.log >= {count} {\n  mine nearest log\n}").unwrap();
        let run = execute_skill(&rules, &script, &bind(&[("count", "3")]), &mut world, &mut agent);
        assert!(run.ok(), "{:?}", run.failure());
        let mines: Vec<_> = run
            .steps
            .iter()
            .filter(|s| matches!(s.action, Some(PrimitiveAction::Mine { .. })))
            .collect();
        assert_eq!(mines.len(), 3);
        assert!(mines.iter().all(|s| s.result.ok));
        assert_eq!(agent.count("log"), 3);
        // A fourth log does not exist.
        let run = execute_skill(&rules, &script, &bind(&[("count", "1")]), &mut world, &mut agent);
        assert_eq!(run.failure().unwrap().code, Some(FailureCode::NoTarget));
    }

    #[test]
    fn craft_stops_at_first_failure() {
        let (rules, mut world, mut agent) = fixture();
        let script = parse_script("craft plank\ncraft stick\ncraft crafting_table").unwrap();
        let run = execute_skill(&rules, &script, &Bindings::new(), &mut world, &mut agent);
        assert_eq!(run.steps.len(), 1);
        assert_eq!(run.failure().unwrap().code, Some(FailureCode::MissingInputs));
    }

    #[test]
    fn unbound_parameter_touches_nothing() {
        let (rules, mut world, mut agent) = fixture();
        let before = (world.clone(), agent.clone());
        let script = parse_script("params: count\nrepeat_until gained.log >= {count} { mine nearest log }").unwrap();
        for b in [Bindings::new(), bind(&[("count", "three")])] {
            let run = execute_skill(&rules, &script, &b, &mut world, &mut agent);
            assert_eq!(run.failure().unwrap().code, Some(FailureCode::UnboundParameter));
            assert_eq!(run.actions(), 0);
            assert_eq!((world.clone(), agent.clone()), before);
        }
    }

    #[test]
    fn step_cap_stops_spinning_loops() {
        let (rules, mut world, mut agent) = fixture();
        let script = parse_script("repeat_until inventory.diamond >= 1 { turn 90 0 }").unwrap();
        let run = execute_with_cap(&rules, &script, &Bindings::new(), &mut world, &mut agent, 50);
        assert_eq!(run.failure().unwrap().code, Some(FailureCode::StepCapExceeded));
        // Iterations and primitives share the budget.
        assert_eq!(run.actions(), 25);
    }

    #[test]
    fn ensure_station_places_from_inventory() {
        let (rules, mut world, mut agent) = fixture();
        agent.add("crafting_table", 1);
        agent.add("plank", 3);
        agent.add("stick", 2);
        let script = parse_script("ensure_station wooden_pickaxe\ncraft wooden_pickaxe\nequip wooden_pickaxe").unwrap();
        let run = execute_skill(&rules, &script, &Bindings::new(), &mut world, &mut agent);
        assert!(run.ok(), "{:?}", run.failure());
        assert_eq!(agent.equipped.as_deref(), Some("wooden_pickaxe"));
        let run = execute_skill(&rules, &parse_script("ensure_near furnace").unwrap(), &Bindings::new(), &mut world, &mut agent);
        assert_eq!(run.failure().unwrap().code, Some(FailureCode::MissingStation));
    }
}
