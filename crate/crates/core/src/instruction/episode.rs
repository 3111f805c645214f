//! The agent loop: perceive, plan, decompose, retrieve, execute, critique,
//! remember. One planner call is one iteration.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::agents::{self, ChatTurn, StepOutcome, Verdict};
use super::memory::{EntryKind, MemoryStore};
use super::prompts::{Role, RoleSet};
use super::InstructionError;
use crate::backends::{ChatBackend, EmbeddingBackend, HashedBow, ScriptedBackend};
use crate::datasets::{Completion, EpisodeHeader, EpisodeRecord, EpisodeTarget, Frame, Outcome, StepTrace, VisibleBlock};
use crate::perception::{observe, perceive, PerceptionConfig};
use crate::skills::{encode_query, execute_observed, Bindings, SkillDatabase, DEFAULT_THRESHOLD, STEP_CAP};
use crate::world::{
    advance_clock, check_task, generate_world, ActionResult, AgentState, Dims, FailureCode, FoundSet, Goal, Scenario,
    Task, TaskRegistry, Visible, WorldRules, WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub perception: PerceptionConfig,
    pub roles: RoleSet,
    /// Token budget of the memory summary.
    pub memory_budget: usize,
    /// Unsummarized entries shown to the planner.
    pub recent_entries: usize,
    pub retrieval_k: usize,
    pub threshold: f64,
    pub step_cap: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            perception: PerceptionConfig::default(),
            roles: RoleSet::default(),
            memory_budget: 200,
            recent_entries: 4,
            retrieval_k: 3,
            threshold: DEFAULT_THRESHOLD,
            step_cap: STEP_CAP,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), InstructionError> {
        self.perception.validate().map_err(|e| InstructionError::Config(e.to_string()))?;
        self.roles.validate()?;
        if self.memory_budget == 0 || self.retrieval_k == 0 || self.step_cap == 0 {
            return Err(InstructionError::Config("memory_budget, retrieval_k and step_cap must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(InstructionError::Config(format!("threshold {} outside [-1, 1]", self.threshold)));
        }
        Ok(())
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Shared, read-only services an episode runs against.
#[derive(Clone)]
pub struct Runtime {
    pub rules: Arc<WorldRules>,
    pub tasks: Arc<TaskRegistry>,
    pub skills: Arc<SkillDatabase>,
    pub embedder: Arc<dyn EmbeddingBackend>,
    pub chat: BTreeMap<String, Arc<dyn ChatBackend>>,
}

impl Runtime {
    /// Shipped rules, tasks and skills on the offline backends.
    pub fn local() -> Result<Self, InstructionError> {
        let rules = Arc::new(WorldRules::shipped());
        let tasks = Arc::new(TaskRegistry::shipped(&rules));
        let embedder: Arc<dyn EmbeddingBackend> = Arc::new(HashedBow::default());
        let skills = Arc::new(SkillDatabase::shipped(embedder.as_ref()).map_err(InstructionError::Skill)?);
        let scripted: Arc<dyn ChatBackend> = Arc::new(ScriptedBackend::new(rules.clone()));
        Ok(Runtime { rules, tasks, skills, embedder, chat: BTreeMap::from([("scripted".to_string(), scripted)]) })
    }

    fn backend(&self, id: &str) -> Result<&dyn ChatBackend, InstructionError> {
        self.chat
            .get(id)
            .map(|b| b.as_ref())
            .ok_or_else(|| InstructionError::Config(format!("no chat backend `{id}` configured")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub scenario: Scenario,
    pub dims: Dims,
    pub seed: u64,
    pub target: EpisodeTarget,
    pub cap: u32,
}

/// Blocks a goal asks to find, if any.
pub fn locate_block(rules: &WorldRules, task: &Task) -> Option<crate::world::BlockId> {
    match &task.goal {
        Goal::Locate { block, .. } => rules.block(block),
        Goal::Possess { .. } => None,
    }
}

pub fn snapshot(rules: &WorldRules, visible: &Visible) -> Vec<VisibleBlock> {
    visible.iter().map(|(&pos, &b)| VisibleBlock { pos, block: rules.block_name(b).to_string() }).collect()
}

fn success_items(task: &Task) -> BTreeMap<String, u32> {
    BTreeMap::from([(task.goal.target().to_string(), task.goal.count())])
}

struct Loop<'a> {
    rt: &'a Runtime,
    cfg: &'a AgentConfig,
    seed: u64,
    world: WorldState,
    agent: AgentState,
    found: FoundSet,
    memory: MemoryStore,
    frames: Vec<Frame>,
    completed: Vec<Completion>,
    turns: Vec<ChatTurn>,
}

impl Loop<'_> {
    fn iterations(&self) -> u32 {
        self.frames.len() as u32
    }

    fn remember(&mut self, kind: EntryKind, task: &Task, plan: Vec<String>, outcome: String, start: u64) -> Result<(), InstructionError> {
        let items = if kind == EntryKind::Success { success_items(task) } else { BTreeMap::new() };
        self.memory.append(kind, &task.id, plan, outcome, items, (start, self.world.tick));
        if self.memory.needs_summary(self.cfg.memory_budget) {
            let role = &self.cfg.roles.describer;
            let summary = agents::summarize(
                self.rt.backend(&role.backend)?,
                role,
                self.memory.entries(),
                self.cfg.memory_budget,
                self.seed,
                &mut self.turns,
            )?;
            self.memory.set_summary(summary);
        }
        Ok(())
    }

    fn complete(&mut self, task: &Task) -> Result<(), InstructionError> {
        self.completed.push(Completion { task: task.id.clone(), iteration: self.iterations() });
        let tick = self.world.tick;
        self.remember(EntryKind::Success, task, Vec::new(), format!("goal {} reached", task.goal), tick)
    }

    /// One planner round for `task`. Errors leave a partial frame recorded.
    fn iterate(&mut self, task: &Task, feedback: &mut String) -> Result<(), InstructionError> {
        let rules = self.rt.rules.as_ref();
        let start = self.world.tick;
        let perception = perceive(rules, &self.world, &self.agent, task, &self.cfg.perception);
        let target = locate_block(rules, task);
        if let Some(b) = target {
            self.found.record(&perception.visible, b);
        }
        self.frames.push(Frame {
            iteration: self.iterations() + 1,
            tick: start,
            task: task.id.clone(),
            visible: snapshot(rules, &perception.visible),
            bundle: perception.bundle.clone(),
            chat: std::mem::take(&mut self.turns),
            steps: Vec::new(),
            actions: Vec::new(),
            critique: None,
            found: 0,
        });
        let result = self.round(task, &perception.bundle, feedback, target);
        let frame = self.frames.last_mut().expect("frame pushed above");
        frame.chat.append(&mut self.turns);
        frame.found = target.map(|b| self.found.count(b)).unwrap_or(0) as u32;
        advance_clock(rules, &mut self.world, &mut self.agent);
        result
    }

    fn round(
        &mut self,
        task: &Task,
        bundle: &crate::perception::TokenBundle,
        feedback: &mut String,
        target: Option<crate::world::BlockId>,
    ) -> Result<(), InstructionError> {
        let rt = self.rt;
        let rules = rt.rules.as_ref();
        let cfg = self.cfg;
        let seed = self.seed.wrapping_add(self.iterations() as u64);
        let start = self.world.tick;
        let view = self.memory.view(cfg.recent_entries);
        let planner = rt.backend(&cfg.roles.planner.backend)?;
        let plan = agents::plan(rules, planner, &cfg.roles.planner, task, bundle, &view, feedback, seed, &mut self.turns)?;
        if plan.complete {
            *feedback = String::new();
            return self.remember(EntryKind::Fact, task, Vec::new(), "planner reported the goal satisfied".into(), start);
        }
        let steps = agents::decompose(rules, &plan)?;

        let mut outcomes = Vec::new();
        for step in &steps {
            let query = encode_query(rt.embedder.as_ref(), &step.query_text()).map_err(InstructionError::Skill)?;
            let retrieval = rt.skills.retrieve_flagged(&query, cfg.retrieval_k, cfg.threshold).map_err(InstructionError::Skill)?;
            let top = retrieval.top();
            let frame = self.frames.last_mut().expect("frame exists");
            frame.steps.push(StepTrace {
                step: step.raw_text.clone(),
                skill: Some(top.skill.id.clone()),
                score: Some(top.score),
                low_confidence: retrieval.low_confidence,
            });
            if retrieval.low_confidence {
                let msg = format!("no skill matches `{}` (best {} at {:.3})", step.raw_text, top.skill.id, top.score);
                let result = ActionResult::failure(self.world.tick, FailureCode::NoMatchingSkill, msg.clone());
                frame.actions.push(crate::skills::ExecStep { action: None, result });
                outcomes.push(StepOutcome { step: step.raw_text.clone(), failure: Some((FailureCode::NoMatchingSkill, msg)) });
                break;
            }
            let mut bindings = Bindings::new();
            bindings.insert("count".into(), step.quantity.unwrap_or(1).to_string());
            bindings.insert("item".into(), step.object.clone());
            let found = &mut self.found;
            let perception = &cfg.perception;
            let mut observer = |w: &WorldState, a: &AgentState| {
                if let Some(b) = target {
                    found.record(&observe(rules, w, a, perception), b);
                }
            };
            let run = execute_observed(
                rules,
                &top.skill.script,
                &bindings,
                &mut self.world,
                &mut self.agent,
                cfg.step_cap,
                &mut observer,
            );
            let failure = run.failure().map(|r| (r.code.unwrap_or(FailureCode::InvalidTarget), r.message.clone()));
            let frame = self.frames.last_mut().expect("frame exists");
            frame.actions.extend(run.steps);
            let stop = failure.is_some();
            outcomes.push(StepOutcome { step: step.raw_text.clone(), failure });
            if stop {
                break;
            }
        }

        let critic = rt.backend(&cfg.roles.critic.backend)?;
        let critique = agents::critique(critic, &cfg.roles.critic, task, &plan, &outcomes, seed, &mut self.turns)?;
        let plan_text: Vec<String> = steps.iter().map(|s| s.raw_text.clone()).collect();
        let kind = if critique.verdict == Verdict::Accept { EntryKind::Fact } else { EntryKind::Failure };
        let note = if critique.verdict == Verdict::Accept {
            format!("executed {} steps", outcomes.len())
        } else {
            critique.feedback.clone()
        };
        *feedback = if critique.verdict == Verdict::Revise { critique.feedback.clone() } else { String::new() };
        self.frames.last_mut().expect("frame exists").critique = Some(critique);
        self.remember(kind, task, plan_text, note, start)
    }
}

/// Runs one episode. Configuration problems are errors; anything that goes
/// wrong once the episode is under way is recorded in the outcome.
pub fn run_episode(rt: &Runtime, cfg: &AgentConfig, spec: &EpisodeSpec) -> Result<EpisodeRecord, InstructionError> {
    cfg.validate()?;
    let rules = rt.rules.as_ref();
    let (single, curriculum) = match &spec.target {
        EpisodeTarget::Task(id) => (Some(rt.tasks.get(id).map_err(InstructionError::World)?.clone()), None),
        EpisodeTarget::Curriculum(id) => {
            let c = rt.tasks.curriculum(id).ok_or_else(|| InstructionError::Config(format!("unknown curriculum `{id}`")))?;
            (None, Some(c.clone()))
        }
    };
    for role in Role::ALL {
        rt.backend(&cfg.roles.get(role).backend)?;
    }
    let world = generate_world(rules, spec.seed, spec.scenario, spec.dims).map_err(InstructionError::World)?;
    let agent = AgentState::spawn(&world);
    let start_tick = world.tick;
    let mut lp = Loop {
        rt,
        cfg,
        seed: spec.seed,
        world,
        agent,
        found: FoundSet::default(),
        memory: MemoryStore::new(),
        frames: Vec::new(),
        completed: Vec::new(),
        turns: Vec::new(),
    };

    let mut current: Option<Task> = single.clone();
    let mut feedback = String::new();
    let mut error = None;
    loop {
        // Settle completions and pick the next task before planning.
        let task = loop {
            if current.is_none() {
                let Some(cur) = &curriculum else { break None };
                if lp.iterations() >= spec.cap {
                    break None;
                }
                let done: BTreeSet<String> = lp.completed.iter().map(|c| c.task.clone()).collect();
                let role = &cfg.roles.curriculum;
                let backend = rt.backend(&role.backend)?;
                let view = lp.memory.view(cfg.recent_entries);
                match agents::propose_task(backend, role, &rt.tasks, cur, &done, &view, spec.seed, &mut lp.turns) {
                    Ok(id) => {
                        current = Some(rt.tasks.get(&id).map_err(InstructionError::World)?.clone());
                        feedback.clear();
                    }
                    Err(InstructionError::CurriculumExhausted(_)) => break None,
                    Err(e) => {
                        error = Some(e.to_string());
                        break None;
                    }
                }
            }
            let t = current.clone().expect("set above");
            if check_task(rules, &lp.agent, &lp.found, &t) {
                if let Err(e) = lp.complete(&t) {
                    error = Some(e.to_string());
                    break None;
                }
                current = None;
                if curriculum.is_none() {
                    break None;
                }
                continue;
            }
            break Some(t);
        };
        let Some(task) = task else { break };
        if error.is_some() || lp.iterations() >= spec.cap {
            break;
        }
        if let Err(e) = lp.iterate(&task, &mut feedback) {
            error = Some(e.to_string());
            break;
        }
    }

    let done: BTreeSet<&str> = lp.completed.iter().map(|c| c.task.as_str()).collect();
    let success = error.is_none()
        && match (&single, &curriculum) {
            (Some(t), _) => done.contains(t.id.as_str()),
            (None, Some(c)) => c.tasks.iter().all(|t| done.contains(t.as_str())),
            (None, None) => false,
        };
    let found = match (&single, &curriculum) {
        (Some(t), _) => locate_block(rules, t).map(|b| lp.found.count(b)).unwrap_or(0) as u32,
        _ => 0,
    };
    Ok(EpisodeRecord {
        header: EpisodeHeader {
            seed: spec.seed,
            scenario: spec.scenario,
            dims: spec.dims,
            target: spec.target.clone(),
            cap: spec.cap,
            perception: cfg.perception.clone(),
            run_config_hash: String::new(),
            agent_config_hash: cfg.hash(),
            start_tick,
            end_tick: lp.world.tick,
        },
        outcome: Outcome {
            success,
            iterations: lp.iterations(),
            items: lp.agent.inventory.clone(),
            completed: lp.completed,
            found,
            error,
        },
        frames: lp.frames,
    })
}
