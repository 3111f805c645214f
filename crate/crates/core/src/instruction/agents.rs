//! The four role agents. Each renders its template, calls its backend and
//! parses the reply into a typed result, logging every exchange.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::memory::{compact, MemoryEntry, MemoryView, Summary};
use super::prompts::{Role, RoleConfig};
use super::steps::{extract_steps, parse_step, ActionStep};
use super::InstructionError;
use crate::backends::{ChatBackend, ChatMessage, ChatRequest, Speaker};
use crate::perception::TokenBundle;
use crate::world::{Curriculum, FailureCode, Task, TaskRegistry, WorldRules};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub prompt: String,
    pub response: String,
}

fn ask(
    backend: &dyn ChatBackend,
    cfg: &RoleConfig,
    mut messages: Vec<ChatMessage>,
    seed: u64,
    log: &mut Vec<ChatTurn>,
) -> Result<String, InstructionError> {
    let prompt = messages.last().map(|m| m.text.clone()).unwrap_or_default();
    let request = ChatRequest {
        role_id: cfg.role.name().to_string(),
        messages: std::mem::take(&mut messages),
        temperature: cfg.temperature,
        seed: Some(seed),
    };
    let response = backend.complete(&request)?;
    log.push(ChatTurn { role: cfg.role, prompt, response: response.clone() });
    Ok(response)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub strategy: String,
    pub rationale: String,
    pub steps: Vec<ActionStep>,
    /// The planner reported the goal as already satisfied.
    pub complete: bool,
}

fn field<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.trim().strip_prefix(label)).map(str::trim)
}

fn strip_marker(line: &str) -> Option<&str> {
    let l = line.trim();
    if let Some(rest) = l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")) {
        return Some(rest.trim());
    }
    let digits = l.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &l[digits..];
        return rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')).map(str::trim);
    }
    None
}

/// Reads a planner reply. Numbered or bulleted lines are parsed by the strict
/// grammar, falling back to prose extraction line by line and then over the
/// whole reply.
pub fn parse_plan(rules: &WorldRules, text: &str) -> Result<Plan, InstructionError> {
    let strategy = field(text, "strategy:").unwrap_or("").to_string();
    let rationale = field(text, "rationale:").unwrap_or("").to_string();
    if text.lines().any(|l| l.trim() == "DONE") {
        return Ok(Plan { strategy, rationale, steps: Vec::new(), complete: true });
    }
    let mut steps = Vec::new();
    for line in text.lines().filter_map(strip_marker) {
        match parse_step(rules, line) {
            Ok(s) => steps.push(s),
            Err(_) => steps.extend(extract_steps(rules, line)),
        }
    }
    if steps.is_empty() {
        steps = extract_steps(rules, text);
    }
    if steps.is_empty() {
        return Err(InstructionError::ParseFailure(text.to_string()));
    }
    Ok(Plan { strategy, rationale, steps, complete: false })
}

/// Re-checks every step against the strict grammar. Order is preserved.
pub fn decompose(rules: &WorldRules, plan: &Plan) -> Result<Vec<ActionStep>, InstructionError> {
    plan.steps.iter().map(|s| parse_step(rules, &s.raw_text)).collect()
}

const GRAMMAR_REMINDER: &str = "Your previous reply could not be read. List the plan as numbered steps, \
one per line, each `<verb> [<count>] <object>` with verb one of collect, mine, craft, smelt, place, \
equip, explore, locate. Reply DONE if the goal is already satisfied.";

pub fn plan(
    rules: &WorldRules,
    backend: &dyn ChatBackend,
    cfg: &RoleConfig,
    task: &Task,
    bundle: &TokenBundle,
    memory: &MemoryView,
    feedback: &str,
    seed: u64,
    log: &mut Vec<ChatTurn>,
) -> Result<Plan, InstructionError> {
    let vars = BTreeMap::from([
        ("task", format!("{} ({})", task.id, task.description)),
        ("bundle", bundle.render()),
        ("memory", memory.render()),
        ("feedback", if feedback.is_empty() { "none".to_string() } else { feedback.to_string() }),
    ]);
    let messages = cfg.prompt_template.render(&vars);
    let reply = ask(backend, cfg, messages.clone(), seed, log)?;
    match parse_plan(rules, &reply) {
        Ok(p) => Ok(p),
        Err(InstructionError::ParseFailure(_)) => {
            let mut retry = messages.clone();
            retry.push(ChatMessage { speaker: Speaker::Assistant, text: reply });
            let user = &messages[1].text;
            retry.push(ChatMessage { speaker: Speaker::User, text: format!("{GRAMMAR_REMINDER}\n{user}") });
            let again = ask(backend, cfg, retry, seed, log)?;
            parse_plan(rules, &again)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Revise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub verdict: Verdict,
    pub feedback: String,
}

/// What happened to one step, as shown to the Critic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<(FailureCode, String)>,
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "- {} => ok", self.step),
            Some((code, msg)) => write!(f, "- {} => FAIL {}: {msg}", self.step, code.name()),
        }
    }
}

/// Asks the Critic. A reply that accepts a failed outcome is overruled, so an
/// accept verdict always means every step succeeded.
pub fn critique(
    backend: &dyn ChatBackend,
    cfg: &RoleConfig,
    task: &Task,
    plan: &Plan,
    outcome: &[StepOutcome],
    seed: u64,
    log: &mut Vec<ChatTurn>,
) -> Result<Critique, InstructionError> {
    if outcome.is_empty() {
        return Err(InstructionError::Precondition("critique needs a nonempty outcome".into()));
    }
    let plan_text = plan.steps.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect::<Vec<_>>();
    let outcome_text = outcome.iter().map(ToString::to_string).collect::<Vec<_>>();
    let vars = BTreeMap::from([
        ("task", task.id.clone()),
        ("plan", plan_text.join("\n")),
        ("outcome", outcome_text.join("\n")),
    ]);
    let reply = ask(backend, cfg, cfg.prompt_template.render(&vars), seed, log)?;
    let verdict = match field(&reply, "verdict:").map(str::to_ascii_lowercase).as_deref() {
        Some(v) if v.starts_with("accept") => Verdict::Accept,
        Some(v) if v.starts_with("revise") => Verdict::Revise,
        _ => return Err(InstructionError::ParseFailure(reply)),
    };
    let mut feedback = field(&reply, "feedback:").unwrap_or("").to_string();
    let failed: Vec<&StepOutcome> = outcome.iter().filter(|o| o.failure.is_some()).collect();
    if failed.is_empty() {
        return Ok(Critique { verdict, feedback });
    }
    for o in failed {
        let (code, msg) = o.failure.as_ref().expect("filtered");
        if !feedback.contains(code.name()) {
            if !feedback.is_empty() {
                feedback.push_str("; ");
            }
            feedback.push_str(&format!("step `{}` failed with {}: {msg}", o.step, code.name()));
        }
    }
    Ok(Critique { verdict: Verdict::Revise, feedback })
}

/// Tasks of `curriculum` not yet completed whose prerequisites are, in
/// curriculum order.
pub fn candidates(registry: &TaskRegistry, curriculum: &Curriculum, completed: &BTreeSet<String>) -> Vec<String> {
    curriculum
        .tasks
        .iter()
        .filter(|t| !completed.contains(*t))
        .filter(|t| registry.get(t).map(|task| task.requires.iter().all(|r| completed.contains(r))).unwrap_or(false))
        .cloned()
        .collect()
}

pub fn propose_task(
    backend: &dyn ChatBackend,
    cfg: &RoleConfig,
    registry: &TaskRegistry,
    curriculum: &Curriculum,
    completed: &BTreeSet<String>,
    memory: &MemoryView,
    seed: u64,
    log: &mut Vec<ChatTurn>,
) -> Result<String, InstructionError> {
    let cands = candidates(registry, curriculum, completed);
    if cands.is_empty() {
        return Err(InstructionError::CurriculumExhausted(curriculum.id.clone()));
    }
    let done: Vec<&str> = curriculum.tasks.iter().filter(|t| completed.contains(*t)).map(String::as_str).collect();
    let vars = BTreeMap::from([
        ("completed", if done.is_empty() { "none".to_string() } else { done.join(", ") }),
        ("candidates", cands.join(", ")),
        ("memory", memory.render()),
    ]);
    let reply = ask(backend, cfg, cfg.prompt_template.render(&vars), seed, log)?;
    match field(&reply, "next:") {
        Some("none") => Err(InstructionError::CurriculumExhausted(curriculum.id.clone())),
        Some(id) if cands.iter().any(|c| c == id) => Ok(id.to_string()),
        _ => Err(InstructionError::ParseFailure(reply)),
    }
}

/// Asks the Describer for a summary. A reply over budget or missing a
/// success task falls back to local compaction.
pub fn summarize(
    backend: &dyn ChatBackend,
    cfg: &RoleConfig,
    entries: &[MemoryEntry],
    budget: usize,
    seed: u64,
    log: &mut Vec<ChatTurn>,
) -> Result<Summary, InstructionError> {
    if budget == 0 {
        return Err(InstructionError::Precondition("summary budget must be positive".into()));
    }
    let ids: Vec<u32> = entries.iter().map(|e| e.id).collect();
    if entries.is_empty() {
        return Ok(Summary::new(String::new(), ids));
    }
    let lines: Vec<String> = entries.iter().map(MemoryEntry::render).collect();
    let vars = BTreeMap::from([("budget", budget.to_string()), ("entries", lines.join("\n"))]);
    let reply = ask(backend, cfg, cfg.prompt_template.render(&vars), seed, log)?;
    if reply.trim() == "infeasible" {
        return compact(entries, budget);
    }
    let summary = Summary::new(reply.trim().to_string(), ids);
    if summary.covers(entries, budget) {
        Ok(summary)
    } else {
        compact(entries, budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ScriptedBackend;
    use crate::instruction::memory::{EntryKind, MemoryStore};
    use crate::instruction::prompts::RoleSet;
    use crate::perception::{perceive, PerceptionConfig};
    use crate::world::{generate_world, AgentState, Dims, Scenario};
    use std::sync::Arc;

    fn setup() -> (Arc<WorldRules>, TaskRegistry, ScriptedBackend, RoleSet) {
        let rules = Arc::new(WorldRules::shipped());
        let reg = TaskRegistry::shipped(&rules);
        (rules.clone(), reg, ScriptedBackend::new(rules), RoleSet::default())
    }

    #[test]
    fn wooden_pickaxe_plan_from_nothing() {
        let (rules, reg, b, roles) = setup();
        let world = generate_world(&rules, 1, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let agent = AgentState::spawn(&world);
        let task = reg.get("wooden_tool").unwrap();
        let p = perceive(&rules, &world, &agent, task, &PerceptionConfig::default());
        let mut log = Vec::new();
        let view = MemoryStore::new().view(4);
        let plan = plan(&rules, &b, &roles.planner, task, &p.bundle, &view, "", 7, &mut log).unwrap();
        let texts: Vec<_> = decompose(&rules, &plan).unwrap().into_iter().map(|s| s.raw_text).collect();
        assert_eq!(texts, ["collect 3 log", "craft 12 plank", "craft 4 stick", "craft crafting_table", "craft wooden_pickaxe"]);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].role, Role::Planner);
    }

    #[test]
    fn plan_parsing() {
        let rules = WorldRules::shipped();
        let done = parse_plan(&rules, "strategy: nothing to do\nDONE\n").unwrap();
        assert!(done.complete && done.steps.is_empty());
        let prose = parse_plan(&rules, "I think we should build a shelter. Collect wood and craft planks.").unwrap();
        let texts: Vec<_> = prose.steps.iter().map(|s| s.raw_text.as_str()).collect();
        assert_eq!(texts, ["collect log", "craft plank"]);
        assert!(matches!(parse_plan(&rules, ""), Err(InstructionError::ParseFailure(_))));
        assert!(matches!(parse_plan(&rules, "hello there"), Err(InstructionError::ParseFailure(_))));
    }

    /// Emits prose first, then a well-formed plan when reminded of the grammar.
    struct Stubborn;
    impl ChatBackend for Stubborn {
        fn id(&self) -> String {
            "stubborn".into()
        }
        fn complete(&self, r: &ChatRequest) -> Result<String, crate::backends::BackendError> {
            Ok(if r.messages.len() > 2 { "steps:\n1. collect 2 log\n".into() } else { "hmm".into() })
        }
    }

    #[test]
    fn reprompts_once_on_parse_failure() {
        let (rules, reg, _, roles) = setup();
        let world = generate_world(&rules, 1, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let agent = AgentState::spawn(&world);
        let task = reg.get("collect_wood").unwrap();
        let bundle = perceive(&rules, &world, &agent, task, &PerceptionConfig::default()).bundle;
        let mut log = Vec::new();
        let p = plan(&rules, &Stubborn, &roles.planner, task, &bundle, &MemoryStore::new().view(2), "", 0, &mut log).unwrap();
        assert_eq!(p.steps[0].raw_text, "collect 2 log");
        assert_eq!(log.len(), 2);
        assert!(log[1].prompt.starts_with("Your previous reply"));
    }

    #[test]
    fn critic_verdicts() {
        let (rules, reg, b, roles) = setup();
        let task = reg.get("diamond_tool").unwrap();
        let p = parse_plan(&rules, "steps:\n1. mine 3 diamond\n").unwrap();
        let mut log = Vec::new();
        let ok = [StepOutcome { step: "mine 3 diamond".into(), failure: None }];
        let c = critique(&b, &roles.critic, task, &p, &ok, 0, &mut log).unwrap();
        assert_eq!(c.verdict, Verdict::Accept);
        let bad = [StepOutcome {
            step: "mine 3 diamond".into(),
            failure: Some((FailureCode::InsufficientTier, "needs tier 3".into())),
        }];
        let c = critique(&b, &roles.critic, task, &p, &bad, 0, &mut log).unwrap();
        assert_eq!(c.verdict, Verdict::Revise);
        assert!(c.feedback.contains("InsufficientTier"));
        assert!(matches!(critique(&b, &roles.critic, task, &p, &[], 0, &mut log), Err(InstructionError::Precondition(_))));
    }

    #[test]
    fn curriculum_proposals() {
        let (_, reg, b, roles) = setup();
        let cur = reg.curriculum("tech_tree").unwrap();
        let view = MemoryStore::new().view(2);
        let mut log = Vec::new();
        let mut done = BTreeSet::new();
        let first = propose_task(&b, &roles.curriculum, &reg, cur, &done, &view, 5, &mut log).unwrap();
        assert_eq!(first, "wooden_tool");
        let again = propose_task(&b, &roles.curriculum, &reg, cur, &done, &view, 5, &mut log).unwrap();
        assert_eq!(first, again);
        done.extend(cur.tasks.iter().cloned());
        assert!(matches!(
            propose_task(&b, &roles.curriculum, &reg, cur, &done, &view, 5, &mut log),
            Err(InstructionError::CurriculumExhausted(_))
        ));
        // Survival offers several tasks at once; sampling is reproducible per seed.
        let surv = reg.curriculum("survival").unwrap();
        let none = BTreeSet::new();
        let picks: Vec<String> =
            (0..2).map(|_| propose_task(&b, &roles.curriculum, &reg, surv, &none, &view, 11, &mut log).unwrap()).collect();
        assert_eq!(picks[0], picks[1]);
    }

    #[test]
    fn describer_keeps_successes() {
        let (_, _, b, roles) = setup();
        let mut store = MemoryStore::new();
        for i in 0..50u32 {
            let kind = if i % 4 == 0 { EntryKind::Success } else { EntryKind::Failure };
            let items = if kind == EntryKind::Success { BTreeMap::from([("log".to_string(), i)]) } else { BTreeMap::new() };
            store.append(kind, &format!("task_{i}"), vec![], "step collect log failed with NoTarget: none".into(), items, (0, 1));
        }
        let mut log = Vec::new();
        let s = summarize(&b, &roles.describer, store.entries(), 100, 0, &mut log).unwrap();
        assert!(s.token_estimate <= 100);
        assert!(s.covers(store.entries(), 100));
        assert!(matches!(
            summarize(&b, &roles.describer, store.entries(), 1, 0, &mut log),
            Err(InstructionError::BudgetInfeasible { .. })
        ));
        assert_eq!(summarize(&b, &roles.describer, &[], 10, 0, &mut log).unwrap().token_estimate, 0);
    }
}
