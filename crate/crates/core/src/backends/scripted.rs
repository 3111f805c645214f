//! Deterministic rule-table stand-in for a chat model. Each role reads the
//! labelled lines its prompt template emits and answers in the same shape a
//! real model is asked for.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{estimate_tokens, BackendError, ChatBackend, ChatRequest, HashedBow};
use crate::perception::TokenBundle;
use crate::world::{Goal, WorldRules};

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Arc<WorldRules>,
}

impl ScriptedBackend {
    pub fn new(rules: Arc<WorldRules>) -> Self {
        ScriptedBackend { rules }
    }
}

impl ChatBackend for ScriptedBackend {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let msg = request.latest_user();
        match request.role_id.as_str() {
            "planner" => self.plan(msg),
            "critic" => Ok(critique(msg)),
            "curriculum" => Ok(pick_task(msg, request.temperature, request.seed.unwrap_or(0))),
            "describer" => describe(msg),
            "judge" => judge(msg),
            other => Err(BackendError::InvalidRequest(format!("scripted backend has no role `{other}`"))),
        }
    }
}

fn labelled<'a>(msg: &'a str, label: &str) -> Option<&'a str> {
    msg.lines().find_map(|l| l.trim_start().strip_prefix(label)).map(str::trim)
}

impl ScriptedBackend {
    fn plan(&self, msg: &str) -> Result<String, BackendError> {
        let start = msg
            .lines()
            .position(|l| l.starts_with("[visual mode="))
            .ok_or_else(|| BackendError::InvalidRequest("planner prompt carries no observation".into()))?;
        let block: Vec<&str> = msg.lines().skip(start).take(6).collect();
        let bundle = TokenBundle::parse(&block.join("\n"))
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let goal = parse_goal(bundle.task_value("goal").unwrap_or(""))
            .ok_or_else(|| BackendError::InvalidRequest("observation has no goal".into()))?;

        let mut inventory = BTreeMap::new();
        for t in &bundle.state {
            if let Some((k, v)) = t.split_once('=') {
                if let Ok(n) = v.parse::<u32>() {
                    if !matches!(k, "health" | "hunger") {
                        inventory.insert(k.to_string(), n);
                    }
                }
            }
        }
        let equipped = bundle.state_value("equipped").filter(|e| *e != "none");
        let visible: BTreeSet<String> = bundle
            .visual_tokens()
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?
            .into_iter()
            .map(|t| t.block)
            .collect();

        let steps = oracle_steps(&self.rules, &goal, &inventory, equipped, &visible);
        if steps.is_empty() {
            return Ok("strategy: goal already satisfied\nDONE\n".into());
        }
        let mut out = format!(
            "strategy: obtain {} by working up its recipe chain\nrationale: raw materials first, then intermediates, then the goal\nsteps:\n",
            goal.target()
        );
        for (i, s) in steps.iter().enumerate() {
            out.push_str(&format!("{}. {s}\n", i + 1));
        }
        Ok(out)
    }
}

fn parse_goal(s: &str) -> Option<Goal> {
    let mut it = s.split(':');
    let (kind, target, count) = (it.next()?, it.next()?, it.next()?.parse().ok()?);
    match kind {
        "possess" => Some(Goal::Possess { item: target.to_string(), count }),
        "locate" => Some(Goal::Locate { block: target.to_string(), count }),
        _ => None,
    }
}

/// Step list reaching `goal` from the given inventory, derived from the
/// recipe graph. Dependencies come first (inputs in name order, then the
/// station, then the tool a raw material needs); demand is summed over the
/// whole closure and netted against what is already held.
pub fn oracle_steps(
    rules: &WorldRules,
    goal: &Goal,
    inventory: &BTreeMap<String, u32>,
    equipped: Option<&str>,
    visible: &BTreeSet<String>,
) -> Vec<String> {
    let (target, count) = match goal {
        Goal::Locate { block, .. } => return vec![format!("locate {block}")],
        Goal::Possess { item, count } => (item.as_str(), *count),
    };
    let have = |i: &str| inventory.get(i).copied().unwrap_or(0);
    if have(target) >= count {
        return Vec::new();
    }
    let owned_tier = inventory.keys().filter_map(|i| rules.tool_tier(i)).max().unwrap_or(0);
    // Lowest tier tool able to mine `tier`.
    let tool_for = |tier: u8| -> Option<String> {
        let mut tools: Vec<(u8, &str)> = rules.tools().map(|(i, t)| (t, i)).collect();
        tools.sort();
        tools.into_iter().find(|&(t, _)| t >= tier).map(|(_, i)| i.to_string())
    };
    let station_available = |s: &str| visible.contains(s) || have(s) > 0;

    // Post-order over the dependency graph.
    fn deps(
        rules: &WorldRules,
        item: &str,
        owned_tier: u8,
        tool_for: &dyn Fn(u8) -> Option<String>,
        station_available: &dyn Fn(&str) -> bool,
    ) -> Vec<(String, bool)> {
        let mut out = Vec::new();
        if let Some(r) = rules.recipe(item) {
            out.extend(r.inputs.keys().map(|k| (k.clone(), false)));
            if let Some(s) = r.station.block_id() {
                if !station_available(s) {
                    out.push((s.to_string(), true));
                }
            }
        } else if let Some(b) = rules.source_block(item) {
            let tier = rules.block_type(b).tier;
            if tier > owned_tier {
                if let Some(t) = tool_for(tier) {
                    out.push((t, true));
                }
            }
        }
        out
    }
    let mut order: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    fn visit(
        rules: &WorldRules,
        item: &str,
        owned_tier: u8,
        tool_for: &dyn Fn(u8) -> Option<String>,
        station_available: &dyn Fn(&str) -> bool,
        seen: &mut BTreeSet<String>,
        order: &mut Vec<String>,
    ) {
        if !seen.insert(item.to_string()) {
            return;
        }
        for (d, _) in deps(rules, item, owned_tier, tool_for, station_available) {
            visit(rules, &d, owned_tier, tool_for, station_available, seen, order);
        }
        order.push(item.to_string());
    }
    visit(rules, target, owned_tier, &tool_for, &station_available, &mut seen, &mut order);

    // Demand in reverse post-order; stations and tools are needed once.
    let mut demand: BTreeMap<String, u32> = BTreeMap::from([(target.to_string(), count)]);
    let mut produce: BTreeMap<String, u32> = BTreeMap::new();
    for item in order.iter().rev() {
        let need = demand.get(item).copied().unwrap_or(0);
        let net = need.saturating_sub(have(item));
        if net == 0 {
            continue;
        }
        match rules.recipe(item) {
            Some(r) => {
                let batches = net.div_ceil(r.count);
                produce.insert(item.clone(), batches * r.count);
                for (input, n) in &r.inputs {
                    *demand.entry(input.clone()).or_insert(0) += batches * n;
                }
            }
            None => {
                produce.insert(item.clone(), net);
            }
        }
        for (d, once) in deps(rules, item, owned_tier, &tool_for, &station_available) {
            if once {
                let e = demand.entry(d).or_insert(0);
                *e = (*e).max(1);
            }
        }
    }

    let mut steps = Vec::new();
    let mut tier = equipped.and_then(|e| rules.tool_tier(e)).unwrap_or(0);
    let mut held: BTreeSet<String> = inventory.keys().filter(|i| rules.tool_tier(i).is_some()).cloned().collect();
    for item in &order {
        let Some(&n) = produce.get(item) else { continue };
        let qty = if n > 1 { format!("{n} ") } else { String::new() };
        match rules.recipe(item) {
            Some(r) => {
                let verb = if r.is_smelting() { "smelt" } else { "craft" };
                steps.push(format!("{verb} {qty}{item}"));
                if rules.tool_tier(item).is_some() {
                    held.insert(item.clone());
                }
            }
            None => {
                let block_tier = rules.source_block(item).map(|b| rules.block_type(b).tier).unwrap_or(0);
                if block_tier > tier {
                    // Cheapest held tool that is good enough.
                    let best = held
                        .iter()
                        .filter_map(|t| rules.tool_tier(t).map(|tt| (tt, t.clone())))
                        .filter(|(tt, _)| *tt >= block_tier)
                        .min();
                    if let Some((tt, t)) = best {
                        steps.push(format!("equip {t}"));
                        tier = tt;
                    }
                }
                let verb = if block_tier == 0 { "collect" } else { "mine" };
                steps.push(format!("{verb} {qty}{item}"));
            }
        }
    }
    steps
}

/// Reads `- <step> => ok` / `- <step> => FAIL <Code>: <message>` lines.
fn critique(msg: &str) -> String {
    let mut failures = Vec::new();
    let mut total = 0;
    for line in msg.lines() {
        let Some((step, result)) = line.trim_start().strip_prefix("- ").and_then(|l| l.split_once(" => ")) else {
            continue;
        };
        total += 1;
        if let Some(rest) = result.strip_prefix("FAIL ") {
            failures.push(format!("step `{step}` failed with {rest}"));
        }
    }
    if failures.is_empty() {
        format!("verdict: accept\nfeedback: all {total} steps succeeded\n")
    } else {
        format!("verdict: revise\nfeedback: {}\n", failures.join("; "))
    }
}

/// Chooses among `candidates:` in listed order. At temperature 0 the first
/// wins; otherwise candidate i is drawn with weight exp(-i/T).
fn pick_task(msg: &str, temperature: f64, seed: u64) -> String {
    let candidates: Vec<&str> = labelled(msg, "candidates:")
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect();
    if candidates.is_empty() {
        return "next: none\n".into();
    }
    let pick = if temperature == 0.0 || candidates.len() == 1 {
        0
    } else {
        let h = Sha256::digest(msg.as_bytes());
        let salt = u64::from_le_bytes(h[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
        let weights: Vec<f64> = (0..candidates.len()).map(|i| (-(i as f64) / temperature).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.random::<f64>() * total;
        let mut chosen = candidates.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                chosen = i;
                break;
            }
            x -= w;
        }
        chosen
    };
    format!("next: {}\n", candidates[pick])
}

/// Entry lines: `entry: <kind> <task_id> items=<k:v,...|-> outcome=<text>`.
/// Success headers are mandatory; their item lists go first when the budget
/// is tight, failure notes fill what is left.
fn describe(msg: &str) -> Result<String, BackendError> {
    let budget: usize = labelled(msg, "budget:")
        .and_then(|b| b.parse().ok())
        .ok_or_else(|| BackendError::InvalidRequest("describer prompt has no budget".into()))?;
    let mut successes: Vec<(String, String)> = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    for line in msg.lines() {
        let Some(rest) = line.trim_start().strip_prefix("entry:") else { continue };
        let mut parts = rest.split_whitespace();
        let (Some(kind), Some(task)) = (parts.next(), parts.next()) else { continue };
        let tail: Vec<&str> = parts.collect();
        let tail = tail.join(" ");
        let items = tail
            .split_whitespace()
            .find_map(|w| w.strip_prefix("items="))
            .filter(|i| *i != "-")
            .unwrap_or("")
            .replace(',', " ");
        let outcome = tail.split_once("outcome=").map(|(_, o)| o.trim().to_string()).unwrap_or_default();
        match kind {
            "success" => match successes.iter_mut().find(|(t, _)| t == task) {
                Some(entry) => entry.1 = items,
                None => successes.push((task.to_string(), items)),
            },
            "failure" => failures.push((task.to_string(), outcome)),
            _ => {}
        }
    }
    if successes.is_empty() && failures.is_empty() {
        return Ok(String::new());
    }

    let headers: Vec<String> = successes.iter().map(|(t, _)| format!("done {t}")).collect();
    let full: Vec<String> = successes
        .iter()
        .map(|(t, i)| if i.is_empty() { format!("done {t}") } else { format!("done {t}: {i}") })
        .collect();
    let cost = |lines: &[String]| lines.iter().map(|l| estimate_tokens(l)).sum::<usize>();
    if cost(&headers) > budget {
        return Ok("infeasible\n".into());
    }
    let mut lines = if cost(&full) <= budget { full } else { headers };
    let mut used = cost(&lines);
    for (task, outcome) in failures.iter().rev() {
        let line = format!("failed {task}: {}", first_words(outcome, 8));
        let c = estimate_tokens(&line);
        if used + c > budget {
            break;
        }
        used += c;
        lines.push(line);
    }
    Ok(lines.join("\n") + "\n")
}

fn first_words(s: &str, n: usize) -> String {
    s.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// Exact match scores 10, an empty answer 0, anything else 10 times the share
/// of reference tokens present in the answer.
fn judge(msg: &str) -> Result<String, BackendError> {
    let reference = labelled(msg, "reference:").ok_or_else(|| BackendError::InvalidRequest("no reference".into()))?;
    let answer = labelled(msg, "answer:").unwrap_or("");
    let norm = |s: &str| HashedBow::tokens(s);
    let (r, a) = (norm(reference), norm(answer));
    let score = if a.is_empty() {
        0.0
    } else if r == a {
        10.0
    } else {
        let have: BTreeSet<&String> = a.iter().collect();
        let distinct: BTreeSet<&String> = r.iter().collect();
        if distinct.is_empty() {
            0.0
        } else {
            10.0 * distinct.iter().filter(|t| have.contains(*t)).count() as f64 / distinct.len() as f64
        }
    };
    Ok(format!("score: {score}\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{ChatMessage, Speaker};

    fn inv(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn possess(item: &str) -> Goal {
        Goal::Possess { item: item.into(), count: 1 }
    }

    #[test]
    fn wooden_pickaxe_from_nothing() {
        let rules = WorldRules::shipped();
        let steps = oracle_steps(&rules, &possess("wooden_pickaxe"), &inv(&[]), None, &BTreeSet::new());
        assert_eq!(
            steps,
            ["collect 3 log", "craft 12 plank", "craft 4 stick", "craft crafting_table", "craft wooden_pickaxe"]
        );
    }

    #[test]
    fn satisfied_goal_is_empty() {
        let rules = WorldRules::shipped();
        let steps =
            oracle_steps(&rules, &possess("wooden_pickaxe"), &inv(&[("wooden_pickaxe", 1)]), None, &BTreeSet::new());
        assert!(steps.is_empty());
    }

    #[test]
    fn stone_pickaxe_equips_and_reuses_visible_table() {
        let rules = WorldRules::shipped();
        let have = inv(&[("wooden_pickaxe", 1), ("stick", 2), ("plank", 3)]);
        let visible = BTreeSet::from(["crafting_table".to_string()]);
        let steps = oracle_steps(&rules, &possess("stone_pickaxe"), &have, None, &visible);
        assert_eq!(steps, ["equip wooden_pickaxe", "mine 3 cobblestone", "craft stone_pickaxe"]);
    }

    #[test]
    fn diamond_pickaxe_closure_is_ordered() {
        let rules = WorldRules::shipped();
        let steps = oracle_steps(&rules, &possess("diamond_pickaxe"), &inv(&[]), None, &BTreeSet::new());
        let pos = |s: &str| steps.iter().position(|x| x.ends_with(s)).unwrap_or_else(|| panic!("{s} in {steps:?}"));
        assert!(pos("wooden_pickaxe") < pos("cobblestone"));
        assert!(pos("stone_pickaxe") < pos("iron_ore"));
        assert!(pos("iron_ingot") < pos("iron_pickaxe"));
        assert!(pos("iron_pickaxe") < pos(" diamond"));
        assert_eq!(steps.last().unwrap(), "craft diamond_pickaxe");
        assert!(steps.contains(&"smelt 3 iron_ingot".to_string()));
        assert!(steps.contains(&"equip iron_pickaxe".to_string()));
    }

    #[test]
    fn locate_goal() {
        let rules = WorldRules::shipped();
        let g = Goal::Locate { block: "diamond_ore".into(), count: 10 };
        assert_eq!(oracle_steps(&rules, &g, &inv(&[]), None, &BTreeSet::new()), ["locate diamond_ore"]);
    }

    fn req(role: &str, user: &str, temperature: f64, seed: u64) -> ChatRequest {
        ChatRequest {
            role_id: role.into(),
            messages: vec![
                ChatMessage { speaker: Speaker::System, text: "sys".into() },
                ChatMessage { speaker: Speaker::User, text: user.into() },
            ],
            temperature,
            seed: Some(seed),
        }
    }

    #[test]
    fn curriculum_sampling_is_seeded() {
        let b = ScriptedBackend::new(Arc::new(WorldRules::shipped()));
        let msg = "completed: none\ncandidates: a, b, c, d";
        assert_eq!(b.complete(&req("curriculum", msg, 0.0, 1)).unwrap(), "next: a\n");
        let x = b.complete(&req("curriculum", msg, 0.9, 7)).unwrap();
        assert_eq!(x, b.complete(&req("curriculum", msg, 0.9, 7)).unwrap());
        let picks: BTreeSet<String> =
            (0..40).map(|s| b.complete(&req("curriculum", msg, 0.9, s)).unwrap()).collect();
        assert!(picks.len() > 1);
        assert_eq!(b.complete(&req("curriculum", "candidates:", 0.9, 1)).unwrap(), "next: none\n");
    }

    #[test]
    fn critic_rules() {
        let ok = critique("outcome:\n- collect 3 log => ok\n- craft 12 plank => ok\n");
        assert!(ok.starts_with("verdict: accept"));
        let bad = critique("- mine 3 diamond => FAIL InsufficientTier: diamond_ore needs tool tier 3\n");
        assert!(bad.starts_with("verdict: revise"));
        assert!(bad.contains("InsufficientTier"));
    }

    #[test]
    fn judge_rules() {
        assert_eq!(judge("reference: Iron ore\nanswer: iron ore").unwrap(), "score: 10\n");
        assert_eq!(judge("reference: iron ore\nanswer:").unwrap(), "score: 0\n");
        assert_eq!(judge("reference: iron ore\nanswer: some iron").unwrap(), "score: 5\n");
    }

    #[test]
    fn describer_budget() {
        let msg = "budget: 6\nentry: success wooden_tool items=wooden_pickaxe:1 outcome=ok\nentry: failure stone_tool items=- outcome=mine failed";
        let out = describe(msg).unwrap();
        assert!(out.contains("done wooden_tool"));
        assert!(out.lines().map(estimate_tokens).sum::<usize>() <= 6);
        assert_eq!(describe("budget: 1\nentry: success wooden_tool items=- outcome=ok").unwrap(), "infeasible\n");
        assert_eq!(describe("budget: 1\n").unwrap(), "");
    }
}
