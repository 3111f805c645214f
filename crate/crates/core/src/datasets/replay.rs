use std::collections::BTreeSet;

use serde::Serialize;

use super::{EpisodeRecord, EpisodeTarget};
use crate::instruction::{locate_block, snapshot};
use crate::perception::observe;
use crate::world::{
    advance_clock, apply_action, check_task, generate_world, AgentState, FoundSet, TaskRegistry, WorldError,
    WorldRules, WorldState,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReplayVerdict {
    Consistent,
    Divergent { tick: u64, reason: String },
}

struct State {
    world: WorldState,
    agent: AgentState,
    found: FoundSet,
}

/// Regenerates the world from the header, re-applies every recorded action
/// and checks results, observations, completions and the outcome.
pub fn replay(rules: &WorldRules, tasks: &TaskRegistry, record: &EpisodeRecord) -> Result<ReplayVerdict, WorldError> {
    let h = &record.header;
    let world = generate_world(rules, h.seed, h.scenario, h.dims)?;
    let agent = AgentState::spawn(&world);
    let mut st = State { world, agent, found: FoundSet::default() };
    let diverge = |tick: u64, reason: String| Ok(ReplayVerdict::Divergent { tick, reason });
    let perception = &h.perception;

    let completed_by = |iteration: u32| -> Vec<&str> {
        record.outcome.completed.iter().filter(|c| c.iteration == iteration).map(|c| c.task.as_str()).collect()
    };
    let check_completions = |st: &State, iteration: u32| -> Result<(), String> {
        for id in completed_by(iteration) {
            let task = tasks.get(id).map_err(|e| e.to_string())?;
            if !check_task(rules, &st.agent, &st.found, task) {
                return Err(format!("task {id} recorded complete at iteration {iteration} but its goal does not hold"));
            }
        }
        Ok(())
    };
    if st.world.tick != h.start_tick {
        return diverge(st.world.tick, "start tick differs".into());
    }
    if let Err(reason) = check_completions(&st, 0) {
        return diverge(st.world.tick, reason);
    }

    // Tick of the replayed end-of-frame clock advance; a frame that starts at
    // the wrong tick is blamed on it.
    let mut closed_at = st.world.tick;
    for frame in &record.frames {
        if st.world.tick != frame.tick {
            return diverge(closed_at, format!("frame {} recorded at tick {}", frame.iteration, frame.tick));
        }
        let Ok(task) = tasks.get(&frame.task) else {
            return diverge(frame.tick, format!("unknown task `{}`", frame.task));
        };
        if record.outcome.completed.iter().any(|c| c.task == frame.task && c.iteration < frame.iteration) {
            return diverge(frame.tick, format!("frame {} pursues completed task {}", frame.iteration, frame.task));
        }
        let visible = observe(rules, &st.world, &st.agent, perception);
        if snapshot(rules, &visible) != frame.visible {
            return diverge(frame.tick, format!("visible set differs in frame {}", frame.iteration));
        }
        let target = locate_block(rules, task);
        if let Some(b) = target {
            st.found.record(&visible, b);
        }
        for step in &frame.actions {
            match &step.action {
                Some(action) => {
                    let tick = st.world.tick;
                    let result = apply_action(rules, &mut st.world, &mut st.agent, action);
                    if result != step.result {
                        return diverge(tick, format!("`{action}` gave {:?}, record has {:?}", result.message, step.result.message));
                    }
                    if let Some(b) = target {
                        st.found.record(&observe(rules, &st.world, &st.agent, perception), b);
                    }
                }
                None if step.result.tick != st.world.tick => {
                    return diverge(st.world.tick, format!("check recorded at tick {}", step.result.tick));
                }
                None => {}
            }
        }
        let found = target.map(|b| st.found.count(b)).unwrap_or(0) as u32;
        if found != frame.found {
            return diverge(st.world.tick, format!("frame {} records {} found, replay has {found}", frame.iteration, frame.found));
        }
        closed_at = st.world.tick;
        advance_clock(rules, &mut st.world, &mut st.agent);
        if let Err(reason) = check_completions(&st, frame.iteration) {
            return diverge(closed_at, reason);
        }
    }

    let end = st.world.tick;
    let o = &record.outcome;
    if h.end_tick != end {
        return diverge(closed_at, format!("end tick {} recorded, {end} replayed", h.end_tick));
    }
    if o.iterations as usize != record.frames.len() {
        return diverge(end, "iteration count differs from frame count".into());
    }
    if o.items != st.agent.inventory {
        return diverge(end, "final inventory differs".into());
    }
    let done: BTreeSet<&str> = o.completed.iter().map(|c| c.task.as_str()).collect();
    let success = o.error.is_none()
        && match &h.target {
            EpisodeTarget::Task(id) => done.contains(id.as_str()),
            EpisodeTarget::Curriculum(id) => match tasks.curriculum(id) {
                Some(c) => c.tasks.iter().all(|t| done.contains(t.as_str())),
                None => return diverge(end, format!("unknown curriculum `{id}`")),
            },
        };
    if success != o.success {
        return diverge(end, format!("outcome says success={}, replay says {success}", o.success));
    }
    let found = match &h.target {
        EpisodeTarget::Task(id) => tasks
            .get(id)
            .ok()
            .and_then(|t| locate_block(rules, t))
            .map(|b| st.found.count(b))
            .unwrap_or(0) as u32,
        EpisodeTarget::Curriculum(_) => 0,
    };
    if found != o.found {
        return diverge(end, format!("found count {} recorded, {found} replayed", o.found));
    }
    Ok(ReplayVerdict::Consistent)
}
