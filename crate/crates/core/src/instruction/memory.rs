use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::InstructionError;
use crate::backends::estimate_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Success,
    Failure,
    Fact,
}

impl EntryKind {
    pub fn name(self) -> &'static str {
        match self {
            EntryKind::Success => "success",
            EntryKind::Failure => "failure",
            EntryKind::Fact => "fact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub id: u32,
    pub kind: EntryKind,
    pub task_id: String,
    pub plan: Vec<String>,
    pub outcome: String,
    /// Key items for a success: the goal item and its count.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub items: BTreeMap<String, u32>,
    pub ticks: (u64, u64),
}

impl MemoryEntry {
    /// The line form the Describer reads.
    pub fn render(&self) -> String {
        let items = if self.items.is_empty() {
            "-".to_string()
        } else {
            self.items.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(",")
        };
        let outcome = self.outcome.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("entry: {} {} items={items} outcome={outcome}", self.kind.name(), self.task_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub text: String,
    pub source_entry_ids: Vec<u32>,
    pub token_estimate: usize,
}

impl Summary {
    pub fn new(text: String, source_entry_ids: Vec<u32>) -> Self {
        let token_estimate = estimate_tokens(&text);
        Summary { text, source_entry_ids, token_estimate }
    }

    /// True if the summary fits `budget` and names every success task.
    pub fn covers(&self, entries: &[MemoryEntry], budget: usize) -> bool {
        let words: Vec<&str> = self.text.split(|c: char| !(c.is_alphanumeric() || c == '_')).collect();
        self.token_estimate <= budget
            && entries.iter().filter(|e| e.kind == EntryKind::Success).all(|e| words.contains(&e.task_id.as_str()))
    }
}

/// Append-only episode memory with an optional active summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    entries: Vec<MemoryEntry>,
    summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryView {
    pub summary: Option<String>,
    pub recent: Vec<String>,
}

impl MemoryView {
    pub fn render(&self) -> String {
        let mut lines = Vec::new();
        if let Some(s) = &self.summary {
            lines.push(format!("summary: {}", s.trim().replace('\n', "; ")));
        }
        lines.extend(self.recent.iter().cloned());
        if lines.is_empty() {
            "(empty)".to_string()
        } else {
            lines.join("\n")
        }
    }
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn summary(&self) -> Option<&Summary> {
        self.summary.as_ref()
    }

    pub fn append(
        &mut self,
        kind: EntryKind,
        task_id: &str,
        plan: Vec<String>,
        outcome: String,
        items: BTreeMap<String, u32>,
        ticks: (u64, u64),
    ) -> u32 {
        let id = self.entries.len() as u32;
        self.entries.push(MemoryEntry { id, kind, task_id: task_id.to_string(), plan, outcome, items, ticks });
        id
    }

    fn unsummarized(&self) -> &[MemoryEntry] {
        let covered = self.summary.as_ref().map(|s| s.source_entry_ids.len()).unwrap_or(0);
        &self.entries[covered..]
    }

    /// Token estimate of what the planner would see without further compaction.
    pub fn token_estimate(&self) -> usize {
        self.summary.as_ref().map(|s| s.token_estimate).unwrap_or(0)
            + self.unsummarized().iter().map(|e| estimate_tokens(&e.render())).sum::<usize>()
    }

    pub fn needs_summary(&self, budget: usize) -> bool {
        self.token_estimate() > 2 * budget
    }

    /// Installs a summary over every entry so far. Raw entries are kept.
    pub fn set_summary(&mut self, summary: Summary) {
        self.summary = Some(summary);
    }

    pub fn view(&self, recent: usize) -> MemoryView {
        let rest = self.unsummarized();
        let skip = rest.len().saturating_sub(recent);
        MemoryView {
            summary: self.summary.as_ref().map(|s| s.text.clone()),
            recent: rest[skip..].iter().map(MemoryEntry::render).collect(),
        }
    }
}

/// Deterministic compaction with the same contract the Describer is held to:
/// success headers always survive, their item lists when they fit, then the
/// most recent failures while room remains.
pub fn compact(entries: &[MemoryEntry], budget: usize) -> Result<Summary, InstructionError> {
    if budget == 0 {
        return Err(InstructionError::BudgetInfeasible { budget, needed: 1 });
    }
    let ids: Vec<u32> = entries.iter().map(|e| e.id).collect();
    if entries.is_empty() {
        return Ok(Summary::new(String::new(), ids));
    }
    let mut successes: Vec<(&str, String)> = Vec::new();
    for e in entries.iter().filter(|e| e.kind == EntryKind::Success) {
        let items = e.items.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ");
        match successes.iter_mut().find(|(t, _)| *t == e.task_id) {
            Some(s) => s.1 = items,
            None => successes.push((&e.task_id, items)),
        }
    }
    let headers: Vec<String> = successes.iter().map(|(t, _)| format!("done {t}")).collect();
    let full: Vec<String> = successes
        .iter()
        .map(|(t, i)| if i.is_empty() { format!("done {t}") } else { format!("done {t}: {i}") })
        .collect();
    let cost = |lines: &[String]| lines.iter().map(|l| estimate_tokens(l)).sum::<usize>();
    let needed = cost(&headers);
    if needed > budget {
        return Err(InstructionError::BudgetInfeasible { budget, needed });
    }
    let mut lines = if cost(&full) <= budget { full } else { headers };
    let mut used = cost(&lines);
    for e in entries.iter().rev().filter(|e| e.kind == EntryKind::Failure) {
        let reason: Vec<&str> = e.outcome.split_whitespace().take(8).collect();
        let line = format!("failed {}: {}", e.task_id, reason.join(" "));
        let c = estimate_tokens(&line);
        if used + c > budget {
            break;
        }
        used += c;
        lines.push(line);
    }
    Ok(Summary::new(lines.join("\n"), ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(store: &mut MemoryStore, n: usize) {
        for i in 0..n {
            if i % 5 == 0 {
                store.append(
                    EntryKind::Success,
                    &format!("task_{i}"),
                    vec!["craft plank".into()],
                    "done".into(),
                    BTreeMap::from([("plank".to_string(), 4)]),
                    (i as u64, i as u64 + 1),
                );
            } else {
                store.append(
                    EntryKind::Failure,
                    &format!("task_{i}"),
                    vec![],
                    "step mine diamond failed with InsufficientTier: needs tier 3".into(),
                    BTreeMap::new(),
                    (i as u64, i as u64 + 1),
                );
            }
        }
    }

    #[test]
    fn compaction_contract() {
        let mut store = MemoryStore::new();
        fill(&mut store, 50);
        assert!(store.needs_summary(100));
        let s = compact(store.entries(), 100).unwrap();
        assert!(s.token_estimate <= 100);
        assert!(s.covers(store.entries(), 100));
        store.set_summary(s);
        assert_eq!(store.len(), 50);
        assert!(store.token_estimate() <= 100);
        assert!(compact(store.entries(), 1).is_err());
        assert_eq!(compact(&[], 10).unwrap().token_estimate, 0);
    }

    #[test]
    fn view_shows_recent_after_summary() {
        let mut store = MemoryStore::new();
        fill(&mut store, 3);
        let v = store.view(2);
        assert_eq!(v.recent.len(), 2);
        assert!(v.recent[1].starts_with("entry: failure task_2 items=- outcome=step mine"));
        store.set_summary(compact(store.entries(), 50).unwrap());
        fill(&mut store, 1);
        let v = store.view(5);
        assert_eq!(v.recent.len(), 1);
        assert!(v.render().starts_with("summary: done task_0"));
    }
}
