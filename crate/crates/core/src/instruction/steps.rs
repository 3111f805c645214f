//! Step grammar: `<verb> [<count>] <object>` over a closed verb set, plus a
//! tolerant extractor that pulls such steps out of free prose.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::InstructionError;
use crate::world::WorldRules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Collect,
    Mine,
    Craft,
    Smelt,
    Place,
    Equip,
    Explore,
    Locate,
}

impl Verb {
    pub const ALL: [Verb; 8] =
        [Verb::Collect, Verb::Mine, Verb::Craft, Verb::Smelt, Verb::Place, Verb::Equip, Verb::Explore, Verb::Locate];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Collect => "collect",
            Verb::Mine => "mine",
            Verb::Craft => "craft",
            Verb::Smelt => "smelt",
            Verb::Place => "place",
            Verb::Equip => "equip",
            Verb::Explore => "explore",
            Verb::Locate => "locate",
        }
    }

    fn strict(word: &str) -> Option<Verb> {
        Verb::ALL.into_iter().find(|v| v.name() == word)
    }

    /// Verb words accepted in prose.
    fn loose(word: &str) -> Option<Verb> {
        Verb::strict(word).or(match word {
            "gather" | "chop" | "get" | "obtain" | "harvest" | "pick" | "punch" => Some(Verb::Collect),
            "dig" | "quarry" => Some(Verb::Mine),
            "make" | "build" | "create" => Some(Verb::Craft),
            "cook" | "refine" => Some(Verb::Smelt),
            "put" | "set" => Some(Verb::Place),
            "wield" | "hold" => Some(Verb::Equip),
            "wander" | "roam" => Some(Verb::Explore),
            "find" | "search" | "seek" => Some(Verb::Locate),
            _ => None,
        })
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verb {
    type Err = InstructionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::strict(s).ok_or_else(|| InstructionError::ParseFailure(format!("unknown verb `{s}`")))
    }
}

/// Object used when `explore` is given without one.
pub const EXPLORE_OBJECT: &str = "area";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStep {
    pub verb: Verb,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<u32>,
    pub raw_text: String,
}

impl ActionStep {
    /// Canonical text, e.g. `craft 12 plank`.
    pub fn canonical(&self) -> String {
        match self.quantity {
            Some(n) => format!("{} {n} {}", self.verb, self.object),
            None => format!("{} {}", self.verb, self.object),
        }
    }

    /// Retrieval query text: verb and object words, no count.
    pub fn query_text(&self) -> String {
        format!("{} {}", self.verb, self.object.replace('_', " "))
    }
}

impl fmt::Display for ActionStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw_text)
    }
}

const FILLER: [&str; 12] = ["a", "an", "the", "some", "more", "of", "few", "several", "enough", "new", "piece", "pieces"];

fn number_word(w: &str) -> Option<u32> {
    const WORDS: [&str; 13] =
        ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve"];
    w.parse().ok().or_else(|| WORDS.iter().position(|&x| x == w).map(|i| i as u32))
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

/// Maps one word or an underscore-joined phrase onto a known item id.
pub fn resolve_object(rules: &WorldRules, phrase: &str) -> Option<String> {
    let known = |s: &str| (rules.is_known_item(s) && s != "air").then(|| s.to_string());
    if let Some(a) = rules.alias(phrase) {
        return Some(a.to_string());
    }
    if let Some(k) = known(phrase) {
        return Some(k);
    }
    for suffix in ["es", "s"] {
        if let Some(stem) = phrase.strip_suffix(suffix) {
            if let Some(k) = rules.alias(stem).map(str::to_string).or_else(|| known(stem)) {
                return Some(k);
            }
        }
    }
    None
}

/// Longest phrase of up to three words starting at `words[0]` that names a
/// known item. Returns the item and the number of words consumed.
fn longest_object(rules: &WorldRules, words: &[String]) -> Option<(String, usize)> {
    (1..=words.len().min(3)).rev().find_map(|n| resolve_object(rules, &words[..n].join("_")).map(|o| (o, n)))
}

fn build(verb: Verb, quantity: Option<u32>, object: String) -> ActionStep {
    let mut step = ActionStep { verb, object, quantity, raw_text: String::new() };
    step.raw_text = step.canonical();
    step
}

/// Strict grammar. The object must use every remaining word.
pub fn parse_step(rules: &WorldRules, text: &str) -> Result<ActionStep, InstructionError> {
    let fail = |why: &str| InstructionError::ParseFailure(format!("`{}`: {why}", text.trim()));
    let w = words(text);
    let (verb_word, rest) = w.split_first().ok_or_else(|| fail("empty step"))?;
    let verb = Verb::strict(verb_word).ok_or_else(|| fail("unknown verb"))?;
    let (quantity, rest) = match rest.first().and_then(|r| r.parse::<u32>().ok()) {
        Some(n) if n > 0 => (Some(n), &rest[1..]),
        Some(_) => return Err(fail("count must be positive")),
        None => (None, rest),
    };
    if rest.is_empty() {
        return if verb == Verb::Explore && quantity.is_none() {
            Ok(build(verb, None, EXPLORE_OBJECT.into()))
        } else {
            Err(fail("missing object"))
        };
    }
    if verb == Verb::Explore && rest.len() == 1 && rest[0] == EXPLORE_OBJECT {
        return Ok(build(verb, quantity, EXPLORE_OBJECT.into()));
    }
    let object = resolve_object(rules, &rest.join("_")).ok_or_else(|| fail("unknown object"))?;
    Ok(build(verb, quantity, object))
}

/// Finds grammar-shaped steps inside prose: each clause contributes at most
/// one step, led by a verb or verb synonym and followed by a known object.
pub fn extract_steps(rules: &WorldRules, prose: &str) -> Vec<ActionStep> {
    let mut out = Vec::new();
    let clauses = prose.split(['.', ',', ';', '\n', '!', '?', ':']);
    for clause in clauses {
        let w = words(clause);
        let mut i = 0;
        while i < w.len() {
            let Some(verb) = Verb::loose(&w[i]) else {
                i += 1;
                continue;
            };
            let mut j = i + 1;
            let mut quantity = None;
            while j < w.len() {
                if let Some(n) = number_word(&w[j]).filter(|&n| n > 0) {
                    quantity = Some(n);
                } else if !FILLER.contains(&w[j].as_str()) {
                    break;
                }
                j += 1;
            }
            match longest_object(rules, &w[j..]) {
                Some((object, used)) => {
                    out.push(build(verb, quantity, object));
                    i = j + used;
                }
                None if verb == Verb::Explore => {
                    out.push(build(verb, None, EXPLORE_OBJECT.into()));
                    i = j;
                }
                None => i += 1,
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_grammar() {
        let rules = WorldRules::shipped();
        let s = parse_step(&rules, "collect 3 logs").unwrap();
        assert_eq!((s.verb, s.object.as_str(), s.quantity), (Verb::Collect, "log", Some(3)));
        assert_eq!(s.raw_text, "collect 3 log");
        let s = parse_step(&rules, "craft planks").unwrap();
        assert_eq!((s.verb, s.object.as_str(), s.quantity), (Verb::Craft, "plank", None));
        let s = parse_step(&rules, "craft crafting_table").unwrap();
        assert_eq!(s.object, "crafting_table");
        assert_eq!(s.query_text(), "craft crafting table");
        let s = parse_step(&rules, "craft wooden pickaxe").unwrap();
        assert_eq!(s.object, "wooden_pickaxe");
        assert_eq!(parse_step(&rules, "explore").unwrap().object, "area");
        assert_eq!(parse_step(&rules, "locate diamond_ore").unwrap().object, "diamond_ore");
        for bad in ["", "fly 3 log", "craft", "craft 0 plank", "craft unicorn", "collect 3 log please"] {
            assert!(matches!(parse_step(&rules, bad), Err(InstructionError::ParseFailure(_))), "{bad}");
        }
    }

    #[test]
    fn prose_extraction() {
        let rules = WorldRules::shipped();
        let prose = "First I will build a shelter. To do that, collect wood, then craft planks and make a crafting table.";
        let got: Vec<String> = extract_steps(&rules, prose).iter().map(|s| s.raw_text.clone()).collect();
        assert_eq!(got, ["collect log", "craft plank", "craft crafting_table"]);
        let got = extract_steps(&rules, "Gather three apples, then find some diamonds");
        assert_eq!(got[0].canonical(), "collect 3 apple");
        assert_eq!(got[1].canonical(), "locate diamond");
        assert!(extract_steps(&rules, "nothing to see here").is_empty());
    }
}
