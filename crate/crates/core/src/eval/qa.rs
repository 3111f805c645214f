use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::backends::{ChatBackend, ChatMessage, ChatRequest, Speaker};
use crate::datasets::{QAPair, QaCategory};

pub const JUDGE_ROLE: &str = "judge";

const JUDGE_SYSTEM: &str = "You grade answers to questions about a block-building survival game. \
Compare the answer with the reference and reply with one line `score: N`, N between 0 and 10.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAScore {
    pub question_id: usize,
    pub category: QaCategory,
    /// Judge backend id to score.
    pub raters: BTreeMap<String, f64>,
}

impl QAScore {
    pub fn mean(&self) -> Option<f64> {
        super::stats::mean(&self.raters.values().copied().collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemError {
    pub question_id: usize,
    pub rater: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMean {
    pub category: QaCategory,
    pub count: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub scores: Vec<QAScore>,
    pub categories: Vec<CategoryMean>,
    /// Mean over scored items, so categories weigh by their size.
    pub overall: Option<f64>,
    pub errors: Vec<ItemError>,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn judge_prompt(pair: &QAPair, answer: &str) -> String {
    let question = if pair.input.trim().is_empty() {
        one_line(&pair.instruction)
    } else {
        format!("{} {}", one_line(&pair.instruction), one_line(&pair.input))
    };
    format!("question: {question}\nreference: {}\nanswer: {}", one_line(&pair.output), one_line(answer))
}

/// Reads `score: N` and rejects anything outside [0, 10].
pub fn parse_score(reply: &str) -> Result<f64, EvalError> {
    let raw = reply
        .lines()
        .find_map(|l| l.trim().strip_prefix("score:"))
        .ok_or_else(|| EvalError::MalformedScore(format!("no `score:` line in {:?}", reply.trim())))?
        .trim();
    let v: f64 = raw.parse().map_err(|_| EvalError::MalformedScore(format!("`{raw}` is not a number")))?;
    if !(0.0..=10.0).contains(&v) {
        return Err(EvalError::MalformedScore(format!("{v} is outside [0, 10]")));
    }
    Ok(v)
}

/// Scores `answers[i]` against `pairs[i]` with every judge. Judge failures
/// and malformed scores are recorded per item.
pub fn score_qa(pairs: &[QAPair], answers: &[String], judges: &[&dyn ChatBackend]) -> Result<QaReport, EvalError> {
    if pairs.len() != answers.len() {
        return Err(EvalError::LengthMismatch { x: pairs.len(), y: answers.len() });
    }
    if judges.is_empty() {
        return Err(EvalError::Precondition("no judge backend".into()));
    }
    let mut scores = Vec::new();
    let mut errors = Vec::new();
    for (i, (pair, answer)) in pairs.iter().zip(answers).enumerate() {
        let mut raters = BTreeMap::new();
        for judge in judges {
            let request = ChatRequest {
                role_id: JUDGE_ROLE.into(),
                messages: vec![
                    ChatMessage { speaker: Speaker::System, text: JUDGE_SYSTEM.into() },
                    ChatMessage { speaker: Speaker::User, text: judge_prompt(pair, answer) },
                ],
                temperature: 0.0,
                seed: Some(i as u64),
            };
            let scored = judge.complete(&request).map_err(EvalError::from).and_then(|r| parse_score(&r));
            match scored {
                Ok(v) => {
                    raters.insert(judge.id(), v);
                }
                Err(e) => errors.push(ItemError { question_id: i, rater: judge.id(), message: e.to_string() }),
            }
        }
        scores.push(QAScore { question_id: i, category: pair.category, raters });
    }
    let categories = QaCategory::ALL
        .iter()
        .map(|&c| {
            let vals: Vec<f64> = scores.iter().filter(|s| s.category == c).filter_map(QAScore::mean).collect();
            CategoryMean { category: c, count: vals.len(), mean: super::stats::mean(&vals) }
        })
        .collect();
    let all: Vec<f64> = scores.iter().filter_map(QAScore::mean).collect();
    Ok(QaReport { overall: super::stats::mean(&all), scores, categories, errors })
}

/// Overall mean from per-category means weighted by item counts.
pub fn weighted_overall(means: &[f64], counts: &[usize]) -> Result<f64, EvalError> {
    if means.len() != counts.len() {
        return Err(EvalError::LengthMismatch { x: means.len(), y: counts.len() });
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(EvalError::Precondition("no items".into()));
    }
    Ok(means.iter().zip(counts).map(|(m, &c)| m * c as f64).sum::<f64>() / n as f64)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backends::{BackendError, ScriptedBackend};
    use crate::datasets::{from_jsonl, QA_FIXTURE_JSONL};
    use crate::world::WorldRules;

    struct Fixed(&'static str);
    impl ChatBackend for Fixed {
        fn id(&self) -> String {
            format!("fixed:{}", self.0)
        }
        fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
            Ok(self.0.to_string())
        }
    }

    fn scripted() -> ScriptedBackend {
        ScriptedBackend::new(Arc::new(WorldRules::shipped()))
    }

    #[test]
    fn scripted_judge_examples() {
        let pairs: Vec<QAPair> = from_jsonl(QA_FIXTURE_JSONL).unwrap();
        let mut answers: Vec<String> = pairs.iter().map(|p| p.output.clone()).collect();
        answers[1] = String::new();
        let judge = scripted();
        let report = score_qa(&pairs, &answers, &[&judge]).unwrap();
        assert!(report.errors.is_empty());
        assert_eq!(report.scores[0].raters["scripted"], 10.0);
        assert_eq!(report.scores[1].raters["scripted"], 0.0);
        let expected = (10.0 * 49.0) / 50.0;
        assert!((report.overall.unwrap() - expected).abs() < 1e-12);
        assert_eq!(report.categories.iter().map(|c| c.count).sum::<usize>(), 50);
    }

    #[test]
    fn out_of_range_scores_are_rejected_per_item() {
        let pairs: Vec<QAPair> = from_jsonl(QA_FIXTURE_JSONL).unwrap();
        let answers: Vec<String> = pairs.iter().map(|p| p.output.clone()).collect();
        let eleven = Fixed("score: 11");
        let report = score_qa(&pairs[..2], &answers[..2], &[&eleven]).unwrap();
        assert_eq!(report.errors.len(), 2);
        assert!(report.errors[0].message.contains("MalformedScore") || report.errors[0].message.contains("outside"));
        assert_eq!(report.overall, None);
        assert!(matches!(parse_score("score: nan"), Err(EvalError::MalformedScore(_))));
        assert!(matches!(parse_score("great answer"), Err(EvalError::MalformedScore(_))));
        assert_eq!(parse_score("score: 7.5\n").unwrap(), 7.5);
    }

    #[test]
    fn weighted_means_match_table_overall() {
        let counts = [332, 152, 108, 219, 169, 20];
        let small = weighted_overall(&[6.44, 6.68, 6.58, 6.42, 6.80, 6.96], &counts).unwrap();
        let large = weighted_overall(&[8.14, 8.13, 8.03, 8.15, 8.12, 7.72], &counts).unwrap();
        assert!((small - 6.558).abs() < 5e-4, "{small}");
        assert!((large - 8.117).abs() < 5e-4, "{large}");
    }
}
