use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::instruction::{run_episode, AgentConfig, EpisodeSpec, Runtime};
use crate::world::{PrimitiveAction, Scenario};

fn qa_strategy() -> impl Strategy<Value = QAPair> {
    (
        "[a-zA-Z ?]{1,30}",
        "[ -~]{0,20}",
        "[a-zA-Z0-9 .,\"\\\\]{1,40}",
        proptest::sample::select(QaCategory::ALL.to_vec()),
    )
        .prop_filter("nonblank", |(i, _, o, _)| !i.trim().is_empty() && !o.trim().is_empty())
        .prop_map(|(instruction, input, output, category)| QAPair { instruction, input, output, category })
}

proptest! {
    #[test]
    fn qa_roundtrip(pairs in proptest::collection::vec(qa_strategy(), 0..12)) {
        let text = to_jsonl(&pairs).unwrap();
        let back: Vec<QAPair> = from_jsonl(&text).unwrap();
        prop_assert_eq!(&back, &pairs);
        prop_assert_eq!(to_jsonl(&back).unwrap(), text);
    }
}

#[test]
fn fixture_is_valid() {
    let report = validate_text(QA_FIXTURE_JSONL, PackKind::Qa);
    assert!(report.ok(), "{:?}", report.errors);
    assert_eq!(report.valid, 50);
    let pairs: Vec<QAPair> = from_jsonl(QA_FIXTURE_JSONL).unwrap();
    for c in QaCategory::ALL {
        assert!(pairs.iter().any(|p| p.category == c), "{c} missing");
    }
}

#[test]
fn validation_aggregates() {
    let text = "{\"format\":\"deskcraft\",\"kind\":\"qa\",\"version\":1}\n\
        {\"instruction\":\"a\",\"output\":\"b\",\"category\":\"Miscellaneous\"}\n\
        {\"instruction\":\"a\",\"output\":\"b\",\"category\":\"Cooking\"}\n\
        not json\n\
        {\"instruction\":\" \",\"output\":\"b\",\"category\":\"Miscellaneous\"}\n";
    let r = validate_text(text, PackKind::Qa);
    assert_eq!(r.valid, 1);
    assert_eq!(r.errors.iter().map(|v| v.line).collect::<Vec<_>>(), [3, 4, 5]);
    assert_eq!(r.errors[2].field, "instruction");
    let wrong = validate_text(text, PackKind::Episode);
    assert_eq!((wrong.valid, wrong.errors.len()), (0, 1));
    assert!("nope".parse::<PackKind>().is_err());
    let missing = validate_pack(std::path::Path::new("/nonexistent/pack.jsonl"), PackKind::Qa);
    assert!(matches!(missing, Err(DatasetError::Io(_))));
}

fn episode() -> EpisodeRecord {
    let rt = Runtime::local().unwrap();
    let scenario = Scenario::TechTreePlains;
    let spec = EpisodeSpec {
        scenario,
        dims: scenario.default_dims(),
        seed: 1,
        target: EpisodeTarget::Task("wooden_tool".into()),
        cap: 160,
    };
    run_episode(&rt, &AgentConfig::default(), &spec).unwrap()
}

fn verdict(rec: &EpisodeRecord) -> ReplayVerdict {
    let rt = Runtime::local().unwrap();
    replay(&rt.rules, &rt.tasks, rec).unwrap()
}

#[test]
fn episode_roundtrip_and_replay() {
    let rec = episode();
    assert!(rec.outcome.success);
    let text = to_jsonl(std::slice::from_ref(&rec)).unwrap();
    let back: Vec<EpisodeRecord> = from_jsonl(&text).unwrap();
    assert_eq!(back[0], rec);
    assert_eq!(to_jsonl(&back).unwrap(), text);
    assert_eq!(verdict(&rec), ReplayVerdict::Consistent);
}

/// Positions of applied actions as (frame, index, tick).
fn applied(rec: &EpisodeRecord) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for (f, frame) in rec.frames.iter().enumerate() {
        for (i, s) in frame.actions.iter().enumerate() {
            if s.action.is_some() {
                out.push((f, i, s.result.tick));
            }
        }
    }
    out
}

#[test]
fn removed_action_diverges_at_its_tick() {
    let rec = episode();
    let all = applied(&rec);
    assert!(all.len() > 3);
    for &(f, i, tick) in all.iter().step_by(3).chain(all.last()) {
        let mut bad = rec.clone();
        bad.frames[f].actions.remove(i);
        match verdict(&bad) {
            ReplayVerdict::Divergent { tick: t, .. } => assert_eq!(t, tick, "removed action at frame {f} index {i}"),
            ReplayVerdict::Consistent => panic!("removal at frame {f} index {i} went unnoticed"),
        }
    }
}

#[test]
fn altered_action_diverges() {
    let rec = episode();
    for (f, i, tick) in applied(&rec) {
        let mut bad = rec.clone();
        let step = &mut bad.frames[f].actions[i];
        step.action = Some(match step.action.take().unwrap() {
            PrimitiveAction::Turn { yaw, pitch } => PrimitiveAction::Turn { yaw: yaw + 45.0, pitch },
            PrimitiveAction::Craft { .. } => PrimitiveAction::Craft { item: "diamond_pickaxe".into() },
            _ => PrimitiveAction::Craft { item: "torch".into() },
        });
        assert!(
            matches!(verdict(&bad), ReplayVerdict::Divergent { tick: t, .. } if t == tick),
            "alteration at frame {f} index {i} not caught at tick {tick}"
        );
    }
}

#[test]
fn tampered_outcome_diverges() {
    let rec = episode();
    let mut bad = rec.clone();
    bad.outcome.items = BTreeMap::from([("diamond".to_string(), 1)]);
    assert!(matches!(verdict(&bad), ReplayVerdict::Divergent { .. }));
    let mut bad = rec.clone();
    bad.outcome.completed[0].iteration = 0;
    assert!(matches!(verdict(&bad), ReplayVerdict::Divergent { .. }));
    let mut bad = rec;
    bad.frames[0].visible.pop();
    assert!(matches!(verdict(&bad), ReplayVerdict::Divergent { tick: 0, .. }));
}

