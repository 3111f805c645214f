use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{BlockSearchResult, EvalError, QaReport, TechTreeResult};
use crate::datasets::jsonl::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Plotdata,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Plotdata];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Plotdata => "dat",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plotdata" => Ok(ReportFormat::Plotdata),
            other => Err(format!("unknown report format `{other}` (expected csv, json or plotdata)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(untagged)]
pub enum Report<'a> {
    BlockSearch(&'a [BlockSearchResult]),
    TechTree(&'a TechTreeResult),
    Qa(&'a QaReport),
}

fn opt<T: std::fmt::Display>(v: Option<T>, none: &str) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| none.to_string())
}

fn fixed(v: Option<f64>) -> String {
    opt(v.map(|v| format!("{v:.3}")), "")
}

/// Renders a report. Empty results are a precondition error.
pub fn render(report: Report<'_>, format: ReportFormat) -> Result<String, EvalError> {
    let empty = match report {
        Report::BlockSearch(r) => r.is_empty() || r.iter().any(|a| a.seeds.is_empty()),
        Report::TechTree(r) => r.tiers.is_empty(),
        Report::Qa(r) => r.scores.is_empty(),
    };
    if empty {
        return Err(EvalError::Precondition("nothing to report".into()));
    }
    let mut out = String::new();
    match (report, format) {
        (_, ReportFormat::Json) => {
            out = serde_json::to_string_pretty(&report).map_err(|e| EvalError::Precondition(e.to_string()))?;
            out.push('\n');
        }
        (Report::BlockSearch(agents), ReportFormat::Csv) => {
            let [agent] = agents else {
                return Err(EvalError::Precondition("a block-search CSV holds one agent".into()));
            };
            out.push_str("seed,iters_to_10,blocks_in_100\n");
            for s in &agent.seeds {
                let _ = writeln!(out, "{},{},{}", s.seed, opt(s.iterations_to_10, "DNF"), s.blocks_in_100);
            }
        }
        (Report::BlockSearch(agents), ReportFormat::Plotdata) => {
            for agent in agents {
                for s in &agent.seeds {
                    let _ = writeln!(out, "# agent={} seed={}\n# iteration cumulative_blocks", agent.agent, s.seed);
                    for (i, c) in s.curve.iter().enumerate() {
                        let _ = writeln!(out, "{} {c}", i + 1);
                    }
                    out.push_str("\n\n");
                }
            }
        }
        (Report::TechTree(r), ReportFormat::Csv) => {
            out.push_str("tier");
            for i in 1..=r.trials.len() {
                let _ = write!(out, ",trial_{i}");
            }
            out.push_str(",mean,sd,successes,trials\n");
            for t in &r.tiers {
                out.push_str(&t.task);
                for i in &t.iterations {
                    let _ = write!(out, ",{}", opt(*i, "DNF"));
                }
                let _ = writeln!(out, ",{},{},{},{}", fixed(t.mean), fixed(t.sd), t.successes, r.trials.len());
            }
        }
        (Report::TechTree(r), ReportFormat::Plotdata) => {
            out.push_str("# tier_index tier mean sd successes\n");
            for (i, t) in r.tiers.iter().enumerate() {
                let _ = writeln!(out, "{} {} {} {} {}", i + 1, t.task, opt(t.mean, "nan"), opt(t.sd, "nan"), t.successes);
            }
        }
        (Report::Qa(r), ReportFormat::Csv) => {
            out.push_str("category,count,mean\n");
            for c in &r.categories {
                let _ = writeln!(out, "{},{},{}", c.category, c.count, fixed(c.mean));
            }
            let scored = r.categories.iter().map(|c| c.count).sum::<usize>();
            let _ = writeln!(out, "Overall,{scored},{}", fixed(r.overall));
        }
        (Report::Qa(r), ReportFormat::Plotdata) => {
            out.push_str("# category_index category mean\n");
            for (i, c) in r.categories.iter().enumerate() {
                let _ = writeln!(out, "{} {} {}", i + 1, c.category, opt(c.mean, "nan"));
            }
        }
    }
    Ok(out)
}

pub fn emit_report(report: Report<'_>, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    let text = render(report, format)?;
    write_atomic(path, &text).map_err(|e| EvalError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::BlockSearchSeed;

    fn result() -> BlockSearchResult {
        BlockSearchResult {
            agent: "vision".into(),
            config_hash: "abc".into(),
            seeds: vec![
                BlockSearchSeed { seed: 0, iterations_to_10: Some(33), blocks_in_100: 17, curve: vec![0, 2, 3], errors: vec![] },
                BlockSearchSeed { seed: 1, iterations_to_10: None, blocks_in_100: 4, curve: vec![1], errors: vec![] },
            ],
            mean_iterations_to_10: Some(33.0),
            mean_blocks_in_100: Some(10.5),
        }
    }

    #[test]
    fn block_search_csv() {
        let r = [result()];
        let csv = render(Report::BlockSearch(&r), ReportFormat::Csv).unwrap();
        assert_eq!(csv, "seed,iters_to_10,blocks_in_100\n0,33,17\n1,DNF,4\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_report(Report::BlockSearch(&r), ReportFormat::Csv, &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        emit_report(Report::BlockSearch(&r), ReportFormat::Csv, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
        let plot = render(Report::BlockSearch(&r), ReportFormat::Plotdata).unwrap();
        assert!(plot.contains("# agent=vision seed=0\n# iteration cumulative_blocks\n1 0\n2 2\n3 3\n"));
    }

    #[test]
    fn empty_is_precondition() {
        assert!(matches!(render(Report::BlockSearch(&[]), ReportFormat::Json), Err(EvalError::Precondition(_))));
    }
}
