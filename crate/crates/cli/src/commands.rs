use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use deskcraft::datasets::jsonl::write_atomic;
use deskcraft::datasets::{
    read_records, replay, scan, to_jsonl, validate_pack, EpisodeRecord, EpisodeTarget, PackKind, QAPair, Record,
    ReplayVerdict, ValidationReport,
};
use deskcraft::eval::{
    emit_report, run_block_search, run_tech_tree, score_qa, Report, ReportFormat, BLOCK_SEARCH_CAP, TECH_TREE_CAP,
};
use deskcraft::instruction::{locate_block, run_episode, EpisodeSpec};
use deskcraft::perception::PerceptionMode;
use deskcraft::skills::{encode_query, SkillCodeEntry, SkillDatabase};
use deskcraft::world::Scenario;

use crate::config::RunConfig;
use crate::{Cli, CliError, Command, Global};

#[derive(Debug, Args)]
pub struct EpisodeArgs {
    /// Task to pursue.
    #[arg(long, conflicts_with = "curriculum")]
    pub task: Option<String>,
    /// Curriculum to work through instead of a single task.
    #[arg(long)]
    pub curriculum: Option<String>,
    /// World to generate; defaults to flat_search for locate tasks, else tech_tree_plains.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Planner iteration cap.
    #[arg(long)]
    pub cap: Option<u32>,
    #[arg(long)]
    pub perception: Option<PerceptionMode>,
    /// Record file; defaults to <out>/episode.jsonl.
    #[arg(long, value_name = "PATH")]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AgentChoice {
    Vision,
    Proximity,
    Both,
}

#[derive(Debug, Args)]
pub struct BlockSearchArgs {
    /// Comma-separated world seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Perception of the agent(s) to run.
    #[arg(long, value_enum, default_value = "both")]
    pub perception: AgentChoice,
    /// Also write every episode record.
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Args)]
pub struct TechTreeArgs {
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long)]
    pub cap: Option<u32>,
    /// Also write every episode record.
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Subcommand)]
pub enum SkillsCommand {
    /// Print id, category and description of every skill.
    List,
    /// Rank skills against a query.
    Query {
        text: String,
        #[arg(short, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Check a skill pack line by line.
    Validate { path: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Report every schema violation in a pack.
    Validate {
        #[arg(long)]
        kind: PackKind,
        path: PathBuf,
    },
    /// Read and rewrite a pack, checking the bytes survive.
    Roundtrip {
        #[arg(long)]
        kind: PackKind,
        path: PathBuf,
        /// Write the rewritten pack here.
        #[arg(long, value_name = "PATH")]
        write: Option<PathBuf>,
    },
    /// Re-run every episode record against a regenerated world.
    Replay { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct QaArgs {
    /// Ground-truth QA pack.
    #[arg(long)]
    pub truth: PathBuf,
    /// QA pack of answers, same questions in the same order.
    #[arg(long)]
    pub answers: PathBuf,
}

fn effective(g: &Global) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::load(g.config.as_deref())?;
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(j) = g.jobs {
        c.jobs = j;
    }
    if let Some(b) = &g.backend {
        c.backend = b.clone();
    }
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    c.validate()?;
    Ok(c)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    write_atomic(path, text).map_err(|e| CliError::io(e.to_string()))
}

fn records_text(records: &[EpisodeRecord]) -> Result<String, CliError> {
    to_jsonl(records).map_err(|e| CliError::failure(e.to_string()))
}

fn report(report: Report<'_>, format: ReportFormat, path: &Path) -> Result<(), CliError> {
    write(path, "")?;
    emit_report(report, format, path).map_err(|e| CliError::io(e.to_string()))
}

fn write_config(c: &RunConfig) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "config_hash": c.hash(), "config": c }))
        .expect("config serializes");
    text.push('\n');
    write(&c.out.join("config.json"), &text)
}

pub fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Episode(a) => episode(&effective(&cli.global)?, a),
        Command::BlockSearch(a) => block_search(&effective(&cli.global)?, a),
        Command::TechTree(a) => tech_tree(&effective(&cli.global)?, a),
        Command::Skills(a) => skills(&effective(&cli.global)?, a),
        Command::Dataset(a) => dataset(&effective(&cli.global)?, a),
        Command::Qa(a) => qa(&effective(&cli.global)?, a),
    }
}

fn episode(c: &RunConfig, a: EpisodeArgs) -> Result<u8, CliError> {
    let rt = c.runtime()?;
    let target = match (a.task, a.curriculum) {
        (_, Some(id)) => EpisodeTarget::Curriculum(id),
        (Some(id), None) => EpisodeTarget::Task(id),
        (None, None) => EpisodeTarget::Task("wooden_tool".into()),
    };
    let scenario = a.scenario.unwrap_or(match &target {
        EpisodeTarget::Task(id) => {
            let task = rt.tasks.get(id).map_err(|e| CliError::usage(e.to_string()))?;
            if locate_block(&rt.rules, task).is_some() {
                Scenario::FlatSearch
            } else {
                Scenario::TechTreePlains
            }
        }
        EpisodeTarget::Curriculum(_) => Scenario::TechTreePlains,
    });
    let mut agent = c.agent();
    if let Some(m) = a.perception {
        agent.perception.mode = m;
    }
    let spec = EpisodeSpec {
        scenario,
        dims: c.dims.unwrap_or(scenario.default_dims()),
        seed: c.seed,
        target,
        cap: a.cap.or(c.cap).unwrap_or(TECH_TREE_CAP),
    };
    let mut rec = run_episode(&rt, &agent, &spec).map_err(|e| CliError::usage(e.to_string()))?;
    rec.header.run_config_hash = c.hash();
    let path = a.record.unwrap_or_else(|| c.out.join("episode.jsonl"));
    write(&path, &records_text(std::slice::from_ref(&rec))?)?;
    let o = &rec.outcome;
    println!(
        "{} seed={} success={} iterations={} found={} record={}",
        spec.target,
        spec.seed,
        o.success,
        o.iterations,
        o.found,
        path.display()
    );
    for done in &o.completed {
        println!("  completed {} at iteration {}", done.task, done.iteration);
    }
    if let Some(e) = &o.error {
        println!("  error: {e}");
    }
    Ok(if o.success { 0 } else { 1 })
}

fn block_search(c: &RunConfig, a: BlockSearchArgs) -> Result<u8, CliError> {
    let rt = c.runtime()?;
    let seeds = a.seeds.unwrap_or_else(|| c.seeds.clone());
    let modes: &[PerceptionMode] = match a.perception {
        AgentChoice::Vision => &[PerceptionMode::Vision],
        AgentChoice::Proximity => &[PerceptionMode::Proximity],
        AgentChoice::Both => &[PerceptionMode::Vision, PerceptionMode::Proximity],
    };
    let mut results = Vec::new();
    let mut all_records = Vec::new();
    for &mode in modes {
        let mut agent = c.agent();
        agent.perception.mode = mode;
        let (r, recs) = run_block_search(&rt, &agent, &mode.to_string(), &seeds, c.dims, c.jobs)
            .map_err(|e| CliError::usage(e.to_string()))?;
        results.push(r);
        all_records.extend(recs);
    }
    for r in &results {
        report(Report::BlockSearch(std::slice::from_ref(r)), ReportFormat::Csv, &c.out.join(format!("block_search.{}.csv", r.agent)))?;
    }
    report(Report::BlockSearch(&results), ReportFormat::Json, &c.out.join("block_search.json"))?;
    report(Report::BlockSearch(&results), ReportFormat::Plotdata, &c.out.join("block_search.dat"))?;
    if a.records {
        for r in all_records.iter_mut() {
            r.header.run_config_hash = c.hash();
        }
        write(&c.out.join("block_search.records.jsonl"), &records_text(&all_records)?)?;
    }
    write_config(c)?;
    let mut clean = true;
    println!("agent      seed  iters_to_10  blocks_in_{BLOCK_SEARCH_CAP}");
    for r in &results {
        for s in &r.seeds {
            clean &= s.errors.is_empty();
            let iters = s.iterations_to_10.map(|i| i.to_string()).unwrap_or_else(|| "DNF".into());
            println!("{:<10} {:>4}  {:>11}  {:>13}", r.agent, s.seed, iters, s.blocks_in_100);
            for e in &s.errors {
                println!("  error: {e}");
            }
        }
    }
    println!("reports written to {}", c.out.display());
    Ok(if clean { 0 } else { 1 })
}

fn tech_tree(c: &RunConfig, a: TechTreeArgs) -> Result<u8, CliError> {
    let rt = c.runtime()?;
    let trials = a.trials.unwrap_or(c.trials);
    let cap = a.cap.or(c.cap).unwrap_or(TECH_TREE_CAP);
    let (r, mut recs) =
        run_tech_tree(&rt, &c.agent(), c.seed, trials, cap, c.jobs).map_err(|e| CliError::usage(e.to_string()))?;
    report(Report::TechTree(&r), ReportFormat::Csv, &c.out.join("tech_tree.csv"))?;
    report(Report::TechTree(&r), ReportFormat::Json, &c.out.join("tech_tree.json"))?;
    report(Report::TechTree(&r), ReportFormat::Plotdata, &c.out.join("tech_tree.dat"))?;
    if a.records {
        for rec in recs.iter_mut() {
            rec.header.run_config_hash = c.hash();
        }
        write(&c.out.join("tech_tree.records.jsonl"), &records_text(&recs)?)?;
    }
    write_config(c)?;
    for t in &r.tiers {
        let mean = t.mean.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
        let sd = t.sd.map(|s| format!("{s:.2}")).unwrap_or_else(|| "-".into());
        println!("{:<14} {mean:>7} ± {sd:<6} {}/{}", t.task, t.successes, trials);
    }
    let mut clean = true;
    for t in &r.trials {
        if let Some(e) = &t.error {
            clean = false;
            println!("  trial seed {}: {e}", t.seed);
        }
    }
    println!("reports written to {}", c.out.display());
    Ok(if clean { 0 } else { 1 })
}

fn print_report(path: &Path, r: &ValidationReport) -> u8 {
    println!("{}: {} valid, {} errors", path.display(), r.valid, r.errors.len());
    for v in &r.errors {
        println!("  {v}");
    }
    if r.ok() {
        0
    } else {
        1
    }
}

fn skills(c: &RunConfig, cmd: SkillsCommand) -> Result<u8, CliError> {
    match cmd {
        SkillsCommand::List => {
            let rt = c.runtime()?;
            for s in rt.skills.skills() {
                println!("{}\t{}\t{}", s.id, s.category.name(), s.description);
            }
            Ok(0)
        }
        SkillsCommand::Query { text, k, threshold } => {
            let rt = c.runtime()?;
            let q = encode_query(rt.embedder.as_ref(), &text).map_err(|e| CliError::usage(e.to_string()))?;
            let threshold = threshold.unwrap_or(c.agent.threshold);
            let r = rt.skills.retrieve_flagged(&q, k, threshold).map_err(|e| CliError::usage(e.to_string()))?;
            for (i, hit) in r.ranked.iter().enumerate() {
                println!("{} {} {:.6}", i + 1, hit.skill.id, hit.score);
            }
            if r.low_confidence {
                println!("low confidence: best score below {threshold}");
            }
            Ok(0)
        }
        SkillsCommand::Validate { path } => {
            let report = validate_pack(&path, PackKind::Skill).map_err(|e| CliError::io(e.to_string()))?;
            let mut code = print_report(&path, &report);
            if report.ok() {
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(e.to_string()))?;
                let rt = c.runtime()?;
                let entries = SkillDatabase::parse_pack(&text).map_err(|e| CliError::failure(e.to_string()))?;
                if let Err(e) = SkillDatabase::build(entries, rt.embedder.as_ref()) {
                    println!("  {e}");
                    code = 1;
                }
            }
            Ok(code)
        }
    }
}

fn roundtrip<T: Record>(text: &str) -> Result<Result<String, String>, CliError> {
    let (records, errors) = scan::<T>(text);
    if let Some(v) = errors.first() {
        return Ok(Err(format!("{} schema errors, first: {v}", errors.len())));
    }
    to_jsonl(&records).map(Ok).map_err(|e| CliError::failure(e.to_string()))
}

fn dataset(_c: &RunConfig, cmd: DatasetCommand) -> Result<u8, CliError> {
    match cmd {
        DatasetCommand::Validate { kind, path } => {
            let report = validate_pack(&path, kind).map_err(|e| CliError::io(e.to_string()))?;
            Ok(print_report(&path, &report))
        }
        DatasetCommand::Roundtrip { kind, path, write: dest } => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            let again = match kind {
                PackKind::Qa => roundtrip::<QAPair>(&text)?,
                PackKind::Episode => roundtrip::<EpisodeRecord>(&text)?,
                PackKind::Skill => roundtrip::<SkillCodeEntry>(&text)?,
            };
            let again = match again {
                Ok(t) => t,
                Err(msg) => {
                    println!("{}: {msg}", path.display());
                    return Ok(1);
                }
            };
            if let Some(dest) = dest {
                write(&dest, &again)?;
            }
            if again == text {
                println!("{}: identical after round-trip", path.display());
                Ok(0)
            } else {
                println!("{}: bytes differ after round-trip", path.display());
                Ok(1)
            }
        }
        DatasetCommand::Replay { path } => {
            let records: Vec<EpisodeRecord> = read_records(&path).map_err(|e| match e {
                deskcraft::datasets::DatasetError::Io(m) => CliError::io(m),
                other => CliError::failure(other.to_string()),
            })?;
            let rt = deskcraft::instruction::Runtime::local().map_err(|e| CliError::failure(e.to_string()))?;
            let mut code = 0;
            for (i, rec) in records.iter().enumerate() {
                match replay(&rt.rules, &rt.tasks, rec).map_err(|e| CliError::failure(e.to_string()))? {
                    ReplayVerdict::Consistent => println!("record {i}: consistent"),
                    ReplayVerdict::Divergent { tick, reason } => {
                        code = 1;
                        println!("record {i}: divergent at tick {tick}: {reason}");
                    }
                }
            }
            Ok(code)
        }
    }
}

fn qa(c: &RunConfig, a: QaArgs) -> Result<u8, CliError> {
    let load = |p: &Path| -> Result<Vec<QAPair>, CliError> {
        read_records(p).map_err(|e| match e {
            deskcraft::datasets::DatasetError::Io(m) => CliError::io(m),
            other => CliError::failure(format!("{}: {other}", p.display())),
        })
    };
    let truth = load(&a.truth)?;
    let given = load(&a.answers)?;
    if truth.len() != given.len() {
        return Err(CliError::failure(format!("{} questions but {} answers", truth.len(), given.len())));
    }
    if let Some(i) = truth.iter().zip(&given).position(|(t, g)| t.instruction != g.instruction) {
        return Err(CliError::failure(format!("answer {i} is for a different question")));
    }
    let rt = c.runtime()?;
    let judge = rt.chat.get(&c.backend).ok_or_else(|| CliError::usage(format!("no backend `{}`", c.backend)))?;
    let answers: Vec<String> = given.into_iter().map(|p| p.output).collect();
    let r = score_qa(&truth, &answers, &[judge.as_ref()]).map_err(|e| CliError::usage(e.to_string()))?;
    if r.scores.is_empty() {
        println!("no questions");
        return Ok(0);
    }
    report(Report::Qa(&r), ReportFormat::Csv, &c.out.join("qa.csv"))?;
    report(Report::Qa(&r), ReportFormat::Json, &c.out.join("qa.json"))?;
    write_config(c)?;
    let mut table = String::new();
    for cat in &r.categories {
        let m = cat.mean.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(table, "{:<20} {:>4} {m:>6}", cat.category.name(), cat.count);
    }
    let overall = r.overall.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
    let _ = writeln!(table, "{:<20} {:>4} {overall:>6}", "Overall", r.scores.len());
    print!("{table}");
    for e in &r.errors {
        println!("  question {} ({}): {}", e.question_id, e.rater, e.message);
    }
    Ok(if r.errors.is_empty() { 0 } else { 1 })
}
