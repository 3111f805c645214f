use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_sd};
use super::EvalError;
use crate::datasets::{EpisodeRecord, EpisodeTarget};
use crate::instruction::{run_episode, AgentConfig, EpisodeSpec, Runtime};
use crate::world::{Dims, Scenario};

pub const BLOCK_SEARCH_TASK: &str = "block_search";
pub const BLOCK_SEARCH_FREE_TASK: &str = "block_search_free";
pub const BLOCK_SEARCH_CAP: u32 = 100;
pub const TECH_TREE_CURRICULUM: &str = "tech_tree";
pub const TECH_TREE_CAP: u32 = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSearchSeed {
    pub seed: u64,
    /// None is a DNF.
    pub iterations_to_10: Option<u32>,
    pub blocks_in_100: u32,
    /// Cumulative blocks found after each iteration of the free run.
    pub curve: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSearchResult {
    pub agent: String,
    pub config_hash: String,
    pub seeds: Vec<BlockSearchSeed>,
    pub mean_iterations_to_10: Option<f64>,
    pub mean_blocks_in_100: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierResult {
    pub task: String,
    /// Completion iteration per trial; None is a DNF.
    pub iterations: Vec<Option<u32>>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub successes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechTreeTrial {
    pub seed: u64,
    pub iterations: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechTreeResult {
    pub config_hash: String,
    pub cap: u32,
    pub trials: Vec<TechTreeTrial>,
    pub tiers: Vec<TierResult>,
}

fn pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::Precondition(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn episode(rt: &Runtime, cfg: &AgentConfig, scenario: Scenario, dims: Dims, seed: u64, target: EpisodeTarget, cap: u32) -> Result<EpisodeRecord, String> {
    let spec = EpisodeSpec { scenario, dims, seed, target, cap };
    run_episode(rt, cfg, &spec).map_err(|e| e.to_string())
}

/// Per seed: a run that stops at ten diamond ore, and a free run of the full
/// cap. Failed episodes count as DNF and never stop the sweep.
pub fn run_block_search(
    rt: &Runtime,
    cfg: &AgentConfig,
    agent: &str,
    seeds: &[u64],
    dims: Option<Dims>,
    jobs: usize,
) -> Result<(BlockSearchResult, Vec<EpisodeRecord>), EvalError> {
    if seeds.is_empty() {
        return Err(EvalError::Precondition("no seeds".into()));
    }
    cfg.validate().map_err(EvalError::Instruction)?;
    let scenario = Scenario::FlatSearch;
    let dims = dims.unwrap_or(scenario.default_dims());
    let runs: Vec<(BlockSearchSeed, Vec<EpisodeRecord>)> = pool(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut errors = Vec::new();
                let mut records = Vec::new();
                let target = EpisodeTarget::Task(BLOCK_SEARCH_TASK.into());
                let iterations_to_10 = match episode(rt, cfg, scenario, dims, seed, target, BLOCK_SEARCH_CAP) {
                    Ok(rec) => {
                        if let Some(e) = &rec.outcome.error {
                            errors.push(e.clone());
                        }
                        let done = rec.completion(BLOCK_SEARCH_TASK).filter(|_| rec.outcome.error.is_none());
                        records.push(rec);
                        done
                    }
                    Err(e) => {
                        errors.push(e);
                        None
                    }
                };
                let target = EpisodeTarget::Task(BLOCK_SEARCH_FREE_TASK.into());
                let (blocks_in_100, curve) = match episode(rt, cfg, scenario, dims, seed, target, BLOCK_SEARCH_CAP) {
                    Ok(rec) => {
                        if let Some(e) = &rec.outcome.error {
                            errors.push(e.clone());
                        }
                        let out = (rec.outcome.found, rec.frames.iter().map(|f| f.found).collect());
                        records.push(rec);
                        out
                    }
                    Err(e) => {
                        errors.push(e);
                        (0, Vec::new())
                    }
                };
                (BlockSearchSeed { seed, iterations_to_10, blocks_in_100, curve, errors }, records)
            })
            .collect()
    })?;
    let (seeds, records): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let done: Vec<f64> = seeds.iter().filter_map(|s| s.iterations_to_10.map(f64::from)).collect();
    let blocks: Vec<f64> = seeds.iter().map(|s| f64::from(s.blocks_in_100)).collect();
    let result = BlockSearchResult {
        agent: agent.to_string(),
        config_hash: cfg.hash(),
        mean_iterations_to_10: mean(&done),
        mean_blocks_in_100: mean(&blocks),
        seeds,
    };
    Ok((result, records.into_iter().flatten().collect()))
}

/// Trials run the tech-tree curriculum on seeds `base_seed + i`. Each tier's
/// iteration count is when its task completed within the trial.
pub fn run_tech_tree(
    rt: &Runtime,
    cfg: &AgentConfig,
    base_seed: u64,
    trials: u32,
    cap: u32,
    jobs: usize,
) -> Result<(TechTreeResult, Vec<EpisodeRecord>), EvalError> {
    if trials == 0 {
        return Err(EvalError::Precondition("no trials".into()));
    }
    cfg.validate().map_err(EvalError::Instruction)?;
    let curriculum = rt
        .tasks
        .curriculum(TECH_TREE_CURRICULUM)
        .ok_or_else(|| EvalError::Precondition(format!("no curriculum `{TECH_TREE_CURRICULUM}`")))?
        .clone();
    let scenario = Scenario::TechTreePlains;
    let seeds: Vec<u64> = (0..trials).map(|i| base_seed.wrapping_add(u64::from(i))).collect();
    let runs: Vec<(u64, Result<EpisodeRecord, String>)> = pool(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let target = EpisodeTarget::Curriculum(TECH_TREE_CURRICULUM.into());
                (seed, episode(rt, cfg, scenario, scenario.default_dims(), seed, target, cap))
            })
            .collect()
    })?;
    let tiers = curriculum
        .tasks
        .iter()
        .map(|task| {
            let iterations: Vec<Option<u32>> = runs
                .iter()
                .map(|(_, r)| r.as_ref().ok().and_then(|rec| rec.completion(task)).filter(|&i| i <= cap))
                .collect();
            let done: Vec<f64> = iterations.iter().flatten().map(|&i| f64::from(i)).collect();
            TierResult {
                task: task.clone(),
                mean: mean(&done),
                sd: sample_sd(&done),
                successes: done.len() as u32,
                iterations,
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut trial_rows = Vec::new();
    for (seed, r) in runs {
        match r {
            Ok(rec) => {
                trial_rows.push(TechTreeTrial { seed, iterations: rec.outcome.iterations, error: rec.outcome.error.clone() });
                records.push(rec);
            }
            Err(e) => trial_rows.push(TechTreeTrial { seed, iterations: 0, error: Some(e) }),
        }
    }
    Ok((TechTreeResult { config_hash: cfg.hash(), cap, trials: trial_rows, tiers }, records))
}
