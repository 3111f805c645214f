use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::collections::BTreeMap;

use deskcraft::backends::{
    ChatBackend, EmbeddingBackend, EmbeddingKind, EmbeddingSpec, HashedBow, RemoteChat, RemoteConfig,
    RemoteEmbedding, ScriptedBackend,
};
use deskcraft::instruction::{AgentConfig, Runtime};
use deskcraft::skills::SkillDatabase;
use deskcraft::world::{Dims, TaskRegistry, WorldRules};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const BACKENDS: [&str; 2] = ["scripted", "remote"];

/// Everything a command needs. Precedence: flags, then the config file, then
/// these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub trials: u32,
    /// Iteration cap; each command has its own default.
    pub cap: Option<u32>,
    pub jobs: usize,
    /// Chat backend for every role: `scripted` or `remote`.
    pub backend: String,
    pub embedding: EmbeddingSpec,
    pub remote: RemoteConfig,
    /// Skill pack to load instead of the shipped one.
    pub skills: Option<PathBuf>,
    /// World size override for the generated scenario.
    pub dims: Option<Dims>,
    pub agent: AgentConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            seeds: vec![0, 1, 2],
            trials: 3,
            cap: None,
            jobs: 1,
            backend: "scripted".into(),
            embedding: EmbeddingSpec::default(),
            remote: RemoteConfig::default(),
            skills: None,
            dims: None,
            agent: AgentConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// sha256 over the settings that can change results; `jobs` and `out` are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.jobs = 1;
        c.out = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !BACKENDS.contains(&self.backend.as_str()) {
            return Err(CliError::usage(format!("unknown backend `{}` (expected scripted or remote)", self.backend)));
        }
        if self.jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        self.agent.validate().map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn runtime(&self) -> Result<Runtime, CliError> {
        let rules = Arc::new(WorldRules::shipped());
        let tasks = Arc::new(TaskRegistry::shipped(&rules));
        let embedder: Arc<dyn EmbeddingBackend> = match self.embedding.backend {
            EmbeddingKind::HashedBow => {
                Arc::new(HashedBow::new(self.embedding.dimension).map_err(|e| CliError::usage(e.to_string()))?)
            }
            EmbeddingKind::Remote => Arc::new(
                RemoteEmbedding::new(self.remote.clone(), self.embedding.dimension)
                    .map_err(|e| CliError::usage(e.to_string()))?,
            ),
        };
        let skills = match &self.skills {
            Some(p) => SkillDatabase::load(p, embedder.as_ref()),
            None => SkillDatabase::shipped(embedder.as_ref()),
        }
        .map_err(|e| CliError::failure(e.to_string()))?;
        let mut chat: BTreeMap<String, Arc<dyn ChatBackend>> = BTreeMap::new();
        chat.insert("scripted".into(), Arc::new(ScriptedBackend::new(rules.clone())));
        if self.backend == "remote" {
            let remote = RemoteChat::new(self.remote.clone()).map_err(|e| CliError::usage(e.to_string()))?;
            chat.insert("remote".into(), Arc::new(remote));
        }
        Ok(Runtime { rules, tasks, skills: Arc::new(skills), embedder, chat })
    }

    /// The agent config with every role on the selected backend.
    pub fn agent(&self) -> AgentConfig {
        let mut a = self.agent.clone();
        a.roles = a.roles.with_backend(&self.backend);
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults_and_hash_ignores_out() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "seed = 7\nseeds = [4, 5]\n[agent.perception]\nmode = \"proximity\"\n").unwrap();
        let c = RunConfig::load(Some(&p)).unwrap();
        assert_eq!((c.seed, c.seeds.clone(), c.trials), (7, vec![4, 5], 3));
        let mut moved = c.clone();
        moved.out = PathBuf::from("elsewhere");
        moved.jobs = 8;
        assert_eq!(moved.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
        std::fs::write(&p, "sed = 7\n").unwrap();
        assert_eq!(RunConfig::load(Some(&p)).unwrap_err().code, 2);
    }
}
