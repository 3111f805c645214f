use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::script::{parse_script, SkillScript};
use super::SkillError;
use crate::backends::EmbeddingBackend;
use crate::datasets::jsonl::{from_jsonl, to_jsonl, write_atomic, Record};

pub const SHIPPED_SKILLS_JSONL: &str = include_str!("../../assets/skills.jsonl");

/// Below this top score a retrieval is flagged low-confidence.
pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Collect,
    Craft,
    Smelt,
    Place,
    Explore,
    Locate,
    Equip,
    CombatStub,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Collect,
        Category::Craft,
        Category::Smelt,
        Category::Place,
        Category::Explore,
        Category::Locate,
        Category::Equip,
        Category::CombatStub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Collect => "collect",
            Category::Craft => "craft",
            Category::Smelt => "smelt",
            Category::Place => "place",
            Category::Explore => "explore",
            Category::Locate => "locate",
            Category::Equip => "equip",
            Category::CombatStub => "combat-stub",
        }
    }
}

/// One line of a skill pack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillCodeEntry {
    pub id: String,
    pub description: String,
    pub category: Category,
    pub script: String,
}

impl Record for SkillCodeEntry {
    const KIND: &'static str = "skill";

    fn check(&self) -> Result<(), (String, String)> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
            return Err(("id".into(), format!("`{}` is not a lowercase identifier", self.id)));
        }
        if self.description.trim().is_empty() {
            return Err(("description".into(), "must not be empty".into()));
        }
        parse_script(&self.script).map_err(|e| ("script".into(), e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skill {
    pub id: String,
    pub description: String,
    pub category: Category,
    pub source: String,
    pub script: SkillScript,
    pub embedding: Vec<f64>,
}

/// An embedded retrieval query.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub vector: Vec<f64>,
    pub text: String,
}

pub fn encode_query(embedder: &dyn EmbeddingBackend, text: &str) -> Result<Query, SkillError> {
    let vector = embedder.embed(text)?;
    if vector.iter().all(|&x| x == 0.0) {
        return Err(SkillError::ZeroVector);
    }
    Ok(Query { vector, text: text.to_string() })
}

pub fn cosine(q: &[f64], v: &[f64]) -> Result<f64, SkillError> {
    if q.len() != v.len() {
        return Err(SkillError::DimensionMismatch { expected: q.len(), got: v.len() });
    }
    let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nq == 0.0 || nv == 0.0 {
        return Err(SkillError::ZeroVector);
    }
    let dot: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nq * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct Ranked<'a> {
    pub skill: &'a Skill,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct Retrieval<'a> {
    pub ranked: Vec<Ranked<'a>>,
    pub low_confidence: bool,
}

impl<'a> Retrieval<'a> {
    pub fn top(&self) -> &Ranked<'a> {
        &self.ranked[0]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingCache {
    backend: String,
    content_sha256: String,
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

/// Immutable set of embedded skills, kept sorted by id.
#[derive(Debug, Clone)]
pub struct SkillDatabase {
    skills: Vec<Skill>,
    dimension: usize,
    backend: String,
    content_sha256: String,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl SkillDatabase {
    pub fn build(entries: Vec<SkillCodeEntry>, embedder: &dyn EmbeddingBackend) -> Result<Self, SkillError> {
        let mut vectors = BTreeMap::new();
        for e in &entries {
            vectors.insert(e.id.clone(), embedder.embed(&e.description)?);
        }
        Self::assemble(entries, &embedder.id(), embedder.dimension(), vectors)
    }

    fn assemble(
        entries: Vec<SkillCodeEntry>,
        backend: &str,
        dimension: usize,
        mut vectors: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, SkillError> {
        let content_sha256 = sha256_hex(&to_jsonl(&entries)?);
        let mut seen = BTreeSet::new();
        let mut skills = Vec::with_capacity(entries.len());
        for e in entries {
            if !seen.insert(e.id.clone()) {
                return Err(SkillError::DuplicateId(e.id));
            }
            if e.description.trim().is_empty() {
                return Err(SkillError::EmptyDescription(e.id));
            }
            let script = parse_script(&e.script).map_err(|err| SkillError::Script { id: e.id.clone(), err })?;
            let embedding = vectors.remove(&e.id).ok_or_else(|| SkillError::MissingEmbedding(e.id.clone()))?;
            if embedding.len() != dimension {
                return Err(SkillError::DimensionMismatch { expected: dimension, got: embedding.len() });
            }
            let norm = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(SkillError::ZeroVector);
            }
            skills.push(Skill {
                id: e.id,
                description: e.description,
                category: e.category,
                source: e.script,
                script,
                embedding,
            });
        }
        skills.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(SkillDatabase { skills, dimension, backend: backend.to_string(), content_sha256 })
    }

    pub fn parse_pack(text: &str) -> Result<Vec<SkillCodeEntry>, SkillError> {
        Ok(from_jsonl::<SkillCodeEntry>(text)?)
    }

    pub fn shipped(embedder: &dyn EmbeddingBackend) -> Result<Self, SkillError> {
        Self::build(Self::parse_pack(SHIPPED_SKILLS_JSONL)?, embedder)
    }

    pub fn cache_path(pack: &Path) -> PathBuf {
        let mut name = pack.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".emb.json");
        pack.with_file_name(name)
    }

    /// Loads a pack, reusing the sidecar embedding cache when it was built by
    /// the same backend from the same pack content, and refreshing it otherwise.
    pub fn load(pack: &Path, embedder: &dyn EmbeddingBackend) -> Result<Self, SkillError> {
        let text = std::fs::read_to_string(pack).map_err(|e| SkillError::Io(format!("{}: {e}", pack.display())))?;
        let entries = Self::parse_pack(&text)?;
        let hash = sha256_hex(&to_jsonl(&entries)?);
        let cache_file = Self::cache_path(pack);
        let cached = std::fs::read_to_string(&cache_file)
            .ok()
            .and_then(|t| serde_json::from_str::<EmbeddingCache>(&t).ok())
            .filter(|c| c.backend == embedder.id() && c.content_sha256 == hash && c.dimension == embedder.dimension());
        if let Some(c) = cached {
            if let Ok(db) = Self::assemble(entries.clone(), &c.backend, c.dimension, c.vectors) {
                return Ok(db);
            }
        }
        let db = Self::build(entries, embedder)?;
        let cache = EmbeddingCache {
            backend: db.backend.clone(),
            content_sha256: db.content_sha256.clone(),
            dimension: db.dimension,
            vectors: db.skills.iter().map(|s| (s.id.clone(), s.embedding.clone())).collect(),
        };
        let json = serde_json::to_string(&cache).expect("cache serializes");
        // The cache is an optimisation; a read-only directory is not an error.
        let _ = write_atomic(&cache_file, &json);
        Ok(db)
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn get(&self, id: &str) -> Option<&Skill> {
        self.skills.binary_search_by(|s| s.id.as_str().cmp(id)).ok().map(|i| &self.skills[i])
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn backend(&self) -> &str {
        &self.backend
    }

    pub fn content_sha256(&self) -> &str {
        &self.content_sha256
    }

    /// Top `k` skills by cosine score; equal scores rank by id.
    pub fn retrieve(&self, q: &Query, k: usize) -> Result<Vec<Ranked<'_>>, SkillError> {
        if self.skills.is_empty() {
            return Err(SkillError::EmptyDatabase);
        }
        if k == 0 {
            return Err(SkillError::BadK);
        }
        let mut ranked = self
            .skills
            .iter()
            .map(|s| cosine(&q.vector, &s.embedding).map(|score| Ranked { skill: s, score }))
            .collect::<Result<Vec<_>, _>>()?;
        ranked.sort_by(|a, b| {
            b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then_with(|| a.skill.id.cmp(&b.skill.id))
        });
        ranked.truncate(k);
        Ok(ranked)
    }

    pub fn retrieve_flagged(&self, q: &Query, k: usize, threshold: f64) -> Result<Retrieval<'_>, SkillError> {
        let ranked = self.retrieve(q, k)?;
        let low_confidence = ranked[0].score < threshold;
        Ok(Retrieval { ranked, low_confidence })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::HashedBow;
    use proptest::prelude::*;

    fn entry(id: &str, description: &str) -> SkillCodeEntry {
        SkillCodeEntry { id: id.into(), description: description.into(), category: Category::Craft, script: "explore_step".into() }
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3, -0.4, 0.5];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(SkillError::DimensionMismatch { .. })));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(SkillError::ZeroVector)));
    }

    #[test]
    fn ties_and_k() {
        let e = HashedBow::default();
        let db = SkillDatabase::build(vec![entry("zeta", "make planks"), entry("alpha", "make planks"), entry("mid", "mine ore")], &e).unwrap();
        let q = encode_query(&e, "make planks").unwrap();
        let r = db.retrieve(&q, 10).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].skill.id, "alpha");
        assert_eq!(r[1].skill.id, "zeta");
        assert!(matches!(db.retrieve(&q, 0), Err(SkillError::BadK)));
        let empty = SkillDatabase::build(vec![], &e).unwrap();
        assert!(matches!(empty.retrieve(&q, 1), Err(SkillError::EmptyDatabase)));
        assert!(matches!(encode_query(&e, ""), Err(SkillError::Backend(_))));
    }

    #[test]
    fn shipped_pack_self_retrieves() {
        let e = HashedBow::default();
        let db = SkillDatabase::shipped(&e).unwrap();
        assert!(db.len() >= 30);
        let cats: BTreeSet<_> = db.skills().iter().map(|s| s.category).collect();
        assert_eq!(cats.len(), 8);
        for s in db.skills() {
            let q = encode_query(&e, &s.description).unwrap();
            let top = &db.retrieve(&q, 1).unwrap()[0];
            assert_eq!(top.skill.id, s.id);
            assert!((top.score - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sidecar_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pack = dir.path().join("skills.jsonl");
        std::fs::write(&pack, SHIPPED_SKILLS_JSONL).unwrap();
        let e = HashedBow::default();
        let fresh = SkillDatabase::load(&pack, &e).unwrap();
        let cache = SkillDatabase::cache_path(&pack);
        assert!(cache.exists());
        let cached = SkillDatabase::load(&pack, &e).unwrap();
        assert_eq!(fresh.skills(), cached.skills());
        // A different backend ignores and rewrites the cache.
        let other = HashedBow::new(64).unwrap();
        let db = SkillDatabase::load(&pack, &other).unwrap();
        assert_eq!(db.dimension(), 64);
        let c: EmbeddingCache = serde_json::from_str(&std::fs::read_to_string(&cache).unwrap()).unwrap();
        assert_eq!(c.backend, "hashed_bow-64");
    }

    proptest! {
        #[test]
        fn ranking_ignores_insertion_order(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), query in "(make|mine|craft|plank|log|ore| )+") {
            prop_assume!(query.chars().any(|c| c.is_alphabetic()));
            let e = HashedBow::new(16).unwrap();
            let base = [("a", "make planks"), ("b", "mine ore"), ("c", "craft log"), ("d", "make planks"), ("e", "plank log"), ("f", "ore ore")];
            let ordered: Vec<_> = base.iter().map(|(i, d)| entry(i, d)).collect();
            let shuffled: Vec<_> = perm.iter().map(|&i| ordered[i].clone()).collect();
            let q = encode_query(&e, &query);
            prop_assume!(q.is_ok());
            let q = q.unwrap();
            let a = SkillDatabase::build(ordered, &e).unwrap();
            let b = SkillDatabase::build(shuffled, &e).unwrap();
            let ids = |db: &SkillDatabase| db.retrieve(&q, 6).unwrap().iter().map(|r| r.skill.id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&a), ids(&b));
        }

        #[test]
        fn cosine_scale_invariant(v in proptest::collection::vec(-5.0f64..5.0, 4), w in proptest::collection::vec(-5.0f64..5.0, 4), a in 0.01f64..100.0) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3) && w.iter().any(|x| x.abs() > 1e-3));
            let scaled: Vec<f64> = v.iter().map(|x| x * a).collect();
            prop_assert!((cosine(&scaled, &w).unwrap() - cosine(&v, &w).unwrap()).abs() < 1e-9);
            prop_assert!((cosine(&v, &w).unwrap() - cosine(&w, &v).unwrap()).abs() < 1e-12);
        }
    }
}
