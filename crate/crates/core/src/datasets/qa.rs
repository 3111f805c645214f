use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::jsonl::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QaCategory {
    #[serde(rename = "World&Entities")]
    WorldEntities,
    #[serde(rename = "Mechanics&Survival")]
    MechanicsSurvival,
    #[serde(rename = "Knowledge&Discovery")]
    KnowledgeDiscovery,
    #[serde(rename = "Resources&Crafting")]
    ResourcesCrafting,
    #[serde(rename = "Tools&Utilities")]
    ToolsUtilities,
    #[serde(rename = "Miscellaneous")]
    Miscellaneous,
}

impl QaCategory {
    pub const ALL: [QaCategory; 6] = [
        QaCategory::WorldEntities,
        QaCategory::MechanicsSurvival,
        QaCategory::KnowledgeDiscovery,
        QaCategory::ResourcesCrafting,
        QaCategory::ToolsUtilities,
        QaCategory::Miscellaneous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QaCategory::WorldEntities => "World&Entities",
            QaCategory::MechanicsSurvival => "Mechanics&Survival",
            QaCategory::KnowledgeDiscovery => "Knowledge&Discovery",
            QaCategory::ResourcesCrafting => "Resources&Crafting",
            QaCategory::ToolsUtilities => "Tools&Utilities",
            QaCategory::Miscellaneous => "Miscellaneous",
        }
    }
}

impl fmt::Display for QaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QaCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QaCategory::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown QA category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAPair {
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub output: String,
    pub category: QaCategory,
}

impl Record for QAPair {
    const KIND: &'static str = "qa";

    fn check(&self) -> Result<(), (String, String)> {
        if self.instruction.trim().is_empty() {
            return Err(("instruction".into(), "must not be empty".into()));
        }
        if self.output.trim().is_empty() {
            return Err(("output".into(), "must not be empty".into()));
        }
        Ok(())
    }
}

pub const QA_FIXTURE_JSONL: &str = include_str!("../../assets/qa_sample.jsonl");
