use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::InstructionError;
use crate::backends::{ChatMessage, Speaker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Planner,
    Critic,
    Curriculum,
    Describer,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Planner, Role::Critic, Role::Curriculum, Role::Describer];

    pub fn name(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::Critic => "critic",
            Role::Curriculum => "curriculum",
            Role::Describer => "describer",
        }
    }

    pub fn default_temperature(self) -> f64 {
        match self {
            Role::Curriculum => 0.9,
            _ => 0.0,
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            Role::Planner => &["task", "bundle", "memory", "feedback"],
            Role::Critic => &["task", "plan", "outcome"],
            Role::Curriculum => &["completed", "candidates", "memory"],
            Role::Describer => &["budget", "entries"],
        }
    }

    fn shipped_template(self) -> &'static str {
        match self {
            Role::Planner => include_str!("../../assets/prompts/planner.txt"),
            Role::Critic => include_str!("../../assets/prompts/critic.txt"),
            Role::Curriculum => include_str!("../../assets/prompts/curriculum.txt"),
            Role::Describer => include_str!("../../assets/prompts/describer.txt"),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A prompt template split into `[system]` and `[user]` sections, each with
/// `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
}

fn placeholders_in(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) if after[..end].chars().all(|c| c.is_ascii_lowercase() || c == '_') && end > 0 => {
                out.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

impl PromptTemplate {
    pub fn parse(text: &str, role: Role) -> Result<Self, InstructionError> {
        let bad = |m: String| InstructionError::Config(format!("{role} template: {m}"));
        let sys_at = text.find("[system]\n").ok_or_else(|| bad("missing [system] section".into()))?;
        let user_at = text.find("[user]\n").ok_or_else(|| bad("missing [user] section".into()))?;
        if user_at < sys_at {
            return Err(bad("[system] must precede [user]".into()));
        }
        let system = text[sys_at + 9..user_at].trim_end().to_string();
        let user = text[user_at + 7..].trim_end().to_string();
        let allowed = role.placeholders();
        for p in placeholders_in(&system).into_iter().chain(placeholders_in(&user)) {
            if !allowed.contains(&p.as_str()) {
                return Err(bad(format!("unknown placeholder {{{p}}}")));
            }
        }
        let used = placeholders_in(&user);
        for p in allowed {
            if !used.iter().any(|u| u == p) {
                return Err(bad(format!("user section lacks {{{p}}}")));
            }
        }
        Ok(PromptTemplate { system, user })
    }

    pub fn shipped(role: Role) -> Self {
        Self::parse(role.shipped_template(), role).expect("shipped templates are valid")
    }

    pub fn load(path: &Path, role: Role) -> Result<Self, InstructionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InstructionError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, role)
    }

    /// Fills placeholders in one pass, so substituted text is never rescanned.
    fn fill(text: &str, vars: &BTreeMap<&str, String>) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let after = &rest[start + 1..];
            match after.find('}').and_then(|end| vars.get(&after[..end]).map(|v| (end, v))) {
                Some((end, v)) => {
                    out.push_str(v);
                    rest = &after[end + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }

    pub fn render(&self, vars: &BTreeMap<&str, String>) -> Vec<ChatMessage> {
        vec![
            ChatMessage { speaker: Speaker::System, text: Self::fill(&self.system, vars) },
            ChatMessage { speaker: Speaker::User, text: Self::fill(&self.user, vars) },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub role: Role,
    pub temperature: f64,
    pub prompt_template: PromptTemplate,
    pub backend: String,
}

impl RoleConfig {
    pub fn shipped(role: Role) -> Self {
        RoleConfig {
            role,
            temperature: role.default_temperature(),
            prompt_template: PromptTemplate::shipped(role),
            backend: "scripted".into(),
        }
    }

    pub fn validate(&self) -> Result<(), InstructionError> {
        let t = self.temperature;
        if !(t.is_finite() && t >= 0.0) {
            return Err(InstructionError::Config(format!("{}: temperature {t} must be finite and >= 0", self.role)));
        }
        if self.role != Role::Curriculum && t != 0.0 {
            return Err(InstructionError::Config(format!("{}: temperature must be 0", self.role)));
        }
        Ok(())
    }
}

/// One configuration per role; all four share a backend unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSet {
    pub planner: RoleConfig,
    pub critic: RoleConfig,
    pub curriculum: RoleConfig,
    pub describer: RoleConfig,
}

impl Default for RoleSet {
    fn default() -> Self {
        RoleSet {
            planner: RoleConfig::shipped(Role::Planner),
            critic: RoleConfig::shipped(Role::Critic),
            curriculum: RoleConfig::shipped(Role::Curriculum),
            describer: RoleConfig::shipped(Role::Describer),
        }
    }
}

impl RoleSet {
    pub fn get(&self, role: Role) -> &RoleConfig {
        match role {
            Role::Planner => &self.planner,
            Role::Critic => &self.critic,
            Role::Curriculum => &self.curriculum,
            Role::Describer => &self.describer,
        }
    }

    pub fn get_mut(&mut self, role: Role) -> &mut RoleConfig {
        match role {
            Role::Planner => &mut self.planner,
            Role::Critic => &mut self.critic,
            Role::Curriculum => &mut self.curriculum,
            Role::Describer => &mut self.describer,
        }
    }

    pub fn with_backend(mut self, backend: &str) -> Self {
        for r in Role::ALL {
            self.get_mut(r).backend = backend.to_string();
        }
        self
    }

    pub fn validate(&self) -> Result<(), InstructionError> {
        for r in Role::ALL {
            let c = self.get(r);
            if c.role != r {
                return Err(InstructionError::Config(format!("{r} slot holds a {} config", c.role)));
            }
            c.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_load() {
        let roles = RoleSet::default();
        roles.validate().unwrap();
        assert_eq!(roles.curriculum.temperature, 0.9);
        assert_eq!(roles.planner.temperature, 0.0);
    }

    #[test]
    fn render_is_single_pass() {
        let t = PromptTemplate::parse("[system]\nsys {task}\n[user]\nbudget: {budget}\n{entries}\n", Role::Describer);
        assert!(t.is_err(), "task is not a describer placeholder");
        let t = PromptTemplate::parse("[system]\nsys\n[user]\nbudget: {budget}\n{entries}\n", Role::Describer).unwrap();
        let vars = BTreeMap::from([("budget", "5".to_string()), ("entries", "{budget} literal".to_string())]);
        let m = t.render(&vars);
        assert_eq!(m[1].text, "budget: 5\n{budget} literal");
    }

    #[test]
    fn template_errors() {
        assert!(PromptTemplate::parse("[user]\n{budget}{entries}", Role::Describer).is_err());
        assert!(PromptTemplate::parse("[system]\nx\n[user]\n{budget}", Role::Describer).is_err());
        let mut c = RoleConfig::shipped(Role::Planner);
        c.temperature = 0.5;
        assert!(c.validate().is_err());
        let mut c = RoleConfig::shipped(Role::Curriculum);
        c.temperature = -1.0;
        assert!(c.validate().is_err());
    }
}
