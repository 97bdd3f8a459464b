use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::agents::BuiltinAgentKind;
use crate::protocol::{AgentInfo, VoiceInfo};

/// Default duration model: 400 ms per token (about 150 words per minute)
/// plus a fixed 120 ms lead-in.
pub const DEFAULT_MS_PER_TOKEN: u64 = 400;
pub const DEFAULT_BASE_MS: u64 = 120;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("duplicate voice id {0:?}")]
    DuplicateVoice(String),
    #[error("duplicate agent id {0:?}")]
    DuplicateAgent(String),
    #[error("empty {0} id")]
    EmptyId(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceDescriptor {
    pub voice_id: String,
    #[serde(default)]
    pub display_name: String,
    #[serde(default = "default_ms_per_token")]
    pub ms_per_token: u64,
    #[serde(default = "default_base_ms")]
    pub base_ms: u64,
}

fn default_ms_per_token() -> u64 {
    DEFAULT_MS_PER_TOKEN
}

fn default_base_ms() -> u64 {
    DEFAULT_BASE_MS
}

impl VoiceDescriptor {
    pub fn new(voice_id: &str, display_name: &str, ms_per_token: u64, base_ms: u64) -> Self {
        VoiceDescriptor {
            voice_id: voice_id.into(),
            display_name: display_name.into(),
            ms_per_token,
            base_ms,
        }
    }

    pub fn info(&self) -> VoiceInfo {
        VoiceInfo {
            voice_id: self.voice_id.clone(),
            display_name: self.display_name.clone(),
        }
    }
}

/// Where an agent lives: in-process, or behind the reply-webhook protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentEndpoint {
    Builtin(BuiltinAgentKind),
    Remote(String),
}

const BUILTIN_PREFIX: &str = "builtin:";

impl fmt::Display for AgentEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentEndpoint::Builtin(kind) => write!(f, "{BUILTIN_PREFIX}{}", kind.as_str()),
            AgentEndpoint::Remote(url) => f.write_str(url),
        }
    }
}

impl AgentEndpoint {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.strip_prefix(BUILTIN_PREFIX) {
            Some(tag) => BuiltinAgentKind::parse(tag)
                .map(AgentEndpoint::Builtin)
                .ok_or_else(|| format!("unknown builtin agent {tag:?}")),
            None if s.starts_with("http://") || s.starts_with("https://") => {
                Ok(AgentEndpoint::Remote(s.trim_end_matches('/').to_owned()))
            }
            None => Err(format!("agent endpoint {s:?} is neither builtin:<kind> nor a URL")),
        }
    }
}

impl Serialize for AgentEndpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentEndpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AgentEndpoint::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub agent_id: String,
    #[serde(default)]
    pub display_name: String,
    pub endpoint: AgentEndpoint,
}

impl AgentDescriptor {
    pub fn builtin(agent_id: &str, display_name: &str, kind: BuiltinAgentKind) -> Self {
        AgentDescriptor {
            agent_id: agent_id.into(),
            display_name: display_name.into(),
            endpoint: AgentEndpoint::Builtin(kind),
        }
    }

    pub fn info(&self) -> AgentInfo {
        AgentInfo {
            agent_id: self.agent_id.clone(),
            display_name: self.display_name.clone(),
        }
    }
}

/// Agents and voices on offer, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Catalog {
    agents: Vec<AgentDescriptor>,
    voices: Vec<VoiceDescriptor>,
}

impl Catalog {
    pub fn new(
        mut agents: Vec<AgentDescriptor>,
        mut voices: Vec<VoiceDescriptor>,
    ) -> Result<Self, CatalogError> {
        agents.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
        voices.sort_by(|a, b| a.voice_id.cmp(&b.voice_id));
        if agents.iter().any(|a| a.agent_id.is_empty()) {
            return Err(CatalogError::EmptyId("agent"));
        }
        if voices.iter().any(|v| v.voice_id.is_empty()) {
            return Err(CatalogError::EmptyId("voice"));
        }
        if let Some(w) = agents.windows(2).find(|w| w[0].agent_id == w[1].agent_id) {
            return Err(CatalogError::DuplicateAgent(w[0].agent_id.clone()));
        }
        if let Some(w) = voices.windows(2).find(|w| w[0].voice_id == w[1].voice_id) {
            return Err(CatalogError::DuplicateVoice(w[0].voice_id.clone()));
        }
        Ok(Catalog { agents, voices })
    }

    pub fn default_agents() -> Vec<AgentDescriptor> {
        vec![
            AgentDescriptor::builtin("triage", "Triage room", BuiltinAgentKind::Triage),
            AgentDescriptor::builtin("anamnesis", "Anamnesis room", BuiltinAgentKind::Anamnesis),
        ]
    }

    pub fn default_voices() -> Vec<VoiceDescriptor> {
        vec![
            VoiceDescriptor::new("f1", "Calm (female)", DEFAULT_MS_PER_TOKEN, DEFAULT_BASE_MS),
            VoiceDescriptor::new("m1", "Warm (male)", 440, DEFAULT_BASE_MS),
        ]
    }

    pub fn agents(&self) -> &[AgentDescriptor] {
        &self.agents
    }

    pub fn voices(&self) -> &[VoiceDescriptor] {
        &self.voices
    }

    pub fn agent(&self, agent_id: &str) -> Option<&AgentDescriptor> {
        self.agents.iter().find(|a| a.agent_id == agent_id)
    }

    pub fn voice(&self, voice_id: &str) -> Option<&VoiceDescriptor> {
        self.voices.iter().find(|v| v.voice_id == voice_id)
    }

    pub fn agent_infos(&self) -> Vec<AgentInfo> {
        self.agents.iter().map(AgentDescriptor::info).collect()
    }

    pub fn voice_infos(&self) -> Vec<VoiceInfo> {
        self.voices.iter().map(VoiceDescriptor::info).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_is_sorted() {
        let catalog = Catalog::new(Catalog::default_agents(), Catalog::default_voices()).unwrap();
        let agents: Vec<&str> = catalog.agents().iter().map(|a| a.agent_id.as_str()).collect();
        let voices: Vec<&str> = catalog.voices().iter().map(|v| v.voice_id.as_str()).collect();
        assert_eq!(agents, ["anamnesis", "triage"]);
        assert_eq!(voices, ["f1", "m1"]);
    }

    #[test]
    fn empty_catalog() {
        let catalog = Catalog::new(vec![], vec![]).unwrap();
        assert!(catalog.agents().is_empty());
        assert!(catalog.voices().is_empty());
    }

    #[test]
    fn duplicates_rejected() {
        let mut voices = Catalog::default_voices();
        voices.push(voices[0].clone());
        assert_eq!(
            Catalog::new(vec![], voices),
            Err(CatalogError::DuplicateVoice("f1".into()))
        );
        let mut agents = Catalog::default_agents();
        agents.push(agents[1].clone());
        assert_eq!(
            Catalog::new(agents, vec![]),
            Err(CatalogError::DuplicateAgent("anamnesis".into()))
        );
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(
            AgentEndpoint::parse("builtin:triage"),
            Ok(AgentEndpoint::Builtin(BuiltinAgentKind::Triage))
        );
        assert_eq!(
            AgentEndpoint::parse("http://localhost:5005/agents/triage/"),
            Ok(AgentEndpoint::Remote("http://localhost:5005/agents/triage".into()))
        );
        assert!(AgentEndpoint::parse("builtin:nope").is_err());
        assert!(AgentEndpoint::parse("ftp://x").is_err());
    }
}
