use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    AgentDescriptor, AgentEndpoint, Catalog, CatalogError, LatencyModel, LatencyModelError,
    TimeMode, VoiceDescriptor,
};
use crate::chunker::{ChunkingConfig, ChunkingConfigError};
use crate::protocol::{DEFAULT_MAX_FRAME_BYTES, DEFAULT_THRESHOLD_MS};

pub const ENV_STT_URL: &str = "VOXHUB_STT_URL";
pub const ENV_TTS_URL: &str = "VOXHUB_TTS_URL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Chunking(#[from] ChunkingConfigError),
    #[error("{backend} latency model: {source}")]
    Latency {
        backend: &'static str,
        source: LatencyModelError,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SttConfig {
    /// Remote STT base URL; builtin mock when absent.
    pub url: Option<String>,
    pub latency: LatencyModel,
}

impl Default for SttConfig {
    fn default() -> Self {
        Self {
            url: None,
            latency: LatencyModel::default_stt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtsConfig {
    pub url: Option<String>,
    pub latency: LatencyModel,
    /// Global cap on concurrent mock synthesis jobs.
    pub max_concurrent: Option<usize>,
}

impl Default for TtsConfig {
    fn default() -> Self {
        Self {
            url: None,
            latency: LatencyModel::default_tts(),
            max_concurrent: None,
        }
    }
}

/// Gateway configuration, loaded from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: String,
    pub time_mode: TimeMode,
    pub max_sessions: usize,
    pub max_frame_bytes: usize,
    /// Per-message transport delay added to chunk arrival in simulated time.
    pub transport_ms: u64,
    pub threshold_ms: u64,
    pub chunking: ChunkingConfig,
    pub stt: SttConfig,
    pub tts: TtsConfig,
    /// Latency model of builtin agents.
    pub agent_latency: LatencyModel,
    pub agents: Vec<AgentDescriptor>,
    pub voices: Vec<VoiceDescriptor>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            time_mode: TimeMode::Wallclock,
            max_sessions: 64,
            max_frame_bytes: DEFAULT_MAX_FRAME_BYTES,
            transport_ms: 0,
            threshold_ms: DEFAULT_THRESHOLD_MS,
            chunking: ChunkingConfig::default(),
            stt: SttConfig::default(),
            tts: TtsConfig::default(),
            agent_latency: LatencyModel::default_agent(),
            agents: Catalog::default_agents(),
            voices: Catalog::default_voices(),
        }
    }
}

impl GatewayConfig {
    pub fn simulated() -> Self {
        Self {
            time_mode: TimeMode::Simulated,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Backend URLs from the environment override the file.
    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(ENV_STT_URL) {
            if !url.is_empty() {
                self.stt.url = Some(url);
            }
        }
        if let Ok(url) = std::env::var(ENV_TTS_URL) {
            if !url.is_empty() {
                self.tts.url = Some(url);
            }
        }
    }

    /// Drops remote STT/TTS endpoints in favour of the mocks.
    pub fn force_builtin(&mut self) {
        self.stt.url = None;
        self.tts.url = None;
    }

    pub fn uses_only_builtins(&self) -> bool {
        self.stt.url.is_none()
            && self.tts.url.is_none()
            && self
                .agents
                .iter()
                .all(|a| matches!(a.endpoint, AgentEndpoint::Builtin(_)))
    }

    pub fn catalog(&self) -> Result<Catalog, ConfigError> {
        Ok(Catalog::new(self.agents.clone(), self.voices.clone())?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chunking.validate()?;
        for (backend, model) in [
            ("stt", &self.stt.latency),
            ("tts", &self.tts.latency),
            ("agent", &self.agent_latency),
        ] {
            model
                .validate()
                .map_err(|source| ConfigError::Latency { backend, source })?;
        }
        if self.max_sessions == 0 {
            return Err(ConfigError::Invalid("max_sessions must be at least 1".into()));
        }
        if self.max_frame_bytes < 1024 {
            return Err(ConfigError::Invalid("max_frame_bytes must be at least 1024".into()));
        }
        if self.time_mode == TimeMode::Simulated && !self.uses_only_builtins() {
            return Err(ConfigError::Invalid(
                "simulated time requires builtin backends; remote backends have real latency".into(),
            ));
        }
        self.catalog()?;
        Ok(())
    }
}
