//! Model-agnostic STT, TTS and agent backends.
//!
//! The gateway talks to three traits. Each has a deterministic in-process
//! mock (with an injectable [`LatencyModel`]) and an HTTP client for the
//! backend protocol served by [`server::router`], so any real model server
//! that speaks that protocol can be plugged in.

mod catalog;
mod latency;
mod mock;
mod remote;
pub mod server;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{AudioEnvelope, VoiceInfo};

pub use catalog::{
    AgentDescriptor, AgentEndpoint, Catalog, CatalogError, VoiceDescriptor, DEFAULT_BASE_MS,
    DEFAULT_MS_PER_TOKEN,
};
pub use latency::{
    LatencyKind, LatencyModel, LatencyModelError, Workload, DEFAULT_AGENT_MS, DEFAULT_STT_MS,
    DEFAULT_TTS_RTF, FIXED_TTS_MS,
};
pub use mock::{BuiltinAgent, MockStt, MockTts};
pub use remote::{RemoteAgent, RemoteStt, RemoteTts};

pub const BACKEND_TIMEOUT: Duration = Duration::from_secs(10);

/// Whether mocks really wait for their modelled latency or only report it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    #[default]
    Wallclock,
    Simulated,
}

impl TimeMode {
    pub async fn wait(self, ms: u64) {
        if self == TimeMode::Wallclock && ms > 0 {
            tokio::time::sleep(Duration::from_millis(ms)).await;
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown voice {0:?}")]
    UnknownVoice(String),
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("transcription failed: {0}")]
    TranscriptionFailed(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcription {
    pub text: String,
    pub processing_ms: u64,
}

impl Transcription {
    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesis {
    pub audio: AudioEnvelope,
    pub processing_ms: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub replies: Vec<String>,
    pub processing_ms: u64,
}

#[async_trait]
pub trait SpeechToText: Send + Sync {
    async fn transcribe(&self, audio: &AudioEnvelope) -> Result<Transcription, BackendError>;
}

#[async_trait]
pub trait TextToSpeech: Send + Sync {
    async fn synthesize(&self, text: &str, voice_id: &str) -> Result<Synthesis, BackendError>;
    async fn voices(&self) -> Result<Vec<VoiceInfo>, BackendError>;
}

#[async_trait]
pub trait ConversationalAgent: Send + Sync {
    async fn respond(&self, sender_id: &str, message: &str) -> Result<AgentReply, BackendError>;

    /// Drops any state held for `sender_id`.
    fn forget(&self, _sender_id: &str) {}
}

/// Dispatches by agent id.
#[derive(Clone, Default)]
pub struct AgentRouter {
    agents: HashMap<String, Arc<dyn ConversationalAgent>>,
}

impl AgentRouter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, agent_id: &str, agent: Arc<dyn ConversationalAgent>) {
        self.agents.insert(agent_id.to_owned(), agent);
    }

    /// One agent per catalog entry: builtin kinds become in-process
    /// [`BuiltinAgent`]s with `model`, remote endpoints become HTTP clients.
    pub fn from_catalog(
        catalog: &Catalog,
        model: &LatencyModel,
        mode: TimeMode,
    ) -> Result<Self, BackendError> {
        let mut router = Self::new();
        for desc in catalog.agents() {
            let agent: Arc<dyn ConversationalAgent> = match &desc.endpoint {
                AgentEndpoint::Builtin(kind) => {
                    Arc::new(BuiltinAgent::new(*kind, model.clone(), mode))
                }
                AgentEndpoint::Remote(url) => Arc::new(RemoteAgent::new(url)?),
            };
            router.insert(&desc.agent_id, agent);
        }
        Ok(router)
    }

    pub fn get(&self, agent_id: &str) -> Option<&Arc<dyn ConversationalAgent>> {
        self.agents.get(agent_id)
    }

    pub async fn respond(
        &self,
        agent_id: &str,
        sender_id: &str,
        message: &str,
    ) -> Result<AgentReply, BackendError> {
        let agent = self
            .get(agent_id)
            .ok_or_else(|| BackendError::UnknownAgent(agent_id.to_owned()))?;
        agent.respond(sender_id, message).await
    }

    pub fn forget(&self, sender_id: &str) {
        for agent in self.agents.values() {
            agent.forget(sender_id);
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.agents.keys().map(String::as_str)
    }
}
