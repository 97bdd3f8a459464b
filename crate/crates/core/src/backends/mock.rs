use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use async_trait::async_trait;
use parking_lot::Mutex;
use tokio::sync::Semaphore;

use super::{
    AgentReply, BackendError, ConversationalAgent, LatencyModel, SpeechToText, Synthesis,
    TextToSpeech, TimeMode, Transcription, VoiceDescriptor, Workload,
};
use crate::agents::{AgentState, BuiltinAgentKind};
use crate::chunker::token_count;
use crate::protocol::{decode_sim_audio, encode_sim_audio, AudioEnvelope, CodecError, VoiceInfo};

/// STT that reads the text straight out of SIMA1 audio.
pub struct MockStt {
    model: LatencyModel,
    mode: TimeMode,
}

impl MockStt {
    pub fn new(model: LatencyModel, mode: TimeMode) -> Self {
        Self { model, mode }
    }
}

#[async_trait]
impl SpeechToText for MockStt {
    async fn transcribe(&self, audio: &AudioEnvelope) -> Result<Transcription, BackendError> {
        let sim = decode_sim_audio(audio).map_err(|e| match e {
            CodecError::UnsupportedFormat(f) => {
                BackendError::TranscriptionFailed(format!("mock STT cannot decode {f} audio"))
            }
            other => BackendError::TranscriptionFailed(other.to_string()),
        })?;
        let processing_ms = self.model.evaluate(Workload {
            tokens: token_count(&sim.text) as u64,
            duration_ms: sim.duration_ms as u64,
        });
        self.mode.wait(processing_ms).await;
        Ok(Transcription {
            text: sim.text,
            processing_ms,
        })
    }
}

/// TTS that wraps text into SIMA1 audio using the voice's duration model.
pub struct MockTts {
    voices: Vec<VoiceDescriptor>,
    model: LatencyModel,
    mode: TimeMode,
    capacity: Option<Arc<Semaphore>>,
}

impl MockTts {
    pub fn new(voices: Vec<VoiceDescriptor>, model: LatencyModel, mode: TimeMode) -> Self {
        Self {
            voices,
            model,
            mode,
            capacity: None,
        }
    }

    /// Caps concurrent synthesis jobs across all callers.
    pub fn with_capacity(mut self, max_concurrent: usize) -> Self {
        self.capacity = Some(Arc::new(Semaphore::new(max_concurrent.max(1))));
        self
    }

    pub fn model(&self) -> &LatencyModel {
        &self.model
    }
}

#[async_trait]
impl TextToSpeech for MockTts {
    async fn synthesize(&self, text: &str, voice_id: &str) -> Result<Synthesis, BackendError> {
        let voice = self
            .voices
            .iter()
            .find(|v| v.voice_id == voice_id)
            .ok_or_else(|| BackendError::UnknownVoice(voice_id.to_owned()))?;
        let audio =
            encode_sim_audio(text, voice).map_err(|e| BackendError::InvalidInput(e.to_string()))?;
        let duration_ms = crate::protocol::compute_duration(text, voice);
        let processing_ms = self.model.evaluate(Workload {
            tokens: token_count(text) as u64,
            duration_ms,
        });
        let _permit = match (&self.capacity, self.mode) {
            (Some(sem), TimeMode::Wallclock) => Some(
                sem.acquire()
                    .await
                    .map_err(|_| BackendError::Unavailable("synthesis pool closed".into()))?,
            ),
            _ => None,
        };
        self.mode.wait(processing_ms).await;
        Ok(Synthesis {
            audio,
            processing_ms,
            duration_ms,
        })
    }

    async fn voices(&self) -> Result<Vec<VoiceInfo>, BackendError> {
        Ok(self.voices.iter().map(VoiceDescriptor::info).collect())
    }
}

/// In-process scripted agent with one conversation state per sender.
pub struct BuiltinAgent {
    kind: BuiltinAgentKind,
    model: LatencyModel,
    mode: TimeMode,
    conversations: Mutex<HashMap<String, AgentState>>,
}

impl BuiltinAgent {
    pub fn new(kind: BuiltinAgentKind, model: LatencyModel, mode: TimeMode) -> Self {
        Self {
            kind,
            model,
            mode,
            conversations: Mutex::new(HashMap::new()),
        }
    }

    pub fn kind(&self) -> BuiltinAgentKind {
        self.kind
    }

    pub fn state(&self, sender_id: &str) -> Option<AgentState> {
        self.conversations.lock().get(sender_id).cloned()
    }
}

#[async_trait]
impl ConversationalAgent for BuiltinAgent {
    async fn respond(&self, sender_id: &str, message: &str) -> Result<AgentReply, BackendError> {
        let started = Instant::now();
        let replies = self
            .conversations
            .lock()
            .entry(sender_id.to_owned())
            .or_insert_with(|| AgentState::new(self.kind))
            .step(message);
        let processing_ms = self.model.evaluate(Workload {
            tokens: token_count(message) as u64,
            duration_ms: 0,
        });
        // real work already took some time; only wait for the remainder
        let spent = started.elapsed().as_millis() as u64;
        self.mode.wait(processing_ms.saturating_sub(spent)).await;
        Ok(AgentReply {
            replies,
            processing_ms,
        })
    }

    fn forget(&self, sender_id: &str) {
        self.conversations.lock().remove(sender_id);
    }
}
