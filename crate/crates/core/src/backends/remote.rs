use std::time::Instant;

use async_trait::async_trait;
use reqwest::{Client, Response, StatusCode};
use serde::Deserialize;

use super::server::{
    ErrorBody, RespondRequest, ReplyText, SynthesizeRequest, TranscribeResponse, VoicesResponse,
    HEADER_AUDIO_FORMAT, HEADER_DURATION_MS, HEADER_PROCESSING_MS,
};
use super::{
    AgentReply, BackendError, ConversationalAgent, SpeechToText, Synthesis, TextToSpeech,
    Transcription, BACKEND_TIMEOUT,
};
use crate::protocol::{AudioEnvelope, AudioFormat, VoiceInfo};

fn client() -> Result<Client, BackendError> {
    Client::builder()
        .timeout(BACKEND_TIMEOUT)
        .build()
        .map_err(|e| BackendError::Unavailable(e.to_string()))
}

fn unavailable(err: reqwest::Error) -> BackendError {
    BackendError::Unavailable(err.to_string())
}

fn base(url: &str) -> String {
    url.trim_end_matches('/').to_owned()
}

/// Maps non-success statuses onto backend errors.
async fn check(resp: Response) -> Result<Response, BackendError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let body: Option<ErrorBody> = resp.json().await.ok();
    let detail = body
        .as_ref()
        .map(|b| b.detail.clone())
        .unwrap_or_else(|| status.to_string());
    let code = body.as_ref().map(|b| b.error.as_str()).unwrap_or("");
    Err(match (status, code) {
        (_, "unknown_voice") => BackendError::UnknownVoice(detail),
        (_, "unknown_agent") => BackendError::UnknownAgent(detail),
        (_, "transcription_failed") => BackendError::TranscriptionFailed(detail),
        (StatusCode::BAD_REQUEST, _) => BackendError::InvalidInput(detail),
        _ => BackendError::Unavailable(detail),
    })
}

async fn json<T: for<'de> Deserialize<'de>>(resp: Response) -> Result<T, BackendError> {
    let bytes = resp.bytes().await.map_err(unavailable)?;
    serde_json::from_slice(&bytes).map_err(|e| BackendError::Protocol(e.to_string()))
}

pub struct RemoteStt {
    client: Client,
    base_url: String,
}

impl RemoteStt {
    pub fn new(base_url: &str) -> Result<Self, BackendError> {
        Ok(Self {
            client: client()?,
            base_url: base(base_url),
        })
    }
}

#[async_trait]
impl SpeechToText for RemoteStt {
    async fn transcribe(&self, audio: &AudioEnvelope) -> Result<Transcription, BackendError> {
        let resp = self
            .client
            .post(format!("{}/v1/transcribe", self.base_url))
            .header(HEADER_AUDIO_FORMAT, audio.format.as_str())
            .body(audio.payload.clone())
            .send()
            .await
            .map_err(unavailable)?;
        let body: TranscribeResponse = json(check(resp).await?).await?;
        Ok(Transcription {
            text: body.text,
            processing_ms: body.processing_ms,
        })
    }
}

pub struct RemoteTts {
    client: Client,
    base_url: String,
}

impl RemoteTts {
    pub fn new(base_url: &str) -> Result<Self, BackendError> {
        Ok(Self {
            client: client()?,
            base_url: base(base_url),
        })
    }
}

fn header_u64(resp: &Response, name: &str) -> Result<u64, BackendError> {
    resp.headers()
        .get(name)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| BackendError::Protocol(format!("missing or invalid {name} header")))
}

#[async_trait]
impl TextToSpeech for RemoteTts {
    async fn synthesize(&self, text: &str, voice_id: &str) -> Result<Synthesis, BackendError> {
        let resp = self
            .client
            .post(format!("{}/v1/synthesize", self.base_url))
            .json(&SynthesizeRequest {
                text: text.to_owned(),
                voice_id: voice_id.to_owned(),
            })
            .send()
            .await
            .map_err(unavailable)?;
        let resp = check(resp).await?;
        let processing_ms = header_u64(&resp, HEADER_PROCESSING_MS)?;
        let duration_ms = header_u64(&resp, HEADER_DURATION_MS)?;
        let format: AudioFormat = resp
            .headers()
            .get(HEADER_AUDIO_FORMAT)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| BackendError::Protocol(format!("missing {HEADER_AUDIO_FORMAT} header")))?
            .parse()
            .map_err(|e: crate::protocol::CodecError| BackendError::Protocol(e.to_string()))?;
        let payload = resp.bytes().await.map_err(unavailable)?.to_vec();
        Ok(Synthesis {
            audio: AudioEnvelope::new(format, payload),
            processing_ms,
            duration_ms,
        })
    }

    async fn voices(&self) -> Result<Vec<VoiceInfo>, BackendError> {
        let resp = self
            .client
            .get(format!("{}/v1/voices", self.base_url))
            .send()
            .await
            .map_err(unavailable)?;
        let body: VoicesResponse = json(check(resp).await?).await?;
        Ok(body.voices)
    }
}

/// Agent behind the reply-webhook protocol: sender and message in, a list
/// of texts out.
pub struct RemoteAgent {
    client: Client,
    endpoint: String,
}

impl RemoteAgent {
    pub fn new(endpoint: &str) -> Result<Self, BackendError> {
        Ok(Self {
            client: client()?,
            endpoint: base(endpoint),
        })
    }
}

#[async_trait]
impl ConversationalAgent for RemoteAgent {
    async fn respond(&self, sender_id: &str, message: &str) -> Result<AgentReply, BackendError> {
        let started = Instant::now();
        let resp = self
            .client
            .post(format!("{}/v1/respond", self.endpoint))
            .json(&RespondRequest {
                sender_id: sender_id.to_owned(),
                message: message.to_owned(),
            })
            .send()
            .await
            .map_err(unavailable)?;
        let replies: Vec<ReplyText> = json(check(resp).await?).await?;
        Ok(AgentReply {
            replies: replies.into_iter().map(|r| r.text).collect(),
            processing_ms: started.elapsed().as_millis() as u64,
        })
    }
}
