//! HTTP side of the backend protocol.
//!
//! | route | request | response |
//! |---|---|---|
//! | `POST /v1/transcribe` | audio bytes, `X-Audio-Format` | `{"text", "processing_ms"}` |
//! | `POST /v1/synthesize` | `{"text", "voice_id"}` | audio bytes, `X-Processing-Ms`, `X-Duration-Ms`, `X-Audio-Format` |
//! | `GET /v1/voices` | | `{"voices": [{"voice_id", "display_name"}]}` |
//! | `POST /agents/{agent_id}/v1/respond` | `{"sender_id", "message"}` | `[{"text"}]` |
//!
//! An agent's endpoint URL is the prefix before `/v1/respond`, so a real
//! reply-webhook server can be configured per agent.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{BackendError, ConversationalAgent, SpeechToText, TextToSpeech};
use crate::protocol::{AudioEnvelope, AudioFormat, VoiceInfo};

pub const HEADER_AUDIO_FORMAT: &str = "X-Audio-Format";
pub const HEADER_PROCESSING_MS: &str = "X-Processing-Ms";
pub const HEADER_DURATION_MS: &str = "X-Duration-Ms";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscribeResponse {
    pub text: String,
    pub processing_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesizeRequest {
    pub text: String,
    pub voice_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoicesResponse {
    pub voices: Vec<VoiceInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RespondRequest {
    pub sender_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplyText {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

/// Which services a backend server exposes.
#[derive(Clone, Default)]
pub struct BackendServices {
    pub stt: Option<Arc<dyn SpeechToText>>,
    pub tts: Option<Arc<dyn TextToSpeech>>,
    pub agents: HashMap<String, Arc<dyn ConversationalAgent>>,
}

struct ApiError(StatusCode, &'static str, String);

impl From<BackendError> for ApiError {
    fn from(e: BackendError) -> Self {
        let detail = e.to_string();
        match e {
            BackendError::InvalidInput(_) => ApiError(StatusCode::BAD_REQUEST, "invalid_input", detail),
            BackendError::UnknownVoice(v) => ApiError(StatusCode::NOT_FOUND, "unknown_voice", v),
            BackendError::UnknownAgent(a) => ApiError(StatusCode::NOT_FOUND, "unknown_agent", a),
            BackendError::TranscriptionFailed(_) => {
                ApiError(StatusCode::UNPROCESSABLE_ENTITY, "transcription_failed", detail)
            }
            BackendError::Unavailable(_) | BackendError::Protocol(_) => {
                ApiError(StatusCode::BAD_GATEWAY, "backend_unavailable", detail)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.1.to_owned(),
            detail: self.2,
        };
        (self.0, Json(body)).into_response()
    }
}

fn not_served(what: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "not_served", format!("{what} is not served here"))
}

async fn transcribe(
    State(svc): State<Arc<BackendServices>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<TranscribeResponse>, ApiError> {
    let stt = svc.stt.as_ref().ok_or_else(|| not_served("STT"))?;
    let format: AudioFormat = headers
        .get(HEADER_AUDIO_FORMAT)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("SIMA1")
        .parse()
        .map_err(|e: crate::protocol::CodecError| {
            ApiError(StatusCode::BAD_REQUEST, "invalid_input", e.to_string())
        })?;
    let t = stt
        .transcribe(&AudioEnvelope::new(format, body.to_vec()))
        .await?;
    Ok(Json(TranscribeResponse {
        text: t.text,
        processing_ms: t.processing_ms,
    }))
}

async fn synthesize(
    State(svc): State<Arc<BackendServices>>,
    Json(req): Json<SynthesizeRequest>,
) -> Result<Response, ApiError> {
    let tts = svc.tts.as_ref().ok_or_else(|| not_served("TTS"))?;
    let s = tts.synthesize(&req.text, &req.voice_id).await?;
    let mut headers = HeaderMap::new();
    headers.insert(HEADER_PROCESSING_MS, HeaderValue::from(s.processing_ms));
    headers.insert(HEADER_DURATION_MS, HeaderValue::from(s.duration_ms));
    headers.insert(
        HEADER_AUDIO_FORMAT,
        HeaderValue::from_static(s.audio.format.as_str()),
    );
    Ok((headers, s.audio.payload).into_response())
}

async fn voices(State(svc): State<Arc<BackendServices>>) -> Result<Json<VoicesResponse>, ApiError> {
    let tts = svc.tts.as_ref().ok_or_else(|| not_served("TTS"))?;
    Ok(Json(VoicesResponse {
        voices: tts.voices().await?,
    }))
}

async fn respond(
    State(svc): State<Arc<BackendServices>>,
    Path(agent_id): Path<String>,
    Json(req): Json<RespondRequest>,
) -> Result<Json<Vec<ReplyText>>, ApiError> {
    let agent = svc
        .agents
        .get(&agent_id)
        .ok_or(BackendError::UnknownAgent(agent_id))?;
    let reply = agent.respond(&req.sender_id, &req.message).await?;
    Ok(Json(
        reply
            .replies
            .into_iter()
            .map(|text| ReplyText { text })
            .collect(),
    ))
}

pub fn router(services: BackendServices) -> Router {
    Router::new()
        .route("/v1/transcribe", post(transcribe))
        .route("/v1/synthesize", post(synthesize))
        .route("/v1/voices", get(voices))
        .route("/agents/{agent_id}/v1/respond", post(respond))
        .with_state(Arc::new(services))
}
