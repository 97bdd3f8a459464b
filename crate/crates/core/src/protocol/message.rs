//! Client↔gateway messages and their wire framing.
//!
//! Messages without audio travel as a single JSON text frame. Messages that
//! carry audio travel as a binary frame:
//!
//! ```text
//! u32 json_len | json | u32 audio_len | audio payload
//! ```
//!
//! so audio bytes are never text-escaped.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::audio::AudioEnvelope;
use super::report::TurnReport;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_MAX_FRAME_BYTES: usize = 4 * 1024 * 1024;

/// Client-assigned identifier for one utterance and its reply.
pub type TurnNonce = u64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl SessionId {
    pub fn generate() -> Self {
        SessionId(uuid::Uuid::new_v4().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        protocol_version: u32,
    },
    SelectAgent {
        session_id: SessionId,
        agent_id: String,
    },
    SelectVoice {
        session_id: SessionId,
        voice_id: String,
    },
    UtteranceAudio {
        session_id: SessionId,
        turn: TurnNonce,
        audio: AudioEnvelope,
    },
    UtteranceText {
        session_id: SessionId,
        turn: TurnNonce,
        text: String,
    },
    Bye {
        session_id: SessionId,
    },
}

const CLIENT_KINDS: &[&str] = &[
    "hello",
    "select_agent",
    "select_voice",
    "utterance_audio",
    "utterance_text",
    "bye",
];

impl ClientMessage {
    pub fn session_id(&self) -> Option<&SessionId> {
        match self {
            ClientMessage::Hello { .. } => None,
            ClientMessage::SelectAgent { session_id, .. }
            | ClientMessage::SelectVoice { session_id, .. }
            | ClientMessage::UtteranceAudio { session_id, .. }
            | ClientMessage::UtteranceText { session_id, .. }
            | ClientMessage::Bye { session_id } => Some(session_id),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::SelectAgent { .. } => "select_agent",
            ClientMessage::SelectVoice { .. } => "select_voice",
            ClientMessage::UtteranceAudio { .. } => "utterance_audio",
            ClientMessage::UtteranceText { .. } => "utterance_text",
            ClientMessage::Bye { .. } => "bye",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub agent_id: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceInfo {
    pub voice_id: String,
    pub display_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Busy,
    Protocol,
    UnknownSession,
    UnknownAgent,
    UnknownVoice,
    TurnInProgress,
    BadAudio,
    FrameTooLarge,
    TranscriptionFailed,
    BackendUnavailable,
    InvalidInput,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: ErrorCode,
    pub detail: String,
}

impl ErrorInfo {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent after `hello` and after every accepted control message.
    SessionAck {
        session_id: SessionId,
        agent_id: String,
        voice_id: String,
    },
    Catalog {
        agents: Vec<AgentInfo>,
        voices: Vec<VoiceInfo>,
    },
    Transcript {
        turn: TurnNonce,
        text: String,
        stt_ms: u64,
    },
    ChunkAudio {
        turn: TurnNonce,
        seq: u32,
        text: String,
        duration_ms: u64,
        audio: AudioEnvelope,
    },
    TurnEnd {
        turn: TurnNonce,
        report: TurnReport,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<ErrorInfo>,
    },
    Error {
        code: ErrorCode,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        turn: Option<TurnNonce>,
    },
}

const SERVER_KINDS: &[&str] = &[
    "session_ack",
    "catalog",
    "transcript",
    "chunk_audio",
    "turn_end",
    "error",
];

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>, turn: Option<TurnNonce>) -> Self {
        ServerMessage::Error {
            code,
            detail: detail.into(),
            turn,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServerMessage::SessionAck { .. } => "session_ack",
            ServerMessage::Catalog { .. } => "catalog",
            ServerMessage::Transcript { .. } => "transcript",
            ServerMessage::ChunkAudio { .. } => "chunk_audio",
            ServerMessage::TurnEnd { .. } => "turn_end",
            ServerMessage::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame of {size} bytes exceeds the {limit} byte limit")]
    FrameTooLarge { size: usize, limit: usize },
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// One transport-level message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireFrame {
    Text(String),
    Binary(Vec<u8>),
}

impl WireFrame {
    pub fn len(&self) -> usize {
        match self {
            WireFrame::Text(s) => s.len(),
            WireFrame::Binary(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A message type that can be framed: serde for the structured part, plus
/// access to the optional audio section.
pub trait Framed: Serialize + for<'de> Deserialize<'de> {
    const KINDS: &'static [&'static str];

    fn audio(&self) -> Option<&AudioEnvelope>;
    fn audio_mut(&mut self) -> Option<&mut AudioEnvelope>;
}

impl Framed for ClientMessage {
    const KINDS: &'static [&'static str] = CLIENT_KINDS;

    fn audio(&self) -> Option<&AudioEnvelope> {
        match self {
            ClientMessage::UtteranceAudio { audio, .. } => Some(audio),
            _ => None,
        }
    }

    fn audio_mut(&mut self) -> Option<&mut AudioEnvelope> {
        match self {
            ClientMessage::UtteranceAudio { audio, .. } => Some(audio),
            _ => None,
        }
    }
}

impl Framed for ServerMessage {
    const KINDS: &'static [&'static str] = SERVER_KINDS;

    fn audio(&self) -> Option<&AudioEnvelope> {
        match self {
            ServerMessage::ChunkAudio { audio, .. } => Some(audio),
            _ => None,
        }
    }

    fn audio_mut(&mut self) -> Option<&mut AudioEnvelope> {
        match self {
            ServerMessage::ChunkAudio { audio, .. } => Some(audio),
            _ => None,
        }
    }
}

pub fn frame_message<M: Framed>(msg: &M, max_bytes: usize) -> Result<WireFrame, FrameError> {
    let json = serde_json::to_string(msg).map_err(|e| FrameError::Protocol(e.to_string()))?;
    let frame = match msg.audio() {
        None => WireFrame::Text(json),
        Some(audio) => {
            let json_len = u32::try_from(json.len())
                .map_err(|_| FrameError::Protocol("header too long".into()))?;
            let audio_len = u32::try_from(audio.payload.len()).map_err(|_| {
                FrameError::FrameTooLarge {
                    size: audio.payload.len(),
                    limit: max_bytes,
                }
            })?;
            let mut out = Vec::with_capacity(8 + json.len() + audio.payload.len());
            out.extend_from_slice(&json_len.to_be_bytes());
            out.extend_from_slice(json.as_bytes());
            out.extend_from_slice(&audio_len.to_be_bytes());
            out.extend_from_slice(&audio.payload);
            WireFrame::Binary(out)
        }
    };
    check_size(frame.len(), max_bytes)?;
    Ok(frame)
}

pub fn unframe_message<M: Framed>(frame: &WireFrame, max_bytes: usize) -> Result<M, FrameError> {
    check_size(frame.len(), max_bytes)?;
    match frame {
        WireFrame::Text(json) => {
            let msg: M = parse_json(json.as_bytes())?;
            if msg.audio().is_some() {
                return Err(FrameError::Protocol(
                    "audio message sent without a binary section".into(),
                ));
            }
            Ok(msg)
        }
        WireFrame::Binary(bytes) => {
            let (json, rest) = split_section(bytes)?;
            let (payload, rest) = split_section(rest)?;
            if !rest.is_empty() {
                return Err(FrameError::Protocol(format!(
                    "{} trailing bytes after audio section",
                    rest.len()
                )));
            }
            let mut msg: M = parse_json(json)?;
            match msg.audio_mut() {
                Some(audio) => audio.payload = payload.to_vec(),
                None if payload.is_empty() => {}
                None => {
                    return Err(FrameError::Protocol(
                        "binary section on a message without audio".into(),
                    ))
                }
            }
            Ok(msg)
        }
    }
}

fn check_size(size: usize, limit: usize) -> Result<(), FrameError> {
    if size > limit {
        Err(FrameError::FrameTooLarge { size, limit })
    } else {
        Ok(())
    }
}

fn split_section(bytes: &[u8]) -> Result<(&[u8], &[u8]), FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::Protocol("truncated section length".into()));
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let body = &bytes[4..];
    if body.len() < len {
        return Err(FrameError::Protocol("truncated section".into()));
    }
    Ok(body.split_at(len))
}

fn parse_json<M: Framed>(bytes: &[u8]) -> Result<M, FrameError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| FrameError::Protocol(e.to_string()))?;
    match value.get("kind").and_then(|k| k.as_str()) {
        None => return Err(FrameError::Protocol("missing message kind".into())),
        Some(kind) if !M::KINDS.contains(&kind) => {
            return Err(FrameError::UnknownKind(kind.to_owned()))
        }
        Some(_) => {}
    }
    serde_json::from_value(value).map_err(|e| FrameError::Protocol(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::audio::{encode_sim_audio, AudioFormat};
    use crate::backends::VoiceDescriptor;

    fn sid() -> SessionId {
        SessionId("s-1".into())
    }

    fn round_trip_client(msg: ClientMessage) {
        let frame = frame_message(&msg, DEFAULT_MAX_FRAME_BYTES).unwrap();
        let back: ClientMessage = unframe_message(&frame, DEFAULT_MAX_FRAME_BYTES).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn select_agent_round_trips_as_text() {
        let msg = ClientMessage::SelectAgent {
            session_id: sid(),
            agent_id: "triage".into(),
        };
        let frame = frame_message(&msg, DEFAULT_MAX_FRAME_BYTES).unwrap();
        assert!(matches!(frame, WireFrame::Text(_)));
        round_trip_client(msg);
    }

    #[test]
    fn every_client_kind_round_trips() {
        let v = VoiceDescriptor::new("f1", "F", 400, 120);
        round_trip_client(ClientMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
        });
        round_trip_client(ClientMessage::SelectVoice {
            session_id: sid(),
            voice_id: "m1".into(),
        });
        round_trip_client(ClientMessage::UtteranceAudio {
            session_id: sid(),
            turn: 7,
            audio: encode_sim_audio("i have chest pain", &v).unwrap(),
        });
        round_trip_client(ClientMessage::UtteranceText {
            session_id: sid(),
            turn: 8,
            text: "hello".into(),
        });
        round_trip_client(ClientMessage::Bye { session_id: sid() });
    }

    #[test]
    fn audio_rides_in_binary_section() {
        let payload: Vec<u8> = (0..=255).collect();
        let msg = ServerMessage::ChunkAudio {
            turn: 1,
            seq: 1,
            text: "Hi.".into(),
            duration_ms: 520,
            audio: AudioEnvelope::opaque(payload.clone()),
        };
        let frame = frame_message(&msg, DEFAULT_MAX_FRAME_BYTES).unwrap();
        let WireFrame::Binary(bytes) = &frame else {
            panic!("expected binary frame");
        };
        // the raw payload appears verbatim at the tail of the frame
        assert!(bytes.ends_with(&payload));
        let back: ServerMessage = unframe_message(&frame, DEFAULT_MAX_FRAME_BYTES).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn oversize_frame_is_rejected() {
        let limit = 4 * 1024 * 1024;
        let msg = ClientMessage::UtteranceAudio {
            session_id: sid(),
            turn: 1,
            audio: AudioEnvelope::opaque(vec![0u8; 5 * 1024 * 1024]),
        };
        assert!(matches!(
            frame_message(&msg, limit),
            Err(FrameError::FrameTooLarge { .. })
        ));
        let raw = WireFrame::Binary(vec![0u8; limit + 1]);
        assert!(matches!(
            unframe_message::<ClientMessage>(&raw, limit),
            Err(FrameError::FrameTooLarge { .. })
        ));
    }

    #[test]
    fn maximal_frame_under_limit_round_trips() {
        let probe = ClientMessage::UtteranceAudio {
            session_id: sid(),
            turn: 1,
            audio: AudioEnvelope::opaque(Vec::new()),
        };
        let overhead = frame_message(&probe, usize::MAX).unwrap().len();
        let limit = 64 * 1024;
        let msg = ClientMessage::UtteranceAudio {
            session_id: sid(),
            turn: 1,
            audio: AudioEnvelope::opaque(vec![0xAB; limit - overhead]),
        };
        let frame = frame_message(&msg, limit).unwrap();
        assert_eq!(frame.len(), limit);
        let back: ClientMessage = unframe_message(&frame, limit).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn unknown_kind_is_protocol_error() {
        let frame = WireFrame::Text(r#"{"kind":"foo","session_id":"x"}"#.into());
        assert_eq!(
            unframe_message::<ClientMessage>(&frame, DEFAULT_MAX_FRAME_BYTES),
            Err(FrameError::UnknownKind("foo".into()))
        );
    }

    #[test]
    fn missing_fields_and_garbage_are_protocol_errors() {
        for raw in [
            r#"{"kind":"select_agent","session_id":"x"}"#,
            r#"{"session_id":"x"}"#,
            "not json",
        ] {
            let frame = WireFrame::Text(raw.into());
            assert!(matches!(
                unframe_message::<ClientMessage>(&frame, DEFAULT_MAX_FRAME_BYTES),
                Err(FrameError::Protocol(_))
            ));
        }
        let truncated = WireFrame::Binary(vec![0, 0, 0, 9, b'{']);
        assert!(unframe_message::<ClientMessage>(&truncated, DEFAULT_MAX_FRAME_BYTES).is_err());
    }

    #[test]
    fn audio_message_needs_binary_section() {
        let frame = WireFrame::Text(
            r#"{"kind":"utterance_audio","session_id":"x","turn":1,"audio":{"format":"SIMA1"}}"#
                .into(),
        );
        assert!(matches!(
            unframe_message::<ClientMessage>(&frame, DEFAULT_MAX_FRAME_BYTES),
            Err(FrameError::Protocol(_))
        ));
    }

    #[test]
    fn envelope_header_carries_format_only() {
        let json = serde_json::to_value(AudioEnvelope::new(AudioFormat::Sima1, vec![1, 2, 3]))
            .unwrap();
        assert_eq!(json, serde_json::json!({"format": "SIMA1"}));
    }
}
