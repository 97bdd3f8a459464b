//! SIMA1: a deterministic stand-in for real audio.
//!
//! A SIMA1 payload carries the text that was "spoken", the voice that spoke
//! it, and the playback duration given by the voice's duration model. This
//! makes STT∘TTS round trips exact and lets the scheduler reason about audio
//! length without any signal processing.
//!
//! Byte layout (all integers big-endian):
//!
//! ```text
//! "SIMA" | 0x01 | u16 voice_len | voice_id | u32 duration_ms | u32 sample_rate | u32 text_len | text
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::VoiceDescriptor;
use crate::chunker::token_count;

pub const SIMA1_MAGIC: &[u8; 4] = b"SIMA";
pub const SIMA1_VERSION: u8 = 0x01;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

const HEADER_FIXED_LEN: usize = 4 + 1 + 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported audio format {0}")]
    UnsupportedFormat(AudioFormat),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AudioFormat {
    #[serde(rename = "SIMA1")]
    Sima1,
    #[serde(rename = "OPAQUE")]
    Opaque,
}

impl AudioFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            AudioFormat::Sima1 => "SIMA1",
            AudioFormat::Opaque => "OPAQUE",
        }
    }
}

impl fmt::Display for AudioFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AudioFormat {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "SIMA1" => Ok(AudioFormat::Sima1),
            "OPAQUE" => Ok(AudioFormat::Opaque),
            other => Err(CodecError::InvalidInput(format!(
                "unknown audio format tag {other:?}"
            ))),
        }
    }
}

/// Tagged audio bytes as they travel between client, gateway and backends.
///
/// Only the format tag appears in the structured part of a message; the
/// payload rides in the binary section of the frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioEnvelope {
    pub format: AudioFormat,
    #[serde(skip)]
    pub payload: Vec<u8>,
}

impl AudioEnvelope {
    pub fn new(format: AudioFormat, payload: Vec<u8>) -> Self {
        Self { format, payload }
    }

    pub fn opaque(payload: Vec<u8>) -> Self {
        Self::new(AudioFormat::Opaque, payload)
    }
}

/// Decoded contents of a SIMA1 payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimAudio {
    pub voice_id: String,
    pub text: String,
    pub duration_ms: u32,
    pub sample_rate_nominal: u32,
}

impl SimAudio {
    pub fn is_silence(&self) -> bool {
        self.text.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CodecError> {
        let voice = self.voice_id.as_bytes();
        let text = self.text.as_bytes();
        let voice_len = u16::try_from(voice.len())
            .map_err(|_| CodecError::InvalidInput("voice_id longer than 65535 bytes".into()))?;
        let text_len = u32::try_from(text.len())
            .map_err(|_| CodecError::InvalidInput("text longer than u32::MAX bytes".into()))?;

        let mut out = Vec::with_capacity(HEADER_FIXED_LEN + voice.len() + 12 + text.len());
        out.extend_from_slice(SIMA1_MAGIC);
        out.push(SIMA1_VERSION);
        out.extend_from_slice(&voice_len.to_be_bytes());
        out.extend_from_slice(voice);
        out.extend_from_slice(&self.duration_ms.to_be_bytes());
        out.extend_from_slice(&self.sample_rate_nominal.to_be_bytes());
        out.extend_from_slice(&text_len.to_be_bytes());
        out.extend_from_slice(text);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != SIMA1_MAGIC {
            return Err(malformed("bad magic"));
        }
        let version = cur.take(1)?[0];
        if version != SIMA1_VERSION {
            return Err(malformed(format!("unsupported version {version:#04x}")));
        }
        let voice_len = u16::from_be_bytes(cur.array()?) as usize;
        let voice_id = utf8(cur.take(voice_len)?, "voice_id")?;
        let duration_ms = u32::from_be_bytes(cur.array()?);
        let sample_rate_nominal = u32::from_be_bytes(cur.array()?);
        let text_len = u32::from_be_bytes(cur.array()?) as usize;
        let text = utf8(cur.take(text_len)?, "text")?;
        if cur.pos != bytes.len() {
            return Err(malformed(format!(
                "{} trailing bytes",
                bytes.len() - cur.pos
            )));
        }
        if text.is_empty() && duration_ms == 0 {
            return Err(malformed("empty text without silence duration"));
        }
        Ok(SimAudio {
            voice_id,
            text,
            duration_ms,
            sample_rate_nominal,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| malformed(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut buf = [0u8; N];
        buf.copy_from_slice(self.take(N)?);
        Ok(buf)
    }
}

fn malformed(detail: impl Into<String>) -> CodecError {
    CodecError::MalformedPayload(detail.into())
}

fn utf8(bytes: &[u8], field: &str) -> Result<String, CodecError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| malformed(format!("{field} is not UTF-8")))
}

/// Linear duration model: `base_ms + ms_per_token × tokens`.
pub fn compute_duration(text: &str, voice: &VoiceDescriptor) -> u64 {
    voice.base_ms + voice.ms_per_token * token_count(text) as u64
}

pub fn encode_sim_audio(text: &str, voice: &VoiceDescriptor) -> Result<AudioEnvelope, CodecError> {
    if text.trim().is_empty() {
        return Err(CodecError::InvalidInput("text is empty".into()));
    }
    let duration_ms = u32::try_from(compute_duration(text, voice))
        .map_err(|_| CodecError::InvalidInput("duration exceeds u32 milliseconds".into()))?;
    let audio = SimAudio {
        voice_id: voice.voice_id.clone(),
        text: text.to_owned(),
        duration_ms,
        sample_rate_nominal: DEFAULT_SAMPLE_RATE,
    };
    Ok(AudioEnvelope::new(AudioFormat::Sima1, audio.to_bytes()?))
}

/// A silent recording: no text, positive duration.
pub fn encode_silence(voice_id: &str, duration_ms: u32) -> Result<AudioEnvelope, CodecError> {
    if duration_ms == 0 {
        return Err(CodecError::InvalidInput("silence needs a positive duration".into()));
    }
    let audio = SimAudio {
        voice_id: voice_id.to_owned(),
        text: String::new(),
        duration_ms,
        sample_rate_nominal: DEFAULT_SAMPLE_RATE,
    };
    Ok(AudioEnvelope::new(AudioFormat::Sima1, audio.to_bytes()?))
}

pub fn decode_sim_audio(env: &AudioEnvelope) -> Result<SimAudio, CodecError> {
    match env.format {
        AudioFormat::Sima1 => SimAudio::from_bytes(&env.payload),
        AudioFormat::Opaque => Err(CodecError::UnsupportedFormat(AudioFormat::Opaque)),
    }
}
