//! Wire-level types shared by the gateway, its clients and the backends.

mod audio;
mod message;
mod report;

pub use audio::{
    compute_duration, decode_sim_audio, encode_silence, encode_sim_audio, AudioEnvelope,
    AudioFormat, CodecError, SimAudio, DEFAULT_SAMPLE_RATE, SIMA1_MAGIC, SIMA1_VERSION,
};
pub use message::{
    frame_message, unframe_message, AgentInfo, ClientMessage, ErrorCode, ErrorInfo, FrameError,
    Framed, ServerMessage, SessionId, TurnNonce, VoiceInfo, WireFrame, DEFAULT_MAX_FRAME_BYTES,
    PROTOCOL_VERSION,
};
pub use report::{SessionState, SessionStatus, TurnReport, DEFAULT_THRESHOLD_MS};
