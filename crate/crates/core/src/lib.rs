//! Voice-conversation gateway.
//!
//! Clients send utterances; the gateway transcribes them, asks a
//! conversational agent for a reply, cuts the reply into punctuation-bounded
//! chunks and synthesizes the chunks one after another, pushing each chunk's
//! audio as soon as it is ready. While the client plays one chunk the next
//! is being synthesized, so synthesis latency hides inside playback.

pub mod agents;
pub mod bench;
pub mod backends;
pub mod chunker;
pub mod gateway;
pub mod pipeline;
pub mod protocol;
pub mod scenario;
pub mod stats;
