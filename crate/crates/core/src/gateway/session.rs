//! Per-connection session driver and the turn pipeline.
//!
//! A session reads client frames in a loop. An utterance spawns a turn task
//! that streams `transcript`, then each `chunk_audio` the moment its
//! synthesis finishes. The driver sends `turn_end` once the task is done.
//! While the turn runs the driver keeps reading, so a second utterance or a
//! control message is rejected at once instead of queueing behind the turn.

use std::sync::Arc;
use std::time::Instant;

use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tracing::{debug, warn};

use super::Shared;
use crate::agents::REPROMPT_MESSAGE;
use crate::backends::{BackendError, TimeMode};
use crate::chunker::chunk_response;
use crate::pipeline::Timeline;
use crate::protocol::{
    decode_sim_audio, frame_message, unframe_message, AudioEnvelope, AudioFormat, ClientMessage,
    ErrorCode, ErrorInfo, FrameError, ServerMessage, SessionId, SessionState, SessionStatus,
    TurnNonce, TurnReport, WireFrame, PROTOCOL_VERSION,
};

/// Frames the gateway's messages onto the outbound channel.
#[derive(Clone)]
pub(crate) struct Outbox {
    tx: mpsc::Sender<WireFrame>,
    max_frame_bytes: usize,
}

impl Outbox {
    /// Returns false once the client is gone.
    async fn send(&self, msg: ServerMessage) -> bool {
        match frame_message(&msg, self.max_frame_bytes) {
            Ok(frame) => self.tx.send(frame).await.is_ok(),
            Err(e) => {
                warn!(kind = msg.kind(), error = %e, "dropping unframeable message");
                true
            }
        }
    }

    async fn error(&self, code: ErrorCode, detail: impl Into<String>, turn: Option<TurnNonce>) -> bool {
        self.send(ServerMessage::error(code, detail, turn)).await
    }
}

fn frame_error_code(e: &FrameError) -> ErrorCode {
    match e {
        FrameError::FrameTooLarge { .. } => ErrorCode::FrameTooLarge,
        FrameError::UnknownKind(_) | FrameError::Protocol(_) => ErrorCode::Protocol,
    }
}

enum Utterance {
    Audio(AudioEnvelope),
    Text(String),
}

struct TurnInput {
    session_id: SessionId,
    agent_id: String,
    voice_id: String,
    turn: TurnNonce,
    utterance: Utterance,
}

struct TurnOutcome {
    report: TurnReport,
    error: Option<ErrorInfo>,
}

pub(crate) async fn drive(
    shared: Arc<Shared>,
    mut inbound: mpsc::Receiver<WireFrame>,
    outbound: mpsc::Sender<WireFrame>,
) {
    let out = Outbox {
        tx: outbound,
        max_frame_bytes: shared.config.max_frame_bytes,
    };
    let max_frame = shared.config.max_frame_bytes;

    let Some(first) = inbound.recv().await else {
        return;
    };
    match unframe_message::<ClientMessage>(&first, max_frame) {
        Ok(ClientMessage::Hello { protocol_version }) if protocol_version == PROTOCOL_VERSION => {}
        Ok(ClientMessage::Hello { protocol_version }) => {
            out.error(
                ErrorCode::Protocol,
                format!("unsupported protocol version {protocol_version}, expected {PROTOCOL_VERSION}"),
                None,
            )
            .await;
            return;
        }
        Ok(other) => {
            out.error(ErrorCode::Protocol, format!("expected hello, got {}", other.kind()), None)
                .await;
            return;
        }
        Err(e) => {
            out.error(frame_error_code(&e), e.to_string(), None).await;
            return;
        }
    }

    let Some(_slot) = shared.try_acquire_slot() else {
        out.error(
            ErrorCode::Busy,
            format!("session limit of {} reached", shared.config.max_sessions),
            None,
        )
        .await;
        return;
    };
    let (Some(agent), Some(voice)) = (shared.catalog.agents().first(), shared.catalog.voices().first())
    else {
        out.error(ErrorCode::Internal, "catalog has no agents or no voices", None)
            .await;
        return;
    };

    let mut state = SessionState {
        session_id: SessionId::generate(),
        agent_id: agent.agent_id.clone(),
        voice_id: voice.voice_id.clone(),
        turn_index: 0,
        status: SessionStatus::Idle,
    };
    debug!(session = %state.session_id, "session opened");
    if !out.send(ack(&state)).await
        || !out
            .send(ServerMessage::Catalog {
                agents: shared.catalog.agent_infos(),
                voices: shared.catalog.voice_infos(),
            })
            .await
    {
        return;
    }

    let mut turn: Option<(JoinHandle<TurnOutcome>, TurnNonce)> = None;
    loop {
        tokio::select! {
            biased;
            finished = async { (&mut turn.as_mut().unwrap().0).await }, if turn.is_some() => {
                let (_, nonce) = turn.take().expect("guarded by the branch condition");
                let outcome = finished.unwrap_or_else(|e| {
                    warn!(session = %state.session_id, error = %e, "turn task failed");
                    TurnOutcome {
                        report: TurnReport::failed(0, 0, shared.config.threshold_ms),
                        error: Some(ErrorInfo::new(ErrorCode::Internal, "turn aborted")),
                    }
                });
                shared
                    .metrics
                    .record(&state.session_id, &outcome.report, outcome.error.is_some());
                // idle before turn_end leaves, so the client may speak again at once
                state.status = SessionStatus::Idle;
                state.turn_index += 1;
                let end = ServerMessage::TurnEnd {
                    turn: nonce,
                    report: outcome.report,
                    error: outcome.error,
                };
                if !out.send(end).await {
                    break;
                }
            }
            frame = inbound.recv() => {
                let Some(frame) = frame else { break };
                let keep_going = handle_frame(&shared, &out, &mut state, &mut turn, frame).await;
                if !keep_going {
                    break;
                }
            }
        }
    }

    if let Some((handle, _)) = turn.take() {
        handle.abort();
    }
    state.status = SessionStatus::Closed;
    shared.agents.forget(state.session_id.as_str());
    debug!(session = %state.session_id, turns = state.turn_index, "session closed");
}

fn ack(state: &SessionState) -> ServerMessage {
    ServerMessage::SessionAck {
        session_id: state.session_id.clone(),
        agent_id: state.agent_id.clone(),
        voice_id: state.voice_id.clone(),
    }
}

/// Returns false when the session should end.
async fn handle_frame(
    shared: &Arc<Shared>,
    out: &Outbox,
    state: &mut SessionState,
    turn: &mut Option<(JoinHandle<TurnOutcome>, TurnNonce)>,
    frame: WireFrame,
) -> bool {
    let msg = match unframe_message::<ClientMessage>(&frame, shared.config.max_frame_bytes) {
        Ok(msg) => msg,
        Err(e) => return out.error(frame_error_code(&e), e.to_string(), None).await,
    };
    match msg.session_id() {
        None => {
            return out
                .error(ErrorCode::Protocol, "session already open", None)
                .await
        }
        Some(id) if *id != state.session_id => {
            return out
                .error(ErrorCode::UnknownSession, format!("unknown session {id}"), None)
                .await
        }
        Some(_) => {}
    }
    let in_turn = state.status == SessionStatus::InTurn;

    match msg {
        ClientMessage::Hello { .. } => unreachable!("hello has no session id"),
        ClientMessage::Bye { .. } => false,
        ClientMessage::SelectAgent { agent_id, .. } => {
            if in_turn {
                return busy_turn(out, turn, None).await;
            }
            if shared.catalog.agent(&agent_id).is_none() {
                return out
                    .error(ErrorCode::UnknownAgent, format!("unknown agent {agent_id:?}"), None)
                    .await;
            }
            state.agent_id = agent_id;
            out.send(ack(state)).await
        }
        ClientMessage::SelectVoice { voice_id, .. } => {
            if in_turn {
                return busy_turn(out, turn, None).await;
            }
            if shared.catalog.voice(&voice_id).is_none() {
                return out
                    .error(ErrorCode::UnknownVoice, format!("unknown voice {voice_id:?}"), None)
                    .await;
            }
            state.voice_id = voice_id;
            out.send(ack(state)).await
        }
        ClientMessage::UtteranceAudio { turn: nonce, audio, .. } => {
            if in_turn {
                return busy_turn(out, turn, Some(nonce)).await;
            }
            if audio.format == AudioFormat::Sima1 {
                if let Err(e) = decode_sim_audio(&audio) {
                    return out.error(ErrorCode::BadAudio, e.to_string(), Some(nonce)).await;
                }
            }
            start_turn(shared, out, state, turn, nonce, Utterance::Audio(audio));
            true
        }
        ClientMessage::UtteranceText { turn: nonce, text, .. } => {
            if in_turn {
                return busy_turn(out, turn, Some(nonce)).await;
            }
            start_turn(shared, out, state, turn, nonce, Utterance::Text(text));
            true
        }
    }
}

async fn busy_turn(
    out: &Outbox,
    turn: &Option<(JoinHandle<TurnOutcome>, TurnNonce)>,
    rejected: Option<TurnNonce>,
) -> bool {
    let running = turn.as_ref().map(|(_, n)| *n);
    out.error(
        ErrorCode::TurnInProgress,
        format!("turn {running:?} is still in progress"),
        rejected,
    )
    .await
}

fn start_turn(
    shared: &Arc<Shared>,
    out: &Outbox,
    state: &mut SessionState,
    turn: &mut Option<(JoinHandle<TurnOutcome>, TurnNonce)>,
    nonce: TurnNonce,
    utterance: Utterance,
) {
    state.status = SessionStatus::InTurn;
    let input = TurnInput {
        session_id: state.session_id.clone(),
        agent_id: state.agent_id.clone(),
        voice_id: state.voice_id.clone(),
        turn: nonce,
        utterance,
    };
    let handle = tokio::spawn(run_turn(shared.clone(), input, out.clone()));
    *turn = Some((handle, nonce));
}

/// Millisecond clock for one turn, starting at utterance receipt.
enum TurnClock {
    Wall(Instant),
    Simulated(u64),
}

impl TurnClock {
    fn start(mode: TimeMode) -> Self {
        match mode {
            TimeMode::Wallclock => TurnClock::Wall(Instant::now()),
            TimeMode::Simulated => TurnClock::Simulated(0),
        }
    }

    fn now(&self) -> u64 {
        match self {
            TurnClock::Wall(start) => start.elapsed().as_millis() as u64,
            TurnClock::Simulated(t) => *t,
        }
    }

    /// Accounts for a backend's reported processing time. The wall clock
    /// already moved while the backend worked.
    fn advance(&mut self, ms: u64) {
        if let TurnClock::Simulated(t) = self {
            *t += ms;
        }
    }
}

/// Stage timestamps of one turn, in ms since the utterance arrived.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TurnContext {
    pub turn: TurnNonce,
    pub transcript_ready: u64,
    pub agent_ready: u64,
    pub synth_start: Vec<u64>,
    pub synth_end: Vec<u64>,
    /// When each chunk reached the client.
    pub chunk_ready: Vec<u64>,
}

impl TurnContext {
    fn report(&self, durations_ms: Vec<u64>, threshold_ms: u64) -> TurnReport {
        let tts_ms: Vec<u64> = self
            .synth_start
            .iter()
            .zip(&self.synth_end)
            .map(|(s, e)| e - s)
            .collect();
        let stt_ms = self.transcript_ready;
        let agent_ms = self.agent_ready - self.transcript_ready;
        match Timeline::from_ready(&self.chunk_ready, &durations_ms) {
            Ok(timeline) => {
                TurnReport::new(stt_ms, agent_ms, tts_ms, &timeline, durations_ms, threshold_ms)
            }
            Err(_) => TurnReport::failed(stt_ms, agent_ms, threshold_ms),
        }
    }
}

fn backend_error_code(e: &BackendError) -> ErrorCode {
    match e {
        BackendError::InvalidInput(_) => ErrorCode::InvalidInput,
        BackendError::UnknownVoice(_) => ErrorCode::UnknownVoice,
        BackendError::UnknownAgent(_) => ErrorCode::UnknownAgent,
        BackendError::TranscriptionFailed(_) => ErrorCode::TranscriptionFailed,
        BackendError::Unavailable(_) | BackendError::Protocol(_) => ErrorCode::BackendUnavailable,
    }
}

async fn run_turn(shared: Arc<Shared>, input: TurnInput, out: Outbox) -> TurnOutcome {
    let cfg = &shared.config;
    let mut clock = TurnClock::start(cfg.time_mode);
    let mut ctx = TurnContext {
        turn: input.turn,
        ..Default::default()
    };
    let mut durations = Vec::new();

    let fail = |ctx: &TurnContext, durations: Vec<u64>, err: ErrorInfo| TurnOutcome {
        report: ctx.report(durations, cfg.threshold_ms),
        error: Some(err),
    };

    let transcript = match &input.utterance {
        Utterance::Text(text) => text.clone(),
        Utterance::Audio(audio) => match shared.stt.transcribe(audio).await {
            Ok(t) => {
                clock.advance(t.processing_ms);
                t.text
            }
            Err(e) => {
                ctx.transcript_ready = clock.now();
                ctx.agent_ready = ctx.transcript_ready;
                return fail(&ctx, durations, ErrorInfo::new(backend_error_code(&e), e.to_string()));
            }
        },
    };
    ctx.transcript_ready = clock.now();
    out.send(ServerMessage::Transcript {
        turn: input.turn,
        text: transcript.clone(),
        stt_ms: ctx.transcript_ready,
    })
    .await;

    let message = if transcript.trim().is_empty() {
        REPROMPT_MESSAGE
    } else {
        transcript.as_str()
    };
    let reply = shared
        .agents
        .respond(&input.agent_id, input.session_id.as_str(), message)
        .await;
    let reply = match reply {
        Ok(r) => {
            clock.advance(r.processing_ms);
            r
        }
        Err(e) => {
            ctx.agent_ready = clock.now();
            return fail(&ctx, durations, ErrorInfo::new(backend_error_code(&e), e.to_string()));
        }
    };
    let chunks = chunk_response(&reply.replies.join(" "), &cfg.chunking);
    ctx.agent_ready = clock.now();
    if chunks.is_empty() {
        let err = ErrorInfo::new(ErrorCode::BackendUnavailable, "agent returned an empty reply");
        return fail(&ctx, durations, err);
    }

    for (i, chunk) in chunks.iter().enumerate() {
        ctx.synth_start.push(clock.now());
        let synth = match shared.tts.synthesize(chunk.text(), &input.voice_id).await {
            Ok(s) => s,
            Err(e) => {
                ctx.synth_start.pop();
                let err = ErrorInfo::new(backend_error_code(&e), e.to_string());
                return fail(&ctx, durations, err);
            }
        };
        clock.advance(synth.processing_ms);
        ctx.synth_end.push(clock.now());
        durations.push(synth.duration_ms);
        let sent = out
            .send(ServerMessage::ChunkAudio {
                turn: input.turn,
                seq: i as u32 + 1,
                text: chunk.text().to_owned(),
                duration_ms: synth.duration_ms,
                audio: synth.audio,
            })
            .await;
        let ready = match clock {
            TurnClock::Simulated(t) => t + cfg.transport_ms,
            TurnClock::Wall(_) => clock.now(),
        };
        ctx.chunk_ready.push(ready);
        if !sent {
            break;
        }
    }

    TurnOutcome {
        report: ctx.report(durations, cfg.threshold_ms),
        error: None,
    }
}
