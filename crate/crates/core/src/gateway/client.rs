//! Client side of the session protocol, over any frame transport.

use std::time::Instant;

use async_trait::async_trait;
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use crate::protocol::{
    frame_message, unframe_message, AgentInfo, AudioEnvelope, ClientMessage, ErrorInfo,
    FrameError, ServerMessage, SessionId, TurnNonce, TurnReport, VoiceInfo, WireFrame,
    PROTOCOL_VERSION,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("server error {:?}: {}", .0.code, .0.detail)]
    Server(ErrorInfo),
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error("no session; send hello first")]
    NoSession,
}

#[async_trait]
pub trait Transport: Send {
    async fn send(&mut self, frame: WireFrame) -> Result<(), ClientError>;
    /// `None` once the server has closed the connection.
    async fn recv(&mut self) -> Result<Option<WireFrame>, ClientError>;
}

pub struct InProcessTransport {
    tx: mpsc::Sender<WireFrame>,
    rx: mpsc::Receiver<WireFrame>,
}

impl InProcessTransport {
    pub fn new(tx: mpsc::Sender<WireFrame>, rx: mpsc::Receiver<WireFrame>) -> Self {
        Self { tx, rx }
    }
}

#[async_trait]
impl Transport for InProcessTransport {
    async fn send(&mut self, frame: WireFrame) -> Result<(), ClientError> {
        self.tx.send(frame).await.map_err(|_| ClientError::Closed)
    }

    async fn recv(&mut self) -> Result<Option<WireFrame>, ClientError> {
        Ok(self.rx.recv().await)
    }
}

pub struct WsTransport {
    stream: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl WsTransport {
    /// Connects to a gateway's `/session` endpoint, e.g. `ws://127.0.0.1:8080/session`.
    pub async fn connect(url: &str) -> Result<Self, ClientError> {
        let (stream, _) = tokio_tungstenite::connect_async(url)
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self { stream })
    }
}

#[async_trait]
impl Transport for WsTransport {
    async fn send(&mut self, frame: WireFrame) -> Result<(), ClientError> {
        let msg = match frame {
            WireFrame::Text(text) => Message::Text(text.into()),
            WireFrame::Binary(bytes) => Message::Binary(bytes.into()),
        };
        self.stream
            .send(msg)
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))
    }

    async fn recv(&mut self) -> Result<Option<WireFrame>, ClientError> {
        loop {
            return match self.stream.next().await {
                None | Some(Ok(Message::Close(_))) => Ok(None),
                Some(Ok(Message::Text(text))) => Ok(Some(WireFrame::Text(text.to_string()))),
                Some(Ok(Message::Binary(bytes))) => Ok(Some(WireFrame::Binary(bytes.to_vec()))),
                Some(Ok(_)) => continue,
                Some(Err(e)) => Err(ClientError::Transport(e.to_string())),
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedChunk {
    pub seq: u32,
    pub text: String,
    pub duration_ms: u64,
    pub audio: AudioEnvelope,
    /// Client-side arrival time, ms after the utterance was sent.
    pub arrived_ms: u64,
}

/// Everything the server sent for one utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TurnResult {
    pub turn: TurnNonce,
    pub transcript: Option<String>,
    pub stt_ms: u64,
    pub chunks: Vec<ReceivedChunk>,
    pub report: Option<TurnReport>,
    pub error: Option<ErrorInfo>,
    /// Message kinds in arrival order, including stray ones.
    pub kinds: Vec<&'static str>,
    /// Messages that belonged to no turn or to another turn.
    pub stray: Vec<ServerMessage>,
}

impl TurnResult {
    /// transcript, chunk_audio 1..n, turn_end, and nothing else.
    pub fn ordering_ok(&self) -> bool {
        if !self.stray.is_empty() || self.report.is_none() {
            return false;
        }
        let n = self.chunks.len();
        let mut expected = Vec::with_capacity(n + 2);
        if self.transcript.is_some() {
            expected.push("transcript");
        }
        expected.extend(std::iter::repeat_n("chunk_audio", n));
        expected.push("turn_end");
        self.kinds == expected
            && self
                .chunks
                .iter()
                .enumerate()
                .all(|(i, c)| c.seq as usize == i + 1)
    }

    pub fn reply_text(&self) -> String {
        self.chunks
            .iter()
            .map(|c| c.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub struct GatewayClient<T: Transport> {
    transport: T,
    max_frame_bytes: usize,
    session_id: Option<SessionId>,
    agent_id: String,
    voice_id: String,
    agents: Vec<AgentInfo>,
    voices: Vec<VoiceInfo>,
    next_turn: TurnNonce,
}

impl<T: Transport> GatewayClient<T> {
    pub fn new(transport: T, max_frame_bytes: usize) -> Self {
        Self {
            transport,
            max_frame_bytes,
            session_id: None,
            agent_id: String::new(),
            voice_id: String::new(),
            agents: Vec::new(),
            voices: Vec::new(),
            next_turn: 1,
        }
    }

    pub fn session_id(&self) -> Option<&SessionId> {
        self.session_id.as_ref()
    }

    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }

    pub fn voice_id(&self) -> &str {
        &self.voice_id
    }

    pub fn agents(&self) -> &[AgentInfo] {
        &self.agents
    }

    pub fn voices(&self) -> &[VoiceInfo] {
        &self.voices
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> Result<(), ClientError> {
        let frame = frame_message(msg, self.max_frame_bytes)?;
        self.transport.send(frame).await
    }

    pub async fn send_frame(&mut self, frame: WireFrame) -> Result<(), ClientError> {
        self.transport.send(frame).await
    }

    pub async fn recv(&mut self) -> Result<Option<ServerMessage>, ClientError> {
        match self.transport.recv().await? {
            None => Ok(None),
            Some(frame) => Ok(Some(unframe_message(&frame, usize::MAX)?)),
        }
    }

    async fn recv_some(&mut self) -> Result<ServerMessage, ClientError> {
        self.recv().await?.ok_or(ClientError::Closed)
    }

    /// Handshake: `hello`, then `session_ack` and `catalog`.
    pub async fn hello(&mut self) -> Result<SessionId, ClientError> {
        self.hello_with_version(PROTOCOL_VERSION).await
    }

    pub async fn hello_with_version(&mut self, version: u32) -> Result<SessionId, ClientError> {
        self.send(&ClientMessage::Hello {
            protocol_version: version,
        })
        .await?;
        match self.recv_some().await? {
            ServerMessage::SessionAck {
                session_id,
                agent_id,
                voice_id,
            } => {
                self.session_id = Some(session_id.clone());
                self.agent_id = agent_id;
                self.voice_id = voice_id;
            }
            ServerMessage::Error { code, detail, .. } => {
                return Err(ClientError::Server(ErrorInfo { code, detail }))
            }
            other => return Err(ClientError::Unexpected(other.kind().into())),
        }
        match self.recv_some().await? {
            ServerMessage::Catalog { agents, voices } => {
                self.agents = agents;
                self.voices = voices;
            }
            other => return Err(ClientError::Unexpected(other.kind().into())),
        }
        Ok(self.session_id.clone().expect("set above"))
    }

    fn sid(&self) -> Result<SessionId, ClientError> {
        self.session_id.clone().ok_or(ClientError::NoSession)
    }

    async fn await_ack(&mut self) -> Result<(), ClientError> {
        match self.recv_some().await? {
            ServerMessage::SessionAck {
                agent_id, voice_id, ..
            } => {
                self.agent_id = agent_id;
                self.voice_id = voice_id;
                Ok(())
            }
            ServerMessage::Error { code, detail, .. } => {
                Err(ClientError::Server(ErrorInfo { code, detail }))
            }
            other => Err(ClientError::Unexpected(other.kind().into())),
        }
    }

    pub async fn select_agent(&mut self, agent_id: &str) -> Result<(), ClientError> {
        let session_id = self.sid()?;
        self.send(&ClientMessage::SelectAgent {
            session_id,
            agent_id: agent_id.into(),
        })
        .await?;
        self.await_ack().await
    }

    pub async fn select_voice(&mut self, voice_id: &str) -> Result<(), ClientError> {
        let session_id = self.sid()?;
        self.send(&ClientMessage::SelectVoice {
            session_id,
            voice_id: voice_id.into(),
        })
        .await?;
        self.await_ack().await
    }

    fn take_nonce(&mut self) -> TurnNonce {
        let n = self.next_turn;
        self.next_turn += 1;
        n
    }

    /// Sends a text utterance without waiting for the reply.
    pub async fn send_text(&mut self, text: &str) -> Result<TurnNonce, ClientError> {
        let session_id = self.sid()?;
        let turn = self.take_nonce();
        self.send(&ClientMessage::UtteranceText {
            session_id,
            turn,
            text: text.into(),
        })
        .await?;
        Ok(turn)
    }

    /// Sends an audio utterance without waiting for the reply.
    pub async fn send_audio(&mut self, audio: AudioEnvelope) -> Result<TurnNonce, ClientError> {
        let session_id = self.sid()?;
        let turn = self.take_nonce();
        self.send(&ClientMessage::UtteranceAudio {
            session_id,
            turn,
            audio,
        })
        .await?;
        Ok(turn)
    }

    pub async fn say_text(&mut self, text: &str) -> Result<TurnResult, ClientError> {
        let started = Instant::now();
        let turn = self.send_text(text).await?;
        self.collect_turn(turn, started).await
    }

    pub async fn say_audio(&mut self, audio: AudioEnvelope) -> Result<TurnResult, ClientError> {
        let started = Instant::now();
        let turn = self.send_audio(audio).await?;
        self.collect_turn(turn, started).await
    }

    /// Reads messages until `turn_end` (or an error) for `turn`.
    pub async fn collect_turn(
        &mut self,
        turn: TurnNonce,
        started: Instant,
    ) -> Result<TurnResult, ClientError> {
        let mut result = TurnResult {
            turn,
            ..Default::default()
        };
        loop {
            let msg = self.recv_some().await?;
            result.kinds.push(msg.kind());
            match msg {
                ServerMessage::Transcript { turn: t, text, stt_ms } if t == turn => {
                    result.transcript = Some(text);
                    result.stt_ms = stt_ms;
                }
                ServerMessage::ChunkAudio {
                    turn: t,
                    seq,
                    text,
                    duration_ms,
                    audio,
                } if t == turn => result.chunks.push(ReceivedChunk {
                    seq,
                    text,
                    duration_ms,
                    audio,
                    arrived_ms: started.elapsed().as_millis() as u64,
                }),
                ServerMessage::TurnEnd {
                    turn: t,
                    report,
                    error,
                } if t == turn => {
                    result.report = Some(report);
                    result.error = error;
                    return Ok(result);
                }
                ServerMessage::Error {
                    code,
                    detail,
                    turn: Some(t),
                } if t == turn => {
                    result.error = Some(ErrorInfo { code, detail });
                    return Ok(result);
                }
                other => result.stray.push(other),
            }
        }
    }

    pub async fn bye(mut self) -> Result<(), ClientError> {
        let session_id = self.sid()?;
        self.send(&ClientMessage::Bye { session_id }).await?;
        // drain until the server closes
        while self.transport.recv().await?.is_some() {}
        Ok(())
    }
}
