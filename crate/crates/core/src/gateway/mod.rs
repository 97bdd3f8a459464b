//! The connection server: the hub between clients and the STT, agent and
//! TTS backends.

mod client;
mod config;
mod http;
mod metrics;
mod session;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use tokio::sync::mpsc;

use crate::backends::{
    AgentRouter, BackendError, Catalog, MockStt, MockTts, RemoteStt, RemoteTts, SpeechToText,
    TextToSpeech,
};

pub use client::{
    ClientError, GatewayClient, InProcessTransport, ReceivedChunk, Transport, TurnResult,
    WsTransport,
};
pub use config::{ConfigError, GatewayConfig, SttConfig, TtsConfig, ENV_STT_URL, ENV_TTS_URL};
pub use http::{router, serve, VERSION};
pub use metrics::{Metrics, MetricsSnapshot, TurnAggregate};
pub use session::TurnContext;

pub use crate::backends::TimeMode;

/// Channel depth between a connection and its session driver.
const CHANNEL_DEPTH: usize = 64;

pub(crate) struct Shared {
    config: GatewayConfig,
    catalog: Catalog,
    stt: Arc<dyn SpeechToText>,
    tts: Arc<dyn TextToSpeech>,
    agents: AgentRouter,
    metrics: Metrics,
    active: AtomicUsize,
}

/// Releases a session slot on drop.
pub(crate) struct SessionSlot(Arc<Shared>);

impl Drop for SessionSlot {
    fn drop(&mut self) {
        self.0.active.fetch_sub(1, Ordering::AcqRel);
    }
}

impl Shared {
    fn try_acquire_slot(self: &Arc<Self>) -> Option<SessionSlot> {
        let max = self.config.max_sessions;
        self.active
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |n| (n < max).then_some(n + 1))
            .ok()
            .map(|_| SessionSlot(self.clone()))
    }
}

/// Cheap to clone; all clones serve the same sessions and metrics.
#[derive(Clone)]
pub struct Gateway {
    shared: Arc<Shared>,
}

impl Gateway {
    /// Builds mocks or remote clients as the configuration asks.
    pub fn new(config: GatewayConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let catalog = config.catalog()?;
        let mode = config.time_mode;
        let backend = |e: BackendError| ConfigError::Invalid(e.to_string());

        let stt: Arc<dyn SpeechToText> = match &config.stt.url {
            Some(url) => Arc::new(RemoteStt::new(url).map_err(backend)?),
            None => Arc::new(MockStt::new(config.stt.latency.clone(), mode)),
        };
        let tts: Arc<dyn TextToSpeech> = match &config.tts.url {
            Some(url) => Arc::new(RemoteTts::new(url).map_err(backend)?),
            None => {
                let mock = MockTts::new(catalog.voices().to_vec(), config.tts.latency.clone(), mode);
                match config.tts.max_concurrent {
                    Some(n) => Arc::new(mock.with_capacity(n)),
                    None => Arc::new(mock),
                }
            }
        };
        let agents = AgentRouter::from_catalog(&catalog, &config.agent_latency, mode).map_err(backend)?;
        Ok(Self::with_backends(config, catalog, stt, tts, agents))
    }

    /// Uses the given backends as they are.
    pub fn with_backends(
        config: GatewayConfig,
        catalog: Catalog,
        stt: Arc<dyn SpeechToText>,
        tts: Arc<dyn TextToSpeech>,
        agents: AgentRouter,
    ) -> Self {
        Gateway {
            shared: Arc::new(Shared {
                config,
                catalog,
                stt,
                tts,
                agents,
                metrics: Metrics::default(),
                active: AtomicUsize::new(0),
            }),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.shared.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.shared.catalog
    }

    pub fn active_sessions(&self) -> usize {
        self.shared.active.load(Ordering::Acquire)
    }

    pub fn metrics_snapshot(&self) -> MetricsSnapshot {
        self.shared.metrics.snapshot(self.active_sessions())
    }

    /// Serves one connection given as a pair of frame channels. Returns
    /// when the client leaves or the inbound channel closes.
    pub async fn serve_connection(
        &self,
        inbound: mpsc::Receiver<crate::protocol::WireFrame>,
        outbound: mpsc::Sender<crate::protocol::WireFrame>,
    ) {
        session::drive(self.shared.clone(), inbound, outbound).await
    }

    /// Opens an in-process connection. The session starts after `hello`.
    pub fn connect(&self) -> GatewayClient<InProcessTransport> {
        let (client_tx, server_rx) = mpsc::channel(CHANNEL_DEPTH);
        let (server_tx, client_rx) = mpsc::channel(CHANNEL_DEPTH);
        let gateway = self.clone();
        tokio::spawn(async move { gateway.serve_connection(server_rx, server_tx).await });
        GatewayClient::new(
            InProcessTransport::new(client_tx, client_rx),
            self.shared.config.max_frame_bytes,
        )
    }
}
