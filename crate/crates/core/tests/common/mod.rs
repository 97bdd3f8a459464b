#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::oneshot;

use voxhub_core::agents::BuiltinAgentKind;
use voxhub_core::backends::server::{router, BackendServices};
use voxhub_core::backends::{
    BuiltinAgent, Catalog, ConversationalAgent, LatencyModel, MockStt, MockTts, TimeMode,
};
use voxhub_core::gateway::{self, Gateway, GatewayClient, WsTransport};
use voxhub_core::protocol::DEFAULT_MAX_FRAME_BYTES;

/// A running HTTP server that stops when dropped.
pub struct Served {
    pub addr: SocketAddr,
    _stop: oneshot::Sender<()>,
}

impl Served {
    pub fn http(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn ws(&self) -> String {
        format!("ws://{}/session", self.addr)
    }
}

async fn listener() -> TcpListener {
    TcpListener::bind("127.0.0.1:0").await.unwrap()
}

pub async fn serve_gateway(gw: Gateway) -> Served {
    let l = listener().await;
    let addr = l.local_addr().unwrap();
    let (stop, rx) = oneshot::channel::<()>();
    tokio::spawn(gateway::serve(gw, l, async move {
        let _ = rx.await;
    }));
    Served { addr, _stop: stop }
}

/// Mock STT, TTS (default voices) and the builtin agents behind HTTP.
pub async fn serve_mock_backends(stt: LatencyModel, tts: LatencyModel, agent: LatencyModel) -> Served {
    let mut agents: HashMap<String, Arc<dyn ConversationalAgent>> = HashMap::new();
    for (id, kind) in [
        ("triage", BuiltinAgentKind::Triage),
        ("anamnesis", BuiltinAgentKind::Anamnesis),
        ("echo", BuiltinAgentKind::Echo),
    ] {
        agents.insert(id.into(), Arc::new(BuiltinAgent::new(kind, agent.clone(), TimeMode::Wallclock)));
    }
    let services = BackendServices {
        stt: Some(Arc::new(MockStt::new(stt, TimeMode::Wallclock))),
        tts: Some(Arc::new(MockTts::new(Catalog::default_voices(), tts, TimeMode::Wallclock))),
        agents,
    };
    let l = listener().await;
    let addr = l.local_addr().unwrap();
    let (stop, rx) = oneshot::channel::<()>();
    tokio::spawn(async move {
        axum::serve(l, router(services))
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await
            .unwrap()
    });
    Served { addr, _stop: stop }
}

pub async fn ws_client(url: &str) -> GatewayClient<WsTransport> {
    GatewayClient::new(WsTransport::connect(url).await.unwrap(), DEFAULT_MAX_FRAME_BYTES)
}

/// An address nothing listens on.
pub async fn dead_url() -> String {
    let l = listener().await;
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}
