use std::future::Future;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tracing::debug;

use super::{Gateway, CHANNEL_DEPTH};
use crate::protocol::WireFrame;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `/session` (WebSocket), `/healthz` and `/metrics`.
pub fn router(gateway: Gateway) -> Router {
    Router::new()
        .route("/session", get(session))
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .with_state(gateway)
}

pub async fn serve(
    gateway: Gateway,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn healthz() -> String {
    format!("voxhub {VERSION}\n")
}

async fn metrics(State(gateway): State<Gateway>) -> Response {
    Json(gateway.metrics_snapshot()).into_response()
}

async fn session(State(gateway): State<Gateway>, ws: WebSocketUpgrade) -> Response {
    // the gateway applies its own frame limit and answers with an error
    // message; the socket limit only has to be larger
    let socket_limit = (gateway.config().max_frame_bytes * 4).max(64 << 20);
    ws.max_message_size(socket_limit)
        .max_frame_size(socket_limit)
        .on_upgrade(move |socket| bridge(gateway, socket))
}

async fn bridge(gateway: Gateway, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (in_tx, in_rx) = mpsc::channel(CHANNEL_DEPTH);
    let (out_tx, mut out_rx) = mpsc::channel::<WireFrame>(CHANNEL_DEPTH);

    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            let frame = match msg {
                Message::Text(text) => WireFrame::Text(text.to_string()),
                Message::Binary(bytes) => WireFrame::Binary(bytes.to_vec()),
                Message::Close(_) => break,
                Message::Ping(_) | Message::Pong(_) => continue,
            };
            if in_tx.send(frame).await.is_err() {
                break;
            }
        }
    });
    let writer = tokio::spawn(async move {
        while let Some(frame) = out_rx.recv().await {
            let msg = match frame {
                WireFrame::Text(text) => Message::Text(text.into()),
                WireFrame::Binary(bytes) => Message::Binary(bytes.into()),
            };
            if sink.send(msg).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    gateway.serve_connection(in_rx, out_tx).await;
    reader.abort();
    let _ = writer.await;
    debug!("websocket closed");
}
