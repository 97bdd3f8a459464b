mod common;

use std::time::{Duration, Instant};

use voxhub_core::agents::{ANAMNESIS_WELCOME, REPROMPT_REPLY, TRIAGE_WELCOME};
use voxhub_core::backends::{AgentDescriptor, AgentEndpoint, LatencyModel, Workload};
use voxhub_core::chunker::token_count;
use voxhub_core::gateway::{ClientError, Gateway, GatewayConfig, MetricsSnapshot};
use voxhub_core::pipeline::{schedule, TurnSpec};
use voxhub_core::protocol::{
    compute_duration, encode_sim_audio, encode_silence, frame_message, AudioEnvelope, AudioFormat,
    ClientMessage, ErrorCode, ServerMessage, SessionId, WireFrame,
};
use voxhub_core::scenario::caller_voice;

fn fast_wallclock() -> GatewayConfig {
    // the default time mode is wall-clock
    let mut cfg = GatewayConfig::default();
    cfg.stt.latency = LatencyModel::fixed(20);
    cfg.agent_latency = LatencyModel::fixed(5);
    cfg.tts.latency = LatencyModel::proportional(0.05);
    cfg
}

fn sim_gateway() -> Gateway {
    Gateway::new(GatewayConfig::simulated()).unwrap()
}

fn say(text: &str) -> AudioEnvelope {
    encode_sim_audio(text, &caller_voice()).unwrap()
}

fn server_error(e: ClientError) -> ErrorCode {
    match e {
        ClientError::Server(info) => info.code,
        other => panic!("expected a server error, got {other}"),
    }
}

#[tokio::test]
async fn handshake_gives_defaults_and_catalog() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    assert_eq!(c.agent_id(), "anamnesis");
    assert_eq!(c.voice_id(), "f1");
    let agents: Vec<_> = c.agents().iter().map(|a| a.agent_id.as_str()).collect();
    let voices: Vec<_> = c.voices().iter().map(|v| v.voice_id.as_str()).collect();
    assert_eq!(agents, ["anamnesis", "triage"]);
    assert_eq!(voices, ["f1", "m1"]);
    assert_eq!(gw.active_sessions(), 1);
}

#[tokio::test]
async fn wrong_protocol_version_is_refused() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    let err = c.hello_with_version(99).await.unwrap_err();
    assert_eq!(server_error(err), ErrorCode::Protocol);
    assert_eq!(gw.active_sessions(), 0);
}

#[tokio::test]
async fn session_limit_answers_busy_and_frees_on_bye() {
    let mut cfg = GatewayConfig::simulated();
    cfg.max_sessions = 50;
    let gw = Gateway::new(cfg).unwrap();
    let mut open = Vec::new();
    for _ in 0..50 {
        let mut c = gw.connect();
        c.hello().await.unwrap();
        open.push(c);
    }
    let mut extra = gw.connect();
    assert_eq!(server_error(extra.hello().await.unwrap_err()), ErrorCode::Busy);
    assert_eq!(gw.active_sessions(), 50);

    open.pop().unwrap().bye().await.unwrap();
    assert_eq!(gw.active_sessions(), 49);
    let mut again = gw.connect();
    again.hello().await.unwrap();
}

#[tokio::test]
async fn selecting_agents_and_voices() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    c.select_agent("triage").await.unwrap();
    c.select_voice("m1").await.unwrap();
    assert_eq!((c.agent_id(), c.voice_id()), ("triage", "m1"));

    assert_eq!(server_error(c.select_agent("surgeon").await.unwrap_err()), ErrorCode::UnknownAgent);
    assert_eq!(server_error(c.select_voice("x9").await.unwrap_err()), ErrorCode::UnknownVoice);

    // the session survives and keeps its selection
    let turn = c.say_text("hello").await.unwrap();
    assert_eq!(turn.reply_text(), TRIAGE_WELCOME);
    let m1 = gw.catalog().voice("m1").unwrap().clone();
    for chunk in &turn.chunks {
        assert_eq!(chunk.duration_ms, compute_duration(&chunk.text, &m1));
    }
}

#[tokio::test]
async fn foreign_session_id_is_rejected() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    c.send(&ClientMessage::SelectAgent {
        session_id: SessionId("not-mine".into()),
        agent_id: "triage".into(),
    })
    .await
    .unwrap();
    match c.recv().await.unwrap().unwrap() {
        ServerMessage::Error { code, .. } => assert_eq!(code, ErrorCode::UnknownSession),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn messages_during_a_turn_are_rejected() {
    let mut cfg = fast_wallclock();
    cfg.stt.latency = LatencyModel::fixed(300);
    let gw = Gateway::new(cfg).unwrap();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    let sid = c.session_id().unwrap().clone();

    let started = Instant::now();
    let first = c.send_audio(say("hello")).await.unwrap();
    let second = c.send_text("again").await.unwrap();
    c.send(&ClientMessage::SelectVoice {
        session_id: sid,
        voice_id: "m1".into(),
    })
    .await
    .unwrap();

    let result = c.collect_turn(first, started).await.unwrap();
    assert!(result.error.is_none());
    // fourteen tokens: split in two with an inserted comma
    assert_eq!(result.chunks.len(), 2);
    assert_eq!(result.reply_text().replace(",", ""), ANAMNESIS_WELCOME.replace(",", ""));
    let rejected: Vec<_> = result
        .stray
        .iter()
        .map(|m| match m {
            ServerMessage::Error { code, turn, .. } => (*code, *turn),
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(
        rejected,
        [(ErrorCode::TurnInProgress, Some(second)), (ErrorCode::TurnInProgress, None)]
    );

    // voice is unchanged and the session is idle again
    let next = c.say_text("yes").await.unwrap();
    assert!(next.ordering_ok());
    assert_eq!(c.voice_id(), "f1");
}

#[tokio::test]
async fn oversize_frame_is_refused_and_session_continues() {
    let mut cfg = GatewayConfig::simulated();
    cfg.max_frame_bytes = 4096;
    let gw = Gateway::new(cfg).unwrap();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    let msg = ClientMessage::UtteranceText {
        session_id: c.session_id().unwrap().clone(),
        turn: 77,
        text: "word ".repeat(2000),
    };
    let frame = frame_message(&msg, usize::MAX).unwrap();
    assert!(frame.len() > 4096);
    c.send_frame(frame).await.unwrap();
    match c.recv().await.unwrap().unwrap() {
        ServerMessage::Error { code, .. } => assert_eq!(code, ErrorCode::FrameTooLarge),
        other => panic!("{other:?}"),
    }
    let turn = c.say_text("hello").await.unwrap();
    assert!(turn.ordering_ok());
}

#[tokio::test]
async fn garbage_frames_are_protocol_errors() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    c.send_frame(WireFrame::Text("{\"kind\":\"dance\"}".into())).await.unwrap();
    c.send_frame(WireFrame::Binary(vec![0, 0, 0, 9, 1])).await.unwrap();
    for _ in 0..2 {
        match c.recv().await.unwrap().unwrap() {
            ServerMessage::Error { code, .. } => assert_eq!(code, ErrorCode::Protocol),
            other => panic!("{other:?}"),
        }
    }
}

#[tokio::test]
async fn malformed_audio_is_bad_audio() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    let result = c
        .say_audio(AudioEnvelope::new(AudioFormat::Sima1, b"SIMA\x01junk".to_vec()))
        .await
        .unwrap();
    assert_eq!(result.error.unwrap().code, ErrorCode::BadAudio);
    assert!(result.report.is_none());
}

#[tokio::test]
async fn opaque_audio_fails_transcription() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    let result = c.say_audio(AudioEnvelope::opaque(vec![1, 2, 3])).await.unwrap();
    assert_eq!(result.error.unwrap().code, ErrorCode::TranscriptionFailed);
    assert!(result.chunks.is_empty());
    assert_eq!(result.kinds, ["turn_end"]);
    assert_eq!(gw.metrics_snapshot().global.failed_turns, 1);
}

#[tokio::test]
async fn silence_is_answered_with_a_reprompt() {
    let gw = sim_gateway();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    let result = c.say_audio(encode_silence("caller", 900).unwrap()).await.unwrap();
    assert_eq!(result.transcript.as_deref(), Some(""));
    assert_eq!(result.reply_text(), REPROMPT_REPLY);
    assert!(result.ordering_ok());
}

fn predicted(cfg: &GatewayConfig, utterance: Option<&str>, chunks: &[(String, u64)]) -> TurnSpec {
    let caller = caller_voice();
    let stt = utterance.map_or(0, |u| {
        cfg.stt.latency.evaluate(Workload {
            tokens: token_count(u) as u64,
            duration_ms: compute_duration(u, &caller),
        })
    });
    let message_tokens = utterance.map_or(0, token_count) as u64;
    let agent = cfg.agent_latency.evaluate(Workload {
        tokens: message_tokens,
        duration_ms: 0,
    });
    let synth = chunks
        .iter()
        .map(|(text, d)| {
            cfg.tts.latency.evaluate(Workload {
                tokens: token_count(text) as u64,
                duration_ms: *d,
            })
        })
        .collect();
    let durations = chunks.iter().map(|(_, d)| *d).collect();
    TurnSpec::explicit(stt, agent, durations, synth).with_transport(cfg.transport_ms)
}

#[tokio::test]
async fn simulated_turns_match_the_schedule_exactly() {
    let mut cfg = GatewayConfig::simulated();
    cfg.transport_ms = 15;
    let gw = Gateway::new(cfg.clone()).unwrap();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    c.select_agent("triage").await.unwrap();
    for utterance in ["hello", "a sharp pain in my lower back", "seven", "two days", "no"] {
        let result = c.say_audio(say(utterance)).await.unwrap();
        assert!(result.ordering_ok(), "{:?}", result.kinds);
        let chunks: Vec<_> = result.chunks.iter().map(|c| (c.text.clone(), c.duration_ms)).collect();
        let expected = schedule(&predicted(&cfg, Some(utterance), &chunks)).unwrap();
        let report = result.report.unwrap();
        assert_eq!(report.ready_ms, expected.ready_ms, "{utterance}");
        assert_eq!(report.first_audio_ms, expected.first_audio_ms);
        assert_eq!(report.gaps_ms, expected.gaps_ms);
        assert_eq!(report.masked, expected.masked);
        assert!(report.is_consistent());
    }
}

#[tokio::test]
async fn text_hello_to_triage() {
    let cfg = GatewayConfig::simulated();
    let gw = Gateway::new(cfg.clone()).unwrap();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    c.select_agent("triage").await.unwrap();
    let result = c.say_text("hello").await.unwrap();
    assert_eq!(result.transcript.as_deref(), Some("hello"));
    assert_eq!(result.stt_ms, 0);
    let texts: Vec<_> = result.chunks.iter().map(|c| c.text.as_str()).collect();
    assert_eq!(texts, ["Welcome to triage.", "What symptom brings you in today?"]);
    let report = result.report.unwrap();
    // 3 tokens: 1320 ms of audio, 1122 ms to synthesize
    assert_eq!(report.chunk_durations_ms, [1320, 2520]);
    assert_eq!(report.first_audio_ms, 100 + 1122);
    assert_eq!(report.gaps_ms, [2142 - 1320]);
    assert!(!report.masked);
}

#[tokio::test]
async fn sessions_keep_separate_dialogue_state() {
    let gw = sim_gateway();
    let mut a = gw.connect();
    let mut b = gw.connect();
    a.hello().await.unwrap();
    b.hello().await.unwrap();
    a.select_agent("triage").await.unwrap();
    b.select_agent("triage").await.unwrap();
    a.say_text("hello").await.unwrap();
    a.say_text("cough").await.unwrap();
    let b1 = b.say_text("hello").await.unwrap();
    assert_eq!(b1.reply_text(), TRIAGE_WELCOME);
    let a3 = a.say_text("nine").await.unwrap();
    assert!(a3.reply_text().starts_with("How long"));
}

#[tokio::test]
async fn unreachable_backend_ends_the_turn_with_an_error() {
    let mut cfg = fast_wallclock();
    cfg.stt.url = Some(common::dead_url().await);
    let gw = Gateway::new(cfg).unwrap();
    let mut c = gw.connect();
    c.hello().await.unwrap();
    let result = c.say_audio(say("hello")).await.unwrap();
    assert_eq!(result.error.unwrap().code, ErrorCode::BackendUnavailable);
    assert!(result.report.is_some());
    // text turns skip STT and still work
    assert!(c.say_text("hello").await.unwrap().error.is_none());
}

#[tokio::test]
async fn remote_backends_over_http() {
    let backends = common::serve_mock_backends(
        LatencyModel::fixed(10),
        LatencyModel::proportional(0.02),
        LatencyModel::fixed(1),
    )
    .await;
    let mut cfg = fast_wallclock();
    cfg.stt.url = Some(backends.http());
    cfg.tts.url = Some(backends.http());
    cfg.agents = vec![AgentDescriptor {
        agent_id: "triage".into(),
        display_name: "Remote triage".into(),
        endpoint: AgentEndpoint::Remote(format!("{}/agents/triage", backends.http())),
    }];
    let gw = Gateway::new(cfg).unwrap();
    let served = common::serve_gateway(gw).await;
    let mut c = common::ws_client(&served.ws()).await;
    c.hello().await.unwrap();
    assert_eq!(c.agent_id(), "triage");

    let mut last = None;
    for u in ["hello", "chest pain", "seven", "two hours", "yes"] {
        let r = c.say_audio(say(u)).await.unwrap();
        assert!(r.error.is_none(), "{:?}", r.error);
        assert!(r.ordering_ok());
        assert_eq!(r.transcript.as_deref(), Some(u));
        last = Some(r);
    }
    assert!(last.unwrap().reply_text().contains("colour code is red"));
    c.bye().await.unwrap();
}

#[tokio::test]
async fn http_endpoints() {
    let gw = sim_gateway();
    let served = common::serve_gateway(gw.clone()).await;
    let http = reqwest::Client::new();

    let health = http.get(format!("{}/healthz", served.http())).send().await.unwrap();
    assert!(health.status().is_success());
    assert!(health.text().await.unwrap().starts_with("voxhub "));

    let mut c = common::ws_client(&served.ws()).await;
    let sid = c.hello().await.unwrap();
    c.say_text("hi").await.unwrap();
    c.say_text("yes").await.unwrap();

    let snap: MetricsSnapshot = http
        .get(format!("{}/metrics", served.http()))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(snap.active_sessions, 1);
    assert_eq!(snap.global.turns, 2);
    assert_eq!(snap.sessions[sid.as_str()].turns, 2);

    c.bye().await.unwrap();
    // the slot is released once the server notices the close
    let deadline = Instant::now() + Duration::from_secs(2);
    while gw.active_sessions() != 0 && Instant::now() < deadline {
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(gw.active_sessions(), 0);
}
