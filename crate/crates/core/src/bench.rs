//! Concurrent-session load generator.
//!
//! Every session plays the same triage dialogue but names a different body
//! zone, so a reply that mentions another session's zone, or a transcript
//! that is not the session's own utterance, is counted as leakage.

use std::time::Instant;

use futures::future::join_all;
use serde::Serialize;

use crate::backends::{LatencyModel, Workload};
use crate::chunker::token_count;
use crate::gateway::{
    ClientError, Gateway, GatewayClient, GatewayConfig, Transport, TurnResult, WsTransport,
};
use crate::pipeline::{schedule, TurnSpec};
use crate::protocol::{compute_duration, encode_sim_audio, DEFAULT_MAX_FRAME_BYTES};
use crate::scenario::caller_voice;
use crate::stats::LatencyStats;

#[derive(Clone)]
pub enum BenchTarget {
    InProcess(Gateway),
    /// URL of a gateway's `/session` endpoint.
    WebSocket(String),
}

/// Backend latency models the target is known to run with, used to
/// predict chunk ready times.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendModels {
    pub stt: LatencyModel,
    pub agent: LatencyModel,
    pub tts: LatencyModel,
    pub transport_ms: u64,
}

impl BackendModels {
    pub fn from_config(config: &GatewayConfig) -> Self {
        BackendModels {
            stt: config.stt.latency.clone(),
            agent: config.agent_latency.clone(),
            tts: config.tts.latency.clone(),
            transport_ms: config.transport_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sessions: usize,
    pub turns: usize,
    pub agent_id: String,
    /// Without models no overhead is reported.
    pub models: Option<BackendModels>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub sessions: usize,
    pub turns_per_session: usize,
    pub completed_turns: usize,
    pub failed_turns: usize,
    /// Sessions that could not be opened or broke off.
    pub session_errors: Vec<String>,
    pub first_audio: Option<LatencyStats>,
    pub max_gap: Option<LatencyStats>,
    /// Largest lateness of a chunk against its predicted ready time.
    pub overhead: Option<LatencyStats>,
    pub leakage: usize,
    pub ordering_violations: usize,
    pub elapsed_ms: u64,
}

impl BenchReport {
    pub fn is_clean(&self) -> bool {
        self.session_errors.is_empty()
            && self.failed_turns == 0
            && self.leakage == 0
            && self.ordering_violations == 0
            && self.completed_turns == self.sessions * self.turns_per_session
    }
}

/// The utterances of session `zone`.
pub fn session_script(zone: usize, turns: usize) -> Vec<String> {
    let base = [
        "hello".to_owned(),
        format!("pain in zone {zone}"),
        "seven".to_owned(),
        "two hours".to_owned(),
        "yes".to_owned(),
    ];
    (0..turns)
        .map(|i| base.get(i).cloned().unwrap_or_else(|| "thank you".into()))
        .collect()
}

/// Zone numbers a reply talks about.
fn zones_in(text: &str) -> Vec<usize> {
    let words: Vec<&str> = text.split_whitespace().collect();
    words
        .windows(2)
        .filter(|w| w[0].eq_ignore_ascii_case("zone"))
        .filter_map(|w| w[1].trim_end_matches(|c: char| !c.is_ascii_digit()).parse().ok())
        .collect()
}

fn leaked(zone: usize, turn_index: usize, utterance: &str, result: &TurnResult) -> bool {
    if result.transcript.as_deref() != Some(utterance) {
        return true;
    }
    let reply = result.reply_text();
    let zones = zones_in(&reply);
    if zones.iter().any(|&z| z != zone) {
        return true;
    }
    // the symptom question echoes the zone back
    turn_index == 1 && result.error.is_none() && zones.is_empty()
}

fn overhead_ms(models: &BackendModels, utterance: &str, result: &TurnResult) -> Option<u64> {
    let report = result.report.as_ref()?;
    if result.error.is_some() || report.ready_ms.is_empty() {
        return None;
    }
    let caller = caller_voice();
    let stt = models.stt.evaluate(Workload {
        tokens: token_count(utterance) as u64,
        duration_ms: compute_duration(utterance, &caller),
    });
    let agent = models.agent.evaluate(Workload {
        tokens: token_count(utterance) as u64,
        duration_ms: 0,
    });
    let durations: Vec<u64> = result.chunks.iter().map(|c| c.duration_ms).collect();
    let synth = result
        .chunks
        .iter()
        .map(|c| {
            models.tts.evaluate(Workload {
                tokens: token_count(&c.text) as u64,
                duration_ms: c.duration_ms,
            })
        })
        .collect();
    let spec = TurnSpec::explicit(stt, agent, durations, synth).with_transport(models.transport_ms);
    let predicted = schedule(&spec).ok()?;
    report
        .ready_ms
        .iter()
        .zip(&predicted.ready_ms)
        .map(|(&measured, &r)| measured.saturating_sub(r))
        .max()
}

#[derive(Default)]
struct SessionResult {
    completed: usize,
    failed: usize,
    first_audio: Vec<u64>,
    max_gap: Vec<u64>,
    overhead: Vec<u64>,
    leakage: usize,
    ordering: usize,
    error: Option<String>,
}

async fn play<T: Transport>(
    mut client: GatewayClient<T>,
    zone: usize,
    cfg: &BenchConfig,
    out: &mut SessionResult,
) -> Result<(), ClientError> {
    client.hello().await?;
    client.select_agent(&cfg.agent_id).await?;
    let caller = caller_voice();
    for (i, utterance) in session_script(zone, cfg.turns).iter().enumerate() {
        let audio = encode_sim_audio(utterance, &caller)
            .map_err(|e| ClientError::Unexpected(e.to_string()))?;
        let result = client.say_audio(audio).await?;
        if leaked(zone, i, utterance, &result) {
            out.leakage += 1;
        }
        if result.error.is_some() {
            out.failed += 1;
            continue;
        }
        if !result.ordering_ok() {
            out.ordering += 1;
        }
        let report = result.report.as_ref().expect("turn_end carries a report");
        out.completed += 1;
        out.first_audio.push(report.first_audio_ms);
        out.max_gap.push(report.max_gap_ms());
        if let Some(models) = &cfg.models {
            out.overhead.extend(overhead_ms(models, utterance, &result));
        }
    }
    client.bye().await
}

async fn run_session(target: BenchTarget, zone: usize, cfg: BenchConfig) -> SessionResult {
    let mut out = SessionResult::default();
    let played = match target {
        BenchTarget::InProcess(gateway) => play(gateway.connect(), zone, &cfg, &mut out).await,
        BenchTarget::WebSocket(url) => match WsTransport::connect(&url).await {
            Ok(t) => play(GatewayClient::new(t, DEFAULT_MAX_FRAME_BYTES), zone, &cfg, &mut out).await,
            Err(e) => Err(e),
        },
    };
    if let Err(e) = played {
        out.error = Some(format!("session {zone}: {e}"));
    }
    out
}

/// Runs all sessions concurrently and aggregates their turns.
pub async fn run(target: BenchTarget, cfg: BenchConfig) -> BenchReport {
    let started = Instant::now();
    let handles: Vec<_> = (0..cfg.sessions)
        .map(|zone| tokio::spawn(run_session(target.clone(), zone, cfg.clone())))
        .collect();

    let mut all = SessionResult::default();
    let mut session_errors = Vec::new();
    for joined in join_all(handles).await {
        let r = match joined {
            Ok(r) => r,
            Err(e) => {
                session_errors.push(format!("session task failed: {e}"));
                continue;
            }
        };
        all.completed += r.completed;
        all.failed += r.failed;
        all.first_audio.extend(r.first_audio);
        all.max_gap.extend(r.max_gap);
        all.overhead.extend(r.overhead);
        all.leakage += r.leakage;
        all.ordering += r.ordering;
        session_errors.extend(r.error);
    }

    BenchReport {
        sessions: cfg.sessions,
        turns_per_session: cfg.turns,
        completed_turns: all.completed,
        failed_turns: all.failed,
        session_errors,
        first_audio: LatencyStats::from_samples(&all.first_audio),
        max_gap: LatencyStats::from_samples(&all.max_gap),
        overhead: LatencyStats::from_samples(&all.overhead),
        leakage: all.leakage,
        ordering_violations: all.ordering,
        elapsed_ms: started.elapsed().as_millis() as u64,
    }
}
