use serde::{Deserialize, Serialize};

use super::message::SessionId;
use crate::pipeline::Timeline;

/// Default response-time threshold for human turn-taking.
pub const DEFAULT_THRESHOLD_MS: u64 = 500;

/// Per-turn latency instrumentation, sent with `turn_end`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TurnReport {
    pub stt_ms: u64,
    pub agent_ms: u64,
    pub tts_ms_per_chunk: Vec<u64>,
    pub chunk_durations_ms: Vec<u64>,
    /// Arrival time of each chunk at the client, relative to utterance receipt.
    pub ready_ms: Vec<u64>,
    pub first_audio_ms: u64,
    pub gaps_ms: Vec<u64>,
    pub masked: bool,
    pub threshold_ms: u64,
    pub threshold_exceeded: bool,
}

impl TurnReport {
    pub fn new(
        stt_ms: u64,
        agent_ms: u64,
        tts_ms_per_chunk: Vec<u64>,
        timeline: &Timeline,
        durations_ms: Vec<u64>,
        threshold_ms: u64,
    ) -> Self {
        TurnReport {
            stt_ms,
            agent_ms,
            tts_ms_per_chunk,
            chunk_durations_ms: durations_ms,
            ready_ms: timeline.ready_ms.clone(),
            first_audio_ms: timeline.first_audio_ms,
            gaps_ms: timeline.gaps_ms.clone(),
            masked: timeline.masked,
            threshold_ms,
            threshold_exceeded: timeline.first_audio_ms > threshold_ms,
        }
    }

    /// Report for a turn that failed before any audio was produced.
    pub fn failed(stt_ms: u64, agent_ms: u64, threshold_ms: u64) -> Self {
        TurnReport {
            stt_ms,
            agent_ms,
            threshold_ms,
            ..Default::default()
        }
    }

    pub fn max_gap_ms(&self) -> u64 {
        self.gaps_ms.iter().copied().max().unwrap_or(0)
    }

    /// Checks the report's internal invariants.
    pub fn is_consistent(&self) -> bool {
        let n = self.chunk_durations_ms.len();
        self.tts_ms_per_chunk.len() == n
            && self.ready_ms.len() == n
            && self.gaps_ms.len() == n.saturating_sub(1)
            && self.masked == self.gaps_ms.iter().all(|&g| g == 0)
            && self.threshold_exceeded == (self.first_audio_ms > self.threshold_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    InTurn,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: SessionId,
    pub agent_id: String,
    pub voice_id: String,
    pub turn_index: u64,
    pub status: SessionStatus,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_flags_follow_timeline() {
        let tl = Timeline::from_ready(&[1240, 4640], &[400, 4000]).unwrap();
        let report = TurnReport::new(800, 100, vec![340, 3400], &tl, vec![400, 4000], 500);
        assert_eq!(report.first_audio_ms, 1240);
        assert_eq!(report.gaps_ms, vec![3000]);
        assert!(!report.masked);
        assert!(report.threshold_exceeded);
        assert_eq!(report.max_gap_ms(), 3000);
        assert!(report.is_consistent());
    }

    #[test]
    fn threshold_is_strict() {
        let tl = Timeline::from_ready(&[500], &[1000]).unwrap();
        let report = TurnReport::new(0, 0, vec![500], &tl, vec![1000], DEFAULT_THRESHOLD_MS);
        assert!(!report.threshold_exceeded);
        assert!(report.masked);
    }
}
