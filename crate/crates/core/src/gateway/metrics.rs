use std::collections::BTreeMap;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::protocol::{SessionId, TurnReport};
use crate::stats::percentile;

#[derive(Debug, Default, Clone)]
struct Samples {
    first_audio_ms: Vec<u64>,
    masked: usize,
    threshold_exceeded: usize,
    failed: usize,
}

impl Samples {
    fn record(&mut self, report: &TurnReport, failed: bool) {
        if failed {
            self.failed += 1;
            return;
        }
        self.first_audio_ms.push(report.first_audio_ms);
        self.masked += usize::from(report.masked);
        self.threshold_exceeded += usize::from(report.threshold_exceeded);
    }

    fn aggregate(&self) -> TurnAggregate {
        let turns = self.first_audio_ms.len();
        if turns == 0 {
            return TurnAggregate {
                failed_turns: self.failed,
                ..Default::default()
            };
        }
        let mut sorted = self.first_audio_ms.clone();
        sorted.sort_unstable();
        TurnAggregate {
            turns,
            failed_turns: self.failed,
            mean_first_audio_ms: sorted.iter().sum::<u64>() as f64 / turns as f64,
            p95_first_audio_ms: percentile(&sorted, 95.0),
            fraction_masked: self.masked as f64 / turns as f64,
            threshold_exceeded_rate: self.threshold_exceeded as f64 / turns as f64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnAggregate {
    /// Completed turns; failed turns are counted separately.
    pub turns: usize,
    pub failed_turns: usize,
    pub mean_first_audio_ms: f64,
    pub p95_first_audio_ms: u64,
    pub fraction_masked: f64,
    pub threshold_exceeded_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub active_sessions: usize,
    pub global: TurnAggregate,
    pub sessions: BTreeMap<String, TurnAggregate>,
}

/// The only state shared between sessions.
#[derive(Debug, Default)]
pub struct Metrics {
    inner: Mutex<MetricsData>,
}

#[derive(Debug, Default)]
struct MetricsData {
    global: Samples,
    sessions: BTreeMap<SessionId, Samples>,
}

impl Metrics {
    pub fn record(&self, session: &SessionId, report: &TurnReport, failed: bool) {
        let mut data = self.inner.lock();
        data.global.record(report, failed);
        data.sessions
            .entry(session.clone())
            .or_default()
            .record(report, failed);
    }

    pub fn snapshot(&self, active_sessions: usize) -> MetricsSnapshot {
        let data = self.inner.lock();
        MetricsSnapshot {
            active_sessions,
            global: data.global.aggregate(),
            sessions: data
                .sessions
                .iter()
                .map(|(id, s)| (id.to_string(), s.aggregate()))
                .collect(),
        }
    }
}
