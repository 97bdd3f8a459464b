//! Discrete-event model of one turn.
//!
//! STT runs, then the agent, then each chunk is synthesized strictly after
//! the previous one. A chunk reaches the client `transport_ms` after its
//! synthesis finishes and plays as soon as it has arrived and the previous
//! chunk has finished playing:
//!
//! ```text
//! r_i = s + a + Σ_{j≤i} p_j + t
//! b_1 = r_1,  b_i = max(b_{i-1} + d_{i-1}, r_i)
//! e_i = b_i + d_i,  g_i = b_i − e_{i-1}
//! ```
//!
//! The turn is masked when every gap is zero.

mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{LatencyModel, Workload};

pub use sweep::{sweep, write_csv, SweepGrid, SweepRow, SWEEP_CSV_HEADER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("turn has no chunks")]
    EmptyTurn,
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("per-token latency model needs chunk token counts")]
    MissingTokens,
    #[error("explicit or fixed synthesis times cannot be compared with whole-reply synthesis")]
    CannotCompare,
}

/// Where per-chunk synthesis times come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisTimes {
    Explicit(Vec<u64>),
    Model(LatencyModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSpec {
    pub stt_ms: u64,
    pub agent_ms: u64,
    /// Playback duration of each chunk.
    pub durations_ms: Vec<u64>,
    /// Token count of each chunk; only needed by per-token models.
    #[serde(default)]
    pub tokens: Vec<u64>,
    pub synthesis: SynthesisTimes,
    #[serde(default)]
    pub transport_ms: u64,
}

impl TurnSpec {
    pub fn explicit(stt_ms: u64, agent_ms: u64, durations_ms: Vec<u64>, synth_ms: Vec<u64>) -> Self {
        TurnSpec {
            stt_ms,
            agent_ms,
            durations_ms,
            tokens: Vec::new(),
            synthesis: SynthesisTimes::Explicit(synth_ms),
            transport_ms: 0,
        }
    }

    pub fn modelled(stt_ms: u64, agent_ms: u64, durations_ms: Vec<u64>, model: LatencyModel) -> Self {
        TurnSpec {
            stt_ms,
            agent_ms,
            durations_ms,
            tokens: Vec::new(),
            synthesis: SynthesisTimes::Model(model),
            transport_ms: 0,
        }
    }

    pub fn with_tokens(mut self, tokens: Vec<u64>) -> Self {
        self.tokens = tokens;
        self
    }

    pub fn with_transport(mut self, transport_ms: u64) -> Self {
        self.transport_ms = transport_ms;
        self
    }

    fn workload(&self, i: usize) -> Workload {
        Workload {
            tokens: self.tokens.get(i).copied().unwrap_or(0),
            duration_ms: self.durations_ms[i],
        }
    }

    fn check_tokens(&self, model: &LatencyModel) -> Result<(), PipelineError> {
        if self.tokens.is_empty() {
            if matches!(model.kind, crate::backends::LatencyKind::PerToken) {
                return Err(PipelineError::MissingTokens);
            }
            return Ok(());
        }
        if self.tokens.len() != self.durations_ms.len() {
            return Err(PipelineError::LengthMismatch {
                what: "tokens",
                got: self.tokens.len(),
                expected: self.durations_ms.len(),
            });
        }
        Ok(())
    }

    /// Per-chunk synthesis times.
    pub fn synth_ms(&self) -> Result<Vec<u64>, PipelineError> {
        let n = self.durations_ms.len();
        if n == 0 {
            return Err(PipelineError::EmptyTurn);
        }
        match &self.synthesis {
            SynthesisTimes::Explicit(p) if p.len() != n => Err(PipelineError::LengthMismatch {
                what: "synthesis times",
                got: p.len(),
                expected: n,
            }),
            SynthesisTimes::Explicit(p) => Ok(p.clone()),
            SynthesisTimes::Model(model) => {
                self.check_tokens(model)?;
                Ok((0..n).map(|i| model.evaluate(self.workload(i))).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub ready_ms: Vec<u64>,
    pub start_ms: Vec<u64>,
    pub end_ms: Vec<u64>,
    pub first_audio_ms: u64,
    pub gaps_ms: Vec<u64>,
    pub masked: bool,
}

impl Timeline {
    /// Play-on-arrival playback for chunks that become available at `ready_ms`.
    ///
    /// This is the descriptive path: the gateway feeds it measured arrival
    /// times, while [`schedule`] feeds it predicted ones.
    pub fn from_ready(ready_ms: &[u64], durations_ms: &[u64]) -> Result<Self, PipelineError> {
        if ready_ms.is_empty() {
            return Err(PipelineError::EmptyTurn);
        }
        if ready_ms.len() != durations_ms.len() {
            return Err(PipelineError::LengthMismatch {
                what: "ready times",
                got: ready_ms.len(),
                expected: durations_ms.len(),
            });
        }
        let mut start_ms = Vec::with_capacity(ready_ms.len());
        let mut end_ms: Vec<u64> = Vec::with_capacity(ready_ms.len());
        let mut gaps_ms = Vec::with_capacity(ready_ms.len() - 1);
        for (&ready, &duration) in ready_ms.iter().zip(durations_ms) {
            let start = match end_ms.last() {
                None => ready,
                Some(&prev_end) => {
                    let start = prev_end.max(ready);
                    gaps_ms.push(start - prev_end);
                    start
                }
            };
            start_ms.push(start);
            end_ms.push(start + duration);
        }
        Ok(Timeline {
            ready_ms: ready_ms.to_vec(),
            first_audio_ms: start_ms[0],
            masked: gaps_ms.iter().all(|&g| g == 0),
            start_ms,
            end_ms,
            gaps_ms,
        })
    }

    pub fn max_gap_ms(&self) -> u64 {
        self.gaps_ms.iter().copied().max().unwrap_or(0)
    }
}

/// Predicted timeline for a turn.
pub fn schedule(spec: &TurnSpec) -> Result<Timeline, PipelineError> {
    let synth = spec.synth_ms()?;
    let mut done = spec.stt_ms + spec.agent_ms;
    let ready: Vec<u64> = synth
        .iter()
        .map(|p| {
            done += p;
            done + spec.transport_ms
        })
        .collect();
    Timeline::from_ready(&ready, &spec.durations_ms)
}

pub fn is_masked(timeline: &Timeline, tolerance_ms: u64) -> bool {
    timeline.gaps_ms.iter().all(|&g| g <= tolerance_ms)
}

/// Sufficient condition for masking: every chunk after the first
/// synthesizes no slower than the previous chunk plays.
pub fn masking_condition(spec: &TurnSpec) -> Result<bool, PipelineError> {
    let synth = spec.synth_ms()?;
    Ok(synth
        .iter()
        .skip(1)
        .zip(&spec.durations_ms)
        .all(|(p, d)| p <= d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonolithicComparison {
    pub first_audio_chunked: u64,
    pub first_audio_mono: u64,
    pub saving_ms: i64,
}

/// Time to first audio when chunked, against synthesizing the whole reply
/// in one call.
pub fn compare_monolithic(spec: &TurnSpec) -> Result<MonolithicComparison, PipelineError> {
    let model = match &spec.synthesis {
        SynthesisTimes::Model(model) if model.is_additive() => model,
        _ => return Err(PipelineError::CannotCompare),
    };
    let chunked = schedule(spec)?.first_audio_ms;
    let whole = Workload {
        tokens: spec.tokens.iter().sum(),
        duration_ms: spec.durations_ms.iter().sum(),
    };
    let mono = spec.stt_ms + spec.agent_ms + model.evaluate(whole) + spec.transport_ms;
    Ok(MonolithicComparison {
        first_audio_chunked: chunked,
        first_audio_mono: mono,
        saving_ms: mono as i64 - chunked as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_masked_example() {
        let spec = TurnSpec::explicit(800, 100, vec![2000; 3], vec![1700; 3]);
        let tl = schedule(&spec).unwrap();
        assert_eq!(tl.ready_ms, [2600, 4300, 6000]);
        assert_eq!(tl.start_ms, [2600, 4600, 6600]);
        assert_eq!(tl.end_ms, [4600, 6600, 8600]);
        assert_eq!(tl.first_audio_ms, 2600);
        assert_eq!(tl.gaps_ms, [0, 0]);
        assert!(tl.masked);
    }

    #[test]
    fn schedule_unmasked_example() {
        let spec = TurnSpec::explicit(800, 100, vec![400, 4000], vec![340, 3400]);
        let tl = schedule(&spec).unwrap();
        assert_eq!(tl.ready_ms, [1240, 4640]);
        assert_eq!(tl.end_ms[0], 1640);
        assert_eq!(tl.start_ms[1], 4640);
        assert_eq!(tl.gaps_ms, [3000]);
        assert!(!tl.masked);
    }

    #[test]
    fn schedule_single_chunk_no_processing() {
        let tl = schedule(&TurnSpec::explicit(0, 0, vec![1000], vec![0])).unwrap();
        assert_eq!(tl.first_audio_ms, 0);
        assert!(tl.gaps_ms.is_empty());
        assert!(tl.masked);
    }

    #[test]
    fn schedule_errors() {
        assert_eq!(
            schedule(&TurnSpec::explicit(0, 0, vec![], vec![])),
            Err(PipelineError::EmptyTurn)
        );
        assert!(matches!(
            schedule(&TurnSpec::explicit(0, 0, vec![1, 2], vec![1])),
            Err(PipelineError::LengthMismatch { .. })
        ));
        let per_token = TurnSpec::modelled(0, 0, vec![100], LatencyModel::per_token(0, 10));
        assert_eq!(schedule(&per_token), Err(PipelineError::MissingTokens));
    }

    #[test]
    fn transport_delay_shifts_ready_times() {
        let spec = TurnSpec::explicit(800, 100, vec![2000; 2], vec![1700; 2]).with_transport(30);
        let tl = schedule(&spec).unwrap();
        assert_eq!(tl.ready_ms, [2630, 4330]);
        assert_eq!(tl.first_audio_ms, 2630);
    }

    #[test]
    fn tie_counts_as_zero_gap() {
        let tl = Timeline::from_ready(&[0, 1000], &[1000, 1000]).unwrap();
        assert_eq!(tl.gaps_ms, [0]);
        assert!(tl.masked);
    }

    #[test]
    fn is_masked_tolerance() {
        let tl = |gaps: &[u64]| Timeline {
            ready_ms: vec![],
            start_ms: vec![],
            end_ms: vec![],
            first_audio_ms: 0,
            gaps_ms: gaps.to_vec(),
            masked: gaps.iter().all(|&g| g == 0),
        };
        assert!(is_masked(&tl(&[0, 0]), 0));
        assert!(!is_masked(&tl(&[3000]), 0));
        assert!(is_masked(&tl(&[40, 10]), 50));
    }

    #[test]
    fn masking_condition_examples() {
        assert!(masking_condition(&TurnSpec::explicit(0, 0, vec![2000; 2], vec![1700; 2])).unwrap());
        assert!(!masking_condition(&TurnSpec::explicit(0, 0, vec![400, 4000], vec![340, 3400])).unwrap());
        assert!(masking_condition(&TurnSpec::explicit(0, 0, vec![10], vec![99_999])).unwrap());
    }

    #[test]
    fn compare_monolithic_examples() {
        let spec = TurnSpec::modelled(800, 100, vec![2000; 3], LatencyModel::proportional(0.85));
        let cmp = compare_monolithic(&spec).unwrap();
        assert_eq!(cmp.first_audio_chunked, 2600);
        assert_eq!(cmp.first_audio_mono, 6000);
        assert_eq!(cmp.saving_ms, 3400);

        let single = TurnSpec::modelled(800, 100, vec![3000], LatencyModel::proportional(0.85));
        assert_eq!(compare_monolithic(&single).unwrap().saving_ms, 0);

        let spec = TurnSpec::modelled(800, 100, vec![4000; 2], LatencyModel::proportional(0.5));
        let cmp = compare_monolithic(&spec).unwrap();
        assert_eq!((cmp.first_audio_chunked, cmp.first_audio_mono, cmp.saving_ms), (2900, 4900, 2000));
    }

    #[test]
    fn compare_monolithic_per_token() {
        let spec = TurnSpec::modelled(0, 0, vec![2000, 2000], LatencyModel::per_token(200, 100))
            .with_tokens(vec![5, 5]);
        let cmp = compare_monolithic(&spec).unwrap();
        assert_eq!(cmp.first_audio_chunked, 700);
        assert_eq!(cmp.first_audio_mono, 1200);
    }

    #[test]
    fn compare_monolithic_rejects_explicit_and_fixed() {
        let explicit = TurnSpec::explicit(800, 100, vec![2000; 2], vec![1700; 2]);
        assert_eq!(compare_monolithic(&explicit), Err(PipelineError::CannotCompare));
        let fixed = TurnSpec::modelled(800, 100, vec![2000; 2], LatencyModel::fixed(1700));
        assert_eq!(compare_monolithic(&fixed), Err(PipelineError::CannotCompare));
    }
}
