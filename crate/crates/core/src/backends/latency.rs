use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default STT processing time (fixed).
pub const DEFAULT_STT_MS: u64 = 800;
/// Default agent processing time (fixed).
pub const DEFAULT_AGENT_MS: u64 = 100;
/// Default TTS real-time factor.
pub const DEFAULT_TTS_RTF: f64 = 0.85;
/// Fixed TTS profile for whole-reply baselines.
pub const FIXED_TTS_MS: u64 = 1700;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyModelError {
    #[error("{field} must be zero for a {kind:?} model")]
    IrrelevantField { kind: LatencyKind, field: &'static str },
    #[error("rtf must be finite and non-negative, got {0}")]
    BadRtf(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyKind {
    Fixed,
    PerToken,
    Proportional,
}

/// What a backend call has to process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workload {
    pub tokens: u64,
    pub duration_ms: u64,
}

/// Deterministic processing-time generator for mock backends.
///
/// - `fixed`: `base_ms`
/// - `per_token`: `base_ms + ms_per_token × tokens`
/// - `proportional`: `round(rtf × duration_ms)`
///
/// A non-zero `jitter_ms` adds uniform noise in `0..=jitter_ms`, drawn from
/// a generator seeded by `seed` and the workload, so equal inputs always
/// give equal outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub kind: LatencyKind,
    #[serde(default)]
    pub base_ms: u64,
    #[serde(default)]
    pub ms_per_token: u64,
    #[serde(default)]
    pub rtf: f64,
    #[serde(default)]
    pub jitter_ms: u64,
    #[serde(default)]
    pub seed: u64,
}

impl LatencyModel {
    pub fn fixed(ms: u64) -> Self {
        Self::of_kind(LatencyKind::Fixed, ms, 0, 0.0)
    }

    pub fn per_token(base_ms: u64, ms_per_token: u64) -> Self {
        Self::of_kind(LatencyKind::PerToken, base_ms, ms_per_token, 0.0)
    }

    pub fn proportional(rtf: f64) -> Self {
        Self::of_kind(LatencyKind::Proportional, 0, 0, rtf)
    }

    fn of_kind(kind: LatencyKind, base_ms: u64, ms_per_token: u64, rtf: f64) -> Self {
        LatencyModel {
            kind,
            base_ms,
            ms_per_token,
            rtf,
            jitter_ms: 0,
            seed: 0,
        }
    }

    pub fn with_jitter(mut self, jitter_ms: u64, seed: u64) -> Self {
        self.jitter_ms = jitter_ms;
        self.seed = seed;
        self
    }

    pub fn default_stt() -> Self {
        Self::fixed(DEFAULT_STT_MS)
    }

    pub fn default_agent() -> Self {
        Self::fixed(DEFAULT_AGENT_MS)
    }

    pub fn default_tts() -> Self {
        Self::proportional(DEFAULT_TTS_RTF)
    }

    pub fn validate(&self) -> Result<(), LatencyModelError> {
        let irrelevant = |field| LatencyModelError::IrrelevantField {
            kind: self.kind,
            field,
        };
        if !self.rtf.is_finite() || self.rtf < 0.0 {
            return Err(LatencyModelError::BadRtf(self.rtf));
        }
        match self.kind {
            LatencyKind::Fixed => {
                if self.ms_per_token != 0 {
                    return Err(irrelevant("ms_per_token"));
                }
                if self.rtf != 0.0 {
                    return Err(irrelevant("rtf"));
                }
            }
            LatencyKind::PerToken => {
                if self.rtf != 0.0 {
                    return Err(irrelevant("rtf"));
                }
            }
            LatencyKind::Proportional => {
                if self.base_ms != 0 {
                    return Err(irrelevant("base_ms"));
                }
                if self.ms_per_token != 0 {
                    return Err(irrelevant("ms_per_token"));
                }
            }
        }
        Ok(())
    }

    /// Linear models split additively over chunks, which is what a
    /// chunked-vs-whole comparison needs.
    pub fn is_additive(&self) -> bool {
        matches!(self.kind, LatencyKind::PerToken | LatencyKind::Proportional)
    }

    pub fn evaluate(&self, work: Workload) -> u64 {
        let nominal = match self.kind {
            LatencyKind::Fixed => self.base_ms,
            LatencyKind::PerToken => self.base_ms + self.ms_per_token * work.tokens,
            LatencyKind::Proportional => (self.rtf * work.duration_ms as f64).round() as u64,
        };
        nominal + self.jitter(work)
    }

    fn jitter(&self, work: Workload) -> u64 {
        if self.jitter_ms == 0 {
            return 0;
        }
        let key = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(work.tokens.rotate_left(32) ^ work.duration_ms);
        ChaCha8Rng::seed_from_u64(key).random_range(0..=self.jitter_ms)
    }
}
