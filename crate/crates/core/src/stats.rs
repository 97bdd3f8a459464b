use serde::{Deserialize, Serialize};

/// Summary of a latency sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: u64,
    pub p95_ms: u64,
    pub max_ms: u64,
}

impl LatencyStats {
    /// `None` for an empty sample.
    pub fn from_samples(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let sum: u128 = sorted.iter().map(|&v| v as u128).sum();
        Some(LatencyStats {
            count: sorted.len(),
            mean_ms: sum as f64 / sorted.len() as f64,
            p50_ms: percentile(&sorted, 50.0),
            p95_ms: percentile(&sorted, 95.0),
            max_ms: *sorted.last().unwrap(),
        })
    }
}

/// Nearest-rank percentile of an ascending sample.
pub fn percentile(sorted: &[u64], pct: f64) -> u64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nearest_rank() {
        let sorted: Vec<u64> = (1..=20).collect();
        assert_eq!(percentile(&sorted, 50.0), 10);
        assert_eq!(percentile(&sorted, 95.0), 19);
        assert_eq!(percentile(&sorted, 100.0), 20);
        assert_eq!(percentile(&[7], 95.0), 7);
    }

    #[test]
    fn identical_samples() {
        let s = LatencyStats::from_samples(&[2600; 10]).unwrap();
        assert_eq!((s.count, s.mean_ms, s.p50_ms, s.p95_ms, s.max_ms), (10, 2600.0, 2600, 2600, 2600));
        assert!(LatencyStats::from_samples(&[]).is_none());
    }

    proptest! {
        #[test]
        fn ordered_quantiles(samples in prop::collection::vec(0u64..100_000, 1..200)) {
            let s = LatencyStats::from_samples(&samples).unwrap();
            prop_assert!(s.p50_ms <= s.p95_ms && s.p95_ms <= s.max_ms);
            prop_assert_eq!(s.count, samples.len());
        }
    }
}
