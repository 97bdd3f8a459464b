use std::io;

use serde::Serialize;

use super::{schedule, PipelineError, TurnSpec};
use crate::backends::LatencyModel;

pub const SWEEP_CSV_HEADER: &str =
    "rtf,stt_ms,agent_ms,n_chunks,chunk_ms,first_audio_ms,max_gap_ms,masked";

/// Cartesian grid of equal-chunk turns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub rtf: Vec<f64>,
    pub stt_ms: Vec<u64>,
    pub agent_ms: Vec<u64>,
    pub n_chunks: Vec<usize>,
    pub chunk_ms: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rtf: f64,
    pub stt_ms: u64,
    pub agent_ms: u64,
    pub n_chunks: usize,
    pub chunk_ms: u64,
    pub first_audio_ms: u64,
    pub max_gap_ms: u64,
    pub masked: bool,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.rtf.len() * self.stt_ms.len() * self.agent_ms.len() * self.n_chunks.len() * self.chunk_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, PipelineError> {
    let mut rows = Vec::with_capacity(grid.len());
    for &rtf in &grid.rtf {
        for &stt_ms in &grid.stt_ms {
            for &agent_ms in &grid.agent_ms {
                for &n_chunks in &grid.n_chunks {
                    for &chunk_ms in &grid.chunk_ms {
                        let spec = TurnSpec::modelled(
                            stt_ms,
                            agent_ms,
                            vec![chunk_ms; n_chunks],
                            LatencyModel::proportional(rtf),
                        );
                        let tl = schedule(&spec)?;
                        rows.push(SweepRow {
                            rtf,
                            stt_ms,
                            agent_ms,
                            n_chunks,
                            chunk_ms,
                            first_audio_ms: tl.first_audio_ms,
                            max_gap_ms: tl.max_gap_ms(),
                            masked: tl.masked,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Writes rows as CSV. The header is written even when there are no rows.
pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(SWEEP_CSV_HEADER.split(','))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rtf: &[f64]) -> SweepGrid {
        SweepGrid {
            rtf: rtf.to_vec(),
            stt_ms: vec![800],
            agent_ms: vec![100],
            n_chunks: vec![3],
            chunk_ms: vec![2000],
        }
    }

    #[test]
    fn rtf_boundary() {
        let rows = sweep(&grid(&[0.5, 1.0, 1.5])).unwrap();
        let masked: Vec<bool> = rows.iter().map(|r| r.masked).collect();
        assert_eq!(masked, [true, true, false]);
        assert_eq!(rows[1].max_gap_ms, 0);
        assert_eq!(rows[2].max_gap_ms, 1000);
    }

    #[test]
    fn empty_and_cardinality() {
        assert!(sweep(&SweepGrid::default()).unwrap().is_empty());
        let mut g = grid(&[0.5, 1.0]);
        g.n_chunks = vec![1, 4];
        assert_eq!(g.len(), 4);
        assert_eq!(sweep(&g).unwrap().len(), 4);
    }

    #[test]
    fn zero_chunk_axis_is_an_error() {
        let mut g = grid(&[0.5]);
        g.n_chunks = vec![0];
        assert_eq!(sweep(&g), Err(PipelineError::EmptyTurn));
    }

    #[test]
    fn csv_layout() {
        let rows = sweep(&grid(&[0.5])).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[1], "0.5,800,100,3,2000,1900,0,true");

        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), SWEEP_CSV_HEADER);
    }
}
