//! Run records: one metadata header plus one line-delimited record per TTI,
//! focused on the attacked gNB.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RECORD_SCHEMA: &str = "slicesim-record-v1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record io: {0}")]
    Io(#[from] std::io::Error),
    #[error("record parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record schema mismatch: got {0}")]
    Schema(String),
    #[error("empty record file")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Expert,
    Learner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub expert_ttis: u64,
    pub learner_ttis: u64,
    pub target_gnb: usize,
    pub tti_us: f64,
}

/// Per-TTI observables of the target gNB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtiRecord {
    pub tti: u64,
    pub phase: Phase,
    /// Slicing reward delivered to the target agent this TTI.
    pub reward: f64,
    pub action: usize,
    /// RBs carrying real transmissions.
    pub allocated: u16,
    /// eMBB bits delivered this TTI, as Mbps over one TTI.
    pub embb_mbps: f64,
    /// Latency of each uRLLC packet delivered this TTI, ms.
    pub urllc_latencies_ms: Vec<f64>,
    pub embb_drops: u32,
    pub urllc_drops: u32,
    pub arrivals_embb: u32,
    pub arrivals_urllc: u32,
    /// Mean linear SINR over allocated RBs (zero when none).
    pub mean_sinr: f64,
    // Attack trace.
    pub jammed: u16,
    pub jam_tx_power_mw: f64,
    pub energy_spent_mw_tti: f64,
    pub budget_remaining_mw_tti: Option<f64>,
    // Mitigation trace.
    pub decoys: u16,
    pub decoy_power_mw: f64,
    /// Jammed RBs that hit real allocations.
    pub jam_hits: u32,
    /// Jammed RBs that landed on decoys or idle spectrum.
    pub jam_misses: u32,
    pub suspended: bool,
}

/// End-of-run packet accounting, aggregated over all gNBs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationTotals {
    pub arrived: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued_at_end: u64,
}

impl ConservationTotals {
    pub fn balanced(&self) -> bool {
        self.arrived == self.delivered + self.dropped + self.queued_at_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub ttis: Vec<TtiRecord>,
    pub totals: ConservationTotals,
}

impl RunRecord {
    /// Reward series of one phase.
    pub fn rewards(&self, phase: Phase) -> Vec<f64> {
        self.ttis.iter().filter(|t| t.phase == phase).map(|t| t.reward).collect()
    }

    pub fn phase_records(&self, phase: Phase) -> impl Iterator<Item = &TtiRecord> {
        self.ttis.iter().filter(move |t| t.phase == phase)
    }

    /// Serialize as one meta line, one line per TTI, one totals line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), RecordError> {
        serde_json::to_writer(&mut w, &self.meta)?;
        writeln!(w)?;
        for t in &self.ttis {
            serde_json::to_writer(&mut w, t)?;
            writeln!(w)?;
        }
        serde_json::to_writer(&mut w, &self.totals)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, RecordError> {
        let mut lines = r.lines();
        let meta_line = lines.next().ok_or(RecordError::Empty)??;
        let meta: RunMeta = serde_json::from_str(&meta_line)?;
        if meta.schema != RECORD_SCHEMA {
            return Err(RecordError::Schema(meta.schema));
        }
        let mut ttis = Vec::new();
        let mut totals = ConservationTotals::default();
        let mut saw_totals = false;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(t) = serde_json::from_str::<TtiRecord>(&line) {
                ttis.push(t);
            } else {
                totals = serde_json::from_str(&line)?;
                saw_totals = true;
            }
        }
        if !saw_totals {
            return Err(RecordError::Empty);
        }
        Ok(Self { meta, ttis, totals })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> RunRecord {
        RunRecord {
            meta: RunMeta {
                schema: RECORD_SCHEMA.to_string(),
                config_hash: "abc".into(),
                seed: 7,
                expert_ttis: 2,
                learner_ttis: 1,
                target_gnb: 0,
                tti_us: 142.9,
            },
            ttis: vec![TtiRecord {
                tti: 0,
                phase: Phase::Expert,
                reward: 1.25,
                action: 3,
                allocated: 0b111,
                embb_mbps: 2.0,
                urllc_latencies_ms: vec![0.4289, 8.0],
                embb_drops: 0,
                urllc_drops: 1,
                arrivals_embb: 2,
                arrivals_urllc: 3,
                mean_sinr: 55.0,
                jammed: 0b010,
                jam_tx_power_mw: 100.0,
                energy_spent_mw_tti: 100.0,
                budget_remaining_mw_tti: Some(900.0),
                decoys: 0b1000,
                decoy_power_mw: 769.0,
                jam_hits: 1,
                jam_misses: 0,
                suspended: false,
            }],
            totals: ConservationTotals { arrived: 5, delivered: 3, dropped: 1, queued_at_end: 1 },
        }
    }

    #[test]
    fn jsonl_roundtrip() {
        let record = sample_record();
        let text = record.to_jsonl_string();
        let parsed = RunRecord::read_jsonl(std::io::Cursor::new(text.as_bytes())).unwrap();
        assert_eq!(parsed, record);
    }

    #[test]
    fn conservation_check() {
        assert!(sample_record().totals.balanced());
        let bad = ConservationTotals { arrived: 5, delivered: 3, dropped: 1, queued_at_end: 2 };
        assert!(!bad.balanced());
    }

    #[test]
    fn schema_mismatch_rejected() {
        let mut record = sample_record();
        record.meta.schema = "other".into();
        let text = record.to_jsonl_string();
        assert!(matches!(
            RunRecord::read_jsonl(std::io::Cursor::new(text.as_bytes())),
            Err(RecordError::Schema(_))
        ));
    }
}
