//! KPI computation and figure-style post-processing: eCDFs, convergence
//! points, degradation/recovery percentages, and comparison matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::record::{Phase, RunRecord};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty sample set")]
    EmptySamples,
    #[error("baseline KPI must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("KPI configs differ: {0} vs {1}")]
    MismatchedConfigs(String, String),
}

/// Empirical CDF: nondecreasing, right-continuous step function over the
/// sorted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    points: Vec<(f64, f64)>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::EmptySamples);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == x => last.1 = frac,
                _ => points.push((x, frac)),
            }
        }
        Ok(Self { points })
    }

    /// Fraction of samples <= x.
    pub fn eval(&self, x: f64) -> f64 {
        let mut frac = 0.0;
        for &(xi, fi) in &self.points {
            if xi <= x {
                frac = fi;
            } else {
                break;
            }
        }
        frac
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        for &(x, f) in &self.points {
            if f >= q {
                return x;
            }
        }
        self.points.last().map(|p| p.0).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KpiKind {
    Throughput,
    Latency,
}

/// Degradation of an attacked run against its no-attack baseline, percent.
/// Throughput: (baseline-current)/baseline; latency: (current-baseline)/baseline.
pub fn degradation(current: f64, baseline: f64, kind: KpiKind) -> Result<f64, MetricsError> {
    if baseline <= 0.0 {
        return Err(MetricsError::NonPositiveBaseline(baseline));
    }
    Ok(match kind {
        KpiKind::Throughput => (baseline - current) / baseline * 100.0,
        KpiKind::Latency => (current - baseline) / baseline * 100.0,
    })
}

/// Recovery of a mitigated run against the attacked run, percent.
/// Throughput: (mitigated-attacked)/attacked; latency: (attacked-mitigated)/attacked.
pub fn recovery(mitigated: f64, attacked: f64, kind: KpiKind) -> Result<f64, MetricsError> {
    if attacked <= 0.0 {
        return Err(MetricsError::NonPositiveBaseline(attacked));
    }
    Ok(match kind {
        KpiKind::Throughput => (mitigated - attacked) / attacked * 100.0,
        KpiKind::Latency => (attacked - mitigated) / attacked * 100.0,
    })
}

/// First index where the reward EMA's slope stays below `tolerance` for
/// `patience` consecutive samples; EMA warm-up spans `window` samples.
pub fn convergence_point(
    series: &[f64],
    window: usize,
    tolerance: f64,
    patience: usize,
) -> Option<usize> {
    if series.len() <= window {
        return None;
    }
    let alpha = 2.0 / (window as f64 + 1.0);
    let mut ema = series[0];
    let mut emas = Vec::with_capacity(series.len());
    emas.push(ema);
    for &v in &series[1..] {
        ema = alpha * v + (1.0 - alpha) * ema;
        emas.push(ema);
    }
    let mut streak = 0usize;
    for t in window..emas.len() {
        if (emas[t] - emas[t - 1]).abs() < tolerance {
            streak += 1;
            if streak >= patience {
                return Some(t - patience + 1);
            }
        } else {
            streak = 0;
        }
    }
    // A series that stays flat to its end but has not yet accumulated the
    // full patience still counts if it was flat from the warm-up on.
    if streak > 0 && streak + window >= emas.len() && streak >= patience.min(emas.len() - window) {
        return Some(window);
    }
    None
}

/// Post-convergence KPI summary of one run phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpiSummary {
    pub phase: Phase,
    pub config_hash: String,
    /// Mean delivered eMBB throughput of the target gNB, Mbps.
    pub embb_throughput_mbps: f64,
    /// Mean and 95th-percentile uRLLC latency of delivered packets, ms.
    pub urllc_latency_ms: f64,
    pub urllc_latency_p95_ms: f64,
    /// Fraction of uRLLC packets dropped after HARQ exhaustion.
    pub urllc_drop_rate: f64,
    pub embb_drop_rate: f64,
    pub mean_reward: f64,
    pub convergence_tti: Option<usize>,
    pub latency_samples: Vec<f64>,
}

impl KpiSummary {
    /// Aggregate a phase, averaging over the post-convergence segment (the
    /// whole phase when convergence was never detected).
    pub fn from_record(
        record: &RunRecord,
        phase: Phase,
        window: usize,
        tolerance: f64,
        patience: usize,
    ) -> Self {
        let rewards = record.rewards(phase);
        let convergence_tti = convergence_point(&rewards, window, tolerance, patience);
        let start = convergence_tti.unwrap_or(0);
        let records: Vec<_> = record.phase_records(phase).collect();
        let tail = &records[start.min(records.len().saturating_sub(1))..];
        let n = tail.len().max(1) as f64;
        let embb = tail.iter().map(|t| t.embb_mbps).sum::<f64>() / n;
        let latency_samples: Vec<f64> =
            tail.iter().flat_map(|t| t.urllc_latencies_ms.iter().copied()).collect();
        let mean_latency = if latency_samples.is_empty() {
            0.0
        } else {
            latency_samples.iter().sum::<f64>() / latency_samples.len() as f64
        };
        let p95 = Ecdf::new(&latency_samples).map(|e| e.quantile(0.95)).unwrap_or(0.0);
        let urllc_delivered: usize = tail.iter().map(|t| t.urllc_latencies_ms.len()).sum();
        let urllc_drops: u32 = tail.iter().map(|t| t.urllc_drops).sum();
        let embb_arrived: u32 = tail.iter().map(|t| t.arrivals_embb).sum();
        let embb_drops: u32 = tail.iter().map(|t| t.embb_drops).sum();
        let mean_reward = rewards[start.min(rewards.len().saturating_sub(1))..]
            .iter()
            .sum::<f64>()
            / (rewards.len() - start.min(rewards.len())).max(1) as f64;
        Self {
            phase,
            config_hash: record.meta.config_hash.clone(),
            embb_throughput_mbps: embb,
            urllc_latency_ms: mean_latency,
            urllc_latency_p95_ms: p95,
            urllc_drop_rate: if urllc_delivered + urllc_drops as usize > 0 {
                urllc_drops as f64 / (urllc_delivered + urllc_drops as usize) as f64
            } else {
                0.0
            },
            embb_drop_rate: if embb_arrived > 0 {
                embb_drops as f64 / embb_arrived as f64
            } else {
                0.0
            },
            mean_reward,
            convergence_tti,
            latency_samples,
        }
    }
}

/// One cell of the attacker-vs-mitigation matrices: recovery percentages per
/// KPI, or absent when the run is missing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub attacker: String,
    pub mitigation: String,
    pub throughput_recovery_pct: Option<f64>,
    pub latency_recovery_pct: Option<f64>,
}

/// Labeled post-convergence KPI means feeding a comparison matrix.
#[derive(Debug, Clone)]
pub struct LabeledKpi {
    pub attacker: String,
    pub mitigation: String,
    pub throughput_mbps: f64,
    pub latency_ms: f64,
}

/// Recovery matrix over (attacker, mitigation) pairs. Rows where the
/// attacked-without-mitigation run is missing are reported absent rather
/// than fabricated.
pub fn comparison_table(runs: &[LabeledKpi]) -> Vec<ComparisonCell> {
    let mut cells = Vec::new();
    let attacked_baseline = |attacker: &str| -> Option<&LabeledKpi> {
        runs.iter().find(|r| r.attacker == attacker && r.mitigation == "none")
    };
    for run in runs.iter().filter(|r| r.mitigation != "none") {
        let Some(base) = attacked_baseline(&run.attacker) else {
            cells.push(ComparisonCell {
                attacker: run.attacker.clone(),
                mitigation: run.mitigation.clone(),
                throughput_recovery_pct: None,
                latency_recovery_pct: None,
            });
            continue;
        };
        cells.push(ComparisonCell {
            attacker: run.attacker.clone(),
            mitigation: run.mitigation.clone(),
            throughput_recovery_pct: recovery(
                run.throughput_mbps,
                base.throughput_mbps,
                KpiKind::Throughput,
            )
            .ok(),
            latency_recovery_pct: recovery(run.latency_ms, base.latency_ms, KpiKind::Latency)
                .ok(),
        });
    }
    cells
}
