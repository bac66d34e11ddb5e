//! Physical-world model: topology, resource grid, allocations, channel
//! gains, SINR, traffic and queueing, delay composition, and the slicing
//! objective with its feasibility constraints.

pub mod channel;
pub mod traffic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channel::{channel_gain_linear, path_loss_db, per_rb_sinr, sinr, sinr_jammed, throughput_mbps, ChannelState};
pub use traffic::{generate_arrivals, Packet, SliceQueue};

/// Slice type of a UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slice {
    Embb,
    Urllc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnbDesc {
    pub id: usize,
    /// Position in meters.
    pub position: (f64, f64),
    /// Total schedulable RBs |N_j|.
    pub rbs: usize,
    /// Per-RB transmit power in dBm.
    pub per_rb_power_dbm: f64,
    /// Compute capacity C_j in CPU cycles/s.
    pub compute_capacity: f64,
}

impl GnbDesc {
    pub fn per_rb_power_mw(&self) -> f64 {
        dbm_to_mw(self.per_rb_power_dbm)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UeDesc {
    pub id: usize,
    pub position: (f64, f64),
    pub slice: Slice,
    /// Serving gNB id.
    pub gnb: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub gnbs: Vec<GnbDesc>,
    pub ues: Vec<UeDesc>,
    /// Configured inter-site distance in meters.
    pub inter_site_m: f64,
    /// Regulatory max transmit power in dBm.
    pub max_tx_power_dbm: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("UE {ue} references unknown gNB {gnb}")]
    UnknownGnb { ue: usize, gnb: usize },
    #[error("gNB {gnb} per-RB power {power:.2} dBm exceeds max {max:.2} dBm")]
    PowerExceedsMax { gnb: usize, power: f64, max: f64 },
    #[error("gNB pair ({a},{b}) spacing {actual:.1} m differs from configured {expected:.1} m")]
    InterSiteMismatch { a: usize, b: usize, actual: f64, expected: f64 },
}

impl Topology {
    pub fn validate(&self) -> Result<(), TopologyError> {
        for ue in &self.ues {
            if ue.gnb >= self.gnbs.len() {
                return Err(TopologyError::UnknownGnb { ue: ue.id, gnb: ue.gnb });
            }
        }
        for g in &self.gnbs {
            if g.per_rb_power_dbm > self.max_tx_power_dbm {
                return Err(TopologyError::PowerExceedsMax {
                    gnb: g.id,
                    power: g.per_rb_power_dbm,
                    max: self.max_tx_power_dbm,
                });
            }
        }
        // Adjacent sites must honor the configured spacing.
        for w in self.gnbs.windows(2) {
            let actual = distance_m(w[0].position, w[1].position);
            if (actual - self.inter_site_m).abs() > 1e-6 * self.inter_site_m.max(1.0) {
                return Err(TopologyError::InterSiteMismatch {
                    a: w[0].id,
                    b: w[1].id,
                    actual,
                    expected: self.inter_site_m,
                });
            }
        }
        Ok(())
    }

    pub fn ues_of_gnb(&self, gnb: usize) -> impl Iterator<Item = &UeDesc> {
        self.ues.iter().filter(move |u| u.gnb == gnb)
    }
}

pub fn distance_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Time-frequency resource grid of one carrier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbGrid {
    pub subcarriers: usize,
    pub rbgs: usize,
    pub bandwidth_mhz: f64,
}

impl Default for RbGrid {
    fn default() -> Self {
        Self { subcarriers: 12, rbgs: 13, bandwidth_mhz: 20.0 }
    }
}

impl RbGrid {
    /// Bandwidth b_q of one schedulable RB, in MHz.
    pub fn rb_bandwidth_mhz(&self) -> f64 {
        self.bandwidth_mhz / self.rbgs as f64
    }

    /// Subcarrier index carrying RB `rb` (proportional binning).
    pub fn subcarrier_of(&self, rb: usize) -> usize {
        rb * self.subcarriers / self.rbgs
    }

    /// RBs carried by subcarrier `sc`.
    pub fn rbs_of_subcarrier(&self, sc: usize) -> Vec<usize> {
        (0..self.rbgs).filter(|&r| self.subcarrier_of(r) == sc).collect()
    }
}

/// Per-TTI binary allocation map plus compute-capacity split.
///
/// Entries are the set bits of the x_{j,u,r} tensor. The engine only ever
/// builds feasible allocations; the raw entry list exists so the constraint
/// checker can be exercised against infeasible inputs too.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Allocation {
    /// Set bits (gnb, ue, rb) of the binary tensor.
    pub entries: Vec<(usize, usize, usize)>,
    /// Per-gNB (eMBB, uRLLC) compute shares in cycles/s.
    pub compute: Vec<(f64, f64)>,
}

impl Allocation {
    pub fn new(gnb_count: usize) -> Self {
        Self { entries: Vec::new(), compute: vec![(0.0, 0.0); gnb_count] }
    }

    pub fn assign(&mut self, gnb: usize, ue: usize, rb: usize) {
        self.entries.push((gnb, ue, rb));
    }

    /// UE holding RB `rb` of gNB `gnb`, if any.
    pub fn ue_on_rb(&self, gnb: usize, rb: usize) -> Option<usize> {
        self.entries.iter().find(|e| e.0 == gnb && e.2 == rb).map(|e| e.1)
    }

    pub fn rbs_of_ue(&self, gnb: usize, ue: usize) -> Vec<usize> {
        self.entries.iter().filter(|e| e.0 == gnb && e.1 == ue).map(|e| e.2).collect()
    }

    /// Bitmask of allocated RBs in `gnb` (bit r set iff RB r carries a UE).
    pub fn allocated_mask(&self, gnb: usize) -> u16 {
        let mut mask = 0u16;
        for e in self.entries.iter().filter(|e| e.0 == gnb) {
            if e.2 < 16 {
                mask |= 1 << e.2;
            }
        }
        mask
    }

    pub fn rb_in_use(&self, gnb: usize, rb: usize) -> bool {
        self.entries.iter().any(|e| e.0 == gnb && e.2 == rb)
    }
}

/// One violated feasibility constraint. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstraintViolation {
    /// Eq. 2.a: an RB assigned to more than one UE.
    DuplicateRb { gnb: usize, rb: usize },
    /// Eq. 2.b: allocation exceeds the gNB's available RBs.
    RbOverAllocation { gnb: usize, allocated: usize, available: usize },
    /// Eq. 2.c: compute shares exceed the gNB's capacity.
    ComputeOverAllocation { gnb: usize, assigned: f64, capacity: f64 },
}

/// Checks Eq. 2.a–2.c; empty report iff feasible.
pub fn check_constraints(alloc: &Allocation, topology: &Topology) -> Vec<ConstraintViolation> {
    let mut violations = Vec::new();
    for (j, gnb) in topology.gnbs.iter().enumerate() {
        let mut per_rb = vec![0usize; gnb.rbs];
        let mut count = 0usize;
        for e in alloc.entries.iter().filter(|e| e.0 == j) {
            count += 1;
            if e.2 < gnb.rbs {
                per_rb[e.2] += 1;
            }
        }
        for (rb, &n) in per_rb.iter().enumerate() {
            if n > 1 {
                violations.push(ConstraintViolation::DuplicateRb { gnb: j, rb });
            }
        }
        if count > gnb.rbs || alloc.entries.iter().any(|e| e.0 == j && e.2 >= gnb.rbs) {
            violations.push(ConstraintViolation::RbOverAllocation {
                gnb: j,
                allocated: count,
                available: gnb.rbs,
            });
        }
        if let Some(&(ce, cu)) = alloc.compute.get(j) {
            if ce + cu > gnb.compute_capacity * (1.0 + 1e-12) {
                violations.push(ConstraintViolation::ComputeOverAllocation {
                    gnb: j,
                    assigned: ce + cu,
                    capacity: gnb.compute_capacity,
                });
            }
        }
    }
    violations
}

/// Additive per-packet delay components of Eq. 1, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub d_tx: f64,
    pub d_rtx: f64,
    pub d_que: f64,
    pub d_edge: f64,
    pub d_cloud: f64,
    /// 1 = processed at the MEC server, 0 = central cloud.
    pub eta: u8,
}

/// Total delay per Eq. 1: d_tx + d_rtx + d_que + eta*d_edge + (1-eta)*d_cloud.
pub fn total_delay(parts: &DelayBreakdown) -> f64 {
    debug_assert!(parts.eta <= 1);
    let eta = parts.eta as f64;
    parts.d_tx + parts.d_rtx + parts.d_que + eta * parts.d_edge + (1.0 - eta) * parts.d_cloud
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub w_embb: f64,
    pub w_urllc: f64,
    /// uRLLC target delay D^tar in ms.
    pub d_target_ms: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { w_embb: 1.0, w_urllc: 1.0, d_target_ms: 1.0 }
    }
}

/// Slicing objective of Eq. 2: w_eMBB*B_avg + w_uRLLC*(D_tar - D_avg).
pub fn objective_reward(b_avg_mbps: f64, d_avg_ms: f64, weights: &ObjectiveWeights) -> f64 {
    weights.w_embb * b_avg_mbps + weights.w_urllc * (weights.d_target_ms - d_avg_ms)
}
