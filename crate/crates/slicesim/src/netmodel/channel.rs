//! Propagation and link-quality computations: path loss, shadowed channel
//! gains, per-RB SINR with optional jamming power, and Shannon throughput.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{dbm_to_mw, distance_m, Allocation, RbGrid, Topology};

/// Urban-macro path loss: 128.1 + 37.6 log10(D[km]).
pub fn path_loss_db(distance_km: f64) -> Result<f64, ChannelError> {
    if distance_km <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance_km));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

/// Linear channel gain from the dB link budget:
/// gain_dB = -(path_loss + shadowing + penetration).
pub fn channel_gain_linear(path_loss_db: f64, shadowing_db: f64, penetration_db: f64) -> f64 {
    10f64.powf(-(path_loss_db + shadowing_db + penetration_db) / 10.0)
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("unknown link (gnb {gnb}, ue {ue})")]
    UnknownLink { gnb: usize, ue: usize },
    #[error("negative jamming power {0}")]
    NegativeJamPower(f64),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Noise power density N_0 in dBm/Hz.
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub penetration_loss_db: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 5.0,
            penetration_loss_db: 5.0,
            shadowing_sigma_db: 8.0,
        }
    }
}

/// Frozen per-run channel realization: one shadowed gain per (gNB, UE) link.
#[derive(Debug, Clone)]
pub struct ChannelState {
    gains: Vec<f64>,
    ue_count: usize,
    pub noise_density_mw_hz: f64,
    pub noise_figure_linear: f64,
    pub params: ChannelParams,
}

impl ChannelState {
    /// Sample shadowing once per link and freeze the link gains.
    pub fn build(topology: &Topology, params: &ChannelParams, rng: &mut ChaCha8Rng) -> Self {
        let ue_count = topology.ues.len();
        let mut gains = vec![0.0; topology.gnbs.len() * ue_count];
        for gnb in &topology.gnbs {
            for ue in &topology.ues {
                let d_km = (distance_m(gnb.position, ue.position) / 1000.0).max(1e-3);
                let pl = path_loss_db(d_km).expect("positive distance");
                let shadow = sample_shadowing_db(params.shadowing_sigma_db, rng);
                gains[gnb.id * ue_count + ue.id] =
                    channel_gain_linear(pl, shadow, params.penetration_loss_db);
            }
        }
        Self {
            gains,
            ue_count,
            noise_density_mw_hz: dbm_to_mw(params.noise_density_dbm_hz),
            noise_figure_linear: 10f64.powf(params.noise_figure_db / 10.0),
            params: *params,
        }
    }

    /// Build from explicit link gains (tests and hand-constructed cases).
    pub fn from_gains(gains: Vec<f64>, ue_count: usize, params: ChannelParams) -> Self {
        Self {
            gains,
            ue_count,
            noise_density_mw_hz: dbm_to_mw(params.noise_density_dbm_hz),
            noise_figure_linear: 10f64.powf(params.noise_figure_db / 10.0),
            params,
        }
    }

    pub fn gain(&self, gnb: usize, ue: usize) -> Result<f64, ChannelError> {
        self.gains.get(gnb * self.ue_count + ue).copied().ok_or(ChannelError::UnknownLink { gnb, ue })
    }

    /// Thermal noise over one RB, after the receiver noise figure, in mW.
    pub fn noise_per_rb_mw(&self, grid: &RbGrid) -> f64 {
        self.noise_density_mw_hz * grid.rb_bandwidth_mhz() * 1e6 * self.noise_figure_linear
    }
}

/// Zero-mean log-normal shadowing realization in dB.
pub fn sample_shadowing_db(sigma_db: f64, rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per link.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    sigma_db * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Linear SINR of UE `ue` on RB `rb`, with `jam_mw` received jamming power
/// added to the denominator.
pub fn per_rb_sinr(
    channel: &ChannelState,
    alloc: &Allocation,
    topology: &Topology,
    grid: &RbGrid,
    ue: usize,
    rb: usize,
    jam_mw: f64,
) -> f64 {
    let serving = topology.ues[ue].gnb;
    if alloc.ue_on_rb(serving, rb) != Some(ue) {
        return 0.0;
    }
    let p = topology.gnbs[serving].per_rb_power_mw();
    let q = channel.gain(serving, ue).unwrap_or(0.0);
    let mut denom = channel.noise_per_rb_mw(grid) + jam_mw;
    for (j, other) in topology.gnbs.iter().enumerate() {
        if j != serving && alloc.rb_in_use(j, rb) {
            denom += other.per_rb_power_mw() * channel.gain(j, ue).unwrap_or(0.0);
        }
    }
    p * q / denom
}

/// Legitimate SINR L_{j,u} of Eq. 5: per-RB SINR summed over the UE's RBs.
pub fn sinr(
    channel: &ChannelState,
    alloc: &Allocation,
    topology: &Topology,
    grid: &RbGrid,
    ue: usize,
) -> f64 {
    let serving = topology.ues[ue].gnb;
    alloc
        .rbs_of_ue(serving, ue)
        .into_iter()
        .map(|rb| per_rb_sinr(channel, alloc, topology, grid, ue, rb, 0.0))
        .sum()
}

/// Jammed SINR of Eq. 7/13: as `sinr` with `jam_mw` in every denominator.
pub fn sinr_jammed(
    channel: &ChannelState,
    alloc: &Allocation,
    topology: &Topology,
    grid: &RbGrid,
    ue: usize,
    jam_mw: f64,
) -> Result<f64, ChannelError> {
    if jam_mw < 0.0 {
        return Err(ChannelError::NegativeJamPower(jam_mw));
    }
    let serving = topology.ues[ue].gnb;
    Ok(alloc
        .rbs_of_ue(serving, ue)
        .into_iter()
        .map(|rb| per_rb_sinr(channel, alloc, topology, grid, ue, rb, jam_mw))
        .sum())
}

/// Shannon throughput of a UE in Mbps: sum of b_q*log2(1+SINR_r) over its
/// allocated RBs. `jam_mw_per_rb[rb]` is the received jamming power per RB.
pub fn throughput_mbps(
    channel: &ChannelState,
    alloc: &Allocation,
    topology: &Topology,
    grid: &RbGrid,
    ue: usize,
    jam_mw_per_rb: &[f64],
) -> f64 {
    let serving = topology.ues[ue].gnb;
    let b = grid.rb_bandwidth_mhz();
    alloc
        .rbs_of_ue(serving, ue)
        .into_iter()
        .map(|rb| {
            let jam = jam_mw_per_rb.get(rb).copied().unwrap_or(0.0);
            b * (1.0 + per_rb_sinr(channel, alloc, topology, grid, ue, rb, jam)).log2()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{GnbDesc, Slice, UeDesc};
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1.0).unwrap() - 128.1).abs() < 1e-9);
        assert!((path_loss_db(0.5).unwrap() - 116.782).abs() < 1e-3);
        assert!((path_loss_db(0.125).unwrap() - 94.144).abs() < 1e-3);
    }

    #[test]
    fn path_loss_rejects_non_positive() {
        assert!(path_loss_db(0.0).is_err());
        assert!(path_loss_db(-1.0).is_err());
    }

    #[test]
    fn gain_is_pure_db_conversion() {
        assert!((channel_gain_linear(100.0, 0.0, 0.0) - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn shadowing_sample_sigma_near_configured() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_shadowing_db(8.0, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        let sigma = var.sqrt();
        assert!((sigma - 8.0).abs() < 0.5, "sample sigma {sigma}");
    }

    fn two_cell_world() -> (Topology, RbGrid) {
        let topo = Topology {
            gnbs: vec![
                GnbDesc { id: 0, position: (0.0, 0.0), rbs: 13, per_rb_power_dbm: 0.0, compute_capacity: 1e9 },
                GnbDesc { id: 1, position: (500.0, 0.0), rbs: 13, per_rb_power_dbm: 0.0, compute_capacity: 1e9 },
            ],
            ues: vec![
                UeDesc { id: 0, position: (50.0, 0.0), slice: Slice::Embb, gnb: 0 },
                UeDesc { id: 1, position: (450.0, 0.0), slice: Slice::Embb, gnb: 1 },
            ],
            inter_site_m: 500.0,
            max_tx_power_dbm: 40.0,
        };
        (topo, RbGrid::default())
    }

    /// Channel with unit-power gNBs where noise+interference terms are set
    /// directly: serving gain 0.5, cross gain g so p'*g = 0.4.
    #[test]
    fn sinr_hand_cases() {
        let (topo, grid) = two_cell_world();
        // Noise density chosen so N0 * b * NF = 0.1 mW exactly.
        let b_hz = grid.rb_bandwidth_mhz() * 1e6;
        let params = ChannelParams {
            noise_density_dbm_hz: 10.0 * (0.1f64 / b_hz).log10(),
            noise_figure_db: 0.0,
            penetration_loss_db: 0.0,
            shadowing_sigma_db: 0.0,
        };
        // gains indexed gnb*ues+ue: (g0,u0)=0.5 serving, (g1,u0)=0.4 cross.
        let gains = vec![0.5, 0.0, 0.4, 0.5];
        let chan = ChannelState::from_gains(gains, 2, params);

        // Single cell in use: p*q = 1 mW * 0.5, denom = 0.1 -> 5.0.
        let mut alloc = Allocation::new(2);
        alloc.assign(0, 0, 0);
        assert!((sinr(&chan, &alloc, &topo, &grid, 0) - 5.0).abs() < 1e-9);

        // Unallocated UE sees zero.
        assert_eq!(sinr(&chan, &alloc, &topo, &grid, 1), 0.0);

        // Cross-cell interference on the same RB: denom 0.1 + 0.4 -> 1.0.
        alloc.assign(1, 1, 0);
        assert!((sinr(&chan, &alloc, &topo, &grid, 0) - 1.0).abs() < 1e-9);

        // Jammed with 0.9 mW on a clean single-cell RB: 0.5/(0.1+0.9).
        let mut single = Allocation::new(2);
        single.assign(0, 0, 0);
        let jammed = sinr_jammed(&chan, &single, &topo, &grid, 0, 0.9).unwrap();
        assert!((jammed - 0.5).abs() < 1e-9);

        // Zero jamming reduces exactly to sinr.
        let j0 = sinr_jammed(&chan, &single, &topo, &grid, 0, 0.0).unwrap();
        assert_eq!(j0, sinr(&chan, &single, &topo, &grid, 0));

        // Monotone decay toward zero as jam power grows.
        let mut last = f64::INFINITY;
        for jam in [0.0, 1.0, 10.0, 1e3, 1e6] {
            let s = sinr_jammed(&chan, &single, &topo, &grid, 0, jam).unwrap();
            assert!(s < last);
            last = s;
        }
        assert!(last < 1e-6);

        assert!(sinr_jammed(&chan, &single, &topo, &grid, 0, -0.1).is_err());
    }

    #[test]
    fn throughput_log2_points() {
        let (topo, mut grid) = two_cell_world();
        grid.bandwidth_mhz = grid.rbgs as f64; // b_q = 1 MHz
        let b_hz = 1e6;
        let params = ChannelParams {
            noise_density_dbm_hz: 10.0 * (0.5f64 / b_hz).log10(),
            noise_figure_db: 0.0,
            penetration_loss_db: 0.0,
            shadowing_sigma_db: 0.0,
        };
        let chan = ChannelState::from_gains(vec![0.5, 0.0, 0.0, 0.0], 2, params);
        let mut alloc = Allocation::new(2);
        alloc.assign(0, 0, 0);
        // SINR = 1*0.5/0.5 = 1 -> 1 Mbps.
        let t = throughput_mbps(&chan, &alloc, &topo, &grid, 0, &[]);
        assert!((t - 1.0).abs() < 1e-9);

        // SINR = 3 -> 2 Mbps, via noise 0.5/3.
        let params3 = ChannelParams {
            noise_density_dbm_hz: 10.0 * (0.5f64 / 3.0 / b_hz).log10(),
            ..params
        };
        let chan3 = ChannelState::from_gains(vec![0.5, 0.0, 0.0, 0.0], 2, params3);
        let t3 = throughput_mbps(&chan3, &alloc, &topo, &grid, 0, &[]);
        assert!((t3 - 2.0).abs() < 1e-9);

        // No allocation, no throughput.
        let empty = Allocation::new(2);
        assert_eq!(throughput_mbps(&chan, &empty, &topo, &grid, 0, &[]), 0.0);
    }

    #[test]
    fn built_channel_is_deterministic_per_seed() {
        let (topo, _) = two_cell_world();
        let params = ChannelParams::default();
        let a = ChannelState::build(&topo, &params, &mut ChaCha8Rng::seed_from_u64(5));
        let b = ChannelState::build(&topo, &params, &mut ChaCha8Rng::seed_from_u64(5));
        for gnb in 0..2 {
            for ue in 0..2 {
                assert_eq!(a.gain(gnb, ue).unwrap(), b.gain(gnb, ue).unwrap());
            }
        }
        assert!(a.gain(5, 0).is_err());
    }

    #[test]
    fn path_loss_strictly_increasing() {
        let mut last = f64::NEG_INFINITY;
        for d in [0.01, 0.05, 0.125, 0.5, 1.0, 2.0, 10.0] {
            let pl = path_loss_db(d).unwrap();
            assert!(pl > last);
            last = pl;
        }
    }
}
