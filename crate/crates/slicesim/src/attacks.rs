//! Jammer implementations: constant (CJA), random (RJA), DRL-based adaptive
//! (DRL-JA) with energy-detection spectrum sensing and an energy ledger, and
//! the feedforward-net jammer variant.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtrl::{epsilon_greedy, LearnParams, QApproximator, SeqTransition};
use crate::netmodel::{dbm_to_mw, RbGrid};
use crate::nn::FnnNet;

pub const SENSING_SLOT_US: f64 = 9.0;
pub const IDLE_RULE_US: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("RB count must be positive")]
    EmptyRbSet,
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("sensing trace spans {got:.1} us, needs {need:.1} us")]
    ShortTrace { got: f64, need: f64 },
    #[error("discount factor {0} is not in [0,1)")]
    BadDiscount(f64),
}

/// CJA transmit power of Eq. 6: |sum of legitimate SINRs|^2 / ||RBs||, in mW.
pub fn cja_power(l_values: &[f64], rb_count: usize) -> Result<f64, AttackError> {
    if rb_count == 0 {
        return Err(AttackError::EmptyRbSet);
    }
    let total: f64 = l_values.iter().sum();
    Ok(total * total / rb_count as f64)
}

/// Noise-proportional sensing reference of Eq. 10, in dBm.
pub fn t_max_dbm(b_q_mhz: f64) -> Result<f64, AttackError> {
    if b_q_mhz <= 0.0 {
        return Err(AttackError::NonPositiveBandwidth(b_q_mhz));
    }
    Ok(10.0 * (3.16228e-8 * b_q_mhz).log10())
}

/// Energy-detection threshold of Eq. 9: min(T_max + 10 dB, X_r), in dBm.
pub fn detection_threshold_dbm(t_max_dbm: f64, x_r_dbm: f64) -> f64 {
    (t_max_dbm + 10.0).min(x_r_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotVerdict {
    Idle,
    Busy,
}

/// Slot verdict: idle iff the received power stays below the threshold for
/// at least 4 us of the 9 us slot. Samples are 1 us apart, in mW.
pub fn sense_slot(trace_mw: &[f64], e_theta_mw: f64) -> Result<SlotVerdict, AttackError> {
    let got = trace_mw.len() as f64;
    if got < SENSING_SLOT_US {
        return Err(AttackError::ShortTrace { got, need: SENSING_SLOT_US });
    }
    let below_us = trace_mw.iter().filter(|&&p| p < e_theta_mw).count() as f64;
    if below_us >= IDLE_RULE_US {
        Ok(SlotVerdict::Idle)
    } else {
        Ok(SlotVerdict::Busy)
    }
}

/// Attacker's per-TTI view of the spectrum: slot verdicts per RB plus the
/// per-RB occupancy verdict.
#[derive(Debug, Clone)]
pub struct SensingReport {
    pub per_rb_rx_mw: Vec<f64>,
    pub slots: Vec<Vec<SlotVerdict>>,
    /// Bit r set iff RB r was sensed busy.
    pub busy_mask: u16,
}

/// Number of whole sensing slots in one TTI.
pub fn slots_per_tti(tti_us: f64) -> usize {
    (tti_us / SENSING_SLOT_US).floor() as usize
}

/// Build the report for one TTI from per-RB received power (constant within
/// the TTI at this model's resolution).
pub fn build_sensing_report(per_rb_rx_mw: &[f64], e_theta_dbm: f64, tti_us: f64) -> SensingReport {
    let e_theta_mw = dbm_to_mw(e_theta_dbm);
    let n_slots = slots_per_tti(tti_us).max(1);
    let mut slots = Vec::with_capacity(per_rb_rx_mw.len());
    let mut busy_mask = 0u16;
    for (rb, &rx) in per_rb_rx_mw.iter().enumerate() {
        let trace = [rx; SENSING_SLOT_US as usize];
        let verdict = sense_slot(&trace, e_theta_mw).expect("full slot");
        slots.push(vec![verdict; n_slots]);
        if verdict == SlotVerdict::Busy && rb < 16 {
            busy_mask |= 1 << rb;
        }
    }
    SensingReport { per_rb_rx_mw: per_rb_rx_mw.to_vec(), slots, busy_mask }
}

/// DRL-JA state of Eq. 8: per-RB occupancy estimate from thresholding, plus
/// the normalized remaining energy budget.
pub fn drlja_state(report: &SensingReport, budget_fraction: f64) -> Vec<f64> {
    let mut features: Vec<f64> = (0..report.per_rb_rx_mw.len())
        .map(|rb| if report.busy_mask & (1 << rb) != 0 { 1.0 } else { 0.0 })
        .collect();
    features.push(budget_fraction.clamp(0.0, 1.0));
    features
}

/// DRL-JA reward of Eq. 12 under the sign convention that lower victim SINR
/// and lower energy use are better: -(w1*L + w2*E).
pub fn drlja_reward(l_tilde: f64, energy: f64, omega1: f64, omega2: f64) -> f64 {
    -(omega1 * l_tilde + omega2 * energy)
}

/// Jamming energy of Eq. 14: power times duration, in mW*TTI.
pub fn jam_energy(total_power_mw: f64, duration_ttis: f64) -> f64 {
    total_power_mw * duration_ttis
}

/// Jam transmitted during one TTI: targeted RBs at a common TX power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerAction {
    pub targets: u16,
    pub tx_power_mw: f64,
}

impl JammerAction {
    pub const EMPTY: JammerAction = JammerAction { targets: 0, tx_power_mw: 0.0 };

    pub fn rb_count(&self) -> u32 {
        self.targets.count_ones()
    }

    /// Total transmit power summed over targeted RBs (Eq. 11).
    pub fn total_power_mw(&self) -> f64 {
        self.rb_count() as f64 * self.tx_power_mw
    }
}

/// Shared attacker bookkeeping: detection threshold, reference power, and
/// the exact energy ledger. Remaining budget is derived from spent so that
/// initial == spent + remaining holds identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JammerContext {
    pub target_gnb: usize,
    pub e_theta_dbm: f64,
    pub x_r_dbm: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub gamma: f64,
    /// Eq. 6 reference power, set at calibration.
    pub p_ref_mw: Option<f64>,
    /// Budget expressed in units of p_ref * TTI; infinite if None.
    pub budget_units: Option<f64>,
    pub initial_budget_mw_tti: f64,
    pub spent_mw_tti: f64,
}

impl JammerContext {
    pub fn new(
        target_gnb: usize,
        b_q_mhz: f64,
        x_r_dbm: f64,
        omega1: f64,
        omega2: f64,
        gamma: f64,
        budget_units: Option<f64>,
    ) -> Self {
        let t_max = t_max_dbm(b_q_mhz).expect("positive RB bandwidth");
        Self {
            target_gnb,
            e_theta_dbm: detection_threshold_dbm(t_max, x_r_dbm),
            x_r_dbm,
            omega1,
            omega2,
            gamma,
            p_ref_mw: None,
            budget_units,
            initial_budget_mw_tti: f64::INFINITY,
            spent_mw_tti: 0.0,
        }
    }

    pub fn calibrate(&mut self, p_ref_mw: f64) {
        self.p_ref_mw = Some(p_ref_mw);
        self.initial_budget_mw_tti = match self.budget_units {
            Some(units) => units * p_ref_mw,
            None => f64::INFINITY,
        };
    }

    pub fn remaining_mw_tti(&self) -> f64 {
        self.initial_budget_mw_tti - self.spent_mw_tti
    }

    pub fn budget_fraction(&self) -> f64 {
        if self.initial_budget_mw_tti.is_infinite() {
            1.0
        } else if self.initial_budget_mw_tti <= 0.0 {
            0.0
        } else {
            (self.remaining_mw_tti() / self.initial_budget_mw_tti).clamp(0.0, 1.0)
        }
    }

    /// Debit the action if affordable; otherwise return the empty action.
    pub fn debit(&mut self, action: JammerAction) -> JammerAction {
        let energy = jam_energy(action.total_power_mw(), 1.0);
        if energy <= 0.0 {
            return JammerAction::EMPTY;
        }
        if energy > self.remaining_mw_tti() {
            return JammerAction::EMPTY;
        }
        self.spent_mw_tti += energy;
        JammerAction { ..action }
    }
}

/// What the engine feeds back to an attacker at the end of each TTI.
pub struct JammerObservation<'a> {
    /// Received power per RB at the attacker's sensing antenna, in mW.
    pub sensed_rx_mw: &'a [f64],
    /// Mean linear SINR over the target gNB's allocated RBs this TTI.
    pub l_tilde: f64,
    pub tti_us: f64,
}

pub trait Jammer {
    /// The jam transmitted during this TTI. Must already be budget-debited.
    fn act(&mut self) -> JammerAction;
    /// End-of-TTI sensing and learning hook.
    fn observe(&mut self, obs: &JammerObservation<'_>);
    /// Fix the Eq. 6 reference power and any attack-start state.
    fn calibrate(&mut self, l_values: &[f64], alloc_mask: u16, grid: &RbGrid);
    fn is_calibrated(&self) -> bool;
    fn context(&self) -> &JammerContext;
    fn context_mut(&mut self) -> &mut JammerContext;
    /// Fresh energy ledger for a new run phase; learned state persists.
    fn reset_budget(&mut self) {
        self.context_mut().spent_mw_tti = 0.0;
    }
}

/// Pick the window of `span` consecutive subcarriers whose RBs overlap the
/// given allocation most; ties resolve to the lowest start. Returns the RB
/// mask of the winning window.
pub fn choose_cja_span(grid: &RbGrid, alloc_mask: u16, span: usize) -> u16 {
    let span = span.clamp(1, grid.subcarriers);
    let mut best_mask = 0u16;
    let mut best_hits = -1i32;
    for start in 0..=(grid.subcarriers - span) {
        let mut mask = 0u16;
        for sc in start..start + span {
            for rb in grid.rbs_of_subcarrier(sc) {
                mask |= 1 << rb;
            }
        }
        let hits = (mask & alloc_mask).count_ones() as i32;
        if hits > best_hits {
            best_hits = hits;
            best_mask = mask;
        }
    }
    best_mask
}

/// Constant jammer: fixed span, fixed Eq. 6 power, every TTI.
pub struct CjaJammer {
    pub ctx: JammerContext,
    span_subcarriers: usize,
    targets: u16,
    calibrated: bool,
}

impl CjaJammer {
    pub fn new(ctx: JammerContext, span_subcarriers: usize) -> Self {
        Self { ctx, span_subcarriers, targets: 0, calibrated: false }
    }
}

impl Jammer for CjaJammer {
    fn act(&mut self) -> JammerAction {
        if !self.calibrated {
            return JammerAction::EMPTY;
        }
        let action = JammerAction {
            targets: self.targets,
            tx_power_mw: self.ctx.p_ref_mw.unwrap_or(0.0),
        };
        self.ctx.debit(action)
    }

    fn observe(&mut self, _obs: &JammerObservation<'_>) {}

    fn calibrate(&mut self, l_values: &[f64], alloc_mask: u16, grid: &RbGrid) {
        let p = cja_power(l_values, grid.rbgs).expect("non-empty grid");
        self.ctx.calibrate(p);
        self.targets = choose_cja_span(grid, alloc_mask, self.span_subcarriers);
        self.calibrated = true;
    }

    fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    fn context(&self) -> &JammerContext {
        &self.ctx
    }

    fn context_mut(&mut self) -> &mut JammerContext {
        &mut self.ctx
    }
}

/// Random jammer: uniform random RB subset each TTI at the CJA power level.
pub struct RjaJammer {
    pub ctx: JammerContext,
    rbgs: usize,
    calibrated: bool,
    rng: ChaCha8Rng,
}

impl RjaJammer {
    pub fn new(ctx: JammerContext, rbgs: usize, rng: ChaCha8Rng) -> Self {
        Self { ctx, rbgs, calibrated: false, rng }
    }
}

impl Jammer for RjaJammer {
    fn act(&mut self) -> JammerAction {
        if !self.calibrated {
            return JammerAction::EMPTY;
        }
        let size = self.rng.gen_range(0..=self.rbgs);
        let mut targets = 0u16;
        if size > 0 {
            for rb in sample(&mut self.rng, self.rbgs, size) {
                targets |= 1 << rb;
            }
        }
        let action =
            JammerAction { targets, tx_power_mw: self.ctx.p_ref_mw.unwrap_or(0.0) };
        self.ctx.debit(action)
    }

    fn observe(&mut self, _obs: &JammerObservation<'_>) {}

    fn calibrate(&mut self, l_values: &[f64], _alloc_mask: u16, grid: &RbGrid) {
        let p = cja_power(l_values, grid.rbgs).expect("non-empty grid");
        self.ctx.calibrate(p);
        self.calibrated = true;
    }

    fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    fn context(&self) -> &JammerContext {
        &self.ctx
    }

    fn context_mut(&mut self) -> &mut JammerContext {
        &mut self.ctx
    }
}

/// Enumerated DRL-JA jam patterns: a no-op plus aimed contiguous blocks at
/// two power tiers, always masked to the estimated-busy set so the jammer
/// never spends energy on RBs it sensed idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JamPattern {
    NoOp,
    Block { start: usize, tier: f64 },
}

pub fn jam_pattern(index: usize) -> JamPattern {
    if index == 0 {
        return JamPattern::NoOp;
    }
    let i = index - 1;
    let start = 2 * (i % 6);
    let tier = if i < 6 { 0.5 } else { 1.0 };
    JamPattern::Block { start, tier }
}

pub const JAM_PATTERN_COUNT: usize = 13;

pub fn pattern_targets(pattern: JamPattern, busy_mask: u16, rbgs: usize, width: usize) -> (u16, f64) {
    match pattern {
        JamPattern::NoOp => (0, 0.0),
        JamPattern::Block { start, tier } => {
            let mut block = 0u16;
            for k in 0..width {
                block |= 1 << ((start + k) % rbgs);
            }
            (block & busy_mask, tier)
        }
    }
}

/// Adaptive jammer: senses occupancy, learns a Q-policy over jam patterns,
/// transmits the pattern chosen from the previous TTI's sensing.
pub struct DrlJammer {
    pub ctx: JammerContext,
    approx: QApproximator,
    seq_len: usize,
    block_width: usize,
    history: VecDeque<Vec<f64>>,
    prev: Option<(Vec<Vec<f64>>, usize)>,
    pending: JammerAction,
    pending_pattern: usize,
    last_energy: f64,
    norm_l: RunningMinMax,
    norm_e: RunningMinMax,
    calibrated: bool,
    rng: ChaCha8Rng,
    rbgs: usize,
}

impl DrlJammer {
    pub fn new(
        ctx: JammerContext,
        rbgs: usize,
        hidden: usize,
        layers: usize,
        seq_len: usize,
        block_width: usize,
        params: LearnParams,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let approx =
            QApproximator::new_lstm(rbgs + 1, hidden, layers, JAM_PATTERN_COUNT, params, &mut rng);
        Self {
            ctx,
            approx,
            seq_len: seq_len.max(1),
            block_width,
            history: VecDeque::new(),
            prev: None,
            pending: JammerAction::EMPTY,
            pending_pattern: 0,
            last_energy: 0.0,
            norm_l: RunningMinMax::default(),
            norm_e: RunningMinMax::default(),
            calibrated: false,
            rng,
            rbgs,
        }
    }
}

impl Jammer for DrlJammer {
    fn act(&mut self) -> JammerAction {
        if !self.calibrated {
            return JammerAction::EMPTY;
        }
        let action = self.ctx.debit(self.pending);
        self.last_energy = jam_energy(action.total_power_mw(), 1.0);
        self.pending = JammerAction::EMPTY;
        action
    }

    fn observe(&mut self, obs: &JammerObservation<'_>) {
        if !self.calibrated {
            return;
        }
        let report = build_sensing_report(obs.sensed_rx_mw, self.ctx.e_theta_dbm, obs.tti_us);
        let features = drlja_state(&report, self.ctx.budget_fraction());
        if self.history.len() == self.seq_len {
            self.history.pop_front();
        }
        self.history.push_back(features);
        let seq: Vec<Vec<f64>> = self.history.iter().cloned().collect();

        if let Some((prev_seq, prev_action)) = self.prev.take() {
            // Reward for the action that landed this TTI.
            let l_n = self.norm_l.normalized(obs.l_tilde);
            let e_n = self.norm_e.normalized(self.last_energy);
            let reward = drlja_reward(l_n, e_n, self.ctx.omega1, self.ctx.omega2);
            let t = SeqTransition {
                seq: prev_seq,
                action: prev_action,
                reward,
                next_seq: seq.clone(),
            };
            self.approx.learn(0, &t, 0, &mut self.rng);
        }

        let q = self.approx.q_values(0, &seq);
        let choice =
            epsilon_greedy(&q, self.approx.params.epsilon, &mut self.rng).expect("patterns");
        let (targets, tier) =
            pattern_targets(jam_pattern(choice), report.busy_mask, self.rbgs, self.block_width);
        let p_ref = self.ctx.p_ref_mw.unwrap_or(0.0);
        self.pending = JammerAction { targets, tx_power_mw: tier * p_ref };
        self.pending_pattern = choice;
        self.prev = Some((seq, choice));
    }

    fn calibrate(&mut self, l_values: &[f64], _alloc_mask: u16, grid: &RbGrid) {
        let p = cja_power(l_values, grid.rbgs).expect("non-empty grid");
        self.ctx.calibrate(p);
        self.calibrated = true;
    }

    fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    fn context(&self) -> &JammerContext {
        &self.ctx
    }

    fn context_mut(&mut self) -> &mut JammerContext {
        &mut self.ctx
    }
}

/// Feedforward jammer: predicts the next occupancy from the last 10 sensed
/// allocations and targets the argmax RB.
pub struct FnnJammer {
    pub ctx: JammerContext,
    net: FnnNet,
    lr: f64,
    history: VecDeque<Vec<f64>>,
    pending: JammerAction,
    calibrated: bool,
    rbgs: usize,
}

pub const FNN_HISTORY: usize = 10;

impl FnnJammer {
    pub fn new(
        ctx: JammerContext,
        rbgs: usize,
        hidden: usize,
        layers: usize,
        init_range: f64,
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut dims = vec![FNN_HISTORY * rbgs];
        dims.extend(std::iter::repeat(hidden).take(layers));
        dims.push(rbgs);
        let net = FnnNet::new(&dims, init_range, rng);
        Self {
            ctx,
            net,
            lr,
            history: VecDeque::new(),
            pending: JammerAction::EMPTY,
            calibrated: false,
            rbgs,
        }
    }

    fn input(&self) -> Vec<f64> {
        self.history.iter().flatten().copied().collect()
    }
}

impl Jammer for FnnJammer {
    fn act(&mut self) -> JammerAction {
        if !self.calibrated {
            return JammerAction::EMPTY;
        }
        let action = self.ctx.debit(self.pending);
        self.pending = JammerAction::EMPTY;
        action
    }

    fn observe(&mut self, obs: &JammerObservation<'_>) {
        if !self.calibrated {
            return;
        }
        let report = build_sensing_report(obs.sensed_rx_mw, self.ctx.e_theta_dbm, obs.tti_us);
        let bits: Vec<f64> = (0..self.rbgs)
            .map(|rb| if report.busy_mask & (1 << rb) != 0 { 1.0 } else { 0.0 })
            .collect();
        let observed_total: f64 = bits.iter().sum();
        // Train the previous window against what actually appeared now.
        if self.history.len() == FNN_HISTORY && observed_total > 0.0 {
            let input = self.input();
            let target: Vec<f64> = bits.iter().map(|b| b / observed_total).collect();
            self.net.train_step(&[(input, target)], self.lr, 5.0);
        }
        if self.history.len() == FNN_HISTORY {
            self.history.pop_front();
        }
        self.history.push_back(bits);
        // Not ready until a full window of observations exists.
        if self.history.len() < FNN_HISTORY {
            self.pending = JammerAction::EMPTY;
            return;
        }
        let probs = self.net.forward(&self.input());
        let target_rb = crate::dtrl::argmax_tie_lowest(&probs);
        self.pending = JammerAction {
            targets: 1 << target_rb,
            tx_power_mw: self.ctx.p_ref_mw.unwrap_or(0.0),
        };
    }

    fn calibrate(&mut self, l_values: &[f64], _alloc_mask: u16, grid: &RbGrid) {
        let p = cja_power(l_values, grid.rbgs).expect("non-empty grid");
        self.ctx.calibrate(p);
        self.calibrated = true;
    }

    fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    fn context(&self) -> &JammerContext {
        &self.ctx
    }

    fn context_mut(&mut self) -> &mut JammerContext {
        &mut self.ctx
    }
}

/// Online min-max tracker used to bring Eq. 12's incommensurate terms onto
/// a common [0,1] scale per run.
#[derive(Debug, Clone, Default)]
pub struct RunningMinMax {
    min: Option<f64>,
    max: Option<f64>,
}

impl RunningMinMax {
    pub fn normalized(&mut self, value: f64) -> f64 {
        let min = self.min.get_or_insert(value);
        if value < *min {
            *min = value;
        }
        let max = self.max.get_or_insert(value);
        if value > *max {
            *max = value;
        }
        let (lo, hi) = (self.min.unwrap(), self.max.unwrap());
        if hi - lo < 1e-300 {
            0.5
        } else {
            (value - lo) / (hi - lo)
        }
    }
}

/// Finite test MDP for exact policy evaluation.
#[derive(Debug, Clone)]
pub struct TestMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// transitions[s][a] = list of (next_state, probability).
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    /// rewards[s][a].
    pub rewards: Vec<Vec<f64>>,
}

/// Exact discounted state-action values of a stochastic policy (Eq. 15),
/// by iterative policy evaluation to fixed point.
pub fn policy_value(
    mdp: &TestMdp,
    policy: &[Vec<f64>],
    gamma: f64,
) -> Result<Vec<Vec<f64>>, AttackError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(AttackError::BadDiscount(gamma));
    }
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    loop {
        let mut delta: f64 = 0.0;
        let mut next = q.clone();
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let mut v = mdp.rewards[s][a];
                for &(s2, p) in &mdp.transitions[s][a] {
                    let ev: f64 =
                        (0..mdp.n_actions).map(|a2| policy[s2][a2] * q[s2][a2]).sum();
                    v += gamma * p * ev;
                }
                delta = delta.max((v - q[s][a]).abs());
                next[s][a] = v;
            }
        }
        q = next;
        if delta < 1e-13 {
            return Ok(q);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn cja_power_examples() {
        assert!((cja_power(&[1.0, 1.0], 4).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cja_power(&[0.0, 0.0, 0.0], 5).unwrap(), 0.0);
        assert!((cja_power(&[3.0, 4.0], 2).unwrap() - 24.5).abs() < 1e-12);
        assert_eq!(cja_power(&[1.0], 0), Err(AttackError::EmptyRbSet));
    }

    #[test]
    fn t_max_reference_points() {
        assert!((t_max_dbm(1.0).unwrap() - (-75.0)).abs() < 1e-4);
        assert!((t_max_dbm(10.0).unwrap() - (-65.0)).abs() < 1e-4);
        assert!((t_max_dbm(20.0).unwrap() - (-61.99)).abs() < 0.01);
        assert!(t_max_dbm(0.0).is_err());
    }

    #[test]
    fn detection_threshold_branches() {
        assert_eq!(detection_threshold_dbm(-75.0, -52.0), -65.0);
        assert_eq!(detection_threshold_dbm(-75.0, -70.0), -70.0);
        assert_eq!(detection_threshold_dbm(-75.0, -65.0), -65.0);
    }

    #[test]
    fn sense_slot_rule() {
        let below = 1e-9;
        let above = 1e-3;
        let theta = 1e-6;
        assert_eq!(sense_slot(&[below; 9], theta).unwrap(), SlotVerdict::Idle);
        let mut four_below = vec![above; 9];
        for s in four_below.iter_mut().take(4) {
            *s = below;
        }
        assert_eq!(sense_slot(&four_below, theta).unwrap(), SlotVerdict::Idle);
        let mut three_below = vec![above; 9];
        for s in three_below.iter_mut().take(3) {
            *s = below;
        }
        assert_eq!(sense_slot(&three_below, theta).unwrap(), SlotVerdict::Busy);
        assert!(sense_slot(&[below; 5], theta).is_err());
    }

    #[test]
    fn sensing_report_thresholds_per_rb() {
        // 15 slots for the default 142.9 us TTI.
        assert_eq!(slots_per_tti(142.9), 15);
        let e_theta = -63.0;
        let quiet = dbm_to_mw(-100.0);
        let loud = dbm_to_mw(-50.0);
        let rx = vec![quiet, loud, quiet, loud];
        let report = build_sensing_report(&rx, e_theta, 142.9);
        assert_eq!(report.busy_mask, 0b1010);
        assert_eq!(report.slots[1].len(), 15);
        let state = drlja_state(&report, 0.75);
        assert_eq!(state, vec![0.0, 1.0, 0.0, 1.0, 0.75]);
    }

    #[test]
    fn reward_sign_convention() {
        assert_eq!(drlja_reward(0.0, 0.0, 0.5, 0.5), 0.0);
        assert!((drlja_reward(2.0, 1.0, 0.5, 0.5) - (-1.5)).abs() < 1e-12);
        let base = drlja_reward(1.0, 1.0, 0.5, 0.5);
        assert!(drlja_reward(2.0, 1.0, 0.5, 0.5) < base);
    }

    #[test]
    fn energy_ledger_is_exact() {
        let mut ctx = JammerContext::new(0, 20.0 / 13.0, -52.0, 0.5, 0.5, 0.9, Some(10.0));
        ctx.calibrate(2.0); // budget = 20 mW*TTI
        let mut total = 0.0;
        for _ in 0..4 {
            let a = ctx.debit(JammerAction { targets: 0b111, tx_power_mw: 2.0 });
            total += jam_energy(a.total_power_mw(), 1.0);
            assert_eq!(ctx.initial_budget_mw_tti, ctx.spent_mw_tti + ctx.remaining_mw_tti());
        }
        assert_eq!(total, 18.0);
        // 6 mW*TTI needed, 2 remaining: the action collapses to empty.
        let a = ctx.debit(JammerAction { targets: 0b111, tx_power_mw: 2.0 });
        assert_eq!(a, JammerAction::EMPTY);
        // A cheaper action still fits.
        let a = ctx.debit(JammerAction { targets: 0b1, tx_power_mw: 2.0 });
        assert_eq!(a.rb_count(), 1);
        assert_eq!(ctx.remaining_mw_tti(), 0.0);
    }

    #[test]
    fn cja_span_prefers_allocated_region() {
        let grid = RbGrid::default();
        // Allocation concentrated on RBs 8..=12.
        let alloc: u16 = 0b1_1111_0000_0000;
        let mask = choose_cja_span(&grid, alloc, 5);
        assert!(
            (mask & alloc).count_ones() >= 4,
            "span {:013b} should cover most of {:013b}",
            mask,
            alloc
        );
    }

    #[test]
    fn cja_emits_identical_actions() {
        let grid = RbGrid::default();
        let ctx = JammerContext::new(0, grid.rb_bandwidth_mhz(), -52.0, 0.5, 0.5, 0.9, None);
        let mut jammer = CjaJammer::new(ctx, 7);
        assert_eq!(jammer.act(), JammerAction::EMPTY);
        jammer.calibrate(&[2.0, 3.0], 0b11111, &grid);
        let a = jammer.act();
        let b = jammer.act();
        assert_eq!(a, b);
        assert!(a.rb_count() > 0);
        assert!((a.tx_power_mw - 25.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn rja_subset_sizes_uniform() {
        let grid = RbGrid::default();
        let ctx = JammerContext::new(0, grid.rb_bandwidth_mhz(), -52.0, 0.5, 0.5, 0.9, None);
        let mut jammer = RjaJammer::new(ctx, 13, ChaCha8Rng::seed_from_u64(5));
        jammer.calibrate(&[1.0], 0, &grid);
        let n = 100_000;
        let mut counts = vec![0usize; 14];
        for _ in 0..n {
            counts[jammer.act().rb_count() as usize] += 1;
        }
        for (size, &c) in counts.iter().enumerate() {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 14.0).abs() < 0.01, "size {size} freq {f}");
        }
    }

    #[test]
    fn rja_same_seed_same_subsets() {
        let grid = RbGrid::default();
        let mk = || {
            let ctx = JammerContext::new(0, grid.rb_bandwidth_mhz(), -52.0, 0.5, 0.5, 0.9, None);
            let mut j = RjaJammer::new(ctx, 13, ChaCha8Rng::seed_from_u64(9));
            j.calibrate(&[1.0], 0, &grid);
            j
        };
        let mut a = mk();
        let mut b = mk();
        for _ in 0..50 {
            assert_eq!(a.act(), b.act());
        }
    }

    #[test]
    fn jam_patterns_mask_to_busy() {
        let busy: u16 = 0b0000_0110_0000;
        for idx in 0..JAM_PATTERN_COUNT {
            let (targets, tier) = pattern_targets(jam_pattern(idx), busy, 13, 4);
            assert_eq!(targets & !busy, 0, "pattern {idx} hit an idle RB");
            if idx == 0 {
                assert_eq!(targets, 0);
                assert_eq!(tier, 0.0);
            } else {
                assert!(tier == 0.5 || tier == 1.0);
            }
        }
        // Some pattern reaches the busy block.
        let hit = (1..JAM_PATTERN_COUNT)
            .any(|idx| pattern_targets(jam_pattern(idx), busy, 13, 4).0 != 0);
        assert!(hit);
    }

    #[test]
    fn drl_jammer_exhausts_then_stops() {
        let grid = RbGrid::default();
        let ctx =
            JammerContext::new(0, grid.rb_bandwidth_mhz(), -52.0, 0.5, 0.5, 0.9, Some(3.0));
        let params = LearnParams { epsilon: 0.0, ..Default::default() };
        let mut jammer = DrlJammer::new(
            ctx,
            13,
            8,
            1,
            2,
            4,
            params,
            ChaCha8Rng::seed_from_u64(3),
        );
        jammer.calibrate(&[5.0, 5.0], 0b1111, &grid);
        let loud = dbm_to_mw(-50.0);
        let rx = vec![loud; 13];
        for _ in 0..200 {
            let obs = JammerObservation { sensed_rx_mw: &rx, l_tilde: 1.0, tti_us: 142.9 };
            jammer.observe(&obs);
            let _ = jammer.act();
            let ctx = jammer.context();
            assert!(ctx.remaining_mw_tti() >= 0.0);
            assert_eq!(
                ctx.initial_budget_mw_tti,
                ctx.spent_mw_tti + ctx.remaining_mw_tti()
            );
        }
        // Budget of 3 p_ref-units cannot be exceeded.
        assert!(jammer.context().spent_mw_tti <= jammer.context().initial_budget_mw_tti);
    }

    #[test]
    fn fnn_jammer_locks_onto_static_allocation() {
        let grid = RbGrid::default();
        let ctx = JammerContext::new(0, grid.rb_bandwidth_mhz(), -52.0, 0.5, 0.5, 0.9, None);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut jammer = FnnJammer::new(ctx, 13, 50, 2, 1.0, 0.5, &mut rng);
        jammer.calibrate(&[1.0], 0b1000, &grid);
        // Victim always occupies RB 3 only.
        let mut rx = vec![dbm_to_mw(-120.0); 13];
        rx[3] = dbm_to_mw(-50.0);
        let mut hits = 0;
        for t in 0..300 {
            let obs = JammerObservation { sensed_rx_mw: &rx, l_tilde: 1.0, tti_us: 142.9 };
            jammer.observe(&obs);
            let a = jammer.act();
            if t < FNN_HISTORY {
                continue;
            }
            if a.targets == 1 << 3 {
                hits += 1;
            }
        }
        assert!(hits > 260, "locked {hits}/290");
    }

    #[test]
    fn policy_value_geometric_series() {
        // Single absorbing state, one action, r = 1.
        let mdp = TestMdp {
            n_states: 1,
            n_actions: 1,
            transitions: vec![vec![vec![(0, 1.0)]]],
            rewards: vec![vec![1.0]],
        };
        let policy = vec![vec![1.0]];
        let q = policy_value(&mdp, &policy, 0.9).unwrap();
        assert!((q[0][0] - 10.0).abs() < 1e-9);
        let q0 = policy_value(&mdp, &policy, 0.0).unwrap();
        assert_eq!(q0[0][0], 1.0);
        assert!(policy_value(&mdp, &policy, 1.0).is_err());
    }

    #[test]
    fn running_minmax_normalizes() {
        let mut mm = RunningMinMax::default();
        assert_eq!(mm.normalized(5.0), 0.5); // degenerate range
        assert_eq!(mm.normalized(10.0), 1.0);
        assert_eq!(mm.normalized(5.0), 0.0);
        assert_eq!(mm.normalized(7.5), 0.5);
    }
}
