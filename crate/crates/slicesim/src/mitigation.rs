//! Defenses: the DRL decoy mitigation that baits the jammer onto vacant
//! RBs, the suspend-learning baseline, and the feedforward-net defender.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtrl::{epsilon_greedy, LearnParams, QApproximator, SeqTransition};
use crate::nn::FnnNet;

#[derive(Debug, Error, PartialEq)]
pub enum MitigationError {
    #[error("knowledge repository needs at least {need} monitor runs, got {got}")]
    TooFewRuns { need: usize, got: usize },
    #[error("empty signal sample set")]
    EmptySignal,
}

/// Security administrator's per-TTI view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenderState {
    /// RBs observed jammed in the previous TTI (one-TTI observation lag).
    pub jammed: u16,
    /// RBs carrying real transmissions this TTI.
    pub allocated: u16,
    /// Complement of `allocated` within the grid.
    pub vacant: u16,
    pub rbgs: usize,
}

impl DefenderState {
    pub fn new(jammed: u16, allocated: u16, rbgs: usize) -> Self {
        let grid_mask = (1u16 << rbgs) - 1;
        Self { jammed, allocated, vacant: !allocated & grid_mask, rbgs }
    }

    pub fn features(&self) -> Vec<f64> {
        (0..self.rbgs)
            .map(|rb| if self.jammed & (1 << rb) != 0 { 1.0 } else { 0.0 })
            .chain((0..self.rbgs).map(|rb| if self.allocated & (1 << rb) != 0 { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// Decoy emission for one TTI: target set within the vacant RBs, energized
/// at a common per-RB power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyPlan {
    pub targets: u16,
    pub per_rb_power_mw: f64,
}

impl DecoyPlan {
    pub const EMPTY: DecoyPlan = DecoyPlan { targets: 0, per_rb_power_mw: 0.0 };

    pub fn rb_count(&self) -> u32 {
        self.targets.count_ones()
    }
}

/// Total antenna power of Eq. 19: sum of per-RB decoy powers over the set.
pub fn decoy_power_total(plan: &DecoyPlan) -> f64 {
    plan.rb_count() as f64 * plan.per_rb_power_mw
}

/// Average signal power of Eq. 20: mean of squared sample magnitudes.
pub fn avg_signal_power(samples: &[f64]) -> Result<f64, MitigationError> {
    if samples.is_empty() {
        return Err(MitigationError::EmptySignal);
    }
    Ok(samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64)
}

/// Mitigation reward of Eq. 17: mean linear SINR over the allocated RBs of
/// the protected gNB this TTI; zero when nothing was allocated.
pub fn mitigation_reward(allocated_rb_sinrs: &[f64]) -> f64 {
    if allocated_rb_sinrs.is_empty() {
        0.0
    } else {
        allocated_rb_sinrs.iter().sum::<f64>() / allocated_rb_sinrs.len() as f64
    }
}

/// Vacant RBs ordered from the frontier of the allocated block outward, so
/// decoys extend the occupied region seamlessly. Falls back to index order
/// when nothing is allocated.
pub fn vacant_frontier_order(state: &DefenderState) -> Vec<usize> {
    let n = state.rbgs;
    let vacant: Vec<usize> = (0..n).filter(|rb| state.vacant & (1 << rb) != 0).collect();
    if state.allocated == 0 {
        return vacant;
    }
    // End of the longest circular run of allocated RBs.
    let mut best_len = 0usize;
    let mut frontier = 0usize;
    for start in 0..n {
        if state.allocated & (1 << start) == 0 {
            continue;
        }
        let mut len = 0;
        while len < n && state.allocated & (1 << ((start + len) % n)) != 0 {
            len += 1;
        }
        if len > best_len {
            best_len = len;
            frontier = (start + len) % n;
        }
    }
    let mut ordered = vacant;
    ordered.sort_by_key(|&rb| (rb + n - frontier) % n);
    ordered
}

/// Decoy set for pattern index `d`: the first `d` vacant RBs in frontier
/// order. Pattern 0 emits nothing.
pub fn decoy_pattern_targets(state: &DefenderState, pattern: usize) -> u16 {
    let order = vacant_frontier_order(state);
    let mut mask = 0u16;
    for &rb in order.iter().take(pattern) {
        mask |= 1 << rb;
    }
    mask
}

pub const DECOY_PATTERN_COUNT: usize = 13;

pub trait Defender {
    /// Decoys to energize this TTI; 𝔅 must stay within the vacant set.
    fn plan(&mut self, state: &DefenderState) -> DecoyPlan;
    /// End-of-TTI reward feedback (Eq. 17).
    fn feedback(&mut self, reward: f64);
}

/// Deep-Q decoy defender over the enumerated pattern space.
pub struct DecoyDefender {
    approx: QApproximator,
    seq_len: usize,
    decoy_power_mw: f64,
    history: VecDeque<Vec<f64>>,
    prev: Option<(Vec<Vec<f64>>, usize)>,
    pending_reward: Option<f64>,
    rng: ChaCha8Rng,
}

impl DecoyDefender {
    pub fn new(
        rbgs: usize,
        hidden: usize,
        layers: usize,
        seq_len: usize,
        decoy_power_mw: f64,
        params: LearnParams,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let approx = QApproximator::new_lstm(
            2 * rbgs,
            hidden,
            layers,
            DECOY_PATTERN_COUNT,
            params,
            &mut rng,
        );
        Self {
            approx,
            seq_len: seq_len.max(1),
            decoy_power_mw,
            history: VecDeque::new(),
            prev: None,
            pending_reward: None,
            rng,
        }
    }
}

impl Defender for DecoyDefender {
    fn plan(&mut self, state: &DefenderState) -> DecoyPlan {
        if self.history.len() == self.seq_len {
            self.history.pop_front();
        }
        self.history.push_back(state.features());
        let seq: Vec<Vec<f64>> = self.history.iter().cloned().collect();

        // Close out the previous transition now that its successor state
        // is known.
        if let (Some((prev_seq, prev_action)), Some(reward)) =
            (self.prev.take(), self.pending_reward.take())
        {
            let t = SeqTransition { seq: prev_seq, action: prev_action, reward, next_seq: seq.clone() };
            self.approx.learn(0, &t, 0, &mut self.rng);
        }

        let q = self.approx.q_values(0, &seq);
        let choice =
            epsilon_greedy(&q, self.approx.params.epsilon, &mut self.rng).expect("patterns");
        self.prev = Some((seq, choice));
        let targets = decoy_pattern_targets(state, choice);
        if targets == 0 {
            DecoyPlan::EMPTY
        } else {
            DecoyPlan { targets, per_rb_power_mw: self.decoy_power_mw }
        }
    }

    fn feedback(&mut self, reward: f64) {
        self.pending_reward = Some(reward);
    }
}

/// Feedforward defender: predicts the jammer's next target distribution
/// from recent (jammed, allocated) history and decoys the most likely
/// vacant RBs.
pub struct FnnDefender {
    net: FnnNet,
    lr: f64,
    decoy_power_mw: f64,
    decoy_count: usize,
    history: VecDeque<Vec<f64>>,
    history_len: usize,
    last_input: Option<Vec<f64>>,
    rbgs: usize,
}

impl FnnDefender {
    pub fn new(
        rbgs: usize,
        hidden: usize,
        layers: usize,
        history_len: usize,
        init_range: f64,
        lr: f64,
        decoy_power_mw: f64,
        decoy_count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut dims = vec![history_len * 2 * rbgs];
        dims.extend(std::iter::repeat(hidden).take(layers));
        dims.push(rbgs);
        Self {
            net: FnnNet::new(&dims, init_range, rng),
            lr,
            decoy_power_mw,
            decoy_count,
            history: VecDeque::new(),
            history_len,
            last_input: None,
            rbgs,
        }
    }

    fn window_input(&self) -> Vec<f64> {
        self.history.iter().flatten().copied().collect()
    }

    pub fn predicted_targets(&self, input: &[f64]) -> Vec<f64> {
        self.net.forward(input)
    }
}

impl Defender for FnnDefender {
    fn plan(&mut self, state: &DefenderState) -> DecoyPlan {
        // The jammed bits of this state are the outcome the previous window
        // should have predicted.
        if let Some(input) = self.last_input.take() {
            let total = (state.jammed as u32).count_ones() as f64;
            if total > 0.0 {
                let target: Vec<f64> = (0..self.rbgs)
                    .map(|rb| if state.jammed & (1 << rb) != 0 { 1.0 / total } else { 0.0 })
                    .collect();
                self.net.train_step(&[(input, target)], self.lr, 5.0);
            }
        }
        if self.history.len() == self.history_len {
            self.history.pop_front();
        }
        self.history.push_back(state.features());
        if self.history.len() < self.history_len {
            return DecoyPlan::EMPTY;
        }
        let input = self.window_input();
        let probs = self.net.forward(&input);
        self.last_input = Some(input);
        // Rank vacant RBs by predicted attack probability.
        let mut vacant: Vec<usize> =
            (0..self.rbgs).filter(|rb| state.vacant & (1 << rb) != 0).collect();
        vacant.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
        let mut targets = 0u16;
        for &rb in vacant.iter().take(self.decoy_count) {
            targets |= 1 << rb;
        }
        if targets == 0 {
            DecoyPlan::EMPTY
        } else {
            DecoyPlan { targets, per_rb_power_mw: self.decoy_power_mw }
        }
    }

    fn feedback(&mut self, _reward: f64) {}
}

/// No-attack baseline pair (mean transmit power seen at the gNB, mean
/// SINR), assembled from monitoring runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRepository {
    pub baseline_power_mw: f64,
    pub baseline_sinr: f64,
}

/// Per-run monitoring statistics feeding the repository.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorStats {
    pub mean_reward: f64,
    pub mean_power_mw: f64,
    pub mean_sinr: f64,
}

pub const REPO_MONITOR_RUNS: usize = 10;
pub const REPO_KEPT_RUNS: usize = 5;

impl KnowledgeRepository {
    /// Average the 5 median-adjacent runs (by mean reward) of at least 10
    /// monitored no-attack runs.
    pub fn from_monitor_runs(runs: &[MonitorStats]) -> Result<Self, MitigationError> {
        if runs.len() < REPO_MONITOR_RUNS {
            return Err(MitigationError::TooFewRuns { need: REPO_MONITOR_RUNS, got: runs.len() });
        }
        let mut rewards: Vec<f64> = runs.iter().map(|r| r.mean_reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rewards[rewards.len() / 2];
        let mut by_distance: Vec<&MonitorStats> = runs.iter().collect();
        by_distance.sort_by(|a, b| {
            (a.mean_reward - median)
                .abs()
                .partial_cmp(&(b.mean_reward - median).abs())
                .unwrap()
                .then(a.mean_reward.partial_cmp(&b.mean_reward).unwrap())
        });
        let kept = &by_distance[..REPO_KEPT_RUNS];
        let n = kept.len() as f64;
        Ok(Self {
            baseline_power_mw: kept.iter().map(|r| r.mean_power_mw).sum::<f64>() / n,
            baseline_sinr: kept.iter().map(|r| r.mean_sinr).sum::<f64>() / n,
        })
    }
}

/// Suspend-learning detection rule: flag an attack iff the observed power
/// exceeds the baseline and the observed SINR falls below it, both past a
/// relative guard band.
pub fn suspend_learning_step(
    repo: &KnowledgeRepository,
    observed_power_mw: f64,
    observed_sinr: f64,
    guard: f64,
) -> bool {
    observed_power_mw > repo.baseline_power_mw * (1.0 + guard)
        && observed_sinr < repo.baseline_sinr * (1.0 - guard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn defender_state_vectors_partition() {
        let s = DefenderState::new(0b100000, 0b011111111, 13);
        assert_eq!(s.allocated & s.vacant, 0);
        assert_eq!(s.allocated | s.vacant, (1 << 13) - 1);
        assert_eq!(s.vacant.count_ones(), 5);
        let f = s.features();
        assert_eq!(f.len(), 26);
        assert_eq!(f[5], 1.0); // jammed bit
        assert_eq!(f[13], 1.0); // allocated bit
    }

    #[test]
    fn decoy_power_accounting() {
        let plan = DecoyPlan { targets: 0b111, per_rb_power_mw: 0.5 };
        assert!((decoy_power_total(&plan) - 1.5).abs() < 1e-12);
        assert_eq!(decoy_power_total(&DecoyPlan::EMPTY), 0.0);
    }

    #[test]
    fn avg_signal_power_examples() {
        assert_eq!(avg_signal_power(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(avg_signal_power(&[0.0, 2.0]).unwrap(), 2.0);
        let base = avg_signal_power(&[0.3, -1.2, 0.7]).unwrap();
        let scaled = avg_signal_power(&[0.6, -2.4, 1.4]).unwrap();
        assert!((scaled - 4.0 * base).abs() < 1e-12);
        assert_eq!(avg_signal_power(&[]), Err(MitigationError::EmptySignal));
    }

    #[test]
    fn mitigation_reward_examples() {
        assert_eq!(mitigation_reward(&[5.0, 5.0, 5.0]), 5.0);
        assert_eq!(mitigation_reward(&[2.0, 4.0]), 3.0);
        assert_eq!(mitigation_reward(&[]), 0.0);
    }

    #[test]
    fn decoy_patterns_stay_vacant() {
        let s = DefenderState::new(0, 0b0000011110, 13);
        for d in 0..DECOY_PATTERN_COUNT {
            let mask = decoy_pattern_targets(&s, d);
            assert_eq!(mask & s.allocated, 0, "pattern {d} touched an allocated RB");
            assert_eq!(mask.count_ones() as usize, d.min(s.vacant.count_ones() as usize));
        }
        // Fully allocated grid leaves no decoy room.
        let full = DefenderState::new(0, (1 << 13) - 1, 13);
        assert_eq!(decoy_pattern_targets(&full, 12), 0);
    }

    #[test]
    fn frontier_order_extends_allocated_block() {
        // Allocated block 2..=5; frontier is RB 6.
        let s = DefenderState::new(0, 0b0000_0011_1100, 13);
        let order = vacant_frontier_order(&s);
        assert_eq!(order[0], 6);
        assert_eq!(order[1], 7);
        // Wrap-around block 11,12,0 has frontier 1.
        let wrap = DefenderState::new(0, 0b1_1000_0000_0001, 13);
        let order = vacant_frontier_order(&wrap);
        assert_eq!(order[0], 1);
    }

    #[test]
    fn decoy_defender_determinism_and_safety() {
        let run = |seed: u64| -> Vec<u16> {
            let params = LearnParams::default();
            let mut d = DecoyDefender::new(
                13,
                8,
                1,
                2,
                1.0,
                params,
                ChaCha8Rng::seed_from_u64(seed),
            );
            (0..200)
                .map(|i| {
                    let alloc = ((1u16 << (i % 9)) - 1) << 1;
                    let state = DefenderState::new((i as u16) & 0x1fff, alloc & 0x1fff, 13);
                    let plan = d.plan(&state);
                    assert_eq!(plan.targets & state.allocated, 0);
                    d.feedback(1.0 / (1.0 + i as f64));
                    plan.targets
                })
                .collect()
        };
        assert_eq!(run(4), run(4));
    }

    #[test]
    fn repository_selection_and_rule() {
        let runs: Vec<MonitorStats> = (0..10)
            .map(|i| MonitorStats {
                mean_reward: i as f64,
                mean_power_mw: 100.0 + i as f64,
                mean_sinr: 50.0 + i as f64,
            })
            .collect();
        let repo = KnowledgeRepository::from_monitor_runs(&runs).unwrap();
        // Median-adjacent five of 0..9 rewards center on the middle values.
        assert!((repo.baseline_power_mw - 105.0).abs() < 1.0);
        assert!((repo.baseline_sinr - 55.0).abs() < 1.0);

        // Identical runs: repository equals any single run's means.
        let same = vec![
            MonitorStats { mean_reward: 2.0, mean_power_mw: 10.0, mean_sinr: 80.0 };
            10
        ];
        let repo = KnowledgeRepository::from_monitor_runs(&same).unwrap();
        assert_eq!(repo.baseline_power_mw, 10.0);
        assert_eq!(repo.baseline_sinr, 80.0);

        assert!(KnowledgeRepository::from_monitor_runs(&runs[..9]).is_err());
    }

    #[test]
    fn suspend_rule_requires_both_conditions() {
        let repo = KnowledgeRepository { baseline_power_mw: 100.0, baseline_sinr: 50.0 };
        // Exactly at baseline: no flag.
        assert!(!suspend_learning_step(&repo, 100.0, 50.0, 0.05));
        // Power +20%, SINR -50%: flagged.
        assert!(suspend_learning_step(&repo, 120.0, 25.0, 0.05));
        // Power +20% alone is not enough.
        assert!(!suspend_learning_step(&repo, 120.0, 55.0, 0.05));
        // SINR drop alone is not enough.
        assert!(!suspend_learning_step(&repo, 90.0, 10.0, 0.05));
    }
}
