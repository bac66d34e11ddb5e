//! Expert and learner slicing agents: tabular Q-learning with an LSTM
//! Q-value predictor, epsilon-greedy selection, experience replay with
//! periodic target copies, and expert-to-learner knowledge transfer.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::LstmNet;

#[derive(Debug, Error)]
pub enum DtrlError {
    #[error("empty action set")]
    EmptyActionSet,
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(String),
}

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: (u16, u16),
    pub action: usize,
    pub reward: f64,
    pub next_state: (u16, u16),
}

/// Tabular Q-update of Eq. 3: (1-a)*q_old + a*(r + g*max_next).
pub fn q_update_expert(q_old: f64, r: f64, max_next: f64, alpha: f64, gamma: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha));
    (1.0 - alpha) * q_old + alpha * (r + gamma * max_next)
}

/// Transfer update of Eq. 4, literally as written:
/// q_mapped + q_old + a*(r + g*max_next - q_old).
///
/// The additive q_mapped term is applied only on the first visit of a
/// state-action pair; later updates fall back to the Eq. 3 form.
pub fn q_update_learner(
    q_mapped: f64,
    q_old: f64,
    r: f64,
    max_next: f64,
    alpha: f64,
    gamma: f64,
) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha));
    q_mapped + q_old + alpha * (r + gamma * max_next - q_old)
}

/// Argmax with ties resolved to the lowest index.
pub fn argmax_tie_lowest(q_values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q_values.iter().enumerate().skip(1) {
        if v > q_values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy selection: argmax with probability 1-eps, else uniform.
pub fn epsilon_greedy(
    q_values: &[f64],
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize, DtrlError> {
    if q_values.is_empty() {
        return Err(DtrlError::EmptyActionSet);
    }
    if rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..q_values.len()))
    } else {
        Ok(argmax_tie_lowest(q_values))
    }
}

/// Enumerated feasible actions shared by expert and learner.
///
/// Thirteen radio-split levels (r_eMBB, r_uRLLC) with r_e + r_u <= |N_j|;
/// the learner pairs each level with a compute split so every enumerated
/// tuple satisfies both Eq. 2.b and Eq. 2.c by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpace {
    pub splits: Vec<(usize, usize)>,
    /// Per action, (eMBB, uRLLC) compute fractions of C_j; used by learners.
    pub compute: Vec<(f64, f64)>,
}

impl ActionSpace {
    /// The default 13-level space over a grid of `rbs` RBs.
    pub fn standard(rbs: usize) -> Self {
        let raw: [(usize, usize); 13] = [
            (1, 1),
            (2, 1),
            (1, 2),
            (2, 2),
            (3, 2),
            (2, 3),
            (4, 3),
            (3, 4),
            (5, 4),
            (4, 5),
            (6, 5),
            (5, 6),
            (7, 6),
        ];
        let splits: Vec<(usize, usize)> = raw
            .iter()
            .map(|&(e, u)| {
                // Clamp to the grid; the default 13-RB grid needs none.
                let total = e + u;
                if total <= rbs {
                    (e, u)
                } else {
                    let e2 = e * rbs / total;
                    (e2, rbs - e2)
                }
            })
            .collect();
        let n = splits.len();
        let compute: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let cu = 0.25 + 0.5 * i as f64 / (n - 1) as f64;
                (1.0 - cu, cu)
            })
            .collect();
        Self { splits, compute }
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn radio_split(&self, action: usize) -> (usize, usize) {
        self.splits[action]
    }

    pub fn compute_split(&self, action: usize) -> (f64, f64) {
        self.compute[action]
    }
}

/// State/action mapping from the learner's spaces onto the expert's, plus a
/// read-only snapshot of the expert's Q.
#[derive(Debug, Clone)]
pub struct TransferMap {
    expert_q: Vec<f64>,
    expert_actions: usize,
    action_map: Vec<usize>,
}

impl TransferMap {
    pub fn new(expert_q: Vec<f64>, expert_actions: usize, learner_actions: usize) -> Self {
        // Both agents share the Table-III state, so F is the identity; F'
        // projects the learner tuple onto its radio components, which by
        // construction sit at the same index.
        Self { expert_q, expert_actions, action_map: (0..learner_actions).collect() }
    }

    /// F: identity on (q_eMBB, q_uRLLC).
    pub fn map_state(&self, learner_state: (u16, u16)) -> (u16, u16) {
        learner_state
    }

    /// F': projection of (r_e, r_u, c_e, c_u) onto (r_e, r_u).
    pub fn map_action(&self, learner_action: usize) -> usize {
        self.action_map[learner_action]
    }

    /// Q^T(F(s), F'(a)) from the expert snapshot.
    pub fn mapped_q(&self, state_index: usize, learner_action: usize) -> f64 {
        self.expert_q[state_index * self.expert_actions + self.map_action(learner_action)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QMode {
    Table,
    Lstm,
}

/// Learning hyperparameters (Table IV defaults).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LearnParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub lr: f64,
    pub grad_clip: f64,
    pub replay_capacity: usize,
    pub minibatch: usize,
    pub train_interval: u64,
    pub copy_interval: u64,
    pub init_range: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 0.9,
            epsilon: 0.1,
            lr: 0.01,
            grad_clip: 1.0,
            replay_capacity: 60,
            minibatch: 20,
            train_interval: 60,
            copy_interval: 120,
            init_range: 0.1,
        }
    }
}

/// Transition stored for deep training: feature sequences either side.
#[derive(Debug, Clone)]
pub struct SeqTransition {
    pub seq: Vec<Vec<f64>>,
    pub action: usize,
    pub reward: f64,
    pub next_seq: Vec<Vec<f64>>,
}

/// Q-value store with two interchangeable modes: a plain table indexed by
/// discrete state, or an LSTM over encoded feature sequences with replay
/// and a periodically copied target network.
#[derive(Debug, Clone)]
pub struct QApproximator {
    pub mode: QMode,
    pub params: LearnParams,
    actions: usize,
    // table mode
    table: Vec<f64>,
    visited: Vec<bool>,
    transfer: Option<TransferMap>,
    // lstm mode
    online: LstmNet,
    target: LstmNet,
    replay: VecDeque<SeqTransition>,
    steps: u64,
}

impl QApproximator {
    pub fn new_table(n_states: usize, actions: usize, params: LearnParams) -> Self {
        Self {
            mode: QMode::Table,
            params,
            actions,
            table: vec![0.0; n_states * actions],
            visited: vec![false; n_states * actions],
            transfer: None,
            online: LstmNet::zeros(1, 1, 1, 1),
            target: LstmNet::zeros(1, 1, 1, 1),
            replay: VecDeque::new(),
            steps: 0,
        }
    }

    pub fn new_lstm(
        input_dim: usize,
        hidden: usize,
        layers: usize,
        actions: usize,
        params: LearnParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let online = LstmNet::new(input_dim, hidden, layers, actions, params.init_range, rng);
        let target = online.clone();
        Self {
            mode: QMode::Lstm,
            params,
            actions,
            table: Vec::new(),
            visited: Vec::new(),
            transfer: None,
            online,
            target,
            replay: VecDeque::new(),
            steps: 0,
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn set_transfer(&mut self, map: TransferMap) {
        self.transfer = Some(map);
    }

    /// Warm-start the deep nets from another approximator's online weights.
    pub fn adopt_weights(&mut self, other: &QApproximator) {
        self.online = other.online.clone();
        self.target = other.online.clone();
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn replay_contents(&self) -> impl Iterator<Item = &SeqTransition> {
        self.replay.iter()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn online_net(&self) -> &LstmNet {
        &self.online
    }

    pub fn online_net_mut(&mut self) -> &mut LstmNet {
        &mut self.online
    }

    pub fn target_net(&self) -> &LstmNet {
        &self.target
    }

    /// Effective Q-values for action selection. In table mode, unvisited
    /// pairs fall back to the transferred Q so a fresh learner acts on the
    /// expert's knowledge before its first own update.
    pub fn q_values(&self, state_index: usize, seq: &[Vec<f64>]) -> Vec<f64> {
        match self.mode {
            QMode::Table => (0..self.actions)
                .map(|a| self.effective_table_q(state_index, a))
                .collect(),
            QMode::Lstm => self.online.forward(seq),
        }
    }

    fn effective_table_q(&self, state_index: usize, action: usize) -> f64 {
        let idx = state_index * self.actions + action;
        if self.visited[idx] {
            self.table[idx]
        } else if let Some(t) = &self.transfer {
            t.mapped_q(state_index, action)
        } else {
            self.table[idx]
        }
    }

    pub fn table_snapshot(&self) -> Vec<f64> {
        self.table.clone()
    }

    /// Record a transition and run whatever learning is due.
    ///
    /// Returns the training loss when a deep training step ran this call.
    pub fn learn(
        &mut self,
        state_index: usize,
        transition: &SeqTransition,
        next_state_index: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<f64> {
        self.steps += 1;
        match self.mode {
            QMode::Table => {
                let max_next = (0..self.actions)
                    .map(|a| self.effective_table_q(next_state_index, a))
                    .fold(f64::NEG_INFINITY, f64::max);
                let idx = state_index * self.actions + transition.action;
                let q_old = self.table[idx];
                let p = self.params;
                self.table[idx] = if !self.visited[idx] {
                    if let Some(t) = &self.transfer {
                        let mapped = t.mapped_q(state_index, transition.action);
                        q_update_learner(mapped, q_old, transition.reward, max_next, p.alpha, p.gamma)
                    } else {
                        q_update_expert(q_old, transition.reward, max_next, p.alpha, p.gamma)
                    }
                } else {
                    q_update_expert(q_old, transition.reward, max_next, p.alpha, p.gamma)
                };
                self.visited[idx] = true;
                None
            }
            QMode::Lstm => {
                if self.replay.len() == self.params.replay_capacity {
                    self.replay.pop_front();
                }
                self.replay.push_back(transition.clone());
                let mut loss = None;
                if self.steps % self.params.train_interval == 0
                    && self.replay.len() >= self.params.minibatch
                {
                    loss = Some(self.train_minibatch(rng));
                }
                if self.steps % self.params.copy_interval == 0 {
                    self.target = self.online.clone();
                }
                loss
            }
        }
    }

    fn train_minibatch(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let k = self.params.minibatch.min(self.replay.len());
        let picks = sample(rng, self.replay.len(), k);
        let batch: Vec<(Vec<Vec<f64>>, usize, f64)> = picks
            .iter()
            .map(|i| {
                let t = &self.replay[i];
                let next_q = self.target.forward(&t.next_seq);
                let target = t.reward
                    + self.params.gamma * next_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (t.seq.clone(), t.action, target)
            })
            .collect();
        self.online.train_step(&batch, self.params.lr, self.params.grad_clip)
    }
}

/// Write an LSTM (or any flat-parameterized net) checkpoint: text header per
/// tensor followed by whitespace-separated values.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    shapes: &[(String, usize, usize)],
    flat: &[f64],
) -> Result<(), DtrlError> {
    writeln!(w, "slicesim-weights v1")?;
    let mut off = 0;
    for (name, rows, cols) in shapes {
        writeln!(w, "tensor {name} {rows} {cols}")?;
        for r in 0..*rows {
            let row: Vec<String> = (0..*cols)
                .map(|c| format!("{:?}", flat[off + r * cols + c]))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        off += rows * cols;
    }
    Ok(())
}

/// Read a checkpoint produced by [`write_checkpoint`]; returns tensor shapes
/// and the flat value vector.
pub fn read_checkpoint<R: BufRead>(
    r: R,
) -> Result<(Vec<(String, usize, usize)>, Vec<f64>), DtrlError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| DtrlError::Parse("empty checkpoint".into()))??;
    if header.trim() != "slicesim-weights v1" {
        return Err(DtrlError::Parse(format!("unexpected header {header:?}")));
    }
    let mut shapes = Vec::new();
    let mut flat = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(DtrlError::Parse(format!("bad tensor line {line:?}")));
            }
            let rows = parts[1].parse().map_err(|e| DtrlError::Parse(format!("{e}")))?;
            let cols = parts[2].parse().map_err(|e| DtrlError::Parse(format!("{e}")))?;
            shapes.push((parts[0].to_string(), rows, cols));
        } else {
            for tok in line.split_whitespace() {
                flat.push(tok.parse::<f64>().map_err(|e| DtrlError::Parse(format!("{e}")))?);
            }
        }
    }
    let expected: usize = shapes.iter().map(|(_, r, c)| r * c).sum();
    if expected != flat.len() {
        return Err(DtrlError::Parse(format!(
            "value count {} does not match shapes ({expected})",
            flat.len()
        )));
    }
    Ok((shapes, flat))
}

/// Queue-length state encoder: clamps both queues to `q_max` and packs them
/// into one scalar in [0,1], honoring the size-1 input layer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateEncoder {
    pub q_max: u16,
}

impl StateEncoder {
    pub fn clamp(&self, q_embb: usize, q_urllc: usize) -> (u16, u16) {
        (
            (q_embb.min(self.q_max as usize)) as u16,
            (q_urllc.min(self.q_max as usize)) as u16,
        )
    }

    pub fn index(&self, state: (u16, u16)) -> usize {
        let side = self.q_max as usize + 1;
        state.0 as usize * side + state.1 as usize
    }

    pub fn n_states(&self) -> usize {
        let side = self.q_max as usize + 1;
        side * side
    }

    pub fn features(&self, state: (u16, u16)) -> Vec<f64> {
        let max = (self.n_states() - 1) as f64;
        vec![self.index(state) as f64 / max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Expert,
    Learner,
}

/// One slicing agent bound to one gNB for one run phase.
pub struct SliceAgent {
    pub role: AgentRole,
    pub space: ActionSpace,
    pub approx: QApproximator,
    pub encoder: StateEncoder,
    seq_len: usize,
    history: VecDeque<Vec<f64>>,
    prev: Option<(usize, Vec<Vec<f64>>, usize)>,
    last_action: usize,
    rng: ChaCha8Rng,
}

impl SliceAgent {
    pub fn new(
        role: AgentRole,
        space: ActionSpace,
        approx: QApproximator,
        encoder: StateEncoder,
        seq_len: usize,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            role,
            space,
            approx,
            encoder,
            seq_len: seq_len.max(1),
            history: VecDeque::new(),
            prev: None,
            last_action: 0,
            rng,
        }
    }

    fn seq(&self) -> Vec<Vec<f64>> {
        self.history.iter().cloned().collect()
    }

    /// One decision step: completes the previous experience with `reward`,
    /// learns on schedule, and selects the next action.
    ///
    /// `frozen` suppresses both learning and re-selection (the
    /// suspend-learning defense replays the previous action).
    pub fn step(&mut self, q_embb: usize, q_urllc: usize, reward: f64, frozen: bool) -> usize {
        let state = self.encoder.clamp(q_embb, q_urllc);
        let state_index = self.encoder.index(state);
        let features = self.encoder.features(state);
        if self.history.len() == self.seq_len {
            self.history.pop_front();
        }
        self.history.push_back(features);
        let seq = self.seq();

        if frozen {
            // Attack flagged: revert to the previous action, leave Q as-is.
            self.prev = None;
            return self.last_action;
        }

        if let Some((prev_index, prev_seq, prev_action)) = self.prev.take() {
            let transition = SeqTransition {
                seq: prev_seq,
                action: prev_action,
                reward,
                next_seq: seq.clone(),
            };
            self.approx.learn(prev_index, &transition, state_index, &mut self.rng);
        }

        let q_values = self.approx.q_values(state_index, &seq);
        let action = epsilon_greedy(&q_values, self.approx.params.epsilon, &mut self.rng)
            .expect("non-empty action space");
        self.prev = Some((state_index, seq, action));
        self.last_action = action;
        action
    }

    pub fn last_action(&self) -> usize {
        self.last_action
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn q_update_expert_examples() {
        assert!((q_update_expert(0.0, 1.0, 0.0, 0.5, 0.9) - 0.5).abs() < 1e-12);
        assert!((q_update_expert(1.0, 0.0, 1.0, 0.5, 0.9) - 0.95).abs() < 1e-12);
        assert_eq!(q_update_expert(0.7, 5.0, 2.0, 0.0, 0.9), 0.7);
    }

    #[test]
    fn q_update_learner_examples() {
        assert!((q_update_learner(0.0, 0.0, 1.0, 0.0, 0.5, 0.9) - 0.5).abs() < 1e-12);
        assert!((q_update_learner(2.0, 0.0, 1.0, 0.0, 0.5, 0.9) - 2.5).abs() < 1e-12);
        assert_eq!(q_update_learner(0.0, 0.4, 9.0, 9.0, 0.0, 0.9), 0.4);
    }

    /// With q_mapped = 0 Eq. 4 reduces to the rearranged Eq. 3.
    #[test]
    fn learner_update_reduces_to_expert_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let q_old: f64 = rng.gen_range(-5.0..5.0);
            let r: f64 = rng.gen_range(-2.0..2.0);
            let mx: f64 = rng.gen_range(-3.0..3.0);
            let a: f64 = rng.gen_range(0.0..1.0);
            let g: f64 = rng.gen_range(0.0..1.0);
            let lhs = q_update_learner(0.0, q_old, r, mx, a, g);
            let rhs = q_old + a * (r + g * mx - q_old);
            assert!((lhs - rhs).abs() < 1e-12);
            // And the rearranged form equals Eq. 3 itself.
            assert!((rhs - q_update_expert(q_old, r, mx, a, g)).abs() < 1e-9);
        }
    }

    #[test]
    fn epsilon_greedy_pure_argmax_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(epsilon_greedy(&[1.0, 3.0, 2.0], 0.0, &mut rng).unwrap(), 1);
        assert_eq!(epsilon_greedy(&[2.0, 2.0, 1.0], 0.0, &mut rng).unwrap(), 0);
        assert!(matches!(epsilon_greedy(&[], 0.0, &mut rng), Err(DtrlError::EmptyActionSet)));
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[epsilon_greedy(&[9.0, 0.0, -4.0], 1.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "freq {f}");
        }
    }

    #[test]
    fn action_space_is_feasible_by_construction() {
        let space = ActionSpace::standard(13);
        assert_eq!(space.len(), 13);
        for a in 0..space.len() {
            let (e, u) = space.radio_split(a);
            assert!(e + u <= 13);
            let (ce, cu) = space.compute_split(a);
            assert!(ce + cu <= 1.0 + 1e-12);
            assert!(ce >= 0.0 && cu >= 0.0);
        }
    }

    #[test]
    fn transfer_map_projects_and_looks_up() {
        let encoder = StateEncoder { q_max: 4 };
        let mut expert_q = vec![0.0; encoder.n_states() * 13];
        let s = encoder.index((3, 2));
        expert_q[s * 13 + 5] = 1.7;
        let map = TransferMap::new(expert_q, 13, 13);
        assert_eq!(map.map_state((3, 2)), (3, 2));
        assert_eq!(map.map_action(5), 5);
        assert!((map.mapped_q(s, 5) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn replay_keeps_most_recent_60() {
        let params = LearnParams { train_interval: u64::MAX, copy_interval: u64::MAX, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut approx = QApproximator::new_lstm(1, 2, 1, 3, params, &mut rng);
        for i in 0..100u64 {
            let t = SeqTransition {
                seq: vec![vec![i as f64]],
                action: 0,
                reward: i as f64,
                next_seq: vec![vec![i as f64 + 1.0]],
            };
            approx.learn(0, &t, 0, &mut rng);
            assert_eq!(approx.replay_len(), ((i + 1) as usize).min(60));
        }
        let rewards: Vec<f64> = approx.replay_contents().map(|t| t.reward).collect();
        let expected: Vec<f64> = (40..100).map(|i| i as f64).collect();
        assert_eq!(rewards, expected);
    }

    #[test]
    fn target_constant_between_copies() {
        let params = LearnParams {
            train_interval: 10,
            copy_interval: 30,
            minibatch: 4,
            replay_capacity: 60,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut approx = QApproximator::new_lstm(1, 3, 1, 4, params, &mut rng);
        let initial_online = approx.online_net().clone();
        let mut last_target = approx.target_net().clone();
        for i in 0..90u64 {
            let t = SeqTransition {
                seq: vec![vec![(i % 7) as f64 / 7.0]],
                action: (i % 4) as usize,
                reward: ((i % 3) as f64) - 1.0,
                next_seq: vec![vec![((i + 1) % 7) as f64 / 7.0]],
            };
            approx.learn(0, &t, 0, &mut rng);
            if approx.steps() % 30 == 0 {
                // Copy event: target equals online exactly.
                assert_eq!(approx.target_net(), approx.online_net());
                last_target = approx.target_net().clone();
            } else {
                assert_eq!(approx.target_net(), &last_target);
            }
        }
        // Training definitely changed the online net.
        assert_ne!(approx.online_net(), &initial_online);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = LstmNet::new(1, 4, 1, 13, 0.1, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net.tensor_shapes(), &net.to_flat()).unwrap();
        let (shapes, flat) = read_checkpoint(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(shapes, net.tensor_shapes());
        assert_eq!(flat, net.to_flat());
    }

    #[test]
    fn agent_is_deterministic_per_seed() {
        let run = |seed: u64| -> Vec<usize> {
            let space = ActionSpace::standard(13);
            let encoder = StateEncoder { q_max: 100 };
            let params = LearnParams::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let approx = QApproximator::new_lstm(1, 8, 1, 13, params, &mut rng);
            let mut agent =
                SliceAgent::new(AgentRole::Expert, space, approx, encoder, 4, rng);
            (0..300)
                .map(|i| agent.step((i * 7) % 23, (i * 3) % 11, (i % 5) as f64 - 2.0, false))
                .collect()
        };
        assert_eq!(run(9), run(9));
    }

    /// Warm-start: a greedy learner with the expert's optimal table picks the
    /// expert's greedy split before any update of its own.
    #[test]
    fn transfer_warm_start_argmax_invariance() {
        let encoder = StateEncoder { q_max: 4 };
        let mut expert_q = vec![0.0; encoder.n_states() * 13];
        let s = encoder.index((2, 2));
        for a in 0..13 {
            expert_q[s * 13 + a] = -((a as f64) - 7.0).abs();
        }
        let expert_greedy = argmax_tie_lowest(&expert_q[s * 13..(s + 1) * 13]);
        assert_eq!(expert_greedy, 7);

        let mut approx =
            QApproximator::new_table(encoder.n_states(), 13, LearnParams::default());
        approx.set_transfer(TransferMap::new(expert_q, 13, 13));
        let q = approx.q_values(s, &[]);
        assert_eq!(argmax_tie_lowest(&q), expert_greedy);
    }
}
