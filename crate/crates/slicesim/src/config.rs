//! Scenario configuration schema. Every default reproduces the headline
//! simulation settings, so an empty TOML file is a valid full scenario.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dtrl::{LearnParams, QMode};
use crate::netmodel::channel::ChannelParams;
use crate::netmodel::{ObjectiveWeights, RbGrid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    Cja,
    Rja,
    DrlJa,
    Fnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationKind {
    None,
    Suspend,
    DecoyDrl,
    DecoyFnn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub gnb_count: usize,
    pub cell_radius_m: f64,
    pub inter_site_m: f64,
    pub max_tx_power_dbm: f64,
    /// Per-RB transmit power; derived from the max split over the grid when
    /// absent.
    pub per_rb_power_dbm: Option<f64>,
    pub compute_capacity_hz: f64,
    pub cycles_per_bit: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            gnb_count: 3,
            cell_radius_m: 125.0,
            inter_site_m: 500.0,
            max_tx_power_dbm: 40.0,
            per_rb_power_dbm: None,
            compute_capacity_hz: 1e9,
            cycles_per_bit: 200.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub embb_ues_per_gnb: usize,
    pub urllc_ues_per_gnb: usize,
    /// Offered load per cell, Mbps.
    pub embb_load_mbps: f64,
    pub urllc_load_mbps: f64,
    pub embb_packet_bytes: f64,
    pub urllc_packet_bytes: f64,
    /// uRLLC arrival mix: this fraction CBR, the rest Poisson.
    pub urllc_cbr_fraction: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            embb_ues_per_gnb: 25,
            urllc_ues_per_gnb: 10,
            embb_load_mbps: 12.0,
            urllc_load_mbps: 6.0,
            embb_packet_bytes: 100.0,
            urllc_packet_bytes: 50.0,
            urllc_cbr_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    /// HARQ round trip in TTIs.
    pub harq_rtt_ttis: u64,
    pub max_retransmissions: u8,
    /// Decode succeeds iff per-RB SINR is at or above this threshold.
    pub decode_threshold_db: f64,
    /// Central-cloud processing delay used when no MEC is deployed.
    pub cloud_delay_ms: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            harq_rtt_ttis: 4,
            max_retransmissions: 1,
            decode_threshold_db: 0.0,
            cloud_delay_ms: 8.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub mode: QMode,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub seq_len: usize,
    /// State-space bound on observed queue lengths.
    pub q_max: u16,
    /// Sliding window (TTIs) for the reward's averaged KPIs.
    pub reward_window: usize,
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

impl Default for AgentConfig {
    fn default() -> Self {
        let learn = LearnParams::default();
        Self {
            mode: QMode::Lstm,
            hidden_units: 20,
            hidden_layers: 1,
            seq_len: 4,
            q_max: 100,
            reward_window: 50,
            alpha: learn.alpha,
            gamma: learn.gamma,
            epsilon: learn.epsilon,
            lr: learn.lr,
            grad_clip: learn.grad_clip,
            replay_capacity: learn.replay_capacity,
            minibatch: learn.minibatch,
            train_interval: learn.train_interval,
            copy_interval: learn.copy_interval,
            init_range: learn.init_range,
        }
    }
}

impl AgentConfig {
    pub fn learn_params(&self) -> LearnParams {
        LearnParams {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon,
            lr: self.lr,
            grad_clip: self.grad_clip,
            replay_capacity: self.replay_capacity,
            minibatch: self.minibatch,
            train_interval: self.train_interval,
            copy_interval: self.copy_interval,
            init_range: self.init_range,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub target_gnb: usize,
    /// Static jammer position, meters from the target gNB.
    pub jammer_distance_m: f64,
    /// Regulatory maximum energy-detection threshold X_r, dBm.
    pub x_r_dbm: f64,
    /// Energy budget in units of the Eq. 6 reference power times one TTI;
    /// absent means unbounded.
    pub energy_budget_units: Option<f64>,
    pub omega1: f64,
    pub omega2: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub seq_len: usize,
    /// TTIs of monitoring before the attack powers are fixed.
    pub calibration_ttis: u64,
    /// Width of the aimed jam block (RBs).
    pub block_width: usize,
    /// Width of the feedforward jammer's interference shot (RBs).
    pub fnn_block_width: usize,
    /// Subcarriers covered by the constant jammer's fixed span.
    pub cja_span_subcarriers: usize,
    pub fnn_hidden: usize,
    pub fnn_hidden_layers: usize,
    pub fnn_init_range: f64,
    pub fnn_lr: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            target_gnb: 0,
            jammer_distance_m: 100.0,
            x_r_dbm: -52.0,
            energy_budget_units: Some(500.0),
            omega1: 0.5,
            omega2: 0.5,
            gamma: 0.9,
            epsilon: 0.1,
            hidden_units: 20,
            hidden_layers: 1,
            seq_len: 4,
            calibration_ttis: 100,
            block_width: 4,
            fnn_block_width: 2,
            cja_span_subcarriers: 7,
            fnn_hidden: 50,
            fnn_hidden_layers: 2,
            fnn_init_range: 1.0,
            fnn_lr: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub kind: MitigationKind,
    /// Learning rate of the defender's tabular update.
    pub chi: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Relative guard band on the suspend-learning thresholds.
    pub guard_band: f64,
    pub hidden_units: usize,
    pub hidden_layers: usize,
    pub seq_len: usize,
    pub fnn_hidden: usize,
    pub fnn_hidden_layers: usize,
    pub fnn_history: usize,
    pub fnn_init_range: f64,
    pub fnn_lr: f64,
    pub fnn_decoy_count: usize,
    /// Horizon of each knowledge-repository monitor run, TTIs.
    pub repo_horizon_ttis: u64,
    pub repo_runs: usize,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            kind: MitigationKind::None,
            chi: 0.5,
            gamma: 0.9,
            epsilon: 0.1,
            guard_band: 0.05,
            hidden_units: 20,
            hidden_layers: 1,
            seq_len: 4,
            fnn_hidden: 60,
            fnn_hidden_layers: 2,
            fnn_history: 10,
            fnn_init_range: 4.0,
            fnn_lr: 0.5,
            fnn_decoy_count: 4,
            repo_horizon_ttis: 1000,
            repo_runs: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tti_us: f64,
    pub expert_ttis: u64,
    pub learner_ttis: u64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { tti_us: 142.9, expert_ttis: 3000, learner_ttis: 3000, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// EMA window for convergence detection.
    pub ema_window: usize,
    /// |EMA slope| must stay below this...
    pub slope_tolerance: f64,
    /// ...for this many consecutive TTIs.
    pub patience: usize,
    /// RB placement rotation per TTI.
    pub rotation_step: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { ema_window: 100, slope_tolerance: 1e-3, patience: 200, rotation_step: 1 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologyConfig,
    pub grid: RbGrid,
    pub channel: ChannelParams,
    pub traffic: TrafficConfig,
    pub delay: DelayConfig,
    pub objective: ObjectiveWeights,
    pub agent: AgentConfig,
    pub attack: AttackConfig,
    pub mitigation: MitigationConfig,
    pub run: RunConfig,
    pub engine: EngineConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn per_rb_power_dbm(&self) -> f64 {
        self.topology.per_rb_power_dbm.unwrap_or_else(|| {
            self.topology.max_tx_power_dbm - 10.0 * (self.grid.rbgs as f64).log10()
        })
    }

    pub fn tti_s(&self) -> f64 {
        self.run.tti_us * 1e-6
    }

    pub fn tti_ms(&self) -> f64 {
        self.run.tti_us * 1e-3
    }

    /// Full schema and cross-field validation; never touches the filesystem.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        check(self.topology.gnb_count >= 1, "topology.gnb_count: need at least one gNB".into());
        check(self.topology.cell_radius_m > 0.0, "topology.cell_radius_m: must be positive".into());
        check(self.topology.inter_site_m > 0.0, "topology.inter_site_m: must be positive".into());
        check(
            self.per_rb_power_dbm() <= self.topology.max_tx_power_dbm,
            format!(
                "topology.per_rb_power_dbm: {} exceeds max_tx_power_dbm {}",
                self.per_rb_power_dbm(),
                self.topology.max_tx_power_dbm
            ),
        );
        check(self.grid.rbgs > 0, "grid.rbgs: must be positive".into());
        check(self.grid.rbgs <= 16, "grid.rbgs: at most 16 RBGs supported".into());
        check(self.grid.subcarriers > 0, "grid.subcarriers: must be positive".into());
        check(self.grid.bandwidth_mhz > 0.0, "grid.bandwidth_mhz: must be positive".into());
        check(self.channel.shadowing_sigma_db >= 0.0, "channel.shadowing_sigma_db: must be non-negative".into());
        check(self.traffic.embb_load_mbps >= 0.0, "traffic.embb_load_mbps: must be non-negative".into());
        check(self.traffic.urllc_load_mbps >= 0.0, "traffic.urllc_load_mbps: must be non-negative".into());
        check(self.traffic.embb_packet_bytes > 0.0, "traffic.embb_packet_bytes: must be positive".into());
        check(self.traffic.urllc_packet_bytes > 0.0, "traffic.urllc_packet_bytes: must be positive".into());
        check(
            (0.0..=1.0).contains(&self.traffic.urllc_cbr_fraction),
            "traffic.urllc_cbr_fraction: must lie in [0,1]".into(),
        );
        check(self.delay.cloud_delay_ms >= 0.0, "delay.cloud_delay_ms: must be non-negative".into());
        check(self.objective.w_embb >= 0.0, "objective.w_embb: must be non-negative".into());
        check(self.objective.w_urllc >= 0.0, "objective.w_urllc: must be non-negative".into());
        check(self.agent.q_max >= 1, "agent.q_max: must be at least 1".into());
        check(self.agent.reward_window >= 1, "agent.reward_window: must be at least 1".into());
        check(self.agent.hidden_units >= 1, "agent.hidden_units: must be at least 1".into());
        check(self.agent.hidden_layers >= 1, "agent.hidden_layers: must be at least 1".into());
        check(self.agent.seq_len >= 1, "agent.seq_len: must be at least 1".into());
        check(
            (0.0..=1.0).contains(&self.agent.alpha),
            "agent.alpha: must lie in [0,1]".into(),
        );
        check(
            (0.0..=1.0).contains(&self.agent.epsilon),
            "agent.epsilon: must lie in [0,1]".into(),
        );
        check(
            self.attack.target_gnb < self.topology.gnb_count,
            format!(
                "attack.target_gnb: {} out of range for {} gNBs",
                self.attack.target_gnb, self.topology.gnb_count
            ),
        );
        check(self.attack.jammer_distance_m > 0.0, "attack.jammer_distance_m: must be positive".into());
        if let Some(b) = self.attack.energy_budget_units {
            check(b >= 0.0, "attack.energy_budget_units: must be non-negative".into());
        }
        check(
            self.attack.block_width >= 1 && self.attack.block_width <= self.grid.rbgs,
            format!("attack.block_width: must lie in 1..={}", self.grid.rbgs),
        );
        check(
            self.attack.fnn_block_width >= 1 && self.attack.fnn_block_width <= self.grid.rbgs,
            format!("attack.fnn_block_width: must lie in 1..={}", self.grid.rbgs),
        );
        check(self.attack.calibration_ttis >= 1, "attack.calibration_ttis: must be positive".into());
        check(
            self.attack.cja_span_subcarriers >= 1
                && self.attack.cja_span_subcarriers <= self.grid.subcarriers,
            format!("attack.cja_span_subcarriers: must lie in 1..={}", self.grid.subcarriers),
        );
        check(self.mitigation.guard_band >= 0.0, "mitigation.guard_band: must be non-negative".into());
        check(self.mitigation.repo_runs >= 10, "mitigation.repo_runs: need at least 10 monitor runs".into());
        check(self.mitigation.repo_horizon_ttis > 0, "mitigation.repo_horizon_ttis: must be positive".into());
        check(self.run.tti_us > 0.0, "run.tti_us: must be positive".into());
        check(
            self.run.expert_ttis + self.run.learner_ttis > 0,
            "run: total horizon must be positive".into(),
        );
        check(self.engine.ema_window >= 1, "engine.ema_window: must be at least 1".into());
        check(self.engine.patience >= 1, "engine.patience: must be at least 1".into());
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Stable digest of the full configuration, embedded in artifacts.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A named experiment: scenario overrides applied over a base config, a
/// seed list, and recipe selectors.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentManifest {
    pub base: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub recipes: Vec<String>,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub name: String,
    #[serde(default, rename = "override")]
    pub overrides: toml::Table,
}

impl ExperimentManifest {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let manifest: ExperimentManifest = toml::from_str(text)?;
        manifest.validate().map_err(ConfigError::Invalid)?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        self.base.validate().err().into_iter().flatten().for_each(|e| errors.push(format!("base: {e}")));
        let mut names = std::collections::HashSet::new();
        for s in &self.scenarios {
            if !names.insert(&s.name) {
                errors.push(format!("scenario.{}: duplicate name", s.name));
            }
        }
        for (name, _) in self.resolved_scenarios_unchecked() {
            if let Err(scenario_errors) = self.resolve_scenario(&name) {
                if let ConfigError::Invalid(list) = scenario_errors {
                    errors.extend(list.into_iter().map(|e| format!("scenario.{name}: {e}")));
                } else {
                    errors.push(format!("scenario.{name}: {scenario_errors}"));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    fn resolved_scenarios_unchecked(&self) -> Vec<(String, toml::Table)> {
        self.scenarios.iter().map(|s| (s.name.clone(), s.overrides.clone())).collect()
    }

    /// Base config with one scenario's overrides deep-merged on top.
    pub fn resolve_scenario(&self, name: &str) -> Result<ScenarioConfig, ConfigError> {
        let entry = self
            .scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ConfigError::Invalid(vec![format!("unknown scenario {name}")]))?;
        let base_text = toml::to_string(&self.base).expect("base serializes");
        let mut merged: toml::Table = toml::from_str(&base_text).expect("base reparses");
        deep_merge(&mut merged, &entry.overrides);
        let cfg: ScenarioConfig = toml::Value::Table(merged).try_into()?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    /// All (scenario name, seed, resolved config) tuples of the experiment.
    pub fn expand(&self) -> Result<Vec<(String, u64, ScenarioConfig)>, ConfigError> {
        let seeds = if self.seeds.is_empty() { vec![self.base.run.seed] } else { self.seeds.clone() };
        let mut out = Vec::new();
        if self.scenarios.is_empty() {
            for &seed in &seeds {
                let mut cfg = self.base.clone();
                cfg.run.seed = seed;
                out.push(("base".to_string(), seed, cfg));
            }
            return Ok(out);
        }
        for entry in &self.scenarios {
            let cfg = self.resolve_scenario(&entry.name)?;
            for &seed in &seeds {
                let mut cfg = cfg.clone();
                cfg.run.seed = seed;
                out.push((entry.name.clone(), seed, cfg));
            }
        }
        Ok(out)
    }
}

fn deep_merge(base: &mut toml::Table, overlay: &toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_config_is_valid_table_defaults() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg.topology.gnb_count, 3);
        assert_eq!(cfg.grid.rbgs, 13);
        assert_eq!(cfg.grid.subcarriers, 12);
        assert!((cfg.grid.bandwidth_mhz - 20.0).abs() < 1e-12);
        assert!((cfg.run.tti_us - 142.9).abs() < 1e-12);
        assert_eq!(cfg.agent.replay_capacity, 60);
        assert_eq!(cfg.agent.minibatch, 20);
        assert_eq!(cfg.agent.train_interval, 60);
        assert_eq!(cfg.agent.copy_interval, 120);
        assert!((cfg.agent.alpha - 0.5).abs() < 1e-12);
        assert!((cfg.agent.gamma - 0.9).abs() < 1e-12);
        assert!((cfg.agent.epsilon - 0.1).abs() < 1e-12);
        assert!((cfg.channel.shadowing_sigma_db - 8.0).abs() < 1e-12);
        // 40 dBm split over 13 RBGs.
        assert!((cfg.per_rb_power_dbm() - (40.0 - 10.0 * 13f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn zero_rbgs_rejected_with_field_name() {
        let err = ScenarioConfig::from_toml("[grid]\nrbgs = 0\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("grid.rbgs"), "{text}");
    }

    #[test]
    fn attack_kind_typo_lists_allowed_values() {
        let err = ScenarioConfig::from_toml("[attack]\nkind = \"DRLJA\"\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("drl-ja"), "expected allowed values in {text}");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::default();
        let mut b = ScenarioConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.run.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn manifest_merges_overrides_over_base() {
        let text = r#"
            seeds = [1, 2]

            [base.traffic]
            embb_load_mbps = 3.0

            [[scenario]]
            name = "attacked"
            [scenario.override.attack]
            kind = "drl-ja"

            [[scenario]]
            name = "baseline"
        "#;
        let manifest = ExperimentManifest::from_toml(text).unwrap();
        let attacked = manifest.resolve_scenario("attacked").unwrap();
        assert_eq!(attacked.attack.kind, AttackKind::DrlJa);
        // Base override survives the merge.
        assert!((attacked.traffic.embb_load_mbps - 3.0).abs() < 1e-12);
        let baseline = manifest.resolve_scenario("baseline").unwrap();
        assert_eq!(baseline.attack.kind, AttackKind::None);
        let runs = manifest.expand().unwrap();
        assert_eq!(runs.len(), 4);
    }

    #[test]
    fn duplicate_scenario_names_rejected() {
        let text = r#"
            [[scenario]]
            name = "a"
            [[scenario]]
            name = "a"
        "#;
        assert!(ExperimentManifest::from_toml(text).is_err());
    }
}
