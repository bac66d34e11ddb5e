// Deep-dive diagnostics for one attacked run.
use slicesim::config::{AttackKind, MitigationKind, ScenarioConfig};
use slicesim::engine::{run_scenario, Phase};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.run.expert_ttis = 3000;
    cfg.run.learner_ttis = 3000;
    cfg.attack.energy_budget_units = Some(1e9);
    let kind = std::env::args().nth(1).unwrap_or_else(|| "cja".into());
    cfg.attack.kind = match kind.as_str() {
        "none" => AttackKind::None,
        "cja" => AttackKind::Cja,
        "rja" => AttackKind::Rja,
        "drl-ja" => AttackKind::DrlJa,
        "fnn" => AttackKind::Fnn,
        other => panic!("unknown attack {other}"),
    };
    if std::env::args().nth(2).as_deref() == Some("decoy") {
        cfg.mitigation.kind = MitigationKind::DecoyDrl;
    }

    let record = run_scenario(&cfg).expect("run");
    for phase in [Phase::Expert, Phase::Learner] {
        let recs: Vec<_> = record.phase_records(phase).collect();
        let n = recs.len() as f64;
        let alloc_mean = recs.iter().map(|t| t.allocated.count_ones() as f64).sum::<f64>() / n;
        let jam_ttis = recs.iter().filter(|t| t.jammed != 0).count();
        let hits = recs.iter().map(|t| t.jam_hits as f64).sum::<f64>() / n;
        let misses = recs.iter().map(|t| t.jam_misses as f64).sum::<f64>() / n;
        let jam_pow: Vec<f64> =
            recs.iter().filter(|t| t.jammed != 0).map(|t| t.jam_tx_power_mw).collect();
        let jam_pow_mean = jam_pow.iter().sum::<f64>() / jam_pow.len().max(1) as f64;
        let sinr_mean = recs.iter().map(|t| t.mean_sinr).sum::<f64>() / n;
        let embb = recs.iter().map(|t| t.embb_mbps).sum::<f64>() / n;
        let lat: Vec<f64> =
            recs.iter().flat_map(|t| t.urllc_latencies_ms.iter().copied()).collect();
        let lat_mean = lat.iter().sum::<f64>() / lat.len().max(1) as f64;
        let drops: u32 = recs.iter().map(|t| t.urllc_drops + t.embb_drops).sum();
        let decoy_mean = recs.iter().map(|t| t.decoys.count_ones() as f64).sum::<f64>() / n;
        let reward_first: f64 = recs.iter().take(200).map(|t| t.reward).sum::<f64>() / 200.0;
        let reward_last: f64 = recs.iter().rev().take(200).map(|t| t.reward).sum::<f64>() / 200.0;
        println!(
            "{phase:?}: alloc {alloc_mean:.2} | jam ttis {jam_ttis} hits/tti {hits:.2} misses/tti {misses:.2} txpow {jam_pow_mean:.1} mW | decoys {decoy_mean:.2} | sinr {sinr_mean:.1} | thr {embb:.3} lat {lat_mean:.3} drops {drops} | reward {reward_first:.2} -> {reward_last:.2}"
        );
    }
}
