// Scratch probe for calibration runs.
use slicesim::config::{AttackKind, MitigationKind, ScenarioConfig};
use slicesim::engine::{run_scenario, Phase};
use slicesim::metrics::KpiSummary;

fn kpis(cfg: &ScenarioConfig) -> (KpiSummary, KpiSummary) {
    let record = run_scenario(cfg).expect("run");
    let e = &cfg.engine;
    (
        KpiSummary::from_record(&record, Phase::Expert, e.ema_window, e.slope_tolerance, e.patience),
        KpiSummary::from_record(&record, Phase::Learner, e.ema_window, e.slope_tolerance, e.patience),
    )
}

fn main() {
    let mut base = ScenarioConfig::default();
    base.run.expert_ttis = 3000;
    base.run.learner_ttis = 3000;
    base.attack.energy_budget_units = Some(1e9);

    for (label, attack, mitigation) in [
        ("none", AttackKind::None, MitigationKind::None),
        ("cja", AttackKind::Cja, MitigationKind::None),
        ("rja", AttackKind::Rja, MitigationKind::None),
        ("drl-ja", AttackKind::DrlJa, MitigationKind::None),
        ("fnn", AttackKind::Fnn, MitigationKind::None),
        ("drlja+decoy", AttackKind::DrlJa, MitigationKind::DecoyDrl),
        ("drlja+suspend", AttackKind::DrlJa, MitigationKind::Suspend),
    ] {
        let mut cfg = base.clone();
        cfg.attack.kind = attack;
        cfg.mitigation.kind = mitigation;
        let start = std::time::Instant::now();
        let (expert, learner) = kpis(&cfg);
        println!(
            "{label:>14}: expert thr {:>6.3} lat {:>6.3} p95 {:>6.3} drop {:>5.3} conv {:?} | learner thr {:>6.3} lat {:>6.3} p95 {:>6.3} drop {:>5.3} conv {:?} reward {:>7.3} ({:.1}s)",
            expert.embb_throughput_mbps,
            expert.urllc_latency_ms,
            expert.urllc_latency_p95_ms,
            expert.urllc_drop_rate,
            expert.convergence_tti,
            learner.embb_throughput_mbps,
            learner.urllc_latency_ms,
            learner.urllc_latency_p95_ms,
            learner.urllc_drop_rate,
            learner.convergence_tti,
            learner.mean_reward,
            start.elapsed().as_secs_f64(),
        );
    }
}
