//! Named experiment recipes reproducing the headline figures and tables:
//! convergence curves, latency eCDFs, KPI sweeps over UE counts and
//! attacker network capacity, and the attacker-vs-mitigation matrices.

use crate::config::{AttackKind, MitigationKind, ScenarioConfig};

/// One recipe: a labeled set of scenario configs plus how to post-process
/// them.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
}

pub const RECIPES: &[Recipe] = &[
    Recipe { name: "fig4", description: "expert/learner reward convergence under no attack, CJA, RJA, DRL-JA" },
    Recipe { name: "fig5", description: "uRLLC latency eCDF per agent under no attack, CJA, RJA, DRL-JA" },
    Recipe { name: "fig6", description: "expert KPIs vs uRLLC UE count under attacks and mitigations" },
    Recipe { name: "fig7", description: "expert KPIs vs DRL-JA hidden units and layers" },
    Recipe { name: "fig8", description: "learner KPIs vs uRLLC UE count under attacks and mitigations" },
    Recipe { name: "fig9", description: "learner KPIs vs DRL-JA hidden units and layers" },
    Recipe { name: "table5", description: "attacker NN (FNN vs DRL-JA) degradation matrix" },
    Recipe { name: "table6", description: "attacker x mitigation NN throughput recovery matrix" },
    Recipe { name: "table7", description: "attacker x mitigation NN latency recovery matrix" },
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}

fn with_attack(base: &ScenarioConfig, kind: AttackKind) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.attack.kind = kind;
    cfg
}

fn with_mitigation(base: &ScenarioConfig, kind: MitigationKind) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.mitigation.kind = kind;
    cfg
}

pub fn attack_label(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::None => "none",
        AttackKind::Cja => "cja",
        AttackKind::Rja => "rja",
        AttackKind::DrlJa => "drl-ja",
        AttackKind::Fnn => "fnn",
    }
}

pub fn mitigation_label(kind: MitigationKind) -> &'static str {
    match kind {
        MitigationKind::None => "none",
        MitigationKind::Suspend => "suspend",
        MitigationKind::DecoyDrl => "decoy-drl",
        MitigationKind::DecoyFnn => "decoy-fnn",
    }
}

/// Scenario set for one recipe, as (scenario name, config) pairs. Seeds are
/// applied by the caller.
pub fn scenarios(recipe: &str, base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    match recipe {
        "fig4" | "fig5" => [AttackKind::None, AttackKind::Cja, AttackKind::Rja, AttackKind::DrlJa]
            .iter()
            .map(|&kind| (format!("attack-{}", attack_label(kind)), with_attack(base, kind)))
            .collect(),
        "fig6" | "fig8" => {
            let mut out = Vec::new();
            for ues in [10usize, 20, 30] {
                for (attack, mitigation) in [
                    (AttackKind::None, MitigationKind::None),
                    (AttackKind::Cja, MitigationKind::None),
                    (AttackKind::DrlJa, MitigationKind::None),
                    (AttackKind::DrlJa, MitigationKind::Suspend),
                    (AttackKind::DrlJa, MitigationKind::DecoyDrl),
                ] {
                    let mut cfg = with_mitigation(&with_attack(base, attack), mitigation);
                    cfg.traffic.urllc_ues_per_gnb = ues;
                    out.push((
                        format!(
                            "ues{ues}-{}-{}",
                            attack_label(attack),
                            mitigation_label(mitigation)
                        ),
                        cfg,
                    ));
                }
            }
            out
        }
        "fig7" | "fig9" => {
            let mut out = Vec::new();
            for units in [10usize, 20, 30, 40] {
                let mut cfg = with_attack(base, AttackKind::DrlJa);
                cfg.attack.hidden_units = units;
                out.push((format!("units{units}"), cfg));
            }
            for layers in [1usize, 2, 3] {
                let mut cfg = with_attack(base, AttackKind::DrlJa);
                cfg.attack.hidden_layers = layers;
                out.push((format!("layers{layers}"), cfg));
            }
            out.push(("baseline".to_string(), base.clone()));
            out
        }
        "table5" => vec![
            ("attack-none".to_string(), base.clone()),
            ("attack-fnn".to_string(), with_attack(base, AttackKind::Fnn)),
            ("attack-drl-ja".to_string(), with_attack(base, AttackKind::DrlJa)),
        ],
        "table6" | "table7" => {
            let mut out = vec![("attack-none".to_string(), base.clone())];
            for attack in [AttackKind::Fnn, AttackKind::DrlJa] {
                for mitigation in
                    [MitigationKind::None, MitigationKind::DecoyFnn, MitigationKind::DecoyDrl]
                {
                    let cfg = with_mitigation(&with_attack(base, attack), mitigation);
                    out.push((
                        format!("{}-{}", attack_label(attack), mitigation_label(mitigation)),
                        cfg,
                    ));
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_recipe_expands() {
        let base = ScenarioConfig::default();
        for recipe in RECIPES {
            let set = scenarios(recipe.name, &base);
            assert!(!set.is_empty(), "{} produced no scenarios", recipe.name);
            for (name, cfg) in &set {
                assert!(cfg.validate().is_ok(), "{name} invalid");
            }
        }
        assert!(find("fig4").is_some());
        assert!(find("nope").is_none());
    }

    #[test]
    fn unknown_recipe_is_empty() {
        assert!(scenarios("nope", &ScenarioConfig::default()).is_empty());
    }
}
