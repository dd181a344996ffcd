//! Frequency and risk scoring over the threat model.
//!
//! Each technique gets `frequency_score = log2(occurrence_count + 1)` and a
//! combined risk. The default combiner scales a base severity by frequency,
//! `base * (0.5 + 0.1 * frequency)`, so a zero-frequency technique keeps half
//! its base weight; the additive alternative is `base + frequency`.

use crate::stix::is_valid_technique_id;
use crate::threat::ThreatModel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_BASE_RISK: f64 = 5.0;

/// Per-technique base severities with a `_default` fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRiskTable {
    pub default: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Default for BaseRiskTable {
    fn default() -> Self {
        BaseRiskTable {
            default: DEFAULT_BASE_RISK,
            overrides: BTreeMap::new(),
        }
    }
}

impl BaseRiskTable {
    pub fn lookup(&self, technique_id: &str) -> f64 {
        self.overrides
            .get(technique_id)
            .copied()
            .unwrap_or(self.default)
    }
}

/// How base severity and frequency combine into `weighted_risk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskCombiner {
    #[default]
    Weighted,
    Additive,
}

impl std::str::FromStr for RiskCombiner {
    type Err = RiskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(RiskCombiner::Weighted),
            "additive" => Ok(RiskCombiner::Additive),
            other => Err(RiskError::UnknownCombiner(other.to_string())),
        }
    }
}

/// Scoring output for one technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub attack_id: String,
    pub name: String,
    pub occurrence_count: usize,
    pub frequency_score: f64,
    pub base_risk: f64,
    pub weighted_risk: f64,
}

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("base-risk table is not a JSON object of technique -> score: {0}")]
    TableParse(String),
    #[error("base-risk key {0:?} is not a technique id (use \"_default\" for the fallback)")]
    InvalidKey(String),
    #[error("base-risk score for {0:?} is {1}, outside 0..=10")]
    ScoreOutOfRange(String, f64),
    #[error("unknown risk combiner {0:?} (expected \"weighted\" or \"additive\")")]
    UnknownCombiner(String),
}

/// Parse a base-risk file: `{"T1021.002": 8.5, "_default": 5.0}`.
/// A missing `_default` falls back to 5.0 with a warning.
pub fn load_base_risk(raw_json_text: &str) -> Result<BaseRiskTable, RiskError> {
    let raw: BTreeMap<String, f64> =
        serde_json::from_str(raw_json_text).map_err(|e| RiskError::TableParse(e.to_string()))?;
    let mut table = BaseRiskTable {
        default: DEFAULT_BASE_RISK,
        overrides: BTreeMap::new(),
    };
    let mut saw_default = false;
    for (key, score) in raw {
        if !score.is_finite() || !(0.0..=10.0).contains(&score) {
            return Err(RiskError::ScoreOutOfRange(key, score));
        }
        if key == "_default" {
            table.default = score;
            saw_default = true;
        } else if is_valid_technique_id(&key) {
            table.overrides.insert(key, score);
        } else {
            return Err(RiskError::InvalidKey(key));
        }
    }
    if !saw_default {
        log::warn!("base-risk table has no \"_default\" entry; using {DEFAULT_BASE_RISK}");
    }
    Ok(table)
}

pub fn frequency_score(occurrence_count: usize) -> f64 {
    ((occurrence_count + 1) as f64).log2()
}

pub fn weighted_risk(base: f64, frequency: f64, combiner: RiskCombiner) -> f64 {
    match combiner {
        RiskCombiner::Weighted => base * (0.5 + 0.1 * frequency),
        RiskCombiner::Additive => base + frequency,
    }
}

/// Score every technique in the model and rank the result by descending
/// `weighted_risk`, breaking ties by ascending technique id.
pub fn score_profiles(
    model: &ThreatModel,
    table: &BaseRiskTable,
    combiner: RiskCombiner,
) -> Vec<RiskProfile> {
    let mut profiles: Vec<RiskProfile> = model
        .occurrences
        .iter()
        .map(|(attack_id, entities)| {
            let frequency = frequency_score(entities.len());
            let base = table.lookup(attack_id);
            RiskProfile {
                attack_id: attack_id.clone(),
                name: model.techniques[attack_id].name.clone(),
                occurrence_count: entities.len(),
                frequency_score: frequency,
                base_risk: base,
                weighted_risk: weighted_risk(base, frequency, combiner),
            }
        })
        .collect();
    profiles.sort_by(|a, b| {
        b.weighted_risk
            .total_cmp(&a.weighted_risk)
            .then_with(|| a.attack_id.cmp(&b.attack_id))
    });
    profiles
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn frequency_matches_log_formula() {
        assert_eq!(frequency_score(0), 0.0);
        assert!(close(frequency_score(1), 1.0));
        assert!(close(frequency_score(2), 1.584962500721156));
        assert!(close(frequency_score(3), 2.0));
        assert!(close(frequency_score(7), 3.0));
    }

    #[test]
    fn weighted_combiner_matches_hand_computation() {
        // base 5, count 2: 5 * (0.5 + 0.1 * log2(3)) = 3.292481250360578
        let freq = frequency_score(2);
        assert!(close(
            weighted_risk(5.0, freq, RiskCombiner::Weighted),
            3.292481250360578
        ));
        // base 5, count 1: 5 * 0.6 = 3.0
        assert!(close(
            weighted_risk(5.0, frequency_score(1), RiskCombiner::Weighted),
            3.0
        ));
        // zero frequency keeps half the base.
        assert!(close(weighted_risk(8.0, 0.0, RiskCombiner::Weighted), 4.0));
    }

    #[test]
    fn additive_combiner_is_plain_sum() {
        assert!(close(
            weighted_risk(8.5, frequency_score(3), RiskCombiner::Additive),
            10.5
        ));
    }

    #[test]
    fn base_risk_table_parses_and_looks_up() {
        let table = load_base_risk(r#"{"T1021.002": 8.5, "_default": 4.0}"#).unwrap();
        assert_eq!(table.lookup("T1021.002"), 8.5);
        assert_eq!(table.lookup("T9999"), 4.0);

        let defaulted = load_base_risk(r#"{"T1566": 7.0}"#).unwrap();
        assert_eq!(defaulted.default, DEFAULT_BASE_RISK);

        assert!(matches!(
            load_base_risk(r#"{"G0034": 5.0}"#),
            Err(RiskError::InvalidKey(_))
        ));
        assert!(matches!(
            load_base_risk(r#"{"T1566": 11.0}"#),
            Err(RiskError::ScoreOutOfRange(_, _))
        ));
        assert!(matches!(
            load_base_risk(r#"[1, 2]"#),
            Err(RiskError::TableParse(_))
        ));
    }

    #[test]
    fn combiner_parses_from_cli_strings() {
        assert_eq!(
            "weighted".parse::<RiskCombiner>().unwrap(),
            RiskCombiner::Weighted
        );
        assert_eq!(
            "additive".parse::<RiskCombiner>().unwrap(),
            RiskCombiner::Additive
        );
        assert!("geometric".parse::<RiskCombiner>().is_err());
    }

    #[test]
    fn ranking_orders_by_risk_then_id() {
        use crate::stix::{merge_matrices, parse_bundle, Matrix};
        use crate::threat::extract_occurrences;
        let dir = format!("{}/../../fixtures/bundles", env!("CARGO_MANIFEST_DIR"));
        let graph = merge_matrices(
            parse_bundle(
                &std::fs::read_to_string(format!("{dir}/enterprise_small.json")).unwrap(),
                Matrix::Enterprise,
            )
            .unwrap(),
            parse_bundle(
                &std::fs::read_to_string(format!("{dir}/ics_small.json")).unwrap(),
                Matrix::Ics,
            )
            .unwrap(),
        );
        let model = extract_occurrences(
            &graph,
            &["G0034".into(), "S0603".into(), "S0604".into()],
            true,
        )
        .unwrap();
        let profiles = score_profiles(&model, &BaseRiskTable::default(), RiskCombiner::Weighted);
        let order: Vec<&str> = profiles.iter().map(|p| p.attack_id.as_str()).collect();
        // Counts of 2 outrank counts of 1; ties fall back to id order.
        assert_eq!(order, vec!["T0804", "T0805", "T0890", "T1021.002", "T1570"]);
        assert!(close(profiles[0].weighted_risk, 3.292481250360578));
        assert!(close(profiles[2].weighted_risk, 3.0));
    }

    proptest! {
        #[test]
        fn frequency_is_monotone(a in 0usize..10_000, b in 0usize..10_000) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(frequency_score(lo) <= frequency_score(hi));
        }

        #[test]
        fn weighted_risk_is_monotone_in_both_inputs(
            base in 0.0f64..10.0,
            f1 in 0.0f64..16.0,
            f2 in 0.0f64..16.0,
            delta in 0.0f64..5.0,
        ) {
            let (lo, hi) = (f1.min(f2), f1.max(f2));
            for combiner in [RiskCombiner::Weighted, RiskCombiner::Additive] {
                prop_assert!(weighted_risk(base, lo, combiner) <= weighted_risk(base, hi, combiner));
                prop_assert!(
                    weighted_risk(base, f1, combiner) <= weighted_risk((base + delta).min(10.0), f1, combiner)
                );
            }
        }

        #[test]
        fn additive_is_exact_sum(base in 0.0f64..10.0, freq in 0.0f64..16.0) {
            prop_assert_eq!(weighted_risk(base, freq, RiskCombiner::Additive), base + freq);
        }
    }
}
