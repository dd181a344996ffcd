//! Deterministic rule-based assessor: answers the five coverage criteria
//! from structured matching between a technique and a dataset profile.
//!
//! This assessor exists so the full pipeline runs offline and reproducibly;
//! it is a keyword heuristic, not a model, and reports always carry its
//! `assessor_id` so provenance is auditable.

use crate::assess::{
    build_record, Answer, AssessmentRecord, AssessmentSet, CriteriaVector, LabelThresholds,
};
use crate::kb::{DatasetProfile, Domain, FeatureGranularity, KnowledgeBase};
use crate::stix::{Matrix, TechniqueRecord};
use std::collections::BTreeMap;

pub const RULES_ASSESSOR_ID: &str = "rules/v1";

/// Trigger keywords per recommended attack-class tag (lowercase). Unknown
/// tags fall back to matching the tag text itself.
fn class_triggers(tag: &str) -> &'static [&'static str] {
    match tag {
        "brute-force" => &[
            "brute force",
            "password guessing",
            "password spraying",
            "credential stuffing",
        ],
        "dos/ddos" => &["denial of service", "flood", "exhaustion", "amplification"],
        "botnet" => &["botnet", "command and control"],
        "web" => &["web", "http", "sql injection", "cross-site"],
        "heartbleed" => &["heartbleed", "openssl"],
        "infiltration" => &[
            "phishing",
            "drive-by",
            "exploit public-facing",
            "initial access",
            "infiltration",
        ],
        "cyber-physical" => &[
            "plc",
            "controller",
            "actuator",
            "sensor",
            "valve",
            "pump",
            "physical process",
            "field device",
            "program download",
            "safety instrumented",
        ],
        "protocol-manipulation" => &[
            "protocol",
            "function code",
            "modbus",
            "dnp3",
            "iec 104",
            "iec 60870",
            "iec 61850",
            "goose",
            "command message",
            "control message",
        ],
        "lateral-movement" => &[
            "lateral",
            "remote services",
            "smb",
            "admin shares",
            "remote desktop",
            "ssh",
            "winrm",
            "pass the hash",
        ],
        "multi-stage" => &[
            "multi-stage",
            "lateral",
            "pivot",
            "initial access",
            "command and control",
            "staged",
        ],
        _ => &[],
    }
}

/// Technique-text keywords whose attacks remain visible in flow records
/// (volumetric or connection-pattern behaviors).
const FLOW_VISIBLE: [&str; 10] = [
    "denial of service",
    "flood",
    "brute force",
    "scan",
    "botnet",
    "beacon",
    "exfiltration",
    "lateral tool transfer",
    "remote services",
    "amplification",
];

/// Searchable aliases for one profile protocol string: the full name plus
/// tokens of length >= 4 (short tokens like "TCP" or "CIP" are too
/// ambiguous for substring matching), with IEC spellings special-cased.
pub fn protocol_aliases(protocol: &str) -> Vec<String> {
    let lower = protocol.to_lowercase();
    let mut aliases = vec![lower.clone()];
    for separators in [&[' ', '(', ')'][..], &[' ', '(', ')', '/'][..]] {
        for token in lower.split(|c| separators.contains(&c)) {
            if token.len() >= 4 {
                aliases.push(token.to_string());
            }
        }
    }
    if lower.contains("60870") {
        aliases.push("iec 104".to_string());
        aliases.push("60870".to_string());
    }
    if lower.contains("61850") {
        aliases.push("61850".to_string());
    }
    aliases.sort();
    aliases.dedup();
    aliases
}

fn technique_text(technique: &TechniqueRecord) -> String {
    format!("{} {}", technique.name, technique.description).to_lowercase()
}

fn attack_type_present(technique: &TechniqueRecord, profile: &DatasetProfile) -> (Answer, String) {
    if profile.attack_classes.is_empty() {
        return (Answer::Unknown, "profile lists no attack classes".into());
    }
    let text = technique_text(technique);
    for tag in &profile.attack_classes {
        let tag_lower = tag.to_lowercase();
        let triggers = class_triggers(&tag_lower);
        let fallback = [tag_lower.as_str()];
        let keywords: &[&str] = if triggers.is_empty() {
            &fallback
        } else {
            triggers
        };
        for keyword in keywords {
            if text.contains(keyword) {
                return (Answer::Yes, format!("class {tag:?} matched {keyword:?}"));
            }
        }
    }
    (Answer::No, "no class keyword matched".into())
}

fn protocol_recorded(technique: &TechniqueRecord, profile: &DatasetProfile) -> (Answer, String) {
    let protocols = profile.all_protocols();
    if protocols.is_empty() {
        return (Answer::No, "profile lists no protocols".into());
    }
    if technique.description.is_empty() && technique.data_sources.is_empty() {
        return (
            Answer::Unknown,
            "technique lacks description and data sources".into(),
        );
    }
    let haystack = format!(
        "{} {}",
        technique.description,
        technique.data_sources.join(" ")
    )
    .to_lowercase();
    for protocol in protocols {
        for alias in protocol_aliases(protocol) {
            if haystack.contains(&alias) {
                return (Answer::Yes, format!("protocol {protocol:?} named"));
            }
        }
    }
    (Answer::No, "no profile protocol named".into())
}

fn domain_match(technique: &TechniqueRecord, profile: &DatasetProfile) -> (Answer, String) {
    let matched = match profile.domain {
        Domain::Hybrid => true,
        Domain::EnterpriseIT => technique.matrices.contains(&Matrix::Enterprise),
        Domain::IndustrialOT => technique.matrices.contains(&Matrix::Ics),
    };
    let matrices: Vec<&str> = technique.matrices.iter().map(Matrix::as_str).collect();
    let answer = if matched { Answer::Yes } else { Answer::No };
    (
        answer,
        format!("matrices {:?} vs domain {:?}", matrices, profile.domain),
    )
}

fn feature_sufficiency(technique: &TechniqueRecord, profile: &DatasetProfile) -> (Answer, String) {
    match profile.feature_granularity {
        FeatureGranularity::PacketLevel | FeatureGranularity::Mixed => (
            Answer::Yes,
            format!("granularity {:?}", profile.feature_granularity),
        ),
        FeatureGranularity::FlowLevel => {
            let text = technique_text(technique);
            for keyword in FLOW_VISIBLE {
                if text.contains(keyword) {
                    return (Answer::Yes, format!("flow-visible keyword {keyword:?}"));
                }
            }
            (Answer::No, "flow features insufficient".into())
        }
        FeatureGranularity::ProcessTelemetry => (
            Answer::No,
            "process telemetry lacks network features".into(),
        ),
    }
}

fn example_adequacy(profile: &DatasetProfile) -> (Answer, String) {
    let rationale = format!("{} scenarios", profile.scenario_count);
    let answer = match profile.scenario_count {
        n if n >= 5 => Answer::Yes,
        n if n >= 1 => Answer::Unknown,
        _ => Answer::No,
    };
    (answer, rationale)
}

/// Assess one (technique, dataset) pair. Pure: identical inputs yield
/// identical records.
pub fn assess_rule_based(
    technique: &TechniqueRecord,
    profile: &DatasetProfile,
    thresholds: &LabelThresholds,
) -> AssessmentRecord {
    let parts = [
        attack_type_present(technique, profile),
        protocol_recorded(technique, profile),
        domain_match(technique, profile),
        feature_sufficiency(technique, profile),
        example_adequacy(profile),
    ];
    let criteria =
        CriteriaVector::from_answers([parts[0].0, parts[1].0, parts[2].0, parts[3].0, parts[4].0]);
    let rationale = parts
        .iter()
        .map(|(_, evidence)| evidence.as_str())
        .collect::<Vec<_>>()
        .join("; ");
    build_record(
        &technique.attack_id,
        &profile.name,
        RULES_ASSESSOR_ID,
        criteria,
        rationale,
        String::new(),
        thresholds,
    )
}

/// Assess every technique against every KB profile.
pub fn assess_all(
    techniques: &BTreeMap<String, TechniqueRecord>,
    kb: &KnowledgeBase,
    thresholds: &LabelThresholds,
) -> AssessmentSet {
    let mut set = AssessmentSet::new();
    for profile in &kb.profiles {
        for technique in techniques.values() {
            let record = assess_rule_based(technique, profile, thresholds);
            set.insert((profile.name.clone(), technique.attack_id.clone()), record);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assess::CoverageLabel;
    use std::collections::BTreeSet;

    fn technique(
        id: &str,
        name: &str,
        description: &str,
        matrices: &[Matrix],
        sources: &[&str],
    ) -> TechniqueRecord {
        TechniqueRecord {
            attack_id: id.into(),
            name: name.into(),
            matrices: matrices.iter().copied().collect(),
            data_sources: sources.iter().map(|s| s.to_string()).collect(),
            is_subtechnique: id.contains('.'),
            description: description.into(),
            stix_ids: BTreeSet::new(),
        }
    }

    fn profile(
        name: &str,
        domain: Domain,
        granularity: FeatureGranularity,
        classes: &[&str],
        industrial: &[&str],
        enterprise: &[&str],
        scenarios: i64,
    ) -> DatasetProfile {
        DatasetProfile {
            name: name.into(),
            year: 2020,
            domain,
            industrial_protocols: industrial.iter().map(|s| s.to_string()).collect(),
            enterprise_protocols: enterprise.iter().map(|s| s.to_string()).collect(),
            attack_classes: classes.iter().map(|s| s.to_string()).collect(),
            scenario_count: scenarios,
            feature_granularity: granularity,
            limitations: vec![],
            annotations: BTreeMap::new(),
        }
    }

    #[test]
    fn ics_technique_against_enterprise_profile_fails_domain() {
        let t = technique("T0804", "Program PLC", "", &[Matrix::Ics], &[]);
        let p = profile(
            "EntOnly",
            Domain::EnterpriseIT,
            FeatureGranularity::PacketLevel,
            &[],
            &[],
            &[],
            10,
        );
        let record = assess_rule_based(&t, &p, &LabelThresholds::default());
        assert_eq!(record.criteria.domain_match, Answer::No);
    }

    #[test]
    fn hybrid_profile_matches_both_matrices() {
        let thresholds = LabelThresholds::default();
        let p = profile(
            "Hyb",
            Domain::Hybrid,
            FeatureGranularity::Mixed,
            &[],
            &[],
            &[],
            3,
        );
        for matrices in [&[Matrix::Enterprise][..], &[Matrix::Ics][..]] {
            let t = technique("T0001", "Anything", "", matrices, &["Network Traffic"]);
            let record = assess_rule_based(&t, &p, &thresholds);
            assert_eq!(record.criteria.domain_match, Answer::Yes);
        }
    }

    #[test]
    fn all_yes_pair_scores_full() {
        let t = technique(
            "T1110",
            "Brute Force",
            "Adversaries may guess passwords over ssh sessions.",
            &[Matrix::Enterprise],
            &["Network Traffic: Network Traffic Flow"],
        );
        let p = profile(
            "Ent",
            Domain::EnterpriseIT,
            FeatureGranularity::PacketLevel,
            &["brute-force"],
            &[],
            &["SSH"],
            6,
        );
        let record = assess_rule_based(&t, &p, &LabelThresholds::default());
        assert_eq!(record.criteria.answers(), [Answer::Yes; 5]);
        assert!((record.score - 1.0).abs() < 1e-12);
        assert_eq!(record.label, CoverageLabel::Full);
        assert_eq!(record.assessor_id, RULES_ASSESSOR_ID);
    }

    #[test]
    fn example_adequacy_bands() {
        let t = technique("T0001", "X", "", &[Matrix::Enterprise], &[]);
        let thresholds = LabelThresholds::default();
        for (count, expected) in [
            (36, Answer::Yes),
            (5, Answer::Yes),
            (4, Answer::Unknown),
            (1, Answer::Unknown),
            (0, Answer::No),
        ] {
            let p = profile(
                "P",
                Domain::Hybrid,
                FeatureGranularity::Mixed,
                &[],
                &[],
                &[],
                count,
            );
            let record = assess_rule_based(&t, &p, &thresholds);
            assert_eq!(record.criteria.example_adequacy, expected, "count {count}");
        }
    }

    #[test]
    fn protocol_aliases_cover_industrial_spellings() {
        let iec = protocol_aliases("IEC 60870-5-104");
        assert!(iec.contains(&"iec 60870-5-104".to_string()));
        assert!(iec.contains(&"60870-5-104".to_string()));
        assert!(iec.contains(&"iec 104".to_string()));
        assert!(iec.contains(&"60870".to_string()));

        let modbus = protocol_aliases("Modbus/TCP");
        assert!(modbus.contains(&"modbus".to_string()));
        assert!(modbus.contains(&"modbus/tcp".to_string()));
        assert!(!modbus.contains(&"tcp".to_string()));

        let enip = protocol_aliases("EtherNet/IP (CIP)");
        assert!(enip.contains(&"ethernet/ip".to_string()));
        assert!(enip.contains(&"ethernet".to_string()));
        assert!(!enip.contains(&"cip".to_string()));
    }

    #[test]
    fn protocol_recorded_dispositions() {
        let thresholds = LabelThresholds::default();
        let named = technique(
            "T0855",
            "Unauthorized Command Message",
            "Adversaries may send unauthorized command messages over iec 104 links.",
            &[Matrix::Ics],
            &[],
        );
        let sherlock_like = profile(
            "S",
            Domain::Hybrid,
            FeatureGranularity::Mixed,
            &[],
            &["IEC 60870-5-104"],
            &[],
            3,
        );
        assert_eq!(
            assess_rule_based(&named, &sherlock_like, &thresholds)
                .criteria
                .protocol_recorded,
            Answer::Yes
        );

        let no_protocols = profile(
            "NP",
            Domain::Hybrid,
            FeatureGranularity::Mixed,
            &[],
            &[],
            &[],
            3,
        );
        assert_eq!(
            assess_rule_based(&named, &no_protocols, &thresholds)
                .criteria
                .protocol_recorded,
            Answer::No
        );

        let bare = technique("T0001", "Bare", "", &[Matrix::Ics], &[]);
        assert_eq!(
            assess_rule_based(&bare, &sherlock_like, &thresholds)
                .criteria
                .protocol_recorded,
            Answer::Unknown
        );
    }

    #[test]
    fn attack_type_uses_class_triggers_and_fallback() {
        let thresholds = LabelThresholds::default();
        let lateral = technique(
            "T1021.002",
            "Remote Services: SMB/Windows Admin Shares",
            "Adversaries may use valid accounts to interact with a remote network share.",
            &[Matrix::Enterprise],
            &[],
        );
        let tagged = profile(
            "P",
            Domain::EnterpriseIT,
            FeatureGranularity::Mixed,
            &["lateral-movement"],
            &[],
            &[],
            9,
        );
        assert_eq!(
            assess_rule_based(&lateral, &tagged, &thresholds)
                .criteria
                .attack_type_present,
            Answer::Yes
        );

        // Free-text tag outside the vocabulary matches as literal substring.
        let ransom = technique(
            "T1486",
            "Data Encrypted for Impact",
            "Ransomware may encrypt data on target systems.",
            &[Matrix::Enterprise],
            &[],
        );
        let free_tag = profile(
            "P2",
            Domain::EnterpriseIT,
            FeatureGranularity::Mixed,
            &["Ransomware"],
            &[],
            &[],
            9,
        );
        assert_eq!(
            assess_rule_based(&ransom, &free_tag, &thresholds)
                .criteria
                .attack_type_present,
            Answer::Yes
        );

        let untagged = profile(
            "P3",
            Domain::EnterpriseIT,
            FeatureGranularity::Mixed,
            &[],
            &[],
            &[],
            9,
        );
        assert_eq!(
            assess_rule_based(&ransom, &untagged, &thresholds)
                .criteria
                .attack_type_present,
            Answer::Unknown
        );
    }

    #[test]
    fn feature_sufficiency_depends_on_granularity() {
        let thresholds = LabelThresholds::default();
        let volumetric = technique(
            "T1498",
            "Network Denial of Service",
            "Adversaries may flood target networks.",
            &[Matrix::Enterprise],
            &[],
        );
        let stealthy = technique(
            "T0804",
            "Program PLC",
            "Adversaries may transfer a program to a controller.",
            &[Matrix::Ics],
            &[],
        );
        let mk = |granularity| profile("P", Domain::Hybrid, granularity, &[], &[], &[], 9);
        let check = |t: &TechniqueRecord, granularity, expected| {
            let record = assess_rule_based(t, &mk(granularity), &thresholds);
            assert_eq!(record.criteria.feature_sufficiency, expected);
        };
        check(&volumetric, FeatureGranularity::FlowLevel, Answer::Yes);
        check(&stealthy, FeatureGranularity::FlowLevel, Answer::No);
        check(&stealthy, FeatureGranularity::PacketLevel, Answer::Yes);
        check(&stealthy, FeatureGranularity::Mixed, Answer::Yes);
        check(
            &volumetric,
            FeatureGranularity::ProcessTelemetry,
            Answer::No,
        );
    }

    #[test]
    fn assessment_is_pure() {
        let t = technique(
            "T1570",
            "Lateral Tool Transfer",
            "Transfer tools via smb.",
            &[Matrix::Enterprise],
            &["Network Traffic"],
        );
        let p = profile(
            "P",
            Domain::EnterpriseIT,
            FeatureGranularity::FlowLevel,
            &["lateral-movement"],
            &[],
            &["SSH"],
            6,
        );
        let thresholds = LabelThresholds::default();
        assert_eq!(
            assess_rule_based(&t, &p, &thresholds),
            assess_rule_based(&t, &p, &thresholds)
        );
    }
}
