//! Network-detectability classification of techniques by their data sources.
//!
//! Each data-source label is matched case-insensitively against configurable
//! network and host keyword lists; a technique is `Network` when only network
//! keywords hit, `HostPhysical` when only host keywords hit, `Partial` when
//! both do, and `Unclassified` when neither does (or it has no data sources).

use crate::stix::TechniqueRecord;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Where evidence for a technique can be observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectabilityLabel {
    Network,
    HostPhysical,
    Partial,
    Unclassified,
}

impl DetectabilityLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectabilityLabel::Network => "Network",
            DetectabilityLabel::HostPhysical => "HostPhysical",
            DetectabilityLabel::Partial => "Partial",
            DetectabilityLabel::Unclassified => "Unclassified",
        }
    }
}

/// Keyword lists steering the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordConfig {
    pub network: Vec<String>,
    pub host: Vec<String>,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        KeywordConfig {
            network: [
                "Network",
                "Packet",
                "Protocol",
                "ICS Network",
                "Network Traffic",
            ]
            .map(String::from)
            .to_vec(),
            host: [
                "Process",
                "File",
                "Registry",
                "Memory",
                "Sensor",
                "Kernel",
                "Application Log",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

/// Classification of one technique, with the keywords that matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityRecord {
    pub attack_id: String,
    pub label: DetectabilityLabel,
    pub matched_network: Vec<String>,
    pub matched_host: Vec<String>,
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("keyword config is not a JSON object with \"network\" and \"host\" lists: {0}")]
    ConfigParse(String),
    #[error("keyword list {0:?} is empty or contains an empty string")]
    EmptyKeyword(&'static str),
}

/// Parse a keyword-config file: `{"network": [...], "host": [...]}`.
pub fn load_keywords(raw_json_text: &str) -> Result<KeywordConfig, DetectError> {
    let config: KeywordConfig =
        serde_json::from_str(raw_json_text).map_err(|e| DetectError::ConfigParse(e.to_string()))?;
    for (name, list) in [("network", &config.network), ("host", &config.host)] {
        if list.is_empty() || list.iter().any(String::is_empty) {
            return Err(DetectError::EmptyKeyword(match name {
                "network" => "network",
                _ => "host",
            }));
        }
    }
    Ok(config)
}

fn matching_keywords<'k>(sources: &[String], keywords: &'k [String]) -> Vec<&'k str> {
    let lowered: Vec<String> = sources.iter().map(|s| s.to_lowercase()).collect();
    let mut hits: BTreeSet<&str> = BTreeSet::new();
    for keyword in keywords {
        let needle = keyword.to_lowercase();
        if lowered.iter().any(|source| source.contains(&needle)) {
            hits.insert(keyword);
        }
    }
    hits.into_iter().collect()
}

/// Classify one technique's data-source labels.
pub fn classify_sources(sources: &[String], keywords: &KeywordConfig) -> DetectabilityLabel {
    let network_hit = !matching_keywords(sources, &keywords.network).is_empty();
    let host_hit = !matching_keywords(sources, &keywords.host).is_empty();
    match (network_hit, host_hit) {
        (true, false) => DetectabilityLabel::Network,
        (false, true) => DetectabilityLabel::HostPhysical,
        (true, true) => DetectabilityLabel::Partial,
        (false, false) => DetectabilityLabel::Unclassified,
    }
}

/// Classify every technique in `techniques`, keeping matched keywords as
/// evidence for the report.
pub fn classify_model(
    techniques: &BTreeMap<String, TechniqueRecord>,
    keywords: &KeywordConfig,
) -> BTreeMap<String, DetectabilityRecord> {
    techniques
        .iter()
        .map(|(id, technique)| {
            let matched_network: Vec<String> =
                matching_keywords(&technique.data_sources, &keywords.network)
                    .into_iter()
                    .map(String::from)
                    .collect();
            let matched_host: Vec<String> =
                matching_keywords(&technique.data_sources, &keywords.host)
                    .into_iter()
                    .map(String::from)
                    .collect();
            let label = match (!matched_network.is_empty(), !matched_host.is_empty()) {
                (true, false) => DetectabilityLabel::Network,
                (false, true) => DetectabilityLabel::HostPhysical,
                (true, true) => DetectabilityLabel::Partial,
                (false, false) => DetectabilityLabel::Unclassified,
            };
            (
                id.clone(),
                DetectabilityRecord {
                    attack_id: id.clone(),
                    label,
                    matched_network,
                    matched_host,
                },
            )
        })
        .collect()
}

/// Ids that stay in scope for coverage assessment: `Network` always,
/// `Partial` when `include_partial` is set.
pub fn network_visible(
    records: &BTreeMap<String, DetectabilityRecord>,
    include_partial: bool,
) -> Vec<String> {
    records
        .values()
        .filter(|record| {
            record.label == DetectabilityLabel::Network
                || (include_partial && record.label == DetectabilityLabel::Partial)
        })
        .map(|record| record.attack_id.clone())
        .collect()
}
