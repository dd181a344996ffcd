//! Dataset knowledge base: structured profiles of candidate NIDS datasets.
//!
//! Profiles are data, not code; the repository ships a default KB under
//! `data/datasets.json`. Loading validates the schema and uniqueness but
//! preserves unrecognized fields so user annotations round-trip unchanged.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use thiserror::Error;

pub const KB_SCHEMA_VERSION: &str = "1";

/// Operational domain a dataset was captured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    EnterpriseIT,
    IndustrialOT,
    Hybrid,
}

/// Granularity of the features a dataset exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGranularity {
    FlowLevel,
    PacketLevel,
    ProcessTelemetry,
    Mixed,
}

/// Structured description of one NIDS dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub year: i32,
    pub domain: Domain,
    #[serde(default)]
    pub industrial_protocols: Vec<String>,
    #[serde(default)]
    pub enterprise_protocols: Vec<String>,
    #[serde(default)]
    pub attack_classes: Vec<String>,
    pub scenario_count: i64,
    pub feature_granularity: FeatureGranularity,
    #[serde(default)]
    pub limitations: Vec<String>,
    /// Unrecognized fields, preserved verbatim.
    #[serde(flatten)]
    pub annotations: BTreeMap<String, Value>,
}

impl DatasetProfile {
    /// Industrial and enterprise protocols combined.
    pub fn all_protocols(&self) -> Vec<&str> {
        self.industrial_protocols
            .iter()
            .chain(self.enterprise_protocols.iter())
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub schema_version: String,
    pub profiles: Vec<DatasetProfile>,
}

impl KnowledgeBase {
    pub fn dataset_names(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.name.clone()).collect()
    }

    pub fn profile(&self, name: &str) -> Option<&DatasetProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate dataset name {0:?}")]
    DuplicateName(String),
}

/// Human-readable invariant findings for one profile; empty means valid.
pub fn validate_profile(profile: &DatasetProfile) -> Vec<String> {
    let mut findings = Vec::new();
    if profile.name.trim().is_empty() {
        findings.push("dataset name is empty".to_string());
    }
    if profile.scenario_count < 0 {
        findings.push(format!(
            "{}: scenario_count {} is negative",
            profile.name, profile.scenario_count
        ));
    }
    for list_name in [
        "attack_classes",
        "industrial_protocols",
        "enterprise_protocols",
    ] {
        let list = match list_name {
            "attack_classes" => &profile.attack_classes,
            "industrial_protocols" => &profile.industrial_protocols,
            _ => &profile.enterprise_protocols,
        };
        if list.iter().any(|entry| entry.trim().is_empty()) {
            findings.push(format!(
                "{}: {} contains an empty entry",
                profile.name, list_name
            ));
        }
    }
    findings
}

/// Parse and validate a KB document `{"schema_version":"1","profiles":[...]}`.
pub fn load_profiles(raw_json_text: &str) -> Result<KnowledgeBase, KbError> {
    let kb: KnowledgeBase =
        serde_json::from_str(raw_json_text).map_err(|e| KbError::SchemaViolation(e.to_string()))?;
    if kb.schema_version != KB_SCHEMA_VERSION {
        log::warn!(
            "knowledge base schema_version {:?} differs from supported {KB_SCHEMA_VERSION:?}",
            kb.schema_version
        );
    }
    if kb.profiles.is_empty() {
        return Err(KbError::SchemaViolation("profiles list is empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for profile in &kb.profiles {
        if !seen.insert(profile.name.clone()) {
            return Err(KbError::DuplicateName(profile.name.clone()));
        }
        let findings = validate_profile(profile);
        if !findings.is_empty() {
            return Err(KbError::SchemaViolation(findings.join("; ")));
        }
    }
    Ok(kb)
}

/// Serialize a KB in the on-disk format (pretty-printed, trailing newline).
pub fn emit(kb: &KnowledgeBase) -> String {
    let mut text = serde_json::to_string_pretty(kb).expect("KB is serializable");
    text.push('\n');
    text
}
