//! STIX 2.1 bundle ingestion for the ATT&CK Enterprise and ICS matrices.
//!
//! [`parse_bundle`] turns one bundle into a [`StixObjectGraph`];
//! [`merge_matrices`] combines the Enterprise and ICS graphs into a single
//! deduplicated graph keyed by ATT&CK external id. Revoked and deprecated
//! objects are dropped at parse time so downstream counts never include them.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Which ATT&CK matrix a bundle was exported from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Matrix {
    Enterprise,
    Ics,
}

impl Matrix {
    pub fn as_str(&self) -> &'static str {
        match self {
            Matrix::Enterprise => "Enterprise",
            Matrix::Ics => "ICS",
        }
    }
}

impl std::fmt::Display for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Threat entity kinds, matching the ATT&CK id prefixes G/S/C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Group,
    Software,
    Campaign,
}

impl EntityKind {
    /// Kind implied by an ATT&CK external id prefix, if any.
    pub fn from_attack_id(id: &str) -> Option<Self> {
        match id.as_bytes().first()? {
            b'G' => Some(EntityKind::Group),
            b'S' => Some(EntityKind::Software),
            b'C' => Some(EntityKind::Campaign),
            _ => None,
        }
    }
}

/// One ATT&CK technique or sub-technique after ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueRecord {
    pub attack_id: String,
    pub name: String,
    pub matrices: BTreeSet<Matrix>,
    /// `x_mitre_data_sources` labels, sorted and deduplicated.
    pub data_sources: Vec<String>,
    pub is_subtechnique: bool,
    pub description: String,
    /// STIX ids this record was built from (one per matrix it appears in).
    pub stix_ids: BTreeSet<String>,
}

/// A group, software family, or campaign selected for threat modeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatEntity {
    pub attack_id: String,
    pub kind: EntityKind,
    pub name: String,
    pub stix_ids: BTreeSet<String>,
}

/// Version metadata recorded from a bundle's `x-mitre-collection` object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BundleInfo {
    pub matrix: Matrix,
    pub version: Option<String>,
    pub modified: Option<String>,
}

/// Queryable graph over the retained bundle objects.
///
/// `techniques` and `entities` are keyed by ATT&CK external id; `objects`
/// keeps the raw STIX records (attack-patterns, entities, and "uses"
/// relationships) keyed by STIX id. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StixObjectGraph {
    pub objects: BTreeMap<String, Value>,
    pub techniques: BTreeMap<String, TechniqueRecord>,
    pub entities: BTreeMap<String, ThreatEntity>,
    /// (source STIX id, target STIX id) for `relationship_type == "uses"`.
    pub uses_edges: Vec<(String, String)>,
    pub bundles: Vec<BundleInfo>,
}

impl StixObjectGraph {
    fn empty() -> Self {
        StixObjectGraph {
            objects: BTreeMap::new(),
            techniques: BTreeMap::new(),
            entities: BTreeMap::new(),
            uses_edges: Vec::new(),
            bundles: Vec::new(),
        }
    }

    /// Reverse index: technique STIX id -> ATT&CK external id.
    pub fn technique_stix_index(&self) -> BTreeMap<&str, &str> {
        let mut index = BTreeMap::new();
        for record in self.techniques.values() {
            for stix_id in &record.stix_ids {
                index.insert(stix_id.as_str(), record.attack_id.as_str());
            }
        }
        index
    }
}

#[derive(Debug, Error)]
pub enum StixError {
    #[error("malformed bundle: {0}")]
    MalformedBundle(String),
}

/// `T\d{4}` or `T\d{4}.\d{3}`.
pub fn is_valid_technique_id(id: &str) -> bool {
    let b = id.as_bytes();
    let head_ok = |b: &[u8]| b[0] == b'T' && b[1..5].iter().all(u8::is_ascii_digit);
    match b.len() {
        5 => head_ok(b),
        9 => head_ok(b) && b[5] == b'.' && b[6..9].iter().all(u8::is_ascii_digit),
        _ => false,
    }
}

/// `[GSC]\d{4}`.
pub fn is_valid_entity_id(id: &str) -> bool {
    let b = id.as_bytes();
    b.len() == 5 && matches!(b[0], b'G' | b'S' | b'C') && b[1..5].iter().all(u8::is_ascii_digit)
}

fn is_revoked_or_deprecated(obj: &Value) -> bool {
    obj.get("revoked").and_then(Value::as_bool).unwrap_or(false)
        || obj
            .get("x_mitre_deprecated")
            .and_then(Value::as_bool)
            .unwrap_or(false)
}

fn str_field(obj: &Value, key: &str) -> String {
    obj.get(key)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string()
}

fn string_list(obj: &Value, key: &str) -> Vec<String> {
    let mut out: Vec<String> = obj
        .get(key)
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(Value::as_str)
                .map(String::from)
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out.dedup();
    out
}

/// First external reference from a mitre source whose id passes `accept`.
fn mitre_external_id(obj: &Value, accept: fn(&str) -> bool) -> Option<String> {
    for reference in obj.get("external_references")?.as_array()? {
        let source = reference
            .get("source_name")
            .and_then(Value::as_str)
            .unwrap_or("");
        let external_id = reference
            .get("external_id")
            .and_then(Value::as_str)
            .unwrap_or("");
        if source.starts_with("mitre") && accept(external_id) {
            return Some(external_id.to_string());
        }
    }
    None
}

fn merge_technique(map: &mut BTreeMap<String, TechniqueRecord>, incoming: TechniqueRecord) {
    match map.entry(incoming.attack_id.clone()) {
        Entry::Vacant(slot) => {
            slot.insert(incoming);
        }
        Entry::Occupied(mut slot) => {
            let existing = slot.get_mut();
            if !existing.name.is_empty()
                && !incoming.name.is_empty()
                && existing.name != incoming.name
            {
                log::warn!(
                    "conflicting names for {}: keeping {:?}, dropping {:?}",
                    existing.attack_id,
                    existing.name,
                    incoming.name
                );
            }
            if existing.name.is_empty() {
                existing.name = incoming.name;
            }
            existing.matrices.extend(incoming.matrices);
            existing.data_sources.extend(incoming.data_sources);
            existing.data_sources.sort();
            existing.data_sources.dedup();
            existing.is_subtechnique |= incoming.is_subtechnique;
            if existing.description.is_empty() {
                existing.description = incoming.description;
            }
            existing.stix_ids.extend(incoming.stix_ids);
        }
    }
}

fn merge_entity(map: &mut BTreeMap<String, ThreatEntity>, incoming: ThreatEntity) {
    match map.entry(incoming.attack_id.clone()) {
        Entry::Vacant(slot) => {
            slot.insert(incoming);
        }
        Entry::Occupied(mut slot) => {
            let existing = slot.get_mut();
            if !existing.name.is_empty()
                && !incoming.name.is_empty()
                && existing.name != incoming.name
            {
                log::warn!(
                    "conflicting names for {}: keeping {:?}, dropping {:?}",
                    existing.attack_id,
                    existing.name,
                    incoming.name
                );
            }
            if existing.name.is_empty() {
                existing.name = incoming.name;
            }
            existing.stix_ids.extend(incoming.stix_ids);
        }
    }
}

/// Parse one STIX 2.1 bundle into a graph, tagging techniques with `matrix`.
///
/// Retains attack-pattern, intrusion-set, malware, tool, and campaign
/// objects plus "uses" relationships whose endpoints survive filtering.
/// Objects without a usable mitre external id are skipped with a warning.
pub fn parse_bundle(raw_json_text: &str, matrix: Matrix) -> Result<StixObjectGraph, StixError> {
    let root: Value = serde_json::from_str(raw_json_text)
        .map_err(|e| StixError::MalformedBundle(format!("invalid JSON: {e}")))?;
    let Some(bundle_objects) = root.get("objects").and_then(Value::as_array) else {
        return Err(StixError::MalformedBundle(
            "missing top-level \"objects\" array".into(),
        ));
    };

    let mut graph = StixObjectGraph::empty();
    let mut info = BundleInfo {
        matrix,
        version: None,
        modified: None,
    };
    // (relationship stix id, source_ref, target_ref, raw object)
    let mut pending_edges: Vec<(String, String, String, Value)> = Vec::new();

    for obj in bundle_objects {
        let Some(stix_type) = obj.get("type").and_then(Value::as_str) else {
            log::warn!("skipping bundle object without a \"type\" field");
            continue;
        };
        if stix_type == "x-mitre-collection" {
            if info.version.is_none() {
                info.version = obj
                    .get("x_mitre_version")
                    .and_then(Value::as_str)
                    .map(String::from);
                info.modified = obj
                    .get("modified")
                    .and_then(Value::as_str)
                    .map(String::from);
            }
            continue;
        }
        if is_revoked_or_deprecated(obj) {
            continue;
        }
        let Some(stix_id) = obj.get("id").and_then(Value::as_str) else {
            log::warn!("skipping {stix_type} object without an \"id\" field");
            continue;
        };
        match stix_type {
            "attack-pattern" => {
                let Some(attack_id) = mitre_external_id(obj, is_valid_technique_id) else {
                    log::warn!("attack-pattern {stix_id} has no mitre external id; skipped");
                    continue;
                };
                let is_subtechnique = obj
                    .get("x_mitre_is_subtechnique")
                    .and_then(Value::as_bool)
                    .unwrap_or_else(|| attack_id.contains('.'));
                merge_technique(
                    &mut graph.techniques,
                    TechniqueRecord {
                        attack_id,
                        name: str_field(obj, "name"),
                        matrices: BTreeSet::from([matrix]),
                        data_sources: string_list(obj, "x_mitre_data_sources"),
                        is_subtechnique,
                        description: str_field(obj, "description"),
                        stix_ids: BTreeSet::from([stix_id.to_string()]),
                    },
                );
                graph.objects.insert(stix_id.to_string(), obj.clone());
            }
            "intrusion-set" | "malware" | "tool" | "campaign" => {
                let Some(attack_id) = mitre_external_id(obj, is_valid_entity_id) else {
                    log::warn!("{stix_type} {stix_id} has no mitre external id; skipped");
                    continue;
                };
                let kind = match stix_type {
                    "intrusion-set" => EntityKind::Group,
                    "campaign" => EntityKind::Campaign,
                    _ => EntityKind::Software,
                };
                if EntityKind::from_attack_id(&attack_id) != Some(kind) {
                    log::warn!(
                        "{stix_type} {stix_id} carries id {attack_id} inconsistent with its kind; skipped"
                    );
                    continue;
                }
                merge_entity(
                    &mut graph.entities,
                    ThreatEntity {
                        attack_id,
                        kind,
                        name: str_field(obj, "name"),
                        stix_ids: BTreeSet::from([stix_id.to_string()]),
                    },
                );
                graph.objects.insert(stix_id.to_string(), obj.clone());
            }
            "relationship"
                if obj.get("relationship_type").and_then(Value::as_str) == Some("uses") =>
            {
                if let (Some(source), Some(target)) = (
                    obj.get("source_ref").and_then(Value::as_str),
                    obj.get("target_ref").and_then(Value::as_str),
                ) {
                    pending_edges.push((
                        stix_id.to_string(),
                        source.to_string(),
                        target.to_string(),
                        obj.clone(),
                    ));
                }
            }
            _ => {}
        }
    }

    // Edges whose endpoints were filtered out (revoked targets, unretained
    // types) are dropped so every edge references an object in the graph.
    for (rel_id, source, target, obj) in pending_edges {
        if graph.objects.contains_key(&source) && graph.objects.contains_key(&target) {
            graph.objects.insert(rel_id, obj);
            graph.uses_edges.push((source, target));
        }
    }
    graph.uses_edges.sort();
    graph.uses_edges.dedup();
    graph.bundles.push(info);
    Ok(graph)
}

/// Merge the Enterprise and ICS graphs, deduplicating by ATT&CK external id.
///
/// Matrices, data sources, and STIX ids are unioned per technique; on a name
/// conflict the first (Enterprise) name wins and a warning is logged.
/// Idempotent over already-merged content.
pub fn merge_matrices(enterprise: StixObjectGraph, ics: StixObjectGraph) -> StixObjectGraph {
    let mut merged = enterprise;
    merged.objects.extend(ics.objects);
    for (_, technique) in ics.techniques {
        merge_technique(&mut merged.techniques, technique);
    }
    for (_, entity) in ics.entities {
        merge_entity(&mut merged.entities, entity);
    }
    merged.uses_edges.extend(ics.uses_edges);
    merged.uses_edges.sort();
    merged.uses_edges.dedup();
    merged.bundles.extend(ics.bundles);
    merged.bundles.sort();
    merged.bundles.dedup();
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> String {
        let path = format!(
            "{}/../../fixtures/bundles/{name}",
            env!("CARGO_MANIFEST_DIR")
        );
        std::fs::read_to_string(path).expect("fixture readable")
    }

    #[test]
    fn parse_case_counts_match_hand_count() {
        // parse_case.json: 3 attack-patterns (one revoked), 1 intrusion-set,
        // 2 live "uses" relationships.
        let graph = parse_bundle(&fixture("parse_case.json"), Matrix::Ics).unwrap();
        assert_eq!(graph.techniques.len(), 2);
        assert_eq!(graph.entities.len(), 1);
        assert_eq!(graph.uses_edges.len(), 2);
        assert!(graph.techniques.contains_key("T0804"));
    }

    #[test]
    fn empty_bundle_yields_empty_graph() {
        let graph = parse_bundle(r#"{"objects": []}"#, Matrix::Enterprise).unwrap();
        assert!(graph.techniques.is_empty());
        assert!(graph.entities.is_empty());
        assert!(graph.uses_edges.is_empty());
    }

    #[test]
    fn malformed_bundle_is_rejected() {
        assert!(matches!(
            parse_bundle("not json", Matrix::Enterprise),
            Err(StixError::MalformedBundle(_))
        ));
        assert!(matches!(
            parse_bundle(r#"{"type": "bundle"}"#, Matrix::Enterprise),
            Err(StixError::MalformedBundle(_))
        ));
    }

    #[test]
    fn missing_external_id_skips_object_without_failing() {
        let bundle = r#"{"objects": [
            {"type": "attack-pattern", "id": "attack-pattern--1", "name": "No Ref",
             "external_references": [{"source_name": "capec", "external_id": "CAPEC-1"}]},
            {"type": "attack-pattern", "id": "attack-pattern--2", "name": "Good",
             "external_references": [{"source_name": "mitre-attack", "external_id": "T1566"}]}
        ]}"#;
        let graph = parse_bundle(bundle, Matrix::Enterprise).unwrap();
        assert_eq!(graph.techniques.len(), 1);
        assert!(graph.techniques.contains_key("T1566"));
    }

    #[test]
    fn revoked_and_deprecated_objects_are_dropped() {
        let bundle = r#"{"objects": [
            {"type": "attack-pattern", "id": "attack-pattern--1", "name": "Revoked", "revoked": true,
             "external_references": [{"source_name": "mitre-attack", "external_id": "T1001"}]},
            {"type": "attack-pattern", "id": "attack-pattern--2", "name": "Deprecated", "x_mitre_deprecated": true,
             "external_references": [{"source_name": "mitre-attack", "external_id": "T1002"}]}
        ]}"#;
        let graph = parse_bundle(bundle, Matrix::Enterprise).unwrap();
        assert!(graph.techniques.is_empty());
    }

    #[test]
    fn parse_is_deterministic() {
        let text = fixture("enterprise_small.json");
        let a = parse_bundle(&text, Matrix::Enterprise).unwrap();
        let b = parse_bundle(&text, Matrix::Enterprise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merge_unions_overlapping_techniques_and_dedups_entities() {
        let enterprise =
            parse_bundle(&fixture("enterprise_small.json"), Matrix::Enterprise).unwrap();
        let ics = parse_bundle(&fixture("ics_small.json"), Matrix::Ics).unwrap();
        let pre_merge_entity_dupes = enterprise
            .entities
            .keys()
            .filter(|k| ics.entities.contains_key(*k))
            .count();
        assert_eq!(pre_merge_entity_dupes, 1, "G0034 appears in both bundles");

        let merged = merge_matrices(enterprise.clone(), ics.clone());
        assert_eq!(
            merged.entities.len(),
            enterprise.entities.len() + ics.entities.len() - 1
        );

        let shared = &merged.techniques["T1570"];
        assert_eq!(
            shared.matrices,
            BTreeSet::from([Matrix::Enterprise, Matrix::Ics])
        );
        // Data sources from both bundles, unioned and sorted.
        assert!(shared
            .data_sources
            .contains(&"Network Traffic: Network Connection Creation".to_string()));
        assert!(shared
            .data_sources
            .contains(&"File: File Creation".to_string()));
        assert!(shared.data_sources.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn merge_disjoint_synthetic_graphs() {
        let a = parse_bundle(
            r#"{"objects": [{"type": "attack-pattern", "id": "attack-pattern--a", "name": "A",
                "external_references": [{"source_name": "mitre-attack", "external_id": "T1001"}]}]}"#,
            Matrix::Enterprise,
        )
        .unwrap();
        let b = parse_bundle(
            r#"{"objects": [{"type": "attack-pattern", "id": "attack-pattern--b", "name": "B",
                "external_references": [{"source_name": "mitre-attack", "external_id": "T0802"}]}]}"#,
            Matrix::Ics,
        )
        .unwrap();
        let merged = merge_matrices(a, b);
        assert_eq!(merged.techniques.len(), 2);
    }

    #[test]
    fn merge_is_idempotent_on_merged_content() {
        let enterprise =
            parse_bundle(&fixture("enterprise_small.json"), Matrix::Enterprise).unwrap();
        let ics = parse_bundle(&fixture("ics_small.json"), Matrix::Ics).unwrap();
        let merged = merge_matrices(enterprise, ics);
        let remerged = merge_matrices(merged.clone(), merged.clone());
        assert_eq!(remerged, merged);
    }

    #[test]
    fn merge_is_commutative_up_to_name_tie_breaking() {
        let enterprise =
            parse_bundle(&fixture("enterprise_small.json"), Matrix::Enterprise).unwrap();
        let ics = parse_bundle(&fixture("ics_small.json"), Matrix::Ics).unwrap();
        let ab = merge_matrices(enterprise.clone(), ics.clone());
        let ba = merge_matrices(ics, enterprise);
        assert_eq!(
            ab.techniques.keys().collect::<Vec<_>>(),
            ba.techniques.keys().collect::<Vec<_>>()
        );
        assert_eq!(ab.uses_edges, ba.uses_edges);
        for (id, technique) in &ab.techniques {
            let other = &ba.techniques[id];
            assert_eq!(technique.matrices, other.matrices);
            assert_eq!(technique.data_sources, other.data_sources);
        }
    }

    #[test]
    fn id_validators_follow_attack_grammar() {
        assert!(is_valid_technique_id("T1021"));
        assert!(is_valid_technique_id("T1021.002"));
        assert!(!is_valid_technique_id("T102"));
        assert!(!is_valid_technique_id("T1021.02"));
        assert!(!is_valid_technique_id("G0034"));
        assert!(is_valid_entity_id("G0034"));
        assert!(is_valid_entity_id("S0603"));
        assert!(is_valid_entity_id("C0028"));
        assert!(!is_valid_entity_id("T1021"));
        assert!(!is_valid_entity_id("G034"));
    }
}
