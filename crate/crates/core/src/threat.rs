//! Threat-model construction: map selected threat entities to the techniques
//! they use and count distinct-entity occurrences per technique.
//!
//! Only direct entity-to-technique "uses" edges contribute; software used by
//! a selected group does not transitively attribute its techniques to the
//! group. Techniques with zero occurrences are not part of the model.

use crate::stix::{is_valid_entity_id, StixObjectGraph, TechniqueRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Techniques attributed to the selected entities, with per-technique
/// occurrence sets. `occurrence_count = occurrences[id].len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatModel {
    /// Entity ids that were found in the graph, sorted.
    pub selected_entities: Vec<String>,
    /// technique id -> ids of selected entities that use it (never empty).
    pub occurrences: BTreeMap<String, BTreeSet<String>>,
    /// Technique records for every key of `occurrences`.
    pub techniques: BTreeMap<String, TechniqueRecord>,
}

impl ThreatModel {
    pub fn occurrence_count(&self, technique_id: &str) -> usize {
        self.occurrences.get(technique_id).map_or(0, BTreeSet::len)
    }
}

#[derive(Debug, Error)]
pub enum ThreatError {
    #[error("entity selection is not a JSON array of ATT&CK ids: {0}")]
    SelectionParse(String),
    #[error("invalid entity id in selection: {0:?}")]
    InvalidEntityId(String),
    #[error("entity selection is empty")]
    EmptySelection,
    #[error("selected entity {0} not present in the merged graph")]
    UnknownEntity(String),
}

/// Parse an entity-selection file: a JSON array of G/S/C ids.
/// Duplicates are removed; the result is sorted.
pub fn load_entity_selection(raw_json_text: &str) -> Result<Vec<String>, ThreatError> {
    let ids: Vec<String> = serde_json::from_str(raw_json_text)
        .map_err(|e| ThreatError::SelectionParse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for id in &ids {
        if !is_valid_entity_id(id) {
            return Err(ThreatError::InvalidEntityId(id.clone()));
        }
        seen.insert(id.clone());
    }
    if seen.is_empty() {
        return Err(ThreatError::EmptySelection);
    }
    Ok(seen.into_iter().collect())
}

/// Build the threat model for `selection` over `graph`.
///
/// With `strict` set, a selected id absent from the graph is an error;
/// otherwise it is skipped with a warning. Techniques used by at least one
/// selected entity enter the model with their distinct-entity sets.
pub fn extract_occurrences(
    graph: &StixObjectGraph,
    selection: &[String],
    strict: bool,
) -> Result<ThreatModel, ThreatError> {
    if selection.is_empty() {
        return Err(ThreatError::EmptySelection);
    }
    // entity STIX id -> entity ATT&CK id, over the selection only.
    let mut entity_stix_index: BTreeMap<&str, &str> = BTreeMap::new();
    let mut resolved: BTreeSet<String> = BTreeSet::new();
    for id in selection {
        match graph.entities.get(id) {
            Some(entity) => {
                resolved.insert(id.clone());
                for stix_id in &entity.stix_ids {
                    entity_stix_index.insert(stix_id, id);
                }
            }
            None if strict => return Err(ThreatError::UnknownEntity(id.clone())),
            None => log::warn!("selected entity {id} not found in graph; skipped"),
        }
    }

    let technique_index = graph.technique_stix_index();
    let mut occurrences: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (source, target) in &graph.uses_edges {
        let Some(entity_id) = entity_stix_index.get(source.as_str()) else {
            continue;
        };
        let Some(technique_id) = technique_index.get(target.as_str()) else {
            continue; // entity-to-entity edge or unretained target
        };
        occurrences
            .entry(technique_id.to_string())
            .or_default()
            .insert(entity_id.to_string());
    }

    let techniques = occurrences
        .keys()
        .map(|id| (id.clone(), graph.techniques[id].clone()))
        .collect();
    Ok(ThreatModel {
        selected_entities: resolved.into_iter().collect(),
        occurrences,
        techniques,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stix::{merge_matrices, parse_bundle, Matrix};

    fn smoke_graph() -> StixObjectGraph {
        let dir = format!("{}/../../fixtures/bundles", env!("CARGO_MANIFEST_DIR"));
        let enterprise = parse_bundle(
            &std::fs::read_to_string(format!("{dir}/enterprise_small.json")).unwrap(),
            Matrix::Enterprise,
        )
        .unwrap();
        let ics = parse_bundle(
            &std::fs::read_to_string(format!("{dir}/ics_small.json")).unwrap(),
            Matrix::Ics,
        )
        .unwrap();
        merge_matrices(enterprise, ics)
    }

    fn selection() -> Vec<String> {
        vec!["G0034".into(), "S0603".into(), "S0604".into()]
    }

    #[test]
    fn occurrence_counts_match_hand_count() {
        let model = extract_occurrences(&smoke_graph(), &selection(), true).unwrap();
        let counts: BTreeMap<&str, usize> = model
            .occurrences
            .iter()
            .map(|(id, set)| (id.as_str(), set.len()))
            .collect();
        assert_eq!(
            counts,
            BTreeMap::from([
                ("T0804", 2),
                ("T0805", 2),
                ("T0890", 1),
                ("T1021.002", 1),
                ("T1570", 1),
            ])
        );
        assert_eq!(
            model.occurrences["T0804"],
            BTreeSet::from(["S0603".to_string(), "S0604".to_string()])
        );
        assert_eq!(
            model.occurrences["T0805"],
            BTreeSet::from(["G0034".to_string(), "S0604".to_string()])
        );
    }

    #[test]
    fn unselected_software_does_not_attribute_transitively() {
        // G0034 uses S0368, and S0368 uses T1486; with S0368 unselected,
        // T1486 must stay out of the model.
        let model = extract_occurrences(&smoke_graph(), &selection(), true).unwrap();
        assert!(!model.occurrences.contains_key("T1486"));
        assert!(!model.techniques.contains_key("T1486"));
    }

    #[test]
    fn model_techniques_mirror_occurrence_keys() {
        let model = extract_occurrences(&smoke_graph(), &selection(), true).unwrap();
        assert_eq!(
            model.occurrences.keys().collect::<Vec<_>>(),
            model.techniques.keys().collect::<Vec<_>>()
        );
        assert!(model.occurrences.values().all(|set| !set.is_empty()));
    }

    #[test]
    fn strict_mode_rejects_unknown_entities() {
        let err = extract_occurrences(&smoke_graph(), &["G9999".to_string()], true).unwrap_err();
        assert!(matches!(err, ThreatError::UnknownEntity(id) if id == "G9999"));
    }

    #[test]
    fn lenient_mode_skips_unknown_entities() {
        let mut ids = selection();
        ids.push("G9999".to_string());
        let model = extract_occurrences(&smoke_graph(), &ids, false).unwrap();
        assert_eq!(
            model.selected_entities,
            vec![
                "G0034".to_string(),
                "S0603".to_string(),
                "S0604".to_string()
            ]
        );
        assert_eq!(model.occurrences.len(), 5);
    }

    #[test]
    fn selection_parsing_validates_and_dedups() {
        let ids = load_entity_selection(r#"["S0604", "G0034", "S0604"]"#).unwrap();
        assert_eq!(ids, vec!["G0034".to_string(), "S0604".to_string()]);

        assert!(matches!(
            load_entity_selection(r#"["T1021"]"#),
            Err(ThreatError::InvalidEntityId(_))
        ));
        assert!(matches!(
            load_entity_selection("[]"),
            Err(ThreatError::EmptySelection)
        ));
        assert!(matches!(
            load_entity_selection(r#"{"ids": []}"#),
            Err(ThreatError::SelectionParse(_))
        ));
    }
}
