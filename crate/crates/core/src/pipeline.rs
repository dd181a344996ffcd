//! Pipeline orchestration: configuration loading and the five phases —
//! ingest, extract (threat model), score, detect, assess, report. Each
//! phase persists its artifact as JSON under the output directory and reads
//! its inputs back from disk, so the matching CLI subcommands compose and a
//! single phase can be rerun without repeating the ones before it.

use crate::assess::rules::{assess_all, RULES_ASSESSOR_ID};
use crate::assess::{
    remote, remote::ModelServiceConfig, AssessmentFile, AssessmentSet, AssessorKind, CoverageLabel,
    LabelThresholds,
};
use crate::detect::{
    classify_model, load_keywords, network_visible, DetectabilityRecord, KeywordConfig,
};
use crate::kb::{load_profiles, KnowledgeBase};
use crate::report::emit::{
    compute_report, standard_notes, to_json_text, write_all, FunnelCounts, ReportMetadata,
};
use crate::report::CoverageMatrix;
use crate::risk::{load_base_risk, score_profiles, BaseRiskTable, RiskCombiner, RiskProfile};
use crate::stix::{merge_matrices, parse_bundle, Matrix, StixObjectGraph, TechniqueRecord};
use crate::threat::{extract_occurrences, load_entity_selection, ThreatModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub const GRAPH_FILE: &str = "graph.json";
pub const THREAT_MODEL_FILE: &str = "threat_model.json";
pub const RISK_FILE: &str = "risk_profiles.json";
pub const DETECTABILITY_FILE: &str = "detectability.json";
pub const NETWORK_TECHNIQUES_FILE: &str = "network_techniques.json";
pub const RULES_ASSESSMENTS_FILE: &str = "assessments_rules.json";
pub const REMOTE_ASSESSMENTS_FILE: &str = "assessments_remote.json";

/// Error from any phase, tagged with the phase name so CLI diagnostics read
/// `[ingest] cannot read ...`.
#[derive(Debug)]
pub struct PipelineError {
    pub phase: &'static str,
    pub message: String,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.phase, self.message)
    }
}

impl std::error::Error for PipelineError {}

fn perr(phase: &'static str, message: impl fmt::Display) -> PipelineError {
    PipelineError {
        phase,
        message: message.to_string(),
    }
}

/// Dataset subset search parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombinationConfig {
    /// A technique counts as covered when its best label reaches this.
    pub threshold: CoverageLabel,
    /// Report best subsets for k = 1..=max_k.
    pub max_k: usize,
}

impl Default for CombinationConfig {
    fn default() -> Self {
        CombinationConfig {
            threshold: CoverageLabel::Partial,
            max_k: 3,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Run configuration, loaded from a JSON file. Relative paths are resolved
/// against the directory containing the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub enterprise_bundle: PathBuf,
    pub ics_bundle: PathBuf,
    /// JSON array of selected threat-entity ids.
    pub entities: PathBuf,
    /// Dataset knowledge base file.
    pub datasets: PathBuf,
    pub out_dir: PathBuf,
    /// Base-risk table; defaults to 5.0 for every technique when absent.
    #[serde(default)]
    pub base_risk: Option<PathBuf>,
    /// Detectability keyword lists; built-in defaults when absent.
    #[serde(default)]
    pub keywords: Option<PathBuf>,
    /// Replaces the network-technique artifact as the assessment input.
    #[serde(default)]
    pub techniques: Option<PathBuf>,
    #[serde(default)]
    pub assessor: AssessorKind,
    /// Keep Partial-detectability techniques in assessment scope.
    #[serde(default = "default_true")]
    pub include_partial: bool,
    #[serde(default)]
    pub risk_combiner: RiskCombiner,
    /// Fail on selected entities missing from the graph instead of warning.
    #[serde(default = "default_true")]
    pub strict_entities: bool,
    #[serde(default)]
    pub label_thresholds: LabelThresholds,
    #[serde(default)]
    pub combination: CombinationConfig,
    /// Remote model service; required when `assessor` is remote or both.
    #[serde(default)]
    pub remote: Option<ModelServiceConfig>,
}

/// A parsed config plus the SHA-256 of the raw config bytes, recorded in
/// every report for auditability.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub config_hash: String,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&path);
    }
}

/// Load a config file, hash its bytes, and resolve relative paths against
/// its directory.
pub fn load_config(path: &Path) -> Result<LoadedConfig, PipelineError> {
    let raw = std::fs::read(path)
        .map_err(|e| perr("config", format!("cannot read {}: {e}", path.display())))?;
    let config_hash = hex::encode(Sha256::digest(&raw));
    let mut config: PipelineConfig = serde_json::from_slice(&raw)
        .map_err(|e| perr("config", format!("invalid config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    resolve(&base, &mut config.enterprise_bundle);
    resolve(&base, &mut config.ics_bundle);
    resolve(&base, &mut config.entities);
    resolve(&base, &mut config.datasets);
    resolve(&base, &mut config.out_dir);
    if let Some(p) = config.base_risk.as_mut() {
        resolve(&base, p);
    }
    if let Some(p) = config.keywords.as_mut() {
        resolve(&base, p);
    }
    if let Some(p) = config.techniques.as_mut() {
        resolve(&base, p);
    }
    if let Some(remote) = config.remote.as_mut() {
        resolve(&base, &mut remote.cache_dir);
    }
    if matches!(config.assessor, AssessorKind::Remote | AssessorKind::Both)
        && config.remote.is_none()
    {
        return Err(perr(
            "config",
            "assessor requires a remote service but no `remote` section is configured",
        ));
    }
    Ok(LoadedConfig {
        config,
        config_hash,
    })
}

fn read_input(phase: &'static str, path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|e| perr(phase, format!("cannot read {}: {e}", path.display())))
}

fn write_artifact<T: Serialize>(
    phase: &'static str,
    out_dir: &Path,
    name: &str,
    value: &T,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| perr(phase, format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    std::fs::write(&path, to_json_text(value))
        .map_err(|e| perr(phase, format!("cannot write {}: {e}", path.display())))
}

fn read_artifact<T: DeserializeOwned>(
    phase: &'static str,
    out_dir: &Path,
    name: &str,
    produced_by: &str,
) -> Result<T, PipelineError> {
    let path = out_dir.join(name);
    let raw = std::fs::read_to_string(&path).map_err(|e| {
        perr(
            phase,
            format!(
                "cannot read {} (run the {produced_by} phase first): {e}",
                path.display()
            ),
        )
    })?;
    serde_json::from_str(&raw)
        .map_err(|e| perr(phase, format!("corrupt artifact {}: {e}", path.display())))
}

/// Parse both bundles, merge them, and persist the merged graph.
pub fn stage_ingest(loaded: &LoadedConfig) -> Result<StixObjectGraph, PipelineError> {
    let cfg = &loaded.config;
    let enterprise_raw = read_input("ingest", &cfg.enterprise_bundle)?;
    let enterprise = parse_bundle(&enterprise_raw, Matrix::Enterprise).map_err(|e| {
        perr(
            "ingest",
            format!("{}: {e}", cfg.enterprise_bundle.display()),
        )
    })?;
    let ics_raw = read_input("ingest", &cfg.ics_bundle)?;
    let ics = parse_bundle(&ics_raw, Matrix::Ics)
        .map_err(|e| perr("ingest", format!("{}: {e}", cfg.ics_bundle.display())))?;
    let merged = merge_matrices(enterprise, ics);
    log::info!(
        "[ingest] merged graph: {} techniques, {} entities, {} uses edges",
        merged.techniques.len(),
        merged.entities.len(),
        merged.uses_edges.len()
    );
    write_artifact("ingest", &cfg.out_dir, GRAPH_FILE, &merged)?;
    Ok(merged)
}

/// Build the threat model from the persisted graph and the entity selection.
pub fn stage_extract(loaded: &LoadedConfig) -> Result<ThreatModel, PipelineError> {
    let cfg = &loaded.config;
    let graph: StixObjectGraph = read_artifact("extract", &cfg.out_dir, GRAPH_FILE, "ingest")?;
    let selection_raw = read_input("extract", &cfg.entities)?;
    let selection = load_entity_selection(&selection_raw)
        .map_err(|e| perr("extract", format!("{}: {e}", cfg.entities.display())))?;
    let model = extract_occurrences(&graph, &selection, cfg.strict_entities)
        .map_err(|e| perr("extract", e))?;
    log::info!(
        "[extract] {} techniques used by {} selected entities",
        model.techniques.len(),
        model.selected_entities.len()
    );
    write_artifact("extract", &cfg.out_dir, THREAT_MODEL_FILE, &model)?;
    Ok(model)
}

/// Score and rank the threat model techniques.
pub fn stage_score(loaded: &LoadedConfig) -> Result<Vec<RiskProfile>, PipelineError> {
    let cfg = &loaded.config;
    let model: ThreatModel = read_artifact("score", &cfg.out_dir, THREAT_MODEL_FILE, "extract")?;
    let table = match &cfg.base_risk {
        Some(path) => load_base_risk(&read_input("score", path)?)
            .map_err(|e| perr("score", format!("{}: {e}", path.display())))?,
        None => BaseRiskTable::default(),
    };
    let profiles = score_profiles(&model, &table, cfg.risk_combiner);
    write_artifact("score", &cfg.out_dir, RISK_FILE, &profiles)?;
    Ok(profiles)
}

/// Detectability outcome: the classification of every modeled technique and
/// the subset retained for coverage assessment.
pub struct DetectOutcome {
    pub records: BTreeMap<String, DetectabilityRecord>,
    pub retained: BTreeMap<String, TechniqueRecord>,
}

/// Classify data sources and persist the network-visible technique subset.
pub fn stage_detect(loaded: &LoadedConfig) -> Result<DetectOutcome, PipelineError> {
    let cfg = &loaded.config;
    let model: ThreatModel = read_artifact("detect", &cfg.out_dir, THREAT_MODEL_FILE, "extract")?;
    let keywords = match &cfg.keywords {
        Some(path) => load_keywords(&read_input("detect", path)?)
            .map_err(|e| perr("detect", format!("{}: {e}", path.display())))?,
        None => KeywordConfig::default(),
    };
    let records = classify_model(&model.techniques, &keywords);
    let retained_ids = network_visible(&records, cfg.include_partial);
    let retained: BTreeMap<String, TechniqueRecord> = retained_ids
        .iter()
        .filter_map(|id| model.techniques.get(id).map(|t| (id.clone(), t.clone())))
        .collect();
    log::info!(
        "[detect] {} of {} techniques remain in scope (include_partial={})",
        retained.len(),
        records.len(),
        cfg.include_partial
    );
    write_artifact("detect", &cfg.out_dir, DETECTABILITY_FILE, &records)?;
    write_artifact("detect", &cfg.out_dir, NETWORK_TECHNIQUES_FILE, &retained)?;
    Ok(DetectOutcome { records, retained })
}

/// What the assess phase produced and whether the remote service failed.
pub struct AssessOutcome {
    pub rules: Option<AssessmentSet>,
    pub remote: Option<AssessmentSet>,
    pub remote_unavailable: bool,
}

fn assessment_input(
    loaded: &LoadedConfig,
) -> Result<BTreeMap<String, TechniqueRecord>, PipelineError> {
    let cfg = &loaded.config;
    match &cfg.techniques {
        Some(path) => {
            let raw = read_input("assess", path)?;
            serde_json::from_str(&raw).map_err(|e| {
                perr(
                    "assess",
                    format!("invalid techniques file {}: {e}", path.display()),
                )
            })
        }
        None => read_artifact("assess", &cfg.out_dir, NETWORK_TECHNIQUES_FILE, "detect"),
    }
}

fn load_kb(phase: &'static str, loaded: &LoadedConfig) -> Result<KnowledgeBase, PipelineError> {
    let cfg = &loaded.config;
    let raw = read_input(phase, &cfg.datasets)?;
    load_profiles(&raw).map_err(|e| perr(phase, format!("{}: {e}", cfg.datasets.display())))
}

/// Run the configured assessors over the retained techniques and persist
/// one assessment file per assessor.
pub fn stage_assess(loaded: &LoadedConfig) -> Result<AssessOutcome, PipelineError> {
    let cfg = &loaded.config;
    let techniques = assessment_input(loaded)?;
    let kb = load_kb("assess", loaded)?;
    let mut outcome = AssessOutcome {
        rules: None,
        remote: None,
        remote_unavailable: false,
    };
    if matches!(cfg.assessor, AssessorKind::Rules | AssessorKind::Both) {
        let set = assess_all(&techniques, &kb, &cfg.label_thresholds);
        write_artifact(
            "assess",
            &cfg.out_dir,
            RULES_ASSESSMENTS_FILE,
            &AssessmentFile::from_set(RULES_ASSESSOR_ID, &set),
        )?;
        outcome.rules = Some(set);
    }
    if matches!(cfg.assessor, AssessorKind::Remote | AssessorKind::Both) {
        let remote_cfg = cfg.remote.as_ref().ok_or_else(|| {
            perr(
                "assess",
                "remote assessor configured without a `remote` section",
            )
        })?;
        let remote_outcome =
            remote::assess_remote(&techniques, &kb, remote_cfg, &cfg.label_thresholds)
                .map_err(|e| perr("assess", e))?;
        log::info!(
            "[assess] remote: {} requests issued, {} malformed batches, unavailable={}",
            remote_outcome.requests_issued,
            remote_outcome.malformed_batches,
            remote_outcome.unavailable
        );
        let assessor_id = format!("remote/{}", remote_cfg.model_name);
        write_artifact(
            "assess",
            &cfg.out_dir,
            REMOTE_ASSESSMENTS_FILE,
            &AssessmentFile::from_set(&assessor_id, &remote_outcome.records),
        )?;
        outcome.remote = Some(remote_outcome.records);
        outcome.remote_unavailable = remote_outcome.unavailable;
    }
    Ok(outcome)
}

/// Assemble analytics from the persisted artifacts and write every report
/// file. Reads only what the configured assessor kind produced.
pub fn stage_report(loaded: &LoadedConfig) -> Result<(), PipelineError> {
    let cfg = &loaded.config;
    let graph: StixObjectGraph = read_artifact("report", &cfg.out_dir, GRAPH_FILE, "ingest")?;
    let model: ThreatModel = read_artifact("report", &cfg.out_dir, THREAT_MODEL_FILE, "extract")?;
    let risk_ranking: Vec<RiskProfile> = read_artifact("report", &cfg.out_dir, RISK_FILE, "score")?;
    let detect_records: BTreeMap<String, DetectabilityRecord> =
        read_artifact("report", &cfg.out_dir, DETECTABILITY_FILE, "detect")?;
    let retained: BTreeMap<String, TechniqueRecord> =
        read_artifact("report", &cfg.out_dir, NETWORK_TECHNIQUES_FILE, "detect")?;
    let kb = load_kb("report", loaded)?;

    let mut files: Vec<AssessmentFile> = Vec::new();
    if matches!(cfg.assessor, AssessorKind::Rules | AssessorKind::Both) {
        files.push(read_artifact(
            "report",
            &cfg.out_dir,
            RULES_ASSESSMENTS_FILE,
            "assess",
        )?);
    }
    if matches!(cfg.assessor, AssessorKind::Remote | AssessorKind::Both) {
        files.push(read_artifact(
            "report",
            &cfg.out_dir,
            REMOTE_ASSESSMENTS_FILE,
            "assess",
        )?);
    }
    let assessor_ids: Vec<String> = files.iter().map(|f| f.assessor_id.clone()).collect();
    let sets: Vec<AssessmentSet> = files.into_iter().map(AssessmentFile::into_set).collect();
    let set_refs: Vec<&AssessmentSet> = sets.iter().collect();

    let technique_ids: Vec<String> = retained.keys().cloned().collect();
    let datasets = kb.dataset_names();
    let matrix = CoverageMatrix::from_assessments(&set_refs, &technique_ids, &datasets);

    let mut per_class: BTreeMap<String, usize> = BTreeMap::new();
    for record in detect_records.values() {
        *per_class
            .entry(record.label.as_str().to_string())
            .or_insert(0) += 1;
    }
    let metadata = ReportMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: loaded.config_hash.clone(),
        bundle_versions: graph.bundles.clone(),
        assessor_ids,
        risk_combiner: cfg.risk_combiner,
        include_partial: cfg.include_partial,
        combination_threshold: cfg.combination.threshold,
        label_thresholds: cfg.label_thresholds,
        prompt_template_hash: cfg
            .remote
            .as_ref()
            .filter(|_| matches!(cfg.assessor, AssessorKind::Remote | AssessorKind::Both))
            .map(|_| remote::prompt_template_hash()),
        technique_counts: FunnelCounts {
            techniques_in_model: model.techniques.len(),
            network_detectable: retained.len(),
            per_class,
        },
        notes: standard_notes(),
    };

    let agreement_sets = match (cfg.assessor, set_refs.as_slice()) {
        (AssessorKind::Both, [a, b]) => Some((*a, *b)),
        _ => None,
    };
    let report = compute_report(
        matrix,
        risk_ranking,
        metadata,
        agreement_sets,
        cfg.combination.max_k,
    )
    .map_err(|e| perr("report", e))?;
    write_all(&cfg.out_dir, &report).map_err(|e| perr("report", e))?;
    log::info!("[report] wrote report set to {}", cfg.out_dir.display());
    Ok(())
}

/// Whole-pipeline result flags.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub remote_unavailable: bool,
}

/// Run all phases in order.
pub fn run_pipeline(loaded: &LoadedConfig) -> Result<PipelineOutcome, PipelineError> {
    stage_ingest(loaded)?;
    stage_extract(loaded)?;
    stage_score(loaded)?;
    stage_detect(loaded)?;
    let assess = stage_assess(loaded)?;
    stage_report(loaded)?;
    Ok(PipelineOutcome {
        remote_unavailable: assess.remote_unavailable,
    })
}
