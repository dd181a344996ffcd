//! Report assembly and emission: `report.json`, `coverage_matrix.csv`,
//! `agreement.csv`, `report.md`, and `charts/*.svg` under one output
//! directory. Emission is deterministic — no timestamps, sorted maps, and
//! shortest round-trip float formatting — so identical runs produce
//! byte-identical files.

use crate::assess::{AssessmentSet, CoverageLabel, LabelThresholds};
use crate::report::svg;
use crate::report::{
    agreement, best_combination, combination_coverage, dataset_stats, technique_gaps,
    AgreementMatrix, BestCombination, CombinationResult, CoverageMatrix, DatasetStats, Gaps,
    ReportError,
};
use crate::risk::{RiskCombiner, RiskProfile};
use crate::stix::BundleInfo;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// How many techniques survived each pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub techniques_in_model: usize,
    pub network_detectable: usize,
    /// Count per detectability class over the threat model.
    pub per_class: BTreeMap<String, usize>,
}

/// Auditability block embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub config_hash: String,
    pub bundle_versions: Vec<BundleInfo>,
    pub assessor_ids: Vec<String>,
    pub risk_combiner: RiskCombiner,
    pub include_partial: bool,
    pub combination_threshold: CoverageLabel,
    pub label_thresholds: LabelThresholds,
    pub prompt_template_hash: Option<String>,
    pub technique_counts: FunnelCounts,
    /// Fixed methodological caveats (combiner convention, threshold choices).
    pub notes: Vec<String>,
}

/// Standing caveats every report carries.
pub fn standard_notes() -> Vec<String> {
    vec![
        "weighted_risk uses the toolkit convention base * (0.5 + 0.1 * frequency) unless the additive combiner is configured".to_string(),
        "score-to-label thresholds and the combination coverage threshold are toolkit conventions and configurable".to_string(),
        "combination coverage counts a technique as covered when its best label in the subset reaches the configured threshold".to_string(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSection {
    pub threshold: CoverageLabel,
    /// Best subset for each k from 1 up to the configured maximum.
    pub best_per_k: Vec<BestCombination>,
    pub full_set: CombinationResult,
}

/// The machine-readable report: every number behind the rendered outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: ReportMetadata,
    pub risk_ranking: Vec<RiskProfile>,
    pub dataset_stats: BTreeMap<String, DatasetStats>,
    pub combinations: CombinationSection,
    pub gaps: Gaps,
    pub agreement: Option<AgreementMatrix>,
    pub matrix: CoverageMatrix,
}

/// Compute all analytics over a matrix and assemble the report.
pub fn compute_report(
    matrix: CoverageMatrix,
    risk_ranking: Vec<RiskProfile>,
    metadata: ReportMetadata,
    agreement_sets: Option<(&AssessmentSet, &AssessmentSet)>,
    max_k: usize,
) -> Result<Report, ReportError> {
    let stats = dataset_stats(&matrix)?;
    let threshold = metadata.combination_threshold;
    let k_cap = max_k.clamp(1, matrix.datasets.len());
    let best_per_k: Vec<BestCombination> = (1..=k_cap)
        .map(|k| best_combination(&matrix, k, threshold))
        .collect();
    let full_set = combination_coverage(&matrix, &matrix.datasets.clone(), threshold)?;
    let gaps = technique_gaps(&matrix);
    let agreement = match agreement_sets {
        Some((a, b)) => Some(agreement(a, b)?),
        None => None,
    };
    Ok(Report {
        metadata,
        risk_ranking,
        dataset_stats: stats,
        combinations: CombinationSection {
            threshold,
            best_per_k,
            full_set,
        },
        gaps,
        agreement,
        matrix,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

fn coverage_csv(matrix: &CoverageMatrix) -> Result<String, ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["attack_id".to_string()];
    header.extend(matrix.datasets.iter().cloned());
    writer.write_record(&header)?;
    for technique in &matrix.techniques {
        let mut row = vec![technique.clone()];
        for dataset in &matrix.datasets {
            row.push(matrix.cell(technique, dataset).as_str().to_string());
        }
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn agreement_csv(agreement: Option<&AgreementMatrix>) -> Result<String, ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["dataset", "agreement_percent"])?;
    if let Some(matrix) = agreement {
        for (dataset, rate) in &matrix.per_dataset {
            writer.write_record([dataset.as_str(), &format!("{:.1}", rate * 100.0)])?;
        }
        writer.write_record(["overall", &format!("{:.1}", matrix.overall_rate * 100.0)])?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn markdown(report: &Report) -> String {
    use std::fmt::Write;
    let mut md = String::new();
    let meta = &report.metadata;
    md.push_str("# NIDS dataset coverage audit\n\n");

    md.push_str("## Run metadata\n\n");
    let _ = writeln!(md, "- tool version: {}", meta.tool_version);
    let _ = writeln!(md, "- config hash: `{}`", meta.config_hash);
    for bundle in &meta.bundle_versions {
        let _ = writeln!(
            md,
            "- bundle: {} version {} (modified {})",
            bundle.matrix,
            bundle.version.as_deref().unwrap_or("unknown"),
            bundle.modified.as_deref().unwrap_or("unknown")
        );
    }
    let _ = writeln!(md, "- assessors: {}", meta.assessor_ids.join(", "));
    let _ = writeln!(md, "- risk combiner: {:?}", meta.risk_combiner);
    let _ = writeln!(
        md,
        "- include partial detectability: {}",
        meta.include_partial
    );
    let _ = writeln!(
        md,
        "- combination threshold: {}",
        meta.combination_threshold
    );
    if let Some(hash) = &meta.prompt_template_hash {
        let _ = writeln!(md, "- prompt template hash: `{hash}`");
    }
    for note in &meta.notes {
        let _ = writeln!(md, "- note: {note}");
    }

    md.push_str("\n## Technique funnel\n\n");
    let _ = writeln!(
        md,
        "- techniques in threat model: {}",
        meta.technique_counts.techniques_in_model
    );
    let _ = writeln!(
        md,
        "- network-detectable (assessed): {}",
        meta.technique_counts.network_detectable
    );
    for (class, count) in &meta.technique_counts.per_class {
        let _ = writeln!(md, "- class {class}: {count}");
    }

    md.push_str("\n## Top techniques by weighted risk\n\n");
    md.push_str("| rank | technique | name | occurrences | frequency | base | weighted |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for (rank, profile) in report.risk_ranking.iter().take(10).enumerate() {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} |",
            rank + 1,
            profile.attack_id,
            profile.name,
            profile.occurrence_count,
            profile.frequency_score,
            profile.base_risk,
            profile.weighted_risk
        );
    }

    md.push_str("\n## Per-dataset coverage\n\n");
    md.push_str("| dataset | mean score | Full | Partial | No | Unknown | full fraction |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    for (dataset, stats) in &report.dataset_stats {
        let _ = writeln!(
            md,
            "| {} | {:.3} | {} | {} | {} | {} | {:.3} |",
            dataset,
            stats.mean_score,
            stats.label_histogram["Full"],
            stats.label_histogram["Partial"],
            stats.label_histogram["No"],
            stats.label_histogram["Unknown"],
            stats.full_fraction
        );
    }

    md.push_str("\n## Combination coverage\n\n");
    md.push_str("| k | subset | covered | fraction | search |\n");
    md.push_str("|---|---|---|---|---|\n");
    for best in &report.combinations.best_per_k {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.3} | {} |",
            best.result.subset.len(),
            best.result.subset.join(" + "),
            best.result.covered_count,
            best.result.coverage_fraction,
            if best.exhaustive {
                "exhaustive"
            } else {
                "greedy"
            }
        );
    }
    let full = &report.combinations.full_set;
    let _ = writeln!(
        md,
        "| all | {} | {} | {:.3} | union |",
        full.subset.join(" + "),
        full.covered_count,
        full.coverage_fraction
    );

    md.push_str("\n## Coverage gaps\n\n");
    let list = |ids: &[String]| {
        if ids.is_empty() {
            "none".to_string()
        } else {
            ids.join(", ")
        }
    };
    let _ = writeln!(
        md,
        "- uncovered everywhere: {}",
        list(&report.gaps.uncovered_everywhere)
    );
    let _ = writeln!(
        md,
        "- minimal coverage: {}",
        list(&report.gaps.minimal_coverage)
    );

    md.push_str("\n## Assessor agreement\n\n");
    match &report.agreement {
        Some(agreement) => {
            md.push_str("| dataset | agreement |\n|---|---|\n");
            for (dataset, rate) in &agreement.per_dataset {
                let _ = writeln!(md, "| {} | {:.1}% |", dataset, rate * 100.0);
            }
            let _ = writeln!(md, "| overall | {:.1}% |", agreement.overall_rate * 100.0);
        }
        None => {
            md.push_str("Not computed: the run used a single assessor.\n");
        }
    }
    md
}

/// Write every report artifact under `out_dir`.
pub fn write_all(out_dir: &Path, report: &Report) -> Result<(), ReportError> {
    std::fs::create_dir_all(out_dir)?;
    let charts = out_dir.join("charts");
    std::fs::create_dir_all(&charts)?;

    write_text(&out_dir.join("report.json"), &to_json_text(report))?;
    write_text(
        &out_dir.join("coverage_matrix.csv"),
        &coverage_csv(&report.matrix)?,
    )?;
    write_text(
        &out_dir.join("agreement.csv"),
        &agreement_csv(report.agreement.as_ref())?,
    )?;
    write_text(&out_dir.join("report.md"), &markdown(report))?;

    let means: Vec<(String, f64)> = report
        .dataset_stats
        .iter()
        .map(|(name, stats)| (name.clone(), stats.mean_score))
        .collect();
    write_text(
        &charts.join("coverage_means.svg"),
        &svg::bar_chart("Mean coverage score per dataset", &means, 1.0),
    )?;
    write_text(
        &charts.join("coverage_matrix.svg"),
        &svg::coverage_heatmap(&report.matrix),
    )?;
    if let Some(agreement) = &report.agreement {
        let rates: Vec<(String, f64)> = agreement
            .per_dataset
            .iter()
            .map(|(name, rate)| (name.clone(), rate * 100.0))
            .collect();
        write_text(
            &charts.join("agreement.svg"),
            &svg::bar_chart("Assessor agreement per dataset (%)", &rates, 100.0),
        )?;
    }
    Ok(())
}
