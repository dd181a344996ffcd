//! Analytics over the reconciled coverage matrix: per-dataset statistics,
//! gap lists, combination (set-cover) coverage, and assessor agreement.
//!
//! All operations are pure over an immutable [`CoverageMatrix`]; emission to
//! JSON/CSV/Markdown/SVG lives in [`emit`] and [`svg`].

pub mod emit;
pub mod svg;

use crate::assess::{reconcile, AssessmentSet, CoverageLabel};
use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Above this many datasets, exhaustive subset search gives way to greedy.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Reconciled labels for all (technique, dataset) pairs; every cell is
/// populated (Unknown for unassessed pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    /// Sorted technique ids (row order).
    pub techniques: Vec<String>,
    /// Dataset names in knowledge-base order (column order).
    pub datasets: Vec<String>,
    /// technique id -> dataset name -> label.
    pub rows: BTreeMap<String, BTreeMap<String, CoverageLabel>>,
}

impl CoverageMatrix {
    /// Assemble the matrix from one or more assessors' record sets,
    /// reconciling conservatively (minimum label) where several assessors
    /// judged the same pair and filling unassessed pairs with Unknown.
    pub fn from_assessments(
        sets: &[&AssessmentSet],
        techniques: &[String],
        datasets: &[String],
    ) -> CoverageMatrix {
        let mut technique_ids: Vec<String> = techniques.to_vec();
        technique_ids.sort();
        technique_ids.dedup();
        let mut rows = BTreeMap::new();
        for technique in &technique_ids {
            let mut row = BTreeMap::new();
            for dataset in datasets {
                let key = (dataset.clone(), technique.clone());
                let label = sets
                    .iter()
                    .filter_map(|set| set.get(&key).map(|record| record.label))
                    .reduce(reconcile)
                    .unwrap_or(CoverageLabel::Unknown);
                row.insert(dataset.clone(), label);
            }
            rows.insert(technique.clone(), row);
        }
        CoverageMatrix {
            techniques: technique_ids,
            datasets: datasets.to_vec(),
            rows,
        }
    }

    pub fn cell(&self, technique: &str, dataset: &str) -> CoverageLabel {
        self.rows
            .get(technique)
            .and_then(|row| row.get(dataset))
            .copied()
            .unwrap_or(CoverageLabel::Unknown)
    }

    /// Technique ids a dataset covers at `threshold` or better.
    fn covered_by(&self, dataset: &str, threshold: CoverageLabel) -> BTreeSet<&str> {
        self.techniques
            .iter()
            .filter(|t| self.cell(t, dataset) >= threshold)
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("coverage matrix is empty")]
    EmptyMatrix,
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("assessment sets cover different key spaces: {0}")]
    KeyMismatch(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV emission failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Column summary for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_score: f64,
    pub full_count: usize,
    pub full_fraction: f64,
    /// Counts per label name; always carries all four labels.
    pub label_histogram: BTreeMap<String, usize>,
}

/// Per-dataset statistics over the matrix columns.
pub fn dataset_stats(
    matrix: &CoverageMatrix,
) -> Result<BTreeMap<String, DatasetStats>, ReportError> {
    if matrix.techniques.is_empty() || matrix.datasets.is_empty() {
        return Err(ReportError::EmptyMatrix);
    }
    let total = matrix.techniques.len() as f64;
    let mut stats = BTreeMap::new();
    for dataset in &matrix.datasets {
        let mut histogram: BTreeMap<String, usize> = CoverageLabel::ALL
            .iter()
            .map(|label| (label.as_str().to_string(), 0))
            .collect();
        let mut sum = 0.0;
        for technique in &matrix.techniques {
            let label = matrix.cell(technique, dataset);
            sum += label.numeric_value();
            *histogram
                .get_mut(label.as_str())
                .expect("all labels seeded") += 1;
        }
        let full_count = histogram[CoverageLabel::Full.as_str()];
        stats.insert(
            dataset.clone(),
            DatasetStats {
                mean_score: sum / total,
                full_count,
                full_fraction: full_count as f64 / total,
                label_histogram: histogram,
            },
        );
    }
    Ok(stats)
}

/// Union coverage of one dataset subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    /// Sorted member names.
    pub subset: Vec<String>,
    pub covered_count: usize,
    pub coverage_fraction: f64,
    pub covered_ids: Vec<String>,
    pub uncovered_ids: Vec<String>,
}

/// A best-subset answer, flagged when produced by the greedy heuristic
/// rather than exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCombination {
    pub exhaustive: bool,
    #[serde(flatten)]
    pub result: CombinationResult,
}

fn combination_from_names(
    matrix: &CoverageMatrix,
    names: Vec<String>,
    threshold: CoverageLabel,
) -> CombinationResult {
    let mut covered: BTreeSet<&str> = BTreeSet::new();
    for name in &names {
        covered.extend(matrix.covered_by(name, threshold));
    }
    let covered_ids: Vec<String> = covered.iter().map(|s| s.to_string()).collect();
    let uncovered_ids: Vec<String> = matrix
        .techniques
        .iter()
        .filter(|t| !covered.contains(t.as_str()))
        .cloned()
        .collect();
    CombinationResult {
        covered_count: covered_ids.len(),
        coverage_fraction: covered_ids.len() as f64 / matrix.techniques.len() as f64,
        covered_ids,
        uncovered_ids,
        subset: names,
    }
}

/// Coverage of a named dataset subset: a technique counts as covered iff
/// its best label within the subset reaches `threshold`.
pub fn combination_coverage(
    matrix: &CoverageMatrix,
    subset: &[String],
    threshold: CoverageLabel,
) -> Result<CombinationResult, ReportError> {
    if matrix.techniques.is_empty() {
        return Err(ReportError::EmptyMatrix);
    }
    for name in subset {
        if !matrix.datasets.contains(name) {
            return Err(ReportError::UnknownDataset(name.clone()));
        }
    }
    let mut names = subset.to_vec();
    names.sort();
    names.dedup();
    Ok(combination_from_names(matrix, names, threshold))
}

/// Exhaustive size-k optimum; ties break by lexicographic subset order.
pub fn best_combination_exhaustive(
    matrix: &CoverageMatrix,
    k: usize,
    threshold: CoverageLabel,
) -> CombinationResult {
    let k = k.clamp(1, matrix.datasets.len());
    let mut best: Option<CombinationResult> = None;
    for indices in (0..matrix.datasets.len()).combinations(k) {
        let mut names: Vec<String> = indices
            .iter()
            .map(|i| matrix.datasets[*i].clone())
            .collect();
        names.sort();
        let candidate = combination_from_names(matrix, names, threshold);
        let better = match &best {
            None => true,
            Some(current) => {
                candidate.covered_count > current.covered_count
                    || (candidate.covered_count == current.covered_count
                        && candidate.subset < current.subset)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    best.expect("at least one size-k subset exists")
}

/// Greedy max-marginal-gain heuristic; ties break by dataset name.
pub fn best_combination_greedy(
    matrix: &CoverageMatrix,
    k: usize,
    threshold: CoverageLabel,
) -> CombinationResult {
    let k = k.clamp(1, matrix.datasets.len());
    let mut chosen: Vec<String> = Vec::new();
    let mut covered: BTreeSet<&str> = BTreeSet::new();
    for _ in 0..k {
        let mut candidates: Vec<(usize, &String)> = matrix
            .datasets
            .iter()
            .filter(|name| !chosen.contains(name))
            .map(|name| {
                let gain = matrix
                    .covered_by(name, threshold)
                    .difference(&covered)
                    .count();
                (gain, name)
            })
            .collect();
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let (_, pick) = candidates[0];
        covered.extend(matrix.covered_by(pick, threshold));
        chosen.push(pick.clone());
    }
    chosen.sort();
    combination_from_names(matrix, chosen, threshold)
}

/// Best size-k subset: exhaustive up to [`EXHAUSTIVE_LIMIT`] datasets,
/// greedy (flagged) beyond.
pub fn best_combination(
    matrix: &CoverageMatrix,
    k: usize,
    threshold: CoverageLabel,
) -> BestCombination {
    if matrix.datasets.len() <= EXHAUSTIVE_LIMIT {
        BestCombination {
            exhaustive: true,
            result: best_combination_exhaustive(matrix, k, threshold),
        }
    } else {
        BestCombination {
            exhaustive: false,
            result: best_combination_greedy(matrix, k, threshold),
        }
    }
}

/// Gap lists over the whole matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    /// Best label across all datasets is Unknown or No.
    pub uncovered_everywhere: Vec<String>,
    /// No Full anywhere and exactly one Partial — techniques one step from
    /// joining `uncovered_everywhere` (the two lists are disjoint).
    pub minimal_coverage: Vec<String>,
}

pub fn technique_gaps(matrix: &CoverageMatrix) -> Gaps {
    let mut uncovered_everywhere = Vec::new();
    let mut minimal_coverage = Vec::new();
    for technique in &matrix.techniques {
        let labels: Vec<CoverageLabel> = matrix
            .datasets
            .iter()
            .map(|d| matrix.cell(technique, d))
            .collect();
        let max = labels
            .iter()
            .copied()
            .max()
            .unwrap_or(CoverageLabel::Unknown);
        let partials = labels
            .iter()
            .filter(|l| **l == CoverageLabel::Partial)
            .count();
        if max <= CoverageLabel::Unknown {
            uncovered_everywhere.push(technique.clone());
        } else if max < CoverageLabel::Full && partials == 1 {
            minimal_coverage.push(technique.clone());
        }
    }
    Gaps {
        uncovered_everywhere,
        minimal_coverage,
    }
}

/// Exact-label agreement between two assessors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    /// Fraction of identically labeled pairs per dataset.
    pub per_dataset: BTreeMap<String, f64>,
    /// Pooled per-pair rate over all datasets (not the mean of rates).
    pub overall_rate: f64,
}

pub fn agreement(a: &AssessmentSet, b: &AssessmentSet) -> Result<AgreementMatrix, ReportError> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(ka, kb)| ka != kb) {
        return Err(ReportError::KeyMismatch(format!(
            "{} vs {} pairs",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(ReportError::EmptyMatrix);
    }
    let mut per_dataset_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut agreed_total = 0usize;
    for (key, record_a) in a {
        let record_b = &b[key];
        let slot = per_dataset_counts.entry(key.0.clone()).or_insert((0, 0));
        slot.1 += 1;
        if record_a.label == record_b.label {
            slot.0 += 1;
            agreed_total += 1;
        }
    }
    Ok(AgreementMatrix {
        per_dataset: per_dataset_counts
            .into_iter()
            .map(|(dataset, (agreed, total))| (dataset, agreed as f64 / total as f64))
            .collect(),
        overall_rate: agreed_total as f64 / a.len() as f64,
    })
}
