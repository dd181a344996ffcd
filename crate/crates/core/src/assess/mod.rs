//! Coverage assessment of (technique, dataset) pairs against five criteria,
//! with a composite score, ordinal labels, and conservative reconciliation.
//!
//! Two assessors share these types: a deterministic rule-based one
//! ([`rules`]) and a remote model-backed one ([`remote`]). When both run,
//! their labels are reconciled by taking the lower one, so coverage is never
//! overstated.

pub mod remote;
pub mod rules;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Verdict on one criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

/// Criterion names in canonical order.
pub const CRITERIA: [&str; 5] = [
    "attack_type_present",
    "protocol_recorded",
    "domain_match",
    "feature_sufficiency",
    "example_adequacy",
];

/// The five ordered criterion answers for one (technique, dataset) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaVector {
    pub attack_type_present: Answer,
    pub protocol_recorded: Answer,
    pub domain_match: Answer,
    pub feature_sufficiency: Answer,
    pub example_adequacy: Answer,
}

impl CriteriaVector {
    pub fn from_answers(answers: [Answer; 5]) -> Self {
        CriteriaVector {
            attack_type_present: answers[0],
            protocol_recorded: answers[1],
            domain_match: answers[2],
            feature_sufficiency: answers[3],
            example_adequacy: answers[4],
        }
    }

    pub fn answers(&self) -> [Answer; 5] {
        [
            self.attack_type_present,
            self.protocol_recorded,
            self.domain_match,
            self.feature_sufficiency,
            self.example_adequacy,
        ]
    }

    pub fn all(answer: Answer) -> Self {
        CriteriaVector::from_answers([answer; 5])
    }

    pub fn yes_count(&self) -> usize {
        self.answers().iter().filter(|a| **a == Answer::Yes).count()
    }

    pub fn unknown_count(&self) -> usize {
        self.answers()
            .iter()
            .filter(|a| **a == Answer::Unknown)
            .count()
    }
}

/// Per-dataset coverage verdict. Declaration order is the reconciliation
/// order: `No < Unknown < Partial < Full`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoverageLabel {
    No,
    Unknown,
    Partial,
    Full,
}

impl CoverageLabel {
    pub fn numeric_value(&self) -> f64 {
        match self {
            CoverageLabel::Full => 1.0,
            CoverageLabel::Partial => 0.5,
            CoverageLabel::Unknown => 0.25,
            CoverageLabel::No => 0.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CoverageLabel::Full => "Full",
            CoverageLabel::Partial => "Partial",
            CoverageLabel::Unknown => "Unknown",
            CoverageLabel::No => "No",
        }
    }

    pub const ALL: [CoverageLabel; 4] = [
        CoverageLabel::No,
        CoverageLabel::Unknown,
        CoverageLabel::Partial,
        CoverageLabel::Full,
    ];
}

impl std::fmt::Display for CoverageLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CoverageLabel {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "No" => Ok(CoverageLabel::No),
            "Unknown" => Ok(CoverageLabel::Unknown),
            "Partial" => Ok(CoverageLabel::Partial),
            "Full" => Ok(CoverageLabel::Full),
            other => Err(AssessError::UnknownLabel(other.to_string())),
        }
    }
}

/// One assessor's verdict for one (technique, dataset) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub attack_id: String,
    pub dataset_name: String,
    pub assessor_id: String,
    pub criteria: CriteriaVector,
    pub score: f64,
    pub label: CoverageLabel,
    pub rationale: String,
    pub cache_key: String,
}

/// Records keyed by (dataset name, technique id) for deterministic assembly.
pub type AssessmentSet = BTreeMap<(String, String), AssessmentRecord>;

/// On-disk form of one assessor's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentFile {
    pub assessor_id: String,
    pub records: Vec<AssessmentRecord>,
}

impl AssessmentFile {
    pub fn from_set(assessor_id: &str, set: &AssessmentSet) -> Self {
        AssessmentFile {
            assessor_id: assessor_id.to_string(),
            records: set.values().cloned().collect(),
        }
    }

    pub fn into_set(self) -> AssessmentSet {
        self.records
            .into_iter()
            .map(|r| ((r.dataset_name.clone(), r.attack_id.clone()), r))
            .collect()
    }
}

/// Which assessors a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssessorKind {
    #[default]
    Rules,
    Remote,
    Both,
}

impl std::str::FromStr for AssessorKind {
    type Err = AssessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rules" => Ok(AssessorKind::Rules),
            "remote" => Ok(AssessorKind::Remote),
            "both" => Ok(AssessorKind::Both),
            other => Err(AssessError::UnknownAssessor(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum AssessError {
    #[error("score {0} is not a 0.2-multiple in [0, 1]")]
    InvalidScore(f64),
    #[error("unknown coverage label {0:?}")]
    UnknownLabel(String),
    #[error("unknown assessor {0:?} (expected rules, remote, or both)")]
    UnknownAssessor(String),
}

/// Composite coverage score: 0.2 per Yes; No and Unknown contribute 0.
pub fn score_criteria(criteria: &CriteriaVector) -> f64 {
    0.2 * criteria.yes_count() as f64
}

/// Comparison slack absorbing float error in 0.2-multiples
/// (e.g. `3 * 0.2` lands a hair above 0.6).
const EPS: f64 = 1e-9;

/// Score-to-label thresholds. The defaults map score >= 0.8 to Full,
/// 0.4..=0.6 to Partial, and score <= 0.2 with at least `min_unknowns`
/// inconclusive answers to Unknown; everything else is No.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelThresholds {
    pub full_min: f64,
    pub partial_min: f64,
    pub partial_max: f64,
    pub unknown_max: f64,
    pub min_unknowns: usize,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds {
            full_min: 0.8,
            partial_min: 0.4,
            partial_max: 0.6,
            unknown_max: 0.2,
            min_unknowns: 3,
        }
    }
}

/// Map a composite score (plus the number of Unknown answers) to a label.
pub fn label_from_score(
    score: f64,
    unknown_count: usize,
    thresholds: &LabelThresholds,
) -> Result<CoverageLabel, AssessError> {
    let steps = (score / 0.2).round();
    if !score.is_finite() || !(0.0..=5.0).contains(&steps) || (score - steps * 0.2).abs() > EPS {
        return Err(AssessError::InvalidScore(score));
    }
    let label = if score >= thresholds.full_min - EPS {
        CoverageLabel::Full
    } else if score >= thresholds.partial_min - EPS && score <= thresholds.partial_max + EPS {
        CoverageLabel::Partial
    } else if score <= thresholds.unknown_max + EPS && unknown_count >= thresholds.min_unknowns {
        CoverageLabel::Unknown
    } else {
        CoverageLabel::No
    };
    Ok(label)
}

/// Conservative reconciliation: the lower label under
/// `No < Unknown < Partial < Full` wins.
pub fn reconcile(a: CoverageLabel, b: CoverageLabel) -> CoverageLabel {
    a.min(b)
}

/// Build one record from answered criteria.
pub fn build_record(
    attack_id: &str,
    dataset_name: &str,
    assessor_id: &str,
    criteria: CriteriaVector,
    rationale: String,
    cache_key: String,
    thresholds: &LabelThresholds,
) -> AssessmentRecord {
    let score = score_criteria(&criteria);
    let label = label_from_score(score, criteria.unknown_count(), thresholds)
        .expect("score_criteria output is always a valid 0.2-multiple");
    AssessmentRecord {
        attack_id: attack_id.to_string(),
        dataset_name: dataset_name.to_string(),
        assessor_id: assessor_id.to_string(),
        criteria,
        score,
        label,
        rationale,
        cache_key,
    }
}
