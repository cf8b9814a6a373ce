use super::metrics::ConfusionMatrix;
use crate::streamer::TaskName;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use thiserror::Error;

/// Labeling task as evaluated; both recurrence cohorts share one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTask {
    Orn,
    ProstateRecurrence,
    HnRecurrence,
}

impl EvalTask {
    pub const ALL: [EvalTask; 3] = [EvalTask::Orn, EvalTask::ProstateRecurrence, EvalTask::HnRecurrence];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalTask::Orn => "orn",
            EvalTask::ProstateRecurrence => "prostate_recurrence",
            EvalTask::HnRecurrence => "hn_recurrence",
        }
    }

    pub fn parse(s: &str) -> Option<EvalTask> {
        EvalTask::ALL.into_iter().find(|t| t.as_str() == s.trim())
    }

    /// Row heading used in reports.
    pub fn title(self) -> &'static str {
        match self {
            EvalTask::Orn => "ORN",
            EvalTask::ProstateRecurrence => "Prostate recurrence",
            EvalTask::HnRecurrence => "H&N recurrence",
        }
    }

    pub fn prompt_task(self) -> TaskName {
        match self {
            EvalTask::Orn => TaskName::Orn,
            EvalTask::ProstateRecurrence | EvalTask::HnRecurrence => TaskName::Recurrence,
        }
    }
}

impl fmt::Display for EvalTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Known(bool),
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub patient_id: String,
    pub task: EvalTask,
    pub prediction: bool,
    pub baseline_truth: bool,
    pub adjudicated_truth: Truth,
}

impl LabeledCase {
    /// A case before review: adjudicated truth starts as the baseline.
    pub fn new(patient_id: impl Into<String>, task: EvalTask, prediction: bool, baseline_truth: bool) -> Self {
        LabeledCase {
            patient_id: patient_id.into(),
            task,
            prediction,
            baseline_truth,
            adjudicated_truth: Truth::Known(baseline_truth),
        }
    }

    pub fn is_discordant(&self) -> bool {
        self.prediction != self.baseline_truth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GroundTruthError,
    ModelError,
    Indeterminate,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::GroundTruthError, Verdict::ModelError, Verdict::Indeterminate];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GroundTruthError => "ground_truth_error",
            Verdict::ModelError => "model_error",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationVerdict {
    pub patient_id: String,
    pub task: EvalTask,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub reviewer: String,
    pub decided_at: DateTime<Utc>,
}

/// One line of the append-only verdict log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub seq: u64,
    #[serde(flatten)]
    pub verdict: AdjudicationVerdict,
    /// Replaces the active verdict for the same case instead of conflicting.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub supersede: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdjudicationError {
    #[error("{task} case {patient_id} is concordant and needs no verdict")]
    VerdictForConcordantCase { patient_id: String, task: EvalTask },
    #[error("{task} case {patient_id} already has a verdict")]
    DuplicateVerdict { patient_id: String, task: EvalTask },
    #[error("no {task} case {patient_id}")]
    UnknownCase { patient_id: String, task: EvalTask },
}

/// Cells from adjudicated truth; excluded cases are skipped.
pub fn confusion(cases: &[LabeledCase]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for c in cases {
        if let Truth::Known(truth) = c.adjudicated_truth {
            cm.tally(c.prediction, truth);
        }
    }
    cm
}

/// Cells against the unreviewed baseline.
pub fn confusion_before(cases: &[LabeledCase]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for c in cases {
        cm.tally(c.prediction, c.baseline_truth);
    }
    cm
}

/// Cases where the prediction disagrees with the baseline, by task then patient id.
pub fn list_discrepancies(cases: &[LabeledCase]) -> Vec<LabeledCase> {
    let mut out: Vec<_> = cases.iter().filter(|c| c.is_discordant()).cloned().collect();
    out.sort_by(|a, b| (a.task, &a.patient_id).cmp(&(b.task, &b.patient_id)));
    out
}

/// Apply at most one verdict per discordant case. Ground-truth errors flip
/// the baseline, model errors keep it, indeterminate cases leave the count.
pub fn apply_adjudication(
    cases: &[LabeledCase],
    verdicts: &[AdjudicationVerdict],
) -> Result<Vec<LabeledCase>, AdjudicationError> {
    let index: HashMap<(EvalTask, &str), usize> = cases
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.task, c.patient_id.as_str()), i))
        .collect();
    let mut out = cases.to_vec();
    let mut seen = HashMap::new();
    for v in verdicts {
        let key = (v.task, v.patient_id.as_str());
        let Some(&i) = index.get(&key) else {
            return Err(AdjudicationError::UnknownCase {
                patient_id: v.patient_id.clone(),
                task: v.task,
            });
        };
        let case = &mut out[i];
        if !case.is_discordant() {
            return Err(AdjudicationError::VerdictForConcordantCase {
                patient_id: v.patient_id.clone(),
                task: v.task,
            });
        }
        if seen.insert(key, ()).is_some() {
            return Err(AdjudicationError::DuplicateVerdict {
                patient_id: v.patient_id.clone(),
                task: v.task,
            });
        }
        case.adjudicated_truth = match v.verdict {
            Verdict::GroundTruthError => Truth::Known(!case.baseline_truth),
            Verdict::ModelError => Truth::Known(case.baseline_truth),
            Verdict::Indeterminate => Truth::Excluded,
        };
    }
    Ok(out)
}

/// The verdicts in force after replaying a log in sequence order.
pub fn active_verdicts(records: &[VerdictRecord]) -> Result<Vec<AdjudicationVerdict>, AdjudicationError> {
    let mut sorted: Vec<&VerdictRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.seq);
    let mut active: BTreeMap<(EvalTask, String), AdjudicationVerdict> = BTreeMap::new();
    for r in sorted {
        let key = (r.verdict.task, r.verdict.patient_id.clone());
        if active.contains_key(&key) && !r.supersede {
            return Err(AdjudicationError::DuplicateVerdict {
                patient_id: key.1,
                task: key.0,
            });
        }
        active.insert(key, r.verdict.clone());
    }
    Ok(active.into_values().collect())
}

/// Number of verdicts of each kind.
pub fn verdict_counts(verdicts: &[AdjudicationVerdict]) -> BTreeMap<&'static str, usize> {
    let mut counts: BTreeMap<&'static str, usize> = Verdict::ALL.iter().map(|v| (v.as_str(), 0)).collect();
    for v in verdicts {
        *counts.entry(v.verdict.as_str()).or_default() += 1;
    }
    counts
}
