use super::cases::{
    apply_adjudication, confusion, confusion_before, list_discrepancies, verdict_counts, AdjudicationError,
    AdjudicationVerdict, EvalTask, LabeledCase, Truth,
};
use super::metrics::{metrics, micro_average, ConfusionMatrix, MetricsReport, Percent};
use crate::streamer::{StoredResult, TaskStatus};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalIoError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub patient_id: String,
    pub task: EvalTask,
    pub baseline_label: bool,
}

pub fn parse_binary(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "positive" | "pos" => Some(true),
        "0" | "false" | "no" | "negative" | "neg" => Some(false),
        _ => None,
    }
}

/// Rows of a `patient_id,task,baseline_label` file.
pub fn read_baseline(path: &Path) -> Result<Vec<BaselineRow>, EvalIoError> {
    let csv_err = |source| EvalIoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let malformed = |reason: String| EvalIoError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(format!("missing column {name}")))
    };
    let (pid, task, label) = (col("patient_id")?, col("task")?, col("baseline_label")?);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 2;
        out.push(BaselineRow {
            patient_id: rec[pid].to_string(),
            task: EvalTask::parse(&rec[task]).ok_or_else(|| malformed(format!("row {row}: unknown task {:?}", &rec[task])))?,
            baseline_label: parse_binary(&rec[label])
                .ok_or_else(|| malformed(format!("row {row}: bad baseline_label {:?}", &rec[label])))?,
        });
    }
    Ok(out)
}

pub fn write_baseline(path: &Path, rows: &[BaselineRow]) -> Result<(), EvalIoError> {
    let csv_err = |source| EvalIoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["patient_id", "task", "baseline_label"]).map_err(csv_err)?;
    for r in rows {
        let label = if r.baseline_label { "positive" } else { "negative" };
        w.write_record([r.patient_id.as_str(), r.task.as_str(), label]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CaseSet {
    pub cases: Vec<LabeledCase>,
    /// Patients left out, with the reason.
    pub unscored: Vec<(String, String)>,
}

/// Join one task's run results with baseline labels.
pub fn build_cases(task: EvalTask, results: &[StoredResult], baseline: &[BaselineRow]) -> CaseSet {
    let truth: HashMap<&str, bool> = baseline
        .iter()
        .filter(|b| b.task == task)
        .map(|b| (b.patient_id.as_str(), b.baseline_label))
        .collect();
    let mut set = CaseSet::default();
    for r in results {
        let prediction = match (r.status, r.label.as_ref().and_then(|l| l.positive())) {
            (TaskStatus::Ok, Some(p)) => p,
            _ => {
                set.unscored.push((r.patient_id.clone(), format!("status {}", r.status.as_str())));
                continue;
            }
        };
        match truth.get(r.patient_id.as_str()) {
            Some(&b) => set.cases.push(LabeledCase::new(r.patient_id.clone(), task, prediction, b)),
            None => set.unscored.push((r.patient_id.clone(), "no baseline label".into())),
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub n: u64,
    pub counts: ConfusionMatrix,
    pub metrics: MetricsReport,
}

impl Block {
    pub fn of(counts: ConfusionMatrix) -> Block {
        Block {
            n: counts.n(),
            counts,
            metrics: metrics(&counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub task: Option<EvalTask>,
    pub title: String,
    pub before: Block,
    pub after: Block,
    pub discrepancies: usize,
    pub verdicts: BTreeMap<String, usize>,
    pub unresolved: usize,
    /// Share of non-excluded cases whose baseline label survived review.
    pub baseline_label_accuracy: Option<Percent>,
    pub unscored: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table3Report {
    pub rows: Vec<ReportRow>,
    pub total: ReportRow,
}

struct Tally {
    discrepancies: usize,
    verdicts: BTreeMap<String, usize>,
    unresolved: usize,
    baseline_kept: u64,
    kept_of: u64,
    unscored: usize,
}

fn row(task: Option<EvalTask>, title: &str, before: ConfusionMatrix, after: ConfusionMatrix, t: Tally) -> ReportRow {
    ReportRow {
        task,
        title: title.to_string(),
        before: Block::of(before),
        after: Block::of(after),
        discrepancies: t.discrepancies,
        verdicts: t.verdicts,
        unresolved: t.unresolved,
        baseline_label_accuracy: Percent::of(t.baseline_kept, t.kept_of),
        unscored: t.unscored,
    }
}

/// Before/after blocks per task plus the pooled total.
pub fn build_report(
    sets: &[(EvalTask, CaseSet)],
    verdicts: &[AdjudicationVerdict],
) -> Result<Table3Report, AdjudicationError> {
    if let Some(v) = verdicts.iter().find(|v| !sets.iter().any(|(t, _)| *t == v.task)) {
        return Err(AdjudicationError::UnknownCase {
            patient_id: v.patient_id.clone(),
            task: v.task,
        });
    }
    let mut rows = Vec::new();
    let mut total = Tally {
        discrepancies: 0,
        verdicts: BTreeMap::new(),
        unresolved: 0,
        baseline_kept: 0,
        kept_of: 0,
        unscored: 0,
    };
    for (task, set) in sets {
        let mine: Vec<_> = verdicts.iter().filter(|v| v.task == *task).cloned().collect();
        let after = apply_adjudication(&set.cases, &mine)?;
        let kept: Vec<_> = after
            .iter()
            .filter_map(|c| match c.adjudicated_truth {
                Truth::Known(t) => Some(t == c.baseline_truth),
                Truth::Excluded => None,
            })
            .collect();
        let counts: BTreeMap<String, usize> =
            verdict_counts(&mine).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let discrepancies = list_discrepancies(&set.cases).len();
        let t = Tally {
            discrepancies,
            unresolved: discrepancies - mine.len(),
            baseline_kept: kept.iter().filter(|k| **k).count() as u64,
            kept_of: kept.len() as u64,
            unscored: set.unscored.len(),
            verdicts: counts,
        };
        total.discrepancies += t.discrepancies;
        total.unresolved += t.unresolved;
        total.baseline_kept += t.baseline_kept;
        total.kept_of += t.kept_of;
        total.unscored += t.unscored;
        for (k, v) in &t.verdicts {
            *total.verdicts.entry(k.clone()).or_default() += v;
        }
        rows.push(row(Some(*task), task.title(), confusion_before(&set.cases), confusion(&after), t));
    }
    let before = micro_average(&rows.iter().map(|r| r.before.counts).collect::<Vec<_>>());
    let after = micro_average(&rows.iter().map(|r| r.after.counts).collect::<Vec<_>>());
    Ok(Table3Report {
        total: row(None, "Total", before, after, total),
        rows,
    })
}

impl Table3Report {
    /// Fixed-width before/after table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22}{:<8}{:>5}{:>6}{:>6}{:>6}{:>6}{:>9}{:>9}{:>9}{:>9}",
            "Task", "Stage", "n", "TP", "FP", "FN", "TN", "Pr.(%)", "Re.(%)", "F1(%)", "Ac.(%)"
        );
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            for (stage, b) in [("Before", &r.before), ("After", &r.after)] {
                let title = if stage == "Before" { r.title.as_str() } else { "" };
                let cell = |p: Option<Percent>| p.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
                let c = b.counts;
                let _ = writeln!(
                    out,
                    "{:<22}{:<8}{:>5}{:>6}{:>6}{:>6}{:>6}{:>9}{:>9}{:>9}{:>9}",
                    title,
                    stage,
                    b.n,
                    c.tp,
                    c.fp,
                    c.fn_,
                    c.tn,
                    cell(b.metrics.precision),
                    cell(b.metrics.recall),
                    cell(b.metrics.f1),
                    cell(b.metrics.accuracy)
                );
            }
        }
        out.push('\n');
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            let v = |k: &str| r.verdicts.get(k).copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "{}: {} discrepancies; {} ground-truth errors, {} model errors, {} indeterminate, {} unresolved; \
                 baseline label accuracy after review {}%{}",
                r.title,
                r.discrepancies,
                v("ground_truth_error"),
                v("model_error"),
                v("indeterminate"),
                r.unresolved,
                r.baseline_label_accuracy.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
                if r.unscored > 0 { format!("; {} unscored", r.unscored) } else { String::new() }
            );
        }
        out
    }
}
