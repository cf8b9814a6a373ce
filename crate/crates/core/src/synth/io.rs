use super::generate::{Cohort, Flag, SynthError, TruthRow};
use super::spec::CohortTask;
use crate::ehr::write_patient_file;
use crate::eval::{write_baseline, AdjudicationVerdict, BaselineRow, Verdict, VerdictRecord};
use chrono::{DateTime, Duration, Utc};
use std::fs;
use std::path::Path;

pub const STORE_DIR: &str = "store";
pub const TRUTH_FILE: &str = "truth_manifest.csv";
pub const BASELINE_FILE: &str = "baseline.csv";
pub const SPEC_FILE: &str = "cohort_spec.json";
pub const DEMO_VERDICTS_FILE: &str = "demo_verdicts.jsonl";

const TRUTH_HEADER: [&str; 7] = [
    "patient_id",
    "task",
    "true_label",
    "true_stage",
    "baseline_label",
    "flags",
    "evidence_doc_ids",
];

fn io(path: &Path) -> impl Fn(String) -> SynthError + '_ {
    move |reason| SynthError::Io {
        path: path.display().to_string(),
        reason,
    }
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| if b { "positive" } else { "negative" }.to_string())
        .unwrap_or_default()
}

pub fn write_truth_manifest(path: &Path, rows: &[TruthRow]) -> Result<(), SynthError> {
    let err = io(path);
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    w.write_record(TRUTH_HEADER).map_err(|e| err(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.patient_id.clone(),
            r.task.as_str().to_string(),
            opt_bool(r.true_label),
            r.true_stage.map(|s| s.to_string()).unwrap_or_default(),
            opt_bool(r.baseline_label),
            r.flag.map(|f| f.as_str().to_string()).unwrap_or_default(),
            r.evidence_doc_ids.join(";"),
        ])
        .map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

pub fn read_truth_manifest(path: &Path) -> Result<Vec<TruthRow>, SynthError> {
    let err = io(path);
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = r.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().ne(TRUTH_HEADER) {
        return Err(err(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let bad = |what: &str| err(format!("row {}: bad {what}", i + 2));
        let label = |s: &str| match s {
            "" => Ok(None),
            "positive" => Ok(Some(true)),
            "negative" => Ok(Some(false)),
            _ => Err(()),
        };
        out.push(TruthRow {
            patient_id: rec[0].to_string(),
            task: CohortTask::parse(&rec[1]).ok_or_else(|| bad("task"))?,
            true_label: label(&rec[2]).map_err(|_| bad("true_label"))?,
            true_stage: match &rec[3] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("true_stage"))?),
            },
            baseline_label: label(&rec[4]).map_err(|_| bad("baseline_label"))?,
            flag: match &rec[5] {
                "" => None,
                s => Some(Flag::parse(s).ok_or_else(|| bad("flags"))?),
            },
            evidence_doc_ids: rec[6].split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(out)
}

/// Fixed clock for demo verdicts so the log is byte-stable.
pub fn demo_epoch() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2025-03-03T09:00:00Z")
        .expect("valid timestamp")
        .with_timezone(&Utc)
}

/// The verdict a reviewer would give every planted case, in patient order.
pub fn demo_verdicts(rows: &[TruthRow]) -> Vec<VerdictRecord> {
    rows.iter()
        .filter_map(|r| {
            let task = r.task.eval_task()?;
            let (verdict, note) = match r.flag? {
                Flag::GtError => (Verdict::GroundTruthError, "chart supports the model answer"),
                Flag::ModelError => (Verdict::ModelError, "chart supports the baseline label"),
                Flag::Indeterminate => (Verdict::Indeterminate, "chart is ambiguous"),
            };
            Some((r.patient_id.clone(), task, verdict, note))
        })
        .enumerate()
        .map(|(i, (patient_id, task, verdict, note))| VerdictRecord {
            seq: i as u64 + 1,
            verdict: AdjudicationVerdict {
                patient_id,
                task,
                verdict,
                note: note.into(),
                reviewer: "demo-reviewer".into(),
                decided_at: demo_epoch() + Duration::minutes(i as i64),
            },
            supersede: false,
        })
        .collect()
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), SynthError> {
    let mut body = String::new();
    for item in items {
        body.push_str(&serde_json::to_string(item).expect("plain data"));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| io(path)(e.to_string()))
}

/// Lay a cohort out under `out_dir`: the patient store, truth manifest,
/// baseline labels, the cohort spec and a demo verdict log.
pub fn write_cohort(cohort: &Cohort, out_dir: &Path) -> Result<(), SynthError> {
    let store = out_dir.join(STORE_DIR);
    if store.exists() {
        fs::remove_dir_all(&store).map_err(|e| io(&store)(e.to_string()))?;
    }
    fs::create_dir_all(&store).map_err(|e| io(&store)(e.to_string()))?;
    for rec in &cohort.records {
        write_patient_file(&store, rec).map_err(|e| io(&store)(e.to_string()))?;
    }
    write_truth_manifest(&out_dir.join(TRUTH_FILE), &cohort.truth)?;

    let baseline: Vec<BaselineRow> = cohort
        .truth
        .iter()
        .filter_map(|t| {
            Some(BaselineRow {
                patient_id: t.patient_id.clone(),
                task: t.task.eval_task()?,
                baseline_label: t.baseline_label?,
            })
        })
        .collect();
    if !baseline.is_empty() {
        let path = out_dir.join(BASELINE_FILE);
        write_baseline(&path, &baseline).map_err(|e| io(&path)(e.to_string()))?;
        write_jsonl(&out_dir.join(DEMO_VERDICTS_FILE), &demo_verdicts(&cohort.truth))?;
    }
    let path = out_dir.join(SPEC_FILE);
    let mut text = serde_json::to_string_pretty(&cohort.spec).expect("plain data");
    text.push('\n');
    fs::write(&path, text).map_err(|e| io(&path)(e.to_string()))
}
