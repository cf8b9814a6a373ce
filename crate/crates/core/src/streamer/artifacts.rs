//! On-disk layout of a cohort run:
//!
//! ```text
//! results.csv            one row per patient, input order
//! timings.csv            patient_id, latency_ms
//! run_stats.json         wall-clock start/finish and peak in-flight count
//! manifest.json          task, template digest, agent config, seed
//! outputs/<pid>.txt      final model text
//! transcripts/<pid>.jsonl one message per line
//! ```
//!
//! Everything except `timings.csv` and `run_stats.json` is a pure function of
//! the inputs when the backend is deterministic.

use super::prompt::TaskName;
use super::run::{CohortDeps, CohortRun, TaskStatus};
use super::schema::{CourseAnswer, Label, Tier1Answer};
use csv::StringRecord;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_STATS_FILE: &str = "run_stats.json";
pub const TRANSCRIPTS_DIR: &str = "transcripts";
pub const OUTPUTS_DIR: &str = "outputs";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Task-specific label columns.
pub fn label_columns(task: TaskName) -> &'static [&'static str] {
    match task {
        TaskName::Tier1Qa => &[
            "reported_patient_id",
            "first_name",
            "last_name",
            "sex",
            "race",
            "ethnicity",
            "delivered_courses",
        ],
        TaskName::Orn => &["stage", "total_records", "positive"],
        TaskName::Recurrence => &["recurrence", "positive"],
    }
}

pub fn results_header(task: TaskName) -> Vec<&'static str> {
    let mut h = vec!["patient_id", "task", "status"];
    h.extend_from_slice(label_columns(task));
    h.extend_from_slice(&["records_count", "turns", "raw_output_path", "error"]);
    h
}

fn label_values(task: TaskName, label: Option<&Label>) -> Vec<String> {
    match (task, label) {
        (TaskName::Tier1Qa, Some(Label::Tier1(t))) => vec![
            t.patient_id.clone(),
            t.first_name.clone(),
            t.last_name.clone(),
            t.sex.clone(),
            t.race.clone(),
            t.ethnicity.clone(),
            serde_json::to_string(&t.delivered_courses).expect("plain data"),
        ],
        (TaskName::Orn, Some(Label::Orn { stage, total_records })) => {
            vec![stage.to_string(), total_records.to_string(), (*stage >= 1).to_string()]
        }
        (TaskName::Recurrence, Some(Label::Recurrence { recurrence })) => {
            vec![if *recurrence { "yes" } else { "no" }.to_string(), recurrence.to_string()]
        }
        _ => vec![String::new(); label_columns(task).len()],
    }
}

/// File-system-safe stem for a patient id.
pub fn file_stem(patient_id: &str) -> String {
    patient_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn raw_output_path(patient_id: &str) -> String {
    format!("{OUTPUTS_DIR}/{}.txt", file_stem(patient_id))
}

pub fn transcript_path(patient_id: &str) -> String {
    format!("{TRANSCRIPTS_DIR}/{}.jsonl", file_stem(patient_id))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct RunInfo {
    pub backend: String,
    pub seed: Option<u64>,
}

/// Write all run artifacts under `out_dir`, replacing earlier ones.
pub fn write_run(run: &CohortRun, deps: &CohortDeps, info: &RunInfo, out_dir: &Path) -> Result<(), ArtifactError> {
    let task = run.task_spec.task_name;
    for sub in [TRANSCRIPTS_DIR, OUTPUTS_DIR] {
        let dir = out_dir.join(sub);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }

    let path = out_dir.join(RESULTS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(results_header(task)).map_err(csv_err(&path))?;
    for r in &run.results {
        let raw_path = match &r.raw_final_text {
            Some(text) => {
                let rel = raw_output_path(&r.patient_id);
                let p = out_dir.join(&rel);
                fs::write(&p, text).map_err(io_err(&p))?;
                rel
            }
            None => String::new(),
        };
        if let Some(t) = &r.transcript {
            let p = out_dir.join(transcript_path(&r.patient_id));
            let mut body = String::new();
            for m in &t.messages {
                body.push_str(&serde_json::to_string(m).expect("plain data"));
                body.push('\n');
            }
            fs::write(&p, body).map_err(io_err(&p))?;
        }
        let mut row = vec![r.patient_id.clone(), task.to_string(), r.status.as_str().to_string()];
        row.extend(label_values(task, r.label.as_ref()));
        row.push(r.records_count.map(|n| n.to_string()).unwrap_or_default());
        row.push(r.turns.to_string());
        row.push(raw_path);
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = out_dir.join(TIMINGS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["patient_id", "latency_ms"]).map_err(csv_err(&path))?;
    for r in &run.results {
        w.write_record([r.patient_id.as_str(), &r.latency_ms.to_string()])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let stats = json!({
        "started_at": run.started_at.to_rfc3339(),
        "finished_at": run.finished_at.to_rfc3339(),
        "wall_ms": (run.finished_at - run.started_at).num_milliseconds(),
        "peak_in_flight": run.peak_in_flight,
        "concurrency": run.task_spec.concurrency,
    });
    write_json(&out_dir.join(RUN_STATS_FILE), &stats)?;

    let manifest = json!({
        "task": task,
        "patients": run.results.len(),
        "concurrency": run.task_spec.concurrency,
        "template_sha256": run.task_spec.template_digest(),
        "backend": info.backend,
        "seed": info.seed,
        "max_turns": deps.agent.max_turns,
        "pruner": deps.agent.pruner,
        "retry_attempts": deps.agent.retry.attempts,
        "status_counts": {
            "ok": run.count(TaskStatus::Ok),
            "parse_error": run.count(TaskStatus::ParseError),
            "agent_error": run.count(TaskStatus::AgentError),
        },
    });
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// One row of `results.csv` read back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredResult {
    pub patient_id: String,
    pub task: TaskName,
    pub status: TaskStatus,
    pub label: Option<Label>,
    pub records_count: Option<usize>,
    pub turns: usize,
    pub raw_output_path: String,
    pub error: String,
}

pub fn read_results(path: &Path) -> Result<Vec<StoredResult>, ArtifactError> {
    let malformed = |reason: String| ArtifactError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| malformed(format!("missing column {name}")));
    let (pid_i, task_i, status_i) = (need("patient_id")?, need("task")?, need("status")?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = line + 2;
        let get = |name: &str| field(&headers, &rec, name);
        let task = TaskName::parse(&rec[task_i]).ok_or_else(|| malformed(format!("row {row}: unknown task")))?;
        let status = TaskStatus::parse(&rec[status_i]).ok_or_else(|| malformed(format!("row {row}: unknown status")))?;
        let label = if status == TaskStatus::Ok {
            Some(parse_label(task, &headers, &rec).map_err(|e| malformed(format!("row {row}: {e}")))?)
        } else {
            None
        };
        out.push(StoredResult {
            patient_id: rec[pid_i].to_string(),
            task,
            status,
            label,
            records_count: get("records_count").parse().ok(),
            turns: get("turns").parse().unwrap_or(0),
            raw_output_path: get("raw_output_path").to_string(),
            error: get("error").to_string(),
        });
    }
    Ok(out)
}

/// Rewrite a `results.csv` from stored rows; all rows must share one task.
pub fn write_results(path: &Path, rows: &[StoredResult]) -> Result<(), ArtifactError> {
    let Some(task) = rows.first().map(|r| r.task) else {
        return Err(ArtifactError::Malformed {
            path: path.to_path_buf(),
            reason: "no rows".into(),
        });
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(results_header(task)).map_err(csv_err(path))?;
    for r in rows {
        let mut row = vec![r.patient_id.clone(), r.task.to_string(), r.status.as_str().to_string()];
        row.extend(label_values(r.task, r.label.as_ref()));
        row.push(r.records_count.map(|n| n.to_string()).unwrap_or_default());
        row.push(r.turns.to_string());
        row.push(r.raw_output_path.clone());
        row.push(r.error.clone());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn field<'a>(headers: &StringRecord, rec: &'a StringRecord, name: &str) -> &'a str {
    headers.iter().position(|h| h == name).and_then(|i| rec.get(i)).unwrap_or("")
}

fn parse_label(task: TaskName, headers: &StringRecord, rec: &StringRecord) -> Result<Label, String> {
    let get = |name: &str| field(headers, rec, name);
    match task {
        TaskName::Tier1Qa => {
            let courses: Vec<CourseAnswer> =
                serde_json::from_str(get("delivered_courses")).map_err(|e| format!("delivered_courses: {e}"))?;
            Ok(Label::Tier1(Tier1Answer {
                patient_id: get("reported_patient_id").to_string(),
                first_name: get("first_name").to_string(),
                last_name: get("last_name").to_string(),
                sex: get("sex").to_string(),
                race: get("race").to_string(),
                ethnicity: get("ethnicity").to_string(),
                delivered_courses: courses,
            }))
        }
        TaskName::Orn => {
            let stage: u8 = get("stage").parse().map_err(|_| "bad stage".to_string())?;
            if stage > 3 {
                return Err("bad stage".into());
            }
            let total_records = get("total_records").parse().map_err(|_| "bad total_records".to_string())?;
            Ok(Label::Orn { stage, total_records })
        }
        TaskName::Recurrence => match get("recurrence") {
            "yes" => Ok(Label::Recurrence { recurrence: true }),
            "no" => Ok(Label::Recurrence { recurrence: false }),
            other => Err(format!("bad recurrence {other:?}")),
        },
    }
}
