use crate::sections::{concluding_remarks, split_sections, Section};
use chrono::{DateTime, Utc};
use labelflow_core::eval::{
    active_verdicts, build_cases, build_report, list_discrepancies, read_baseline,
    AdjudicationError, AdjudicationVerdict, BaselineRow, Block, CaseSet, EvalTask, Table3Report, Verdict,
    VerdictRecord,
};
use labelflow_core::streamer::{read_results, transcript_path, StoredResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no run {0:?} is loaded")]
    NoRunLoaded(String),
    #[error(transparent)]
    Adjudication(#[from] AdjudicationError),
    #[error("no transcript for {0}")]
    NoTranscript(String),
    #[error("verdict log {path}: {reason}")]
    Log { path: PathBuf, reason: String },
    #[error("{0}")]
    Load(String),
}

/// One cohort run feeding the service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSource {
    pub task: EvalTask,
    /// Directory holding `results.csv`, `outputs/` and `transcripts/`.
    pub run_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub run_id: String,
    pub sources: Vec<RunSource>,
    pub baselines: Vec<PathBuf>,
    pub verdict_log: PathBuf,
    #[serde(default)]
    pub token: Option<String>,
}

/// Body of `POST /runs/{id}/verdicts`; the service assigns `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictInput {
    pub patient_id: String,
    pub task: EvalTask,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub reviewer: String,
    #[serde(default)]
    pub decided_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub supersede: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscrepancyItem {
    pub patient_id: String,
    pub task: EvalTask,
    pub prediction: bool,
    pub baseline_label: bool,
    pub transcript_url: String,
    pub concluding_remarks: Option<String>,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsSide {
    pub tasks: BTreeMap<EvalTask, Block>,
    pub pooled: Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsView {
    pub run_id: String,
    pub before: MetricsSide,
    pub after: MetricsSide,
    pub discrepancies: usize,
    pub unresolved: usize,
    pub verdicts: BTreeMap<String, usize>,
    pub report: Table3Report,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub seq: u64,
    pub remaining: usize,
}

struct Source {
    task: EvalTask,
    run_dir: PathBuf,
    results: Vec<StoredResult>,
    set: CaseSet,
}

/// Loaded run plus the verdict log; queue and metrics are recomputed after every write.
pub struct ServiceState {
    run_id: String,
    sources: Vec<Source>,
    log_path: PathBuf,
    records: Vec<VerdictRecord>,
    queue: Vec<DiscrepancyItem>,
    metrics: MetricsView,
}

fn load_err(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Load(e.to_string())
}

/// Read a verdict log; sequence numbers must run 1, 2, 3, ...
pub fn read_log(path: &Path) -> Result<Vec<VerdictRecord>, ServiceError> {
    let bad = |reason: String| ServiceError::Log {
        path: path.to_path_buf(),
        reason,
    };
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: VerdictRecord = serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        if rec.seq != out.len() as u64 + 1 {
            return Err(bad(format!("line {}: seq {} breaks the sequence", i + 1, rec.seq)));
        }
        out.push(rec);
    }
    Ok(out)
}

impl ServiceState {
    pub fn load(config: &ServiceConfig) -> Result<ServiceState, ServiceError> {
        let mut baseline: Vec<BaselineRow> = Vec::new();
        for p in &config.baselines {
            baseline.extend(read_baseline(p).map_err(load_err)?);
        }
        let mut sources = Vec::new();
        for s in &config.sources {
            let results = read_results(&s.run_dir.join(labelflow_core::streamer::RESULTS_FILE)).map_err(load_err)?;
            let set = build_cases(s.task, &results, &baseline);
            sources.push(Source {
                task: s.task,
                run_dir: s.run_dir.clone(),
                results,
                set,
            });
        }
        let records = read_log(&config.verdict_log)?;
        let mut state = ServiceState {
            run_id: config.run_id.clone(),
            sources,
            log_path: config.verdict_log.clone(),
            records: Vec::new(),
            queue: Vec::new(),
            metrics: empty_metrics(&config.run_id),
        };
        state.replace_records(records)?;
        Ok(state)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn check_run(&self, run_id: &str) -> Result<(), ServiceError> {
        if run_id == self.run_id {
            Ok(())
        } else {
            Err(ServiceError::NoRunLoaded(run_id.to_string()))
        }
    }

    pub fn records(&self) -> &[VerdictRecord] {
        &self.records
    }

    pub fn discrepancies(&self) -> &[DiscrepancyItem] {
        &self.queue
    }

    pub fn metrics(&self) -> &MetricsView {
        &self.metrics
    }

    fn sets(&self) -> Vec<(EvalTask, CaseSet)> {
        self.sources.iter().map(|s| (s.task, s.set.clone())).collect()
    }

    /// Validate and install a full record list, recomputing derived views.
    fn replace_records(&mut self, records: Vec<VerdictRecord>) -> Result<(), ServiceError> {
        let active = active_verdicts(&records)?;
        let report = build_report(&self.sets(), &active)?;
        self.queue = self.build_queue(&active);
        self.metrics = metrics_view(&self.run_id, report);
        self.records = records;
        Ok(())
    }

    fn build_queue(&self, active: &[AdjudicationVerdict]) -> Vec<DiscrepancyItem> {
        let mut out = Vec::new();
        for s in &self.sources {
            for c in list_discrepancies(&s.set.cases) {
                if active.iter().any(|v| v.task == c.task && v.patient_id == c.patient_id) {
                    continue;
                }
                let raw = s
                    .results
                    .iter()
                    .find(|r| r.patient_id == c.patient_id && !r.raw_output_path.is_empty())
                    .and_then(|r| fs::read_to_string(s.run_dir.join(&r.raw_output_path)).ok())
                    .unwrap_or_default();
                out.push(DiscrepancyItem {
                    transcript_url: format!("/runs/{}/cases/{}/transcript", self.run_id, c.patient_id),
                    concluding_remarks: concluding_remarks(&raw),
                    sections: split_sections(&raw),
                    patient_id: c.patient_id,
                    task: c.task,
                    prediction: c.prediction,
                    baseline_label: c.baseline_truth,
                });
            }
        }
        out
    }

    /// Check a verdict against the current state without writing it.
    fn validate(&self, input: &VerdictInput) -> Result<(), ServiceError> {
        let unknown = || AdjudicationError::UnknownCase {
            patient_id: input.patient_id.clone(),
            task: input.task,
        };
        let source = self.sources.iter().find(|s| s.task == input.task).ok_or_else(unknown)?;
        let case = source
            .set
            .cases
            .iter()
            .find(|c| c.patient_id == input.patient_id)
            .ok_or_else(unknown)?;
        if !case.is_discordant() {
            return Err(AdjudicationError::VerdictForConcordantCase {
                patient_id: input.patient_id.clone(),
                task: input.task,
            }
            .into());
        }
        let active = self
            .records
            .iter()
            .any(|r| r.verdict.task == input.task && r.verdict.patient_id == input.patient_id);
        if active && !input.supersede {
            return Err(AdjudicationError::DuplicateVerdict {
                patient_id: input.patient_id.clone(),
                task: input.task,
            }
            .into());
        }
        Ok(())
    }

    /// Append one verdict to the log and refresh the views.
    pub fn post_verdict(&mut self, input: VerdictInput, now: DateTime<Utc>) -> Result<Ack, ServiceError> {
        self.validate(&input)?;
        let record = VerdictRecord {
            seq: self.records.len() as u64 + 1,
            verdict: AdjudicationVerdict {
                patient_id: input.patient_id,
                task: input.task,
                verdict: input.verdict,
                note: input.note,
                reviewer: input.reviewer,
                decided_at: input.decided_at.unwrap_or(now),
            },
            supersede: input.supersede,
        };
        let mut records = self.records.clone();
        records.push(record.clone());
        let log_err = |e: std::io::Error| ServiceError::Log {
            path: self.log_path.clone(),
            reason: e.to_string(),
        };
        let mut line = serde_json::to_string(&record).expect("plain data");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.log_path)
            .map_err(log_err)?;
        f.write_all(line.as_bytes()).map_err(log_err)?;
        f.sync_data().map_err(log_err)?;
        self.replace_records(records)?;
        Ok(Ack {
            seq: record.seq,
            remaining: self.queue.len(),
        })
    }

    /// Transcript messages for a patient, one JSON value per stored line.
    pub fn transcript(&self, patient_id: &str) -> Result<Vec<serde_json::Value>, ServiceError> {
        let missing = || ServiceError::NoTranscript(patient_id.to_string());
        let source = self
            .sources
            .iter()
            .find(|s| s.results.iter().any(|r| r.patient_id == patient_id))
            .ok_or_else(missing)?;
        let text = fs::read_to_string(source.run_dir.join(transcript_path(patient_id))).map_err(|_| missing())?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|_| missing()))
            .collect()
    }
}

fn side(rows: &[(EvalTask, Block)], pooled: Block) -> MetricsSide {
    MetricsSide {
        tasks: rows.iter().cloned().collect(),
        pooled,
    }
}

fn metrics_view(run_id: &str, report: Table3Report) -> MetricsView {
    let before: Vec<(EvalTask, Block)> = report
        .rows
        .iter()
        .filter_map(|r| Some((r.task?, r.before)))
        .collect();
    let after: Vec<(EvalTask, Block)> = report.rows.iter().filter_map(|r| Some((r.task?, r.after))).collect();
    MetricsView {
        run_id: run_id.to_string(),
        before: side(&before, report.total.before),
        after: side(&after, report.total.after),
        discrepancies: report.total.discrepancies,
        unresolved: report.total.unresolved,
        verdicts: report.total.verdicts.clone(),
        report,
    }
}

fn empty_metrics(run_id: &str) -> MetricsView {
    metrics_view(run_id, build_report(&[], &[]).expect("empty report"))
}
