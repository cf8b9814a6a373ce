use super::extract::extract_structured;
use super::prompt::{render_prompt, PromptError, TaskSpec};
use super::schema::{validate_output, Label};
use crate::agent::{run_agent, AgentConfig, AgentTranscript, ModelBackend};
use crate::ehr::Store;
use crate::tools::Registry;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;
use tokio::sync::Semaphore;

/// Lookups left out of a run's `records_count`.
pub const UNCOUNTED_FUNCTIONS: [&str; 3] = [
    "get_patient_details",
    "get_patient_diagnosis_details",
    "get_patient_treatment_details",
];

#[derive(Clone)]
pub struct CohortDeps {
    pub store: Arc<Store>,
    pub registry: Arc<Registry>,
    pub backend: Arc<dyn ModelBackend>,
    pub agent: AgentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    ParseError,
    AgentError,
}

impl TaskStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Ok => "ok",
            TaskStatus::ParseError => "parse_error",
            TaskStatus::AgentError => "agent_error",
        }
    }

    pub fn parse(s: &str) -> Option<TaskStatus> {
        [TaskStatus::Ok, TaskStatus::ParseError, TaskStatus::AgentError]
            .into_iter()
            .find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub patient_id: String,
    pub status: TaskStatus,
    pub label: Option<Label>,
    pub raw_final_text: Option<String>,
    pub error: Option<String>,
    pub records_count: Option<usize>,
    pub latency_ms: u64,
    pub turns: usize,
    pub transcript: Option<AgentTranscript>,
}

#[derive(Debug, Clone)]
pub struct CohortRun {
    pub task_spec: TaskSpec,
    pub results: Vec<TaskResult>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub peak_in_flight: usize,
}

impl CohortRun {
    pub fn count(&self, status: TaskStatus) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }
}

/// Sum of records returned by document retrievals.
pub fn records_retrieved(transcript: &AgentTranscript) -> usize {
    transcript
        .tool_call_log
        .iter()
        .filter(|c| c.name.starts_with("get_patient_") && !UNCOUNTED_FUNCTIONS.contains(&c.name.as_str()))
        .map(|c| c.records_count)
        .sum()
}

/// Run every patient through the agent with at most `spec.concurrency` in
/// flight. Results come back in input order.
pub async fn run_cohort(patient_ids: &[String], spec: &TaskSpec, deps: &CohortDeps) -> Result<CohortRun, PromptError> {
    spec.validate()?;
    let started_at = Utc::now();
    let permits = Arc::new(Semaphore::new(spec.concurrency));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));

    let mut handles = Vec::with_capacity(patient_ids.len());
    for pid in patient_ids {
        let pid = pid.clone();
        let spec = spec.clone();
        let deps = deps.clone();
        let permits = permits.clone();
        let in_flight = in_flight.clone();
        let peak = peak.clone();
        handles.push(tokio::spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore never closed");
            let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            let result = run_one(&pid, &spec, &deps).await;
            in_flight.fetch_sub(1, Ordering::SeqCst);
            result
        }));
    }

    let mut results = Vec::with_capacity(handles.len());
    for (handle, pid) in handles.into_iter().zip(patient_ids) {
        results.push(handle.await.unwrap_or_else(|e| TaskResult {
            patient_id: pid.clone(),
            status: TaskStatus::AgentError,
            label: None,
            raw_final_text: None,
            error: Some(format!("worker panicked: {e}")),
            records_count: None,
            latency_ms: 0,
            turns: 0,
            transcript: None,
        }));
    }
    Ok(CohortRun {
        task_spec: spec.clone(),
        results,
        started_at,
        finished_at: Utc::now(),
        peak_in_flight: peak.load(Ordering::SeqCst),
    })
}

async fn run_one(pid: &str, spec: &TaskSpec, deps: &CohortDeps) -> TaskResult {
    let prompt = render_prompt(&spec.template, pid).expect("template validated");
    let start = Instant::now();
    let outcome = run_agent(pid, &prompt, &deps.registry, &deps.store, deps.backend.as_ref(), &deps.agent).await;
    let latency_ms = start.elapsed().as_millis() as u64;
    match outcome {
        Err(e) => TaskResult {
            patient_id: pid.to_string(),
            status: TaskStatus::AgentError,
            label: None,
            raw_final_text: None,
            error: Some(format!("{}: {e}", e.kind())),
            records_count: None,
            latency_ms,
            turns: 0,
            transcript: None,
        },
        Ok(t) => {
            let parsed = extract_structured(&t.final_text)
                .map_err(|e| e.to_string())
                .and_then(|obj| validate_output(&obj, spec.output_schema()).map_err(|e| e.to_string()));
            let (status, label, error) = match parsed {
                Ok(label) => (TaskStatus::Ok, Some(label), None),
                Err(e) => (TaskStatus::ParseError, None, Some(e)),
            };
            TaskResult {
                patient_id: pid.to_string(),
                status,
                label,
                raw_final_text: Some(t.final_text.clone()),
                error,
                records_count: Some(records_retrieved(&t)),
                latency_ms,
                turns: t.turns,
                transcript: Some(t),
            }
        }
    }
}
