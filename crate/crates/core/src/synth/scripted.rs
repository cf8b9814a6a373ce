//! A deterministic stand-in for the model, driven by the truth manifest.

use super::generate::TruthRow;
use super::spec::CohortTask;
use crate::agent::{BackendError, BackendReply, Conversation, ModelBackend, Role};
use crate::streamer::UNCOUNTED_FUNCTIONS;
use crate::tools::{FunctionSpec, ToolCall};
use async_trait::async_trait;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

/// Optional misbehavior for tests and demos.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Behavior {
    /// Sleep before every reply.
    pub latency_ms: u64,
    /// Patients whose final answer has no structured block.
    pub prose_only: BTreeSet<String>,
    /// Retriable failures to return before the first real reply.
    pub backend_failures: BTreeMap<String, u32>,
    /// Tier-1 patients whose course ids lose their leading digits.
    pub truncate_course_ids: BTreeSet<String>,
}

impl Behavior {
    pub fn load(path: &Path) -> Result<Behavior, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

pub struct ScriptedBackend {
    truth: HashMap<String, TruthRow>,
    behavior: Behavior,
    failures_left: Mutex<BTreeMap<String, u32>>,
}

impl ScriptedBackend {
    pub fn new(rows: impl IntoIterator<Item = TruthRow>, behavior: Behavior) -> ScriptedBackend {
        ScriptedBackend {
            truth: rows.into_iter().map(|r| (r.patient_id.clone(), r)).collect(),
            failures_left: Mutex::new(behavior.backend_failures.clone()),
            behavior,
        }
    }

    fn identify(&self, conversation: &Conversation) -> Result<&TruthRow, BackendError> {
        let prompt = conversation
            .messages()
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        prompt
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
            .find_map(|tok| self.truth.get(tok))
            .ok_or_else(|| BackendError::fatal("unknown patient in script: no known patient id in the prompt"))
    }

    fn reply(&self, row: &TruthRow, conversation: &Conversation) -> BackendReply {
        let step = conversation
            .messages()
            .iter()
            .filter(|m| m.role == Role::Assistant && m.tool_calls.is_some())
            .count();
        let pid = row.patient_id.as_str();
        let seen = Seen::from(conversation);
        let calls: Vec<(&str, Map<String, Value>)> = match (row.task, step) {
            (CohortTask::Tier1Qa, 0) => vec![("get_patient_details", args(pid, None, None))],
            (CohortTask::Tier1Qa, 1) => vec![("get_patient_treatment_details", args(pid, None, None))],
            (CohortTask::Orn, 0) => vec![
                ("get_patient_details", args(pid, None, None)),
                ("get_patient_diagnosis_details", args(pid, None, None)),
                ("get_patient_treatment_details", args(pid, None, None)),
            ],
            (CohortTask::Orn, 1) => {
                let mut calls = vec![
                    ("get_patient_radiology_reports", args(pid, None, None)),
                    ("get_patient_pathology_reports", args(pid, None, None)),
                ];
                for t in ["radiology", "pathology", "surgery", "radiation_oncology", "ent"] {
                    calls.push(("get_patient_clinical_notes", args(pid, Some(t), None)));
                }
                calls
            }
            (CohortTask::ProstateRecurrence | CohortTask::HnRecurrence, 0) => vec![
                ("get_patient_treatment_details", args(pid, None, None)),
                ("get_patient_diagnosis_details", args(pid, None, None)),
            ],
            (CohortTask::ProstateRecurrence | CohortTask::HnRecurrence, 1) => {
                let since = seen.first_course_end();
                let since = since.map(|d| d.to_string());
                let since = since.as_deref();
                let mut types = vec!["radiation_oncology", "pathology", "radiology"];
                if seen.has_code(|c| c == "C61") {
                    types.push("urology");
                }
                if seen.has_code(is_head_and_neck) {
                    types.push("ent");
                }
                let mut calls: Vec<_> = types
                    .into_iter()
                    .map(|t| ("get_patient_clinical_notes", args(pid, Some(t), since)))
                    .collect();
                calls.push(("get_patient_radiology_reports", args(pid, None, since)));
                calls
            }
            _ => return BackendReply::Final(self.final_text(row, &seen)),
        };
        BackendReply::ToolCalls(
            calls
                .into_iter()
                .enumerate()
                .map(|(i, (name, args))| ToolCall {
                    call_id: format!("call_{step}_{i}"),
                    name: name.to_string(),
                    args,
                })
                .collect(),
        )
    }

    fn final_text(&self, row: &TruthRow, seen: &Seen) -> String {
        let pid = &row.patient_id;
        let structured = !self.behavior.prose_only.contains(pid);
        match row.task {
            CohortTask::Tier1Qa => {
                let mut answer = seen.tier1_answer();
                if self.behavior.truncate_course_ids.contains(pid) {
                    if let Some(Value::Array(courses)) = answer.get_mut("delivered_courses") {
                        for c in courses {
                            if let Some(Value::String(id)) = c.get_mut("course_id") {
                                *id = super::tier1_bug::truncate_leading_digits(id).to_string();
                            }
                        }
                    }
                }
                let body = serde_json::to_string_pretty(&answer).expect("plain data");
                if structured {
                    format!("Here are the requested details.\n\n```json\n{body}\n```\n")
                } else {
                    format!("The patient is {} {}.", seen.detail("first_name"), seen.detail("last_name"))
                }
            }
            CohortTask::Orn => {
                let stage = row.model_stage().unwrap_or(0);
                let total = seen.records_total();
                let verdict = if stage == 0 {
                    "no evidence of osteoradionecrosis".to_string()
                } else {
                    format!("osteoradionecrosis, Marx stage {stage}")
                };
                let mut out = format!(
                    "## Patient History\nReviewed the diagnosis, treatment and follow-up records of patient {pid}.\n\n\
                     ## Data Quantity\nTotal records reviewed: {total}.\n\n\
                     ## Concluding Remarks\nThe records indicate {verdict}.\n"
                );
                if structured {
                    out.push_str(&format!(
                        "\n```\n{{'stage': '{stage}', 'total number of records': '{total}'}}\n```\n"
                    ));
                }
                out
            }
            CohortTask::ProstateRecurrence | CohortTask::HnRecurrence => {
                let yes = row.model_label().unwrap_or(false);
                let word = if yes { "yes" } else { "no" };
                let finding = if yes {
                    "The follow-up record documents recurrence after radiotherapy."
                } else {
                    "The follow-up record shows no recurrence after radiotherapy."
                };
                let mut out = format!(
                    "#### Treatment Summary\nReviewed the treatment and diagnosis details of patient {pid}.\n\n\
                     #### Concluding Remarks\n{finding}\n"
                );
                if structured {
                    out.push_str(&format!("\n```json\n{{\n    \"recurrence\": \"{word}\"\n}}\n```\n"));
                }
                out
            }
        }
    }
}

fn args(pid: &str, note_type: Option<&str>, date_minimum: Option<&str>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("patient_id".into(), json!(pid));
    if let Some(t) = note_type {
        m.insert("note_type".into(), json!(t));
    }
    if let Some(d) = date_minimum {
        m.insert("date_minimum".into(), json!(d));
    }
    m
}

fn is_head_and_neck(code: &str) -> bool {
    let Some(rest) = code.strip_prefix('C') else {
        return false;
    };
    let head: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    match head.parse::<u32>() {
        Ok(n) => n <= 14 || (30..=32).contains(&n) || code == "C76.0" || code == "C77.0",
        Err(_) => false,
    }
}

/// Tool results seen so far, keyed by function name.
struct Seen {
    results: Vec<(String, String, usize)>,
}

impl Seen {
    fn from(conversation: &Conversation) -> Seen {
        let mut names: HashMap<&str, &str> = HashMap::new();
        let mut results = Vec::new();
        for m in conversation.messages() {
            if let Some(calls) = &m.tool_calls {
                for c in calls {
                    names.insert(&c.call_id, &c.name);
                }
            }
            if let Some(r) = &m.tool_result {
                let name = names.get(r.call_id.as_str()).copied().unwrap_or("");
                results.push((name.to_string(), r.body.clone(), r.records_count));
            }
        }
        Seen { results }
    }

    fn body(&self, function: &str) -> &str {
        self.results
            .iter()
            .find(|r| r.0 == function)
            .map(|r| r.1.as_str())
            .unwrap_or("")
    }

    fn records_total(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.0.starts_with("get_patient_") && !UNCOUNTED_FUNCTIONS.contains(&r.0.as_str()))
            .map(|r| r.2)
            .sum()
    }

    fn detail(&self, field: &str) -> String {
        let prefix = format!("{field}: ");
        self.body("get_patient_details")
            .lines()
            .find_map(|l| l.strip_prefix(&prefix))
            .unwrap_or("")
            .to_string()
    }

    fn has_code(&self, pred: impl Fn(&str) -> bool) -> bool {
        self.body("get_patient_diagnosis_details")
            .lines()
            .filter_map(|l| l.strip_prefix("icd_code: "))
            .any(|c| pred(c.trim()))
    }

    fn courses(&self) -> Vec<ParsedCourse> {
        let body = self.body("get_patient_treatment_details");
        let mut out: Vec<ParsedCourse> = Vec::new();
        for line in body.lines() {
            if let Some(id) = line.strip_prefix("course_id: ") {
                out.push(ParsedCourse {
                    course_id: id.to_string(),
                    ..Default::default()
                });
                continue;
            }
            let Some(c) = out.last_mut() else { continue };
            if let Some(codes) = line.strip_prefix("icd_codes: ") {
                c.icd_codes = codes.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            } else if let Some(d) = line.strip_prefix("last_treatment_date: ") {
                c.last = d.trim().parse().ok();
            } else if let Some(plan) = line.trim_start().strip_prefix("- plan_id: ") {
                let mut parts = plan.split("; ");
                let id = parts.next().unwrap_or("").to_string();
                for p in parts {
                    if let Some(t) = p.strip_prefix("radiation_type: ") {
                        c.types.push(t.to_string());
                    } else if let Some(d) = p.strip_prefix("delivered_date: ") {
                        if let Ok(d) = d.trim().parse::<NaiveDate>() {
                            c.first = Some(c.first.map_or(d, |f: NaiveDate| f.min(d)));
                        }
                    }
                }
                c.plans.push(id);
            }
        }
        out
    }

    fn first_course_end(&self) -> Option<NaiveDate> {
        self.courses()
            .into_iter()
            .filter(|c| c.first.is_some())
            .min_by(|a, b| a.first.cmp(&b.first).then_with(|| a.course_id.cmp(&b.course_id)))
            .and_then(|c| c.last)
    }

    fn tier1_answer(&self) -> Value {
        let mut courses = self.courses();
        courses.reverse();
        let courses: Vec<Value> = courses
            .into_iter()
            .map(|c| {
                let mut plans = c.plans;
                plans.reverse();
                json!({
                    "course_id": c.course_id,
                    "icd_codes": c.icd_codes,
                    "delivered_plan_ids": plans,
                    "radiation_type": c.types.first().cloned().unwrap_or_default(),
                })
            })
            .collect();
        json!({
            "patient_id": self.detail("patient_id"),
            "first_name": self.detail("first_name"),
            "last_name": self.detail("last_name"),
            "sex": self.detail("sex"),
            "race": self.detail("race"),
            "ethnicity": self.detail("ethnicity"),
            "delivered_courses": courses,
        })
    }
}

#[derive(Default)]
struct ParsedCourse {
    course_id: String,
    icd_codes: Vec<String>,
    plans: Vec<String>,
    types: Vec<String>,
    first: Option<NaiveDate>,
    last: Option<NaiveDate>,
}

#[async_trait]
impl ModelBackend for ScriptedBackend {
    async fn complete(&self, conversation: &Conversation, _functions: &[FunctionSpec]) -> Result<BackendReply, BackendError> {
        if self.behavior.latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(self.behavior.latency_ms)).await;
        }
        let row = self.identify(conversation)?;
        {
            let mut left = self.failures_left.lock().expect("lock");
            if let Some(n) = left.get_mut(&row.patient_id).filter(|n| **n > 0) {
                *n -= 1;
                return Err(BackendError::retriable(format!("scripted failure for {}", row.patient_id)));
            }
        }
        Ok(self.reply(row, conversation))
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
