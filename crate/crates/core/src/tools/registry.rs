use super::math::{parse_decimal, render_decimal, MathOp};
use crate::ehr::{NoteType, RecordKind, RetrievalFilter, RetrieveError, Store};
use chrono::NaiveDate;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    String,
    Number,
    /// Calendar date, `YYYY-MM-DD`.
    Date,
    Enum { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
}

impl FunctionSpec {
    /// Chat-completions `tools` entry.
    pub fn to_wire(&self) -> Value {
        let mut properties = Map::new();
        for p in &self.params {
            let schema = match &p.kind {
                ParamKind::String => json!({"type": "string", "description": p.description}),
                ParamKind::Number => json!({"type": "number", "description": p.description}),
                ParamKind::Date => json!({"type": "string", "format": "date", "description": p.description}),
                ParamKind::Enum { values } => {
                    json!({"type": "string", "enum": values, "description": p.description})
                }
            };
            properties.insert(p.name.clone(), schema);
        }
        let required: Vec<&str> = self
            .params
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                    "additionalProperties": false
                }
            }
        })
    }

    /// Plain-text signature block for the system prompt.
    pub fn to_prompt_text(&self) -> String {
        let mut out = format!("- {}: {}\n", self.name, self.description);
        for p in &self.params {
            let kind = match &p.kind {
                ParamKind::String => "string".to_string(),
                ParamKind::Number => "number".to_string(),
                ParamKind::Date => "date YYYY-MM-DD".to_string(),
                ParamKind::Enum { values } => format!("one of {}", values.join(" | ")),
            };
            let req = if p.required { "required" } else { "optional" };
            out.push_str(&format!("    {} ({kind}, {req}): {}\n", p.name, p.description));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub call_id: String,
    pub name: String,
    #[serde(default)]
    pub args: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub status: ToolStatus,
    pub body: String,
    pub records_count: usize,
}

impl ToolResult {
    pub fn failure(call_id: &str, err: &ToolError) -> ToolResult {
        ToolResult {
            call_id: call_id.to_string(),
            status: ToolStatus::Error,
            body: format!("error [{}]: {err}", err.kind()),
            records_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolError {
    #[error("function {0:?} is not whitelisted")]
    UnknownFunction(String),
    #[error("invalid argument {name:?}: {reason}")]
    ArgumentValidation { name: String, reason: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown patient {0}")]
    UnknownPatient(String),
}

impl ToolError {
    pub fn kind(&self) -> &'static str {
        match self {
            ToolError::UnknownFunction(_) => "unknown_function",
            ToolError::ArgumentValidation { .. } => "argument_validation",
            ToolError::DivisionByZero => "division_by_zero",
            ToolError::UnknownPatient(_) => "unknown_patient",
        }
    }
}

/// Body returned by every external-category stub.
pub const NOT_CONFIGURED: &str = "external integration not configured";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Handler {
    Retrieve(RecordKind),
    PhysicianAppointments,
    Math(MathOp),
    External,
}


#[derive(Debug, Clone)]
enum Arg {
    Text(String),
    Number(BigRational),
    Date(NaiveDate),
}

type Args = BTreeMap<String, Arg>;

/// The whitelisted function catalog. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    specs: Vec<FunctionSpec>,
    handlers: Vec<Handler>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// The full catalog: patient retrieval, basic math and the external stubs.
    pub fn standard() -> Registry {
        let mut r = Registry::empty();
        let note_types: Vec<String> = NoteType::ALL.iter().map(|n| n.as_str().to_string()).collect();

        r.push(
            "get_patient_details",
            "Patient demographics: patient_id, first and last name, sex, race, ethnicity.",
            vec![patient_id()],
            Handler::Retrieve(RecordKind::Details),
        );
        r.push(
            "get_patient_treatment_details",
            "Radiotherapy treatment courses with course IDs, ICD codes, delivered plans, radiation types and dates, newest first.",
            vec![patient_id()],
            Handler::Retrieve(RecordKind::TreatmentDetails),
        );
        r.push(
            "get_patient_diagnosis_details",
            "Diagnoses with ICD code, description and onset date, newest first.",
            vec![patient_id()],
            Handler::Retrieve(RecordKind::DiagnosisDetails),
        );
        r.push(
            "get_patient_clinical_notes",
            "Signed clinical notes, newest first, optionally restricted by note_type and a minimum date.",
            vec![
                patient_id(),
                ParamSpec {
                    name: "note_type".into(),
                    kind: ParamKind::Enum { values: note_types },
                    required: false,
                    description: "Specialty of the note.".into(),
                },
                date_minimum(),
            ],
            Handler::Retrieve(RecordKind::ClinicalNotes),
        );
        r.push(
            "get_patient_radiology_reports",
            "Radiology reports, newest first.",
            vec![patient_id(), date_minimum()],
            Handler::Retrieve(RecordKind::RadiologyReports),
        );
        r.push(
            "get_patient_pathology_reports",
            "Pathology reports, newest first.",
            vec![patient_id(), date_minimum()],
            Handler::Retrieve(RecordKind::PathologyReports),
        );
        r.push(
            "get_patient_inbasket_messages",
            "Patient in-basket messages, newest first.",
            vec![patient_id(), date_minimum()],
            Handler::Retrieve(RecordKind::InbasketMessages),
        );
        r.push(
            "get_patient_appointments",
            "Scheduled and past appointments for a patient, newest first.",
            vec![patient_id(), date_minimum()],
            Handler::Retrieve(RecordKind::Appointments),
        );
        r.push(
            "get_physician_appointments",
            "Appointments booked with one provider across all patients, newest first.",
            vec![text("provider", true, "Provider name as signed on notes."), date_minimum()],
            Handler::PhysicianAppointments,
        );

        for op in [MathOp::Add, MathOp::Subtract, MathOp::Multiply, MathOp::Divide] {
            let description = match op {
                MathOp::Add => "Return a + b.",
                MathOp::Subtract => "Return a - b.",
                MathOp::Multiply => "Return a * b.",
                MathOp::Divide => "Return a / b.",
            };
            r.push(
                op.name(),
                description,
                vec![number("a"), number("b")],
                Handler::Math(op),
            );
        }

        let stubs: [(&str, &str, Vec<ParamSpec>); 13] = [
            (
                "get_list_of_clinical_trials",
                "Recruiting clinical trials for a condition (clinicaltrials.gov).",
                vec![text("condition", true, "Condition or disease."), text("location", false, "Site filter.")],
            ),
            (
                "get_eligibility_criteria",
                "Eligibility criteria of one trial.",
                vec![text("nct_id", true, "Trial identifier.")],
            ),
            (
                "get_patient_population",
                "Cohort-level population statistics or search URL.",
                vec![text("criteria", true, "Population criteria.")],
            ),
            (
                "get_pstar_data",
                "Proton stopping power, CSDA and projected range for a material.",
                vec![text("material", true, "PSTAR material name."), number_opt("energy_mev")],
            ),
            ("get_pstar_material_list", "Materials known to PSTAR.", vec![]),
            (
                "pubmed_search",
                "Search PubMed.",
                vec![text("query", true, "Search terms."), number_opt("max_results")],
            ),
            ("pubmed_summary", "Summary of one PubMed record.", vec![text("pmid", true, "PubMed id.")]),
            ("pubmed_fetch", "Abstract of one PubMed record.", vec![text("pmid", true, "PubMed id.")]),
            (
                "send_dicoms_to_server",
                "Send a patient's DICOM objects to a destination node.",
                vec![patient_id(), text("destination", true, "DICOM AE title.")],
            ),
            ("get_dicom_streams_info", "Active DICOM transfer streams.", vec![]),
            ("clear_dicom_streams_logs", "Clear DICOM stream logs.", vec![]),
            (
                "get_radiation_therapy_ae_codes",
                "CTCAE adverse-event codes relevant to radiation therapy.",
                vec![],
            ),
            (
                "get_ctcae_details_by_ae_code",
                "CTCAE grading details for one adverse-event code.",
                vec![text("ae_code", true, "CTCAE code.")],
            ),
        ];
        for (name, description, params) in stubs {
            r.push(name, description, params, Handler::External);
        }
        r
    }

    fn push(&mut self, name: &str, description: &str, params: Vec<ParamSpec>, handler: Handler) {
        debug_assert!(!self.contains(name), "duplicate function {name}");
        self.specs.push(FunctionSpec {
            name: name.to_string(),
            description: description.to_string(),
            params,
        });
        self.handlers.push(handler);
    }

    fn entry(&self, name: &str) -> Option<(&FunctionSpec, Handler)> {
        let i = self.specs.iter().position(|s| s.name == name)?;
        Some((&self.specs[i], self.handlers[i]))
    }

    pub fn list_specs(&self) -> &[FunctionSpec] {
        &self.specs
    }

    pub fn contains(&self, name: &str) -> bool {
        self.specs.iter().any(|s| s.name == name)
    }

    /// Validate and run one call. Stubs answer with an error-status result.
    pub fn dispatch(&self, call: &ToolCall, store: &Store) -> Result<ToolResult, ToolError> {
        let (spec, handler) = self
            .entry(&call.name)
            .ok_or_else(|| ToolError::UnknownFunction(call.name.clone()))?;
        let args = validate_args(spec, &call.args)?;
        let ok = |body: String, records_count: usize| ToolResult {
            call_id: call.call_id.clone(),
            status: ToolStatus::Ok,
            body,
            records_count,
        };
        match handler {
            Handler::Retrieve(kind) => {
                let filter = RetrievalFilter {
                    note_type: text_arg(&args, "note_type").and_then(NoteType::parse),
                    date_minimum: date_arg(&args, "date_minimum"),
                };
                let pid = text_arg(&args, "patient_id").unwrap_or_default();
                let res = store.retrieve(pid, kind, filter).map_err(|e| match e {
                    RetrieveError::UnknownPatient(p) => ToolError::UnknownPatient(p),
                    RetrieveError::FilterNotApplicable { filter, .. } => ToolError::ArgumentValidation {
                        name: filter.to_string(),
                        reason: e.to_string(),
                    },
                })?;
                Ok(ok(res.payload, res.records_count))
            }
            Handler::PhysicianAppointments => {
                let provider = text_arg(&args, "provider").unwrap_or_default();
                let res = store.physician_appointments(provider, date_arg(&args, "date_minimum"));
                Ok(ok(res.payload, res.records_count))
            }
            Handler::Math(op) => {
                let (Some(Arg::Number(a)), Some(Arg::Number(b))) = (args.get("a"), args.get("b")) else {
                    unreachable!("math operands are required numbers");
                };
                let value = op.apply(a, b).ok_or(ToolError::DivisionByZero)?;
                Ok(ok(render_decimal(&value), 0))
            }
            Handler::External => Ok(ToolResult {
                call_id: call.call_id.clone(),
                status: ToolStatus::Error,
                body: format!("{NOT_CONFIGURED}: {}", call.name),
                records_count: 0,
            }),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_prompt_text())
    }
}

fn patient_id() -> ParamSpec {
    text("patient_id", true, "Patient identifier.")
}

fn date_minimum() -> ParamSpec {
    ParamSpec {
        name: "date_minimum".into(),
        kind: ParamKind::Date,
        required: false,
        description: "Only return records dated on or after this day.".into(),
    }
}

fn text(name: &str, required: bool, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        kind: ParamKind::String,
        required,
        description: description.into(),
    }
}

fn number(name: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        kind: ParamKind::Number,
        required: true,
        description: "Operand.".into(),
    }
}

fn number_opt(name: &str) -> ParamSpec {
    ParamSpec {
        required: false,
        ..number(name)
    }
}

fn text_arg<'a>(args: &'a Args, name: &str) -> Option<&'a str> {
    match args.get(name) {
        Some(Arg::Text(s)) => Some(s),
        _ => None,
    }
}

fn date_arg(args: &Args, name: &str) -> Option<NaiveDate> {
    match args.get(name) {
        Some(Arg::Date(d)) => Some(*d),
        _ => None,
    }
}

fn validate_args(spec: &FunctionSpec, raw: &Map<String, Value>) -> Result<Args, ToolError> {
    let invalid = |name: &str, reason: String| ToolError::ArgumentValidation {
        name: name.to_string(),
        reason,
    };
    if let Some(extra) = raw.keys().find(|k| !spec.params.iter().any(|p| &p.name == *k)) {
        return Err(invalid(extra, format!("not a parameter of {}", spec.name)));
    }
    let mut args = Args::new();
    for p in &spec.params {
        let value = match raw.get(&p.name) {
            None | Some(Value::Null) if p.required => {
                return Err(invalid(&p.name, "required argument is missing".into()))
            }
            None | Some(Value::Null) => continue,
            Some(v) => v,
        };
        let arg = match &p.kind {
            ParamKind::String => match value {
                Value::String(s) if !s.trim().is_empty() => Arg::Text(s.trim().to_string()),
                Value::String(_) => return Err(invalid(&p.name, "must not be empty".into())),
                Value::Number(n) => Arg::Text(n.to_string()),
                _ => return Err(invalid(&p.name, "expected a string".into())),
            },
            ParamKind::Number => {
                let text = match value {
                    Value::Number(n) => n.to_string(),
                    Value::String(s) => s.clone(),
                    _ => return Err(invalid(&p.name, "expected a number".into())),
                };
                Arg::Number(
                    parse_decimal(&text).ok_or_else(|| invalid(&p.name, format!("{text:?} is not a number")))?,
                )
            }
            ParamKind::Date => {
                let Value::String(s) = value else {
                    return Err(invalid(&p.name, "expected a YYYY-MM-DD string".into()));
                };
                let d = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
                    .map_err(|_| invalid(&p.name, format!("{s:?} is not a YYYY-MM-DD date")))?;
                Arg::Date(d)
            }
            ParamKind::Enum { values } => {
                let Value::String(s) = value else {
                    return Err(invalid(&p.name, "expected a string".into()));
                };
                let wanted = s.trim().to_ascii_lowercase();
                let hit = values
                    .iter()
                    .find(|v| v.to_ascii_lowercase() == wanted)
                    .ok_or_else(|| invalid(&p.name, format!("{s:?} is not one of {}", values.join(", "))))?;
                Arg::Text(hit.clone())
            }
        };
        args.insert(p.name.clone(), arg);
    }
    Ok(args)
}
