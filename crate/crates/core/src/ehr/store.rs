use super::model::*;
use chrono::NaiveDate;
use serde::Serialize;
use serde_json::Value;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// One validation failure, located as `file#section/id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Malformation {
    pub locator: String,
    pub reason: String,
}

impl fmt::Display for Malformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.locator, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("malformed patient documents:\n{}", list_malformations(.0))]
    MalformedDocument(Vec<Malformation>),
    #[error("duplicate patient id {0}")]
    DuplicatePatientId(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn list_malformations(items: &[Malformation]) -> String {
    items
        .iter()
        .map(|m| format!("  {m}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Details,
    TreatmentDetails,
    DiagnosisDetails,
    ClinicalNotes,
    RadiologyReports,
    PathologyReports,
    Appointments,
    InbasketMessages,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Details => "details",
            RecordKind::TreatmentDetails => "treatment_details",
            RecordKind::DiagnosisDetails => "diagnosis_details",
            RecordKind::ClinicalNotes => "clinical_notes",
            RecordKind::RadiologyReports => "radiology_reports",
            RecordKind::PathologyReports => "pathology_reports",
            RecordKind::Appointments => "appointments",
            RecordKind::InbasketMessages => "inbasket_messages",
        }
    }

    fn accepts_date_minimum(self) -> bool {
        !matches!(
            self,
            RecordKind::Details | RecordKind::TreatmentDetails | RecordKind::DiagnosisDetails
        )
    }

    /// Whether this kind lists timestamped documents (as opposed to structured fields).
    pub fn is_document_kind(self) -> bool {
        matches!(
            self,
            RecordKind::ClinicalNotes | RecordKind::RadiologyReports | RecordKind::PathologyReports
        )
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RetrievalFilter {
    pub note_type: Option<NoteType>,
    /// Inclusive lower bound on the document timestamp.
    pub date_minimum: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionResult {
    pub payload: String,
    pub records_count: usize,
    pub found: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrieveError {
    #[error("unknown patient {0}")]
    UnknownPatient(String),
    #[error("filter {filter} is not applicable to {kind}")]
    FilterNotApplicable { kind: RecordKind, filter: &'static str },
}

/// Immutable, validated collection of patient records keyed by patient id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    patients: BTreeMap<String, PatientRecord>,
}

#[derive(Serialize)]
struct PatientFileOut<'a> {
    version: &'static str,
    #[serde(flatten)]
    record: &'a PatientRecord,
}

/// Serialize one patient in the on-disk format.
pub fn patient_file_json(record: &PatientRecord) -> String {
    let mut out = serde_json::to_string_pretty(&PatientFileOut {
        version: STORE_FORMAT_VERSION,
        record,
    })
    .expect("patient record serializes");
    out.push('\n');
    out
}

pub fn write_patient_file(dir: &Path, record: &PatientRecord) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("{}.json", record.patient_id()));
    fs::write(&path, patient_file_json(record))?;
    Ok(path)
}

impl Store {
    /// Load every `*.json` patient file under `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Store, StoreError> {
        let path = path.as_ref();
        if !path.is_dir() {
            return Err(StoreError::MissingPath(path.to_path_buf()));
        }
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();

        let mut problems = Vec::new();
        let mut patients = BTreeMap::new();
        for file in files {
            let text = fs::read_to_string(&file).map_err(|source| StoreError::Io {
                path: file.clone(),
                source,
            })?;
            let name = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let stem = name.trim_end_matches(".json");
            match parse_patient_file(&name, &text) {
                Ok(record) => {
                    let id = record.patient_id().to_string();
                    if patients.contains_key(&id) {
                        return Err(StoreError::DuplicatePatientId(id));
                    }
                    if id != stem {
                        problems.push(Malformation {
                            locator: name.clone(),
                            reason: format!("file name does not match patient_id {id:?}"),
                        });
                    }
                    patients.insert(id, record);
                }
                Err(mut found) => problems.append(&mut found),
            }
        }
        if !problems.is_empty() {
            return Err(StoreError::MalformedDocument(problems));
        }
        Ok(Store { patients })
    }

    /// Build a store from in-memory records, applying the same validation as [`Store::load`].
    pub fn from_records(records: impl IntoIterator<Item = PatientRecord>) -> Result<Store, StoreError> {
        let mut patients = BTreeMap::new();
        let mut problems = Vec::new();
        for record in records {
            let id = record.patient_id().to_string();
            problems.extend(validate_record(&id, &record));
            if patients.insert(id.clone(), record).is_some() {
                return Err(StoreError::DuplicatePatientId(id));
            }
        }
        if !problems.is_empty() {
            return Err(StoreError::MalformedDocument(problems));
        }
        Ok(Store { patients })
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn patient(&self, patient_id: &str) -> Option<&PatientRecord> {
        self.patients.get(patient_id)
    }

    pub fn patient_ids(&self) -> impl Iterator<Item = &str> {
        self.patients.keys().map(String::as_str)
    }

    pub fn patients(&self) -> impl Iterator<Item = &PatientRecord> {
        self.patients.values()
    }

    pub fn retrieve(
        &self,
        patient_id: &str,
        kind: RecordKind,
        filter: RetrievalFilter,
    ) -> Result<FunctionResult, RetrieveError> {
        if filter.note_type.is_some() && kind != RecordKind::ClinicalNotes {
            return Err(RetrieveError::FilterNotApplicable {
                kind,
                filter: "note_type",
            });
        }
        if filter.date_minimum.is_some() && !kind.accepts_date_minimum() {
            return Err(RetrieveError::FilterNotApplicable {
                kind,
                filter: "date_minimum",
            });
        }
        let record = self
            .patients
            .get(patient_id)
            .ok_or_else(|| RetrieveError::UnknownPatient(patient_id.to_string()))?;

        let blocks: Vec<String> = match kind {
            RecordKind::Details => vec![render_demographics(&record.demographics)],
            RecordKind::TreatmentDetails => {
                let mut courses: Vec<&TreatmentCourse> = record.courses.iter().collect();
                courses.sort_by(|a, b| {
                    b.last_treatment_date
                        .cmp(&a.last_treatment_date)
                        .then_with(|| b.course_id.cmp(&a.course_id))
                });
                courses.into_iter().map(render_course).collect()
            }
            RecordKind::DiagnosisDetails => {
                let mut dx: Vec<&Diagnosis> = record.diagnoses.iter().collect();
                dx.sort_by(|a, b| {
                    b.onset_date
                        .cmp(&a.onset_date)
                        .then_with(|| b.icd_code.cmp(&a.icd_code))
                });
                dx.into_iter().map(render_diagnosis).collect()
            }
            RecordKind::ClinicalNotes | RecordKind::RadiologyReports | RecordKind::PathologyReports => {
                let wanted = match kind {
                    RecordKind::ClinicalNotes => DocKind::ClinicalNote,
                    RecordKind::RadiologyReports => DocKind::RadiologyReport,
                    _ => DocKind::PathologyReport,
                };
                select_documents(record, wanted, filter)
                    .into_iter()
                    .map(render_document)
                    .collect()
            }
            RecordKind::Appointments => {
                let mut appts: Vec<&Appointment> = record
                    .appointments
                    .iter()
                    .filter(|a| on_or_after(a.start.date(), filter.date_minimum))
                    .collect();
                appts.sort_by(|a, b| {
                    b.start
                        .cmp(&a.start)
                        .then_with(|| b.appointment_id.cmp(&a.appointment_id))
                });
                appts.into_iter().map(|a| render_appointment(a, None)).collect()
            }
            RecordKind::InbasketMessages => {
                let mut msgs: Vec<&InbasketMessage> = record
                    .inbasket_messages
                    .iter()
                    .filter(|m| on_or_after(m.timestamp.date(), filter.date_minimum))
                    .collect();
                msgs.sort_by(|a, b| {
                    b.timestamp
                        .cmp(&a.timestamp)
                        .then_with(|| b.message_id.cmp(&a.message_id))
                });
                msgs.into_iter().map(render_message).collect()
            }
        };
        Ok(assemble(blocks, || {
            format!(
                "No data could be found for patient {patient_id} with the given inputs ({}{}).",
                kind.as_str().replace('_', " "),
                describe_filter(filter)
            )
        }))
    }

    /// Appointments across all patients for one provider, newest first.
    pub fn physician_appointments(&self, provider: &str, date_minimum: Option<NaiveDate>) -> FunctionResult {
        let mut appts: Vec<(&str, &Appointment)> = self
            .patients
            .values()
            .flat_map(|r| r.appointments.iter().map(move |a| (r.patient_id(), a)))
            .filter(|(_, a)| a.provider.eq_ignore_ascii_case(provider.trim()))
            .filter(|(_, a)| on_or_after(a.start.date(), date_minimum))
            .collect();
        appts.sort_by(|a, b| {
            b.1.start
                .cmp(&a.1.start)
                .then_with(|| b.1.appointment_id.cmp(&a.1.appointment_id))
        });
        let blocks = appts
            .into_iter()
            .map(|(pid, a)| render_appointment(a, Some(pid)))
            .collect();
        assemble(blocks, || {
            format!("No data could be found for physician {provider} with the given inputs (appointments).")
        })
    }
}

fn on_or_after(date: NaiveDate, minimum: Option<NaiveDate>) -> bool {
    minimum.is_none_or(|m| date >= m)
}

fn describe_filter(filter: RetrievalFilter) -> String {
    let mut parts = Vec::new();
    if let Some(n) = filter.note_type {
        parts.push(format!("note_type={n}"));
    }
    if let Some(d) = filter.date_minimum {
        parts.push(format!("date_minimum={d}"));
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(", {}", parts.join(", "))
    }
}

/// Documents of one kind matching the filter, newest first; ties by doc_id descending.
pub(crate) fn select_documents(
    record: &PatientRecord,
    kind: DocKind,
    filter: RetrievalFilter,
) -> Vec<&ClinicalDocument> {
    let mut docs: Vec<&ClinicalDocument> = record
        .documents
        .iter()
        .filter(|d| d.doc_kind == kind)
        .filter(|d| filter.note_type.is_none_or(|n| d.note_type == Some(n)))
        .filter(|d| on_or_after(d.timestamp.date(), filter.date_minimum))
        .collect();
    docs.sort_by(|a, b| b.timestamp.cmp(&a.timestamp).then_with(|| b.doc_id.cmp(&a.doc_id)));
    docs
}

/// Header line that opens every payload.
pub const RECORDS_HEADER: &str = "number of records count: ";
/// Opening marker of each record block.
pub const RECORD_MARKER: &str = "[record ";

fn assemble(blocks: Vec<String>, no_data: impl FnOnce() -> String) -> FunctionResult {
    let n = blocks.len();
    if n == 0 {
        return FunctionResult {
            payload: format!("{RECORDS_HEADER}0\n{}\n", no_data()),
            records_count: 0,
            found: false,
        };
    }
    let mut payload = format!("{RECORDS_HEADER}{n}\n");
    for (i, block) in blocks.iter().enumerate() {
        payload.push_str(&format!("\n{RECORD_MARKER}{} of {n}]\n", i + 1));
        payload.push_str(block);
        if !block.ends_with('\n') {
            payload.push('\n');
        }
    }
    FunctionResult {
        payload,
        records_count: n,
        found: true,
    }
}

fn render_demographics(d: &Demographics) -> String {
    format!(
        "patient_id: {}\nfirst_name: {}\nlast_name: {}\nsex: {}\nrace: {}\nethnicity: {}\n",
        d.patient_id,
        d.first_name,
        d.last_name,
        d.sex.as_str(),
        d.race,
        d.ethnicity
    )
}

fn render_course(c: &TreatmentCourse) -> String {
    let mut out = format!(
        "course_id: {}\nicd_codes: {}\nlast_treatment_date: {}\ndelivered_plans:\n",
        c.course_id,
        c.icd_codes.join(", "),
        c.last_treatment_date
    );
    let mut plans: Vec<&DeliveredPlan> = c.delivered_plans.iter().collect();
    plans.sort_by(|a, b| {
        b.delivered_date
            .cmp(&a.delivered_date)
            .then_with(|| b.plan_id.cmp(&a.plan_id))
    });
    for p in plans {
        out.push_str(&format!(
            "  - plan_id: {}; radiation_type: {}; delivered_date: {}\n",
            p.plan_id,
            p.radiation_type.as_str(),
            p.delivered_date
        ));
    }
    out
}

fn render_diagnosis(d: &Diagnosis) -> String {
    format!(
        "icd_code: {}\ndescription: {}\nonset_date: {}\n",
        d.icd_code, d.description, d.onset_date
    )
}

fn render_document(d: &ClinicalDocument) -> String {
    let mut out = format!(
        "doc_id: {}\ntimestamp: {}\ndoc_kind: {}\n",
        d.doc_id,
        d.timestamp.format("%Y-%m-%dT%H:%M:%S"),
        d.doc_kind.as_str()
    );
    if let Some(n) = d.note_type {
        out.push_str(&format!("note_type: {n}\n"));
    }
    out.push_str(&format!(
        "provider: {}\ndepartment: {}\nbody:\n{}\n",
        d.provider, d.department, d.body
    ));
    out
}

fn render_appointment(a: &Appointment, patient_id: Option<&str>) -> String {
    let mut out = format!("appointment_id: {}\n", a.appointment_id);
    if let Some(pid) = patient_id {
        out.push_str(&format!("patient_id: {pid}\n"));
    }
    out.push_str(&format!(
        "start: {}\nprovider: {}\ndepartment: {}\nvisit_type: {}\nstatus: {}\n",
        a.start.format("%Y-%m-%dT%H:%M:%S"),
        a.provider,
        a.department,
        a.visit_type,
        a.status
    ));
    out
}

fn render_message(m: &InbasketMessage) -> String {
    format!(
        "message_id: {}\ntimestamp: {}\nsender: {}\nsubject: {}\nbody:\n{}\n",
        m.message_id,
        m.timestamp.format("%Y-%m-%dT%H:%M:%S"),
        m.sender,
        m.subject,
        m.body
    )
}

fn parse_patient_file(name: &str, text: &str) -> Result<PatientRecord, Vec<Malformation>> {
    let bad = |locator: String, reason: String| vec![Malformation { locator, reason }];
    let root: Value = serde_json::from_str(text).map_err(|e| bad(name.to_string(), e.to_string()))?;
    let Value::Object(mut obj) = root else {
        return Err(bad(name.to_string(), "top level is not an object".into()));
    };
    match obj.remove("version") {
        Some(Value::String(v)) if v == STORE_FORMAT_VERSION => {}
        Some(other) => {
            return Err(bad(
                name.to_string(),
                format!("unsupported version {other}, expected {STORE_FORMAT_VERSION:?}"),
            ))
        }
        None => return Err(bad(name.to_string(), "missing version".into())),
    }

    let mut problems = Vec::new();
    let demographics = match obj.remove("demographics") {
        Some(v) => match serde_json::from_value::<Demographics>(v) {
            Ok(d) => Some(d),
            Err(e) => {
                problems.push(Malformation {
                    locator: format!("{name}#demographics"),
                    reason: e.to_string(),
                });
                None
            }
        },
        None => {
            problems.push(Malformation {
                locator: format!("{name}#demographics"),
                reason: "missing section".into(),
            });
            None
        }
    };

    let courses = parse_section::<TreatmentCourse>(name, &mut obj, "courses", "course_id", &mut problems);
    let diagnoses = parse_section::<Diagnosis>(name, &mut obj, "diagnoses", "icd_code", &mut problems);
    let documents = parse_section::<ClinicalDocument>(name, &mut obj, "documents", "doc_id", &mut problems);
    let appointments =
        parse_section::<Appointment>(name, &mut obj, "appointments", "appointment_id", &mut problems);
    let inbasket_messages =
        parse_section::<InbasketMessage>(name, &mut obj, "inbasket_messages", "message_id", &mut problems);

    if let Some(key) = obj.keys().next() {
        problems.push(Malformation {
            locator: name.to_string(),
            reason: format!("unknown section {key:?}"),
        });
    }

    match demographics {
        Some(demographics) if problems.is_empty() => {
            let record = PatientRecord {
                demographics,
                courses,
                diagnoses,
                documents,
                appointments,
                inbasket_messages,
            };
            let problems = validate_record(name, &record);
            if problems.is_empty() {
                Ok(record)
            } else {
                Err(problems)
            }
        }
        _ => Err(problems),
    }
}

fn parse_section<T: serde::de::DeserializeOwned>(
    name: &str,
    obj: &mut serde_json::Map<String, Value>,
    section: &str,
    id_field: &str,
    problems: &mut Vec<Malformation>,
) -> Vec<T> {
    let items = match obj.remove(section) {
        None | Some(Value::Null) => return Vec::new(),
        Some(Value::Array(items)) => items,
        Some(_) => {
            problems.push(Malformation {
                locator: format!("{name}#{section}"),
                reason: "section is not a list".into(),
            });
            return Vec::new();
        }
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let id = item
            .get(id_field)
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("[{i}]"));
        match serde_json::from_value::<T>(item) {
            Ok(v) => out.push(v),
            Err(e) => problems.push(Malformation {
                locator: format!("{name}#{section}/{id}"),
                reason: e.to_string(),
            }),
        }
    }
    out
}

fn validate_record(name: &str, r: &PatientRecord) -> Vec<Malformation> {
    let mut problems = Vec::new();
    let mut push = |locator: String, reason: &str| {
        problems.push(Malformation {
            locator,
            reason: reason.to_string(),
        })
    };
    if r.demographics.patient_id.trim().is_empty() {
        push(format!("{name}#demographics"), "patient_id is empty");
    }

    let mut course_ids = HashSet::new();
    for c in &r.courses {
        let loc = format!("{name}#courses/{}", c.course_id);
        if !course_ids.insert(c.course_id.as_str()) {
            push(loc.clone(), "duplicate course_id");
        }
        match c.delivered_plans.iter().map(|p| p.delivered_date).max() {
            None => push(loc, "delivered_plans is empty"),
            Some(last) if last != c.last_treatment_date => {
                push(loc, "last_treatment_date differs from the latest delivered_date")
            }
            Some(_) => {}
        }
    }

    for d in &r.diagnoses {
        if d.icd_code.trim().is_empty() {
            push(format!("{name}#diagnoses"), "icd_code is empty");
        }
    }

    let mut doc_ids = HashSet::new();
    for d in &r.documents {
        let loc = format!("{name}#documents/{}", d.doc_id);
        if !doc_ids.insert(d.doc_id.as_str()) {
            push(loc.clone(), "duplicate doc_id");
        }
        match (d.doc_kind, d.note_type) {
            (DocKind::ClinicalNote, None) => push(loc, "clinical_note requires note_type"),
            (DocKind::RadiologyReport | DocKind::PathologyReport, Some(_)) => {
                push(loc, "note_type is only valid on clinical_note documents")
            }
            _ => {}
        }
    }
    problems
}
