use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Format tag carried by every patient file.
pub const STORE_FORMAT_VERSION: &str = "ehr-store/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub patient_id: String,
    pub first_name: String,
    pub last_name: String,
    pub sex: Sex,
    pub race: String,
    pub ethnicity: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiationType {
    Proton,
    Photon,
    Electron,
}

impl RadiationType {
    pub fn as_str(self) -> &'static str {
        match self {
            RadiationType::Proton => "proton",
            RadiationType::Photon => "photon",
            RadiationType::Electron => "electron",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proton" => Some(RadiationType::Proton),
            "photon" => Some(RadiationType::Photon),
            "electron" => Some(RadiationType::Electron),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveredPlan {
    pub plan_id: String,
    pub radiation_type: RadiationType,
    pub delivered_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentCourse {
    pub course_id: String,
    pub icd_codes: Vec<String>,
    pub delivered_plans: Vec<DeliveredPlan>,
    pub last_treatment_date: NaiveDate,
}

impl TreatmentCourse {
    /// The modality shared by every delivered plan, or `None` for mixed courses.
    pub fn radiation_type(&self) -> Option<RadiationType> {
        let first = self.delivered_plans.first()?.radiation_type;
        self.delivered_plans
            .iter()
            .all(|p| p.radiation_type == first)
            .then_some(first)
    }

    pub fn first_treatment_date(&self) -> Option<NaiveDate> {
        self.delivered_plans.iter().map(|p| p.delivered_date).min()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub icd_code: String,
    pub description: String,
    pub onset_date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    ClinicalNote,
    RadiologyReport,
    PathologyReport,
}

impl DocKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocKind::ClinicalNote => "clinical_note",
            DocKind::RadiologyReport => "radiology_report",
            DocKind::PathologyReport => "pathology_report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteType {
    Radiology,
    Pathology,
    Surgery,
    RadiationOncology,
    Ent,
    Urology,
    Other,
}

impl NoteType {
    pub const ALL: [NoteType; 7] = [
        NoteType::Radiology,
        NoteType::Pathology,
        NoteType::Surgery,
        NoteType::RadiationOncology,
        NoteType::Ent,
        NoteType::Urology,
        NoteType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoteType::Radiology => "radiology",
            NoteType::Pathology => "pathology",
            NoteType::Surgery => "surgery",
            NoteType::RadiationOncology => "radiation_oncology",
            NoteType::Ent => "ent",
            NoteType::Urology => "urology",
            NoteType::Other => "other",
        }
    }

    /// Case-insensitive; prompts write both `ent` and `ENT`.
    pub fn parse(s: &str) -> Option<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|n| n.as_str() == wanted)
    }
}

impl fmt::Display for NoteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalDocument {
    pub doc_id: String,
    pub doc_kind: DocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note_type: Option<NoteType>,
    pub timestamp: NaiveDateTime,
    pub provider: String,
    pub department: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Appointment {
    pub appointment_id: String,
    pub start: NaiveDateTime,
    pub provider: String,
    pub department: String,
    pub visit_type: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InbasketMessage {
    pub message_id: String,
    pub timestamp: NaiveDateTime,
    pub sender: String,
    pub subject: String,
    pub body: String,
}

/// Everything the store knows about one patient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub demographics: Demographics,
    #[serde(default)]
    pub courses: Vec<TreatmentCourse>,
    #[serde(default)]
    pub diagnoses: Vec<Diagnosis>,
    #[serde(default)]
    pub documents: Vec<ClinicalDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub appointments: Vec<Appointment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inbasket_messages: Vec<InbasketMessage>,
}

impl PatientRecord {
    pub fn patient_id(&self) -> &str {
        &self.demographics.patient_id
    }

    /// Last treatment date of the course that started first.
    pub fn first_course_end(&self) -> Option<NaiveDate> {
        self.courses
            .iter()
            .filter_map(|c| c.first_treatment_date().map(|d| (d, c)))
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.course_id.cmp(&b.1.course_id)))
            .map(|(_, c)| c.last_treatment_date)
    }
}
