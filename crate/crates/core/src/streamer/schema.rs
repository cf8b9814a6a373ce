use super::prompt::TaskName;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema violation at {field}: {reason}")]
pub struct SchemaViolation {
    pub field: String,
    pub reason: String,
}

fn violation(field: impl Into<String>, reason: impl Into<String>) -> SchemaViolation {
    SchemaViolation {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseAnswer {
    pub course_id: String,
    pub icd_codes: Vec<String>,
    pub delivered_plan_ids: Vec<String>,
    pub radiation_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier1Answer {
    pub patient_id: String,
    pub first_name: String,
    pub last_name: String,
    pub sex: String,
    pub race: String,
    pub ethnicity: String,
    pub delivered_courses: Vec<CourseAnswer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    Tier1(Tier1Answer),
    Orn { stage: u8, total_records: u64 },
    Recurrence { recurrence: bool },
}

impl Label {
    /// Binary outcome for the labeling tasks; tier-1 answers have none.
    pub fn positive(&self) -> Option<bool> {
        match self {
            Label::Tier1(_) => None,
            Label::Orn { stage, .. } => Some(*stage >= 1),
            Label::Recurrence { recurrence } => Some(*recurrence),
        }
    }
}

pub const TIER1_DEMOGRAPHIC_FIELDS: [&str; 6] = ["patient_id", "first_name", "last_name", "sex", "race", "ethnicity"];
pub const RADIATION_TYPES: [&str; 3] = ["proton", "photon", "electron"];

pub fn validate_output(object: &Map<String, Value>, schema: TaskName) -> Result<Label, SchemaViolation> {
    match schema {
        TaskName::Tier1Qa => validate_tier1(object).map(Label::Tier1),
        TaskName::Orn => {
            let stage = integer_field(object, "stage")?;
            if stage > 3 {
                return Err(violation("stage", format!("{stage} is not one of 0, 1, 2, 3")));
            }
            let total_records = integer_field(object, "total_records")?;
            Ok(Label::Orn {
                stage: stage as u8,
                total_records,
            })
        }
        TaskName::Recurrence => {
            let raw = object
                .get("recurrence")
                .ok_or_else(|| violation("recurrence", "missing"))?;
            let Value::String(s) = raw else {
                return Err(violation("recurrence", "expected \"yes\" or \"no\""));
            };
            match s.trim().to_ascii_lowercase().as_str() {
                "yes" => Ok(Label::Recurrence { recurrence: true }),
                "no" => Ok(Label::Recurrence { recurrence: false }),
                other => Err(violation("recurrence", format!("{other:?} is not yes or no"))),
            }
        }
    }
}

/// Non-negative integer given as a JSON number or a digit string.
fn integer_field(object: &Map<String, Value>, field: &str) -> Result<u64, SchemaViolation> {
    match object.get(field) {
        None => Err(violation(field, "missing")),
        Some(Value::Number(n)) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
            .ok_or_else(|| violation(field, format!("{n} is not a non-negative integer"))),
        Some(Value::String(s)) => {
            let t = s.trim();
            if !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()) {
                t.parse().map_err(|_| violation(field, "out of range"))
            } else {
                Err(violation(field, format!("{s:?} is not a non-negative integer")))
            }
        }
        Some(_) => Err(violation(field, "expected an integer")),
    }
}

fn text_field(object: &Map<String, Value>, field: &str, path: &str) -> Result<String, SchemaViolation> {
    match object.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(violation(path, "expected a string")),
        None => Err(violation(path, "missing")),
    }
}

fn text_list(object: &Map<String, Value>, field: &str, path: &str) -> Result<Vec<String>, SchemaViolation> {
    let Some(Value::Array(items)) = object.get(field) else {
        return Err(violation(path, if object.contains_key(field) { "expected a list" } else { "missing" }));
    };
    items
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(violation(format!("{path}[{i}]"), "expected a string")),
        })
        .collect()
}

fn validate_tier1(object: &Map<String, Value>) -> Result<Tier1Answer, SchemaViolation> {
    let mut demo = TIER1_DEMOGRAPHIC_FIELDS
        .iter()
        .map(|f| text_field(object, f, f))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter();
    let Some(Value::Array(courses)) = object.get("delivered_courses") else {
        return Err(violation("delivered_courses", "missing or not a list"));
    };
    let mut delivered = Vec::with_capacity(courses.len());
    for (i, course) in courses.iter().enumerate() {
        let path = |f: &str| format!("delivered_courses[{i}].{f}");
        let Value::Object(c) = course else {
            return Err(violation(format!("delivered_courses[{i}]"), "expected an object"));
        };
        let radiation_type = text_field(c, "radiation_type", &path("radiation_type"))?;
        if !RADIATION_TYPES.iter().any(|t| t.eq_ignore_ascii_case(radiation_type.trim())) {
            return Err(violation(path("radiation_type"), format!("{radiation_type:?} is not proton, photon or electron")));
        }
        delivered.push(CourseAnswer {
            course_id: text_field(c, "course_id", &path("course_id"))?,
            icd_codes: text_list(c, "icd_codes", &path("icd_codes"))?,
            delivered_plan_ids: text_list(c, "delivered_plan_ids", &path("delivered_plan_ids"))?,
            radiation_type,
        });
    }
    let mut next = || demo.next().expect("six fields");
    Ok(Tier1Answer {
        patient_id: next(),
        first_name: next(),
        last_name: next(),
        sex: next(),
        race: next(),
        ethnicity: next(),
        delivered_courses: delivered,
    })
}
