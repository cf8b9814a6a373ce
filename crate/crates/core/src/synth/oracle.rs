//! Keyword rules that read a label straight off the record text.

use super::spec::CohortTask;
use crate::ehr::{ClinicalDocument, PatientRecord};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLabel {
    pub positive: bool,
    /// Marx stage, ORN only.
    pub stage: Option<u8>,
    /// Documents that triggered a rule.
    pub evidence: Vec<String>,
}

struct Rules {
    stage3: Regex,
    stage2: Regex,
    stage1: Regex,
    psa: Regex,
    proven_recurrence: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        stage3: Regex::new(r"(?i)pathologic fracture|full-thickness").unwrap(),
        stage2: Regex::new(r"(?i)sequestrectomy|did not respond to hyperbaric oxygen").unwrap(),
        stage1: Regex::new(r"(?i)exposed (?:mandibular |maxillary )?bone persisting for (\d+) months").unwrap(),
        psa: Regex::new(r"PSA (\d+)\.(\d{2}) ng/mL").unwrap(),
        proven_recurrence: Regex::new(r"(?i)biopsy-proven recurren").unwrap(),
    })
}

/// PSA rise that counts as biochemical failure, in hundredths of ng/mL.
pub const PSA_RISE_HUNDREDTHS: u32 = 200;
/// Exposed bone must persist this long to stage.
pub const ORN_MIN_MONTHS: u32 = 3;

fn chronological(record: &PatientRecord) -> Vec<&ClinicalDocument> {
    let mut docs: Vec<&ClinicalDocument> = record.documents.iter().collect();
    docs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.doc_id.cmp(&b.doc_id)));
    docs
}

fn orn_stage(doc: &ClinicalDocument) -> u8 {
    let r = rules();
    if r.stage3.is_match(&doc.body) {
        3
    } else if r.stage2.is_match(&doc.body) {
        2
    } else if r
        .stage1
        .captures_iter(&doc.body)
        .any(|c| c[1].parse::<u32>().is_ok_and(|m| m >= ORN_MIN_MONTHS))
    {
        1
    } else {
        0
    }
}

/// PSA values in hundredths found in one document.
pub fn psa_values(text: &str) -> Vec<u32> {
    rules()
        .psa
        .captures_iter(text)
        .filter_map(|c| Some(c[1].parse::<u32>().ok()? * 100 + c[2].parse::<u32>().ok()?))
        .collect()
}

/// The label the rules give this record; `None` for tier-1 cohorts.
pub fn oracle_label(record: &PatientRecord, task: CohortTask) -> Option<OracleLabel> {
    let docs = chronological(record);
    let r = rules();
    match task {
        CohortTask::Tier1Qa => None,
        CohortTask::Orn => {
            let staged: Vec<(u8, &str)> = docs.iter().map(|d| (orn_stage(d), d.doc_id.as_str())).collect();
            let stage = staged.iter().map(|s| s.0).max().unwrap_or(0);
            Some(OracleLabel {
                positive: stage > 0,
                stage: Some(stage),
                evidence: staged
                    .iter()
                    .filter(|s| s.0 > 0)
                    .map(|s| s.1.to_string())
                    .collect(),
            })
        }
        CohortTask::HnRecurrence => {
            let evidence: Vec<String> = docs
                .iter()
                .filter(|d| r.proven_recurrence.is_match(&d.body))
                .map(|d| d.doc_id.clone())
                .collect();
            Some(OracleLabel {
                positive: !evidence.is_empty(),
                stage: None,
                evidence,
            })
        }
        CohortTask::ProstateRecurrence => {
            let mut evidence: Vec<String> = docs
                .iter()
                .filter(|d| r.proven_recurrence.is_match(&d.body))
                .map(|d| d.doc_id.clone())
                .collect();
            if let Some(end) = record.first_course_end() {
                let mut nadir: Option<u32> = None;
                for d in docs.iter().filter(|d| d.timestamp.date() >= end) {
                    for v in psa_values(&d.body) {
                        match nadir {
                            Some(n) if v >= n + PSA_RISE_HUNDREDTHS => {
                                if !evidence.contains(&d.doc_id) {
                                    evidence.push(d.doc_id.clone());
                                }
                            }
                            Some(n) if v < n => nadir = Some(v),
                            None => nadir = Some(v),
                            _ => {}
                        }
                    }
                }
            }
            Some(OracleLabel {
                positive: !evidence.is_empty(),
                stage: None,
                evidence,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::{Demographics, DeliveredPlan, DocKind, NoteType, RadiationType, Sex, TreatmentCourse};

    fn record(bodies: &[(&str, &str)]) -> PatientRecord {
        PatientRecord {
            demographics: Demographics {
                patient_id: "X1".into(),
                first_name: "A".into(),
                last_name: "B".into(),
                sex: Sex::Male,
                race: "White".into(),
                ethnicity: "Unknown".into(),
            },
            courses: vec![TreatmentCourse {
                course_id: "1PROS".into(),
                icd_codes: vec!["C61".into()],
                delivered_plans: vec![DeliveredPlan {
                    plan_id: "PROS".into(),
                    radiation_type: RadiationType::Photon,
                    delivered_date: "2020-01-31".parse().unwrap(),
                }],
                last_treatment_date: "2020-01-31".parse().unwrap(),
            }],
            diagnoses: vec![],
            documents: bodies
                .iter()
                .enumerate()
                .map(|(i, (day, body))| ClinicalDocument {
                    doc_id: format!("N{}", i + 1),
                    doc_kind: DocKind::ClinicalNote,
                    note_type: Some(NoteType::Urology),
                    timestamp: format!("{day}T09:00:00").parse().unwrap(),
                    provider: "Dr. Haas".into(),
                    department: "Urology".into(),
                    body: body.to_string(),
                })
                .collect(),
            appointments: vec![],
            inbasket_messages: vec![],
        }
    }

    #[test]
    fn psa_rise_after_nadir() {
        let rec = record(&[
            ("2019-06-01", "PSA 9.10 ng/mL before treatment."),
            ("2020-06-01", "PSA 1.20 ng/mL."),
            ("2020-12-01", "PSA 0.30 ng/mL."),
            ("2021-06-01", "PSA 2.29 ng/mL."),
            ("2021-12-01", "PSA 2.30 ng/mL."),
        ]);
        let l = oracle_label(&rec, CohortTask::ProstateRecurrence).unwrap();
        assert!(l.positive);
        assert_eq!(l.evidence, ["N5"]);
    }

    #[test]
    fn pretreatment_psa_is_ignored() {
        let rec = record(&[("2019-06-01", "PSA 0.10 ng/mL."), ("2020-06-01", "PSA 2.05 ng/mL.")]);
        assert!(!oracle_label(&rec, CohortTask::ProstateRecurrence).unwrap().positive);
    }

    #[test]
    fn orn_takes_the_highest_stage() {
        let rec = record(&[
            ("2020-06-01", "Exposed mandibular bone persisting for 2 months."),
            ("2020-09-01", "Exposed mandibular bone persisting for 4 months."),
        ]);
        let l = oracle_label(&rec, CohortTask::Orn).unwrap();
        assert_eq!((l.stage, l.evidence.clone()), (Some(1), vec!["N2".to_string()]));
        let rec = record(&[
            ("2020-06-01", "Exposed mandibular bone persisting for 6 months."),
            ("2020-09-01", "CT: pathologic fracture of the mandible."),
        ]);
        assert_eq!(oracle_label(&rec, CohortTask::Orn).unwrap().stage, Some(3));
        let rec = record(&[("2020-06-01", "No evidence of osteoradionecrosis.")]);
        assert_eq!(oracle_label(&rec, CohortTask::Orn).unwrap().stage, Some(0));
    }

    #[test]
    fn proven_recurrence_phrase() {
        let rec = record(&[("2021-01-01", "Biopsy-proven recurrent squamous cell carcinoma.")]);
        assert!(oracle_label(&rec, CohortTask::HnRecurrence).unwrap().positive);
        let rec = record(&[("2021-01-01", "New primary adenocarcinoma of the lung.")]);
        assert!(!oracle_label(&rec, CohortTask::HnRecurrence).unwrap().positive);
        assert!(oracle_label(&rec, CohortTask::Tier1Qa).is_none());
    }
}
