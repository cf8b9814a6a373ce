use super::metrics::Percent;
use crate::ehr::{PatientRecord, Store};
use crate::streamer::{CourseAnswer, Label, StoredResult, Tier1Answer, TaskStatus, TIER1_DEMOGRAPHIC_FIELDS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    ValueMismatch,
    MissingCourse,
    ExtraCourse,
    CountMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier1Diff {
    pub patient_id: String,
    pub field_path: String,
    pub expected: String,
    pub actual: String,
    pub kind: DiffKind,
}

impl Tier1Diff {
    pub fn is_demographic(&self) -> bool {
        self.field_path.starts_with("demographics.")
    }
}

/// What a perfect tier-1 answer for this record looks like.
pub fn expected_tier1(record: &PatientRecord) -> Tier1Answer {
    let d = &record.demographics;
    Tier1Answer {
        patient_id: d.patient_id.clone(),
        first_name: d.first_name.clone(),
        last_name: d.last_name.clone(),
        sex: d.sex.as_str().to_string(),
        race: d.race.clone(),
        ethnicity: d.ethnicity.clone(),
        delivered_courses: record
            .courses
            .iter()
            .map(|c| CourseAnswer {
                course_id: c.course_id.clone(),
                icd_codes: c.icd_codes.clone(),
                delivered_plan_ids: c.delivered_plans.iter().map(|p| p.plan_id.clone()).collect(),
                radiation_type: c
                    .radiation_type()
                    .map(|t| t.as_str().to_string())
                    .unwrap_or_else(|| "mixed".into()),
            })
            .collect(),
    }
}

fn demographic_values(a: &Tier1Answer) -> [&str; 6] {
    [&a.patient_id, &a.first_name, &a.last_name, &a.sex, &a.race, &a.ethnicity]
}

fn set(items: &[String]) -> BTreeSet<&str> {
    items.iter().map(String::as_str).collect()
}

fn joined(items: &BTreeSet<&str>) -> String {
    items.iter().copied().collect::<Vec<_>>().join(",")
}

/// Field-level differences between the store's view and the agent's answer.
pub fn compare_tier1(expected: &Tier1Answer, actual: &Tier1Answer) -> Vec<Tier1Diff> {
    let pid = &expected.patient_id;
    let mut diffs = Vec::new();
    let mut push = |field_path: String, e: &str, a: &str, kind| {
        diffs.push(Tier1Diff {
            patient_id: pid.clone(),
            field_path,
            expected: e.to_string(),
            actual: a.to_string(),
            kind,
        })
    };

    for ((field, e), a) in TIER1_DEMOGRAPHIC_FIELDS
        .iter()
        .zip(demographic_values(expected))
        .zip(demographic_values(actual))
    {
        let same = if *field == "patient_id" {
            e == a
        } else {
            e.trim().eq_ignore_ascii_case(a.trim())
        };
        if !same {
            push(format!("demographics.{field}"), e, a, DiffKind::ValueMismatch);
        }
    }

    let (exp, act) = (&expected.delivered_courses, &actual.delivered_courses);
    if exp.len() != act.len() {
        push(
            "delivered_courses".into(),
            &exp.len().to_string(),
            &act.len().to_string(),
            DiffKind::CountMismatch,
        );
    }
    for e in exp {
        let path = |f: &str| format!("course[{}].{f}", e.course_id);
        let Some(a) = act.iter().find(|a| a.course_id == e.course_id) else {
            push(path("course_id"), &e.course_id, "", DiffKind::MissingCourse);
            continue;
        };
        let (ei, ai) = (set(&e.icd_codes), set(&a.icd_codes));
        if ei != ai {
            push(path("icd_codes"), &joined(&ei), &joined(&ai), DiffKind::ValueMismatch);
        }
        let (ep, ap) = (set(&e.delivered_plan_ids), set(&a.delivered_plan_ids));
        if ep != ap {
            push(path("delivered_plan_ids"), &joined(&ep), &joined(&ap), DiffKind::ValueMismatch);
        }
        if e.radiation_type != a.radiation_type {
            push(path("radiation_type"), &e.radiation_type, &a.radiation_type, DiffKind::ValueMismatch);
        }
    }
    for a in act {
        if !exp.iter().any(|e| e.course_id == a.course_id) {
            push(format!("course[{}].course_id", a.course_id), "", &a.course_id, DiffKind::ExtraCourse);
        }
    }
    diffs
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier1Summary {
    pub patients: usize,
    pub demographic_fields_matched: usize,
    pub demographic_fields_total: usize,
    pub treatment_matches: usize,
    pub unanswered: usize,
}

impl fmt::Display for Tier1Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |n, d| Percent::of(n as u64, d as u64).map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        writeln!(
            f,
            "{}/{} demographic fields matched ({}%)",
            self.demographic_fields_matched,
            self.demographic_fields_total,
            pct(self.demographic_fields_matched, self.demographic_fields_total)
        )?;
        write!(
            f,
            "{}/{} treatment matches ({}%)",
            self.treatment_matches,
            self.patients,
            pct(self.treatment_matches, self.patients)
        )?;
        if self.unanswered > 0 {
            write!(f, "\n{} patients without a valid answer", self.unanswered)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier1Report {
    pub summary: Tier1Summary,
    pub diffs: Vec<Tier1Diff>,
}

/// Score tier-1 rows against the store. Rows without a valid answer count
/// as mismatches on every field.
pub fn evaluate_tier1(store: &Store, rows: &[StoredResult]) -> Tier1Report {
    let mut summary = Tier1Summary {
        patients: rows.len(),
        demographic_fields_matched: 0,
        demographic_fields_total: rows.len() * TIER1_DEMOGRAPHIC_FIELDS.len(),
        treatment_matches: 0,
        unanswered: 0,
    };
    let mut diffs = Vec::new();
    for row in rows {
        let Some(record) = store.patient(&row.patient_id) else {
            summary.unanswered += 1;
            diffs.push(Tier1Diff {
                patient_id: row.patient_id.clone(),
                field_path: "patient_id".into(),
                expected: String::new(),
                actual: row.patient_id.clone(),
                kind: DiffKind::ValueMismatch,
            });
            continue;
        };
        let answer = match (&row.status, &row.label) {
            (TaskStatus::Ok, Some(Label::Tier1(a))) => a,
            _ => {
                summary.unanswered += 1;
                continue;
            }
        };
        let d = compare_tier1(&expected_tier1(record), answer);
        let demo_misses = d.iter().filter(|x| x.is_demographic()).count();
        summary.demographic_fields_matched += TIER1_DEMOGRAPHIC_FIELDS.len() - demo_misses;
        if demo_misses == d.len() {
            summary.treatment_matches += 1;
        }
        diffs.extend(d);
    }
    Tier1Report { summary, diffs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, truncate_leading_digits, CohortSpec, CohortTask};
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn store() -> Store {
        Store::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/store")).unwrap()
    }

    #[test]
    fn identical_answer_has_no_diffs() {
        let store = store();
        let e = expected_tier1(store.patient("P0001").unwrap());
        assert!(compare_tier1(&e, &e).is_empty());
        assert_eq!(e.delivered_courses.len(), 2);
    }

    #[test]
    fn truncated_course_id_is_a_missing_extra_pair() {
        let store = store();
        let e = expected_tier1(store.patient("P0002").unwrap());
        let mut a = e.clone();
        a.delivered_courses[0].course_id = "PROS".into();
        let d = compare_tier1(&e, &a);
        let kinds: Vec<_> = d.iter().map(|x| x.kind).collect();
        assert_eq!(kinds, [DiffKind::MissingCourse, DiffKind::ExtraCourse]);
        assert_eq!(d[0].field_path, "course[2PROS].course_id");
        assert_eq!(d[1].actual, "PROS");
    }

    #[test]
    fn sets_and_case_rules() {
        let store = store();
        let e = expected_tier1(store.patient("P0001").unwrap());
        let mut a = e.clone();
        a.delivered_courses[0].icd_codes.reverse();
        a.delivered_courses.reverse();
        a.first_name = format!("  {} ", a.first_name.to_uppercase());
        assert!(compare_tier1(&e, &a).is_empty());
        a.patient_id = a.patient_id.to_lowercase();
        a.delivered_courses[0].radiation_type = "Proton".into();
        let d = compare_tier1(&e, &a);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].field_path, "demographics.patient_id");
        a.delivered_courses.pop();
        assert!(compare_tier1(&e, &a).iter().any(|x| x.kind == DiffKind::CountMismatch));
    }

    #[test]
    fn summary_line() {
        let s = Tier1Summary {
            patients: 500,
            demographic_fields_matched: 3000,
            demographic_fields_total: 3000,
            treatment_matches: 497,
            unanswered: 0,
        };
        assert_eq!(
            s.to_string(),
            "3000/3000 demographic fields matched (100.0%)\n497/500 treatment matches (99.4%)"
        );
    }

    fn keyed(diffs: Vec<Tier1Diff>) -> Vec<(String, String, String)> {
        let mut k: Vec<_> = diffs.into_iter().map(|d| (d.field_path, d.expected, d.actual)).collect();
        k.sort();
        k
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn list_order_never_matters(
            seed in 0u64..50,
            idx in 0usize..8,
            truncate in proptest::option::of(0usize..4),
            shuffle in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut spec = CohortSpec::default_for(CohortTask::Tier1Qa);
            spec.n_negative = 8;
            spec.seed = seed;
            let cohort = generate_cohort(&spec).unwrap();
            let e = expected_tier1(&cohort.records[idx]);
            let mut a = e.clone();
            if let Some(t) = truncate {
                if !a.delivered_courses.is_empty() {
                    let n = a.delivered_courses.len();
                    let c = &mut a.delivered_courses[t % n];
                    c.course_id = truncate_leading_digits(&c.course_id).to_string();
                }
            }
            let base = keyed(compare_tier1(&e, &a));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(shuffle);
            a.delivered_courses.shuffle(&mut rng);
            for c in &mut a.delivered_courses {
                c.icd_codes.shuffle(&mut rng);
                c.delivered_plan_ids.shuffle(&mut rng);
            }
            prop_assert_eq!(keyed(compare_tier1(&e, &a)), base.clone());
            prop_assert_eq!(base.is_empty(), truncate.is_none() || e.delivered_courses.is_empty());
        }
    }
}
