use crate::streamer::{Label, StoredResult};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlantError {
    #[error("patient {0} has no tier-1 answer in the results")]
    NotAnswered(String),
    #[error("patient {0} has no course id starting with a digit")]
    NoDigitPrefixedCourse(String),
}

/// `2PROS` becomes `PROS`; ids without a leading digit are unchanged.
pub fn truncate_leading_digits(course_id: &str) -> &str {
    course_id.trim_start_matches(|c: char| c.is_ascii_digit())
}

/// Copy of `rows` where each listed patient's course ids lost their leading
/// digits, the way a model sometimes drops them.
pub fn plant_tier1_bug(rows: &[StoredResult], patient_ids: &[String]) -> Result<Vec<StoredResult>, PlantError> {
    let mut out = rows.to_vec();
    for pid in patient_ids {
        let row = out
            .iter_mut()
            .find(|r| &r.patient_id == pid)
            .ok_or_else(|| PlantError::NotAnswered(pid.clone()))?;
        let Some(Label::Tier1(answer)) = row.label.as_mut() else {
            return Err(PlantError::NotAnswered(pid.clone()));
        };
        let mut touched = false;
        for c in &mut answer.delivered_courses {
            let cut = truncate_leading_digits(&c.course_id);
            if cut.len() != c.course_id.len() {
                c.course_id = cut.to_string();
                touched = true;
            }
        }
        if !touched {
            return Err(PlantError::NoDigitPrefixedCourse(pid.clone()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streamer::{CourseAnswer, TaskName, TaskStatus, Tier1Answer};

    fn row(pid: &str, ids: &[&str]) -> StoredResult {
        StoredResult {
            patient_id: pid.into(),
            task: TaskName::Tier1Qa,
            status: TaskStatus::Ok,
            label: Some(Label::Tier1(Tier1Answer {
                patient_id: pid.into(),
                first_name: "A".into(),
                last_name: "B".into(),
                sex: "male".into(),
                race: "White".into(),
                ethnicity: "Unknown".into(),
                delivered_courses: ids
                    .iter()
                    .map(|id| CourseAnswer {
                        course_id: id.to_string(),
                        icd_codes: vec![],
                        delivered_plan_ids: vec![],
                        radiation_type: "photon".into(),
                    })
                    .collect(),
            })),
            records_count: None,
            turns: 3,
            raw_output_path: String::new(),
            error: String::new(),
        }
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_leading_digits("2PROS"), "PROS");
        assert_eq!(truncate_leading_digits("12HN"), "HN");
        assert_eq!(truncate_leading_digits("HN1"), "HN1");
    }

    #[test]
    fn plants_only_listed_patients() {
        let rows = [row("A", &["1HN", "2PROS"]), row("B", &["1HN"])];
        let out = plant_tier1_bug(&rows, &["A".into()]).unwrap();
        let Some(Label::Tier1(a)) = &out[0].label else { panic!() };
        assert_eq!(a.delivered_courses[1].course_id, "PROS");
        assert_eq!(out[1], rows[1]);
    }

    #[test]
    fn refuses_patients_without_digit_prefix() {
        let rows = [row("A", &["HN"])];
        assert_eq!(
            plant_tier1_bug(&rows, &["A".into()]),
            Err(PlantError::NoDigitPrefixedCourse("A".into()))
        );
        assert_eq!(
            plant_tier1_bug(&rows, &["Z".into()]),
            Err(PlantError::NotAnswered("Z".into()))
        );
    }
}
