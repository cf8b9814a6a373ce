use super::spec::{CohortSpec, CohortTask};
use crate::ehr::{
    Appointment, ClinicalDocument, DeliveredPlan, Demographics, Diagnosis, DocKind, NoteType, PatientRecord,
    RadiationType, Sex, TreatmentCourse,
};
use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible cohort spec: {0}")]
    InfeasibleSpec(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Planted disagreement kind; at most one per patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    GtError,
    ModelError,
    Indeterminate,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::GtError => "gt_error",
            Flag::ModelError => "model_error",
            Flag::Indeterminate => "indeterminate",
        }
    }

    pub fn parse(s: &str) -> Option<Flag> {
        [Flag::GtError, Flag::ModelError, Flag::Indeterminate]
            .into_iter()
            .find(|f| f.as_str() == s.trim())
    }
}

/// One line of `truth_manifest.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub patient_id: String,
    pub task: CohortTask,
    pub true_label: Option<bool>,
    pub true_stage: Option<u8>,
    pub baseline_label: Option<bool>,
    pub flag: Option<Flag>,
    pub evidence_doc_ids: Vec<String>,
}

impl TruthRow {
    fn flipped(&self) -> bool {
        matches!(self.flag, Some(Flag::ModelError | Flag::Indeterminate))
    }

    /// What the scripted model answers.
    pub fn model_label(&self) -> Option<bool> {
        self.true_label.map(|t| t != self.flipped())
    }

    pub fn model_stage(&self) -> Option<u8> {
        let stage = self.true_stage?;
        Some(match (self.flipped(), stage) {
            (false, s) => s,
            (true, 0) => 1,
            (true, _) => 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub records: Vec<PatientRecord>,
    pub truth: Vec<TruthRow>,
}

/// Build a cohort; the same spec always gives the same cohort.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort, SynthError> {
    spec.validate().map_err(SynthError::InfeasibleSpec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.stream_seed());
    let n = spec.size();
    let width = n.to_string().len().max(4);
    let ids: Vec<String> = (1..=n)
        .map(|i| format!("{}{:0width$}", spec.task.id_prefix(), i))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut baseline = vec![false; n];
    for &i in &order[..spec.n_positive] {
        baseline[i] = true;
    }

    let mut flags: Vec<Option<Flag>> = vec![None; n];
    let p = &spec.planted;
    for (side, counts) in [
        (
            false,
            [
                (Flag::GtError, p.ground_truth_error.false_positive),
                (Flag::ModelError, p.model_error.false_positive),
                (Flag::Indeterminate, p.indeterminate.false_positive),
            ],
        ),
        (
            true,
            [
                (Flag::GtError, p.ground_truth_error.false_negative),
                (Flag::ModelError, p.model_error.false_negative),
                (Flag::Indeterminate, p.indeterminate.false_negative),
            ],
        ),
    ] {
        let mut pool: Vec<usize> = (0..n).filter(|&i| baseline[i] == side).collect();
        pool.shuffle(&mut rng);
        let mut it = pool.into_iter();
        for (flag, count) in counts {
            for i in it.by_ref().take(count) {
                flags[i] = Some(flag);
            }
        }
    }

    let labeled = spec.task != CohortTask::Tier1Qa;
    let mut records = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for (i, pid) in ids.iter().enumerate() {
        let mut prng = ChaCha8Rng::seed_from_u64(rng.gen());
        let true_label = baseline[i] != (flags[i] == Some(Flag::GtError));
        let built = build_patient(spec.task, pid, true_label, &mut prng);
        records.push(built.record);
        truth.push(TruthRow {
            patient_id: pid.clone(),
            task: spec.task,
            true_label: labeled.then_some(true_label),
            true_stage: built.stage,
            baseline_label: labeled.then_some(baseline[i]),
            flag: flags[i],
            evidence_doc_ids: built.evidence,
        });
    }
    Ok(Cohort {
        spec: spec.clone(),
        records,
        truth,
    })
}

struct Built {
    record: PatientRecord,
    stage: Option<u8>,
    evidence: Vec<String>,
}

const FIRST_MALE: &[&str] = &[
    "James", "Robert", "Tomas", "Wei", "Samuel", "Omar", "Luis", "Henry", "Kwame", "Ivan", "Daniel", "Arjun",
    "Felix", "George", "Marcus", "Hiro", "Peter", "Andre",
];
const FIRST_FEMALE: &[&str] = &[
    "Ada", "Maria", "Grace", "Mei", "Fatima", "Elena", "Ruth", "Aisha", "Nora", "Priya", "Sofia", "Joan",
    "Keiko", "Linda", "Amara", "Clara",
];
const LAST: &[&str] = &[
    "Lindqvist", "Reyes", "Okafor", "Chen", "Nguyen", "Smith", "Garcia", "Patel", "Kowalski", "Haddad",
    "Johnson", "Moreau", "Tanaka", "Brown", "Silva", "Novak", "Murphy", "Ibrahim", "Larsen", "Cohen",
    "Diaz", "Walker", "Rossi", "Kim",
];
const RACES: &[(&str, u32)] = &[
    ("White", 60),
    ("Black or African American", 14),
    ("Asian", 12),
    ("American Indian or Alaska Native", 3),
    ("Native Hawaiian or Other Pacific Islander", 2),
    ("Other", 9),
];
const ETHNICITIES: &[(&str, u32)] = &[
    ("Not Hispanic or Latino", 80),
    ("Hispanic or Latino", 15),
    ("Unknown", 5),
];

const HN_SITES: &[(&str, &str, &str)] = &[
    ("C01", "Malignant neoplasm of base of tongue", "base of tongue"),
    ("C02.9", "Malignant neoplasm of tongue, unspecified", "oral tongue"),
    ("C04.9", "Malignant neoplasm of floor of mouth, unspecified", "floor of mouth"),
    ("C06.0", "Malignant neoplasm of cheek mucosa", "buccal mucosa"),
    ("C09.9", "Malignant neoplasm of tonsil, unspecified", "tonsil"),
    ("C10.9", "Malignant neoplasm of oropharynx, unspecified", "oropharynx"),
    ("C32.9", "Malignant neoplasm of larynx, unspecified", "larynx"),
];
const HN_NODES: (&str, &str) = (
    "C77.0",
    "Secondary and unspecified malignant neoplasm of lymph nodes of head, face and neck",
);
const PROSTATE: (&str, &str) = ("C61", "Malignant neoplasm of prostate");
const PELVIC_NODES: (&str, &str) = (
    "C77.5",
    "Secondary and unspecified malignant neoplasm of intrapelvic lymph nodes",
);

fn providers(note_type: Option<NoteType>, kind: DocKind) -> (&'static [&'static str], &'static str) {
    match (kind, note_type) {
        (DocKind::RadiologyReport, _) | (_, Some(NoteType::Radiology)) => (&["Dr. Nguyen", "Dr. Falk"], "Radiology"),
        (DocKind::PathologyReport, _) | (_, Some(NoteType::Pathology)) => (&["Dr. Weiss", "Dr. Osei"], "Pathology"),
        (_, Some(NoteType::Ent)) => (&["Dr. Moreau", "Dr. Tanaka"], "Otolaryngology"),
        (_, Some(NoteType::Urology)) => (&["Dr. Haas", "Dr. Abara"], "Urology"),
        (_, Some(NoteType::Surgery)) => (&["Dr. Castillo"], "Oral and Maxillofacial Surgery"),
        _ => (&["Dr. Okafor", "Dr. Lindqvist", "Dr. Patel"], "Radiation Oncology"),
    }
}

fn weighted<'a>(rng: &mut ChaCha8Rng, items: &[(&'a str, u32)]) -> &'a str {
    items.choose_weighted(rng, |x| x.1).expect("non-empty weights").0
}

fn days(d: NaiveDate, n: i64) -> NaiveDate {
    d + Duration::days(n)
}

struct Chart<'r> {
    rng: &'r mut ChaCha8Rng,
    pid: String,
    docs: Vec<ClinicalDocument>,
    courses: Vec<TreatmentCourse>,
    diagnoses: Vec<Diagnosis>,
    appointments: Vec<Appointment>,
    counters: [usize; 4],
}

impl<'r> Chart<'r> {
    fn new(rng: &'r mut ChaCha8Rng, pid: &str) -> Self {
        Chart {
            rng,
            pid: pid.to_string(),
            docs: Vec::new(),
            courses: Vec::new(),
            diagnoses: Vec::new(),
            appointments: Vec::new(),
            counters: [0; 4],
        }
    }

    fn stamp(&mut self, date: NaiveDate) -> NaiveDateTime {
        date.and_hms_opt(self.rng.gen_range(8..17), self.rng.gen_range(0..4) * 15, 0)
            .expect("valid time")
    }

    fn doc(&mut self, kind: DocKind, note_type: Option<NoteType>, date: NaiveDate, body: String) -> String {
        let (prefix, slot) = match kind {
            DocKind::ClinicalNote => ("N", 0),
            DocKind::RadiologyReport => ("R", 1),
            DocKind::PathologyReport => ("S", 2),
        };
        self.counters[slot] += 1;
        let doc_id = format!("{prefix}{}", self.counters[slot]);
        let (names, department) = providers(note_type, kind);
        let provider = names.choose(self.rng).expect("non-empty").to_string();
        let timestamp = self.stamp(date);
        self.docs.push(ClinicalDocument {
            doc_id: doc_id.clone(),
            doc_kind: kind,
            note_type,
            timestamp,
            provider,
            department: department.to_string(),
            body,
        });
        doc_id
    }

    fn note(&mut self, note_type: NoteType, date: NaiveDate, body: String) -> String {
        self.doc(DocKind::ClinicalNote, Some(note_type), date, body)
    }

    fn radiology(&mut self, date: NaiveDate, body: String) -> String {
        self.doc(DocKind::RadiologyReport, None, date, body)
    }

    fn pathology(&mut self, date: NaiveDate, body: String) -> String {
        self.doc(DocKind::PathologyReport, None, date, body)
    }

    fn diagnosis(&mut self, (code, description): (&str, &str), onset: NaiveDate) {
        if self.diagnoses.iter().any(|d| d.icd_code == code) {
            return;
        }
        self.diagnoses.push(Diagnosis {
            icd_code: code.to_string(),
            description: description.to_string(),
            onset_date: onset,
        });
    }

    /// Plans are delivered evenly across `span` days after `start`.
    fn course(&mut self, tag: &str, icd_codes: &[&str], plans: &[&str], rtype: RadiationType, start: NaiveDate, span: i64) -> NaiveDate {
        let number = self.courses.len() + 1;
        let delivered_plans: Vec<DeliveredPlan> = plans
            .iter()
            .enumerate()
            .map(|(i, p)| DeliveredPlan {
                plan_id: p.to_string(),
                radiation_type: rtype,
                delivered_date: days(start, span * (i as i64 + 1) / plans.len() as i64),
            })
            .collect();
        let last = delivered_plans.iter().map(|p| p.delivered_date).max().expect("plans");
        self.courses.push(TreatmentCourse {
            course_id: format!("{number}{tag}"),
            icd_codes: icd_codes.iter().map(|s| s.to_string()).collect(),
            delivered_plans,
            last_treatment_date: last,
        });
        last
    }

    fn appointment(&mut self, date: NaiveDate, visit_type: &str) {
        let id = format!("A{}", self.appointments.len() + 1);
        let start = self.stamp(date);
        let provider = providers(Some(NoteType::RadiationOncology), DocKind::ClinicalNote)
            .0
            .choose(self.rng)
            .expect("non-empty")
            .to_string();
        self.appointments.push(Appointment {
            appointment_id: id,
            start,
            provider,
            department: "Radiation Oncology".into(),
            visit_type: visit_type.into(),
            status: "completed".into(),
        });
    }

    fn finish(self, sex: Sex) -> PatientRecord {
        let rng = self.rng;
        let (first, last) = (
            match sex {
                Sex::Male => FIRST_MALE.choose(rng),
                Sex::Female => FIRST_FEMALE.choose(rng),
            }
            .expect("non-empty")
            .to_string(),
            LAST.choose(rng).expect("non-empty").to_string(),
        );
        let race = weighted(rng, RACES).to_string();
        let ethnicity = weighted(rng, ETHNICITIES).to_string();
        PatientRecord {
            demographics: Demographics {
                patient_id: self.pid,
                first_name: first,
                last_name: last,
                sex,
                race,
                ethnicity,
            },
            courses: self.courses,
            diagnoses: self.diagnoses,
            documents: self.docs,
            appointments: self.appointments,
            inbasket_messages: Vec::new(),
        }
    }
}

fn start_date(rng: &mut ChaCha8Rng) -> NaiveDate {
    days(NaiveDate::from_ymd_opt(2012, 1, 1).expect("date"), rng.gen_range(0..2900))
}

fn jitter(rng: &mut ChaCha8Rng, d: NaiveDate, months: i64) -> NaiveDate {
    days(d, months * 30 + rng.gen_range(-7..=7))
}

fn hn_type(rng: &mut ChaCha8Rng) -> RadiationType {
    if rng.gen_bool(0.25) {
        RadiationType::Proton
    } else {
        RadiationType::Photon
    }
}

struct HnStart {
    site: &'static str,
    end: NaiveDate,
}

/// Diagnosis, biopsy, consult and the first course for a head and neck patient.
fn hn_start(c: &mut Chart) -> HnStart {
    let d0 = start_date(c.rng);
    let &(code, desc, site) = HN_SITES.choose(c.rng).expect("sites");
    c.diagnosis((code, desc), d0);
    let mut icds = vec![code];
    let nodal = c.rng.gen_bool(0.5);
    if nodal {
        c.diagnosis(HN_NODES, d0);
        icds.push(HN_NODES.0);
    }
    let p16 = if c.rng.gen_bool(0.6) { "positive" } else { "negative" };
    c.pathology(d0, format!("Biopsy of the {site}: invasive squamous cell carcinoma, p16 {p16}."));
    c.note(
        NoteType::Pathology,
        days(d0, 3),
        format!("Tumor board pathology review: squamous cell carcinoma of the {site} confirmed."),
    );
    c.note(
        NoteType::RadiationOncology,
        days(d0, 14),
        format!("Radiation oncology consultation for squamous cell carcinoma of the {site}. Plan definitive radiotherapy to 70 Gy in 35 fractions with concurrent cisplatin."),
    );
    c.note(
        NoteType::Ent,
        days(d0, 10),
        "Pre-radiation dental evaluation. Two carious molars extracted before treatment.".into(),
    );
    let rtype = hn_type(c.rng);
    let start = days(d0, c.rng.gen_range(21..45));
    let plans: &[&str] = if nodal { &["HN_PTV70", "HN_NODES"] } else { &["HN_PTV70"] };
    let end = c.course("HN", &icds, plans, rtype, start, 46);
    c.appointment(days(end, 90), "Follow-up");
    HnStart { site, end }
}

const FOLLOW_UP_MONTHS: [i64; 8] = [3, 6, 12, 18, 24, 36, 48, 60];

fn follow_up_schedule(c: &mut Chart) -> Vec<i64> {
    let k = c.rng.gen_range(4..=FOLLOW_UP_MONTHS.len());
    FOLLOW_UP_MONTHS[..k].to_vec()
}

fn hn_imaging(c: &mut Chart, end: NaiveDate) {
    let d = jitter(c.rng, end, 3);
    c.radiology(d, "PET/CT: complete metabolic response at the primary site and neck. No suspicious adenopathy.".into());
    c.note(
        NoteType::Radiology,
        days(d, 1),
        "Radiology communication: post-treatment PET/CT reviewed with the treating team.".into(),
    );
    let d = jitter(c.rng, end, 12);
    c.radiology(d, "CT neck with contrast: expected post-treatment changes. No suspicious adenopathy.".into());
}

fn orn_patient(c: &mut Chart, positive: bool) -> (Option<u8>, Vec<String>) {
    let HnStart { site, end } = hn_start(c);
    hn_imaging(c, end);
    let schedule = follow_up_schedule(c);
    let side = if c.rng.gen_bool(0.5) { "left" } else { "right" };
    let stage = if positive {
        *[1u8, 1, 1, 1, 2, 2, 2, 3, 3, 3].choose(c.rng).expect("stages")
    } else {
        0
    };
    let event_month = *[6i64, 12, 18, 24].choose(c.rng).expect("months");
    for (i, &m) in schedule.iter().enumerate() {
        let d = jitter(c.rng, end, m);
        let after_event = stage > 0 && m > event_month;
        if i % 2 == 0 {
            let mouth = if after_event {
                "Known osteoradionecrosis of the mandible, followed by oral surgery."
            } else {
                "Mucosa intact without exposed bone."
            };
            c.note(
                NoteType::RadiationOncology,
                d,
                format!("Follow-up {m} months after radiotherapy to the {site}. {mouth} Mild xerostomia, tolerating a regular diet. No evidence of recurrent disease."),
            );
        } else {
            c.note(
                NoteType::Ent,
                d,
                "ENT surveillance visit. Flexible laryngoscopy shows post-radiation changes without suspicious lesions.".into(),
            );
        }
    }
    if !positive && c.rng.gen_bool(0.3) {
        let d = jitter(c.rng, end, event_month);
        c.note(
            NoteType::Ent,
            d,
            format!("Small area of exposed mandibular bone persisting for 2 months at the {side} extraction site, now healed with chlorhexidine rinses."),
        );
    }
    let mut evidence = Vec::new();
    if stage >= 1 {
        let d = days(end, event_month * 30 + 10);
        let persist = c.rng.gen_range(3..=9);
        let course = if stage == 1 {
            "Responding to hyperbaric oxygen therapy."
        } else {
            "Started pentoxifylline and tocopherol."
        };
        evidence.push(c.note(
            NoteType::Ent,
            d,
            format!("Exposed mandibular bone persisting for {persist} months in the {side} posterior mandible. {course}"),
        ));
        if stage == 2 {
            evidence.push(c.note(
                NoteType::Surgery,
                days(d, 60),
                format!("Underwent sequestrectomy of the {side} mandible after the exposed bone did not respond to hyperbaric oxygen therapy."),
            ));
        }
        if stage == 3 {
            evidence.push(c.radiology(
                days(d, 90),
                format!("CT mandible: pathologic fracture of the {side} mandible with full-thickness devitalized bone."),
            ));
            c.note(
                NoteType::Surgery,
                days(d, 100),
                "Segmental mandibulectomy with fibula free flap reconstruction planned.".into(),
            );
        }
    }
    if c.rng.gen_bool(0.15) {
        let start = days(end, c.rng.gen_range(720..1440));
        c.course("HN", &[HN_NODES.0], &["HN_REIRR"], RadiationType::Photon, start, 30);
    }
    (Some(stage), evidence)
}

fn hn_recurrence_patient(c: &mut Chart, positive: bool) -> Vec<String> {
    let HnStart { site, end } = hn_start(c);
    hn_imaging(c, end);
    let schedule = follow_up_schedule(c);
    let rec_month = c.rng.gen_range(9..=30);
    for (i, &m) in schedule.iter().enumerate() {
        let d = jitter(c.rng, end, m);
        let status = if positive && m > rec_month {
            "Under surveillance after salvage treatment for recurrent disease."
        } else {
            "No evidence of recurrent disease."
        };
        let note_type = if i % 2 == 0 { NoteType::RadiationOncology } else { NoteType::Ent };
        c.note(note_type, d, format!("Follow-up {m} months after radiotherapy to the {site}. {status}"));
    }
    let mut evidence = Vec::new();
    if positive {
        let d = days(end, rec_month * 30);
        c.radiology(
            d,
            format!("PET/CT: new FDG-avid focus at the {site} concerning for recurrence."),
        );
        c.pathology(
            days(d, 12),
            format!("Biopsy of the {site}: squamous cell carcinoma, consistent with recurrence."),
        );
        evidence.push(c.note(
            NoteType::Ent,
            days(d, 15),
            format!("Biopsy-proven recurrent squamous cell carcinoma of the {site}. Referred for salvage therapy."),
        ));
        if c.rng.gen_bool(0.5) {
            let start = days(d, 45);
            let code = c.courses[0].icd_codes[0].clone();
            c.course("HN", &[&code], &["HN_REIRR"], RadiationType::Photon, start, 35);
        }
    } else if c.rng.gen_bool(0.25) {
        let d = jitter(c.rng, end, rec_month);
        c.note(
            NoteType::RadiationOncology,
            d,
            "CT chest shows a new primary adenocarcinoma of the lung, unrelated to the prior head and neck cancer.".into(),
        );
    }
    evidence
}

fn psa(v: u32) -> String {
    format!("PSA {}.{:02} ng/mL", v / 100, v % 100)
}

fn prostate_start(c: &mut Chart) -> NaiveDate {
    let d0 = start_date(c.rng);
    c.diagnosis(PROSTATE, d0);
    let pre = c.rng.gen_range(400..2000);
    c.note(
        NoteType::Urology,
        days(d0, -20),
        format!("Initial urology consultation. {}. Prostate biopsy arranged.", psa(pre)),
    );
    let gleason = *["3+3=6", "3+4=7", "4+3=7", "4+4=8"].choose(c.rng).expect("grades");
    c.pathology(
        d0,
        format!("Prostate needle biopsy: acinar adenocarcinoma, Gleason score {gleason}."),
    );
    c.note(
        NoteType::RadiationOncology,
        days(d0, 21),
        "Radiation oncology consultation for prostate adenocarcinoma. Plan definitive radiotherapy with short-course androgen deprivation.".into(),
    );
    let rtype = if c.rng.gen_bool(0.2) {
        RadiationType::Proton
    } else {
        RadiationType::Photon
    };
    let mut icds = vec![PROSTATE.0];
    let mut plans = vec!["PROS_PTV"];
    if c.rng.gen_bool(0.3) {
        c.diagnosis(PELVIC_NODES, d0);
        icds.push(PELVIC_NODES.0);
        plans.push("PELVIC_NODES");
    }
    let start = days(d0, c.rng.gen_range(35..70));
    let end = c.course("PROS", &icds, &plans, rtype, start, 40);
    c.appointment(days(end, 90), "Follow-up");
    end
}

fn prostate_patient(c: &mut Chart, positive: bool) -> Vec<String> {
    let end = prostate_start(c);
    let biopsy_mode = positive && c.rng.gen_bool(0.2);
    let psa_positive = positive && !biopsy_mode;

    let first: u32 = c.rng.gen_range(100..=400);
    let nadir: u32 = c.rng.gen_range(5..=80);
    let j: usize = c.rng.gen_range(2..=4);
    let k = j + 4 + c.rng.gen_range(0..=3);
    let mut values: Vec<u32> = (0..j)
        .map(|i| first - (first - nadir) * i as u32 / j as u32)
        .collect();
    values.push(nadir);
    if psa_positive {
        let r = j + 1 + c.rng.gen_range(0..=1);
        while values.len() < r {
            values.push(nadir + c.rng.gen_range(0..=100));
        }
        values.push(nadir + 120);
        let mut v = nadir + 210 + c.rng.gen_range(0..100);
        while values.len() < k {
            values.push(v);
            v += c.rng.gen_range(100..250);
        }
    } else {
        while values.len() < k {
            values.push(nadir + c.rng.gen_range(0..=150));
        }
        if c.rng.gen_bool(0.2) {
            let at = c.rng.gen_range(j + 1..k);
            values[at] = nadir + 190;
        }
    }

    let mut evidence = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let d = jitter(c.rng, end, 3 + 6 * i as i64);
        let rising = i > j && v >= nadir + 200;
        let plan = if rising {
            "Rising PSA, salvage options discussed."
        } else {
            "Continue surveillance."
        };
        let id = c.note(NoteType::Urology, d, format!("Urology follow-up. {}. {plan}", psa(v)));
        if rising {
            evidence.push(id);
        }
    }
    for m in [3, 12] {
        let d = jitter(c.rng, end, m);
        c.note(
            NoteType::RadiationOncology,
            d,
            format!("Follow-up {m} months after prostate radiotherapy. Mild urinary frequency. PSA trend reviewed with urology."),
        );
    }
    if psa_positive {
        let d = jitter(c.rng, end, 3 + 6 * k as i64);
        c.radiology(d, "Bone scan: no osseous metastatic disease.".into());
        if c.rng.gen_bool(0.3) {
            c.course("PBED", &[PROSTATE.0], &["PBED_SALV"], RadiationType::Photon, days(d, 40), 45);
        }
    }
    if biopsy_mode {
        let d = jitter(c.rng, end, 30);
        c.radiology(d, "MRI pelvis: enhancing nodule at the left base.".into());
        evidence.push(c.pathology(
            days(d, 14),
            "Prostate biopsy: biopsy-proven recurrent adenocarcinoma at the left base, Gleason 4+3=7.".into(),
        ));
    }
    evidence
}

/// Unlabeled patients with one to three courses across several sites.
fn tier1_patient(c: &mut Chart) -> Sex {
    let mut sex = if c.rng.gen_bool(0.6) { Sex::Male } else { Sex::Female };
    let n_courses = *[1usize, 1, 1, 1, 1, 1, 1, 2, 2, 3].choose(c.rng).expect("counts");
    let mut date = start_date(c.rng);
    for _ in 0..n_courses {
        let site = c.rng.gen_range(0..5);
        let (tag, icds, plans, rtype, dx): (&str, Vec<&str>, Vec<&str>, RadiationType, (&str, &str)) = match site {
            0 => {
                let &(code, desc, _) = HN_SITES.choose(c.rng).expect("sites");
                let rt = hn_type(c.rng);
                (
                    "HN",
                    vec![code, HN_NODES.0],
                    vec!["HN_PTV70", "HN_NODES"],
                    rt,
                    (code, desc),
                )
            }
            1 => {
                sex = Sex::Male;
                let rt = if c.rng.gen_bool(0.3) {
                    RadiationType::Proton
                } else {
                    RadiationType::Photon
                };
                let plans = if c.rng.gen_bool(0.5) { vec!["PROS_SBRT"] } else { vec!["PROS_PTV", "PELVIC_NODES"] };
                ("PROS", vec![PROSTATE.0], plans, rt, PROSTATE)
            }
            2 => (
                "SKIN",
                vec!["C44.311"],
                vec!["SKIN_NOSE"],
                RadiationType::Electron,
                ("C44.311", "Basal cell carcinoma of skin of nose"),
            ),
            3 => {
                let rt = if c.rng.gen_bool(0.5) {
                    RadiationType::Proton
                } else {
                    RadiationType::Photon
                };
                (
                    "BRAIN",
                    vec!["C71.9"],
                    vec!["BRAIN_PTV", "BRAIN_BOOST"],
                    rt,
                    ("C71.9", "Malignant neoplasm of brain, unspecified"),
                )
            }
            _ => (
                "LUNG",
                vec!["C34.90"],
                vec!["LUNG_SBRT"],
                RadiationType::Photon,
                (
                    "C34.90",
                    "Malignant neoplasm of unspecified part of unspecified bronchus or lung",
                ),
            ),
        };
        c.diagnosis(dx, date);
        c.note(
            NoteType::RadiationOncology,
            days(date, 10),
            format!("Radiation oncology consultation for {}.", dx.1.to_lowercase()),
        );
        let start = days(date, c.rng.gen_range(20..50));
        let end = c.course(tag, &icds, &plans, rtype, start, 35);
        date = days(end, c.rng.gen_range(200..900));
    }
    sex
}

fn build_patient(task: CohortTask, pid: &str, positive: bool, rng: &mut ChaCha8Rng) -> Built {
    let mut c = Chart::new(rng, pid);
    let (sex, stage, evidence) = match task {
        CohortTask::Tier1Qa => {
            let sex = tier1_patient(&mut c);
            (sex, None, Vec::new())
        }
        CohortTask::Orn => {
            let sex = if c.rng.gen_bool(0.75) { Sex::Male } else { Sex::Female };
            let (stage, ev) = orn_patient(&mut c, positive);
            (sex, stage, ev)
        }
        CohortTask::HnRecurrence => {
            let sex = if c.rng.gen_bool(0.75) { Sex::Male } else { Sex::Female };
            (sex, None, hn_recurrence_patient(&mut c, positive))
        }
        CohortTask::ProstateRecurrence => (Sex::Male, None, prostate_patient(&mut c, positive)),
    };
    Built {
        record: c.finish(sex),
        stage,
        evidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::Store;
    use crate::synth::oracle::oracle_label;

    #[test]
    fn truth_matches_the_keyword_oracle() {
        for task in CohortTask::ALL {
            let cohort = generate_cohort(&CohortSpec::default_for(task)).unwrap();
            let store = Store::from_records(cohort.records.clone()).unwrap();
            for t in &cohort.truth {
                let rec = store.patient(&t.patient_id).unwrap();
                match oracle_label(rec, task) {
                    None => assert!(t.true_label.is_none()),
                    Some(o) => {
                        assert_eq!(Some(o.positive), t.true_label, "{}", t.patient_id);
                        assert_eq!(o.stage, t.true_stage, "{}", t.patient_id);
                        assert_eq!(o.evidence, t.evidence_doc_ids, "{}", t.patient_id);
                    }
                }
            }
        }
    }

    #[test]
    fn flags_land_on_the_right_side() {
        let spec = CohortSpec::default_for(CohortTask::Orn);
        let cohort = generate_cohort(&spec).unwrap();
        let count = |flag: Flag, baseline: bool| {
            cohort
                .truth
                .iter()
                .filter(|t| t.flag == Some(flag) && t.baseline_label == Some(baseline))
                .count()
        };
        assert_eq!(count(Flag::GtError, false), 18);
        assert_eq!(count(Flag::ModelError, false), 11);
        assert_eq!(count(Flag::Indeterminate, false), 3);
        assert_eq!(count(Flag::GtError, true), 3);
        assert_eq!(count(Flag::Indeterminate, true), 1);
        let positives = cohort.truth.iter().filter(|t| t.baseline_label == Some(true)).count();
        assert_eq!(positives, 34);
    }

    #[test]
    fn unplanted_cohort_agrees_everywhere() {
        let mut spec = CohortSpec::default_for(CohortTask::Orn);
        spec.planted = Default::default();
        let cohort = generate_cohort(&spec).unwrap();
        assert!(cohort
            .truth
            .iter()
            .all(|t| t.true_label == t.baseline_label && t.model_label() == t.true_label));
        assert_eq!(cohort.truth.iter().filter(|t| t.true_label == Some(true)).count(), 34);
    }

    #[test]
    fn same_seed_same_cohort() {
        let spec = CohortSpec::default_for(CohortTask::ProstateRecurrence);
        assert_eq!(generate_cohort(&spec).unwrap(), generate_cohort(&spec).unwrap());
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(generate_cohort(&spec).unwrap().records, generate_cohort(&other).unwrap().records);
    }

    #[test]
    fn infeasible_spec() {
        let mut spec = CohortSpec::default_for(CohortTask::HnRecurrence);
        spec.n_negative = 2;
        assert!(matches!(generate_cohort(&spec), Err(SynthError::InfeasibleSpec(_))));
    }

    #[test]
    fn empty_spec_gives_empty_cohort() {
        let spec = CohortSpec {
            task: CohortTask::Orn,
            n_positive: 0,
            n_negative: 0,
            seed: 1,
            planted: Default::default(),
        };
        let c = generate_cohort(&spec).unwrap();
        assert!(c.records.is_empty() && c.truth.is_empty());
    }

    #[test]
    fn model_answer_follows_flags() {
        let row = |flag, truth: bool| TruthRow {
            patient_id: "X".into(),
            task: CohortTask::Orn,
            true_label: Some(truth),
            true_stage: Some(if truth { 2 } else { 0 }),
            baseline_label: Some(truth),
            flag,
            evidence_doc_ids: vec![],
        };
        assert_eq!(row(None, true).model_stage(), Some(2));
        assert_eq!(row(Some(Flag::ModelError), true).model_label(), Some(false));
        assert_eq!(row(Some(Flag::ModelError), false).model_stage(), Some(1));
        assert_eq!(row(Some(Flag::GtError), false).model_label(), Some(false));
    }
}
