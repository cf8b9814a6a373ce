use crate::eval::{ConfusionMatrix, EvalTask};
use crate::streamer::TaskName;
use serde::{Deserialize, Serialize};
use std::fmt;

/// What a synthetic cohort is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortTask {
    Tier1Qa,
    Orn,
    ProstateRecurrence,
    HnRecurrence,
}

impl CohortTask {
    pub const ALL: [CohortTask; 4] = [
        CohortTask::Tier1Qa,
        CohortTask::Orn,
        CohortTask::ProstateRecurrence,
        CohortTask::HnRecurrence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CohortTask::Tier1Qa => "tier1_qa",
            CohortTask::Orn => "orn",
            CohortTask::ProstateRecurrence => "prostate_recurrence",
            CohortTask::HnRecurrence => "hn_recurrence",
        }
    }

    pub fn parse(s: &str) -> Option<CohortTask> {
        CohortTask::ALL.into_iter().find(|t| t.as_str() == s.trim())
    }

    pub fn id_prefix(self) -> &'static str {
        match self {
            CohortTask::Tier1Qa => "QA",
            CohortTask::Orn => "ORN",
            CohortTask::ProstateRecurrence => "PRC",
            CohortTask::HnRecurrence => "HNR",
        }
    }

    pub fn eval_task(self) -> Option<EvalTask> {
        match self {
            CohortTask::Tier1Qa => None,
            CohortTask::Orn => Some(EvalTask::Orn),
            CohortTask::ProstateRecurrence => Some(EvalTask::ProstateRecurrence),
            CohortTask::HnRecurrence => Some(EvalTask::HnRecurrence),
        }
    }

    pub fn prompt_task(self) -> TaskName {
        match self.eval_task() {
            Some(t) => t.prompt_task(),
            None => TaskName::Tier1Qa,
        }
    }

    fn index(self) -> u64 {
        CohortTask::ALL.iter().position(|t| *t == self).unwrap() as u64
    }
}

impl From<EvalTask> for CohortTask {
    fn from(t: EvalTask) -> Self {
        match t {
            EvalTask::Orn => CohortTask::Orn,
            EvalTask::ProstateRecurrence => CohortTask::ProstateRecurrence,
            EvalTask::HnRecurrence => CohortTask::HnRecurrence,
        }
    }
}

impl fmt::Display for CohortTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Planted cases on each side of the baseline. `false_positive` cases have a
/// negative baseline label and a positive model answer; `false_negative` the reverse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCounts {
    pub false_positive: usize,
    pub false_negative: usize,
}

impl SideCounts {
    pub const fn new(false_positive: usize, false_negative: usize) -> Self {
        SideCounts {
            false_positive,
            false_negative,
        }
    }

    pub fn total(&self) -> usize {
        self.false_positive + self.false_negative
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCounts {
    pub ground_truth_error: SideCounts,
    pub model_error: SideCounts,
    pub indeterminate: SideCounts,
}

impl PlantedCounts {
    pub fn false_positive_total(&self) -> usize {
        self.ground_truth_error.false_positive + self.model_error.false_positive + self.indeterminate.false_positive
    }

    pub fn false_negative_total(&self) -> usize {
        self.ground_truth_error.false_negative + self.model_error.false_negative + self.indeterminate.false_negative
    }

    pub fn total(&self) -> usize {
        self.false_positive_total() + self.false_negative_total()
    }
}

/// Size, baseline label split and planted discrepancies of one cohort.
/// `n_positive` and `n_negative` count baseline labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub task: CohortTask,
    pub n_positive: usize,
    pub n_negative: usize,
    pub seed: u64,
    #[serde(default)]
    pub planted: PlantedCounts,
}

pub const DEFAULT_SEED: u64 = 7;

impl CohortSpec {
    /// The reference cohort for a task. Tier-1 cohorts have 500 unlabeled patients.
    pub fn default_for(task: CohortTask) -> CohortSpec {
        let (n_positive, n_negative, planted) = match task {
            CohortTask::Tier1Qa => (0, 500, PlantedCounts::default()),
            CohortTask::Orn => (
                34,
                199,
                PlantedCounts {
                    ground_truth_error: SideCounts::new(18, 3),
                    model_error: SideCounts::new(11, 0),
                    indeterminate: SideCounts::new(3, 1),
                },
            ),
            CohortTask::ProstateRecurrence => (
                38,
                42,
                PlantedCounts {
                    ground_truth_error: SideCounts::new(2, 0),
                    model_error: SideCounts::new(1, 3),
                    indeterminate: SideCounts::new(0, 0),
                },
            ),
            CohortTask::HnRecurrence => (
                47,
                35,
                PlantedCounts {
                    ground_truth_error: SideCounts::new(1, 1),
                    model_error: SideCounts::new(2, 1),
                    indeterminate: SideCounts::new(1, 0),
                },
            ),
        };
        CohortSpec {
            task,
            n_positive,
            n_negative,
            seed: DEFAULT_SEED,
            planted,
        }
    }

    pub fn size(&self) -> usize {
        self.n_positive + self.n_negative
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.task == CohortTask::Tier1Qa && (self.n_positive > 0 || self.planted.total() > 0) {
            return Err("tier-1 cohorts carry no labels or planted cases".into());
        }
        let fp = self.planted.false_positive_total();
        if fp > self.n_negative {
            return Err(format!(
                "{fp} planted false positives need baseline negatives, only {} exist",
                self.n_negative
            ));
        }
        let fn_ = self.planted.false_negative_total();
        if fn_ > self.n_positive {
            return Err(format!(
                "{fn_} planted false negatives need baseline positives, only {} exist",
                self.n_positive
            ));
        }
        Ok(())
    }

    /// Counts against the baseline when every unplanted case agrees with it.
    pub fn expected_before(&self) -> ConfusionMatrix {
        let (fp, fn_) = (self.planted.false_positive_total(), self.planted.false_negative_total());
        ConfusionMatrix::new(
            (self.n_positive - fn_) as u64,
            fp as u64,
            fn_ as u64,
            (self.n_negative - fp) as u64,
        )
    }

    /// Counts once every planted case carries its matching verdict.
    pub fn expected_after(&self) -> ConfusionMatrix {
        let p = &self.planted;
        let before = self.expected_before();
        ConfusionMatrix::new(
            before.tp + p.ground_truth_error.false_positive as u64,
            p.model_error.false_positive as u64,
            p.model_error.false_negative as u64,
            before.tn + p.ground_truth_error.false_negative as u64,
        )
    }

    /// Per-cohort RNG seed.
    pub(crate) fn stream_seed(&self) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.task.index() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cohorts_add_up() {
        let orn = CohortSpec::default_for(CohortTask::Orn);
        assert_eq!(orn.size(), 233);
        assert_eq!(orn.expected_before(), ConfusionMatrix::new(30, 32, 4, 167));
        assert_eq!(orn.expected_after(), ConfusionMatrix::new(48, 11, 0, 170));
        let prc = CohortSpec::default_for(CohortTask::ProstateRecurrence);
        assert_eq!(prc.size(), 80);
        assert_eq!(prc.expected_after(), ConfusionMatrix::new(37, 1, 3, 39));
        let hnr = CohortSpec::default_for(CohortTask::HnRecurrence);
        assert_eq!(hnr.size(), 82);
        assert_eq!(hnr.expected_after(), ConfusionMatrix::new(46, 2, 1, 32));
        for t in CohortTask::ALL {
            CohortSpec::default_for(t).validate().unwrap();
        }
    }

    #[test]
    fn too_many_plants_on_one_side() {
        let mut s = CohortSpec::default_for(CohortTask::Orn);
        s.planted.model_error.false_negative = 40;
        assert!(s.validate().unwrap_err().contains("false negatives"));
    }

    #[test]
    fn spec_round_trips() {
        let s = CohortSpec::default_for(CohortTask::HnRecurrence);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<CohortSpec>(&text).unwrap(), s);
        assert_eq!(CohortTask::parse("hn_recurrence"), Some(CohortTask::HnRecurrence));
    }
}
