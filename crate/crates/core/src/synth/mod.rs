//! Synthetic cohorts with known truth, plus a scripted backend that answers
//! from that truth so whole runs can be replayed without a model.

mod generate;
mod io;
mod oracle;
mod scripted;
mod spec;
mod tier1_bug;

pub use generate::{generate_cohort, Cohort, Flag, SynthError, TruthRow};
pub use io::{
    demo_epoch, demo_verdicts, read_truth_manifest, write_cohort, write_jsonl, write_truth_manifest, BASELINE_FILE,
    DEMO_VERDICTS_FILE, SPEC_FILE, STORE_DIR, TRUTH_FILE,
};
pub use oracle::{oracle_label, psa_values, OracleLabel, ORN_MIN_MONTHS, PSA_RISE_HUNDREDTHS};
pub use scripted::{Behavior, ScriptedBackend};
pub use spec::{CohortSpec, CohortTask, PlantedCounts, SideCounts, DEFAULT_SEED};
pub use tier1_bug::{plant_tier1_bug, truncate_leading_digits, PlantError};
