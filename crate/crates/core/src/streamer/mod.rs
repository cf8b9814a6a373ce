//! Cohort orchestration: prompt rendering, bounded-concurrency agent runs,
//! structured answer extraction and run artifacts.

mod artifacts;
mod extract;
mod prompt;
mod run;
mod schema;

pub use artifacts::{
    file_stem, label_columns, raw_output_path, read_results, results_header, transcript_path, write_results, write_run,
    ArtifactError, RunInfo, StoredResult, MANIFEST_FILE, OUTPUTS_DIR, RESULTS_FILE, RUN_STATS_FILE, TIMINGS_FILE,
    TRANSCRIPTS_DIR,
};
pub use extract::{extract_structured, ExtractError};
pub use prompt::{render_prompt, PromptError, TaskName, TaskSpec, PLACEHOLDER};
pub use run::{records_retrieved, run_cohort, CohortDeps, CohortRun, TaskResult, TaskStatus, UNCOUNTED_FUNCTIONS};
pub use schema::{
    validate_output, CourseAnswer, Label, SchemaViolation, Tier1Answer, RADIATION_TYPES, TIER1_DEMOGRAPHIC_FIELDS,
};
