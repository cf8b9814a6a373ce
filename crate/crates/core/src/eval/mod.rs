//! Tier-1 structured comparison, tier-2 confusion metrics and
//! adjudication-aware before/after reporting.

mod cases;
mod metrics;
mod report;
mod tier1;

pub use cases::{
    active_verdicts, apply_adjudication, confusion, confusion_before, list_discrepancies, verdict_counts,
    AdjudicationError, AdjudicationVerdict, EvalTask, LabeledCase, Truth, Verdict, VerdictRecord,
};
pub use metrics::{metrics, micro_average, ConfusionMatrix, MetricsReport, Percent};
pub use report::{
    build_cases, build_report, parse_binary, read_baseline, write_baseline, BaselineRow, Block, CaseSet, EvalIoError,
    ReportRow, Table3Report,
};
pub use tier1::{compare_tier1, evaluate_tier1, expected_tier1, DiffKind, Tier1Diff, Tier1Report, Tier1Summary};

use crate::streamer::Label;

/// Binary outcome of a labeling answer.
pub fn positive_of(label: &Label) -> Option<bool> {
    label.positive()
}
