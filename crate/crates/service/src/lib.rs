//! Adjudication service: serves the discrepancy queue of a finished run,
//! takes reviewer verdicts into an append-only JSONL log and reports
//! before/after metrics.

mod http;
mod sections;
mod state;

pub use http::{router, serve, AppState};
pub use sections::{concluding_remarks, split_sections, Section};
pub use state::{
    read_log, Ack, DiscrepancyItem, MetricsSide, MetricsView, RunSource, ServiceConfig, ServiceError, ServiceState,
    VerdictInput,
};
