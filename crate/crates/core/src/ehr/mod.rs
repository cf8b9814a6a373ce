//! File-backed synthetic patient store.
//!
//! One JSON file per patient (`<patient_id>.json`, version tag `ehr-store/1`)
//! holding `demographics`, `courses`, `diagnoses` and timestamped `documents`,
//! plus optional `appointments` and `inbasket_messages`. The store is loaded
//! once and never mutated; retrieval renders records as labeled text, newest
//! first, behind a `number of records count: N` header.

mod model;
mod store;

pub use model::*;
pub use store::{
    patient_file_json, write_patient_file, FunctionResult, Malformation, RecordKind, RetrievalFilter,
    RetrieveError, Store, StoreError, RECORDS_HEADER, RECORD_MARKER,
};
