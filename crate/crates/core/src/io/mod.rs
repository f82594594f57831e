//! Run configuration, CSV tables and result bundles with a JSON metadata sidecar.

pub mod bundle;
pub mod config;
pub mod table;

pub use bundle::{FileEntry, Metadata, ResultBundle};
pub use config::{CircuitBlock, RunConfig, TuneBlock};
pub use table::{emit_csv, emit_json, format_float, read_csv, RawTable, Table, Value};
