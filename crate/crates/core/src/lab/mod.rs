//! Verification of the quantitative inequalities of small CAT(κ) spaces.
//!
//! Every check evaluates both sides of one inequality on one instance and
//! returns a [`CheckReport`]; [`sweep`] runs seeded families of instances.

mod checks;
mod report;
pub mod sweep;

pub use checks::*;
pub use report::{write_csv, write_json_lines, CheckReport, CSV_HEADER};
pub use sweep::{run_sweep, CheckKind, SweepConfig, SweepSummary};
