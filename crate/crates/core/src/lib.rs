//! Donation recording and statutory quarterly reporting.
//!
//! A deterministic engine over a one-year donation ledger. Every quarter,
//! each (donor, unit) pair takes one of three speech acts — carry forward
//! (`c`), report under Section 62(12) (`s`), or report quarterly (`r`) —
//! driven by strict threshold predicates over asymmetric per-unit and
//! national accumulators. Act words over a year always fall in the
//! 15-word grammar `c*s*r*`.
//!
//! The crate is organised around that pipeline:
//!
//! * [`money`] / [`model`] — exact pence arithmetic, units, thresholds,
//!   and the append-only ledger;
//! * [`engine`] — the predicates, per-quarter classification, and the
//!   four statutory report kinds, recomputed from scratch on every close;
//! * [`report`] — report files, CSV export, and amendment diffs for
//!   backdated donations;
//! * [`path`] — the path grammar and its hex numbering;
//! * [`lts`] — act-decide labelled transition systems that accept engine
//!   traces;
//! * [`coverage`] — the exhaustive scenario harness and its certificate.

pub mod coverage;
pub mod engine;
pub mod io;
pub mod lts;
pub mod model;
pub mod money;
pub mod path;
pub mod report;

pub use engine::{classify_year, EngineError, YearClassification};
pub use model::{Config, Donation, DonorId, Ledger, ModelError, Quarter, UnitId};
pub use money::Money;
pub use path::{Act, PathName};
