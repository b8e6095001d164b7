//! Report emission and amendment tracking.
//!
//! Each quarter's [`ReportSet`] serializes to one JSON file per report
//! kind plus a flat CSV per kind with columns
//! `(quarter, unit, donor, amount_pence, category)`. Closing a quarter
//! recomputes the whole year and reports entry-level differences against
//! previously persisted quarters as an [`AmendmentDiff`].

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    classify_year, CarriedEntry, EngineError, NullEntry, NullMarker, QuarterlyEntry, ReportSet,
    S62AuditEntry, S62EcEntry,
};
use crate::model::{Ledger, Quarter};

/// The four report kinds a quarter emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    Quarterly,
    S62,
    S62Audit,
    Cf,
}

impl ReportKind {
    pub const ALL: [ReportKind; 4] =
        [ReportKind::Quarterly, ReportKind::S62, ReportKind::S62Audit, ReportKind::Cf];

    pub const fn as_str(self) -> &'static str {
        match self {
            ReportKind::Quarterly => "quarterly",
            ReportKind::S62 => "s62",
            ReportKind::S62Audit => "s62-audit",
            ReportKind::Cf => "cf",
        }
    }

    pub fn parse(s: &str) -> Option<ReportKind> {
        match s {
            "quarterly" => Some(ReportKind::Quarterly),
            "s62" => Some(ReportKind::S62),
            "s62-audit" => Some(ReportKind::S62Audit),
            "cf" => Some(ReportKind::Cf),
            _ => None,
        }
    }
}

/// Flat row category as written to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "R")]
    Quarterly,
    #[serde(rename = "S62")]
    S62,
    #[serde(rename = "CF")]
    CarriedForward,
    #[serde(rename = "CF-annex")]
    CfAnnex,
    #[serde(rename = "NULL-⊥")]
    NullBottom,
    #[serde(rename = "NULL-⊤")]
    NullTop,
    #[serde(rename = "NULL-σ")]
    NullSigma,
}

impl Category {
    pub const fn as_str(self) -> &'static str {
        match self {
            Category::Quarterly => "R",
            Category::S62 => "S62",
            Category::CarriedForward => "CF",
            Category::CfAnnex => "CF-annex",
            Category::NullBottom => "NULL-⊥",
            Category::NullTop => "NULL-⊤",
            Category::NullSigma => "NULL-σ",
        }
    }

    fn for_marker(marker: NullMarker) -> Category {
        match marker {
            NullMarker::Bottom => Category::NullBottom,
            NullMarker::Top => Category::NullTop,
            NullMarker::Sigma => Category::NullSigma,
        }
    }
}

/// One flat report row; the diff and CSV representations share it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReportRow {
    pub quarter: u8,
    pub kind: ReportKind,
    pub category: Category,
    pub unit: String,
    pub donor: String,
    pub amount_pence: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seq: Option<u64>,
}

/// Flattens one report kind of a set into rows. Section 62(12) EC
/// aggregate rows carry the virtual unit's id.
pub fn rows_for_kind(set: &ReportSet, kind: ReportKind, virtual_unit: &str) -> Vec<ReportRow> {
    let q = set.quarter.index();
    let mut rows = Vec::new();
    match kind {
        ReportKind::Quarterly => {
            for entry in &set.quarterly {
                for d in &entry.donations {
                    rows.push(ReportRow {
                        quarter: q,
                        kind,
                        category: Category::Quarterly,
                        unit: entry.unit.to_string(),
                        donor: entry.donor.to_string(),
                        amount_pence: d.amount.pence(),
                        seq: Some(d.seq),
                    });
                }
            }
            push_null_rows(&mut rows, set, kind, NullMarker::Top);
        }
        ReportKind::S62 => {
            for entry in &set.s62_ec {
                rows.push(ReportRow {
                    quarter: q,
                    kind,
                    category: Category::S62,
                    unit: virtual_unit.to_string(),
                    donor: entry.donor.to_string(),
                    amount_pence: entry.aggregate.pence(),
                    seq: None,
                });
            }
            push_null_rows(&mut rows, set, kind, NullMarker::Sigma);
        }
        ReportKind::S62Audit => {
            for entry in &set.s62_audit {
                for c in &entry.constituents {
                    rows.push(ReportRow {
                        quarter: q,
                        kind,
                        category: Category::S62,
                        unit: c.unit.to_string(),
                        donor: entry.donor.to_string(),
                        amount_pence: c.amount.pence(),
                        seq: Some(c.seq),
                    });
                }
            }
        }
        ReportKind::Cf => {
            for entry in &set.carried_forward {
                for d in &entry.donations {
                    rows.push(ReportRow {
                        quarter: q,
                        kind,
                        category: Category::CarriedForward,
                        unit: entry.unit.to_string(),
                        donor: entry.donor.to_string(),
                        amount_pence: d.amount.pence(),
                        seq: Some(d.seq),
                    });
                }
            }
            for entry in &set.cf_annex {
                for d in &entry.donations {
                    rows.push(ReportRow {
                        quarter: q,
                        kind,
                        category: Category::CfAnnex,
                        unit: entry.unit.to_string(),
                        donor: entry.donor.to_string(),
                        amount_pence: d.amount.pence(),
                        seq: Some(d.seq),
                    });
                }
            }
            push_null_rows(&mut rows, set, kind, NullMarker::Bottom);
        }
    }
    rows.sort();
    rows
}

fn push_null_rows(rows: &mut Vec<ReportRow>, set: &ReportSet, kind: ReportKind, want: NullMarker) {
    for n in set.nulls.iter().filter(|n| n.marker == want) {
        rows.push(ReportRow {
            quarter: set.quarter.index(),
            kind,
            category: Category::for_marker(n.marker),
            unit: n.unit.to_string(),
            donor: n.donor.to_string(),
            amount_pence: 0,
            seq: None,
        });
    }
}

/// All rows of a set across the four kinds.
pub fn all_rows(set: &ReportSet, virtual_unit: &str) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for kind in ReportKind::ALL {
        rows.extend(rows_for_kind(set, kind, virtual_unit));
    }
    rows.sort();
    rows
}

/// Renders one report kind as CSV.
pub fn report_csv(set: &ReportSet, kind: ReportKind, virtual_unit: &str) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["quarter", "unit", "donor", "amount_pence", "category"])
        .expect("csv header");
    for row in rows_for_kind(set, kind, virtual_unit) {
        writer
            .write_record([
                row.quarter.to_string(),
                row.unit,
                row.donor,
                row.amount_pence.to_string(),
                row.category.as_str().to_string(),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
}

// Per-kind JSON file payloads. A quarter's four files reassemble into the
// original ReportSet, which is what the round-trip tests check.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuarterlyFile {
    quarter: Quarter,
    entries: Vec<QuarterlyEntry>,
    nulls: Vec<NullEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct S62File {
    quarter: Quarter,
    entries: Vec<S62EcEntry>,
    nulls: Vec<NullEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct S62AuditFile {
    quarter: Quarter,
    entries: Vec<S62AuditEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CfFile {
    quarter: Quarter,
    entries: Vec<CarriedEntry>,
    annex: Vec<CarriedEntry>,
    nulls: Vec<NullEntry>,
}

fn nulls_for(set: &ReportSet, marker: NullMarker) -> Vec<NullEntry> {
    set.nulls.iter().filter(|n| n.marker == marker).cloned().collect()
}

/// JSON payload for one report kind.
pub fn report_kind_json(set: &ReportSet, kind: ReportKind) -> serde_json::Value {
    match kind {
        ReportKind::Quarterly => serde_json::to_value(QuarterlyFile {
            quarter: set.quarter,
            entries: set.quarterly.clone(),
            nulls: nulls_for(set, NullMarker::Top),
        }),
        ReportKind::S62 => serde_json::to_value(S62File {
            quarter: set.quarter,
            entries: set.s62_ec.clone(),
            nulls: nulls_for(set, NullMarker::Sigma),
        }),
        ReportKind::S62Audit => serde_json::to_value(S62AuditFile {
            quarter: set.quarter,
            entries: set.s62_audit.clone(),
        }),
        ReportKind::Cf => serde_json::to_value(CfFile {
            quarter: set.quarter,
            entries: set.carried_forward.clone(),
            annex: set.cf_annex.clone(),
            nulls: nulls_for(set, NullMarker::Bottom),
        }),
    }
    .expect("report serialization")
}

fn report_file_name(quarter: Quarter, kind: ReportKind, ext: &str) -> String {
    format!("q{}.{}.{}", quarter.index(), kind.as_str(), ext)
}

/// Writes the quarter's four JSON files and four CSV files into `dir`.
pub fn write_report_files(
    dir: &Path,
    set: &ReportSet,
    virtual_unit: &str,
) -> Result<Vec<PathBuf>, ReportIoError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for kind in ReportKind::ALL {
        let json_path = dir.join(report_file_name(set.quarter, kind, "json"));
        let payload = report_kind_json(set, kind);
        fs::write(&json_path, serde_json::to_string_pretty(&payload)? + "\n")?;
        written.push(json_path);

        let csv_path = dir.join(report_file_name(set.quarter, kind, "csv"));
        fs::write(&csv_path, report_csv(set, kind, virtual_unit))?;
        written.push(csv_path);
    }
    Ok(written)
}

/// Reassembles a quarter's ReportSet from its four JSON files.
pub fn read_report_set(dir: &Path, quarter: Quarter) -> Result<ReportSet, ReportIoError> {
    let read = |kind: ReportKind| -> Result<String, ReportIoError> {
        Ok(fs::read_to_string(dir.join(report_file_name(quarter, kind, "json")))?)
    };
    let quarterly: QuarterlyFile = serde_json::from_str(&read(ReportKind::Quarterly)?)?;
    let s62: S62File = serde_json::from_str(&read(ReportKind::S62)?)?;
    let audit: S62AuditFile = serde_json::from_str(&read(ReportKind::S62Audit)?)?;
    let cf: CfFile = serde_json::from_str(&read(ReportKind::Cf)?)?;

    let mut nulls = Vec::new();
    nulls.extend(quarterly.nulls);
    nulls.extend(s62.nulls);
    nulls.extend(cf.nulls);
    nulls.sort_by(|a, b| (&a.unit, &a.donor, a.marker).cmp(&(&b.unit, &b.donor, b.marker)));

    Ok(ReportSet {
        quarter,
        quarterly: quarterly.entries,
        s62_ec: s62.entries,
        s62_audit: audit.entries,
        carried_forward: cf.entries,
        cf_annex: cf.annex,
        nulls,
    })
}

/// Entry-level differences between previously persisted report sets and a
/// recomputation: rows present only in the recomputation are `added`, rows
/// that disappeared are `removed`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmendmentDiff {
    pub added: Vec<ReportRow>,
    pub removed: Vec<ReportRow>,
}

impl AmendmentDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Multiset difference between two report sets' rows.
pub fn diff_report_sets(old: &ReportSet, new: &ReportSet, virtual_unit: &str) -> AmendmentDiff {
    let mut counts: BTreeMap<ReportRow, i64> = BTreeMap::new();
    for row in all_rows(new, virtual_unit) {
        *counts.entry(row).or_insert(0) += 1;
    }
    for row in all_rows(old, virtual_unit) {
        *counts.entry(row).or_insert(0) -= 1;
    }
    let mut diff = AmendmentDiff::default();
    for (row, count) in counts {
        if count > 0 {
            for _ in 0..count {
                diff.added.push(row.clone());
            }
        } else if count < 0 {
            for _ in 0..(-count) {
                diff.removed.push(row.clone());
            }
        }
    }
    diff
}

/// Stateful quarter-close driver: persists each close's report sets so the
/// next close can report amendments caused by backdated donations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QuarterCloser {
    persisted: BTreeMap<u8, ReportSet>,
}

impl QuarterCloser {
    pub fn new() -> QuarterCloser {
        QuarterCloser::default()
    }

    pub fn restore(sets: Vec<ReportSet>) -> QuarterCloser {
        QuarterCloser {
            persisted: sets.into_iter().map(|s| (s.quarter.index(), s)).collect(),
        }
    }

    pub fn closed_through(&self) -> u8 {
        self.persisted.keys().max().copied().unwrap_or(0)
    }

    pub fn persisted(&self, quarter: Quarter) -> Option<&ReportSet> {
        self.persisted.get(&quarter.index())
    }

    pub fn persisted_sets(&self) -> Vec<ReportSet> {
        self.persisted.values().cloned().collect()
    }

    /// Closes `quarter`: recomputes the year, diffs the previously
    /// persisted quarters before it, persists the recomputation through
    /// `quarter`, and returns the quarter's report set plus the diff.
    ///
    /// Quarters 1..q-1 must already be closed.
    pub fn close_quarter(
        &mut self,
        ledger: &Ledger,
        quarter: Quarter,
    ) -> Result<(ReportSet, AmendmentDiff), EngineError> {
        let closed = self.closed_through();
        if quarter.index() > closed + 1 {
            return Err(EngineError::CloseOrder { closed_through: closed, requested: quarter });
        }
        let classification = classify_year(ledger)?;
        let virtual_unit = ledger.registry().virtual_unit().id.to_string();

        let mut diff = AmendmentDiff::default();
        for prior in Quarter::all().into_iter().filter(|p| *p < quarter) {
            let recomputed = classification.report(prior);
            if let Some(old) = self.persisted.get(&prior.index()) {
                let d = diff_report_sets(old, recomputed, &virtual_unit);
                diff.added.extend(d.added);
                diff.removed.extend(d.removed);
            }
        }
        diff.added.sort();
        diff.removed.sort();

        for p in Quarter::all().into_iter().filter(|p| *p <= quarter) {
            self.persisted.insert(p.index(), classification.report(p).clone());
        }
        Ok((classification.report(quarter).clone(), diff))
    }
}

#[derive(Debug, Error)]
pub enum ReportIoError {
    #[error("report file i/o: {0}")]
    Io(#[from] io::Error),

    #[error("report file parse: {0}")]
    Json(#[from] serde_json::Error),
}
