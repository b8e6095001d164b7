//! Ledger and config file formats.
//!
//! The ledger file is JSON-lines, one donation per line:
//! `{"donor": "...", "unit": "...", "amount_pence": 21000,
//! "accepted_quarter": 1}`. The line number is the donation's
//! `recorded_seq`. The config file is a single JSON document holding the
//! thresholds and the unit registry.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::model::{Config, Ledger, ModelError, Quarter};
use crate::money::Money;

/// One parsed ledger line, before canonicalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerLine {
    pub donor: String,
    pub unit: String,
    pub amount_pence: u64,
    pub accepted_quarter: u8,
}

/// Parses JSON-lines ledger input. Blank lines are skipped; malformed
/// lines fail with their 1-based line number.
pub fn read_ledger_lines<R: BufRead>(reader: R) -> Result<Vec<LedgerLine>, ModelError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| ModelError::LedgerLine {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LedgerLine =
            serde_json::from_str(&line).map_err(|e| ModelError::LedgerLine {
                line: lineno,
                message: e.to_string(),
            })?;
        out.push(parsed);
    }
    Ok(out)
}

/// Appends parsed lines to a ledger, reporting the offending line number
/// on validation failures (unknown unit, zero amount, bad quarter).
pub fn append_lines(
    ledger: &mut Ledger,
    lines: &[LedgerLine],
    first_line_number: usize,
) -> Result<(), ModelError> {
    for (offset, line) in lines.iter().enumerate() {
        let lineno = first_line_number + offset;
        let quarter = Quarter::new(line.accepted_quarter).map_err(|e| {
            ModelError::LedgerLine { line: lineno, message: e.to_string() }
        })?;
        ledger
            .append(
                line.donor.as_str(),
                line.unit.as_str(),
                Money::from_pence(line.amount_pence),
                quarter,
            )
            .map_err(|e| ModelError::LedgerLine { line: lineno, message: e.to_string() })?;
    }
    Ok(())
}

/// Builds a ledger from config plus JSON-lines input.
pub fn load_ledger<R: BufRead>(
    year: &str,
    config: Config,
    reader: R,
) -> Result<Ledger, ModelError> {
    let lines = read_ledger_lines(reader)?;
    let mut ledger = Ledger::new(year, config)?;
    append_lines(&mut ledger, &lines, 1)?;
    Ok(ledger)
}

/// Serializes one donation line.
pub fn ledger_line_json(line: &LedgerLine) -> String {
    serde_json::to_string(line).expect("ledger line serialization")
}

/// Parses and validates a config document.
pub fn parse_config(json: &str) -> Result<Config, ModelError> {
    let config: Config = serde_json::from_str(json)
        .map_err(|e| ModelError::Config { message: e.to_string() })?;
    config.build_registry()?;
    Ok(config)
}
