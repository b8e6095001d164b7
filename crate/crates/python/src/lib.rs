//! Python bindings: the donation ledger, year classification, path
//! algebra, and the coverage proof, importable as `ppera_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ppera_core::coverage;
use ppera_core::engine::{classify_year, EngineError};
use ppera_core::io::parse_config;
use ppera_core::lts::audonor_path_chart;
use ppera_core::model::{Ledger as CoreLedger, ModelError, Quarter};
use ppera_core::money::Money;
use ppera_core::path::{self, PathName};
use ppera_core::report::{report_csv, QuarterCloser, ReportKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn engine_err(e: EngineError) -> PyErr {
    match e {
        EngineError::CloseOrder { .. } | EngineError::UnknownUnit { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn model_err(e: ModelError) -> PyErr {
    value_err(e)
}

/// The 15 permissible path names as (hex, word) pairs in canonical order.
#[pyfunction]
fn paths() -> Vec<(u8, String)> {
    path::enumerate_paths().into_iter().map(|p| (p.hex(), p.word())).collect()
}

/// Whether a 4-letter word over c/s/r is in the path grammar.
#[pyfunction]
fn is_permissible(word: &str) -> PyResult<bool> {
    path::is_permissible(word).map_err(value_err)
}

/// Hex code (1..=15) of a permissible path word.
#[pyfunction]
fn path_hex(word: &str) -> PyResult<u8> {
    Ok(PathName::from_word(word).map_err(value_err)?.hex())
}

/// Path word for a hex code 1..=15.
#[pyfunction]
fn path_word(hex: u8) -> PyResult<String> {
    Ok(PathName::from_hex(hex).map_err(value_err)?.word())
}

/// Permitted scenarios as (label, ho_word, clp_word) rows.
#[pyfunction]
fn scenarios() -> Vec<(String, String, String)> {
    coverage::enumerate_scenarios()
        .into_iter()
        .map(|s| (s.label(), s.ho.word(), s.clp.word()))
        .collect()
}

/// The 30-vector table as (role, word, hex, amounts_pence) rows; a null
/// quarter is None.
#[pyfunction]
fn vectors() -> Vec<(String, String, u8, [Option<u64>; 4])> {
    coverage::vector_table()
        .into_iter()
        .map(|v| {
            let amounts = [
                v.amounts[0].map(Money::pence),
                v.amounts[1].map(Money::pence),
                v.amounts[2].map(Money::pence),
                v.amounts[3].map(Money::pence),
            ];
            (v.role.to_string(), v.path.word(), v.path.hex(), amounts)
        })
        .collect()
}

/// The built-in harness config as JSON.
#[pyfunction]
fn harness_config_json() -> String {
    serde_json::to_string_pretty(&coverage::harness_config()).expect("config serialization")
}

/// Checks an engine trace (JSON with word/delta/delta_star) against the
/// AUdonor path chart.
#[pyfunction]
fn lts_accepts(trace_json: &str) -> PyResult<bool> {
    let trace: ppera_core::engine::EngineTrace =
        serde_json::from_str(trace_json).map_err(value_err)?;
    Ok(audonor_path_chart().accepts_trace(&trace))
}

/// Result of running the coverage proof.
#[pyclass]
struct CoverageReport {
    #[pyo3(get)]
    valid: bool,
    #[pyo3(get)]
    scenario_count: usize,
    #[pyo3(get)]
    failures: Vec<String>,
    json: String,
}

#[pymethods]
impl CoverageReport {
    /// Full certificate as JSON.
    fn to_json(&self) -> String {
        self.json.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "CoverageReport(valid={}, scenario_count={}, failures={})",
            self.valid,
            self.scenario_count,
            self.failures.len()
        )
    }
}

/// Runs the coverage proof under the harness config (or a JSON config).
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn verify_coverage(config_json: Option<&str>) -> PyResult<CoverageReport> {
    let config = match config_json {
        Some(text) => parse_config(text).map_err(model_err)?,
        None => coverage::harness_config(),
    };
    let certificate = coverage::verify_coverage(&config).map_err(value_err)?;
    Ok(CoverageReport {
        valid: certificate.valid,
        scenario_count: certificate.scenario_count,
        failures: certificate
            .failures()
            .map(|f| format!("{}: {}", f.label, f.failure.as_deref().unwrap_or("mismatch")))
            .collect(),
        json: serde_json::to_string_pretty(&certificate).expect("certificate serialization"),
    })
}

/// A one-year donation ledger with quarter-close state.
#[pyclass]
struct Ledger {
    inner: CoreLedger,
    closer: QuarterCloser,
}

#[pymethods]
impl Ledger {
    /// Creates a ledger; `config_json` defaults to the harness config.
    #[new]
    #[pyo3(signature = (config_json=None, year="2026"))]
    fn new(config_json: Option<&str>, year: &str) -> PyResult<Self> {
        let config = match config_json {
            Some(text) => parse_config(text).map_err(model_err)?,
            None => coverage::harness_config(),
        };
        Ok(Ledger {
            inner: CoreLedger::new(year, config).map_err(model_err)?,
            closer: QuarterCloser::new(),
        })
    }

    /// Appends a donation and returns its recorded sequence number.
    fn add_donation(
        &mut self,
        donor: &str,
        unit: &str,
        amount_pence: u64,
        accepted_quarter: u8,
    ) -> PyResult<u64> {
        let quarter = Quarter::new(accepted_quarter).map_err(model_err)?;
        self.inner
            .append(donor, unit, Money::from_pence(amount_pence), quarter)
            .map_err(model_err)
    }

    fn donation_count(&self) -> usize {
        self.inner.donations().len()
    }

    /// The pair's act word over the year, or None if it received nothing.
    fn path_word(&self, donor: &str, unit: &str) -> PyResult<Option<String>> {
        let canonical = self.inner.registry().canonicalize(&unit.into()).map_err(model_err)?;
        let classification = classify_year(&self.inner).map_err(engine_err)?;
        Ok(classification.path(&donor.into(), &canonical).map(|p| p.word()))
    }

    /// Full year classification (acts, predicates, reports) as JSON.
    fn classify_json(&self) -> PyResult<String> {
        let classification = classify_year(&self.inner).map_err(engine_err)?;
        serde_json::to_string_pretty(&classification).map_err(value_err)
    }

    /// One pair's trace (word plus per-quarter atoms) as JSON, in the
    /// shape the LTS acceptance check consumes.
    fn trace_json(&self, donor: &str, unit: &str) -> PyResult<String> {
        let canonical = self.inner.registry().canonicalize(&unit.into()).map_err(model_err)?;
        let classification = classify_year(&self.inner).map_err(engine_err)?;
        let trace = classification
            .trace(&donor.into(), &canonical)
            .ok_or_else(|| value_err(format!("no donations for {donor} → {unit}")))?;
        serde_json::to_string(&trace).map_err(value_err)
    }

    /// One report kind for one quarter as CSV.
    fn report_csv(&self, quarter: u8, kind: &str) -> PyResult<String> {
        let quarter = Quarter::new(quarter).map_err(model_err)?;
        let kind = ReportKind::parse(kind)
            .ok_or_else(|| value_err(format!("unknown report kind '{kind}'")))?;
        let classification = classify_year(&self.inner).map_err(engine_err)?;
        let virtual_unit = self.inner.registry().virtual_unit().id.to_string();
        Ok(report_csv(classification.report(quarter), kind, &virtual_unit))
    }

    /// Closes a quarter; returns (report_json, amendment_diff_json).
    fn close_quarter(&mut self, quarter: u8) -> PyResult<(String, String)> {
        let quarter = Quarter::new(quarter).map_err(model_err)?;
        let (report, diff) =
            self.closer.close_quarter(&self.inner, quarter).map_err(engine_err)?;
        Ok((
            serde_json::to_string_pretty(&report).map_err(value_err)?,
            serde_json::to_string_pretty(&diff).map_err(value_err)?,
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "Ledger(year={:?}, donations={}, closed_through={})",
            self.inner.year(),
            self.inner.donations().len(),
            self.closer.closed_through()
        )
    }
}

#[pymodule]
fn ppera_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Ledger>()?;
    m.add_class::<CoverageReport>()?;
    m.add_function(wrap_pyfunction!(paths, m)?)?;
    m.add_function(wrap_pyfunction!(is_permissible, m)?)?;
    m.add_function(wrap_pyfunction!(path_hex, m)?)?;
    m.add_function(wrap_pyfunction!(path_word, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(vectors, m)?)?;
    m.add_function(wrap_pyfunction!(harness_config_json, m)?)?;
    m.add_function(wrap_pyfunction!(lts_accepts, m)?)?;
    m.add_function(wrap_pyfunction!(verify_coverage, m)?)?;
    Ok(())
}
