//! `ppera` — donation ledger ingestion, quarterly classification, report
//! emission, and the coverage proof, from the command line.
//!
//! Exit codes: 0 success, 1 domain/input errors, 2 falsified engine
//! invariants (these mean the engine itself is wrong, not the input).

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ppera_core::coverage::{
    self, enumerate_scenarios, harness_config, verify_coverage, CoverageError,
};
use ppera_core::engine::{classify_year, EngineError, EngineTrace, ReportSet};
use ppera_core::io::{append_lines, parse_config, read_ledger_lines};
use ppera_core::lts::{audonor_path_chart, quarter_chart, Lts};
use ppera_core::model::{Config, Ledger, ModelError, Quarter};
use ppera_core::path::enumerate_paths;
use ppera_core::report::{
    report_csv, report_kind_json, write_report_files, AmendmentDiff, QuarterCloser, ReportKind,
};

#[derive(Parser)]
#[command(
    name = "ppera",
    version,
    about = "Donation recording, quarterly report classification, and coverage checking"
)]
struct Cli {
    /// Config file (JSON). Defaults to the built-in harness config.
    #[arg(long, global = true, env = "PPERA_CONFIG")]
    config: Option<PathBuf>,

    /// Directory holding the ledger, closed-quarter state, and reports.
    #[arg(long, global = true, default_value = ".ppera")]
    data_dir: PathBuf,

    /// Ledger year identifier.
    #[arg(long, global = true, default_value = "2026")]
    year: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSON-lines donation file and append it to the ledger.
    Ingest { file: PathBuf },

    /// Close a quarter: recompute the year, persist reports, and print the
    /// amendment diff against previously closed quarters.
    CloseQuarter {
        quarter: u8,
        #[arg(long)]
        json: bool,
    },

    /// Print one report kind for one quarter (CSV by default).
    Report {
        #[arg(long)]
        quarter: u8,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        json: bool,
    },

    /// Recompute the whole year and write every report file.
    Recompute {
        #[arg(long)]
        json: bool,
    },

    /// Print the 15 permissible path names with their hex codes.
    Paths {
        #[arg(long)]
        json: bool,
    },

    /// List the permitted test scenarios.
    Scenarios {
        #[arg(long)]
        json: bool,
    },

    /// Print the 30-vector table with amounts in pence.
    Vectors {
        #[arg(long)]
        json: bool,
    },

    /// Run the full coverage proof. Exit 0 iff the certificate is valid.
    VerifyCoverage {
        /// Write the certificate as JSON; "-" or no value prints to stdout.
        #[arg(long, value_name = "FILE", num_args = 0..=1, default_missing_value = "-")]
        json: Option<String>,
    },

    /// Check a trace file against an act-decide chart.
    LtsCheck {
        /// Chart: "path" (default), "q1".."q4", or a chart-definition file.
        #[arg(long, default_value = "path")]
        chart: String,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        json: bool,
    },

    /// Print one (donor, unit) pair's acts and predicates for the year.
    Trace {
        #[arg(long)]
        donor: String,
        #[arg(long)]
        unit: String,
        #[arg(long)]
        json: bool,
    },
}

enum CliError {
    Domain(String),
    Invariant(String),
}

impl CliError {
    fn domain(e: impl std::fmt::Display) -> CliError {
        CliError::Domain(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::Domain(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> CliError {
        match e {
            EngineError::CloseOrder { .. } | EngineError::UnknownUnit { .. } => {
                CliError::Domain(e.to_string())
            }
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<CoverageError> for CliError {
    fn from(e: CoverageError) -> CliError {
        match e {
            CoverageError::Engine(inner) => inner.into(),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Domain(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Domain(e.to_string())
    }
}

/// Closed-quarter state persisted between invocations.
#[derive(Serialize, Deserialize, Default)]
struct CloserState {
    persisted: Vec<ReportSet>,
}

struct Workspace {
    config: Config,
    data_dir: PathBuf,
    year: String,
}

impl Workspace {
    fn open(cli: &Cli) -> Result<Workspace, CliError> {
        let config = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Domain(format!("config {}: {e}", path.display()))
                })?;
                parse_config(&text)?
            }
            None => harness_config(),
        };
        Ok(Workspace {
            config,
            data_dir: cli.data_dir.clone(),
            year: cli.year.clone(),
        })
    }

    fn ledger_path(&self) -> PathBuf {
        self.data_dir.join("ledger.jsonl")
    }

    fn state_path(&self) -> PathBuf {
        self.data_dir.join("state.json")
    }

    fn reports_dir(&self) -> PathBuf {
        self.data_dir.join("reports")
    }

    fn amendments_dir(&self) -> PathBuf {
        self.data_dir.join("amendments")
    }

    fn load_ledger(&self) -> Result<Ledger, CliError> {
        let mut ledger = Ledger::new(self.year.as_str(), self.config.clone())?;
        let path = self.ledger_path();
        if path.exists() {
            let file = fs::File::open(&path)?;
            let lines = read_ledger_lines(BufReader::new(file))?;
            append_lines(&mut ledger, &lines, 1)?;
        }
        Ok(ledger)
    }

    fn load_closer(&self) -> Result<QuarterCloser, CliError> {
        let path = self.state_path();
        if path.exists() {
            let state: CloserState = serde_json::from_str(&fs::read_to_string(&path)?)?;
            Ok(QuarterCloser::restore(state.persisted))
        } else {
            Ok(QuarterCloser::new())
        }
    }

    fn save_closer(&self, closer: &QuarterCloser) -> Result<(), CliError> {
        fs::create_dir_all(&self.data_dir)?;
        let state = CloserState { persisted: closer.persisted_sets() };
        fs::write(self.state_path(), serde_json::to_string_pretty(&state)? + "\n")?;
        Ok(())
    }
}

fn parse_quarter(q: u8) -> Result<Quarter, CliError> {
    Quarter::new(q).map_err(CliError::from)
}

fn parse_kind(kind: &str) -> Result<ReportKind, CliError> {
    ReportKind::parse(kind).ok_or_else(|| {
        CliError::Domain(format!(
            "unknown report kind '{kind}' (expected quarterly, s62, s62-audit, or cf)"
        ))
    })
}

fn cmd_ingest(ws: &Workspace, file: &Path) -> Result<(), CliError> {
    let reader = BufReader::new(fs::File::open(file).map_err(|e| {
        CliError::Domain(format!("{}: {e}", file.display()))
    })?);
    let lines = read_ledger_lines(reader)?;

    // Validate against the existing ledger before persisting anything.
    // Errors name the line within the file being ingested.
    let mut ledger = ws.load_ledger()?;
    let first = ledger.donations().len() + 1;
    append_lines(&mut ledger, &lines, 1)?;

    fs::create_dir_all(&ws.data_dir)?;
    let mut out = if ws.ledger_path().exists() {
        fs::read_to_string(ws.ledger_path())?
    } else {
        String::new()
    };
    for line in &lines {
        out.push_str(&serde_json::to_string(line)?);
        out.push('\n');
    }
    fs::write(ws.ledger_path(), out)?;
    println!(
        "ingested {} donation(s) as seq {}..={}",
        lines.len(),
        first,
        first + lines.len().saturating_sub(1)
    );
    Ok(())
}

fn diff_summary(diff: &AmendmentDiff) -> String {
    if diff.is_empty() {
        "no amendments to previously closed quarters".to_string()
    } else {
        format!(
            "amendments: {} row(s) added, {} row(s) removed",
            diff.added.len(),
            diff.removed.len()
        )
    }
}

fn cmd_close_quarter(ws: &Workspace, quarter: u8, json: bool) -> Result<(), CliError> {
    let quarter = parse_quarter(quarter)?;
    let ledger = ws.load_ledger()?;
    let mut closer = ws.load_closer()?;
    let (report, diff) = closer.close_quarter(&ledger, quarter)?;
    ws.save_closer(&closer)?;

    let virtual_unit = ledger.registry().virtual_unit().id.to_string();
    for q in Quarter::all().into_iter().filter(|q| *q <= quarter) {
        if let Some(set) = closer.persisted(q) {
            write_report_files(&ws.reports_dir(), set, &virtual_unit)
                .map_err(CliError::domain)?;
        }
    }
    fs::create_dir_all(ws.amendments_dir())?;
    fs::write(
        ws.amendments_dir().join(format!("q{}.json", quarter.index())),
        serde_json::to_string_pretty(&diff)? + "\n",
    )?;

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "quarter": quarter.index(),
                "report": report,
                "diff": diff,
            }))?
        );
    } else {
        println!(
            "closed {}: {} quarterly, {} s62, {} carried-forward entr(ies); {}",
            quarter,
            report.quarterly.len(),
            report.s62_ec.len(),
            report.carried_forward.len(),
            diff_summary(&diff)
        );
    }
    Ok(())
}

fn cmd_report(ws: &Workspace, quarter: u8, kind: &str, json: bool) -> Result<(), CliError> {
    let quarter = parse_quarter(quarter)?;
    let kind = parse_kind(kind)?;
    let ledger = ws.load_ledger()?;
    let classification = classify_year(&ledger)?;
    let set = classification.report(quarter);
    if json {
        println!("{}", serde_json::to_string_pretty(&report_kind_json(set, kind))?);
    } else {
        let virtual_unit = ledger.registry().virtual_unit().id.to_string();
        print!("{}", report_csv(set, kind, &virtual_unit));
    }
    Ok(())
}

fn cmd_recompute(ws: &Workspace, json: bool) -> Result<(), CliError> {
    let ledger = ws.load_ledger()?;
    let classification = classify_year(&ledger)?;
    let virtual_unit = ledger.registry().virtual_unit().id.to_string();
    for q in Quarter::all() {
        write_report_files(&ws.reports_dir(), classification.report(q), &virtual_unit)
            .map_err(CliError::domain)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&classification)?);
    } else {
        println!(
            "recomputed {} donation(s); reports written to {}",
            ledger.donations().len(),
            ws.reports_dir().display()
        );
        for key in classification.cells.keys() {
            let path = classification.path(&key.donor, &key.unit).expect("pair exists");
            println!("  {} → {}: {} ({:#X})", key.donor, key.unit, path, path.hex());
        }
    }
    Ok(())
}

fn cmd_paths(json: bool) -> Result<(), CliError> {
    let paths = enumerate_paths();
    if json {
        let rows: Vec<serde_json::Value> = paths
            .iter()
            .map(|p| serde_json::json!({"hex": p.hex(), "word": p.word()}))
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for p in paths {
            println!("{:X} {}", p.hex(), p.word());
        }
    }
    Ok(())
}

fn cmd_scenarios(json: bool) -> Result<(), CliError> {
    let scenarios = enumerate_scenarios();
    if json {
        let rows: Vec<serde_json::Value> = scenarios
            .iter()
            .map(|s| {
                serde_json::json!({
                    "label": s.label(),
                    "ho": s.ho.word(),
                    "clp": s.clp.word(),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!("{} permitted scenarios (label: HO path, CLP path)", scenarios.len());
        for s in scenarios {
            println!("{:>3}  HO({})  CLP({})", s.label(), s.ho, s.clp);
        }
    }
    Ok(())
}

fn cmd_vectors(json: bool) -> Result<(), CliError> {
    let table = coverage::vector_table();
    if json {
        println!("{}", serde_json::to_string_pretty(&table)?);
    } else {
        println!(
            "{:<5} {:<5} {:<4} {:>8} {:>8} {:>8} {:>8}",
            "role", "path", "hex", "q1", "q2", "q3", "q4"
        );
        for v in table {
            let cell = |i: usize| {
                v.amounts[i]
                    .map(|m| m.pence().to_string())
                    .unwrap_or_else(|| "-".to_string())
            };
            println!(
                "{:<5} {:<5} {:<4} {:>8} {:>8} {:>8} {:>8}",
                v.role.to_string(),
                v.path.word(),
                format!("{:X}", v.path.hex()),
                cell(0),
                cell(1),
                cell(2),
                cell(3)
            );
        }
    }
    Ok(())
}

fn cmd_verify_coverage(ws: &Workspace, json: Option<&str>) -> Result<(), CliError> {
    let certificate = verify_coverage(&ws.config)?;
    let json_to_stdout = matches!(json, Some("-"));
    match json {
        Some("-") => println!("{}", serde_json::to_string_pretty(&certificate)?),
        Some(path) => {
            fs::write(path, serde_json::to_string_pretty(&certificate)? + "\n")?;
            println!("certificate written to {path}");
        }
        None => {}
    }
    if certificate.valid {
        let summary = format!(
            "coverage certificate VALID: {} scenarios, enumeration cross-check ok, \
             all observations and swap checks pass",
            certificate.scenario_count
        );
        if json_to_stdout {
            eprintln!("{summary}");
        } else {
            println!("{summary}");
        }
        Ok(())
    } else {
        let mut message = format!(
            "coverage certificate INVALID ({} scenario(s) failing)",
            certificate.failures().count()
        );
        for failure in certificate.failures() {
            message.push_str(&format!(
                "\nscenario {}: {}",
                failure.label,
                failure.failure.as_deref().unwrap_or("mismatch")
            ));
        }
        Err(CliError::Invariant(message))
    }
}

/// Trace file payload: an engine trace, optionally with explicit labels
/// for charts whose transition labels are not single letters.
#[derive(Deserialize)]
struct TraceDoc {
    #[serde(default)]
    word: Option<String>,
    #[serde(default)]
    labels: Option<Vec<String>>,
    delta: [bool; 4],
    delta_star: [bool; 4],
}

fn load_chart(name: &str) -> Result<Lts, CliError> {
    match name {
        "path" => Ok(audonor_path_chart()),
        "q1" => Ok(quarter_chart(Quarter::Q1)),
        "q2" => Ok(quarter_chart(Quarter::Q2)),
        "q3" => Ok(quarter_chart(Quarter::Q3)),
        "q4" => Ok(quarter_chart(Quarter::Q4)),
        file => {
            let text = fs::read_to_string(file)
                .map_err(|e| CliError::Domain(format!("chart {file}: {e}")))?;
            Lts::from_json(&text).map_err(CliError::domain)
        }
    }
}

fn cmd_lts_check(chart: &str, trace: &Path, json: bool) -> Result<(), CliError> {
    let chart = load_chart(chart)?;
    let text = fs::read_to_string(trace)
        .map_err(|e| CliError::Domain(format!("trace {}: {e}", trace.display())))?;
    let doc: TraceDoc = serde_json::from_str(&text)?;

    let accepted = match (&doc.labels, &doc.word) {
        (Some(labels), _) => {
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let atoms = ppera_core::lts::AtomAssignment {
                delta: doc.delta,
                delta_star: doc.delta_star,
            };
            chart.accepts(&refs, &atoms)
        }
        (None, Some(word)) => chart.accepts_trace(&EngineTrace {
            word: word.clone(),
            delta: doc.delta,
            delta_star: doc.delta_star,
        }),
        (None, None) => {
            return Err(CliError::Domain(
                "trace file needs a \"word\" or \"labels\" field".into(),
            ))
        }
    };

    if json {
        println!("{}", serde_json::json!({ "accepted": accepted }));
    } else {
        println!("{}", if accepted { "accepted" } else { "rejected" });
    }
    if accepted {
        Ok(())
    } else {
        Err(CliError::Domain("trace rejected by chart".into()))
    }
}

fn cmd_trace(ws: &Workspace, donor: &str, unit: &str, json: bool) -> Result<(), CliError> {
    let ledger = ws.load_ledger()?;
    let canonical = ledger.registry().canonicalize(&unit.into())?;
    let classification = classify_year(&ledger)?;
    let donor_id = donor.into();
    let trace = classification.trace(&donor_id, &canonical).ok_or_else(|| {
        CliError::Domain(format!("no donations recorded for donor '{donor}' and unit '{unit}'"))
    })?;
    if json {
        let cells = (1..=4u8)
            .map(|q| {
                let cell = classification
                    .cell(&donor_id, &canonical, Quarter::new(q).expect("1..=4"))
                    .expect("pair exists");
                serde_json::json!({
                    "quarter": q,
                    "act": cell.act.letter().to_string(),
                    "delta": cell.predicates.delta,
                    "delta_star": cell.predicates.delta_star,
                    "delta_prime": cell.predicates.delta_prime,
                    "s62_flag": cell.predicates.s62_flag,
                    "null_marker": cell.null_marker.map(|m| m.to_string()),
                })
            })
            .collect::<Vec<_>>();
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "donor": donor,
                "unit": canonical.to_string(),
                "word": trace.word,
                "delta": trace.delta,
                "delta_star": trace.delta_star,
                "quarters": cells,
            }))?
        );
    } else {
        println!("{donor} → {canonical}: {}", trace.word);
        for q in 1..=4u8 {
            let cell = classification
                .cell(&donor_id, &canonical, Quarter::new(q).expect("1..=4"))
                .expect("pair exists");
            let p = cell.predicates;
            println!(
                "  Q{q}: act={} δ={} δ*={} Δ′={} s62={}{}",
                cell.act,
                p.delta,
                p.delta_star,
                p.delta_prime,
                p.s62_flag,
                cell.null_marker.map(|m| format!(" null={m}")).unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest { file } => {
            let ws = Workspace::open(cli)?;
            cmd_ingest(&ws, file)
        }
        Command::CloseQuarter { quarter, json } => {
            let ws = Workspace::open(cli)?;
            cmd_close_quarter(&ws, *quarter, *json)
        }
        Command::Report { quarter, kind, json } => {
            let ws = Workspace::open(cli)?;
            cmd_report(&ws, *quarter, kind, *json)
        }
        Command::Recompute { json } => {
            let ws = Workspace::open(cli)?;
            cmd_recompute(&ws, *json)
        }
        Command::Paths { json } => cmd_paths(*json),
        Command::Scenarios { json } => cmd_scenarios(*json),
        Command::Vectors { json } => cmd_vectors(*json),
        Command::VerifyCoverage { json } => {
            let ws = Workspace::open(cli)?;
            cmd_verify_coverage(&ws, json.as_deref())
        }
        Command::LtsCheck { chart, trace, json } => cmd_lts_check(chart, trace, *json),
        Command::Trace { donor, unit, json } => {
            let ws = Workspace::open(cli)?;
            cmd_trace(&ws, donor, unit, *json)
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when a pipe reader (e.g. `head`) closes stdout.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Invariant(message)) => {
            eprintln!("invariant violation: {message}");
            ExitCode::from(2)
        }
    }
}
