//! The coverage harness.
//!
//! Machine-checks that the decision engine traverses every permitted pair
//! of reporting paths. A scenario drives one donor against two units (the
//! canonical head office and one local unit) with a pair of four-entry
//! test vectors; the harness enumerates every pair admitted by the
//! s/c-exclusion rule, runs the engine on each, and certifies that the
//! observed path pair equals the scenario's label, that swapping the two
//! vectors swaps the observation, and that the scenario set matches an
//! independent brute-force enumeration.
//!
//! Harness thresholds are its own: recordable £200, both units £3,000,
//! national £5,000. With two receiving units a joint Section 62(12) entry
//! requires `2 × unit threshold > national`; configurations violating that
//! are rejected up front as making the s-paths unreachable.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{classify_year, EngineError, YearClassification};
use crate::model::{
    Config, Ledger, Mode, ModelError, Quarter, UnitDecl, UnitId, UnitKind,
};
use crate::money::Money;
use crate::path::{enumerate_paths, Act, PathName};

/// Donation amounts used by the constructive vector scheme, in pence.
pub mod amounts {
    use crate::money::Money;

    /// Carried-forward quarters: recordable but far below every threshold.
    pub const CARRY: Money = Money::from_pounds(210);
    /// First Section 62(12) quarter when the path has no carry prefix.
    pub const S62_OPENING: Money = Money::from_pounds(2_600);
    /// First Section 62(12) quarter after one or more carry quarters.
    pub const S62_AFTER_CARRY: Money = Money::from_pounds(2_300);
    /// First quarterly-report quarter: alone exceeds the unit threshold.
    pub const QUARTERLY: Money = Money::from_pounds(3_100);
}

/// The configuration the coverage proof runs under.
pub fn harness_config() -> Config {
    Config {
        mode: Mode::Harness,
        recordable: Money::from_pounds(200),
        national: Money::from_pounds(5_000),
        units: vec![
            UnitDecl {
                id: UnitId::new("HO"),
                kind: UnitKind::HeadOffice,
                threshold: Some(Money::from_pounds(3_000)),
            },
            UnitDecl {
                id: UnitId::new("CLP"),
                kind: UnitKind::Local,
                threshold: Some(Money::from_pounds(3_000)),
            },
        ],
    }
}

/// Which unit a test vector drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "HO")]
    HeadOffice,
    #[serde(rename = "CLP")]
    Clp,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::HeadOffice => write!(f, "HO"),
            Role::Clp => write!(f, "CLP"),
        }
    }
}

/// Four (possibly null) donation amounts that signal a path when run
/// against a compatible partner vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVector {
    pub role: Role,
    pub path: PathName,
    pub amounts: [Option<Money>; 4],
}

/// Builds the vector signalling `path` under the harness thresholds.
///
/// For `path = c^a s^b r^d`: quarters 1..=a receive £210; if `b > 0`,
/// quarter a+1 receives £2,600 when a = 0 and £2,300 otherwise, with the
/// remaining s-quarters null; if `d > 0`, quarter a+b+1 receives £3,100
/// and the rest are null.
pub fn make_vector(path: PathName, role: Role) -> TestVector {
    let (a, b, d) = path.shape();
    let mut amounts: [Option<Money>; 4] = [None; 4];
    for slot in amounts.iter_mut().take(a as usize) {
        *slot = Some(amounts::CARRY);
    }
    if b > 0 {
        amounts[a as usize] =
            Some(if a == 0 { amounts::S62_OPENING } else { amounts::S62_AFTER_CARRY });
    }
    if d > 0 {
        amounts[(a + b) as usize] = Some(amounts::QUARTERLY);
    }
    TestVector { role, path, amounts }
}

/// The full 30-vector table: one vector per path per role.
pub fn vector_table() -> Vec<TestVector> {
    let mut table = Vec::with_capacity(30);
    for path in enumerate_paths() {
        table.push(make_vector(path, Role::HeadOffice));
        table.push(make_vector(path, Role::Clp));
    }
    table
}

/// Scenario compatibility: no quarter may pair a Section 62(12) act in
/// one unit with a carried-forward act in the other, since an active
/// national threshold forces every non-reporting unit into `s`.
pub fn compatible(a: &PathName, b: &PathName) -> bool {
    (0..4).all(|q| {
        !matches!(
            (a.act(q), b.act(q)),
            (Act::S62, Act::Carry) | (Act::Carry, Act::S62)
        )
    })
}

/// An unordered scenario ⟨HO(π_i), CLP(π_j)⟩ with i ≥ j in hex order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub ho: PathName,
    pub clp: PathName,
}

impl Scenario {
    pub fn new(ho: PathName, clp: PathName) -> Result<Scenario, CoverageError> {
        if ho.hex() < clp.hex() {
            return Err(CoverageError::ScenarioOrder {
                ho: ho.word(),
                clp: clp.word(),
            });
        }
        if !compatible(&ho, &clp) {
            return Err(CoverageError::Incompatible {
                ho: ho.word(),
                clp: clp.word(),
            });
        }
        Ok(Scenario { ho, clp })
    }

    /// Two-digit hex label "ij".
    pub fn label(&self) -> String {
        format!("{:X}{:X}", self.ho.hex(), self.clp.hex())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨HO({}), CLP({})⟩", self.ho, self.clp)
    }
}

/// All unordered compatible scenarios, i ≥ j, in ascending (i, j) order.
pub fn enumerate_scenarios() -> Vec<Scenario> {
    let paths = enumerate_paths();
    let mut scenarios = Vec::new();
    for (i, ho) in paths.iter().enumerate() {
        for clp in paths.iter().take(i + 1) {
            if compatible(ho, clp) {
                scenarios.push(Scenario { ho: *ho, clp: *clp });
            }
        }
    }
    scenarios
}

/// Independent enumeration route: filters all 225 ordered pairs with the
/// closed-form shape test (`a_i = a_j`, or the smaller-prefix path has no
/// s-phase), then reduces by symmetry. The certificate requires this to
/// agree with [`enumerate_scenarios`].
pub fn brute_force_scenarios() -> Vec<Scenario> {
    let paths = enumerate_paths();
    let mut set: BTreeSet<(u8, u8)> = BTreeSet::new();
    for pi in &paths {
        for pj in &paths {
            let (ai, bi, _) = pi.shape();
            let (aj, bj, _) = pj.shape();
            let ok = ai == aj || (ai < aj && bi == 0) || (aj < ai && bj == 0);
            if ok {
                let (hi, hj) = (pi.hex(), pj.hex());
                set.insert(if hi >= hj { (hi, hj) } else { (hj, hi) });
            }
        }
    }
    set.into_iter()
        .map(|(hi, hj)| Scenario {
            ho: PathName::from_hex(hi).expect("hex in range"),
            clp: PathName::from_hex(hj).expect("hex in range"),
        })
        .collect()
}

/// Outcome of driving one (HO path, CLP path) vector pair through the
/// engine. `ho`/`clp` here follow the argument order, not the i ≥ j label
/// order, so the same helper serves the symmetry swap runs.
pub struct PairRun {
    pub observed_ho: PathName,
    pub observed_clp: PathName,
    pub classification: YearClassification,
}

/// Loads both vectors into a fresh one-donor ledger and classifies it.
pub fn run_pair(
    ho_path: PathName,
    clp_path: PathName,
    config: &Config,
) -> Result<PairRun, CoverageError> {
    let registry = config.build_registry()?;
    let ho_unit = registry
        .canonical_head_office()
        .cloned()
        .ok_or(CoverageError::MissingHeadOffice)?;
    let locals: Vec<UnitId> = registry
        .physical_units()
        .filter(|u| u.kind == UnitKind::Local)
        .map(|u| u.id.clone())
        .collect();
    let clp_unit = match locals.as_slice() {
        [only] => only.clone(),
        _ => return Err(CoverageError::NeedExactlyOneLocalUnit { found: locals.len() }),
    };

    let ho_vector = make_vector(ho_path, Role::HeadOffice);
    let clp_vector = make_vector(clp_path, Role::Clp);
    let mut ledger = Ledger::new("harness", config.clone())?;
    for q in Quarter::all() {
        let i = q.index() as usize - 1;
        if let Some(amount) = ho_vector.amounts[i] {
            ledger.append("donor", ho_unit.as_str(), amount, q)?;
        }
        if let Some(amount) = clp_vector.amounts[i] {
            ledger.append("donor", clp_unit.as_str(), amount, q)?;
        }
    }

    let classification = classify_year(&ledger)?;
    let donor = "donor".into();
    let observed_ho = classification
        .path(&donor, &ho_unit)
        .ok_or_else(|| CoverageError::MissingObservation { unit: ho_unit.to_string() })?;
    let observed_clp = classification
        .path(&donor, &clp_unit)
        .ok_or_else(|| CoverageError::MissingObservation { unit: clp_unit.to_string() })?;
    Ok(PairRun { observed_ho, observed_clp, classification })
}

/// Runs a scenario under its label order.
pub fn run_scenario(scenario: &Scenario, config: &Config) -> Result<PairRun, CoverageError> {
    run_pair(scenario.ho, scenario.clp, config)
}

/// Per-scenario certificate record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub expected_ho: PathName,
    pub expected_clp: PathName,
    pub observed_ho: Option<PathName>,
    pub observed_clp: Option<PathName>,
    pub pass: bool,
    /// Threshold symmetry: the swapped run observed the swapped pair.
    pub swap_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

/// The machine-checked coverage record: valid iff every scenario signals
/// its expected pair, every swap check holds, and the scenario set equals
/// the independent brute-force enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageCertificate {
    pub scenario_count: usize,
    pub enumeration_matches_brute_force: bool,
    pub results: Vec<ScenarioResult>,
    pub valid: bool,
}

impl CoverageCertificate {
    pub fn failures(&self) -> impl Iterator<Item = &ScenarioResult> {
        self.results.iter().filter(|r| !r.pass || !r.swap_pass)
    }
}

/// Rejects configurations the coverage proof cannot run under.
pub fn preflight(config: &Config) -> Result<(), CoverageError> {
    let registry = config.build_registry()?;
    if registry.canonical_head_office().is_none() {
        return Err(CoverageError::MissingHeadOffice);
    }
    let locals = registry
        .physical_units()
        .filter(|u| u.kind == UnitKind::Local)
        .count();
    if locals != 1 {
        return Err(CoverageError::NeedExactlyOneLocalUnit { found: locals });
    }
    let thresholds: BTreeSet<Money> =
        registry.physical_units().map(|u| u.threshold).collect();
    if thresholds.len() != 1 {
        return Err(CoverageError::UnequalUnitThresholds);
    }
    let unit = *thresholds.iter().next().expect("one threshold");
    // Joint s-entry needs both units under threshold while the national
    // total is exceeded, so 2·T_AU must exceed T_N.
    if unit.pence().saturating_mul(2) <= config.national.pence() {
        let unreachable: Vec<String> = enumerate_paths()
            .into_iter()
            .filter(|p| p.shape().1 > 0)
            .map(|p| p.word())
            .collect();
        return Err(CoverageError::SPathsUnreachable {
            unit_threshold: unit,
            national: config.national,
            paths: unreachable,
        });
    }
    Ok(())
}

fn dump_trace(run: &PairRun) -> String {
    let mut out = String::new();
    for (key, cells) in &run.classification.cells {
        out.push_str(&format!("{} → {}:\n", key.donor, key.unit));
        for (i, cell) in cells.iter().enumerate() {
            let p = cell.predicates;
            out.push_str(&format!(
                "  Q{}: act={} δ={} δ*={} Δ′={} s62={}{}\n",
                i + 1,
                cell.act,
                p.delta,
                p.delta_star,
                p.delta_prime,
                p.s62_flag,
                cell.null_marker.map(|m| format!(" null={m}")).unwrap_or_default(),
            ));
        }
    }
    out
}

/// Runs the whole proof: every scenario, every swap, plus the
/// enumeration cross-check.
pub fn verify_coverage(config: &Config) -> Result<CoverageCertificate, CoverageError> {
    preflight(config)?;
    let scenarios = enumerate_scenarios();
    let enumeration_matches_brute_force = scenarios == brute_force_scenarios();

    let mut results = Vec::with_capacity(scenarios.len());
    for scenario in &scenarios {
        let expected = (scenario.ho, scenario.clp);
        let mut failure = None;

        let (observed, pass) = match run_scenario(scenario, config) {
            Ok(run) => {
                let obs = (run.observed_ho, run.observed_clp);
                if obs != expected {
                    failure = Some(format!(
                        "expected ({}, {}), observed ({}, {})\n{}",
                        expected.0,
                        expected.1,
                        obs.0,
                        obs.1,
                        dump_trace(&run)
                    ));
                }
                (Some(obs), failure.is_none())
            }
            Err(e) => {
                failure = Some(format!("engine failure: {e}"));
                (None, false)
            }
        };

        let swap_pass = match run_pair(scenario.clp, scenario.ho, config) {
            Ok(run) => {
                let ok = (run.observed_ho, run.observed_clp) == (scenario.clp, scenario.ho);
                if !ok && failure.is_none() {
                    failure = Some(format!(
                        "swap run expected ({}, {}), observed ({}, {})\n{}",
                        scenario.clp,
                        scenario.ho,
                        run.observed_ho,
                        run.observed_clp,
                        dump_trace(&run)
                    ));
                }
                ok
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some(format!("swap engine failure: {e}"));
                }
                false
            }
        };

        results.push(ScenarioResult {
            label: scenario.label(),
            expected_ho: scenario.ho,
            expected_clp: scenario.clp,
            observed_ho: observed.map(|o| o.0),
            observed_clp: observed.map(|o| o.1),
            pass,
            swap_pass,
            failure,
        });
    }

    let valid = enumeration_matches_brute_force
        && results.iter().all(|r| r.pass && r.swap_pass);
    Ok(CoverageCertificate {
        scenario_count: scenarios.len(),
        enumeration_matches_brute_force,
        results,
        valid,
    })
}

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("scenario label order requires HO hex ≥ CLP hex (got {ho}, {clp})")]
    ScenarioOrder { ho: String, clp: String },

    #[error("paths {ho} and {clp} pair an s quarter with a c quarter")]
    Incompatible { ho: String, clp: String },

    #[error("harness config declares no head-office unit")]
    MissingHeadOffice,

    #[error("harness config needs exactly one local unit, found {found}")]
    NeedExactlyOneLocalUnit { found: usize },

    #[error("harness unit thresholds are not all equal")]
    UnequalUnitThresholds,

    #[error(
        "s-paths unreachable: 2 × unit threshold {unit_threshold} ≤ national {national}; affected paths: {}",
        paths.join(", ")
    )]
    SPathsUnreachable {
        unit_threshold: Money,
        national: Money,
        paths: Vec<String>,
    },

    #[error("observed classification is missing a path for unit {unit}")]
    MissingObservation { unit: String },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::Money;

    fn path(word: &str) -> PathName {
        PathName::from_word(word).unwrap()
    }

    #[test]
    fn compatibility_examples() {
        assert!(compatible(&path("ssss"), &path("rrrr")));
        assert!(!compatible(&path("ccss"), &path("cccc")));
        for p in enumerate_paths() {
            assert!(compatible(&p, &p));
        }
    }

    #[test]
    fn positionwise_and_closed_form_agree_on_all_225_pairs() {
        let paths = enumerate_paths();
        for pi in &paths {
            for pj in &paths {
                let (ai, bi, _) = pi.shape();
                let (aj, bj, _) = pj.shape();
                let closed = ai == aj || (ai < aj && bi == 0) || (aj < ai && bj == 0);
                assert_eq!(compatible(pi, pj), closed, "{pi} vs {pj}");
            }
        }
    }

    #[test]
    fn scenario_universe_counts() {
        let paths = enumerate_paths();
        let ordered = paths.len() * paths.len();
        assert_eq!(ordered, 225);

        let scenarios = enumerate_scenarios();
        assert_eq!(scenarios.len(), 55);
        let diagonal = scenarios.iter().filter(|s| s.ho == s.clp).count();
        assert_eq!(diagonal, 15);
        assert_eq!(scenarios, brute_force_scenarios());
    }

    #[test]
    fn vector_scheme_examples() {
        let ssss = make_vector(path("ssss"), Role::HeadOffice);
        assert_eq!(
            ssss.amounts,
            [Some(Money::from_pounds(2_600)), None, None, None]
        );
        let csrr = make_vector(path("csrr"), Role::HeadOffice);
        assert_eq!(
            csrr.amounts,
            [
                Some(Money::from_pounds(210)),
                Some(Money::from_pounds(2_300)),
                Some(Money::from_pounds(3_100)),
                None
            ]
        );
        let cccc = make_vector(path("cccc"), Role::Clp);
        assert_eq!(cccc.amounts, [Some(Money::from_pounds(210)); 4]);
        assert_eq!(vector_table().len(), 30);
    }

    #[test]
    fn hand_evaluated_scenarios() {
        let config = harness_config();

        // Q1 total £3,310 ≤ £5,000, so Δ′ stays false while CLP carries.
        let run = run_pair(path("rrrr"), path("cccc"), &config).unwrap();
        assert_eq!((run.observed_ho.word(), run.observed_clp.word()),
                   ("rrrr".into(), "cccc".into()));

        // Q1 total £5,200 > £5,000 with each agg £2,600 ≤ £3,000.
        let run = run_pair(path("ssss"), path("ssss"), &config).unwrap();
        assert_eq!((run.observed_ho.word(), run.observed_clp.word()),
                   ("ssss".into(), "ssss".into()));
        let q1 = run.classification.report(Quarter::Q1);
        assert_eq!(q1.s62_ec[0].aggregate, Money::from_pounds(5_200));

        // Q2: CLP agg £3,310 → r; HO agg £2,510 with total £5,820 → s;
        // Q3: HO agg £3,100 after the Q1–Q2 exclusions → r.
        let run = run_pair(path("csrr"), path("crrr"), &config).unwrap();
        assert_eq!((run.observed_ho.word(), run.observed_clp.word()),
                   ("csrr".into(), "crrr".into()));
    }

    #[test]
    fn scenario_constructor_enforces_order_and_compatibility() {
        assert!(Scenario::new(path("rrrr"), path("cccc")).is_ok());
        assert!(matches!(
            Scenario::new(path("cccc"), path("rrrr")),
            Err(CoverageError::ScenarioOrder { .. })
        ));
        assert!(matches!(
            Scenario::new(path("ssss"), path("cccc")),
            Err(CoverageError::Incompatible { .. })
        ));
    }

    #[test]
    fn preflight_rejects_s_unreachable_thresholds() {
        let mut config = harness_config();
        for unit in &mut config.units {
            unit.threshold = Some(Money::from_pounds(1_000));
        }
        match preflight(&config) {
            Err(CoverageError::SPathsUnreachable { paths, .. }) => {
                assert_eq!(paths.len(), 10);
                assert!(paths.contains(&"ssss".to_string()));
                assert!(!paths.contains(&"rrrr".to_string()));
            }
            other => panic!("expected SPathsUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn preflight_rejects_unequal_thresholds() {
        let mut config = harness_config();
        config.mode = Mode::Production;
        config.units[1].threshold = Some(Money::from_pounds(2_800));
        assert!(matches!(
            preflight(&config),
            Err(CoverageError::UnequalUnitThresholds)
        ));
    }

    #[test]
    fn full_certificate_is_valid() {
        let cert = verify_coverage(&harness_config()).unwrap();
        assert_eq!(cert.scenario_count, 55);
        assert!(cert.enumeration_matches_brute_force);
        assert!(cert.valid, "failures: {:?}",
                cert.failures().map(|f| f.label.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn engine_csrr_trace_is_accepted_by_the_path_chart() {
        let run = run_pair(path("csrr"), path("crrr"), &harness_config()).unwrap();
        let chart = crate::lts::audonor_path_chart();
        let ho_trace = run
            .classification
            .trace(&"donor".into(), &"HO".into())
            .unwrap();
        assert_eq!(ho_trace.word, "csrr");
        assert!(chart.accepts_trace(&ho_trace));
        let clp_trace = run
            .classification
            .trace(&"donor".into(), &"CLP".into())
            .unwrap();
        assert!(chart.accepts_trace(&clp_trace));
    }

    #[test]
    fn q1_reachable_compound_states_exclude_the_start_pair() {
        use crate::lts::CompoundState;
        let config = harness_config();
        let mut seen: BTreeSet<CompoundState> = BTreeSet::new();
        for scenario in enumerate_scenarios() {
            let run = run_scenario(&scenario, &config).unwrap();
            for cells in run.classification.cells.values() {
                seen.insert(CompoundState::after_act(cells[0].act));
            }
        }
        assert!(!seen.contains(&CompoundState::START));
        // All three post-classification compound states occur somewhere.
        assert_eq!(seen.len(), 3);
    }
}
