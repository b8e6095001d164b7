//! Act-decide labelled transition systems.
//!
//! States carry boolean formulas over the per-quarter atoms `δ_p` and
//! `δ*_p`; transitions carry act labels. Two chart families are built
//! here:
//!
//! * the AUdonor path chart, whose length-4 language is exactly the 15
//!   permissible path words and which accepts engine traces together with
//!   their predicate assignments;
//! * the per-quarter reporting charts, with an aggregation state feeding
//!   quarterly-report and Section 62(12) report states for every quarter
//!   up to the chart's own (retrospective reallocation).
//!
//! Charts are plain data and serialize to a JSON definition format, so a
//! chart can be corrected or replaced without touching the engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineTrace;
use crate::model::Quarter;

/// Atom kind: the unit-reporting predicate or the Section 62(12) predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Delta,
    DeltaStar,
}

/// Truth values for the eight atoms `δ_1..δ_4`, `δ*_1..δ*_4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomAssignment {
    pub delta: [bool; 4],
    pub delta_star: [bool; 4],
}

impl AtomAssignment {
    pub fn atom(&self, quarter: u8, kind: AtomKind) -> bool {
        let i = quarter as usize - 1;
        match kind {
            AtomKind::Delta => self.delta[i],
            AtomKind::DeltaStar => self.delta_star[i],
        }
    }
}

/// Boolean combination over the quarter-indexed atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Formula {
    True,
    False,
    Atom { quarter: u8, kind: AtomKind },
    Not { arg: Box<Formula> },
    And { args: Vec<Formula> },
    Or { args: Vec<Formula> },
}

impl Formula {
    pub fn atom(quarter: u8, kind: AtomKind) -> Formula {
        Formula::Atom { quarter, kind }
    }

    pub fn negate(arg: Formula) -> Formula {
        Formula::Not { arg: Box::new(arg) }
    }

    pub fn and(args: Vec<Formula>) -> Formula {
        Formula::And { args }
    }

    pub fn or(args: Vec<Formula>) -> Formula {
        Formula::Or { args }
    }

    pub fn eval(&self, assignment: &AtomAssignment) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom { quarter, kind } => assignment.atom(*quarter, *kind),
            Formula::Not { arg } => !arg.eval(assignment),
            Formula::And { args } => args.iter().all(|f| f.eval(assignment)),
            Formula::Or { args } => args.iter().any(|f| f.eval(assignment)),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom { quarter, kind } => match kind {
                AtomKind::Delta => write!(f, "δ_{quarter}"),
                AtomKind::DeltaStar => write!(f, "δ*_{quarter}"),
            },
            Formula::Not { arg } => write!(f, "¬({arg})"),
            Formula::And { args } => {
                let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "({})", parts.join(" ∧ "))
            }
            Formula::Or { args } => {
                let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "({})", parts.join(" ∨ "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDef {
    pub id: String,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDef {
    pub from: String,
    pub label: String,
    pub to: String,
}

/// A deterministic act-decide LTS: formula-labelled states, act-labelled
/// transitions, one initial state, a terminal set, every state reachable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lts {
    pub initial: String,
    pub states: Vec<StateDef>,
    pub transitions: Vec<TransitionDef>,
    pub terminals: BTreeSet<String>,
}

impl Lts {
    /// Structural validation: endpoints exist, at most one transition per
    /// (state, label), every state reachable from the initial state.
    pub fn validate(&self) -> Result<(), LtsError> {
        let ids: BTreeSet<&str> = self.states.iter().map(|s| s.id.as_str()).collect();
        if ids.len() != self.states.len() {
            return Err(LtsError::DuplicateState);
        }
        if !ids.contains(self.initial.as_str()) {
            return Err(LtsError::UnknownState { state: self.initial.clone() });
        }
        for t in &self.terminals {
            if !ids.contains(t.as_str()) {
                return Err(LtsError::UnknownState { state: t.clone() });
            }
        }
        let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
        for t in &self.transitions {
            if !ids.contains(t.from.as_str()) {
                return Err(LtsError::UnknownState { state: t.from.clone() });
            }
            if !ids.contains(t.to.as_str()) {
                return Err(LtsError::UnknownState { state: t.to.clone() });
            }
            if !seen.insert((t.from.as_str(), t.label.as_str())) {
                return Err(LtsError::Nondeterministic {
                    state: t.from.clone(),
                    label: t.label.clone(),
                });
            }
        }
        // Reachability from the initial state.
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for t in &self.transitions {
            adjacency.entry(t.from.as_str()).or_default().push(t.to.as_str());
        }
        let mut reached: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::from([self.initial.as_str()]);
        while let Some(s) = queue.pop_front() {
            if reached.insert(s) {
                if let Some(next) = adjacency.get(s) {
                    queue.extend(next.iter());
                }
            }
        }
        for id in ids {
            if !reached.contains(id) {
                return Err(LtsError::Unreachable { state: id.to_owned() });
            }
        }
        Ok(())
    }

    fn successor(&self, state: &str, label: &str) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.label == label)
            .map(|t| t.to.as_str())
    }

    fn formula_of(&self, state: &str) -> Option<&Formula> {
        self.states.iter().find(|s| s.id == state).map(|s| &s.formula)
    }

    /// Runs the labelled trace from the initial state. Accepts iff the run
    /// exists and every visited state's formula (including the initial
    /// state's) holds under the assignment. Terminal membership is not
    /// required, so prefixes are checkable.
    pub fn accepts(&self, labels: &[&str], atoms: &AtomAssignment) -> bool {
        let mut current = self.initial.as_str();
        match self.formula_of(current) {
            Some(f) if f.eval(atoms) => {}
            _ => return false,
        }
        for label in labels {
            current = match self.successor(current, label) {
                Some(next) => next,
                None => return false,
            };
            match self.formula_of(current) {
                Some(f) if f.eval(atoms) => {}
                _ => return false,
            }
        }
        true
    }

    /// Convenience wrapper for engine traces: single-letter labels.
    pub fn accepts_trace(&self, trace: &EngineTrace) -> bool {
        let labels: Vec<String> = trace.word.chars().map(|c| c.to_string()).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let atoms = AtomAssignment { delta: trace.delta, delta_star: trace.delta_star };
        self.accepts(&refs, &atoms)
    }

    /// All label words of exactly `length` with a run from the initial
    /// state ending in a terminal state. Formulas are not consulted here;
    /// they only constrain acceptance of concrete traces.
    pub fn language(&self, length: usize) -> BTreeSet<Vec<String>> {
        let mut words = BTreeSet::new();
        let mut frontier: Vec<(&str, Vec<String>)> = vec![(self.initial.as_str(), Vec::new())];
        for _ in 0..length {
            let mut next = Vec::new();
            for (state, word) in frontier {
                for t in self.transitions.iter().filter(|t| t.from == state) {
                    let mut w = word.clone();
                    w.push(t.label.clone());
                    next.push((t.to.as_str(), w));
                }
            }
            frontier = next;
        }
        for (state, word) in frontier {
            if self.terminals.contains(state) {
                words.insert(word);
            }
        }
        words
    }

    /// `language` with single-letter labels joined into plain words.
    pub fn language_words(&self, length: usize) -> BTreeSet<String> {
        self.language(length).into_iter().map(|w| w.concat()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lts serialization")
    }

    pub fn from_json(json: &str) -> Result<Lts, LtsError> {
        let lts: Lts = serde_json::from_str(json).map_err(|e| LtsError::Parse {
            message: e.to_string(),
        })?;
        lts.validate()?;
        Ok(lts)
    }
}

fn cf_formula(quarter: u8) -> Formula {
    Formula::negate(Formula::or(vec![
        Formula::atom(quarter, AtomKind::Delta),
        Formula::atom(quarter, AtomKind::DeltaStar),
    ]))
}

fn quarterly_formula(quarter: u8) -> Formula {
    Formula::and(vec![
        Formula::atom(quarter, AtomKind::Delta),
        Formula::negate(Formula::atom(quarter, AtomKind::DeltaStar)),
    ])
}

fn s62_formula(quarter: u8) -> Formula {
    Formula::and(vec![
        Formula::negate(Formula::atom(quarter, AtomKind::Delta)),
        Formula::atom(quarter, AtomKind::DeltaStar),
    ])
}

/// The AUdonor path chart: one layer per quarter, states labelled with the
/// formula the arriving act implies. Its length-4 language is exactly the
/// 15 permitted path words.
pub fn audonor_path_chart() -> Lts {
    let mut states = vec![StateDef { id: "start".into(), formula: Formula::True }];
    let mut transitions = Vec::new();

    for p in 1..=4u8 {
        states.push(StateDef { id: format!("cf_{p}"), formula: cf_formula(p) });
        states.push(StateDef { id: format!("s62_{p}"), formula: s62_formula(p) });
        states.push(StateDef { id: format!("qr_{p}"), formula: quarterly_formula(p) });

        let (cf_from, s62_from, qr_from) = if p == 1 {
            ("start".to_string(), "start".to_string(), "start".to_string())
        } else {
            (format!("cf_{}", p - 1), format!("s62_{}", p - 1), format!("qr_{}", p - 1))
        };
        transitions.push(TransitionDef { from: cf_from.clone(), label: "c".into(), to: format!("cf_{p}") });
        transitions.push(TransitionDef { from: cf_from.clone(), label: "s".into(), to: format!("s62_{p}") });
        transitions.push(TransitionDef { from: cf_from, label: "r".into(), to: format!("qr_{p}") });
        if p > 1 {
            transitions.push(TransitionDef { from: s62_from.clone(), label: "s".into(), to: format!("s62_{p}") });
            transitions.push(TransitionDef { from: s62_from, label: "r".into(), to: format!("qr_{p}") });
            transitions.push(TransitionDef { from: qr_from, label: "r".into(), to: format!("qr_{p}") });
        }
    }

    let lts = Lts {
        initial: "start".into(),
        states,
        transitions,
        terminals: ["cf_4", "s62_4", "qr_4"].into_iter().map(String::from).collect(),
    };
    lts.validate().expect("path chart is well-formed");
    lts
}

/// Reporting state chart for the close of `quarter`: donations advance
/// from the compound start through the aggregation state into a quarterly
/// report state `δ_p` (transition `2.p`) or a Section 62(12) report state
/// `δ*_p` (transition `3.p`) for any quarter `p` up to the chart's own
/// (retrospective reallocation), or take transition `4` to the
/// carried-forward terminal. The aggregation state itself is transient —
/// the threshold tests have not run yet — so it asserts nothing.
pub fn quarter_chart(quarter: Quarter) -> Lts {
    let q = quarter.index();
    let cf = format!("cf_{q}");
    let mut states = vec![
        StateDef { id: "start".into(), formula: Formula::True },
        StateDef { id: "agg".into(), formula: Formula::True },
        StateDef { id: cf.clone(), formula: cf_formula(q) },
    ];
    let mut transitions = vec![
        TransitionDef { from: "start".into(), label: "1".into(), to: "agg".into() },
        TransitionDef { from: "agg".into(), label: "4".into(), to: cf.clone() },
    ];
    let mut terminals: BTreeSet<String> = BTreeSet::from([cf]);
    for p in 1..=q {
        let qr = format!("qr_{p}");
        let s62 = format!("s62_{p}");
        states.push(StateDef { id: qr.clone(), formula: quarterly_formula(p) });
        states.push(StateDef { id: s62.clone(), formula: s62_formula(p) });
        transitions.push(TransitionDef { from: "agg".into(), label: format!("2.{p}"), to: qr.clone() });
        transitions.push(TransitionDef { from: "agg".into(), label: format!("3.{p}"), to: s62.clone() });
        terminals.insert(qr);
        terminals.insert(s62);
    }
    let lts = Lts { initial: "start".into(), states, transitions, terminals };
    lts.validate().expect("quarter chart is well-formed");
    lts
}

/// Component state of the per-unit AUdonor machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuDonorState {
    /// ⊥ — awaiting donations.
    Start,
    /// δ̄ — aggregating below the unit threshold (agg excludes S62'd
    /// donations).
    Aggregating,
    /// δ — reporting quarterly.
    Reporting,
}

/// Component state of the concurrent AUS62donor machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuS62State {
    /// ⊥* — awaiting donations.
    Start,
    /// δ̄* — aggregating below the national threshold (agg* counts
    /// everything).
    Aggregating,
    /// δ* — reporting under Section 62(12).
    Reporting,
}

/// Compound state of the two concurrent machines for one (donor, unit)
/// pair. A Section 62(12) report reverts the AUdonor side to its start
/// state, which is what keeps those donations out of later unit-threshold
/// tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompoundState {
    pub unit: AuDonorState,
    pub national: AuS62State,
}

impl CompoundState {
    /// The pre-classification compound start state (⊥, ⊥*).
    pub const START: CompoundState =
        CompoundState { unit: AuDonorState::Start, national: AuS62State::Start };

    /// The compound state a pair occupies once a quarter's classification
    /// has assigned it an act.
    pub fn after_act(act: crate::path::Act) -> CompoundState {
        use crate::path::Act;
        match act {
            Act::Carry => CompoundState {
                unit: AuDonorState::Aggregating,
                national: AuS62State::Aggregating,
            },
            Act::Quarterly => CompoundState {
                unit: AuDonorState::Reporting,
                national: AuS62State::Aggregating,
            },
            Act::S62 => CompoundState {
                unit: AuDonorState::Start,
                national: AuS62State::Reporting,
            },
        }
    }
}

impl fmt::Display for CompoundState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match self.unit {
            AuDonorState::Start => "⊥",
            AuDonorState::Aggregating => "agg",
            AuDonorState::Reporting => "δ",
        };
        let national = match self.national {
            AuS62State::Start => "⊥*",
            AuS62State::Aggregating => "agg*",
            AuS62State::Reporting => "δ*",
        };
        write!(f, "({unit}, {national})")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtsError {
    #[error("duplicate state id")]
    DuplicateState,

    #[error("unknown state '{state}'")]
    UnknownState { state: String },

    #[error("nondeterministic: state '{state}' has two '{label}' transitions")]
    Nondeterministic { state: String, label: String },

    #[error("state '{state}' unreachable from the initial state")]
    Unreachable { state: String },

    #[error("chart definition parse: {message}")]
    Parse { message: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::enumerate_paths;

    #[test]
    fn path_chart_language_is_the_fifteen_paths() {
        let chart = audonor_path_chart();
        let language = chart.language_words(4);
        let expected: BTreeSet<String> =
            enumerate_paths().into_iter().map(|p| p.word()).collect();
        assert_eq!(language, expected);
    }

    #[test]
    fn restricting_to_carry_transitions_leaves_only_cccc() {
        let mut chart = audonor_path_chart();
        chart.transitions.retain(|t| t.label == "c");
        let language = chart.language_words(4);
        assert_eq!(language, BTreeSet::from(["cccc".to_string()]));
    }

    #[test]
    fn empty_trace_is_accepted_at_the_initial_state() {
        let chart = audonor_path_chart();
        let atoms = AtomAssignment { delta: [false; 4], delta_star: [false; 4] };
        assert!(chart.accepts(&[], &atoms));
    }

    #[test]
    fn contradictory_atom_pair_is_rejected_everywhere() {
        let chart = audonor_path_chart();
        // δ_2 ∧ δ*_2 contradicts every layer-2 state formula.
        let atoms = AtomAssignment {
            delta: [false, true, true, true],
            delta_star: [false, true, false, false],
        };
        for path in enumerate_paths() {
            let labels: Vec<String> =
                path.word().chars().map(|c| c.to_string()).collect();
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            assert!(!chart.accepts(&refs, &atoms), "{} should be rejected", path);
        }
    }

    #[test]
    fn consistent_csrr_trace_is_accepted() {
        let chart = audonor_path_chart();
        let trace = EngineTrace {
            word: "csrr".into(),
            delta: [false, false, true, true],
            delta_star: [false, true, false, false],
        };
        assert!(chart.accepts_trace(&trace));
        // Same word with a wrong Q2 assignment must be rejected.
        let wrong = EngineTrace {
            word: "csrr".into(),
            delta: [false, false, true, true],
            delta_star: [false, false, false, false],
        };
        assert!(!chart.accepts_trace(&wrong));
    }

    #[test]
    fn quarter_chart_shapes() {
        let q1 = quarter_chart(Quarter::Q1);
        // Terminal report states δ_1, δ*_1 plus the carried-forward state.
        assert_eq!(q1.terminals.len(), 3);
        assert!(q1.terminals.contains("qr_1"));
        assert!(q1.terminals.contains("s62_1"));
        assert!(q1.terminals.contains("cf_1"));

        let q4 = quarter_chart(Quarter::Q4);
        let qr_states = q4.states.iter().filter(|s| s.id.starts_with("qr_")).count();
        let s62_states = q4.states.iter().filter(|s| s.id.starts_with("s62_")).count();
        assert_eq!((qr_states, s62_states), (4, 4));
        assert!(q4.transitions.iter().any(|t| t.label == "2.3"));
        assert!(q4.transitions.iter().any(|t| t.label == "3.4"));
    }

    #[test]
    fn chart_json_round_trips_and_validates() {
        let chart = audonor_path_chart();
        let json = chart.to_json();
        let reread = Lts::from_json(&json).unwrap();
        assert_eq!(reread, chart);

        // A second c-transition from start is nondeterministic.
        let mut bad = chart.clone();
        bad.transitions.push(TransitionDef {
            from: "start".into(),
            label: "c".into(),
            to: "qr_1".into(),
        });
        assert!(matches!(bad.validate(), Err(LtsError::Nondeterministic { .. })));

        // An orphan state is unreachable.
        let mut orphan = chart;
        orphan.states.push(StateDef { id: "island".into(), formula: Formula::True });
        assert!(matches!(orphan.validate(), Err(LtsError::Unreachable { .. })));
    }

    #[test]
    fn formula_display_reads_naturally() {
        let f = s62_formula(2);
        assert_eq!(f.to_string(), "(¬(δ_2) ∧ δ*_2)");
    }
}
