//! The quarterly decision engine.
//!
//! For every (donor, unit, quarter) the engine evaluates four predicates
//! and assigns one of the three speech acts:
//!
//! * `Δ′` — the donor's cumulative recordable total across every unit
//!   exceeds the national threshold;
//! * `δ` — the unit's cumulative recordable total from the donor, with
//!   donations already assigned to Section 62(12) audit reports excluded,
//!   exceeds the unit threshold (act `r`: quarterly report);
//! * `δ*` — `Δ′` holds and the unit is not reporting (act `s`: Section
//!   62(12) report);
//! * otherwise act `c`: carry forward.
//!
//! Aggregation is deliberately asymmetric: the national accumulator counts
//! every recordable donation, while the per-unit accumulator never counts
//! a donation once it has been swept into a Section 62(12) audit report.
//!
//! Classification is a pure function of the ledger. Every quarter close
//! recomputes the whole year from scratch so that backdated donations land
//! in the quarter their accepted date names; amendments to previously
//! issued reports surface as entry-level diffs, never as in-place edits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Donation, DonorId, Ledger, Quarter, UnitId};
use crate::money::Money;
use crate::path::{path_of, Act, PathError, PathName};

/// The predicate values backing one (donor, unit, quarter) decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateState {
    pub delta: bool,
    pub delta_star: bool,
    pub delta_prime: bool,
    /// 0 iff the unit's donations are reported via Section 62(12) this
    /// quarter; 1 otherwise. Zero feeds the exclusion set of later quarters.
    pub s62_flag: u8,
}

/// Notional entry recorded for a quarter in which a pair receives no
/// recordable donation: ⊥ carried forward, ⊤ quarterly, σ Section 62(12).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMarker {
    Bottom,
    Top,
    Sigma,
}

impl NullMarker {
    pub const fn symbol(self) -> char {
        match self {
            NullMarker::Bottom => '⊥',
            NullMarker::Top => '⊤',
            NullMarker::Sigma => 'σ',
        }
    }

    /// The act a null marker stands for when extracting paths.
    pub const fn act(self) -> Act {
        match self {
            NullMarker::Bottom => Act::Carry,
            NullMarker::Top => Act::Quarterly,
            NullMarker::Sigma => Act::S62,
        }
    }
}

impl fmt::Display for NullMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Maps a predicate state to its speech act. The pair (δ, δ*) both true is
/// unreachable by construction; seeing it means the engine is broken, so it
/// aborts the recomputation rather than guessing.
pub fn act_of(state: &PredicateState) -> Result<Act, EngineError> {
    if state.delta && state.delta_star {
        return Err(EngineError::ImpossiblePredicatePair);
    }
    Ok(if state.delta {
        Act::Quarterly
    } else if state.delta_star {
        Act::S62
    } else {
        Act::Carry
    })
}

/// Marker for a donation-free quarter: σ when Section 62(12) is active and
/// the unit is not reporting, ⊤ when the unit's threshold was breached, ⊥
/// otherwise.
pub fn null_marker(state: &PredicateState) -> NullMarker {
    if state.delta {
        NullMarker::Top
    } else if state.delta_star {
        NullMarker::Sigma
    } else {
        NullMarker::Bottom
    }
}

/// Cumulative recordable total from `donor` to any unit, accepted in or
/// before `quarter`. Donations already reported or swept into Section
/// 62(12) still count: the national accumulator sees everything.
pub fn agg_star(ledger: &Ledger, donor: &DonorId, quarter: Quarter) -> Money {
    ledger
        .donations()
        .iter()
        .filter(|d| d.donor == *donor && d.accepted <= quarter && ledger.is_recordable(d))
        .map(|d| d.amount)
        .sum()
}

/// True iff the donor's all-units cumulative total strictly exceeds the
/// national threshold. Monotone in the quarter.
pub fn delta_prime(ledger: &Ledger, donor: &DonorId, quarter: Quarter) -> bool {
    agg_star(ledger, donor, quarter) > ledger.config().national
}

/// Cumulative recordable total from `donor` to `unit`, accepted in or
/// before `quarter`, excluding donations in `prior_s62` (those assigned to
/// Section 62(12) audit reports in earlier quarters of the same pass).
pub fn agg(
    ledger: &Ledger,
    donor: &DonorId,
    unit: &UnitId,
    quarter: Quarter,
    prior_s62: &BTreeSet<u64>,
) -> Money {
    ledger
        .donations()
        .iter()
        .filter(|d| {
            d.donor == *donor
                && d.unit == *unit
                && d.accepted <= quarter
                && ledger.is_recordable(d)
                && !prior_s62.contains(&d.recorded_seq)
        })
        .map(|d| d.amount)
        .sum()
}

/// True iff the unit's non-S62 aggregate strictly exceeds its threshold.
pub fn delta(
    ledger: &Ledger,
    donor: &DonorId,
    unit: &UnitId,
    quarter: Quarter,
    prior_s62: &BTreeSet<u64>,
) -> Result<bool, EngineError> {
    let threshold = ledger
        .registry()
        .unit_threshold(unit)
        .ok_or_else(|| EngineError::UnknownUnit { unit: unit.clone() })?;
    Ok(agg(ledger, donor, unit, quarter, prior_s62) > threshold)
}

/// `δ* = Δ′ ∧ ¬δ`.
pub fn delta_star(
    ledger: &Ledger,
    donor: &DonorId,
    unit: &UnitId,
    quarter: Quarter,
    prior_s62: &BTreeSet<u64>,
) -> Result<bool, EngineError> {
    Ok(delta_prime(ledger, donor, quarter) && !delta(ledger, donor, unit, quarter, prior_s62)?)
}

/// 0 iff the donor's donations to this unit go to Section 62(12) this
/// quarter, else 1.
pub fn s62_function(
    ledger: &Ledger,
    donor: &DonorId,
    unit: &UnitId,
    quarter: Quarter,
    prior_s62: &BTreeSet<u64>,
) -> Result<u8, EngineError> {
    Ok(if delta_star(ledger, donor, unit, quarter, prior_s62)? { 0 } else { 1 })
}

/// A donation as listed inside a report entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DonationRef {
    pub seq: u64,
    #[serde(rename = "amount_pence")]
    pub amount: Money,
    #[serde(rename = "accepted_quarter")]
    pub accepted: Quarter,
}

impl DonationRef {
    fn new(d: &Donation) -> DonationRef {
        DonationRef { seq: d.recorded_seq, amount: d.amount, accepted: d.accepted }
    }
}

/// Quarterly report entry: a unit's newly reported donations from a donor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterlyEntry {
    pub unit: UnitId,
    pub donor: DonorId,
    pub donations: Vec<DonationRef>,
    #[serde(rename = "total_pence")]
    pub total: Money,
}

/// Section 62(12) report to the Electoral Commission: per-donor aggregate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct S62EcEntry {
    pub donor: DonorId,
    #[serde(rename = "aggregate_pence")]
    pub aggregate: Money,
}

/// One constituent of a Section 62(12) audit entry, with its unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct S62Constituent {
    pub unit: UnitId,
    pub seq: u64,
    #[serde(rename = "amount_pence")]
    pub amount: Money,
    #[serde(rename = "accepted_quarter")]
    pub accepted: Quarter,
}

/// Internal Section 62(12) audit entry: the constituent donations behind a
/// donor's aggregate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct S62AuditEntry {
    pub donor: DonorId,
    pub constituents: Vec<S62Constituent>,
}

/// Carried-forward entry: donations still pending for a (unit, donor) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarriedEntry {
    pub unit: UnitId,
    pub donor: DonorId,
    pub donations: Vec<DonationRef>,
}

/// Notional null entry for a donation-free quarter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullEntry {
    pub unit: UnitId,
    pub donor: DonorId,
    pub marker: NullMarker,
}

/// Everything emitted for one quarter: the statutory quarterly report, the
/// Section 62(12) EC report with its internal audit counterpart, the
/// carried-forward report with its sub-recordable annex, and the notional
/// null entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSet {
    pub quarter: Quarter,
    pub quarterly: Vec<QuarterlyEntry>,
    pub s62_ec: Vec<S62EcEntry>,
    pub s62_audit: Vec<S62AuditEntry>,
    pub carried_forward: Vec<CarriedEntry>,
    pub cf_annex: Vec<CarriedEntry>,
    pub nulls: Vec<NullEntry>,
}

impl ReportSet {
    fn new(quarter: Quarter) -> ReportSet {
        ReportSet {
            quarter,
            quarterly: Vec::new(),
            s62_ec: Vec::new(),
            s62_audit: Vec::new(),
            carried_forward: Vec::new(),
            cf_annex: Vec::new(),
            nulls: Vec::new(),
        }
    }
}

/// One quarter's decision for a (donor, unit) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterCell {
    pub predicates: PredicateState,
    pub act: Act,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub null_marker: Option<NullMarker>,
}

/// Sort key for pair tables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub donor: DonorId,
    pub unit: UnitId,
}

/// Predicate atoms of one pair's year, in the shape LTS acceptance wants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineTrace {
    pub word: String,
    pub delta: [bool; 4],
    pub delta_star: [bool; 4],
}

/// The full-year classification: per-pair acts and predicates plus the
/// four quarters' report sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearClassification {
    #[serde(with = "pair_cells_serde")]
    pub cells: BTreeMap<PairKey, [QuarterCell; 4]>,
    pub reports: [ReportSet; 4],
}

/// JSON maps need string keys, so the cells table serializes as a list of
/// (donor, unit, quarters) entries.
mod pair_cells_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        donor: DonorId,
        unit: UnitId,
        quarters: [QuarterCell; 4],
    }

    pub fn serialize<S: Serializer>(
        cells: &BTreeMap<PairKey, [QuarterCell; 4]>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = cells
            .iter()
            .map(|(k, v)| Entry {
                donor: k.donor.clone(),
                unit: k.unit.clone(),
                quarters: *v,
            })
            .collect();
        entries.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<PairKey, [QuarterCell; 4]>, D::Error> {
        let entries = Vec::<Entry>::deserialize(deserializer)?;
        Ok(entries
            .into_iter()
            .map(|e| (PairKey { donor: e.donor, unit: e.unit }, e.quarters))
            .collect())
    }
}

impl YearClassification {
    pub fn pairs(&self) -> impl Iterator<Item = &PairKey> {
        self.cells.keys()
    }

    pub fn cell(&self, donor: &DonorId, unit: &UnitId, quarter: Quarter) -> Option<&QuarterCell> {
        let key = PairKey { donor: donor.clone(), unit: unit.clone() };
        self.cells.get(&key).map(|cs| &cs[quarter.index() as usize - 1])
    }

    /// The pair's act word, if the pair received any donation this year.
    pub fn path(&self, donor: &DonorId, unit: &UnitId) -> Option<PathName> {
        let key = PairKey { donor: donor.clone(), unit: unit.clone() };
        self.cells.get(&key).map(|cells| {
            let acts = [cells[0].act, cells[1].act, cells[2].act, cells[3].act];
            path_of(&acts).expect("classification already validated the grammar")
        })
    }

    /// Act word and predicate atoms for LTS acceptance checks.
    pub fn trace(&self, donor: &DonorId, unit: &UnitId) -> Option<EngineTrace> {
        let key = PairKey { donor: donor.clone(), unit: unit.clone() };
        self.cells.get(&key).map(|cells| EngineTrace {
            word: cells.iter().map(|c| c.act.letter()).collect(),
            delta: [
                cells[0].predicates.delta,
                cells[1].predicates.delta,
                cells[2].predicates.delta,
                cells[3].predicates.delta,
            ],
            delta_star: [
                cells[0].predicates.delta_star,
                cells[1].predicates.delta_star,
                cells[2].predicates.delta_star,
                cells[3].predicates.delta_star,
            ],
        })
    }

    pub fn report(&self, quarter: Quarter) -> &ReportSet {
        &self.reports[quarter.index() as usize - 1]
    }
}

/// Classifies the whole year from scratch.
///
/// Quarters are processed in order. Within a quarter: `Δ′` per donor first,
/// then per unit `δ` (with the exclusion set built from earlier quarters of
/// this same pass), then `δ*`. Current-quarter donations count toward `δ`;
/// they are not yet S62-assigned. A pair exists once it has received any
/// donation during the year; pairs with none are absent, not `cccc`.
pub fn classify_year(ledger: &Ledger) -> Result<YearClassification, EngineError> {
    let registry = ledger.registry();

    let mut donors: BTreeSet<DonorId> = BTreeSet::new();
    let mut pair_keys: BTreeSet<PairKey> = BTreeSet::new();
    for d in ledger.donations() {
        donors.insert(d.donor.clone());
        pair_keys.insert(PairKey { donor: d.donor.clone(), unit: d.unit.clone() });
    }

    let mut excluded: BTreeSet<u64> = BTreeSet::new();
    let mut reported: BTreeSet<u64> = BTreeSet::new();
    let mut cells: BTreeMap<PairKey, Vec<QuarterCell>> = BTreeMap::new();
    let mut reports: Vec<ReportSet> = Vec::with_capacity(4);

    for quarter in Quarter::all() {
        let mut set = ReportSet::new(quarter);

        let dprime: BTreeMap<&DonorId, bool> = donors
            .iter()
            .map(|d| (d, delta_prime(ledger, d, quarter)))
            .collect();

        // Per-donor Section 62(12) accumulation for this quarter.
        let mut ec_totals: BTreeMap<DonorId, Money> = BTreeMap::new();
        let mut ec_constituents: BTreeMap<DonorId, Vec<S62Constituent>> = BTreeMap::new();
        // Runtime invariant: s and c must never coexist for one donor.
        let mut donor_acts: BTreeMap<&DonorId, (bool, bool)> = BTreeMap::new();

        for key in &pair_keys {
            let threshold = registry
                .unit_threshold(&key.unit)
                .ok_or_else(|| EngineError::UnknownUnit { unit: key.unit.clone() })?;
            let agg_value = agg(ledger, &key.donor, &key.unit, quarter, &excluded);
            let delta_v = agg_value > threshold;
            let dprime_v = dprime[&key.donor];
            let delta_star_v = dprime_v && !delta_v;
            let state = PredicateState {
                delta: delta_v,
                delta_star: delta_star_v,
                delta_prime: dprime_v,
                s62_flag: if delta_star_v { 0 } else { 1 },
            };
            let act = act_of(&state).map_err(|_| EngineError::PredicateInvariant {
                donor: key.donor.clone(),
                unit: key.unit.clone(),
                quarter,
            })?;

            let pending: Vec<&Donation> = ledger
                .donations()
                .iter()
                .filter(|d| {
                    d.donor == key.donor
                        && d.unit == key.unit
                        && d.accepted <= quarter
                        && ledger.is_recordable(d)
                        && !excluded.contains(&d.recorded_seq)
                        && !reported.contains(&d.recorded_seq)
                })
                .collect();

            match act {
                Act::Quarterly => {
                    if !pending.is_empty() {
                        let mut donations: Vec<DonationRef> =
                            pending.iter().map(|d| DonationRef::new(d)).collect();
                        donations.sort_by_key(|d| d.seq);
                        let total = donations.iter().map(|d| d.amount).sum();
                        reported.extend(pending.iter().map(|d| d.recorded_seq));
                        set.quarterly.push(QuarterlyEntry {
                            unit: key.unit.clone(),
                            donor: key.donor.clone(),
                            donations,
                            total,
                        });
                    }
                }
                Act::S62 => {
                    if !pending.is_empty() {
                        let sum: Money = pending.iter().map(|d| d.amount).sum();
                        let entry = ec_totals.entry(key.donor.clone()).or_insert(Money::ZERO);
                        *entry = *entry + sum;
                        let constituents = ec_constituents.entry(key.donor.clone()).or_default();
                        for d in &pending {
                            constituents.push(S62Constituent {
                                unit: key.unit.clone(),
                                seq: d.recorded_seq,
                                amount: d.amount,
                                accepted: d.accepted,
                            });
                        }
                        excluded.extend(pending.iter().map(|d| d.recorded_seq));
                    }
                }
                Act::Carry => {
                    if !pending.is_empty() {
                        let mut donations: Vec<DonationRef> =
                            pending.iter().map(|d| DonationRef::new(d)).collect();
                        donations.sort_by_key(|d| d.seq);
                        set.carried_forward.push(CarriedEntry {
                            unit: key.unit.clone(),
                            donor: key.donor.clone(),
                            donations,
                        });
                    }
                }
            }

            // Sub-recordable annex: cumulative pending sub-recordables.
            let mut annex: Vec<DonationRef> = ledger
                .donations()
                .iter()
                .filter(|d| {
                    d.donor == key.donor
                        && d.unit == key.unit
                        && d.accepted <= quarter
                        && !ledger.is_recordable(d)
                })
                .map(DonationRef::new)
                .collect();
            if !annex.is_empty() {
                annex.sort_by_key(|d| d.seq);
                set.cf_annex.push(CarriedEntry {
                    unit: key.unit.clone(),
                    donor: key.donor.clone(),
                    donations: annex,
                });
            }

            let received_recordable = ledger.donations().iter().any(|d| {
                d.donor == key.donor
                    && d.unit == key.unit
                    && d.accepted == quarter
                    && ledger.is_recordable(d)
            });
            let marker = if received_recordable { None } else { Some(null_marker(&state)) };
            if let Some(m) = marker {
                set.nulls.push(NullEntry {
                    unit: key.unit.clone(),
                    donor: key.donor.clone(),
                    marker: m,
                });
            }

            let flags = donor_acts.entry(&key.donor).or_insert((false, false));
            flags.0 |= act == Act::S62;
            flags.1 |= act == Act::Carry;

            cells
                .entry(key.clone())
                .or_default()
                .push(QuarterCell { predicates: state, act, null_marker: marker });
        }

        for (donor, (has_s, has_c)) in donor_acts {
            if has_s && has_c {
                return Err(EngineError::SCarryCoexistence { donor: donor.clone(), quarter });
            }
        }

        for (donor, aggregate) in ec_totals {
            let mut constituents = ec_constituents.remove(&donor).unwrap_or_default();
            constituents.sort();
            set.s62_audit.push(S62AuditEntry { donor: donor.clone(), constituents });
            set.s62_ec.push(S62EcEntry { donor, aggregate });
        }

        reports.push(set);
    }

    let mut final_cells: BTreeMap<PairKey, [QuarterCell; 4]> = BTreeMap::new();
    for (key, quarter_cells) in cells {
        let arr: [QuarterCell; 4] =
            quarter_cells.try_into().expect("exactly four quarters per pair");
        let acts = [arr[0].act, arr[1].act, arr[2].act, arr[3].act];
        path_of(&acts).map_err(|e| match e {
            PathError::Impermissible { word } => EngineError::GrammarViolation {
                donor: key.donor.clone(),
                unit: key.unit.clone(),
                word,
            },
            other => EngineError::Path(other),
        })?;
        final_cells.insert(key, arr);
    }

    let reports: [ReportSet; 4] = reports.try_into().expect("four quarters");
    Ok(YearClassification { cells: final_cells, reports })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("predicate pair (δ, δ*) evaluated (true, true)")]
    ImpossiblePredicatePair,

    #[error("predicate invariant failed for donor {donor}, unit {unit}, {quarter}")]
    PredicateInvariant {
        donor: DonorId,
        unit: UnitId,
        quarter: Quarter,
    },

    #[error("Section 62(12) and carry forward coexist for donor {donor} in {quarter}")]
    SCarryCoexistence { donor: DonorId, quarter: Quarter },

    #[error("act word '{word}' for donor {donor}, unit {unit} violates the c*s*r* grammar")]
    GrammarViolation {
        donor: DonorId,
        unit: UnitId,
        word: String,
    },

    #[error("unit '{unit}' has no configured threshold")]
    UnknownUnit { unit: UnitId },

    #[error("cannot close {requested}: quarters closed through {closed_through}")]
    CloseOrder { closed_through: u8, requested: Quarter },

    #[error(transparent)]
    Path(#[from] PathError),
}
