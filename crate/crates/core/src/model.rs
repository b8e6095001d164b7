//! Domain model: quarters, donors, accounting units, thresholds, and the
//! append-only donation ledger.
//!
//! A [`Ledger`] covers one calendar reporting year. Donations are appended
//! in arrival order (`recorded_seq`); their `accepted` quarter may lie
//! earlier than the quarter in which they arrive, which is what forces the
//! engine to recompute the whole year on every close.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

/// Reporting quarter, 1 through 4, within a single ledger year.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct Quarter(u8);

impl Quarter {
    pub const Q1: Quarter = Quarter(1);
    pub const Q2: Quarter = Quarter(2);
    pub const Q3: Quarter = Quarter(3);
    pub const Q4: Quarter = Quarter(4);

    pub fn new(index: u8) -> Result<Quarter, ModelError> {
        if (1..=4).contains(&index) {
            Ok(Quarter(index))
        } else {
            Err(ModelError::InvalidQuarter { index })
        }
    }

    pub const fn index(self) -> u8 {
        self.0
    }

    pub const fn all() -> [Quarter; 4] {
        [Quarter(1), Quarter(2), Quarter(3), Quarter(4)]
    }
}

impl TryFrom<u8> for Quarter {
    type Error = ModelError;

    fn try_from(value: u8) -> Result<Quarter, ModelError> {
        Quarter::new(value)
    }
}

impl From<Quarter> for u8 {
    fn from(q: Quarter) -> u8 {
        q.0
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

/// Opaque donor identifier. Distinct ids denote distinct donors; there is
/// no aliasing or identity resolution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DonorId(String);

impl DonorId {
    pub fn new(id: impl Into<String>) -> DonorId {
        DonorId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DonorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DonorId {
    fn from(s: &str) -> DonorId {
        DonorId(s.to_owned())
    }
}

/// Opaque accounting-unit identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(String);

impl UnitId {
    pub fn new(id: impl Into<String>) -> UnitId {
        UnitId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UnitId {
    fn from(s: &str) -> UnitId {
        UnitId(s.to_owned())
    }
}

/// Kind of accounting unit. All `HeadOffice` receiving units collapse into
/// one canonical head-office unit; the single `Virtual` unit is the
/// national aggregation target and never receives donations directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    HeadOffice,
    Local,
    Virtual,
}

/// A canonical accounting unit with its reporting threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountingUnit {
    pub id: UnitId,
    pub kind: UnitKind,
    #[serde(rename = "threshold_pence")]
    pub threshold: Money,
}

/// One recorded donation: the ledger atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Donation {
    pub donor: DonorId,
    /// Canonical receiving unit (head-office sub-units already collapsed).
    pub unit: UnitId,
    #[serde(rename = "amount_pence")]
    pub amount: Money,
    #[serde(rename = "accepted_quarter")]
    pub accepted: Quarter,
    /// Arrival order; assigned on append and never reused.
    pub recorded_seq: u64,
}

/// True iff the donation amount is recordable: strictly more than the
/// recordable threshold.
pub fn recordable(amount: Money, threshold: Money) -> bool {
    amount > threshold
}

/// Engine operating mode. Harness mode additionally requires every unit
/// threshold to be equal, which the coverage proof relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Production,
    Harness,
}

/// A declared receiving unit as it appears in a config file. Head-office
/// sub-units may omit the threshold; the canonical head-office unit's
/// threshold applies to all of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitDecl {
    pub id: UnitId,
    pub kind: UnitKind,
    #[serde(rename = "threshold_pence", default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Money>,
}

/// Threshold and unit configuration for one ledger year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(rename = "recordable_pence")]
    pub recordable: Money,
    #[serde(rename = "national_pence")]
    pub national: Money,
    pub units: Vec<UnitDecl>,
}

fn default_mode() -> Mode {
    Mode::Production
}

impl Config {
    /// Validates the declaration and produces the canonical unit registry.
    pub fn build_registry(&self) -> Result<UnitRegistry, ModelError> {
        UnitRegistry::build(self)
    }
}

/// Identifier used for the national virtual unit when a config does not
/// declare one explicitly.
pub const DEFAULT_VIRTUAL_UNIT: &str = "NATIONAL";

/// Canonicalized unit registry: maps every declared receiving-unit id to
/// its canonical unit and holds the effective per-unit thresholds.
#[derive(Debug, Clone)]
pub struct UnitRegistry {
    aliases: BTreeMap<UnitId, UnitId>,
    units: BTreeMap<UnitId, AccountingUnit>,
    virtual_id: UnitId,
    canonical_head_office: Option<UnitId>,
}

impl UnitRegistry {
    fn build(config: &Config) -> Result<UnitRegistry, ModelError> {
        let mut aliases = BTreeMap::new();
        let mut units = BTreeMap::new();
        let mut virtual_id: Option<UnitId> = None;
        let mut canonical_ho: Option<UnitId> = None;

        for decl in &config.units {
            if aliases.contains_key(&decl.id) {
                return Err(ModelError::DuplicateUnit { unit: decl.id.clone() });
            }
            match decl.kind {
                UnitKind::Virtual => {
                    if virtual_id.is_some() {
                        return Err(ModelError::MultipleVirtualUnits);
                    }
                    if let Some(t) = decl.threshold {
                        if t != config.national {
                            return Err(ModelError::VirtualThresholdMismatch {
                                declared: t,
                                national: config.national,
                            });
                        }
                    }
                    virtual_id = Some(decl.id.clone());
                    aliases.insert(decl.id.clone(), decl.id.clone());
                    units.insert(
                        decl.id.clone(),
                        AccountingUnit {
                            id: decl.id.clone(),
                            kind: UnitKind::Virtual,
                            threshold: config.national,
                        },
                    );
                }
                UnitKind::HeadOffice => {
                    let canonical = match &canonical_ho {
                        Some(c) => c.clone(),
                        None => {
                            let threshold = decl.threshold.ok_or_else(|| {
                                ModelError::MissingThreshold { unit: decl.id.clone() }
                            })?;
                            canonical_ho = Some(decl.id.clone());
                            units.insert(
                                decl.id.clone(),
                                AccountingUnit {
                                    id: decl.id.clone(),
                                    kind: UnitKind::HeadOffice,
                                    threshold,
                                },
                            );
                            decl.id.clone()
                        }
                    };
                    aliases.insert(decl.id.clone(), canonical);
                }
                UnitKind::Local => {
                    let threshold = decl
                        .threshold
                        .ok_or_else(|| ModelError::MissingThreshold { unit: decl.id.clone() })?;
                    aliases.insert(decl.id.clone(), decl.id.clone());
                    units.insert(
                        decl.id.clone(),
                        AccountingUnit {
                            id: decl.id.clone(),
                            kind: UnitKind::Local,
                            threshold,
                        },
                    );
                }
            }
        }

        let virtual_id = match virtual_id {
            Some(id) => id,
            None => {
                let id = UnitId::new(DEFAULT_VIRTUAL_UNIT);
                if aliases.contains_key(&id) {
                    return Err(ModelError::DuplicateUnit { unit: id });
                }
                aliases.insert(id.clone(), id.clone());
                units.insert(
                    id.clone(),
                    AccountingUnit {
                        id: id.clone(),
                        kind: UnitKind::Virtual,
                        threshold: config.national,
                    },
                );
                id
            }
        };

        let registry = UnitRegistry {
            aliases,
            units,
            virtual_id,
            canonical_head_office: canonical_ho,
        };
        registry.validate_thresholds(config)?;
        Ok(registry)
    }

    fn validate_thresholds(&self, config: &Config) -> Result<(), ModelError> {
        let physical: Vec<&AccountingUnit> = self.physical_units().collect();
        if physical.is_empty() {
            return Err(ModelError::NoPhysicalUnits);
        }
        let min = physical.iter().map(|u| u.threshold).min().expect("non-empty");
        if !(config.recordable < min && min < config.national) {
            return Err(ModelError::ThresholdOrder {
                recordable: config.recordable,
                min_unit: min,
                national: config.national,
            });
        }
        if config.mode == Mode::Harness {
            let max = physical.iter().map(|u| u.threshold).max().expect("non-empty");
            if min != max {
                return Err(ModelError::UnequalHarnessThresholds { min, max });
            }
        }
        Ok(())
    }

    /// Maps a declared receiving-unit id to its canonical unit id.
    /// Head-office sub-units collapse to the canonical head-office unit;
    /// local units map to themselves.
    pub fn canonicalize(&self, unit: &UnitId) -> Result<UnitId, ModelError> {
        self.aliases
            .get(unit)
            .cloned()
            .ok_or_else(|| ModelError::UnknownUnit { unit: unit.clone() })
    }

    pub fn unit(&self, canonical: &UnitId) -> Option<&AccountingUnit> {
        self.units.get(canonical)
    }

    pub fn unit_threshold(&self, canonical: &UnitId) -> Option<Money> {
        self.units.get(canonical).map(|u| u.threshold)
    }

    pub fn virtual_unit(&self) -> &AccountingUnit {
        &self.units[&self.virtual_id]
    }

    pub fn canonical_head_office(&self) -> Option<&UnitId> {
        self.canonical_head_office.as_ref()
    }

    /// Canonical physical (non-virtual) units in id order.
    pub fn physical_units(&self) -> impl Iterator<Item = &AccountingUnit> {
        self.units.values().filter(|u| u.kind != UnitKind::Virtual)
    }
}

/// One reporting year of donations against a fixed configuration.
#[derive(Debug, Clone)]
pub struct Ledger {
    year: String,
    config: Config,
    registry: UnitRegistry,
    donations: Vec<Donation>,
}

impl Ledger {
    pub fn new(year: impl Into<String>, config: Config) -> Result<Ledger, ModelError> {
        let registry = config.build_registry()?;
        Ok(Ledger {
            year: year.into(),
            config,
            registry,
            donations: Vec::new(),
        })
    }

    pub fn year(&self) -> &str {
        &self.year
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn registry(&self) -> &UnitRegistry {
        &self.registry
    }

    pub fn donations(&self) -> &[Donation] {
        &self.donations
    }

    /// Appends a donation, canonicalizing the receiving unit. Returns the
    /// assigned `recorded_seq`.
    pub fn append(
        &mut self,
        donor: impl Into<DonorId>,
        unit: impl Into<UnitId>,
        amount: Money,
        accepted: Quarter,
    ) -> Result<u64, ModelError> {
        if amount.is_zero() {
            return Err(ModelError::NonPositiveAmount);
        }
        let unit = unit.into();
        let canonical = self.registry.canonicalize(&unit)?;
        let target = self.registry.unit(&canonical).expect("canonical unit registered");
        if target.kind == UnitKind::Virtual {
            return Err(ModelError::VirtualUnitDonation { unit });
        }
        let seq = self.donations.len() as u64 + 1;
        self.donations.push(Donation {
            donor: donor.into(),
            unit: canonical,
            amount,
            accepted,
            recorded_seq: seq,
        });
        Ok(seq)
    }

    pub fn is_recordable(&self, donation: &Donation) -> bool {
        recordable(donation.amount, self.config.recordable)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("quarter index {index} out of range 1..=4")]
    InvalidQuarter { index: u8 },

    #[error("unknown accounting unit '{unit}'")]
    UnknownUnit { unit: UnitId },

    #[error("duplicate accounting unit '{unit}'")]
    DuplicateUnit { unit: UnitId },

    #[error("more than one virtual accounting unit declared")]
    MultipleVirtualUnits,

    #[error("virtual unit threshold {declared} does not match national threshold {national}")]
    VirtualThresholdMismatch { declared: Money, national: Money },

    #[error("unit '{unit}' requires a threshold")]
    MissingThreshold { unit: UnitId },

    #[error("config declares no physical accounting units")]
    NoPhysicalUnits,

    #[error(
        "thresholds out of order: require recordable {recordable} < min unit {min_unit} < national {national}"
    )]
    ThresholdOrder {
        recordable: Money,
        min_unit: Money,
        national: Money,
    },

    #[error("harness mode requires equal unit thresholds (found {min} and {max})")]
    UnequalHarnessThresholds { min: Money, max: Money },

    #[error("donation amount must be positive")]
    NonPositiveAmount,

    #[error("virtual unit '{unit}' cannot receive donations")]
    VirtualUnitDonation { unit: UnitId },

    #[error("ledger line {line}: {message}")]
    LedgerLine { line: usize, message: String },

    #[error("config: {message}")]
    Config { message: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_config() -> Config {
        Config {
            mode: Mode::Production,
            recordable: Money::from_pounds(200),
            national: Money::from_pounds(5_000),
            units: vec![
                UnitDecl {
                    id: UnitId::new("HO"),
                    kind: UnitKind::HeadOffice,
                    threshold: Some(Money::from_pounds(1_000)),
                },
                UnitDecl {
                    id: UnitId::new("HO-fundraising"),
                    kind: UnitKind::HeadOffice,
                    threshold: None,
                },
                UnitDecl {
                    id: UnitId::new("CLP-123"),
                    kind: UnitKind::Local,
                    threshold: Some(Money::from_pounds(1_000)),
                },
            ],
        }
    }

    #[test]
    fn recordable_is_strictly_more_than() {
        let t = Money::from_pounds(200);
        assert!(recordable(Money::from_pounds(201), t));
        assert!(!recordable(Money::from_pounds(200), t));
    }

    #[test]
    fn head_office_sub_units_collapse_to_canonical() {
        let registry = test_config().build_registry().unwrap();
        assert_eq!(
            registry.canonicalize(&UnitId::new("HO-fundraising")).unwrap(),
            UnitId::new("HO")
        );
        assert_eq!(
            registry.canonicalize(&UnitId::new("CLP-123")).unwrap(),
            UnitId::new("CLP-123")
        );
        assert_eq!(
            registry.canonicalize(&UnitId::new("XYZ")),
            Err(ModelError::UnknownUnit { unit: UnitId::new("XYZ") })
        );
    }

    #[test]
    fn virtual_unit_is_implicit_and_unique() {
        let registry = test_config().build_registry().unwrap();
        assert_eq!(registry.virtual_unit().id, UnitId::new(DEFAULT_VIRTUAL_UNIT));
        assert_eq!(registry.virtual_unit().threshold, Money::from_pounds(5_000));

        let mut config = test_config();
        config.units.push(UnitDecl {
            id: UnitId::new("V1"),
            kind: UnitKind::Virtual,
            threshold: None,
        });
        config.units.push(UnitDecl {
            id: UnitId::new("V2"),
            kind: UnitKind::Virtual,
            threshold: None,
        });
        assert!(matches!(
            config.build_registry(),
            Err(ModelError::MultipleVirtualUnits)
        ));
    }

    #[test]
    fn declared_virtual_threshold_must_match_national() {
        let mut config = test_config();
        config.units.push(UnitDecl {
            id: UnitId::new("V1"),
            kind: UnitKind::Virtual,
            threshold: Some(Money::from_pounds(4_000)),
        });
        assert!(matches!(
            config.build_registry(),
            Err(ModelError::VirtualThresholdMismatch { .. })
        ));
    }

    #[test]
    fn threshold_order_is_validated_at_load() {
        let mut config = test_config();
        config.recordable = Money::from_pounds(1_500);
        assert!(matches!(
            config.build_registry(),
            Err(ModelError::ThresholdOrder { .. })
        ));

        let mut config = test_config();
        config.national = Money::from_pounds(900);
        assert!(matches!(
            config.build_registry(),
            Err(ModelError::ThresholdOrder { .. })
        ));
    }

    #[test]
    fn harness_mode_requires_equal_unit_thresholds() {
        let mut config = test_config();
        config.mode = Mode::Harness;
        config.units[2].threshold = Some(Money::from_pounds(2_000));
        assert!(matches!(
            config.build_registry(),
            Err(ModelError::UnequalHarnessThresholds { .. })
        ));
    }

    #[test]
    fn append_validates_and_canonicalizes() {
        let mut ledger = Ledger::new("2026", test_config()).unwrap();
        let seq = ledger
            .append("alice", "HO-fundraising", Money::from_pounds(300), Quarter::Q1)
            .unwrap();
        assert_eq!(seq, 1);
        assert_eq!(ledger.donations()[0].unit, UnitId::new("HO"));

        assert_eq!(
            ledger.append("alice", "HO", Money::ZERO, Quarter::Q1),
            Err(ModelError::NonPositiveAmount)
        );
        assert!(matches!(
            ledger.append("alice", "NATIONAL", Money::from_pounds(300), Quarter::Q1),
            Err(ModelError::VirtualUnitDonation { .. })
        ));
        assert!(matches!(
            ledger.append("alice", "XYZ", Money::from_pounds(300), Quarter::Q1),
            Err(ModelError::UnknownUnit { .. })
        ));
    }

    #[test]
    fn quarter_bounds() {
        assert!(Quarter::new(0).is_err());
        assert!(Quarter::new(5).is_err());
        assert_eq!(Quarter::new(3).unwrap().index(), 3);
    }
}
