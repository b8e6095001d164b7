//! Shared corpus generators for the integration suites.

use ppera_core::model::{Config, Ledger, Mode, Quarter, UnitDecl, UnitKind};
use ppera_core::money::Money;
use ppera_core::model::UnitId;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn config_with_locals(locals: u8) -> Config {
    let mut units = vec![UnitDecl {
        id: UnitId::new("HO"),
        kind: UnitKind::HeadOffice,
        threshold: Some(Money::from_pounds(3_000)),
    }];
    for i in 1..=locals {
        units.push(UnitDecl {
            id: UnitId::new(format!("CLP-{i}")),
            kind: UnitKind::Local,
            threshold: Some(Money::from_pounds(3_000)),
        });
    }
    Config {
        mode: Mode::Harness,
        recordable: Money::from_pounds(200),
        national: Money::from_pounds(5_000),
        units,
    }
}

/// One randomly drawn donation: unit index 0 is the head office.
#[derive(Debug, Clone)]
pub struct DrawnDonation {
    pub donor: u8,
    pub unit: u8,
    pub amount: Money,
    pub accepted: Quarter,
    pub arrival: Quarter,
}

pub fn unit_name(index: u8) -> String {
    if index == 0 {
        "HO".to_string()
    } else {
        format!("CLP-{index}")
    }
}

/// Random ledger shape: 2–5 units, 1–3 donors, up to 16 donations with
/// amounts from £1 to £6,000 across random quarters.
pub fn draw_ledger_shape(rng: &mut ChaCha8Rng, backdating: bool) -> (u8, Vec<DrawnDonation>) {
    let locals = rng.random_range(1..=4u8);
    let count = rng.random_range(0..=16usize);
    let mut donations = Vec::with_capacity(count);
    for _ in 0..count {
        let accepted = rng.random_range(1..=4u8);
        let arrival = if backdating {
            rng.random_range(accepted..=4u8)
        } else {
            accepted
        };
        donations.push(DrawnDonation {
            donor: rng.random_range(1..=3u8),
            unit: rng.random_range(0..=locals),
            amount: Money::from_pence(rng.random_range(100..=600_000u64)),
            accepted: Quarter::new(accepted).unwrap(),
            arrival: Quarter::new(arrival).unwrap(),
        });
    }
    (locals, donations)
}

pub fn build_ledger(locals: u8, donations: &[DrawnDonation]) -> Ledger {
    let mut ledger = Ledger::new("corpus", config_with_locals(locals)).unwrap();
    for d in donations {
        ledger
            .append(
                format!("d{}", d.donor).as_str(),
                unit_name(d.unit).as_str(),
                d.amount,
                d.accepted,
            )
            .unwrap();
    }
    ledger
}
