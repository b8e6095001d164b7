//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test -p ppera-core --test acceptance -- --nocapture`
//! to see the per-criterion lines.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ppera_core::coverage::{
    enumerate_scenarios, harness_config, run_pair, verify_coverage, compatible,
};
use ppera_core::engine::{act_of, classify_year, YearClassification};
use ppera_core::lts::audonor_path_chart;
use ppera_core::model::Quarter;
use ppera_core::money::Money;
use ppera_core::path::{enumerate_paths, Act, PathName};
use ppera_core::report::QuarterCloser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRAMMAR_CORPUS_SEED: u64 = 0x5eed_0004;
const GRAMMAR_CORPUS_SIZE: usize = 10_000;
const BACKDATING_CORPUS_SEED: u64 = 0x5eed_0005;
const BACKDATING_CORPUS_SIZE: usize = 1_000;

fn assert_within(elapsed: Duration, bound: Duration, what: &str) {
    assert!(
        elapsed <= bound,
        "{what} took {elapsed:?}, exceeding the {bound:?} budget"
    );
}

/// The criterion-3 scenario classifications, reused by criteria 6–8.
fn scenario_classifications() -> Vec<YearClassification> {
    let config = harness_config();
    enumerate_scenarios()
        .iter()
        .map(|sc| run_pair(sc.ho, sc.clp, &config).unwrap().classification)
        .collect()
}

/// The criterion-4 corpus, reproducible by seed for criteria 6–7.
fn grammar_corpus_classifications() -> impl Iterator<Item = YearClassification> {
    let mut rng = ChaCha8Rng::seed_from_u64(GRAMMAR_CORPUS_SEED);
    (0..GRAMMAR_CORPUS_SIZE).map(move |_| {
        let (locals, donations) = common::draw_ledger_shape(&mut rng, false);
        let ledger = common::build_ledger(locals, &donations);
        classify_year(&ledger).unwrap()
    })
}

#[test]
fn criterion_1_path_count() {
    let start = Instant::now();
    let paths = enumerate_paths();
    assert_eq!(paths.len(), 15);

    // Independent oracle: all 3^4 words, filtered by a direct scan for the
    // c-then-s-then-r shape.
    let mut expected = BTreeSet::new();
    for n in 0..81u32 {
        let mut word = String::new();
        let mut n = n;
        for _ in 0..4 {
            word.push(['c', 's', 'r'][(n % 3) as usize]);
            n /= 3;
        }
        let shape_ok = {
            let rank = |c: char| match c {
                'c' => 0,
                's' => 1,
                _ => 2,
            };
            word.chars()
                .zip(word.chars().skip(1))
                .all(|(a, b)| rank(a) <= rank(b))
        };
        if shape_ok {
            expected.insert(word);
        }
    }
    let produced: BTreeSet<String> = paths.iter().map(|p| p.word()).collect();
    assert_eq!(produced, expected);
    assert_eq!(paths[0].word(), "cccc");
    assert_eq!(paths[14].word(), "rrrr");

    assert_within(start.elapsed(), Duration::from_secs(1), "criterion 1");
    println!("criterion 1 PASS: 15 paths, all and only the length-4 words of c*s*r*");
}

#[test]
fn criterion_2_scenario_universe() {
    let start = Instant::now();
    let paths = enumerate_paths();
    assert_eq!(paths.len() * paths.len(), 225);

    // Independent brute-force filter over all 225 ordered pairs using the
    // positionwise s/c test, then unordered reduction.
    let mut brute: BTreeSet<(u8, u8)> = BTreeSet::new();
    for pi in &paths {
        for pj in &paths {
            let clash = (0..4).any(|q| {
                matches!(
                    (pi.act(q), pj.act(q)),
                    (Act::S62, Act::Carry) | (Act::Carry, Act::S62)
                )
            });
            if !clash {
                let (hi, hj) = (pi.hex(), pj.hex());
                brute.insert((hi.max(hj), hi.min(hj)));
            }
        }
    }
    assert_eq!(brute.len(), 55);

    let scenarios = enumerate_scenarios();
    assert_eq!(scenarios.len(), 55);
    let produced: BTreeSet<(u8, u8)> =
        scenarios.iter().map(|s| (s.ho.hex(), s.clp.hex())).collect();
    assert_eq!(produced, brute);

    assert_within(start.elapsed(), Duration::from_secs(1), "criterion 2");
    println!("criterion 2 PASS: 225 ordered pairs reduce to 55 scenarios, matching brute force");
}

#[test]
fn criterion_3_coverage_certificate() {
    let start = Instant::now();
    let certificate = verify_coverage(&harness_config()).unwrap();
    assert_eq!(certificate.scenario_count, 55);
    assert!(certificate.enumeration_matches_brute_force);
    for result in &certificate.results {
        assert!(
            result.pass && result.swap_pass,
            "scenario {} failed: {:?}",
            result.label,
            result.failure
        );
    }
    assert!(certificate.valid);
    assert_within(start.elapsed(), Duration::from_secs(10), "criterion 3");
    println!("criterion 3 PASS: all 55 scenarios signal their labels and every swap check holds");
}

#[test]
fn criterion_4_grammar_emergence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(GRAMMAR_CORPUS_SEED);
    let mut words = 0usize;
    for _ in 0..GRAMMAR_CORPUS_SIZE {
        let (locals, donations) = common::draw_ledger_shape(&mut rng, false);
        let ledger = common::build_ledger(locals, &donations);
        let yc = classify_year(&ledger).unwrap();

        for cells in yc.cells.values() {
            let acts = [cells[0].act, cells[1].act, cells[2].act, cells[3].act];
            PathName::from_acts(acts).expect("act word must be permissible");
            words += 1;
        }
        for q in 0..4 {
            let mut per_donor: std::collections::BTreeMap<&str, (bool, bool)> =
                Default::default();
            for (key, cells) in &yc.cells {
                let flags = per_donor.entry(key.donor.as_str()).or_default();
                flags.0 |= cells[q].act == Act::S62;
                flags.1 |= cells[q].act == Act::Carry;
            }
            for (donor, (s, c)) in per_donor {
                assert!(!(s && c), "donor {donor} mixes s and c in Q{}", q + 1);
            }
        }
    }
    assert_within(start.elapsed(), Duration::from_secs(60), "criterion 4");
    println!(
        "criterion 4 PASS: {GRAMMAR_CORPUS_SIZE} random ledgers, {words} act words, \
         zero grammar or s/c-coexistence violations"
    );
}

#[test]
fn criterion_5_backdating_purity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(BACKDATING_CORPUS_SEED);
    for _ in 0..BACKDATING_CORPUS_SIZE {
        let (locals, donations) = common::draw_ledger_shape(&mut rng, true);
        let mut ledger =
            ppera_core::model::Ledger::new("corpus", common::config_with_locals(locals)).unwrap();
        let mut closer = QuarterCloser::new();
        for q in Quarter::all() {
            for d in donations.iter().filter(|d| d.arrival == q) {
                ledger
                    .append(
                        format!("d{}", d.donor).as_str(),
                        common::unit_name(d.unit).as_str(),
                        d.amount,
                        d.accepted,
                    )
                    .unwrap();
            }
            closer.close_quarter(&ledger, q).unwrap();
        }
        let from_scratch = classify_year(&ledger).unwrap();
        for q in Quarter::all() {
            assert_eq!(closer.persisted(q).unwrap(), from_scratch.report(q));
        }
        let (_set, diff) = closer.close_quarter(&ledger, Quarter::Q4).unwrap();
        assert!(diff.is_empty(), "final state re-close must amend nothing");
    }
    assert_within(start.elapsed(), Duration::from_secs(60), "criterion 5");
    println!(
        "criterion 5 PASS: {BACKDATING_CORPUS_SIZE} backdated close sequences equal \
         from-scratch classification, zero residual diffs"
    );
}

#[test]
fn criterion_6_lts_equivalence() {
    let chart = audonor_path_chart();
    let language = chart.language_words(4);
    let expected: BTreeSet<String> = enumerate_paths().iter().map(|p| p.word()).collect();
    assert_eq!(language, expected);

    let mut rejections = 0usize;
    let mut traces = 0usize;
    for yc in scenario_classifications() {
        for key in yc.cells.keys().cloned().collect::<Vec<_>>() {
            let trace = yc.trace(&key.donor, &key.unit).unwrap();
            traces += 1;
            if !chart.accepts_trace(&trace) {
                rejections += 1;
            }
        }
    }
    for yc in grammar_corpus_classifications() {
        for key in yc.cells.keys().cloned().collect::<Vec<_>>() {
            let trace = yc.trace(&key.donor, &key.unit).unwrap();
            traces += 1;
            if !chart.accepts_trace(&trace) {
                rejections += 1;
            }
        }
    }
    assert_eq!(rejections, 0);
    println!(
        "criterion 6 PASS: chart language equals the 15-path set; {traces} engine traces \
         accepted, zero rejections"
    );
}

#[test]
fn criterion_7_predicate_encoding() {
    let mut cells_checked = 0usize;
    let check = |yc: &YearClassification, cells_checked: &mut usize| {
        for cells in yc.cells.values() {
            for cell in cells {
                let p = cell.predicates;
                assert!(!(p.delta && p.delta_star), "(δ, δ*) evaluated (true, true)");
                let expected_act = act_of(&p).unwrap();
                assert_eq!(expected_act, cell.act);
                // The pair determines the act and vice versa.
                match cell.act {
                    Act::Quarterly => assert!(p.delta && !p.delta_star),
                    Act::S62 => assert!(!p.delta && p.delta_star),
                    Act::Carry => assert!(!p.delta && !p.delta_star),
                }
                *cells_checked += 1;
            }
        }
    };
    for yc in scenario_classifications() {
        check(&yc, &mut cells_checked);
    }
    for yc in grammar_corpus_classifications() {
        check(&yc, &mut cells_checked);
    }
    assert!(cells_checked > 0);
    println!(
        "criterion 7 PASS: {cells_checked} predicate cells, (δ, δ*) never both true, \
         act↔pair bijection holds"
    );
}

#[test]
fn criterion_8_report_partition() {
    let config = harness_config();
    let mut donations_checked = 0usize;
    for sc in enumerate_scenarios() {
        let run = run_pair(sc.ho, sc.clp, &config).unwrap();
        let yc = &run.classification;

        // Rebuild the scenario ledger to know the recordable donations.
        let recordable_seqs: BTreeSet<u64> = yc
            .reports
            .iter()
            .flat_map(|r| {
                r.quarterly
                    .iter()
                    .flat_map(|e| e.donations.iter().map(|d| d.seq))
                    .chain(r.s62_audit.iter().flat_map(|e| e.constituents.iter().map(|c| c.seq)))
                    .chain(
                        r.carried_forward.iter().flat_map(|e| e.donations.iter().map(|d| d.seq)),
                    )
            })
            .collect();

        for seq in recordable_seqs {
            let quarterly = yc
                .reports
                .iter()
                .flat_map(|r| &r.quarterly)
                .flat_map(|e| &e.donations)
                .filter(|d| d.seq == seq)
                .count();
            let audit = yc
                .reports
                .iter()
                .flat_map(|r| &r.s62_audit)
                .flat_map(|e| &e.constituents)
                .filter(|c| c.seq == seq)
                .count();
            let final_cf = yc.reports[3]
                .carried_forward
                .iter()
                .flat_map(|e| &e.donations)
                .filter(|d| d.seq == seq)
                .count();
            assert_eq!(
                quarterly + audit + final_cf,
                1,
                "scenario {} donation {seq}: {quarterly} quarterly, {audit} audit, {final_cf} final CF",
                sc.label()
            );
            donations_checked += 1;
        }

        for set in &yc.reports {
            for ec in &set.s62_ec {
                let audit_sum: Money = set
                    .s62_audit
                    .iter()
                    .filter(|a| a.donor == ec.donor)
                    .flat_map(|a| &a.constituents)
                    .map(|c| c.amount)
                    .sum();
                assert_eq!(ec.aggregate, audit_sum, "scenario {}", sc.label());
            }
        }
    }
    assert!(donations_checked > 0);
    println!(
        "criterion 8 PASS: {donations_checked} recordable donations each land in exactly one \
         terminal category; every EC aggregate equals its audit constituents"
    );
}

#[test]
fn scenario_pairs_stay_compatible_under_fuzzing() {
    // Fuzzed exhaustiveness: random two-unit harness ledgers only ever
    // produce compatible path pairs from the 15-word set.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    for _ in 0..10_000 {
        let (_, donations) = common::draw_ledger_shape(&mut rng, false);
        let donations: Vec<_> = donations
            .into_iter()
            .map(|mut d| {
                d.unit = d.unit.min(1);
                d.donor = 1;
                d
            })
            .collect();
        let ledger = common::build_ledger(1, &donations);
        let yc = classify_year(&ledger).unwrap();
        let words: Vec<PathName> = yc
            .cells
            .keys()
            .cloned()
            .collect::<Vec<_>>()
            .iter()
            .map(|k| yc.path(&k.donor, &k.unit).unwrap())
            .collect();
        if let [ho, clp] = words.as_slice() {
            assert!(compatible(ho, clp), "incompatible observed pair {ho}, {clp}");
        }
    }
    println!("fuzzed exhaustiveness PASS: 10000 ledgers, all observed pairs compatible");
}
