//! Acceptance suite: one test per criterion, each printing a pass line.
//! Criterion 5 (byte-identical CLI output) lives in the CLI crate's own
//! acceptance target, next to the binary it exercises.

use std::collections::BTreeSet;
use std::time::Instant;

use erasecheck_core::composite::validate_soundness_theorem;
use erasecheck_core::corpus::{corpus_manifest, load_entry, CORPUS_FILES};
use erasecheck_core::driver::run_checker;
use erasecheck_core::dsl::{load_model, render_model, LoadedModel};
use erasecheck_core::lts::{Label, StateId, Trace};
use erasecheck_core::oracle::{oracle_check, OracleInput, DEFAULT_ORACLE_BUDGET};
use erasecheck_core::system::{enumerate_erasure_points, refine_with_stream, InputStream};
use erasecheck_core::user::{erasure_frontier, erasure_zone};
use erasecheck_core::verdict::{Outcome, PropertyId};

mod common;

fn entry_input<'a>(loaded: &'a erasecheck_core::corpus::LoadedEntry) -> Option<OracleInput<'a>> {
    match (loaded.user.as_ref(), loaded.system.as_ref()) {
        (Some(u), Some(s)) => Some(OracleInput::Pair { user: u, system: s }),
        (Some(u), None) => Some(OracleInput::User(u)),
        (None, Some(s)) => Some(OracleInput::System(s)),
        (None, None) => None,
    }
}

#[test]
fn acceptance_1_corpus_golden_verdicts() {
    let started = Instant::now();
    for entry in corpus_manifest() {
        let loaded = load_entry(&entry).expect("entry loads");
        for (property, expected) in &entry.expected {
            let input = entry_input(&loaded).expect("entry has models");
            let verdict = run_checker(*property, &input, entry.depth).expect("checker runs");
            assert_eq!(
                verdict.outcome, *expected,
                "{}: {} expected {:?}, got {:?}",
                entry.name, property, expected, verdict.outcome
            );
            if entry.name == "figure1" && *property == PropertyId::InputErasure {
                // The witness names the post-erasure divergence on the other
                // channel.
                assert!(verdict.witnesses[0]
                    .description
                    .contains("post-erasure divergence"));
                assert!(verdict.witnesses[0].description.contains("log!"));
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "corpus verdicts took {elapsed:?}, budget is 5 s"
    );
    println!("ACCEPTANCE 1 corpus golden verdicts at depth 10: PASS ({elapsed:?})");
}

#[test]
fn acceptance_2_oracle_equivalence() {
    let started = Instant::now();
    let mut compared = 0usize;
    for entry in corpus_manifest() {
        let loaded = load_entry(&entry).expect("entry loads");
        for depth in [4usize, 6, 8] {
            for property in PropertyId::ALL {
                // Single-model properties run on each model of the entry;
                // the others run where their model kinds are available.
                let mut inputs: Vec<OracleInput> = Vec::new();
                match property {
                    PropertyId::Determinism | PropertyId::InputEnabled => {
                        if let Some(s) = loaded.system.as_ref() {
                            inputs.push(OracleInput::Model(&s.lts));
                        }
                        if let Some(u) = loaded.user.as_ref() {
                            inputs.push(OracleInput::Model(&u.lts));
                        }
                    }
                    PropertyId::SystemWellFormed | PropertyId::InputErasure => {
                        if let Some(s) = loaded.system.as_ref() {
                            inputs.push(OracleInput::System(s));
                        }
                    }
                    PropertyId::UserWellFormed
                    | PropertyId::Singularity
                    | PropertyId::Confinement
                    | PropertyId::StreamAbility => {
                        if let Some(u) = loaded.user.as_ref() {
                            inputs.push(OracleInput::User(u));
                        }
                    }
                    PropertyId::Liveness | PropertyId::CompositeErasure => {
                        if let (Some(u), Some(s)) = (loaded.user.as_ref(), loaded.system.as_ref()) {
                            inputs.push(OracleInput::Pair { user: u, system: s });
                        }
                    }
                }
                for input in inputs {
                    let checker = run_checker(property, &input, depth).expect("checker runs");
                    let again = match &input {
                        OracleInput::Model(l) => OracleInput::Model(l),
                        OracleInput::System(s) => OracleInput::System(s),
                        OracleInput::User(u) => OracleInput::User(u),
                        OracleInput::Pair { user, system } => OracleInput::Pair { user, system },
                    };
                    let oracle = oracle_check(property, again, depth, DEFAULT_ORACLE_BUDGET)
                        .expect("oracle runs within budget");
                    assert_eq!(
                        checker.outcome, oracle.outcome,
                        "{}: {} at depth {}: checker {:?}, oracle {:?}",
                        entry.name, property, depth, checker.outcome, oracle.outcome
                    );
                    compared += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(compared >= 100, "only {compared} comparisons ran");
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "oracle equivalence took {elapsed:?}, budget is 60 s"
    );
    println!(
        "ACCEPTANCE 2 checker/oracle agreement at depths 4,6,8 ({compared} comparisons): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_3_theorem_consistency() {
    let depth = 10;
    let mut reports = 0usize;
    let mut conclusive_green = 0usize;

    // Corpus pairs first.
    for entry in corpus_manifest() {
        let loaded = load_entry(&entry).expect("entry loads");
        if let (Some(u), Some(s)) = (loaded.user.as_ref(), loaded.system.as_ref()) {
            let report = validate_soundness_theorem(u, s, depth);
            assert!(report.consistent, "{} is inconsistent", entry.name);
            reports += 1;
        }
    }

    // Template-assembled pairs with known expected premise failures.
    let pairs = common::template_pairs();
    assert!(pairs.len() >= 100, "only {} template pairs", pairs.len());
    for pair in &pairs {
        let system = load_model(&pair.system)
            .expect("system template parses")
            .to_system_spec()
            .expect("system template is a valid system");
        let user = load_model(&pair.user)
            .expect("user template parses")
            .to_user_spec()
            .expect("user template is a valid user");
        let report = validate_soundness_theorem(&user, &system, depth);
        assert!(report.consistent, "{} is inconsistent", pair.name);
        match pair.expected_failure {
            None => {
                assert_ne!(
                    report.input_erasure.outcome,
                    Outcome::Fail,
                    "{}: friendly pair fails input erasure",
                    pair.name
                );
                assert_ne!(
                    report.friendliness.overall().outcome,
                    Outcome::Fail,
                    "{}: friendly pair fails friendliness",
                    pair.name
                );
                assert_ne!(
                    report.liveness.outcome,
                    Outcome::Fail,
                    "{}: friendly pair fails liveness",
                    pair.name
                );
                if report.premises_pass() && report.composite.outcome == Outcome::Pass {
                    conclusive_green += 1;
                }
            }
            Some(PropertyId::InputErasure) => {
                assert_eq!(report.input_erasure.outcome, Outcome::Fail, "{}", pair.name)
            }
            Some(PropertyId::Singularity) => assert_eq!(
                report.friendliness.singularity.outcome,
                Outcome::Fail,
                "{}",
                pair.name
            ),
            Some(PropertyId::Confinement) => assert_eq!(
                report.friendliness.confinement.outcome,
                Outcome::Fail,
                "{}",
                pair.name
            ),
            Some(PropertyId::StreamAbility) => assert_eq!(
                report.friendliness.stream_ability.outcome,
                Outcome::Fail,
                "{}",
                pair.name
            ),
            Some(PropertyId::UserWellFormed) => assert_eq!(
                report.friendliness.well_formed.outcome,
                Outcome::Fail,
                "{}",
                pair.name
            ),
            Some(other) => panic!("unexpected premise {other}"),
        }
        reports += 1;
    }
    assert!(
        conclusive_green >= 10,
        "only {conclusive_green} fully green pairs"
    );
    println!(
        "ACCEPTANCE 3 theorem consistency over {reports} reports ({conclusive_green} fully green): PASS"
    );
}

/// The definitional example rows of each operation live as unit tests next
/// to their modules; this test replays the corpus-backed rows whose frozen
/// values were first computed by enumeration, and the cross-route rows.
#[test]
fn acceptance_4_definitional_rows() {
    let manifest = corpus_manifest();
    let by_name = |name: &str| {
        manifest
            .iter()
            .find(|e| e.name == name)
            .map(|e| load_entry(e).expect("loads"))
            .expect("entry")
    };

    // figure1: one erasure point per loop unrolling within the depth
    // (1 + 2 + 3 value-multiset classes at openings 0, 5 and 10).
    let figure1 = by_name("figure1").system.unwrap();
    let points = enumerate_erasure_points(&figure1, 10);
    assert_eq!(points.len(), 6);
    assert!(points.iter().all(|p| p.pre_state == StateId::new("s0")));
    let lengths: Vec<usize> = points.iter().map(|p| p.open_trace.len()).collect();
    assert_eq!(lengths, [0, 5, 5, 10, 10, 10]);

    // ex_a refined by the stream 0,1,...: the frozen two-session trace.
    let ex_a = by_name("ex_a");
    let system = ex_a.system.as_ref().unwrap();
    let d = &system.lts.domain;
    let alternating = InputStream::new(vec![d.value_at(0), d.value_at(1)], d.value_at(0));
    let trace = refine_with_stream(system, &alternating, 6);
    assert_eq!(
        trace,
        Trace(vec![
            Label::BeginErase,
            Label::ToSystem(d.value_at(0)),
            Label::EndErase,
            Label::BeginErase,
            Label::ToSystem(d.value_at(1)),
            Label::EndErase,
        ])
    );

    // streamab echo zone: one complete session per (secret, feedback) pair.
    let streamab = by_name("streamab");
    let echo_user = streamab.user.as_ref().unwrap();
    let zone = erasure_zone(echo_user, &StateId::new("u0"), 10);
    assert_eq!(zone.sessions.len(), 4);
    let secrets: BTreeSet<_> = zone.sessions.iter().map(|s| s.secret_value).collect();
    assert_eq!(secrets.len(), 2);

    // mod10: one frontier state per residue class.
    let mod10 = by_name("mod10");
    let residue_user = mod10.user.as_ref().unwrap();
    let frontier = erasure_frontier(residue_user, &StateId::new("u0"), 10);
    let names: Vec<&str> = frontier.states.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(names, ["u4_even", "u4_odd"]);

    // Theorem rows: streamab premises and conclusion; a leaking system with
    // a friendly user stays consistent because the system premise fails.
    let report = validate_soundness_theorem(echo_user, streamab.system.as_ref().unwrap(), 10);
    assert_eq!(report.input_erasure.outcome, Outcome::Pass);
    assert_eq!(report.friendliness.stream_ability.outcome, Outcome::Fail);
    assert_eq!(report.composite.outcome, Outcome::Fail);
    assert!(report.consistent);

    let driver_user = load_model(
        "user driver
domain {0, 1}
channel a erase
state u0 initial
state u1
state u2_0
state u2_1
state u3
state u4
state u5
trans u0 -> u1 : in a BE
trans u1 -> u2_$v : read i=1 $v forall v
trans u2_0 -> u3 : out a 0
trans u2_1 -> u3 : out a 1
trans u3 -> u4 : in a EE
trans u4 -> u5 : out a 0
",
    )
    .expect("driver user parses")
    .to_user_spec()
    .expect("driver user is valid");
    let report = validate_soundness_theorem(&driver_user, &figure1, 10);
    assert_eq!(report.input_erasure.outcome, Outcome::Fail);
    assert!(report.consistent);

    // Oracle rows.
    let oracle = oracle_check(
        PropertyId::InputErasure,
        OracleInput::System(system),
        8,
        DEFAULT_ORACLE_BUDGET,
    )
    .unwrap();
    assert_eq!(oracle.outcome, Outcome::Pass);
    let usr1 = ex_a.user.as_ref().unwrap();
    let oracle = oracle_check(
        PropertyId::Singularity,
        OracleInput::User(usr1),
        8,
        DEFAULT_ORACLE_BUDGET,
    )
    .unwrap();
    assert_eq!(oracle.outcome, Outcome::Fail);
    let oracle = oracle_check(
        PropertyId::CompositeErasure,
        OracleInput::Pair {
            user: echo_user,
            system: streamab.system.as_ref().unwrap(),
        },
        10,
        DEFAULT_ORACLE_BUDGET,
    )
    .unwrap();
    assert_eq!(oracle.outcome, Outcome::Fail);

    println!("ACCEPTANCE 4 definitional example rows: PASS");
}

#[test]
fn acceptance_6_parser_round_trip() {
    for (name, text) in CORPUS_FILES {
        let first = load_model(text).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        let rendered = render_model(&first);
        let second = load_model(&rendered).unwrap_or_else(|d| panic!("{name} re-parse: {d:?}"));
        match (&first, &second) {
            (LoadedModel::Memory { memory: a, .. }, LoadedModel::Memory { memory: b, .. }) => {
                assert_eq!(a, b, "{name}: memories differ after round trip");
            }
            _ => {
                assert_eq!(
                    first.lts(),
                    second.lts(),
                    "{name}: expanded models differ after round trip"
                );
            }
        }
        // Rendering the re-parsed model is also byte-stable.
        assert_eq!(rendered, render_model(&second), "{name}: unstable render");
    }
    println!("ACCEPTANCE 6 parser round trip on every corpus file: PASS");
}
