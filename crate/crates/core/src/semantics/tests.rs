use std::sync::Arc;

use super::*;
use crate::qstate::TOLERANCE;
use crate::syntax::parse_program;
use crate::types::TypeExpr;

const TELEPORT: &str = include_str!("../../examples/teleport.cqp");
const IDENTITY: &str = include_str!("../../examples/identity.cqp");
const BELL: &str = include_str!("../../examples/bell.cqp");
const HARNESS: &str = include_str!("../../examples/teleport_harness.cqp");

fn start(src: &str) -> Configuration {
    let program = Arc::new(parse_program(src).unwrap());
    let entry = program.entry().unwrap();
    initial_configuration(program, &entry).unwrap()
}

fn one_qubit_alphabet(tests: Vec<StateVector>) -> InputAlphabet {
    let q = TypeExpr::Channel(vec![TypeExpr::Qbit]);
    InputAlphabet::for_channels(&[q.clone(), q], tests)
}

/// Follows taus while exactly one transition is enabled.
fn settle(mut c: Configuration, alphabet: &InputAlphabet) -> Configuration {
    loop {
        let ts = step(&c, alphabet).unwrap();
        match ts.as_slice() {
            [t] if t.label == Label::Tau && t.outcomes.len() == 1 => c = t.outcomes[0].1.clone(),
            _ => return c,
        }
    }
}

#[test]
fn teleport_starts_with_allocation() {
    let c = start(TELEPORT);
    assert_eq!(c.state.num_qubits(), 0);
    assert_eq!(c.visible, vec!["a".to_string(), "b".to_string()]);
    let ts = step(&c, &InputAlphabet::none()).unwrap();
    assert_eq!(ts.len(), 1);
    assert_eq!(ts[0].label, Label::Tau);
    assert_eq!(ts[0].outcomes[0].1.state.num_qubits(), 2);
}

#[test]
fn identity_starts_at_input() {
    let c = start(IDENTITY);
    assert!(matches!(c.threads[0].term.kind, ProcessKind::Input { .. }));
    assert!(step(&c, &InputAlphabet::none()).unwrap().is_empty());
    let alphabet = one_qubit_alphabet(default_qubit_tests());
    let ts = step(&c, &alphabet).unwrap();
    assert_eq!(ts.len(), 4);
    assert!(ts.iter().all(|t| matches!(t.label, Label::Input { channel: 0, .. })));
}

#[test]
fn wrong_entry_arity_is_rejected() {
    let program = Arc::new(parse_program(IDENTITY).unwrap());
    let entry = EntryCall {
        process: "Identity".into(),
        args: vec!["c".into()],
        pos: Default::default(),
    };
    assert!(matches!(
        initial_configuration(program.clone(), &entry),
        Err(SemanticsError::ArityMismatch { .. })
    ));
    let missing = EntryCall {
        process: "Nope".into(),
        args: vec![],
        pos: Default::default(),
    };
    assert!(matches!(
        initial_configuration(program, &missing),
        Err(SemanticsError::UnknownProcess(_))
    ));
}

#[test]
fn nil_has_no_steps() {
    let c = start("//: P :\nP() = 0");
    assert!(c.is_terminal());
    assert!(step(&c, &InputAlphabet::none()).unwrap().is_empty());
    let plts = explore(&c, &ExploreOptions::default()).unwrap();
    assert_eq!(plts.num_states(), 1);
    assert!(plts.states[0].terminal);
    assert!(plts.edges.is_empty());
}

#[test]
fn alice_measurement_has_four_even_outcomes() {
    for (k, _) in default_qubit_tests().iter().enumerate() {
        let alphabet = InputAlphabet {
            tests: default_qubit_tests(),
            messages: [(0, vec![vec![InputValue::Qubit(k)]])].into_iter().collect(),
        };
        let mut c = settle(start(TELEPORT), &alphabet);
        // Take Alice's input and run until the measurement is offered.
        loop {
            let ts = step(&c, &alphabet).unwrap();
            if let Some(t) = ts.iter().find(|t| t.outcomes.len() > 1) {
                assert_eq!(t.outcomes.len(), 4);
                for (p, _) in &t.outcomes {
                    assert!((p - 0.25).abs() < 1e-9);
                }
                break;
            }
            c = ts[0].outcomes[0].1.clone();
        }
    }
}

#[test]
fn identity_explores_to_a_chain() {
    let alphabet = InputAlphabet {
        tests: default_qubit_tests(),
        messages: [(0, vec![vec![InputValue::Qubit(2)]])].into_iter().collect(),
    };
    let options = ExploreOptions {
        alphabet,
        ..Default::default()
    };
    let plts = explore(&start(IDENTITY), &options).unwrap();
    assert_eq!(plts.num_states(), 3);
    assert_eq!(plts.edges.len(), 2);
    assert!(matches!(plts.edges[0].label, Label::Input { .. }));
    assert!(matches!(plts.edges[1].label, Label::Output { channel: 1, .. }));
    assert!(plts.states[plts.edges[1].dst].terminal);
    assert!(plts.states.iter().all(|s| s.kind == StateKind::Nondeterministic));
    let rho = plts.edges[1].payload.as_ref().unwrap();
    let plus = DensityMatrix::pure(&default_qubit_tests()[2]);
    assert!(rho.approx_eq(&plus, TOLERANCE));
}

#[test]
fn teleport_explores_to_one_measurement_per_path() {
    let options = ExploreOptions {
        alphabet: one_qubit_alphabet(vec![default_qubit_tests()[3].clone()]),
        ..Default::default()
    };
    let plts = explore(&start(TELEPORT), &options).unwrap();
    plts.check_invariants().unwrap();
    let prob: Vec<usize> = (0..plts.num_states())
        .filter(|&s| plts.states[s].kind == StateKind::Probabilistic)
        .collect();
    assert!(!prob.is_empty());
    let adj = plts.adjacency();
    for &p in &prob {
        assert_eq!(adj[p].len(), 4);
    }
    let want = DensityMatrix::pure(&default_qubit_tests()[3]);
    let outputs: Vec<&Edge> = plts
        .edges
        .iter()
        .filter(|e| matches!(e.label, Label::Output { .. }))
        .collect();
    assert!(!outputs.is_empty());
    for e in outputs {
        assert!(e.payload.as_ref().unwrap().approx_eq(&want, TOLERANCE));
        assert!(plts.states[e.dst].terminal);
    }
}

#[test]
fn harness_delivers_the_prepared_state() {
    let c = start(HARNESS);
    for seed in [0, 1, 7, 42, 1234] {
        let trace = run_sampled(&c, seed, &InputAlphabet::none(), 1000).unwrap();
        let last = trace.last().unwrap();
        assert!(last.config.is_terminal());
        let rho = trace.iter().find_map(|s| s.payload.clone()).expect("output on r");
        let fidelity = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| {
                let psi = default_qubit_tests()[2].amplitudes().to_vec();
                (psi[i].conj() * rho.get(i, j) * psi[j]).re
            })
            .sum::<f64>();
        assert!(fidelity >= 1.0 - 1e-9, "seed {seed}: fidelity {fidelity}");
    }
}

#[test]
fn seeded_runs_repeat() {
    let c = start(HARNESS);
    let render = |t: &[TraceStep]| -> Vec<String> {
        t.iter()
            .map(|s| format!("{} {:?} {}", s.label.render(&c.visible), s.probability, s.config))
            .collect()
    };
    let a = run_sampled(&c, 7, &InputAlphabet::none(), 1000).unwrap();
    let b = run_sampled(&c, 7, &InputAlphabet::none(), 1000).unwrap();
    assert_eq!(render(&a), render(&b));
}

#[test]
fn bell_sampling_is_fair() {
    let c = start(BELL);
    let mut zeros = 0;
    let runs = 10_000;
    for seed in 0..runs {
        let trace = run_sampled(&c, seed, &InputAlphabet::none(), 100).unwrap();
        let bits: Vec<u8> = trace
            .iter()
            .filter_map(|s| match &s.label {
                Label::Output { message, .. } => match message.as_slice() {
                    [OutputValue::Bit(b)] => Some(*b),
                    _ => None,
                },
                _ => None,
            })
            .collect();
        assert_eq!(bits.len(), 2);
        assert_eq!(bits[0], bits[1]);
        if bits[0] == 0 {
            zeros += 1;
        }
    }
    let freq = zeros as f64 / runs as f64;
    assert!((0.48..=0.52).contains(&freq), "frequency {freq}");
}

#[test]
fn dead_qubits_are_factored_out() {
    let c = start("//: P : ^[Bit]\nP(c) = (qbit x,y) {x *= H} . c![measure x] . 0");
    let plts = explore(&c, &ExploreOptions::default()).unwrap();
    for s in &plts.states {
        if let Some(cfg) = &s.config {
            if cfg.is_terminal() {
                assert_eq!(cfg.state.num_qubits(), 0);
            }
        }
    }
}

#[test]
fn interleavings_are_merged() {
    let src = "//: P : ^[Bit]\nP(c) = ((qbit x) {x *= H} . 0 | (qbit y) {y *= X} . 0)";
    let (plts, merges) = explore_with_merges(&start(src), &ExploreOptions::default()).unwrap();
    assert!(!merges.is_empty());
    let terminal = plts.states.iter().filter(|s| s.terminal).count();
    assert_eq!(terminal, 1);
}

#[test]
fn binder_names_do_not_affect_keys() {
    let a = start("//: P : ^[Bit]\nP(c) = (qbit x) c![measure x] . 0");
    let b = start("//: P : ^[Bit]\nP(d) = (qbit y) d![measure y] . 0");
    assert_eq!(a.key(), b.key());
    assert!(a.equivalent(&b));
}

#[test]
fn parallel_sharing_is_an_ownership_violation() {
    let src = include_str!("../../examples/negative/clone.cqp");
    let alphabet = one_qubit_alphabet(basis_qubit_tests());
    let err = explore(
        &start(src),
        &ExploreOptions {
            alphabet,
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, SemanticsError::OwnershipViolation(_)));
}

#[test]
fn resending_is_an_ownership_violation() {
    let src = include_str!("../../examples/negative/use_after_send.cqp");
    let alphabet = one_qubit_alphabet(basis_qubit_tests());
    let err = explore(
        &start(src),
        &ExploreOptions {
            alphabet,
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, SemanticsError::OwnershipViolation(_)));
}

#[test]
fn state_cap_is_reported() {
    let options = ExploreOptions {
        max_states: 3,
        alphabet: one_qubit_alphabet(default_qubit_tests()),
    };
    assert_eq!(
        explore(&start(TELEPORT), &options).unwrap_err(),
        SemanticsError::StateCap { cap: 3 }
    );
}

#[test]
fn classical_pair_binds_to_one_name() {
    let src = "//: P : ^[Bit]\nP(d) = (new c)(c![1,0] . 0 | c?[r] . (qbit y) {y *= sigma[r]} . d![measure y] . 0)";
    let plts = explore(&start(src), &ExploreOptions::default()).unwrap();
    // sigma10 = Z leaves |0⟩ alone.
    let outs: Vec<&Label> = plts.edges.iter().map(|e| &e.label).filter(|l| l.is_visible()).collect();
    assert_eq!(
        outs,
        vec![&Label::Output {
            channel: 0,
            message: vec![OutputValue::Bit(0)]
        }]
    );
}

#[test]
fn label_rendering() {
    let names = vec!["a".to_string(), "b".to_string()];
    assert_eq!(Label::Tau.render(&names), "tau");
    assert_eq!(Label::Prob(0.25).render(&names), "p=0.2500");
    let input = Label::Input {
        channel: 0,
        message: vec![InputValue::Qubit(2)],
    };
    assert_eq!(input.render(&names), "a?[ψ2]");
    let output = Label::Output {
        channel: 1,
        message: vec![OutputValue::Bit(0), OutputValue::Qubit],
    };
    assert_eq!(output.render(&names), "b![0,qubit]");
}

#[test]
fn plts_json_shape() {
    let plts = explore(&start(BELL), &ExploreOptions::default()).unwrap();
    let j = plts.to_json();
    assert_eq!(j["initial"], 0);
    assert!(j["states"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["id"].is_u64() && s["terminal"].is_boolean() && s["kind"].is_string()));
    let probs: Vec<f64> = j["edges"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|e| e["p"].as_f64())
        .collect();
    assert_eq!(probs.len(), 2);
    assert!(probs.iter().all(|p| (p - 0.5).abs() < 1e-9));
}
