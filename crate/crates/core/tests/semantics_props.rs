mod common;

use std::sync::Arc;

use common::*;
use cqp::semantics::{
    basis_qubit_tests, default_qubit_tests, entry_alphabet, explore_program, explore_with_merges,
    initial_configuration, run_sampled, step, Configuration, ExploreOptions, InputAlphabet, Merge, SemanticsError,
    Transition,
};
use cqp::syntax::{parse_program, Program};
use cqp::types::check_program;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TYPED: [&str; 6] = [
    "teleport.cqp",
    "identity.cqp",
    "bell.cqp",
    "coin.cqp",
    "zero.cqp",
    "teleport_harness.cqp",
];

fn generated_programs(count: usize) -> Vec<Program> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..count)
        .map(|_| {
            let src = ProgramGen::new(&mut rng).program();
            parse_program(&src).unwrap_or_else(|e| panic!("{e}\n{src}"))
        })
        .collect()
}

fn merges_of(program: &Program) -> (Vec<Merge>, cqp::semantics::Plts, InputAlphabet) {
    let program = Arc::new(program.clone());
    let entry = program.entry().unwrap();
    let alphabet = entry_alphabet(&program, default_qubit_tests());
    let config = initial_configuration(program, &entry).unwrap();
    let options = ExploreOptions {
        max_states: 20_000,
        alphabet: alphabet.clone(),
    };
    let (plts, merges) = explore_with_merges(&config, &options).unwrap();
    (merges, plts, alphabet)
}

fn same_steps(a: &[Transition], b: &[Transition], channels: &[String]) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} vs {} transitions", a.len(), b.len()));
    }
    for (x, y) in a.iter().zip(b) {
        if x.label.render(channels) != y.label.render(channels) {
            return Err(format!("{:?} vs {:?}", x.label, y.label));
        }
        match (&x.payload, &y.payload) {
            (Some(p), Some(q)) if p.approx_eq(q, 1e-9) => {}
            (None, None) => {}
            _ => return Err("payloads differ".into()),
        }
        if x.outcomes.len() != y.outcomes.len() {
            return Err("outcome counts differ".into());
        }
        for ((p, c), (q, d)) in x.outcomes.iter().zip(&y.outcomes) {
            if (p - q).abs() > 1e-9 || !c.equivalent(d) {
                return Err(format!("successors differ:\n  {c}\n  {d}"));
            }
        }
    }
    Ok(())
}

#[test]
fn merged_configurations_step_alike() {
    let mut programs: Vec<Program> = TYPED.iter().map(|f| example(f)).collect();
    programs.extend(generated_programs(60));
    let mut pairs: Vec<(Configuration, Configuration, InputAlphabet)> = Vec::new();
    for program in &programs {
        let (merges, plts, alphabet) = merges_of(program);
        for m in merges {
            let existing = plts.states[m.existing].config.clone().unwrap();
            pairs.push((m.found, existing, alphabet.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    pairs.shuffle(&mut rng);
    assert!(pairs.len() >= 50, "only {} merges", pairs.len());
    for (found, existing, alphabet) in pairs.iter().take(50) {
        assert_eq!(found.key(), existing.key());
        let a = step(found, alphabet).unwrap();
        let b = step(existing, alphabet).unwrap();
        if let Err(e) = same_steps(&a, &b, &found.visible) {
            panic!("{e}\nfound:    {found}\nexisting: {existing}");
        }
    }
}

#[test]
fn typed_programs_never_violate_ownership() {
    let programs = generated_programs(100);
    for (k, program) in programs.iter().enumerate() {
        let diags = check_program(program);
        assert!(diags.is_empty(), "program {k}: {diags:?}");
        match explore_program(Arc::new(program.clone()), basis_qubit_tests(), 20_000) {
            Ok(p) => p.check_invariants().unwrap(),
            Err(SemanticsError::StateCap { .. }) => {}
            Err(e) => panic!("program {k}: {e}"),
        }
    }
    for file in TYPED {
        let p = explore_program(Arc::new(example(file)), default_qubit_tests(), 20_000).unwrap();
        p.check_invariants().unwrap();
    }
}

#[test]
fn the_checker_agrees_with_the_runtime_on_negatives() {
    for file in ["negative/clone.cqp", "negative/use_after_send.cqp"] {
        let program = example(file);
        assert!(!check_program(&program).is_empty());
        match explore_program(Arc::new(program), basis_qubit_tests(), 20_000) {
            Err(SemanticsError::OwnershipViolation(_)) => {}
            other => panic!("{file}: expected an ownership violation, got {other:?}"),
        }
    }
}

#[test]
fn typechecking_is_deterministic() {
    for file in ["negative/clone.cqp", "negative/use_after_send.cqp", "teleport.cqp"] {
        let program = example(file);
        assert_eq!(check_program(&program), check_program(&program));
    }
}

#[test]
fn seeded_runs_repeat() {
    let program = Arc::new(example("teleport_harness.cqp"));
    let config = initial_configuration(program.clone(), &program.entry().unwrap()).unwrap();
    let alphabet = InputAlphabet::none();
    let render = |seed| {
        run_sampled(&config, seed, &alphabet, 1000)
            .unwrap()
            .iter()
            .map(|s| format!("{:?} {}", s.probability, s.config))
            .collect::<Vec<_>>()
    };
    for seed in 0..5 {
        assert_eq!(render(seed), render(seed));
    }
}
