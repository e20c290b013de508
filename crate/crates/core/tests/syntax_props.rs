mod common;

use std::collections::{BTreeMap, BTreeSet};

use cqp::qstate::StandardGate;
use cqp::syntax::{
    alpha_equivalent, free_names, parse_program, pretty_print, pretty_print_program, substitute, Expr, GateRef, Name,
    Process,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

const POOL: [&str; 5] = ["a", "b", "c", "x", "y"];

fn name() -> impl Strategy<Value = Name> {
    prop::sample::select(&POOL[..]).prop_map(String::from)
}

fn two_names() -> impl Strategy<Value = Vec<Name>> {
    prop::sample::subsequence(&POOL[..], 2)
        .prop_shuffle()
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn names() -> impl Strategy<Value = Vec<Name>> {
    prop_oneof![name().prop_map(|n| vec![n]), two_names()]
}

fn expr() -> impl Strategy<Value = Expr> {
    prop_oneof![
        name().prop_map(Expr::Var),
        (0..2u8).prop_map(Expr::Bit),
        names().prop_map(Expr::Measure),
    ]
}

fn gate() -> impl Strategy<Value = (Vec<Name>, GateRef)> {
    prop_oneof![
        (
            name(),
            prop::sample::select(vec![StandardGate::H, StandardGate::X, StandardGate::Z])
        )
            .prop_map(|(n, g)| (vec![n], GateRef::Fixed(g))),
        two_names().prop_map(|ns| (ns, GateRef::Fixed(StandardGate::CNot))),
        (name(), name()).prop_map(|(n, r)| (vec![n], GateRef::Sigma(r))),
    ]
}

/// Random terms over a five-name pool, so binders often shadow or clash.
/// Calls go to `Q`, which takes one argument.
fn term() -> impl Strategy<Value = Process> {
    let leaf = prop_oneof![Just(Process::nil()), name().prop_map(|n| Process::call("Q", [n]))];
    leaf.prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (name(), names(), inner.clone()).prop_map(|(c, bs, k)| Process::input(c, bs, k)),
            (name(), prop::collection::vec(expr(), 1..3), inner.clone())
                .prop_map(|(c, es, k)| Process::output(c, es, k)),
            (gate(), inner.clone()).prop_map(|((ts, g), k)| Process::action(ts, g, k)),
            (names(), inner.clone()).prop_map(|(bs, k)| Process::qbit(bs, k)),
            (name(), inner.clone()).prop_map(|(b, k)| Process::new_channel(b, k)),
            (inner.clone(), inner).prop_map(|(l, r)| Process::par(l, r)),
        ]
    })
}

fn as_program(t: &Process) -> String {
    let params: Vec<Name> = free_names(t).into_iter().collect();
    format!("Q(z) = 0\nP({}) = {}\n", params.join(","), pretty_print(t))
}

fn mapping() -> impl Strategy<Value = BTreeMap<Name, Name>> {
    prop::collection::btree_map(name(), name(), 0..4)
}

/// Renames every binder to a fresh name, giving an alpha-variant.
fn rename_binders(t: &Process, counter: &mut usize) -> Process {
    use cqp::syntax::ProcessKind::*;
    let fresh = |old: &Vec<Name>, cont: &Process, counter: &mut usize| {
        let mut m = BTreeMap::new();
        let new: Vec<Name> = old
            .iter()
            .map(|b| {
                *counter += 1;
                let n = format!("r{counter}");
                m.insert(b.clone(), n.clone());
                n
            })
            .collect();
        (new, substitute(&rename_binders(cont, counter), &m))
    };
    match &t.kind {
        Input { channel, binders, cont } => {
            let (bs, k) = fresh(binders, cont, counter);
            Process::input(channel.clone(), bs, k)
        }
        Qbit { binders, cont } => {
            let (bs, k) = fresh(binders, cont, counter);
            Process::qbit(bs, k)
        }
        New { binder, cont } => {
            let (bs, k) = fresh(&vec![binder.clone()], cont, counter);
            Process::new_channel(bs[0].clone(), k)
        }
        Output { channel, payload, cont } => {
            Process::output(channel.clone(), payload.clone(), rename_binders(cont, counter))
        }
        Action { targets, gate, cont } => Process::action(targets.clone(), gate.clone(), rename_binders(cont, counter)),
        Par(l, r) => Process::par(rename_binders(l, counter), rename_binders(r, counter)),
        Nil | Call { .. } => t.clone(),
    }
}

proptest! {
    #[test]
    fn printed_terms_parse_back(t in term()) {
        let src = as_program(&t);
        let program = parse_program(&src).unwrap();
        prop_assert_eq!(&program.definition("P").unwrap().body, &t);
        prop_assert_eq!(pretty_print_program(&parse_program(&pretty_print_program(&program)).unwrap()),
            pretty_print_program(&program));
    }

    #[test]
    fn substitution_maps_free_names(t in term(), m in mapping()) {
        let free = free_names(&t);
        let m: BTreeMap<Name, Name> = m.into_iter().filter(|(k, _)| free.contains(k)).collect();
        let expected: BTreeSet<Name> = free
            .iter()
            .map(|n| m.get(n).unwrap_or(n).clone())
            .collect();
        let result = substitute(&t, &m);
        prop_assert_eq!(free_names(&result), expected);
    }

    #[test]
    fn renamed_binders_are_alpha_equivalent(t in term()) {
        let renamed = rename_binders(&t, &mut 0);
        prop_assert!(alpha_equivalent(&t, &renamed));
        prop_assert!(alpha_equivalent(&renamed, &t));
        prop_assert_eq!(free_names(&renamed), free_names(&t));
    }
}

#[test]
fn corpus_round_trips() {
    for file in [
        "teleport.cqp",
        "identity.cqp",
        "bell.cqp",
        "coin.cqp",
        "zero.cqp",
        "teleport_harness.cqp",
        "negative/clone.cqp",
        "negative/use_after_send.cqp",
    ] {
        let program = common::example(file);
        let again = parse_program(&pretty_print_program(&program)).unwrap();
        assert_eq!(again.definitions, program.definitions, "{file}");
        assert_eq!(again.sidecars.len(), program.sidecars.len(), "{file}");
    }
}

#[test]
fn alpha_equivalence_is_an_equivalence_relation() {
    let mut runner = TestRunner::deterministic();
    let strategy = term();
    let mut pool = Vec::new();
    while pool.len() < 200 {
        let t = strategy.new_tree(&mut runner).unwrap().current();
        pool.push(rename_binders(&t, &mut 1000));
        pool.push(t);
    }
    let n = pool.len();
    let rel: Vec<Vec<bool>> = pool
        .iter()
        .map(|a| pool.iter().map(|b| alpha_equivalent(a, b)).collect())
        .collect();
    let mut chains = 0;
    for i in 0..n {
        assert!(rel[i][i], "not reflexive on {}", pretty_print(&pool[i]));
        for j in 0..n {
            assert_eq!(rel[i][j], rel[j][i], "not symmetric");
            if !rel[i][j] {
                continue;
            }
            for (jk, ik) in rel[j].iter().zip(&rel[i]) {
                if *jk {
                    chains += 1;
                    assert!(*ik, "not transitive");
                }
            }
        }
    }
    assert!(chains > n);
}
