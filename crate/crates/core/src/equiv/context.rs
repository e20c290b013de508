//! Process contexts and sampled congruence checks.
//!
//! A context is a one-definition program whose body calls `HOLE` exactly
//! once. Filling it with a program replaces that call by a call to the
//! program's entry process and makes the context the new entry.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{branching_bisim, Witness};
use crate::qstate::StateVector;
use crate::semantics::{default_qubit_tests, explore_program, SemanticsError, DEFAULT_MAX_STATES};
use crate::syntax::{
    fresh_name, parse_program, EntryCall, Name, ParseError, Process, ProcessDef, ProcessKind, Program, Sidecar,
};
use crate::types::check_program;

/// Name of the placeholder process inside a context.
pub const HOLE: &str = "HOLE";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContextError {
    #[error("context does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("context must define exactly one process, found {0}")]
    Shape(usize),
    #[error("context must contain exactly one hole, found {0}")]
    Holes(usize),
    #[error("program has no entry process")]
    NoEntry,
    #[error("hole takes {hole} argument(s) but the entry process has {entry} parameter(s)")]
    HoleArity { hole: usize, entry: usize },
}

#[derive(Clone, Debug)]
pub struct ProcessContext {
    pub definition: ProcessDef,
    /// Signature text for the context process, without the name.
    pub signature: String,
    pub hole_arity: usize,
    pub source: String,
}

fn holes(p: &Process) -> Vec<&Vec<Name>> {
    let mut out = Vec::new();
    p.visit(&mut |q| {
        if let ProcessKind::Call { process, args } = &q.kind {
            if process == HOLE {
                out.push(args);
            }
        }
    });
    out
}

impl ProcessContext {
    /// Parses `Name(params) = body` where the body calls `HOLE` once, with
    /// `signature` listing the parameter types (e.g. `^[Bit]`).
    pub fn parse(source: &str, signature: &str, hole_arity: usize) -> Result<Self, ContextError> {
        let params: Vec<String> = (0..hole_arity).map(|i| format!("h{i}")).collect();
        let stub = format!("{HOLE}({}) = 0\n{source}", params.join(","));
        let program = parse_program(&stub)?;
        let defs: Vec<&ProcessDef> = program.definitions.iter().filter(|d| d.name != HOLE).collect();
        if defs.len() != 1 {
            return Err(ContextError::Shape(defs.len()));
        }
        let definition = defs[0].clone();
        let found = holes(&definition.body).len();
        if found != 1 {
            return Err(ContextError::Holes(found));
        }
        Ok(Self {
            definition,
            signature: signature.to_string(),
            hole_arity,
            source: source.to_string(),
        })
    }

    /// The empty context `Ctx(x1..xn) = HOLE(x1..xn)`.
    pub fn trivial(signature: &str, arity: usize) -> Self {
        let params: Vec<String> = (0..arity).map(|i| format!("x{i}")).collect();
        let src = format!("Ctx({0}) = {HOLE}({0})", params.join(","));
        Self::parse(&src, signature, arity).expect("trivial context is well formed")
    }
}

fn replace_hole(p: &Process, target: &Name) -> Process {
    use ProcessKind::*;
    let kind = match &p.kind {
        Call { process, args } if process == HOLE => Call {
            process: target.clone(),
            args: args.clone(),
        },
        Input { channel, binders, cont } => Input {
            channel: channel.clone(),
            binders: binders.clone(),
            cont: Box::new(replace_hole(cont, target)),
        },
        Output { channel, payload, cont } => Output {
            channel: channel.clone(),
            payload: payload.clone(),
            cont: Box::new(replace_hole(cont, target)),
        },
        Action { targets, gate, cont } => Action {
            targets: targets.clone(),
            gate: gate.clone(),
            cont: Box::new(replace_hole(cont, target)),
        },
        Qbit { binders, cont } => Qbit {
            binders: binders.clone(),
            cont: Box::new(replace_hole(cont, target)),
        },
        New { binder, cont } => New {
            binder: binder.clone(),
            cont: Box::new(replace_hole(cont, target)),
        },
        Par(l, r) => Par(Box::new(replace_hole(l, target)), Box::new(replace_hole(r, target))),
        other => other.clone(),
    };
    Process { kind, pos: p.pos }
}

/// `C[P]`: the program's definitions plus the context, entered at the
/// context.
pub fn fill(context: &ProcessContext, program: &Program) -> Result<Program, ContextError> {
    let entry = program.entry().ok_or(ContextError::NoEntry)?;
    let target = program.definition(&entry.process).ok_or(ContextError::NoEntry)?;
    if target.params.len() != context.hole_arity {
        return Err(ContextError::HoleArity {
            hole: context.hole_arity,
            entry: target.params.len(),
        });
    }
    let taken: BTreeSet<Name> = program.definitions.iter().map(|d| d.name.clone()).collect();
    let name = fresh_name(&context.definition.name, &taken);
    let name = if taken.contains(&context.definition.name) {
        name
    } else {
        context.definition.name.clone()
    };
    let def = ProcessDef {
        name: name.clone(),
        params: context.definition.params.clone(),
        body: replace_hole(&context.definition.body, &entry.process),
        pos: context.definition.pos,
    };
    let mut filled = program.clone();
    filled.sidecars.push(Sidecar {
        text: format!("{name} : {}", context.signature),
        pos: Default::default(),
    });
    filled.main = Some(EntryCall {
        process: name,
        args: def.params.clone(),
        pos: def.pos,
    });
    filled.definitions.push(def);
    Ok(filled)
}

fn gates(rng: &mut ChaCha8Rng, qubit: &str, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| format!("{{{qubit} *= {}}} . ", ["H", "X", "Z"].choose(rng).expect("non-empty")))
        .collect()
}

/// A random context around a hole of type `^[Qbit], ^[Qbit]` (input channel
/// first, output channel second).
pub fn generate_context(rng: &mut ChaCha8Rng) -> ProcessContext {
    let kind = rng.gen_range(0..10);
    let prep = gates(rng, "p", 3);
    let post = gates(rng, "z", 2);
    let (src, sig) = match kind {
        0 => (format!("Ctx(i,o) = {HOLE}(i,o)"), "^[Qbit], ^[Qbit]"),
        1 => (
            format!("Ctx(r) = (new a)(new b)({HOLE}(a,b) | (qbit p) {prep}a![p] . b?[z] . {post}r![measure z] . 0)"),
            "^[Bit]",
        ),
        2 => (
            format!("Ctx(r) = (new a)(new b)({HOLE}(a,b) | (qbit p) {prep}a![p] . b?[z] . {post}r![z] . 0)"),
            "^[Qbit]",
        ),
        3 => (
            format!(
                "Ctx(r) = (new a)(new b)({HOLE}(a,b) | (qbit p,k) {{p *= H}} . {{p,k *= CNot}} . {prep}a![p] . b?[z] . {post}r![z,k] . 0)"
            ),
            "^[Qbit,Qbit]",
        ),
        4 => (
            format!(
                "Ctx(r) = (new a)(new b)({HOLE}(a,b) | (qbit p,k) {{p *= H}} . {{p,k *= CNot}} . {prep}a![p] . b?[z] . {{z,k *= CNot}} . {{z *= H}} . r![measure z,k] . 0)"
            ),
            "^[Bit,Bit]",
        ),
        5 => (
            format!("Ctx(i,o) = (new a)({HOLE}(a,o) | i?[z] . {post}a![z] . 0)"),
            "^[Qbit], ^[Qbit]",
        ),
        6 => (
            format!("Ctx(i,o) = (new b)({HOLE}(i,b) | b?[z] . {post}o![z] . 0)"),
            "^[Qbit], ^[Qbit]",
        ),
        7 => (format!("Ctx(s,i,o) = s?[t] . {HOLE}(i,o)"), "^[Bit], ^[Qbit], ^[Qbit]"),
        8 => (format!("Ctx(s,i,o) = s![1] . {HOLE}(i,o)"), "^[Bit], ^[Qbit], ^[Qbit]"),
        _ => {
            let watch = gates(rng, "w", 2);
            (
                format!("Ctx(s,i,o) = ({HOLE}(i,o) | (qbit w) {{w *= H}} . {watch}s![measure w] . 0)"),
                "^[Bit], ^[Qbit], ^[Qbit]",
            )
        }
    };
    ProcessContext::parse(&src, sig, 2).expect("generated contexts are well formed")
}

#[derive(Clone, Debug)]
pub struct CongruenceOptions {
    pub max_states: usize,
    pub tests: Vec<StateVector>,
}

impl Default for CongruenceOptions {
    fn default() -> Self {
        Self {
            max_states: DEFAULT_MAX_STATES,
            tests: default_qubit_tests(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SampleOutcome {
    Equivalent,
    Counterexample(Witness),
    /// Exploration hit the state cap.
    Skipped(String),
    /// The filled programs could not be checked at all.
    Error(String),
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub context: String,
    pub outcome: SampleOutcome,
}

#[derive(Clone, Debug, Default)]
pub struct CongruenceReport {
    pub samples: Vec<Sample>,
}

impl CongruenceReport {
    fn count(&self, f: impl Fn(&SampleOutcome) -> bool) -> usize {
        self.samples.iter().filter(|s| f(&s.outcome)).count()
    }

    pub fn equivalent(&self) -> usize {
        self.count(|o| *o == SampleOutcome::Equivalent)
    }

    pub fn counterexamples(&self) -> usize {
        self.count(|o| matches!(o, SampleOutcome::Counterexample(_)))
    }

    pub fn skipped(&self) -> usize {
        self.count(|o| matches!(o, SampleOutcome::Skipped(_)))
    }

    pub fn errors(&self) -> usize {
        self.count(|o| matches!(o, SampleOutcome::Error(_)))
    }
}

fn check_one(context: &ProcessContext, a: &Program, b: &Program, options: &CongruenceOptions) -> SampleOutcome {
    let mut systems = Vec::new();
    for program in [a, b] {
        let filled = match fill(context, program) {
            Ok(p) => p,
            Err(e) => return SampleOutcome::Error(e.to_string()),
        };
        let diags = check_program(&filled);
        if let Some(d) = diags.first() {
            return SampleOutcome::Error(format!("filled program is ill-typed: {d}"));
        }
        match explore_program(Arc::new(filled), options.tests.clone(), options.max_states) {
            Ok(p) => systems.push(p),
            Err(SemanticsError::StateCap { cap }) => {
                return SampleOutcome::Skipped(format!("exceeded {cap} states"));
            }
            Err(e) => return SampleOutcome::Error(e.to_string()),
        }
    }
    let verdict = branching_bisim(&systems[0], &systems[1]);
    match verdict.witness {
        None => SampleOutcome::Equivalent,
        Some(w) => SampleOutcome::Counterexample(w),
    }
}

/// Checks `C[A] ≅ C[B]` for `count` contexts drawn from a generator seeded
/// with `seed`. Evidence only: a clean report is not a proof.
pub fn check_congruence_samples(
    a: &Program,
    b: &Program,
    seed: u64,
    count: usize,
    options: &CongruenceOptions,
) -> CongruenceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..count)
        .map(|_| {
            let context = generate_context(&mut rng);
            let outcome = check_one(&context, a, b, options);
            Sample {
                context: context.source,
                outcome,
            }
        })
        .collect();
    CongruenceReport { samples }
}
