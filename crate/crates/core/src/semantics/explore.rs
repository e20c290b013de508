use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use super::{step, Configuration, InputValue, Label, Result, SemanticsError};
use crate::qstate::{DensityMatrix, StateVector};
use crate::syntax::{Name, Program};
use crate::types::{signatures_from_sidecars, TypeExpr};

pub const DEFAULT_MAX_STATES: usize = 20_000;

fn qubit(a: Complex64, b: Complex64) -> StateVector {
    StateVector::from_amplitudes(vec![a, b]).expect("normalised test state")
}

/// `|0⟩`, `|1⟩`, `H|0⟩` and `(|0⟩ + i|1⟩)/√2`.
pub fn default_qubit_tests() -> Vec<StateVector> {
    let (o, l, h) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), FRAC_1_SQRT_2);
    vec![
        qubit(l, o),
        qubit(o, l),
        qubit(Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
        qubit(Complex64::new(h, 0.0), Complex64::new(0.0, h)),
    ]
}

/// `|0⟩` and `|1⟩`.
pub fn basis_qubit_tests() -> Vec<StateVector> {
    default_qubit_tests().into_iter().take(2).collect()
}

/// Messages the environment may inject on each visible channel.
#[derive(Clone, Debug, Default)]
pub struct InputAlphabet {
    /// Single-qubit states referenced by `InputValue::Qubit(index)`.
    pub tests: Vec<StateVector>,
    pub messages: BTreeMap<usize, Vec<Vec<InputValue>>>,
}

impl InputAlphabet {
    pub fn none() -> Self {
        Self::default()
    }

    /// Every message a channel of the given type can carry, with qubit
    /// components drawn from `tests` and bits from {0, 1}. Channels whose
    /// messages contain channels get no inputs.
    pub fn for_channels(types: &[TypeExpr], tests: Vec<StateVector>) -> Self {
        let mut messages = BTreeMap::new();
        for (i, ty) in types.iter().enumerate() {
            let TypeExpr::Channel(items) = ty else {
                continue;
            };
            let mut all: Vec<Vec<InputValue>> = vec![Vec::new()];
            for item in items {
                let choices: Vec<InputValue> = match item {
                    TypeExpr::Qbit => (0..tests.len()).map(InputValue::Qubit).collect(),
                    TypeExpr::Bit => vec![InputValue::Bit(0), InputValue::Bit(1)],
                    _ => Vec::new(),
                };
                all = all
                    .iter()
                    .flat_map(|prefix| {
                        choices.iter().map(move |c| {
                            let mut m = prefix.clone();
                            m.push(*c);
                            m
                        })
                    })
                    .collect();
            }
            if !all.is_empty() {
                messages.insert(i, all);
            }
        }
        Self { tests, messages }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateKind {
    Nondeterministic,
    Probabilistic,
}

#[derive(Clone, Debug)]
pub struct PltsState {
    pub kind: StateKind,
    /// No threads left. A stuck configuration with threads is not terminal.
    pub terminal: bool,
    pub config: Option<Configuration>,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub src: usize,
    pub label: Label,
    pub payload: Option<DensityMatrix>,
    pub dst: usize,
}

/// A finite probabilistic labelled transition system. Probabilistic states
/// only have `Prob` edges; nondeterministic states never do.
#[derive(Clone, Debug)]
pub struct Plts {
    pub states: Vec<PltsState>,
    pub edges: Vec<Edge>,
    pub initial: usize,
    /// Names of the visible channels, for rendering labels.
    pub channels: Vec<Name>,
}

impl Plts {
    pub fn new(channels: Vec<Name>) -> Self {
        Self {
            states: Vec::new(),
            edges: Vec::new(),
            initial: 0,
            channels,
        }
    }

    pub fn add_state(&mut self, kind: StateKind, terminal: bool) -> usize {
        self.states.push(PltsState {
            kind,
            terminal,
            config: None,
        });
        self.states.len() - 1
    }

    pub fn add_edge(&mut self, src: usize, label: Label, payload: Option<DensityMatrix>, dst: usize) {
        self.edges.push(Edge {
            src,
            label,
            payload,
            dst,
        });
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Outgoing edge indices per state.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.states.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.src].push(i);
        }
        adj
    }

    /// Checks edge kinds per state and that probabilities sum to one.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let adj = self.adjacency();
        for (s, state) in self.states.iter().enumerate() {
            let out: Vec<&Edge> = adj[s].iter().map(|&i| &self.edges[i]).collect();
            match state.kind {
                StateKind::Probabilistic => {
                    let mut total = 0.0;
                    for e in &out {
                        match e.label {
                            Label::Prob(p) if p > 0.0 && p <= 1.0 + 1e-9 => total += p,
                            _ => return Err(format!("state {s}: bad edge {:?} from probabilistic state", e.label)),
                        }
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(format!("state {s}: probabilities sum to {total}"));
                    }
                }
                StateKind::Nondeterministic => {
                    if out.iter().any(|e| matches!(e.label, Label::Prob(_))) {
                        return Err(format!("state {s}: probability edge from nondeterministic state"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `{states:[{id,kind,terminal}], edges:[{src,label,p?,dst}], initial}`.
    pub fn to_json(&self) -> Json {
        let states: Vec<Json> = self
            .states
            .iter()
            .enumerate()
            .map(|(id, s)| {
                json!({
                    "id": id,
                    "kind": match s.kind {
                        StateKind::Nondeterministic => "nondeterministic",
                        StateKind::Probabilistic => "probabilistic",
                    },
                    "terminal": s.terminal,
                })
            })
            .collect();
        let edges: Vec<Json> = self
            .edges
            .iter()
            .map(|e| {
                let mut obj = json!({
                    "src": e.src,
                    "label": e.label.render(&self.channels),
                    "dst": e.dst,
                });
                if let Label::Prob(p) = e.label {
                    obj["p"] = json!(p);
                }
                obj
            })
            .collect();
        json!({ "states": states, "edges": edges, "initial": self.initial })
    }
}

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    pub max_states: usize,
    pub alphabet: InputAlphabet,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            max_states: DEFAULT_MAX_STATES,
            alphabet: InputAlphabet::none(),
        }
    }
}

/// A configuration that was recognised as an already explored state.
#[derive(Clone, Debug)]
pub struct Merge {
    pub found: Configuration,
    pub existing: usize,
}

pub fn explore(config: &Configuration, options: &ExploreOptions) -> Result<Plts> {
    Ok(explore_with_merges(config, options)?.0)
}

/// Breadth-first exploration. Also returns every deduplication merge made
/// along the way.
pub fn explore_with_merges(config: &Configuration, options: &ExploreOptions) -> Result<(Plts, Vec<Merge>)> {
    let mut plts = Plts::new(config.visible.clone());
    let mut index: HashMap<String, Vec<usize>> = HashMap::new();
    let mut merges = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern =
        |plts: &mut Plts, c: Configuration, queue: &mut VecDeque<usize>, merges: &mut Vec<Merge>| -> Result<usize> {
            let bucket = index.entry(c.key().to_string()).or_default();
            if let Some(&existing) = bucket
                .iter()
                .find(|&&s| plts.states[s].config.as_ref().is_some_and(|other| other.equivalent(&c)))
            {
                merges.push(Merge { found: c, existing });
                return Ok(existing);
            }
            if plts.states.len() >= options.max_states {
                return Err(SemanticsError::StateCap {
                    cap: options.max_states,
                });
            }
            let id = plts.add_state(StateKind::Nondeterministic, c.is_terminal());
            plts.states[id].config = Some(c);
            bucket.push(id);
            queue.push_back(id);
            Ok(id)
        };

    plts.initial = intern(&mut plts, config.clone(), &mut queue, &mut merges)?;
    while let Some(s) = queue.pop_front() {
        let current = plts.states[s]
            .config
            .clone()
            .expect("explored states carry a configuration");
        for t in step(&current, &options.alphabet)? {
            if t.outcomes.len() == 1 {
                let (_, next) = t.outcomes.into_iter().next().expect("one outcome");
                let dst = intern(&mut plts, next, &mut queue, &mut merges)?;
                plts.add_edge(s, t.label, t.payload, dst);
                continue;
            }
            if plts.states.len() >= options.max_states {
                return Err(SemanticsError::StateCap {
                    cap: options.max_states,
                });
            }
            let p = plts.add_state(StateKind::Probabilistic, false);
            plts.add_edge(s, Label::Tau, None, p);
            let mut targets: Vec<(usize, f64)> = Vec::new();
            for (prob, next) in t.outcomes {
                let dst = intern(&mut plts, next, &mut queue, &mut merges)?;
                match targets.iter_mut().find(|(d, _)| *d == dst) {
                    Some((_, acc)) => *acc += prob,
                    None => targets.push((dst, prob)),
                }
            }
            for (dst, prob) in targets {
                plts.add_edge(p, Label::Prob(prob), None, dst);
            }
        }
    }
    Ok((plts, merges))
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub label: Label,
    /// Probability of the sampled outcome when the step was random.
    pub probability: Option<f64>,
    pub payload: Option<DensityMatrix>,
    pub config: Configuration,
}

/// Follows one path: always the first enabled transition, with random
/// outcomes drawn from a generator seeded by `seed`. Stops when nothing is
/// enabled or after `max_steps` steps.
pub fn run_sampled(
    config: &Configuration,
    seed: u64,
    alphabet: &InputAlphabet,
    max_steps: usize,
) -> Result<Vec<TraceStep>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = config.clone();
    let mut trace = Vec::new();
    for _ in 0..max_steps {
        let Some(t) = step(&current, alphabet)?.into_iter().next() else {
            break;
        };
        let random = t.outcomes.len() > 1;
        let draw: f64 = if random { rng.gen() } else { 0.0 };
        let mut acc = 0.0;
        let last = t.outcomes.len() - 1;
        let (prob, next) = t
            .outcomes
            .into_iter()
            .enumerate()
            .find(|(i, (p, _))| {
                acc += p;
                draw < acc || *i == last
            })
            .map(|(_, o)| o)
            .expect("at least one outcome");
        trace.push(TraceStep {
            label: t.label,
            probability: random.then_some(prob),
            payload: t.payload,
            config: next.clone(),
        });
        current = next;
    }
    Ok(trace)
}

/// Input alphabet for a program's entry, read from the entry process's
/// signature. Without a signature no inputs are offered.
pub fn entry_alphabet(program: &Program, tests: Vec<StateVector>) -> InputAlphabet {
    let (signatures, _) = signatures_from_sidecars(&program.sidecars);
    match program.entry().and_then(|e| signatures.get(&e.process).cloned()) {
        Some(types) => InputAlphabet::for_channels(&types, tests),
        None => InputAlphabet {
            tests,
            messages: BTreeMap::new(),
        },
    }
}

/// Starts a program at its entry and explores it with inputs drawn from
/// its entry signature.
pub fn explore_program(program: Arc<Program>, tests: Vec<StateVector>, max_states: usize) -> Result<Plts> {
    let entry = program
        .entry()
        .ok_or_else(|| SemanticsError::UnknownProcess("<entry>".into()))?;
    let alphabet = entry_alphabet(&program, tests);
    let config = super::initial_configuration(program, &entry)?;
    explore(&config, &ExploreOptions { max_states, alphabet })
}
