//! Operational semantics: configurations, labelled small steps, exhaustive
//! exploration into a probabilistic transition system, and seeded runs.
//!
//! A configuration is a global state vector plus a list of threads. Each
//! thread carries its own name environment and the set of qubit ids it
//! owns. Parallel composition is split into separate threads eagerly, so it
//! never shows up as a step. Channels named by the entry's parameters are
//! visible: they take part in external input and output as well as internal
//! handshakes. Channels made with `(new c)` are hidden.

mod canon;
mod explore;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::qstate::{DensityMatrix, QStateError, StandardGate, StateVector, DEFAULT_MAX_QUBITS};
use crate::syntax::{pretty_print, EntryCall, Expr, GateRef, Name, Process, ProcessKind, Program};

pub use explore::{
    basis_qubit_tests, default_qubit_tests, entry_alphabet, explore, explore_program, explore_with_merges, run_sampled,
    Edge, ExploreOptions, InputAlphabet, Merge, Plts, PltsState, StateKind, TraceStep, DEFAULT_MAX_STATES,
};

/// Outcomes whose probability falls below this are rounding noise.
const MIN_PROBABILITY: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Qubit(usize),
    Bit(u8),
    Channel(usize),
    /// A multi-component classical message bound to one name.
    Tuple(Vec<Value>),
}

impl Value {
    fn is_classical(&self) -> bool {
        match self {
            Value::Bit(_) => true,
            Value::Tuple(items) => items.iter().all(Value::is_classical),
            _ => false,
        }
    }

    fn flatten_into(&self, out: &mut Vec<Value>) {
        match self {
            Value::Tuple(items) => items.iter().for_each(|v| v.flatten_into(out)),
            other => out.push(other.clone()),
        }
    }
}

/// One component of an injected message: a bit, or the index of a qubit
/// test state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputValue {
    Bit(u8),
    Qubit(usize),
}

/// One component of an emitted message. Qubit components are described by
/// the edge's density matrix rather than inline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputValue {
    Bit(u8),
    Qubit,
    Channel(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Tau,
    Input { channel: usize, message: Vec<InputValue> },
    Output { channel: usize, message: Vec<OutputValue> },
    Prob(f64),
}

impl Label {
    pub fn is_visible(&self) -> bool {
        matches!(self, Label::Input { .. } | Label::Output { .. })
    }

    /// Text form using the given visible channel names, e.g. `a?[ψ2]`,
    /// `b![qubit]`, `c![0,1]`, `tau`, `p=0.2500`.
    pub fn render(&self, channels: &[Name]) -> String {
        let chan = |c: &usize| channels.get(*c).cloned().unwrap_or_else(|| format!("#{c}"));
        match self {
            Label::Tau => "tau".into(),
            Label::Prob(p) => format!("p={p:.4}"),
            Label::Input { channel, message } => {
                let items: Vec<String> = message
                    .iter()
                    .map(|v| match v {
                        InputValue::Bit(b) => b.to_string(),
                        InputValue::Qubit(k) => format!("ψ{k}"),
                    })
                    .collect();
                format!("{}?[{}]", chan(channel), items.join(","))
            }
            Label::Output { channel, message } => {
                let items: Vec<String> = message
                    .iter()
                    .map(|v| match v {
                        OutputValue::Bit(b) => b.to_string(),
                        OutputValue::Qubit => "qubit".into(),
                        OutputValue::Channel(c) => chan(c),
                    })
                    .collect();
                format!("{}![{}]", chan(channel), items.join(","))
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("unknown process `{0}`")]
    UnknownProcess(Name),
    #[error("`{process}` expects {expected} argument(s), got {got}")]
    ArityMismatch { process: Name, expected: usize, got: usize },
    #[error("name `{0}` is unbound at runtime")]
    UnboundName(Name),
    #[error("ownership violation: {0}")]
    OwnershipViolation(String),
    #[error("runtime type error: {0}")]
    RuntimeType(String),
    #[error("message of {values} component(s) cannot bind {binders} name(s)")]
    BindArity { values: usize, binders: usize },
    #[error("a private channel would escape to the environment")]
    PrivateChannelEscape,
    #[error("exploration exceeded the cap of {cap} states")]
    StateCap { cap: usize },
    #[error(transparent)]
    Quantum(#[from] QStateError),
}

pub type Result<T> = std::result::Result<T, SemanticsError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Thread {
    pub term: Process,
    pub env: BTreeMap<Name, Value>,
    pub owned: BTreeSet<usize>,
}

impl Thread {
    fn lookup(&self, name: &Name) -> Result<&Value> {
        self.env
            .get(name)
            .ok_or_else(|| SemanticsError::UnboundName(name.clone()))
    }

    fn channel(&self, name: &Name) -> Result<usize> {
        match self.lookup(name)? {
            Value::Channel(c) => Ok(*c),
            other => Err(SemanticsError::RuntimeType(format!(
                "`{name}` holds {other:?}, expected a channel"
            ))),
        }
    }

    fn owned_qubit(&self, name: &Name) -> Result<usize> {
        match self.lookup(name)? {
            Value::Qubit(q) if self.owned.contains(q) => Ok(*q),
            Value::Qubit(_) => Err(SemanticsError::OwnershipViolation(format!(
                "qubit `{name}` is not owned by the thread using it"
            ))),
            other => Err(SemanticsError::RuntimeType(format!(
                "`{name}` holds {other:?}, expected a qubit"
            ))),
        }
    }

    fn eval(&self, e: &Expr, out: &mut Vec<Value>) -> Result<()> {
        match e {
            Expr::Var(x) => self.lookup(x)?.flatten_into(out),
            Expr::Bit(b) => out.push(Value::Bit(*b)),
            Expr::Tuple(items) => {
                for i in items {
                    self.eval(i, out)?;
                }
            }
            Expr::Measure(_) => return Err(SemanticsError::RuntimeType("unforced measurement in a message".into())),
        }
        Ok(())
    }

    /// Evaluates a message and checks that every qubit in it is owned.
    fn message(&self, payload: &[Expr]) -> Result<Vec<Value>> {
        let mut values = Vec::new();
        for e in payload {
            self.eval(e, &mut values)?;
        }
        let mut seen = BTreeSet::new();
        for v in &values {
            if let Value::Qubit(q) = v {
                if !self.owned.contains(q) || !seen.insert(*q) {
                    return Err(SemanticsError::OwnershipViolation(format!(
                        "message sends qubit #{q} it does not exclusively own"
                    )));
                }
            }
        }
        Ok(values)
    }

    fn render(&self) -> String {
        pretty_print(&self.term)
    }
}

/// A global quantum state and the threads running over it.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub state: StateVector,
    pub threads: Vec<Thread>,
    pub next_channel: usize,
    pub program: Arc<Program>,
    /// Names of the visible channels; channel id `i` is `visible[i]`.
    pub visible: Vec<Name>,
    pub max_qubits: usize,
    key: String,
}

impl Configuration {
    pub fn is_terminal(&self) -> bool {
        self.threads.is_empty()
    }

    /// Canonical structural key: equal for configurations that differ only
    /// in binder names, hidden channel ids and qubit numbering.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Same structure and the same state up to global phase.
    pub fn equivalent(&self, other: &Configuration) -> bool {
        self.key == other.key
            && self.state.num_qubits() == other.state.num_qubits()
            && self
                .state
                .equal_up_to_global_phase(&other.state, crate::qstate::TOLERANCE)
                .unwrap_or(false)
    }

    pub fn render_term(&self) -> String {
        if self.threads.is_empty() {
            return "0".into();
        }
        self.threads.iter().map(Thread::render).collect::<Vec<_>>().join(" | ")
    }

    fn successor(&self, threads: Vec<Thread>, state: StateVector) -> Result<Configuration> {
        canon::normalize(Configuration {
            state,
            threads,
            next_channel: self.next_channel,
            program: self.program.clone(),
            visible: self.visible.clone(),
            max_qubits: self.max_qubits,
            key: String::new(),
        })
    }

    fn replace(&self, i: usize, thread: Thread) -> Vec<Thread> {
        let mut threads = self.threads.clone();
        threads[i] = thread;
        threads
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {}", self.state.dirac(), self.render_term())
    }
}

/// One enabled transition. Single-outcome transitions carry probability 1.
#[derive(Clone, Debug)]
pub struct Transition {
    pub label: Label,
    /// Joint reduced density matrix of the qubits in an output message.
    pub payload: Option<DensityMatrix>,
    pub outcomes: Vec<(f64, Configuration)>,
}

/// Starts `entry` with an empty quantum state; the entry's arguments become
/// the visible channels, numbered by position.
pub fn initial_configuration(program: Arc<Program>, entry: &EntryCall) -> Result<Configuration> {
    initial_configuration_capped(program, entry, DEFAULT_MAX_QUBITS)
}

pub fn initial_configuration_capped(
    program: Arc<Program>,
    entry: &EntryCall,
    max_qubits: usize,
) -> Result<Configuration> {
    let def = program
        .definition(&entry.process)
        .ok_or_else(|| SemanticsError::UnknownProcess(entry.process.clone()))?;
    if def.params.len() != entry.args.len() {
        return Err(SemanticsError::ArityMismatch {
            process: entry.process.clone(),
            expected: def.params.len(),
            got: entry.args.len(),
        });
    }
    let env = def
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), Value::Channel(i)))
        .collect();
    let thread = Thread {
        term: def.body.clone(),
        env,
        owned: BTreeSet::new(),
    };
    let visible = entry.args.clone();
    canon::normalize(Configuration {
        state: StateVector::empty(),
        threads: vec![thread],
        next_channel: visible.len(),
        program: program.clone(),
        visible,
        max_qubits,
        key: String::new(),
    })
}

/// Replaces a call by the callee's body over the caller's values. Calls are
/// unfolded during normalisation, so they never count as a step.
fn unfold(thread: &Thread, program: &Program) -> Result<Thread> {
    let ProcessKind::Call { process, args } = &thread.term.kind else {
        return Ok(thread.clone());
    };
    let def = program
        .definition(process)
        .ok_or_else(|| SemanticsError::UnknownProcess(process.clone()))?;
    if def.params.len() != args.len() {
        return Err(SemanticsError::ArityMismatch {
            process: process.clone(),
            expected: def.params.len(),
            got: args.len(),
        });
    }
    let env = def
        .params
        .iter()
        .zip(args)
        .map(|(p, a)| Ok((p.clone(), thread.lookup(a)?.clone())))
        .collect::<Result<_>>()?;
    Ok(Thread {
        term: def.body.clone(),
        env,
        owned: thread.owned.clone(),
    })
}

fn bind(env: &mut BTreeMap<Name, Value>, binders: &[Name], values: Vec<Value>) -> Result<()> {
    if binders.len() == values.len() {
        env.extend(binders.iter().cloned().zip(values));
        Ok(())
    } else if binders.len() == 1 && values.len() > 1 && values.iter().all(Value::is_classical) {
        env.insert(binders[0].clone(), Value::Tuple(values));
        Ok(())
    } else {
        Err(SemanticsError::BindArity {
            values: values.len(),
            binders: binders.len(),
        })
    }
}

fn has_measure(payload: &[Expr]) -> bool {
    payload.iter().any(|e| match e {
        Expr::Measure(_) => true,
        Expr::Tuple(items) => has_measure(items),
        _ => false,
    })
}

fn measured_names(payload: &[Expr], out: &mut Vec<Name>) {
    for e in payload {
        match e {
            Expr::Measure(qs) => out.extend(qs.iter().cloned()),
            Expr::Tuple(items) => measured_names(items, out),
            _ => {}
        }
    }
}

/// Replaces each measurement in a message by the bits it produced.
fn substitute_results(payload: &[Expr], bits: &mut impl Iterator<Item = u8>) -> Vec<Expr> {
    let mut out = Vec::new();
    for e in payload {
        match e {
            Expr::Measure(qs) => out.extend(qs.iter().map(|_| Expr::Bit(bits.next().unwrap_or(0)))),
            Expr::Tuple(items) => out.push(Expr::Tuple(substitute_results(items, bits))),
            other => out.push(other.clone()),
        }
    }
    out
}

fn tau(next: Configuration) -> Transition {
    Transition {
        label: Label::Tau,
        payload: None,
        outcomes: vec![(1.0, next)],
    }
}

/// All transitions enabled in `config`, in a fixed order: each thread's own
/// moves in thread order, then handshakes between thread pairs `i < j`.
pub fn step(config: &Configuration, alphabet: &InputAlphabet) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for i in 0..config.threads.len() {
        local_steps(config, i, alphabet, &mut out)?;
    }
    for i in 0..config.threads.len() {
        for j in i + 1..config.threads.len() {
            if let Some(t) = handshake(config, i, j)? {
                out.push(t);
            }
            if let Some(t) = handshake(config, j, i)? {
                out.push(t);
            }
        }
    }
    Ok(out)
}

fn local_steps(config: &Configuration, i: usize, alphabet: &InputAlphabet, out: &mut Vec<Transition>) -> Result<()> {
    let thread = &config.threads[i];
    let continue_with = |cont: &Process| Thread {
        term: cont.clone(),
        ..thread.clone()
    };
    match &thread.term.kind {
        // Normal forms never contain these at the top of a thread.
        ProcessKind::Nil | ProcessKind::Par(..) | ProcessKind::Call { .. } => {}
        ProcessKind::Action { targets, gate, cont } => {
            let ids = targets
                .iter()
                .map(|t| thread.owned_qubit(t))
                .collect::<Result<Vec<_>>>()?;
            let gate = match gate {
                GateRef::Fixed(g) => g.gate(),
                GateRef::Sigma(r) => match thread.lookup(r)? {
                    Value::Tuple(bits) => match bits.as_slice() {
                        [Value::Bit(a), Value::Bit(b)] => StandardGate::Sigma(*a == 1, *b == 1).gate(),
                        _ => return Err(SemanticsError::RuntimeType(format!("`{r}` is not a two-bit value"))),
                    },
                    _ => return Err(SemanticsError::RuntimeType(format!("`{r}` is not a two-bit value"))),
                },
            };
            let state = config.state.apply_gate(&gate, &ids)?;
            out.push(tau(config.successor(config.replace(i, continue_with(cont)), state)?));
        }
        ProcessKind::Qbit { binders, cont } => {
            let base = config.state.num_qubits();
            let state = config.state.alloc_capped(binders.len(), config.max_qubits)?;
            let mut next = continue_with(cont);
            for (k, b) in binders.iter().enumerate() {
                next.env.insert(b.clone(), Value::Qubit(base + k));
                next.owned.insert(base + k);
            }
            out.push(tau(config.successor(config.replace(i, next), state)?));
        }
        ProcessKind::New { binder, cont } => {
            let mut next = continue_with(cont);
            next.env.insert(binder.clone(), Value::Channel(config.next_channel));
            let mut succ = config.clone();
            succ.next_channel += 1;
            succ.threads[i] = next;
            out.push(tau(canon::normalize(succ)?));
        }
        ProcessKind::Output { channel, payload, cont } if has_measure(payload) => {
            let mut names = Vec::new();
            measured_names(payload, &mut names);
            let ids = names
                .iter()
                .map(|q| thread.owned_qubit(q))
                .collect::<Result<Vec<_>>>()?;
            let outcomes: Vec<_> = config
                .state
                .measure(&ids)?
                .into_iter()
                .filter(|o| o.probability > MIN_PROBABILITY)
                .collect();
            let total: f64 = outcomes.iter().map(|o| o.probability).sum();
            let mut results = Vec::new();
            for o in outcomes {
                let mut next = thread.clone();
                next.term = Process::output(
                    channel.clone(),
                    substitute_results(payload, &mut o.result.iter().copied()),
                    (**cont).clone(),
                )
                .at(thread.term.pos);
                for q in &ids {
                    next.owned.remove(q);
                }
                results.push((
                    o.probability / total,
                    config.successor(config.replace(i, next), o.post_state)?,
                ));
            }
            out.push(Transition {
                label: Label::Tau,
                payload: None,
                outcomes: results,
            });
        }
        ProcessKind::Output { channel, payload, cont } => {
            let c = thread.channel(channel)?;
            if c >= config.visible.len() {
                return Ok(());
            }
            let values = thread.message(payload)?;
            let mut next = continue_with(cont);
            let mut message = Vec::new();
            let mut qubits = Vec::new();
            for v in &values {
                message.push(match v {
                    Value::Bit(b) => OutputValue::Bit(*b),
                    Value::Qubit(q) => {
                        qubits.push(*q);
                        next.owned.remove(q);
                        OutputValue::Qubit
                    }
                    Value::Channel(d) if *d < config.visible.len() => OutputValue::Channel(*d),
                    Value::Channel(_) => return Err(SemanticsError::PrivateChannelEscape),
                    Value::Tuple(_) => unreachable!("messages are flattened"),
                });
            }
            let payload = if qubits.is_empty() {
                None
            } else {
                Some(config.state.reduced_density_matrix(&qubits)?)
            };
            out.push(Transition {
                label: Label::Output { channel: c, message },
                payload,
                outcomes: vec![(1.0, config.successor(config.replace(i, next), config.state.clone())?)],
            });
        }
        ProcessKind::Input { channel, binders, cont } => {
            let c = thread.channel(channel)?;
            let Some(messages) = alphabet.messages.get(&c) else {
                return Ok(());
            };
            if c >= config.visible.len() {
                return Ok(());
            }
            for message in messages {
                let mut state = config.state.clone();
                let mut next = continue_with(cont);
                let mut values = Vec::new();
                for v in message {
                    match v {
                        InputValue::Bit(b) => values.push(Value::Bit(*b)),
                        InputValue::Qubit(k) => {
                            let id = state.num_qubits();
                            state = state.tensor_capped(&alphabet.tests[*k], config.max_qubits)?;
                            next.owned.insert(id);
                            values.push(Value::Qubit(id));
                        }
                    }
                }
                bind(&mut next.env, binders, values)?;
                out.push(Transition {
                    label: Label::Input {
                        channel: c,
                        message: message.clone(),
                    },
                    payload: None,
                    outcomes: vec![(1.0, config.successor(config.replace(i, next), state)?)],
                });
            }
        }
    }
    Ok(())
}

/// Handshake with thread `s` sending to thread `r`.
fn handshake(config: &Configuration, s: usize, r: usize) -> Result<Option<Transition>> {
    let (sender, receiver) = (&config.threads[s], &config.threads[r]);
    let ProcessKind::Output {
        channel: out_ch,
        payload,
        cont: out_cont,
    } = &sender.term.kind
    else {
        return Ok(None);
    };
    let ProcessKind::Input {
        channel: in_ch,
        binders,
        cont: in_cont,
    } = &receiver.term.kind
    else {
        return Ok(None);
    };
    if has_measure(payload) || sender.channel(out_ch)? != receiver.channel(in_ch)? {
        return Ok(None);
    }
    let values = sender.message(payload)?;
    let mut next_sender = Thread {
        term: (**out_cont).clone(),
        ..sender.clone()
    };
    let mut next_receiver = Thread {
        term: (**in_cont).clone(),
        ..receiver.clone()
    };
    for v in &values {
        if let Value::Qubit(q) = v {
            next_sender.owned.remove(q);
            next_receiver.owned.insert(*q);
        }
    }
    bind(&mut next_receiver.env, binders, values)?;
    let mut threads = config.threads.clone();
    threads[s] = next_sender;
    threads[r] = next_receiver;
    Ok(Some(tau(config.successor(threads, config.state.clone())?)))
}

#[cfg(test)]
mod tests;
