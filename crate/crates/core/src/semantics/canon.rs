//! Normal form of configurations.
//!
//! After every step the configuration is rewritten so that structurally
//! equal configurations look identical: parallel terms are split into
//! threads, calls are unfolded, finished threads are dropped, environments
//! are cut down to the free names of their terms, live qubits and hidden
//! channels are renumbered by first occurrence, and qubits nobody holds are factored out of the state
//! when they are unentangled. The key string records the structure with
//! binders replaced by their binding depth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use super::{Configuration, Result, SemanticsError, Thread, Value};
use crate::syntax::{free_names, Expr, GateRef, Name, Process, ProcessKind, Program};

pub(super) fn normalize(config: Configuration) -> Result<Configuration> {
    let mut threads = Vec::new();
    for t in config.threads {
        split(t, &config.program, &mut threads)?;
    }

    // A qubit is live when a thread both owns it and can still name it.
    let mut live = BTreeSet::new();
    for t in &threads {
        for v in t.env.values() {
            collect_qubits(v, &mut |q| {
                if t.owned.contains(&q) {
                    live.insert(q);
                }
            });
        }
    }

    let visible = config.visible.len();
    let mut canon = Canon {
        live: &live,
        visible,
        qubits: Vec::new(),
        qubit_index: HashMap::new(),
        channel_index: HashMap::new(),
    };
    let mut key = String::new();
    for t in &threads {
        let mut scope = Vec::new();
        canon.term(&t.term, &t.env, &mut scope, &mut key);
        key.push_str(" || ");
    }

    // Drop unentangled dead qubits, highest first so positions stay valid.
    let mut state = config.state;
    let mut positions: Vec<usize> = (0..state.num_qubits()).collect();
    let dead: Vec<usize> = positions.iter().copied().filter(|q| !live.contains(q)).collect();
    for &d in dead.iter().rev() {
        let at = positions.iter().position(|&p| p == d).expect("dead qubit present");
        if let Some(reduced) = state.factor_out(at)? {
            state = reduced;
            positions.remove(at);
        }
    }
    let mut order: Vec<usize> = canon
        .qubits
        .iter()
        .map(|q| positions.iter().position(|p| p == q).expect("live qubit present"))
        .collect();
    let leftover: Vec<usize> = positions
        .iter()
        .enumerate()
        .filter(|(_, q)| !live.contains(q))
        .map(|(at, _)| at)
        .collect();
    order.extend(&leftover);
    let state = if order.iter().enumerate().all(|(j, &o)| j == o) {
        state
    } else {
        state.permute(&order)?
    };

    let mut renumber: HashMap<usize, usize> = HashMap::new();
    for (new, &at) in order.iter().enumerate() {
        renumber.insert(positions[at], new);
    }
    let channel_index = canon.channel_index;
    let threads: Vec<Thread> = threads
        .into_iter()
        .map(|t| {
            let owned = t
                .owned
                .iter()
                .filter(|q| live.contains(q))
                .map(|q| renumber[q])
                .collect();
            let env = t
                .env
                .into_iter()
                .map(|(n, v)| (n, relabel(&v, &renumber, &channel_index, visible)))
                .collect();
            Thread {
                term: t.term,
                env,
                owned,
            }
        })
        .collect();

    for t in &threads {
        let owned: Vec<String> = t.owned.iter().map(ToString::to_string).collect();
        let _ = write!(key, "[{}]", owned.join(","));
    }
    let _ = write!(key, " n={} d={}", state.num_qubits(), leftover.len());

    Ok(Configuration {
        state,
        threads,
        next_channel: visible + channel_index.len(),
        program: config.program,
        visible: config.visible,
        max_qubits: config.max_qubits,
        key,
    })
}

fn collect_qubits(v: &Value, f: &mut impl FnMut(usize)) {
    match v {
        Value::Qubit(q) => f(*q),
        Value::Tuple(items) => items.iter().for_each(|i| collect_qubits(i, f)),
        _ => {}
    }
}

/// Qubits that were factored out map to an id no state contains, so a later
/// use reports an ownership violation instead of touching another qubit.
fn relabel(v: &Value, qubits: &HashMap<usize, usize>, channels: &HashMap<usize, usize>, visible: usize) -> Value {
    match v {
        Value::Qubit(q) => Value::Qubit(qubits.get(q).copied().unwrap_or(usize::MAX)),
        Value::Channel(c) if *c >= visible => {
            Value::Channel(visible + channels.get(c).copied().unwrap_or(usize::MAX - visible))
        }
        Value::Tuple(items) => Value::Tuple(items.iter().map(|i| relabel(i, qubits, channels, visible)).collect()),
        other => other.clone(),
    }
}

fn restrict(env: &BTreeMap<Name, Value>, term: &Process) -> BTreeMap<Name, Value> {
    let free = free_names(term);
    env.iter()
        .filter(|(n, _)| free.contains(*n))
        .map(|(n, v)| (n.clone(), v.clone()))
        .collect()
}

fn referenced_qubits(env: &BTreeMap<Name, Value>) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for v in env.values() {
        collect_qubits(v, &mut |q| {
            out.insert(q);
        });
    }
    out
}

fn split(t: Thread, program: &Program, out: &mut Vec<Thread>) -> Result<()> {
    match t.term.kind {
        ProcessKind::Nil => Ok(()),
        ProcessKind::Call { .. } => split(super::unfold(&t, program)?, program, out),
        ProcessKind::Par(l, r) => {
            let (el, er) = (restrict(&t.env, &l), restrict(&t.env, &r));
            let (ql, qr) = (referenced_qubits(&el), referenced_qubits(&er));
            if let Some(q) = ql.intersection(&qr).find(|q| t.owned.contains(q)) {
                return Err(SemanticsError::OwnershipViolation(format!(
                    "qubit #{q} is held by both sides of a parallel composition"
                )));
            }
            let left = Thread {
                owned: t.owned.intersection(&ql).copied().collect(),
                env: el,
                term: *l,
            };
            let right = Thread {
                owned: t.owned.intersection(&qr).copied().collect(),
                env: er,
                term: *r,
            };
            split(left, program, out)?;
            split(right, program, out)
        }
        _ => {
            let env = restrict(&t.env, &t.term);
            out.push(Thread { env, ..t });
            Ok(())
        }
    }
}

struct Canon<'a> {
    live: &'a BTreeSet<usize>,
    visible: usize,
    qubits: Vec<usize>,
    qubit_index: HashMap<usize, usize>,
    channel_index: HashMap<usize, usize>,
}

impl Canon<'_> {
    fn value(&mut self, v: &Value, out: &mut String) {
        match v {
            Value::Qubit(q) if self.live.contains(q) => {
                let next = self.qubits.len();
                let idx = *self.qubit_index.entry(*q).or_insert_with(|| next);
                if idx == next {
                    self.qubits.push(*q);
                }
                let _ = write!(out, "#q{idx}");
            }
            Value::Qubit(_) => out.push_str("#q_"),
            Value::Bit(b) => {
                let _ = write!(out, "#b{b}");
            }
            Value::Channel(c) if *c < self.visible => {
                let _ = write!(out, "#v{c}");
            }
            Value::Channel(c) => {
                let next = self.channel_index.len();
                let idx = *self.channel_index.entry(*c).or_insert(next);
                let _ = write!(out, "#h{idx}");
            }
            Value::Tuple(items) => {
                out.push_str("#t(");
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.value(item, out);
                }
                out.push(')');
            }
        }
    }

    fn name(&mut self, n: &Name, env: &BTreeMap<Name, Value>, scope: &[Name], out: &mut String) {
        if let Some(depth) = scope.iter().rposition(|b| b == n) {
            let _ = write!(out, "${depth}");
        } else if let Some(v) = env.get(n) {
            self.value(v, out);
        } else {
            let _ = write!(out, "!{n}");
        }
    }

    fn names(&mut self, ns: &[Name], env: &BTreeMap<Name, Value>, scope: &[Name], out: &mut String) {
        for (i, n) in ns.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.name(n, env, scope, out);
        }
    }

    fn expr(&mut self, e: &Expr, env: &BTreeMap<Name, Value>, scope: &[Name], out: &mut String) {
        match e {
            Expr::Var(x) => self.name(x, env, scope, out),
            Expr::Bit(b) => {
                let _ = write!(out, "{b}");
            }
            Expr::Measure(qs) => {
                out.push_str("measure(");
                self.names(qs, env, scope, out);
                out.push(')');
            }
            Expr::Tuple(items) => {
                out.push('(');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.expr(item, env, scope, out);
                }
                out.push(')');
            }
        }
    }

    fn term(&mut self, p: &Process, env: &BTreeMap<Name, Value>, scope: &mut Vec<Name>, out: &mut String) {
        match &p.kind {
            ProcessKind::Nil => out.push('0'),
            ProcessKind::Input { channel, binders, cont } => {
                self.name(channel, env, scope, out);
                let _ = write!(out, "?[{}].", binders.len());
                let depth = scope.len();
                scope.extend(binders.iter().cloned());
                self.term(cont, env, scope, out);
                scope.truncate(depth);
            }
            ProcessKind::Output { channel, payload, cont } => {
                self.name(channel, env, scope, out);
                out.push_str("![");
                for (i, e) in payload.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.expr(e, env, scope, out);
                }
                out.push_str("].");
                self.term(cont, env, scope, out);
            }
            ProcessKind::Action { targets, gate, cont } => {
                out.push('{');
                self.names(targets, env, scope, out);
                out.push_str("*=");
                match gate {
                    GateRef::Fixed(g) => {
                        let _ = write!(out, "{g}");
                    }
                    GateRef::Sigma(r) => {
                        out.push_str("sigma[");
                        self.name(r, env, scope, out);
                        out.push(']');
                    }
                }
                out.push_str("}.");
                self.term(cont, env, scope, out);
            }
            ProcessKind::Qbit { binders, cont } => {
                let _ = write!(out, "(qbit {})", binders.len());
                let depth = scope.len();
                scope.extend(binders.iter().cloned());
                self.term(cont, env, scope, out);
                scope.truncate(depth);
            }
            ProcessKind::New { binder, cont } => {
                out.push_str("(new)");
                scope.push(binder.clone());
                self.term(cont, env, scope, out);
                scope.pop();
            }
            ProcessKind::Par(l, r) => {
                out.push('(');
                self.term(l, env, scope, out);
                out.push('|');
                self.term(r, env, scope, out);
                out.push(')');
            }
            ProcessKind::Call { process, args } => {
                let _ = write!(out, "{process}(");
                self.names(args, env, scope, out);
                out.push(')');
            }
        }
    }
}
