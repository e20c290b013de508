use std::collections::{BTreeMap, BTreeSet};

use super::{Expr, GateRef, Name, Process, ProcessKind};

fn expr_names(e: &Expr, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::Bit(_) => {}
        Expr::Measure(qs) => out.extend(qs.iter().cloned()),
        Expr::Tuple(items) => items.iter().for_each(|i| expr_names(i, out)),
    }
}

/// Free names of a term. Process names in calls are global and not included.
pub fn free_names(term: &Process) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    match &term.kind {
        ProcessKind::Nil => {}
        ProcessKind::Input { channel, binders, cont } => {
            out = free_names(cont);
            for b in binders {
                out.remove(b);
            }
            out.insert(channel.clone());
        }
        ProcessKind::Output { channel, payload, cont } => {
            out = free_names(cont);
            out.insert(channel.clone());
            payload.iter().for_each(|e| expr_names(e, &mut out));
        }
        ProcessKind::Action { targets, gate, cont } => {
            out = free_names(cont);
            out.extend(targets.iter().cloned());
            if let GateRef::Sigma(r) = gate {
                out.insert(r.clone());
            }
        }
        ProcessKind::Qbit { binders, cont } => {
            out = free_names(cont);
            for b in binders {
                out.remove(b);
            }
        }
        ProcessKind::New { binder, cont } => {
            out = free_names(cont);
            out.remove(binder);
        }
        ProcessKind::Par(l, r) => {
            out = free_names(l);
            out.extend(free_names(r));
        }
        ProcessKind::Call { args, .. } => out.extend(args.iter().cloned()),
    }
    out
}

fn all_names(term: &Process, out: &mut BTreeSet<Name>) {
    term.visit(&mut |p| match &p.kind {
        ProcessKind::Input { channel, binders, .. } => {
            out.insert(channel.clone());
            out.extend(binders.iter().cloned());
        }
        ProcessKind::Output { channel, payload, .. } => {
            out.insert(channel.clone());
            payload.iter().for_each(|e| expr_names(e, out));
        }
        ProcessKind::Action { targets, gate, .. } => {
            out.extend(targets.iter().cloned());
            if let GateRef::Sigma(r) = gate {
                out.insert(r.clone());
            }
        }
        ProcessKind::Qbit { binders, .. } => out.extend(binders.iter().cloned()),
        ProcessKind::New { binder, .. } => {
            out.insert(binder.clone());
        }
        ProcessKind::Call { args, .. } => out.extend(args.iter().cloned()),
        ProcessKind::Nil | ProcessKind::Par(..) => {}
    });
}

/// `base_1`, `base_2`, ... : the first variant not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = base.split('_').next().unwrap_or(base);
    (1..)
        .map(|i| format!("{stem}_{i}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded supply of names")
}

fn rename(n: &Name, mapping: &BTreeMap<Name, Name>) -> Name {
    mapping.get(n).cloned().unwrap_or_else(|| n.clone())
}

fn subst_expr(e: &Expr, mapping: &BTreeMap<Name, Name>) -> Expr {
    match e {
        Expr::Var(x) => Expr::Var(rename(x, mapping)),
        Expr::Bit(b) => Expr::Bit(*b),
        Expr::Measure(qs) => Expr::Measure(qs.iter().map(|q| rename(q, mapping)).collect()),
        Expr::Tuple(items) => Expr::Tuple(items.iter().map(|i| subst_expr(i, mapping)).collect()),
    }
}

/// Handles one binding construct: drops shadowed entries from the mapping
/// and renames any binder that would capture a substituted name.
fn enter_binders(
    binders: &[Name],
    cont: &Process,
    mapping: &BTreeMap<Name, Name>,
) -> (Vec<Name>, BTreeMap<Name, Name>) {
    let mut inner: BTreeMap<Name, Name> = mapping
        .iter()
        .filter(|(k, _)| !binders.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let cont_free = free_names(cont);
    let incoming: BTreeSet<Name> = cont_free.iter().filter_map(|n| inner.get(n).cloned()).collect();
    let mut avoid = BTreeSet::new();
    all_names(cont, &mut avoid);
    avoid.extend(mapping.keys().cloned());
    avoid.extend(mapping.values().cloned());
    avoid.extend(binders.iter().cloned());
    let mut new_binders = Vec::with_capacity(binders.len());
    for b in binders {
        if incoming.contains(b) {
            let fresh = fresh_name(b, &avoid);
            avoid.insert(fresh.clone());
            inner.insert(b.clone(), fresh.clone());
            new_binders.push(fresh);
        } else {
            new_binders.push(b.clone());
        }
    }
    (new_binders, inner)
}

/// Capture-avoiding substitution of free names.
pub fn substitute(term: &Process, mapping: &BTreeMap<Name, Name>) -> Process {
    let kind = match &term.kind {
        ProcessKind::Nil => ProcessKind::Nil,
        ProcessKind::Input { channel, binders, cont } => {
            let (binders, inner) = enter_binders(binders, cont, mapping);
            ProcessKind::Input {
                channel: rename(channel, mapping),
                binders,
                cont: Box::new(substitute(cont, &inner)),
            }
        }
        ProcessKind::Output { channel, payload, cont } => ProcessKind::Output {
            channel: rename(channel, mapping),
            payload: payload.iter().map(|e| subst_expr(e, mapping)).collect(),
            cont: Box::new(substitute(cont, mapping)),
        },
        ProcessKind::Action { targets, gate, cont } => ProcessKind::Action {
            targets: targets.iter().map(|t| rename(t, mapping)).collect(),
            gate: match gate {
                GateRef::Sigma(r) => GateRef::Sigma(rename(r, mapping)),
                fixed => fixed.clone(),
            },
            cont: Box::new(substitute(cont, mapping)),
        },
        ProcessKind::Qbit { binders, cont } => {
            let (binders, inner) = enter_binders(binders, cont, mapping);
            ProcessKind::Qbit {
                binders,
                cont: Box::new(substitute(cont, &inner)),
            }
        }
        ProcessKind::New { binder, cont } => {
            let (mut binders, inner) = enter_binders(std::slice::from_ref(binder), cont, mapping);
            ProcessKind::New {
                binder: binders.pop().expect("one binder"),
                cont: Box::new(substitute(cont, &inner)),
            }
        }
        ProcessKind::Par(l, r) => ProcessKind::Par(Box::new(substitute(l, mapping)), Box::new(substitute(r, mapping))),
        ProcessKind::Call { process, args } => ProcessKind::Call {
            process: process.clone(),
            args: args.iter().map(|a| rename(a, mapping)).collect(),
        },
    };
    Process { kind, pos: term.pos }
}

/// Binding scopes of the two terms, walked in lockstep.
struct Scopes<'a> {
    left: Vec<&'a Name>,
    right: Vec<&'a Name>,
}

impl<'a> Scopes<'a> {
    fn same(&self, a: &Name, b: &Name) -> bool {
        let la = self.left.iter().rposition(|n| *n == a);
        let rb = self.right.iter().rposition(|n| *n == b);
        match (la, rb) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }

    fn all_same(&self, a: &[Name], b: &[Name]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| self.same(x, y))
    }

    fn expr(&self, a: &Expr, b: &Expr) -> bool {
        match (a, b) {
            (Expr::Var(x), Expr::Var(y)) => self.same(x, y),
            (Expr::Bit(x), Expr::Bit(y)) => x == y,
            (Expr::Measure(x), Expr::Measure(y)) => self.all_same(x, y),
            (Expr::Tuple(x), Expr::Tuple(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| self.expr(p, q)),
            _ => false,
        }
    }

    fn bind(&mut self, a: &'a [Name], b: &'a [Name]) -> usize {
        self.left.extend(a.iter());
        self.right.extend(b.iter());
        a.len()
    }

    fn unbind(&mut self, n: usize) {
        self.left.truncate(self.left.len() - n);
        self.right.truncate(self.right.len() - n);
    }

    fn process(&mut self, a: &'a Process, b: &'a Process) -> bool {
        use ProcessKind as K;
        match (&a.kind, &b.kind) {
            (K::Nil, K::Nil) => true,
            (
                K::Input {
                    channel: c1,
                    binders: b1,
                    cont: k1,
                },
                K::Input {
                    channel: c2,
                    binders: b2,
                    cont: k2,
                },
            ) => {
                if !self.same(c1, c2) || b1.len() != b2.len() {
                    return false;
                }
                let n = self.bind(b1, b2);
                let ok = self.process(k1, k2);
                self.unbind(n);
                ok
            }
            (
                K::Output {
                    channel: c1,
                    payload: p1,
                    cont: k1,
                },
                K::Output {
                    channel: c2,
                    payload: p2,
                    cont: k2,
                },
            ) => {
                self.same(c1, c2)
                    && p1.len() == p2.len()
                    && p1.iter().zip(p2).all(|(x, y)| self.expr(x, y))
                    && self.process(k1, k2)
            }
            (
                K::Action {
                    targets: t1,
                    gate: g1,
                    cont: k1,
                },
                K::Action {
                    targets: t2,
                    gate: g2,
                    cont: k2,
                },
            ) => {
                let gates = match (g1, g2) {
                    (GateRef::Fixed(x), GateRef::Fixed(y)) => x == y,
                    (GateRef::Sigma(x), GateRef::Sigma(y)) => self.same(x, y),
                    _ => false,
                };
                gates && self.all_same(t1, t2) && self.process(k1, k2)
            }
            (K::Qbit { binders: b1, cont: k1 }, K::Qbit { binders: b2, cont: k2 }) => {
                if b1.len() != b2.len() {
                    return false;
                }
                let n = self.bind(b1, b2);
                let ok = self.process(k1, k2);
                self.unbind(n);
                ok
            }
            (K::New { binder: b1, cont: k1 }, K::New { binder: b2, cont: k2 }) => {
                let n = self.bind(std::slice::from_ref(b1), std::slice::from_ref(b2));
                let ok = self.process(k1, k2);
                self.unbind(n);
                ok
            }
            (K::Par(l1, r1), K::Par(l2, r2)) => self.process(l1, l2) && self.process(r1, r2),
            (K::Call { process: p1, args: a1 }, K::Call { process: p2, args: a2 }) => p1 == p2 && self.all_same(a1, a2),
            _ => false,
        }
    }
}

/// Equality up to consistent renaming of bound names.
pub fn alpha_equivalent(a: &Process, b: &Process) -> bool {
    Scopes {
        left: Vec::new(),
        right: Vec::new(),
    }
    .process(a, b)
}
