//! Linear typing of qubit names.
//!
//! Every qubit name is owned by exactly one thread of control. Sending,
//! measuring or passing a qubit to a process consumes it, gate actions use it
//! without consuming, and parallel composition splits ownership disjointly.
//! Dropping an unconsumed qubit at `0` is allowed (affine at termination).
//!
//! Signatures come from `//:` sidecar lines such as
//! `//: Alice : Qbit, ^[Qbit], ^[Bit,Bit]`, where `^[T,...]` is a channel
//! carrying messages with the listed components. Types of channels created
//! with `(new c)` are inferred from their uses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::{free_names, Expr, GateRef, Name, Pos, Process, ProcessKind, Program, Sidecar};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeExpr {
    Qbit,
    Bit,
    Channel(Vec<TypeExpr>),
    /// Classical tuple; bound when a single name receives a multi-component
    /// classical message.
    Tuple(Vec<TypeExpr>),
    /// Inference variable.
    Var(u32),
}

impl TypeExpr {
    fn is_classical(&self) -> bool {
        match self {
            TypeExpr::Bit => true,
            TypeExpr::Tuple(items) => items.iter().all(TypeExpr::is_classical),
            _ => false,
        }
    }
}

fn list(items: &[TypeExpr]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Qbit => f.write_str("Qbit"),
            TypeExpr::Bit => f.write_str("Bit"),
            TypeExpr::Channel(items) => write!(f, "^[{}]", list(items)),
            TypeExpr::Tuple(items) => write!(f, "({})", list(items)),
            TypeExpr::Var(v) => write!(f, "?{v}"),
        }
    }
}

pub type Signatures = BTreeMap<Name, Vec<TypeExpr>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Consumption {
    Sent,
    Measured,
    Passed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Usage {
    Unused,
    Consumed(Consumption),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub ty: TypeExpr,
    pub usage: Usage,
}

pub type TypeEnv = BTreeMap<Name, Binding>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    QubitDuplicated,
    QubitUsedAfterSend,
    UnboundName,
    ChannelArityMismatch,
    PayloadTypeMismatch,
    GateArityMismatch,
    MissingSignature,
    MalformedSignature,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub category: Category,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.pos, self.category, self.message)
    }
}

/// Parses one sidecar line, `Name : T, T, ...`.
pub fn parse_signature(text: &str) -> Result<(Name, Vec<TypeExpr>), String> {
    let (name, types) = text
        .split_once(':')
        .ok_or_else(|| format!("expected `Name : types`, found `{text}`"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("bad process name `{name}`"));
    }
    let chars: Vec<char> = types.chars().filter(|c| !c.is_whitespace()).collect();
    let mut at = 0;
    let parsed = parse_type_list(&chars, &mut at, None)?;
    if at != chars.len() {
        return Err(format!("trailing input in signature of `{name}`"));
    }
    Ok((name.to_string(), parsed))
}

fn parse_type_list(chars: &[char], at: &mut usize, close: Option<char>) -> Result<Vec<TypeExpr>, String> {
    let mut out = Vec::new();
    if *at == chars.len() || Some(chars[*at]) == close {
        return Ok(out);
    }
    loop {
        out.push(parse_type(chars, at)?);
        if *at < chars.len() && chars[*at] == ',' {
            *at += 1;
        } else {
            return Ok(out);
        }
    }
}

fn parse_type(chars: &[char], at: &mut usize) -> Result<TypeExpr, String> {
    let rest: String = chars[*at..].iter().collect();
    if rest.starts_with("Qbit") {
        *at += 4;
        Ok(TypeExpr::Qbit)
    } else if rest.starts_with("Bit") {
        *at += 3;
        Ok(TypeExpr::Bit)
    } else if rest.starts_with("^[") {
        *at += 2;
        let items = parse_type_list(chars, at, Some(']'))?;
        if chars.get(*at) != Some(&']') {
            return Err("unterminated channel type".into());
        }
        *at += 1;
        Ok(TypeExpr::Channel(items))
    } else {
        Err(format!("unknown type at `{rest}`"))
    }
}

/// Collects signatures from a program's sidecar lines.
pub fn signatures_from_sidecars(sidecars: &[Sidecar]) -> (Signatures, Vec<Diagnostic>) {
    let mut sigs = Signatures::new();
    let mut diags = Vec::new();
    for s in sidecars {
        match parse_signature(&s.text) {
            Ok((name, types)) => {
                if sigs.insert(name.clone(), types).is_some() {
                    diags.push(Diagnostic {
                        pos: s.pos,
                        category: Category::MalformedSignature,
                        message: format!("second signature for `{name}`"),
                    });
                }
            }
            Err(message) => diags.push(Diagnostic {
                pos: s.pos,
                category: Category::MalformedSignature,
                message,
            }),
        }
    }
    (sigs, diags)
}

struct Checker<'a> {
    signatures: &'a Signatures,
    bindings: Vec<Option<TypeExpr>>,
    channel_vars: BTreeSet<u32>,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn new(signatures: &'a Signatures) -> Self {
        Self {
            signatures,
            bindings: Vec::new(),
            channel_vars: BTreeSet::new(),
            diags: Vec::new(),
        }
    }

    fn report(&mut self, pos: Pos, category: Category, message: String) {
        self.diags.push(Diagnostic { pos, category, message });
    }

    fn fresh(&mut self) -> TypeExpr {
        self.bindings.push(None);
        TypeExpr::Var(self.bindings.len() as u32 - 1)
    }

    fn fresh_channel(&mut self) -> TypeExpr {
        let v = self.fresh();
        if let TypeExpr::Var(id) = v {
            self.channel_vars.insert(id);
        }
        v
    }

    fn shallow(&self, t: &TypeExpr) -> TypeExpr {
        let mut t = t.clone();
        while let TypeExpr::Var(v) = t {
            match &self.bindings[v as usize] {
                Some(bound) => t = bound.clone(),
                None => break,
            }
        }
        t
    }

    fn resolve(&self, t: &TypeExpr) -> TypeExpr {
        match self.shallow(t) {
            TypeExpr::Channel(items) => TypeExpr::Channel(items.iter().map(|i| self.resolve(i)).collect()),
            TypeExpr::Tuple(items) => TypeExpr::Tuple(items.iter().map(|i| self.resolve(i)).collect()),
            other => other,
        }
    }

    fn occurs(&self, v: u32, t: &TypeExpr) -> bool {
        match self.shallow(t) {
            TypeExpr::Var(w) => v == w,
            TypeExpr::Channel(items) | TypeExpr::Tuple(items) => items.iter().any(|i| self.occurs(v, i)),
            _ => false,
        }
    }

    fn bind_var(&mut self, v: u32, t: TypeExpr) -> bool {
        if self.channel_vars.contains(&v) {
            match &t {
                TypeExpr::Channel(_) => {}
                TypeExpr::Var(w) => {
                    self.channel_vars.insert(*w);
                }
                _ => return false,
            }
        }
        if self.occurs(v, &t) {
            return false;
        }
        self.bindings[v as usize] = Some(t);
        true
    }

    fn unify(&mut self, a: &TypeExpr, b: &TypeExpr) -> bool {
        let (a, b) = (self.shallow(a), self.shallow(b));
        match (a, b) {
            (TypeExpr::Var(x), TypeExpr::Var(y)) if x == y => true,
            (TypeExpr::Var(x), t) => self.bind_var(x, t),
            (t, TypeExpr::Var(y)) => self.bind_var(y, t),
            (TypeExpr::Qbit, TypeExpr::Qbit) | (TypeExpr::Bit, TypeExpr::Bit) => true,
            (TypeExpr::Channel(xs), TypeExpr::Channel(ys)) | (TypeExpr::Tuple(xs), TypeExpr::Tuple(ys)) => {
                xs.len() == ys.len() && xs.iter().zip(&ys).all(|(x, y)| self.unify(x, y))
            }
            _ => false,
        }
    }

    fn is_qubit(&self, t: &TypeExpr) -> bool {
        self.shallow(t) == TypeExpr::Qbit
    }

    /// Looks up `name`, reporting it when unbound.
    fn lookup(&mut self, env: &TypeEnv, name: &Name, pos: Pos) -> Option<Binding> {
        let found = env.get(name).cloned();
        if found.is_none() {
            self.report(pos, Category::UnboundName, format!("`{name}` is not bound"));
        }
        found
    }

    /// Uses a qubit, consuming it when `consume` is set.
    fn use_qubit(&mut self, env: &mut TypeEnv, name: &Name, pos: Pos, consume: Option<Consumption>) {
        let Some(binding) = self.lookup(env, name, pos) else {
            return;
        };
        if !self.unify(&binding.ty, &TypeExpr::Qbit) {
            let ty = self.resolve(&binding.ty);
            self.report(
                pos,
                Category::PayloadTypeMismatch,
                format!("`{name}` has type {ty}, expected Qbit"),
            );
            return;
        }
        if let Usage::Consumed(how) = binding.usage {
            let how = match how {
                Consumption::Sent => "sent",
                Consumption::Measured => "measured",
                Consumption::Passed => "passed to a process",
            };
            self.report(
                pos,
                Category::QubitUsedAfterSend,
                format!("qubit `{name}` used after it was {how}"),
            );
            return;
        }
        if let Some(how) = consume {
            env.insert(
                name.clone(),
                Binding {
                    ty: TypeExpr::Qbit,
                    usage: Usage::Consumed(how),
                },
            );
        }
    }

    /// Type of a channel name as its payload list.
    fn channel_payload(&mut self, env: &TypeEnv, channel: &Name, pos: Pos, arity_hint: usize) -> Option<Vec<TypeExpr>> {
        let binding = self.lookup(env, channel, pos)?;
        match self.shallow(&binding.ty) {
            TypeExpr::Channel(items) => Some(items),
            TypeExpr::Var(_) => {
                let items: Vec<TypeExpr> = (0..arity_hint).map(|_| self.fresh()).collect();
                if self.unify(&binding.ty, &TypeExpr::Channel(items.clone())) {
                    Some(items)
                } else {
                    None
                }
            }
            other => {
                let ty = self.resolve(&other);
                self.report(
                    pos,
                    Category::PayloadTypeMismatch,
                    format!("`{channel}` has type {ty}, expected a channel"),
                );
                None
            }
        }
    }

    fn flatten(&self, t: &TypeExpr, out: &mut Vec<TypeExpr>) {
        match self.shallow(t) {
            TypeExpr::Tuple(items) => items.iter().for_each(|i| self.flatten(i, out)),
            other => out.push(other),
        }
    }

    fn payload_types(
        &mut self,
        env: &mut TypeEnv,
        e: &Expr,
        pos: Pos,
        seen: &mut BTreeSet<Name>,
        out: &mut Vec<TypeExpr>,
    ) {
        let mut note = |checker: &mut Self, q: &Name| {
            if !seen.insert(q.clone()) {
                checker.report(
                    pos,
                    Category::QubitDuplicated,
                    format!("qubit `{q}` appears twice in one message"),
                );
                false
            } else {
                true
            }
        };
        match e {
            Expr::Bit(_) => out.push(TypeExpr::Bit),
            Expr::Measure(qs) => {
                for q in qs {
                    if note(self, q) {
                        self.use_qubit(env, q, pos, Some(Consumption::Measured));
                    }
                    out.push(TypeExpr::Bit);
                }
            }
            Expr::Var(x) => {
                let Some(binding) = self.lookup(env, x, pos) else {
                    out.push(self.fresh_placeholder());
                    return;
                };
                if self.is_qubit(&binding.ty) {
                    if note(self, x) {
                        self.use_qubit(env, x, pos, Some(Consumption::Sent));
                    }
                    out.push(TypeExpr::Qbit);
                } else {
                    self.flatten(&binding.ty, out);
                }
            }
            Expr::Tuple(items) => {
                for i in items {
                    self.payload_types(env, i, pos, seen, out);
                }
            }
        }
    }

    fn fresh_placeholder(&mut self) -> TypeExpr {
        self.fresh()
    }

    fn bind_all(&mut self, env: &mut TypeEnv, names: &[Name], types: Vec<TypeExpr>) {
        for (n, ty) in names.iter().zip(types) {
            env.insert(
                n.clone(),
                Binding {
                    ty,
                    usage: Usage::Unused,
                },
            );
        }
    }

    fn check(&mut self, term: &Process, env: &mut TypeEnv) {
        let pos = term.pos;
        match &term.kind {
            ProcessKind::Nil => {}
            ProcessKind::Input { channel, binders, cont } => {
                let payload = self.channel_payload(env, channel, pos, binders.len());
                let types = match payload {
                    Some(items) if items.len() == binders.len() => items,
                    Some(items)
                        if binders.len() == 1
                            && items.len() > 1
                            && items.iter().all(|t| self.resolve(t).is_classical()) =>
                    {
                        vec![TypeExpr::Tuple(items)]
                    }
                    Some(items) => {
                        self.report(
                            pos,
                            Category::ChannelArityMismatch,
                            format!(
                                "`{channel}` carries {} component(s), input binds {}",
                                items.len(),
                                binders.len()
                            ),
                        );
                        binders.iter().map(|_| self.fresh()).collect()
                    }
                    None => binders.iter().map(|_| self.fresh()).collect(),
                };
                self.bind_all(env, binders, types);
                self.check(cont, env);
            }
            ProcessKind::Output { channel, payload, cont } => {
                let mut components = Vec::new();
                let mut seen = BTreeSet::new();
                for e in payload {
                    self.payload_types(env, e, pos, &mut seen, &mut components);
                }
                if let Some(expected) = self.channel_payload(env, channel, pos, components.len()) {
                    if expected.len() != components.len() {
                        self.report(
                            pos,
                            Category::ChannelArityMismatch,
                            format!(
                                "`{channel}` carries {} component(s), message has {}",
                                expected.len(),
                                components.len()
                            ),
                        );
                    } else {
                        for (i, (want, got)) in expected.iter().zip(&components).enumerate() {
                            if !self.unify(want, got) {
                                let (want, got) = (self.resolve(want), self.resolve(got));
                                self.report(
                                    pos,
                                    Category::PayloadTypeMismatch,
                                    format!("component {i} on `{channel}` has type {got}, expected {want}"),
                                );
                            }
                        }
                    }
                }
                self.check(cont, env);
            }
            ProcessKind::Action { targets, gate, cont } => {
                if targets.len() != gate.arity() {
                    self.report(
                        pos,
                        Category::GateArityMismatch,
                        format!("gate acts on {} qubit(s), {} given", gate.arity(), targets.len()),
                    );
                }
                for t in targets {
                    self.use_qubit(env, t, pos, None);
                }
                if let GateRef::Sigma(r) = gate {
                    if let Some(binding) = self.lookup(env, r, pos) {
                        let two_bits = TypeExpr::Tuple(vec![TypeExpr::Bit, TypeExpr::Bit]);
                        if !self.unify(&binding.ty, &two_bits) {
                            let ty = self.resolve(&binding.ty);
                            self.report(
                                pos,
                                Category::PayloadTypeMismatch,
                                format!("sigma index `{r}` has type {ty}, expected (Bit,Bit)"),
                            );
                        }
                    }
                }
                self.check(cont, env);
            }
            ProcessKind::Qbit { binders, cont } => {
                let types = vec![TypeExpr::Qbit; binders.len()];
                self.bind_all(env, binders, types);
                self.check(cont, env);
            }
            ProcessKind::New { binder, cont } => {
                let ty = self.fresh_channel();
                self.bind_all(env, std::slice::from_ref(binder), vec![ty]);
                self.check(cont, env);
            }
            ProcessKind::Par(l, r) => {
                let (fl, fr) = (free_names(l), free_names(r));
                for name in fl.intersection(&fr) {
                    if let Some(b) = env.get(name) {
                        if self.is_qubit(&b.ty) && b.usage == Usage::Unused {
                            self.report(
                                pos,
                                Category::QubitDuplicated,
                                format!("qubit `{name}` is shared by both sides of a parallel composition"),
                            );
                        }
                    }
                }
                let before = env.clone();
                self.check(l, env);
                let mut right = before.clone();
                for (name, b) in right.iter_mut() {
                    if let Some(after) = env.get(name) {
                        if fl.contains(name) && !fr.contains(name) && after.usage > b.usage {
                            b.usage = after.usage;
                        }
                    }
                }
                self.check(r, &mut right);
                for (name, b) in right {
                    let keep_left = before.get(&name) == Some(&b) && env.contains_key(&name);
                    if !keep_left {
                        env.insert(name, b);
                    }
                }
            }
            ProcessKind::Call { process, args } => {
                let Some(params) = self.signatures.get(process).cloned() else {
                    self.report(pos, Category::MissingSignature, format!("no signature for `{process}`"));
                    return;
                };
                if params.len() != args.len() {
                    self.report(
                        pos,
                        Category::ChannelArityMismatch,
                        format!("`{process}` expects {} argument(s), {} given", params.len(), args.len()),
                    );
                    return;
                }
                let mut seen = BTreeSet::new();
                for (arg, want) in args.iter().zip(&params) {
                    let Some(binding) = self.lookup(env, arg, pos) else {
                        continue;
                    };
                    if !self.unify(&binding.ty, want) {
                        let got = self.resolve(&binding.ty);
                        self.report(
                            pos,
                            Category::PayloadTypeMismatch,
                            format!("argument `{arg}` of `{process}` has type {got}, expected {want}"),
                        );
                        continue;
                    }
                    if self.is_qubit(want) {
                        if !seen.insert(arg.clone()) {
                            self.report(
                                pos,
                                Category::QubitDuplicated,
                                format!("qubit `{arg}` passed twice to `{process}`"),
                            );
                            continue;
                        }
                        self.use_qubit(env, arg, pos, Some(Consumption::Passed));
                    }
                }
            }
        }
    }

    fn finish(&self, env: TypeEnv) -> TypeEnv {
        env.into_iter()
            .map(|(n, b)| {
                let ty = self.resolve(&b.ty);
                (n, Binding { ty, usage: b.usage })
            })
            .collect()
    }
}

/// Runs the checker over one term, returning the final usage of every name
/// bound along the way.
pub fn infer_usage(term: &Process, env: TypeEnv, signatures: &Signatures) -> Result<TypeEnv, Vec<Diagnostic>> {
    let mut checker = Checker::new(signatures);
    let mut env = env;
    checker.check(term, &mut env);
    if checker.diags.is_empty() {
        Ok(checker.finish(env))
    } else {
        Err(checker.diags)
    }
}

/// Checks every definition against `signatures`; an empty result means the
/// program is well typed.
pub fn typecheck_program(program: &Program, signatures: &Signatures) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for def in &program.definitions {
        let Some(types) = signatures.get(&def.name) else {
            diags.push(Diagnostic {
                pos: def.pos,
                category: Category::MissingSignature,
                message: format!("no signature for `{}`", def.name),
            });
            continue;
        };
        if types.len() != def.params.len() {
            diags.push(Diagnostic {
                pos: def.pos,
                category: Category::MalformedSignature,
                message: format!(
                    "signature of `{}` lists {} type(s) for {} parameter(s)",
                    def.name,
                    types.len(),
                    def.params.len()
                ),
            });
            continue;
        }
        let mut checker = Checker::new(signatures);
        let mut env: TypeEnv = def
            .params
            .iter()
            .zip(types)
            .map(|(p, ty)| {
                (
                    p.clone(),
                    Binding {
                        ty: ty.clone(),
                        usage: Usage::Unused,
                    },
                )
            })
            .collect();
        checker.check(&def.body, &mut env);
        diags.extend(checker.diags);
    }
    diags
}

/// Type checks using the program's own sidecar signatures.
pub fn check_program(program: &Program) -> Vec<Diagnostic> {
    let (sigs, mut diags) = signatures_from_sidecars(&program.sidecars);
    diags.extend(typecheck_program(program, &sigs));
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    const TELEPORT: &str = "\
//: Alice : Qbit, ^[Qbit], ^[Bit,Bit]
//: Bob : Qbit, ^[Bit,Bit], ^[Qbit]
//: Teleport : ^[Qbit], ^[Qbit]
Alice(q,in,out) = in?[u] . {u,q *= CNot} . {u *= H} . out![measure u,q] . 0
Bob(y,in,out) = in?[r] . {y *= sigma[r]} . out![y] . 0
Teleport(a,b) = (qbit x,y)({x *= H} . {x,y *= CNot} . (new c)(Alice(x,a,c) | Bob(y,c,b)))
";

    fn categories(src: &str) -> Vec<Category> {
        check_program(&parse_program(src).unwrap())
            .into_iter()
            .map(|d| d.category)
            .collect()
    }

    fn env(items: &[(&str, TypeExpr)]) -> TypeEnv {
        items
            .iter()
            .map(|(n, t)| {
                (
                    n.to_string(),
                    Binding {
                        ty: t.clone(),
                        usage: Usage::Unused,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn signature_syntax() {
        let (name, types) = parse_signature("Alice : Qbit, ^[Qbit], ^[Bit,Bit]").unwrap();
        assert_eq!(name, "Alice");
        assert_eq!(
            types,
            vec![
                TypeExpr::Qbit,
                TypeExpr::Channel(vec![TypeExpr::Qbit]),
                TypeExpr::Channel(vec![TypeExpr::Bit, TypeExpr::Bit]),
            ]
        );
        assert_eq!(parse_signature("P :").unwrap().1, vec![]);
        assert_eq!(
            parse_signature("P : ^[^[Bit]]").unwrap().1,
            vec![TypeExpr::Channel(vec![TypeExpr::Channel(vec![TypeExpr::Bit])])]
        );
        assert!(parse_signature("P : Qubit").is_err());
        assert!(parse_signature("no colon").is_err());
        assert!(parse_signature("P : ^[Bit").is_err());
    }

    #[test]
    fn teleport_is_well_typed() {
        assert_eq!(categories(TELEPORT), vec![]);
    }

    #[test]
    fn send_twice_is_use_after_send() {
        let src = "//: P : ^[Qbit], Qbit\nP(c,q) = c![q] . c![q] . 0";
        assert_eq!(categories(src), vec![Category::QubitUsedAfterSend]);
    }

    #[test]
    fn parallel_sharing_is_duplication() {
        let src = "//: P : ^[Qbit], Qbit\nP(c,q) = (c![q].0 | c![q].0)";
        assert_eq!(categories(src), vec![Category::QubitDuplicated]);
    }

    #[test]
    fn gate_after_measure_is_rejected() {
        let src = "//: P : ^[Bit], Qbit\nP(c,q) = c![measure q] . {q *= H} . 0";
        assert_eq!(categories(src), vec![Category::QubitUsedAfterSend]);
    }

    #[test]
    fn gate_then_send_is_fine() {
        let src = "//: P : ^[Qbit], Qbit\nP(c,q) = {q *= H} . {q *= X} . c![q] . 0";
        assert_eq!(categories(src), vec![]);
    }

    #[test]
    fn dropping_a_qubit_is_allowed() {
        assert_eq!(categories("//: P :\nP() = (qbit x) 0"), vec![]);
    }

    #[test]
    fn arity_and_type_errors() {
        assert_eq!(
            categories("//: P : ^[Bit]\nP(c) = c![0,1] . 0"),
            vec![Category::ChannelArityMismatch]
        );
        assert_eq!(
            categories("//: P : ^[Bit], Qbit\nP(c,q) = c![q] . 0"),
            vec![Category::PayloadTypeMismatch]
        );
        assert_eq!(
            categories("//: P : ^[Qbit,Bit]\nP(c) = c?[x] . 0"),
            vec![Category::ChannelArityMismatch]
        );
        assert_eq!(
            categories("//: P : Qbit\nP(q) = {q *= CNot} . 0"),
            vec![Category::GateArityMismatch]
        );
        assert_eq!(
            categories("//: P : ^[Bit], Qbit\nP(c,q) = c?[r] . {q *= sigma[r]} . 0"),
            vec![Category::PayloadTypeMismatch]
        );
    }

    #[test]
    fn unbound_and_missing_signature() {
        assert_eq!(
            categories("//: P : ^[Bit]\nP(c) = d![0] . 0"),
            vec![Category::UnboundName]
        );
        assert_eq!(categories("P() = 0"), vec![Category::MissingSignature]);
        assert_eq!(categories("//: P : Bit\nP() = 0"), vec![Category::MalformedSignature]);
    }

    #[test]
    fn restricted_channel_types_are_inferred() {
        let ok = "//: P : Qbit, ^[Qbit]\nP(q,d) = (new c)(c![q] . 0 | c?[x] . {x *= H} . d![x] . 0)";
        assert_eq!(categories(ok), vec![]);
        let bad = "//: P : Qbit\nP(q) = (new c)(c![q] . 0 | c?[x,y] . 0)";
        assert_eq!(categories(bad), vec![Category::ChannelArityMismatch]);
        let not_a_qubit = "//: P :\nP() = (new c) {c *= H} . 0";
        assert_eq!(categories(not_a_qubit), vec![Category::PayloadTypeMismatch]);
    }

    #[test]
    fn passing_qubit_to_process_consumes_it() {
        let src = "//: Q : Qbit\n//: P : Qbit\nQ(q) = 0\nP(q) = (Q(q) | {q *= H} . 0)";
        assert_eq!(categories(src), vec![Category::QubitDuplicated]);
    }

    #[test]
    fn right_branch_does_not_see_left_binders() {
        let src = "//: P : ^[Qbit]\nP(c) = (c?[x] . 0 | {x *= H} . 0)";
        assert_eq!(categories(src), vec![Category::UnboundName]);
    }

    #[test]
    fn usage_examples() {
        let sigs = Signatures::new();
        let e = env(&[("q", TypeExpr::Qbit), ("c", TypeExpr::Channel(vec![TypeExpr::Qbit]))]);
        assert_eq!(infer_usage(&Process::nil(), e.clone(), &sigs).unwrap(), e);
        let send = Process::output("c", vec![Expr::Var("q".into())], Process::nil());
        let out = infer_usage(&send, e, &sigs).unwrap();
        assert_eq!(out["q"].usage, Usage::Consumed(Consumption::Sent));
    }

    #[test]
    fn alice_consumes_both_qubits() {
        let p = parse_program(TELEPORT).unwrap();
        let (sigs, _) = signatures_from_sidecars(&p.sidecars);
        let alice = p.definition("Alice").unwrap();
        let e = env(&[
            ("q", TypeExpr::Qbit),
            ("in", TypeExpr::Channel(vec![TypeExpr::Qbit])),
            ("out", TypeExpr::Channel(vec![TypeExpr::Bit, TypeExpr::Bit])),
        ]);
        let out = infer_usage(&alice.body, e, &sigs).unwrap();
        assert_eq!(out["u"].usage, Usage::Consumed(Consumption::Measured));
        assert_eq!(out["q"].usage, Usage::Consumed(Consumption::Measured));
    }

    #[test]
    fn diagnostics_are_deterministic() {
        let src = "//: P : ^[Qbit], Qbit, Qbit\nP(c,q,r) = (c![q,r].0 | (c![q].0 | c![r].0))";
        let p = parse_program(src).unwrap();
        let first = check_program(&p);
        assert!(!first.is_empty());
        for _ in 0..5 {
            assert_eq!(check_program(&p), first);
        }
    }
}
