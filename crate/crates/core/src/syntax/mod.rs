//! Abstract syntax of the process language, its parser and name handling.

mod lexer;
mod names;
mod parser;
mod pretty;

use std::fmt;
use std::hash::{Hash, Hasher};

use crate::qstate::StandardGate;

pub use names::{alpha_equivalent, free_names, fresh_name, substitute};
pub use parser::{parse_program, ParseError, ParseErrorKind};
pub use pretty::{pretty_print, pretty_print_program};

pub type Name = String;

/// Reserved words that cannot be used as names.
pub const KEYWORDS: [&str; 4] = ["qbit", "new", "measure", "sigma"];

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(line: usize, col: usize) -> Self {
        Self { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(Name),
    Bit(u8),
    /// `measure u,q`: measures the listed qubits jointly, yielding one bit each.
    Measure(Vec<Name>),
    Tuple(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GateRef {
    Fixed(StandardGate),
    /// `sigma[r]`: correction chosen by the two-bit value bound to `r`.
    Sigma(Name),
}

impl GateRef {
    pub fn arity(&self) -> usize {
        match self {
            GateRef::Fixed(g) => g.arity(),
            GateRef::Sigma(_) => 1,
        }
    }
}

/// A process term. Equality and hashing ignore the source position.
#[derive(Clone, Debug)]
pub struct Process {
    pub kind: ProcessKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProcessKind {
    Nil,
    Input {
        channel: Name,
        binders: Vec<Name>,
        cont: Box<Process>,
    },
    Output {
        channel: Name,
        payload: Vec<Expr>,
        cont: Box<Process>,
    },
    Action {
        targets: Vec<Name>,
        gate: GateRef,
        cont: Box<Process>,
    },
    Qbit {
        binders: Vec<Name>,
        cont: Box<Process>,
    },
    New {
        binder: Name,
        cont: Box<Process>,
    },
    Par(Box<Process>, Box<Process>),
    Call {
        process: Name,
        args: Vec<Name>,
    },
}

impl PartialEq for Process {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Process {}

impl Hash for Process {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state)
    }
}

fn names<I, S>(items: I) -> Vec<Name>
where
    I: IntoIterator<Item = S>,
    S: Into<Name>,
{
    items.into_iter().map(Into::into).collect()
}

impl Process {
    pub fn new(kind: ProcessKind) -> Self {
        Self {
            kind,
            pos: Pos::default(),
        }
    }

    pub fn at(mut self, pos: Pos) -> Self {
        self.pos = pos;
        self
    }

    pub fn nil() -> Self {
        Self::new(ProcessKind::Nil)
    }

    pub fn input<I, S>(channel: impl Into<Name>, binders: I, cont: Process) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Name>,
    {
        Self::new(ProcessKind::Input {
            channel: channel.into(),
            binders: names(binders),
            cont: Box::new(cont),
        })
    }

    pub fn output(channel: impl Into<Name>, payload: Vec<Expr>, cont: Process) -> Self {
        Self::new(ProcessKind::Output {
            channel: channel.into(),
            payload,
            cont: Box::new(cont),
        })
    }

    pub fn action<I, S>(targets: I, gate: GateRef, cont: Process) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Name>,
    {
        Self::new(ProcessKind::Action {
            targets: names(targets),
            gate,
            cont: Box::new(cont),
        })
    }

    pub fn qbit<I, S>(binders: I, cont: Process) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Name>,
    {
        Self::new(ProcessKind::Qbit {
            binders: names(binders),
            cont: Box::new(cont),
        })
    }

    pub fn new_channel(binder: impl Into<Name>, cont: Process) -> Self {
        Self::new(ProcessKind::New {
            binder: binder.into(),
            cont: Box::new(cont),
        })
    }

    pub fn par(left: Process, right: Process) -> Self {
        Self::new(ProcessKind::Par(Box::new(left), Box::new(right)))
    }

    pub fn call<I, S>(process: impl Into<Name>, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Name>,
    {
        Self::new(ProcessKind::Call {
            process: process.into(),
            args: names(args),
        })
    }

    pub fn is_nil(&self) -> bool {
        matches!(self.kind, ProcessKind::Nil)
    }

    /// Names of every process invoked somewhere in this term.
    pub fn called_processes(&self) -> Vec<&Name> {
        let mut out = Vec::new();
        self.visit(&mut |p| {
            if let ProcessKind::Call { process, .. } = &p.kind {
                out.push(process);
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Process)) {
        f(self);
        match &self.kind {
            ProcessKind::Nil | ProcessKind::Call { .. } => {}
            ProcessKind::Input { cont, .. }
            | ProcessKind::Output { cont, .. }
            | ProcessKind::Action { cont, .. }
            | ProcessKind::Qbit { cont, .. }
            | ProcessKind::New { cont, .. } => cont.visit(f),
            ProcessKind::Par(l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}

#[derive(Clone, Debug)]
pub struct ProcessDef {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: Process,
    pub pos: Pos,
}

impl PartialEq for ProcessDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.params == other.params && self.body == other.body
    }
}

/// A top-level invocation naming the process to run.
#[derive(Clone, Debug)]
pub struct EntryCall {
    pub process: Name,
    pub args: Vec<Name>,
    pub pos: Pos,
}

impl PartialEq for EntryCall {
    fn eq(&self, other: &Self) -> bool {
        self.process == other.process && self.args == other.args
    }
}

/// A `//:` line, kept verbatim for the type checker.
#[derive(Clone, Debug)]
pub struct Sidecar {
    pub text: String,
    pub pos: Pos,
}

impl PartialEq for Sidecar {
    fn eq(&self, other: &Self) -> bool {
        self.text.trim() == other.text.trim()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub definitions: Vec<ProcessDef>,
    pub main: Option<EntryCall>,
    pub sidecars: Vec<Sidecar>,
}

impl Program {
    pub fn definition(&self, name: &str) -> Option<&ProcessDef> {
        self.definitions.iter().find(|d| d.name == name)
    }

    /// The explicit entry call if present, otherwise the last definition
    /// applied to its own parameters.
    pub fn entry(&self) -> Option<EntryCall> {
        self.main.clone().or_else(|| {
            self.definitions.last().map(|d| EntryCall {
                process: d.name.clone(),
                args: d.params.clone(),
                pos: d.pos,
            })
        })
    }
}
