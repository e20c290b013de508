//! Recursive-descent parser.
//!
//! ```text
//! program := (def | call)*          -- at most one bare call, the entry
//! def     := NAME "(" names? ")" "=" proc
//! proc    := "0"
//!          | NAME "?" "[" names? "]" "." proc
//!          | NAME "!" "[" exprs? "]" "." proc
//!          | "{" names "*=" gate "}" "." proc
//!          | "(" "qbit" names ")" proc
//!          | "(" "new" NAME ")" proc
//!          | "(" proc ("|" proc)* ")"
//!          | NAME "(" names? ")"
//! gate    := "H" | "X" | "Z" | "CNot" | "I" | "sigma" "[" NAME "]"
//! expr    := NAME | "0" | "1" | "measure" names | "(" exprs ")"
//! ```
//!
//! `measure` takes every following comma-separated name, so a measurement
//! that is not the last payload item must be parenthesised. `(P | Q | R)`
//! nests to the right.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::lexer::{tokenize, Tok, Token};
use super::{EntryCall, Expr, GateRef, Name, Pos, Process, ProcessDef, ProcessKind, Program, KEYWORDS};
use crate::qstate::StandardGate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    DuplicateDefinition,
    UnknownProcess,
    ArityMismatch,
    DuplicateBinder,
    RecursiveCall,
    DuplicateEntry,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::Lexical => "LexicalError",
            ParseErrorKind::Syntax => "SyntaxError",
            ParseErrorKind::DuplicateDefinition => "DuplicateDefinition",
            ParseErrorKind::UnknownProcess => "UnknownProcess",
            ParseErrorKind::ArityMismatch => "ArityMismatch",
            ParseErrorKind::DuplicateBinder => "DuplicateBinder",
            ParseErrorKind::RecursiveCall => "RecursiveCall",
            ParseErrorKind::DuplicateEntry => "DuplicateEntry",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos} {kind} {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        Self {
            kind,
            pos,
            message: message.into(),
        }
    }
}

type PResult<T> = Result<T, ParseError>;

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::new(
            ParseErrorKind::Syntax,
            self.pos(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn name(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) => Err(ParseError::new(
                ParseErrorKind::Syntax,
                self.pos(),
                format!("`{s}` is a reserved word"),
            )),
            _ => Err(self.unexpected("a name")),
        }
    }

    /// Comma-separated names up to (not including) `close`.
    fn names_until(&mut self, close: &Tok) -> PResult<Vec<Name>> {
        let mut out = Vec::new();
        if self.peek() == close {
            return Ok(out);
        }
        out.push(self.name()?);
        while self.eat(&Tok::Comma) {
            out.push(self.name()?);
        }
        Ok(out)
    }

    fn names1(&mut self) -> PResult<Vec<Name>> {
        let mut out = vec![self.name()?];
        while self.eat(&Tok::Comma) {
            out.push(self.name()?);
        }
        Ok(out)
    }

    fn program(&mut self) -> PResult<(Vec<ProcessDef>, Option<EntryCall>)> {
        let mut defs = Vec::new();
        let mut main: Option<EntryCall> = None;
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            let name = self.name()?;
            self.expect(Tok::LParen)?;
            let params = self.names_until(&Tok::RParen)?;
            self.expect(Tok::RParen)?;
            if self.eat(&Tok::Eq) {
                let body = self.process()?;
                defs.push(ProcessDef {
                    name,
                    params,
                    body,
                    pos,
                });
            } else {
                if main.is_some() {
                    return Err(ParseError::new(
                        ParseErrorKind::DuplicateEntry,
                        pos,
                        "more than one top-level entry call",
                    ));
                }
                main = Some(EntryCall {
                    process: name,
                    args: params,
                    pos,
                });
            }
        }
        Ok((defs, main))
    }

    fn process(&mut self) -> PResult<Process> {
        let pos = self.pos();
        let proc = match self.peek().clone() {
            Tok::Bit(0) => {
                self.bump();
                Process::nil()
            }
            Tok::LBrace => {
                self.bump();
                let targets = self.names1()?;
                self.expect(Tok::StarEq)?;
                let gate = self.gate()?;
                self.expect(Tok::RBrace)?;
                self.expect(Tok::Dot)?;
                Process::action(targets, gate, self.process()?)
            }
            Tok::LParen => {
                self.bump();
                if self.is_keyword("qbit") {
                    self.bump();
                    let binders = self.names1()?;
                    self.expect(Tok::RParen)?;
                    Process::qbit(binders, self.process()?)
                } else if self.is_keyword("new") {
                    self.bump();
                    let binder = self.name()?;
                    self.expect(Tok::RParen)?;
                    Process::new_channel(binder, self.process()?)
                } else {
                    let mut parts = vec![self.process()?];
                    while self.eat(&Tok::Bar) {
                        parts.push(self.process()?);
                    }
                    self.expect(Tok::RParen)?;
                    let last = parts.pop().expect("at least one component");
                    parts
                        .into_iter()
                        .rev()
                        .fold(last, |acc, p| Process::par(p, acc).at(pos))
                }
            }
            Tok::Ident(_) => {
                let name = self.name()?;
                match self.peek() {
                    Tok::Question => {
                        self.bump();
                        self.expect(Tok::LBracket)?;
                        let binders = self.names_until(&Tok::RBracket)?;
                        self.expect(Tok::RBracket)?;
                        self.expect(Tok::Dot)?;
                        Process::input(name, binders, self.process()?)
                    }
                    Tok::Bang => {
                        self.bump();
                        self.expect(Tok::LBracket)?;
                        let payload = self.exprs_until(&Tok::RBracket)?;
                        self.expect(Tok::RBracket)?;
                        self.expect(Tok::Dot)?;
                        Process::output(name, payload, self.process()?)
                    }
                    Tok::LParen => {
                        self.bump();
                        let args = self.names_until(&Tok::RParen)?;
                        self.expect(Tok::RParen)?;
                        Process::call(name, args)
                    }
                    _ => return Err(self.unexpected("`?`, `!` or `(` after a name")),
                }
            }
            _ => return Err(self.unexpected("a process")),
        };
        Ok(proc.at(pos))
    }

    fn gate(&mut self) -> PResult<GateRef> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if s == "sigma" => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let index = self.name()?;
                self.expect(Tok::RBracket)?;
                Ok(GateRef::Sigma(index))
            }
            Tok::Ident(s) => {
                self.bump();
                match s.as_str() {
                    "H" => Ok(GateRef::Fixed(StandardGate::H)),
                    "X" => Ok(GateRef::Fixed(StandardGate::X)),
                    "Z" => Ok(GateRef::Fixed(StandardGate::Z)),
                    "I" => Ok(GateRef::Fixed(StandardGate::I)),
                    "CNot" => Ok(GateRef::Fixed(StandardGate::CNot)),
                    _ => Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        pos,
                        format!("unknown gate `{s}`"),
                    )),
                }
            }
            _ => Err(self.unexpected("a gate name")),
        }
    }

    fn exprs_until(&mut self, close: &Tok) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        if self.peek() == close {
            return Ok(out);
        }
        out.push(self.expr()?);
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn expr(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Bit(b) => {
                self.bump();
                Ok(Expr::Bit(b))
            }
            Tok::Ident(s) if s == "measure" => {
                self.bump();
                let mut qubits = vec![self.name()?];
                while *self.peek() == Tok::Comma
                    && matches!(self.peek_at(1), Tok::Ident(n) if !KEYWORDS.contains(&n.as_str()))
                {
                    self.bump();
                    qubits.push(self.name()?);
                }
                Ok(Expr::Measure(qubits))
            }
            Tok::Ident(_) => Ok(Expr::Var(self.name()?)),
            Tok::LParen => {
                self.bump();
                let mut items = self.exprs_until(&Tok::RParen)?;
                self.expect(Tok::RParen)?;
                if items.len() == 1 {
                    Ok(items.pop().expect("one item"))
                } else {
                    Ok(Expr::Tuple(items))
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

/// Parses and resolves a whole source file.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let (tokens, sidecars) = tokenize(source)?;
    let mut parser = Parser { tokens, at: 0 };
    let (definitions, main) = parser.program()?;
    let program = Program {
        definitions,
        main,
        sidecars,
    };
    resolve(&program)?;
    Ok(program)
}

fn check_distinct(names: &[Name], pos: Pos, what: &str) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateBinder,
                pos,
                format!("`{n}` appears twice in {what}"),
            ));
        }
    }
    Ok(())
}

fn check_call(program: &Program, process: &Name, args: usize, pos: Pos) -> Result<(), ParseError> {
    let def = program.definition(process).ok_or_else(|| {
        ParseError::new(
            ParseErrorKind::UnknownProcess,
            pos,
            format!("call to undefined process `{process}`"),
        )
    })?;
    if def.params.len() != args {
        return Err(ParseError::new(
            ParseErrorKind::ArityMismatch,
            pos,
            format!("`{process}` takes {} argument(s), {args} given", def.params.len()),
        ));
    }
    Ok(())
}

fn check_expr(e: &Expr, pos: Pos) -> Result<(), ParseError> {
    match e {
        Expr::Measure(qs) => check_distinct(qs, pos, "a measurement"),
        Expr::Tuple(items) => items.iter().try_for_each(|i| check_expr(i, pos)),
        Expr::Var(_) | Expr::Bit(_) => Ok(()),
    }
}

/// Definition-level checks: unique names, known callees with matching arity,
/// distinct binders and no recursion.
fn resolve(program: &Program) -> Result<(), ParseError> {
    let mut seen: BTreeMap<&Name, Pos> = BTreeMap::new();
    for def in &program.definitions {
        if seen.insert(&def.name, def.pos).is_some() {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateDefinition,
                def.pos,
                format!("process `{}` defined twice", def.name),
            ));
        }
        check_distinct(&def.params, def.pos, "a parameter list")?;
    }
    for def in &program.definitions {
        let mut result = Ok(());
        def.body.visit(&mut |p| {
            if result.is_err() {
                return;
            }
            result = match &p.kind {
                ProcessKind::Call { process, args } => check_call(program, process, args.len(), p.pos),
                ProcessKind::Input { binders, .. } => check_distinct(binders, p.pos, "an input"),
                ProcessKind::Qbit { binders, .. } => check_distinct(binders, p.pos, "a qubit allocation"),
                ProcessKind::Action { targets, .. } => check_distinct(targets, p.pos, "a gate action"),
                ProcessKind::Output { payload, .. } => payload.iter().try_for_each(|e| check_expr(e, p.pos)),
                ProcessKind::Nil | ProcessKind::New { .. } | ProcessKind::Par(..) => Ok(()),
            };
        });
        result?;
    }
    if let Some(main) = &program.main {
        check_call(program, &main.process, main.args.len(), main.pos)?;
    }
    check_acyclic(program)
}

fn check_acyclic(program: &Program) -> Result<(), ParseError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    fn dfs<'a>(
        program: &'a Program,
        name: &'a Name,
        marks: &mut BTreeMap<&'a Name, Mark>,
        stack: &mut Vec<&'a Name>,
    ) -> Result<(), ParseError> {
        match marks.get(name).copied().unwrap_or(Mark::Fresh) {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = stack.iter().position(|n| *n == name).unwrap_or(0);
                let cycle: Vec<&str> = stack[start..].iter().map(|s| s.as_str()).collect();
                let pos = program.definition(name).map(|d| d.pos).unwrap_or_default();
                return Err(ParseError::new(
                    ParseErrorKind::RecursiveCall,
                    pos,
                    format!("recursive calls are not supported: {} -> {name}", cycle.join(" -> ")),
                ));
            }
            Mark::Fresh => {}
        }
        marks.insert(name, Mark::Active);
        stack.push(name);
        if let Some(def) = program.definition(name) {
            for callee in def.body.called_processes() {
                dfs(program, callee, marks, stack)?;
            }
        }
        stack.pop();
        marks.insert(name, Mark::Done);
        Ok(())
    }
    let mut marks = BTreeMap::new();
    for def in &program.definitions {
        dfs(program, &def.name, &mut marks, &mut Vec::new())?;
    }
    Ok(())
}
