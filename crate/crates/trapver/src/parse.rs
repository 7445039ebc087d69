//! Text format for component types and systems.
//!
//! ```text
//! component Task { ports b, f; states w init, u; trans w -b-> u; trans u -f-> w; }
//! component Semaphore { ports a, e; states r init, s; trans r -a-> s; trans s -e-> r; }
//! system mutex {
//!   instances Semaphore: 1; instances Task: param;   // or: param min 2
//!   interaction exists i:Semaphore, j:Task . a(i) and b(j);
//!   interaction exists i:Semaphore, j:Task . e(i) and f(j);
//! }
//! ```
//!
//! Broadcast clauses attach `with forall j:Type . guard -> port(j)` parts;
//! guards are conjunctions of (dis)equalities, `distinct(...)` is sugar for
//! pairwise disequality. A port of a type declared with exactly one
//! instance may be written bare; it desugars to a fresh rendezvous
//! variable. A system is bounded iff every instance count is a literal.

use crate::mil::IndexVar;
use crate::system::{
    Broadcast, ComponentType, EqLit, InstanceCount, InteractionClause, SystemDef, Transition,
};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(usize),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Dot,
    Dash,
    Arrow,
    Eq,
    Neq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "`{n}`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Dash => f.write_str("`-`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Neq => f.write_str("`!=`"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            // Line comments start with //.
            if self.chars.peek() == Some(&'/') {
                let (line, col) = (self.line, self.col);
                self.bump();
                if self.chars.peek() == Some(&'/') {
                    while !matches!(self.chars.peek(), None | Some('\n')) {
                        self.bump();
                    }
                    continue;
                }
                return Err(ParseError {
                    line,
                    col,
                    msg: "stray `/` (comments start with `//`)".into(),
                });
            }
            let (line, col) = (self.line, self.col);
            let c = match self.chars.peek() {
                None => break,
                Some(&c) => c,
            };
            let tok = match c {
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ';' => {
                    self.bump();
                    Tok::Semi
                }
                ':' => {
                    self.bump();
                    Tok::Colon
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '-' => {
                    self.bump();
                    if self.chars.peek() == Some(&'>') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        Tok::Dash
                    }
                }
                '=' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                    }
                    Tok::Eq
                }
                '!' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Neq
                    } else {
                        return Err(self.error("expected `!=`"));
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut n = 0usize;
                    while matches!(self.chars.peek(), Some(d) if d.is_ascii_digit()) {
                        n = n * 10 + self.bump().unwrap().to_digit(10).unwrap() as usize;
                    }
                    Tok::Number(n)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while matches!(self.chars.peek(), Some(d) if d.is_alphanumeric() || *d == '_') {
                        s.push(self.bump().unwrap());
                    }
                    Tok::Ident(s)
                }
                other => return Err(self.error(format!("unexpected character `{other}`"))),
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }
}

struct Parser {
    tokens: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _, _)| t)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|(t, _, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|&(_, l, c)| (l, c))
            .unwrap_or((1, 1))
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<Tok, ParseError> {
        match self.tokens.get(self.pos) {
            Some((t, _, _)) => {
                let t = t.clone();
                self.pos += 1;
                Ok(t)
            }
            None => Err(self.error(format!("unexpected end of input, expected {what}"))),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let got = self.next(&tok.to_string())?;
        if got == tok {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.error(format!("expected {tok}, found {got}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next(what)? {
            Tok::Ident(s) => Ok(s),
            got => {
                self.pos -= 1;
                Err(self.error(format!("expected {what}, found {got}")))
            }
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let got = self.ident(&format!("`{kw}`"))?;
        if got == kw {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.error(format!("expected `{kw}`, found `{got}`")))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn ident_list(&mut self, what: &str) -> Result<Vec<String>, ParseError> {
        let mut out = vec![self.ident(what)?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            out.push(self.ident(what)?);
        }
        Ok(out)
    }
}

/// Parse one system definition (component blocks followed by one system
/// block) and validate it.
pub fn parse_system(text: &str) -> Result<SystemDef, ParseError> {
    let tokens = Lexer::new(text).tokens()?;
    let mut p = Parser { tokens, pos: 0 };
    let mut types = Vec::new();
    while p.at_keyword("component") {
        types.push(parse_component(&mut p)?);
    }
    let (sys_line, sys_col) = p.here();
    p.keyword("system")?;
    let name = p.ident("system name")?;
    p.expect(Tok::LBrace)?;
    let mut counts: BTreeMap<String, InstanceCount> = BTreeMap::new();
    while p.at_keyword("instances") {
        p.pos += 1;
        let ty = p.ident("component type name")?;
        p.expect(Tok::Colon)?;
        let count = match p.next("instance count")? {
            Tok::Number(n) => InstanceCount::Literal(n),
            Tok::Ident(kw) if kw == "param" => {
                let mut min = 1;
                if p.at_keyword("min") {
                    p.pos += 1;
                    match p.next("minimum instance count")? {
                        Tok::Number(n) => min = n,
                        got => {
                            p.pos -= 1;
                            return Err(p.error(format!("expected a number, found {got}")));
                        }
                    }
                }
                InstanceCount::Param { min }
            }
            got => {
                p.pos -= 1;
                return Err(p.error(format!("expected a count or `param`, found {got}")));
            }
        };
        if counts.insert(ty.clone(), count).is_some() {
            return Err(p.error(format!("duplicate instance declaration for `{ty}`")));
        }
        p.expect(Tok::Semi)?;
    }
    let mut clauses = Vec::new();
    while p.at_keyword("interaction") {
        p.pos += 1;
        clauses.push(parse_clause(&mut p, &types, &counts)?);
    }
    p.expect(Tok::RBrace)?;
    if p.peek().is_some() {
        return Err(p.error("trailing input after the system block"));
    }
    let def = SystemDef {
        name,
        types,
        counts,
        clauses,
    };
    def.validate().map_err(|e| ParseError {
        line: sys_line,
        col: sys_col,
        msg: e.to_string(),
    })?;
    Ok(def)
}

fn parse_component(p: &mut Parser) -> Result<ComponentType, ParseError> {
    p.keyword("component")?;
    let name = p.ident("component type name")?;
    p.expect(Tok::LBrace)?;
    p.keyword("ports")?;
    let ports = p.ident_list("port name")?;
    p.expect(Tok::Semi)?;
    p.keyword("states")?;
    let mut states = Vec::new();
    let mut initial: Option<String> = None;
    loop {
        let state = p.ident("state name")?;
        if p.at_keyword("init") {
            p.pos += 1;
            if initial.replace(state.clone()).is_some() {
                return Err(p.error(format!("component `{name}` has two initial states")));
            }
        }
        states.push(state);
        if p.peek() == Some(&Tok::Comma) {
            p.pos += 1;
        } else {
            break;
        }
    }
    p.expect(Tok::Semi)?;
    let initial =
        initial.ok_or_else(|| p.error(format!("component `{name}` has no `init` state")))?;
    let mut transitions = Vec::new();
    while p.at_keyword("trans") {
        p.pos += 1;
        let from = p.ident("source state")?;
        p.expect(Tok::Dash)?;
        let port = p.ident("port name")?;
        p.expect(Tok::Arrow)?;
        let to = p.ident("target state")?;
        p.expect(Tok::Semi)?;
        transitions.push(Transition { from, port, to });
    }
    p.expect(Tok::RBrace)?;
    Ok(ComponentType {
        name,
        ports,
        states,
        initial,
        transitions,
    })
}

struct ClauseScope {
    vars: BTreeMap<String, IndexVar>,
}

impl ClauseScope {
    fn lookup(&self, p: &Parser, name: &str) -> Result<IndexVar, ParseError> {
        self.vars
            .get(name)
            .cloned()
            .ok_or_else(|| p.error(format!("unbound variable `{name}`")))
    }
}

fn parse_clause(
    p: &mut Parser,
    types: &[ComponentType],
    counts: &BTreeMap<String, InstanceCount>,
) -> Result<InteractionClause, ParseError> {
    p.keyword("exists")?;
    let mut scope = ClauseScope {
        vars: BTreeMap::new(),
    };
    let mut rendezvous_vars: Vec<IndexVar> = Vec::new();
    loop {
        let var = p.ident("variable name")?;
        p.expect(Tok::Colon)?;
        let ty = p.ident("component type name")?;
        if !types.iter().any(|t| t.name == ty) {
            return Err(p.error(format!("unknown component type `{ty}`")));
        }
        let iv = IndexVar::new(var.clone(), ty);
        if scope.vars.insert(var.clone(), iv.clone()).is_some() {
            return Err(p.error(format!("variable `{var}` declared twice")));
        }
        rendezvous_vars.push(iv);
        if p.peek() == Some(&Tok::Comma) {
            p.pos += 1;
        } else {
            break;
        }
    }
    p.expect(Tok::Dot)?;

    // Body: `and`-separated port atoms, bare singleton ports and guard
    // literals. Each rendezvous variable must end up with exactly one port.
    let mut ports: BTreeMap<String, String> = BTreeMap::new();
    let mut guard: Vec<EqLit> = Vec::new();
    let mut fresh = 0usize;
    loop {
        parse_body_conjunct(
            p,
            types,
            counts,
            &mut scope,
            &mut rendezvous_vars,
            &mut ports,
            &mut guard,
            &mut fresh,
        )?;
        if p.at_keyword("and") {
            p.pos += 1;
        } else {
            break;
        }
    }
    for v in &rendezvous_vars {
        if !ports.contains_key(v.name()) {
            return Err(p.error(format!(
                "rendezvous variable `{}` has no port atom",
                v.name()
            )));
        }
    }
    let rendezvous: Vec<(IndexVar, String)> = rendezvous_vars
        .iter()
        .map(|v| (v.clone(), ports[v.name()].clone()))
        .collect();

    // Broadcast parts.
    let mut broadcasts = Vec::new();
    while p.at_keyword("with") {
        p.pos += 1;
        broadcasts.push(parse_broadcast(p, types, &scope)?);
    }
    p.expect(Tok::Semi)?;
    Ok(InteractionClause {
        rendezvous,
        guard,
        broadcasts,
    })
}

#[allow(clippy::too_many_arguments)]
fn parse_body_conjunct(
    p: &mut Parser,
    types: &[ComponentType],
    counts: &BTreeMap<String, InstanceCount>,
    scope: &mut ClauseScope,
    rendezvous_vars: &mut Vec<IndexVar>,
    ports: &mut BTreeMap<String, String>,
    guard: &mut Vec<EqLit>,
    fresh: &mut usize,
) -> Result<(), ParseError> {
    if p.at_keyword("distinct") {
        p.pos += 1;
        p.expect(Tok::LParen)?;
        let names = p.ident_list("variable name")?;
        p.expect(Tok::RParen)?;
        let vars: Vec<IndexVar> = names
            .iter()
            .map(|n| scope.lookup(p, n))
            .collect::<Result<_, _>>()?;
        for a in 0..vars.len() {
            for b in a + 1..vars.len() {
                guard.push(EqLit {
                    left: vars[a].clone(),
                    right: vars[b].clone(),
                    equal: false,
                });
            }
        }
        return Ok(());
    }
    if p.at_keyword("true") {
        p.pos += 1;
        return Ok(());
    }
    let name = p.ident("port atom or guard literal")?;
    match p.peek() {
        Some(Tok::LParen) => {
            p.pos += 1;
            let var = p.ident("variable name")?;
            p.expect(Tok::RParen)?;
            scope.lookup(p, &var)?;
            if ports.insert(var.clone(), name.clone()).is_some() {
                return Err(p.error(format!("variable `{var}` already has a port atom")));
            }
            Ok(())
        }
        Some(Tok::Eq) | Some(Tok::Neq) => {
            let equal = p.next("comparison")? == Tok::Eq;
            let rhs = p.ident("variable name")?;
            guard.push(EqLit {
                left: scope.lookup(p, &name)?,
                right: scope.lookup(p, &rhs)?,
                equal,
            });
            Ok(())
        }
        _ => {
            // Bare port of a singleton type: introduce a fresh rendezvous
            // variable for its (unique) instance.
            let owner = types
                .iter()
                .find(|t| t.ports.contains(&name))
                .ok_or_else(|| p.error(format!("unknown port `{name}`")))?;
            if counts.get(&owner.name) != Some(&InstanceCount::Literal(1)) {
                return Err(p.error(format!(
                    "bare port `{name}` needs `{}` to be declared with exactly 1 instance",
                    owner.name
                )));
            }
            *fresh += 1;
            let var_name = format!("_{}{}", name, fresh);
            let iv = IndexVar::new(var_name.clone(), owner.name.clone());
            scope.vars.insert(var_name.clone(), iv.clone());
            rendezvous_vars.push(iv);
            ports.insert(var_name, name);
            Ok(())
        }
    }
}

fn parse_broadcast(
    p: &mut Parser,
    types: &[ComponentType],
    scope: &ClauseScope,
) -> Result<Broadcast, ParseError> {
    p.keyword("forall")?;
    let var = p.ident("variable name")?;
    p.expect(Tok::Colon)?;
    let ty = p.ident("component type name")?;
    if !types.iter().any(|t| t.name == ty) {
        return Err(p.error(format!("unknown component type `{ty}`")));
    }
    let bvar = IndexVar::new(var.clone(), ty);
    if scope.vars.contains_key(&var) {
        return Err(p.error(format!(
            "broadcast variable `{var}` shadows a rendezvous variable"
        )));
    }
    p.expect(Tok::Dot)?;
    let mut bc_scope = ClauseScope {
        vars: scope.vars.clone(),
    };
    bc_scope.vars.insert(var.clone(), bvar.clone());

    // Either `port(var)` directly or `guard -> port(var)`, with the guard
    // optionally parenthesized.
    let mut guard = Vec::new();
    let unguarded = matches!(p.peek(), Some(Tok::Ident(_)))
        && p.peek_at(1) == Some(&Tok::LParen)
        && !p.at_keyword("distinct")
        && matches!(p.peek_at(3), Some(Tok::RParen))
        && !matches!(
            p.peek_at(4),
            Some(Tok::Arrow) | Some(Tok::Eq) | Some(Tok::Neq)
        );
    if !unguarded {
        let parenthesized = p.peek() == Some(&Tok::LParen);
        if parenthesized {
            p.pos += 1;
        }
        loop {
            parse_guard_literal(p, &bc_scope, &mut guard)?;
            if p.at_keyword("and") {
                p.pos += 1;
            } else {
                break;
            }
        }
        if parenthesized {
            p.expect(Tok::RParen)?;
        }
        p.expect(Tok::Arrow)?;
    }
    let port = p.ident("port name")?;
    p.expect(Tok::LParen)?;
    let pvar = p.ident("variable name")?;
    p.expect(Tok::RParen)?;
    if pvar != var {
        return Err(p.error(format!(
            "broadcast port must apply to `{var}`, found `{pvar}`"
        )));
    }
    Ok(Broadcast {
        var: bvar,
        guard,
        port,
    })
}

fn parse_guard_literal(
    p: &mut Parser,
    scope: &ClauseScope,
    guard: &mut Vec<EqLit>,
) -> Result<(), ParseError> {
    if p.at_keyword("true") {
        p.pos += 1;
        return Ok(());
    }
    if p.at_keyword("distinct") {
        p.pos += 1;
        p.expect(Tok::LParen)?;
        let names = p.ident_list("variable name")?;
        p.expect(Tok::RParen)?;
        let vars: Vec<IndexVar> = names
            .iter()
            .map(|n| scope.lookup(p, n))
            .collect::<Result<_, _>>()?;
        for a in 0..vars.len() {
            for b in a + 1..vars.len() {
                guard.push(EqLit {
                    left: vars[a].clone(),
                    right: vars[b].clone(),
                    equal: false,
                });
            }
        }
        return Ok(());
    }
    let lhs = p.ident("variable name")?;
    let equal = match p.next("`=` or `!=`")? {
        Tok::Eq => true,
        Tok::Neq => false,
        got => {
            p.pos -= 1;
            return Err(p.error(format!("expected `=` or `!=`, found {got}")));
        }
    };
    let rhs = p.ident("variable name")?;
    guard.push(EqLit {
        left: scope.lookup(p, &lhs)?,
        right: scope.lookup(p, &rhs)?,
        equal,
    });
    Ok(())
}
