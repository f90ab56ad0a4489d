//! Textual format for declaring systems, users and memories, with `forall`
//! templates expanded over the declared value domain.
//!
//! The grammar is line oriented, one declaration per line, `#` comments:
//!
//! ```text
//! system NAME | user NAME | memory NAME
//! domain {v, v, ...}
//! channel NAME erase|other
//! state NAME [initial]
//! trans NAME -> TARGET : ACTION [forall VAR]
//! mem INT = VALUE
//! ```
//!
//! with actions `out CH (VALUE|$VAR|BE|EE)`, `in CH (VALUE|$VAR|BE|EE)` and
//! `read i=INT (VALUE|$VAR)`. A `$VAR` in the target name generates one
//! state per domain value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lts::{ChannelId, Label, Lts, LtsKind, MemIndex, StateId, Transition, ValueDomain};
use crate::system::{SpecError, SystemSpec};
use crate::user::{Memory, UserSpec};

/// Kind of a parsed document.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocKind {
    System,
    User,
    Memory,
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocKind::System => write!(f, "system"),
            DocKind::User => write!(f, "user"),
            DocKind::Memory => write!(f, "memory"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A problem found while parsing or expanding, with its source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseDiagnostic {
    ParseDiagnostic {
        line,
        column,
        message: message.into(),
        severity: Severity::Error,
    }
}

/// One value position of an action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValueArg {
    Literal(String),
    Var(String),
    Begin,
    End,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionDecl {
    Out { channel: String, arg: ValueArg },
    In { channel: String, arg: ValueArg },
    Read { index: u32, arg: ValueArg },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransDecl {
    pub from: String,
    pub to: String,
    pub action: ActionDecl,
    pub forall: Option<String>,
    pub line: usize,
}

/// A parsed document before expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecDocument {
    pub kind: DocKind,
    pub name: String,
    pub domain: Vec<String>,
    pub erase_channel: Option<String>,
    pub other_channels: Vec<String>,
    pub states: Vec<String>,
    pub initial: Option<String>,
    pub transitions: Vec<TransDecl>,
    pub mems: Vec<(u32, String)>,
}

/// A fully expanded model.
#[derive(Clone, Debug)]
pub enum LoadedModel {
    System {
        name: String,
        lts: Lts,
        erase_channel: ChannelId,
        other_channels: BTreeSet<ChannelId>,
    },
    User {
        name: String,
        lts: Lts,
        erase_channel: ChannelId,
    },
    Memory {
        name: String,
        domain: ValueDomain,
        memory: Memory,
    },
}

impl LoadedModel {
    pub fn kind(&self) -> DocKind {
        match self {
            LoadedModel::System { .. } => DocKind::System,
            LoadedModel::User { .. } => DocKind::User,
            LoadedModel::Memory { .. } => DocKind::Memory,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            LoadedModel::System { name, .. }
            | LoadedModel::User { name, .. }
            | LoadedModel::Memory { name, .. } => name,
        }
    }

    pub fn lts(&self) -> Option<&Lts> {
        match self {
            LoadedModel::System { lts, .. } | LoadedModel::User { lts, .. } => Some(lts),
            LoadedModel::Memory { .. } => None,
        }
    }

    pub fn to_system_spec(&self) -> Result<SystemSpec, SpecError> {
        match self {
            LoadedModel::System {
                lts,
                erase_channel,
                other_channels,
                ..
            } => SystemSpec::new(lts.clone(), erase_channel.clone(), other_channels.clone()),
            other => Err(SpecError::WrongKind {
                expected: LtsKind::System,
                got: match other.kind() {
                    DocKind::User => LtsKind::User,
                    _ => LtsKind::Composed,
                },
            }),
        }
    }

    pub fn to_user_spec(&self) -> Result<UserSpec, SpecError> {
        match self {
            LoadedModel::User {
                lts, erase_channel, ..
            } => UserSpec::new(lts.clone(), erase_channel.clone()),
            other => Err(SpecError::WrongKind {
                expected: LtsKind::User,
                got: match other.kind() {
                    DocKind::System => LtsKind::System,
                    _ => LtsKind::Composed,
                },
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Token {
    text: String,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let column = i + 1;
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            tokens.push(Token {
                text: "->".to_string(),
                column,
            });
            i += 2;
            continue;
        }
        if "{},:=".contains(c) {
            tokens.push(Token {
                text: c.to_string(),
                column,
            });
            i += 1;
            continue;
        }
        if c.is_alphanumeric() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                column,
            });
            continue;
        }
        tokens.push(Token {
            text: c.to_string(),
            column,
        });
        i += 1;
    }
    tokens
}

struct LineParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, what: &str) -> Result<Token, ParseDiagnostic> {
        match self.tokens.get(self.pos) {
            Some(t) if t.text == what => {
                self.pos += 1;
                Ok(t.clone())
            }
            Some(t) => Err(err(
                self.line,
                t.column,
                format!("expected '{what}', found '{}'", t.text),
            )),
            None => Err(err(
                self.line,
                self.end_column(),
                format!("expected '{what}'"),
            )),
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<Token, ParseDiagnostic> {
        match self.tokens.get(self.pos) {
            Some(t) if is_name(&t.text) => {
                self.pos += 1;
                Ok(t.clone())
            }
            Some(t) => Err(err(
                self.line,
                t.column,
                format!("expected {what}, found '{}'", t.text),
            )),
            None => Err(err(
                self.line,
                self.end_column(),
                format!("expected {what}"),
            )),
        }
    }

    fn end_column(&self) -> usize {
        self.tokens
            .last()
            .map(|t| t.column + t.text.chars().count())
            .unwrap_or(1)
    }

    fn done(&mut self) -> Result<(), ParseDiagnostic> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(err(
                self.line,
                t.column,
                format!("unexpected trailing '{}'", t.text),
            )),
        }
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn is_value_literal(s: &str) -> bool {
    if s == "BE" || s == "EE" {
        return false;
    }
    !s.is_empty() && (s.chars().all(|c| c.is_ascii_digit()) || is_name(s))
}

fn parse_value_arg(p: &mut LineParser) -> Result<(ValueArg, usize), ParseDiagnostic> {
    match p.next() {
        Some(t) if t.text == "BE" => Ok((ValueArg::Begin, t.column)),
        Some(t) if t.text == "EE" => Ok((ValueArg::End, t.column)),
        Some(t) if t.text.starts_with('$') && is_name(&t.text[1..]) => {
            Ok((ValueArg::Var(t.text[1..].to_string()), t.column))
        }
        Some(t) if is_value_literal(&t.text) => Ok((ValueArg::Literal(t.text.clone()), t.column)),
        Some(t) => Err(err(
            p.line,
            t.column,
            format!("expected a value, '$VAR', 'BE' or 'EE', found '{}'", t.text),
        )),
        None => Err(err(p.line, p.end_column(), "expected a value")),
    }
}

/// Parse a document. Errors abort loading; the result is a document whose
/// expansion is well defined.
pub fn parse_spec(text: &str) -> Result<SpecDocument, Vec<ParseDiagnostic>> {
    let mut diagnostics: Vec<ParseDiagnostic> = Vec::new();
    let mut doc: Option<SpecDocument> = None;
    let mut declared_states: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser {
            tokens: &tokens,
            pos: 0,
            line: line_no,
        };
        let head = p.next().expect("nonempty");

        let Some(document) = doc.as_mut() else {
            // First content line must be the header.
            let kind = match head.text.as_str() {
                "system" => DocKind::System,
                "user" => DocKind::User,
                "memory" => DocKind::Memory,
                _ => {
                    diagnostics.push(err(
                        line_no,
                        head.column,
                        "missing header: expected 'system NAME', 'user NAME' or 'memory NAME'",
                    ));
                    return Err(diagnostics);
                }
            };
            match p.expect_name("a document name") {
                Ok(name) => {
                    if let Err(e) = p.done() {
                        diagnostics.push(e);
                    }
                    doc = Some(SpecDocument {
                        kind,
                        name: name.text.clone(),
                        domain: Vec::new(),
                        erase_channel: None,
                        other_channels: Vec::new(),
                        states: Vec::new(),
                        initial: None,
                        transitions: Vec::new(),
                        mems: Vec::new(),
                    });
                }
                Err(e) => {
                    diagnostics.push(e);
                    return Err(diagnostics);
                }
            }
            continue;
        };

        let result: Result<(), ParseDiagnostic> = (|| {
            match head.text.as_str() {
                "domain" => {
                    if !document.domain.is_empty() {
                        return Err(err(line_no, head.column, "domain already declared"));
                    }
                    p.expect("{")?;
                    loop {
                        let t = p
                            .next()
                            .ok_or_else(|| err(line_no, p.end_column(), "expected a value"))?;
                        if !is_value_literal(&t.text) {
                            return Err(err(
                                line_no,
                                t.column,
                                format!("'{}' is not a legal domain value", t.text),
                            ));
                        }
                        if document.domain.contains(&t.text) {
                            return Err(err(
                                line_no,
                                t.column,
                                format!("duplicate value '{}' in domain", t.text),
                            ));
                        }
                        document.domain.push(t.text.clone());
                        match p.next() {
                            Some(t) if t.text == "," => continue,
                            Some(t) if t.text == "}" => break,
                            Some(t) => {
                                return Err(err(
                                    line_no,
                                    t.column,
                                    format!("expected ',' or '}}', found '{}'", t.text),
                                ))
                            }
                            None => return Err(err(line_no, p.end_column(), "expected '}'")),
                        }
                    }
                    p.done()?;
                    if document.domain.len() < 2 {
                        return Err(err(
                            line_no,
                            head.column,
                            "the value domain needs at least 2 values",
                        ));
                    }
                }
                "channel" => {
                    if document.kind == DocKind::Memory {
                        return Err(err(
                            line_no,
                            head.column,
                            "channel declarations are not allowed in memory documents",
                        ));
                    }
                    let name = p.expect_name("a channel name")?;
                    let role = p.next().ok_or_else(|| {
                        err(line_no, p.end_column(), "expected 'erase' or 'other'")
                    })?;
                    p.done()?;
                    match role.text.as_str() {
                        "erase" => {
                            if document.erase_channel.is_some() {
                                return Err(err(
                                    line_no,
                                    name.column,
                                    "erase channel already declared",
                                ));
                            }
                            document.erase_channel = Some(name.text.clone());
                        }
                        "other" => {
                            if document.kind == DocKind::User {
                                return Err(err(
                                    line_no,
                                    name.column,
                                    "user models communicate only on the erase channel",
                                ));
                            }
                            if document.other_channels.contains(&name.text) {
                                return Err(err(
                                    line_no,
                                    name.column,
                                    format!("duplicate channel '{}'", name.text),
                                ));
                            }
                            document.other_channels.push(name.text.clone());
                        }
                        _ => {
                            return Err(err(
                                line_no,
                                role.column,
                                format!("expected 'erase' or 'other', found '{}'", role.text),
                            ))
                        }
                    }
                }
                "state" => {
                    if document.kind == DocKind::Memory {
                        return Err(err(
                            line_no,
                            head.column,
                            "state declarations are not allowed in memory documents",
                        ));
                    }
                    let name = p.expect_name("a state name")?;
                    let initial = match p.peek() {
                        Some(t) if t.text == "initial" => {
                            p.next();
                            true
                        }
                        _ => false,
                    };
                    p.done()?;
                    if !declared_states.insert(name.text.clone()) {
                        return Err(err(
                            line_no,
                            name.column,
                            format!("duplicate state '{}'", name.text),
                        ));
                    }
                    document.states.push(name.text.clone());
                    if initial {
                        if document.initial.is_some() {
                            return Err(err(
                                line_no,
                                name.column,
                                "initial state already declared",
                            ));
                        }
                        document.initial = Some(name.text.clone());
                    }
                }
                "trans" => {
                    if document.kind == DocKind::Memory {
                        return Err(err(
                            line_no,
                            head.column,
                            "transitions are not allowed in memory documents",
                        ));
                    }
                    let from = p.expect_name("a source state")?;
                    p.expect("->")?;
                    let to = match p.next() {
                        Some(t)
                            if is_name(&t.text.replace('$', "x"))
                                || t.text.contains('$') && !t.text.is_empty() =>
                        {
                            t
                        }
                        Some(t) => {
                            return Err(err(
                                line_no,
                                t.column,
                                format!("expected a target state, found '{}'", t.text),
                            ))
                        }
                        None => {
                            return Err(err(line_no, p.end_column(), "expected a target state"))
                        }
                    };
                    p.expect(":")?;
                    let verb = p
                        .next()
                        .ok_or_else(|| err(line_no, p.end_column(), "expected an action"))?;
                    let action = match verb.text.as_str() {
                        "out" | "in" => {
                            let ch = p.expect_name("a channel name")?;
                            let (arg, _) = parse_value_arg(&mut p)?;
                            if verb.text == "out" {
                                ActionDecl::Out {
                                    channel: ch.text.clone(),
                                    arg,
                                }
                            } else {
                                ActionDecl::In {
                                    channel: ch.text.clone(),
                                    arg,
                                }
                            }
                        }
                        "read" => {
                            let i = p.expect("i").map_err(|_| {
                                err(
                                    line_no,
                                    p.peek().map(|t| t.column).unwrap_or_else(|| p.end_column()),
                                    "expected 'i=INDEX' after 'read'",
                                )
                            })?;
                            p.expect("=")?;
                            let idx = p
                                .next()
                                .ok_or_else(|| err(line_no, p.end_column(), "expected an index"))?;
                            let index: u32 = idx.text.parse().map_err(|_| {
                                err(
                                    line_no,
                                    idx.column,
                                    format!("'{}' is not a memory index", idx.text),
                                )
                            })?;
                            if index == 0 {
                                return Err(err(
                                    line_no,
                                    idx.column,
                                    "memory indices are positive",
                                ));
                            }
                            let (arg, col) = parse_value_arg(&mut p)?;
                            if matches!(arg, ValueArg::Begin | ValueArg::End) {
                                return Err(err(line_no, col, "reads fetch values, not markers"));
                            }
                            let _ = i;
                            ActionDecl::Read { index, arg }
                        }
                        _ => {
                            return Err(err(
                                line_no,
                                verb.column,
                                format!("expected 'out', 'in' or 'read', found '{}'", verb.text),
                            ))
                        }
                    };
                    let forall = match p.peek() {
                        Some(t) if t.text == "forall" => {
                            let col = t.column;
                            p.next();
                            let var = p.expect_name("a variable name")?;
                            if document.domain.is_empty() {
                                return Err(err(
                                    line_no,
                                    col,
                                    "forall requires the domain to be declared first",
                                ));
                            }
                            Some(var.text.clone())
                        }
                        _ => None,
                    };
                    p.done()?;
                    document.transitions.push(TransDecl {
                        from: from.text.clone(),
                        to: to.text.clone(),
                        action,
                        forall,
                        line: line_no,
                    });
                }
                "mem" => {
                    if document.kind != DocKind::Memory {
                        return Err(err(
                            line_no,
                            head.column,
                            "mem entries are only allowed in memory documents",
                        ));
                    }
                    let idx = p
                        .next()
                        .ok_or_else(|| err(line_no, p.end_column(), "expected an index"))?;
                    let index: u32 = idx.text.parse().map_err(|_| {
                        err(
                            line_no,
                            idx.column,
                            format!("'{}' is not a memory index", idx.text),
                        )
                    })?;
                    if index == 0 {
                        return Err(err(line_no, idx.column, "memory indices are positive"));
                    }
                    p.expect("=")?;
                    let val = p
                        .next()
                        .ok_or_else(|| err(line_no, p.end_column(), "expected a value"))?;
                    if !is_value_literal(&val.text) {
                        return Err(err(
                            line_no,
                            val.column,
                            format!("'{}' is not a legal value", val.text),
                        ));
                    }
                    p.done()?;
                    if document.mems.iter().any(|(i, _)| *i == index) {
                        return Err(err(
                            line_no,
                            idx.column,
                            format!("memory index {index} defined twice"),
                        ));
                    }
                    document.mems.push((index, val.text.clone()));
                }
                _ => {
                    return Err(err(
                        line_no,
                        head.column,
                        format!("unknown declaration '{}'", head.text),
                    ))
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            diagnostics.push(e);
        }
    }

    let Some(document) = doc else {
        diagnostics.push(err(1, 1, "missing header: the document is empty"));
        return Err(diagnostics);
    };

    // Document-level checks.
    if document.domain.is_empty() {
        diagnostics.push(err(1, 1, "missing domain declaration"));
    }
    if document.kind != DocKind::Memory {
        if document.initial.is_none() {
            diagnostics.push(err(1, 1, "missing initial state"));
        }
        if document.erase_channel.is_none() {
            diagnostics.push(err(1, 1, "missing erase channel declaration"));
        }
    }
    for t in &document.transitions {
        if !declared_states.contains(&t.from) {
            diagnostics.push(err(t.line, 1, format!("unknown state {}", t.from)));
        }
        if !t.to.contains('$') && !declared_states.contains(&t.to) {
            diagnostics.push(err(t.line, 1, format!("unknown state {}", t.to)));
        }
        // Literal values must be inside the domain.
        let arg = match &t.action {
            ActionDecl::Out { arg, .. }
            | ActionDecl::In { arg, .. }
            | ActionDecl::Read { arg, .. } => arg,
        };
        if let ValueArg::Literal(lit) = arg {
            if !document.domain.contains(lit) {
                diagnostics.push(err(
                    t.line,
                    1,
                    format!("value '{lit}' is outside the declared domain"),
                ));
            }
        }
        if let ValueArg::Var(v) = arg {
            if t.forall.as_deref() != Some(v.as_str()) {
                diagnostics.push(err(
                    t.line,
                    1,
                    format!("variable '${v}' is not bound by a forall"),
                ));
            }
        }
        if let Some(var) = &t.forall {
            let uses_var =
                matches!(arg, ValueArg::Var(v) if v == var) || t.to.contains(&format!("${var}"));
            if !uses_var {
                diagnostics.push(err(
                    t.line,
                    1,
                    format!("forall variable '{var}' is never used"),
                ));
            }
        }
    }
    for (_, lit) in &document.mems {
        if !document.domain.contains(lit) {
            diagnostics.push(err(
                1,
                1,
                format!("memory value '{lit}' is outside the declared domain"),
            ));
        }
    }

    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        Err(diagnostics)
    } else {
        Ok(document)
    }
}

/// Expand templates over the domain and build the model. Target patterns
/// containing the bound variable generate one state per value.
pub fn expand(doc: &SpecDocument) -> Result<LoadedModel, Vec<ParseDiagnostic>> {
    let mut diagnostics = Vec::new();
    let domain = match ValueDomain::new(doc.domain.clone()) {
        Ok(d) => d,
        Err(e) => {
            return Err(vec![err(1, 1, format!("bad domain: {e}"))]);
        }
    };

    if doc.kind == DocKind::Memory {
        let entries: BTreeMap<MemIndex, _> = doc
            .mems
            .iter()
            .map(|(i, lit)| (MemIndex(*i), domain.lookup(lit).expect("checked at parse")))
            .collect();
        return Ok(LoadedModel::Memory {
            name: doc.name.clone(),
            domain,
            memory: Memory::new(entries),
        });
    }

    let erase = doc.erase_channel.clone().expect("checked at parse");
    let kind = match doc.kind {
        DocKind::System => LtsKind::System,
        DocKind::User => LtsKind::User,
        DocKind::Memory => unreachable!(),
    };

    let mut states: BTreeSet<StateId> = doc.states.iter().map(StateId::new).collect();
    let mut by_source: BTreeMap<(StateId, Label), StateId> = BTreeMap::new();
    let mut transitions: BTreeSet<Transition> = BTreeSet::new();

    for t in &doc.transitions {
        let instances: Vec<(Option<&str>, String)> = match &t.forall {
            Some(var) => domain
                .values()
                .map(|v| {
                    let lit = domain.literal(v);
                    (Some(lit), t.to.replace(&format!("${var}"), lit))
                })
                .collect(),
            None => vec![(None, t.to.clone())],
        };
        for (bound, target_name) in instances {
            let target = StateId::new(target_name.clone());
            if !states.contains(&target) {
                // Generated per-value state.
                states.insert(target.clone());
            }
            let resolve = |arg: &ValueArg| -> Result<Option<crate::lts::Value>, ParseDiagnostic> {
                match arg {
                    ValueArg::Literal(lit) => Ok(Some(domain.lookup(lit).expect("parse checked"))),
                    ValueArg::Var(_) => {
                        let lit = bound.expect("parse checked variable binding");
                        Ok(Some(domain.lookup(lit).expect("bound to domain")))
                    }
                    ValueArg::Begin | ValueArg::End => Ok(None),
                }
            };
            let label = match &t.action {
                ActionDecl::Out { channel, arg } => {
                    let value = resolve(arg).map_err(|e| vec![e])?;
                    label_for_out(doc.kind, channel, &erase, &doc.other_channels, arg, value)
                        .map_err(|m| vec![err(t.line, 1, m)])?
                }
                ActionDecl::In { channel, arg } => {
                    let value = resolve(arg).map_err(|e| vec![e])?;
                    label_for_in(doc.kind, channel, &erase, arg, value)
                        .map_err(|m| vec![err(t.line, 1, m)])?
                }
                ActionDecl::Read { index, arg } => {
                    if doc.kind != DocKind::User {
                        return Err(vec![err(
                            t.line,
                            1,
                            "read actions are only legal in user models",
                        )]);
                    }
                    let value = resolve(arg)
                        .map_err(|e| vec![e])?
                        .expect("reads carry values");
                    Label::MemRead(MemIndex(*index), value)
                }
            };
            let key = (StateId::new(t.from.clone()), label.clone());
            match by_source.get(&key) {
                Some(prev) if *prev != target => {
                    diagnostics.push(err(
                        t.line,
                        1,
                        format!(
                            "expansion produces two targets ({prev} and {target}) for the same \
                             source and label"
                        ),
                    ));
                }
                _ => {
                    by_source.insert(key, target.clone());
                }
            }
            transitions.insert(Transition::new(StateId::new(t.from.clone()), label, target));
        }
    }

    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }

    let lts = Lts::new(
        kind,
        domain,
        StateId::new(doc.initial.clone().expect("checked at parse")),
        states,
        transitions,
    );
    let validation = lts.validate();
    if !validation.is_pass() {
        return Err(validation
            .witnesses
            .iter()
            .map(|w| err(1, 1, w.description.clone()))
            .collect());
    }

    Ok(match doc.kind {
        DocKind::System => LoadedModel::System {
            name: doc.name.clone(),
            lts,
            erase_channel: ChannelId::new(erase),
            other_channels: doc.other_channels.iter().map(ChannelId::new).collect(),
        },
        DocKind::User => LoadedModel::User {
            name: doc.name.clone(),
            lts,
            erase_channel: ChannelId::new(erase),
        },
        DocKind::Memory => unreachable!(),
    })
}

fn label_for_out(
    kind: DocKind,
    channel: &str,
    erase: &str,
    others: &[String],
    arg: &ValueArg,
    value: Option<crate::lts::Value>,
) -> Result<Label, String> {
    if channel == erase {
        match (kind, arg) {
            (DocKind::System, ValueArg::Begin) => Ok(Label::BeginErase),
            (DocKind::System, ValueArg::End) => Ok(Label::EndErase),
            (DocKind::System, _) => Ok(Label::ToUser(value.expect("value arg"))),
            (DocKind::User, ValueArg::Begin | ValueArg::End) => {
                Err("users receive the erasure markers, they cannot send them".to_string())
            }
            (DocKind::User, _) => Ok(Label::ToSystem(value.expect("value arg"))),
            (DocKind::Memory, _) => unreachable!(),
        }
    } else if others.iter().any(|c| c == channel) {
        match kind {
            DocKind::System => match arg {
                ValueArg::Begin | ValueArg::End => {
                    Err("erasure markers travel on the erase channel only".to_string())
                }
                _ => Ok(Label::OtherOut(
                    ChannelId::new(channel),
                    value.expect("value arg"),
                )),
            },
            _ => Err("user models communicate only on the erase channel".to_string()),
        }
    } else {
        Err(format!("channel '{channel}' is not declared"))
    }
}

fn label_for_in(
    kind: DocKind,
    channel: &str,
    erase: &str,
    arg: &ValueArg,
    value: Option<crate::lts::Value>,
) -> Result<Label, String> {
    if channel != erase {
        return Err(format!(
            "inputs are only possible on the erase channel, not '{channel}'"
        ));
    }
    match (kind, arg) {
        (DocKind::System, ValueArg::Begin | ValueArg::End) => {
            Err("the system sends the erasure markers, it cannot receive them".to_string())
        }
        (DocKind::System, _) => Ok(Label::ToSystem(value.expect("value arg"))),
        (DocKind::User, ValueArg::Begin) => Ok(Label::BeginErase),
        (DocKind::User, ValueArg::End) => Ok(Label::EndErase),
        (DocKind::User, _) => Ok(Label::ToUser(value.expect("value arg"))),
        (DocKind::Memory, _) => unreachable!(),
    }
}

/// Render an expanded model as a flat document (templates unrolled). Parsing
/// and expanding the result reproduces the same model.
pub fn render_model(model: &LoadedModel) -> String {
    let mut out = String::new();
    match model {
        LoadedModel::Memory {
            name,
            domain,
            memory,
        } => {
            out.push_str(&format!("memory {name}\n"));
            out.push_str(&render_domain(domain));
            for (i, v) in memory.entries() {
                out.push_str(&format!("mem {i} = {}\n", domain.literal(v)));
            }
        }
        LoadedModel::System {
            name,
            lts,
            erase_channel,
            other_channels,
        } => {
            out.push_str(&format!("system {name}\n"));
            out.push_str(&render_domain(&lts.domain));
            out.push_str(&format!("channel {erase_channel} erase\n"));
            for ch in other_channels {
                out.push_str(&format!("channel {ch} other\n"));
            }
            out.push_str(&render_states_and_transitions(lts, erase_channel));
        }
        LoadedModel::User {
            name,
            lts,
            erase_channel,
        } => {
            out.push_str(&format!("user {name}\n"));
            out.push_str(&render_domain(&lts.domain));
            out.push_str(&format!("channel {erase_channel} erase\n"));
            out.push_str(&render_states_and_transitions(lts, erase_channel));
        }
    }
    out
}

fn render_domain(domain: &ValueDomain) -> String {
    let lits: Vec<&str> = domain.values().map(|v| domain.literal(v)).collect();
    format!("domain {{{}}}\n", lits.join(", "))
}

fn render_states_and_transitions(lts: &Lts, erase: &ChannelId) -> String {
    let mut out = String::new();
    for s in &lts.states {
        if *s == lts.initial {
            out.push_str(&format!("state {s} initial\n"));
        } else {
            out.push_str(&format!("state {s}\n"));
        }
    }
    for t in lts.transitions() {
        out.push_str(&format!(
            "trans {} -> {} : {}\n",
            t.from,
            t.to,
            render_action(&t.label, lts.kind, lts, erase)
        ));
    }
    out
}

fn render_action(label: &Label, kind: LtsKind, lts: &Lts, erase: &ChannelId) -> String {
    let d = &lts.domain;
    match (kind, label) {
        (LtsKind::System, Label::ToUser(v)) => format!("out {erase} {}", d.literal(*v)),
        (LtsKind::System, Label::ToSystem(v)) => format!("in {erase} {}", d.literal(*v)),
        (LtsKind::System, Label::BeginErase) => format!("out {erase} BE"),
        (LtsKind::System, Label::EndErase) => format!("out {erase} EE"),
        (LtsKind::User, Label::ToUser(v)) => format!("in {erase} {}", d.literal(*v)),
        (LtsKind::User, Label::ToSystem(v)) => format!("out {erase} {}", d.literal(*v)),
        (LtsKind::User, Label::BeginErase) => format!("in {erase} BE"),
        (LtsKind::User, Label::EndErase) => format!("in {erase} EE"),
        (_, Label::OtherOut(ch, v)) => format!("out {ch} {}", d.literal(*v)),
        (_, Label::MemRead(i, v)) => format!("read i={i} {}", d.literal(*v)),
        (k, l) => unreachable!("label {l:?} cannot be rendered for kind {k}"),
    }
}

/// Parse and expand in one step.
pub fn load_model(text: &str) -> Result<LoadedModel, Vec<ParseDiagnostic>> {
    let doc = parse_spec(text)?;
    expand(&doc)
}
