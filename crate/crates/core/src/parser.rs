//! Text syntax for programs, databases and queries.
//!
//! ```text
//! program   := { [label ":"] conj ":-" conj "." }
//! facts     := { atom "." }
//! query     := [ "?" ":-" ] conj [ "." ]
//! conj      := atom { "," atom }
//! atom      := pred [ "(" [ term { "," term } ] ")" ]
//! term      := Variable | constant | "quoted" | 123
//! ```
//!
//! Lowercase identifiers are predicates and constants, identifiers starting
//! with an uppercase letter or `_` are variables. `%` starts a comment that
//! runs to the end of the line.

use std::fmt;
use std::path::Path;

use crate::error::{IngestError, ModelError, ParseError};
use crate::instance::Instance;
use crate::model::{Atom, Fact, Program, Signature, Symbol, Term, Tgd};
use crate::query::Bcq;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SourceDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Num(String),
    Null(String),
    LParen,
    RParen,
    Comma,
    Dot,
    ColonDash,
    Colon,
    Question,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(s) => format!("variable `{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(s) => format!("number `{s}`"),
            Tok::Null(s) => format!("null `{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::ColonDash => "`:-`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Question => "`?`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn error_at(line: usize, column: usize, message: impl Into<String>) -> SourceDiagnostic {
    SourceDiagnostic {
        severity: Severity::Error,
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, SourceDiagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut push = |tok: Tok| {
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            ',' => push(Tok::Comma),
            '.' => push(Tok::Dot),
            '?' => push(Tok::Question),
            ':' if chars.get(i + 1) == Some(&'-') => {
                push(Tok::ColonDash);
                i += 2;
                col += 2;
                continue;
            }
            ':' => push(Tok::Colon),
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut ncol = col + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => {
                            return Err(error_at(start_line, start_col, "unterminated string literal"))
                        }
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(j + 1) {
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                _ => return Err(error_at(line, ncol, "invalid escape sequence")),
                            }
                            j += 2;
                            ncol += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                            ncol += 1;
                        }
                    }
                }
                push(Tok::Str(s));
                col = ncol + 1;
                i = j + 1;
                continue;
            }
            '_' if chars.get(i + 1) == Some(&':') => {
                let mut j = i + 2;
                while j < chars.len() && chars[j].is_ascii_alphanumeric() {
                    j += 1;
                }
                push(Tok::Null(chars[i..j].iter().collect()));
                col += j - i;
                i = j;
                continue;
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                let tok = if c.is_ascii_digit() {
                    if !word.chars().all(|d| d.is_ascii_digit()) {
                        return Err(error_at(start_line, start_col, format!("malformed number `{word}`")));
                    }
                    Tok::Num(word)
                } else if c.is_uppercase() || c == '_' {
                    Tok::Var(word)
                } else {
                    Tok::Ident(word)
                };
                push(tok);
                col += j - i;
                i = j;
                continue;
            }
            other => return Err(error_at(line, col, format!("unexpected character `{other}`"))),
        }
        i += 1;
        col += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Context {
    Rule,
    Data,
    Query,
}

struct Parser<'s> {
    toks: Vec<Token>,
    pos: usize,
    sig: &'s mut Signature,
    anon: usize,
}

type PResult<T> = Result<T, SourceDiagnostic>;

impl<'s> Parser<'s> {
    fn new(text: &str, sig: &'s mut Signature) -> PResult<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            sig,
            anon: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn unexpected(&self, expected: &str) -> SourceDiagnostic {
        let t = self.peek();
        error_at(
            t.line,
            t.column,
            format!("expected {expected}, found {}", t.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> PResult<Token> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(expected))
        }
    }

    /// Skips to just past the next `.` so parsing can resume after an error.
    fn recover(&mut self) {
        while !self.at_eof() {
            if self.bump().tok == Tok::Dot {
                return;
            }
        }
    }

    fn term(&mut self, ctx: Context) -> PResult<Term> {
        if matches!(
            self.peek().tok,
            Tok::LParen | Tok::RParen | Tok::Comma | Tok::Dot | Tok::ColonDash | Tok::Colon | Tok::Question | Tok::Eof
        ) {
            return Err(self.unexpected("a term"));
        }
        let t = self.bump();
        match t.tok {
            Tok::Ident(s) | Tok::Num(s) | Tok::Str(s) => Ok(Term::Constant(Symbol::from(s))),
            Tok::Var(v) => {
                if ctx == Context::Data {
                    return Err(error_at(t.line, t.column, "variables not allowed in data"));
                }
                if v == "_" {
                    self.anon += 1;
                    Ok(Term::Variable(Symbol::from(format!("_G{}", self.anon))))
                } else {
                    Ok(Term::Variable(Symbol::from(v)))
                }
            }
            Tok::Null(s) => {
                let msg = match ctx {
                    Context::Rule => format!("null literal `{s}` not allowed in a rule"),
                    Context::Data => format!("null literal `{s}` not allowed in data"),
                    Context::Query => format!("null literal `{s}` not allowed in a query"),
                };
                Err(error_at(t.line, t.column, msg))
            }
            _ => unreachable!("punctuation handled above"),
        }
    }

    fn atom(&mut self, ctx: Context) -> PResult<Atom> {
        let head = self.peek().clone();
        let name = match &head.tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.unexpected("a predicate name")),
        };
        self.bump();
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.bump();
            if self.peek().tok != Tok::RParen {
                loop {
                    args.push(self.term(ctx)?);
                    match self.peek().tok {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RParen => break,
                        _ => return Err(self.unexpected("`,` or `)`")),
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        let atom = Atom::new(name, args);
        self.sig
            .declare(&atom)
            .map_err(|e| error_at(head.line, head.column, e.to_string()))?;
        Ok(atom)
    }

    fn conj(&mut self, ctx: Context) -> PResult<Vec<Atom>> {
        let mut atoms = vec![self.atom(ctx)?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            atoms.push(self.atom(ctx)?);
        }
        Ok(atoms)
    }

    fn rule(&mut self, ordinal: usize) -> PResult<(Tgd, Token)> {
        let start = self.peek().clone();
        let id = match (&start.tok, self.peek_at(1)) {
            (Tok::Ident(label), Tok::Colon) => {
                let label = label.clone();
                self.bump();
                self.bump();
                label
            }
            _ => format!("r{ordinal}"),
        };
        let head = self.conj(Context::Rule)?;
        if self.peek().tok == Tok::Dot {
            let t = self.peek();
            return Err(error_at(
                start.line,
                start.column,
                format!(
                    "facts are not allowed in a program file (statement ends at {}:{})",
                    t.line, t.column
                ),
            ));
        }
        self.expect(Tok::ColonDash, "`:-`")?;
        if self.peek().tok == Tok::Dot {
            let t = self.peek();
            return Err(error_at(t.line, t.column, format!("rule `{id}` has an empty body")));
        }
        let body = self.conj(Context::Rule)?;
        self.expect(Tok::Dot, "`.`")?;
        let tgd = Tgd::new(id, body, head).map_err(|e| error_at(start.line, start.column, e.to_string()))?;
        Ok((tgd, start))
    }
}

fn finish<T>(value: T, diagnostics: Vec<SourceDiagnostic>) -> Result<T, ParseError> {
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        Err(ParseError { diagnostics })
    } else {
        Ok(value)
    }
}

/// Parses a rule file. Every syntax error is reported; parsing resumes at the
/// next statement after each one.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut sig = Signature::new();
    let mut p = Parser::new(text, &mut sig).map_err(|d| ParseError { diagnostics: vec![d] })?;
    let mut rules: Vec<Tgd> = Vec::new();
    let mut diags = Vec::new();
    let mut ordinal = 0;
    while !p.at_eof() {
        ordinal += 1;
        match p.rule(ordinal) {
            Ok((tgd, start)) => {
                if rules.iter().any(|r| r.id == tgd.id) {
                    diags.push(error_at(
                        start.line,
                        start.column,
                        format!("duplicate rule id `{}`", tgd.id),
                    ));
                } else {
                    rules.push(tgd);
                }
            }
            Err(d) => {
                diags.push(d);
                p.recover();
            }
        }
    }
    let program = Program::new(rules).map_err(|e| ParseError {
        diagnostics: vec![error_at(1, 1, e.to_string())],
    });
    match program {
        Ok(program) => finish(program, diags),
        Err(mut err) => {
            diags.append(&mut err.diagnostics);
            Err(ParseError { diagnostics: diags })
        }
    }
}

/// Parses a database file with a fresh arity table.
pub fn parse_facts(text: &str) -> Result<Instance, ParseError> {
    parse_facts_with(text, &mut Signature::new())
}

/// Parses a database file, checking arities against (and extending) `sig`.
pub fn parse_facts_with(text: &str, sig: &mut Signature) -> Result<Instance, ParseError> {
    let mut p = Parser::new(text, sig).map_err(|d| ParseError { diagnostics: vec![d] })?;
    let mut instance = Instance::new();
    let mut diags = Vec::new();
    while !p.at_eof() {
        let parsed = p.atom(Context::Data).and_then(|a| {
            p.expect(Tok::Dot, "`.`")?;
            Ok(a)
        });
        match parsed {
            Ok(atom) => {
                instance.insert(Fact::new(atom));
            }
            Err(d) => {
                diags.push(d);
                p.recover();
            }
        }
    }
    finish(instance, diags)
}

/// Parses `? :- a1, ..., an.`; the `? :-` prefix and the final period are optional.
pub fn parse_query(text: &str) -> Result<Bcq, ParseError> {
    parse_query_with(text, &mut Signature::new())
}

pub fn parse_query_with(text: &str, sig: &mut Signature) -> Result<Bcq, ParseError> {
    let wrap = |d| ParseError { diagnostics: vec![d] };
    let mut p = Parser::new(text, sig).map_err(wrap)?;
    if p.peek().tok == Tok::Question {
        p.bump();
        p.expect(Tok::ColonDash, "`:-`").map_err(wrap)?;
    }
    if matches!(p.peek().tok, Tok::Dot | Tok::Eof) {
        let t = p.peek();
        return Err(wrap(error_at(t.line, t.column, "empty query")));
    }
    let atoms = p.conj(Context::Query).map_err(wrap)?;
    if p.peek().tok == Tok::Dot {
        p.bump();
    }
    if !p.at_eof() {
        return Err(wrap(p.unexpected("end of query")));
    }
    Ok(Bcq::new(atoms).expect("conjunction is nonempty"))
}

/// Reads `path` as a headerless CSV table of constants for `predicate`.
pub fn ingest_csv(predicate: &str, path: &Path, sig: &mut Signature) -> Result<Vec<Atom>, IngestError> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IngestError::Csv {
            path: shown.clone(),
            source,
        })?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IngestError::Csv {
            path: shown.clone(),
            source,
        })?;
        if record.iter().all(str::is_empty) {
            return Err(IngestError::EmptyRow {
                path: shown.clone(),
                row: row + 1,
            });
        }
        let atom = Atom::new(predicate, record.iter().map(Term::constant).collect());
        sig.declare(&atom).map_err(|source: ModelError| IngestError::Row {
            path: shown.clone(),
            row: row + 1,
            source,
        })?;
        out.push(atom);
    }
    Ok(out)
}
