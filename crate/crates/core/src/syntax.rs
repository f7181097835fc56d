//! Textual constraint language.
//!
//! ```text
//! program    := decl* stmt*
//! decl       := ("feature" | "prec") ident ("," ident)* ";"
//! stmt       := constraint "."
//! constraint := var "=" var
//!             | var "=" ident ":" var
//!             | var "=" "E" ident ":" var
//!             | var "=" "E" ident ("+" | "*") ":" var
//!             | var "=" ident ":>=" ident "(" var ")"
//!             | var "=" "[" ident ident "1" "]" var
//!             | ident "(" var ")" ":" ident ("+" | "*") ":" ident "(" var ")"
//!             | var "=" ident "^-1" ":" var
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{ClosureKind, Constraint, ConstraintStore, ModelError, Signature, Sort, Sym, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Eq,
    Colon,
    Supset,
    Plus,
    Star,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Caret,
    Minus,
    Dot,
    Comma,
    Semi,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Supset => f.write_str("`:>=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn lex(text: &str) -> Result<(Vec<(Tok, Pos)>, Pos), ParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars);
            }
            continue;
        }
        // `$` is admitted inside identifiers only so that reserved names get
        // a precise error instead of a lexical one.
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                    s.push(c);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            toks.push((Tok::Ident(s), pos));
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            toks.push((Tok::Number(s), pos));
            continue;
        }
        bump(&mut chars);
        let tok = match c {
            '=' => Tok::Eq,
            ':' => {
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    if chars.peek() != Some(&'=') {
                        return Err(syntax(pos, "expected `:>=`"));
                    }
                    bump(&mut chars);
                    Tok::Supset
                } else {
                    Tok::Colon
                }
            }
            '+' => Tok::Plus,
            '*' => Tok::Star,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '^' => Tok::Caret,
            '-' => Tok::Minus,
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        };
        toks.push((tok, pos));
    }
    Ok((toks, Pos { line, column }))
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
    store: ConstraintStore,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.at + n).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(t) => syntax(self.pos(), format!("expected {wanted}, found {t}")),
            None => syntax(self.pos(), format!("expected {wanted}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let (name, pos) = self.ident()?;
        if name.contains('$') {
            return Err(syntax(pos, format!("`{name}` is not a valid variable name")));
        }
        Ok(Var::new(&name))
    }

    /// A declared symbol, optionally of a required sort.
    fn symbol(&mut self, sort: Option<Sort>) -> Result<(Sym, Sort), ParseError> {
        let (name, pos) = self.ident()?;
        let sym = Sym::new(&name);
        let sig = self.store.signature();
        let found = sig.expect_declared(&sym).map_err(|e| model(pos, e))?;
        if let Some(sort) = sort {
            sig.expect(&sym, sort).map_err(|e| model(pos, e))?;
        }
        Ok((sym, found))
    }

    fn closure_kind(&mut self) -> Result<ClosureKind, ParseError> {
        match self.peek() {
            Some(Tok::Plus) => {
                self.at += 1;
                Ok(ClosureKind::Plus)
            }
            Some(Tok::Star) => {
                self.at += 1;
                Ok(ClosureKind::Star)
            }
            _ => Err(self.unexpected("`+` or `*`")),
        }
    }

    fn declaration(&mut self, sort: Sort) -> Result<(), ParseError> {
        self.at += 1;
        loop {
            let (name, pos) = self.ident()?;
            self.store
                .signature_mut()
                .declare_symbol(&name, sort)
                .map_err(|e| model(pos, e))?;
            match self.peek() {
                Some(Tok::Comma) => self.at += 1,
                Some(Tok::Semi) => {
                    self.at += 1;
                    return Ok(());
                }
                _ => return Err(self.unexpected("`,` or `;`")),
            }
        }
    }

    fn constraint(&mut self) -> Result<Constraint, ParseError> {
        if self.peek_at(1) == Some(&Tok::LParen) {
            // f(x) : p+ : g(y)
            let (f, _) = self.symbol(Some(Sort::Feature))?;
            self.expect(Tok::LParen)?;
            let x = self.var()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Colon)?;
            let (p, _) = self.symbol(Some(Sort::Precedence))?;
            let k = self.closure_kind()?;
            self.expect(Tok::Colon)?;
            let (g, _) = self.symbol(Some(Sort::Feature))?;
            self.expect(Tok::LParen)?;
            let y = self.var()?;
            self.expect(Tok::RParen)?;
            return Ok(Constraint::DomPrec(f, x, p, k, g, y));
        }
        let x = self.var()?;
        self.expect(Tok::Eq)?;
        match (self.peek(), self.peek_at(1)) {
            (Some(Tok::LBracket), _) => {
                self.at += 1;
                let (f, _) = self.symbol(Some(Sort::Feature))?;
                let (p, _) = self.symbol(Some(Sort::Precedence))?;
                match self.peek() {
                    Some(Tok::Number(n)) if n == "1" => self.at += 1,
                    _ => return Err(self.unexpected("`1`")),
                }
                self.expect(Tok::RBracket)?;
                let y = self.var()?;
                Ok(Constraint::FirstDaughter(x, f, p, y))
            }
            (Some(Tok::Ident(_)), Some(Tok::Dot)) => Ok(Constraint::Eq(x, self.var()?)),
            (Some(Tok::Ident(e)), Some(Tok::Ident(_))) if e == "E" => {
                self.at += 1;
                let (r, sort) = self.symbol(None)?;
                let kind = match self.peek() {
                    Some(Tok::Plus | Tok::Star) => {
                        let pos = self.pos();
                        let k = self.closure_kind()?;
                        if sort != Sort::Precedence {
                            return Err(model(
                                pos,
                                ModelError::SortMismatch {
                                    symbol: r.to_string(),
                                    expected: Sort::Precedence,
                                    found: sort,
                                },
                            ));
                        }
                        Some(k)
                    }
                    _ => None,
                };
                self.expect(Tok::Colon)?;
                let y = self.var()?;
                Ok(match kind {
                    Some(k) => Constraint::Closure(x, r, k, y),
                    None => Constraint::Member(x, r, y),
                })
            }
            (Some(Tok::Ident(_)), Some(Tok::Supset)) => {
                let (f, _) = self.symbol(Some(Sort::Feature))?;
                self.at += 1;
                let (g, _) = self.symbol(Some(Sort::Feature))?;
                self.expect(Tok::LParen)?;
                let y = self.var()?;
                self.expect(Tok::RParen)?;
                Ok(Constraint::Subset(x, f, g, y))
            }
            (Some(Tok::Ident(_)), Some(Tok::Caret)) => {
                let (p, _) = self.symbol(Some(Sort::Precedence))?;
                self.at += 1;
                self.expect(Tok::Minus)?;
                match self.peek() {
                    Some(Tok::Number(n)) if n == "1" => self.at += 1,
                    _ => return Err(self.unexpected("`1`")),
                }
                self.expect(Tok::Colon)?;
                let y = self.var()?;
                Ok(Constraint::InvImmPrec(x, p, y))
            }
            (Some(Tok::Ident(_)), Some(Tok::Colon)) => {
                let (r, sort) = self.symbol(None)?;
                self.at += 1;
                let y = self.var()?;
                Ok(match sort {
                    Sort::Feature => Constraint::Feature(x, r, y),
                    Sort::Precedence => Constraint::ImmPrec(x, r, y),
                })
            }
            (Some(Tok::Ident(_)), _) => {
                self.at += 1;
                Err(self.unexpected("`.`, `:`, `:>=` or `^-1`"))
            }
            _ => Err(self.unexpected("a constraint")),
        }
    }
}

fn model(pos: Pos, e: ModelError) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind: ParseErrorKind::Model(e),
    }
}

/// Parses a program into its signature (held by the store) and store.
pub fn parse_program(text: &str) -> Result<ConstraintStore, ParseError> {
    let (toks, end) = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end,
        store: ConstraintStore::new(Signature::default()),
    };
    let mut seen_statement = false;
    while let Some(tok) = p.peek() {
        let keyword = match tok {
            Tok::Ident(k) if k == "feature" => Some(Sort::Feature),
            Tok::Ident(k) if k == "prec" => Some(Sort::Precedence),
            _ => None,
        };
        // `feature` and `prec` are keywords only where a declaration may start
        // and only when followed by a symbol name.
        let is_decl = keyword.is_some() && matches!(p.peek_at(1), Some(Tok::Ident(_)));
        if let (true, Some(sort)) = (is_decl, keyword) {
            if seen_statement {
                return Err(syntax(p.pos(), "declarations must precede constraints"));
            }
            p.declaration(sort)?;
            continue;
        }
        seen_statement = true;
        let pos = p.pos();
        let c = p.constraint()?;
        p.expect(Tok::Dot)?;
        p.store.add_constraint(c).map_err(|e| model(pos, e))?;
    }
    Ok(p.store)
}

/// Canonical text of one constraint, without the terminating `.`.
pub fn format_constraint(c: &Constraint) -> String {
    use Constraint::*;
    match c {
        Eq(x, y) => format!("{x} = {y}"),
        Feature(x, f, y) | ImmPrec(x, f, y) => format!("{x} = {f} : {y}"),
        Member(x, f, y) => format!("{x} = E {f} : {y}"),
        Closure(x, p, k, y) => format!("{x} = E {p}{} : {y}", k.suffix()),
        Subset(x, f, g, y) => format!("{x} = {f} :>= {g}({y})"),
        FirstDaughter(x, f, p, y) => format!("{x} = [{f} {p} 1] {y}"),
        DomPrec(f, x, p, k, g, y) => format!("{f}({x}) : {p}{} : {g}({y})", k.suffix()),
        InvImmPrec(x, p, y) => format!("{x} = {p}^-1 : {y}"),
    }
}

/// Declarations followed by one constraint per line, lines sorted by text.
/// Bindings print as `bound = representative .`.
pub fn print_store(store: &ConstraintStore) -> String {
    let mut out = String::new();
    let sig = store.signature();
    let features: Vec<&str> = sig.features().map(Sym::as_str).collect();
    let precs: Vec<&str> = sig.precedences().map(Sym::as_str).collect();
    if !features.is_empty() {
        let _ = writeln!(out, "feature {};", features.join(", "));
    }
    if !precs.is_empty() {
        let _ = writeln!(out, "prec {};", precs.join(", "));
    }
    let mut lines: Vec<String> = store
        .constraints()
        .map(|c| format!("{} .", format_constraint(c)))
        .chain(store.bindings().iter().map(|(x, rep)| format!("{x} = {rep} .")))
        .collect();
    lines.sort();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}
