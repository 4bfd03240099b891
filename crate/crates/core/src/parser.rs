//! Reader and canonical writer for the `.its` transition-system format.
//!
//! ```text
//! vars x y z
//! rule init -> l1 :: x' <= 0 && z' >= 5000 && y' <= z'
//! rule l1 -> l1 :: y <= 2*z && x++ && ((x < z && y==) || (x >= z && y++)) && z==
//! ```
//!
//! `x==`, `x++` and `x--` abbreviate `x' = x`, `x' = x + 1` and `x' = x - 1`.
//! Lines starting with `#` are comments.

use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::formula::{CmpOp, Formula, Term, VarId};
use crate::fresh;
use crate::ts::{Location, Provenance, Transition, TransitionSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub offset: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    Lex(char),
    #[error("{0}")]
    Syntax(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("duplicate vars declaration")]
    DuplicateVars,
    #[error("variable {0} declared twice")]
    DuplicateVariable(String),
    #[error("missing vars declaration")]
    MissingVars,
    #[error("no rules")]
    NoRules,
    #[error("target is init")]
    TargetIsInit,
    #[error("source is err")]
    SourceIsErr,
    #[error("target is err (input systems must be safe)")]
    TargetIsErr,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Prime,
    LParen,
    RParen,
    Arrow,
    DColon,
    AndAnd,
    OrOr,
    Bang,
    Plus,
    Minus,
    Star,
    PlusPlus,
    MinusMinus,
    EqEq,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Int(k) => return write!(f, "integer {k}"),
            Tok::Prime => "'",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Arrow => "->",
            Tok::DColon => "::",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::PlusPlus => "++",
            Tok::MinusMinus => "--",
            Tok::EqEq => "==",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Eof => "end of input",
        };
        write!(f, "`{s}`")
    }
}

fn span_at(text: &str, offset: usize) -> SourceSpan {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
    SourceSpan {
        line,
        column: text[line_start..offset].chars().count() + 1,
        offset,
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |i: usize, c: char| ParseError {
        span: span_at(text, i),
        kind: ParseErrorKind::Lex(c),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let two = |s: &str| text[i..].starts_with(s);
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((Tok::Int(text[start..i].parse().unwrap()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || matches!(bytes[i], b'_' | b'$' | b'.'))
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ if two("->") => (Tok::Arrow, 2),
            _ if two("::") => (Tok::DColon, 2),
            _ if two("&&") => (Tok::AndAnd, 2),
            _ if two("||") => (Tok::OrOr, 2),
            _ if two("!=") => (Tok::Ne, 2),
            _ if two("++") => (Tok::PlusPlus, 2),
            _ if two("--") => (Tok::MinusMinus, 2),
            _ if two("==") => (Tok::EqEq, 2),
            _ if two("<=") => (Tok::Le, 2),
            _ if two(">=") => (Tok::Ge, 2),
            b'\'' => (Tok::Prime, 1),
            b'(' => (Tok::LParen, 1),
            b')' => (Tok::RParen, 1),
            b'!' => (Tok::Bang, 1),
            b'+' => (Tok::Plus, 1),
            b'-' => (Tok::Minus, 1),
            b'*' => (Tok::Star, 1),
            b'=' => (Tok::Eq, 1),
            b'<' => (Tok::Lt, 1),
            b'>' => (Tok::Gt, 1),
            _ => return Err(err(i, text[i..].chars().next().unwrap())),
        };
        out.push((tok.0, start));
        i += tok.1;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

/// How identifiers inside formulas are resolved.
struct Scope<'a> {
    names: &'a [String],
    /// Accept generated parameters such as `n$3` (proof documents).
    allow_params: bool,
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        Ok(Parser {
            text,
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            span: span_at(self.text, offset),
            kind,
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.error_at(self.offset(), ParseErrorKind::Syntax(msg.into()))
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected {t}, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.syntax(format!("expected identifier, found {other}"))),
        }
    }

    fn is_keyword(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "rule" || s == "vars")
    }

    fn formula(&mut self, scope: &Scope) -> Result<Formula, ParseError> {
        let mut parts = vec![self.conj(scope)?];
        while *self.peek() == Tok::OrOr {
            self.bump();
            parts.push(self.conj(scope)?);
        }
        Ok(Formula::or(parts))
    }

    fn conj(&mut self, scope: &Scope) -> Result<Formula, ParseError> {
        let mut parts = vec![self.atom(scope)?];
        while *self.peek() == Tok::AndAnd {
            self.bump();
            parts.push(self.atom(scope)?);
        }
        Ok(Formula::and(parts))
    }

    fn atom(&mut self, scope: &Scope) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(self.atom(scope)?.negate())
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::EqEq | Tok::PlusPlus | Tok::MinusMinus) => {
                let at = self.offset();
                self.bump();
                let i = self.program_var(&name, at, scope)?;
                let delta = match self.bump() {
                    Tok::EqEq => 0,
                    Tok::PlusPlus => 1,
                    _ => -1,
                };
                Ok(Formula::eq(Term::post(i), &Term::pre(i) + &Term::constant(delta)))
            }
            Tok::LParen => {
                let save = self.pos;
                match self.comparison(scope) {
                    Ok(f) => Ok(f),
                    Err(term_err) => {
                        self.pos = save;
                        self.bump();
                        match self.formula(scope) {
                            Ok(f) => {
                                self.expect(Tok::RParen)?;
                                Ok(f)
                            }
                            // Report whichever attempt got further.
                            Err(f_err) if f_err.span.offset >= term_err.span.offset => Err(f_err),
                            Err(_) => Err(term_err),
                        }
                    }
                }
            }
            _ => self.comparison(scope),
        }
    }

    fn comparison(&mut self, scope: &Scope) -> Result<Formula, ParseError> {
        let lhs = self.term(scope)?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            other => return Err(self.syntax(format!("expected relation, found {other}"))),
        };
        self.bump();
        let rhs = self.term(scope)?;
        Ok(Formula::cmp(lhs, op, rhs))
    }

    fn term(&mut self, scope: &Scope) -> Result<Term, ParseError> {
        let mut acc = self.product(scope)?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.product(scope)?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.product(scope)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self, scope: &Scope) -> Result<Term, ParseError> {
        let mut acc = self.unary(scope)?;
        while *self.peek() == Tok::Star {
            self.bump();
            acc = &acc * &self.unary(scope)?;
        }
        Ok(acc)
    }

    fn unary(&mut self, scope: &Scope) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                Ok(-&self.unary(scope)?)
            }
            Tok::Int(k) => {
                self.bump();
                Ok(Term::constant(k))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term(scope)?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.bump();
                let primed = *self.peek() == Tok::Prime;
                if primed {
                    self.bump();
                }
                if scope.allow_params && name.contains('$') && !primed {
                    fresh::observe(&name);
                    return Ok(Term::param(&name));
                }
                let i = self.program_var(&name, at, scope)?;
                Ok(if primed { Term::post(i) } else { Term::pre(i) })
            }
            other => Err(self.syntax(format!("expected term, found {other}"))),
        }
    }

    fn program_var(&self, name: &str, at: usize, scope: &Scope) -> Result<usize, ParseError> {
        scope
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| self.error_at(at, ParseErrorKind::UnknownVariable(name.to_string())))
    }
}

/// Parse a complete `.its` file into a validated transition system.
pub fn parse(text: &str) -> Result<TransitionSystem, ParseError> {
    let mut p = Parser::new(text)?;
    let mut names: Option<Vec<String>> = None;
    let mut transitions = Vec::new();
    loop {
        let at = p.offset();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "vars" => {
                if names.is_some() {
                    return Err(p.error_at(at, ParseErrorKind::DuplicateVars));
                }
                if !transitions.is_empty() {
                    return Err(p.syntax("vars must precede all rules"));
                }
                p.bump();
                let mut vs: Vec<String> = Vec::new();
                while matches!(p.peek(), Tok::Ident(_)) && !p.is_keyword() {
                    let vat = p.offset();
                    let v = p.ident()?;
                    if vs.contains(&v) {
                        return Err(p.error_at(vat, ParseErrorKind::DuplicateVariable(v)));
                    }
                    vs.push(v);
                }
                names = Some(vs);
            }
            Tok::Ident(kw) if kw == "rule" => {
                p.bump();
                let Some(vs) = names.as_ref() else {
                    return Err(p.error_at(at, ParseErrorKind::MissingVars));
                };
                let src_at = p.offset();
                let src = p.ident()?;
                p.expect(Tok::Arrow)?;
                let dst_at = p.offset();
                let dst = p.ident()?;
                p.expect(Tok::DColon)?;
                let scope = Scope {
                    names: vs,
                    allow_params: false,
                };
                let cond = p.formula(&scope)?;
                if !matches!(p.peek(), Tok::Eof) && !p.is_keyword() {
                    return Err(p.syntax(format!("unexpected {} after condition", p.peek())));
                }
                let (src, dst) = (Location::new(&src), Location::new(&dst));
                if src.is_err() {
                    return Err(p.error_at(src_at, ParseErrorKind::SourceIsErr));
                }
                if dst.is_init() {
                    return Err(p.error_at(dst_at, ParseErrorKind::TargetIsInit));
                }
                if dst.is_err() {
                    return Err(p.error_at(dst_at, ParseErrorKind::TargetIsErr));
                }
                let idx = transitions.len();
                transitions.push(
                    Transition::new(src, dst, cond, Provenance::Original(idx))
                        .expect("reserved locations checked above"),
                );
            }
            other => return Err(p.syntax(format!("expected `vars` or `rule`, found {other}"))),
        }
    }
    let Some(names) = names else {
        return Err(p.error_at(0, ParseErrorKind::MissingVars));
    };
    if transitions.is_empty() {
        return Err(p.error_at(text.len(), ParseErrorKind::NoRules));
    }
    Ok(TransitionSystem::new(names, transitions).expect("validated while parsing"))
}

/// Parse a standalone formula over the given program variables. Generated
/// parameters (`n$3`, `v$17`) are accepted when `allow_params` is set.
pub fn parse_formula(text: &str, names: &[String], allow_params: bool) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula(&Scope { names, allow_params })?;
    if *p.peek() != Tok::Eof {
        return Err(p.syntax(format!("unexpected {} after formula", p.peek())));
    }
    Ok(f)
}

/// Parse a standalone term (used for update maps in proof documents).
pub fn parse_term(text: &str, names: &[String], allow_params: bool) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.term(&Scope { names, allow_params })?;
    if *p.peek() != Tok::Eof {
        return Err(p.syntax(format!("unexpected {} after term", p.peek())));
    }
    Ok(t)
}

/// Canonical writer; `parse(&print(&parse(s)?))` reproduces the system.
pub fn print(ts: &TransitionSystem) -> String {
    let mut out = format!("vars {}\n", ts.names().join(" "));
    for t in ts.transitions() {
        out.push_str(&format!("rule {}\n", t.display(ts.names())));
    }
    out
}

/// Variable lookup used by callers that build formulas by hand.
pub fn var_index(names: &[String], name: &str) -> Option<VarId> {
    let (base, primed) = match name.strip_suffix('\'') {
        Some(b) => (b, true),
        None => (name, false),
    };
    let i = names.iter().position(|n| n == base)?;
    Some(if primed { VarId::Post(i) } else { VarId::Pre(i) })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const LEADING: &str = "\
vars x y z
rule init -> l1 :: x' <= 0 && z' >= 5000 && y' <= z'
rule l1 -> l1 :: y <= 2*z && x++ && ((x < z && y==) || (x >= z && y++)) && z==
rule l1 -> l2 :: x = y && x > 2*z && x== && y==
rule l2 -> l2 :: x = y && x > 0 && x== && y--
rule l2 -> l2 :: x > 0 && y > 0 && x' = y && ((x > y && y' = x) || (x < y && y==))
";

    #[test]
    fn parses_leading_example() {
        let ts = parse(LEADING).unwrap();
        assert_eq!(ts.dim(), 3);
        assert_eq!(ts.transitions().len(), 5);
        let locs: Vec<_> = ts.locations().into_iter().map(|l| l.name().to_string()).collect();
        assert_eq!(locs, ["init", "l1", "l2"]);
        assert!(ts.transitions()[0].is_initial());
        assert!(!ts.transitions()[1].is_conjunctive());
        assert!(ts.transitions()[3].is_conjunctive());
    }

    #[test]
    fn rejects_target_init() {
        let e = parse("vars x\nrule l1 -> init :: x > 0").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::TargetIsInit);
        assert_eq!(e.to_string(), "2:12: target is init");
    }

    #[test]
    fn rejects_err_locations_and_bad_vars() {
        assert_eq!(
            parse("vars x\nrule err -> l :: x > 0").unwrap_err().kind,
            ParseErrorKind::SourceIsErr
        );
        assert_eq!(
            parse("vars x\nrule l -> err :: x > 0").unwrap_err().kind,
            ParseErrorKind::TargetIsErr
        );
        assert_eq!(
            parse("vars x\nrule l -> l :: y > 0").unwrap_err().kind,
            ParseErrorKind::UnknownVariable("y".into())
        );
        assert_eq!(
            parse("vars x\nvars y\nrule l -> l :: x > 0").unwrap_err().kind,
            ParseErrorKind::DuplicateVars
        );
        assert_eq!(
            parse("rule l -> l :: x > 0").unwrap_err().kind,
            ParseErrorKind::MissingVars
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse("vars x\nrule l -> l :: x > ").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!(e.span.line, 2);
        let e = parse("vars x\nrule l -> l :: x ? 1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Lex('?'));
        assert_eq!((e.span.line, e.span.column), (2, 18));
    }

    #[test]
    fn disjunction_shape() {
        let ts = parse("vars x y\nrule init -> l :: x' <= 0 && (x < y || x >= y)").unwrap();
        let cond = &ts.transitions()[0].cond;
        let Formula::And(parts) = cond else {
            panic!("expected conjunction, got {cond:?}")
        };
        assert_eq!(parts.len(), 2);
        assert!(matches!(parts[1], Formula::Or(ref ds) if ds.len() == 2));
    }

    #[test]
    fn parenthesized_terms_and_negation() {
        let ts = parse("vars x y\nrule l -> l :: (x + 1) * 2 < y && !(x = y || x > 3)").unwrap();
        assert!(ts.transitions()[0].is_conjunctive());
    }

    #[test]
    fn print_parse_round_trip() {
        let ts = parse(LEADING).unwrap();
        let printed = print(&ts);
        let again = parse(&printed).unwrap();
        assert_eq!(ts.transitions(), again.transitions());
        assert_eq!(print(&again), printed);
    }

    #[test]
    fn params_only_in_proof_mode() {
        let names = vec!["x".to_string()];
        assert!(parse_formula("x' = x + n$4 && n$4 > 0", &names, true).is_ok());
        assert!(parse_formula("x' = x + n$4", &names, false).is_err());
    }
}
