use std::fmt;

use thiserror::Error;

use super::{BoxLit, PredExpr, PredicateProgram};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax {
        expected: Vec<String>,
        found: String,
    },
    Arity {
        atom: String,
        expected: usize,
        found: usize,
    },
    UnknownAtom(String),
    InvalidValue(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax { expected, found } => {
                write!(f, "expected {}, found {found}", expected.join(" or "))
            }
            ParseErrorKind::Arity {
                atom,
                expected,
                found,
            } => {
                write!(f, "`{atom}` takes {expected} argument(s), got {found}")
            }
            ParseErrorKind::UnknownAtom(name) => write!(f, "unknown atom `{name}`"),
            ParseErrorKind::InvalidValue(msg) => f.write_str(msg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Num(f64),
    Ident(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Open => f.write_str("`(`"),
            Tok::Close => f.write_str("`)`"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_number(word: &str) -> bool {
    let b = word.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

fn is_ident(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '/'))
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' | ')' => {
                chars.next();
                col += 1;
                let tok = if c == '(' { Tok::Open } else { Tok::Close };
                out.push(Token {
                    tok,
                    line: l,
                    col: cl,
                });
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';') {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    col += 1;
                }
                let tok = if is_number(&word) {
                    let v: f64 = word.parse().map_err(|_| ParseError {
                        line: l,
                        col: cl,
                        kind: ParseErrorKind::InvalidValue(format!("bad number `{word}`")),
                    })?;
                    if !v.is_finite() {
                        return Err(ParseError {
                            line: l,
                            col: cl,
                            kind: ParseErrorKind::InvalidValue(format!(
                                "number out of range `{word}`"
                            )),
                        });
                    }
                    Tok::Num(v)
                } else if is_ident(&word) {
                    Tok::Ident(word)
                } else {
                    return Err(ParseError {
                        line: l,
                        col: cl,
                        kind: ParseErrorKind::Syntax {
                            expected: vec!["identifier".into(), "number".into()],
                            found: format!("`{word}`"),
                        },
                    });
                };
                out.push(Token {
                    tok,
                    line: l,
                    col: cl,
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ArgKind {
    Id,
    Num,
    Point,
    Box,
}

impl ArgKind {
    fn name(self) -> &'static str {
        match self {
            ArgKind::Id => "identifier",
            ArgKind::Num => "number",
            ArgKind::Point => "point",
            ArgKind::Box => "box literal",
        }
    }
}

#[derive(Debug, Clone)]
enum Arg {
    Id(String),
    Num(f64),
    Point([f64; 3]),
    Box(BoxLit),
}

impl Arg {
    fn kind(&self) -> ArgKind {
        match self {
            Arg::Id(_) => ArgKind::Id,
            Arg::Num(_) => ArgKind::Num,
            Arg::Point(_) => ArgKind::Point,
            Arg::Box(_) => ArgKind::Box,
        }
    }
}

fn signature(name: &str) -> Option<&'static [ArgKind]> {
    use ArgKind::*;
    Some(match name {
        "within_m" => &[Id, Point, Num],
        "iou_gt" => &[Id, Box, Num],
        "on" | "inside" => &[Id, Id],
        "open_between" => &[Id, Num, Num],
        "in_region" => &[Id, Box],
        "unmoved" => &[Id],
        "rel_within_m" => &[Id, Id, Num],
        _ => return None,
    })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(t: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: t.line,
            col: t.col,
            kind,
        }
    }

    fn unexpected(t: &Token, expected: &[&str]) -> ParseError {
        Self::err_at(
            t,
            ParseErrorKind::Syntax {
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: t.tok.to_string(),
            },
        )
    }

    fn expect_open(&mut self) -> Result<Token, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Open => Ok(t),
            _ => Err(Self::unexpected(&t, &["`(`"])),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Close => Ok(()),
            _ => Err(Self::unexpected(&t, &["`)`"])),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            _ => Err(Self::unexpected(&t, &[&format!("`{kw}`")])),
        }
    }

    fn program(&mut self) -> Result<PredicateProgram, ParseError> {
        self.expect_open()?;
        self.expect_keyword("score")?;
        let mut scored = vec![self.expr()?];
        while self.peek().tok == Tok::Open {
            scored.push(self.expr()?);
        }
        self.expect_close()?;

        let harm = if self.peek().tok == Tok::Open {
            self.expect_open()?;
            self.expect_keyword("harm")?;
            let e = self.expr()?;
            self.expect_close()?;
            Some(e)
        } else {
            None
        };
        let t = self.next();
        if t.tok != Tok::Eof {
            let expected: &[&str] = if harm.is_none() {
                &["`(harm`", "end of input"]
            } else {
                &["end of input"]
            };
            return Err(Self::unexpected(&t, expected));
        }
        Ok(PredicateProgram { scored, harm })
    }

    fn expr(&mut self) -> Result<PredExpr, ParseError> {
        self.expect_open()?;
        let head = self.next();
        let name = match &head.tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(Self::unexpected(&head, &["atom or combinator name"])),
        };
        match name.as_str() {
            "all" | "any" | "not" => {
                let mut args = Vec::new();
                while self.peek().tok == Tok::Open {
                    args.push(self.expr()?);
                }
                if args.is_empty() {
                    return Err(Self::unexpected(self.peek(), &["expression"]));
                }
                self.expect_close()?;
                Ok(match name.as_str() {
                    "all" => PredExpr::All(args),
                    "any" => PredExpr::Any(args),
                    _ => {
                        if args.len() != 1 {
                            return Err(Self::err_at(
                                &head,
                                ParseErrorKind::Arity {
                                    atom: name,
                                    expected: 1,
                                    found: args.len(),
                                },
                            ));
                        }
                        PredExpr::Not(Box::new(args.pop().unwrap()))
                    }
                })
            }
            _ => {
                let sig = signature(&name).ok_or_else(|| {
                    Self::err_at(&head, ParseErrorKind::UnknownAtom(name.clone()))
                })?;
                let mut args = Vec::new();
                loop {
                    let t = self.peek().clone();
                    match t.tok {
                        Tok::Close => {
                            self.next();
                            break;
                        }
                        Tok::Eof => return Err(Self::unexpected(&t, &["argument", "`)`"])),
                        _ => args.push((self.arg()?, t)),
                    }
                }
                if args.len() != sig.len() {
                    return Err(Self::err_at(
                        &head,
                        ParseErrorKind::Arity {
                            atom: name,
                            expected: sig.len(),
                            found: args.len(),
                        },
                    ));
                }
                for ((arg, at), want) in args.iter().zip(sig) {
                    if arg.kind() != *want {
                        return Err(Self::err_at(
                            at,
                            ParseErrorKind::Syntax {
                                expected: vec![want.name().into()],
                                found: arg.kind().name().into(),
                            },
                        ));
                    }
                }
                let vals: Vec<Arg> = args.into_iter().map(|(a, _)| a).collect();
                build_atom(&name, vals)
                    .map_err(|msg| Self::err_at(&head, ParseErrorKind::InvalidValue(msg)))
            }
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(v),
            _ => Err(Self::unexpected(&t, &["number"])),
        }
    }

    fn point(&mut self) -> Result<[f64; 3], ParseError> {
        self.expect_open()?;
        let p = [self.number()?, self.number()?, self.number()?];
        self.expect_close()?;
        Ok(p)
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.next();
                Ok(Arg::Id(s))
            }
            Tok::Num(v) => {
                self.next();
                Ok(Arg::Num(v))
            }
            Tok::Open => {
                if matches!(self.peek2(), Tok::Ident(s) if s == "box") {
                    self.next();
                    self.next();
                    let center = self.point()?;
                    let half_extents = self.point()?;
                    self.expect_close()?;
                    Ok(Arg::Box(BoxLit {
                        center,
                        half_extents,
                    }))
                } else {
                    Ok(Arg::Point(self.point()?))
                }
            }
            _ => Err(Self::unexpected(&t, &["argument"])),
        }
    }
}

fn check_box(b: &BoxLit) -> Result<(), String> {
    if b.half_extents.iter().all(|h| *h > 0.0) {
        Ok(())
    } else {
        Err("box half extents must be positive".into())
    }
}

fn build_atom(name: &str, args: Vec<Arg>) -> Result<PredExpr, String> {
    let mut it = args.into_iter();
    let mut id = || match it.next() {
        Some(Arg::Id(s)) => s,
        _ => unreachable!("signature checked"),
    };
    // Arguments were type-checked against the signature; pull them in order.
    Ok(match name {
        "on" => PredExpr::On { a: id(), b: id() },
        "inside" => PredExpr::Inside { a: id(), b: id() },
        "unmoved" => PredExpr::Unmoved { id: id() },
        _ => {
            let first = id();
            let rest: Vec<Arg> = it.collect();
            match (name, rest.as_slice()) {
                ("within_m", [Arg::Point(p), Arg::Num(r)]) => {
                    if *r <= 0.0 {
                        return Err("within_m radius must be positive".into());
                    }
                    PredExpr::WithinM {
                        id: first,
                        point: *p,
                        radius: *r,
                    }
                }
                ("iou_gt", [Arg::Box(b), Arg::Num(t)]) => {
                    check_box(b)?;
                    if !(*t > 0.0 && *t <= 1.0) {
                        return Err("iou_gt threshold must lie in (0, 1]".into());
                    }
                    PredExpr::IouGt {
                        id: first,
                        target: *b,
                        threshold: *t,
                    }
                }
                ("open_between", [Arg::Num(lo), Arg::Num(hi)]) => {
                    if lo > hi {
                        return Err("open_between requires lo <= hi".into());
                    }
                    PredExpr::OpenBetween {
                        id: first,
                        lo: *lo,
                        hi: *hi,
                    }
                }
                ("in_region", [Arg::Box(b)]) => {
                    check_box(b)?;
                    PredExpr::InRegion {
                        id: first,
                        region: *b,
                    }
                }
                ("rel_within_m", [Arg::Id(b), Arg::Num(r)]) => {
                    if *r <= 0.0 {
                        return Err("rel_within_m radius must be positive".into());
                    }
                    PredExpr::RelWithinM {
                        a: first,
                        b: b.clone(),
                        radius: *r,
                    }
                }
                _ => unreachable!("signature checked"),
            }
        }
    })
}

/// Parses program text.
pub fn parse(text: &str) -> Result<PredicateProgram, ParseError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.program()
}
