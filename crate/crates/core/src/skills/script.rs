//! The skill action language.
//!
//! ```text
//! params: count
//! repeat_until gained.log >= {count} {
//!     mine nearest log
//! }
//! ```
//!
//! Statements: `mine nearest X`, `goto nearest X`, `craft X`, `smelt X`,
//! `place X`, `ensure_near X`, `ensure_station X`, `equip X`, `eat X`,
//! `move <dir>`, `turn <yaw> <pitch>`, `explore_step`, and
//! `repeat_until <quantity> <op> <value> { ... }` nested at most twice.
//! Quantities are `inventory.X`, `gained.X` and `steps`. Any symbol or
//! count may be a `{param}` declared in the header.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::world::Dir;

pub const MAX_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SyntaxKind {
    Empty,
    Unexpected,
    UnknownStatement,
    UndeclaredParameter,
    EmptyLoop,
    DepthExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub kind: SyntaxKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// A name that is either literal or bound at execution time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Sym {
    Lit(String),
    Param(String),
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Lit(s) => f.write_str(s),
            Sym::Param(p) => write!(f, "{{{p}}}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Value {
    Int(i64),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Quantity {
    Inventory(Sym),
    Gained(Sym),
    Steps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Predicate {
    pub lhs: Quantity,
    pub op: CmpOp,
    pub rhs: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Stmt {
    MineNearest(Sym),
    GotoNearest(Sym),
    Craft(Sym),
    Smelt(Sym),
    Place(Sym),
    EnsureNear(Sym),
    EnsureStation(Sym),
    Equip(Sym),
    Eat(Sym),
    Move(Dir),
    Turn(f64, f64),
    ExploreStep,
    RepeatUntil { pred: Predicate, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillScript {
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

impl SkillScript {
    pub fn loop_count(&self) -> usize {
        fn walk(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::RepeatUntil { body, .. } => 1 + walk(body),
                    _ => 0,
                })
                .sum()
        }
        walk(&self.body)
    }

    /// Parameters used where a number is expected.
    pub fn numeric_params(&self) -> BTreeSet<String> {
        fn walk(stmts: &[Stmt], out: &mut BTreeSet<String>) {
            for s in stmts {
                if let Stmt::RepeatUntil { pred, body } = s {
                    if let Value::Param(p) = &pred.rhs {
                        out.insert(p.clone());
                    }
                    walk(body, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.body, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Param(String),
    Open,
    Close,
    Op(CmpOp),
    Sep,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(kind: SyntaxKind, line: usize, col: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError { kind, line, col, message: message.into() }
}

fn is_word(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        let at = |i: usize| (li + 1, i + 1);
        while i < chars.len() {
            let c = chars[i];
            let (line_no, col) = at(i);
            let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: line_no, col });
            if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c == ';' {
                push(&mut out, Tok::Sep);
                i += 1;
            } else if c == '{' {
                let end = chars[i + 1..].iter().position(|&c| c == '}').map(|p| p + i + 1);
                let inner: Option<String> = end.map(|e| chars[i + 1..e].iter().collect());
                match (end, inner) {
                    (Some(e), Some(name)) if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                        push(&mut out, Tok::Param(name));
                        i = e + 1;
                    }
                    _ => {
                        push(&mut out, Tok::Open);
                        i += 1;
                    }
                }
            } else if c == '}' {
                push(&mut out, Tok::Close);
                i += 1;
            } else if matches!(c, '<' | '>' | '=' | '!') {
                let two = chars.get(i + 1) == Some(&'=');
                let op = match (c, two) {
                    ('>', true) => CmpOp::Ge,
                    ('>', false) => CmpOp::Gt,
                    ('<', true) => CmpOp::Le,
                    ('<', false) => CmpOp::Lt,
                    ('=', true) => CmpOp::Eq,
                    ('!', true) => CmpOp::Ne,
                    _ => return Err(err(SyntaxKind::Unexpected, line_no, col, format!("stray `{c}`"))),
                };
                push(&mut out, Tok::Op(op));
                i += if two { 2 } else { 1 };
            } else if is_word(c) {
                let start = i;
                while i < chars.len() && is_word(chars[i]) {
                    i += 1;
                }
                let w: String = chars[start..i].iter().collect();
                // `gained.{item}` lexes as a word ending in '.' followed by a param.
                push(&mut out, Tok::Word(w));
            } else {
                return Err(err(SyntaxKind::Unexpected, line_no, col, format!("unexpected character `{c}`")));
            }
        }
        out.push(Spanned { tok: Tok::Sep, line: li + 1, col: chars.len() + 1 });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    params: Vec<String>,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.col)).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn skip_seps(&mut self) {
        while matches!(self.peek(), Some(Spanned { tok: Tok::Sep, .. })) {
            self.pos += 1;
        }
    }

    fn fail<T>(&self, kind: SyntaxKind, msg: impl Into<String>) -> Result<T, SyntaxError> {
        let (l, c) = self.here();
        Err(err(kind, l, c, msg))
    }

    fn sym(&mut self) -> Result<Sym, SyntaxError> {
        let (l, c) = self.here();
        match self.next().map(|s| s.tok) {
            Some(Tok::Word(w)) if w.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') => {
                Ok(Sym::Lit(w))
            }
            Some(Tok::Param(p)) => self.param(p, l, c).map(Sym::Param),
            _ => Err(err(SyntaxKind::Unexpected, l, c, "expected a name or {param}")),
        }
    }

    fn param(&self, p: String, l: usize, c: usize) -> Result<String, SyntaxError> {
        if self.params.contains(&p) {
            Ok(p)
        } else {
            Err(err(SyntaxKind::UndeclaredParameter, l, c, format!("parameter `{p}` is not declared")))
        }
    }

    fn number(&mut self) -> Result<f64, SyntaxError> {
        let (l, c) = self.here();
        match self.next().map(|s| s.tok) {
            Some(Tok::Word(w)) => w
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(SyntaxKind::Unexpected, l, c, format!("`{w}` is not a number"))),
            _ => Err(err(SyntaxKind::Unexpected, l, c, "expected a number")),
        }
    }

    fn end_of_stmt(&mut self) -> Result<(), SyntaxError> {
        match self.peek().map(|s| &s.tok) {
            None | Some(Tok::Sep) | Some(Tok::Close) => Ok(()),
            _ => self.fail(SyntaxKind::Unexpected, "expected end of statement"),
        }
    }

    fn predicate(&mut self) -> Result<Predicate, SyntaxError> {
        let (l, c) = self.here();
        let lhs = match self.next().map(|s| s.tok) {
            Some(Tok::Word(w)) if w == "steps" => Quantity::Steps,
            Some(Tok::Word(w)) => {
                let (scope, name) = w
                    .split_once('.')
                    .ok_or_else(|| err(SyntaxKind::Unexpected, l, c, format!("unknown quantity `{w}`")))?;
                let sym = if name.is_empty() {
                    let (pl, pc) = self.here();
                    match self.next().map(|s| s.tok) {
                        Some(Tok::Param(p)) => Sym::Param(self.param(p, pl, pc)?),
                        _ => return Err(err(SyntaxKind::Unexpected, pl, pc, "expected an item after `.`")),
                    }
                } else {
                    Sym::Lit(name.to_string())
                };
                match scope {
                    "inventory" => Quantity::Inventory(sym),
                    "gained" => Quantity::Gained(sym),
                    _ => return Err(err(SyntaxKind::Unexpected, l, c, format!("unknown quantity `{scope}`"))),
                }
            }
            _ => return Err(err(SyntaxKind::Unexpected, l, c, "expected a predicate")),
        };
        let (l, c) = self.here();
        let op = match self.next().map(|s| s.tok) {
            Some(Tok::Op(op)) => op,
            _ => return Err(err(SyntaxKind::Unexpected, l, c, "expected a comparison operator")),
        };
        let (l, c) = self.here();
        let rhs = match self.next().map(|s| s.tok) {
            Some(Tok::Word(w)) => Value::Int(
                w.parse().map_err(|_| err(SyntaxKind::Unexpected, l, c, format!("`{w}` is not an integer")))?,
            ),
            Some(Tok::Param(p)) => Value::Param(self.param(p, l, c)?),
            _ => return Err(err(SyntaxKind::Unexpected, l, c, "expected an integer or {param}")),
        };
        Ok(Predicate { lhs, op, rhs })
    }

    fn block(&mut self, depth: usize) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            self.skip_seps();
            match self.peek().map(|s| &s.tok) {
                None if depth == 0 => return Ok(out),
                None => return self.fail(SyntaxKind::Unexpected, "missing `}`"),
                Some(Tok::Close) if depth > 0 => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(Tok::Close) => return self.fail(SyntaxKind::Unexpected, "unmatched `}`"),
                _ => out.push(self.stmt(depth)?),
            }
        }
    }

    fn stmt(&mut self, depth: usize) -> Result<Stmt, SyntaxError> {
        let (l, c) = self.here();
        let word = match self.next().map(|s| s.tok) {
            Some(Tok::Word(w)) => w,
            _ => return Err(err(SyntaxKind::Unexpected, l, c, "expected a statement")),
        };
        let stmt = match word.as_str() {
            "mine" | "goto" => {
                let (nl, nc) = self.here();
                match self.next().map(|s| s.tok) {
                    Some(Tok::Word(w)) if w == "nearest" => {}
                    _ => return Err(err(SyntaxKind::Unexpected, nl, nc, format!("expected `{word} nearest`"))),
                }
                let s = self.sym()?;
                if word == "mine" { Stmt::MineNearest(s) } else { Stmt::GotoNearest(s) }
            }
            "craft" => Stmt::Craft(self.sym()?),
            "smelt" => Stmt::Smelt(self.sym()?),
            "place" => Stmt::Place(self.sym()?),
            "ensure_near" => Stmt::EnsureNear(self.sym()?),
            "ensure_station" => Stmt::EnsureStation(self.sym()?),
            "equip" => Stmt::Equip(self.sym()?),
            "eat" => Stmt::Eat(self.sym()?),
            "move" => {
                let (dl, dc) = self.here();
                match self.next().map(|s| s.tok) {
                    Some(Tok::Word(w)) => Stmt::Move(
                        Dir::parse(&w).ok_or_else(|| err(SyntaxKind::Unexpected, dl, dc, format!("unknown direction `{w}`")))?,
                    ),
                    _ => return Err(err(SyntaxKind::Unexpected, dl, dc, "expected a direction")),
                }
            }
            "turn" => Stmt::Turn(self.number()?, self.number()?),
            "explore_step" => Stmt::ExploreStep,
            "repeat_until" => {
                if depth + 1 > MAX_DEPTH {
                    return Err(err(SyntaxKind::DepthExceeded, l, c, format!("loops nest at most {MAX_DEPTH} deep")));
                }
                let pred = self.predicate()?;
                self.skip_line_breaks();
                let (bl, bc) = self.here();
                match self.next().map(|s| s.tok) {
                    Some(Tok::Open) => {}
                    _ => return Err(err(SyntaxKind::Unexpected, bl, bc, "expected `{`")),
                }
                let body = self.block(depth + 1)?;
                if body.is_empty() {
                    return Err(err(SyntaxKind::EmptyLoop, l, c, "loop body is empty"));
                }
                return Ok(Stmt::RepeatUntil { pred, body });
            }
            other => return Err(err(SyntaxKind::UnknownStatement, l, c, format!("unknown statement `{other}`"))),
        };
        self.end_of_stmt()?;
        Ok(stmt)
    }

    fn skip_line_breaks(&mut self) {
        self.skip_seps();
    }
}

pub fn parse_script(text: &str) -> Result<SkillScript, SyntaxError> {
    let mut params = Vec::new();
    let mut body_text = String::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if !header_seen && !trimmed.is_empty() && !trimmed.starts_with('#') {
            header_seen = true;
            if let Some(rest) = trimmed.strip_prefix("params:") {
                for p in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    if !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || params.iter().any(|q| q == p) {
                        return Err(err(SyntaxKind::Unexpected, i + 1, 1, format!("bad parameter `{p}`")));
                    }
                    params.push(p.to_string());
                }
                // Keep line numbering intact for the body.
                body_text.push('\n');
                continue;
            }
        }
        body_text.push_str(line);
        body_text.push('\n');
    }
    let toks = lex(&body_text)?;
    let lines = text.lines().count().max(1);
    let mut p = Parser { toks, pos: 0, params, end: (lines, 1) };
    let body = p.block(0)?;
    if body.is_empty() {
        return Err(err(SyntaxKind::Empty, 1, 1, "script has no statements"));
    }
    Ok(SkillScript { params: p.params, body })
}
