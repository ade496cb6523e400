// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! The plugin expression language.
//!
//! A program is zero or more `import name;` lines followed by one expression
//! over `f64`. Booleans are 1.0 and 0.0. The tokenizer is lenient so the
//! safety checker can scan arbitrary text, including text that would never
//! parse.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Number(f64),
    Ident(String),
    Str(String),
    Sym(&'static str),
    /// Any byte the language has no use for.
    Other(char),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

const SYMBOLS: [&str; 24] = [
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "+", "-", "*", "/", "%", "!", "?", ":", "(", ")", ",", ".", ";",
    "[", "]", "=",
];

pub fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let kind = match text.parse() {
                Ok(v) => TokenKind::Number(v),
                Err(_) => TokenKind::Other('.'),
            };
            out.push(Token { kind, offset: start });
            continue;
        }
        if c == '_' || c.is_alphabetic() {
            while i < bytes.len() {
                let d = src[i..].chars().next().expect("in bounds");
                if d == '_' || d.is_alphanumeric() {
                    i += d.len_utf8();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        if c == '"' || c == '\'' || c == '`' {
            i += 1;
            while i < bytes.len() && bytes[i] != c as u8 {
                i += if bytes[i] == b'\\' { 2 } else { 1 };
            }
            let end = i.min(bytes.len());
            out.push(Token {
                kind: TokenKind::Str(src[start + 1..end].to_string()),
                offset: start,
            });
            i = (i + 1).min(bytes.len());
            continue;
        }
        if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push(Token {
                kind: TokenKind::Sym(sym),
                offset: start,
            });
            i += sym.len();
            continue;
        }
        out.push(Token {
            kind: TokenKind::Other(c),
            offset: start,
        });
        i += c.len_utf8();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub imports: Vec<String>,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

const MAX_NESTING: usize = 64;

const FUNCTIONS: [(&str, usize); 9] = [
    ("min", 2),
    ("max", 2),
    ("abs", 1),
    ("floor", 1),
    ("ceil", 1),
    ("sqrt", 1),
    ("pow", 2),
    ("clamp", 3),
    ("exp", 1),
];

const MATH_CONSTANTS: [(&str, f64); 2] = [("pi", std::f64::consts::PI), ("e", std::f64::consts::E)];

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    end: usize,
    depth: usize,
    imports: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(TokenKind::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => self.err("expected identifier"),
        }
    }

    fn nest(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return self.err("expression nested too deeply");
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.nest()?;
        let cond = self.binary(0)?;
        let out = if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.expr()?;
            Expr::Cond(Box::new(cond), Box::new(a), Box::new(b))
        } else {
            cond
        };
        self.depth -= 1;
        Ok(out)
    }

    fn binop(&self, level: usize) -> Option<BinOp> {
        let Some(TokenKind::Sym(s)) = self.peek() else {
            return None;
        };
        let op = match (level, *s) {
            (0, "||") => BinOp::Or,
            (1, "&&") => BinOp::And,
            (2, "==") => BinOp::Eq,
            (2, "!=") => BinOp::Ne,
            (2, "<") => BinOp::Lt,
            (2, "<=") => BinOp::Le,
            (2, ">") => BinOp::Gt,
            (2, ">=") => BinOp::Ge,
            (3, "+") => BinOp::Add,
            (3, "-") => BinOp::Sub,
            (4, "*") => BinOp::Mul,
            (4, "/") => BinOp::Div,
            (4, "%") => BinOp::Rem,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        if level == 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop(level) {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
            // Comparisons do not chain.
            if level == 2 {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.nest()?;
        let out = if self.eat("-") {
            Expr::Neg(Box::new(self.unary()?))
        } else if self.eat("!") {
            Expr::Not(Box::new(self.unary()?))
        } else {
            self.primary()?
        };
        self.depth -= 1;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(TokenKind::Number(v)) => {
                self.pos += 1;
                Ok(Expr::Num(*v))
            }
            Some(TokenKind::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(TokenKind::Ident(_)) => {
                let at = self.offset();
                let mut name = self.ident()?;
                if self.eat(".") {
                    if !self.imports.contains(&name) {
                        return Err(ParseError {
                            offset: at,
                            message: format!("module `{name}` used without import"),
                        });
                    }
                    if name != "math" {
                        return Err(ParseError {
                            offset: at,
                            message: format!("unknown module `{name}`"),
                        });
                    }
                    let member = self.ident()?;
                    if !self.check_call_ahead() {
                        return match MATH_CONSTANTS.iter().find(|(n, _)| *n == member) {
                            Some((_, v)) => Ok(Expr::Num(*v)),
                            None => Err(ParseError {
                                offset: at,
                                message: format!("unknown constant `math.{member}`"),
                            }),
                        };
                    }
                    name = member;
                } else if !self.check_call_ahead() {
                    return Ok(Expr::Var(name));
                }
                let Some(&(_, arity)) = FUNCTIONS.iter().find(|(n, _)| *n == name) else {
                    return Err(ParseError {
                        offset: at,
                        message: format!("unknown function `{name}`"),
                    });
                };
                self.expect("(")?;
                let mut args = Vec::new();
                if !self.eat(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                if args.len() != arity {
                    return Err(ParseError {
                        offset: at,
                        message: format!("`{name}` takes {arity} arguments, got {}", args.len()),
                    });
                }
                Ok(Expr::Call(name, args))
            }
            Some(_) => self.err("unexpected token"),
            None => self.err("unexpected end of input"),
        }
    }

    fn check_call_ahead(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Sym("(")))
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src);
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: src.len(),
        depth: 0,
        imports: Vec::new(),
    };
    while matches!(p.peek(), Some(TokenKind::Ident(k)) if k == "import") {
        p.pos += 1;
        let m = p.ident()?;
        p.expect(";")?;
        p.imports.push(m);
    }
    let body = p.expr()?;
    if p.pos != toks.len() {
        return p.err("trailing input");
    }
    Ok(Program {
        imports: p.imports,
        body,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("result is not finite")]
    NonFinite,
}

/// Variable bindings for one evaluation.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: BTreeMap<String, f64>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, v: f64) -> &mut Self {
        self.vars.insert(name.into(), v);
        self
    }
}

fn truth(v: f64) -> bool {
    v != 0.0
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(n) => *env.vars.get(n).ok_or_else(|| EvalError::Unbound(n.clone()))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Not(e) => flag(!truth(e.eval(env)?)),
            Expr::Cond(c, a, b) => {
                if truth(c.eval(env)?) {
                    a.eval(env)?
                } else {
                    b.eval(env)?
                }
            }
            Expr::Bin(BinOp::And, a, b) => flag(truth(a.eval(env)?) && truth(b.eval(env)?)),
            Expr::Bin(BinOp::Or, a, b) => flag(truth(a.eval(env)?) || truth(b.eval(env)?)),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div | BinOp::Rem if b == 0.0 => return Err(EvalError::DivisionByZero),
                    BinOp::Div => a / b,
                    BinOp::Rem => a % b,
                    BinOp::Eq => flag(a == b),
                    BinOp::Ne => flag(a != b),
                    BinOp::Lt => flag(a < b),
                    BinOp::Le => flag(a <= b),
                    BinOp::Gt => flag(a > b),
                    BinOp::Ge => flag(a >= b),
                    BinOp::And | BinOp::Or => unreachable!("handled above"),
                }
            }
            Expr::Call(name, args) => {
                let vals = args.iter().map(|a| a.eval(env)).collect::<Result<Vec<_>, _>>()?;
                match (name.as_str(), vals.as_slice()) {
                    ("min", [a, b]) => a.min(*b),
                    ("max", [a, b]) => a.max(*b),
                    ("abs", [a]) => a.abs(),
                    ("floor", [a]) => a.floor(),
                    ("ceil", [a]) => a.ceil(),
                    ("sqrt", [a]) => a.sqrt(),
                    ("exp", [a]) => a.exp(),
                    ("pow", [a, b]) => a.powf(*b),
                    ("clamp", [v, lo, hi]) => v.max(*lo).min(*hi),
                    _ => unreachable!("arity checked at parse time"),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Free variables in first-use order, without duplicates.
    pub fn variables(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(n) => {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                Expr::Neg(a) | Expr::Not(a) => walk(a, out),
                Expr::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Cond(a, b, c) => {
                    walk(a, out);
                    walk(b, out);
                    walk(c, out);
                }
                Expr::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => f.write_str(s),
            TokenKind::Str(s) => write!(f, "{s:?}"),
            TokenKind::Sym(s) => f.write_str(s),
            TokenKind::Other(c) => write!(f, "{c}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str, x: f64, acc: f64) -> Result<f64, EvalError> {
        let p = parse_program(src).unwrap();
        let mut env = Env::new();
        env.set("x", x).set("acc", acc);
        p.body.eval(&env)
    }

    #[test]
    fn precedence_and_ternary() {
        assert_eq!(run("acc + x * 2", 3.0, 1.0), Ok(7.0));
        assert_eq!(run("(acc + x) * 2", 3.0, 1.0), Ok(8.0));
        assert_eq!(run("x > 2 && acc < 2 ? 10 : -10", 3.0, 1.0), Ok(10.0));
        assert_eq!(run("x % 2 == 1 || 0", 3.0, 0.0), Ok(1.0));
        assert_eq!(run("-x - -1", 3.0, 0.0), Ok(-2.0));
        assert_eq!(run("!x", 0.0, 0.0), Ok(1.0));
    }

    #[test]
    fn calls_and_imports() {
        assert_eq!(run("clamp(x, 0, 2) + max(acc, 5)", 3.0, 1.0), Ok(7.0));
        assert_eq!(run("import math;\nmath.sqrt(x) + floor(math.pi)", 16.0, 0.0), Ok(7.0));
        assert!(parse_program("math.sqrt(x)").is_err());
        assert!(parse_program("import os; os.system(1)").is_err());
        assert!(parse_program("min(x)").is_err());
        assert!(parse_program("x +").is_err());
        assert!(parse_program("x y").is_err());
    }

    #[test]
    fn eval_errors() {
        assert_eq!(run("x / acc", 1.0, 0.0), Err(EvalError::DivisionByZero));
        assert_eq!(run("exp(x)", 1000.0, 0.0), Err(EvalError::NonFinite));
        let p = parse_program("y").unwrap();
        assert_eq!(p.body.eval(&Env::new()), Err(EvalError::Unbound("y".into())));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("{}x{}", "(".repeat(500), ")".repeat(500));
        assert!(parse_program(&src).is_err());
    }

    #[test]
    fn tokenizer_is_total() {
        let toks = tokenize("open('/etc/passwd') ; $ @ 1e3 \u{00e9}t\u{00e9}");
        assert!(toks.iter().any(|t| t.kind == TokenKind::Str("/etc/passwd".into())));
        assert!(toks.iter().any(|t| t.kind == TokenKind::Number(1000.0)));
        assert!(toks.iter().any(|t| t.kind == TokenKind::Other('$')));
        assert!(tokenize("\"unterminated").len() == 1);
    }
}
