//! Closed-form coordinate expressions: recursive-descent parser, printer and
//! jet evaluator.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := factor (("*"|"/") factor)* ;
//! factor := base ("^" factor)? ;
//! base   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")" | "-" base ;
//! ```
//!
//! `^` is right-associative and a leading `-` binds to the base, so `-x^2`
//! is `(-x)^2`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::{Func, Jet, JetError};

/// Deepest nesting of parentheses, unary minus or powers the parser accepts.
pub const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown function '{name}' at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

/// A domain failure while evaluating an expression on jets.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source} in '{subexpr}' at {point:?}")]
pub struct EvalError {
    pub subexpr: String,
    pub point: Vec<f64>,
    pub source: JetError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree node. `Var` holds the zero-based coordinate index.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn num(v: f64) -> Node {
        Node::Num(v)
    }

    pub fn var(k: usize) -> Node {
        Node::Var(k)
    }

    pub fn neg(a: Node) -> Node {
        Node::Neg(Box::new(a))
    }

    pub fn binary(op: BinOp, a: Node, b: Node) -> Node {
        Node::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Node) -> Node {
        Node::Call(f, Box::new(a))
    }

    /// Integer exponent if this node is an integer literal, possibly negated.
    fn integer_literal(&self) -> Option<i64> {
        const LIMIT: f64 = (1u64 << 53) as f64;
        match self {
            Node::Num(v) if v.fract() == 0.0 && v.abs() <= LIMIT => Some(*v as i64),
            Node::Neg(inner) => inner.integer_literal().map(|k| -k),
            _ => None,
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Var(k) => Some(*k),
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }
}

/// A parsed expression together with the coordinate names it refers to.
#[derive(Clone)]
pub struct Expr {
    root: Node,
    coords: Arc<[String]>,
    source: Option<Arc<str>>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        self.root == other.root
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    /// Wraps an already-built tree. Fails if a variable index is not a
    /// declared coordinate.
    pub fn from_node(root: Node, coords: Arc<[String]>) -> Result<Expr, ParseError> {
        if let Some(k) = root.max_var() {
            if k >= coords.len() {
                return Err(ParseError::UnknownIdentifier {
                    name: format!("#{k}"),
                    offset: 0,
                });
            }
        }
        Ok(Expr { root, coords, source: None })
    }

    pub fn constant(v: f64, coords: Arc<[String]>) -> Expr {
        Expr {
            root: Node::Num(v),
            coords,
            source: None,
        }
    }

    /// The text this expression was parsed from, or its printed form.
    pub fn source_text(&self) -> String {
        match &self.source {
            Some(s) => s.to_string(),
            None => self.to_string(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    /// Evaluates the expression as a jet of the given order at `point`.
    pub fn eval(&self, point: &[f64], order: u8) -> Result<Jet, EvalError> {
        assert_eq!(point.len(), self.coords.len(), "point dimension mismatch");
        self.eval_node(&self.root, point, order)
    }

    /// Plain value at `point`.
    pub fn value(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval(point, 0).map(|j| j.value())
    }

    fn fail(&self, node: &Node, point: &[f64], source: JetError) -> EvalError {
        EvalError {
            subexpr: Printer { node, coords: &self.coords }.to_string(),
            point: point.to_vec(),
            source,
        }
    }

    fn eval_node(&self, node: &Node, point: &[f64], order: u8) -> Result<Jet, EvalError> {
        let n = point.len();
        let out = match node {
            Node::Num(v) => Jet::constant(*v, n, order),
            Node::Var(k) => Jet::coordinate(*k, point, order),
            Node::Neg(a) => Ok(-self.eval_node(a, point, order)?),
            Node::Call(f, a) => self.eval_node(a, point, order)?.apply(*f),
            Node::Binary(BinOp::Pow, a, b) => {
                let base = self.eval_node(a, point, order)?;
                match b.integer_literal() {
                    Some(k) => base.powi(k),
                    None => {
                        let e = self.eval_node(b, point, order)?;
                        base.powf(&e)
                    }
                }
            }
            Node::Binary(op, a, b) => {
                let l = self.eval_node(a, point, order)?;
                let r = self.eval_node(b, point, order)?;
                match op {
                    BinOp::Add => Ok(&l + &r),
                    BinOp::Sub => Ok(&l - &r),
                    BinOp::Mul => Ok(&l * &r),
                    BinOp::Div => l.checked_div(&r),
                    BinOp::Pow => unreachable!(),
                }
            }
        };
        match out {
            Ok(j) if j.is_finite() => Ok(j),
            Ok(j) => Err(self.fail(
                node,
                point,
                JetError::Domain {
                    func: "overflow",
                    value: j.value(),
                },
            )),
            Err(e) => Err(self.fail(node, point, e)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.root,
            coords: &self.coords,
        }
        .fmt(f)
    }
}

/// Prints with every binary operation parenthesized, so output reparses to
/// the same tree.
struct Printer<'a> {
    node: &'a Node,
    coords: &'a [String],
}

impl Printer<'_> {
    fn sub<'b>(&'b self, node: &'b Node) -> Printer<'b> {
        Printer { node, coords: self.coords }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Node::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "-{:?}", -v),
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(k) => f.write_str(&self.coords[*k]),
            Node::Neg(a) => write!(f, "-{}", self.sub(a)),
            Node::Call(func, a) => write!(f, "{}({})", func.name(), self.sub(a)),
            Node::Binary(op, a, b) => write!(f, "({} {} {})", self.sub(a), op.symbol(), self.sub(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if !bytes[start..i].iter().any(u8::is_ascii_digit) {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: "malformed number".into(),
                    });
                }
                // exponent only if it is complete
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                if !v.is_finite() {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("number '{text}' out of range"),
                    });
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {}", describe(self.peek())),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::Syntax {
                offset: self.offset(),
                message: "expression nested too deeply".into(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let base = self.base()?;
        let out = if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.factor()?;
            Node::binary(BinOp::Pow, base, exp)
        } else {
            base
        };
        self.depth -= 1;
        Ok(out)
    }

    fn base(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let (tok, offset) = self.bump();
        let node = match tok {
            Tok::Num(v) => Node::Num(v),
            Tok::Minus => Node::neg(self.base()?),
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                inner
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownFunction { name, offset })?;
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.unexpected("')'"));
                    }
                    self.bump();
                    Node::call(func, arg)
                } else {
                    match self.coords.iter().position(|c| *c == name) {
                        Some(k) => Node::Var(k),
                        None => return Err(ParseError::UnknownIdentifier { name, offset }),
                    }
                }
            }
            other => {
                return Err(ParseError::Syntax {
                    offset,
                    message: format!("expected a number, identifier or '(', found {}", describe(&other)),
                })
            }
        };
        self.depth -= 1;
        Ok(node)
    }
}

/// Parses `src` against the declared coordinate names.
pub fn parse_expression(src: &str, coords: &Arc<[String]>) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    if toks.len() == 1 {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
        coords,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(Expr {
        root,
        coords: Arc::clone(coords),
        source: Some(src.trim().into()),
    })
}

/// Convenience for building coordinate lists.
pub fn coord_names<S: AsRef<str>>(names: &[S]) -> Arc<[String]> {
    names.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>().into()
}
