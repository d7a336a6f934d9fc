//! A small total expression language over integer variables.
//!
//! Oracles, partitions, adversaries and stage predicates are configured with
//! these expressions instead of arbitrary code, so every run is reproducible
//! from its config file. The language has integer arithmetic, comparisons,
//! boolean connectives and bit extraction; no loops, so evaluation always
//! terminates. Division and remainder by zero evaluate to 0 to keep every
//! expression total.
//!
//! Grammar (loosest binding first):
//!
//! ```text
//! expr   := or
//! or     := and ("||" and)*
//! and    := cmp ("&&" cmp)*
//! cmp    := sum (("=="|"!="|"<="|">="|"<"|">") sum)?
//! sum    := term (("+"|"-") term)*
//! term   := unary (("*"|"/"|"%") unary)*
//! unary  := ("-"|"!") unary | atom
//! atom   := integer | ident | "bit(" expr "," expr ")" | "(" expr ")"
//! ```
//!
//! Booleans are integers: comparisons yield 0/1 and the connectives treat any
//! nonzero value as true. `bit(i, n)` is bit `i` of `n` (0 outside range).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Int(i64),
    Var(usize),
    Neg(Box<Node>),
    Not(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Bit(Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
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

/// A parsed expression together with the names of its free variables.
///
/// The variable set is fixed at parse time: an oracle expression is parsed
/// with `["u", "v"]`, a stage predicate with `["n", "x", "y"]`, and so on.
/// Serialization round-trips through the original source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    src: String,
    vars: Vec<String>,
    ast: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVar(String),
}

impl Expr {
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, DslError> {
        let mut p = Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            vars,
        };
        p.skip_ws();
        let ast = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(DslError::Parse {
                at: p.pos,
                msg: "trailing input".into(),
            });
        }
        Ok(Expr {
            src: src.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            ast,
        })
    }

    pub fn src(&self) -> &str {
        &self.src
    }

    /// Evaluates with `args[i]` bound to the i-th variable from parse time.
    pub fn eval(&self, args: &[i64]) -> i64 {
        debug_assert_eq!(args.len(), self.vars.len());
        eval_node(&self.ast, args)
    }

    pub fn eval_bool(&self, args: &[i64]) -> bool {
        self.eval(args) != 0
    }
}

fn eval_node(n: &Node, args: &[i64]) -> i64 {
    match n {
        Node::Int(k) => *k,
        Node::Var(i) => args[*i],
        Node::Neg(e) => eval_node(e, args).wrapping_neg(),
        Node::Not(e) => (eval_node(e, args) == 0) as i64,
        Node::Bit(i, v) => {
            let i = eval_node(i, args);
            let v = eval_node(v, args);
            if !(0..64).contains(&i) || v < 0 {
                0
            } else {
                (v >> i) & 1
            }
        }
        Node::Bin(op, a, b) => {
            let x = eval_node(a, args);
            // Short-circuit the connectives.
            match op {
                BinOp::And => return ((x != 0) && (eval_node(b, args) != 0)) as i64,
                BinOp::Or => return ((x != 0) || (eval_node(b, args) != 0)) as i64,
                _ => {}
            }
            let y = eval_node(b, args);
            match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Div => {
                    if y == 0 {
                        0
                    } else {
                        x.wrapping_div(y)
                    }
                }
                BinOp::Rem => {
                    if y == 0 {
                        0
                    } else {
                        x.wrapping_rem(y)
                    }
                }
                BinOp::Eq => (x == y) as i64,
                BinOp::Ne => (x != y) as i64,
                BinOp::Lt => (x < y) as i64,
                BinOp::Le => (x <= y) as i64,
                BinOp::Gt => (x > y) as i64,
                BinOp::Ge => (x >= y) as i64,
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> DslError {
        DslError::Parse {
            at: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, DslError> {
        let mut lhs = self.and()?;
        while self.eat("||") {
            let rhs = self.and()?;
            lhs = Node::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Node, DslError> {
        let mut lhs = self.cmp()?;
        while self.eat("&&") {
            let rhs = self.cmp()?;
            lhs = Node::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Node, DslError> {
        let lhs = self.sum()?;
        for (tok, op) in [
            ("==", BinOp::Eq),
            ("!=", BinOp::Ne),
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ] {
            if self.eat(tok) {
                let rhs = self.sum()?;
                return Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)));
            }
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Node, DslError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat("+") {
                let rhs = self.term()?;
                lhs = Node::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
            } else if self.peek() == Some(b'-') && !self.src[self.pos..].starts_with("->") {
                self.pos += 1;
                let rhs = self.term()?;
                lhs = Node::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, DslError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat("*") {
                lhs = Node::Bin(BinOp::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat("/") {
                lhs = Node::Bin(BinOp::Div, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat("%") {
                lhs = Node::Bin(BinOp::Rem, Box::new(lhs), Box::new(self.unary()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, DslError> {
        if self.eat("!") {
            // Reject `!=` showing up here after a stray `!`.
            return Ok(Node::Not(Box::new(self.unary()?)));
        }
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, DslError> {
        self.skip_ws();
        let c = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of input"))?;
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() {
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let text = &self.src[start..self.pos];
            let v = i64::from_str(text).map_err(|_| self.err("integer literal out of range"))?;
            return Ok(Node::Int(v));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            if name == "bit" {
                if !self.eat("(") {
                    return Err(self.err("expected `(` after bit"));
                }
                let i = self.expr()?;
                if !self.eat(",") {
                    return Err(self.err("expected `,` in bit(i, n)"));
                }
                let v = self.expr()?;
                if !self.eat(")") {
                    return Err(self.err("expected `)`"));
                }
                return Ok(Node::Bit(Box::new(i), Box::new(v)));
            }
            let idx = self
                .vars
                .iter()
                .position(|v| *v == name)
                .ok_or_else(|| DslError::UnknownVar(name.to_string()))?;
            return Ok(Node::Var(idx));
        }
        Err(self.err("expected integer, variable, or `(`"))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.src)
    }
}

/// Expressions deserialize as source strings; the variable set is supplied by
/// the surrounding config type via [`Expr::parse`], so raw deserialization
/// defers variable resolution by accepting any identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExprSource(pub String);

impl<'de> Deserialize<'de> for ExprSource {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(ExprSource(String::deserialize(deserializer)?))
    }
}

impl ExprSource {
    pub fn compile(&self, vars: &[&str]) -> Result<Expr, DslError> {
        Expr::parse(&self.0, vars)
    }
}
