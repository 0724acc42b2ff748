//! Operator-expression language used in model files.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = postfix [ "^" unary ] ;
//! postfix = primary { "'" | "†" } ;
//! primary = number | ident [ "(" expr { "," expr } ")" ] [ "[" integer "]" ]
//!         | "(" expr ")" ;
//! ```
//!
//! Values are either complex scalars or operators on the full system space.
//! A scalar added to an operator is promoted to a multiple of the identity.
//! Primitives act on one tensor factor selected by `[k]`; the index may be
//! omitted when the system has a single factor.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::hilbert::{annihilation_op, creation_op, number_op, outer, pauli, Operator, Pauli};
use crate::linalg::{self, identity};

const MAX_DEPTH: usize = 128;
const MAX_TOKENS: usize = 1024;
const MAX_OPERATOR_POWER: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {}: {message}", .position + 1)]
pub struct ExprError {
    /// Character offset into the expression.
    pub position: usize,
    pub message: String,
}

impl ExprError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        ExprError { position, message: message.into() }
    }
}

type Parsed<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dagger,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    pos: usize,
}

fn tokenize(src: &str) -> Parsed<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let start = i;
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ExprError::new(start, format!("malformed number '{text}'")))?;
            let imaginary = i < chars.len()
                && (chars[i] == 'i' || chars[i] == 'j')
                && !chars.get(i + 1).is_some_and(|c| c.is_alphanumeric() || *c == '_');
            if imaginary {
                i += 1;
            }
            let tok = if imaginary { Tok::Imag(value) } else { Tok::Num(value) };
            out.push(Token { tok, text, pos: start });
            continue;
        }
        if ch.is_alphabetic() || ch == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident, text: chars[start..i].iter().collect(), pos: start });
            continue;
        }
        let tok = match ch {
            '+' => Tok::Plus,
            '-' | '−' => Tok::Minus,
            '*' | '·' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '\'' | '†' => Tok::Dagger,
            other => return Err(ExprError::new(start, format!("unexpected character '{other}'"))),
        };
        i += 1;
        out.push(Token { tok, text: ch.to_string(), pos: start });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Literal(Complex64),
    Name { name: String, args: Vec<Expr>, subsystem: Option<usize> },
    Neg(Box<Expr>),
    Adjoint(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
struct Expr {
    node: Node,
    pos: usize,
}

/// A parsed operator expression, evaluated against subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorExpr {
    source: String,
    root: Expr,
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(Complex64),
    Operator(Operator),
}

impl fmt::Display for OperatorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    depth: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<Tok> {
        self.tokens.get(self.at).map(|t| t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |t| t.pos)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        self.at += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Parsed<Token> {
        if self.peek() == Some(tok) {
            Ok(self.bump())
        } else {
            Err(ExprError::new(self.pos(), format!("expected {what}")))
        }
    }

    fn descend(&mut self) -> Parsed<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ExprError::new(self.pos(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Parsed<Expr> {
        self.descend()?;
        let mut lhs = self.term()?;
        while let Some(op @ (Tok::Plus | Tok::Minus)) = self.peek() {
            let pos = self.bump().pos;
            let rhs = self.term()?;
            let op = if op == Tok::Plus { BinOp::Add } else { BinOp::Sub };
            lhs = Expr { node: Node::Binary(op, Box::new(lhs), Box::new(rhs)), pos };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Parsed<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ (Tok::Star | Tok::Slash)) = self.peek() {
            let pos = self.bump().pos;
            let rhs = self.unary()?;
            let op = if op == Tok::Star { BinOp::Mul } else { BinOp::Div };
            lhs = Expr { node: Node::Binary(op, Box::new(lhs), Box::new(rhs)), pos };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Parsed<Expr> {
        self.descend()?;
        let out = match self.peek() {
            Some(Tok::Minus) => {
                let pos = self.bump().pos;
                Expr { node: Node::Neg(Box::new(self.unary()?)), pos }
            }
            Some(Tok::Plus) => {
                self.bump();
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn power(&mut self) -> Parsed<Expr> {
        let base = self.postfix()?;
        if self.peek() == Some(Tok::Caret) {
            let pos = self.bump().pos;
            let exponent = self.unary()?;
            return Ok(Expr { node: Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)), pos });
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Parsed<Expr> {
        let mut e = self.primary()?;
        while self.peek() == Some(Tok::Dagger) {
            let pos = self.bump().pos;
            e = Expr { node: Node::Adjoint(Box::new(e)), pos };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Parsed<Expr> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Num(v)) => {
                self.bump();
                Ok(Expr { node: Node::Literal(Complex64::new(v, 0.0)), pos })
            }
            Some(Tok::Imag(v)) => {
                self.bump();
                Ok(Expr { node: Node::Literal(Complex64::new(0.0, v)), pos })
            }
            Some(Tok::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident) => {
                let name = self.bump().text;
                let mut args = Vec::new();
                if self.peek() == Some(Tok::LParen) {
                    self.bump();
                    loop {
                        args.push(self.expr()?);
                        match self.peek() {
                            Some(Tok::Comma) => {
                                self.bump();
                            }
                            _ => break,
                        }
                    }
                    self.expect(Tok::RParen, "')' after arguments")?;
                }
                let mut subsystem = None;
                if self.peek() == Some(Tok::LBracket) {
                    self.bump();
                    let at = self.pos();
                    let index = match self.peek() {
                        Some(Tok::Num(v)) if v.fract() == 0.0 && v >= 0.0 && v < 1e6 => v as usize,
                        _ => return Err(ExprError::new(at, "subsystem index must be a non-negative integer")),
                    };
                    self.bump();
                    self.expect(Tok::RBracket, "']'")?;
                    subsystem = Some(index);
                }
                Ok(Expr { node: Node::Name { name, args, subsystem }, pos })
            }
            Some(_) => Err(ExprError::new(pos, format!("unexpected '{}'", self.tokens[self.at].text))),
            None => Err(ExprError::new(pos, "unexpected end of expression")),
        }
    }
}

impl OperatorExpr {
    pub fn parse(src: &str) -> Parsed<Self> {
        let tokens = tokenize(src)?;
        if tokens.len() > MAX_TOKENS {
            return Err(ExprError::new(tokens[MAX_TOKENS].pos, format!("expression longer than {MAX_TOKENS} tokens")));
        }
        let mut p = Parser { tokens, at: 0, depth: 0, end: src.chars().count() };
        if p.peek().is_none() {
            return Err(ExprError::new(0, "empty expression"));
        }
        let root = p.expr()?;
        if p.peek().is_some() {
            return Err(ExprError::new(p.pos(), format!("unexpected '{}'", p.tokens[p.at].text)));
        }
        Ok(OperatorExpr { source: src.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate on a system space with tensor factors `dims`.
    pub fn eval(&self, dims: &[usize]) -> Parsed<Value> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(ExprError::new(0, format!("invalid subsystem dimensions {dims:?}")));
        }
        let ctx = Context { dims, total: dims.iter().product() };
        ctx.eval(&self.root)
    }

    /// Evaluate to an operator; scalars become multiples of the identity.
    pub fn eval_operator(&self, dims: &[usize]) -> Parsed<Operator> {
        match self.eval(dims)? {
            Value::Operator(op) => Ok(op),
            Value::Scalar(z) => Ok(identity(dims.iter().product()) * z),
        }
    }

    /// Evaluate an expression that must not mention any operator.
    pub fn eval_scalar(&self) -> Parsed<Complex64> {
        match self.eval(&[1])? {
            Value::Scalar(z) => Ok(z),
            Value::Operator(_) => Err(ExprError::new(0, "expected a scalar, found an operator")),
        }
    }
}

/// Parse and evaluate an operator expression on the space `dims`.
pub fn parse_operator_expr(text: &str, dims: &[usize]) -> Parsed<Operator> {
    OperatorExpr::parse(text)?.eval_operator(dims)
}

/// Parse a complex scalar such as `"0.5-2i"` or `"sqrt(2)/2"`.
pub fn parse_complex(text: &str) -> Parsed<Complex64> {
    OperatorExpr::parse(text)?.eval_scalar()
}

struct Context<'a> {
    dims: &'a [usize],
    total: usize,
}

impl Context<'_> {
    fn eval(&self, e: &Expr) -> Parsed<Value> {
        use Value::{Operator as Op, Scalar};
        let v = match &e.node {
            Node::Literal(z) => Scalar(*z),
            Node::Name { name, args, subsystem } => self.name(e.pos, name, args, *subsystem)?,
            Node::Neg(x) => match self.eval(x)? {
                Scalar(z) => Scalar(-z),
                Op(m) => Op(-m),
            },
            Node::Adjoint(x) => match self.eval(x)? {
                Scalar(z) => Scalar(z.conj()),
                Op(m) => Op(m.adjoint()),
            },
            Node::Binary(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                self.binary(e.pos, *op, a, b)?
            }
        };
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        let ok = match &v {
            Scalar(z) => finite(z),
            Op(m) => m.iter().all(finite),
        };
        if !ok {
            return Err(ExprError::new(e.pos, "value is not finite"));
        }
        Ok(v)
    }

    fn promote(&self, v: Value) -> Operator {
        match v {
            Value::Scalar(z) => identity(self.total) * z,
            Value::Operator(m) => m,
        }
    }

    fn binary(&self, pos: usize, op: BinOp, a: Value, b: Value) -> Parsed<Value> {
        use Value::{Operator as Op, Scalar};
        Ok(match (op, a, b) {
            (BinOp::Add, Scalar(x), Scalar(y)) => Scalar(x + y),
            (BinOp::Sub, Scalar(x), Scalar(y)) => Scalar(x - y),
            (BinOp::Add, x, y) => Op(self.promote(x) + self.promote(y)),
            (BinOp::Sub, x, y) => Op(self.promote(x) - self.promote(y)),
            (BinOp::Mul, Scalar(x), Scalar(y)) => Scalar(x * y),
            (BinOp::Mul, Scalar(x), Op(m)) | (BinOp::Mul, Op(m), Scalar(x)) => Op(m * x),
            (BinOp::Mul, Op(x), Op(y)) => Op(x * y),
            (BinOp::Div, x, Scalar(y)) => {
                if y == linalg::ZERO {
                    return Err(ExprError::new(pos, "division by zero"));
                }
                match x {
                    Scalar(x) => Scalar(x / y),
                    Op(m) => Op(m / y),
                }
            }
            (BinOp::Div, _, Op(_)) => return Err(ExprError::new(pos, "cannot divide by an operator")),
            (BinOp::Pow, Scalar(x), Scalar(y)) => {
                Scalar(if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() <= i32::MAX as f64 { x.powi(y.re as i32) } else { x.powc(y) })
            }
            (BinOp::Pow, Op(m), Scalar(y)) => {
                if y.im != 0.0 || y.re.fract() != 0.0 || y.re < 0.0 || y.re > MAX_OPERATOR_POWER as f64 {
                    return Err(ExprError::new(
                        pos,
                        format!("operator powers must be integers in 0..={MAX_OPERATOR_POWER}"),
                    ));
                }
                let mut acc = identity(self.total);
                for _ in 0..y.re as u32 {
                    acc = &acc * &m;
                }
                Op(acc)
            }
            (BinOp::Pow, _, Op(_)) => return Err(ExprError::new(pos, "exponent must be a scalar")),
        })
    }

    fn scalar_arg(&self, pos: usize, name: &str, args: &[Expr]) -> Parsed<Complex64> {
        if args.len() != 1 {
            return Err(ExprError::new(pos, format!("'{name}' takes one argument")));
        }
        match self.eval(&args[0])? {
            Value::Scalar(z) => Ok(z),
            Value::Operator(_) => Err(ExprError::new(args[0].pos, format!("'{name}' needs a scalar argument"))),
        }
    }

    fn index_arg(&self, e: &Expr) -> Parsed<usize> {
        match self.eval(e)? {
            Value::Scalar(z) if z.im == 0.0 && z.re.fract() == 0.0 && z.re >= 0.0 && z.re < 1e6 => Ok(z.re as usize),
            _ => Err(ExprError::new(e.pos, "expected a non-negative integer")),
        }
    }

    fn name(&self, pos: usize, name: &str, args: &[Expr], subsystem: Option<usize>) -> Parsed<Value> {
        let scalar_fn: Option<fn(Complex64) -> Complex64> = match name {
            "sqrt" => Some(|z| z.sqrt()),
            "exp" => Some(|z| z.exp()),
            "sin" => Some(|z| z.sin()),
            "cos" => Some(|z| z.cos()),
            "conj" => Some(|z| z.conj()),
            _ => None,
        };
        if let Some(f) = scalar_fn {
            self.no_subsystem(pos, name, subsystem)?;
            return Ok(Value::Scalar(f(self.scalar_arg(pos, name, args)?)));
        }
        match name {
            "i" | "pi" => {
                self.no_args(pos, name, args)?;
                self.no_subsystem(pos, name, subsystem)?;
                return Ok(Value::Scalar(if name == "i" { linalg::I } else { Complex64::new(std::f64::consts::PI, 0.0) }));
            }
            "dag" => {
                self.no_subsystem(pos, name, subsystem)?;
                if args.len() != 1 {
                    return Err(ExprError::new(pos, "'dag' takes one argument"));
                }
                return Ok(match self.eval(&args[0])? {
                    Value::Scalar(z) => Value::Scalar(z.conj()),
                    Value::Operator(m) => Value::Operator(m.adjoint()),
                });
            }
            _ => {}
        }
        if name == "identity" && subsystem.is_none() {
            self.no_args(pos, name, args)?;
            return Ok(Value::Operator(identity(self.total)));
        }
        let k = match subsystem {
            Some(k) if k < self.dims.len() => k,
            Some(k) => {
                return Err(ExprError::new(pos, format!("subsystem index {k} out of range (system has {} factors)", self.dims.len())))
            }
            None if self.dims.len() == 1 => 0,
            None => return Err(ExprError::new(pos, format!("'{name}' needs a subsystem index on a composite system"))),
        };
        let d = self.dims[k];
        let local = match name {
            "identity" => {
                self.no_args(pos, name, args)?;
                identity(d)
            }
            "annihilator" | "creator" | "number" => {
                self.no_args(pos, name, args)?;
                let op = match name {
                    "annihilator" => annihilation_op(d),
                    "creator" => creation_op(d),
                    _ => Ok(number_op(d)),
                };
                op.map_err(|e| ExprError::new(pos, e.to_string()))?
            }
            "sigma_x" | "sigma_y" | "sigma_z" | "sigma_plus" | "sigma_minus" => {
                self.no_args(pos, name, args)?;
                if d != 2 {
                    return Err(ExprError::new(pos, format!("'{name}' acts on a two-level factor, subsystem {k} has dimension {d}")));
                }
                let p = match name {
                    "sigma_x" => Pauli::X,
                    "sigma_y" => Pauli::Y,
                    "sigma_z" => Pauli::Z,
                    "sigma_plus" => Pauli::Plus,
                    _ => Pauli::Minus,
                };
                pauli(p)
            }
            "outer" => {
                if args.len() != 2 {
                    return Err(ExprError::new(pos, "'outer' takes two basis indices"));
                }
                let (j, l) = (self.index_arg(&args[0])?, self.index_arg(&args[1])?);
                outer(d, j, l).map_err(|e| ExprError::new(pos, e.to_string()))?
            }
            _ => return Err(ExprError::new(pos, format!("unknown name '{name}'"))),
        };
        Ok(Value::Operator(self.embed(k, &local)))
    }

    fn embed(&self, k: usize, local: &Operator) -> Operator {
        let mut out = Operator::from_element(1, 1, linalg::ONE);
        for (j, &d) in self.dims.iter().enumerate() {
            out = if j == k { linalg::kron(&out, local) } else { linalg::kron(&out, &identity(d)) };
        }
        out
    }

    fn no_args(&self, pos: usize, name: &str, args: &[Expr]) -> Parsed<()> {
        if args.is_empty() {
            Ok(())
        } else {
            Err(ExprError::new(pos, format!("'{name}' takes no arguments")))
        }
    }

    fn no_subsystem(&self, pos: usize, name: &str, subsystem: Option<usize>) -> Parsed<()> {
        match subsystem {
            None => Ok(()),
            Some(_) => Err(ExprError::new(pos, format!("'{name}' does not take a subsystem index"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};
    use crate::CMatrix;
    use proptest::prelude::*;

    fn op(text: &str, dims: &[usize]) -> Operator {
        parse_operator_expr(text, dims).unwrap_or_else(|e| panic!("{text}: {e}"))
    }

    #[test]
    fn half_sigma_x_from_ladder() {
        let x = op("0.5*(sigma_plus + sigma_minus)", &[2]);
        assert_eq!(x, pauli(Pauli::X) * c(0.5, 0.0));
    }

    #[test]
    fn annihilator_and_i_sigma_z() {
        assert_eq!(op("annihilator", &[3]), annihilation_op(3).unwrap());
        let z = op("i*sigma_z", &[2]);
        assert_eq!(z, CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 1.0), c(0.0, -1.0)])));
    }

    #[test]
    fn number_from_ladder_product() {
        assert!(max_abs_diff(&op("(annihilator')*annihilator", &[3]), &number_op(3)) < 1e-15);
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5-2i").unwrap(), c(0.5, -2.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2.5e1j").unwrap(), c(1e-3, 25.0));
        assert!((parse_complex("sqrt(2)/2").unwrap() - c(0.5f64.sqrt(), 0.0)).norm() < 1e-16);
        assert!(parse_complex("sigma_z").is_err());
    }

    #[test]
    fn tensor_embedding_by_index() {
        let a = op("annihilator[0]*sigma_plus[1]", &[3, 2]);
        let direct = linalg::kron(&annihilation_op(3).unwrap(), &pauli(Pauli::Plus));
        assert_eq!(a, direct);
        assert!(parse_operator_expr("annihilator", &[3, 2]).is_err());
        assert!(parse_operator_expr("sigma_x[2]", &[3, 2]).is_err());
    }

    #[test]
    fn scalar_promotes_to_identity() {
        assert_eq!(op("1 - sigma_plus*sigma_minus", &[2]), op("sigma_minus*sigma_plus", &[2]));
        assert_eq!(op("2", &[3]), identity(3) * c(2.0, 0.0));
    }

    #[test]
    fn diagnostics_carry_positions() {
        let e = parse_operator_expr("sigma_x + * 2", &[2]).unwrap_err();
        assert_eq!(e.position, 10);
        let e = parse_operator_expr("sigma_q", &[2]).unwrap_err();
        assert!(e.message.contains("unknown name"));
        assert!(parse_operator_expr("(sigma_x", &[2]).is_err());
        assert!(parse_operator_expr("", &[2]).is_err());
        assert!(parse_operator_expr("sigma_x^2.5", &[2]).is_err());
        assert!(parse_operator_expr("1/0", &[2]).is_err());
        assert!(parse_operator_expr("sigma_x / sigma_z", &[2]).is_err());
        assert!(parse_operator_expr(&"(".repeat(10_000), &[2]).is_err());
    }

    /// (expression, dims, expected) triples checked against direct construction.
    fn golden() -> Vec<(&'static str, Vec<usize>, Operator)> {
        let sx = pauli(Pauli::X);
        let sy = pauli(Pauli::Y);
        let sz = pauli(Pauli::Z);
        let sp = pauli(Pauli::Plus);
        let sm = pauli(Pauli::Minus);
        let a3 = annihilation_op(3).unwrap();
        let a4 = annihilation_op(4).unwrap();
        let i2 = identity(2);
        let i3 = identity(3);
        let k = |a: &Operator, b: &Operator| linalg::kron(a, b);
        let s = |x: f64, y: f64| c(x, y);
        vec![
            ("sigma_x", vec![2], sx.clone()),
            ("sigma_y", vec![2], sy.clone()),
            ("sigma_z", vec![2], sz.clone()),
            ("sigma_plus", vec![2], sp.clone()),
            ("sigma_minus", vec![2], sm.clone()),
            ("identity", vec![2], i2.clone()),
            ("identity", vec![3, 2], identity(6)),
            ("identity[1]", vec![3, 2], identity(6)),
            ("sigma_plus'", vec![2], sm.clone()),
            ("sigma_minus†", vec![2], sp.clone()),
            ("dag(sigma_minus)", vec![2], sp.clone()),
            ("sigma_plus*sigma_minus", vec![2], outer(2, 0, 0).unwrap()),
            ("sigma_minus*sigma_plus", vec![2], outer(2, 1, 1).unwrap()),
            ("sigma_x*sigma_y", vec![2], &sz * s(0.0, 1.0)),
            ("sigma_x^2", vec![2], i2.clone()),
            ("sigma_x^0", vec![2], i2.clone()),
            ("-sigma_z", vec![2], -sz.clone()),
            ("0.5*sigma_z", vec![2], &sz * s(0.5, 0.0)),
            ("sigma_z/2", vec![2], &sz * s(0.5, 0.0)),
            ("(sigma_x + i*sigma_y)/2", vec![2], sp.clone()),
            ("(sigma_x - i*sigma_y)/2", vec![2], sm.clone()),
            ("sigma_plus + sigma_minus", vec![2], sx.clone()),
            ("i*(sigma_minus - sigma_plus)", vec![2], sy.clone()),
            ("sqrt(1.25)*sigma_minus", vec![2], &sm * s(1.25f64.sqrt(), 0.0)),
            ("(1+i)*sigma_minus", vec![2], &sm * s(1.0, 1.0)),
            ("exp(i*pi)*sigma_z", vec![2], &sz * s(-1.0, std::f64::consts::PI.sin())),
            ("annihilator", vec![3], a3.clone()),
            ("creator", vec![3], a3.adjoint()),
            ("number", vec![3], number_op(3)),
            ("creator*annihilator", vec![3], number_op(3)),
            ("annihilator*creator - creator*annihilator", vec![4], &a4 * a4.adjoint() - a4.adjoint() * &a4),
            ("annihilator^2", vec![4], &a4 * &a4),
            ("(annihilator + creator)/sqrt(2)", vec![3], (&a3 + a3.adjoint()) * s(0.5f64.sqrt(), 0.0)),
            ("outer(0,0)", vec![3], outer(3, 0, 0).unwrap()),
            ("outer(1, 2)", vec![3], outer(3, 1, 2).unwrap()),
            ("outer(0,1)[1]", vec![3, 2], k(&i3, &outer(2, 0, 1).unwrap())),
            ("annihilator[0]", vec![3, 2], k(&a3, &i2)),
            ("sigma_minus[1]", vec![3, 2], k(&i3, &sm)),
            ("sigma_minus[0]", vec![2, 3], k(&sm, &i3)),
            ("annihilator[0]*sigma_plus[1]", vec![3, 2], k(&a3, &sp)),
            ("creator[0]*sigma_minus[1] + annihilator[0]*sigma_plus[1]", vec![3, 2], k(&a3.adjoint(), &sm) + k(&a3, &sp)),
            ("number[0] + 0.5*sigma_z[1]", vec![3, 2], k(&number_op(3), &i2) + k(&i3, &sz) * s(0.5, 0.0)),
            ("sigma_z[0]*sigma_z[1]", vec![2, 2], k(&sz, &sz)),
            ("sigma_x[1]", vec![2, 2, 2], k(&k(&i2, &sx), &i2)),
            ("1 + sigma_z", vec![2], &i2 + &sz),
            ("sigma_z - 1", vec![2], &sz - &i2),
            ("2*3*sigma_x", vec![2], &sx * s(6.0, 0.0)),
            ("-(-sigma_y)", vec![2], sy.clone()),
            ("(sigma_x')'", vec![2], sx.clone()),
            ("2^3*sigma_z", vec![2], &sz * s(8.0, 0.0)),
            ("conj(1+2i)*sigma_z", vec![2], &sz * s(1.0, -2.0)),
            ("0.25", vec![2], &i2 * s(0.25, 0.0)),
        ]
    }

    #[test]
    fn golden_table() {
        let table = golden();
        assert!(table.len() >= 50);
        for (text, dims, expected) in table {
            let got = op(text, &dims);
            assert!(max_abs_diff(&got, &expected) < 1e-15, "{text}");
        }
    }

    #[test]
    fn double_adjoint_is_identity_on_golden_expressions() {
        for (text, dims, expected) in golden() {
            let got = op(&format!("(({text})')'"), &dims);
            assert!(max_abs_diff(&got, &expected) < 1e-15, "{text}");
        }
    }

    proptest! {
        #[test]
        fn parser_is_total(s in "\\PC{0,40}") {
            let _ = parse_operator_expr(&s, &[2]);
            let _ = parse_operator_expr(&s, &[3, 2]);
        }

        #[test]
        fn parser_is_total_on_grammar_soup(
            parts in proptest::collection::vec(prop_oneof![
                Just("sigma_x"), Just("annihilator"), Just("number[1]"), Just("("), Just(")"), Just("+"),
                Just("-"), Just("*"), Just("/"), Just("^"), Just("'"), Just("2"), Just("1e400"), Just("i"),
                Just("outer(0,"), Just("[0]"), Just(","), Just("sqrt("), Just("0"), Just("99"),
            ], 0..24)
        ) {
            let s: String = parts.concat();
            let _ = parse_operator_expr(&s, &[2]);
            let _ = parse_operator_expr(&s, &[3, 2]);
        }
    }
}
