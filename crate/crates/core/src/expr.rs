//! Closed-form scalar fields on a chart.
//!
//! Metric coefficients are stored as small expression trees so that one
//! definition can be evaluated at `f64` and at any dual-number nesting. The
//! text syntax accepted by [`Expr::parse`] is
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'pi' | x<k> | func '(' expr ')' | '(' expr ')'
//! func   := sqrt | sin | cos | exp | ln
//! ```
//!
//! Variables are zero-based chart coordinates `x0, x1, …`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::dual::Real;
use crate::error::{GeoError, Result};

#[derive(Debug)]
enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powi(Expr, i32),
    Sqrt(Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Ln(Expr),
}

/// Immutable, cheaply clonable expression in the chart coordinates.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn var(k: usize) -> Self {
        Self::node(Node::Var(k))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn sqrt(self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.sqrt()),
            None => Self::node(Node::Sqrt(self)),
        }
    }

    pub fn sin(self) -> Self {
        Self::node(Node::Sin(self))
    }

    pub fn cos(self) -> Self {
        Self::node(Node::Cos(self))
    }

    pub fn exp(self) -> Self {
        Self::node(Node::Exp(self))
    }

    pub fn ln(self) -> Self {
        Self::node(Node::Ln(self))
    }

    pub fn powi(self, n: i32) -> Self {
        match (self.as_const(), n) {
            (Some(c), _) => Self::constant(c.powi(n)),
            (_, 0) => Self::constant(1.0),
            (_, 1) => self,
            _ => Self::node(Node::Powi(self, n)),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match &*self.0 {
            Node::Const(_) => None,
            Node::Var(k) => Some(*k),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Node::Neg(a)
            | Node::Powi(a, _)
            | Node::Sqrt(a)
            | Node::Sin(a)
            | Node::Cos(a)
            | Node::Exp(a)
            | Node::Ln(a) => a.max_var(),
        }
    }

    /// Evaluates at the point `x`. Variables beyond `x.len()` read as zero.
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        match &*self.0 {
            Node::Const(c) => T::cst(*c),
            Node::Var(k) => x.get(*k).copied().unwrap_or_else(T::zero),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Neg(a) => -a.eval(x),
            Node::Powi(a, n) => a.eval(x).powi(*n),
            Node::Sqrt(a) => a.eval(x).sqrt(),
            Node::Sin(a) => a.eval(x).sin(),
            Node::Cos(a) => a.eval(x).cos(),
            Node::Exp(a) => a.eval(x).exp(),
            Node::Ln(a) => a.eval(x).ln(),
        }
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), None) if a == 0.0 => o,
            (None, Some(b)) if b == 0.0 => self,
            _ => Expr::node(Node::Add(self, o)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (Some(a), None) if a == 0.0 => -o,
            (None, Some(b)) if b == 0.0 => self,
            _ => Expr::node(Node::Sub(self, o)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Expr::constant(0.0),
            (Some(a), None) if a == 1.0 => o,
            (None, Some(b)) if b == 1.0 => self,
            _ => Expr::node(Node::Mul(self, o)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, o: Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a / b),
            (Some(a), None) if a == 0.0 => Expr::constant(0.0),
            (None, Some(b)) if b == 1.0 => self,
            _ => Expr::node(Node::Div(self, o)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.as_const() {
            Some(a) => Expr::constant(-a),
            None => Expr::node(Node::Neg(self)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var(k) => write!(f, "x{k}"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Powi(a, n) => write!(f, "{a}^{n}"),
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Ln(a) => write!(f, "ln({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> GeoError {
        GeoError::Parse(format!(
            "{msg} at offset {} in '{}'",
            self.pos,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(-self.unary()?)
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            let n: i32 = digits
                .parse()
                .map_err(|_| self.error("expected integer exponent"))?;
            Ok(base.powi(if neg { -n } else { n }))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.error("expected a number, variable or function")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = (c == b'+' || c == b'-')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Expr::constant)
            .map_err(|_| self.error("malformed number"))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if name == "pi" {
            return Ok(Expr::constant(std::f64::consts::PI));
        }
        if let Some(idx) = name.strip_prefix('x') {
            if let Ok(k) = idx.parse::<usize>() {
                return Ok(Expr::var(k));
            }
        }
        let func: fn(Expr) -> Expr = match name {
            "sqrt" => Expr::sqrt,
            "sin" => Expr::sin,
            "cos" => Expr::cos,
            "exp" => Expr::exp,
            "ln" => Expr::ln,
            _ => return Err(self.error(&format!("unknown identifier '{name}'"))),
        };
        if !self.eat(b'(') {
            return Err(self.error("expected '(' after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.error("expected ')'"));
        }
        Ok(func(arg))
    }
}
