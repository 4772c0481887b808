//! Expressions over x_i, xi_i with complex evaluation and symbolic derivatives.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, decimal literals,
//! the constants `pi` and `i`, and the functions `exp sin cos sqrt log`.
//! Variables are 1-based: `x_1`, `xi_2`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Log,
}

/// A variable: position x_i or momentum xi_i (0-based index).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Xi(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(C64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

fn c(re: f64) -> Expr {
    Expr::Const(C64::new(re, 0.0))
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> C64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(Var::X(i)) => C64::new(x.get(*i).copied().unwrap_or(f64::NAN), 0.0),
            Expr::Var(Var::Xi(i)) => C64::new(xi.get(*i).copied().unwrap_or(f64::NAN), 0.0),
            Expr::Add(a, b) => a.eval(x, xi) + b.eval(x, xi),
            Expr::Sub(a, b) => a.eval(x, xi) - b.eval(x, xi),
            Expr::Mul(a, b) => a.eval(x, xi) * b.eval(x, xi),
            Expr::Div(a, b) => a.eval(x, xi) / b.eval(x, xi),
            Expr::Neg(a) => -a.eval(x, xi),
            Expr::Pow(a, b) => {
                let base = a.eval(x, xi);
                if let Expr::Const(e) = **b {
                    if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() < 64.0 {
                        return base.powi(e.re as i32);
                    }
                }
                base.powc(b.eval(x, xi))
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, xi);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                    Func::Log => v.ln(),
                }
            }
        }
    }

    /// Does the expression mention `v`?
    pub fn depends_on(&self, v: Var) -> bool {
        self.any_var(&|w| w == v)
    }

    fn any_var(&self, pred: &dyn Fn(Var) -> bool) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => pred(*w),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.any_var(pred) || b.any_var(pred)
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.any_var(pred),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        self.any_var(&|w| matches!(w, Var::X(_)))
    }

    pub fn depends_on_xi(&self) -> bool {
        self.any_var(&|w| matches!(w, Var::Xi(_)))
    }

    /// Largest variable index used plus one (0 for constants).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(Var::X(i)) | Expr::Var(Var::Xi(i)) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
        }
    }

    /// Symbolic ∂/∂v, simplified.
    pub fn derivative(&self, v: Var) -> Expr {
        simplify(self.diff(v))
    }

    fn diff(&self, v: Var) -> Expr {
        use Expr::*;
        let b = |e: Expr| Box::new(e);
        match self {
            Const(_) => c(0.0),
            Var(w) => c(if *w == v { 1.0 } else { 0.0 }),
            Add(p, q) => Add(b(p.diff(v)), b(q.diff(v))),
            Sub(p, q) => Sub(b(p.diff(v)), b(q.diff(v))),
            Mul(p, q) => Add(b(Mul(b(p.diff(v)), q.clone())), b(Mul(p.clone(), b(q.diff(v))))),
            Div(p, q) => Div(
                b(Sub(b(Mul(b(p.diff(v)), q.clone())), b(Mul(p.clone(), b(q.diff(v)))))),
                b(Pow(q.clone(), b(c(2.0)))),
            ),
            Neg(p) => Neg(b(p.diff(v))),
            Pow(p, q) => {
                if !q.depends_on(v) {
                    // q·p^{q−1}·p'
                    Mul(b(Mul(q.clone(), b(Pow(p.clone(), b(Sub(q.clone(), b(c(1.0)))))))), b(p.diff(v)))
                } else {
                    // p^q·(q'·log p + q·p'/p)
                    Mul(
                        b(self.clone()),
                        b(Add(
                            b(Mul(b(q.diff(v)), b(Call(Func::Log, p.clone())))),
                            b(Div(b(Mul(q.clone(), b(p.diff(v)))), p.clone())),
                        )),
                    )
                }
            }
            Call(f, p) => {
                let inner = p.diff(v);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Sin => Call(Func::Cos, p.clone()),
                    Func::Cos => Neg(b(Call(Func::Sin, p.clone()))),
                    Func::Sqrt => Div(b(c(0.5)), b(self.clone())),
                    Func::Log => Div(b(c(1.0)), p.clone()),
                };
                Mul(b(outer), b(inner))
            }
        }
    }

    /// Split into Σ f_i(x)·g_i(ξ); `None` if some term mixes x and ξ.
    pub fn separable_terms(&self) -> Option<Vec<(Expr, Expr)>> {
        let mut out = Vec::new();
        collect_terms(self, C64::new(1.0, 0.0), &mut out)?;
        Some(out)
    }
}

fn collect_terms(e: &Expr, sign: C64, out: &mut Vec<(Expr, Expr)>) -> Option<()> {
    match e {
        Expr::Add(a, b) => {
            collect_terms(a, sign, out)?;
            collect_terms(b, sign, out)
        }
        Expr::Sub(a, b) => {
            collect_terms(a, sign, out)?;
            collect_terms(b, -sign, out)
        }
        Expr::Neg(a) => collect_terms(a, -sign, out),
        _ => {
            let mut fx = Vec::new();
            let mut gx = Vec::new();
            let mut k = sign;
            split_product(e, false, &mut k, &mut fx, &mut gx)?;
            let join = |v: Vec<Expr>| {
                v.into_iter().fold(c(1.0), |acc, f| simplify(Expr::Mul(Box::new(acc), Box::new(f))))
            };
            let f = simplify(Expr::Mul(Box::new(Expr::Const(k)), Box::new(join(fx))));
            out.push((f, join(gx)));
            Some(())
        }
    }
}

fn split_product(e: &Expr, inv: bool, k: &mut C64, fx: &mut Vec<Expr>, gx: &mut Vec<Expr>) -> Option<()> {
    match e {
        Expr::Mul(a, b) => {
            split_product(a, inv, k, fx, gx)?;
            split_product(b, inv, k, fx, gx)
        }
        Expr::Div(a, b) => {
            split_product(a, inv, k, fx, gx)?;
            split_product(b, !inv, k, fx, gx)
        }
        Expr::Neg(a) => {
            *k = -*k;
            split_product(a, inv, k, fx, gx)
        }
        Expr::Const(v) => {
            *k = if inv { *k / v } else { *k * v };
            Some(())
        }
        _ => {
            let f = if inv { Expr::Div(Box::new(c(1.0)), Box::new(e.clone())) } else { e.clone() };
            match (e.depends_on_x(), e.depends_on_xi()) {
                (true, true) => None,
                (false, true) => {
                    gx.push(f);
                    Some(())
                }
                _ => {
                    fx.push(f);
                    Some(())
                }
            }
        }
    }
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(z) if *z == C64::new(v, 0.0))
}

/// Constant folding and identity elimination.
pub fn simplify(e: Expr) -> Expr {
    use Expr::*;
    match e {
        Add(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            match (&a, &b) {
                (Const(x), Const(y)) => Const(x + y),
                _ if is_const(&a, 0.0) => b,
                _ if is_const(&b, 0.0) => a,
                _ => Add(Box::new(a), Box::new(b)),
            }
        }
        Sub(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            match (&a, &b) {
                (Const(x), Const(y)) => Const(x - y),
                _ if is_const(&b, 0.0) => a,
                _ if is_const(&a, 0.0) => simplify(Neg(Box::new(b))),
                _ => Sub(Box::new(a), Box::new(b)),
            }
        }
        Mul(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            match (&a, &b) {
                (Const(x), Const(y)) => Const(x * y),
                _ if is_const(&a, 0.0) || is_const(&b, 0.0) => c(0.0),
                _ if is_const(&a, 1.0) => b,
                _ if is_const(&b, 1.0) => a,
                _ => Mul(Box::new(a), Box::new(b)),
            }
        }
        Div(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            match (&a, &b) {
                (Const(x), Const(y)) if *y != C64::new(0.0, 0.0) => Const(x / y),
                _ if is_const(&a, 0.0) => c(0.0),
                _ if is_const(&b, 1.0) => a,
                _ => Div(Box::new(a), Box::new(b)),
            }
        }
        Pow(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            match (&a, &b) {
                (Const(x), Const(y)) => Const(x.powc(*y)),
                _ if is_const(&b, 0.0) => c(1.0),
                _ if is_const(&b, 1.0) => a,
                _ => Pow(Box::new(a), Box::new(b)),
            }
        }
        Neg(a) => match simplify(*a) {
            Const(x) => Const(-x),
            Neg(inner) => *inner,
            other => Neg(Box::new(other)),
        },
        Call(f, a) => match simplify(*a) {
            Const(x) => Const(Call(f, Box::new(Const(x))).eval(&[], &[])),
            other => Call(f, Box::new(other)),
        },
        other => other,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) if v.im == 0.0 => write!(f, "{}", v.re),
            Expr::Const(v) => write!(f, "({}+{}*i)", v.re, v.im),
            Expr::Var(Var::X(i)) => write!(f, "x_{}", i + 1),
            Expr::Var(Var::Xi(i)) => write!(f, "xi_{}", i + 1),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(g, a) => {
                let name = match g {
                    Func::Exp => "exp",
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Sqrt => "sqrt",
                    Func::Log => "log",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { position: self.pos, message: msg.to_string() }
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

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek() {
            match op {
                b'+' => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                b'-' => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek() {
            match op {
                b'*' => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                b'/' => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).map_err(|_| self.err("invalid utf-8"))?;
        let v: f64 = text.parse().map_err(|_| Error::Parse { position: start, message: format!("bad number '{text}'") })?;
        Ok(c(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name: String = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("").to_string();
        match name.as_str() {
            "pi" => return Ok(c(core::f64::consts::PI)),
            "i" => return Ok(Expr::Const(C64::new(0.0, 1.0))),
            "x" | "xi" => {
                if self.src.get(self.pos) != Some(&b'_') {
                    return Err(self.err("expected '_' and an index after variable name"));
                }
                self.pos += 1;
                let ds = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if ds == self.pos {
                    return Err(self.err("expected a 1-based variable index"));
                }
                let idx: usize = core::str::from_utf8(&self.src[ds..self.pos]).unwrap_or("0").parse().unwrap_or(0);
                if idx == 0 {
                    return Err(Error::Parse { position: ds, message: "variable indices start at 1".to_string() });
                }
                return Ok(Expr::Var(if name == "x" { Var::X(idx - 1) } else { Var::Xi(idx - 1) }));
            }
            _ => {}
        }
        let func = match name.as_str() {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return Err(Error::Parse { position: start, message: format!("unknown identifier '{name}'") }),
        };
        if self.peek() != Some(b'(') {
            return Err(self.err("expected '(' after function name"));
        }
        self.pos += 1;
        let arg = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(self.err("expected ')'"));
        }
        self.pos += 1;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}
