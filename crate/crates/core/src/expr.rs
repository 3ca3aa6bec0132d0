//! Arithmetic expressions for custom obstacle profiles.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right associative
//! atom   := number | var | 'exp' '(' expr ')' | '(' expr ')'
//! var    := 'x' digits                  x2 .. xn, the tangential coordinates
//! number := digits ('.' digits)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! An expression is evaluated in three ways: as a second-order jet
//! (value, gradient, Hessian) for obstacle evaluation, as a truncated
//! power series along a line for glancing-order extraction, and, when it
//! is polynomial, as an exact multivariate polynomial for the leading-form
//! analysis of the grazing set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::series::Series;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Index into the tangential coordinates: `x2` is `Var(0)`.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} at offset {}", self.pos))
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
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let k: usize = digits.parse().map_err(|_| self.err("expected variable index"))?;
                if k < 2 {
                    return Err(self.err("variables start at x2"));
                }
                Ok(Expr::Var(k - 2))
            }
            Some(b'e') if self.src[self.pos..].starts_with(b"exp") => {
                self.pos += 3;
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after exp"));
                }
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(Expr::Exp(Box::new(e)))
            }
            _ => Err(self.err("unexpected token")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < s.len() && s[self.pos].is_ascii_digit() {
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err("malformed number"))
    }
}

/// Second-order jet: value, gradient and row-major Hessian.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub v: f64,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl Jet2 {
    fn constant(v: f64, m: usize) -> Self {
        Jet2 {
            v,
            g: vec![0.0; m],
            h: vec![0.0; m * m],
        }
    }

    fn var(i: usize, x: f64, m: usize) -> Self {
        let mut j = Self::constant(x, m);
        j.g[i] = 1.0;
        j
    }

    fn m(&self) -> usize {
        self.g.len()
    }

    fn lin(&self, a: f64, other: &Jet2, b: f64) -> Jet2 {
        Jet2 {
            v: a * self.v + b * other.v,
            g: self.g.iter().zip(&other.g).map(|(x, y)| a * x + b * y).collect(),
            h: self.h.iter().zip(&other.h).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    fn mul(&self, o: &Jet2) -> Jet2 {
        let m = self.m();
        let mut h = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                h[i * m + j] = self.h[i * m + j] * o.v
                    + o.h[i * m + j] * self.v
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        Jet2 {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a * o.v + b * self.v).collect(),
            h,
        }
    }

    /// Applies a scalar function with derivatives `(f, f', f'')` at `self.v`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let m = self.m();
        let mut h = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut v = f1 * self.h[i * m + j];
                if f2 != 0.0 {
                    v += f2 * self.g[i] * self.g[j];
                }
                h[i * m + j] = v;
            }
        }
        Jet2 {
            v: f0,
            g: self.g.iter().map(|a| f1 * a).collect(),
            h,
        }
    }

    fn is_constant(&self) -> bool {
        self.g.iter().all(|v| *v == 0.0) && self.h.iter().all(|v| *v == 0.0)
    }
}

fn int_pow_coeffs(x: f64, p: i32) -> (f64, f64, f64) {
    let pf = p as f64;
    let f0 = x.powi(p);
    let f1 = if p == 0 { 0.0 } else { pf * x.powi(p - 1) };
    let f2 = if p == 0 || p == 1 {
        0.0
    } else {
        pf * (pf - 1.0) * x.powi(p - 2)
    };
    (f0, f1, f2)
}

/// Sparse multivariate polynomial: exponent vector to coefficient.
pub type Poly = BTreeMap<Vec<u32>, f64>;

fn poly_const(c: f64, m: usize) -> Poly {
    let mut p = Poly::new();
    if c != 0.0 {
        p.insert(vec![0; m], c);
    }
    p
}

fn poly_add(a: &Poly, b: &Poly, sb: f64) -> Poly {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(k.clone()).or_insert(0.0) += sb * v;
    }
    out.retain(|_, v| *v != 0.0);
    out
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_insert(0.0) += va * vb;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

fn poly_constant_value(p: &Poly) -> Option<f64> {
    match p.len() {
        0 => Some(0.0),
        1 => {
            let (k, v) = p.iter().next().unwrap();
            if k.iter().all(|e| *e == 0) {
                Some(*v)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Evaluates a polynomial and its gradient at a point.
pub fn poly_eval(p: &Poly, x: &[f64]) -> f64 {
    p.iter()
        .map(|(k, c)| c * k.iter().zip(x).map(|(e, xi)| xi.powi(*e as i32)).product::<f64>())
        .sum()
}

/// Partial derivative of a polynomial with respect to variable `i`.
pub fn poly_diff(p: &Poly, i: usize) -> Poly {
    let mut out = Poly::new();
    for (k, c) in p {
        if k[i] > 0 {
            let mut k2 = k.clone();
            k2[i] -= 1;
            *out.entry(k2).or_insert(0.0) += c * k[i] as f64;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// Homogeneous part of total degree `d`.
pub fn poly_homogeneous_part(p: &Poly, d: u32) -> Poly {
    p.iter()
        .filter(|(k, _)| k.iter().sum::<u32>() == d)
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    /// Largest variable index referenced plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Exp(a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let e = b.eval(x);
                if e.fract() == 0.0 && e.abs() < 1e9 {
                    a.eval(x).powi(e as i32)
                } else {
                    a.eval(x).powf(e)
                }
            }
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    /// Value, gradient and Hessian at `x`.
    pub fn jet(&self, x: &[f64]) -> Result<Jet2> {
        let m = x.len();
        let j = match self {
            Expr::Num(v) => Jet2::constant(*v, m),
            Expr::Var(i) => Jet2::var(*i, x[*i], m),
            Expr::Neg(a) => {
                let a = a.jet(x)?;
                a.lin(-1.0, &a, 0.0)
            }
            Expr::Add(a, b) => a.jet(x)?.lin(1.0, &b.jet(x)?, 1.0),
            Expr::Sub(a, b) => a.jet(x)?.lin(1.0, &b.jet(x)?, -1.0),
            Expr::Mul(a, b) => a.jet(x)?.mul(&b.jet(x)?),
            Expr::Div(a, b) => {
                let b = b.jet(x)?;
                let inv = b.chain(1.0 / b.v, -1.0 / (b.v * b.v), 2.0 / (b.v * b.v * b.v));
                a.jet(x)?.mul(&inv)
            }
            Expr::Pow(a, b) => {
                let aj = a.jet(x)?;
                let bj = b.jet(x)?;
                if bj.is_constant() {
                    let p = bj.v;
                    if p.fract() == 0.0 && p.abs() < 1e9 {
                        let (f0, f1, f2) = int_pow_coeffs(aj.v, p as i32);
                        aj.chain(f0, f1, f2)
                    } else {
                        let v = aj.v;
                        aj.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
                    }
                } else {
                    let v = aj.v;
                    let ln = aj.chain(v.ln(), 1.0 / v, -1.0 / (v * v));
                    let prod = bj.mul(&ln);
                    let e = prod.v.exp();
                    prod.chain(e, e, e)
                }
            }
            Expr::Exp(a) => {
                let a = a.jet(x)?;
                let e = a.v.exp();
                a.chain(e, e, e)
            }
        };
        if !j.v.is_finite() || j.g.iter().any(|v| !v.is_finite()) || j.h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "custom expression".into(),
            });
        }
        Ok(j)
    }

    /// Taylor series in `s` of the expression restricted to `x0 + s d`.
    pub fn series_along(&self, x0: &[f64], d: &[f64], degree: usize) -> Result<Series> {
        Ok(match self {
            Expr::Num(v) => Series::constant(*v, degree),
            Expr::Var(i) => Series::affine(x0[*i], d[*i], degree),
            Expr::Neg(a) => -&a.series_along(x0, d, degree)?,
            Expr::Add(a, b) => &a.series_along(x0, d, degree)? + &b.series_along(x0, d, degree)?,
            Expr::Sub(a, b) => &a.series_along(x0, d, degree)? - &b.series_along(x0, d, degree)?,
            Expr::Mul(a, b) => &a.series_along(x0, d, degree)? * &b.series_along(x0, d, degree)?,
            Expr::Div(a, b) => a
                .series_along(x0, d, degree)?
                .div(&b.series_along(x0, d, degree)?)?,
            Expr::Pow(a, b) => {
                let bs = b.series_along(x0, d, degree)?;
                let a_s = a.series_along(x0, d, degree)?;
                if bs.c[1..].iter().all(|v| *v == 0.0) {
                    a_s.powf(bs.c[0])?
                } else {
                    (&bs * &a_s.ln()?).exp()
                }
            }
            Expr::Exp(a) => a.series_along(x0, d, degree)?.exp(),
        })
    }

    /// Exact polynomial form in `m` variables, if the expression is polynomial.
    pub fn to_poly(&self, m: usize) -> Option<Poly> {
        match self {
            Expr::Num(v) => Some(poly_const(*v, m)),
            Expr::Var(i) => {
                if *i >= m {
                    return None;
                }
                let mut k = vec![0; m];
                k[*i] = 1;
                let mut p = Poly::new();
                p.insert(k, 1.0);
                Some(p)
            }
            Expr::Neg(a) => Some(poly_add(&Poly::new(), &a.to_poly(m)?, -1.0)),
            Expr::Add(a, b) => Some(poly_add(&a.to_poly(m)?, &b.to_poly(m)?, 1.0)),
            Expr::Sub(a, b) => Some(poly_add(&a.to_poly(m)?, &b.to_poly(m)?, -1.0)),
            Expr::Mul(a, b) => Some(poly_mul(&a.to_poly(m)?, &b.to_poly(m)?)),
            Expr::Div(a, b) => {
                let c = poly_constant_value(&b.to_poly(m)?)?;
                if c == 0.0 {
                    return None;
                }
                Some(poly_add(&Poly::new(), &a.to_poly(m)?, 1.0 / c))
            }
            Expr::Pow(a, b) => {
                let e = poly_constant_value(&b.to_poly(m)?)?;
                if e < 0.0 || e.fract() != 0.0 || e > 64.0 {
                    return None;
                }
                let base = a.to_poly(m)?;
                let mut out = poly_const(1.0, m);
                for _ in 0..(e as u32) {
                    out = poly_mul(&out, &base);
                }
                Some(out)
            }
            Expr::Exp(a) => {
                let c = poly_constant_value(&a.to_poly(m)?)?;
                Some(poly_const(c.exp(), m))
            }
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 2),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_precedence_and_unary_minus() {
        let e = Expr::parse("1 - x2^2 * 3 + -x3/2").unwrap();
        assert_relative_eq!(e.eval(&[2.0, 4.0]), 1.0 - 12.0 - 2.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_relative_eq!(e.eval(&[]), 512.0);
        let e = Expr::parse("1.5e-1*exp(0)").unwrap();
        assert_relative_eq!(e.eval(&[]), 0.15);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("x1").is_err());
        assert!(Expr::parse("(x2").is_err());
        assert!(Expr::parse("x2 x3").is_err());
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("1 - (x2^4 + x2^2*x3^2 - x2*x3^3) / 2 + exp(-x3)").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn jet_matches_hand_derivatives() {
        let e = Expr::parse("x2^3*x3 + exp(x2*x3)").unwrap();
        let (a, b) = (0.3, -0.7);
        let j = e.jet(&[a, b]).unwrap();
        let ex = (a * b).exp();
        assert_relative_eq!(j.v, a.powi(3) * b + ex, epsilon = 1e-14);
        assert_relative_eq!(j.g[0], 3.0 * a * a * b + b * ex, epsilon = 1e-14);
        assert_relative_eq!(j.g[1], a.powi(3) + a * ex, epsilon = 1e-14);
        assert_relative_eq!(j.h[0], 6.0 * a * b + b * b * ex, epsilon = 1e-14);
        assert_relative_eq!(j.h[1], 3.0 * a * a + ex + a * b * ex, epsilon = 1e-14);
        assert_relative_eq!(j.h[3], a * a * ex, epsilon = 1e-14);
    }

    #[test]
    fn polynomial_extraction() {
        let e = Expr::parse("1 - (x2^2 + x3)^2/2").unwrap();
        let p = e.to_poly(2).unwrap();
        assert_relative_eq!(poly_eval(&p, &[0.4, -0.2]), e.eval(&[0.4, -0.2]), epsilon = 1e-14);
        assert!(Expr::parse("exp(x2)").unwrap().to_poly(1).is_none());
        assert!(Expr::parse("1/x2").unwrap().to_poly(1).is_none());
    }

    #[test]
    fn series_along_line_matches_direct_expansion() {
        let e = Expr::parse("1 - x2^2").unwrap();
        let s = e.series_along(&[0.0], &[2.0], 4).unwrap();
        assert_eq!(s.c, vec![1.0, 0.0, -4.0, 0.0, 0.0]);
    }
}
