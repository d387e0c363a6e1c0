//! A small arithmetic expression language with symbolic differentiation.
//!
//! Grammar (precedence low to high): `+ -`, `* /`, unary `-`, `^`
//! (right-associative), atoms. Atoms are numbers, `pi`, variables `x1..xn`
//! (aliases `u1..un`, and `x, y, z` for the first three), parenthesized
//! expressions and calls `f(expr)` for
//! `exp log sqrt sin cos tan sinh cosh tanh asinh acosh atanh abs`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SlagError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Asinh,
    Acosh,
    Atanh,
    Abs,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "asinh" => Func::Asinh,
            "acosh" => Func::Acosh,
            "atanh" => Func::Atanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Asinh => "asinh",
            Func::Acosh => "acosh",
            Func::Atanh => "atanh",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Asinh => x.asinh(),
            Func::Acosh => x.acosh(),
            Func::Atanh => x.atanh(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Call(Func, Arc<Expr>),
}

use Expr::*;

fn num(x: f64) -> Expr {
    Num(x)
}

fn as_num(e: &Expr) -> Option<f64> {
    match e {
        Num(x) => Some(*x),
        _ => None,
    }
}

// Smart constructors folding constants and trivial identities.
fn add(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Add(Arc::new(a), Arc::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Sub(Arc::new(a), Arc::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Mul(Arc::new(a), Arc::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x / y),
        (Some(0.0), _) => num(0.0),
        (_, Some(1.0)) => a,
        _ => Div(Arc::new(a), Arc::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => num(-x),
        Neg(inner) => (*inner).clone(),
        _ => Neg(Arc::new(a)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (as_num(&a), as_num(&b)) {
        (Some(x), Some(y)) => num(x.powf(y)),
        (_, Some(0.0)) => num(1.0),
        (_, Some(1.0)) => a,
        _ => Pow(Arc::new(a), Arc::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match as_num(&a) {
        Some(x) => num(f.apply(x)),
        None => Call(f, Arc::new(a)),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(SlagError::Expr(format!(
                "unexpected token {:?}",
                p.toks[p.pos]
            )));
        }
        Ok(e)
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Num(_) => 0,
            Var(i) => i + 1,
            Neg(a) | Call(_, a) => a.arity(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Num(c) => *c,
            Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Pow(a, b) => {
                let base = a.eval(x);
                match as_num(b) {
                    Some(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(k as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Symbolic partial derivative in variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Num(_) => num(0.0),
            Var(j) => num(if *j == i { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(i)),
            Add(a, b) => add(a.diff(i), b.diff(i)),
            Sub(a, b) => sub(a.diff(i), b.diff(i)),
            Mul(a, b) => add(mul(a.diff(i), (**b).clone()), mul((**a).clone(), b.diff(i))),
            Div(a, b) => div(
                sub(mul(a.diff(i), (**b).clone()), mul((**a).clone(), b.diff(i))),
                pow((**b).clone(), num(2.0)),
            ),
            Pow(a, b) => {
                let (ae, be) = ((**a).clone(), (**b).clone());
                match as_num(b) {
                    Some(k) => mul(mul(num(k), pow(ae, num(k - 1.0))), a.diff(i)),
                    None => {
                        // d(a^b) = a^b (b' ln a + b a'/a)
                        let t = add(
                            mul(b.diff(i), call(Func::Log, ae.clone())),
                            div(mul(be.clone(), a.diff(i)), ae.clone()),
                        );
                        mul(pow(ae, be), t)
                    }
                }
            }
            Call(f, a) => {
                let ae = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, ae),
                    Func::Log => div(num(1.0), ae),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, ae)),
                    Func::Sin => call(Func::Cos, ae),
                    Func::Cos => neg(call(Func::Sin, ae)),
                    Func::Tan => div(num(1.0), pow(call(Func::Cos, ae), num(2.0))),
                    Func::Sinh => call(Func::Cosh, ae),
                    Func::Cosh => call(Func::Sinh, ae),
                    Func::Tanh => div(num(1.0), pow(call(Func::Cosh, ae), num(2.0))),
                    Func::Asinh => {
                        div(num(1.0), call(Func::Sqrt, add(pow(ae, num(2.0)), num(1.0))))
                    }
                    Func::Acosh => {
                        div(num(1.0), call(Func::Sqrt, sub(pow(ae, num(2.0)), num(1.0))))
                    }
                    Func::Atanh => div(num(1.0), sub(num(1.0), pow(ae, num(2.0)))),
                    Func::Abs => div(ae.clone(), call(Func::Abs, ae)),
                };
                mul(outer, a.diff(i))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(c) => write!(f, "{c}"),
            Var(i) => write!(f, "x{}", i + 1),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let mut j = i + 1;
                if j < cs.len() && (cs[j] == '+' || cs[j] == '-') {
                    j += 1;
                }
                if j < cs.len() && cs[j].is_ascii_digit() {
                    i = j;
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = cs[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| SlagError::Expr(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(SlagError::Expr(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Add(Arc::new(lhs), Arc::new(self.term()?));
            } else if self.eat('-') {
                lhs = Sub(Arc::new(lhs), Arc::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Mul(Arc::new(lhs), Arc::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Div(Arc::new(lhs), Arc::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(neg(self.unary()?));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Pow(Arc::new(base), Arc::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| SlagError::Expr("unexpected end of expression".into()))?;
        self.pos += 1;
        match t {
            Tok::Num(v) => Ok(Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(SlagError::Expr("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Ident(name) if name == "pi" => Ok(Num(std::f64::consts::PI)),
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    if !self.eat('(') {
                        return Err(SlagError::Expr(format!("expected '(' after {name}")));
                    }
                    let e = self.expr()?;
                    if !self.eat(')') {
                        return Err(SlagError::Expr("missing ')'".into()));
                    }
                    return Ok(Call(f, Arc::new(e)));
                }
                variable(&name).map(Var)
            }
            Tok::Op(c) => Err(SlagError::Expr(format!("unexpected '{c}'"))),
        }
    }
}

fn variable(name: &str) -> Result<usize> {
    match name {
        "x" => return Ok(0),
        "y" => return Ok(1),
        "z" => return Ok(2),
        _ => {}
    }
    for prefix in ["x", "u"] {
        if let Some(rest) = name.strip_prefix(prefix) {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 {
                    return Ok(k - 1);
                }
            }
        }
    }
    Err(SlagError::Expr(format!("unknown identifier '{name}'")))
}

pub fn parse(src: &str) -> Result<Expr> {
    Expr::parse(src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_eval() {
        let e = parse("2*x1^2 - 3*x2 + exp(x1*x2)/2").unwrap();
        let v = e.eval(&[0.5, 2.0]);
        assert!((v - (0.5 - 6.0 + 1f64.exp() / 2.0)).abs() < 1e-14);
        assert_eq!(parse("-2^2").unwrap().eval(&[]), -4.0);
        assert_eq!(parse("2^3^2").unwrap().eval(&[]), 512.0);
        assert!((parse("cos(pi)").unwrap().eval(&[]) + 1.0).abs() < 1e-15);
        assert_eq!(parse("1.5e2 + u2").unwrap().eval(&[0.0, 1.0]), 151.0);
        assert_eq!(parse("x*y").unwrap().arity(), 2);
    }

    #[test]
    fn parse_errors() {
        assert!(parse("2 +").is_err());
        assert!(parse("foo(1)").is_err());
        assert!(parse("(1").is_err());
        assert!(parse("x0").is_err());
        assert!(parse("1 $ 2").is_err());
    }

    #[test]
    fn derivatives_of_known_functions() {
        let g = parse("0.5*(x1*sqrt(x1^2+1) + asinh(x1))").unwrap();
        let d = g.diff(0);
        for x in [0.3, 1.0, 2.5] {
            assert!((d.eval(&[x]) - (x * x + 1.0f64).sqrt()).abs() < 1e-13);
        }
    }

    fn fd(e: &Expr, x: &[f64], i: usize) -> f64 {
        let h = 1e-5;
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[i] += h;
        b[i] -= h;
        (e.eval(&a) - e.eval(&b)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn symbolic_matches_finite_difference(x in 0.2..1.5f64, y in 0.2..1.5f64, k in 0usize..8) {
            let srcs = [
                "x1^3*x2 - sin(x2)/x1",
                "exp(x1)*cosh(x2) + log(x1+x2)",
                "sqrt(x1^2 + x2^2) * tanh(x1 - x2)",
                "x1^x2",
                "atanh(x1/4) + acosh(1 + x2)",
                "tan(x1/3) * sinh(x2)",
                "abs(x1 - x2) + 1/(x1*x2)",
                "(x1 + 2*x2)^4 / 7",
            ];
            let e = parse(srcs[k]).unwrap();
            for i in 0..2 {
                let s = e.diff(i).eval(&[x, y]);
                let n = fd(&e, &[x, y], i);
                prop_assert!((s - n).abs() <= 1e-6 * (1.0 + s.abs()), "{} d{}: {} vs {}", srcs[k], i, s, n);
            }
        }
    }
}
