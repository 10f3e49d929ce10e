//! A small expression language for `φ` and the components of `F`.
//!
//! Syntax: numbers, variables `x0, x1, …` (`x` alone means `x0`), `pi`,
//! `+ - * / ^`, and the functions `sin cos sqrt abs min max` plus
//! `pw(s, theta, below, above)`, which evaluates `below` when `s < theta`
//! and `above` otherwise.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative number {0}")]
    SqrtNegative(f64),
    #[error("result is not a real number: {0}")]
    Domain(String),
    #[error("derivative undefined at a kink of {0}")]
    Kink(&'static str),
    #[error("variable x{index} out of range for dimension {dim}")]
    VarOutOfRange { index: usize, dim: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

type R<T> = std::result::Result<T, ExprError>;

/// What a threshold node does when its switch argument sits exactly on the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KinkRule {
    /// Use the `above` branch (user-written `pw`).
    Above,
    /// Refuse to evaluate (one-sided derivatives of `abs`, `min`, `max`, `pw`).
    Error(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
    Abs(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Piecewise {
        switch: Box<Expr>,
        threshold: f64,
        below: Box<Expr>,
        above: Box<Expr>,
        rule: KinkRule,
    },
}

use Expr::*;

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

// constructors with light constant folding, so derivatives stay small
fn add(x: Expr, y: Expr) -> Expr {
    match (&x, &y) {
        (Const(a), Const(c)) => Const(a + c),
        (Const(a), _) if *a == 0.0 => y,
        (_, Const(c)) if *c == 0.0 => x,
        _ => Add(b(x), b(y)),
    }
}

fn sub(x: Expr, y: Expr) -> Expr {
    match (&x, &y) {
        (Const(a), Const(c)) => Const(a - c),
        (_, Const(c)) if *c == 0.0 => x,
        (Const(a), _) if *a == 0.0 => neg(y),
        _ => Sub(b(x), b(y)),
    }
}

fn mul(x: Expr, y: Expr) -> Expr {
    match (&x, &y) {
        (Const(a), Const(c)) => Const(a * c),
        (Const(a), _) | (_, Const(a)) if *a == 0.0 => Const(0.0),
        (Const(a), _) if *a == 1.0 => y,
        (_, Const(c)) if *c == 1.0 => x,
        _ => Mul(b(x), b(y)),
    }
}

fn div(x: Expr, y: Expr) -> Expr {
    match (&x, &y) {
        (Const(a), _) if *a == 0.0 => Const(0.0),
        (_, Const(c)) if *c == 1.0 => x,
        _ => Div(b(x), b(y)),
    }
}

fn neg(x: Expr) -> Expr {
    match x {
        Const(a) => Const(-a),
        Neg(inner) => *inner,
        other => Neg(b(other)),
    }
}

impl Expr {
    pub fn parse(src: &str) -> R<Expr> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Const(_) => 0,
            Var(i) => i + 1,
            Neg(a) | Sin(a) | Cos(a) | Sqrt(a) | Abs(a) => a.arity(),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) | Min(a, c) | Max(a, c) => a.arity().max(c.arity()),
            Piecewise { switch, below, above, .. } => switch.arity().max(below.arity()).max(above.arity()),
        }
    }

    pub fn depends_on(&self, i: usize) -> bool {
        match self {
            Const(_) => false,
            Var(j) => *j == i,
            Neg(a) | Sin(a) | Cos(a) | Sqrt(a) | Abs(a) => a.depends_on(i),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) | Min(a, c) | Max(a, c) => a.depends_on(i) || c.depends_on(i),
            Piecewise { switch, below, above, .. } => switch.depends_on(i) || below.depends_on(i) || above.depends_on(i),
        }
    }

    pub fn eval(&self, x: &[f64]) -> R<f64> {
        let v = match self {
            Const(c) => *c,
            Var(i) => *x.get(*i).ok_or(ExprError::VarOutOfRange { index: *i, dim: x.len() })?,
            Neg(a) => -a.eval(x)?,
            Add(a, c) => a.eval(x)? + c.eval(x)?,
            Sub(a, c) => a.eval(x)? - c.eval(x)?,
            Mul(a, c) => a.eval(x)? * c.eval(x)?,
            Div(a, c) => {
                let d = c.eval(x)?;
                if d == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                a.eval(x)? / d
            }
            Pow(a, c) => {
                let base = a.eval(x)?;
                let e = c.eval(x)?;
                if base == 0.0 && e < 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                base.powf(e)
            }
            Sin(a) => a.eval(x)?.sin(),
            Cos(a) => a.eval(x)?.cos(),
            Sqrt(a) => {
                let v = a.eval(x)?;
                if v < 0.0 {
                    return Err(ExprError::SqrtNegative(v));
                }
                v.sqrt()
            }
            Abs(a) => a.eval(x)?.abs(),
            Min(a, c) => a.eval(x)?.min(c.eval(x)?),
            Max(a, c) => a.eval(x)?.max(c.eval(x)?),
            Piecewise { switch, threshold, below, above, rule } => {
                let s = switch.eval(x)?;
                if s == *threshold {
                    match rule {
                        KinkRule::Above => above.eval(x)?,
                        KinkRule::Error(what) => return Err(ExprError::Kink(what)),
                    }
                } else if s < *threshold {
                    below.eval(x)?
                } else {
                    above.eval(x)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("{self} evaluated to {v}")))
        }
    }

    /// Symbolic partial derivative with respect to `x_i`.
    pub fn diff(&self, i: usize) -> R<Expr> {
        Ok(match self {
            Const(_) => Const(0.0),
            Var(j) => Const(if *j == i { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(i)?),
            Add(a, c) => add(a.diff(i)?, c.diff(i)?),
            Sub(a, c) => sub(a.diff(i)?, c.diff(i)?),
            Mul(a, c) => add(mul(a.diff(i)?, (**c).clone()), mul((**a).clone(), c.diff(i)?)),
            Div(a, c) => {
                let num = sub(mul(a.diff(i)?, (**c).clone()), mul((**a).clone(), c.diff(i)?));
                div(num, Pow(c.clone(), b(Const(2.0))))
            }
            Pow(a, c) => {
                if c.depends_on(i) {
                    return Err(ExprError::Unsupported("derivative of pow with an exponent depending on the variable".into()));
                }
                let da = a.diff(i)?;
                match **c {
                    Const(e) if e == 0.0 => Const(0.0),
                    Const(e) if e == 1.0 => da,
                    Const(e) if e == 2.0 => mul(mul(Const(2.0), (**a).clone()), da),
                    Const(e) => mul(mul(Const(e), Pow(a.clone(), b(Const(e - 1.0)))), da),
                    _ => mul(mul((**c).clone(), Pow(a.clone(), b(sub((**c).clone(), Const(1.0))))), da),
                }
            }
            Sin(a) => mul(Cos(a.clone()), a.diff(i)?),
            Cos(a) => mul(neg(Sin(a.clone())), a.diff(i)?),
            Sqrt(a) => div(a.diff(i)?, mul(Const(2.0), Sqrt(a.clone()))),
            Abs(a) => {
                let da = a.diff(i)?;
                Piecewise {
                    switch: a.clone(),
                    threshold: 0.0,
                    below: b(neg(da.clone())),
                    above: b(da),
                    rule: KinkRule::Error("abs"),
                }
            }
            Min(a, c) => Piecewise {
                switch: b(sub((**a).clone(), (**c).clone())),
                threshold: 0.0,
                below: b(a.diff(i)?),
                above: b(c.diff(i)?),
                rule: KinkRule::Error("min"),
            },
            Max(a, c) => Piecewise {
                switch: b(sub((**a).clone(), (**c).clone())),
                threshold: 0.0,
                below: b(c.diff(i)?),
                above: b(a.diff(i)?),
                rule: KinkRule::Error("max"),
            },
            Piecewise { switch, threshold, below, above, rule } => Piecewise {
                switch: switch.clone(),
                threshold: *threshold,
                below: b(below.diff(i)?),
                above: b(above.diff(i)?),
                rule: match rule {
                    KinkRule::Above => KinkRule::Error("pw"),
                    r => *r,
                },
            },
        })
    }

    pub fn gradient(&self, n: usize) -> R<Vec<Expr>> {
        (0..n).map(|i| self.diff(i)).collect()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Var(i) => write!(f, "x{i}"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, c) => write!(f, "({a} + {c})"),
            Sub(a, c) => write!(f, "({a} - {c})"),
            Mul(a, c) => write!(f, "({a} * {c})"),
            Div(a, c) => write!(f, "({a} / {c})"),
            Pow(a, c) => write!(f, "({a} ^ {c})"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
            Abs(a) => write!(f, "abs({a})"),
            Min(a, c) => write!(f, "min({a}, {c})"),
            Max(a, c) => write!(f, "max({a}, {c})"),
            Piecewise { switch, threshold, below, above, .. } => {
                write!(f, "pw({switch}, {threshold:?}, {below}, {above})")
            }
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> R<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> R<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Add(b(lhs), b(self.term()?));
            } else if self.eat(b'-') {
                lhs = Sub(b(lhs), b(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> R<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Mul(b(lhs), b(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Div(b(lhs), b(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> R<Expr> {
        if self.eat(b'-') {
            return Ok(Neg(b(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> R<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let e = self.unary()?;
            return Ok(Pow(b(base), b(e)));
        }
        Ok(base)
    }

    fn number(&mut self) -> R<f64> {
        let start = self.pos;
        let s = self.s;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let before = self.pos;
            digits(&mut self.pos);
            if self.pos == before {
                self.pos = save;
            }
        }
        let txt = std::str::from_utf8(&s[start..self.pos]).expect("ascii");
        txt.parse::<f64>().map_err(|_| ExprError::Parse {
            pos: start,
            msg: format!("bad number {txt:?}"),
        })
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn args(&mut self) -> R<Vec<Expr>> {
        self.expect(b'(')?;
        let mut out = vec![self.expr()?];
        while self.eat(b',') {
            out.push(self.expr()?);
        }
        self.expect(b')')?;
        Ok(out)
    }

    fn atom(&mut self) -> R<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let name = self.ident();
                if name == "x" {
                    return Ok(Var(0));
                }
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(i) = rest.parse::<usize>() {
                        return Ok(Var(i));
                    }
                }
                if name == "pi" {
                    return Ok(Const(std::f64::consts::PI));
                }
                let arity = match name.as_str() {
                    "sin" | "cos" | "sqrt" | "abs" => 1,
                    "min" | "max" => 2,
                    "pw" => 4,
                    _ => {
                        return Err(ExprError::Parse {
                            pos: start,
                            msg: format!("unknown identifier {name:?}"),
                        })
                    }
                };
                let mut a = self.args()?;
                if a.len() != arity {
                    return Err(ExprError::Parse {
                        pos: start,
                        msg: format!("{name} takes {arity} argument(s), got {}", a.len()),
                    });
                }
                Ok(match name.as_str() {
                    "sin" => Sin(b(a.remove(0))),
                    "cos" => Cos(b(a.remove(0))),
                    "sqrt" => Sqrt(b(a.remove(0))),
                    "abs" => Abs(b(a.remove(0))),
                    "min" => {
                        let x = a.remove(0);
                        Min(b(x), b(a.remove(0)))
                    }
                    "max" => {
                        let x = a.remove(0);
                        Max(b(x), b(a.remove(0)))
                    }
                    _ => {
                        let switch = a.remove(0);
                        let Const(threshold) = a.remove(0) else {
                            return Err(ExprError::Parse {
                                pos: start,
                                msg: "pw threshold must be a number".into(),
                            });
                        };
                        let below = a.remove(0);
                        let above = a.remove(0);
                        Piecewise {
                            switch: b(switch),
                            threshold,
                            below: b(below),
                            above: b(above),
                            rule: KinkRule::Above,
                        }
                    }
                })
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2*3", &[]), 7.0);
        assert_eq!(ev("-x^2", &[3.0]), -9.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("x0 - x1 - x1", &[5.0, 1.0]), 3.0);
        assert!((ev("sin(pi/2)", &[]) - 1.0).abs() < 1e-15);
        assert_eq!(ev("1.5e2", &[]), 150.0);
        assert_eq!(ev("pw(x0, 0, -1, 1)", &[0.0]), 1.0);
    }

    #[test]
    fn evaluation_errors() {
        let e = Expr::parse("1/x").unwrap();
        assert_eq!(e.eval(&[0.0]), Err(ExprError::DivisionByZero));
        let e = Expr::parse("sqrt(x)").unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(ExprError::SqrtNegative(_))));
        assert!(Expr::parse("2 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("x0 x1").is_err());
    }

    #[test]
    fn kinks_are_errors() {
        let d = Expr::parse("abs(x)").unwrap().diff(0).unwrap();
        assert_eq!(d.eval(&[2.0]).unwrap(), 1.0);
        assert_eq!(d.eval(&[-2.0]).unwrap(), -1.0);
        assert_eq!(d.eval(&[0.0]), Err(ExprError::Kink("abs")));
        let d = Expr::parse("max(x0, 2*x0 - 1)").unwrap().diff(0).unwrap();
        assert_eq!(d.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(d.eval(&[2.0]).unwrap(), 2.0);
        assert!(d.eval(&[1.0]).is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["2*x0 + x0^3", "-(x1 - 3)/sqrt(x0)", "pw(x0, 0.5, sin(x0), cos(x1))", "min(x0, -2)"] {
            let e = Expr::parse(s).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            for x in [[0.7, 1.3], [2.0, -0.4]] {
                let (a, c) = (e.eval(&x), back.eval(&x));
                assert_eq!(a.is_ok(), c.is_ok());
                if let (Ok(a), Ok(c)) = (a, c) {
                    assert_eq!(a, c);
                }
            }
        }
    }

    // random smooth expressions in two variables
    fn smooth_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x0".to_string()),
            Just("x1".to_string()),
            (-3.0f64..3.0).prop_map(|c| format!("({c})")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, c)| format!("({a} + {c})")),
                (inner.clone(), inner.clone()).prop_map(|(a, c)| format!("({a} * {c})")),
                (inner.clone(), inner.clone()).prop_map(|(a, c)| format!("({a} - {c})")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("cos({a})")),
                inner.clone().prop_map(|a| format!("({a})^2")),
                inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
                (inner.clone(), inner).prop_map(|(a, c)| format!("({a}) / (2 + cos({c}))")),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn symbolic_gradient_matches_central_differences(
            src in smooth_expr(),
            x in proptest::collection::vec(-1.5f64..1.5, 2),
        ) {
            let e = Expr::parse(&src).unwrap();
            for i in 0..2 {
                let d = e.diff(i).unwrap().eval(&x).unwrap();
                let h = 1e-6 * x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
                let scale = d.abs().max(fd.abs()).max(1.0);
                prop_assert!((d - fd).abs() <= 1e-5 * scale, "{src}: {d} vs {fd}");
            }
        }
    }
}
