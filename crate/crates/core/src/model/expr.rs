//! Closed-form scalar expressions with exact partial derivatives.
//!
//! `Expr` is the single representation for every right-hand side in the
//! library: flow/jump map components, constraint functions `h(x) <= 0`,
//! and Lyapunov-like functions. Supported nodes are variables, constants,
//! n-ary sums and products, integer powers, `abs`, `min`, `max`, `sin`,
//! `cos` and negation.
//!
//! Evaluation is total on real inputs. The gradient is exact wherever the
//! expression is differentiable; at a kink of `abs`/`min`/`max` the
//! gradient query returns [`ExprError::Nonsmooth`] instead of silently
//! picking a one-sided value.
//!
//! The textual form is a prefix s-expression, e.g. `(+ 1 (pow (var 0) 2))`.
//! Constants are printed with shortest round-trip formatting so that
//! `parse(print(e))` evaluates bit-for-bit identically to `e`.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum ExprError {
    #[error("variable index {index} out of range for input of dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },
    #[error("expression is nonsmooth at the evaluation point (kink in {node})")]
    Nonsmooth { node: &'static str },
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
}

/// Expression tree over variables `(var 0) .. (var n-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    /// Integer power; negative exponents evaluate via `f64::powi`.
    Pow(Box<Expr>, i32),
    Abs(Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    /// Largest variable index referenced, if any variable occurs.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Const(_) => None,
            Expr::Sum(cs) | Expr::Product(cs) | Expr::Min(cs) | Expr::Max(cs) => {
                cs.iter().filter_map(|c| c.max_var()).max()
            }
            Expr::Pow(c, _) | Expr::Abs(c) | Expr::Sin(c) | Expr::Cos(c) | Expr::Neg(c) => {
                c.max_var()
            }
        }
    }

    /// Evaluate at `x`. Errors only on a variable index out of range.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        match self {
            Expr::Var(i) => x
                .get(*i)
                .copied()
                .ok_or(ExprError::DimensionMismatch { index: *i, dim: x.len() }),
            Expr::Const(v) => Ok(*v),
            Expr::Sum(cs) => {
                let mut acc = 0.0;
                for c in cs {
                    acc += c.eval(x)?;
                }
                Ok(acc)
            }
            Expr::Product(cs) => {
                let mut acc = 1.0;
                for c in cs {
                    acc *= c.eval(x)?;
                }
                Ok(acc)
            }
            Expr::Pow(c, k) => Ok(c.eval(x)?.powi(*k)),
            Expr::Abs(c) => Ok(c.eval(x)?.abs()),
            Expr::Min(cs) => {
                let mut acc = f64::INFINITY;
                for c in cs {
                    acc = acc.min(c.eval(x)?);
                }
                Ok(acc)
            }
            Expr::Max(cs) => {
                let mut acc = f64::NEG_INFINITY;
                for c in cs {
                    acc = acc.max(c.eval(x)?);
                }
                Ok(acc)
            }
            Expr::Sin(c) => Ok(c.eval(x)?.sin()),
            Expr::Cos(c) => Ok(c.eval(x)?.cos()),
            Expr::Neg(c) => Ok(-c.eval(x)?),
        }
    }

    /// Value and exact gradient at `x`.
    ///
    /// `abs` reports a kink when its argument is exactly zero; `min`/`max`
    /// report a kink when two children tie for the extremum with different
    /// derivatives.
    pub fn eval_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        let n = x.len();
        match self {
            Expr::Var(i) => {
                if *i >= n {
                    return Err(ExprError::DimensionMismatch { index: *i, dim: n });
                }
                let mut g = vec![0.0; n];
                g[*i] = 1.0;
                Ok((x[*i], g))
            }
            Expr::Const(v) => Ok((*v, vec![0.0; n])),
            Expr::Sum(cs) => {
                let mut val = 0.0;
                let mut g = vec![0.0; n];
                for c in cs {
                    let (v, gc) = c.eval_grad(x)?;
                    val += v;
                    for (gi, gci) in g.iter_mut().zip(&gc) {
                        *gi += gci;
                    }
                }
                Ok((val, g))
            }
            Expr::Product(cs) => {
                // d(prod) = sum_i (prod_{j != i} v_j) dv_i, accumulated pairwise
                let mut val = 1.0;
                let mut g = vec![0.0; n];
                for c in cs {
                    let (v, gc) = c.eval_grad(x)?;
                    for (gi, gci) in g.iter_mut().zip(&gc) {
                        *gi = *gi * v + gci * val;
                    }
                    val *= v;
                }
                Ok((val, g))
            }
            Expr::Pow(c, k) => {
                let (v, gc) = c.eval_grad(x)?;
                let dk = f64::from(*k) * v.powi(*k - 1);
                Ok((v.powi(*k), gc.into_iter().map(|gi| dk * gi).collect()))
            }
            Expr::Abs(c) => {
                let (v, gc) = c.eval_grad(x)?;
                if v == 0.0 {
                    return Err(ExprError::Nonsmooth { node: "abs" });
                }
                let s = v.signum();
                Ok((v.abs(), gc.into_iter().map(|gi| s * gi).collect()))
            }
            Expr::Min(cs) => extremum_grad(cs, x, true),
            Expr::Max(cs) => extremum_grad(cs, x, false),
            Expr::Sin(c) => {
                let (v, gc) = c.eval_grad(x)?;
                let d = v.cos();
                Ok((v.sin(), gc.into_iter().map(|gi| d * gi).collect()))
            }
            Expr::Cos(c) => {
                let (v, gc) = c.eval_grad(x)?;
                let d = -v.sin();
                Ok((v.cos(), gc.into_iter().map(|gi| d * gi).collect()))
            }
            Expr::Neg(c) => {
                let (v, gc) = c.eval_grad(x)?;
                Ok((-v, gc.into_iter().map(|gi| -gi).collect()))
            }
        }
    }

    /// Gradient only; see [`Expr::eval_grad`].
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        Ok(self.eval_grad(x)?.1)
    }

    /// Substitute fixed values for variables with index `>= from_index`,
    /// shifting no other indices, and fold constant subtrees.
    ///
    /// Used to slice joint-space objects (state, disturbance) at a fixed
    /// disturbance value: variable `from_index + k` is replaced by
    /// `values[k]`.
    pub fn substitute_tail(&self, from_index: usize, values: &[f64]) -> Expr {
        let subst = |c: &Expr| c.substitute_tail(from_index, values);
        let folded = match self {
            Expr::Var(i) => {
                if *i >= from_index && *i - from_index < values.len() {
                    Expr::Const(values[*i - from_index])
                } else {
                    Expr::Var(*i)
                }
            }
            Expr::Const(v) => Expr::Const(*v),
            Expr::Sum(cs) => Expr::Sum(cs.iter().map(subst).collect()),
            Expr::Product(cs) => Expr::Product(cs.iter().map(subst).collect()),
            Expr::Pow(c, k) => Expr::Pow(Box::new(subst(c)), *k),
            Expr::Abs(c) => Expr::Abs(Box::new(subst(c))),
            Expr::Min(cs) => Expr::Min(cs.iter().map(subst).collect()),
            Expr::Max(cs) => Expr::Max(cs.iter().map(subst).collect()),
            Expr::Sin(c) => Expr::Sin(Box::new(subst(c))),
            Expr::Cos(c) => Expr::Cos(Box::new(subst(c))),
            Expr::Neg(c) => Expr::Neg(Box::new(subst(c))),
        };
        // Fold a now-constant subtree. eval on [] succeeds iff no vars remain,
        // and performs the same operations in the same order as direct
        // evaluation would, so folding preserves results bit-for-bit.
        if folded.max_var().is_none() {
            if let Ok(v) = folded.eval(&[]) {
                return Expr::Const(v);
            }
        }
        folded
    }

    /// Parse the prefix s-expression form.
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(ExprError::Parse { at: p.pos, msg: "trailing input".into() });
        }
        Ok(e)
    }
}

fn extremum_grad(cs: &[Expr], x: &[f64], is_min: bool) -> Result<(f64, Vec<f64>), ExprError> {
    let node = if is_min { "min" } else { "max" };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in cs {
        let (v, g) = c.eval_grad(x)?;
        match &best {
            None => best = Some((v, g)),
            Some((bv, bg)) => {
                if v == *bv {
                    // Tie: a genuine kink unless both branches agree exactly.
                    if g != *bg {
                        return Err(ExprError::Nonsmooth { node });
                    }
                } else if (is_min && v < *bv) || (!is_min && v > *bv) {
                    best = Some((v, g));
                }
            }
        }
    }
    best.ok_or(ExprError::Parse { at: 0, msg: format!("empty {node}") })
}

// ---- construction helpers -------------------------------------------------

/// `(var i)`
pub fn var(i: usize) -> Expr {
    Expr::Var(i)
}

/// Constant literal.
pub fn con(v: f64) -> Expr {
    Expr::Const(v)
}

pub fn pow(e: Expr, k: i32) -> Expr {
    Expr::Pow(Box::new(e), k)
}

pub fn abs(e: Expr) -> Expr {
    Expr::Abs(Box::new(e))
}

pub fn sin(e: Expr) -> Expr {
    Expr::Sin(Box::new(e))
}

pub fn cos(e: Expr) -> Expr {
    Expr::Cos(Box::new(e))
}

pub fn min2(a: Expr, b: Expr) -> Expr {
    Expr::Min(vec![a, b])
}

pub fn max2(a: Expr, b: Expr) -> Expr {
    Expr::Max(vec![a, b])
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Sum(mut a), Expr::Sum(b)) => {
                a.extend(b);
                Expr::Sum(a)
            }
            (Expr::Sum(mut a), b) => {
                a.push(b);
                Expr::Sum(a)
            }
            (a, b) => Expr::Sum(vec![a, b]),
        }
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + Expr::Neg(Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Product(mut a), Expr::Product(b)) => {
                a.extend(b);
                Expr::Product(a)
            }
            (Expr::Product(mut a), b) => {
                a.push(b);
                Expr::Product(a)
            }
            (a, b) => Expr::Product(vec![a, b]),
        }
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

// ---- textual form ----------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, op: &str, cs: &[Expr]) -> fmt::Result {
            write!(f, "({op}")?;
            for c in cs {
                write!(f, " {c}")?;
            }
            write!(f, ")")
        }
        match self {
            Expr::Var(i) => write!(f, "(var {i})"),
            Expr::Const(v) => {
                if v.is_nan() {
                    write!(f, "nan")
                } else if v.is_infinite() {
                    write!(f, "{}", if *v > 0.0 { "inf" } else { "-inf" })
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Sum(cs) => list(f, "+", cs),
            Expr::Product(cs) => list(f, "*", cs),
            Expr::Pow(c, k) => write!(f, "(pow {c} {k})"),
            Expr::Abs(c) => write!(f, "(abs {c})"),
            Expr::Min(cs) => list(f, "min", cs),
            Expr::Max(cs) => list(f, "max", cs),
            Expr::Sin(c) => write!(f, "(sin {c})"),
            Expr::Cos(c) => write!(f, "(cos {c})"),
            Expr::Neg(c) => write!(f, "(neg {c})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Parse { at: self.pos, msg: msg.into() }
    }

    fn atom(&mut self) -> Result<&'a str, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected atom"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).map_err(|_| self.err("not utf-8"))?)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Err(self.err("unexpected end of input"));
        }
        if self.src[self.pos] != b'(' {
            let at = self.pos;
            let a = self.atom()?;
            return match a {
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "inf" => Ok(Expr::Const(f64::INFINITY)),
                "-inf" => Ok(Expr::Const(f64::NEG_INFINITY)),
                "nan" => Ok(Expr::Const(f64::NAN)),
                _ => a
                    .parse::<f64>()
                    .map(Expr::Const)
                    .map_err(|_| ExprError::Parse { at, msg: format!("bad atom `{a}`") }),
            };
        }
        self.pos += 1; // consume '('
        self.skip_ws();
        let op = self.atom()?;
        let mut args = Vec::new();
        loop {
            self.skip_ws();
            if self.pos >= self.src.len() {
                return Err(self.err("missing `)`"));
            }
            if self.src[self.pos] == b')' {
                self.pos += 1;
                break;
            }
            // `pow` and `var` take raw integer arguments
            if (op == "pow" && args.len() == 1) || (op == "var" && args.is_empty()) {
                let at = self.pos;
                let a = self.atom()?;
                let k: i64 = a
                    .parse()
                    .map_err(|_| ExprError::Parse { at, msg: format!("bad integer `{a}`") })?;
                args.push(Expr::Const(k as f64));
            } else {
                args.push(self.expr()?);
            }
        }
        let arity = |want: usize| -> Result<(), ExprError> {
            if args.len() != want {
                Err(ExprError::Parse {
                    at: self.pos,
                    msg: format!("`{op}` expects {want} argument(s), got {}", args.len()),
                })
            } else {
                Ok(())
            }
        };
        let nonempty = |_args: &Vec<Expr>| -> Result<(), ExprError> {
            if _args.is_empty() {
                Err(ExprError::Parse { at: self.pos, msg: format!("`{op}` expects arguments") })
            } else {
                Ok(())
            }
        };
        match op {
            "+" => {
                nonempty(&args)?;
                Ok(Expr::Sum(args))
            }
            "*" => {
                nonempty(&args)?;
                Ok(Expr::Product(args))
            }
            "-" => match args.len() {
                1 => Ok(Expr::Neg(Box::new(args.remove_first()))),
                0 => Err(self.err("`-` expects arguments")),
                _ => {
                    let mut it = args.into_iter();
                    let first = it.next().unwrap();
                    let mut terms = vec![first];
                    terms.extend(it.map(|e| Expr::Neg(Box::new(e))));
                    Ok(Expr::Sum(terms))
                }
            },
            "pow" => {
                arity(2)?;
                let k = match args[1] {
                    Expr::Const(v) => v as i32,
                    _ => unreachable!("pow exponent parsed as integer"),
                };
                Ok(Expr::Pow(Box::new(args.remove_first()), k))
            }
            "var" => {
                arity(1)?;
                let i = match args[0] {
                    Expr::Const(v) => v as usize,
                    _ => unreachable!("var index parsed as integer"),
                };
                Ok(Expr::Var(i))
            }
            "abs" => {
                arity(1)?;
                Ok(Expr::Abs(Box::new(args.remove_first())))
            }
            "min" => {
                nonempty(&args)?;
                Ok(Expr::Min(args))
            }
            "max" => {
                nonempty(&args)?;
                Ok(Expr::Max(args))
            }
            "sin" => {
                arity(1)?;
                Ok(Expr::Sin(Box::new(args.remove_first())))
            }
            "cos" => {
                arity(1)?;
                Ok(Expr::Cos(Box::new(args.remove_first())))
            }
            "neg" => {
                arity(1)?;
                Ok(Expr::Neg(Box::new(args.remove_first())))
            }
            other => Err(self.err(format!("unknown operator `{other}`"))),
        }
    }
}

trait RemoveFirst {
    fn remove_first(self) -> Expr;
}

impl RemoveFirst for Vec<Expr> {
    fn remove_first(mut self) -> Expr {
        self.remove(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_product() {
        // |x1| * x2 at (-2, 3)
        let e = abs(var(0)) * var(1);
        assert_eq!(e.eval(&[-2.0, 3.0]).unwrap(), 6.0);
    }

    #[test]
    fn polynomial_gradient() {
        // 1 + x1^2 at (0, 1): value 1, gradient (0, 0)
        let e = con(1.0) + pow(var(0), 2);
        let (v, g) = e.eval_grad(&[0.0, 1.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn normalized_ellipse_is_unitary() {
        let a = 3.012936;
        let b = 120.0;
        let e = pow(var(0) * con(1.0 / a), 2) + pow(var(1) * con(1.0 / b), 2);
        let v = e.eval(&[a, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kink_reports_nonsmooth() {
        let e = abs(var(0));
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(e.grad(&[0.0]).unwrap_err(), ExprError::Nonsmooth { node: "abs" });
        assert_eq!(e.grad(&[-2.0]).unwrap(), vec![-1.0]);
        let m = min2(var(0), con(1.0));
        assert_eq!(m.grad(&[1.0]).unwrap_err(), ExprError::Nonsmooth { node: "min" });
        assert_eq!(m.grad(&[0.5]).unwrap(), vec![1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let e = var(2);
        assert_eq!(
            e.eval(&[1.0, 2.0]).unwrap_err(),
            ExprError::DimensionMismatch { index: 2, dim: 2 }
        );
    }

    #[test]
    fn parse_print_round_trip() {
        let e = Expr::parse("(+ 1 (pow (var 0) 2))").unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), 10.0);
        let printed = e.to_string();
        let reparsed = Expr::parse(&printed).unwrap();
        assert_eq!(e, reparsed);

        // awkward constants survive the round trip bit-for-bit
        let c = con(0.1) * var(0) + con(-1.0e-17) + con(std::f64::consts::PI);
        let back = Expr::parse(&c.to_string()).unwrap();
        for x in [0.0, 1.0, -3.5, 1e9] {
            let a = c.eval(&[x]).unwrap();
            let b = back.eval(&[x]).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn parse_minus_and_errors() {
        let e = Expr::parse("(- (var 0) 1 2)").unwrap();
        assert_eq!(e.eval(&[5.0]).unwrap(), 2.0);
        let e = Expr::parse("(- (var 0))").unwrap();
        assert_eq!(e.eval(&[5.0]).unwrap(), -5.0);
        assert!(matches!(Expr::parse("(foo 1)"), Err(ExprError::Parse { .. })));
        assert!(matches!(Expr::parse("(+ 1"), Err(ExprError::Parse { .. })));
        assert!(matches!(Expr::parse("(+ 1 2) junk"), Err(ExprError::Parse { .. })));
    }

    #[test]
    fn substitute_tail_slices_disturbance() {
        // f(x0, x1, w) = w * x0 * |x0|, slice at w = 0.25
        let f = var(2) * var(0) * abs(var(0));
        let sliced = f.substitute_tail(2, &[0.25]);
        assert_eq!(sliced.max_var(), Some(0));
        let a = f.eval(&[-1.5, 9.0, 0.25]).unwrap();
        let b = sliced.eval(&[-1.5, 9.0]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn trig_gradient() {
        let e = sin(var(0)) * cos(var(1));
        let (_, g) = e.eval_grad(&[0.3, 0.7]).unwrap();
        let want0 = 0.3f64.cos() * 0.7f64.cos();
        let want1 = -0.3f64.sin() * 0.7f64.sin();
        assert!((g[0] - want0).abs() < 1e-15);
        assert!((g[1] - want1).abs() < 1e-15);
    }
}
