//! Scalar expressions in chart coordinates with exact differentiation.
//!
//! Only what the built-in models need: polynomial and trigonometric terms,
//! exponentials, and reciprocals (for logarithmic derivatives of densities).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Recip(Box<Expr>),
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn sin(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.sin()),
            e => Expr::Sin(Box::new(e)),
        }
    }

    pub fn cos(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.cos()),
            e => Expr::Cos(Box::new(e)),
        }
    }

    pub fn exp(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.exp()),
            e => Expr::Exp(Box::new(e)),
        }
    }

    pub fn recip(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(1.0 / v),
            Expr::Recip(inner) => *inner,
            e => Expr::Recip(Box::new(e)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Neg(a) => -a.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Recip(a) => 1.0 / a.eval(x),
        }
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(i) => Expr::c(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => a.diff(var) + b.diff(var),
            Expr::Mul(a, b) => a.diff(var) * (**b).clone() + (**a).clone() * b.diff(var),
            Expr::Neg(a) => -a.diff(var),
            Expr::Sin(a) => a.diff(var) * (**a).clone().cos(),
            Expr::Cos(a) => -(a.diff(var) * (**a).clone().sin()),
            Expr::Exp(a) => a.diff(var) * self.clone(),
            Expr::Recip(a) => -(a.diff(var) * ((**a).clone() * (**a).clone()).recip()),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Mul(a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Recip(a) => {
                a.max_var()
            }
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (Expr::Const(z), e) | (e, Expr::Const(z)) if z == 0.0 => e,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::zero(),
            (Expr::Const(o), e) | (e, Expr::Const(o)) if o == 1.0 => e,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(-v),
            Expr::Neg(inner) => *inner,
            e => Expr::Neg(Box::new(e)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 3] = ["x", "y", "z"];
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(i) => match NAMES.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{i}"),
            },
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Recip(a) => write!(f, "1/({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fd(e: &Expr, x: &[f64], var: usize) -> f64 {
        let h = 1e-6;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[var] += h;
        xm[var] -= h;
        (e.eval(&xp) - e.eval(&xm)) / (2.0 * h)
    }

    #[test]
    fn simplification_folds_constants() {
        let e = Expr::c(0.0) * Expr::var(0) + Expr::c(1.0) * Expr::var(1);
        assert_eq!(e, Expr::var(1));
        assert!(Expr::var(0).diff(1).is_zero());
        assert_eq!(-(-Expr::var(2)), Expr::var(2));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = Expr::var(0);
        let y = Expr::var(1);
        let exprs = vec![
            (Expr::c(2.0 * PI) * x.clone()).sin(),
            x.clone() * y.clone() + y.clone().cos(),
            (x.clone() * x.clone() - y.clone()).exp(),
            (Expr::c(2.0) + x.clone().sin()).recip(),
        ];
        let pt = [0.3, -0.7];
        for e in &exprs {
            for v in 0..2 {
                let exact = e.diff(v).eval(&pt);
                let approx = fd(e, &pt, v);
                assert!((exact - approx).abs() < 1e-7, "{e} d/d{v}: {exact} vs {approx}");
            }
        }
    }

    #[test]
    fn max_var_reports_dependencies() {
        assert_eq!(Expr::c(1.0).max_var(), None);
        assert_eq!((Expr::var(0) * Expr::var(2)).max_var(), Some(2));
    }
}
