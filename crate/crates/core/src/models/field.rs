use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::point::Point;
use super::space::{ModelSpace, SpaceKind};
use super::su2;

/// A smooth vector field in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorField {
    /// Components given symbolically.
    Components(Vec<Expr>),
    /// Left-invariant field on SU(2) generated by an algebra element.
    LeftInvariant([f64; 3]),
}

impl VectorField {
    pub fn zero(dim: usize) -> Self {
        VectorField::Components(vec![Expr::zero(); dim])
    }

    pub fn constant(v: &[f64]) -> Self {
        VectorField::Components(v.iter().map(|&c| Expr::c(c)).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorField::Components(c) => c.len(),
            VectorField::LeftInvariant(_) => 3,
        }
    }

    pub fn eval(&self, x: &Point) -> Point {
        match self {
            VectorField::Components(c) => {
                let mut out = Point::zeros(c.len());
                for (o, e) in out.as_mut_slice().iter_mut().zip(c) {
                    *o = e.eval(x.as_slice());
                }
                out
            }
            VectorField::LeftInvariant(a) => su2::left_invariant(a, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VectorField::Components(c) => c.iter().all(Expr::is_zero),
            VectorField::LeftInvariant(a) => a.iter().all(|v| *v == 0.0),
        }
    }

    pub fn negated(&self) -> VectorField {
        match self {
            VectorField::Components(c) => {
                VectorField::Components(c.iter().map(|e| -e.clone()).collect())
            }
            VectorField::LeftInvariant(a) => VectorField::LeftInvariant(a.map(|v| -v)),
        }
    }

    /// Algebra generator of a left-invariant field.
    pub fn generator(&self) -> Option<[f64; 3]> {
        match self {
            VectorField::LeftInvariant(a) => Some(*a),
            _ => None,
        }
    }

    /// Exact Jacobian `J[i][j] = ∂X^i/∂x^j` as expressions, when available.
    pub fn symbolic_jacobian(&self) -> Option<Vec<Vec<Expr>>> {
        match self {
            VectorField::Components(c) => {
                let n = c.len();
                Some(c.iter().map(|e| (0..n).map(|j| e.diff(j)).collect()).collect())
            }
            VectorField::LeftInvariant(_) => None,
        }
    }

    /// `[self, other]` computed exactly, when both fields admit it.
    ///
    /// Component fields use `[X,Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`;
    /// left-invariant fields use the algebra bracket.
    pub fn symbolic_bracket(&self, other: &VectorField) -> Option<VectorField> {
        match (self, other) {
            (VectorField::Components(x), VectorField::Components(y)) => {
                if x.len() != y.len() {
                    return None;
                }
                let n = x.len();
                let comps = (0..n)
                    .map(|i| {
                        (0..n).fold(Expr::zero(), |acc, j| {
                            acc + x[j].clone() * y[i].diff(j) - y[j].clone() * x[i].diff(j)
                        })
                    })
                    .collect();
                Some(VectorField::Components(comps))
            }
            (VectorField::LeftInvariant(a), VectorField::LeftInvariant(b)) => {
                Some(VectorField::LeftInvariant(su2::cross(a, b)))
            }
            _ => None,
        }
    }

    /// Exact divergence with respect to the space's reference volume.
    pub fn symbolic_divergence(&self, space: &ModelSpace) -> Option<Expr> {
        match (self, space.kind) {
            (VectorField::Components(c), SpaceKind::Torus2 | SpaceKind::Heisenberg3) => {
                Some((0..c.len()).fold(Expr::zero(), |acc, j| acc + c[j].diff(j)))
            }
            // Haar measure is bi-invariant, so left-invariant fields are divergence free.
            (VectorField::LeftInvariant(_), SpaceKind::Su2) => Some(Expr::zero()),
            _ => None,
        }
    }
}

/// Finite-difference step `h = base · (1 + |x|)`.
pub fn fd_step(base: f64, x: &Point) -> f64 {
    base * (1.0 + x.norm())
}

/// Default relative step for first-derivative stencils.
pub const FD_BASE_STEP: f64 = 1e-5;

/// `[X,Y](x) = (DY)X − (DX)Y` by central differences with step `h`.
pub fn fd_bracket<F, G>(f: F, g: G, x: &Point, h: f64) -> Point
where
    F: Fn(&Point) -> Point,
    G: Fn(&Point) -> Point,
{
    let fx = f(x);
    let gx = g(x);
    let dir = |field: &dyn Fn(&Point) -> Point, v: &Point| -> Point {
        // (D field)·v via a central difference along v
        let vn = v.norm();
        if vn == 0.0 {
            return Point::zeros(x.dim());
        }
        let s = h / vn;
        (field(&x.axpy(s, v)) - field(&x.axpy(-s, v))) * (0.5 / s)
    };
    dir(&g, &fx) - dir(&f, &gx)
}

/// Divergence with respect to density `mu` by central differences:
/// `(1/μ) Σ_j ∂_j(μ X^j)`.
pub fn fd_divergence<F, M>(f: F, mu: M, x: &Point, h: f64) -> f64
where
    F: Fn(&Point) -> Point,
    M: Fn(&Point) -> f64,
{
    let n = x.dim();
    let mut acc = 0.0;
    for j in 0..n {
        let e = Point::basis(n, j);
        let xp = x.axpy(h, &e);
        let xm = x.axpy(-h, &e);
        acc += (mu(&xp) * f(&xp)[j] - mu(&xm) * f(&xm)[j]) / (2.0 * h);
    }
    acc / mu(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grushin_x2() -> VectorField {
        VectorField::Components(vec![Expr::zero(), (Expr::c(2.0 * PI) * Expr::var(0)).sin()])
    }

    #[test]
    fn torus_bracket_is_two_pi_cos() {
        let x1 = VectorField::constant(&[1.0, 0.0]);
        let b = x1.symbolic_bracket(&grushin_x2()).unwrap();
        let p = Point::from([0.1, 0.4]);
        let v = b.eval(&p);
        assert!(v[0].abs() < 1e-15);
        assert!((v[1] - 2.0 * PI * (2.0 * PI * 0.1).cos()).abs() < 1e-12);
    }

    #[test]
    fn self_bracket_vanishes() {
        let f = grushin_x2();
        let b = f.symbolic_bracket(&f).unwrap();
        assert!(b.eval(&Point::from([0.3, 0.2])).norm() < 1e-15);
        let fd = fd_bracket(|p| f.eval(p), |p| f.eval(p), &Point::from([0.3, 0.2]), 1e-5);
        assert!(fd.norm() < 1e-12);
    }

    #[test]
    fn su2_divergence_vanishes_against_haar() {
        let f = VectorField::LeftInvariant([1.0, 0.0, 0.0]);
        for p in [[0.3, -0.2, 0.5], [1.5, 0.4, -2.0]] {
            let p = Point::from(p);
            let d = fd_divergence(|q| f.eval(q), su2::haar_density, &p, 1e-5);
            assert!(d.abs() < 1e-6, "div at {p:?} = {d}");
        }
    }
}
