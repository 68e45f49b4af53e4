//! SU(2) in exponential coordinates.
//!
//! The Lie algebra is identified with R³ through the basis `e_k = -i σ_k / 2`
//! (σ_k the Pauli matrices), so that `[e_i, e_j] = ε_ijk e_k`: the bracket is
//! the cross product. Group elements are unit quaternions; the chart is
//! `ξ ↦ exp(ξ·e)` on the open ball `|ξ| < 2π`.

use super::point::Point;

/// Unit quaternion `(w, x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat(pub [f64; 4]);

impl Quat {
    pub const IDENTITY: Quat = Quat([1.0, 0.0, 0.0, 0.0]);

    pub fn mul(&self, o: &Quat) -> Quat {
        let [a1, b1, c1, d1] = self.0;
        let [a2, b2, c2, d2] = o.0;
        Quat([
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ])
    }

    pub fn conj(&self) -> Quat {
        let [a, b, c, d] = self.0;
        Quat([a, -b, -c, -d])
    }

    pub fn normalized(&self) -> Quat {
        let n = self.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        Quat(self.0.map(|v| v / n))
    }
}

pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn arr(p: &Point) -> [f64; 3] {
    [p[0], p[1], p[2]]
}

/// Group exponential of the algebra element `ξ·e`.
pub fn exp(xi: &Point) -> Quat {
    let theta = xi.norm();
    let half = 0.5 * theta;
    // sin(θ/2)/θ, with its small-angle series
    let s = if theta < 1e-8 {
        0.5 - theta * theta / 48.0
    } else {
        half.sin() / theta
    };
    Quat([half.cos(), s * xi[0], s * xi[1], s * xi[2]])
}

/// Chart coordinates of a group element, `|ξ| ∈ [0, 2π]`.
pub fn log(q: &Quat) -> Point {
    let q = q.normalized();
    let [w, x, y, z] = q.0;
    let vn = (x * x + y * y + z * z).sqrt();
    let theta = 2.0 * vn.atan2(w);
    let scale = if vn < 1e-12 {
        // θ ≈ 2 vn / w near the identity
        2.0 / w
    } else {
        theta / vn
    };
    Point::new(&[scale * x, scale * y, scale * z])
}

/// Re-expresses chart coordinates through the group, mapping `|ξ| ≥ 2π`
/// back into the chart domain.
pub fn retract(xi: &Point) -> Point {
    log(&exp(xi))
}

/// Right-translation of `ξ` by `exp(a·e)`: chart of `exp(ξ) exp(a)`.
pub fn right_translate(xi: &Point, a: &Point) -> Point {
    log(&exp(xi).mul(&exp(a)))
}

/// Chart of `exp(x)^{-1} exp(y)`.
pub fn relative(x: &Point, y: &Point) -> Point {
    log(&exp(x).conj().mul(&exp(y)))
}

/// Coefficient `1/θ² − cot(θ/2)/(2θ)` of `[ξ]×²` in the inverse right Jacobian.
fn inv_jacobian_coeff(theta: f64) -> f64 {
    if theta < 1e-4 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        1.0 / (theta * theta) - (0.5 * theta).cos() / (0.5 * theta).sin() / (2.0 * theta)
    }
}

/// Left-invariant field generated by `a` at chart point `ξ`:
/// `d/ds log(exp(ξ) exp(s a))` at `s = 0`.
pub fn left_invariant(a: &[f64; 3], xi: &Point) -> Point {
    let v = arr(xi);
    let theta = xi.norm();
    let va = cross(&v, a);
    let vva = cross(&v, &va);
    let k = inv_jacobian_coeff(theta);
    Point::new(&[
        a[0] + 0.5 * va[0] + k * vva[0],
        a[1] + 0.5 * va[1] + k * vva[1],
        a[2] + 0.5 * va[2] + k * vva[2],
    ])
}

/// Haar density in exponential coordinates, normalized to 1 at the identity.
pub fn haar_density(xi: &Point) -> f64 {
    let theta = xi.norm();
    if theta < 1e-4 {
        1.0 - theta * theta / 12.0
    } else {
        2.0 * (1.0 - theta.cos()) / (theta * theta)
    }
}

/// Right Jacobian `J_r(ξ)`: chart velocity ↦ algebra velocity.
pub fn right_jacobian(xi: &Point) -> [[f64; 3]; 3] {
    let theta = xi.norm();
    let (a, b) = if theta < 1e-4 {
        (0.5 - theta * theta / 24.0, 1.0 / 6.0 - theta * theta / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / (theta * theta),
            (theta - theta.sin()) / (theta * theta * theta),
        )
    };
    // J_r = I - a [ξ]× + b [ξ]×²
    let v = arr(xi);
    let mut m = [[0.0; 3]; 3];
    for (j, col) in (0..3).map(|j| (j, Point::basis(3, j))) {
        let e = arr(&col);
        let ve = cross(&v, &e);
        let vve = cross(&v, &ve);
        for i in 0..3 {
            m[i][j] = e[i] - a * ve[i] + b * vve[i];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_log_round_trip() {
        for xi in [[0.1, -0.2, 0.3], [2.0, 1.0, -1.5], [0.0, 0.0, 0.0], [1e-9, 0.0, 2e-9]] {
            let p = Point::from(xi);
            let back = log(&exp(&p));
            assert!((back - p).norm() < 1e-12, "{p:?} -> {back:?}");
        }
    }

    #[test]
    fn bracket_of_generators_is_third_generator() {
        // exp(s e1) exp(s e2) exp(-s e1) exp(-s e2) ≈ exp(s² e3)
        let s = 1e-3;
        let g = exp(&Point::from([s, 0.0, 0.0]))
            .mul(&exp(&Point::from([0.0, s, 0.0])))
            .mul(&exp(&Point::from([-s, 0.0, 0.0])))
            .mul(&exp(&Point::from([0.0, -s, 0.0])));
        let xi = log(&g);
        assert!((xi[2] / (s * s) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn left_invariant_field_matches_group_derivative() {
        let xi = Point::from([0.7, -1.1, 0.4]);
        for a in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, -0.2, 0.9]] {
            let h = 1e-6;
            let ap = Point::from(a) * h;
            let fd = (right_translate(&xi, &ap) - right_translate(&xi, &(-ap))) * (0.5 / h);
            let exact = left_invariant(&a, &xi);
            assert!((fd - exact).norm() < 1e-7, "{fd:?} vs {exact:?}");
        }
    }

    #[test]
    fn right_jacobian_inverts_field_map() {
        let xi = Point::from([0.5, 0.9, -1.3]);
        let j = right_jacobian(&xi);
        let a = [0.2, -0.4, 0.7];
        let v = left_invariant(&a, &xi);
        for i in 0..3 {
            let r: f64 = (0..3).map(|k| j[i][k] * v[k]).sum();
            assert!((r - a[i]).abs() < 1e-12);
        }
    }
}
