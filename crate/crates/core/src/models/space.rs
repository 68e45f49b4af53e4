use serde::{Deserialize, Serialize};

use super::point::Point;
use super::su2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// Unit flat torus `R²/Z²`.
    Torus2,
    /// Heisenberg group on R³ with law `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')`.
    Heisenberg3,
    /// SU(2) in exponential coordinates.
    Su2,
}

/// A model manifold in a single global chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    pub kind: SpaceKind,
}

impl ModelSpace {
    pub const TORUS2: ModelSpace = ModelSpace {
        kind: SpaceKind::Torus2,
    };
    pub const HEISENBERG3: ModelSpace = ModelSpace {
        kind: SpaceKind::Heisenberg3,
    };
    pub const SU2: ModelSpace = ModelSpace {
        kind: SpaceKind::Su2,
    };

    pub fn dim(&self) -> usize {
        match self.kind {
            SpaceKind::Torus2 => 2,
            SpaceKind::Heisenberg3 | SpaceKind::Su2 => 3,
        }
    }

    /// Per-coordinate period, if the chart is periodic.
    pub fn period(&self) -> Option<Vec<f64>> {
        match self.kind {
            SpaceKind::Torus2 => Some(vec![1.0, 1.0]),
            _ => None,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self.kind, SpaceKind::Heisenberg3)
    }

    /// Canonical chart representative.
    pub fn wrap(&self, p: &Point) -> Point {
        match self.kind {
            SpaceKind::Torus2 => {
                let mut q = *p;
                for v in q.as_mut_slice() {
                    *v = v.rem_euclid(1.0);
                    // rem_euclid can round up to exactly the period
                    if *v >= 1.0 {
                        *v = 0.0;
                    }
                }
                q
            }
            SpaceKind::Heisenberg3 => *p,
            SpaceKind::Su2 => su2::retract(p),
        }
    }

    /// Chart displacement from `x` to `y` of minimal length.
    ///
    /// On the torus this is the minimal-image difference; on the groups it
    /// is the chart of `x^{-1} y`.
    pub fn displacement(&self, x: &Point, y: &Point) -> Point {
        match self.kind {
            SpaceKind::Torus2 => {
                let mut d = *y - *x;
                for v in d.as_mut_slice() {
                    *v -= v.round();
                }
                d
            }
            SpaceKind::Heisenberg3 => heisenberg_mul(&heisenberg_inv(x), y),
            SpaceKind::Su2 => su2::relative(x, y),
        }
    }

    /// Riemannian distance ρ: flat on the torus, Euclidean in coordinates on
    /// the Heisenberg chart, bi-invariant on SU(2).
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self.kind {
            SpaceKind::Torus2 | SpaceKind::Su2 => self.displacement(x, y).norm(),
            SpaceKind::Heisenberg3 => (*y - *x).norm(),
        }
    }

    /// Density of the reference volume with respect to chart Lebesgue measure.
    pub fn volume_density(&self, p: &Point) -> f64 {
        match self.kind {
            SpaceKind::Su2 => su2::haar_density(p),
            _ => 1.0,
        }
    }

    /// Riemannian metric tensor in chart coordinates.
    pub fn metric_tensor(&self, p: &Point) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        match self.kind {
            SpaceKind::Torus2 | SpaceKind::Heisenberg3 => {
                for (i, row) in g.iter_mut().enumerate().take(self.dim()) {
                    row[i] = 1.0;
                }
            }
            SpaceKind::Su2 => {
                let j = su2::right_jacobian(p);
                for (a, row) in g.iter_mut().enumerate() {
                    for (b, entry) in row.iter_mut().enumerate() {
                        *entry = (0..3).map(|k| j[k][a] * j[k][b]).sum();
                    }
                }
            }
        }
        g
    }
}

/// Heisenberg group product in the coordinates used by [`SpaceKind::Heisenberg3`].
pub fn heisenberg_mul(g: &Point, h: &Point) -> Point {
    Point::new(&[g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1]])
}

pub fn heisenberg_inv(g: &Point) -> Point {
    Point::new(&[-g[0], -g[1], -g[2] + g[0] * g[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(space: ModelSpace) -> impl Strategy<Value = Point> {
        let d = space.dim();
        prop::collection::vec(-1.5f64..1.5, d).prop_map(move |v| space.wrap(&Point::new(&v)))
    }

    #[test]
    fn dimensions_match_kind() {
        assert_eq!(ModelSpace::TORUS2.dim(), 2);
        assert_eq!(ModelSpace::HEISENBERG3.dim(), 3);
        assert_eq!(ModelSpace::SU2.dim(), 3);
    }

    #[test]
    fn torus_wrap_and_minimal_image() {
        let s = ModelSpace::TORUS2;
        let p = s.wrap(&Point::from([1.25, -0.25]));
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let d = s.distance(&Point::from([0.05, 0.5]), &Point::from([0.95, 0.5]));
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_inverse() {
        let g = Point::from([0.3, -1.2, 0.7]);
        let e = heisenberg_mul(&g, &heisenberg_inv(&g));
        assert!(e.norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            (a, b, c) in (pt(ModelSpace::TORUS2), pt(ModelSpace::TORUS2), pt(ModelSpace::TORUS2))
        ) {
            let s = ModelSpace::TORUS2;
            prop_assert!(s.distance(&a, &a) < 1e-15);
            prop_assert!((s.distance(&a, &b) - s.distance(&b, &a)).abs() < 1e-12);
            prop_assert!(s.distance(&a, &c) <= s.distance(&a, &b) + s.distance(&b, &c) + 1e-12);
        }

        #[test]
        fn su2_distance_is_a_metric(
            (a, b, c) in (pt(ModelSpace::SU2), pt(ModelSpace::SU2), pt(ModelSpace::SU2))
        ) {
            let s = ModelSpace::SU2;
            prop_assert!(s.distance(&a, &a) < 1e-7);
            prop_assert!((s.distance(&a, &b) - s.distance(&b, &a)).abs() < 1e-9);
            prop_assert!(s.distance(&a, &c) <= s.distance(&a, &b) + s.distance(&b, &c) + 1e-9);
        }

        #[test]
        fn heisenberg_distance_is_a_metric(
            (a, b, c) in (pt(ModelSpace::HEISENBERG3), pt(ModelSpace::HEISENBERG3), pt(ModelSpace::HEISENBERG3))
        ) {
            let s = ModelSpace::HEISENBERG3;
            prop_assert_eq!(s.distance(&a, &a), 0.0);
            prop_assert!((s.distance(&a, &b) - s.distance(&b, &a)).abs() < 1e-12);
            prop_assert!(s.distance(&a, &c) <= s.distance(&a, &b) + s.distance(&b, &c) + 1e-12);
        }
    }
}
