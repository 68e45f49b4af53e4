use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::field::{fd_divergence, fd_step, VectorField, FD_BASE_STEP};
use super::point::Point;
use super::space::{ModelSpace, SpaceKind};
use super::ModelError;

/// Drift and diffusion fields of `L = ½ Σ X_k X_k + X_0` on a model space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldSystem {
    pub name: String,
    pub space: ModelSpace,
    /// `X_0`.
    pub drift: VectorField,
    /// `X_1, …, X_m`.
    pub diffusion: Vec<VectorField>,
    /// Optional `c_k` with `X_0 = Σ c_k X_k`.
    pub coefficients: Option<Vec<Expr>>,
}

/// Differentiation backend for brackets and divergences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Symbolic,
    FiniteDifference,
}

impl VectorFieldSystem {
    /// Torus with `X_1 = ∂x`, `X_2 = sin(2πx) ∂y`, no drift.
    pub fn torus_grushin() -> Self {
        VectorFieldSystem {
            name: "torus-grushin".into(),
            space: ModelSpace::TORUS2,
            drift: VectorField::zero(2),
            diffusion: vec![
                VectorField::constant(&[1.0, 0.0]),
                VectorField::Components(vec![
                    Expr::zero(),
                    (Expr::c(2.0 * PI) * Expr::var(0)).sin(),
                ]),
            ],
            coefficients: None,
        }
    }

    /// Elliptic control case on the torus: `X_1 = ∂x`, `X_2 = ∂y`.
    pub fn torus_elliptic() -> Self {
        VectorFieldSystem {
            name: "torus-elliptic".into(),
            space: ModelSpace::TORUS2,
            drift: VectorField::zero(2),
            diffusion: vec![
                VectorField::constant(&[1.0, 0.0]),
                VectorField::constant(&[0.0, 1.0]),
            ],
            coefficients: None,
        }
    }

    /// Heisenberg group: `X_1 = ∂x`, `X_2 = ∂y + x ∂z`.
    pub fn heisenberg() -> Self {
        VectorFieldSystem {
            name: "heisenberg".into(),
            space: ModelSpace::HEISENBERG3,
            drift: VectorField::zero(3),
            diffusion: vec![
                VectorField::constant(&[1.0, 0.0, 0.0]),
                VectorField::Components(vec![Expr::zero(), Expr::one(), Expr::var(0)]),
            ],
            coefficients: None,
        }
    }

    /// SU(2) with the left-invariant fields of the first two Pauli generators.
    pub fn su2() -> Self {
        VectorFieldSystem {
            name: "su2".into(),
            space: ModelSpace::SU2,
            drift: VectorField::LeftInvariant([0.0; 3]),
            diffusion: vec![
                VectorField::LeftInvariant([1.0, 0.0, 0.0]),
                VectorField::LeftInvariant([0.0, 1.0, 0.0]),
            ],
            coefficients: None,
        }
    }

    /// Built-in model by name. Accepts `torus-grushin`, `torus-elliptic`,
    /// `heisenberg` and `su2`.
    pub fn from_name(name: &str) -> Result<Self, ModelError> {
        match name {
            "torus-grushin" => Ok(Self::torus_grushin()),
            "torus-elliptic" => Ok(Self::torus_elliptic()),
            "heisenberg" => Ok(Self::heisenberg()),
            "su2" => Ok(Self::su2()),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }

    /// Replaces the drift with the constant field `v` (torus or Heisenberg chart).
    pub fn with_constant_drift(mut self, v: &[f64]) -> Self {
        assert_eq!(v.len(), self.dim());
        self.drift = match self.space.kind {
            SpaceKind::Su2 => VectorField::LeftInvariant([v[0], v[1], v[2]]),
            _ => VectorField::constant(v),
        };
        self.coefficients = None;
        self.name = format!("{}+drift", self.name);
        self
    }

    /// Sets `X_0 = Σ c_k X_k`, recording the coefficients.
    pub fn with_drift_coefficients(mut self, coeffs: Vec<Expr>) -> Result<Self, ModelError> {
        if coeffs.len() != self.diffusion.len() {
            return Err(ModelError::Invalid(format!(
                "expected {} drift coefficients, got {}",
                self.diffusion.len(),
                coeffs.len()
            )));
        }
        let drift = match self.space.kind {
            SpaceKind::Su2 => {
                let mut g = [0.0; 3];
                for (c, f) in coeffs.iter().zip(&self.diffusion) {
                    let k = c.as_const().ok_or_else(|| {
                        ModelError::Unsupported("non-constant drift coefficients on su2".into())
                    })?;
                    let a = f.generator().expect("su2 diffusion fields are left-invariant");
                    for i in 0..3 {
                        g[i] += k * a[i];
                    }
                }
                VectorField::LeftInvariant(g)
            }
            _ => {
                let n = self.dim();
                let mut comps = vec![Expr::zero(); n];
                for (c, f) in coeffs.iter().zip(&self.diffusion) {
                    let VectorField::Components(fc) = f else {
                        return Err(ModelError::Unsupported("mixed field kinds".into()));
                    };
                    for i in 0..n {
                        comps[i] = comps[i].clone() + c.clone() * fc[i].clone();
                    }
                }
                VectorField::Components(comps)
            }
        };
        self.drift = drift;
        self.coefficients = Some(coeffs);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn diffusion_count(&self) -> usize {
        self.diffusion.len()
    }

    /// Field by index: 0 is the drift, `1..=m` the diffusion fields.
    pub fn field(&self, index: usize) -> Result<&VectorField, ModelError> {
        if index == 0 {
            Ok(&self.drift)
        } else {
            self.diffusion
                .get(index - 1)
                .ok_or(ModelError::FieldIndex(index, self.diffusion.len()))
        }
    }

    pub fn eval_drift(&self, x: &Point) -> Point {
        self.drift.eval(x)
    }

    pub fn eval_diffusion(&self, k: usize, x: &Point) -> Point {
        self.diffusion[k].eval(x)
    }

    pub fn has_drift(&self) -> bool {
        !self.drift.is_zero()
    }

    /// Checks `X_0 = Σ c_k X_k` at the given points.
    pub fn check_coefficients(&self, points: &[Point], tol: f64) -> bool {
        let Some(coeffs) = &self.coefficients else {
            return true;
        };
        points.iter().all(|x| {
            let mut sum = Point::zeros(self.dim());
            for (c, f) in coeffs.iter().zip(&self.diffusion) {
                sum = sum.axpy(c.eval(x.as_slice()), &f.eval(x));
            }
            (sum - self.drift.eval(x)).max_abs() <= tol
        })
    }

    /// Itô-form drift `X_0 + ½ Σ (DX_k) X_k` in chart coordinates.
    pub fn ito_drift(&self, x: &Point) -> Point {
        let mut b = self.drift.eval(x);
        for f in &self.diffusion {
            let v = f.eval(x);
            let h = fd_step(FD_BASE_STEP, x);
            let vn = v.norm();
            if vn == 0.0 {
                continue;
            }
            let s = h / vn;
            let dv = (f.eval(&x.axpy(s, &v)) - f.eval(&x.axpy(-s, &v))) * (0.5 / s);
            b = b.axpy(0.5, &dv);
        }
        b
    }
}

impl fmt::Display for VectorFieldSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {:?} (m = {})", self.name, self.space.kind, self.diffusion.len())
    }
}

/// `div X` for field `index` (0 = drift) with respect to the reference volume.
pub fn divergence(
    sys: &VectorFieldSystem,
    index: usize,
    x: &Point,
    backend: Backend,
) -> Result<f64, ModelError> {
    let field = sys.field(index)?;
    let value = match (backend, field.symbolic_divergence(&sys.space)) {
        (Backend::Symbolic, Some(e)) => e.eval(x.as_slice()),
        _ => {
            let h = fd_step(FD_BASE_STEP, x);
            fd_divergence(|p| field.eval(p), |p| sys.space.volume_density(p), x, h)
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite { at: *x })
    }
}

/// Builds the generator of the time-reversed process with respect to the
/// invariant density `m`.
///
/// The diffusion fields are unchanged and the drift becomes
/// `−X_0 + Σ_i (X_i log m + div X_i) X_i`. Applying the map twice returns
/// the original system.
pub fn adjoint_system(
    sys: &VectorFieldSystem,
    density: &Expr,
) -> Result<VectorFieldSystem, ModelError> {
    check_positive(sys, density)?;
    let name = match sys.name.strip_suffix("^*") {
        Some(base) => base.to_string(),
        None => format!("{}^*", sys.name),
    };
    match sys.space.kind {
        SpaceKind::Su2 => {
            if density.as_const().is_none() {
                return Err(ModelError::Unsupported(
                    "adjoint on su2 requires a constant density".into(),
                ));
            }
            Ok(VectorFieldSystem {
                name,
                drift: sys.drift.negated(),
                coefficients: sys
                    .coefficients
                    .as_ref()
                    .map(|c| c.iter().map(|e| -e.clone()).collect()),
                ..sys.clone()
            })
        }
        _ => {
            let n = sys.dim();
            let VectorField::Components(x0) = &sys.drift else {
                return Err(ModelError::Unsupported("non-symbolic drift".into()));
            };
            let mut comps: Vec<Expr> = x0.iter().map(|e| -e.clone()).collect();
            let inv_m = density.clone().recip();
            let mut coeffs = sys
                .coefficients
                .as_ref()
                .map(|c| c.iter().map(|e| -e.clone()).collect::<Vec<_>>());
            for (k, f) in sys.diffusion.iter().enumerate() {
                let VectorField::Components(fc) = f else {
                    return Err(ModelError::Unsupported("non-symbolic diffusion field".into()));
                };
                let x_log_m = (0..n).fold(Expr::zero(), |acc, j| {
                    acc + fc[j].clone() * density.diff(j)
                }) * inv_m.clone();
                let div = f
                    .symbolic_divergence(&sys.space)
                    .ok_or_else(|| ModelError::Unsupported("divergence".into()))?;
                let c = x_log_m + div;
                if c.is_zero() {
                    continue;
                }
                for i in 0..n {
                    comps[i] = comps[i].clone() + c.clone() * fc[i].clone();
                }
                if let Some(cs) = coeffs.as_mut() {
                    cs[k] = cs[k].clone() + c;
                }
            }
            Ok(VectorFieldSystem {
                name,
                drift: VectorField::Components(comps),
                coefficients: coeffs,
                ..sys.clone()
            })
        }
    }
}

fn check_positive(sys: &VectorFieldSystem, density: &Expr) -> Result<(), ModelError> {
    let n = sys.dim();
    let samples = 12usize;
    let total = samples.pow(n as u32);
    for idx in 0..total {
        let mut p = Point::zeros(n);
        let mut r = idx;
        for j in 0..n {
            let k = r % samples;
            r /= samples;
            p[j] = match sys.space.kind {
                SpaceKind::Torus2 => k as f64 / samples as f64,
                SpaceKind::Heisenberg3 => -2.0 + 4.0 * k as f64 / (samples - 1) as f64,
                SpaceKind::Su2 => -3.0 + 6.0 * k as f64 / (samples - 1) as f64,
            };
        }
        let v = density.eval(p.as_slice());
        if !(v > 0.0 && v.is_finite()) {
            return Err(ModelError::NonPositiveDensity { at: p, value: v });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_points(space: ModelSpace, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let v = [
                    (7.3 * t).fract() * 0.9 + 0.03,
                    (3.1 * t + 0.2).fract(),
                    (5.7 * t + 0.4).fract() - 0.5,
                ];
                space.wrap(&Point::new(&v[..space.dim()]))
            })
            .collect()
    }

    #[test]
    fn divergences_of_built_ins_vanish() {
        let g = VectorFieldSystem::torus_grushin();
        let h = VectorFieldSystem::heisenberg();
        for x in sample_points(ModelSpace::TORUS2, 20) {
            for b in [Backend::Symbolic, Backend::FiniteDifference] {
                assert!(divergence(&g, 2, &x, b).unwrap().abs() < 1e-8);
                assert!(divergence(&g, 1, &x, b).unwrap().abs() < 1e-8);
            }
        }
        for x in sample_points(ModelSpace::HEISENBERG3, 20) {
            for b in [Backend::Symbolic, Backend::FiniteDifference] {
                assert!(divergence(&h, 2, &x, b).unwrap().abs() < 1e-8);
            }
        }
        let c = VectorFieldSystem::torus_elliptic().with_constant_drift(&[0.4, -0.3]);
        assert_eq!(divergence(&c, 0, &Point::from([0.1, 0.2]), Backend::Symbolic).unwrap(), 0.0);
    }

    #[test]
    fn self_adjoint_torus_keeps_zero_drift() {
        let g = VectorFieldSystem::torus_grushin();
        let a = adjoint_system(&g, &Expr::one()).unwrap();
        assert_eq!(a.diffusion, g.diffusion);
        assert!(a.drift.is_zero());
    }

    #[test]
    fn divergence_free_drift_is_negated() {
        let s = VectorFieldSystem::torus_grushin().with_constant_drift(&[0.5, 0.25]);
        let a = adjoint_system(&s, &Expr::one()).unwrap();
        let v = a.eval_drift(&Point::from([0.3, 0.7]));
        assert_eq!(v.as_slice(), &[-0.5, -0.25]);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let m = Expr::c(2.0) + (Expr::c(2.0 * PI) * Expr::var(0)).cos();
        let s = VectorFieldSystem::torus_grushin().with_constant_drift(&[0.5, 0.25]);
        let twice = adjoint_system(&adjoint_system(&s, &m).unwrap(), &m).unwrap();
        assert_eq!(twice.name, s.name);
        for x in sample_points(ModelSpace::TORUS2, 50) {
            assert!((twice.eval_drift(&x) - s.eval_drift(&x)).max_abs() < 1e-12);
            for k in 0..2 {
                assert_eq!(twice.eval_diffusion(k, &x), s.eval_diffusion(k, &x));
            }
        }
        let su = VectorFieldSystem::su2().with_constant_drift(&[0.0, 0.0, 0.3]);
        let su_twice = adjoint_system(&adjoint_system(&su, &Expr::one()).unwrap(), &Expr::one()).unwrap();
        assert_eq!(su_twice.drift, su.drift);
    }

    #[test]
    fn density_with_zeros_is_rejected() {
        let m = (Expr::c(2.0 * PI) * Expr::var(0)).sin();
        let err = adjoint_system(&VectorFieldSystem::torus_grushin(), &m).unwrap_err();
        assert!(matches!(err, ModelError::NonPositiveDensity { .. }));
    }

    #[test]
    fn coefficient_drift_is_consistent() {
        let s = VectorFieldSystem::torus_grushin()
            .with_drift_coefficients(vec![Expr::c(0.3), Expr::var(1).cos()])
            .unwrap();
        assert!(s.check_coefficients(&sample_points(ModelSpace::TORUS2, 30), 1e-14));
        let s2 = VectorFieldSystem::su2()
            .with_drift_coefficients(vec![Expr::c(0.5), Expr::c(-1.0)])
            .unwrap();
        assert_eq!(s2.drift, VectorField::LeftInvariant([0.5, -1.0, 0.0]));
    }

    #[test]
    fn unknown_model_name() {
        assert!(matches!(
            VectorFieldSystem::from_name("klein-bottle"),
            Err(ModelError::UnknownModel(_))
        ));
        for n in ["torus-grushin", "torus-elliptic", "heisenberg", "su2"] {
            assert_eq!(VectorFieldSystem::from_name(n).unwrap().name, n);
        }
    }
}
