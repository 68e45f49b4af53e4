//! Explicit finite-difference solver on a periodic `n × n` mesh of the unit torus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Anchor, KernelError, KernelEstimate, KernelMethod, KernelRepr};
use crate::models::{Point, SpaceKind, VectorFieldSystem};

/// Spatial mesh and stepping controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMesh {
    /// Nodes per side.
    pub n: usize,
    /// Requested time step; `None` picks `0.9 ×` the stability bound.
    pub dt: Option<f64>,
    pub mass_tol: f64,
}

impl GridMesh {
    pub fn new(n: usize) -> Self {
        GridMesh {
            n,
            dt: None,
            mass_tol: 1e-3,
        }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        let h = self.spacing();
        Point::new(&[i as f64 * h, j as f64 * h])
    }

    /// Index of the node nearest to `p`.
    pub fn nearest(&self, p: &Point) -> (usize, usize) {
        let n = self.n as f64;
        let i = (p[0] * n).round().rem_euclid(n) as usize % self.n;
        let j = (p[1] * n).round().rem_euclid(n) as usize % self.n;
        (i, j)
    }
}

/// `∂_t u = L u` (backward, `q_t(·, z₀)`) or `∂_t p = L* p` (forward, `q_t(x₀, ·)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Stored grid slices, row-major with the x index outermost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRepr {
    pub n: usize,
    pub slices: Vec<Vec<f64>>,
    pub slice_max: Vec<f64>,
}

impl GridRepr {
    #[inline]
    fn at(&self, k: usize, i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        self.slices[k][(i.rem_euclid(n) * n + j.rem_euclid(n)) as usize]
    }

    fn node_grad(&self, k: usize, i: isize, j: isize) -> [f64; 2] {
        let s = 0.5 * self.n as f64;
        [
            (self.at(k, i + 1, j) - self.at(k, i - 1, j)) * s,
            (self.at(k, i, j + 1) - self.at(k, i, j - 1)) * s,
        ]
    }

    /// Bilinear value and bilinearly interpolated centered-difference
    /// gradient at `p`.
    pub fn eval(&self, k: usize, p: &Point) -> (f64, [f64; 2]) {
        let n = self.n as f64;
        let u = p[0].rem_euclid(1.0) * n;
        let v = p[1].rem_euclid(1.0) * n;
        let (i0, j0) = (u.floor(), v.floor());
        let (fx, fy) = (u - i0, v - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        let w = [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ];
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for (di, dj, wt) in w {
            if wt == 0.0 {
                continue;
            }
            val += wt * self.at(k, i0 + di, j0 + dj);
            let g = self.node_grad(k, i0 + di, j0 + dj);
            grad[0] += wt * g[0];
            grad[1] += wt * g[1];
        }
        (val, grad)
    }
}

struct Coeffs {
    n: usize,
    h: f64,
    a11: Vec<f64>,
    a12: Vec<f64>,
    a22: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    cross: bool,
    advect: bool,
}

impl Coeffs {
    fn new(sys: &VectorFieldSystem, n: usize) -> Self {
        let h = 1.0 / n as f64;
        let len = n * n;
        let mut c = Coeffs {
            n,
            h,
            a11: vec![0.0; len],
            a12: vec![0.0; len],
            a22: vec![0.0; len],
            b1: vec![0.0; len],
            b2: vec![0.0; len],
            cross: false,
            advect: false,
        };
        for i in 0..n {
            for j in 0..n {
                let x = Point::new(&[i as f64 * h, j as f64 * h]);
                let idx = i * n + j;
                for f in &sys.diffusion {
                    let v = f.eval(&x);
                    c.a11[idx] += v[0] * v[0];
                    c.a12[idx] += v[0] * v[1];
                    c.a22[idx] += v[1] * v[1];
                }
                let b = sys.ito_drift(&x);
                // drop finite-difference noise on drift-free systems
                c.b1[idx] = if b[0].abs() < 1e-9 { 0.0 } else { b[0] };
                c.b2[idx] = if b[1].abs() < 1e-9 { 0.0 } else { b[1] };
            }
        }
        c.cross = c.a12.iter().any(|v| v.abs() > 1e-14);
        c.advect = c.b1.iter().chain(&c.b2).any(|v| *v != 0.0);
        c
    }

    fn stability_bound(&self) -> f64 {
        let h2 = self.h * self.h;
        let mut bound = f64::INFINITY;
        for idx in 0..self.n * self.n {
            let rate = (self.a11[idx] + self.a22[idx] + self.a12[idx].abs()) / h2;
            if rate > 0.0 {
                bound = bound.min(1.0 / rate);
            }
            let b2 = self.b1[idx].powi(2) + self.b2[idx].powi(2);
            let a = self.a11[idx] + self.a22[idx];
            if b2 > 0.0 {
                bound = bound.min(if a > 0.0 { a / b2 } else { self.h / b2.sqrt() });
            }
        }
        bound
    }

    /// `out = L* p` in conservative form: `½ ∂_j∂_k(A^{jk} p) − ∂_k(b^k p)`.
    fn forward(&self, p: &[f64], out: &mut [f64], work: &mut [Vec<f64>; 5]) {
        let n = self.n;
        let [p11, p12, p22, q1, q2] = work;
        for idx in 0..n * n {
            p11[idx] = self.a11[idx] * p[idx];
            p22[idx] = self.a22[idx] * p[idx];
            if self.cross {
                p12[idx] = self.a12[idx] * p[idx];
            }
            if self.advect {
                q1[idx] = self.b1[idx] * p[idx];
                q2[idx] = self.b2[idx] * p[idx];
            }
        }
        let (p11, p12, p22, q1, q2) = (&*p11, &*p12, &*p22, &*q1, &*q2);
        let ih2 = 1.0 / (self.h * self.h);
        let i2h = 0.5 / self.h;
        let (cross, advect) = (self.cross, self.advect);
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let im = (i + n - 1) % n * n;
            let ic = i * n;
            let ip = (i + 1) % n * n;
            for (j, o) in row.iter_mut().enumerate() {
                let jm = (j + n - 1) % n;
                let jp = (j + 1) % n;
                let mut v = 0.5
                    * ih2
                    * (p11[ip + j] - 2.0 * p11[ic + j] + p11[im + j] + p22[ic + jp]
                        - 2.0 * p22[ic + j]
                        + p22[ic + jm]);
                if cross {
                    v += 0.25
                        * ih2
                        * (p12[ip + jp] - p12[ip + jm] - p12[im + jp] + p12[im + jm]);
                }
                if advect {
                    v -= i2h * (q1[ip + j] - q1[im + j] + q2[ic + jp] - q2[ic + jm]);
                }
                *o = v;
            }
        });
    }

    /// `out = L u` in non-divergence form: `½ A^{jk} ∂_j∂_k u + b^k ∂_k u`.
    fn backward(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let ih2 = 1.0 / (self.h * self.h);
        let i2h = 0.5 / self.h;
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let im = (i + n - 1) % n * n;
            let ic = i * n;
            let ip = (i + 1) % n * n;
            for (j, o) in row.iter_mut().enumerate() {
                let jm = (j + n - 1) % n;
                let jp = (j + 1) % n;
                let idx = ic + j;
                let uxx = (u[ip + j] - 2.0 * u[idx] + u[im + j]) * ih2;
                let uyy = (u[ic + jp] - 2.0 * u[idx] + u[ic + jm]) * ih2;
                let mut v = 0.5 * (self.a11[idx] * uxx + self.a22[idx] * uyy);
                if self.cross {
                    let uxy = (u[ip + jp] - u[ip + jm] - u[im + jp] + u[im + jm]) * 0.25 * ih2;
                    v += self.a12[idx] * uxy;
                }
                if self.advect {
                    v += self.b1[idx] * (u[ip + j] - u[im + j]) * i2h
                        + self.b2[idx] * (u[ic + jp] - u[ic + jm]) * i2h;
                }
                *o = v;
            }
        });
    }
}

struct Stepper {
    coeffs: Coeffs,
    direction: Direction,
    dt: f64,
    lu: Vec<f64>,
    work: [Vec<f64>; 5],
}

impl Stepper {
    fn new(sys: &VectorFieldSystem, mesh: &GridMesh, direction: Direction) -> Result<Self, KernelError> {
        if sys.space.kind != SpaceKind::Torus2 {
            return Err(KernelError::Unsupported(format!(
                "grid solver needs a torus model, got {}",
                sys.name
            )));
        }
        if mesh.n < 4 {
            return Err(KernelError::Invalid("mesh needs at least 4 nodes per side".into()));
        }
        let coeffs = Coeffs::new(sys, mesh.n);
        let suggested = 0.9 * coeffs.stability_bound();
        let dt = match mesh.dt {
            Some(dt) if dt > suggested => {
                return Err(KernelError::Cfl {
                    requested: dt,
                    suggested,
                })
            }
            Some(dt) if dt <= 0.0 => {
                return Err(KernelError::Invalid(format!("time step {dt} must be positive")))
            }
            Some(dt) => dt,
            None => suggested,
        };
        let len = mesh.n * mesh.n;
        Ok(Stepper {
            coeffs,
            direction,
            dt,
            lu: vec![0.0; len],
            work: std::array::from_fn(|_| vec![0.0; len]),
        })
    }

    fn advance(&mut self, u: &mut [f64], duration: f64, min_steps: usize) {
        if duration <= 0.0 {
            return;
        }
        let steps = ((duration / self.dt).ceil() as usize).max(min_steps).max(1);
        let dt = duration / steps as f64;
        for _ in 0..steps {
            match self.direction {
                Direction::Forward => self.coeffs.forward(u, &mut self.lu, &mut self.work),
                Direction::Backward => self.coeffs.backward(u, &mut self.lu),
            }
            for (a, b) in u.iter_mut().zip(&self.lu) {
                *a += dt * b;
            }
        }
    }
}

/// Advances a density (forward) or a function (backward) on the mesh by
/// `duration`.
pub fn evolve_grid(
    sys: &VectorFieldSystem,
    init: &[f64],
    mesh: &GridMesh,
    duration: f64,
    direction: Direction,
) -> Result<Vec<f64>, KernelError> {
    if init.len() != mesh.n * mesh.n {
        return Err(KernelError::Invalid(format!(
            "initial data has {} values, mesh has {}",
            init.len(),
            mesh.n * mesh.n
        )));
    }
    let mut st = Stepper::new(sys, mesh, direction)?;
    let mut u = init.to_vec();
    st.advance(&mut u, duration, 1);
    Ok(u)
}

/// Grid approximation of `q_t(x₀, ·)` at the given times.
pub fn solve_heat_grid(
    sys: &VectorFieldSystem,
    x0: &Point,
    times: &[f64],
    mesh: &GridMesh,
) -> Result<KernelEstimate, KernelError> {
    solve(sys, x0, times, mesh, Direction::Forward)
}

/// Grid approximation of `q_t(·, z₀)` at the given times, from the
/// backward equation `∂_t u = L u` with a delta at `z₀`.
pub fn solve_heat_grid_to(
    sys: &VectorFieldSystem,
    z0: &Point,
    times: &[f64],
    mesh: &GridMesh,
) -> Result<KernelEstimate, KernelError> {
    solve(sys, z0, times, mesh, Direction::Backward)
}

fn solve(
    sys: &VectorFieldSystem,
    anchor: &Point,
    times: &[f64],
    mesh: &GridMesh,
    direction: Direction,
) -> Result<KernelEstimate, KernelError> {
    super::check_times(times)?;
    let mut st = Stepper::new(sys, mesh, direction)?;
    let n = mesh.n;
    let h2 = mesh.spacing().powi(2);
    let (i0, j0) = mesh.nearest(&sys.space.wrap(anchor));
    let mut u = vec![0.0; n * n];
    u[i0 * n + j0] = 1.0 / h2;

    let mut slices = Vec::with_capacity(times.len());
    let mut slice_max = Vec::with_capacity(times.len());
    let mut mass = Vec::with_capacity(times.len());
    let mut flags = Vec::new();
    let mut t_prev = 0.0;
    for (k, &t) in times.iter().enumerate() {
        st.advance(&mut u, t - t_prev, if k == 0 { 4 } else { 1 });
        t_prev = t;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::Instability { t, negative: f64::NAN });
        }
        let negative: f64 = u.iter().filter(|v| **v < 0.0).sum::<f64>() * h2;
        if negative < -mesh.mass_tol {
            return Err(KernelError::Instability { t, negative });
        }
        let stored: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
        let m = stored.iter().sum::<f64>() * h2;
        if direction == Direction::Forward && (m - 1.0).abs() > mesh.mass_tol {
            flags.push(format!("mass {m:.6} at t = {t} outside tolerance"));
        }
        mass.push(m);
        slice_max.push(stored.iter().cloned().fold(0.0, f64::max));
        slices.push(stored);
    }
    let node = mesh.node(i0, j0);
    Ok(KernelEstimate {
        model: sys.name.clone(),
        space: sys.space,
        method: KernelMethod::GridPde,
        anchor: match direction {
            Direction::Forward => Anchor::Source(node),
            Direction::Backward => Anchor::Target(node),
        },
        symmetric: super::is_symmetric(sys),
        times: times.to_vec(),
        mass,
        seed: None,
        flags,
        rel_floor: super::DEFAULT_REL_FLOOR,
        repr: KernelRepr::Grid(GridRepr {
            n,
            slices,
            slice_max,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_operator_conserves_mass_exactly() {
        let sys = VectorFieldSystem::torus_grushin().with_constant_drift(&[0.3, -0.2]);
        let c = Coeffs::new(&sys, 16);
        let p: Vec<f64> = (0..256).map(|i| 1.0 + ((i * 37) % 11) as f64).collect();
        let mut out = vec![0.0; 256];
        let mut work = std::array::from_fn(|_| vec![0.0; 256]);
        c.forward(&p, &mut out, &mut work);
        assert!(out.iter().sum::<f64>().abs() < 1e-9 * out.iter().map(|v| v.abs()).sum::<f64>());
    }

    #[test]
    fn backward_operator_kills_constants() {
        let sys = VectorFieldSystem::torus_grushin();
        let c = Coeffs::new(&sys, 16);
        let mut out = vec![1.0; 256];
        c.backward(&vec![2.5; 256], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn cfl_violation_suggests_a_step() {
        let sys = VectorFieldSystem::torus_elliptic();
        let mut mesh = GridMesh::new(32);
        mesh.dt = Some(1e-2);
        match solve_heat_grid(&sys, &Point::new(&[0.0, 0.0]), &[0.1], &mesh) {
            Err(KernelError::Cfl { suggested, .. }) => {
                assert!((suggested - 0.9 / (2.0 * 32.0 * 32.0)).abs() < 1e-12)
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_torus_models() {
        let sys = VectorFieldSystem::heisenberg();
        let r = solve_heat_grid(&sys, &Point::zeros(3), &[0.1], &GridMesh::new(16));
        assert!(matches!(r, Err(KernelError::Unsupported(_))));
    }
}
