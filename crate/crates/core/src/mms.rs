//! Manufactured solutions for the spatial accuracy studies.
//!
//! The exact solution is two Gaussians with `cos t` / `sin t` envelopes and
//! the forcing `F = ∂ₜc − DΔc − ∇·(V c)` is evaluated in closed form. Since
//! both are separable in time, `F(t) = cos t·A + sin t·B` with fixed spatial
//! fields `A`, `B`, which is what the stepping loop uses.

use serde::{Deserialize, Serialize};

use crate::geometry::PointClass;
use crate::operators::{Constraints, VelocityKind};
use crate::sparse::{gmres, CsrMatrix, GmresOptions, Ilu0};
use crate::system::SpatialSystem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedCase {
    /// Centre of the `cos t` Gaussian.
    pub center1: [f64; 2],
    /// Centre of the `sin t` Gaussian.
    pub center2: [f64; 2],
    pub sigma: f64,
    pub diffusivity: f64,
    pub velocity: VelocityKind,
}

impl ManufacturedCase {
    pub fn new(center1: [f64; 2], center2: [f64; 2], sigma: f64, diffusivity: f64, velocity: VelocityKind) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        if !(diffusivity >= 0.0 && diffusivity.is_finite()) {
            return Err(Error::param("D", format!("must be non-negative, got {diffusivity}")));
        }
        Ok(ManufacturedCase {
            center1,
            center2,
            sigma,
            diffusivity,
            velocity,
        })
    }

    fn gaussian(&self, center: [f64; 2], x: f64, y: f64) -> Gaussian {
        let (dx, dy) = (x - center[0], y - center[1]);
        let s2 = self.sigma * self.sigma;
        let g = (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
        Gaussian {
            g,
            gx: -dx / s2 * g,
            gy: -dy / s2 * g,
            lap: ((dx * dx + dy * dy) / (s2 * s2) - 2.0 / s2) * g,
        }
    }

    /// `DΔG + ∇·(V G)` for one Gaussian.
    fn spatial_operator(&self, center: [f64; 2], x: f64, y: f64) -> (f64, f64) {
        let k = self.gaussian(center, x, y);
        let [vx, vy] = self.velocity.eval(x, y);
        let div = self.velocity.divergence(x, y);
        (k.g, self.diffusivity * k.lap + div * k.g + vx * k.gx + vy * k.gy)
    }

    pub fn exact(&self, x: f64, y: f64, t: f64) -> f64 {
        t.cos() * self.gaussian(self.center1, x, y).g + t.sin() * self.gaussian(self.center2, x, y).g
    }

    /// `(A, B)` with `F(x, y, t) = cos t·A + sin t·B`.
    pub fn forcing_parts(&self, x: f64, y: f64) -> (f64, f64) {
        let (g1, s1) = self.spatial_operator(self.center1, x, y);
        let (g2, s2) = self.spatial_operator(self.center2, x, y);
        (g2 - s1, -g1 - s2)
    }

    pub fn forcing(&self, x: f64, y: f64, t: f64) -> f64 {
        let (a, b) = self.forcing_parts(x, y);
        t.cos() * a + t.sin() * b
    }

    pub fn initial(&self, x: f64, y: f64) -> f64 {
        self.exact(x, y, 0.0)
    }
}

struct Gaussian {
    g: f64,
    gx: f64,
    gy: f64,
    lap: f64,
}

/// Relative errors `‖num − ref‖_β / ‖ref‖_β`, β = 1, 2, ∞.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub e1: f64,
    pub e2: f64,
    pub einf: f64,
}

/// Plain vector norms over the entries where `mask` is set (all entries
/// when `mask` is `None`).
pub fn error_norms_masked(numeric: &[f64], reference: &[f64], mask: Option<&[bool]>) -> Result<ErrorNorms> {
    if numeric.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: numeric.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                got: m.len(),
            });
        }
    }
    let (mut d1, mut d2, mut dinf, mut r1, mut r2, mut rinf) = (0.0, 0.0, 0.0f64, 0.0, 0.0, 0.0f64);
    for (k, (&a, &b)) in numeric.iter().zip(reference).enumerate() {
        if mask.is_some_and(|m| !m[k]) {
            continue;
        }
        let d = (a - b).abs();
        d1 += d;
        d2 += d * d;
        dinf = dinf.max(d);
        r1 += b.abs();
        r2 += b * b;
        rinf = rinf.max(b.abs());
    }
    if r1 == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ErrorNorms {
        e1: d1 / r1,
        e2: (d2 / r2).sqrt(),
        einf: dinf / rinf,
    })
}

pub fn error_norms(numeric: &[f64], reference: &[f64]) -> Result<ErrorNorms> {
    error_norms_masked(numeric, reference, None)
}

/// Fluid nodes of a system; ghost values are extrapolations and are left
/// out of error measurements.
pub fn fluid_mask(sys: &SpatialSystem) -> Vec<bool> {
    (0..sys.n()).map(|u| sys.cls.unknown_class(u) != PointClass::Ghost).collect()
}

/// Crank–Nicolson with forcing for a fixed operator and step:
/// `(I − ½Δt·Op) cⁿ⁺¹ = (I + ½Δt·Op) cⁿ + ½Δt (Fⁿ + Fⁿ⁺¹)`.
/// Constraint rows are replaced by `C cⁿ⁺¹ = values`.
pub struct CnStepper {
    lhs: CsrMatrix,
    rhs: CsrMatrix,
    mask: Vec<bool>,
    precond: Ilu0,
    dt: f64,
    pub iterations: usize,
}

impl CnStepper {
    pub fn new(op: &CsrMatrix, constraints: &Constraints, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let n = op.nrows();
        if constraints.mask.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: constraints.mask.len(),
            });
        }
        let id = CsrMatrix::identity(n);
        let lhs = CsrMatrix::lin_comb(&[(1.0, &id), (-0.5 * dt, op)]).with_rows_replaced(&constraints.mask, &constraints.rows);
        let rhs = CsrMatrix::lin_comb(&[(1.0, &id), (0.5 * dt, op)]).with_rows_zeroed(&constraints.mask);
        let precond = Ilu0::new(&lhs);
        Ok(CnStepper {
            lhs,
            rhs,
            mask: constraints.mask.clone(),
            precond,
            dt,
            iterations: 0,
        })
    }

    pub fn step(&mut self, c: &[f64], f_now: &[f64], f_next: &[f64], values: &[f64]) -> Result<Vec<f64>> {
        let n = self.lhs.nrows();
        for len in [c.len(), f_now.len(), f_next.len(), values.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let mut b = self.rhs.mul_vec(c);
        for r in 0..n {
            b[r] = if self.mask[r] {
                values[r]
            } else {
                b[r] + 0.5 * self.dt * (f_now[r] + f_next[r])
            };
        }
        let mut x = c.to_vec();
        let opts = GmresOptions {
            tol: 1e-13,
            restart: 60,
            max_iter: 3000,
        };
        let stats = gmres(&self.lhs, &self.precond, &b, &mut x, opts);
        self.iterations += stats.iterations;
        if !(stats.converged || stats.relative_residual <= 1e-10) {
            return Err(Error::SolveFailed {
                order: 2,
                dt: self.dt,
                residual: stats.relative_residual,
                iterations: stats.iterations,
            });
        }
        Ok(x)
    }
}

/// Runs the forced Crank–Nicolson scheme with `Op = L + Q` (time factor
/// ≡ 1) from the exact initial data to `t_fin` and returns
/// `(numeric, exact)` at `t_fin`. Wall and ghost constraints follow the
/// exact solution.
pub fn solve_manufactured(sys: &SpatialSystem, case: &ManufacturedCase, dt: f64, t_fin: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t_fin > 0.0 && t_fin.is_finite()) {
        return Err(Error::param("t_fin", format!("must be positive, got {t_fin}")));
    }
    let steps = (t_fin / dt).round().max(1.0) as usize;
    let dt = t_fin / steps as f64;
    let op = CsrMatrix::lin_comb(&[(1.0, &sys.l), (1.0, &sys.q)]);
    let mut stepper = CnStepper::new(&op, &sys.constraints, dt)?;
    let parts: Vec<(f64, f64)> = (0..sys.n())
        .map(|u| {
            let (i, j) = sys.cls.node(u);
            let [x, y] = sys.cls.grid.point(i, j);
            case.forcing_parts(x, y)
        })
        .collect();
    let forcing = |t: f64| -> Vec<f64> {
        let (c, s) = (t.cos(), t.sin());
        parts.iter().map(|(a, b)| c * a + s * b).collect()
    };
    let mut c = sys.sample(|x, y| case.initial(x, y));
    let mut f_now = forcing(0.0);
    for k in 0..steps {
        let t_next = (k + 1) as f64 * dt;
        let f_next = forcing(t_next);
        let values = sys.constraint_values(&|x, y| case.exact(x, y, t_next))?;
        c = stepper.step(&c, &f_now, &f_next, &values)?;
        f_now = f_next;
    }
    let exact = sys.sample(|x, y| case.exact(x, y, t_fin));
    Ok((c, exact))
}
