//! Sparse diffusion and advection operators over the active unknowns.
//!
//! Rows are assembled for fluid nodes off the square edge (interior and
//! near-wall nodes). Wall and ghost rows are left empty here; they are filled
//! by [`wall_constraints`] and the [`crate::ghost`] module.
//!
//! Where a fourth-order stencil reaches a node at distance two that is off
//! the grid or inactive, that value is eliminated with the cubic
//! extrapolation `c₋₂ = 4c₁ + 4c₋₁ − c₂ − 6c₀`. For the second derivative this
//! gives the plain three-point stencil; for the first derivative it gives a
//! third-order one-sided-biased stencil. If both far nodes are missing the
//! three-point stencils are used.

use serde::{Deserialize, Serialize};

use crate::geometry::{Classification, PointClass};
use crate::par;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Spatial part `V(x, y)` of a separable velocity `u = g(t/ε)·V`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityKind {
    /// `V = (ux, uy)`.
    Constant { ux: f64, uy: f64 },
    /// `V = A·(x³, y³)`.
    Cubic { amplitude: f64 },
    /// `V = A·(x, y)/(x² + y² + γ)`.
    Radial { amplitude: f64, gamma: f64 },
}

impl VelocityKind {
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            VelocityKind::Constant { ux, uy } => [ux, uy],
            VelocityKind::Cubic { amplitude } => [amplitude * x.powi(3), amplitude * y.powi(3)],
            VelocityKind::Radial { amplitude, gamma } => {
                let r = x * x + y * y + gamma;
                [amplitude * x / r, amplitude * y / r]
            }
        }
    }

    /// `∇·V`.
    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        match *self {
            VelocityKind::Constant { .. } => 0.0,
            VelocityKind::Cubic { amplitude } => 3.0 * amplitude * (x * x + y * y),
            VelocityKind::Radial { amplitude, gamma } => {
                let r = x * x + y * y + gamma;
                amplitude * 2.0 * gamma / (r * r)
            }
        }
    }
}

/// Velocity spatial factor sampled at every active unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub kind: VelocityKind,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

impl VelocityField {
    pub fn new(kind: VelocityKind, cls: &Classification) -> Self {
        let (vx, vy) = (0..cls.n_unknowns())
            .map(|u| {
                let (i, j) = cls.node(u);
                let [x, y] = cls.grid.point(i, j);
                let v = kind.eval(x, y);
                (v[0], v[1])
            })
            .unzip();
        VelocityField { kind, vx, vy }
    }
}

/// Interior order of the finite-difference stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialOrder {
    Second,
    Fourth,
}

const D2_FULL: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
const D2_SHORT: [f64; 5] = [0.0, 1.0, -2.0, 1.0, 0.0];
const D1_FULL: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D1_SHORT: [f64; 5] = [0.0, -0.5, 0.0, 0.5, 0.0];

/// Substitute the missing far value `c[missing]` (index 0 or 4) by the cubic
/// extrapolation through the remaining four nodes.
fn eliminate(mut w: [f64; 5], missing: usize) -> [f64; 5] {
    let other = 4 - missing;
    let c = w[missing];
    w[missing] = 0.0;
    w[1] += 4.0 * c;
    w[3] += 4.0 * c;
    w[other] -= c;
    w[2] -= 6.0 * c;
    w
}

/// One-dimensional weights on offsets `−2..=2`, unscaled by `h`.
pub fn axis_weights(full: [f64; 5], short: [f64; 5], has_m2: bool, has_p2: bool) -> [f64; 5] {
    match (has_m2, has_p2) {
        (true, true) => full,
        (false, true) => eliminate(full, 0),
        (true, false) => eliminate(full, 4),
        (false, false) => short,
    }
}

fn has_row(class: PointClass) -> bool {
    matches!(class, PointClass::Interior | PointClass::NearWall)
}

/// Row of `Σ_axis Σ_k a_axis[k]·(coef(k-th node))·c` over the cross stencil.
fn assemble_rows(
    cls: &Classification,
    order: SpatialOrder,
    full: [f64; 5],
    short: [f64; 5],
    scale: [f64; 2],
    coef: &(dyn Fn(usize, usize) -> f64 + Sync),
) -> Result<CsrMatrix> {
    let n = cls.n_unknowns();
    let rows: Vec<Result<Vec<(usize, f64)>>> = par::map_range(n, |u| {
        let (i, j) = cls.node(u);
        if !has_row(cls.class(i, j)) {
            return Ok(Vec::new());
        }
        let mut row = Vec::with_capacity(9);
        for (axis, &s) in scale.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let step = |k: isize| if axis == 0 { (k, 0) } else { (0, k) };
            let col = |k: isize| {
                let (di, dj) = step(k);
                cls.unknown_at(i, j, di, dj)
            };
            let w = match order {
                SpatialOrder::Second => short,
                SpatialOrder::Fourth => axis_weights(full, short, col(-2).is_some(), col(2).is_some()),
            };
            for (idx, &wk) in w.iter().enumerate() {
                if wk == 0.0 && idx != 2 {
                    continue;
                }
                let k = idx as isize - 2;
                let c = col(k).ok_or(Error::StencilOutsideActive { i, j })?;
                row.push((c, s * wk * coef(c, axis)));
            }
        }
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CsrMatrix::from_rows(n, rows))
}

/// `D·Δ` with the five-point stencil.
pub fn laplacian_2nd(cls: &Classification, d: f64) -> Result<CsrMatrix> {
    let h2 = cls.grid.spacing().powi(2);
    assemble_rows(cls, SpatialOrder::Second, D2_FULL, D2_SHORT, [d / h2, d / h2], &|_, _| 1.0)
}

/// `u·(∂x + ∂y)` with central differences.
pub fn advection_2nd(cls: &Classification, u: f64) -> Result<CsrMatrix> {
    let h = cls.grid.spacing();
    assemble_rows(cls, SpatialOrder::Second, D1_FULL, D1_SHORT, [u / h, u / h], &|_, _| 1.0)
}

/// `D·Δ` with the fourth-order nine-point cross stencil.
pub fn laplacian_4th(cls: &Classification, d: f64) -> Result<CsrMatrix> {
    let h2 = cls.grid.spacing().powi(2);
    assemble_rows(cls, SpatialOrder::Fourth, D2_FULL, D2_SHORT, [d / h2, d / h2], &|_, _| 1.0)
}

/// `u·(∂x + ∂y)` with fourth-order central differences.
pub fn advection_4th_const(cls: &Classification, u: f64) -> Result<CsrMatrix> {
    let h = cls.grid.spacing();
    assemble_rows(cls, SpatialOrder::Fourth, D1_FULL, D1_SHORT, [u / h, u / h], &|_, _| 1.0)
}

/// Conservative `∇·(V c)`: each weight multiplies `V` at the same node as `c`.
pub fn advection_4th_variable(cls: &Classification, v: &VelocityField) -> Result<CsrMatrix> {
    let n = cls.n_unknowns();
    if v.vx.len() != n || v.vy.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.vx.len().min(v.vy.len()),
        });
    }
    let h = cls.grid.spacing();
    assemble_rows(cls, SpatialOrder::Fourth, D1_FULL, D1_SHORT, [1.0 / h, 1.0 / h], &|c, axis| {
        if axis == 0 {
            v.vx[c]
        } else {
            v.vy[c]
        }
    })
}

/// Conservative `∇·(V c)` of the requested order.
pub fn advection(cls: &Classification, v: &VelocityField, order: SpatialOrder) -> Result<CsrMatrix> {
    match order {
        SpatialOrder::Fourth => advection_4th_variable(cls, v),
        SpatialOrder::Second => {
            let n = cls.n_unknowns();
            if v.vx.len() != n || v.vy.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.vx.len().min(v.vy.len()),
                });
            }
            let h = cls.grid.spacing();
            assemble_rows(cls, SpatialOrder::Second, D1_FULL, D1_SHORT, [1.0 / h, 1.0 / h], &|c, axis| {
                if axis == 0 {
                    v.vx[c]
                } else {
                    v.vy[c]
                }
            })
        }
    }
}

/// Diffusion operator of the requested order.
pub fn laplacian(cls: &Classification, d: f64, order: SpatialOrder) -> Result<CsrMatrix> {
    match order {
        SpatialOrder::Second => laplacian_2nd(cls, d),
        SpatialOrder::Fourth => laplacian_4th(cls, d),
    }
}

/// Condition on the square edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallKind {
    /// `c = f` on the edge.
    Dirichlet,
    /// `∇c·n = 0` on the edge.
    Neumann,
}

/// One-sided fourth-order first derivative, normalized to a unit diagonal:
/// `(−25c₀ + 48c₁ − 36c₂ + 16c₃ − 3c₄)/(12h)` divided by `−25/(12h)`.
pub const NEUMANN_ROW: [f64; 5] = [1.0, -48.0 / 25.0, 36.0 / 25.0, -16.0 / 25.0, 3.0 / 25.0];

/// Algebraic rows that replace the evolution equation at some unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraints {
    pub mask: Vec<bool>,
    /// `n × n`, nonzero only in masked rows.
    pub rows: CsrMatrix,
}

impl Constraints {
    pub fn none(n: usize) -> Self {
        Constraints {
            mask: vec![false; n],
            rows: CsrMatrix::zeros(n, n),
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Union with another set of constraint rows on disjoint unknowns.
    pub fn merge(&self, other: &Constraints) -> Result<Constraints> {
        let n = self.mask.len();
        if other.mask.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: other.mask.len(),
            });
        }
        let mask: Vec<bool> = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        let rows = CsrMatrix::from_rows(
            n,
            (0..n)
                .map(|r| {
                    let src = if other.mask[r] { &other.rows } else { &self.rows };
                    let (c, v) = src.row(r);
                    c.iter().copied().zip(v.iter().copied()).collect()
                })
                .collect(),
        );
        Ok(Constraints { mask, rows })
    }
}

/// Wall rows: identity for Dirichlet, normalized one-sided normal derivative
/// for homogeneous Neumann (corners use the x direction).
pub fn wall_constraints(cls: &Classification, kind: WallKind) -> Result<Constraints> {
    let n = cls.n_unknowns();
    let last = cls.grid.cells();
    let mut mask = vec![false; n];
    let mut rows = vec![Vec::new(); n];
    for u in 0..n {
        let (i, j) = cls.node(u);
        if cls.class(i, j) != PointClass::Wall {
            continue;
        }
        mask[u] = true;
        rows[u] = match kind {
            WallKind::Dirichlet => vec![(u, 1.0)],
            WallKind::Neumann => {
                let (di, dj): (isize, isize) = if i == 0 {
                    (1, 0)
                } else if i == last {
                    (-1, 0)
                } else if j == 0 {
                    (0, 1)
                } else {
                    (0, -1)
                };
                NEUMANN_ROW
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| {
                        let k = k as isize;
                        cls.unknown_at(i, j, k * di, k * dj)
                            .map(|c| (c, w))
                            .ok_or(Error::StencilOutsideActive { i, j })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
    }
    Ok(Constraints {
        mask,
        rows: CsrMatrix::from_rows(n, rows),
    })
}

/// Wall boundary data for [`apply_wall_bc`].
pub enum WallBc<'a> {
    Dirichlet(&'a dyn Fn(f64, f64) -> f64),
    NeumannHomogeneous,
}

/// Replace the wall rows of `op` by boundary rows and return the matching
/// right-hand side (boundary values on wall rows, zero elsewhere).
pub fn apply_wall_bc(op: &CsrMatrix, cls: &Classification, bc: &WallBc<'_>) -> Result<(CsrMatrix, Vec<f64>)> {
    let kind = match bc {
        WallBc::Dirichlet(_) => WallKind::Dirichlet,
        WallBc::NeumannHomogeneous => WallKind::Neumann,
    };
    let cons = wall_constraints(cls, kind)?;
    let rhs = match bc {
        WallBc::Dirichlet(f) => boundary_values(cls, &cons.mask, f),
        WallBc::NeumannHomogeneous => vec![0.0; cls.n_unknowns()],
    };
    Ok((op.with_rows_replaced(&cons.mask, &cons.rows), rhs))
}

/// `f` sampled at the masked unknowns, zero elsewhere.
pub fn boundary_values(cls: &Classification, mask: &[bool], f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..cls.n_unknowns())
        .map(|u| {
            if mask[u] {
                let (i, j) = cls.node(u);
                let [x, y] = cls.grid.point(i, j);
                f(x, y)
            } else {
                0.0
            }
        })
        .collect()
}
