//! The semi-discrete system `dc/dt = (L + g(t/ε)·Q) c` on one geometry,
//! with its algebraic boundary rows.

use serde::{Deserialize, Serialize};

use crate::geometry::{classify, Classification, Grid, LevelSetDomain, PointClass};
use crate::ghost::{dirichlet_ghost_constraints, robin_ghost_rows};
use crate::operators::{advection, laplacian, wall_constraints, Constraints, SpatialOrder, VelocityField, VelocityKind, WallKind};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Condition imposed on the obstacle boundary through the ghost rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GhostBc {
    /// `c = f` on the boundary (algebraic row).
    Dirichlet,
    /// `dc/dt = D ∂²c/∂τ² − (D/M) ∂c/∂n` on the boundary (evolution row).
    Robin { m: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub domain: LevelSetDomain,
    pub cells: usize,
    pub lower: f64,
    pub upper: f64,
    pub diffusivity: f64,
    pub velocity: VelocityKind,
    pub order: SpatialOrder,
    pub wall: WallKind,
    pub ghost: GhostBc,
}

/// Assembled operators. `l` and `q` are zero in constraint rows; `q` is
/// also zero in ghost rows.
#[derive(Clone, Debug)]
pub struct SpatialSystem {
    pub cls: Classification,
    pub l: CsrMatrix,
    pub q: CsrMatrix,
    pub constraints: Constraints,
    pub velocity: VelocityField,
    pub spec: SystemSpec,
}

impl SpatialSystem {
    pub fn build(spec: SystemSpec) -> Result<Self> {
        if !(spec.diffusivity >= 0.0 && spec.diffusivity.is_finite()) {
            return Err(Error::param("D", format!("must be non-negative, got {}", spec.diffusivity)));
        }
        let grid = Grid::new(spec.cells, spec.lower, spec.upper)?;
        if spec.domain.has_obstacle() && spec.order != SpatialOrder::Fourth {
            return Err(Error::param("order", "obstacle domains need the fourth-order stencils"));
        }
        let cls = classify(&grid, &spec.domain)?;
        let n = cls.n_unknowns();
        let velocity = VelocityField::new(spec.velocity, &cls);
        let mut l = laplacian(&cls, spec.diffusivity, spec.order)?;
        let q = advection(&cls, &velocity, spec.order)?;

        let mut constraints = wall_constraints(&cls, spec.wall)?;
        if cls.counts().ghost > 0 {
            match spec.ghost {
                GhostBc::Dirichlet => {
                    let (ghost, _) = dirichlet_ghost_constraints(&cls, &|_, _| 0.0)?;
                    constraints = constraints.merge(&ghost)?;
                }
                GhostBc::Robin { m } => {
                    let rows = robin_ghost_rows(&cls, spec.diffusivity, m)?;
                    l = CsrMatrix::lin_comb(&[(1.0, &l), (1.0, &rows)]);
                }
            }
        }
        debug_assert_eq!(constraints.mask.len(), n);
        let l = l.with_rows_zeroed(&constraints.mask);
        let q = q.with_rows_zeroed(&constraints.mask);
        Ok(SpatialSystem {
            cls,
            l,
            q,
            constraints,
            velocity,
            spec,
        })
    }

    pub fn n(&self) -> usize {
        self.cls.n_unknowns()
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.cls.sample(f)
    }

    /// Values the constraint rows must equal for boundary data `f`: `f` at
    /// Dirichlet wall nodes, `f(B)` for Dirichlet ghosts, zero for Neumann
    /// rows and for unconstrained unknowns.
    pub fn constraint_values(&self, f: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Result<Vec<f64>> {
        let n = self.n();
        let mut out = vec![0.0; n];
        if self.spec.wall == WallKind::Dirichlet {
            for (u, v) in out.iter_mut().enumerate() {
                if self.cls.unknown_class(u) == PointClass::Wall {
                    let (i, j) = self.cls.node(u);
                    let [x, y] = self.cls.grid.point(i, j);
                    *v = f(x, y);
                }
            }
        }
        if self.spec.ghost == GhostBc::Dirichlet && self.cls.counts().ghost > 0 {
            let (cons, rhs) = dirichlet_ghost_constraints(&self.cls, f)?;
            for u in 0..n {
                if cons.mask[u] {
                    out[u] = rhs[u];
                }
            }
        }
        Ok(out)
    }

    /// Residual of the constraint rows: `C c − values` on masked rows.
    pub fn constraint_residual(&self, c: &[f64], values: &[f64]) -> f64 {
        let r = self.constraints.rows.mul_vec(c);
        (0..self.n())
            .filter(|&u| self.constraints.mask[u])
            .map(|u| (r[u] - values[u]).abs())
            .fold(0.0, f64::max)
    }
}
