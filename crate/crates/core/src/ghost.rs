//! Ghost-point boundary rows built from the upwind 16-point bicubic stencil.
//!
//! A ghost row either pins the interpolated value at the boundary point
//! (Dirichlet, an algebraic constraint) or evolves the ghost unknown with
//! the adsorption condition `D ∂²c/∂τ² − (D/M) ∂c/∂n` evaluated at `B`.

use crate::geometry::{BoundaryFrame, Classification, PointClass};
use crate::operators::Constraints;
use crate::sparse::CsrMatrix;
use crate::{par, Error, Result};

/// Cubic Lagrange basis on nodes {0, 1, 2, 3} and its first two
/// derivatives, all with respect to the dimensionless coordinate.
fn lagrange_basis(t: f64) -> [[f64; 4]; 3] {
    let l = [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ];
    let d1 = [
        -(3.0 * t * t - 12.0 * t + 11.0) / 6.0,
        (3.0 * t * t - 10.0 * t + 6.0) / 2.0,
        -(3.0 * t * t - 8.0 * t + 3.0) / 2.0,
        (3.0 * t * t - 6.0 * t + 2.0) / 6.0,
    ];
    let d2 = [2.0 - t, 3.0 * t - 5.0, 4.0 - 3.0 * t, t - 1.0];
    [l, d1, d2]
}

/// `(l, h·l′, h²·l″)` at `θ ∈ [0, 1)`. Divide the derivative rows by `h`
/// and `h²` to get physical weights.
pub fn lagrange_weights(theta: f64) -> Result<[[f64; 4]; 3]> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::param("theta", format!("must lie in [0, 1), got {theta}")));
    }
    Ok(lagrange_basis(theta))
}

/// Interpolation weights for the value and derivatives at `B`, indexed
/// `k = 4·m_y + m_x` over the stencil block.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilWeights {
    pub nodes: [(usize, usize); 16],
    pub unknowns: [usize; 16],
    pub val: [f64; 16],
    pub dx: [f64; 16],
    pub dy: [f64; 16],
    pub dxx: [f64; 16],
    pub dyy: [f64; 16],
    pub dxy: [f64; 16],
}

impl StencilWeights {
    /// Apply one weight set to a field over unknowns.
    pub fn contract(w: &[f64; 16], unknowns: &[usize; 16], c: &[f64]) -> f64 {
        w.iter().zip(unknowns).map(|(w, u)| w * c[*u]).sum()
    }
}

/// Tensor-product weights over the 4×4 block of `frame`.
pub fn build_stencil(cls: &Classification, frame: &BoundaryFrame) -> Result<StencilWeights> {
    let grid = &cls.grid;
    let h = grid.spacing();
    let (gi, gj) = frame.ghost;
    let sx = f64::from(frame.sign[0]);
    let sy = f64::from(frame.sign[1]);
    // B sits at θ from the ghost; the block starts `shift` nodes from it
    let bx = lagrange_basis(frame.theta[0] - f64::from(frame.shift[0]));
    let by = lagrange_basis(frame.theta[1] - f64::from(frame.shift[1]));

    let mut w = StencilWeights {
        nodes: [(0, 0); 16],
        unknowns: [0; 16],
        val: [0.0; 16],
        dx: [0.0; 16],
        dy: [0.0; 16],
        dxx: [0.0; 16],
        dyy: [0.0; 16],
        dxy: [0.0; 16],
    };
    for my in 0..4 {
        for mx in 0..4 {
            let k = 4 * my + mx;
            let di = isize::from(frame.sign[0]) * (mx as isize + isize::from(frame.shift[0]));
            let dj = isize::from(frame.sign[1]) * (my as isize + isize::from(frame.shift[1]));
            let node = grid.offset(gi, gj, di, dj).ok_or(Error::StencilOutsideActive { i: gi, j: gj })?;
            let u = cls.unknown(node.0, node.1).ok_or(Error::StencilOutsideActive { i: gi, j: gj })?;
            w.nodes[k] = node;
            w.unknowns[k] = u;
            w.val[k] = bx[0][mx] * by[0][my];
            w.dx[k] = sx * bx[1][mx] * by[0][my] / h;
            w.dy[k] = sy * bx[0][mx] * by[1][my] / h;
            w.dxx[k] = bx[2][mx] * by[0][my] / (h * h);
            w.dyy[k] = bx[0][mx] * by[2][my] / (h * h);
            w.dxy[k] = sx * sy * bx[1][mx] * by[1][my] / (h * h);
        }
    }
    Ok(w)
}

fn collect_row(unknowns: &[usize; 16], coef: impl Fn(usize) -> f64) -> Vec<(usize, f64)> {
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(16);
    for (k, &u) in unknowns.iter().enumerate() {
        let v = coef(k);
        match row.iter_mut().find(|(c, _)| *c == u) {
            Some(e) => e.1 += v,
            None => row.push((u, v)),
        }
    }
    row.sort_by_key(|e| e.0);
    row
}

/// Constraint row `Σ w_val·c = f_B`.
pub fn ghost_row_dirichlet(weights: &StencilWeights, f_b: f64) -> (Vec<(usize, f64)>, f64) {
    (collect_row(&weights.unknowns, |k| weights.val[k]), f_b)
}

/// Evolution row `D (τ·∇)²c − (D/M) ∂c/∂n` at `B`.
pub fn ghost_row_robin(weights: &StencilWeights, frame: &BoundaryFrame, d: f64, m: f64) -> Result<Vec<(usize, f64)>> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param("M", format!("must be positive, got {m}")));
    }
    let [tx, ty] = frame.tangent;
    let [nx, ny] = frame.normal;
    Ok(collect_row(&weights.unknowns, |k| {
        let tangential = tx * tx * weights.dxx[k] + 2.0 * tx * ty * weights.dxy[k] + ty * ty * weights.dyy[k];
        let normal = nx * weights.dx[k] + ny * weights.dy[k];
        d * tangential - d / m * normal
    }))
}

fn ghost_unknowns(cls: &Classification) -> Vec<usize> {
    (0..cls.n_unknowns())
        .filter(|&u| cls.unknown_class(u) == PointClass::Ghost)
        .collect()
}

fn frame_of(cls: &Classification, u: usize) -> &BoundaryFrame {
    let (i, j) = cls.node(u);
    cls.frame(i, j).expect("ghost nodes carry a frame")
}

/// Dirichlet constraints on every ghost, with right-hand side `f(B)`.
pub fn dirichlet_ghost_constraints(
    cls: &Classification,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<(Constraints, Vec<f64>)> {
    let n = cls.n_unknowns();
    let ghosts = ghost_unknowns(cls);
    let built = par::map_jobs(&ghosts, |&u| {
        let frame = frame_of(cls, u);
        build_stencil(cls, frame).map(|w| ghost_row_dirichlet(&w, f(frame.point[0], frame.point[1])))
    });
    let mut rows = vec![Vec::new(); n];
    let mut mask = vec![false; n];
    let mut rhs = vec![0.0; n];
    for (&u, r) in ghosts.iter().zip(built) {
        let (row, value) = r?;
        rows[u] = row;
        mask[u] = true;
        rhs[u] = value;
    }
    Ok((
        Constraints {
            mask,
            rows: CsrMatrix::from_rows(n, rows),
        },
        rhs,
    ))
}

/// Adsorption rows for every ghost, as an `n × n` matrix that is nonzero
/// only in ghost rows (add it to the diffusion operator).
pub fn robin_ghost_rows(cls: &Classification, d: f64, m: f64) -> Result<CsrMatrix> {
    let n = cls.n_unknowns();
    let ghosts = ghost_unknowns(cls);
    let built = par::map_jobs(&ghosts, |&u| {
        let frame = frame_of(cls, u);
        build_stencil(cls, frame).and_then(|w| ghost_row_robin(&w, frame, d, m))
    });
    let mut rows = vec![Vec::new(); n];
    for (&u, r) in ghosts.iter().zip(built) {
        rows[u] = r?;
    }
    Ok(CsrMatrix::from_rows(n, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify, Grid, LevelSetDomain, Shape};
    use proptest::prelude::*;

    fn circle_cls(n: usize, r: f64) -> Classification {
        let g = Grid::new(n, -1.0, 1.0).unwrap();
        classify(
            &g,
            &LevelSetDomain::new(Shape::Circle {
                center: [0.0, 0.0],
                radius: r,
            })
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn nodal_values_at_zero() {
        let [l, _, d2] = lagrange_weights(0.0).unwrap();
        assert_eq!(l, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d2, [2.0, -5.0, 4.0, -1.0]);
    }

    #[test]
    fn basis_reproduces_cubic_at_half() {
        let p = |t: f64| t * t * t - 2.0 * t + 1.0;
        let [l, d1, d2] = lagrange_weights(0.5).unwrap();
        let v: f64 = (0..4).map(|k| l[k] * p(k as f64)).sum();
        let dv: f64 = (0..4).map(|k| d1[k] * p(k as f64)).sum();
        let ddv: f64 = (0..4).map(|k| d2[k] * p(k as f64)).sum();
        assert!((v - p(0.5)).abs() < 1e-15);
        assert!((dv - (3.0 * 0.25 - 2.0)).abs() < 1e-14);
        assert!((ddv - 3.0).abs() < 1e-14);
    }

    #[test]
    fn theta_outside_unit_interval_is_rejected() {
        assert!(lagrange_weights(1.0).is_err());
        assert!(lagrange_weights(-0.1).is_err());
        assert!(lagrange_weights(f64::NAN).is_err());
    }

    #[test]
    fn weight_sums_reproduce_constants() {
        let cls = circle_cls(60, 0.3);
        for f in cls.ghost_frames() {
            let w = build_stencil(&cls, f).unwrap();
            assert!((w.val.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let h2 = cls.grid.spacing().powi(2);
            for (set, scale) in [(&w.dx, cls.grid.spacing()), (&w.dy, cls.grid.spacing()), (&w.dxx, h2), (&w.dyy, h2), (&w.dxy, h2)] {
                assert!(set.iter().sum::<f64>().abs() * scale < 1e-12);
            }
        }
    }

    #[test]
    fn zero_theta_stencil_is_nodal() {
        let cls = circle_cls(20, 0.2);
        // the node (0.2, 0) lies exactly on the circle and is nudged into the fluid;
        // the ghost (0.1, 0) therefore sees B on the next node, not at its own position
        let f = cls.frame(11, 10).unwrap();
        let mut frame = f.clone();
        frame.theta = [0.0, 0.0];
        frame.shift = [0, 0];
        let w = build_stencil(&cls, &frame).unwrap();
        assert_eq!(w.val[0], 1.0);
        assert!(w.val[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stencil_is_upwind() {
        let cls = circle_cls(80, 0.2);
        for f in cls.ghost_frames() {
            let w = build_stencil(&cls, f).unwrap();
            let (gi, gj) = f.ghost;
            for &(i, j) in &w.nodes {
                let di = (i as isize - gi as isize) * isize::from(f.sign[0]);
                let dj = (j as isize - gj as isize) * isize::from(f.sign[1]);
                assert!(di >= isize::from(f.shift[0]) && dj >= isize::from(f.shift[1]));
            }
        }
    }

    #[test]
    fn bicubic_exactness_on_x3y2() {
        let q = |x: f64, y: f64| x.powi(3) * y * y;
        for shape in [
            Shape::Circle {
                center: [0.0, 0.0],
                radius: 0.2,
            },
            Shape::Ellipse,
            Shape::Flower,
            Shape::Cardioid,
        ] {
            let g = Grid::new(80, -1.0, 1.0).unwrap();
            let cls = classify(&g, &LevelSetDomain::new(shape).unwrap()).unwrap();
            let c = cls.sample(q);
            for f in cls.ghost_frames() {
                let w = build_stencil(&cls, f).unwrap();
                let [x, y] = f.point;
                let checks = [
                    (&w.val, q(x, y)),
                    (&w.dx, 3.0 * x * x * y * y),
                    (&w.dy, 2.0 * x.powi(3) * y),
                    (&w.dxx, 6.0 * x * y * y),
                    (&w.dyy, 2.0 * x.powi(3)),
                    (&w.dxy, 6.0 * x * x * y),
                ];
                for (set, exact) in checks {
                    let v = StencilWeights::contract(set, &w.unknowns, &c);
                    assert!((v - exact).abs() <= 1e-9 * (1.0 + exact.abs()), "{v} {exact}");
                }
            }
        }
    }

    #[test]
    fn dirichlet_rows_vanish_on_matching_data() {
        let cls = circle_cls(40, 0.2);
        let q = |x: f64, y: f64| x.powi(3) * y * y;
        let (cons, rhs) = dirichlet_ghost_constraints(&cls, &q).unwrap();
        let c = cls.sample(q);
        let r = cons.rows.mul_vec(&c);
        for u in 0..cls.n_unknowns() {
            if cons.mask[u] {
                assert!((r[u] - rhs[u]).abs() <= 1e-9);
            } else {
                assert_eq!(cons.rows.row_nnz(u), 0);
            }
        }
        let (_, ones) = dirichlet_ghost_constraints(&cls, &|_, _| 1.0).unwrap();
        let r = cons.rows.mul_vec(&vec![1.0; cls.n_unknowns()]);
        for u in 0..cls.n_unknowns() {
            if cons.mask[u] {
                assert!((r[u] - ones[u]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn robin_row_on_radial_and_linear_fields() {
        let r_b = 0.2;
        let cls = circle_cls(160, r_b);
        let (d, m) = (0.01, 0.02);
        let rows = robin_ghost_rows(&cls, d, m).unwrap();
        // c = |x|²: tangential second derivative 2, normal derivative −2R
        let radial = rows.mul_vec(&cls.sample(|x, y| x * x + y * y));
        let constant = rows.mul_vec(&vec![1.0; cls.n_unknowns()]);
        for f in cls.ghost_frames() {
            let u = cls.unknown(f.ghost.0, f.ghost.1).unwrap();
            let want = d * 2.0 - d / m * (-2.0 * r_b);
            assert!((radial[u] - want).abs() < 1e-9 * want.abs(), "{} {want}", radial[u]);
            assert!(constant[u].abs() < 1e-9);
            // c = n·x with this ghost's normal: tangential 0, normal 1
            let [nx, ny] = f.normal;
            let w = build_stencil(&cls, f).unwrap();
            let lin = cls.sample(|x, y| nx * x + ny * y);
            let row = ghost_row_robin(&w, f, d, m).unwrap();
            let v: f64 = row.iter().map(|(c, a)| a * lin[*c]).sum();
            assert!((v + d / m).abs() < 1e-9);
        }
    }

    #[test]
    fn robin_requires_positive_m() {
        let cls = circle_cls(40, 0.2);
        assert!(robin_ghost_rows(&cls, 0.01, 0.0).is_err());
    }

    #[test]
    fn rows_are_deterministic() {
        let cls = circle_cls(60, 0.25);
        let a = robin_ghost_rows(&cls, 0.01, 0.03).unwrap();
        let b = robin_ghost_rows(&cls, 0.01, 0.03).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn bicubic_exactness_random(
            coef in proptest::collection::vec(-1.0f64..1.0, 16),
            radius in 0.15f64..0.45,
            n in 40usize..100,
        ) {
            let cls = circle_cls(n, radius);
            let p = |x: f64, y: f64| {
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        s += coef[4 * b + a] * x.powi(a as i32) * y.powi(b as i32);
                    }
                }
                s
            };
            let px = |x: f64, y: f64| {
                let mut s = 0.0;
                for a in 1..4 {
                    for b in 0..4 {
                        s += coef[4 * b + a] * a as f64 * x.powi(a as i32 - 1) * y.powi(b as i32);
                    }
                }
                s
            };
            let pxy = |x: f64, y: f64| {
                let mut s = 0.0;
                for a in 1..4 {
                    for b in 1..4 {
                        s += coef[4 * b + a] * (a * b) as f64 * x.powi(a as i32 - 1) * y.powi(b as i32 - 1);
                    }
                }
                s
            };
            let c = cls.sample(p);
            for f in cls.ghost_frames() {
                let w = build_stencil(&cls, f).unwrap();
                let [x, y] = f.point;
                for (set, exact) in [(&w.val, p(x, y)), (&w.dx, px(x, y)), (&w.dxy, pxy(x, y))] {
                    let v = StencilWeights::contract(set, &w.unknowns, &c);
                    prop_assert!((v - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
                }
            }
        }
    }
}
