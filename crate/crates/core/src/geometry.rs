//! Grids, level-set domains, node classification and boundary projection.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform square Cartesian grid on `[lower, upper]²` with `n + 1` nodes per side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    lower: f64,
    upper: f64,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, lower: f64, upper: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::param("n", format!("need at least 4 cells per side, got {n}")));
        }
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::param("bounds", format!("need upper > lower, got [{lower}, {upper}]")));
        }
        Ok(Self {
            n,
            lower,
            upper,
            h: (upper - lower) / n as f64,
        })
    }

    /// Number of cells per side.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Number of nodes per side (`n + 1`).
    pub fn side(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        self.side() * self.side()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn extent(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i == self.n {
            self.upper
        } else {
            self.lower + i as f64 * self.h
        }
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    /// Nearest node index along one axis (clamped to the grid).
    pub fn index_of(&self, x: f64) -> usize {
        let k = ((x - self.lower) / self.h).round();
        k.clamp(0.0, self.n as f64) as usize
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    pub fn node_of(&self, id: usize) -> (usize, usize) {
        (id % self.side(), id / self.side())
    }

    /// `(i + di, j + dj)` when it stays inside the grid.
    pub fn offset(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<(usize, usize)> {
        let ii = i as isize + di;
        let jj = j as isize + dj;
        let last = self.n as isize;
        (0..=last)
            .contains(&ii)
            .then_some(())
            .and((0..=last).contains(&jj).then_some((ii as usize, jj as usize)))
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }
}

/// Named obstacle shapes. The level set is positive inside the excluded
/// region and negative in the fluid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Plain square, no obstacle.
    None,
    /// Circular obstacle, signed-distance level set `R − |x − O|`.
    Circle { center: [f64; 2], radius: f64 },
    /// Fluid inside a sheared ellipse.
    Ellipse,
    /// Fluid inside a five-petal flower.
    Flower,
    /// Fluid inside a cardioid.
    Cardioid,
}

const ELLIPSE_ANGLE: f64 = std::f64::consts::FRAC_PI_6;

fn ellipse_offsets() -> (f64, f64) {
    (2f64.sqrt() / 20.0, 3f64.sqrt() / 30.0)
}

fn flower_center() -> (f64, f64) {
    (0.03 * 3f64.sqrt(), 0.04 * 2f64.sqrt())
}

fn cardioid_center() -> (f64, f64) {
    (0.04 * 3f64.sqrt() + 0.35, 0.05 * 2f64.sqrt())
}

/// Level-set description of the computational domain.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetDomain {
    pub shape: Shape,
}

impl LevelSetDomain {
    pub fn new(shape: Shape) -> Result<Self> {
        if let Shape::Circle { radius, .. } = shape {
            if !(radius > 0.0) {
                return Err(Error::param("radius", format!("must be positive, got {radius}")));
            }
        }
        Ok(Self { shape })
    }

    pub fn square() -> Self {
        Self { shape: Shape::None }
    }

    pub fn has_obstacle(&self) -> bool {
        !matches!(self.shape, Shape::None)
    }

    pub fn phi(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match self.shape {
            Shape::None => -1.0,
            Shape::Circle { center, radius } => radius - (x - center[0]).hypot(y - center[1]),
            Shape::Ellipse => {
                let (c, s) = (ELLIPSE_ANGLE.cos(), ELLIPSE_ANGLE.sin());
                let (x0, y0) = ellipse_offsets();
                let xx = c * x - s * y - x0;
                let yy = c * x + s * y - y0;
                xx * xx / 0.49 + yy * yy / 0.2025 - 1.0
            }
            Shape::Flower => {
                let (cx, cy) = flower_center();
                let (xx, yy) = (x - cx, y - cy);
                let r = xx.hypot(yy);
                let petals = yy.powi(5) + 5.0 * xx.powi(4) * yy - 10.0 * xx * xx * yy.powi(3);
                (r - 0.52 - petals) / (5.0 * r.powi(5))
            }
            Shape::Cardioid => {
                let (cx, cy) = cardioid_center();
                let (xx, yy) = (x - cx, y - cy);
                let r2 = xx * xx + yy * yy;
                let t = 3.0 * r2 - xx;
                t * t - r2
            }
        }
    }

    pub fn grad_phi(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        match self.shape {
            Shape::None => [0.0, 0.0],
            Shape::Circle { center, .. } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let r = dx.hypot(dy);
                if r == 0.0 {
                    [0.0, 0.0]
                } else {
                    [-dx / r, -dy / r]
                }
            }
            Shape::Ellipse => {
                let (c, s) = (ELLIPSE_ANGLE.cos(), ELLIPSE_ANGLE.sin());
                let (x0, y0) = ellipse_offsets();
                let xx = c * x - s * y - x0;
                let yy = c * x + s * y - y0;
                let (fx, fy) = (2.0 * xx / 0.49, 2.0 * yy / 0.2025);
                [fx * c + fy * c, -fx * s + fy * s]
            }
            Shape::Flower => {
                let (cx, cy) = flower_center();
                let (xx, yy) = (x - cx, y - cy);
                let r = xx.hypot(yy);
                let petals = yy.powi(5) + 5.0 * xx.powi(4) * yy - 10.0 * xx * xx * yy.powi(3);
                let num = r - 0.52 - petals;
                let den = 5.0 * r.powi(5);
                let dnum_x = xx / r - (20.0 * xx.powi(3) * yy - 20.0 * xx * yy.powi(3));
                let dnum_y = yy / r - (5.0 * yy.powi(4) + 5.0 * xx.powi(4) - 30.0 * xx * xx * yy * yy);
                let dden_x = 25.0 * r.powi(3) * xx;
                let dden_y = 25.0 * r.powi(3) * yy;
                [
                    (dnum_x * den - num * dden_x) / (den * den),
                    (dnum_y * den - num * dden_y) / (den * den),
                ]
            }
            Shape::Cardioid => {
                let (cx, cy) = cardioid_center();
                let (xx, yy) = (x - cx, y - cy);
                let r2 = xx * xx + yy * yy;
                let t = 3.0 * r2 - xx;
                [
                    2.0 * t * (6.0 * xx - 1.0) - 2.0 * xx,
                    2.0 * t * 6.0 * yy - 2.0 * yy,
                ]
            }
        }
    }

    /// Central-difference gradient, used where no analytic form is trusted.
    pub fn grad_phi_fd(&self, p: [f64; 2], step: f64) -> [f64; 2] {
        let [x, y] = p;
        [
            (self.phi([x + step, y]) - self.phi([x - step, y])) / (2.0 * step),
            (self.phi([x, y + step]) - self.phi([x, y - step])) / (2.0 * step),
        ]
    }
}

/// Role of a grid node in the discrete system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointClass {
    /// Fluid node whose full 5-point stencils fit in the grid.
    Interior,
    /// Fluid node one layer in from the square edge.
    NearWall,
    /// Fluid node on the square edge.
    Wall,
    /// Obstacle node with at least one fluid 4-neighbour.
    Ghost,
    /// Obstacle node that carries no unknown.
    Inactive,
}

impl PointClass {
    pub fn is_active(self) -> bool {
        !matches!(self, PointClass::Inactive)
    }

    pub fn is_fluid(self) -> bool {
        matches!(self, PointClass::Interior | PointClass::NearWall | PointClass::Wall)
    }
}

/// Closest boundary point of a ghost node together with the local frame
/// and the upwind offsets used by the bicubic stencil.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFrame {
    pub ghost: (usize, usize),
    pub point: [f64; 2],
    /// Unit normal pointing out of the fluid, into the obstacle.
    pub normal: [f64; 2],
    /// `(−n_y, n_x)`.
    pub tangent: [f64; 2],
    /// Offsets `s_α(α_B − α_G)/h`, in `[0, 1]`.
    pub theta: [f64; 2],
    pub sign: [i8; 2],
    /// Start of the 4×4 block in units of `s_α` from the ghost: `0` for the
    /// plain upwind block, negative when it had to slide back to fit.
    pub shift: [i8; 2],
}

const MAX_PROJECTION_ITERS: usize = 50;

fn sign_with_tie(d: f64) -> i8 {
    if d < 0.0 {
        -1
    } else {
        1
    }
}

/// Project ghost node `(i, j)` onto the zero level set and build its frame.
pub fn closest_boundary_point(
    grid: &Grid,
    node: (usize, usize),
    domain: &LevelSetDomain,
) -> Result<BoundaryFrame> {
    boundary_frame(grid, node, domain, 1.0)
}

fn boundary_frame(
    grid: &Grid,
    node: (usize, usize),
    domain: &LevelSetDomain,
    max_theta: f64,
) -> Result<BoundaryFrame> {
    let (i, j) = node;
    let h = grid.spacing();
    let g = grid.point(i, j);
    let (b, normal) = match domain.shape {
        Shape::None => {
            return Err(Error::param("shape", "no obstacle to project onto"));
        }
        Shape::Circle { center, radius } => {
            let (dx, dy) = (g[0] - center[0], g[1] - center[1]);
            let dist = dx.hypot(dy);
            if dist <= 1e-12 * h {
                return Err(Error::GridTooCoarse {
                    i,
                    j,
                    reason: "ghost node sits on the obstacle centre".into(),
                });
            }
            let b = [center[0] + radius * dx / dist, center[1] + radius * dy / dist];
            (b, [-dx / dist, -dy / dist])
        }
        _ => project_general(domain, g, h, node)?,
    };
    let d = [b[0] - g[0], b[1] - g[1]];
    let sign = [sign_with_tie(d[0]), sign_with_tie(d[1])];
    let theta = [
        f64::from(sign[0]) * d[0] / h,
        f64::from(sign[1]) * d[1] / h,
    ];
    // θ = 1 happens only when B coincides with a fluid node
    if theta.iter().any(|t| !(0.0..=max_theta + 1e-9).contains(t)) {
        return Err(Error::GridTooCoarse {
            i,
            j,
            reason: format!("boundary point is too far from the node (theta = {theta:?})"),
        });
    }
    Ok(BoundaryFrame {
        ghost: node,
        point: b,
        normal,
        tangent: [-normal[1], normal[0]],
        theta: theta.map(|t| t.min(max_theta)),
        sign,
        shift: [0, 0],
    })
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Closest point on `φ = 0` from `g`: alternate a damped Newton step on φ
/// with a tangential correction that aligns `x − g` with the normal.
fn project_general(
    domain: &LevelSetDomain,
    g: [f64; 2],
    h: f64,
    node: (usize, usize),
) -> Result<([f64; 2], [f64; 2])> {
    let phi_tol = 1e-12 * h;
    let tangential_tol = 1e-10 * h;
    let mut x = g;
    let mut phi = domain.phi(x);
    for _ in 0..MAX_PROJECTION_ITERS {
        // Newton on φ along the gradient, halving the step while |φ| grows
        let grad = domain.grad_phi(x);
        let gg = grad[0] * grad[0] + grad[1] * grad[1];
        if gg == 0.0 || !gg.is_finite() {
            break;
        }
        let mut step = 1.0;
        loop {
            let trial = [x[0] - step * phi * grad[0] / gg, x[1] - step * phi * grad[1] / gg];
            let trial_phi = domain.phi(trial);
            if trial_phi.abs() < phi.abs() || step < 1e-3 {
                x = trial;
                phi = trial_phi;
                break;
            }
            step *= 0.5;
        }
        let n = unit(domain.grad_phi(x));
        let d = [x[0] - g[0], x[1] - g[1]];
        let along = d[0] * n[0] + d[1] * n[1];
        let t = [d[0] - along * n[0], d[1] - along * n[1]];
        let t_norm = t[0].hypot(t[1]);
        if phi.abs() <= phi_tol && t_norm <= tangential_tol {
            return Ok((x, n));
        }
        x = [x[0] - t[0], x[1] - t[1]];
        phi = domain.phi(x);
    }
    Err(Error::ProjectionFailed {
        i: node.0,
        j: node.1,
        residual: phi.abs(),
    })
}

/// Node classes, the packing of active nodes into unknowns, and the
/// boundary frames of all ghost nodes.
#[derive(Clone, Debug)]
pub struct Classification {
    pub grid: Grid,
    classes: Vec<PointClass>,
    unknown_of_node: Vec<Option<usize>>,
    node_of_unknown: Vec<(usize, usize)>,
    frames: Vec<Option<BoundaryFrame>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub interior: usize,
    pub near_wall: usize,
    pub wall: usize,
    pub ghost: usize,
    pub inactive: usize,
}

impl ClassCounts {
    /// Fluid nodes (interior, near-wall and wall).
    pub fn fluid(&self) -> usize {
        self.interior + self.near_wall + self.wall
    }

    pub fn active(&self) -> usize {
        self.fluid() + self.ghost
    }
}

/// Obstacle membership of every node after nudging near-zero values of φ
/// into the fluid.
pub fn obstacle_mask(grid: &Grid, domain: &LevelSetDomain) -> Vec<bool> {
    let eps = 1e-14 * grid.spacing();
    (0..grid.node_count())
        .map(|id| {
            let (i, j) = grid.node_of(id);
            let phi = domain.phi(grid.point(i, j));
            phi > 0.0 && phi.abs() >= eps
        })
        .collect()
}

/// Block nodes of a placement, or `None` if any leaves the grid.
fn block_nodes(grid: &Grid, frame: &BoundaryFrame, shift: [i8; 2]) -> Option<Vec<(usize, usize)>> {
    let (i, j) = frame.ghost;
    let mut out = Vec::with_capacity(16);
    for my in 0..4isize {
        for mx in 0..4isize {
            let di = isize::from(frame.sign[0]) * (mx + isize::from(shift[0]));
            let dj = isize::from(frame.sign[1]) * (my + isize::from(shift[1]));
            out.push(grid.offset(i, j, di, dj)?);
        }
    }
    Some(out)
}

/// Pick the 4×4 block for a ghost. The plain upwind block is used when all
/// its nodes are active. Otherwise the block may slide back along `−s_α`
/// (the ghost stays inside it); among the placements the one needing the
/// fewest inactive nodes wins, then the one whose interpolation point is
/// closest to the block centre. Returns the frame and the inactive nodes
/// that must be promoted to ghosts.
fn choose_block(grid: &Grid, classes: &[PointClass], frame: BoundaryFrame) -> Option<(BoundaryFrame, Vec<(usize, usize)>)> {
    let missing = |nodes: &[(usize, usize)]| -> Vec<(usize, usize)> {
        nodes
            .iter()
            .copied()
            .filter(|&(a, b)| !classes[grid.node_id(a, b)].is_active())
            .collect()
    };
    if let Some(nodes) = block_nodes(grid, &frame, [0, 0]) {
        if missing(&nodes).is_empty() {
            return Some((frame, Vec::new()));
        }
    }
    let mut best: Option<(usize, f64, [i8; 2], Vec<(usize, usize)>)> = None;
    for sy in (-3i8..=0).rev() {
        for sx in (-3i8..=0).rev() {
            let Some(nodes) = block_nodes(grid, &frame, [sx, sy]) else {
                continue;
            };
            let miss = missing(&nodes);
            let cost = (frame.theta[0] - f64::from(sx) - 1.5).abs() + (frame.theta[1] - f64::from(sy) - 1.5).abs();
            let better = match &best {
                None => true,
                Some((m, c, _, _)) => miss.len() < *m || (miss.len() == *m && cost < *c),
            };
            if better {
                best = Some((miss.len(), cost, [sx, sy], miss));
            }
        }
    }
    best.map(|(_, _, shift, miss)| (BoundaryFrame { shift, ..frame }, miss))
}

/// Upper bound on θ for ghosts added because a stencil needed them.
const PROMOTED_MAX_THETA: f64 = 3.0;

pub fn classify(grid: &Grid, domain: &LevelSetDomain) -> Result<Classification> {
    let inside = obstacle_mask(grid, domain);
    let last = grid.cells();
    let mut classes = vec![PointClass::Inactive; grid.node_count()];
    for j in 0..=last {
        for i in 0..=last {
            let id = grid.node_id(i, j);
            classes[id] = if inside[id] {
                // fluid neighbours on the square edge carry wall rows and never
                // reach into the obstacle, so they do not need this node
                let has_fluid_neighbour = [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|&(di, dj)| {
                    grid.offset(i, j, di, dj)
                        .is_some_and(|(a, b)| !inside[grid.node_id(a, b)] && !grid.is_edge(a, b))
                });
                if has_fluid_neighbour {
                    PointClass::Ghost
                } else {
                    PointClass::Inactive
                }
            } else if grid.is_edge(i, j) {
                PointClass::Wall
            } else if i == 1 || j == 1 || i == last - 1 || j == last - 1 {
                PointClass::NearWall
            } else {
                PointClass::Interior
            };
        }
    }

    // ghosts whose blocks reach inactive nodes promote those nodes to ghosts
    let mut frames: Vec<Option<BoundaryFrame>> = vec![None; grid.node_count()];
    let mut queue: std::collections::VecDeque<usize> =
        (0..grid.node_count()).filter(|&id| classes[id] == PointClass::Ghost).collect();
    let first_layer = queue.len();
    let mut promoted = vec![false; grid.node_count()];
    while let Some(id) = queue.pop_front() {
        let node = grid.node_of(id);
        let max_theta = if promoted[id] { PROMOTED_MAX_THETA } else { 1.0 };
        let frame = boundary_frame(grid, node, domain, max_theta)?;
        let (frame, missing) = choose_block(grid, &classes, frame).ok_or_else(|| Error::GridTooCoarse {
            i: node.0,
            j: node.1,
            reason: "upwind 16-point stencil leaves the grid".into(),
        })?;
        for (a, b) in missing {
            let nid = grid.node_id(a, b);
            classes[nid] = PointClass::Ghost;
            promoted[nid] = true;
            queue.push_back(nid);
        }
        frames[id] = Some(frame);
        if promoted.iter().filter(|p| **p).count() > 2 * first_layer + 16 {
            return Err(Error::GridTooCoarse {
                i: node.0,
                j: node.1,
                reason: "ghost stencils keep reaching deeper into the obstacle".into(),
            });
        }
    }

    let mut unknown_of_node = vec![None; grid.node_count()];
    let mut node_of_unknown = Vec::new();
    for (id, class) in classes.iter().enumerate() {
        if class.is_active() {
            unknown_of_node[id] = Some(node_of_unknown.len());
            node_of_unknown.push(grid.node_of(id));
        }
    }

    Ok(Classification {
        grid: *grid,
        classes,
        unknown_of_node,
        node_of_unknown,
        frames,
    })
}

impl Classification {
    pub fn class(&self, i: usize, j: usize) -> PointClass {
        self.classes[self.grid.node_id(i, j)]
    }

    /// Class of `(i + di, j + dj)`, or `None` when that lies off the grid.
    pub fn class_at(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<PointClass> {
        self.grid.offset(i, j, di, dj).map(|(a, b)| self.class(a, b))
    }

    pub fn unknown(&self, i: usize, j: usize) -> Option<usize> {
        self.unknown_of_node[self.grid.node_id(i, j)]
    }

    pub fn unknown_at(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<usize> {
        self.grid.offset(i, j, di, dj).and_then(|(a, b)| self.unknown(a, b))
    }

    pub fn node(&self, unknown: usize) -> (usize, usize) {
        self.node_of_unknown[unknown]
    }

    pub fn n_unknowns(&self) -> usize {
        self.node_of_unknown.len()
    }

    pub fn unknown_class(&self, unknown: usize) -> PointClass {
        let (i, j) = self.node(unknown);
        self.class(i, j)
    }

    pub fn frame(&self, i: usize, j: usize) -> Option<&BoundaryFrame> {
        self.frames[self.grid.node_id(i, j)].as_ref()
    }

    pub fn ghost_frames(&self) -> impl Iterator<Item = &BoundaryFrame> {
        self.frames.iter().flatten()
    }

    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for class in &self.classes {
            match class {
                PointClass::Interior => c.interior += 1,
                PointClass::NearWall => c.near_wall += 1,
                PointClass::Wall => c.wall += 1,
                PointClass::Ghost => c.ghost += 1,
                PointClass::Inactive => c.inactive += 1,
            }
        }
        c
    }

    /// Sample `f` at every active node, in unknown order.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.node_of_unknown
            .iter()
            .map(|&(i, j)| {
                let [x, y] = self.grid.point(i, j);
                f(x, y)
            })
            .collect()
    }
}
