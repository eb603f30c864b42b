//! Implicit step operators of orders 1–3 and time stepping.
//!
//! With `u = g(t/ε)·V` the semi-discrete system is `dc/dt = (L + g Q) c`
//! and one step solves `Aᵖ c^{n+1} = c^n` with
//!
//! ```text
//! A¹ = I − Δt L − m0 Q
//! A² = A¹ + ½Δt² L² + dLQ·LQ + dQL·QL + dQQ·Q²
//! A³ = A² − (Δt³/6 L³ + tLLQ·L²Q + tLQL·LQL + tLQQ·LQ² + tQLL·QL² + tQLQ·QLQ + tQQL·Q²L + tQQQ·Q³)
//! ```
//!
//! `L` and `Q` have their constraint rows zeroed, so the products never
//! pass through boundary rows; the constraint rows are written into `A`
//! afterwards and are the same for every order.

use crate::operators::Constraints;
use crate::sparse::{gmres, norm2, CsrMatrix, GmresOptions, Ilu0, LinearOperator, Preconditioner, SolveStats, SparseLu};
use crate::system::SpatialSystem;
use crate::timefactor::{integrals_for_step, StepIntegrals, TimeFactor};
use crate::{Error, Result};

/// Step operator `Aᵖ` for one interval, applied without forming products.
pub struct StepOperator<'a> {
    pub order: u8,
    pub integrals: StepIntegrals,
    l: &'a CsrMatrix,
    q: &'a CsrMatrix,
    constraints: &'a Constraints,
}

fn check_order(order: u8) -> Result<()> {
    if (1..=3).contains(&order) {
        Ok(())
    } else {
        Err(Error::param("order", format!("must be 1, 2 or 3, got {order}")))
    }
}

impl<'a> StepOperator<'a> {
    pub fn new(order: u8, l: &'a CsrMatrix, q: &'a CsrMatrix, constraints: &'a Constraints, integrals: StepIntegrals) -> Result<Self> {
        check_order(order)?;
        let n = l.nrows();
        for m in [l.ncols(), q.nrows(), q.ncols(), constraints.mask.len()] {
            if m != n {
                return Err(Error::DimensionMismatch { expected: n, got: m });
            }
        }
        Ok(StepOperator {
            order,
            integrals,
            l,
            q,
            constraints,
        })
    }

    /// Explicitly assembled `Aᵖ`.
    pub fn to_matrix(&self) -> CsrMatrix {
        assemble_a(self.order, self.l, self.q, &self.integrals, self.constraints)
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
    }
}

impl LinearOperator for StepOperator<'_> {
    fn dim(&self) -> usize {
        self.l.nrows()
    }

    // Eight mat-vecs for order 3: Lx, Qx, the four length-two words, and one
    // product with L and one with Q of the combined inner vectors.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        let s = &self.integrals;
        let dt = s.dt;
        let lx = self.l.mul_vec(x);
        let qx = self.q.mul_vec(x);
        y.copy_from_slice(x);
        axpy(y, -dt, &lx);
        axpy(y, -s.m0, &qx);
        if self.order >= 2 {
            let mut inner_l = vec![0.0; n];
            let mut inner_q = vec![0.0; n];
            axpy(&mut inner_l, 0.5 * dt * dt, &lx);
            axpy(&mut inner_l, s.d_lq, &qx);
            axpy(&mut inner_q, s.d_ql, &lx);
            axpy(&mut inner_q, s.d_qq, &qx);
            if self.order == 3 {
                let llx = self.l.mul_vec(&lx);
                let lqx = self.l.mul_vec(&qx);
                let qlx = self.q.mul_vec(&lx);
                let qqx = self.q.mul_vec(&qx);
                axpy(&mut inner_l, -dt * dt * dt / 6.0, &llx);
                axpy(&mut inner_l, -s.t_llq, &lqx);
                axpy(&mut inner_l, -s.t_lql, &qlx);
                axpy(&mut inner_l, -s.t_lqq, &qqx);
                axpy(&mut inner_q, -s.t_qll, &llx);
                axpy(&mut inner_q, -s.t_qlq, &lqx);
                axpy(&mut inner_q, -s.t_qql, &qlx);
                axpy(&mut inner_q, -s.t_qqq, &qqx);
            }
            axpy(y, 1.0, &self.l.mul_vec(&inner_l));
            axpy(y, 1.0, &self.q.mul_vec(&inner_q));
        }
        if self.constraints.mask.iter().any(|m| *m) {
            let cx = self.constraints.rows.mul_vec(x);
            for (r, m) in self.constraints.mask.iter().enumerate() {
                if *m {
                    y[r] = cx[r];
                }
            }
        }
    }
}

/// The fixed operator words up to length three.
pub struct Products {
    ll: CsrMatrix,
    lq: CsrMatrix,
    ql: CsrMatrix,
    qq: CsrMatrix,
    third: Option<[CsrMatrix; 8]>,
}

impl Products {
    pub fn new(order: u8, l: &CsrMatrix, q: &CsrMatrix) -> Self {
        let ll = l.matmul(l);
        let lq = l.matmul(q);
        let ql = q.matmul(l);
        let qq = q.matmul(q);
        let third = (order >= 3).then(|| {
            [
                l.matmul(&ll),
                l.matmul(&lq),
                l.matmul(&ql),
                l.matmul(&qq),
                q.matmul(&ll),
                q.matmul(&lq),
                q.matmul(&ql),
                q.matmul(&qq),
            ]
        });
        Products { ll, lq, ql, qq, third }
    }

    /// `Aᵖ` for one set of integrals, constraint rows overwritten.
    pub fn combine(&self, order: u8, l: &CsrMatrix, q: &CsrMatrix, s: &StepIntegrals, constraints: &Constraints) -> CsrMatrix {
        let n = l.nrows();
        let id = CsrMatrix::identity(n);
        let dt = s.dt;
        let mut terms = vec![(1.0, &id), (-dt, l), (-s.m0, q)];
        if order >= 2 {
            terms.extend([(0.5 * dt * dt, &self.ll), (s.d_lq, &self.lq), (s.d_ql, &self.ql), (s.d_qq, &self.qq)]);
        }
        if order >= 3 {
            let t = self.third.as_ref().expect("third-order words were built");
            let coef = [
                dt * dt * dt / 6.0,
                s.t_llq,
                s.t_lql,
                s.t_lqq,
                s.t_qll,
                s.t_qlq,
                s.t_qql,
                s.t_qqq,
            ];
            terms.extend(coef.iter().zip(t).map(|(c, m)| (-c, m)));
        }
        CsrMatrix::lin_comb(&terms).with_rows_replaced(&constraints.mask, &constraints.rows)
    }
}

/// Explicit `Aᵖ` from sparse products, with constraint rows overwritten.
pub fn assemble_a(order: u8, l: &CsrMatrix, q: &CsrMatrix, s: &StepIntegrals, constraints: &Constraints) -> CsrMatrix {
    if order == 1 {
        let id = CsrMatrix::identity(l.nrows());
        return CsrMatrix::lin_comb(&[(1.0, &id), (-s.dt, l), (-s.m0, q)]).with_rows_replaced(&constraints.mask, &constraints.rows);
    }
    Products::new(order, l, q).combine(order, l, q, s, constraints)
}

/// Which matrix the ILU(0) preconditioner is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondKind {
    /// Assembled `Aᵖ` for small systems, `A¹` otherwise.
    Auto,
    StepOne,
    Full,
}

/// Unknown count up to which [`PrecondKind::Auto`] assembles `Aᵖ`.
const FULL_PRECOND_LIMIT: usize = 6000;

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub gmres: GmresOptions,
    /// Relative residual accepted when GMRES stagnates short of `gmres.tol`.
    pub accept: f64,
    pub precond: PrecondKind,
    /// The preconditioner is rebuilt once some step integral of word
    /// length `k` drifts by more than `reuse_tol·Δtᵏ` from the one it was
    /// built for, or once a solve needs `stale_iters` more iterations than
    /// the first solve after the last rebuild.
    pub reuse_tol: f64,
    pub stale_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gmres: GmresOptions {
                tol: 1e-13,
                restart: 60,
                max_iter: 1000,
            },
            accept: 1e-10,
            precond: PrecondKind::Auto,
            reuse_tol: 1.0,
            stale_iters: 3,
        }
    }
}

/// Running totals over all solves of an [`Integrator`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub iterations: usize,
    pub factorizations: usize,
    /// Steps where GMRES fell short and a sparse LU took over.
    pub direct_solves: usize,
    pub worst_residual: f64,
}

/// Time stepper over a fixed spatial system.
pub struct Integrator<'a> {
    pub order: u8,
    pub g: TimeFactor,
    pub options: SolverOptions,
    l: &'a CsrMatrix,
    q: &'a CsrMatrix,
    constraints: &'a Constraints,
    cache: Option<(StepIntegrals, Ilu0)>,
    /// Iterations of the first solve with the current preconditioner, and
    /// whether a later solve has since drifted past it.
    fresh_iters: Option<usize>,
    stale: bool,
    products: Option<Products>,
    pub stats: IntegratorStats,
}

impl<'a> Integrator<'a> {
    pub fn new(sys: &'a SpatialSystem, g: TimeFactor, order: u8) -> Result<Self> {
        Self::from_parts(&sys.l, &sys.q, &sys.constraints, g, order)
    }

    pub fn from_parts(l: &'a CsrMatrix, q: &'a CsrMatrix, constraints: &'a Constraints, g: TimeFactor, order: u8) -> Result<Self> {
        check_order(order)?;
        Ok(Integrator {
            order,
            g,
            options: SolverOptions::default(),
            l,
            q,
            constraints,
            cache: None,
            fresh_iters: None,
            stale: false,
            products: None,
            stats: IntegratorStats::default(),
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn preconditioner(&mut self, op: &StepOperator<'_>) -> &Ilu0 {
        let tol = self.options.reuse_tol;
        let reuse = !self.stale && matches!(&self.cache, Some((s, _)) if integrals_close(s, &op.integrals, tol));
        if !reuse {
            let full = match self.options.precond {
                PrecondKind::Auto => op.dim() <= FULL_PRECOND_LIMIT,
                PrecondKind::StepOne => false,
                PrecondKind::Full => true,
            };
            let a = if full && op.order > 1 {
                let (l, q) = (self.l, self.q);
                let products = self.products.get_or_insert_with(|| Products::new(op.order, l, q));
                products.combine(op.order, l, q, &op.integrals, self.constraints)
            } else {
                assemble_a(1, self.l, self.q, &op.integrals, self.constraints)
            };
            self.cache = Some((op.integrals, Ilu0::new(&a)));
            self.fresh_iters = None;
            self.stale = false;
            self.stats.factorizations += 1;
        }
        &self.cache.as_ref().expect("preconditioner was just built").1
    }

    /// Advance `c` over `[t, t + dt]`. Constraint rows take `values`
    /// (boundary data) in place of `c`.
    pub fn step(&mut self, c: &[f64], t: f64, dt: f64, values: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.nrows();
        if c.len() != n || values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len().min(values.len()),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let integrals = integrals_for_step(&self.g, t, t + dt)?;
        let op = StepOperator::new(self.order, self.l, self.q, self.constraints, integrals)?;
        let mut b = c.to_vec();
        for (r, m) in self.constraints.mask.iter().enumerate() {
            if *m {
                b[r] = values[r];
            }
        }
        let opts = self.options;
        let mut x = c.to_vec();
        let mut stats = {
            let precond = self.preconditioner(&op);
            solve(&op, precond, &b, &mut x, opts)
        };
        match self.fresh_iters {
            None => self.fresh_iters = Some(stats.iterations),
            Some(f) => self.stale = stats.iterations > f + opts.stale_iters,
        }
        self.stats.steps += 1;
        self.stats.iterations += stats.iterations;
        if !(stats.converged || stats.relative_residual <= opts.accept) {
            // Large steps can push Aᵖ close to singular; factor it exactly.
            if let Some(lu) = SparseLu::new(&op.to_matrix()) {
                let y = lu.solve(&b);
                let mut r = vec![0.0; n];
                op.apply(&y, &mut r);
                r.iter_mut().zip(&b).for_each(|(r, b)| *r -= b);
                let rel = norm2(&r) / norm2(&b).max(f64::MIN_POSITIVE);
                if rel < stats.relative_residual {
                    x = y;
                    stats.relative_residual = rel;
                    stats.converged = rel <= opts.accept;
                }
                self.stats.direct_solves += 1;
            }
        }
        self.stats.worst_residual = self.stats.worst_residual.max(stats.relative_residual);
        if !(stats.converged || stats.relative_residual <= opts.accept) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolveFailed {
                order: self.order,
                dt,
                residual: stats.relative_residual,
                iterations: stats.iterations,
            });
        }
        Ok(x)
    }

    /// `steps` steps of size `dt` from `t0`. `observe` sees the initial
    /// field (step 0) and every new field.
    pub fn evolve(
        &mut self,
        c0: &[f64],
        t0: f64,
        dt: f64,
        steps: usize,
        values: &[f64],
        mut observe: impl FnMut(usize, f64, &[f64]),
    ) -> Result<Vec<f64>> {
        let mut c = c0.to_vec();
        observe(0, t0, &c);
        for k in 0..steps {
            let t = t0 + k as f64 * dt;
            c = self.step(&c, t, dt, values)?;
            observe(k + 1, t0 + (k + 1) as f64 * dt, &c);
        }
        Ok(c)
    }
}

// The preconditioner only needs to be close to the operator; GMRES absorbs
// the difference.
fn integrals_close(a: &StepIntegrals, b: &StepIntegrals, tol: f64) -> bool {
    use crate::timefactor::IntegralField;
    let scale = a.dt.abs().max(b.dt.abs());
    (a.dt - b.dt).abs() <= 1e-9 * scale
        && IntegralField::ALL.iter().all(|&f| {
            let order = f.word().len() as i32;
            (a.get(f) - b.get(f)).abs() <= tol * scale.powi(order)
        })
}

fn solve<A: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(a: &A, p: &P, b: &[f64], x: &mut [f64], opts: SolverOptions) -> SolveStats {
    gmres(a, p, b, x, opts.gmres)
}
