//! Experiment configuration, the studies behind the CLI subcommands, and
//! their CSV reports.
//!
//! A config is a TOML document with five tables (`domain`, `physics`,
//! `initial`, `discretization`, `output`); every field has a default and
//! can be overridden with a dotted `key=value` pair. Reports are CSV with a
//! header row; lines starting with `#` carry metadata (config hash,
//! timestamp, runtimes) and are the only part that differs between two
//! runs of the same config, except for the cpu-pareto timings.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{LevelSetDomain, PointClass, Shape};
use crate::integrator::Integrator;
use crate::mms::{error_norms_masked, fluid_mask, solve_manufactured, ErrorNorms, ManufacturedCase};
use crate::operators::{SpatialOrder, VelocityKind, WallKind};
use crate::quadrature::{compute_m, compute_m_simpson};
use crate::system::{GhostBc, SpatialSystem, SystemSpec};
use crate::timefactor::TimeFactor;
use crate::{par, Error, Result};

/// How the resolution `N` maps to grid cells on `[lower, upper]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridConvention {
    /// `N` cells across the box.
    #[default]
    Cells,
    /// `h = 1/N`, i.e. `N·(upper − lower)` cells.
    UnitSpacing,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleBc {
    #[default]
    Dirichlet,
    Robin,
}

/// What spatial errors are measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialReference {
    /// Manufactured solution, forced Crank–Nicolson runs.
    #[default]
    Exact,
    /// Unforced runs against the solution on `n_ref`, compared at shared nodes.
    FineGrid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    Time,
    Space,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: f64,
    pub upper: f64,
    pub shape: Shape,
    pub wall: WallKind,
    pub obstacle_bc: ObstacleBc,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            lower: -1.0,
            upper: 1.0,
            shape: Shape::None,
            wall: WallKind::Dirichlet,
            obstacle_bc: ObstacleBc::Dirichlet,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub diffusivity: f64,
    pub velocity: VelocityKind,
    /// Multiply the velocity by `cos(2πt/ε)`; off gives a steady field.
    pub oscillating: bool,
    pub epsilon: Vec<f64>,
    /// Adsorption length; computed from `(delta, phi, cutoff)` when absent.
    pub m: Option<f64>,
    pub delta: f64,
    pub phi: f64,
    pub cutoff: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            diffusivity: 0.02,
            velocity: VelocityKind::Cubic { amplitude: 1.0 },
            oscillating: true,
            epsilon: vec![1e-2],
            m: None,
            delta: 1e-2,
            phi: 1.0,
            cutoff: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub center: [f64; 2],
    /// Centre of the `sin t` Gaussian of the manufactured solution;
    /// defaults to `center`.
    pub second_center: Option<[f64; 2]>,
    pub sigma: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            center: [0.0, 0.0],
            second_center: None,
            sigma: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub n: usize,
    pub n_list: Vec<usize>,
    pub n_ref: Option<usize>,
    pub grid: GridConvention,
    pub spatial_order: SpatialOrder,
    /// Time-integrator order for single-order studies.
    pub order: u8,
    /// Orders compared by `detector` and `cpu-pareto`.
    pub orders: Vec<u8>,
    pub t_fin: f64,
    pub dt_ref: f64,
    pub n_ts: Vec<usize>,
    pub dt_list: Vec<f64>,
    pub reference: SpatialReference,
    pub sweep: SweepAxis,
    /// Points (from the fine end) in the least-squares order fit.
    pub fit_points: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            n: 160,
            n_list: vec![10, 20, 40, 80, 160],
            n_ref: None,
            grid: GridConvention::Cells,
            spatial_order: SpatialOrder::Fourth,
            order: 3,
            orders: vec![2, 3],
            t_fin: 0.1,
            dt_ref: 1e-5,
            n_ts: vec![10, 20, 40, 80, 160, 320, 640],
            dt_list: Vec::new(),
            reference: SpatialReference::Exact,
            sweep: SweepAxis::Time,
            fit_points: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub detector: [f64; 2],
    /// Detector sampling stride in steps.
    pub stride: usize,
    /// Also record the detector series at `dt_ref`.
    pub detector_reference: bool,
    /// cpu-pareto keeps the fastest of this many timed runs.
    pub timing_repeats: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv: None,
            detector: [0.35, 0.35],
            stride: 1,
            detector_reference: true,
            timing_repeats: 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub physics: PhysicsConfig,
    pub initial: InitialConfig,
    pub discretization: DiscretizationConfig,
    pub output: OutputConfig,
}

/// Set `a.b.c = value` in a TOML table. `value` is read as a TOML value
/// and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let (last, path) = parts.split_last().expect("key has at least one part");
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parse TOML, apply `key=value` overrides, validate.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<()> {
        let (d, p, i, s, o) = (&self.domain, &self.physics, &self.initial, &self.discretization, &self.output);
        if !(d.lower < d.upper) {
            return Err(Error::Config(format!("domain bounds [{}, {}] are empty", d.lower, d.upper)));
        }
        if p.epsilon.is_empty() {
            return Err(Error::Config("physics.epsilon is empty".into()));
        }
        for &e in &p.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Config(format!("epsilon must lie in (0, 1], got {e}")));
            }
        }
        if !(p.diffusivity >= 0.0 && p.diffusivity.is_finite()) {
            return Err(Error::Config(format!("diffusivity must be non-negative, got {}", p.diffusivity)));
        }
        if let Some(m) = p.m {
            positive("physics.m", m)?;
        }
        positive("initial.sigma", i.sigma)?;
        positive("discretization.t_fin", s.t_fin)?;
        positive("discretization.dt_ref", s.dt_ref)?;
        for &dt in &s.dt_list {
            positive("discretization.dt_list entry", dt)?;
        }
        if !(1..=3).contains(&s.order) || s.orders.iter().any(|o| !(1..=3).contains(o)) {
            return Err(Error::Config("time-integrator orders must be 1, 2 or 3".into()));
        }
        if s.n_list.is_empty() || s.n_ts.is_empty() {
            return Err(Error::Config("n_list and n_ts must be non-empty".into()));
        }
        let min_n = s.n_list.iter().copied().chain([s.n]).min().unwrap_or(0);
        if min_n < 4 || s.n_ts.contains(&0) {
            return Err(Error::Config("grid sizes must be at least 4 and step counts positive".into()));
        }
        if d.shape != Shape::None && min_n < 8 {
            return Err(Error::Config("obstacle domains need N >= 8".into()));
        }
        if s.fit_points < 3 {
            return Err(Error::Config("fit_points must be at least 3".into()));
        }
        if o.stride == 0 || o.timing_repeats == 0 {
            return Err(Error::Config("stride and timing_repeats must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self, n: usize) -> usize {
        match self.discretization.grid {
            GridConvention::Cells => n,
            GridConvention::UnitSpacing => (n as f64 * (self.domain.upper - self.domain.lower)).round() as usize,
        }
    }

    /// `M` and whether it was computed from `(δ, φ, L)`.
    pub fn adsorption_length(&self) -> Result<(f64, bool)> {
        match self.physics.m {
            Some(m) => Ok((m, false)),
            None => Ok((compute_m(self.physics.delta, self.physics.phi, self.physics.cutoff)?, true)),
        }
    }

    pub fn system(&self, n: usize) -> Result<SpatialSystem> {
        let ghost = match self.domain.obstacle_bc {
            ObstacleBc::Dirichlet => GhostBc::Dirichlet,
            ObstacleBc::Robin => GhostBc::Robin {
                m: self.adsorption_length()?.0,
            },
        };
        SpatialSystem::build(SystemSpec {
            domain: LevelSetDomain::new(self.domain.shape.clone())?,
            cells: self.cells(n),
            lower: self.domain.lower,
            upper: self.domain.upper,
            diffusivity: self.physics.diffusivity,
            velocity: self.physics.velocity,
            order: self.discretization.spatial_order,
            wall: self.domain.wall,
            ghost,
        })
    }

    pub fn time_factor(&self, epsilon: f64) -> Result<TimeFactor> {
        if self.physics.oscillating {
            TimeFactor::cosine(epsilon)
        } else {
            Ok(TimeFactor::Constant)
        }
    }

    pub fn initial(&self, x: f64, y: f64) -> f64 {
        let [cx, cy] = self.initial.center;
        let s = self.initial.sigma;
        (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
    }

    pub fn manufactured_case(&self) -> Result<ManufacturedCase> {
        let c = self.initial.center;
        ManufacturedCase::new(c, self.initial.second_center.unwrap_or(c), self.initial.sigma, self.physics.diffusivity, self.physics.velocity)
    }
}

/// Number of steps of size `dt` covering `[0, t_fin]`; `dt` must divide
/// `t_fin` up to rounding.
pub fn step_count(t_fin: f64, dt: f64) -> Result<usize> {
    let k = (t_fin / dt).round();
    if k < 1.0 || ((k * dt - t_fin).abs() > 1e-9 * t_fin) {
        return Err(Error::Config(format!("dt = {dt} does not divide t_fin = {t_fin}")));
    }
    Ok(k as usize)
}

/// Homogeneous-data run of the order-`order` integrator over `[0, t_fin]`
/// with `steps` equal steps.
pub fn simulate(
    sys: &SpatialSystem,
    g: TimeFactor,
    order: u8,
    steps: usize,
    t_fin: f64,
    c0: &[f64],
    observe: impl FnMut(usize, f64, &[f64]),
) -> Result<Vec<f64>> {
    let mut integ = Integrator::new(sys, g, order)?;
    let values = vec![0.0; sys.n()];
    integ.evolve(c0, 0.0, t_fin / steps as f64, steps, &values, observe)
}

/// Run metadata written as `#` lines.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub timestamp: u64,
    pub notes: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Metadata {
            command: command.to_string(),
            config_hash: cfg.hash(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            notes: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }
}

/// `v` with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_float)
}

/// A rendered report: metadata, header, rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub meta: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&format!("# command: {}\n", self.meta.command));
        out.push_str(&format!("# config_hash: {}\n", self.meta.config_hash));
        out.push_str(&format!("# timestamp: {}\n", self.meta.timestamp));
        for (k, v) in &self.meta.notes {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Least-squares slope of `−log e` against `log axis` (the convergence
/// order when `axis` is `N` or a step count). `None` for fewer than two
/// points or non-positive data.
pub fn fit_order(axis: &[f64], err: &[f64]) -> Option<f64> {
    if axis.len() != err.len() || axis.len() < 2 || axis.iter().chain(err).any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = axis.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergencePoint {
    /// `N` for spatial studies, number of steps for time studies.
    pub axis: f64,
    pub errors: ErrorNorms,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceBlock {
    pub epsilon: Option<f64>,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceBlock {
    pub fn axis(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis).collect()
    }

    pub fn e2(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.errors.e2).collect()
    }

    /// Order between consecutive points, from the second point on.
    pub fn local_orders(&self) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.points.windows(2) {
            out.push(fit_order(&[w[0].axis, w[1].axis], &[w[0].errors.e2, w[1].errors.e2]));
        }
        out
    }

    /// Least-squares L² order over the last `k` points.
    pub fn fitted_order(&self, k: usize) -> Option<f64> {
        if self.points.len() < 3 {
            return None;
        }
        let tail = &self.points[self.points.len().saturating_sub(k.max(3))..];
        let (a, e): (Vec<f64>, Vec<f64>) = tail.iter().map(|p| (p.axis, p.errors.e2)).unzip();
        fit_order(&a, &e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// `"N"` or `"N_ts"`.
    pub axis_name: &'static str,
    pub blocks: Vec<ConvergenceBlock>,
    pub fit_points: usize,
    pub meta: Metadata,
}

impl ConvergenceReport {
    pub fn to_table(&self) -> CsvTable {
        let mut meta = self.meta.clone();
        let mut rows = Vec::new();
        for b in &self.blocks {
            let eps = fmt_opt(b.epsilon);
            meta.note(
                &format!("fitted_order_e2[epsilon={eps}]"),
                b.fitted_order(self.fit_points).map_or("n/a".to_string(), fmt_float),
            );
            for (p, o) in b.points.iter().zip(b.local_orders()) {
                meta.note(&format!("runtime_s[epsilon={eps},{}={}]", self.axis_name, p.axis), format!("{:.3}", p.runtime_s));
                rows.push(vec![
                    eps.clone(),
                    format!("{}", p.axis),
                    fmt_float(p.errors.e1),
                    fmt_float(p.errors.e2),
                    fmt_float(p.errors.einf),
                    fmt_opt(o),
                ]);
            }
        }
        CsvTable {
            meta,
            header: ["epsilon", self.axis_name, "e1", "e2", "einf", "order"].map(String::from).to_vec(),
            rows,
        }
    }
}

/// Solution on a fine grid restricted to the unknowns of a coarse one.
/// Entries with no fine counterpart are `NaN` and masked out.
fn restrict(fine: &SpatialSystem, fine_c: &[f64], coarse: &SpatialSystem) -> Result<(Vec<f64>, Vec<bool>)> {
    let (nf, nc) = (fine.cls.grid.cells(), coarse.cls.grid.cells());
    if nf % nc != 0 {
        return Err(Error::Config(format!("reference grid {nf} is not a multiple of {nc}")));
    }
    let r = nf / nc;
    let fluid = fluid_mask(coarse);
    let mut vals = vec![f64::NAN; coarse.n()];
    let mut mask = vec![false; coarse.n()];
    for u in 0..coarse.n() {
        let (i, j) = coarse.cls.node(u);
        if let Some(k) = fine.cls.unknown(i * r, j * r) {
            vals[u] = fine_c[k];
            mask[u] = fluid[u];
        }
    }
    Ok((vals, mask))
}

/// Config spelling of a unit enum variant.
fn serde_name<T: Serialize>(v: &T) -> String {
    toml::Value::try_from(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Spatial convergence over `n_list`, against the manufactured solution or
/// a fine-grid run.
pub fn convergence_space(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let s = &cfg.discretization;
    let mut meta = Metadata::new("convergence-space", cfg);
    meta.note("reference", serde_name(&s.reference));
    meta.note("grid", serde_name(&s.grid));
    let blocks = match s.reference {
        SpatialReference::Exact => {
            if cfg.physics.oscillating {
                return Err(Error::Config("manufactured studies need a steady velocity (physics.oscillating = false)".into()));
            }
            let case = cfg.manufactured_case()?;
            let points = par::map_jobs(&s.n_list, |&n| -> Result<ConvergencePoint> {
                let start = Instant::now();
                let sys = cfg.system(n)?;
                let (num, exact) = solve_manufactured(&sys, &case, s.dt_ref, s.t_fin)?;
                let errors = error_norms_masked(&num, &exact, Some(&fluid_mask(&sys)))?;
                Ok(ConvergencePoint {
                    axis: n as f64,
                    errors,
                    runtime_s: elapsed(start),
                })
            });
            vec![ConvergenceBlock {
                epsilon: None,
                points: points.into_iter().collect::<Result<_>>()?,
            }]
        }
        SpatialReference::FineGrid => {
            let n_ref = s.n_ref.ok_or_else(|| Error::Config("fine_grid reference needs discretization.n_ref".into()))?;
            note_m(cfg, &mut meta)?;
            let steps = step_count(s.t_fin, s.dt_ref)?;
            let fine = cfg.system(n_ref)?;
            let coarse: Vec<SpatialSystem> = s.n_list.iter().map(|&n| cfg.system(n)).collect::<Result<_>>()?;
            let mut blocks = Vec::new();
            for &eps in &cfg.physics.epsilon {
                let g = cfg.time_factor(eps)?;
                let reference = simulate(&fine, g, s.order, steps, s.t_fin, &fine.sample(|x, y| cfg.initial(x, y)), |_, _, _| {})?;
                let points = par::map_jobs(&coarse.iter().zip(&s.n_list).collect::<Vec<_>>(), |(sys, n)| -> Result<ConvergencePoint> {
                    let start = Instant::now();
                    let c = simulate(sys, g, s.order, steps, s.t_fin, &sys.sample(|x, y| cfg.initial(x, y)), |_, _, _| {})?;
                    let (r, mask) = restrict(&fine, &reference, sys)?;
                    Ok(ConvergencePoint {
                        axis: **n as f64,
                        errors: error_norms_masked(&c, &r, Some(&mask))?,
                        runtime_s: elapsed(start),
                    })
                });
                blocks.push(ConvergenceBlock {
                    epsilon: cfg.physics.oscillating.then_some(eps),
                    points: points.into_iter().collect::<Result<_>>()?,
                });
                if !cfg.physics.oscillating {
                    break;
                }
            }
            blocks
        }
    };
    Ok(ConvergenceReport {
        axis_name: "N",
        blocks,
        fit_points: s.fit_points,
        meta,
    })
}

fn note_m(cfg: &ExperimentConfig, meta: &mut Metadata) -> Result<()> {
    if cfg.domain.obstacle_bc == ObstacleBc::Robin && cfg.domain.shape != Shape::None {
        let (m, computed) = cfg.adsorption_length()?;
        meta.note("m", fmt_float(m));
        meta.note("m_source", if computed { "compute_m(delta, phi, cutoff)" } else { "config" });
    }
    Ok(())
}

/// Self-referenced time errors for each `ε`, at the given step counts.
fn time_blocks(cfg: &ExperimentConfig, sys: &SpatialSystem, step_counts: &[usize]) -> Result<Vec<ConvergenceBlock>> {
    let s = &cfg.discretization;
    let ref_steps = step_count(s.t_fin, s.dt_ref)?;
    let c0 = sys.sample(|x, y| cfg.initial(x, y));
    let mask = fluid_mask(sys);
    let blocks = par::map_jobs(&cfg.physics.epsilon, |&eps| -> Result<ConvergenceBlock> {
        let g = cfg.time_factor(eps)?;
        let reference = simulate(sys, g, s.order, ref_steps, s.t_fin, &c0, |_, _, _| {})?;
        let points = step_counts
            .iter()
            .map(|&k| {
                let start = Instant::now();
                let c = simulate(sys, g, s.order, k, s.t_fin, &c0, |_, _, _| {})?;
                Ok(ConvergencePoint {
                    axis: k as f64,
                    errors: error_norms_masked(&c, &reference, Some(&mask))?,
                    runtime_s: elapsed(start),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ConvergenceBlock {
            epsilon: Some(eps),
            points,
        })
    });
    blocks.into_iter().collect()
}

/// Time convergence over `n_ts` steps per run, one block per `ε`.
pub fn convergence_time(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let s = &cfg.discretization;
    let mut meta = Metadata::new("convergence-time", cfg);
    meta.note("reference", format!("order {} with dt_ref = {}", s.order, fmt_float(s.dt_ref)));
    note_m(cfg, &mut meta)?;
    let sys = cfg.system(s.n)?;
    Ok(ConvergenceReport {
        axis_name: "N_ts",
        blocks: time_blocks(cfg, &sys, &s.n_ts)?,
        fit_points: s.fit_points,
        meta,
    })
}

/// Error as a function of `ε` at fixed `Δt` (time sweep) or fixed `N`
/// (space sweep, fine-grid reference).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsSweepReport {
    /// `"dt"` or `"N"`.
    pub axis_name: &'static str,
    pub axis: Vec<f64>,
    /// `(ε, L² error per axis value)`.
    pub rows: Vec<(f64, Vec<f64>)>,
    pub meta: Metadata,
}

impl EpsSweepReport {
    /// Largest relative spread `(max − min)/min` across `ε` per column.
    pub fn spread(&self) -> Vec<f64> {
        (0..self.axis.len())
            .map(|j| {
                let col: Vec<f64> = self.rows.iter().map(|r| r.1[j]).collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(0.0, f64::max);
                (hi - lo) / lo
            })
            .collect()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut header = vec!["epsilon".to_string()];
        header.extend(self.axis.iter().map(|a| format!("e2[{}={}]", self.axis_name, fmt_float(*a))));
        CsvTable {
            meta: self.meta.clone(),
            header,
            rows: self
                .rows
                .iter()
                .map(|(e, v)| std::iter::once(fmt_float(*e)).chain(v.iter().map(|x| fmt_float(*x))).collect())
                .collect(),
        }
    }
}

pub fn eps_sweep(cfg: &ExperimentConfig) -> Result<EpsSweepReport> {
    let s = &cfg.discretization;
    let mut meta = Metadata::new("eps-sweep", cfg);
    note_m(cfg, &mut meta)?;
    match s.sweep {
        SweepAxis::Time => {
            let counts: Vec<usize> = if s.dt_list.is_empty() {
                s.n_ts.clone()
            } else {
                s.dt_list.iter().map(|&dt| step_count(s.t_fin, dt)).collect::<Result<_>>()?
            };
            let sys = cfg.system(s.n)?;
            let blocks = time_blocks(cfg, &sys, &counts)?;
            Ok(EpsSweepReport {
                axis_name: "dt",
                axis: counts.iter().map(|&k| s.t_fin / k as f64).collect(),
                rows: blocks.iter().map(|b| (b.epsilon.unwrap_or(f64::NAN), b.e2())).collect(),
                meta,
            })
        }
        SweepAxis::Space => {
            if s.reference != SpatialReference::FineGrid || !cfg.physics.oscillating {
                return Err(Error::Config("a space eps-sweep needs reference = \"fine_grid\" and an oscillating velocity".into()));
            }
            let report = convergence_space(cfg)?;
            meta.notes.extend(report.meta.notes);
            Ok(EpsSweepReport {
                axis_name: "N",
                axis: s.n_list.iter().map(|&n| n as f64).collect(),
                rows: report.blocks.iter().map(|b| (b.epsilon.unwrap_or(f64::NAN), b.e2())).collect(),
                meta,
            })
        }
    }
}

fn lagrange4(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

/// Bicubic interpolation at a fixed point from a 4×4 block of active
/// unknowns surrounding it.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorProbe {
    pub point: [f64; 2],
    unknowns: [usize; 16],
    weights: [f64; 16],
}

impl DetectorProbe {
    pub fn new(sys: &SpatialSystem, point: [f64; 2]) -> Result<Self> {
        let [x, y] = point;
        let outside = || Error::DetectorOutsideFluid { x, y };
        let grid = &sys.cls.grid;
        let (lo, hi) = (grid.lower(), grid.upper());
        if !(x >= lo && x <= hi && y >= lo && y <= hi) || sys.spec.domain.phi(point) >= 0.0 {
            return Err(outside());
        }
        let n = grid.cells();
        let h = grid.spacing();
        let cell = |v: f64| (((v - lo) / h).floor() as usize).min(n - 1);
        let (ci, cj) = (cell(x), cell(y));
        // Candidate block starts containing the cell, most centred first.
        let starts = |c: usize| -> Vec<usize> {
            [1isize, 2, 0]
                .iter()
                .filter_map(|&back| {
                    let s = c as isize - back;
                    (s >= 0 && s as usize + 3 <= n).then_some(s as usize)
                })
                .collect()
        };
        for &bi in &starts(ci) {
            for &bj in &starts(cj) {
                let mut unknowns = [0; 16];
                let ok = (0..16).all(|k| {
                    let (a, b) = (bi + k % 4, bj + k / 4);
                    match sys.cls.unknown(a, b) {
                        Some(u) if sys.cls.unknown_class(u) != PointClass::Inactive => {
                            unknowns[k] = u;
                            true
                        }
                        _ => false,
                    }
                });
                if ok {
                    let wx = lagrange4((x - grid.coord(bi)) / h);
                    let wy = lagrange4((y - grid.coord(bj)) / h);
                    let weights = std::array::from_fn(|k| wx[k % 4] * wy[k / 4]);
                    return Ok(DetectorProbe { point, unknowns, weights });
                }
            }
        }
        Err(outside())
    }

    pub fn sample(&self, c: &[f64]) -> f64 {
        self.unknowns.iter().zip(&self.weights).map(|(&u, w)| w * c[u]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectorSeries {
    pub epsilon: f64,
    pub order: u8,
    pub dt: f64,
    pub samples: Vec<(f64, f64)>,
}

impl DetectorSeries {
    /// Largest difference to `reference` over the sample times both share.
    pub fn max_gap(&self, reference: &DetectorSeries) -> f64 {
        let tol = 1e-9 * self.dt.min(reference.dt);
        let mut gap: f64 = 0.0;
        let mut k = 0;
        for &(t, v) in &self.samples {
            while k < reference.samples.len() && reference.samples[k].0 < t - tol {
                k += 1;
            }
            if let Some(&(tr, vr)) = reference.samples.get(k) {
                if (tr - t).abs() <= tol {
                    gap = gap.max((v - vr).abs());
                }
            }
        }
        gap
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectorReport {
    pub series: Vec<DetectorSeries>,
    /// Order-3 run at `dt_ref`, one per `ε`, when requested.
    pub references: Vec<DetectorSeries>,
    pub meta: Metadata,
}

impl DetectorReport {
    pub fn to_table(&self) -> CsvTable {
        let mut rows = Vec::new();
        for (role, list) in [("run", &self.series), ("reference", &self.references)] {
            for s in list {
                for &(t, v) in &s.samples {
                    rows.push(vec![
                        role.to_string(),
                        fmt_float(s.epsilon),
                        s.order.to_string(),
                        fmt_float(s.dt),
                        fmt_float(t),
                        fmt_float(v),
                    ]);
                }
            }
        }
        CsvTable {
            meta: self.meta.clone(),
            header: ["role", "epsilon", "order", "dt", "t", "c"].map(String::from).to_vec(),
            rows,
        }
    }
}

fn detector_run(cfg: &ExperimentConfig, sys: &SpatialSystem, probe: &DetectorProbe, eps: f64, order: u8, dt: f64) -> Result<DetectorSeries> {
    let s = &cfg.discretization;
    let steps = step_count(s.t_fin, dt)?;
    let stride = cfg.output.stride;
    let mut samples = Vec::new();
    simulate(sys, cfg.time_factor(eps)?, order, steps, s.t_fin, &sys.sample(|x, y| cfg.initial(x, y)), |k, t, c| {
        if k % stride == 0 || k == steps {
            samples.push((t, probe.sample(c)));
        }
    })?;
    Ok(DetectorSeries {
        epsilon: eps,
        order,
        dt: s.t_fin / steps as f64,
        samples,
    })
}

/// Time series at the detector point for every `(ε, order, Δt)`.
pub fn detector(cfg: &ExperimentConfig) -> Result<DetectorReport> {
    let s = &cfg.discretization;
    let mut meta = Metadata::new("detector", cfg);
    meta.note("sampling", "bicubic interpolation on a 4x4 block of active nodes");
    note_m(cfg, &mut meta)?;
    let sys = cfg.system(s.n)?;
    let probe = DetectorProbe::new(&sys, cfg.output.detector)?;
    let dts = if s.dt_list.is_empty() { vec![s.t_fin / s.n_ts[0] as f64] } else { s.dt_list.clone() };
    let mut jobs = Vec::new();
    for &eps in &cfg.physics.epsilon {
        for &order in &s.orders {
            for &dt in &dts {
                jobs.push((eps, order, dt));
            }
        }
    }
    let series = par::map_jobs(&jobs, |&(eps, order, dt)| detector_run(cfg, &sys, &probe, eps, order, dt)).into_iter().collect::<Result<_>>()?;
    let references = if cfg.output.detector_reference {
        par::map_jobs(&cfg.physics.epsilon, |&eps| detector_run(cfg, &sys, &probe, eps, 3, s.dt_ref)).into_iter().collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(DetectorReport { series, references, meta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub order: u8,
    pub dt: f64,
    pub runtime_s: f64,
    pub errors: ErrorNorms,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParetoReport {
    pub points: Vec<ParetoPoint>,
    pub meta: Metadata,
}

fn loglog_interp(points: &[(f64, f64)], x: f64) -> f64 {
    let lx = x.ln();
    let seg = points
        .windows(2)
        .position(|w| lx <= w[1].0.ln())
        .unwrap_or(points.len() - 2);
    let ((x0, y0), (x1, y1)) = (points[seg], points[seg + 1]);
    let s = (y1.ln() - y0.ln()) / (x1.ln() - x0.ln());
    (y0.ln() + s * (lx - x0.ln())).exp()
}

impl ParetoReport {
    /// For the `k` smallest `Δt` of order `hi`: the L² error of order `lo`
    /// at the same runtime (log–log interpolation along its curve, linear
    /// extrapolation past the ends) divided by the order-`hi` error.
    pub fn advantage(&self, lo: u8, hi: u8, k: usize) -> Vec<f64> {
        let mut curve: Vec<(f64, f64)> = self.points.iter().filter(|p| p.order == lo).map(|p| (p.runtime_s, p.errors.e2)).collect();
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        if curve.len() < 2 {
            return Vec::new();
        }
        let mut top: Vec<&ParetoPoint> = self.points.iter().filter(|p| p.order == hi).collect();
        top.sort_by(|a, b| a.dt.total_cmp(&b.dt));
        top.iter().take(k).map(|p| loglog_interp(&curve, p.runtime_s) / p.errors.e2).collect()
    }

    pub fn to_table(&self) -> CsvTable {
        CsvTable {
            meta: self.meta.clone(),
            header: ["order", "dt", "runtime_s", "e1", "e2", "einf"].map(String::from).to_vec(),
            rows: self
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.order.to_string(),
                        fmt_float(p.dt),
                        fmt_float(p.runtime_s),
                        fmt_float(p.errors.e1),
                        fmt_float(p.errors.e2),
                        fmt_float(p.errors.einf),
                    ]
                })
                .collect(),
        }
    }
}

/// Wall time against error for each order in `orders` and `Δt` in
/// `dt_list`, at the first `ε`. Runs are timed one at a time.
pub fn cpu_pareto(cfg: &ExperimentConfig) -> Result<ParetoReport> {
    let s = &cfg.discretization;
    let mut meta = Metadata::new("cpu-pareto", cfg);
    note_m(cfg, &mut meta)?;
    let eps = cfg.physics.epsilon[0];
    let g = cfg.time_factor(eps)?;
    meta.note("epsilon", fmt_float(eps));
    meta.note("parallel", par::is_parallel());
    let sys = cfg.system(s.n)?;
    let c0 = sys.sample(|x, y| cfg.initial(x, y));
    let mask = fluid_mask(&sys);
    let reference = simulate(&sys, g, 3, step_count(s.t_fin, s.dt_ref)?, s.t_fin, &c0, |_, _, _| {})?;
    let dts = if s.dt_list.is_empty() { vec![s.t_fin / s.n_ts[0] as f64] } else { s.dt_list.clone() };
    let mut points = Vec::new();
    for &order in &s.orders {
        for &dt in &dts {
            let steps = step_count(s.t_fin, dt)?;
            let mut best = f64::INFINITY;
            let mut c = Vec::new();
            for _ in 0..cfg.output.timing_repeats {
                let start = Instant::now();
                c = simulate(&sys, g, order, steps, s.t_fin, &c0, |_, _, _| {})?;
                best = best.min(elapsed(start));
            }
            points.push(ParetoPoint {
                order,
                dt,
                runtime_s: best,
                errors: error_norms_masked(&c, &reference, Some(&mask))?,
            });
        }
    }
    Ok(ParetoReport { points, meta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MReport {
    pub delta: f64,
    pub phi: f64,
    pub cutoff: f64,
    /// Adaptive Gauss–Kronrod value.
    pub m: f64,
    /// Adaptive Simpson cross-check.
    pub m_check: f64,
}

pub fn m_report(delta: f64, phi: f64, cutoff: f64) -> Result<MReport> {
    Ok(MReport {
        delta,
        phi,
        cutoff,
        m: compute_m(delta, phi, cutoff)?,
        m_check: compute_m_simpson(delta, phi, cutoff)?,
    })
}

impl MReport {
    pub fn to_table(&self, cfg: &ExperimentConfig) -> CsvTable {
        CsvTable {
            meta: Metadata::new("compute-m", cfg),
            header: ["delta", "phi", "cutoff", "m", "m_simpson"].map(String::from).to_vec(),
            rows: vec![[self.delta, self.phi, self.cutoff, self.m, self.m_check].map(fmt_float).to_vec()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.discretization.n = 16;
        cfg.discretization.t_fin = 0.01;
        cfg.discretization.dt_ref = 1e-4;
        cfg.discretization.n_ts = vec![2, 4, 8];
        cfg.initial.sigma = 0.3;
        cfg
    }

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn overrides_and_validation() {
        let text = "[physics]\ndiffusivity = 0.5\n";
        let ov = vec![
            ("physics.epsilon".to_string(), "[1e-3, 1e-4]".to_string()),
            ("domain.shape.kind".to_string(), "circle".to_string()),
            ("domain.shape.center".to_string(), "[0.0, 0.0]".to_string()),
            ("domain.shape.radius".to_string(), "0.2".to_string()),
            ("discretization.grid".to_string(), "unit_spacing".to_string()),
        ];
        let cfg = ExperimentConfig::from_toml(text, &ov).unwrap();
        assert_eq!(cfg.physics.diffusivity, 0.5);
        assert_eq!(cfg.physics.epsilon, vec![1e-3, 1e-4]);
        assert_eq!(cfg.domain.shape, Shape::Circle { center: [0.0, 0.0], radius: 0.2 });
        assert_eq!(cfg.cells(160), 320);
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
        for bad in ["physics.epsilon=[2.0]", "discretization.t_fin=0", "discretization.order=4", "physics.bogus=1"] {
            let (k, v) = bad.split_once('=').unwrap();
            assert!(ExperimentConfig::from_toml("", &[(k.into(), v.into())]).is_err(), "{bad}");
        }
    }

    #[test]
    fn fit_order_recovers_power_law() {
        let n = [10.0, 20.0, 40.0, 80.0];
        let e: Vec<f64> = n.iter().map(|x: &f64| 3.0 * x.powf(-4.0)).collect();
        assert!((fit_order(&n, &e).unwrap() - 4.0).abs() < 1e-12);
        assert!(fit_order(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn step_count_requires_divisor() {
        assert_eq!(step_count(1.0, 1.0 / 30.0).unwrap(), 30);
        assert_eq!(step_count(0.1, 1e-5).unwrap(), 10_000);
        assert!(step_count(1.0, 0.3).is_err());
    }

    #[test]
    fn lagrange4_reproduces_cubics() {
        for &t in &[0.0, 0.4, 1.5, 2.9, 3.0] {
            let w = lagrange4(t);
            let p = |x: f64| 2.0 - x + 0.5 * x * x - 0.25 * x * x * x;
            let got: f64 = (0..4).map(|k| w[k] * p(k as f64)).sum();
            assert!((got - p(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn detector_interpolates_bicubic_fields_and_rejects_obstacles() {
        let mut cfg = small();
        cfg.discretization.n = 80;
        cfg.domain.shape = Shape::Circle {
            center: [0.0, 0.0],
            radius: 0.2,
        };
        cfg.domain.obstacle_bc = ObstacleBc::Robin;
        cfg.domain.wall = WallKind::Neumann;
        cfg.physics.velocity = VelocityKind::Radial { amplitude: 1.0, gamma: 0.0 };
        let sys = cfg.system(80).unwrap();
        let f = |x: f64, y: f64| x * x * x * y - 2.0 * y * y + x;
        let c = sys.sample(f);
        for p in [[0.35, 0.35], [0.0, -0.5], [-0.99, 0.99], [0.21, 0.0]] {
            let probe = DetectorProbe::new(&sys, p).unwrap();
            assert!((probe.sample(&c) - f(p[0], p[1])).abs() < 1e-12, "{p:?}");
        }
        for p in [[0.0, 0.0], [0.1, 0.1], [1.5, 0.0]] {
            assert!(matches!(DetectorProbe::new(&sys, p), Err(Error::DetectorOutsideFluid { .. })));
        }
    }

    #[test]
    fn constant_field_gives_constant_detector_series() {
        let mut cfg = small();
        cfg.domain.wall = WallKind::Neumann;
        cfg.physics.diffusivity = 0.0;
        cfg.physics.velocity = VelocityKind::Constant { ux: 0.0, uy: 0.0 };
        cfg.initial.sigma = 1e6;
        cfg.discretization.orders = vec![3];
        cfg.output.detector_reference = false;
        let report = detector(&cfg).unwrap();
        let s = &report.series[0];
        assert_eq!(s.samples.len(), cfg.discretization.n_ts[0] + 1);
        for &(_, v) in &s.samples {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn time_convergence_small_grid() {
        let mut cfg = small();
        cfg.physics.epsilon = vec![1e-2];
        cfg.discretization.order = 2;
        cfg.discretization.n_ts = vec![4, 8, 16];
        let report = convergence_time(&cfg).unwrap();
        let order = report.blocks[0].fitted_order(3).unwrap();
        assert!((order - 2.0).abs() < 0.3, "{order}");
        let table = report.to_table();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[0][2].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn reports_are_deterministic_apart_from_metadata() {
        let mut cfg = small();
        cfg.discretization.n_ts = vec![2, 4];
        let data = |t: &CsvTable| t.to_csv().unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
        let a = convergence_time(&cfg).unwrap().to_table();
        let b = convergence_time(&cfg).unwrap().to_table();
        assert_eq!(data(&a), data(&b));
        assert!(a.to_csv().unwrap().contains(&format!("# config_hash: {}", cfg.hash())));
    }

    #[test]
    fn pareto_rows_and_advantage() {
        let mut cfg = small();
        cfg.discretization.dt_list = vec![0.005];
        cfg.output.timing_repeats = 1;
        let r = cpu_pareto(&cfg).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points.iter().all(|p| p.runtime_s > 0.0));
        let synthetic = ParetoReport {
            points: [(2, 0.1, 1.0, 1e-2), (2, 0.05, 2.0, 2.5e-3), (3, 0.1, 1.0, 1e-3), (3, 0.05, 2.0, 1.25e-4)]
                .map(|(order, dt, runtime_s, e)| ParetoPoint {
                    order,
                    dt,
                    runtime_s,
                    errors: ErrorNorms { e1: e, e2: e, einf: e },
                })
                .to_vec(),
            meta: r.meta.clone(),
        };
        let adv = synthetic.advantage(2, 3, 2);
        assert!((adv[0] - 20.0).abs() < 1e-9 && (adv[1] - 10.0).abs() < 1e-9, "{adv:?}");
    }

    #[test]
    fn m_report_cross_checks() {
        let r = m_report(1e-2, 1.0, 2.0).unwrap();
        assert!(((r.m - r.m_check) / r.m).abs() < 1e-10);
        assert_eq!(m_report(0.5, 0.0, 2.0).unwrap().m, 1.5);
    }

    #[test]
    fn fine_grid_restriction_matches_shared_nodes() {
        let mut cfg = small();
        cfg.discretization.n_list = vec![8];
        let (coarse, fine) = (cfg.system(8).unwrap(), cfg.system(16).unwrap());
        let f = |x: f64, y: f64| x + 3.0 * y;
        let (r, mask) = restrict(&fine, &fine.sample(f), &coarse).unwrap();
        let exact = coarse.sample(f);
        for u in 0..coarse.n() {
            assert!(mask[u]);
            assert!((r[u] - exact[u]).abs() < 1e-14);
        }
        assert!(restrict(&fine, &fine.sample(f), &cfg.system(6).unwrap()).is_err());
    }
}
