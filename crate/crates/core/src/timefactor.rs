//! Scalar time factor `g(t/ε)` of a separable velocity and the nested time
//! integrals that enter the step operators.
//!
//! Every integral is a "word" `X₁X₂…Xₖ` over the letters `L` (weight 1) and
//! `Q` (weight `g`):
//!
//! ```text
//! ∫_a^b w₁(s) ∫_s^b w₂(σ) ∫_σ^b w₃(ρ) dρ dσ ds
//! ```
//!
//! Closed forms are obtained by carrying exponential polynomials
//! `c·uᵏ·e^{i m ν₀ u}` in the scaled variable `u = (s − a)/Δt` through exact
//! integration. When `ν₀ = 2πΔt/ε` is small the cosine is replaced by its
//! Taylor polynomial instead, which avoids the cancellation in repeated
//! integration by parts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFactor {
    /// `g ≡ 1`.
    Constant,
    /// `g(t) = cos(2πt/ε)`.
    Cosine { epsilon: f64 },
}

impl TimeFactor {
    pub fn cosine(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(TimeFactor::Cosine { epsilon })
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            TimeFactor::Constant => None,
            TimeFactor::Cosine { epsilon } => Some(epsilon),
        }
    }

    /// Phase `2π (t mod ε)/ε`, reduced exactly before scaling.
    fn phase(epsilon: f64, t: f64) -> f64 {
        TAU * t.rem_euclid(epsilon) / epsilon
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant => 1.0,
            TimeFactor::Cosine { epsilon } => Self::phase(epsilon, t).cos(),
        }
    }

    /// `g(a + τ)` with the phase of `a` reduced once, so that small offsets
    /// keep full relative precision.
    fn eval_offset(&self, a: f64, tau: f64) -> f64 {
        match *self {
            TimeFactor::Constant => 1.0,
            TimeFactor::Cosine { epsilon } => {
                (Self::phase(epsilon, a) + TAU * tau / epsilon).cos()
            }
        }
    }
}

/// All scalar time integrals for one step `[a, b]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepIntegrals {
    pub dt: f64,
    pub m0: f64,
    pub w10: f64,
    pub w01: f64,
    pub w20: f64,
    pub w11: f64,
    pub w02: f64,
    pub d_lq: f64,
    pub d_ql: f64,
    pub d_qq: f64,
    pub t_llq: f64,
    pub t_lql: f64,
    pub t_lqq: f64,
    pub t_qll: f64,
    pub t_qlq: f64,
    pub t_qql: f64,
    pub t_qqq: f64,
}

/// Names of the [`StepIntegrals`] fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntegralField {
    M0,
    W10,
    W01,
    W20,
    W11,
    W02,
    DLQ,
    DQL,
    DQQ,
    TLLQ,
    TLQL,
    TLQQ,
    TQLL,
    TQLQ,
    TQQL,
    TQQQ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Letter {
    L,
    Q,
}

impl IntegralField {
    pub const ALL: [IntegralField; 16] = [
        Self::M0,
        Self::W10,
        Self::W01,
        Self::W20,
        Self::W11,
        Self::W02,
        Self::DLQ,
        Self::DQL,
        Self::DQQ,
        Self::TLLQ,
        Self::TLQL,
        Self::TLQQ,
        Self::TQLL,
        Self::TQLQ,
        Self::TQQL,
        Self::TQQQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::M0 => "m0",
            Self::W10 => "w10",
            Self::W01 => "w01",
            Self::W20 => "w20",
            Self::W11 => "w11",
            Self::W02 => "w02",
            Self::DLQ => "dLQ",
            Self::DQL => "dQL",
            Self::DQQ => "dQQ",
            Self::TLLQ => "tLLQ",
            Self::TLQL => "tLQL",
            Self::TLQQ => "tLQQ",
            Self::TQLL => "tQLL",
            Self::TQLQ => "tQLQ",
            Self::TQQL => "tQQL",
            Self::TQQQ => "tQQQ",
        }
    }

    /// The nested-integral word this field evaluates.
    pub fn word(self) -> &'static [Letter] {
        use Letter::{L, Q};
        match self {
            Self::M0 => &[Q],
            Self::W10 | Self::DQL => &[Q, L],
            Self::W01 | Self::DLQ => &[L, Q],
            Self::W20 | Self::TQLL => &[Q, L, L],
            Self::W11 | Self::TLQL => &[L, Q, L],
            Self::W02 | Self::TLLQ => &[L, L, Q],
            Self::DQQ => &[Q, Q],
            Self::TLQQ => &[L, Q, Q],
            Self::TQLQ => &[Q, L, Q],
            Self::TQQL => &[Q, Q, L],
            Self::TQQQ => &[Q, Q, Q],
        }
    }
}

impl FromStr for IntegralField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("field", format!("unknown integral `{s}`")))
    }
}

impl StepIntegrals {
    pub fn get(&self, field: IntegralField) -> f64 {
        use IntegralField::*;
        match field {
            M0 => self.m0,
            W10 => self.w10,
            W01 => self.w01,
            W20 => self.w20,
            W11 => self.w11,
            W02 => self.w02,
            DLQ => self.d_lq,
            DQL => self.d_ql,
            DQQ => self.d_qq,
            TLLQ => self.t_llq,
            TLQL => self.t_lql,
            TLQQ => self.t_lqq,
            TQLL => self.t_qll,
            TQLQ => self.t_qlq,
            TQQL => self.t_qql,
            TQQQ => self.t_qqq,
        }
    }

    fn from_fn(dt: f64, mut f: impl FnMut(IntegralField) -> f64) -> Self {
        use IntegralField::*;
        let (m0, d_lq, d_ql, d_qq) = (f(M0), f(DLQ), f(DQL), f(DQQ));
        let (t_llq, t_lql, t_lqq, t_qll) = (f(TLLQ), f(TLQL), f(TLQQ), f(TQLL));
        let (t_qlq, t_qql, t_qqq) = (f(TQLQ), f(TQQL), f(TQQQ));
        StepIntegrals {
            dt,
            m0,
            w10: d_ql,
            w01: d_lq,
            w20: t_qll,
            w11: t_lql,
            w02: t_llq,
            d_lq,
            d_ql,
            d_qq,
            t_llq,
            t_lql,
            t_lqq,
            t_qll,
            t_qlq,
            t_qql,
            t_qqq,
        }
    }
}

/// Sparse exponential polynomial `Σ c·uᵏ·e^{i m ν₀ u}` keyed by `(m, k)`.
#[derive(Clone, Debug, Default)]
struct ExpPoly {
    terms: BTreeMap<(i32, u32), Complex64>,
}

impl ExpPoly {
    fn one() -> Self {
        let mut p = ExpPoly::default();
        p.add(0, 0, Complex64::new(1.0, 0.0));
        p
    }

    fn add(&mut self, m: i32, k: u32, c: Complex64) {
        *self.terms.entry((m, k)).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn mul(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = ExpPoly::default();
        for (&(m1, k1), &c1) in &self.terms {
            for (&(m2, k2), &c2) in &other.terms {
                out.add(m1 + m2, k1 + k2, c1 * c2);
            }
        }
        out
    }

    /// `F(u) = ∫_u^1 p(v) dv`.
    fn integrate_to_one(&self, nu0: f64) -> ExpPoly {
        let mut out = ExpPoly::default();
        for (&(m, k), &c) in &self.terms {
            if m == 0 {
                let inv = 1.0 / f64::from(k + 1);
                out.add(0, 0, c * inv);
                out.add(0, k + 1, -c * inv);
                continue;
            }
            // ∫ vᵏ e^{iνv} = e^{iνv} Σ_j (−1)ʲ k!/(k−j)! v^{k−j} / (iν)^{j+1}
            let i_nu = Complex64::new(0.0, f64::from(m) * nu0);
            let end_phase = Complex64::from_polar(1.0, f64::from(m) * nu0);
            let mut falling = 1.0;
            let mut denom = i_nu;
            for j in 0..=k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let coef = c * (sign * falling) / denom;
                out.add(0, 0, coef * end_phase);
                out.add(m, k - j, -coef);
                falling *= f64::from(k - j);
                denom *= i_nu;
            }
        }
        out
    }

    fn value_at_zero(&self) -> Complex64 {
        self.terms
            .iter()
            .filter(|((_, k), _)| *k == 0)
            .map(|(_, c)| *c)
            .sum()
    }
}

/// Below this `ν₀ = 2πΔt/ε` the cosine is expanded in a Taylor series.
const TAYLOR_THRESHOLD: f64 = 1.0;

/// Representation of `g(a + Δt·u)` on `u ∈ [0, 1]`.
fn g_polynomial(g: &TimeFactor, a: f64, dt: f64) -> (ExpPoly, f64) {
    match *g {
        TimeFactor::Constant => (ExpPoly::one(), 0.0),
        TimeFactor::Cosine { epsilon } => {
            let theta = TimeFactor::phase(epsilon, a);
            let nu0 = TAU * dt / epsilon;
            let rot = Complex64::from_polar(1.0, theta);
            let mut p = ExpPoly::default();
            if nu0 < TAYLOR_THRESHOLD {
                // Re(e^{iθ} (iν₀u)ᵏ / k!)
                let mut power = Complex64::new(1.0, 0.0);
                for k in 0..60u32 {
                    let c = (rot * power).re;
                    p.add(0, k, Complex64::new(c, 0.0));
                    power *= Complex64::new(0.0, nu0) / f64::from(k + 1);
                    if power.norm() < 1e-22 {
                        break;
                    }
                }
                (p, 0.0)
            } else {
                p.add(1, 0, 0.5 * rot);
                p.add(-1, 0, 0.5 * rot.conj());
                (p, nu0)
            }
        }
    }
}

fn word_value(word: &[Letter], gpoly: &ExpPoly, nu0: f64, dt: f64) -> f64 {
    let mut f = ExpPoly::one();
    for letter in word.iter().rev() {
        let integrand = match letter {
            Letter::L => f,
            Letter::Q => gpoly.mul(&f),
        };
        f = integrand.integrate_to_one(nu0);
    }
    f.value_at_zero().re * dt.powi(word.len() as i32)
}

fn check_interval(a: f64, b: f64) -> Result<f64> {
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::param("interval", format!("need b > a, got [{a}, {b}]")));
    }
    Ok(b - a)
}

/// Closed-form nested integrals for the step `[a, b]`.
pub fn integrals_for_step(g: &TimeFactor, a: f64, b: f64) -> Result<StepIntegrals> {
    let dt = check_interval(a, b)?;
    let (gpoly, nu0) = g_polynomial(g, a, dt);
    Ok(StepIntegrals::from_fn(dt, |field| {
        word_value(field.word(), &gpoly, nu0, dt)
    }))
}

/// Closed-form value of an arbitrary word over `[a, b]`.
pub fn word_integral(g: &TimeFactor, a: f64, b: f64, word: &[Letter]) -> Result<f64> {
    let dt = check_interval(a, b)?;
    let (gpoly, nu0) = g_polynomial(g, a, dt);
    Ok(word_value(word, &gpoly, nu0, dt))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let all = legendre_all(n, x);
    let p = all[n];
    let pm1 = if n > 0 { all[n - 1] } else { 0.0 };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// `P_0(x) … P_n(x)`.
fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 2];
    p[0] = 1.0;
    if n + 1 >= 1 {
        p[1] = x;
    }
    for m in 1..=n {
        p[m + 1] = ((2 * m + 1) as f64 * x * p[m] - m as f64 * p[m - 1]) / (m + 1) as f64;
    }
    p
}

/// Panel rule: nodes, weights and `S[k][j]` with `∫_{x_k}^1 p = Σ_j S[k][j] p(x_j)`
/// for polynomials of degree `< n`.
struct PanelRule {
    x: Vec<f64>,
    w: Vec<f64>,
    s: Vec<Vec<f64>>,
}

impl PanelRule {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let p_at_nodes: Vec<Vec<f64>> = x.iter().map(|&xj| legendre_all(n, xj)).collect();
        let s = x
            .iter()
            .map(|&xk| {
                let pk = &legendre_all(n, xk);
                // J_m(x) = ∫_x^1 P_m
                let j_m: Vec<f64> = (0..n)
                    .map(|m| {
                        if m == 0 {
                            1.0 - xk
                        } else {
                            -(pk[m + 1] - pk[m - 1]) / (2 * m + 1) as f64
                        }
                    })
                    .collect();
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|m| (2 * m + 1) as f64 / 2.0 * w[j] * p_at_nodes[j][m] * j_m[m])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        PanelRule { x, w, s }
    }
}

const ORACLE_NODES: usize = 16;

fn oracle_sweep(g: &TimeFactor, a: f64, b: f64, word: &[Letter], panels: usize, rule: &PanelRule) -> f64 {
    let n = rule.x.len();
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    // per level, values of F_l at the nodes of every panel, from the innermost out
    let mut inner = vec![1.0; panels * n];
    for (depth, letter) in word.iter().enumerate().rev() {
        let mut outer = vec![0.0; panels * n];
        let mut carry = 0.0;
        let mut total = 0.0;
        for p in (0..panels).rev() {
            let left = p as f64 * width;
            let integrand: Vec<f64> = (0..n)
                .map(|j| {
                    let tau = left + half * (rule.x[j] + 1.0);
                    let w = match letter {
                        Letter::L => 1.0,
                        Letter::Q => g.eval_offset(a, tau),
                    };
                    w * inner[p * n + j]
                })
                .collect();
            for k in 0..n {
                let local: f64 = (0..n).map(|j| rule.s[k][j] * integrand[j]).sum();
                outer[p * n + k] = carry + half * local;
            }
            let panel_total: f64 = (0..n).map(|j| rule.w[j] * integrand[j]).sum::<f64>() * half;
            carry += panel_total;
            total += panel_total;
        }
        if depth == 0 {
            return total;
        }
        inner = outer;
    }
    1.0
}

/// Reference value of one field by composite Gauss–Legendre panels of
/// width at most `ε/16`, compared against a run with half the width.
pub fn quadrature_oracle(g: &TimeFactor, a: f64, b: f64, field: IntegralField) -> Result<f64> {
    oracle_word(g, a, b, field.word())
}

pub fn oracle_word(g: &TimeFactor, a: f64, b: f64, word: &[Letter]) -> Result<f64> {
    let dt = check_interval(a, b)?;
    let rule = PanelRule::new(ORACLE_NODES);
    let max_width = match g.epsilon() {
        Some(eps) => (eps / 16.0).min(dt),
        None => dt,
    };
    let panels = (dt / max_width).ceil().max(1.0) as usize;
    let coarse = oracle_sweep(g, a, b, word, panels, &rule);
    let fine = oracle_sweep(g, a, b, word, 2 * panels, &rule);
    let tolerance = 1e-12 * dt;
    let estimate = (fine - coarse).abs();
    if estimate > tolerance {
        return Err(Error::QuadratureTolerance { tolerance, estimate });
    }
    Ok(fine)
}

/// Every field from the oracle.
pub fn oracle_integrals(g: &TimeFactor, a: f64, b: f64) -> Result<StepIntegrals> {
    let dt = check_interval(a, b)?;
    let mut err = None;
    let out = StepIntegrals::from_fn(dt, |f| match quadrature_oracle(g, a, b, f) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
