//! Adaptive one-dimensional quadrature and the adsorption length `M`.

use crate::{Error, Result};

const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const GAUSS_W: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_W[7] * fc;
    let mut gauss = GAUSS_W[3] * fc;
    for i in 0..7 {
        let fx = f(c - h * KRONROD_X[i]) + f(c + h * KRONROD_X[i]);
        kronrod += KRONROD_W[i] * fx;
        if i % 2 == 1 {
            gauss += GAUSS_W[i / 2] * fx;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature to absolute tolerance `tol`.
pub fn gauss_kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut intervals = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..5000 {
        let (total, err): (f64, f64) = intervals
            .iter()
            .fold((0.0, 0.0), |(s, e), (_, _, (v, ve))| (s + v, e + ve));
        if err <= tol {
            return Ok(total);
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&f, lo, mid)));
        intervals.push((mid, hi, gk15(&f, mid, hi)));
    }
    let estimate = intervals.iter().map(|(_, _, (_, e))| e).sum();
    Err(Error::QuadratureTolerance { tolerance: tol, estimate })
}

/// Recursive adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        Some(
            recurse(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)?
                + recurse(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)?,
        )
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, (a, fa), (m, fm), (b, fb), whole, tol, 50)
        .ok_or(Error::QuadratureTolerance { tolerance: tol, estimate: f64::NAN })
}

/// `exp(−U(ζ))` for the dimensionless Lennard-Jones potential
/// `U = φ(ζ⁻¹² − 2ζ⁻⁶)`.
pub fn boltzmann_factor(zeta: f64, phi: f64) -> f64 {
    if phi == 0.0 {
        return 1.0;
    }
    if zeta <= 0.0 {
        return 0.0;
    }
    let z6 = zeta.powi(-6);
    (-phi * (z6 * z6 - 2.0 * z6)).exp()
}

fn check_m_inputs(delta: f64, phi: f64, cutoff: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::param("phi", format!("must be non-negative, got {phi}")));
    }
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::param("cutoff", format!("must be positive, got {cutoff}")));
    }
    Ok(())
}

/// Adsorption length `M = δ ∫₀^{L+1} exp(−U(ζ)) dζ` by adaptive Gauss–Kronrod.
pub fn compute_m(delta: f64, phi: f64, cutoff: f64) -> Result<f64> {
    check_m_inputs(delta, phi, cutoff)?;
    let upper = cutoff + 1.0;
    let scale = upper * phi.exp();
    let integral = gauss_kronrod(|z| boltzmann_factor(z, phi), 0.0, upper, 1e-14 * scale)?;
    Ok(delta * integral)
}

/// Same integral by adaptive Simpson, used to cross-check [`compute_m`].
pub fn compute_m_simpson(delta: f64, phi: f64, cutoff: f64) -> Result<f64> {
    check_m_inputs(delta, phi, cutoff)?;
    let upper = cutoff + 1.0;
    let scale = upper * phi.exp();
    let integral = adaptive_simpson(|z| boltzmann_factor(z, phi), 0.0, upper, 1e-13 * scale)?;
    Ok(delta * integral)
}
