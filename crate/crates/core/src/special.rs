//! Gamma function, Gauss hypergeometric series and the coordinate moment
//! `alpha_q` of the normalized surface measure.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Lanczos coefficients for `g = 671/128`, 14 terms.
const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_SERIES_0: f64 = 0.999_999_999_999_997_1;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Iteration cap for hypergeometric series.
pub const MAX_SERIES_TERMS: usize = 1_000_000;
/// Relative size of the last term at which a series is considered summed.
pub const SERIES_TOLERANCE: f64 = 1e-16;

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma requires a finite x > 0, got {x}"));
    }
    Ok(lanczos_ln_gamma(x))
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let tmp = x + LANCZOS_G;
    let head = (x + 0.5) * tmp.ln() - tmp;
    let mut denom = x;
    let mut ser = LANCZOS_SERIES_0;
    for c in LANCZOS_COEFFS {
        denom += 1.0;
        ser += c / denom;
    }
    head + (SQRT_2PI * ser / x).ln()
}

/// `(ln |Γ(x)|, sign Γ(x))` for any real `x` that is not a pole.
///
/// Negative arguments go through the reflection formula.
pub fn ln_gamma_signed(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return domain(format!("gamma of non-finite argument {x}"));
    }
    if x > 0.0 {
        return Ok((lanczos_ln_gamma(x), 1.0));
    }
    if x == x.round() {
        return domain(format!("gamma has a pole at {x}"));
    }
    // Γ(x) Γ(1 - x) = π / sin(πx)
    let s = (PI * x).sin();
    let (ln_rest, _) = ln_gamma_signed(1.0 - x)?;
    Ok((PI.ln() - s.abs().ln() - ln_rest, s.signum()))
}

/// `1 / Γ(x)`, zero at the poles.
fn recip_gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.round() {
        return Ok(0.0);
    }
    let (ln_abs, sign) = ln_gamma_signed(x)?;
    Ok(sign * (-ln_abs).exp())
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// Parameters of a Gauss hypergeometric function `₂F₁(a, b; c; z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricArgs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl HypergeometricArgs {
    pub fn new(a: f64, b: f64, c: f64, z: f64) -> Result<Self> {
        if ![a, b, c, z].iter().all(|v| v.is_finite()) {
            return domain("hypergeometric parameters must be finite");
        }
        if is_nonpositive_integer(c) {
            return domain(format!("c = {c} is zero or a negative integer"));
        }
        if !(0.0..1.0).contains(&z) {
            return domain(format!("z = {z} outside [0, 1)"));
        }
        Ok(Self { a, b, c, z })
    }
}

/// Plain power series. Terminates when `a` or `b` is a non-positive integer.
fn series_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut small_in_a_row = 0;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if term.abs() <= SERIES_TOLERANCE * sum.abs() {
            small_in_a_row += 1;
            if small_in_a_row >= 2 {
                return Ok(sum);
            }
        } else {
            small_in_a_row = 0;
        }
        if !sum.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "hypergeometric series",
        iterations: MAX_SERIES_TERMS,
    })
}

/// Gauss hypergeometric function `₂F₁(a, b; c; z)` for real `z ∈ [0, 1)`.
///
/// Small `z` uses the power series. For `z > 0.5` the Euler transformation
/// `(1 - z)^(c-a-b) ₂F₁(c-a, c-b; c; z)` is used when it terminates or
/// speeds up the tail, and for `z > 0.9` with non-integral `c - a - b` the
/// `z → 1 - z` connection formula takes over.
pub fn gauss_2f1(args: HypergeometricArgs) -> Result<f64> {
    gauss_2f1_complement(args, 1.0 - args.z)
}

/// [`gauss_2f1`] with the complement `w = 1 - z` supplied by the caller,
/// for arguments close to 1 where `1 - z` would lose digits.
pub fn gauss_2f1_complement(args: HypergeometricArgs, w: f64) -> Result<f64> {
    let HypergeometricArgs { a, b, c, z } = args;
    if !(w > 0.0 && (w - (1.0 - z)).abs() <= 1e-12) {
        return domain(format!("complement w = {w} inconsistent with z = {z}"));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) || z <= 0.5 {
        return series_2f1(a, b, c, z);
    }
    let s = c - a - b;
    let (ea, eb) = (c - a, c - b);
    if is_nonpositive_integer(ea) || is_nonpositive_integer(eb) {
        return Ok(w.powf(s) * series_2f1(ea, eb, c, z)?);
    }
    if z > 0.9 && (s - s.round()).abs() > 1e-9 {
        return connection_2f1(a, b, c, w);
    }
    if s < 0.0 {
        return Ok(w.powf(s) * series_2f1(ea, eb, c, z)?);
    }
    series_2f1(a, b, c, z)
}

/// `z → 1 - z` connection formula, valid for non-integral `c - a - b`.
fn connection_2f1(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    let s = c - a - b;
    let (ln_gc, sign_gc) = ln_gamma_signed(c)?;
    let (ln_gs, sign_gs) = ln_gamma_signed(s)?;
    let (ln_gms, sign_gms) = ln_gamma_signed(-s)?;
    let gc = sign_gc * ln_gc.exp();
    let first = gc * sign_gs * ln_gs.exp() * recip_gamma(c - a)? * recip_gamma(c - b)?;
    let second = gc * sign_gms * ln_gms.exp() * recip_gamma(a)? * recip_gamma(b)?;
    let mut total = 0.0;
    if first != 0.0 {
        total += first * series_2f1(a, b, 1.0 - s, w)?;
    }
    if second != 0.0 {
        total += second * w.powf(s) * series_2f1(c - a, c - b, s + 1.0, w)?;
    }
    Ok(total)
}

/// `∫ |η_n|^q dσ(η)` over the unit sphere `𝕊^{n-1}`:
/// `Γ(n/2) Γ((1+q)/2) / (√π Γ((n+q)/2))`.
pub fn alpha_q(n: u32, q: f64) -> Result<f64> {
    if n < 3 {
        return domain(format!("dimension n = {n} must be at least 3"));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return domain(format!("moment exponent q = {q} must be finite and non-negative"));
    }
    let nf = f64::from(n);
    let ln = lanczos_ln_gamma(nf / 2.0) + lanczos_ln_gamma((1.0 + q) / 2.0)
        - lanczos_ln_gamma((nf + q) / 2.0);
    Ok(ln.exp() / PI.sqrt())
}

/// Normalizing constant `Γ(n/2) / (√π Γ((n-1)/2))` of the zonal reduction
/// `∫ f(⟨η, e_n⟩) dσ(η) = c_n ∫ f(t) (1 - t²)^{(n-3)/2} dt`.
pub fn zonal_constant(n: u32) -> f64 {
    let nf = f64::from(n);
    (lanczos_ln_gamma(nf / 2.0) - lanczos_ln_gamma((nf - 1.0) / 2.0)).exp() / PI.sqrt()
}
