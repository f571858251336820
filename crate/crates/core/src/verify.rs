//! Sharpness and bound checks on zonal boundary data.
//!
//! Boundary data are scalar profiles `g(t)` of `t = ⟨η, e_n⟩`; the invariant
//! Poisson integral at `r e_n` is `u(r e_n) = ∫ P_h(r e_n, η) g(t) dσ`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::kernel::{self, AxisPoint, BallContext};
use crate::objective::north_depth;
use crate::quadrature::{GradedRule, ZonalQuadrature, DEFAULT_DEPTH};
use crate::solver::{self, g_inf_closed, grad_constant};

/// Relative slack for inequality checks.
pub const BOUND_TOLERANCE: f64 = 1e-7;
/// Highest degree of the random polynomial profiles.
pub const MAX_RANDOM_DEGREE: usize = 8;

const POLY_KINK_DEPTH: usize = 16;
const SUP_GRID: usize = 2048;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A zonal boundary function with cached mean and `L^p` norm.
#[derive(Clone)]
pub struct ZonalBoundaryFunction {
    g: Profile,
    ctx: BallContext,
    kinks: Vec<f64>,
    kink_depth: usize,
    order: usize,
    mean: f64,
    norm: f64,
}

impl fmt::Debug for ZonalBoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZonalBoundaryFunction")
            .field("ctx", &self.ctx)
            .field("kinks", &self.kinks)
            .field("mean", &self.mean)
            .field("norm", &self.norm)
            .finish_non_exhaustive()
    }
}

impl ZonalBoundaryFunction {
    /// `kinks` lists points where `g` is not smooth; integrals are graded there.
    pub fn new(ctx: BallContext, g: Profile, kinks: Vec<f64>, order: usize) -> Result<Self> {
        Self::with_depth(ctx, g, kinks, DEFAULT_DEPTH, order)
    }

    fn with_depth(ctx: BallContext, g: Profile, kinks: Vec<f64>, kink_depth: usize, order: usize) -> Result<Self> {
        let mut f = Self { g, ctx, kinks, kink_depth, order, mean: 0.0, norm: 0.0 };
        f.mean = f.integrate(|_, v| v)?;
        f.norm = f.lp_norm()?;
        if !f.norm.is_finite() {
            return domain("boundary function has infinite norm");
        }
        Ok(f)
    }

    /// Polynomial profile `Σ c_k t^k`; its real roots in `[-1, 1]` are
    /// declared as kinks so `|g|^p` integrates accurately.
    pub fn polynomial(ctx: BallContext, coeffs: Vec<f64>, order: usize) -> Result<Self> {
        let roots = polynomial_roots(&coeffs);
        let g: Profile = Arc::new(move |t| horner(&coeffs, t));
        Self::with_depth(ctx, g, roots, POLY_KINK_DEPTH, order)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    pub fn ctx(&self) -> &BallContext {
        &self.ctx
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// `∫ g dσ`, which is also `u(0)`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `‖g‖_p`, the sup norm for `p = ∞`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `g - ∫ g dσ`.
    pub fn centered(&self) -> Result<Self> {
        let (g, m) = (Arc::clone(&self.g), self.mean);
        let shifted: Profile = Arc::new(move |t| g(t) - m);
        // declared kinks are kept as they are; zeros of the shifted profile are not tracked
        Self::with_depth(self.ctx, shifted, self.kinks.clone(), self.kink_depth, self.order)
    }

    /// `∫ h(t, g(t)) dσ` with grading at the declared kinks.
    pub fn integrate<H: Fn(f64, f64) -> f64>(&self, h: H) -> Result<f64> {
        if self.kinks.is_empty() {
            ZonalQuadrature::cached(self.ctx.n(), self.order)?.integrate(|t| h(t, self.eval(t)))
        } else {
            GradedRule::new(self.ctx.n(), self.order, &self.kinks, self.kink_depth, 0)?
                .integrate(|t| h(t, self.eval(t)))
        }
    }

    fn lp_norm(&self) -> Result<f64> {
        let p = self.ctx.p();
        if p.is_infinite() {
            return Ok(sup_abs(&*self.g, &self.kinks));
        }
        if p == 2.0 {
            return Ok(self.integrate(|_, v| v * v)?.sqrt());
        }
        Ok(self.integrate(|_, v| v.abs().powf(p))?.powf(1.0 / p))
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Sign changes on a `θ` grid, refined by bisection.
fn polynomial_roots(coeffs: &[f64]) -> Vec<f64> {
    let grid: Vec<f64> = (0..=SUP_GRID).map(|i| (std::f64::consts::PI * i as f64 / SUP_GRID as f64).cos()).collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut hi, mut lo) = (w[0], w[1]);
        let (f_hi, f_lo) = (horner(coeffs, hi), horner(coeffs, lo));
        if f_hi == 0.0 {
            roots.push(hi);
            continue;
        }
        if f_hi.signum() == f_lo.signum() || f_lo == 0.0 {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if horner(coeffs, mid).signum() == f_hi.signum() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if horner(coeffs, -1.0) == 0.0 {
        roots.push(-1.0);
    }
    roots
}

/// `sup |g|` over `[-1, 1]`: a `θ` grid plus the kinks, with golden-section
/// refinement around each grid local maximum.
fn sup_abs(g: &(dyn Fn(f64) -> f64 + Send + Sync), kinks: &[f64]) -> f64 {
    let pi = std::f64::consts::PI;
    let h = pi / SUP_GRID as f64;
    let vals: Vec<f64> = (0..=SUP_GRID).map(|i| g((h * i as f64).cos()).abs()).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for &k in kinks {
        for t in [k, (k - 1e-12).max(-1.0), (k + 1e-12).min(1.0)] {
            best = best.max(g(t).abs());
        }
    }
    for i in 1..SUP_GRID {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            let neg = |th: f64| -> Result<f64> { Ok(-g(th.cos()).abs()) };
            if let Ok((_, v)) = solver::golden_section_minimize(neg, h * (i - 1) as f64, h * (i + 1) as f64, 1e-13) {
                best = best.max(-v);
            }
        }
    }
    best
}

/// `u(r e_n) = ∫ P_h(r e_n, η) g dσ`.
pub fn poisson_integral_axis(phi: &ZonalBoundaryFunction, r: AxisPoint) -> Result<f64> {
    let (n, r) = (phi.ctx.n(), r.r());
    if r == 0.0 {
        return Ok(phi.mean);
    }
    GradedRule::new(n, phi.order, &phi.kinks, phi.kink_depth, north_depth(r))?
        .integrate(|t| kernel::kernel(n, r, t) * phi.eval(t))
}

/// `g = |P_h - a*|^{q-1} sign(P_h - a*)` for `p ∈ (1, ∞)`; equality case of
/// the bound at `r e_n`.
pub fn extremal_phi(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<ZonalBoundaryFunction> {
    let q = ctx.q();
    if !(q.is_finite() && q > 1.0) || r.r() == 0.0 {
        return domain(format!("extremal profile requires p in (1, inf) and r in (0, 1), got {ctx}, r = {}", r.r()));
    }
    let (n, rv) = (ctx.n(), r.r());
    let a = solver::solve_a_star(ctx, r, order)?;
    let g: Profile = Arc::new(move |t| {
        let d = kernel::kernel(n, rv, t) - a;
        d.abs().powf(q - 1.0).copysign(d)
    });
    ZonalBoundaryFunction::new(*ctx, g, kernel::crossing(n, rv, a).into_iter().collect(), order)
}

/// `g = sign(t - t*)` with `P_h(r e_n, t*) = a*`, the extremal for `p = ∞`.
pub fn sign_phi(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<ZonalBoundaryFunction> {
    if !ctx.p_is_infinite() {
        return domain("sign profile is the extremal for p = inf only");
    }
    let (n, rv) = (ctx.n(), r.r());
    let (a, _) = g_inf_closed(n, rv)?;
    let t_star = kernel::crossing(n, rv, a).unwrap_or(0.0);
    let g: Profile = Arc::new(move |t| if t >= t_star { 1.0 } else { -1.0 });
    ZonalBoundaryFunction::new(*ctx, g, vec![t_star], order)
}

/// `g = |t|^{q-1} sign t`, the extremal for the gradient at the origin.
pub fn gradient_extremal_phi(ctx: &BallContext, order: usize) -> Result<ZonalBoundaryFunction> {
    let q = ctx.q();
    if !q.is_finite() {
        return domain("gradient extremal requires p > 1");
    }
    let g: Profile = Arc::new(move |t: f64| t.abs().powf(q - 1.0).copysign(t));
    ZonalBoundaryFunction::new(*ctx, g, vec![0.0], order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessReport {
    pub r: f64,
    /// `G_p(r) ‖φ‖_p`
    pub g_bound: f64,
    /// `u(r e_n)` for the extremal datum
    pub attained: f64,
    pub u_at_zero: f64,
    pub relative_gap: f64,
}

impl SharpnessReport {
    fn new(r: f64, g_bound: f64, attained: f64, u_at_zero: f64) -> Self {
        let relative_gap = if g_bound == 0.0 { attained.abs() } else { (attained - g_bound).abs() / g_bound };
        Self { r, g_bound, attained, u_at_zero, relative_gap }
    }
}

/// Cap index used for the `p = 1` sharpness report.
pub const SHARPNESS_CAP_INDEX: usize = 16384;

/// Evaluate the extremal datum for `ctx` at `r e_n` against `G_p(r) ‖φ‖_p`.
/// For `p = 1` the datum is the normalized cap pair at index
/// [`SHARPNESS_CAP_INDEX`], so the gap is only asymptotically zero.
pub fn verify_sharpness(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<SharpnessReport> {
    if r.r() == 0.0 {
        return domain("sharpness is checked for r in (0, 1)");
    }
    let g = solver::g_p(ctx, r, order)?.g_value;
    if ctx.q().is_infinite() {
        let u = minimizing_sequence_p1(ctx.n(), r, SHARPNESS_CAP_INDEX)?;
        return Ok(SharpnessReport::new(r.r(), g, u, 0.0));
    }
    let phi = if ctx.p_is_infinite() { sign_phi(ctx, r, order)? } else { extremal_phi(ctx, r, order)? };
    let attained = poisson_integral_axis(&phi, r)?;
    Ok(SharpnessReport::new(r.r(), g * phi.norm(), attained, phi.mean()))
}

/// `|∇u(0)| = 2(n-1) |∫ t g dσ|`.
pub fn grad_at_origin(phi: &ZonalBoundaryFunction) -> Result<f64> {
    let n = f64::from(phi.ctx.n());
    Ok(2.0 * (n - 1.0) * phi.integrate(|t, v| t * v)?.abs())
}

/// Coefficients of the `index`-th random profile for `seed`: degree uniform
/// in `1..=8`, coefficients uniform in `[-1, 1]`. Each index has its own
/// stream, so draws are reproducible in any evaluation order.
pub fn random_coefficients(seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let degree = rng.gen_range(1..=MAX_RANDOM_DEGREE);
    (0..=degree).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Centered random polynomial profile.
pub fn random_centered_phi(ctx: &BallContext, seed: u64, index: u64, order: usize) -> Result<ZonalBoundaryFunction> {
    let mut coeffs = random_coefficients(seed, index);
    let raw = ZonalBoundaryFunction::polynomial(*ctx, coeffs.clone(), order)?;
    coeffs[0] -= raw.mean();
    ZonalBoundaryFunction::polynomial(*ctx, coeffs, order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub count: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

/// `|u|/(bound · ‖g‖_p)`, with `0` for the zero function.
pub fn bound_ratio(value: f64, bound: f64, norm: f64) -> f64 {
    let denom = bound * norm;
    if denom == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        value.abs() / denom
    }
}

fn survey<F>(count: usize, check: F) -> Result<BoundCheck>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if count == 0 {
        return domain("count must be at least 1");
    }
    let ratios: Vec<f64> = (0..count as u64).into_par_iter().map(&check).collect::<Result<_>>()?;
    Ok(BoundCheck {
        count,
        violations: ratios.iter().filter(|&&x| x > 1.0 + BOUND_TOLERANCE).count(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
    })
}

/// `|u(r e_n)| ≤ G_p(r) ‖g‖_p` over `count` seeded random centered profiles.
pub fn random_bound_check(ctx: &BallContext, r: AxisPoint, count: usize, seed: u64, order: usize) -> Result<BoundCheck> {
    let g = solver::g_p(ctx, r, order)?.g_value;
    survey(count, |i| {
        let phi = random_centered_phi(ctx, seed, i, order)?;
        Ok(bound_ratio(poisson_integral_axis(&phi, r)?, g, phi.norm()))
    })
}

/// `|∇u(0)| ≤ C_p ‖g‖_p` over `count` seeded random centered profiles.
pub fn random_grad_check(ctx: &BallContext, count: usize, seed: u64, order: usize) -> Result<BoundCheck> {
    let c = grad_constant(ctx)?;
    survey(count, |i| {
        let phi = random_centered_phi(ctx, seed, i, order)?;
        Ok(bound_ratio(grad_at_origin(&phi)?, c, phi.norm()))
    })
}

/// `θ` radius of the cap `|η - e_n| ≤ 1/i`.
fn cap_angle(i: usize) -> f64 {
    2.0 * (0.5 / i as f64).asin()
}

/// The cap pair `χ_N/(2σ(N)) - χ_S/(2σ(S))` around `±e_n`, with
/// `N = {t ≥ 1 - 1/(2i²)}` and `S = -N`.
pub fn cap_sequence_phi(n: u32, i: usize, order: usize) -> Result<ZonalBoundaryFunction> {
    if i < 2 {
        return domain(format!("cap index i = {i} must be at least 2"));
    }
    let measure = cap_measure(n, i)?;
    let t0 = 1.0 - 0.5 / (i as f64 * i as f64);
    let h = 0.5 / measure;
    let g: Profile = Arc::new(move |t| {
        if t >= t0 {
            h
        } else if t <= -t0 {
            -h
        } else {
            0.0
        }
    });
    ZonalBoundaryFunction::new(BallContext::new(n, 1.0)?, g, vec![t0, -t0], order)
}

/// `σ(N)` by Gauss–Legendre in `θ` on `[0, θ_i]`.
fn cap_measure(n: u32, i: usize) -> Result<f64> {
    let m = cap_integral(n, i, |_| 1.0)?;
    if !(m > f64::MIN_POSITIVE) {
        return Err(Error::CapUnderflow { index: i });
    }
    Ok(m)
}

fn cap_integral<F: Fn(f64) -> f64>(n: u32, i: usize, f: F) -> Result<f64> {
    let theta0 = cap_angle(i);
    let legendre = ZonalQuadrature::cached(3, 64)?;
    let cn = crate::special::zonal_constant(n);
    Ok(legendre
        .nodes()
        .iter()
        .zip(legendre.weights())
        .map(|(&x, &w)| {
            let theta = 0.5 * (x + 1.0) * theta0;
            cn * f(theta) * theta.sin().powi(n as i32 - 2) * theta0 * w
        })
        .sum())
}

/// `u_i(r e_n)` for the cap pair of index `i`; increases toward `G_1(r)`.
pub fn minimizing_sequence_p1(n: u32, r: AxisPoint, i: usize) -> Result<f64> {
    if i < 2 {
        return domain(format!("cap index i = {i} must be at least 2"));
    }
    let rv = r.r();
    let measure = cap_measure(n, i)?;
    let north = cap_integral(n, i, |th| kernel::kernel(n, rv, th.cos()))?;
    let south = cap_integral(n, i, |th| kernel::kernel(n, rv, -th.cos()))?;
    Ok(0.5 * (north - south) / measure)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryReport {
    /// `|∇u(0)|` for the centered datum
    pub lhs: f64,
    /// `√(‖φ‖₂² - u(0)²)`
    pub spread: f64,
    /// `√(2(n-1))`
    pub weak_constant: f64,
    /// `2(n-1)/√n`
    pub sharp_constant: f64,
    pub holds_weak: bool,
    pub holds_sharp: bool,
}

/// Compare `|∇u(0)|` with both candidate constants times `√(‖φ‖₂² - u(0)²)`.
pub fn corollary_l2_check(phi: &ZonalBoundaryFunction) -> Result<CorollaryReport> {
    if phi.ctx.p() != 2.0 {
        return domain("corollary check requires p = 2");
    }
    let n = f64::from(phi.ctx.n());
    let lhs = grad_at_origin(phi)?;
    let spread = (phi.norm * phi.norm - phi.mean * phi.mean).max(0.0).sqrt();
    let weak_constant = (2.0 * (n - 1.0)).sqrt();
    let sharp_constant = 2.0 * (n - 1.0) / n.sqrt();
    let ok = |c: f64| lhs <= c * spread * (1.0 + BOUND_TOLERANCE) + 1e-14;
    Ok(CorollaryReport {
        lhs,
        spread,
        weak_constant,
        sharp_constant,
        holds_weak: ok(weak_constant),
        holds_sharp: ok(sharp_constant),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollarySurvey {
    pub n: u32,
    pub count: usize,
    pub weak_holds: usize,
    pub sharp_holds: usize,
    pub weak_max_ratio: f64,
    pub sharp_max_ratio: f64,
}

/// [`corollary_l2_check`] over `count` seeded random (uncentered) profiles.
pub fn corollary_l2_survey(n: u32, count: usize, seed: u64, order: usize) -> Result<CorollarySurvey> {
    let ctx = BallContext::new(n, 2.0)?;
    let reports: Vec<CorollaryReport> = (0..count as u64)
        .into_par_iter()
        .map(|i| corollary_l2_check(&ZonalBoundaryFunction::polynomial(ctx, random_coefficients(seed, i), order)?))
        .collect::<Result<_>>()?;
    let ratio = |rep: &CorollaryReport, c: f64| bound_ratio(rep.lhs, c, rep.spread);
    Ok(CorollarySurvey {
        n,
        count,
        weak_holds: reports.iter().filter(|r| r.holds_weak).count(),
        sharp_holds: reports.iter().filter(|r| r.holds_sharp).count(),
        weak_max_ratio: reports.iter().map(|r| ratio(r, r.weak_constant)).fold(0.0, f64::max),
        sharp_max_ratio: reports.iter().map(|r| ratio(r, r.sharp_constant)).fold(0.0, f64::max),
    })
}
