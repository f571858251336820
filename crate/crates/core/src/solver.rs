//! The optimal shift `a*(r)` and the sharp factor `G_p(r)`.
//!
//! For `p ∈ (1, ∞)` the shift is the root of `F(r, ·)` found by safeguarded
//! Newton inside the kernel range. The endpoint exponents `p = 1` and
//! `p = ∞` (and the quadratic case `p = 2`) have closed forms.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::kernel::{self, AxisPoint, BallContext};
use crate::objective::{self, ObjectiveParams};
use crate::quadrature::DEFAULT_ORDER;
use crate::special::{alpha_q, gauss_2f1, gauss_2f1_complement, log_gamma, HypergeometricArgs};

pub const MAX_NEWTON_ITERATIONS: usize = 200;
/// Residual bound `|F(r, a*)|` promised by [`solve_a_star`].
pub const STATIONARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Numeric,
    ClosedP1,
    ClosedP2,
    ClosedPinf,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Numeric => "numeric",
            Method::ClosedP1 => "closed_p1",
            Method::ClosedP2 => "closed_p2",
            Method::ClosedPinf => "closed_pinf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpResult {
    pub ctx: BallContext,
    pub r: f64,
    pub a_star: f64,
    pub g_value: f64,
    pub method: Method,
    pub est_error: f64,
}

fn params(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<ObjectiveParams> {
    ObjectiveParams::new(*ctx, r, order)
}

/// Root of `F(r, ·)` for `p ∈ (1, ∞)`.
pub fn solve_a_star(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<f64> {
    let q = ctx.q();
    if !(q.is_finite() && q > 1.0) {
        return domain(format!("numeric a* requires p in (1, inf), got {ctx}"));
    }
    if r.r() == 0.0 || q == 2.0 {
        return Ok(1.0);
    }
    let pr = params(ctx, r, order)?;
    let (min, max) = kernel::range(ctx.n(), r.r());
    let eps = 1e-12 * (max - min);
    let (mut lo, mut hi) = (min + eps, max - eps);
    let (f_lo, f_hi) = (objective::big_f(&pr, lo)?, objective::big_f(&pr, hi)?);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }

    let eval = |a: f64| -> Result<(f64, f64)> {
        let m = pr.moments(a)?;
        Ok((m.signed_q1, (1.0 - q) * m.abs_q2))
    };
    let mut a = 1.0;
    let (mut f, mut df) = eval(a)?;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if f == 0.0 {
            return Ok(a);
        }
        if f > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let newton = a - f / df;
        let mut accepted = false;
        if newton > lo && newton < hi && newton.is_finite() {
            if (newton - a).abs() <= 4.0 * f64::EPSILON * a.abs() {
                return finish(a, f, df);
            }
            let (fn_, dfn) = eval(newton)?;
            if fn_.abs() < f.abs() {
                (a, f, df) = (newton, fn_, dfn);
                accepted = true;
            } else if fn_ > 0.0 {
                lo = lo.max(newton);
            } else {
                hi = hi.min(newton);
            }
        }
        if !accepted {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return finish(a, f, df);
            }
            (f, df) = eval(mid)?;
            a = mid;
        }
    }
    Err(Error::NonConvergence { what: "a* Newton iteration", iterations: MAX_NEWTON_ITERATIONS })
}

/// Accepts the residual at the absolute tolerance, or, when `F` itself is
/// huge (large `q` near the boundary), relative to the sensitivity `|a F'|`.
fn finish(a: f64, f: f64, df: f64) -> Result<f64> {
    if f.abs() > STATIONARITY_TOLERANCE.max(1e-11 * (a * df).abs()) {
        return Err(Error::NonConvergence { what: "a* stationarity residual", iterations: MAX_NEWTON_ITERATIONS });
    }
    Ok(a)
}

/// `G_p(r)` with the optimal shift, dispatching to closed forms where they exist.
pub fn g_p(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<GpResult> {
    let (n, rv) = (ctx.n(), r.r());
    let q = ctx.q();
    let result = |a_star, g_value, method, est_error| GpResult { ctx: *ctx, r: rv, a_star, g_value, method, est_error };

    if q.is_infinite() {
        let (a, g) = g_1_closed(n, rv);
        let (min, max) = kernel::range(n, rv);
        let direct = (max - a).abs().max((a - min).abs());
        return Ok(result(a, g, Method::ClosedP1, (direct - g).abs()));
    }
    if q == 1.0 {
        let (a, g) = g_inf_closed(n, rv)?;
        let numeric = objective::phi(&params(ctx, r, order)?, a)?;
        return Ok(result(a, g, Method::ClosedPinf, (numeric - g).abs()));
    }
    let pr = params(ctx, r, order)?;
    let a = solve_a_star(ctx, r, order)?;
    let g = objective::phi(&pr, a)?;
    if q == 2.0 {
        let closed = g_2_closed(n, rv)?;
        return Ok(result(a, g, Method::Numeric, (g - closed).abs()));
    }
    let refined = objective::phi(&params(ctx, r, 2 * order)?, a)?;
    Ok(result(a, g, Method::Numeric, (g - refined).abs()))
}

/// `g_p` over a grid of radii, evaluated concurrently, returned in input order.
pub fn g_p_grid(ctx: &BallContext, radii: &[f64], order: usize) -> Result<Vec<GpResult>> {
    radii
        .par_iter()
        .map(|&r| g_p(ctx, AxisPoint::new(r)?, order))
        .collect()
}

/// Chebyshev center and radius of the kernel range: `(cosh L, sinh L)` with
/// `L = 2(n-1) atanh r`.
pub fn g_1_closed(n: u32, r: f64) -> (f64, f64) {
    let l = 2.0 * f64::from(n - 1) * r.atanh();
    (l.cosh(), l.sinh())
}

/// `√((1-r²)^{2n-2} ₂F₁(2n-2, (3n-2)/2; n/2; r²) - 1)`.
pub fn g_2_closed(n: u32, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let nf = f64::from(n);
    let f = gauss_2f1(HypergeometricArgs::new(2.0 * nf - 2.0, (3.0 * nf - 2.0) / 2.0, nf / 2.0, r * r)?)?;
    let second = (1.0 - r * r).powf(2.0 * nf - 2.0) * f;
    Ok((second - 1.0).max(0.0).sqrt())
}

/// `a* = ((1-r²)/(1+r²))^{n-1}` and `G_∞(r) = U_h(r e_n)`.
pub fn g_inf_closed(n: u32, r: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&r) {
        return domain(format!("radius r = {r} outside [0, 1)"));
    }
    let nf = f64::from(n);
    let r2 = r * r;
    let a = ((1.0 - r2) / (1.0 + r2)).powf(nf - 1.0);
    if r == 0.0 {
        return Ok((a, 0.0));
    }
    let ln_pre = nf * 2f64.ln() + r.ln() + (nf - 1.0) * (-r2).ln_1p() - PI.ln() - nf * r2.ln_1p()
        + 2.0 * log_gamma(nf / 2.0)?
        - log_gamma(nf - 1.0)?;
    let z = 4.0 * r2 / ((1.0 + r2) * (1.0 + r2));
    let w = ((1.0 - r2) / (1.0 + r2)).powi(2);
    let f = gauss_2f1_complement(HypergeometricArgs::new(1.0, nf / 2.0, 1.5, z)?, w)?;
    Ok((a, ln_pre.exp() * f))
}

/// Elementary forms of `U_h(r e_n)` for `n ∈ {3, 4, 5}`.
pub fn u_h_elementary(n: u32, r: f64) -> Option<f64> {
    let r2 = r * r;
    match n {
        3 => Some(2.0 * r / (1.0 + r2)),
        4 => Some(4.0 * r * (1.0 - r2) / (PI * (1.0 + r2).powi(2)) + 4.0 / PI * r.atan()),
        5 => Some((3.0 * r + 2.0 * r2 * r + 3.0 * r2 * r2 * r) / (1.0 + r2).powi(3)),
        _ => None,
    }
}

/// `2(n-1) α_q^{1/q}`, and `2(n-1)` for `p = 1`.
pub fn grad_constant(ctx: &BallContext) -> Result<f64> {
    let base = 2.0 * f64::from(ctx.n() - 1);
    let q = ctx.q();
    if q.is_infinite() {
        return Ok(base);
    }
    Ok(base * alpha_q(ctx.n(), q)?.powf(1.0 / q))
}

/// One-sided difference `G_p(h) / h`.
pub fn gp_derivative_at_zero(ctx: &BallContext, h: f64, order: usize) -> Result<f64> {
    if !(h > 0.0 && h <= 0.01) {
        return domain(format!("step h = {h} outside (0, 0.01]"));
    }
    Ok(g_p(ctx, AxisPoint::new(h)?, order)?.g_value / h)
}

/// `da*/dr = -∂_r F / ∂_a F` at `a = a*(r)`.
pub fn da_star_dr(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<f64> {
    if r.r() == 0.0 {
        return domain("da*/dr requires r in (0, 1)");
    }
    let a = solve_a_star(ctx, r, order)?;
    if ctx.q() == 2.0 {
        return Ok(0.0);
    }
    let m = params(ctx, r, order)?.moments(a)?;
    Ok(m.dr_q2 / m.abs_q2)
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_minimize<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let x = golden_section_by(|x1, x2| Ok(f(x1)? < f(x2)?), lo, hi, tol)?;
    Ok((x, f(x)?))
}

/// Golden-section search driven by a comparison `less(x1, x2)` that reports
/// whether the objective is smaller at `x1` than at `x2`. Useful when the
/// difference of two objective values can be formed more accurately than
/// the values themselves.
pub fn golden_section_by<C>(less: C, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    C: Fn(f64, f64) -> Result<bool>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    for _ in 0..500 {
        if hi - lo <= tol {
            break;
        }
        if less(x1, x2)? {
            hi = x2;
            x2 = x1;
            x1 = hi - inv_phi * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + inv_phi * (hi - lo);
        }
    }
    Ok(if less(x1, x2)? { x1 } else { x2 })
}

/// Independent estimate of `a*`: golden section over the kernel range,
/// comparing `Φ` through [`objective::phi_q_difference`].
pub fn a_star_by_golden_section(ctx: &BallContext, r: AxisPoint, order: usize) -> Result<f64> {
    let pr = params(ctx, r, order)?;
    let (min, max) = kernel::range(ctx.n(), r.r());
    let tol = 1e-13 * max;
    golden_section_by(|x1, x2| Ok(objective::phi_q_difference(&pr, x1, x2)? < 0.0), min, max, tol)
}

/// Default-order convenience wrapper used by the CLI.
pub fn g_p_default(ctx: &BallContext, r: f64) -> Result<GpResult> {
    g_p(ctx, AxisPoint::new(r)?, DEFAULT_ORDER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_with_breakpoint, ORACLE_ORDER};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ctx(n: u32, p: f64) -> BallContext {
        BallContext::new(n, p).unwrap()
    }

    fn ax(r: f64) -> AxisPoint {
        AxisPoint::new(r).unwrap()
    }

    #[test]
    fn a_star_at_origin_and_quadratic() {
        for &p in &[1.5, 3.0, 5.0] {
            assert_eq!(solve_a_star(&ctx(4, p), ax(0.0), 128).unwrap(), 1.0);
        }
        for &r in &[0.1, 0.5, 0.9] {
            assert_eq!(solve_a_star(&ctx(3, 2.0), ax(r), 128).unwrap(), 1.0);
        }
        assert!(solve_a_star(&ctx(3, 1.0), ax(0.5), 128).is_err());
        assert!(solve_a_star(&ctx(3, f64::INFINITY), ax(0.5), 128).is_err());
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn a_star_reference_values() {
        // high-precision references
        let cases = [
            (3, 3.0, 0.5, 0.636_798_648_922_990_32, 1.189_434_874_081_077_3),
            (4, 3.0, 0.3, 0.786_372_133_551_522_36, 0.869_160_954_641_647_88),
            (3, 1.5, 0.3, 1.199_353_375_554_707_3, 0.895_419_448_354_875_25),
        ];
        for (n, p, r, a_ref, g_ref) in cases {
            let g = g_p(&ctx(n, p), ax(r), 128).unwrap();
            assert_relative_eq!(g.a_star, a_ref, max_relative = 1e-11);
            assert_relative_eq!(g.g_value, g_ref, max_relative = 1e-11);
            assert!(g.est_error < 1e-10);
            assert_eq!(g.method, Method::Numeric);
        }
    }

    #[test]
    fn a_star_matches_golden_section() {
        let c = ctx(3, 3.0);
        let pr = ObjectiveParams::new(c, ax(0.5), 128).unwrap();
        let (min, max) = kernel::range(3, 0.5);
        let (x, _) = golden_section_minimize(|a| objective::phi(&pr, a), min, max, 1e-10).unwrap();
        let a = solve_a_star(&c, ax(0.5), 128).unwrap();
        assert!((x - a).abs() < 1e-7, "{x} vs {a}");
        for (n, p, r) in [(5, 1.5, 0.8), (4, 5.0, 0.5), (3, 2.0, 0.8)] {
            let c = ctx(n, p);
            let a = solve_a_star(&c, ax(r), 128).unwrap();
            let g = a_star_by_golden_section(&c, ax(r), 128).unwrap();
            assert!((g - a).abs() < 1e-9 * a.max(1.0), "{n} {p} {r}: {g} vs {a}");
        }
    }

    #[test]
    fn residual_within_tolerance() {
        for n in 3..6 {
            for &p in &[1.5, 3.0, 5.0] {
                for &r in &[0.2, 0.5, 0.8] {
                    let c = ctx(n, p);
                    let a = solve_a_star(&c, ax(r), 128).unwrap();
                    let pr = ObjectiveParams::new(c, ax(r), 128).unwrap();
                    assert!(objective::big_f(&pr, a).unwrap().abs() <= 1e-9);
                    assert!(a > 0.0);
                }
            }
        }
    }

    #[test]
    fn g_p_dispatch() {
        for &p in &[1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let g = g_p(&ctx(3, p), ax(0.0), 128).unwrap();
            assert_eq!(g.g_value, 0.0);
        }
        let g = g_p(&ctx(3, f64::INFINITY), ax(0.5), 128).unwrap();
        assert_eq!(g.method, Method::ClosedPinf);
        assert_relative_eq!(g.g_value, 0.8, max_relative = 1e-14);
        assert!(g.est_error < 1e-10);
        let g = g_p(&ctx(3, 2.0), ax(0.3), 128).unwrap();
        assert_relative_eq!(g.g_value, g_2_closed(3, 0.3).unwrap(), epsilon = 1e-8);
        let g = g_p(&ctx(3, 1.0), ax(0.5), 128).unwrap();
        assert_eq!(g.method, Method::ClosedP1);
        assert!(g.est_error < 1e-12);
    }

    #[test]
    fn p1_closed_form() {
        assert_eq!(g_1_closed(5, 0.0), (1.0, 0.0));
        let (a, g) = g_1_closed(3, 0.5);
        assert_relative_eq!(a, 41.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(g, 40.0 / 9.0, max_relative = 1e-14);
        for n in 3..7 {
            for &r in &[0.01, 0.3, 0.7, 0.95] {
                let (a, g) = g_1_closed(n, r);
                assert!((a * a - g * g - 1.0).abs() <= 1e-14 * a * a);
                let (min, max) = kernel::range(n, r);
                assert_relative_eq!(max - a, g, max_relative = 1e-12);
                assert_relative_eq!(a - min, g, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn p2_closed_form() {
        assert_eq!(g_2_closed(3, 0.0).unwrap(), 0.0);
        let second = integrate_with_breakpoint(3, ORACLE_ORDER, |t| kernel::kernel(3, 0.5, t).powi(2), None).unwrap();
        assert_relative_eq!(g_2_closed(3, 0.5).unwrap(), (second - 1.0).sqrt(), epsilon = 1e-8);
        assert_relative_eq!(g_2_closed(3, 0.5).unwrap(), 1.539_600_717_839, max_relative = 1e-11);
        let mut prev = -1.0;
        for i in 0..10 {
            let g = g_2_closed(4, 0.1 * f64::from(i)).unwrap();
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn pinf_closed_form() {
        assert_relative_eq!(g_inf_closed(3, 0.5).unwrap().1, 0.8, max_relative = 1e-13);
        assert_relative_eq!(g_inf_closed(5, 0.5).unwrap().1, 0.944, max_relative = 1e-13);
        assert_relative_eq!(g_inf_closed(4, 0.5).unwrap().1, 0.895_911_961_338_172, max_relative = 1e-13);
        for n in 3..6 {
            for &r in &[0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999] {
                let (a, g) = g_inf_closed(n, r).unwrap();
                assert_relative_eq!(g, u_h_elementary(n, r).unwrap(), max_relative = 1e-12);
                assert_relative_eq!(a, kernel::kernel(n, r, 0.0), max_relative = 1e-14);
                assert!((0.0..1.0).contains(&g));
            }
        }
        assert!(g_inf_closed(6, 0.999).unwrap().1 > 0.99);
        assert!(u_h_elementary(6, 0.5).is_none());
    }

    #[test]
    fn pinf_numeric_consistency() {
        for n in 3..7 {
            for &r in &[0.1, 0.5, 0.8] {
                let g = g_p(&ctx(n, f64::INFINITY), ax(r), 128).unwrap();
                assert!(g.est_error < 1e-8, "n={n} r={r}: {}", g.est_error);
            }
        }
    }

    #[test]
    fn gradient_constants() {
        assert_relative_eq!(grad_constant(&ctx(3, f64::INFINITY)).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(grad_constant(&ctx(3, 2.0)).unwrap(), 4.0 / 3f64.sqrt(), max_relative = 1e-14);
        assert_eq!(grad_constant(&ctx(3, 1.0)).unwrap(), 4.0);
    }

    #[test]
    fn derivative_at_zero() {
        for (n, p, tol) in [(3, f64::INFINITY, 1e-3), (3, 2.0, 1e-3), (4, 3.0, 1e-2), (3, 1.0, 1e-3)] {
            let c = ctx(n, p);
            let d = gp_derivative_at_zero(&c, 1e-4, 128).unwrap();
            assert_relative_eq!(d, grad_constant(&c).unwrap(), max_relative = tol);
        }
        assert!(gp_derivative_at_zero(&ctx(3, 2.0), 0.1, 128).is_err());
    }

    #[test]
    fn a_star_slope() {
        assert_eq!(da_star_dr(&ctx(4, 2.0), ax(0.6), 128).unwrap(), 0.0);
        for (p, r) in [(3.0, 0.5), (1.5, 0.3)] {
            let c = ctx(3, p);
            let h = 1e-4;
            let fd = (solve_a_star(&c, ax(r + h), 128).unwrap() - solve_a_star(&c, ax(r - h), 128).unwrap()) / (2.0 * h);
            assert_relative_eq!(da_star_dr(&c, ax(r), 128).unwrap(), fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn monotone_in_r() {
        let radii: Vec<f64> = (0..20).map(|i| 0.05 * f64::from(i)).collect();
        for &p in &[1.5, 2.0, 3.0, f64::INFINITY] {
            let gs = g_p_grid(&ctx(3, p), &radii, 128).unwrap();
            for w in gs.windows(2) {
                assert!(w[1].g_value > w[0].g_value);
                assert!(w[1].r > w[0].r);
            }
        }
    }

    #[test]
    fn growth_toward_boundary() {
        let c = ctx(3, 1.1);
        let g5 = g_p(&c, ax(0.5), 128).unwrap().g_value;
        let g95 = g_p(&c, ax(0.95), 128).unwrap().g_value;
        assert!(g95 > 10.0 * g5, "{g95} vs {g5}");
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_section_minimize(|x| Ok((x - 0.3).powi(2) + 1.0), -2.0, 5.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert_relative_eq!(fx, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn holder_ordering(n in 3u32..6, r in 0.05f64..0.85) {
            // G_p grows as p decreases toward 1
            let ps = [f64::INFINITY, 5.0, 3.0, 2.0, 1.5, 1.0];
            let mut prev = 0.0;
            for &p in &ps {
                let g = g_p(&ctx(n, p), ax(r), 128).unwrap().g_value;
                prop_assert!(g >= prev * (1.0 - 1e-12), "p={} g={} prev={}", p, g, prev);
                prev = g;
            }
        }

        #[test]
        fn residual_property(n in 3u32..6, p in 1.2f64..8.0, r in 0.01f64..0.9) {
            let c = ctx(n, p);
            let a = solve_a_star(&c, ax(r), 128).unwrap();
            let pr = ObjectiveParams::new(c, ax(r), 128).unwrap();
            let (min, max) = kernel::range(n, r);
            prop_assert!(a > min && a < max);
            prop_assert!(objective::big_f(&pr, a).unwrap().abs() <= 1e-9);
            prop_assert!(objective::d_f_da(&pr, a).unwrap() < 0.0);
        }
    }
}
