//! The Poisson–Szegő kernel of the unit ball restricted to the axis point
//! `x = r e_n`, as a function of the zonal coordinate `t = ⟨η, e_n⟩`:
//!
//! ```text
//! P_h(r e_n, η) = ((1 - r²) / (1 + r² - 2 r t))^(n-1)
//! ```

use std::fmt;

use crate::error::{domain, Result};

/// Dimension and conjugate exponent pair `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallContext {
    n: u32,
    p: f64,
    q: f64,
}

impl BallContext {
    /// `p ∈ [1, ∞]`; use `f64::INFINITY` for `p = ∞`.
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if n < 3 {
            return domain(format!("dimension n = {n} must be at least 3"));
        }
        if p.is_nan() || p < 1.0 {
            return domain(format!("exponent p = {p} must lie in [1, inf]"));
        }
        Ok(Self { n, p, q: conjugate(p) })
    }

    /// Context from the dual exponent `q ∈ [1, ∞]`.
    pub fn from_q(n: u32, q: f64) -> Result<Self> {
        if q.is_nan() || q < 1.0 {
            return domain(format!("exponent q = {q} must lie in [1, inf]"));
        }
        Self::new(n, conjugate(q))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p_is_infinite(&self) -> bool {
        self.p.is_infinite()
    }
}

impl fmt::Display for BallContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} p={} q={}", self.n, fmt_exponent(self.p), fmt_exponent(self.q))
    }
}

fn fmt_exponent(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

/// Conjugate exponent with `1/∞ = 0`.
pub fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// A radius `r ∈ [0, 1)` along the `e_n` axis.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AxisPoint(f64);

impl AxisPoint {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return domain(format!("radius r = {r} outside [0, 1)"));
        }
        Ok(Self(r))
    }

    pub fn r(self) -> f64 {
        self.0
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&t) {
        return domain(format!("zonal coordinate t = {t} outside [-1, 1]"));
    }
    Ok(())
}

/// `1 + r² - 2 r t`, i.e. `|r e_n - η|²`.
#[inline]
pub(crate) fn distance_sq(r: f64, t: f64) -> f64 {
    // (1 - r)² + 2r(1 - t) keeps full precision near t = 1
    (1.0 - r) * (1.0 - r) + 2.0 * r * (1.0 - t)
}

/// Kernel value without argument checks; evaluated in log space.
#[inline]
pub(crate) fn kernel(n: u32, r: f64, t: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let m = f64::from(n - 1);
    (m * ((-r * r).ln_1p() - distance_sq(r, t).ln())).exp()
}

#[inline]
pub(crate) fn kernel_dr(n: u32, r: f64, t: f64) -> f64 {
    let m = f64::from(n - 1);
    m * kernel(n, r, t) * (-2.0 * r / (1.0 - r * r) - (2.0 * r - 2.0 * t) / distance_sq(r, t))
}

/// `P_h(r e_n, t) - P_h(r e_n, t₀)` where `offset = t - t₀` is supplied
/// separately so the difference keeps full relative precision near `t₀`.
#[inline]
pub(crate) fn kernel_difference(n: u32, r: f64, t: f64, base_value: f64, offset: f64) -> f64 {
    // P(t)/P(t₀) = (D(t₀)/D(t))^(n-1) and D(t₀) - D(t) = 2r(t - t₀)
    let m = f64::from(n - 1);
    base_value * (m * (2.0 * r * offset / distance_sq(r, t)).ln_1p()).exp_m1()
}

#[inline]
pub(crate) fn range(n: u32, r: f64) -> (f64, f64) {
    let m = f64::from(n - 1);
    let ratio = ((1.0 - r) / (1.0 + r)).ln();
    ((m * ratio).exp(), (-m * ratio).exp())
}

pub(crate) fn crossing(n: u32, r: f64, a: f64) -> Option<f64> {
    if r == 0.0 || !(a > 0.0) {
        return None;
    }
    let m = f64::from(n - 1);
    let lambda = (1.0 + r * r) / (2.0 * r) - (1.0 - r * r) / (2.0 * r) * (-a.ln() / m).exp();
    (-1.0..=1.0).contains(&lambda).then_some(lambda)
}

/// `P_h(r e_n, η)` at `⟨η, e_n⟩ = t`.
pub fn poisson_szego_axis(ctx: &BallContext, r: AxisPoint, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(kernel(ctx.n(), r.r(), t))
}

/// `(min, max)` of the kernel slice over the sphere, attained at `t = -1`
/// and `t = 1`.
pub fn kernel_range(ctx: &BallContext, r: AxisPoint) -> (f64, f64) {
    range(ctx.n(), r.r())
}

/// The zonal coordinate `t₀` with `P_h(r e_n, t₀) = a`, or `None` when the
/// kernel slice does not cross level `a`.
pub fn crossing_point(ctx: &BallContext, r: AxisPoint, a: f64) -> Result<Option<f64>> {
    if !a.is_finite() {
        return domain(format!("level a = {a} must be finite"));
    }
    if r.r() == 0.0 {
        if a != 1.0 {
            return domain("crossing point undefined at r = 0 for a != 1");
        }
        return Ok(None);
    }
    Ok(crossing(ctx.n(), r.r(), a))
}

/// `∂P_h(r e_n, t)/∂r`.
pub fn d_kernel_dr(ctx: &BallContext, r: AxisPoint, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(kernel_dr(ctx.n(), r.r(), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ctx(n: u32) -> BallContext {
        BallContext::new(n, 2.0).unwrap()
    }

    fn ax(r: f64) -> AxisPoint {
        AxisPoint::new(r).unwrap()
    }

    #[test]
    fn context_conjugates() {
        let c = BallContext::new(3, f64::INFINITY).unwrap();
        assert_eq!(c.q(), 1.0);
        let c = BallContext::new(3, 1.0).unwrap();
        assert!(c.q().is_infinite());
        let c = BallContext::new(4, 3.0).unwrap();
        assert_relative_eq!(1.0 / c.p() + 1.0 / c.q(), 1.0, max_relative = 1e-15);
        assert_eq!(BallContext::from_q(3, 2.0).unwrap().p(), 2.0);
        assert!(BallContext::new(2, 2.0).is_err());
        assert!(BallContext::new(3, 0.5).is_err());
        assert!(BallContext::new(3, f64::NAN).is_err());
        assert!(AxisPoint::new(1.0).is_err());
        assert!(AxisPoint::new(-0.1).is_err());
    }

    #[test]
    fn kernel_examples() {
        for n in 3..7 {
            for &t in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
                assert_eq!(poisson_szego_axis(&ctx(n), ax(0.0), t).unwrap(), 1.0);
            }
        }
        assert_relative_eq!(poisson_szego_axis(&ctx(3), ax(0.5), 1.0).unwrap(), 9.0, max_relative = 1e-14);
        assert_relative_eq!(poisson_szego_axis(&ctx(3), ax(0.5), -1.0).unwrap(), 1.0 / 9.0, max_relative = 1e-14);
        assert!(poisson_szego_axis(&ctx(3), ax(0.5), 1.5).is_err());
    }

    #[test]
    fn range_examples() {
        assert_eq!(kernel_range(&ctx(3), ax(0.0)), (1.0, 1.0));
        let (lo, hi) = kernel_range(&ctx(3), ax(0.5));
        assert_relative_eq!(lo, 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 9.0, max_relative = 1e-14);
        let (lo, hi) = kernel_range(&ctx(4), ax(0.5));
        assert_relative_eq!(lo, 1.0 / 27.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 27.0, max_relative = 1e-14);
    }

    #[test]
    fn crossing_examples() {
        for n in 3..7 {
            for &r in &[0.1, 0.5, 0.9] {
                let t0 = crossing_point(&ctx(n), ax(r), 1.0).unwrap().unwrap();
                assert_relative_eq!(t0, r, max_relative = 1e-14);
                assert_relative_eq!(kernel(n, r, t0), 1.0, max_relative = 1e-13);
            }
        }
        let t0 = crossing_point(&ctx(3), ax(0.5), 9.0).unwrap().unwrap();
        assert_relative_eq!(t0, 1.0, max_relative = 1e-14);
        assert_eq!(crossing_point(&ctx(3), ax(0.5), 9.0 * (1.0 + 1e-9)).unwrap(), None);
        assert_eq!(crossing_point(&ctx(3), ax(0.5), 0.1).unwrap(), None);
        assert!(crossing_point(&ctx(3), ax(0.0), 2.0).is_err());
        assert_eq!(crossing_point(&ctx(3), ax(0.0), 1.0).unwrap(), None);
    }

    #[test]
    fn derivative_examples() {
        for &t in &[-1.0, -0.5, 0.0, 0.25, 1.0] {
            assert_relative_eq!(d_kernel_dr(&ctx(3), ax(0.0), t).unwrap(), 4.0 * t, epsilon = 1e-15);
        }
        let h = 1e-6;
        let fd = (kernel(3, 0.5 + h, 0.0) - kernel(3, 0.5 - h, 0.0)) / (2.0 * h);
        assert_relative_eq!(d_kernel_dr(&ctx(3), ax(0.5), 0.0).unwrap(), fd, max_relative = 1e-6);
        for i in 1..20 {
            let r = i as f64 / 20.0;
            assert!(d_kernel_dr(&ctx(3), ax(r), 1.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_differences_on_grid() {
        let h = 1e-6;
        for n in 3..7 {
            for i in 1..10 {
                let r = i as f64 / 10.0 - 0.05;
                for j in 0..=8 {
                    let t = -1.0 + j as f64 * 0.25;
                    let fd = (kernel(n, r + h, t) - kernel(n, r - h, t)) / (2.0 * h);
                    let an = kernel_dr(n, r, t);
                    assert!((an - fd).abs() <= 1e-6 * an.abs().max(1e-3), "n={n} r={r} t={t}");
                }
            }
        }
    }

    #[test]
    fn difference_matches_direct_form() {
        let (n, r) = (4, 0.6);
        let t0 = 0.2;
        let base = kernel(n, r, t0);
        for &t in &[-0.9, 0.1, 0.19, 0.5, 0.99] {
            let direct = kernel(n, r, t) - base;
            assert_relative_eq!(kernel_difference(n, r, t, base, t - t0), direct, max_relative = 1e-12);
        }
        // Tiny offsets keep their leading-order slope.
        let slope = (kernel(n, r, t0 + 1e-7) - kernel(n, r, t0 - 1e-7)) / 2e-7;
        assert_relative_eq!(
            kernel_difference(n, r, t0, base, 1e-40) / 1e-40,
            slope,
            max_relative = 1e-6
        );
    }

    proptest! {
        #[test]
        fn kernel_within_range(n in 3u32..9, r in 0.0f64..0.95, t in -1.0f64..=1.0) {
            let (lo, hi) = range(n, r);
            let v = kernel(n, r, t);
            prop_assert!(v > 0.0);
            prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
            prop_assert!(lo <= 1.0 && hi >= 1.0);
            prop_assert!((lo * hi - 1.0).abs() < 1e-12);
        }

        #[test]
        fn kernel_increasing_in_t(n in 3u32..9, r in 0.01f64..0.95, t in -1.0f64..0.99, dt in 1e-3f64..0.01) {
            prop_assert!(kernel(n, r, (t + dt).min(1.0)) > kernel(n, r, t));
        }

        #[test]
        fn crossing_increasing_in_level(n in 3u32..9, r in 0.01f64..0.95, u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let (lo, hi) = range(n, r);
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            prop_assume!(v - u > 1e-6);
            let a1 = lo * (hi / lo).powf(u);
            let a2 = lo * (hi / lo).powf(v);
            let t1 = crossing(n, r, a1).unwrap();
            let t2 = crossing(n, r, a2).unwrap();
            prop_assert!(t1 < t2);
            prop_assert!((kernel(n, r, t1) / a1 - 1.0).abs() < 1e-9);
        }
    }
}
