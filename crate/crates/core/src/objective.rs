//! The objective `Φ_{q,r}(a) = (∫ |P_h(r e_n, η) - a|^q dσ)^{1/q}` and the
//! stationarity function
//! `F(r, a) = ∫ (P_h - a) |P_h - a|^{q-2} dσ` with its partial derivatives.
//!
//! All integrals are taken with a [`GradedRule`] split at the crossing point
//! `λ₁(r, a)` where `P_h(r e_n, λ₁) = a`; near it the difference `P_h - a`
//! is evaluated from the node offset so the singular factor
//! `|P_h - a|^{q-2}` (for `q < 2`) keeps full precision.

use crate::error::{domain, Result};
use crate::kernel::{self, AxisPoint, BallContext};
use crate::quadrature::GradedRule;

/// Parameters of `Φ_{q,r}` and `F(r, ·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParams {
    pub ctx: BallContext,
    pub r: AxisPoint,
    pub order: usize,
}

/// The four integrals behind `Φ`, `F`, `∂F/∂a` and `∂F/∂r` at one level `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `∫ |P_h - a|^q dσ`
    pub abs_q: f64,
    /// `F(r, a) = ∫ sign(P_h - a) |P_h - a|^{q-1} dσ`
    pub signed_q1: f64,
    /// `∫ |P_h - a|^{q-2} dσ`
    pub abs_q2: f64,
    /// `∫ ∂_r P_h |P_h - a|^{q-2} dσ`
    pub dr_q2: f64,
}

impl ObjectiveParams {
    pub fn new(ctx: BallContext, r: AxisPoint, order: usize) -> Result<Self> {
        if order < 2 {
            return domain(format!("quadrature order {order} must be at least 2"));
        }
        Ok(Self { ctx, r, order })
    }

    pub fn q(&self) -> f64 {
        self.ctx.q()
    }

    fn require_finite_q(&self) -> Result<f64> {
        let q = self.q();
        if !q.is_finite() {
            return domain("objective requires a finite exponent q (p > 1)");
        }
        Ok(q)
    }

    fn require_f_q(&self) -> Result<f64> {
        let q = self.require_finite_q()?;
        if q <= 1.0 {
            return domain("F(r, a) requires q > 1 (p < inf)");
        }
        Ok(q)
    }

    /// Graded rule and crossing point for level `a`.
    pub fn rule_for(&self, a: f64) -> Result<(GradedRule, Option<f64>)> {
        let (n, r) = (self.ctx.n(), self.r.r());
        let crossing = kernel::crossing(n, r, a);
        let bps: Vec<f64> = crossing.into_iter().collect();
        let rule = GradedRule::new(n, self.order, &bps, grading_depth(self.q()), north_depth(r))?;
        Ok((rule, crossing))
    }

    /// All four integrals in one pass over the nodes.
    pub fn moments(&self, a: f64) -> Result<Moments> {
        let q = self.require_finite_q()?;
        if !a.is_finite() {
            return domain(format!("level a = {a} must be finite"));
        }
        let (n, r) = (self.ctx.n(), self.r.r());
        if r == 0.0 {
            return Ok(origin_moments(q, a));
        }
        let (rule, crossing) = self.rule_for(a)?;
        let mut m = Moments { abs_q: 0.0, signed_q1: 0.0, abs_q2: 0.0, dr_q2: 0.0 };
        for node in rule.nodes() {
            let d = match crossing {
                Some(_) => kernel::kernel_difference(n, r, node.t, a, node.offset),
                None => kernel::kernel(n, r, node.t) - a,
            };
            let ad = d.abs();
            let p2 = ad.powf(q - 2.0);
            let p1 = p2 * ad;
            let w = node.weight;
            m.abs_q += w * p1 * ad;
            m.signed_q1 += w * p1.copysign(d);
            m.abs_q2 += w * p2;
            m.dr_q2 += w * kernel::kernel_dr(n, r, node.t) * p2;
        }
        Ok(m)
    }
}

fn origin_moments(q: f64, a: f64) -> Moments {
    let d = 1.0 - a;
    let ad = d.abs();
    Moments {
        abs_q: ad.powf(q),
        signed_q1: ad.powf(q - 1.0).copysign(d),
        abs_q2: ad.powf(q - 2.0),
        dr_q2: 0.0,
    }
}

/// Geometric panels per side of the crossing point, chosen so the innermost
/// panel carries at most ~1e-14 of a `|x|^{q-2}` singularity.
pub fn grading_depth(q: f64) -> usize {
    if q >= 2.0 || q <= 1.0 {
        return 47;
    }
    let depth = (14.0 / ((q - 1.0) * std::f64::consts::LOG10_2)).ceil();
    (depth as usize).clamp(12, 400)
}

/// Panels toward `t = 1`, resolving the kernel peak of width `~(1 - r)`.
pub fn north_depth(r: f64) -> usize {
    if r < 0.3 {
        return 0;
    }
    let levels = (std::f64::consts::PI * r.sqrt() / (0.02 * (1.0 - r))).log2().ceil();
    (levels as usize).clamp(4, 60)
}

/// `Φ_{q,r}(a)` for `q ∈ [1, ∞)`.
pub fn phi(params: &ObjectiveParams, a: f64) -> Result<f64> {
    let q = params.require_finite_q()?;
    if params.r.r() == 0.0 {
        return Ok((1.0 - a).abs());
    }
    Ok(params.moments(a)?.abs_q.powf(1.0 / q))
}

/// `Φ(a₁)^q - Φ(a₂)^q`, summed node by node from
/// `|d + h|^q - |d|^q` with `d = P_h - a₂`, `h = a₂ - a₁`, so the result keeps
/// relative precision even when `a₁` and `a₂` are close.
pub fn phi_q_difference(params: &ObjectiveParams, a1: f64, a2: f64) -> Result<f64> {
    let q = params.require_finite_q()?;
    let (n, r) = (params.ctx.n(), params.r.r());
    let h = a2 - a1;
    let step = |d: f64| -> f64 {
        let e = d + h;
        if d != 0.0 && e.signum() == d.signum() && h.abs() < 0.5 * d.abs() {
            d.abs().powf(q) * (q * (h / d).ln_1p()).exp_m1()
        } else {
            e.abs().powf(q) - d.abs().powf(q)
        }
    };
    if r == 0.0 {
        return Ok(step(1.0 - a2));
    }
    let bps: Vec<f64> = [a1, a2].iter().filter_map(|&a| kernel::crossing(n, r, a)).collect();
    GradedRule::new(n, params.order, &bps, grading_depth(q), north_depth(r))?
        .integrate(|t| step(kernel::kernel(n, r, t) - a2))
}

/// `F(r, a)`, strictly decreasing in `a`.
pub fn big_f(params: &ObjectiveParams, a: f64) -> Result<f64> {
    params.require_f_q()?;
    Ok(params.moments(a)?.signed_q1)
}

/// `∂F/∂a = (1 - q) ∫ |P_h - a|^{q-2} dσ`.
pub fn d_f_da(params: &ObjectiveParams, a: f64) -> Result<f64> {
    let q = params.require_f_q()?;
    if params.r.r() == 0.0 && a == 1.0 && q < 2.0 {
        return domain("dF/da diverges at r = 0, a = 1 for q < 2");
    }
    Ok((1.0 - q) * params.moments(a)?.abs_q2)
}

/// `∂F/∂r = (q - 1) ∫ ∂_r P_h |P_h - a|^{q-2} dσ`.
pub fn d_f_dr(params: &ObjectiveParams, a: f64) -> Result<f64> {
    let q = params.require_f_q()?;
    Ok((q - 1.0) * params.moments(a)?.dr_q2)
}
