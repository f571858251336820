//! Quadrature for zonal functions on `𝕊^{n-1}`.
//!
//! A zonal function `f(⟨η, e_n⟩)` integrates against the normalized surface
//! measure as
//!
//! ```text
//! ∫ f dσ = c_n ∫_{-1}^{1} f(t) (1 - t²)^{(n-3)/2} dt = c_n ∫_0^π f(cos θ) sin^{n-2}θ dθ
//! ```
//!
//! [`ZonalQuadrature`] is the Gauss–Jacobi rule for the weight in `t`.
//! [`GradedRule`] is a composite Gauss–Legendre rule in `θ` whose panels
//! shrink geometrically toward declared breakpoints, for integrands with
//! kinks or integrable singularities.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{domain, Error, Result};
use crate::special::zonal_constant;

/// Quadrature order used when none is configured.
pub const DEFAULT_ORDER: usize = 128;
/// Order used by verification oracles.
pub const ORACLE_ORDER: usize = 512;
/// Geometric panels on each side of a breakpoint for
/// [`integrate_with_breakpoint`].
pub const DEFAULT_DEPTH: usize = 40;

const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Jacobi rule with `α = β = (n-3)/2`, weights normalized to sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalQuadrature {
    n: u32,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// `(P_N(x), P_{N-1}(x))` for the symmetric Jacobi polynomials `P^{(α,α)}`.
fn jacobi_pair(order: usize, alpha: f64, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = (alpha + 1.0) * x;
    for k in 2..=order {
        let k = k as f64;
        let s = 2.0 * k + 2.0 * alpha;
        let lead = 2.0 * k * (k + 2.0 * alpha) * (s - 2.0);
        let next = ((s - 1.0) * s * (s - 2.0) * x * cur
            - 2.0 * (k + alpha - 1.0) * (k + alpha - 1.0) * s * prev)
            / lead;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

impl ZonalQuadrature {
    /// Build the rule of the given order; exact for polynomials of degree
    /// up to `2 order - 1`.
    pub fn new(n: u32, order: usize) -> Result<Self> {
        if n < 3 {
            return domain(format!("dimension n = {n} must be at least 3"));
        }
        if order < 2 {
            return domain(format!("quadrature order {order} must be at least 2"));
        }
        let alpha = (f64::from(n) - 3.0) / 2.0;
        let nf = order as f64;
        let half = order / 2;
        let mut upper = Vec::with_capacity(half);
        let mut raw_w = Vec::with_capacity(half);

        for i in 1..=half {
            // Asymptotic zero location, counted from t = 1.
            let theta = PI * (i as f64 + alpha / 2.0 - 0.25) / (nf + alpha + 0.5);
            let mut x = theta.cos();
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (p, pm1) = jacobi_pair(order, alpha, x);
                let dp = (-nf * x * p + (nf + alpha) * pm1) / (1.0 - x * x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1e-3) {
                    converged = true;
                    break;
                }
            }
            if !converged || !x.is_finite() {
                return Err(Error::NonConvergence {
                    what: "Gauss-Jacobi node iteration",
                    iterations: NEWTON_MAX_ITER,
                });
            }
            let (p, pm1) = jacobi_pair(order, alpha, x);
            let dp = (-nf * x * p + (nf + alpha) * pm1) / (1.0 - x * x);
            upper.push(x);
            raw_w.push(1.0 / ((1.0 - x * x) * dp * dp));
        }

        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for (x, w) in upper.iter().zip(&raw_w) {
            nodes.push(-x);
            weights.push(*w);
        }
        if order % 2 == 1 {
            let (_, pm1) = jacobi_pair(order, alpha, 0.0);
            let dp = (nf + alpha) * pm1;
            nodes.push(0.0);
            weights.push(1.0 / (dp * dp));
        }
        for (x, w) in upper.iter().zip(&raw_w).rev() {
            nodes.push(*x);
            weights.push(*w);
        }

        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::NonConvergence {
                what: "Gauss-Jacobi node iteration (duplicate roots)",
                iterations: NEWTON_MAX_ITER,
            });
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { n, order, nodes, weights })
    }

    /// Shared rule for `(n, order)`, built once per process.
    pub fn cached(n: u32, order: usize) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(u32, usize), Arc<ZonalQuadrature>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&(n, order)) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(n, order)?);
        cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert((n, order), Arc::clone(&rule));
        Ok(rule)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_i f(t_i)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::NonFinite { t, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// A node of a [`GradedRule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZonalNode {
    pub t: f64,
    pub weight: f64,
    /// `t - t_b` for the nearest breakpoint `t_b`, computed without
    /// cancellation for nodes clustered around it. `NaN` without breakpoints.
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Plain,
    North,
    Break(usize),
}

/// Composite rule in `θ = arccos t` with geometric grading (ratio 1/2)
/// toward each breakpoint and, optionally, toward the north pole `t = 1`.
#[derive(Debug, Clone)]
pub struct GradedRule {
    n: u32,
    nodes: Vec<ZonalNode>,
}

/// Gauss–Legendre order used on each panel of a graded rule.
pub fn panel_order(order: usize) -> usize {
    (order / 8).clamp(8, 64)
}

impl GradedRule {
    /// `depth` panels are laid on each side of every breakpoint; the
    /// innermost panel has width `2^-depth` of its side. `north_depth > 0`
    /// also grades toward `t = 1`, where the kernel peaks for `r` near 1.
    pub fn new(n: u32, order: usize, breakpoints: &[f64], depth: usize, north_depth: usize) -> Result<Self> {
        if n < 3 {
            return domain(format!("dimension n = {n} must be at least 3"));
        }
        if depth == 0 && !breakpoints.is_empty() {
            return domain("grading depth must be positive");
        }
        if let Some(b) = breakpoints.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return domain(format!("breakpoint {b} outside [-1, 1]"));
        }
        let legendre = ZonalQuadrature::new(3, panel_order(order))?;
        let cn = zonal_constant(n);

        let mut tb: Vec<f64> = breakpoints.to_vec();
        tb.sort_by(|a, b| b.total_cmp(a));
        tb.dedup();
        let thetas: Vec<f64> = tb.iter().map(|t| t.acos()).collect();

        let mut ends: Vec<(f64, End)> = Vec::with_capacity(tb.len() + 2);
        if thetas.first() != Some(&0.0) {
            ends.push((0.0, if north_depth > 0 { End::North } else { End::Plain }));
        }
        ends.extend(thetas.iter().enumerate().map(|(i, &th)| (th, End::Break(i))));
        if thetas.last() != Some(&PI) {
            ends.push((PI, End::Plain));
        }

        let mut rule = Self { n, nodes: Vec::new() };
        let depth_of = |e: End| match e {
            End::North => north_depth,
            _ => depth,
        };
        for pair in ends.windows(2) {
            let ((lo, ka), (hi, kb)) = (pair[0], pair[1]);
            if hi <= lo {
                continue;
            }
            match (ka != End::Plain, kb != End::Plain) {
                (true, true) => {
                    let mid = 0.5 * (lo + hi);
                    rule.push_graded(&legendre, cn, &tb, &thetas, lo, ka, mid - lo, 1.0, depth_of(ka));
                    rule.push_graded(&legendre, cn, &tb, &thetas, hi, kb, hi - mid, -1.0, depth_of(kb));
                }
                (true, false) => {
                    rule.push_graded(&legendre, cn, &tb, &thetas, lo, ka, hi - lo, 1.0, depth_of(ka))
                }
                (false, true) => {
                    rule.push_graded(&legendre, cn, &tb, &thetas, hi, kb, hi - lo, -1.0, depth_of(kb))
                }
                (false, false) => {
                    let panels = 4;
                    let width = (hi - lo) / panels as f64;
                    for k in 0..panels {
                        let a = lo + k as f64 * width;
                        for (&x, &w) in legendre.nodes().iter().zip(legendre.weights()) {
                            let theta = a + 0.5 * (x + 1.0) * width;
                            rule.push_plain(cn, &tb, &thetas, theta, width * w);
                        }
                    }
                }
            }
        }
        Ok(rule)
    }

    fn push_plain(&mut self, cn: f64, tb: &[f64], thetas: &[f64], theta: f64, dtheta_w: f64) {
        let t = theta.cos();
        let offset = nearest(thetas, theta).map_or(f64::NAN, |i| t - tb[i]);
        let weight = cn * theta.sin().powi(self.n as i32 - 2) * dtheta_w;
        self.nodes.push(ZonalNode { t, weight, offset });
    }

    #[allow(clippy::too_many_arguments)]
    fn push_graded(
        &mut self,
        legendre: &ZonalQuadrature,
        cn: f64,
        tb: &[f64],
        thetas: &[f64],
        end: f64,
        kind: End,
        length: f64,
        dir: f64,
        depth: usize,
    ) {
        let mut edges = Vec::with_capacity(depth + 2);
        edges.push(0.0);
        for k in (0..=depth).rev() {
            edges.push(length * 0.5f64.powi(k as i32));
        }
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let width = b - a;
            for (&x, &w) in legendre.nodes().iter().zip(legendre.weights()) {
                let s = a + 0.5 * (x + 1.0) * width;
                let theta = end + dir * s;
                match kind {
                    End::Break(i) => {
                        // cos(θ_b + δ) - cos θ_b = -2 sin(θ_b + δ/2) sin(δ/2)
                        let d = dir * s;
                        let offset = -2.0 * (end + 0.5 * d).sin() * (0.5 * d).sin();
                        let weight = cn * theta.sin().powi(self.n as i32 - 2) * width * w;
                        self.nodes.push(ZonalNode { t: (tb[i] + offset).clamp(-1.0, 1.0), weight, offset });
                    }
                    _ => self.push_plain(cn, tb, thetas, theta, width * w),
                }
            }
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nodes(&self) -> &[ZonalNode] {
        &self.nodes
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.integrate_nodes(|node| f(node.t))
    }

    /// Integrate a function that also wants the breakpoint offset.
    pub fn integrate_nodes<F: Fn(&ZonalNode) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for node in &self.nodes {
            let v = f(node);
            if !v.is_finite() {
                return Err(Error::NonFinite { t: node.t, value: v });
            }
            acc += node.weight * v;
        }
        Ok(acc)
    }
}

fn nearest(thetas: &[f64], theta: f64) -> Option<usize> {
    thetas
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - theta).abs().total_cmp(&(b.1 - theta).abs()))
        .map(|(i, _)| i)
}

/// `∫ f dσ` with a Gauss–Jacobi rule of the given order.
pub fn integrate_zonal<F: Fn(f64) -> f64>(rule: &ZonalQuadrature, f: F) -> Result<f64> {
    rule.integrate(f)
}

/// `∫ f dσ` split at `t0` with graded panels on both sides; without a
/// breakpoint this is the plain Gauss–Jacobi rule.
pub fn integrate_with_breakpoint<F: Fn(f64) -> f64>(n: u32, order: usize, f: F, t0: Option<f64>) -> Result<f64> {
    match t0 {
        None => ZonalQuadrature::new(n, order)?.integrate(f),
        Some(t0) => GradedRule::new(n, order, &[t0], DEFAULT_DEPTH, 0)?.integrate(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel;
    use crate::special::alpha_q;
    use approx::assert_relative_eq;

    #[test]
    fn rule_weights_positive_and_normalized() {
        for n in 3..9 {
            for &order in &[2, 3, 7, 16, 33, 128, 512] {
                let rule = ZonalQuadrature::new(n, order).unwrap();
                assert_eq!(rule.nodes().len(), order);
                assert!(rule.weights().iter().all(|&w| w > 0.0));
                let sum: f64 = rule.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
                assert!(rule.nodes().iter().all(|t| t.abs() < 1.0));
            }
        }
    }

    #[test]
    fn rule_rejects_bad_input() {
        assert!(ZonalQuadrature::new(2, 16).is_err());
        assert!(ZonalQuadrature::new(3, 1).is_err());
    }

    #[test]
    fn rule_examples() {
        let rule = ZonalQuadrature::new(3, 16).unwrap();
        assert_relative_eq!(rule.integrate(|_| 1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert!(rule.integrate(|t| t).unwrap().abs() < 1e-15);
        assert_relative_eq!(rule.integrate(|t| t * t).unwrap(), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(rule.integrate(|_| 2.5).unwrap(), 2.5, max_relative = 1e-14);
    }

    #[test]
    fn rule_exact_for_polynomials() {
        // Even moments equal alpha_q(n, 2k); odd moments vanish.
        for n in 3..8 {
            for &order in &[4usize, 9, 32, 128] {
                let rule = ZonalQuadrature::new(n, order).unwrap();
                for k in 0..order {
                    let exact = alpha_q(n, 2.0 * k as f64).unwrap();
                    let got = rule.integrate(|t| t.powi(2 * k as i32)).unwrap();
                    assert!((got - exact).abs() <= 1e-12, "n={n} order={order} k={k}");
                    let odd = rule.integrate(|t| t.powi(2 * k as i32 + 1)).unwrap();
                    assert!(odd.abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn kernel_normalization() {
        for n in 3..7 {
            for &r in &[0.0, 0.1, 0.3, 0.5, 0.7, 0.8] {
                let rule = ZonalQuadrature::new(n, DEFAULT_ORDER).unwrap();
                let v = integrate_zonal(&rule, |t| kernel(n, r, t)).unwrap();
                assert!((v - 1.0).abs() < 1e-10, "n={n} r={r}: {v}");
            }
            let rule = ZonalQuadrature::new(n, ORACLE_ORDER).unwrap();
            let v = rule.integrate(|t| kernel(n, 0.9, t)).unwrap();
            assert!((v - 1.0).abs() < 1e-10, "n={n} r=0.9: {v}");
        }
    }

    #[test]
    fn absolute_moment() {
        // The kink at t = 0 limits a plain Gauss rule to O(order^-2).
        let rule = ZonalQuadrature::new(3, 8192).unwrap();
        assert!((integrate_zonal(&rule, f64::abs).unwrap() - 0.5).abs() < 1e-8);
        let split = integrate_with_breakpoint(3, DEFAULT_ORDER, f64::abs, Some(0.0)).unwrap();
        assert!((split - 0.5).abs() < 1e-14);
    }

    #[test]
    fn doubling_order_plateau() {
        for n in 3..6 {
            let a = ZonalQuadrature::new(n, 64).unwrap();
            let b = ZonalQuadrature::new(n, 128).unwrap();
            let f = |t: f64| (1.5 * t).exp() * kernel(n, 0.5, t);
            let (va, vb) = (a.integrate(f).unwrap(), b.integrate(f).unwrap());
            assert!((va - vb).abs() < 1e-12 * vb.abs().max(1.0));
        }
    }

    #[test]
    fn non_finite_values_are_errors() {
        let rule = ZonalQuadrature::new(3, 8).unwrap();
        assert!(matches!(rule.integrate(|t| 1.0 / (t - t)), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn graded_rule_is_normalized() {
        for n in 3..8 {
            for bps in [vec![], vec![0.3], vec![-0.999], vec![1.0], vec![-1.0], vec![0.7, -0.7]] {
                let rule = GradedRule::new(n, DEFAULT_ORDER, &bps, DEFAULT_DEPTH, 12).unwrap();
                let sum = rule.integrate(|_| 1.0).unwrap();
                assert!((sum - 1.0).abs() < 1e-13, "n={n} bps={bps:?}: {sum}");
                let m2 = rule.integrate(|t| t * t).unwrap();
                assert!((m2 - 1.0 / f64::from(n)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn graded_offsets_are_accurate() {
        let t0 = 0.3;
        let rule = GradedRule::new(4, DEFAULT_ORDER, &[t0], 200, 0).unwrap();
        let smallest = rule.nodes().iter().map(|n| n.offset.abs()).fold(f64::INFINITY, f64::min);
        assert!(smallest > 0.0 && smallest < 1e-60);
        for node in rule.nodes() {
            if node.offset.abs() > 1e-6 {
                assert!((node.t - t0 - node.offset).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn breakpoint_consistent_with_plain_rule_for_smooth_integrands() {
        for n in 3..7 {
            let f = |t: f64| (2.0 * t).cos() + kernel(n, 0.4, t);
            let plain = integrate_with_breakpoint(n, DEFAULT_ORDER, f, None).unwrap();
            let rule = ZonalQuadrature::new(n, DEFAULT_ORDER).unwrap();
            assert_eq!(plain, integrate_zonal(&rule, f).unwrap());
            for &t0 in &[-0.8, 0.0, 0.35, 0.99] {
                let split = integrate_with_breakpoint(n, DEFAULT_ORDER, f, Some(t0)).unwrap();
                assert!((split - plain).abs() < 1e-10);
            }
        }
    }
}
