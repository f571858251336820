//! The acceptance suite: nine numbered criteria, each with tolerances and
//! an optional wall-clock limit. Shared by the `check` subcommand and the
//! `acceptance` test target.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::Result;
use crate::kernel::{self, AxisPoint, BallContext};
use crate::objective::{self, ObjectiveParams};
use crate::solver::{self, g_1_closed, g_2_closed, g_inf_closed, g_p, g_p_grid, grad_constant, u_h_elementary};
use crate::verify;

pub const TABLE_RADII: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
pub const GRID_N: [u32; 3] = [3, 4, 5];
pub const GRID_P: [f64; 4] = [1.5, 2.0, 3.0, 5.0];
pub const GRID_R: [f64; 3] = [0.2, 0.5, 0.8];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Option<Duration>,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = self.limit.map_or(String::new(), |l| format!(" / limit {:.0?}", l));
        write!(
            f,
            "{} criterion {}: {} [{:.2?}{}] {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed,
            limit,
            self.detail
        )
    }
}

/// Collects assertion failures for one criterion.
#[derive(Default)]
struct Tally {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn timed(id: u8, name: &'static str, limit: Option<Duration>, body: impl FnOnce(&mut Tally) -> Result<()>) -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    let res = body(&mut tally);
    let elapsed = start.elapsed();
    if let Err(e) = res {
        tally.failures.push(format!("error: {e}"));
    }
    if let Some(l) = limit {
        tally.check(elapsed <= l, || format!("runtime {elapsed:.2?} exceeds {l:.0?}"));
    }
    let passed = tally.failures.is_empty();
    let mut detail = tally.notes.join("; ");
    if !passed {
        let shown: Vec<_> = tally.failures.iter().take(5).cloned().collect();
        detail = format!("{} failure(s): {}{}", tally.failures.len(), shown.join(" | "), if detail.is_empty() { String::new() } else { format!("; {detail}") });
    }
    Outcome { id, name, passed, detail, elapsed, limit }
}

fn ctx(n: u32, p: f64) -> Result<BallContext> {
    BallContext::new(n, p)
}

fn ax(r: f64) -> Result<AxisPoint> {
    AxisPoint::new(r)
}

fn grid() -> Vec<(u32, f64, f64)> {
    let mut cells = Vec::new();
    for &n in &GRID_N {
        for &p in &GRID_P {
            for &r in &GRID_R {
                cells.push((n, p, r));
            }
        }
    }
    cells
}

pub fn criterion_1(order: usize) -> Outcome {
    timed(1, "G_inf elementary forms (p = inf)", Some(Duration::from_secs(1)), |t| {
        let mut worst = 0f64;
        for &n in &GRID_N {
            for &r in &TABLE_RADII {
                let exact = u_h_elementary(n, r).expect("tabulated dimension");
                let (a, closed) = g_inf_closed(n, r)?;
                let numeric = objective::phi(&ObjectiveParams::new(ctx(n, f64::INFINITY)?, ax(r)?, order)?, a)?;
                let err = (closed - exact).abs().max((numeric - exact).abs());
                worst = worst.max(err);
                t.check(err <= 1e-8, || format!("n={n} r={r}: closed {closed} numeric {numeric} table {exact}"));
            }
        }
        let spot = [(3, 0.8, 1e-12), (4, 0.89590, 5e-5), (5, 0.944, 1e-12)];
        for (n, want, tol) in spot {
            let got = g_inf_closed(n, 0.5)?.1;
            t.check((got - want).abs() <= tol, || format!("n={n} r=0.5: {got} vs {want}"));
        }
        t.note(format!("max deviation {worst:.2e}"));
        Ok(())
    })
}

pub fn criterion_2(order: usize) -> Outcome {
    timed(2, "p = 2 closed form", Some(Duration::from_secs(5)), |t| {
        let radii: Vec<f64> = (1..=16).map(|i| 0.05 * f64::from(i)).collect();
        let mut worst = 0f64;
        for &n in &GRID_N {
            for g in g_p_grid(&ctx(n, 2.0)?, &radii, order)? {
                let closed = g_2_closed(n, g.r)?;
                let err = (g.g_value - closed).abs();
                worst = worst.max(err);
                t.check(err <= 1e-8, || format!("n={n} r={}: {} vs {closed}", g.r, g.g_value));
                t.check((g.a_star - 1.0).abs() <= 1e-10, || format!("n={n} r={}: a* = {}", g.r, g.a_star));
            }
        }
        t.note(format!("max |numeric - closed| {worst:.2e}"));
        Ok(())
    })
}

pub fn criterion_3(_order: usize) -> Outcome {
    timed(3, "p = 1 closed form and cap sequence", Some(Duration::from_secs(5)), |t| {
        for &n in &GRID_N {
            for i in 0..20 {
                let r = 0.05 * f64::from(i);
                let (a, g) = g_1_closed(n, r);
                let (min, max) = kernel::kernel_range(&ctx(n, 1.0)?, ax(r)?);
                let sup = (max - a).abs().max((a - min).abs());
                t.check((sup - g).abs() <= 1e-12 * g.max(1.0), || format!("n={n} r={r}: {g} vs sup {sup}"));
            }
        }
        let target = g_1_closed(3, 0.5).1;
        let mut prev = f64::NEG_INFINITY;
        let mut last = 0.0;
        for k in 1..=6 {
            let i = 1usize << k;
            let u = verify::minimizing_sequence_p1(3, ax(0.5)?, i)?;
            t.check(u >= prev - 1e-9, || format!("cap sequence decreased at i={i}"));
            t.check(u <= target, || format!("cap sequence exceeds G_1 at i={i}"));
            prev = u;
            last = u;
        }
        let rel = (target - last) / target;
        t.check(rel <= 0.02, || format!("u_64 = {last} is {rel:.3} below 40/9"));
        t.note(format!("u_64 = {last:.10}, relative shortfall {rel:.2e}"));
        Ok(())
    })
}

pub fn criterion_4(order: usize) -> Outcome {
    timed(4, "stationarity and uniqueness of a*", None, |t| {
        struct Row {
            cell: (u32, f64, f64),
            f: f64,
            df: f64,
            golden_offset: f64,
        }
        let rows: Vec<Result<Row>> = grid()
            .into_par_iter()
            .map(|(n, p, r)| {
                let c = ctx(n, p)?;
                let pr = ObjectiveParams::new(c, ax(r)?, order)?;
                let a = solver::solve_a_star(&c, ax(r)?, order)?;
                let golden = solver::a_star_by_golden_section(&c, ax(r)?, order)?;
                Ok(Row {
                    cell: (n, p, r),
                    f: objective::big_f(&pr, a)?,
                    df: objective::d_f_da(&pr, a)?,
                    golden_offset: (golden - a).abs(),
                })
            })
            .collect();
        let (mut worst_f, mut worst_gs) = (0f64, 0f64);
        for row in rows {
            let Row { cell: (n, p, r), f, df, golden_offset: gs } = row?;
            worst_f = worst_f.max(f.abs());
            worst_gs = worst_gs.max(gs);
            t.check(f.abs() <= 1e-9, || format!("n={n} p={p} r={r}: |F| = {f:e}"));
            t.check(df < 0.0, || format!("n={n} p={p} r={r}: dF/da = {df}"));
            t.check(gs <= 1e-7, || format!("n={n} p={p} r={r}: golden section off by {gs:e}"));
        }
        for &n in &GRID_N {
            for &p in &GRID_P {
                let a0 = solver::solve_a_star(&ctx(n, p)?, ax(0.0)?, order)?;
                t.check(a0 == 1.0, || format!("n={n} p={p}: a*(0) = {a0}"));
            }
        }
        t.note(format!("max |F(a*)| {worst_f:.2e}, max golden-section offset {worst_gs:.2e}"));
        Ok(())
    })
}

pub fn criterion_5(order: usize) -> Outcome {
    timed(5, "sharpness of the extremal data", Some(Duration::from_secs(30)), |t| {
        let mut cells = grid();
        for &n in &GRID_N {
            for &r in &GRID_R {
                cells.push((n, f64::INFINITY, r));
            }
        }
        let reports: Vec<Result<(u32, f64, f64, verify::SharpnessReport)>> = cells
            .into_par_iter()
            .map(|(n, p, r)| Ok((n, p, r, verify::verify_sharpness(&ctx(n, p)?, ax(r)?, order)?)))
            .collect();
        let mut worst = 0f64;
        for rep in reports {
            let (n, p, r, rep) = rep?;
            worst = worst.max(rep.relative_gap);
            t.check(rep.relative_gap <= 1e-6, || format!("n={n} p={p} r={r}: gap {:.2e}", rep.relative_gap));
        }
        t.note(format!("max relative gap {worst:.2e}"));
        Ok(())
    })
}

pub fn criterion_6(order: usize) -> Outcome {
    timed(6, "gradient constant at the origin", None, |t| {
        let mut notes = Vec::new();
        for &n in &[3u32, 4] {
            for &p in &[2.0, 3.0, f64::INFINITY] {
                let c = ctx(n, p)?;
                let constant = grad_constant(&c)?;
                let phi = verify::gradient_extremal_phi(&c, order)?;
                let ratio = verify::grad_at_origin(&phi)? / phi.norm();
                t.check((ratio - constant).abs() <= 1e-9 * constant, || format!("n={n} p={p}: extremal {ratio} vs {constant}"));
                let fd = solver::gp_derivative_at_zero(&c, 1e-4, order)?;
                let rel = (fd - constant).abs() / constant;
                t.check(rel <= 1e-2, || format!("n={n} p={p}: G_p(h)/h = {fd} vs {constant}"));
                let rep = verify::random_grad_check(&c, 1000, 42, order)?;
                t.check(rep.violations == 0, || format!("n={n} p={p}: {} random ratios above constant", rep.violations));
                notes.push(format!("n={n} p={p} fd {rel:.1e} rand {:.4}", rep.max_ratio));
            }
        }
        t.note(notes.join(", "));
        Ok(())
    })
}

pub fn criterion_7(order: usize) -> Outcome {
    timed(7, "bound property on random data", Some(Duration::from_secs(60)), |t| {
        let mut max_ratio = 0f64;
        let mut total = 0;
        for (n, p, r) in grid() {
            for seed in [7u64, 42] {
                let rep = verify::random_bound_check(&ctx(n, p)?, ax(r)?, 1000, seed, order)?;
                total += rep.count;
                max_ratio = max_ratio.max(rep.max_ratio);
                t.check(rep.violations == 0, || format!("n={n} p={p} r={r} seed={seed}: {} violations", rep.violations));
            }
        }
        t.note(format!("{total} draws, max ratio {max_ratio:.6}"));
        Ok(())
    })
}

pub fn criterion_8(order: usize) -> Outcome {
    timed(8, "monotonicity of G_p in r", None, |t| {
        let radii: Vec<f64> = (0..20).map(|i| 0.05 * f64::from(i)).collect();
        let mut cells = Vec::new();
        for &n in &GRID_N {
            for &p in &[1.0, 1.5, 2.0, 3.0, 5.0, f64::INFINITY] {
                cells.push((n, p));
            }
        }
        let sweeps: Vec<Result<(u32, f64, Vec<solver::GpResult>)>> = cells
            .into_par_iter()
            .map(|(n, p)| Ok((n, p, g_p_grid(&ctx(n, p)?, &radii, order)?)))
            .collect();
        for sweep in sweeps {
            let (n, p, gs) = sweep?;
            t.check(gs[0].g_value == 0.0, || format!("n={n} p={p}: G_p(0) = {}", gs[0].g_value));
            for w in gs.windows(2) {
                t.check(w[1].g_value > w[0].g_value, || format!("n={n} p={p}: not increasing at r={}", w[1].r));
            }
            if p.is_infinite() {
                t.check(gs.iter().all(|g| (0.0..1.0).contains(&g.g_value)), || format!("n={n}: G_inf outside [0, 1)"));
            }
        }
        let mut edge = Vec::new();
        for &n in &GRID_N {
            let g = g_inf_closed(n, 0.999)?.1;
            edge.push(format!("{g:.6}"));
            t.check(g > 0.99 && g < 1.0, || format!("n={n}: G_inf(0.999) = {g}"));
        }
        let c = ctx(3, 1.1)?;
        let (g5, g95) = (g_p(&c, ax(0.5)?, order)?.g_value, g_p(&c, ax(0.95)?, order)?.g_value);
        t.check(g95 > 10.0 * g5, || format!("growth: G_1.1(0.95) = {g95} vs G_1.1(0.5) = {g5}"));
        t.note(format!("G_inf(0.999) = [{}], G_1.1(0.95)/G_1.1(0.5) = {:.1}", edge.join(", "), g95 / g5));
        Ok(())
    })
}

pub fn criterion_9(order: usize) -> Outcome {
    timed(9, "L2 gradient estimate (empirical report)", None, |t| {
        let mut parts = Vec::new();
        for &n in &GRID_N {
            let s = verify::corollary_l2_survey(n, 1000, 42, order)?;
            parts.push(format!(
                "n={n}: sqrt(2(n-1)) holds {}/{} (max ratio {:.4}), 2(n-1)/sqrt(n) holds {}/{} (max ratio {:.4})",
                s.weak_holds, s.count, s.weak_max_ratio, s.sharp_holds, s.count, s.sharp_max_ratio
            ));
        }
        t.note(parts.join("; "));
        Ok(())
    })
}

pub type Criterion = fn(usize) -> Outcome;

pub const CRITERIA: [Criterion; 9] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
];

/// Run every criterion in order.
pub fn run_all(order: usize) -> Vec<Outcome> {
    CRITERIA.iter().map(|c| c(order)).collect()
}
