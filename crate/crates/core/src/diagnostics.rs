//! Computable residuals for the solution concepts of the problem: the
//! entropy inequality, the renormalized identity and tail condition, the
//! truncation energy estimate, comparison, and the Poincaré ratio.
//!
//! Time integrals follow the step scheme: source slab `k` is the Steklov
//! average over `(t_{k-1}, t_k]`, and spatial terms of step `k` pair `u_k`
//! with `φ(t_k)`. Integrals of `∂_t φ` are taken exactly on each interval,
//! i.e. as `φ(t_k) - φ(t_{k-1})`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{poincare_ratio, KernelWeights};
use crate::mesh::{dot, Domain, Grid, GridFunction, Norm, Trajectory};
use crate::operator::{energy_values, pairing_values, NonlocalOperator};
use crate::source::slabs_l1;
use crate::truncation::{s_sigma, s_sigma_prime, theta, truncate};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `φ(x, t) = ψ(x) θ(t)`, extended by zero outside the domain.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    space: Scalar,
    time: Scalar,
    time_prime: Scalar,
    vanishes_at_end: bool,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("vanishes_at_end", &self.vanishes_at_end)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        space: impl Fn(f64) -> f64 + Send + Sync + 'static,
        time: impl Fn(f64) -> f64 + Send + Sync + 'static,
        time_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        vanishes_at_end: bool,
    ) -> Self {
        Self {
            name: name.into(),
            space: Arc::new(space),
            time: Arc::new(time),
            time_prime: Arc::new(time_prime),
            vanishes_at_end,
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0, |_| 0.0, true)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vanishes_at_end(&self) -> bool {
        self.vanishes_at_end
    }

    pub fn space(&self, x: f64) -> f64 {
        (self.space)(x)
    }

    pub fn time(&self, t: f64) -> f64 {
        (self.time)(t)
    }

    pub fn time_prime(&self, t: f64) -> f64 {
        (self.time_prime)(t)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.space(x) * self.time(t)
    }

    /// Values at the cell centers at time `t`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        let th = self.time(t);
        grid.centers().iter().map(|&x| self.space(x) * th).collect()
    }

    /// Bumps `(x-a)^2 (b-x)^2 q(x)`, `q ∈ {1, x, x^2}`, scaled to sup 1, times
    /// `θ ∈ {1 - t/T, (1 - t/T)^2, cos(πt/2T)}`. Only the first two time
    /// factors vanish at `T`.
    pub fn family(domain: Domain, t_end: f64) -> Vec<TestFunction> {
        let (a, b) = (domain.a(), domain.b());
        let mut out = Vec::with_capacity(9);
        for (qname, qpow) in [("1", 0), ("x", 1), ("x2", 2)] {
            let raw = move |x: f64| (x - a).powi(2) * (b - x).powi(2) * x.powi(qpow);
            let scale = 1.0 / sup_abs_on(&raw, a, b);
            let psi = move |x: f64| {
                if x <= a || x >= b {
                    0.0
                } else {
                    scale * raw(x)
                }
            };
            let times: [(&str, Scalar, Scalar, bool); 3] = [
                (
                    "lin",
                    Arc::new(move |t| 1.0 - t / t_end),
                    Arc::new(move |_| -1.0 / t_end),
                    true,
                ),
                (
                    "quad",
                    Arc::new(move |t| (1.0 - t / t_end).powi(2)),
                    Arc::new(move |t| -2.0 * (1.0 - t / t_end) / t_end),
                    true,
                ),
                (
                    "cos",
                    Arc::new(move |t| (0.5 * PI * t / t_end).cos()),
                    Arc::new(move |t| -0.5 * PI / t_end * (0.5 * PI * t / t_end).sin()),
                    false,
                ),
            ];
            for (tname, th, thp, vanishes) in times {
                out.push(TestFunction {
                    name: format!("psi_{qname}*theta_{tname}"),
                    space: Arc::new(psi),
                    time: th,
                    time_prime: thp,
                    vanishes_at_end: vanishes,
                });
            }
        }
        out
    }
}

/// Dense sampling followed by golden-section refinement around the best sample.
fn sup_abs_on(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 4096;
    let h = (b - a) / N as f64;
    let g = |x: f64| f(x).abs();
    let best = (1..N).max_by(|&i, &j| g(a + i as f64 * h).total_cmp(&g(a + j as f64 * h))).unwrap();
    let (mut lo, mut hi) = (a + (best - 1) as f64 * h, a + (best + 1) as f64 * h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        if g(x1) < g(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    g(0.5 * (lo + hi)).max(g(a + best as f64 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub verdict: Verdict,
    pub context: String,
}

impl Entry {
    /// Passes iff `value <= bound`; entries without a bound are informational
    /// and pass unless the value is not finite.
    pub fn new(name: impl Into<String>, value: f64, bound: Option<f64>, context: impl Into<String>) -> Self {
        let ok = match bound {
            Some(b) => value <= b,
            None => !value.is_nan(),
        };
        Self {
            name: name.into(),
            value,
            bound,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            context: context.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    entries: Vec<Entry>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(Entry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let width = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
        for e in &self.entries {
            let bound = e.bound.map_or_else(|| "-".to_string(), |b| format!("{b:.3e}"));
            out.push_str(&format!(
                "{:<4} {:<width$}  value {:>11.4e}  bound {:>10}  {}\n",
                e.verdict, e.name, e.value, bound, e.context
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!("{} entries, {} failed\n", self.entries.len(), failed));
        out
    }
}

/// Neumaier-compensated sum; the residuals below are small differences of
/// O(1) terms.
#[derive(Default, Clone, Copy)]
struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn check_slabs(traj: &Trajectory, op: &NonlocalOperator, f_slabs: &[GridFunction]) -> Result<()> {
    crate::mesh::same_grid(traj.grid(), op.weights().grid())?;
    if f_slabs.len() != traj.time_grid().n_steps() {
        return Err(Error::InvalidParameter(format!(
            "{} source slabs for {} steps",
            f_slabs.len(),
            traj.time_grid().n_steps()
        )));
    }
    for s in f_slabs {
        traj.initial().check_same_grid(s)?;
    }
    Ok(())
}

/// `(1/2) dt sum_k E_p(T_k u_k)` against `k (||f||_1 + ||u0||_1)(1 + 0.05)`.
pub fn truncation_energy_check(
    traj: &Trajectory,
    op: &NonlocalOperator,
    k: f64,
    f_l1: f64,
    u0_l1: f64,
) -> Result<Entry> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation height must be positive, got {k}")));
    }
    crate::mesh::same_grid(traj.grid(), op.weights().grid())?;
    let dt = traj.time_grid().dt();
    let mut acc = Acc::default();
    for u in &traj.states()[1..] {
        let tu: Vec<f64> = u.values().iter().map(|&v| truncate(k, v)).collect();
        acc.add(0.5 * dt * energy_values(op.weights(), &tu, op.p()));
    }
    let bound = k * (f_l1 + u0_l1) * 1.05;
    Ok(Entry::new(
        format!("truncation_energy[k={k}]"),
        acc.value(),
        Some(bound),
        format!("f_l1 = {f_l1:.6e}, u0_l1 = {u0_l1:.6e}"),
    ))
}

/// `I_h = dt sum_k` of `w_ij |u_i - u_j|^{p-1}` over ordered interior pairs
/// with `(u_i, u_j) ∈ R_h`, plus the interior-exterior pairs `(u_i, 0)` in
/// both orders, each weighted by `τ_i |u_i|^{p-1}`.
pub fn renormalized_tail(traj: &Trajectory, kw: &KernelWeights, p: f64, heights: &[f64]) -> Result<Vec<(f64, f64)>> {
    if heights.iter().any(|&h| !(h > 0.0)) || !heights.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("tail heights must be positive and increasing".into()));
    }
    crate::mesh::same_grid(traj.grid(), kw.grid())?;
    let dt = traj.time_grid().dt();
    let in_r = |h: f64, u: f64, v: f64| {
        let (au, av) = (u.abs(), v.abs());
        h + 1.0 <= au.max(av) && (au.min(av) <= h || u * v < 0.0)
    };
    let mut out = Vec::with_capacity(heights.len());
    for &h in heights {
        let mut acc = Acc::default();
        for state in &traj.states()[1..] {
            let u = state.values();
            let mut step = 0.0;
            for i in 0..u.len() {
                let row = kw.row(i);
                for j in kw.row_support(i) {
                    if j > i && in_r(h, u[i], u[j]) {
                        step += 2.0 * row[j] * (u[i] - u[j]).abs().powf(p - 1.0);
                    }
                }
                if in_r(h, u[i], 0.0) {
                    step += 2.0 * kw.tau()[i] * u[i].abs().powf(p - 1.0);
                }
            }
            acc.add(dt * step);
        }
        out.push((h, acc.value()));
    }
    Ok(out)
}

/// `|LHS - RHS|` of the renormalized identity tested with `S_σ` and `φ`:
/// `-∫S(u0)φ(0) - ∫∫S(u)∂_tφ + <A(u), S'(u)φ> - ∫∫ f S'(u)φ`. On step `k` the
/// `∂_tφ` term is weighted by the left state `S(u_{k-1})`, so that summation by
/// parts turns it into `(S(u_k) - S(u_{k-1})) φ(t_k)`.
pub fn renormalized_residual(
    traj: &Trajectory,
    op: &NonlocalOperator,
    sigma: f64,
    phi: &TestFunction,
    f_slabs: &[GridFunction],
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !phi.vanishes_at_end() {
        return Err(Error::InvalidParameter(format!(
            "test function {} must vanish at the final time",
            phi.name()
        )));
    }
    check_slabs(traj, op, f_slabs)?;
    let grid = traj.grid();
    let h = grid.h();
    let tg = traj.time_grid();
    let s = |v: f64| s_sigma(sigma, v);

    let mut acc = Acc::default();
    let mut phi_prev = phi.sample(grid, tg.time(0));
    let mut s_prev: Vec<f64> = traj.initial().values().iter().map(|&v| s(v)).collect();
    acc.add(-h * dot(&s_prev, &phi_prev));
    for (k, (state, slab)) in traj.states()[1..].iter().zip(f_slabs).enumerate() {
        let u = state.values();
        let phi_next = phi.sample(grid, tg.time(k + 1));
        let dphi: Vec<f64> = phi_next.iter().zip(&phi_prev).map(|(a, b)| a - b).collect();
        acc.add(-h * dot(&s_prev, &dphi));
        let v: Vec<f64> = u
            .iter()
            .zip(&phi_next)
            .map(|(&ui, &p)| s_sigma_prime(sigma, ui) * p)
            .collect();
        acc.add(tg.dt() * pairing_values(op.weights(), op.p(), u, &v));
        acc.add(-tg.dt() * h * dot(slab.values(), &v));
        phi_prev = phi_next;
        s_prev = u.iter().map(|&v| s(v)).collect();
    }
    Ok(acc.value().abs())
}

/// Signed `LHS - RHS` of the entropy inequality at height `k`:
/// `∫Θ_k(u-φ)(T) - ∫Θ_k(u0-φ(0)) + ∫∫ ∂_tφ T_k(u-φ) + <A(u), T_k(u-φ)> - ∫∫ f T_k(u-φ)`,
/// with `φ(t_k)` inside the truncation on step `k`.
pub fn entropy_residual(
    traj: &Trajectory,
    op: &NonlocalOperator,
    k: f64,
    phi: &TestFunction,
    f_slabs: &[GridFunction],
) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation height must be positive, got {k}")));
    }
    check_slabs(traj, op, f_slabs)?;
    let grid = traj.grid();
    let h = grid.h();
    let tg = traj.time_grid();
    let n = tg.n_steps();

    let mut acc = Acc::default();
    let theta_sum = |u: &[f64], ph: &[f64]| -> f64 { u.iter().zip(ph).map(|(a, b)| theta(k, a - b)).sum() };
    let phi_end = phi.sample(grid, tg.time(n));
    let mut phi_prev = phi.sample(grid, tg.time(0));
    acc.add(h * theta_sum(traj.last().values(), &phi_end));
    acc.add(-h * theta_sum(traj.initial().values(), &phi_prev));
    for (step, (state, slab)) in traj.states()[1..].iter().zip(f_slabs).enumerate() {
        let u = state.values();
        let phi_next = phi.sample(grid, tg.time(step + 1));
        let v: Vec<f64> = u.iter().zip(&phi_next).map(|(a, b)| truncate(k, a - b)).collect();
        let dphi: Vec<f64> = phi_next.iter().zip(&phi_prev).map(|(a, b)| a - b).collect();
        acc.add(h * dot(&dphi, &v));
        acc.add(tg.dt() * pairing_values(op.weights(), op.p(), u, &v));
        acc.add(-tg.dt() * h * dot(slab.values(), &v));
        phi_prev = phi_next;
    }
    Ok(acc.value())
}

/// `|∫⟨u_t, φ⟩ + ∫<A(u), φ> - ∫∫ fφ|` with backward differences for `u_t` and
/// `φ` evaluated at the right end of each step.
pub fn weak_residual(
    traj: &Trajectory,
    op: &NonlocalOperator,
    phi: &TestFunction,
    f_slabs: &[GridFunction],
) -> Result<f64> {
    check_slabs(traj, op, f_slabs)?;
    let grid = traj.grid();
    let h = grid.h();
    let tg = traj.time_grid();
    let mut acc = Acc::default();
    let states = traj.states();
    for k in 1..states.len() {
        let (u, prev) = (states[k].values(), states[k - 1].values());
        let ph = phi.sample(grid, tg.time(k));
        let du: Vec<f64> = u.iter().zip(prev).map(|(a, b)| a - b).collect();
        acc.add(h * dot(&du, &ph));
        acc.add(tg.dt() * pairing_values(op.weights(), op.p(), u, &ph));
        acc.add(-tg.dt() * h * dot(f_slabs[k - 1].values(), &ph));
    }
    Ok(acc.value().abs())
}

pub const COMPARISON_TOL: f64 = 1e-10;

/// `max (u - v)_+` over all steps and cells, for data ordered as `u <= v`.
pub fn comparison_check(run_u: &Trajectory, run_v: &Trajectory) -> Result<Entry> {
    run_u.check_same_mesh(run_v)?;
    let mut worst = 0.0f64;
    let mut at = (0usize, 0usize);
    for (k, (a, b)) in run_u.states().iter().zip(run_v.states()).enumerate() {
        for (i, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
            if x - y > worst {
                worst = x - y;
                at = (k, i);
            }
        }
    }
    let context = if worst > 0.0 {
        format!("largest excess at step {}, cell {}", at.0, at.1)
    } else {
        "ordered".to_string()
    };
    Ok(Entry::new("comparison", worst, Some(COMPARISON_TOL), context))
}

/// Largest Poincaré ratio over the samples.
pub fn poincare_report(kw: &KernelWeights, p: f64, samples: &[GridFunction]) -> Result<Entry> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("poincare report needs at least one sample".into()));
    }
    let mut worst = 0.0f64;
    for s in samples {
        worst = worst.max(poincare_ratio(s, kw, p)?);
    }
    Ok(Entry::new(
        "poincare_ratio",
        worst,
        None,
        format!("m = {}, {} samples", kw.m(), samples.len()),
    ))
}

/// Settings of [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub entropy_heights: Vec<f64>,
    pub energy_heights: Vec<f64>,
    pub tail_heights: Vec<f64>,
    /// Bound on the weak and renormalized residuals.
    pub residual_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            entropy_heights: vec![0.5, 1.0, 2.0],
            energy_heights: vec![0.5, 1.0, 2.0],
            tail_heights: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            residual_tol: 1e-8,
        }
    }
}

pub const ENTROPY_BASE_TOL: f64 = 1e-8;

/// Positive part of the `φ ≡ 0` entropy residual; the slack allowed on top of
/// [`ENTROPY_BASE_TOL`] for the test-function family at the same resolution.
pub fn entropy_slack(traj: &Trajectory, op: &NonlocalOperator, k: f64, f_slabs: &[GridFunction]) -> Result<f64> {
    Ok(entropy_residual(traj, op, k, &TestFunction::zero(), f_slabs)?.max(0.0))
}

/// Largest increase of `I_h` between consecutive heights, counted from the
/// first height above `median`.
pub fn tail_increase(tail: &[(f64, f64)], median: f64) -> f64 {
    let start = tail.iter().position(|&(h, _)| h > median).unwrap_or(tail.len());
    tail[start..]
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).max(0.0))
        .fold(0.0, f64::max)
}

/// Median of `|u|` over every cell of every state.
pub fn median_abs(traj: &Trajectory) -> f64 {
    let mut all: Vec<f64> = traj
        .states()
        .iter()
        .flat_map(|s| s.values().iter().map(|v| v.abs()))
        .collect();
    all.sort_by(f64::total_cmp);
    let n = all.len();
    if n % 2 == 1 {
        all[n / 2]
    } else {
        0.5 * (all[n / 2 - 1] + all[n / 2])
    }
}

/// Full report over one trajectory and the slab data that produced it.
pub fn verify(
    traj: &Trajectory,
    op: &NonlocalOperator,
    f_slabs: &[GridFunction],
    opts: &VerifyOptions,
) -> Result<DiagnosticsReport> {
    check_slabs(traj, op, f_slabs)?;
    let tg = traj.time_grid();
    let family = TestFunction::family(traj.grid().domain(), tg.t_end());
    let mut report = DiagnosticsReport::new();

    for phi in &family {
        let r = weak_residual(traj, op, phi, f_slabs)?;
        report.push(Entry::new(format!("weak[{}]", phi.name()), r, Some(opts.residual_tol), ""));
    }

    let sigma = traj.sup_abs() + 1.0;
    for phi in family.iter().filter(|p| p.vanishes_at_end()) {
        let r = renormalized_residual(traj, op, sigma, phi, f_slabs)?;
        report.push(Entry::new(
            format!("renormalized[{}]", phi.name()),
            r,
            Some(opts.residual_tol),
            format!("sigma = {sigma:.6e}"),
        ));
    }

    for &k in &opts.entropy_heights {
        let slack = entropy_slack(traj, op, k, f_slabs)?;
        for phi in &family {
            let r = entropy_residual(traj, op, k, phi, f_slabs)?;
            report.push(Entry::new(
                format!("entropy[{},k={k}]", phi.name()),
                r,
                Some(ENTROPY_BASE_TOL + slack),
                format!("slack = {slack:.3e}"),
            ));
        }
    }

    let f_l1 = slabs_l1(f_slabs, tg.dt());
    let u0_l1 = traj.initial().norm(Norm::L1);
    for &k in &opts.energy_heights {
        report.push(truncation_energy_check(traj, op, k, f_l1, u0_l1)?);
    }

    if !opts.tail_heights.is_empty() {
        let tail = renormalized_tail(traj, op.weights(), op.p(), &opts.tail_heights)?;
        let sup = traj.sup_abs();
        let beyond: f64 = tail.iter().filter(|&&(h, _)| h >= sup).map(|&(_, v)| v).fold(0.0, f64::max);
        for &(h, v) in &tail {
            report.push(Entry::new(format!("renormalized_tail[h={h}]"), v, None, ""));
        }
        report.push(Entry::new(
            "renormalized_tail_beyond_sup",
            beyond,
            Some(0.0),
            format!("sup|u| = {sup:.6e}"),
        ));
        let median = median_abs(traj);
        report.push(Entry::new(
            "renormalized_tail_increase",
            tail_increase(&tail, median),
            Some(0.0),
            format!("median|u| = {median:.6e}"),
        ));
    }

    let last = traj.last();
    if !last.is_zero() {
        report.push(poincare_report(op.weights(), op.p(), std::slice::from_ref(last))?);
    }
    Ok(report)
}
