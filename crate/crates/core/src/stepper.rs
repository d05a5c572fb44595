//! Rothe time discretization: each implicit Euler step minimizes the strictly
//! convex functional
//!
//! ```text
//! J(u) = (1/2dt) sum_i h (u_i - u_prev,i)^2 + (1/2p) E_p(u) - sum_i h f_i u_i
//! ```
//!
//! by damped Newton with Armijo backtracking.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::mesh::{dot, GridFunction, Norm, TimeGrid, Trajectory};
use crate::operator::{energy_values, gagliardo_energy, Curvature, NonlocalOperator};
use crate::source::{source_slabs, SourceSpec};

const ARMIJO_C1: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone)]
pub struct StepProblem {
    u_prev: GridFunction,
    f_slab: GridFunction,
    dt: f64,
    op: NonlocalOperator,
}

impl StepProblem {
    pub fn new(u_prev: GridFunction, f_slab: GridFunction, dt: f64, op: NonlocalOperator) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        u_prev.check_same_grid(&f_slab)?;
        crate::mesh::same_grid(u_prev.grid(), op.weights().grid())?;
        Ok(Self {
            u_prev,
            f_slab,
            dt,
            op,
        })
    }

    pub fn u_prev(&self) -> &GridFunction {
        &self.u_prev
    }

    pub fn f_slab(&self) -> &GridFunction {
        &self.f_slab
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn op(&self) -> &NonlocalOperator {
        &self.op
    }

    fn h(&self) -> f64 {
        self.u_prev.grid().h()
    }

    fn objective_values(&self, u: &[f64]) -> f64 {
        let h = self.h();
        let p = self.op.p();
        let prev = self.u_prev.values();
        let f = self.f_slab.values();
        let mass: f64 = u.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum();
        let energy = energy_values(self.op.weights(), u, p);
        h * mass / (2.0 * self.dt) + energy / (2.0 * p) - h * dot(f, u)
    }

    fn gradient_values(&self, u: &[f64]) -> Vec<f64> {
        let h = self.h();
        let prev = self.u_prev.values();
        let f = self.f_slab.values();
        let flux = self.op.flux_all(u);
        (0..u.len())
            .map(|i| (h / self.dt) * (u[i] - prev[i]) + flux[i] - h * f[i])
            .collect()
    }

    /// For `p < 2` the gradient is only Hölder continuous: differences below
    /// `delta = max(eps, 8 ulp |u|)` are unresolved and move each component by
    /// up to `(sum_j w_ij + tau_i) delta^{p-1}`. Zero for `p >= 2`.
    fn resolution_floor(&self, u: &[f64], eps: f64) -> f64 {
        let p = self.op.p();
        if p >= 2.0 {
            return 0.0;
        }
        let delta = eps.max(8.0 * f64::EPSILON * sup_norm(u));
        let kw = self.op.weights();
        let stiffest = (0..u.len())
            .map(|i| kw.row(i).iter().sum::<f64>() + kw.tau()[i])
            .fold(0.0, f64::max);
        stiffest * delta.powf(p - 1.0)
    }

    fn hessian(&self, u: &[f64], mode: Curvature) -> DMatrix<f64> {
        let mut hess = self.op.flux_jacobian(u, mode);
        let mass = self.h() / self.dt;
        for i in 0..u.len() {
            hess[(i, i)] += mass;
        }
        hess
    }
}

pub fn objective(sp: &StepProblem, u: &GridFunction) -> Result<f64> {
    sp.u_prev.check_same_grid(u)?;
    Ok(sp.objective_values(u.values()))
}

/// `∂J/∂u_i = (h/dt)(u_i - u_prev,i) + h A(u)_i - h f_i`.
pub fn gradient(sp: &StepProblem, u: &GridFunction) -> Result<GridFunction> {
    sp.u_prev.check_same_grid(u)?;
    GridFunction::new(Arc::clone(u.grid()), sp.gradient_values(u.values()))
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Solves one implicit step, starting from `u_prev`.
pub fn step_minimize(sp: &StepProblem, cfg: &SolverConfig) -> Result<GridFunction> {
    let base_tol = cfg.newton_tol * (1.0 + sp.f_slab.norm(Norm::Linf));
    let mut x = sp.u_prev.values().to_vec();
    let mut tol = base_tol + sp.resolution_floor(&x, cfg.regularization_eps);
    let mut j0 = sp.objective_values(&x);
    let mut g = sp.gradient_values(&x);

    for _ in 0..cfg.newton_max_iters {
        if sup_norm(&g) <= tol {
            return GridFunction::new(Arc::clone(sp.u_prev.grid()), x);
        }
        let accepted = if sp.op.p() >= 2.0 {
            newton_direction(sp, &x, &g, Curvature::Newton)
                .and_then(|d| line_search(sp, &x, j0, &g, &d, MAX_BACKTRACKS))
        } else {
            // The Newton model overshoots where phi_p is steep; the secant model
            // majorizes the energy and never does. Keep whichever step lands lower.
            let newton = newton_direction(sp, &x, &g, Curvature::Newton)
                .and_then(|d| line_search(sp, &x, j0, &g, &d, 0));
            let secant = newton_direction(sp, &x, &g, Curvature::Secant)
                .and_then(|d| line_search(sp, &x, j0, &g, &d, MAX_BACKTRACKS));
            match (newton, secant) {
                (Some(a), Some(b)) => Some(if a.1 < b.1 { a } else { b }),
                (a, b) => a.or(b),
            }
        }
        .or_else(|| {
            // Jacobi-scaled steepest descent
            let diag = sp.hessian(&x, Curvature::Secant).diagonal();
            let d: Vec<f64> = g
                .iter()
                .zip(diag.iter())
                .map(|(gi, d)| if *d > 0.0 && d.is_finite() { -gi / d } else { -gi })
                .collect();
            line_search(sp, &x, j0, &g, &d, MAX_BACKTRACKS)
        });
        match accepted {
            Some((xn, jn)) => {
                x = xn;
                j0 = jn;
                g = sp.gradient_values(&x);
                tol = base_tol + sp.resolution_floor(&x, cfg.regularization_eps);
            }
            None => break,
        }
    }
    let grad_norm = sup_norm(&g);
    if grad_norm <= tol {
        return GridFunction::new(Arc::clone(sp.u_prev.grid()), x);
    }
    Err(Error::NoConvergence {
        iters: cfg.newton_max_iters,
        grad_norm,
        last_iterate: x,
    })
}

fn newton_direction(sp: &StepProblem, x: &[f64], g: &[f64], mode: Curvature) -> Option<Vec<f64>> {
    let hess = sp.hessian(x, mode);
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
    let d = hess.cholesky()?.solve(&rhs);
    let d: Vec<f64> = d.iter().copied().collect();
    if d.iter().all(|v| v.is_finite()) && dot(g, &d) < 0.0 {
        Some(d)
    } else {
        None
    }
}

/// Armijo backtracking; the sufficient-decrease test carries a few ulps of
/// slack so that steps whose decrease is below rounding are still accepted.
fn line_search(
    sp: &StepProblem,
    x: &[f64],
    j0: f64,
    g: &[f64],
    d: &[f64],
    max_backtracks: usize,
) -> Option<(Vec<f64>, f64)> {
    let gd = dot(g, d);
    if !(gd < 0.0) {
        return None;
    }
    let roundoff = 16.0 * f64::EPSILON * j0.abs().max(f64::MIN_POSITIVE);
    let mut beta = 1.0;
    for _ in 0..=max_backtracks {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + beta * b).collect();
        let jn = sp.objective_values(&xn);
        if jn.is_finite() && jn <= j0 + ARMIJO_C1 * beta * gd + roundoff {
            return Some((xn, jn));
        }
        beta *= ARMIJO_SHRINK;
    }
    None
}

/// Runs the Rothe scheme; slab `k` uses the Steklov average over `[t_{k-1}, t_k]`.
pub fn solve(
    u0: &GridFunction,
    f: &SourceSpec,
    tg: &TimeGrid,
    op: &NonlocalOperator,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let slabs = source_slabs(f, u0.grid(), tg, cfg.steklov_subsamples)?;
    solve_with_slabs(u0, &slabs, tg, op, cfg)
}

/// Same as [`solve`] with precomputed slab averages.
pub fn solve_with_slabs(
    u0: &GridFunction,
    slabs: &[GridFunction],
    tg: &TimeGrid,
    op: &NonlocalOperator,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if slabs.len() != tg.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "{} source slabs for {} steps",
            slabs.len(),
            tg.n_steps()
        )));
    }
    let mut states = Vec::with_capacity(tg.n_steps() + 1);
    states.push(u0.clone());
    for (k, slab) in slabs.iter().enumerate() {
        let prev = states.last().unwrap().clone();
        let sp = StepProblem::new(prev, slab.clone(), tg.dt(), op.clone())?;
        let next = step_minimize(&sp, cfg).map_err(|e| Error::Step {
            step: k + 1,
            source: Box::new(e),
        })?;
        states.push(next);
    }
    Trajectory::new(*tg, states)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriReport {
    /// `max_k ||u_k||_2^2`.
    pub sup_l2: f64,
    /// `dt sum_{k >= 1} E_p(u_k)`.
    pub time_integrated_energy: f64,
}

pub fn apriori_energy_report(traj: &Trajectory, op: &NonlocalOperator) -> Result<AprioriReport> {
    let dt = traj.time_grid().dt();
    let sup_l2 = traj
        .states()
        .iter()
        .map(|s| s.norm(Norm::L2).powi(2))
        .fold(0.0, f64::max);
    let mut energy = 0.0;
    for s in &traj.states()[1..] {
        energy += dt * gagliardo_energy(op.weights(), s, op.p())?;
    }
    Ok(AprioriReport {
        sup_l2,
        time_integrated_energy: energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::assemble;
    use crate::mesh::{Domain, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize, s: f64, p: f64) -> (Arc<crate::mesh::Grid>, NonlocalOperator, SolverConfig) {
        let grid = Arc::new(Grid::new(Domain::unit(), m).unwrap());
        let cfg = SolverConfig::new(s, p).unwrap();
        let kw = Arc::new(assemble(grid.clone(), &cfg, None).unwrap());
        let op = NonlocalOperator::new(kw, p, cfg.regularization_eps).unwrap();
        (grid, op, cfg)
    }

    fn random(grid: &Arc<crate::mesh::Grid>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GridFunction {
        GridFunction::new(grid.clone(), (0..grid.m()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn objective_at_previous_state() {
        let (grid, op, _) = setup(8, 0.3, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random(&grid, &mut rng, -1.0, 1.0);
        let sp = StepProblem::new(u.clone(), GridFunction::zeros(grid.clone()), 0.1, op.clone()).unwrap();
        let e = gagliardo_energy(op.weights(), &u, 3.0).unwrap();
        assert!((objective(&sp, &u).unwrap() - e / 6.0).abs() < 1e-14 * e);
        let g = gradient(&sp, &u).unwrap();
        let au = op.apply(&u).unwrap();
        for (gi, ai) in g.values().iter().zip(au.values()) {
            assert!((gi - grid.h() * ai).abs() < 1e-13 * (1.0 + ai.abs()));
        }
    }

    #[test]
    fn quadratic_case_has_affine_gradient() {
        let (grid, op, _) = setup(8, 0.4, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prev = random(&grid, &mut rng, 0.0, 1.0);
        let f = random(&grid, &mut rng, 0.0, 1.0);
        let sp = StepProblem::new(prev, f, 0.05, op).unwrap();
        let v = random(&grid, &mut rng, -1.0, 1.0);
        let diff = |u: &GridFunction| {
            let a = gradient(&sp, &u.zip_map(&v, |x, y| x + y).unwrap()).unwrap();
            let b = gradient(&sp, u).unwrap();
            a.zip_map(&b, |x, y| x - y).unwrap()
        };
        let d1 = diff(&random(&grid, &mut rng, -2.0, 2.0));
        let d2 = diff(&random(&grid, &mut rng, -2.0, 2.0));
        for (a, b) in d1.values().iter().zip(d2.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_data_gives_zero_step() {
        let (grid, op, cfg) = setup(8, 0.3, 3.0);
        let z = GridFunction::zeros(grid);
        let sp = StepProblem::new(z.clone(), z.clone(), 0.1, op).unwrap();
        assert!(step_minimize(&sp, &cfg).unwrap().is_zero());
    }

    #[test]
    fn nonlinear_steps_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in [1.5, 2.5, 3.0, 4.0] {
            let (grid, op, cfg) = setup(24, 0.2, p);
            let prev = random(&grid, &mut rng, 0.0, 2.0);
            let f = random(&grid, &mut rng, 0.0, 3.0);
            let sp = StepProblem::new(prev, f.clone(), 0.05, op).unwrap();
            let u = step_minimize(&sp, &cfg).unwrap();
            let g = gradient(&sp, &u).unwrap();
            let tol = cfg.newton_tol * (1.0 + f.norm(Norm::Linf))
                + sp.resolution_floor(u.values(), cfg.regularization_eps);
            assert!(g.norm(Norm::Linf) <= tol, "p = {p}");
            if p >= 2.0 {
                assert_eq!(sp.resolution_floor(u.values(), cfg.regularization_eps), 0.0);
            }
        }
    }

    #[test]
    fn exhausted_budget_reports_last_iterate() {
        let (grid, op, mut cfg) = setup(8, 0.3, 3.0);
        cfg.newton_max_iters = 1;
        cfg.newton_tol = 1e-300;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sp = StepProblem::new(
            random(&grid, &mut rng, 0.0, 1.0),
            random(&grid, &mut rng, 0.0, 1.0),
            0.1,
            op,
        )
        .unwrap();
        match step_minimize(&sp, &cfg) {
            Err(Error::NoConvergence { last_iterate, grad_norm, .. }) => {
                assert_eq!(last_iterate.len(), 8);
                assert!(grad_norm > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_problem_stays_zero_and_runs_are_bitwise_repeatable() {
        let (grid, op, cfg) = setup(16, 0.4, 2.0);
        let tg = TimeGrid::new(0.5, 8).unwrap();
        let z = GridFunction::zeros(grid.clone());
        let traj = solve(&z, &SourceSpec::zero(), &tg, &op, &cfg).unwrap();
        assert!(traj.states().iter().all(|s| s.is_zero()));
        let rep = apriori_energy_report(&traj, &op).unwrap();
        assert_eq!(rep.sup_l2, 0.0);
        assert_eq!(rep.time_integrated_energy, 0.0);

        let u0 = GridFunction::from_fn(grid, |x| (std::f64::consts::PI * x).sin()).unwrap();
        let f = SourceSpec::analytic(|x, t| x * (1.0 - x) * (1.0 + t));
        let a = solve(&u0, &f, &tg, &op, &cfg).unwrap();
        let b = solve(&u0, &f, &tg, &op, &cfg).unwrap();
        for (sa, sb) in a.states().iter().zip(b.states()) {
            let bits_a: Vec<u64> = sa.values().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = sb.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn free_decay_dissipates_l2() {
        for p in [1.5, 2.0, 3.0] {
            let (grid, op, cfg) = setup(20, 0.3, p);
            let u0 = GridFunction::from_fn(grid, |x| 4.0 * x * (1.0 - x)).unwrap();
            let tg = TimeGrid::new(0.5, 10).unwrap();
            let traj = solve(&u0, &SourceSpec::zero(), &tg, &op, &cfg).unwrap_or_else(|e| panic!("p = {p}: {e}"));
            let norms: Vec<f64> = traj.states().iter().map(|s| s.norm(Norm::L2)).collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0]), "p = {p}: {norms:?}");
            let lowest = traj.states().iter().flat_map(|s| s.values()).fold(0.0f64, |a, &b| a.min(b));
            // below 2 the extinct state is only resolved to the regularization scale
            let floor = if p < 2.0 { -cfg.regularization_eps } else { 0.0 };
            assert!(lowest >= floor, "p = {p}: min {lowest:e}");
        }
    }
}
