//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use common::{pair_integral, rel_err, truncated_tail};
use nalgebra::{DMatrix, DVector};
use nonlocal_rothe::diagnostics::{
    comparison_check, entropy_residual, entropy_slack, median_abs, renormalized_residual, renormalized_tail,
    tail_increase, truncation_energy_check, TestFunction, COMPARISON_TOL, ENTROPY_BASE_TOL,
};
use nonlocal_rothe::ladder::{cauchy_gap, monotone_defect, run_ladder, CauchyGap, MONOTONE_TOL};
use nonlocal_rothe::source::source_slabs;
use nonlocal_rothe::stepper::{gradient, objective, solve_with_slabs, StepProblem};
use nonlocal_rothe::{assemble, Domain, Grid, GridFunction, KernelWeights, NonlocalOperator, SolverConfig, SourceSpec, TimeGrid, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    what: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, what: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, what, pass, detail }
}

struct Setup {
    grid: Arc<Grid>,
    op: NonlocalOperator,
    cfg: SolverConfig,
}

fn setup(m: usize, s: f64, p: f64) -> Setup {
    let grid = Arc::new(Grid::new(Domain::unit(), m).unwrap());
    let cfg = SolverConfig::new(s, p).unwrap();
    let kw = Arc::new(assemble(grid.clone(), &cfg, None).unwrap());
    let op = NonlocalOperator::new(kw, p, cfg.regularization_eps).unwrap();
    Setup { grid, op, cfg }
}

fn random(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GridFunction {
    GridFunction::new(grid.clone(), (0..grid.m()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn kernel_weights() -> Outcome {
    let mut worst = 0.0f64;
    for alpha in [0.3, 0.5, 0.8] {
        let grid = Arc::new(Grid::new(Domain::unit(), 8).unwrap());
        let kw = assemble(grid.clone(), &SolverConfig::new(alpha / 2.0, 2.0).unwrap(), None).unwrap();
        for i in 0..8 {
            for j in (0..8).filter(|&j| j != i) {
                worst = worst.max(rel_err(kw.w(i, j), pair_integral(grid.h(), i.abs_diff(j), alpha)));
            }
        }
    }
    outcome("1a", "pair weights vs quadrature", worst <= 1e-10, format!("max rel err {worst:.2e} (tol 1e-10)"))
}

fn kernel_tails() -> Outcome {
    let mut worst = 0.0f64;
    for alpha in [0.3, 0.5, 0.8] {
        let grid = Arc::new(Grid::new(Domain::unit(), 8).unwrap());
        let kw = assemble(grid.clone(), &SolverConfig::new(alpha / 2.0, 2.0).unwrap(), None).unwrap();
        for i in 0..8 {
            let (l, r) = grid.cell(i);
            worst = worst.max(rel_err(kw.tau()[i], truncated_tail(0.0, 1.0, l, r, alpha, 1e6)));
        }
    }
    outcome(
        "1b",
        "tail weights vs radius-1e6 quadrature",
        worst <= 1e-8,
        format!("max rel err {worst:.2e} (tol 1e-8)"),
    )
}

fn linear_step(kw: &KernelWeights, prev: &[f64], f: &[f64], h: f64, dt: f64) -> Vec<f64> {
    let m = kw.m();
    let a = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            h / dt + kw.tau()[i] + (0..m).map(|k| kw.w(i, k)).sum::<f64>()
        } else {
            -kw.w(i, j)
        }
    });
    let rhs = DVector::from_iterator(m, prev.iter().zip(f).map(|(u, g)| h / dt * u + h * g));
    a.lu().solve(&rhs).unwrap().iter().copied().collect()
}

fn linear_oracle() -> Outcome {
    let st = setup(64, 0.4, 2.0);
    let tg = TimeGrid::new(1.0, 32).unwrap();
    let u0 = GridFunction::from_fn(st.grid.clone(), |x| (std::f64::consts::PI * x).sin()).unwrap();
    let f = SourceSpec::analytic(|x, t| (1.0 + t) * x * (1.0 - x));
    let slabs = source_slabs(&f, &st.grid, &tg, st.cfg.steklov_subsamples).unwrap();
    let traj = solve_with_slabs(&u0, &slabs, &tg, &st.op, &st.cfg).unwrap();
    let mut prev = u0.values().to_vec();
    let mut worst = 0.0f64;
    for k in 1..=tg.n_steps() {
        let next = linear_step(st.op.weights(), &prev, slabs[k - 1].values(), st.grid.h(), tg.dt());
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = traj.states()[k].values().iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff / scale);
        prev = next;
    }
    outcome("2", "p = 2 trajectory vs direct linear solves", worst <= 1e-9, format!("max sup rel err {worst:.2e} (tol 1e-9)"))
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    for (s, p) in [(0.4, 1.5), (0.4, 2.0), (0.3, 3.0)] {
        let st = setup(8, s, p);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let prev = random(&st.grid, &mut rng, -1.0, 1.0);
            let f = random(&st.grid, &mut rng, -1.0, 1.0);
            let u = random(&st.grid, &mut rng, -1.0, 1.0);
            let sp = StepProblem::new(prev, f, 0.1, st.op.clone()).unwrap();
            let g = gradient(&sp, &u).unwrap();
            for i in 0..8 {
                let at = |d: f64| {
                    let mut v = u.values().to_vec();
                    v[i] += d;
                    objective(&sp, &GridFunction::new(st.grid.clone(), v).unwrap()).unwrap()
                };
                let fd = (at(1e-6) - at(-1e-6)) / 2e-6;
                worst = worst.max(rel_err(fd, g.values()[i]));
            }
        }
    }
    outcome("3", "gradient vs central differences", worst <= 1e-5, format!("max rel err {worst:.2e} (tol 1e-5)"))
}

fn ladder_criteria() -> Vec<Outcome> {
    let st = setup(64, 0.4, 2.0);
    let tg = TimeGrid::new(1.0, 32).unwrap();
    let u0 = GridFunction::from_fn(st.grid.clone(), |x| x.powf(-0.5)).unwrap();
    let f = SourceSpec::analytic(|x, _| 0.5 * x.powf(-0.5));
    let run = run_ladder(&f, &u0, &[1.0, 2.0, 4.0, 8.0], &tg, &st.op, &st.cfg).unwrap();
    let mut out = Vec::new();

    let d = monotone_defect(&run).unwrap();
    out.push(outcome("4", "monotone ladder", d <= MONOTONE_TOL, format!("defect {d:.2e} (tol 1e-9)")));

    let mut ok = true;
    let mut tightest = f64::MAX;
    for i in 0..run.len() {
        for j in i + 1..run.len() {
            let g = cauchy_gap(&run, i, j).unwrap();
            ok &= g.holds();
            tightest = tightest.min(g.bound + CauchyGap::SLACK - g.observed);
        }
    }
    out.push(outcome("5", "L1 Cauchy bound, all level pairs", ok, format!("smallest margin {tightest:.3e}")));

    let mut ok = true;
    let mut ratio = 0.0f64;
    for level in run.levels() {
        let (f_l1, u0_l1) = level.data_l1();
        for k in [0.5, 1.0, 2.0] {
            let e = truncation_energy_check(&level.trajectory, &st.op, k, f_l1, u0_l1).unwrap();
            ok &= e.passed();
            ratio = ratio.max(e.value / e.bound.unwrap());
        }
    }
    out.push(outcome("6", "truncation energy estimate", ok, format!("max value/bound {ratio:.3}")));

    let top = &run.levels()[run.len() - 1].trajectory;
    let tail = renormalized_tail(top, st.op.weights(), st.op.p(), &[1.0, 2.0, 4.0, 8.0, 16.0]).unwrap();
    let sup = top.sup_abs();
    let beyond = tail.iter().filter(|&&(h, _)| h >= sup).map(|&(_, v)| v).fold(0.0, f64::max);
    let inc = tail_increase(&tail, median_abs(top));
    let values: Vec<String> = tail.iter().map(|(h, v)| format!("{h}:{v:.2e}")).collect();
    out.push(outcome(
        "7",
        "renormalized tail",
        beyond == 0.0 && inc == 0.0,
        format!("I_h {} ; sup|u| {sup:.3}", values.join(" ")),
    ));
    out
}

struct Reference {
    st: Setup,
    traj: Trajectory,
    slabs: Vec<GridFunction>,
}

/// Bounded smooth data, p = 2, s = 0.4, on `m` cells and `m` steps.
fn reference(m: usize) -> Reference {
    let st = setup(m, 0.4, 2.0);
    let tg = TimeGrid::new(0.5, m).unwrap();
    let u0 = GridFunction::from_fn(st.grid.clone(), |x| (std::f64::consts::PI * x).sin().powi(2)).unwrap();
    let f = SourceSpec::analytic(|x, t| 1.0 + t * x);
    let slabs = source_slabs(&f, &st.grid, &tg, st.cfg.steklov_subsamples).unwrap();
    let traj = solve_with_slabs(&u0, &slabs, &tg, &st.op, &st.cfg).unwrap();
    Reference { st, traj, slabs }
}

fn entropy_criterion(coarse: &Reference, fine: &Reference) -> Outcome {
    // worst signed residual and whether every entry sits under its bound
    let eval = |r: &Reference| {
        let family = TestFunction::family(Domain::unit(), 0.5);
        let mut worst = f64::MIN;
        let mut ok = true;
        for k in [0.5, 1.0, 2.0] {
            let slack = entropy_slack(&r.traj, &r.st.op, k, &r.slabs).unwrap();
            for phi in &family {
                let v = entropy_residual(&r.traj, &r.st.op, k, phi, &r.slabs).unwrap();
                ok &= v <= ENTROPY_BASE_TOL + slack;
                worst = worst.max(v);
            }
        }
        (worst, ok)
    };
    let (wc, okc) = eval(coarse);
    let (wf, okf) = eval(fine);
    let excess = |w: f64| (w - ENTROPY_BASE_TOL).max(0.0);
    outcome(
        "8",
        "entropy inequality",
        okc && okf && excess(wf) <= excess(wc),
        format!("worst LHS-RHS {wc:.3e} at (32,32), {wf:.3e} at (64,64)"),
    )
}

fn renormalized_criterion(coarse: &Reference, fine: &Reference) -> Outcome {
    let eval = |r: &Reference| {
        let sigma = r.traj.sup_abs() + 1.0;
        TestFunction::family(Domain::unit(), 0.5)
            .iter()
            .filter(|p| p.vanishes_at_end())
            .map(|phi| renormalized_residual(&r.traj, &r.st.op, sigma, phi, &r.slabs).unwrap())
            .fold(0.0, f64::max)
    };
    let (rc, rf) = (eval(coarse), eval(fine));
    outcome(
        "9",
        "renormalized identity",
        rf <= rc && rf <= 1e-6 && rc <= 1e-6,
        format!("residual {rc:.3e} at (32,32), {rf:.3e} at (64,64)"),
    )
}

fn comparison_criterion() -> Outcome {
    let st = setup(32, 0.4, 2.0);
    let tg = TimeGrid::new(0.5, 16).unwrap();
    let u0 = GridFunction::from_fn(st.grid.clone(), |x| x * (1.0 - x)).unwrap();
    let f = SourceSpec::analytic(|x, t| x + t);
    let run = |u0: &GridFunction, f: &SourceSpec| {
        let slabs = source_slabs(f, &st.grid, &tg, st.cfg.steklov_subsamples).unwrap();
        solve_with_slabs(u0, &slabs, &tg, &st.op, &st.cfg).unwrap()
    };
    let base = run(&u0, &f);
    let u0_up = u0.map(|v| v + 0.25);
    let f_up = SourceSpec::analytic(|x, t| x + t + 0.5);
    let pairs = [run(&u0, &f_up), run(&u0_up, &f), run(&u0_up, &f_up)];
    let mut worst = 0.0f64;
    for upper in &pairs {
        worst = worst.max(comparison_check(&base, upper).unwrap().value);
    }
    outcome(
        "10",
        "comparison principle, three ordered pairs",
        worst <= COMPARISON_TOL,
        format!("max (u-v)+ {worst:.2e} (tol 1e-10)"),
    )
}

fn monotonicity_criterion() -> Outcome {
    let mut worst = f64::MAX;
    for (s, p) in [(0.4, 1.5), (0.3, 3.0)] {
        let st = setup(32, s, p);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let u = random(&st.grid, &mut rng, -2.0, 2.0);
            let v = random(&st.grid, &mut rng, -2.0, 2.0);
            let d = st.op.apply(&u).unwrap().zip_map(&st.op.apply(&v).unwrap(), |a, b| a - b).unwrap();
            let e = u.zip_map(&v, |a, b| a - b).unwrap();
            worst = worst.min(d.dot(&e).unwrap());
        }
    }
    outcome("11", "operator monotonicity", worst >= -1e-12, format!("min pairing {worst:.3e} (tol -1e-12)"))
}

fn cli(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_nonlocal-rothe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run binary");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn cli_criterion() -> Outcome {
    let cfgs = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/configs");
    let c = |name: &str| cfgs.join(name).to_string_lossy().into_owned();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut problems = Vec::new();
    let (low, high, bad) = (c("low.cfg"), c("high.cfg"), c("bad.cfg"));

    for d in [&a, &b] {
        let (code, _) = cli(&["solve", "--config", &low], d);
        if code != 0 {
            problems.push(format!("solve exit {code}"));
        }
    }
    for file in ["trajectory.csv", "apriori.csv"] {
        if std::fs::read(a.join(file)).ok() != std::fs::read(b.join(file)).ok() {
            problems.push(format!("{file} differs between runs"));
        }
    }
    let matrix = [
        (vec!["verify", "--config", &low], 0),
        (vec!["compare", "--config", &high, "--other", &low], 1),
        (vec!["verify", "--config", &bad], 2),
    ];
    let mut codes = Vec::new();
    for (args, want) in &matrix {
        let (code, _) = cli(args, &dir.path().join("m"));
        codes.push(code);
        if code != *want {
            problems.push(format!("{} exit {code}, wanted {want}", args[0]));
        }
    }
    outcome(
        "12",
        "determinism and exit codes",
        problems.is_empty(),
        if problems.is_empty() {
            format!("identical outputs; exit codes {codes:?}")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let mut results = vec![kernel_weights(), kernel_tails(), linear_oracle(), gradient_check()];
    results.extend(ladder_criteria());
    let (coarse, fine) = (reference(32), reference(64));
    results.push(entropy_criterion(&coarse, &fine));
    results.push(renormalized_criterion(&coarse, &fine));
    results.push(comparison_criterion());
    results.push(monotonicity_criterion());
    results.push(cli_criterion());

    for r in &results {
        println!("{} {:>3} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.what, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} criteria, {failed} failed", results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
