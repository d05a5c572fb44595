//! Batch driver behind the `nonlocal-rothe` binary.
//!
//! Exit codes: 0 when every diagnostic passes, 1 when any fails, 2 on errors.

pub mod config;
pub mod data;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{
    comparison_check, median_abs, renormalized_tail, tail_increase, truncation_energy_check, verify,
    DiagnosticsReport, Entry, VerifyOptions,
};
use crate::error::Result;
use crate::io::{fmt_real, ingest_trajectory, write_field, write_file, write_ladder, write_profile, write_report, write_table, write_trajectory};
use crate::kernel::assemble;
use crate::ladder::{cauchy_gap, ladder_rows, monotone_defect, run_ladder, CauchyGap, MONOTONE_TOL};
use crate::mesh::{Domain, Grid, GridFunction, TimeGrid, Trajectory};
use crate::operator::NonlocalOperator;
use crate::source::{source_slabs, SourceSpec};
use crate::stepper::{apriori_energy_report, solve_with_slabs, step_minimize, StepProblem};
use crate::SolverConfig;

pub use config::ExperimentConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nonlocal-rothe", version, about = "Rothe solver and diagnostics for the fractional p-Laplacian evolution on an interval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve and write trajectory.csv and apriori.csv
    Solve(Common),
    /// Solve the truncated-data ladder and write ladder.csv and ladder_report.csv
    Ladder(Common),
    /// Check a solve (or an ingested trajectory) and write report.csv
    Verify(Common),
    /// Solve two configs and check that the first stays below the second
    Compare(CompareArgs),
    /// Write the kernel weight profile (weights.csv) and tail weights (tau.csv)
    Weights(Common),
    /// Time assembly, operator application and one implicit step; writes bench.csv
    Bench(Common),
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Config of the run expected to lie above; command-line keys apply to the first run only
    #[arg(long)]
    pub other: PathBuf,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` file; flags override its keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub keys: Keys,
}

#[derive(Debug, Default, Args)]
pub struct Keys {
    /// Left endpoint [default: 0]
    #[arg(long)]
    pub a: Option<String>,
    /// Right endpoint [default: 1]
    #[arg(long)]
    pub b: Option<String>,
    /// Cell count [default: 64]
    #[arg(long)]
    pub m: Option<String>,
    /// Horizon T [default: 1]
    #[arg(long)]
    pub t_end: Option<String>,
    /// Time steps [default: 32]
    #[arg(long)]
    pub n_steps: Option<String>,
    /// Fractional order s in (0,1) [default: 0.4]
    #[arg(long)]
    pub s: Option<String>,
    /// Exponent p > 1 [default: 2]
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated truncation heights [default: 1,2,4,8,16]
    #[arg(long)]
    pub levels: Option<String>,
    /// Initial datum: zero | const:c | power:beta[,scale] | gauss:c,w,amp | ramp:rate[,base] | csv:path [default: zero]
    #[arg(long)]
    pub u0: Option<String>,
    /// Source, same registry as u0 (csv columns x,t,value) [default: zero]
    #[arg(long)]
    pub f: Option<String>,
    /// Kernel modulation: one | const:c | cos:amp [default: one]
    #[arg(long)]
    pub kappa: Option<String>,
    /// Ellipticity bound for kappa [default: 1]
    #[arg(long)]
    pub lambda: Option<String>,
    /// Require nonnegative data [default: true]
    #[arg(long)]
    pub nonneg: Option<String>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<String>,
    /// Newton tolerance on the gradient sup-norm [default: 1e-10]
    #[arg(long)]
    pub newton_tol: Option<String>,
    /// Newton iteration budget per step [default: 100]
    #[arg(long)]
    pub newton_max_iters: Option<String>,
    /// Hessian regularization for p < 2 [default: 1e-12]
    #[arg(long)]
    pub regularization_eps: Option<String>,
    /// Midpoint subsamples of the source time average [default: 4]
    #[arg(long)]
    pub steklov_subsamples: Option<String>,
    /// Reject p*s >= 1 [default: true]
    #[arg(long)]
    pub strict_exponent_check: Option<String>,
    /// Trajectory CSV (t,x,u) for verify instead of solving
    #[arg(long)]
    pub trajectory: Option<String>,
    /// Repetitions per bench timing [default: 5]
    #[arg(long)]
    pub bench_reps: Option<String>,
}

impl Keys {
    fn pairs(&self) -> [(&'static str, &Option<String>); 21] {
        [
            ("a", &self.a),
            ("b", &self.b),
            ("m", &self.m),
            ("t_end", &self.t_end),
            ("n_steps", &self.n_steps),
            ("s", &self.s),
            ("p", &self.p),
            ("levels", &self.levels),
            ("u0", &self.u0),
            ("f", &self.f),
            ("kappa", &self.kappa),
            ("lambda", &self.lambda),
            ("nonneg", &self.nonneg),
            ("out", &self.out),
            ("newton_tol", &self.newton_tol),
            ("newton_max_iters", &self.newton_max_iters),
            ("regularization_eps", &self.regularization_eps),
            ("steklov_subsamples", &self.steklov_subsamples),
            ("strict_exponent_check", &self.strict_exponent_check),
            ("trajectory", &self.trajectory),
            ("bench_reps", &self.bench_reps),
        ]
    }
}

/// Config file (if any) overlaid with flags, then validated.
pub fn parse_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for (key, value) in common.keys.pairs() {
        if let Some(v) = value {
            cfg.set(key, v, 0, Path::new("."))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Assembled operator and sampled data of one experiment.
pub struct Problem {
    pub grid: Arc<Grid>,
    pub tg: TimeGrid,
    pub op: NonlocalOperator,
    pub solver: SolverConfig,
    pub u0: GridFunction,
    pub f: SourceSpec,
    pub slabs: Vec<GridFunction>,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let grid = Arc::new(Grid::new(Domain::new(cfg.a, cfg.b)?, cfg.m)?);
        let tg = TimeGrid::new(cfg.t_end, cfg.n_steps)?;
        let kappa = cfg.kappa.build(cfg.lambda)?;
        let kw = Arc::new(assemble(Arc::clone(&grid), &cfg.solver, kappa.as_ref())?);
        let op = NonlocalOperator::new(kw, cfg.solver.p, cfg.solver.regularization_eps)?;
        let u0 = cfg.u0.field(&grid, cfg.nonneg)?;
        let f = cfg.f.source(&grid, cfg.nonneg)?;
        let slabs = source_slabs(&f, &grid, &tg, cfg.solver.steklov_subsamples)?;
        Ok(Self {
            grid,
            tg,
            op,
            solver: cfg.solver,
            u0,
            f,
            slabs,
        })
    }

    pub fn solve(&self) -> Result<Trajectory> {
        solve_with_slabs(&self.u0, &self.slabs, &self.tg, &self.op, &self.solver)
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn finish(report: &DiagnosticsReport, out: &Path, file: &str) -> Result<i32> {
    write_file(&out.join(file), |f| write_report(f, report))?;
    print!("{}", report.summary());
    for e in report.failures() {
        eprintln!("failed: {}", e.name);
    }
    Ok(if report.all_pass() { EXIT_PASS } else { EXIT_FAIL })
}

fn cmd_solve(cfg: &ExperimentConfig) -> Result<i32> {
    let pb = Problem::build(cfg)?;
    let traj = pb.solve()?;
    prepare_out(&cfg.out)?;
    write_file(&cfg.out.join("trajectory.csv"), |f| write_trajectory(f, &traj))?;
    let rep = apriori_energy_report(&traj, &pb.op)?;
    let rows = [
        vec!["sup_l2".to_string(), fmt_real(rep.sup_l2)],
        vec!["time_integrated_energy".to_string(), fmt_real(rep.time_integrated_energy)],
    ];
    write_file(&cfg.out.join("apriori.csv"), |f| write_table(f, &["name", "value"], rows.clone()))?;
    println!("sup_l2 {}", fmt_real(rep.sup_l2));
    println!("time_integrated_energy {}", fmt_real(rep.time_integrated_energy));
    Ok(EXIT_PASS)
}

fn cmd_ladder(cfg: &ExperimentConfig) -> Result<i32> {
    let pb = Problem::build(cfg)?;
    let run = run_ladder(&pb.f, &pb.u0, &cfg.levels, &pb.tg, &pb.op, &pb.solver)?;
    prepare_out(&cfg.out)?;
    write_file(&cfg.out.join("ladder.csv"), |f| write_ladder(f, &ladder_rows(&run)?))?;

    let mut report = DiagnosticsReport::new();
    if run.len() >= 2 {
        report.push(Entry::new("monotone_defect", monotone_defect(&run)?, Some(MONOTONE_TOL), ""));
        for i in 0..run.len() {
            for j in i + 1..run.len() {
                let g = cauchy_gap(&run, i, j)?;
                report.push(Entry::new(
                    format!("cauchy[{}/{}]", run.levels()[i].height, run.levels()[j].height),
                    g.observed,
                    Some(g.bound + CauchyGap::SLACK),
                    format!("a_nm = {:.6e}", g.a_nm),
                ));
            }
        }
    }
    for level in run.levels() {
        let (f_l1, u0_l1) = level.data_l1();
        for k in [0.5, 1.0, 2.0] {
            let mut e = truncation_energy_check(&level.trajectory, &pb.op, k, f_l1, u0_l1)?;
            e.name = format!("level {}: {}", level.height, e.name);
            report.push(e);
        }
    }
    let top = &run.levels()[run.len() - 1].trajectory;
    let heights = [1.0, 2.0, 4.0, 8.0, 16.0];
    let tail = renormalized_tail(top, pb.op.weights(), pb.op.p(), &heights)?;
    let sup = top.sup_abs();
    for &(h, v) in &tail {
        report.push(Entry::new(format!("renormalized_tail[h={h}]"), v, h.ge(&sup).then_some(0.0), ""));
    }
    report.push(Entry::new(
        "renormalized_tail_increase",
        tail_increase(&tail, median_abs(top)),
        Some(0.0),
        "",
    ));
    finish(&report, &cfg.out, "ladder_report.csv")
}

fn cmd_verify(cfg: &ExperimentConfig) -> Result<i32> {
    let pb = Problem::build(cfg)?;
    let traj = match &cfg.trajectory {
        Some(path) => ingest_trajectory(path, &pb.grid, &pb.tg)?,
        None => pb.solve()?,
    };
    let report = verify(&traj, &pb.op, &pb.slabs, &VerifyOptions::default())?;
    prepare_out(&cfg.out)?;
    finish(&report, &cfg.out, "report.csv")
}

fn cmd_compare(cfg: &ExperimentConfig, other: &ExperimentConfig) -> Result<i32> {
    let lower = Problem::build(cfg)?.solve()?;
    let upper = Problem::build(other)?.solve()?;
    let mut report = DiagnosticsReport::new();
    report.push(comparison_check(&lower, &upper)?);
    prepare_out(&cfg.out)?;
    finish(&report, &cfg.out, "report.csv")
}

fn cmd_weights(cfg: &ExperimentConfig) -> Result<i32> {
    let pb = Problem::build(cfg)?;
    prepare_out(&cfg.out)?;
    let kw = pb.op.weights();
    write_file(&cfg.out.join("weights.csv"), |f| write_profile(f, &kw.profile()))?;
    let tau = GridFunction::new(Arc::clone(&pb.grid), kw.tau().to_vec())?;
    write_file(&cfg.out.join("tau.csv"), |f| write_field(f, &tau))?;
    Ok(EXIT_PASS)
}

fn cmd_bench(cfg: &ExperimentConfig) -> Result<i32> {
    let pb = Problem::build(cfg)?;
    let reps = cfg.bench_reps;
    let time = |f: &mut dyn FnMut() -> Result<()>| -> Result<f64> {
        let start = Instant::now();
        for _ in 0..reps {
            f()?;
        }
        Ok(start.elapsed().as_secs_f64() / reps as f64)
    };
    let kappa = cfg.kappa.build(cfg.lambda)?;
    let t_assemble = time(&mut || assemble(Arc::clone(&pb.grid), &pb.solver, kappa.as_ref()).map(drop))?;
    let u = if pb.u0.is_zero() {
        GridFunction::from_fn(Arc::clone(&pb.grid), |x| x.sin() + 1.0)?
    } else {
        pb.u0.clone()
    };
    let t_apply = time(&mut || pb.op.apply(&u).map(drop))?;
    let sp = StepProblem::new(u.clone(), pb.slabs[0].clone(), pb.tg.dt(), pb.op.clone())?;
    let t_step = time(&mut || step_minimize(&sp, &pb.solver).map(drop))?;
    let rows = [("assemble", t_assemble), ("apply", t_apply), ("step", t_step)]
        .into_iter()
        .map(|(name, secs)| vec![name.to_string(), cfg.m.to_string(), reps.to_string(), fmt_real(secs)]);
    prepare_out(&cfg.out)?;
    write_file(&cfg.out.join("bench.csv"), |f| write_table(f, &["op", "m", "reps", "mean_seconds"], rows))?;
    Ok(EXIT_PASS)
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    if let Some(n) = std::env::var("NONLOCAL_ROTHE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {}

fn dispatch(cli: &Cli) -> Result<i32> {
    configure_threads();
    match &cli.command {
        Command::Solve(c) => cmd_solve(&parse_config(c)?),
        Command::Ladder(c) => cmd_ladder(&parse_config(c)?),
        Command::Verify(c) => cmd_verify(&parse_config(c)?),
        Command::Compare(c) => {
            let cfg = parse_config(&c.common)?;
            let other = ExperimentConfig::from_file(&c.other)?;
            other.validate()?;
            cmd_compare(&cfg, &other)
        }
        Command::Weights(c) => cmd_weights(&parse_config(c)?),
        Command::Bench(c) => cmd_bench(&parse_config(c)?),
    }
}

/// Runs a parsed command line and maps the outcome to an exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
