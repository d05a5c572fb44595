//! The truncated-data ladder: the problem is solved with `f_n = T_n(f)` and
//! `u_{0n} = T_n(u_0)` for an increasing list of heights `n`, and the levels are
//! compared for monotonicity and for the L¹ Cauchy estimate.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Norm, TimeGrid, Trajectory};
use crate::operator::NonlocalOperator;
use crate::source::{slabs_l1, source_slabs, SourceSpec};
use crate::stepper::solve_with_slabs;
use crate::truncation::truncate;

pub const DEFAULT_LEVELS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

pub fn truncate_data(f: &SourceSpec, u0: &GridFunction, n: f64) -> Result<(SourceSpec, GridFunction)> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation height must be positive, got {n}")));
    }
    Ok((f.truncated(n), u0.map(|v| truncate(n, v))))
}

/// Data and solution of one ladder level.
#[derive(Debug, Clone)]
pub struct Level {
    pub height: f64,
    pub u0: GridFunction,
    pub slabs: Vec<GridFunction>,
    pub trajectory: Trajectory,
}

impl Level {
    /// `(||f_n||_{L1(Ω_T)}, ||u_{0n}||_{L1(Ω)})` of the discrete data.
    pub fn data_l1(&self) -> (f64, f64) {
        let dt = self.trajectory.time_grid().dt();
        (slabs_l1(&self.slabs, dt), self.u0.norm(Norm::L1))
    }
}

#[derive(Debug, Clone)]
pub struct LadderRun {
    levels: Vec<Level>,
    base_f: SourceSpec,
    base_u0: GridFunction,
}

impl LadderRun {
    pub fn heights(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.height).collect()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.levels.iter().map(|l| &l.trajectory).collect()
    }

    pub fn base_data(&self) -> (&SourceSpec, &GridFunction) {
        (&self.base_f, &self.base_u0)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    fn level(&self, i: usize) -> Result<&Level> {
        self.levels
            .get(i)
            .ok_or_else(|| Error::InvalidParameter(format!("level index {i} out of range ({} levels)", self.levels.len())))
    }
}

pub fn run_ladder(
    f: &SourceSpec,
    u0: &GridFunction,
    levels: &[f64],
    tg: &TimeGrid,
    op: &NonlocalOperator,
    cfg: &SolverConfig,
) -> Result<LadderRun> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("ladder needs at least one level".into()));
    }
    if levels.iter().any(|&n| !(n > 0.0 && n.is_finite())) || !levels.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "ladder levels must be positive and strictly increasing".into(),
        ));
    }
    if u0.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("ladder data must be nonnegative (u0)".into()));
    }
    let base_slabs = source_slabs(f, u0.grid(), tg, cfg.steklov_subsamples)?;
    if base_slabs.iter().any(|s| s.values().iter().any(|&v| v < 0.0)) {
        return Err(Error::InvalidParameter("ladder data must be nonnegative (f)".into()));
    }

    let solve_level = |&n: &f64| -> Result<Level> {
        let (fn_, u0n) = truncate_data(f, u0, n)?;
        let slabs = source_slabs(&fn_, u0.grid(), tg, cfg.steklov_subsamples)?;
        let trajectory = solve_with_slabs(&u0n, &slabs, tg, op, cfg).map_err(|e| Error::Level {
            level: n,
            source: Box::new(e),
        })?;
        Ok(Level {
            height: n,
            u0: u0n,
            slabs,
            trajectory,
        })
    };
    #[cfg(feature = "parallel")]
    let solved: Vec<Result<Level>> = levels.par_iter().map(solve_level).collect();
    #[cfg(not(feature = "parallel"))]
    let solved: Vec<Result<Level>> = levels.iter().map(solve_level).collect();

    Ok(LadderRun {
        levels: solved.into_iter().collect::<Result<_>>()?,
        base_f: f.clone(),
        base_u0: u0.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyGap {
    pub a_nm: f64,
    pub bound: f64,
    pub observed: f64,
}

impl CauchyGap {
    pub const SLACK: f64 = 1e-7;

    pub fn holds(&self) -> bool {
        self.observed <= self.bound + Self::SLACK
    }
}

/// `a_nm = ||u_{0n} - u_{0m}||_1 + ||f_n - f_m||_{L1(Ω_T)}` on the discrete
/// data, the bound `(2|Ω|)^{1/2} a^{1/2} + 2a`, and the observed
/// `max_t ||u_n(t) - u_m(t)||_1`.
pub fn cauchy_gap(run: &LadderRun, i: usize, j: usize) -> Result<CauchyGap> {
    let (li, lj) = (run.level(i)?, run.level(j)?);
    let dt = li.trajectory.time_grid().dt();
    let mut a_nm = li.u0.zip_map(&lj.u0, |x, y| x - y)?.norm(Norm::L1);
    for (si, sj) in li.slabs.iter().zip(&lj.slabs) {
        a_nm += dt * si.zip_map(sj, |x, y| x - y)?.norm(Norm::L1);
    }
    let measure = li.u0.grid().measure();
    let bound = (2.0 * measure).sqrt() * a_nm.sqrt() + 2.0 * a_nm;
    let mut observed = 0.0f64;
    for (ui, uj) in li.trajectory.states().iter().zip(lj.trajectory.states()) {
        observed = observed.max(ui.zip_map(uj, |x, y| x - y)?.norm(Norm::L1));
    }
    Ok(CauchyGap {
        a_nm,
        bound,
        observed,
    })
}

/// `max_{t,i} (u_lower - u_upper)_+` between two levels.
pub fn pair_defect(run: &LadderRun, lower: usize, upper: usize) -> Result<f64> {
    let (lo, hi) = (run.level(lower)?, run.level(upper)?);
    let mut worst = 0.0f64;
    for (a, b) in lo.trajectory.states().iter().zip(hi.trajectory.states()) {
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max(x - y);
        }
    }
    Ok(worst)
}

pub const MONOTONE_TOL: f64 = 1e-9;

/// Largest violation of `u_n <= u_{n'}` over consecutive levels.
pub fn monotone_defect(run: &LadderRun) -> Result<f64> {
    if run.len() < 2 {
        return Err(Error::InvalidParameter("monotone defect needs at least two levels".into()));
    }
    let mut worst = 0.0f64;
    for k in 0..run.len() - 1 {
        worst = worst.max(pair_defect(run, k, k + 1)?);
    }
    Ok(worst)
}

/// One row of the ladder report; the `*_to_next` fields are absent on the top level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow {
    pub level: f64,
    pub sup_l1_gap_to_next: Option<f64>,
    pub a_nm_to_next: Option<f64>,
    pub bound: Option<f64>,
    pub monotone_defect: Option<f64>,
}

pub fn ladder_rows(run: &LadderRun) -> Result<Vec<LadderRow>> {
    let mut rows = Vec::with_capacity(run.len());
    for k in 0..run.len() {
        if k + 1 < run.len() {
            let gap = cauchy_gap(run, k, k + 1)?;
            rows.push(LadderRow {
                level: run.levels[k].height,
                sup_l1_gap_to_next: Some(gap.observed),
                a_nm_to_next: Some(gap.a_nm),
                bound: Some(gap.bound),
                monotone_defect: Some(pair_defect(run, k, k + 1)?),
            });
        } else {
            rows.push(LadderRow {
                level: run.levels[k].height,
                sup_l1_gap_to_next: None,
                a_nm_to_next: None,
                bound: None,
                monotone_defect: None,
            });
        }
    }
    Ok(rows)
}
