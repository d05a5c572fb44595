//! Spatial and temporal discretization: uniform cells on a bounded interval,
//! cell-averaged fields that vanish outside the interval, and trajectories.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Bounded open interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    a: f64,
    b: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter(format!(
                "domain requires finite a < b, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }
}

/// Uniform partition of a [`Domain`] into `m` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    m: usize,
    h: f64,
    centers: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Domain, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("cell count m must be positive".into()));
        }
        let h = domain.length() / m as f64;
        let centers = (0..m).map(|i| domain.a + (i as f64 + 0.5) * h).collect();
        Ok(Self {
            domain,
            m,
            h,
            centers,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Left and right endpoints of cell `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let a = self.domain.a;
        (a + i as f64 * self.h, a + (i + 1) as f64 * self.h)
    }

    /// Measure of the domain, `sum_i h`.
    pub fn measure(&self) -> f64 {
        self.domain.length()
    }
}

/// Uniform time grid on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        Ok(Self {
            t_end,
            n_steps,
            dt: t_end / n_steps as f64,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of node `k`; node `n_steps` is exactly `t_end`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }
}

/// Discrete norms on cell averages, all using the quadrature `sum_i h |u_i|^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    L1,
    L2,
    Linf,
    Lp(f64),
}

/// Cell-averaged field on a grid; the exterior value is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.m()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at cell {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.m()];
        Self { grid, values }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Applies `f` cellwise. Panics only if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)
    }

    pub fn norm(&self, mode: Norm) -> f64 {
        let h = self.grid.h();
        match mode {
            Norm::L1 => h * self.values.iter().map(|v| v.abs()).sum::<f64>(),
            Norm::L2 => (h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            Norm::Linf => self.values.iter().fold(0.0, |acc, v| acc.max(v.abs())),
            Norm::Lp(q) => (h * self.values.iter().map(|v| v.abs().powf(q)).sum::<f64>())
                .powf(1.0 / q),
        }
    }

    /// `sum_i h u_i v_i`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.grid.h() * dot(&self.values, &other.values))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn same_grid(g1: &Arc<Grid>, g2: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(g1, g2) || **g1 == **g2 {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "grid with m = {} on ({}, {}) vs m = {} on ({}, {})",
            g1.m(),
            g1.domain().a(),
            g1.domain().b(),
            g2.m(),
            g2.domain().a(),
            g2.domain().b()
        )))
    }
}

/// Piecewise-constant-in-time solution: `states[k]` holds on `(t_{k-1}, t_k]`,
/// `states[0]` is the initial datum.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    time_grid: TimeGrid,
    states: Vec<GridFunction>,
}

impl Trajectory {
    pub fn new(time_grid: TimeGrid, states: Vec<GridFunction>) -> Result<Self> {
        if states.len() != time_grid.n_steps() + 1 {
            return Err(Error::InvalidParameter(format!(
                "trajectory needs {} states, got {}",
                time_grid.n_steps() + 1,
                states.len()
            )));
        }
        for s in &states[1..] {
            states[0].check_same_grid(s)?;
        }
        Ok(Self { time_grid, states })
    }

    pub fn zeros(grid: Arc<Grid>, time_grid: TimeGrid) -> Self {
        let states = vec![GridFunction::zeros(grid); time_grid.n_steps() + 1];
        Self { time_grid, states }
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.states[0].grid()
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn initial(&self) -> &GridFunction {
        &self.states[0]
    }

    pub fn last(&self) -> &GridFunction {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Largest `|u|` over every stored state, including the initial datum.
    pub fn sup_abs(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.norm(Norm::Linf))
            .fold(0.0, f64::max)
    }

    pub fn check_same_mesh(&self, other: &Self) -> Result<()> {
        if self.time_grid != other.time_grid {
            return Err(Error::GridMismatch("time grids differ".into()));
        }
        same_grid(self.grid(), other.grid())
    }
}
