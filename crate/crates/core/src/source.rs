//! Source terms `f(x, t)` and their Steklov averages over time slabs.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Grid, GridFunction, TimeGrid};
use crate::truncation::truncate;

type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Space-time samples on a tensor layout: `values[k][j]` is the sample at
/// `(xs[j], times[k])`. Evaluation uses the nearest sample in space and linear
/// interpolation in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedSource {
    xs: Vec<f64>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TabulatedSource {
    pub fn new(xs: Vec<f64>, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if xs.is_empty() || times.is_empty() {
            return Err(Error::Source("tabulated source needs at least one sample".into()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) || !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Source("sample coordinates must be strictly increasing".into()));
        }
        if values.len() != times.len() || values.iter().any(|row| row.len() != xs.len()) {
            return Err(Error::Source("sample table is not rectangular".into()));
        }
        Ok(Self { xs, times, values })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    fn nearest_x(&self, x: f64) -> usize {
        let idx = self.xs.partition_point(|&s| s < x);
        if idx == 0 {
            0
        } else if idx == self.xs.len() || (x - self.xs[idx - 1]) <= (self.xs[idx] - x) {
            idx - 1
        } else {
            idx
        }
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        let slack = 1e-12 * (1.0 + t1.abs());
        self.times[0] <= t0 + slack && *self.times.last().unwrap() >= t1 - slack
    }

    fn eval(&self, x: f64, t: f64) -> f64 {
        let j = self.nearest_x(x);
        if self.times.len() == 1 {
            return self.values[0][j];
        }
        let k = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        (1.0 - lam) * self.values[k - 1][j] + lam * self.values[k][j]
    }
}

#[derive(Clone)]
pub enum SourceKind {
    Analytic(SourceFn),
    Tabulated(TabulatedSource),
}

impl fmt::Debug for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceKind::Analytic(_) => f.write_str("Analytic(..)"),
            SourceKind::Tabulated(t) => f.debug_tuple("Tabulated").field(t).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SourceSpec {
    kind: SourceKind,
    nonneg_required: bool,
}

impl SourceSpec {
    pub fn analytic(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: SourceKind::Analytic(Arc::new(f)),
            nonneg_required: false,
        }
    }

    pub fn zero() -> Self {
        Self::analytic(|_, _| 0.0)
    }

    pub fn tabulated(table: TabulatedSource) -> Self {
        Self {
            kind: SourceKind::Tabulated(table),
            nonneg_required: false,
        }
    }

    /// Marks the source as required to be nonnegative; tabulated samples are
    /// checked immediately, analytic ones whenever they are sampled.
    pub fn require_nonneg(mut self) -> Result<Self> {
        if let SourceKind::Tabulated(t) = &self.kind {
            for (k, row) in t.values.iter().enumerate() {
                if let Some(j) = row.iter().position(|&v| v < 0.0) {
                    return Err(Error::Source(format!(
                        "negative sample {} at x = {}, t = {}",
                        row[j], t.xs[j], t.times[k]
                    )));
                }
            }
        }
        self.nonneg_required = true;
        Ok(self)
    }

    pub fn nonneg_required(&self) -> bool {
        self.nonneg_required
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match &self.kind {
            SourceKind::Analytic(f) => f(x, t),
            SourceKind::Tabulated(tab) => tab.eval(x, t),
        }
    }

    /// Pointwise truncation `T_n(f)` applied to every evaluation or sample.
    pub fn truncated(&self, n: f64) -> Self {
        let kind = match &self.kind {
            SourceKind::Analytic(f) => {
                let f = Arc::clone(f);
                SourceKind::Analytic(Arc::new(move |x, t| truncate(n, f(x, t))))
            }
            SourceKind::Tabulated(tab) => SourceKind::Tabulated(TabulatedSource {
                xs: tab.xs.clone(),
                times: tab.times.clone(),
                values: tab
                    .values
                    .iter()
                    .map(|row| row.iter().map(|&v| truncate(n, v)).collect())
                    .collect(),
            }),
        };
        Self {
            kind,
            nonneg_required: self.nonneg_required,
        }
    }

    /// Fails when a tabulated source does not span `[0, t_end]` with at least
    /// the temporal resolution of `tg`.
    pub fn check_coverage(&self, tg: &TimeGrid) -> Result<()> {
        if let SourceKind::Tabulated(tab) = &self.kind {
            if !tab.covers(0.0, tg.t_end()) {
                return Err(Error::Source("insufficient temporal coverage".into()));
            }
            let coarsest = tab
                .times
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(0.0, f64::max);
            if coarsest > tg.dt() * (1.0 + 1e-9) || (tab.times.len() == 1 && tg.n_steps() > 0) {
                return Err(Error::Source("insufficient temporal coverage".into()));
            }
        }
        Ok(())
    }
}

/// Steklov average `(1/dt) ∫_t^{t+dt} f(x_i, τ) dτ` at every cell center, by
/// the midpoint rule with `q` subsamples.
pub fn steklov_average(
    f: &SourceSpec,
    t: f64,
    dt: f64,
    grid: &Arc<Grid>,
    q: usize,
) -> Result<GridFunction> {
    if q == 0 {
        return Err(Error::InvalidParameter("steklov subsample count must be positive".into()));
    }
    if !(dt > 0.0 && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("bad window t = {t}, dt = {dt}")));
    }
    if let SourceKind::Tabulated(tab) = &f.kind {
        if !tab.covers(t, t + dt) {
            return Err(Error::Source(format!(
                "tabulated source does not cover [{t}, {}]",
                t + dt
            )));
        }
    }
    let sub = dt / q as f64;
    let mut values = Vec::with_capacity(grid.m());
    for &x in grid.centers() {
        let mut acc = 0.0;
        for l in 0..q {
            let v = f.eval(x, t + (l as f64 + 0.5) * sub);
            if f.nonneg_required && v < 0.0 {
                return Err(Error::Source(format!("negative source value {v} at x = {x}")));
            }
            acc += v;
        }
        values.push(acc / q as f64);
    }
    GridFunction::new(Arc::clone(grid), values)
        .map_err(|e| Error::Source(format!("source sample is not finite: {e}")))
}

/// The slab averages used by the step scheme: slab `k` (0-based) averages over
/// `[t_k, t_{k+1}]`.
pub fn source_slabs(
    f: &SourceSpec,
    grid: &Arc<Grid>,
    tg: &TimeGrid,
    q: usize,
) -> Result<Vec<GridFunction>> {
    f.check_coverage(tg)?;
    (0..tg.n_steps())
        .map(|k| steklov_average(f, tg.time(k), tg.dt(), grid, q))
        .collect()
}

/// Discrete `L^1(Ω × (0, T))` norm of slab data.
pub fn slabs_l1(slabs: &[GridFunction], dt: f64) -> f64 {
    slabs
        .iter()
        .map(|s| dt * s.norm(crate::mesh::Norm::L1))
        .sum()
}
