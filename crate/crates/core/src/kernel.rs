//! Discrete realization of the measure `dx dy / |x - y|^{1 + ps}` on a uniform
//! grid: exact cell-pair weights, exact exterior tail weights, and an optional
//! bounded symmetric modulation `kappa(x, y)`.

use std::fmt;
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::mesh::{Domain, Grid, GridFunction, Norm};
use crate::operator::gagliardo_energy;

/// Below this center distance the weight is formed directly from the second
/// antiderivative; above it a binomial series avoids cancellation.
const SERIES_MIN_DISTANCE: usize = 4;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if alpha >= 1.0 {
        return Err(Error::ExponentViolation(alpha));
    }
    Ok(())
}

/// `Phi(t) = t^{1-alpha} / (alpha (alpha - 1))`, a second antiderivative of
/// `t^{-(1+alpha)}` with `Phi(0) = 0`.
fn phi2(t: f64, alpha: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(1.0 - alpha) / (alpha * (alpha - 1.0))
    }
}

/// `x^beta - y^beta` for `x, y > 0` without cancellation.
fn pow_diff(x: f64, y: f64, beta: f64) -> f64 {
    if y == 0.0 {
        return x.powf(beta);
    }
    if x == 0.0 {
        return -y.powf(beta);
    }
    y.powf(beta) * (beta * ((x - y) / y).ln_1p()).exp_m1()
}

/// `∬_{C_0 × C_d} |x - y|^{-(1+alpha)} dx dy` for two cells of width `h`
/// whose centers are `d` cells apart.
pub fn cell_pair_weight(h: f64, d: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if d == 0 {
        return Err(Error::InvalidParameter(
            "cell distance must be positive; the diagonal carries no weight".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("cell width must be positive, got {h}")));
    }
    let beta = 1.0 - alpha;
    let unit = if d < SERIES_MIN_DISTANCE {
        let d = d as f64;
        phi2(d + 1.0, alpha) - 2.0 * phi2(d, alpha) + phi2(d - 1.0, alpha)
    } else {
        // (d+1)^b + (d-1)^b - 2 d^b = 2 d^b sum_k C(b, 2k) d^{-2k}
        let x2 = 1.0 / (d as f64 * d as f64);
        let mut coeff = 1.0; // C(beta, j)
        let mut xp = 1.0;
        let mut sum = 0.0;
        for j in 1..=60 {
            coeff *= (beta - (j - 1) as f64) / j as f64;
            if j % 2 == 0 {
                xp *= x2;
                let term = coeff * xp;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
        }
        2.0 * (d as f64).powf(beta) * sum / (alpha * (alpha - 1.0))
    };
    Ok(h.powf(beta) * unit)
}

/// Pointwise exterior tail `∫_{R \ (a,b)} |x - y|^{-(1+alpha)} dy`.
pub fn tail_weight(domain: Domain, x: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !domain.contains(x) {
        return Err(Error::InvalidParameter(format!(
            "tail weight needs x strictly inside ({}, {}), got {x}",
            domain.a(),
            domain.b()
        )));
    }
    Ok(((x - domain.a()).powf(-alpha) + (domain.b() - x).powf(-alpha)) / alpha)
}

/// Left and right exterior contributions of `∫_{C} tail_weight(x) dx` over the
/// cell `[l, r]`.
fn cell_tail_parts(domain: Domain, l: f64, r: f64, alpha: f64) -> (f64, f64) {
    let beta = 1.0 - alpha;
    let c = 1.0 / (alpha * beta);
    let left = c * pow_diff(r - domain.a(), l - domain.a(), beta);
    let right = c * pow_diff(domain.b() - l, domain.b() - r, beta);
    (left, right)
}

/// `∫_{C} ∫_{R \ C} |x - y|^{-(1+alpha)} dy dx` for a single cell of width `h`.
pub fn self_complement_weight(h: f64, alpha: f64) -> f64 {
    2.0 * h.powf(1.0 - alpha) / (alpha * (1.0 - alpha))
}

/// Bounded symmetric modulation of the kernel, `1/lambda <= kappa <= lambda`.
#[derive(Clone)]
pub struct Kappa {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    lambda: f64,
}

impl Kappa {
    pub fn new(lambda: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::Kappa(format!("ellipticity constant must be >= 1, got {lambda}")));
        }
        Ok(Self {
            f: Arc::new(f),
            lambda,
        })
    }

    pub fn constant(c: f64, lambda: f64) -> Result<Self> {
        Self::new(lambda, move |_, _| c)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    fn checked(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.eval(x, y);
        let lo = 1.0 / self.lambda;
        if !(v >= lo * (1.0 - 1e-15) && v <= self.lambda * (1.0 + 1e-15)) {
            return Err(Error::Kappa(format!(
                "kappa({x}, {y}) = {v} outside [{lo}, {}]",
                self.lambda
            )));
        }
        Ok(v)
    }
}

impl fmt::Debug for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kappa").field("lambda", &self.lambda).finish_non_exhaustive()
    }
}

/// Interaction weights `w_ij` (dense, symmetric, zero diagonal) and exterior
/// tail weights `tau_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    grid: Arc<Grid>,
    alpha: f64,
    w: Vec<f64>,
    tau: Vec<f64>,
    lambda: f64,
    band: Option<usize>,
}

impl KernelWeights {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn band(&self) -> Option<usize> {
        self.band
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.grid.m() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.grid.m();
        &self.w[i * m..(i + 1) * m]
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Column range of row `i` that can hold nonzero weights.
    pub(crate) fn row_support(&self, i: usize) -> std::ops::Range<usize> {
        match self.band {
            None => 0..self.grid.m(),
            Some(b) => i.saturating_sub(b)..(i + b + 1).min(self.grid.m()),
        }
    }

    /// Weight as a function of cell distance, taken from row 0.
    pub fn profile(&self) -> Vec<(usize, f64)> {
        (1..self.m()).map(|d| (d, self.w(0, d))).collect()
    }
}

/// Assembles the weights for `grid`; `kappa`, when given, scales each pair by
/// its value at the pair of cell centers.
pub fn assemble(grid: Arc<Grid>, cfg: &SolverConfig, kappa: Option<&Kappa>) -> Result<KernelWeights> {
    let alpha = cfg.alpha();
    check_alpha(alpha)?;
    let m = grid.m();
    let h = grid.h();
    let domain = grid.domain();

    let base: Vec<f64> = std::iter::once(Ok(0.0))
        .chain((1..m).map(|d| cell_pair_weight(h, d, alpha)))
        .collect::<Result<_>>()?;
    let tails: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let (l, r) = grid.cell(i);
            cell_tail_parts(domain, l, r, alpha)
        })
        .collect();

    let mut w = vec![0.0; m * m];
    let fill_row = |i: usize, row: &mut [f64]| -> Result<()> {
        let xi = grid.centers()[i];
        for (j, slot) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let scale = match kappa {
                Some(k) => k.checked(xi, grid.centers()[j])?,
                None => 1.0,
            };
            *slot = scale * base[i.abs_diff(j)];
        }
        Ok(())
    };
    #[cfg(feature = "parallel")]
    w.par_chunks_mut(m.max(1))
        .enumerate()
        .try_for_each(|(i, row)| fill_row(i, row))?;
    #[cfg(not(feature = "parallel"))]
    w.chunks_mut(m.max(1))
        .enumerate()
        .try_for_each(|(i, row)| fill_row(i, row))?;

    let mut tau = Vec::with_capacity(m);
    for (i, &(left, right)) in tails.iter().enumerate() {
        let t = match kappa {
            Some(k) => {
                let xi = grid.centers()[i];
                k.checked(xi, domain.a())? * left + k.checked(xi, domain.b())? * right
            }
            None => left + right,
        };
        tau.push(t);
    }

    if kappa.is_some() {
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (w[i * m + j], w[j * m + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::Kappa(format!(
                        "non-symmetric sample between cells {i} and {j}: {a} vs {b}"
                    )));
                }
            }
        }
    }

    Ok(KernelWeights {
        grid,
        alpha,
        w,
        tau,
        lambda: kappa.map_or(1.0, Kappa::lambda),
        band: None,
    })
}

/// Pure-kernel weights with interactions beyond `band` cells dropped and their
/// mass folded into the tail weights. Intended for benchmarking only.
pub fn assemble_banded(grid: Arc<Grid>, cfg: &SolverConfig, band: usize) -> Result<KernelWeights> {
    let mut kw = assemble(grid, cfg, None)?;
    let m = kw.m();
    for i in 0..m {
        let mut folded = 0.0;
        for j in 0..m {
            if i.abs_diff(j) > band {
                folded += kw.w[i * m + j];
                kw.w[i * m + j] = 0.0;
            }
        }
        kw.tau[i] += folded;
    }
    kw.band = Some(band);
    Ok(kw)
}

/// `||u||_p^p / E_p(u)`, the discrete Poincaré quotient.
pub fn poincare_ratio(u: &GridFunction, kw: &KernelWeights, p: f64) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let lhs = u.norm(Norm::Lp(p)).powf(p);
    let energy = gagliardo_energy(kw, u, p)?;
    Ok(lhs / energy)
}
