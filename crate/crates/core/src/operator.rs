//! The discrete fractional p-Laplacian
//!
//! ```text
//! A(u)_i = (1/h) [ sum_{j != i} w_ij phi_p(u_i - u_j) + tau_i phi_p(u_i) ],   phi_p(t) = |t|^{p-2} t
//! ```
//!
//! together with its energy `E_p(u) = sum_{i != j} w_ij |u_i - u_j|^p + 2 sum_i tau_i |u_i|^p`
//! and the duality pairing. The diagonal weight is zero, so no principal value is needed.

use std::sync::Arc;

use nalgebra::DMatrix;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelWeights;
use crate::mesh::{same_grid, GridFunction};

#[cfg(feature = "parallel")]
const PAR_MIN_CELLS: usize = 256;

/// `|t|^{p-2} t`.
#[inline]
pub fn phi_p(t: f64, p: f64) -> f64 {
    t.abs().powf(p - 1.0).copysign(t)
}

/// Curvature model used when linearizing the flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Curvature {
    /// Derivative of `phi_p`; for `p < 2` the smoothed `(t^2 + eps^2)^{(p-2)/2} t`
    /// is differentiated instead, which stays finite at `t = 0` when `eps > 0`.
    Newton,
    /// Secant slope `phi_p(t) / t`, smoothed the same way. For `p < 2` it
    /// dominates the true slope, so the quadratic model majorizes the energy.
    Secant,
}

#[inline]
fn phi_p_slope(t: f64, p: f64, eps: f64, mode: Curvature) -> f64 {
    match mode {
        Curvature::Newton if p >= 2.0 => (p - 1.0) * t.abs().powf(p - 2.0),
        Curvature::Newton => {
            let r = t * t + eps * eps;
            r.powf(0.5 * p - 2.0) * ((p - 1.0) * t * t + eps * eps)
        }
        Curvature::Secant if p >= 2.0 => t.abs().powf(p - 2.0),
        Curvature::Secant => (t * t + eps * eps).powf(0.5 * p - 1.0),
    }
}

#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    kw: Arc<KernelWeights>,
    p: f64,
    eps: f64,
}

impl NonlocalOperator {
    pub fn new(kw: Arc<KernelWeights>, p: f64, eps: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter("regularization eps must be nonnegative".into()));
        }
        Ok(Self { kw, p, eps })
    }

    pub fn weights(&self) -> &Arc<KernelWeights> {
        &self.kw
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        same_grid(self.kw.grid(), u.grid())
    }

    /// Row sum `h A(u)_i`, the flux leaving cell `i`.
    #[inline]
    fn flux(&self, u: &[f64], i: usize) -> f64 {
        let ui = u[i];
        let row = self.kw.row(i);
        let mut acc = self.kw.tau()[i] * phi_p(ui, self.p);
        for j in self.kw.row_support(i) {
            if j != i {
                acc += row[j] * phi_p(ui - u[j], self.p);
            }
        }
        acc
    }

    pub(crate) fn flux_all(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        #[cfg(feature = "parallel")]
        if m >= PAR_MIN_CELLS {
            return (0..m).into_par_iter().map(|i| self.flux(u, i)).collect();
        }
        (0..m).map(|i| self.flux(u, i)).collect()
    }

    /// Cell-density image `A(u)`, so that `sum_i h A(u)_i v_i` is the pairing.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let inv_h = 1.0 / self.kw.grid().h();
        let values = self
            .flux_all(u.values())
            .into_iter()
            .map(|f| f * inv_h)
            .collect();
        GridFunction::new(Arc::clone(u.grid()), values)
    }

    /// `<A(w), v> = (1/2) sum_{i != j} w_ij phi_p(w_i - w_j)(v_i - v_j) + sum_i tau_i phi_p(w_i) v_i`.
    pub fn pairing(&self, w: &GridFunction, v: &GridFunction) -> Result<f64> {
        self.check(w)?;
        self.check(v)?;
        Ok(pairing_values(&self.kw, self.p, w.values(), v.values()))
    }

    /// Jacobian of the flux map `u -> h A(u)` under the given curvature model.
    pub(crate) fn flux_jacobian(&self, u: &[f64], mode: Curvature) -> DMatrix<f64> {
        let m = u.len();
        let mut jac = DMatrix::zeros(m, m);
        for i in 0..m {
            let row = self.kw.row(i);
            let mut diag = self.kw.tau()[i] * phi_p_slope(u[i], self.p, self.eps, mode);
            for j in self.kw.row_support(i) {
                if j == i {
                    continue;
                }
                let c = row[j] * phi_p_slope(u[i] - u[j], self.p, self.eps, mode);
                diag += c;
                jac[(i, j)] = -c;
            }
            jac[(i, i)] = diag;
        }
        jac
    }
}

pub(crate) fn pairing_values(kw: &KernelWeights, p: f64, w: &[f64], v: &[f64]) -> f64 {
    let m = w.len();
    let mut acc = 0.0;
    for i in 0..m {
        let row = kw.row(i);
        let mut inner = 0.0;
        for j in kw.row_support(i) {
            if j > i {
                inner += row[j] * phi_p(w[i] - w[j], p) * (v[i] - v[j]);
            }
        }
        // the ordered-pair sum counts each unordered pair twice, cancelling the 1/2
        acc += inner + kw.tau()[i] * phi_p(w[i], p) * v[i];
    }
    acc
}

/// Discrete Gagliardo energy over the interaction set `R^2 \ (CΩ × CΩ)`.
pub fn gagliardo_energy(kw: &KernelWeights, u: &GridFunction, p: f64) -> Result<f64> {
    same_grid(kw.grid(), u.grid())?;
    Ok(energy_values(kw, u.values(), p))
}

pub(crate) fn energy_values(kw: &KernelWeights, u: &[f64], p: f64) -> f64 {
    let m = u.len();
    let mut acc = 0.0;
    for i in 0..m {
        let row = kw.row(i);
        let mut inner = 0.0;
        for j in kw.row_support(i) {
            if j > i {
                inner += row[j] * (u[i] - u[j]).abs().powf(p);
            }
        }
        acc += 2.0 * (inner + kw.tau()[i] * u[i].abs().powf(p));
    }
    acc
}
