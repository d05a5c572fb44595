use crate::error::{Error, Result};

/// Exponents and optimizer settings shared by assembly and stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub s: f64,
    pub p: f64,
    /// Enforce `p * s < 1`, the one-dimensional form of `ps < N`.
    pub strict_exponent_check: bool,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Smoothing of `|t|^{p-2}` in the Newton Hessian; only used when `p < 2`.
    pub regularization_eps: f64,
    pub steklov_subsamples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            s: 0.4,
            p: 2.0,
            strict_exponent_check: true,
            newton_tol: 1e-10,
            newton_max_iters: 100,
            regularization_eps: 1e-12,
            steklov_subsamples: 4,
        }
    }
}

impl SolverConfig {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        let cfg = Self {
            s,
            p,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Singularity exponent of the kernel, `p * s`.
    pub fn alpha(&self) -> f64 {
        self.p * self.s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0,1), got {}", self.s)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter("newton_tol must be positive".into()));
        }
        if self.newton_max_iters == 0 {
            return Err(Error::InvalidParameter("newton_max_iters must be positive".into()));
        }
        if !(self.regularization_eps >= 0.0) {
            return Err(Error::InvalidParameter("regularization_eps must be nonnegative".into()));
        }
        if self.steklov_subsamples == 0 {
            return Err(Error::InvalidParameter("steklov_subsamples must be positive".into()));
        }
        if self.alpha() >= 1.0 {
            if self.strict_exponent_check {
                return Err(Error::ExponentViolation(self.alpha()));
            }
            log::warn!(
                "p*s = {} >= 1: kernel weights diverge, assembly will fail",
                self.alpha()
            );
        }
        Ok(())
    }
}
