//! Named built-in data and kernel choices.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::Result;
use crate::io::{ingest_field, ingest_source};
use crate::kernel::Kappa;
use crate::mesh::{Domain, Grid, GridFunction};
use crate::source::SourceSpec;

/// `zero`, `const:c`, `power:beta[,scale]`, `gauss:center,width,amp`,
/// `ramp:rate[,base]` or `csv:path`.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Zero,
    Const(f64),
    /// `scale (x - a)^{-beta}`, integrable for `beta < 1`.
    Power { beta: f64, scale: f64 },
    Gauss { center: f64, width: f64, amp: f64 },
    /// `base + rate t`; the initial datum sees `base`.
    Ramp { rate: f64, base: f64 },
    Csv(PathBuf),
}

fn nums(body: &str, min: usize, max: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = body
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("malformed number `{}`", s.trim())))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() < min || v.len() > max || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected {min} to {max} finite numbers, got `{body}`"));
    }
    Ok(v)
}

impl DataSpec {
    pub fn parse(s: &str, base: &Path) -> std::result::Result<Self, String> {
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        match name.trim() {
            "zero" => Ok(Self::Zero),
            "const" => Ok(Self::Const(nums(body, 1, 1)?[0])),
            "power" => {
                let v = nums(body, 1, 2)?;
                if !(v[0] >= 0.0 && v[0] < 1.0) {
                    return Err(format!("power exponent must lie in [0, 1), got {}", v[0]));
                }
                Ok(Self::Power {
                    beta: v[0],
                    scale: v.get(1).copied().unwrap_or(1.0),
                })
            }
            "gauss" => {
                let v = nums(body, 3, 3)?;
                if !(v[1] > 0.0) {
                    return Err("gaussian width must be positive".into());
                }
                Ok(Self::Gauss {
                    center: v[0],
                    width: v[1],
                    amp: v[2],
                })
            }
            "ramp" => {
                let v = nums(body, 1, 2)?;
                Ok(Self::Ramp {
                    rate: v[0],
                    base: v.get(1).copied().unwrap_or(0.0),
                })
            }
            "csv" if !body.trim().is_empty() => Ok(Self::Csv(base.join(body.trim()))),
            _ => Err(format!("unknown data `{s}`")),
        }
    }

    fn closure(&self, domain: Domain) -> Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
        let a = domain.a();
        Some(match *self {
            Self::Zero => Arc::new(|_, _| 0.0),
            Self::Const(c) => Arc::new(move |_, _| c),
            Self::Power { beta, scale } => Arc::new(move |x, _| scale * (x - a).powf(-beta)),
            Self::Gauss { center, width, amp } => {
                Arc::new(move |x, _| amp * (-0.5 * ((x - center) / width).powi(2)).exp())
            }
            Self::Ramp { rate, base } => Arc::new(move |_, t| base + rate * t),
            Self::Csv(_) => return None,
        })
    }

    /// Cell-center samples at `t = 0`.
    pub fn field(&self, grid: &Arc<Grid>, nonneg: bool) -> Result<GridFunction> {
        match self {
            Self::Csv(path) => ingest_field(path, grid, nonneg),
            _ => {
                let f = self.closure(grid.domain()).expect("analytic data");
                let u = GridFunction::from_fn(Arc::clone(grid), |x| f(x, 0.0))?;
                if nonneg && u.values().iter().any(|&v| v < 0.0) {
                    return Err(crate::Error::InvalidParameter(
                        "initial datum has negative values under nonnegative data".into(),
                    ));
                }
                Ok(u)
            }
        }
    }

    pub fn source(&self, grid: &Arc<Grid>, nonneg: bool) -> Result<SourceSpec> {
        let spec = match self {
            Self::Csv(path) => return ingest_source(path, grid, nonneg),
            _ => {
                let f = self.closure(grid.domain()).expect("analytic data");
                SourceSpec::analytic(move |x, t| f(x, t))
            }
        };
        if nonneg {
            spec.require_nonneg()
        } else {
            Ok(spec)
        }
    }
}

/// `one`, `const:c` or `cos:amp` for `1 + amp cos(2π(x - y))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaSpec {
    One,
    Const(f64),
    Cos(f64),
}

impl KappaSpec {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        match name.trim() {
            "one" => Ok(Self::One),
            "const" => Ok(Self::Const(nums(body, 1, 1)?[0])),
            "cos" => Ok(Self::Cos(nums(body, 1, 1)?[0])),
            _ => Err(format!("unknown kernel `{s}`")),
        }
    }

    pub fn build(&self, lambda: f64) -> Result<Option<Kappa>> {
        Ok(match *self {
            Self::One => None,
            Self::Const(c) => Some(Kappa::constant(c, lambda)?),
            Self::Cos(amp) => Some(Kappa::new(lambda, move |x, y| {
                1.0 + amp * (2.0 * std::f64::consts::PI * (x - y)).cos()
            })?),
        })
    }
}
