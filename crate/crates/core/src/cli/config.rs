//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::ladder::DEFAULT_LEVELS;

use super::data::{DataSpec, KappaSpec};

/// Every recognised key, in the order used by `--help` and error messages.
pub const KEYS: &[&str] = &[
    "a",
    "b",
    "m",
    "t_end",
    "n_steps",
    "s",
    "p",
    "levels",
    "u0",
    "f",
    "kappa",
    "lambda",
    "nonneg",
    "out",
    "newton_tol",
    "newton_max_iters",
    "regularization_eps",
    "steklov_subsamples",
    "strict_exponent_check",
    "trajectory",
    "bench_reps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub t_end: f64,
    pub n_steps: usize,
    pub levels: Vec<f64>,
    pub u0: DataSpec,
    pub f: DataSpec,
    pub kappa: KappaSpec,
    pub lambda: f64,
    pub nonneg: bool,
    pub out: PathBuf,
    /// Trajectory CSV to check instead of solving (`verify` only).
    pub trajectory: Option<PathBuf>,
    pub bench_reps: usize,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            m: 64,
            t_end: 1.0,
            n_steps: 32,
            levels: DEFAULT_LEVELS.to_vec(),
            u0: DataSpec::Zero,
            f: DataSpec::Zero,
            kappa: KappaSpec::One,
            lambda: 1.0,
            nonneg: true,
            out: PathBuf::from("out"),
            trajectory: None,
            bench_reps: 5,
            solver: SolverConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        key: key.into(),
        line,
        msg: format!("malformed value `{v}`"),
    })
}

fn parse_bool(key: &str, line: usize, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config {
            key: key.into(),
            line,
            msg: format!("expected a boolean, got `{v}`"),
        }),
    }
}

impl ExperimentConfig {
    /// Sets one key; `line` is 0 for command-line flags. Relative CSV data
    /// paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, line: usize, base: &Path) -> Result<()> {
        let v = value.trim();
        let cfg_err = |msg: String| Error::Config {
            key: key.into(),
            line,
            msg,
        };
        match key {
            "a" => self.a = parse_num(key, line, v)?,
            "b" => self.b = parse_num(key, line, v)?,
            "m" => self.m = parse_num(key, line, v)?,
            "t_end" => self.t_end = parse_num(key, line, v)?,
            "n_steps" => self.n_steps = parse_num(key, line, v)?,
            "s" => self.solver.s = parse_num(key, line, v)?,
            "p" => self.solver.p = parse_num(key, line, v)?,
            "levels" => {
                self.levels = v
                    .split(',')
                    .map(|x| parse_num::<f64>(key, line, x.trim()))
                    .collect::<Result<_>>()?
            }
            "u0" => self.u0 = DataSpec::parse(v, base).map_err(cfg_err)?,
            "f" => self.f = DataSpec::parse(v, base).map_err(cfg_err)?,
            "kappa" => self.kappa = KappaSpec::parse(v).map_err(cfg_err)?,
            "lambda" => self.lambda = parse_num(key, line, v)?,
            "nonneg" => self.nonneg = parse_bool(key, line, v)?,
            "out" => self.out = PathBuf::from(v),
            "newton_tol" => self.solver.newton_tol = parse_num(key, line, v)?,
            "newton_max_iters" => self.solver.newton_max_iters = parse_num(key, line, v)?,
            "regularization_eps" => self.solver.regularization_eps = parse_num(key, line, v)?,
            "steklov_subsamples" => self.solver.steklov_subsamples = parse_num(key, line, v)?,
            "strict_exponent_check" => self.solver.strict_exponent_check = parse_bool(key, line, v)?,
            "trajectory" => self.trajectory = Some(base.join(v)),
            "bench_reps" => self.bench_reps = parse_num(key, line, v)?,
            _ => return Err(cfg_err("unknown key".into())),
        }
        Ok(())
    }

    /// Applies the lines of a config file over the current values.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                key: body.into(),
                line,
                msg: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value, line, base)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Re-checks every numeric constraint; the line is reported as 0.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Error::Config {
            key: key.into(),
            line: 0,
            msg,
        };
        if !(self.a < self.b) {
            return Err(bad("b", format!("domain needs a < b, got ({}, {})", self.a, self.b)));
        }
        if self.m == 0 {
            return Err(bad("m", "cell count must be positive".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(bad("t_end", "horizon must be positive".into()));
        }
        if self.n_steps == 0 {
            return Err(bad("n_steps", "step count must be positive".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&l| !(l > 0.0)) || !self.levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("levels", "levels must be positive and strictly increasing".into()));
        }
        if !(self.lambda >= 1.0) {
            return Err(bad("lambda", "ellipticity constant must be at least 1".into()));
        }
        if self.bench_reps == 0 {
            return Err(bad("bench_reps", "must be positive".into()));
        }
        self.solver.validate()
    }
}
