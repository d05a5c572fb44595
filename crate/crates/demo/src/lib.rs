//! WebAssembly bindings for the browser demo. Each export returns a flat
//! `Float64Array`; the plain `*_values` functions behind them are ordinary
//! Rust and are what the native tests call.

use std::sync::Arc;

use nonlocal_rothe::ladder::run_ladder;
use nonlocal_rothe::stepper::solve;
use nonlocal_rothe::{assemble, Domain, Grid, GridFunction, NonlocalOperator, SolverConfig, SourceSpec, TimeGrid};
use wasm_bindgen::prelude::*;

const MAX_CELLS: usize = 256;
const MAX_STEPS: usize = 200;

fn setup(m: usize, s: f64, p: f64) -> Result<(Arc<Grid>, NonlocalOperator, SolverConfig), String> {
    if m == 0 || m > MAX_CELLS {
        return Err(format!("cell count must lie in 1..={MAX_CELLS}"));
    }
    let grid = Arc::new(Grid::new(Domain::unit(), m).map_err(|e| e.to_string())?);
    let cfg = SolverConfig::new(s, p).map_err(|e| e.to_string())?;
    let kw = Arc::new(assemble(grid.clone(), &cfg, None).map_err(|e| e.to_string())?);
    let op = NonlocalOperator::new(kw, p, cfg.regularization_eps).map_err(|e| e.to_string())?;
    Ok((grid, op, cfg))
}

/// Interior weights `w(d)` for `d = 1..m-1`, followed by the `m` tail weights.
pub fn weight_values(m: usize, s: f64, p: f64) -> Result<Vec<f64>, String> {
    let (_, op, _) = setup(m, s, p)?;
    let kw = op.weights();
    let mut out: Vec<f64> = kw.profile().into_iter().map(|(_, w)| w).collect();
    out.extend_from_slice(kw.tau());
    Ok(out)
}

/// States `u_0..u_n` row by row, started from a bump of height `amp` at `center`
/// under the constant source `source`.
#[allow(clippy::too_many_arguments)]
pub fn solve_values(
    m: usize,
    n_steps: usize,
    t_end: f64,
    s: f64,
    p: f64,
    center: f64,
    amp: f64,
    source: f64,
) -> Result<Vec<f64>, String> {
    if n_steps == 0 || n_steps > MAX_STEPS {
        return Err(format!("step count must lie in 1..={MAX_STEPS}"));
    }
    let (grid, op, cfg) = setup(m, s, p)?;
    let tg = TimeGrid::new(t_end, n_steps).map_err(|e| e.to_string())?;
    let u0 = GridFunction::from_fn(grid, |x| amp * (-0.5 * ((x - center) / 0.08).powi(2)).exp())
        .map_err(|e| e.to_string())?;
    let traj = solve(&u0, &SourceSpec::analytic(move |_, _| source), &tg, &op, &cfg).map_err(|e| e.to_string())?;
    Ok(traj.states().iter().flat_map(|u| u.values().iter().copied()).collect())
}

/// Final states of the truncation ladder for the singular datum `x^{-beta}`,
/// one row of `m` values per level.
pub fn ladder_values(m: usize, s: f64, p: f64, beta: f64, levels: &[f64]) -> Result<Vec<f64>, String> {
    if !(0.0..1.0).contains(&beta) {
        return Err("beta must lie in [0, 1)".into());
    }
    if levels.len() > 8 {
        return Err("at most 8 levels".into());
    }
    let (grid, op, cfg) = setup(m, s, p)?;
    let tg = TimeGrid::new(0.1, 10).map_err(|e| e.to_string())?;
    let u0 = GridFunction::from_fn(grid, |x| x.powf(-beta)).map_err(|e| e.to_string())?;
    let run = run_ladder(&SourceSpec::zero(), &u0, levels, &tg, &op, &cfg).map_err(|e| e.to_string())?;
    Ok(run
        .levels()
        .iter()
        .flat_map(|l| l.trajectory.last().values().to_vec())
        .collect())
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn weight_profile(m: usize, s: f64, p: f64) -> Result<Vec<f64>, JsValue> {
    js(weight_values(m, s, p))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn solve_profile(
    m: usize,
    n_steps: usize,
    t_end: f64,
    s: f64,
    p: f64,
    center: f64,
    amp: f64,
    source: f64,
) -> Result<Vec<f64>, JsValue> {
    js(solve_values(m, n_steps, t_end, s, p, center, amp, source))
}

#[wasm_bindgen]
pub fn ladder_profile(m: usize, s: f64, p: f64, beta: f64, levels: Vec<f64>) -> Result<Vec<f64>, JsValue> {
    js(ladder_values(m, s, p, beta, &levels))
}
