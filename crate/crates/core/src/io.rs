//! CSV import and export. Reals are written with 17 significant digits in
//! exponent form, so exported values read back bit-for-bit; lines end in `\n`.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use csv::{ReaderBuilder, StringRecord, Terminator, Trim, WriterBuilder};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::ladder::LadderRow;
use crate::mesh::{Grid, GridFunction, TimeGrid, Trajectory};
use crate::source::{SourceSpec, TabulatedSource};

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

/// Writes rows under a header; cells are already formatted.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Long format `t,x,u`, one row per step and cell.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let tg = traj.time_grid();
    let centers = traj.grid().centers();
    let rows = traj.states().iter().enumerate().flat_map(|(k, s)| {
        let t = fmt_real(tg.time(k));
        centers
            .iter()
            .zip(s.values())
            .map(move |(x, u)| vec![t.clone(), fmt_real(*x), fmt_real(*u)])
    });
    write_table(w, &["t", "x", "u"], rows)
}

/// `x,value` at the cell centers.
pub fn write_field<W: Write>(w: W, u: &GridFunction) -> Result<()> {
    let rows = u
        .grid()
        .centers()
        .iter()
        .zip(u.values())
        .map(|(x, v)| vec![fmt_real(*x), fmt_real(*v)]);
    write_table(w, &["x", "value"], rows)
}

pub fn write_profile<W: Write>(w: W, profile: &[(usize, f64)]) -> Result<()> {
    let rows = profile.iter().map(|(d, v)| vec![d.to_string(), fmt_real(*v)]);
    write_table(w, &["d", "weight"], rows)
}

pub fn write_ladder<W: Write>(w: W, rows: &[LadderRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            fmt_real(r.level),
            fmt_opt(r.sup_l1_gap_to_next),
            fmt_opt(r.a_nm_to_next),
            fmt_opt(r.bound),
            fmt_opt(r.monotone_defect),
        ]
    });
    write_table(
        w,
        &["level", "sup_l1_gap_to_next", "a_nm_to_next", "bound", "monotone_defect"],
        rows,
    )
}

pub fn write_report<W: Write>(w: W, report: &DiagnosticsReport) -> Result<()> {
    let rows = report
        .entries()
        .iter()
        .map(|e| vec![e.name.clone(), fmt_real(e.value), fmt_opt(e.bound), e.verdict.to_string()]);
    write_table(w, &["name", "value", "bound", "verdict"], rows)
}

/// Opens `path` for writing and hands the file to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(File) -> Result<()>) -> Result<()> {
    f(File::create(path)?)
}

struct Table {
    path: String,
    rows: Vec<(usize, Vec<f64>)>,
}

/// Reads the named columns from a headed CSV; every row must parse as reals.
fn read_columns(path: &Path, names: &[&str]) -> Result<Table> {
    let shown = path.display().to_string();
    let mut rdr = ReaderBuilder::new()
        .trim(Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Csv {
                path: shown.clone(),
                row: 0,
                msg: format!("{other:?}"),
            },
        })?;
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: shown.clone(),
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header.iter().position(|h| h == *n).ok_or_else(|| Error::Csv {
                path: shown.clone(),
                row: 1,
                msg: format!("missing column `{n}`"),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut rec = StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| Error::Csv {
            path: shown.clone(),
            row: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let vals = idx
            .iter()
            .zip(names)
            .map(|(&i, n)| {
                let cell = rec.get(i).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Csv {
                        path: shown.clone(),
                        row: line,
                        msg: format!("malformed `{n}` value `{cell}`"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    Ok(Table { path: shown, rows })
}

/// Index of the cell containing `x`, when `|x - c_i| <= h/2`.
fn cell_of(grid: &Grid, x: f64) -> Option<usize> {
    let a = grid.domain().a();
    let h = grid.h();
    let i = ((x - a) / h).floor();
    if !(i >= -1.0 && i <= grid.m() as f64) {
        return None;
    }
    let lo = (i.max(0.0) as usize).min(grid.m() - 1);
    // the floor can land one cell off at cell edges; check both neighbours
    [lo.saturating_sub(1), lo, (lo + 1).min(grid.m() - 1)]
        .into_iter()
        .filter(|&j| (x - grid.centers()[j]).abs() <= 0.5 * h)
        .min_by(|&j, &k| {
            (x - grid.centers()[j])
                .abs()
                .total_cmp(&(x - grid.centers()[k]).abs())
        })
}

fn check_sign(table: &Table, col: usize, nonneg: bool) -> Result<()> {
    if nonneg {
        if let Some((line, v)) = table.rows.iter().find(|(_, v)| v[col] < 0.0) {
            return Err(Error::Csv {
                path: table.path.clone(),
                row: *line,
                msg: format!("negative value {} under nonnegative data", v[col]),
            });
        }
    }
    Ok(())
}

/// Columns `x,value`; each cell takes the sample nearest to its midpoint among
/// the samples lying in the cell.
pub fn ingest_field(path: &Path, grid: &Arc<Grid>, nonneg: bool) -> Result<GridFunction> {
    let table = read_columns(path, &["x", "value"])?;
    check_sign(&table, 1, nonneg)?;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; grid.m()];
    for (line, v) in &table.rows {
        let i = cell_of(grid, v[0]).ok_or_else(|| Error::Csv {
            path: table.path.clone(),
            row: *line,
            msg: format!("x = {} lies outside the grid", v[0]),
        })?;
        let dist = (v[0] - grid.centers()[i]).abs();
        if best[i].is_none_or(|(d, _)| dist < d) {
            best[i] = Some((dist, v[1]));
        }
    }
    let values = best
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.map(|(_, v)| v).ok_or_else(|| Error::Csv {
                path: table.path.clone(),
                row: 0,
                msg: format!("missing cell {i} (center {})", grid.centers()[i]),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    GridFunction::new(Arc::clone(grid), values)
}

/// Columns `x,t,value` on a full tensor layout of sample positions and times.
/// Every cell of `grid` must contain a sample position.
pub fn ingest_source(path: &Path, grid: &Arc<Grid>, nonneg: bool) -> Result<SourceSpec> {
    let table = read_columns(path, &["x", "t", "value"])?;
    check_sign(&table, 2, nonneg)?;
    let mut xs: Vec<f64> = table.rows.iter().map(|(_, v)| v[0]).collect();
    let mut ts: Vec<f64> = table.rows.iter().map(|(_, v)| v[1]).collect();
    for v in [&mut xs, &mut ts] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let mut values = vec![vec![f64::NAN; xs.len()]; ts.len()];
    for (line, v) in &table.rows {
        let j = xs.partition_point(|&s| s < v[0]);
        let k = ts.partition_point(|&s| s < v[1]);
        if !values[k][j].is_nan() {
            return Err(Error::Csv {
                path: table.path.clone(),
                row: *line,
                msg: format!("duplicate sample at x = {}, t = {}", v[0], v[1]),
            });
        }
        values[k][j] = v[2];
    }
    if let Some(k) = values.iter().position(|row| row.iter().any(|v| v.is_nan())) {
        return Err(Error::Csv {
            path: table.path.clone(),
            row: 0,
            msg: format!("samples at t = {} do not cover every x", ts[k]),
        });
    }
    for (i, &c) in grid.centers().iter().enumerate() {
        let j = xs.partition_point(|&s| s < c);
        let near = [j.saturating_sub(1), j.min(xs.len() - 1)]
            .iter()
            .any(|&j| (xs[j] - c).abs() <= 0.5 * grid.h());
        if !near {
            return Err(Error::Csv {
                path: table.path.clone(),
                row: 0,
                msg: format!("missing cell {i} (center {c})"),
            });
        }
    }
    let spec = SourceSpec::tabulated(TabulatedSource::new(xs, ts, values)?);
    if nonneg {
        spec.require_nonneg()
    } else {
        Ok(spec)
    }
}

/// Long-format `t,x,u` on the given meshes; every `(t_k, cell)` pair must
/// appear exactly once.
pub fn ingest_trajectory(path: &Path, grid: &Arc<Grid>, tg: &TimeGrid) -> Result<Trajectory> {
    let table = read_columns(path, &["t", "x", "u"])?;
    let m = grid.m();
    let n = tg.n_steps();
    let mut values = vec![vec![f64::NAN; m]; n + 1];
    let t_slack = 1e-12 * (1.0 + tg.t_end());
    for (line, v) in &table.rows {
        let bad = |msg: String| Error::Csv {
            path: table.path.clone(),
            row: *line,
            msg,
        };
        let k = (v[0] / tg.dt()).round();
        if !(k >= 0.0 && k <= n as f64) || (tg.time(k as usize) - v[0]).abs() > t_slack {
            return Err(bad(format!("t = {} is not a node of the time grid", v[0])));
        }
        let i = cell_of(grid, v[1]).ok_or_else(|| bad(format!("x = {} lies outside the grid", v[1])))?;
        let slot = &mut values[k as usize][i];
        if !slot.is_nan() {
            return Err(bad(format!("duplicate entry at t = {}, x = {}", v[0], v[1])));
        }
        *slot = v[2];
    }
    let mut states = Vec::with_capacity(n + 1);
    for (k, row) in values.into_iter().enumerate() {
        if let Some(i) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::Csv {
                path: table.path.clone(),
                row: 0,
                msg: format!("missing entry at step {k}, cell {i}"),
            });
        }
        states.push(GridFunction::new(Arc::clone(grid), row)?);
    }
    Trajectory::new(*tg, states)
}
