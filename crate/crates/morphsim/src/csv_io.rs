//! CSV output for fields and diagnostic series.
//!
//! Values are printed with 17 significant digits so a written field reads
//! back bit-identical. Files are written to a `.partial` sibling and renamed
//! into place, so a crash never leaves a truncated file under the final name.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSeries;
use crate::mesh::{Field, Grid};

/// Column order of the diagnostics series file. Downstream plots key on these
/// names; changing them is a breaking change.
pub const SERIES_HEADER: &str =
    "t,Lambda,D_Lambda,int_D_Lambda,l2_z1,l2_z2,lp_z1,lp_z2,w1p_z1,w1p_z2,w2p_z1,envelope_KLW";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Writes `contents` to `<path>.partial`, then renames onto `path`.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let mut partial = path.as_os_str().to_os_string();
    partial.push(".partial");
    let partial = Path::new(&partial);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    fs::write(partial, contents).map_err(|e| io_err(partial, e))?;
    fs::rename(partial, path).map_err(|e| io_err(path, e))
}

fn push_num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to String cannot fail");
}

pub fn write_series_csv(path: &Path, series: &LyapunovSeries) -> Result<()> {
    let mut out = String::with_capacity(64 + 220 * series.len());
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for k in 0..series.len() {
        let cols = [
            series.times[k],
            series.lambda[k],
            series.d_lambda[k],
            series.int_d_lambda[k],
            series.l2_z1[k],
            series.l2_z2[k],
            series.lp_z1[k],
            series.lp_z2[k],
            series.w1p_z1[k],
            series.w1p_z2[k],
            series.w2p_z1[k],
            series.envelope[k],
        ];
        for (j, c) in cols.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            push_num(&mut out, *c);
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

/// Writes one row per lattice node (absorbing boundary nodes included, with
/// value 0), coordinates first. Row order is the lexicographic node order.
pub fn write_field_csv(path: &Path, grid: &Grid, field: &Field, value_name: &str) -> Result<()> {
    if field.len() != grid.dof_count() {
        return Err(Error::Field(format!(
            "field has {} values, the grid has {} free nodes",
            field.len(),
            grid.dof_count()
        )));
    }
    let mut out = String::with_capacity(32 + 60 * grid.node_count());
    out.push_str(if grid.dim() == 1 { "x," } else { "x,y," });
    out.push_str(value_name);
    out.push('\n');
    for (node, dof) in grid.node_to_dof().iter().enumerate() {
        let xy = grid.node_coords(node);
        push_num(&mut out, xy[0]);
        if grid.dim() == 2 {
            out.push(',');
            push_num(&mut out, xy[1]);
        }
        out.push(',');
        push_num(&mut out, dof.map_or(0.0, |d| field[d]));
        out.push('\n');
    }
    atomic_write(path, &out)
}

/// Reads a file written by [`write_field_csv`] back onto `grid`. The node
/// count must match, and values at absorbing boundary nodes must be zero
/// (they carry no degree of freedom, so anything else would be dropped).
pub fn read_field_csv(path: &Path, grid: &Grid) -> Result<Field> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |msg: String| Error::Field(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let ncols = grid.dim() + 1;
    let expected_coords = if grid.dim() == 1 { "x" } else { "x,y" };
    if header.split(',').count() != ncols || !header.starts_with(expected_coords) {
        return Err(bad(format!("expected header `{expected_coords},<name>`, got `{header}`")));
    }
    let node_to_dof = grid.node_to_dof();
    let mut values = vec![0.0; grid.dof_count()];
    let mut node = 0usize;
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        if node >= grid.node_count() {
            return Err(bad(format!("more rows than the grid's {} nodes", grid.node_count())));
        }
        let mut cols = [0.0; 3];
        let mut n = 0;
        for tok in line.split(',') {
            if n >= ncols {
                break;
            }
            cols[n] = tok
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: `{}` is not a number", idx + 2, tok.trim())))?;
            n += 1;
        }
        if n != ncols || line.split(',').count() != ncols {
            return Err(bad(format!("row {}: expected {ncols} columns", idx + 2)));
        }
        let xy = grid.node_coords(node);
        let coords_match = cols[0] == xy[0] && (grid.dim() == 1 || cols[1] == xy[1]);
        if !coords_match {
            return Err(bad(format!("row {}: coordinates do not match the grid", idx + 2)));
        }
        let value = cols[ncols - 1];
        match node_to_dof[node] {
            Some(d) => values[d] = value,
            None if value != 0.0 => {
                return Err(bad(format!(
                    "row {}: nonzero value {value:e} at an absorbing boundary node",
                    idx + 2
                )));
            }
            None => {}
        }
        node += 1;
    }
    if node != grid.node_count() {
        return Err(bad(format!("{} rows for {} nodes", node, grid.node_count())));
    }
    Field::from_values(grid, values)
}
