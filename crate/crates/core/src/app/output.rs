//! CSV snapshots of nodal fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::loworder::FieldState;
use crate::mesh::DiscreteGraph;
use crate::thermo::SpeciesTable;

use super::AppError;

/// Header row for `n_species` species in `dim` dimensions.
pub fn header(n_species: usize, dim: usize) -> Vec<String> {
    let mut cols = vec!["x".to_string()];
    if dim == 2 {
        cols.push("y".into());
    }
    cols.extend((1..=n_species).map(|k| format!("alpha_rho_{k}")));
    cols.push("rho".into());
    if dim == 1 {
        cols.push("v".into());
    } else {
        cols.extend(["v_x".into(), "v_y".into()]);
    }
    cols.push("p".into());
    cols.extend((1..=n_species).map(|k| format!("Y_{k}")));
    cols.extend(["s".into(), "zeta".into()]);
    cols
}

/// Derived quantities of one node in header order.
pub fn node_row(
    table: &SpeciesTable,
    x: [f64; 2],
    u: &[f64],
    dim: usize,
    zeta: f64,
) -> Result<Vec<f64>, AppError> {
    let ns = table.len();
    let w = table.conserved_to_primitive(u)?;
    let s = table.specific_entropy(u)?;
    let mut row = Vec::with_capacity(2 * ns + dim + 6);
    row.extend_from_slice(&x[..dim]);
    row.extend_from_slice(&u[..ns]);
    row.push(w.density);
    row.extend_from_slice(&w.velocity);
    row.push(w.pressure);
    row.extend_from_slice(&w.mass_fractions);
    row.push(s);
    row.push(zeta);
    Ok(row)
}

/// Writes one row per node with 17 significant digits.
pub fn dump_fields(
    path: &Path,
    graph: &DiscreteGraph,
    table: &SpeciesTable,
    field: &FieldState,
    zeta: &[f64],
) -> Result<(), AppError> {
    let dim = field.dim();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| AppError::io(path, e);
    writeln!(out, "{}", header(table.len(), dim).join(",")).map_err(io)?;
    for (i, x) in graph.coords().iter().enumerate() {
        let row = node_row(table, *x, field.node(i), dim, zeta.get(i).copied().unwrap_or(0.0))?;
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}
