//! Consolidated relative error indicators.

use std::fmt;
use std::str::FromStr;

use crate::loworder::FieldState;
use crate::mesh::DiscreteGraph;

use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::LInf];
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "1",
            NormKind::L2 => "2",
            NormKind::LInf => "inf",
        })
    }
}

impl FromStr for NormKind {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(NormKind::L1),
            "2" => Ok(NormKind::L2),
            "inf" | "infinity" => Ok(NormKind::LInf),
            other => Err(AppError::UnknownNorm(other.to_string())),
        }
    }
}

/// Lumped-mass weighted norm of one component of a node-major buffer.
fn component_norm(graph: &DiscreteGraph, data: &[f64], nc: usize, q: usize, kind: NormKind) -> f64 {
    let values = (0..graph.n_nodes()).map(|i| (graph.lumped_mass(i), data[i * nc + q]));
    match kind {
        NormKind::L1 => values.map(|(m, v)| m * v.abs()).sum(),
        NormKind::L2 => values.map(|(m, v)| m * v * v).sum::<f64>().sqrt(),
        NormKind::LInf => values.map(|(_, v)| v.abs()).fold(0.0, f64::max),
    }
}

/// δ^q = Σ_k ‖u_k,h − u_k‖_q/‖u_k‖_q over all conserved components.
///
/// Components whose exact norm vanishes contribute their absolute error.
pub fn error_norm(graph: &DiscreteGraph, field: &FieldState, exact: &FieldState, kind: NormKind) -> f64 {
    let nc = field.n_components();
    let diff: Vec<f64> = field.as_slice().iter().zip(exact.as_slice()).map(|(a, b)| a - b).collect();
    (0..nc)
        .map(|q| {
            let e = component_norm(graph, &diff, nc, q, kind);
            let u = component_norm(graph, exact.as_slice(), nc, q, kind);
            if u > 0.0 {
                e / u
            } else {
                e
            }
        })
        .sum()
}
