//! Convex limiting of the high-order correction onto local bounds.
//!
//! Each node splits its correction into pair contributions P_ij, scales every
//! pair by a limiter ℓ_ij found by a one-step regula falsi per functional, and
//! recombines after taking ℓ = min(ℓ_ij, ℓ_ji).

use crate::loworder::{bounds_stride, internal_energy, FieldState, Primitive, MAX_COMPONENTS};
use crate::mesh::DiscreteGraph;
use crate::par;
use crate::thermo::SpeciesTable;

/// Guard added to the previous limiter value in the regula falsi step.
pub const REGULA_FALSI_EPS: f64 = 1e-14;

/// Number of functionals: partial-density lower and upper bounds, internal
/// energy and entropy.
pub fn n_functionals(n_species: usize) -> usize {
    2 * n_species + 2
}

/// Evaluates functional `nu` (0-based) at `u` for a node with `bounds`.
///
/// Order: species lower bounds, species upper bounds, ε − ε_min,
/// σ(u) − ρ(u) s_min. Returns `None` where the entropy is undefined. The
/// entropy treats negative partial densities as zero, matching the clipping
/// of the final update.
pub fn functional(table: &SpeciesTable, u: &[f64], bounds: &[f64], nu: usize, dim: usize) -> Option<f64> {
    let ns = table.len();
    if nu < ns {
        Some(u[nu] - bounds[nu])
    } else if nu < 2 * ns {
        Some(bounds[nu] - u[nu - ns])
    } else if nu == 2 * ns {
        let rho: f64 = u[..ns].iter().sum();
        if !(rho > 0.0) {
            return None;
        }
        Some(internal_energy(u, ns, dim) - bounds[2 * ns])
    } else {
        entropy_functional(table, u, bounds[2 * ns + 1], dim)
    }
}

#[inline]
fn entropy_functional(table: &SpeciesTable, u: &[f64], s_min: f64, dim: usize) -> Option<f64> {
    let m = table.mixture_unchecked(u, dim);
    if !(m.rho > 0.0 && m.internal_energy > 0.0) {
        return None;
    }
    let sigma = table.entropy_density_unchecked(u, dim, &m);
    Some(sigma - m.rho * s_min)
}

/// Sequential limiter for one pair: the largest ℓ ∈ [0, 1] found by one
/// regula falsi step per functional, in the fixed order of [`functional`].
///
/// `psi_low` holds the functionals at `u_low`. A functional that is already
/// negative at `u_low` through rounding only triggers a step when the trial
/// point is worse.
pub fn limit_pair(table: &SpeciesTable, u_low: &[f64], p: &[f64], bounds: &[f64], psi_low: &[f64], dim: usize) -> f64 {
    let nc = u_low.len();
    let mut l = 1.0f64;
    let mut trial = [0.0; MAX_COMPONENTS];
    for (nu, &psi_l) in psi_low.iter().enumerate() {
        if l == 0.0 {
            break;
        }
        for q in 0..nc {
            trial[q] = u_low[q] + l * p[q];
        }
        let psi_h = match functional(table, &trial[..nc], bounds, nu, dim) {
            Some(v) if !v.is_nan() => v,
            _ => {
                l = 0.0;
                break;
            }
        };
        if psi_h < 0.0 && psi_h < psi_l {
            let psi_l = psi_l.max(0.0);
            let root = -(l + REGULA_FALSI_EPS) * psi_l / (psi_h - psi_l);
            l = if root.is_nan() { 0.0 } else { l.min(root).max(0.0) };
        }
    }
    l
}

/// Relaxation radius r_i = (m_i/|D|)^{1.5/d}.
pub fn relaxation_radius(graph: &DiscreteGraph, i: usize) -> f64 {
    (graph.lumped_mass(i) / graph.measure()).powf(1.5 / graph.dim() as f64)
}

/// Relaxes the bounds of node `i` in place.
///
/// Partial-density and internal-energy bounds are scaled by (1 ∓ r); the
/// specific-entropy bound becomes
/// max(s_min + c_v log(1 − r), s_min − Δs) with Δs the largest midpoint
/// entropy excess over the stencil.
pub fn relax_node(
    graph: &DiscreteGraph,
    table: &SpeciesTable,
    field: &FieldState,
    prims: &[Primitive],
    i: usize,
    bounds: &mut [f64],
) {
    let mut s_mid_max = f64::NEG_INFINITY;
    for k in graph.row(i) {
        let j = graph.col(k);
        if j != i {
            s_mid_max = s_mid_max.max(midpoint_entropy(table, field, i, j));
        }
    }
    let r = relaxation_radius(graph, i);
    relax_with(field.n_species(), &prims[i], r, (1.0 - r).ln(), s_mid_max, bounds);
}

/// Specific entropy of ½(U_i + U_j), or −∞ if it is not admissible.
#[inline]
fn midpoint_entropy(table: &SpeciesTable, field: &FieldState, i: usize, j: usize) -> f64 {
    let nc = field.n_components();
    let (ui, uj) = (field.node(i), field.node(j));
    let mut mid = [0.0; MAX_COMPONENTS];
    for q in 0..nc {
        mid[q] = 0.5 * (ui[q] + uj[q]);
    }
    let m = table.mixture_unchecked(&mid[..nc], field.dim());
    if m.rho > 0.0 && m.internal_energy > 0.0 {
        table.entropy_density_unchecked(&mid[..nc], field.dim(), &m) / m.rho
    } else {
        f64::NEG_INFINITY
    }
}

#[inline]
fn relax_with(ns: usize, wi: &Primitive, r: f64, log_1mr: f64, s_mid_max: f64, bounds: &mut [f64]) {
    for s in 0..ns {
        bounds[s] *= 1.0 - r;
        bounds[ns + s] *= 1.0 + r;
    }
    bounds[2 * ns] *= 1.0 - r;
    let s_min = bounds[2 * ns + 1];
    let cv = wi.rho_cv / wi.rho;
    let log_form = s_min + cv * log_1mr;
    let delta = if s_mid_max.is_finite() { s_mid_max - s_min } else { 0.0 };
    bounds[2 * ns + 1] = log_form.max(s_min - delta).min(s_min);
}

/// Relaxes every node's bounds. Midpoint entropies are evaluated once per
/// edge and the radius is reused across nodes of equal mass.
pub fn relax_bounds(
    graph: &DiscreteGraph,
    table: &SpeciesTable,
    field: &FieldState,
    prims: &[Primitive],
    bounds: &mut [f64],
) {
    let ns = field.n_species();
    let stride = bounds_stride(ns);
    let blocks = par::node_blocks(graph.n_nodes());
    let mut s_mid = vec![f64::NEG_INFINITY; graph.n_entries()];
    let parts = par::split_entries(&mut s_mid, graph, &blocks, 1);
    par::for_each_block(&blocks, parts, |r, part| {
        let base = graph.row_ptr()[r.start];
        for i in r {
            for k in graph.row(i) {
                let j = graph.col(k);
                if j > i {
                    part[k - base] = midpoint_entropy(table, field, i, j);
                }
            }
        }
    });
    let s_mid = &s_mid;
    let parts = par::split_nodes(bounds, &blocks, stride);
    par::for_each_block(&blocks, parts, |r, part| {
        let start = r.start;
        let mut memo = (f64::NAN, 0.0, 0.0);
        for i in r {
            let mass = graph.lumped_mass(i);
            if mass != memo.0 {
                let radius = relaxation_radius(graph, i);
                memo = (mass, radius, (1.0 - radius).ln());
            }
            let mut s_mid_max = f64::NEG_INFINITY;
            for k in graph.row(i) {
                let j = graph.col(k);
                let v = if j > i { s_mid[k] } else if j < i { s_mid[graph.mirror(k)] } else { continue };
                s_mid_max = s_mid_max.max(v);
            }
            let b = &mut part[(i - start) * stride..(i - start + 1) * stride];
            relax_with(ns, &prims[i], memo.1, memo.2, s_mid_max, b);
        }
    });
}

/// Convex weight ω_i = 1/(number of neighbours of i).
#[inline]
pub fn omega(graph: &DiscreteGraph, i: usize) -> f64 {
    1.0 / (graph.row(i).len() - 1) as f64
}

/// P_ij = τ/(m_i ω_i) A_ij.
#[inline]
pub fn correction(graph: &DiscreteGraph, i: usize, tau: f64, a: &[f64], out: &mut [f64]) {
    let scale = tau / (graph.lumped_mass(i) * omega(graph, i));
    for (o, v) in out.iter_mut().zip(a) {
        *o = scale * v;
    }
}

/// Computes the unsymmetrized limiter of every entry.
///
/// `a` holds the antidiffusive pair terms A_ij (`nc` per entry), `u_low`
/// and `bounds` the low-order update and bounds per node. Diagonal entries
/// get ℓ = 1.
#[allow(clippy::too_many_arguments)]
pub fn compute_limiter(
    graph: &DiscreteGraph,
    table: &SpeciesTable,
    dim: usize,
    tau: f64,
    u_low: &[f64],
    bounds: &[f64],
    a: &[f64],
    l: &mut [f64],
) {
    let ns = table.len();
    let nc = ns + dim + 1;
    let stride = bounds_stride(ns);
    let nf = n_functionals(ns);
    let blocks = par::node_blocks(graph.n_nodes());
    let parts = par::split_entries(l, graph, &blocks, 1);
    par::for_each_block(&blocks, parts, |r, part| {
        let base = graph.row_ptr()[r.start];
        let mut psi_low = [0.0; 2 * MAX_COMPONENTS];
        let mut p = [0.0; MAX_COMPONENTS];
        for i in r {
            let ul = &u_low[i * nc..(i + 1) * nc];
            let b = &bounds[i * stride..(i + 1) * stride];
            for (nu, psi) in psi_low[..nf].iter_mut().enumerate() {
                *psi = functional(table, ul, b, nu, dim).unwrap_or(0.0);
            }
            for k in graph.row(i) {
                if graph.col(k) == i {
                    part[k - base] = 1.0;
                    continue;
                }
                correction(graph, i, tau, &a[k * nc..(k + 1) * nc], &mut p[..nc]);
                part[k - base] = limit_pair(table, ul, &p[..nc], b, &psi_low[..nf], dim);
            }
        }
    });
}

/// ℓ_ij ← min(ℓ_ij, ℓ_ji), written into `out`.
pub fn symmetrize(graph: &DiscreteGraph, l: &[f64], out: &mut [f64]) {
    let blocks = par::node_blocks(graph.n_nodes());
    let parts = par::split_entries(out, graph, &blocks, 1);
    par::for_each_block(&blocks, parts, |r, part| {
        let base = graph.row_ptr()[r.start];
        for i in r {
            for k in graph.row(i) {
                part[k - base] = l[k].min(l[graph.mirror(k)]);
            }
        }
    });
}

/// U_i = U_i^L + τ/m_i Σ_j ℓ_ij A_ij, which equals Σ_j ω_i(U_i^L + ℓ_ij P_ij).
///
/// Negative partial densities left by rounding are set to zero.
pub fn limited_update(
    graph: &DiscreteGraph,
    n_species: usize,
    nc: usize,
    tau: f64,
    u_low: &[f64],
    a: &[f64],
    l: &[f64],
    out: &mut [f64],
) {
    let blocks = par::node_blocks(graph.n_nodes());
    let parts = par::split_nodes(out, &blocks, nc);
    par::for_each_block(&blocks, parts, |r, part| {
        let start = r.start;
        for i in r {
            let o = &mut part[(i - start) * nc..(i - start + 1) * nc];
            let mut acc = [0.0; MAX_COMPONENTS];
            for k in graph.row(i) {
                if graph.col(k) == i {
                    continue;
                }
                let lk = l[k];
                for q in 0..nc {
                    acc[q] += lk * a[k * nc + q];
                }
            }
            let scale = tau / graph.lumped_mass(i);
            for q in 0..nc {
                o[q] = u_low[i * nc + q] + scale * acc[q];
            }
            for v in &mut o[..n_species] {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    });
}
