//! Provisional high-order update: consistent-mass correction, entropy
//! indicator and reduced graph viscosity.
//!
//! The indicator compares a discrete divergence of a surrogate entropy flux
//! with the entropy-weighted divergence of the surrogate flux, both built from
//! a single-gas model with γ equal to the stencil minimum.

use thiserror::Error;

use crate::loworder::{flux_dot, pair_back_flux, FieldState, Primitive, MAX_COMPONENTS};
use crate::mesh::DiscreteGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HighOrderError {
    #[error("surrogate entropy needs rho > 0 and e > 0 (rho = {rho}, rho*eps = {q})")]
    Inadmissible { rho: f64, q: f64 },
}

/// b_ij = δ_ij − m_ij/m_j for entry `k` of row `i`.
#[inline]
pub fn b_coeff(graph: &DiscreteGraph, i: usize, k: usize) -> f64 {
    let j = graph.col(k);
    let delta = if i == j { 1.0 } else { 0.0 };
    delta - graph.mass(k) / graph.lumped_mass(j)
}

/// Surrogate single-gas entropy η(w) = (ρ²e)^a − (ρ/ρ_i)(ρ_i²e_i)^a with
/// a = 1/(γ_min + 1), anchored at a reference mixture state `W_i`.
///
/// Mixture states are `w = (ρ, m, E)` with `m` of length `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateEntropy {
    pub gamma_min: f64,
    pub exponent: f64,
    pub rho_ref: f64,
    /// (ρ_i²e_i)^a.
    pub q_ref_pow: f64,
    /// (ρ_i²e_i)^a/ρ_i.
    pub k_ref: f64,
}

/// ρ²e = ρE − |m|²/2 of a mixture state.
#[inline]
pub fn surrogate_q(w: &[f64], dim: usize) -> f64 {
    let mut m2 = 0.0;
    for d in 0..dim {
        m2 += w[1 + d] * w[1 + d];
    }
    w[0] * w[1 + dim] - 0.5 * m2
}

impl SurrogateEntropy {
    pub fn new(gamma_min: f64, reference: &[f64], dim: usize) -> Result<Self, HighOrderError> {
        let rho = reference[0];
        let q = surrogate_q(reference, dim);
        if !(rho > 0.0 && q > 0.0) {
            return Err(HighOrderError::Inadmissible { rho, q });
        }
        let exponent = 1.0 / (gamma_min + 1.0);
        let q_ref_pow = q.powf(exponent);
        Ok(Self { gamma_min, exponent, rho_ref: rho, q_ref_pow, k_ref: q_ref_pow / rho })
    }

    /// η(w), written as (q^a − q_i^a) − (ρ − ρ_i)K_i so that it vanishes
    /// exactly at the reference state.
    pub fn eta(&self, w: &[f64], dim: usize) -> Result<f64, HighOrderError> {
        let q = surrogate_q(w, dim);
        if !(w[0] > 0.0 && q > 0.0) {
            return Err(HighOrderError::Inadmissible { rho: w[0], q });
        }
        Ok((q.powf(self.exponent) - self.q_ref_pow) - (w[0] - self.rho_ref) * self.k_ref)
    }

    /// ∇_w η = a q^{a−1} (E, −m, ρ) − (K_i, 0, 0).
    pub fn gradient(&self, w: &[f64], dim: usize) -> Result<Vec<f64>, HighOrderError> {
        let q = surrogate_q(w, dim);
        if !(w[0] > 0.0 && q > 0.0) {
            return Err(HighOrderError::Inadmissible { rho: w[0], q });
        }
        let s = self.exponent * q.powf(self.exponent - 1.0);
        let mut g = vec![0.0; dim + 2];
        g[0] = s * w[1 + dim] - self.k_ref;
        for d in 0..dim {
            g[1 + d] = -s * w[1 + d];
        }
        g[1 + dim] = s * w[0];
        Ok(g)
    }

    /// Surrogate pressure p̃ = (γ_min − 1)ε.
    pub fn pressure(&self, w: &[f64], dim: usize) -> f64 {
        (self.gamma_min - 1.0) * surrogate_q(w, dim) / w[0]
    }

    /// Surrogate flux f(w) as `dim` columns of length `dim + 2`.
    pub fn flux(&self, w: &[f64], dim: usize) -> Vec<Vec<f64>> {
        let p = self.pressure(w, dim);
        (0..dim)
            .map(|a| {
                let va = w[1 + a] / w[0];
                let mut col = vec![0.0; dim + 2];
                col[0] = w[1 + a];
                for d in 0..dim {
                    col[1 + d] = w[1 + d] * va;
                }
                col[1 + a] += p;
                col[1 + dim] = (w[1 + dim] + p) * va;
                col
            })
            .collect()
    }

    /// Entropy flux F(w) = v η(w).
    pub fn entropy_flux(&self, w: &[f64], dim: usize) -> Result<Vec<f64>, HighOrderError> {
        let eta = self.eta(w, dim)?;
        Ok((0..dim).map(|a| w[1 + a] / w[0] * eta).collect())
    }
}

/// Mixture state `(ρ, m, E)` of a conserved state.
pub fn mixture_state(u: &[f64], n_species: usize) -> Vec<f64> {
    let rho: f64 = u[..n_species].iter().sum();
    let mut w = Vec::with_capacity(u.len() - n_species + 1);
    w.push(rho);
    w.extend_from_slice(&u[n_species..]);
    w
}

/// Entropy indicator ζ_i ∈ [0, 1].
///
/// With η(W_i) = 0 the regularizing term of the denominator vanishes, and
/// Σ_j c_ij = 0 lets N_i be accumulated from differences to node `i`, which
/// makes ζ exactly zero on constant states. A vanishing denominator (a
/// stencil at rest) yields ζ = 0.
pub fn entropy_indicator(graph: &DiscreteGraph, field: &FieldState, prims: &[Primitive], i: usize) -> f64 {
    let ns = field.n_species();
    let dim = field.dim();
    let mut gamma_min = f64::INFINITY;
    for k in graph.row(i) {
        gamma_min = gamma_min.min(prims[graph.col(k)].gamma);
    }
    let a = 1.0 / (gamma_min + 1.0);
    let ui = field.node(i);
    let wi = &prims[i];
    let qi = wi.rho * wi.eps;
    let qi_pow = qi.powf(a);
    let k_ref = qi_pow / wi.rho;
    let slope = a * qi_pow / qi;
    // ∇η(W_i) = (slope·E_i − K_i, −slope·m_i, slope·ρ_i)
    let grad_rho = slope * ui[ns + dim] - k_ref;
    let mut grad_m = [0.0; 2];
    for d in 0..dim {
        grad_m[d] = -slope * ui[ns + d];
    }
    let grad_e = slope * wi.rho;
    let g_of = |u: &[f64], w: &Primitive, c: [f64; 2]| -> f64 {
        let vc = w.v[0] * c[0] + w.v[1] * c[1];
        let pt = (gamma_min - 1.0) * w.eps;
        let mut g = grad_rho * w.rho * vc + grad_e * (u[ns + dim] + pt) * vc;
        for d in 0..dim {
            g += grad_m[d] * (u[ns + d] * vc + pt * c[d]);
        }
        g
    };

    let mut entropy_div = 0.0;
    let mut numerator = 0.0;
    let mut abs_sum = 0.0;
    for k in graph.row(i) {
        let j = graph.col(k);
        if j == i {
            continue;
        }
        let uj = field.node(j);
        let wj = &prims[j];
        let c = graph.c(k);
        let qj = wj.rho * wj.eps;
        let eta_j = (qj.powf(a) - qi_pow) - (wj.rho - wi.rho) * k_ref;
        let fc = (wj.v[0] * c[0] + wj.v[1] * c[1]) * eta_j;
        let gj = g_of(uj, wj, c);
        let gi = g_of(ui, wi, c);
        entropy_div += fc;
        numerator += fc - (gj - gi);
        abs_sum += gj.abs();
    }
    let gii = {
        let c = graph.c(graph.diag(i));
        g_of(ui, wi, c).abs()
    };
    let denominator = entropy_div.abs() + abs_sum + gii;
    if denominator > 0.0 {
        (numerator.abs() / denominator).min(1.0)
    } else {
        0.0
    }
}

/// Fills ζ for every node.
pub fn compute_indicator(graph: &DiscreteGraph, field: &FieldState, prims: &[Primitive], zeta: &mut Vec<f64>) {
    zeta.resize(graph.n_nodes(), 0.0);
    let blocks = crate::par::node_blocks(graph.n_nodes());
    let parts = crate::par::split_nodes(zeta.as_mut_slice(), &blocks, 1);
    crate::par::for_each_block(&blocks, parts, |r, part| {
        let start = r.start;
        for i in r {
            part[i - start] = entropy_indicator(graph, field, prims, i);
        }
    });
}

/// High-order pair fluxes of row `i` in the antisymmetric form
/// −f(U_j)·c_ij + f(U_i)·c_ji + d^H_ij(U_j − U_i), and the row sum
/// F^H_i = Σ_j −(f(U_j) − f(U_i))·c_ij + d^H_ij(U_j − U_i).
///
/// The two differ only by −f(U_i)·Σ_j c_ji, which vanishes off the boundary.
#[allow(clippy::too_many_arguments)]
pub fn high_order_fluxes_node(
    graph: &DiscreteGraph,
    field: &FieldState,
    prims: &[Primitive],
    d: &[f64],
    zeta: &[f64],
    i: usize,
    flux: &mut [f64],
    row_sum: &mut [f64],
) {
    let ns = field.n_species();
    let dim = field.dim();
    let nc = field.n_components();
    let ui = field.node(i);
    let wi = &prims[i];
    let base = graph.row(i).start;
    let mut fi = [0.0; MAX_COMPONENTS];
    let mut fj = [0.0; MAX_COMPONENTS];
    row_sum[..nc].fill(0.0);
    for k in graph.row(i) {
        let j = graph.col(k);
        let out = &mut flux[(k - base) * nc..(k - base + 1) * nc];
        if j == i {
            out.fill(0.0);
            continue;
        }
        let uj = field.node(j);
        let c = graph.c(k);
        flux_dot(ui, wi, c, ns, dim, &mut fi);
        flux_dot(uj, &prims[j], c, ns, dim, &mut fj);
        let dh = 0.5 * (zeta[i] + zeta[j]) * d[k];
        let back = pair_back_flux(graph, ui, wi, k, &fi, ns, dim);
        for q in 0..nc {
            let du = uj[q] - ui[q];
            out[q] = -fj[q] + back[q] + dh * du;
            row_sum[q] += -(fj[q] - fi[q]) + dh * du;
        }
    }
}

/// Consistent-mass corrected pair terms H_ij = F^H_ij + b_ij F^H_j − b_ji F^H_i
/// for row `i`, added to `out` with weight `weight`.
pub fn add_corrected_pairs(
    graph: &DiscreteGraph,
    nc: usize,
    flux: &[f64],
    row_sums: &[f64],
    i: usize,
    weight: f64,
    out: &mut [f64],
) {
    let base = graph.row(i).start;
    let mi = graph.lumped_mass(i);
    let fi = &row_sums[i * nc..(i + 1) * nc];
    for k in graph.row(i) {
        let j = graph.col(k);
        if j == i {
            continue;
        }
        let mij = graph.mass(k);
        let bij = -mij / graph.lumped_mass(j);
        let bji = -mij / mi;
        let fj = &row_sums[j * nc..(j + 1) * nc];
        let fij = &flux[k * nc..(k + 1) * nc];
        let o = &mut out[(k - base) * nc..(k - base + 1) * nc];
        for q in 0..nc {
            o[q] += weight * (fij[q] + bij * fj[q] - bji * fi[q]);
        }
    }
}
