//! First-order invariant-domain preserving update: graph viscosity, bar
//! states, local bounds and the time-step restriction.

use thiserror::Error;

use crate::mesh::{normalize, DiscreteGraph};
use crate::par;
use crate::riemann::{lambda_hat, SideData};
use crate::thermo::SpeciesTable;

/// Largest number of conserved components handled by the stack buffers of
/// the node kernels.
pub const MAX_COMPONENTS: usize = 12;

/// Stack buffer for one conserved state.
pub type Comp = [f64; MAX_COMPONENTS];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowOrderError {
    #[error("node {node}: inadmissible state ({reason})")]
    Inadmissible { node: usize, reason: &'static str },
    #[error("time step {tau} violates the CFL limit {limit}")]
    Cfl { tau: f64, limit: f64 },
    #[error("{0} conserved components exceed the supported maximum of {MAX_COMPONENTS}")]
    TooManyComponents(usize),
    #[error("field has {got} nodes but the graph has {expected}")]
    NodeCount { expected: usize, got: usize },
}

/// Conserved states of all nodes at one time level, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    n_species: usize,
    dim: usize,
    data: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    pub fn zeros(n_species: usize, dim: usize, n_nodes: usize) -> Self {
        Self { n_species, dim, data: vec![0.0; (n_species + dim + 1) * n_nodes], time: 0.0 }
    }

    pub fn from_data(n_species: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len() % (n_species + dim + 1), 0);
        Self { n_species, dim, data, time: 0.0 }
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.n_species + self.dim + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.data.len() / self.n_components()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        let nc = self.n_components();
        &self.data[i * nc..(i + 1) * nc]
    }

    #[inline]
    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        let nc = self.n_components();
        &mut self.data[i * nc..(i + 1) * nc]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Σ_i m_i U_i per component, summed in node order.
    pub fn totals(&self, graph: &DiscreteGraph) -> Vec<f64> {
        let nc = self.n_components();
        let mut out = vec![0.0; nc];
        for i in 0..self.n_nodes() {
            let m = graph.lumped_mass(i);
            for (o, u) in out.iter_mut().zip(self.node(i)) {
                *o += m * u;
            }
        }
        out
    }
}

/// Mixture quantities of one node, evaluated once per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub v: [f64; 2],
    pub p: f64,
    pub gamma: f64,
    /// Internal energy density ε.
    pub eps: f64,
    /// Entropy density σ = ρs.
    pub sigma: f64,
    /// Specific entropy s.
    pub s: f64,
    /// ρ c_v(Y).
    pub rho_cv: f64,
}

impl Primitive {
    pub fn from_state(table: &SpeciesTable, u: &[f64], dim: usize) -> Option<Self> {
        let m = table.mixture_unchecked(u, dim);
        if !(m.rho > 0.0 && m.internal_energy > 0.0) || !m.internal_energy.is_finite() {
            return None;
        }
        let sigma = table.entropy_density_unchecked(u, dim, &m);
        Some(Self {
            rho: m.rho,
            v: [m.velocity[0], m.velocity[1]],
            p: m.pressure,
            gamma: m.gamma,
            eps: m.internal_energy,
            sigma,
            s: sigma / m.rho,
            rho_cv: m.rho_cv,
        })
    }

    #[inline]
    pub fn sound_speed(&self) -> f64 {
        (self.gamma * self.p / self.rho).sqrt()
    }

    #[inline]
    fn side(&self, n: [f64; 2]) -> SideData {
        SideData::new_unchecked(self.rho, self.v[0] * n[0] + self.v[1] * n[1], self.p, self.gamma)
    }
}

/// Evaluates [`Primitive`] for every node.
pub fn compute_primitives(
    table: &SpeciesTable,
    field: &FieldState,
    out: &mut Vec<Primitive>,
) -> Result<(), LowOrderError> {
    let n = field.n_nodes();
    let dim = field.dim();
    out.resize(n, Primitive::default());
    let blocks = par::node_blocks(n);
    let parts = par::split_nodes(out.as_mut_slice(), &blocks, 1);
    par::for_each_block(&blocks, parts, |r, part| {
        let start = r.start;
        for i in r {
            part[i - start] = Primitive::from_state(table, field.node(i), dim).unwrap_or(Primitive {
                rho: f64::NAN,
                ..Primitive::default()
            });
        }
    });
    if let Some(i) = out.iter().position(|p| p.rho.is_nan()) {
        let u = field.node(i);
        let ns = field.n_species();
        let rho: f64 = u[..ns].iter().map(|a| a.max(0.0)).sum();
        let reason = if !(rho > 0.0) { "nonpositive density" } else { "nonpositive internal energy" };
        return Err(LowOrderError::Inadmissible { node: i, reason });
    }
    Ok(())
}

/// Writes f(U)·c into `out`, using the cached mixture quantities of `U`.
#[inline]
pub fn flux_dot(u: &[f64], w: &Primitive, c: [f64; 2], n_species: usize, dim: usize, out: &mut [f64]) {
    let vc = w.v[0] * c[0] + w.v[1] * c[1];
    for k in 0..n_species + dim {
        out[k] = u[k] * vc;
    }
    for d in 0..dim {
        out[n_species + d] += w.p * c[d];
    }
    out[n_species + dim] = (u[n_species + dim] + w.p) * vc;
}

/// λ̂ for the ordered pair along the unit vector `n`.
#[inline]
pub fn pair_lambda(wi: &Primitive, wj: &Primitive, n: [f64; 2]) -> f64 {
    lambda_hat(&wi.side(n), &wj.side(n))
}

/// d_ij for the off-diagonal entry `k` of row `i`.
pub fn d_low(graph: &DiscreteGraph, prims: &[Primitive], i: usize, k: usize) -> f64 {
    let j = graph.col(k);
    let back = graph.mirror(k);
    let cij = graph.c(k);
    let cji = graph.c(back);
    let forward = normalize(cij).map_or(0.0, |(norm, n)| pair_lambda(&prims[i], &prims[j], n) * norm);
    if cji[0] == -cij[0] && cji[1] == -cij[1] {
        // interior pair: the mirrored problem is the same problem
        return forward;
    }
    let backward = normalize(cji).map_or(0.0, |(norm, n)| pair_lambda(&prims[j], &prims[i], n) * norm);
    forward.max(backward)
}

/// Fills the graph viscosity for every entry; diagonal entries receive
/// d_ii = −Σ_{j≠i} d_ij.
pub fn compute_viscosity(graph: &DiscreteGraph, prims: &[Primitive], d: &mut Vec<f64>) {
    d.resize(graph.n_entries(), 0.0);
    let blocks = par::node_blocks(graph.n_nodes());
    let parts = par::split_entries(d.as_mut_slice(), graph, &blocks, 1);
    par::for_each_block(&blocks, parts, |r, part| {
        let base = graph.row_ptr()[r.start];
        for i in r {
            for k in graph.row(i) {
                let j = graph.col(k);
                part[k - base] = if j > i { d_low(graph, prims, i, k) } else { 0.0 };
            }
        }
    });
    for i in 0..graph.n_nodes() {
        let mut sum = 0.0;
        for k in graph.row(i) {
            let j = graph.col(k);
            if j < i {
                d[k] = d[graph.mirror(k)];
            }
            if j != i {
                sum += d[k];
            }
        }
        d[graph.diag(i)] = -sum;
    }
}

/// Ū_ij = ½(U_i + U_j) − (f(U_j) − f(U_i))·c_ij/(2d_ij).
pub fn bar_state(
    ui: &[f64],
    uj: &[f64],
    wi: &Primitive,
    wj: &Primitive,
    c: [f64; 2],
    d: f64,
    n_species: usize,
    dim: usize,
    out: &mut [f64],
) {
    let nc = n_species + dim + 1;
    let mut fi = [0.0; MAX_COMPONENTS];
    let mut fj = [0.0; MAX_COMPONENTS];
    flux_dot(ui, wi, c, n_species, dim, &mut fi);
    flux_dot(uj, wj, c, n_species, dim, &mut fj);
    let scale = 0.5 / d;
    for q in 0..nc {
        out[q] = 0.5 * (ui[q] + uj[q]) - scale * (fj[q] - fi[q]);
    }
}

/// Internal energy density of a conserved state.
#[inline]
pub fn internal_energy(u: &[f64], n_species: usize, dim: usize) -> f64 {
    let rho: f64 = u[..n_species].iter().sum();
    let mut kinetic = 0.0;
    for d in 0..dim {
        kinetic += u[n_species + d] * u[n_species + d];
    }
    u[n_species + dim] - 0.5 * kinetic / rho
}

/// Number of values per node in a bounds buffer: partial-density minima and
/// maxima, the internal-energy minimum and the specific-entropy minimum.
pub fn bounds_stride(n_species: usize) -> usize {
    2 * n_species + 2
}

/// Per-node local bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBounds {
    pub partial_min: Vec<f64>,
    pub partial_max: Vec<f64>,
    pub eps_min: f64,
    /// Minimum of the specific entropy over the stencil.
    pub s_min: f64,
}

impl LocalBounds {
    pub fn from_slice(b: &[f64], n_species: usize) -> Self {
        Self {
            partial_min: b[..n_species].to_vec(),
            partial_max: b[n_species..2 * n_species].to_vec(),
            eps_min: b[2 * n_species],
            s_min: b[2 * n_species + 1],
        }
    }

    pub fn write(&self, out: &mut [f64]) {
        let ns = self.partial_min.len();
        out[..ns].copy_from_slice(&self.partial_min);
        out[ns..2 * ns].copy_from_slice(&self.partial_max);
        out[2 * ns] = self.eps_min;
        out[2 * ns + 1] = self.s_min;
    }
}

/// Low-order forward Euler update and local bounds of node `i`.
///
/// `flux_low` receives the pair fluxes of the row in the antisymmetric form
/// −f(U_j)·c_ij + f(U_i)·c_ji + d_ij(U_j − U_i) (zero on the diagonal); the
/// update itself uses the equivalent −(f(U_j) − f(U_i))·c_ij row sum.
/// `bounds` receives [`bounds_stride`] values.
#[allow(clippy::too_many_arguments)]
pub fn low_order_node(
    graph: &DiscreteGraph,
    field: &FieldState,
    prims: &[Primitive],
    d: &[f64],
    tau: f64,
    i: usize,
    u_low: &mut [f64],
    flux_low: &mut [f64],
    bounds: &mut [f64],
) {
    let ns = field.n_species();
    let dim = field.dim();
    let nc = field.n_components();
    let ui = field.node(i);
    let wi = &prims[i];
    let mut acc = [0.0; MAX_COMPONENTS];
    let mut fi = [0.0; MAX_COMPONENTS];
    let mut fj = [0.0; MAX_COMPONENTS];
    let (pmin, rest) = bounds.split_at_mut(ns);
    let (pmax, rest) = rest.split_at_mut(ns);
    pmin.copy_from_slice(&ui[..ns]);
    pmax.copy_from_slice(&ui[..ns]);
    let mut eps_min = wi.eps;
    let mut s_min = wi.s;
    let base = graph.row(i).start;
    for k in graph.row(i) {
        let j = graph.col(k);
        let fl = &mut flux_low[(k - base) * nc..(k - base + 1) * nc];
        if j == i {
            fl.fill(0.0);
            continue;
        }
        let uj = field.node(j);
        let wj = &prims[j];
        let c = graph.c(k);
        let dij = d[k];
        flux_dot(ui, wi, c, ns, dim, &mut fi);
        flux_dot(uj, wj, c, ns, dim, &mut fj);
        let half_inv_d = 0.5 / dij;
        let mut bar = [0.0; MAX_COMPONENTS];
        let back = pair_back_flux(graph, ui, wi, k, &fi, ns, dim);
        for q in 0..nc {
            let df = fj[q] - fi[q];
            let du = uj[q] - ui[q];
            acc[q] += -df + dij * du;
            fl[q] = -fj[q] + back[q] + dij * du;
            bar[q] = 0.5 * (ui[q] + uj[q]) - half_inv_d * df;
        }
        for s in 0..ns {
            let lo = bar[s].min(uj[s]);
            let hi = bar[s].max(uj[s]);
            if lo < pmin[s] {
                pmin[s] = lo;
            }
            if hi > pmax[s] {
                pmax[s] = hi;
            }
        }
        let eps_bar = internal_energy(&bar, ns, dim);
        eps_min = eps_min.min(eps_bar).min(wj.eps);
        s_min = s_min.min(wj.s);
    }
    rest[0] = eps_min;
    rest[1] = s_min;
    let scale = tau / graph.lumped_mass(i);
    for q in 0..nc {
        u_low[q] = ui[q] + scale * acc[q];
    }
}

/// f(U_i)·c_ji for entry `k` of row `i`, given `fi` = f(U_i)·c_ij.
#[inline]
pub fn pair_back_flux(
    graph: &DiscreteGraph,
    ui: &[f64],
    wi: &Primitive,
    k: usize,
    fi: &[f64],
    n_species: usize,
    dim: usize,
) -> Comp {
    let c = graph.c(k);
    let back = graph.c(graph.mirror(k));
    let mut out = [0.0; MAX_COMPONENTS];
    if back[0] == -c[0] && back[1] == -c[1] {
        for q in 0..n_species + dim + 1 {
            out[q] = -fi[q];
        }
    } else {
        flux_dot(ui, wi, back, n_species, dim, &mut out);
    }
    out
}

/// Bounds of node `i` as a [`LocalBounds`] value.
pub fn local_bounds(
    graph: &DiscreteGraph,
    field: &FieldState,
    prims: &[Primitive],
    d: &[f64],
    i: usize,
) -> LocalBounds {
    let ns = field.n_species();
    let nc = field.n_components();
    let mut u_low = vec![0.0; nc];
    let mut flux = vec![0.0; nc * graph.row(i).len()];
    let mut b = vec![0.0; bounds_stride(ns)];
    low_order_node(graph, field, prims, d, 0.0, i, &mut u_low, &mut flux, &mut b);
    LocalBounds::from_slice(&b, ns)
}

/// Largest step with 1 + 2τ d_ii/m_i ≥ 0 at every node.
pub fn cfl_limit(graph: &DiscreteGraph, d: &[f64]) -> f64 {
    (0..graph.n_nodes())
        .map(|i| graph.lumped_mass(i) / (2.0 * d[graph.diag(i)].abs()))
        .fold(f64::INFINITY, f64::min)
}

/// τ_n = CFL · min_i m_i/(2|d_ii|).
pub fn max_dt(graph: &DiscreteGraph, d: &[f64], cfl: f64) -> f64 {
    cfl * cfl_limit(graph, d)
}

/// Complete low-order step; returns the new field and the viscosity used.
pub fn low_order_step(
    graph: &DiscreteGraph,
    table: &SpeciesTable,
    field: &FieldState,
    tau: f64,
) -> Result<FieldState, LowOrderError> {
    check_layout(graph, field)?;
    let mut prims = Vec::new();
    compute_primitives(table, field, &mut prims)?;
    let mut d = Vec::new();
    compute_viscosity(graph, &prims, &mut d);
    let limit = cfl_limit(graph, &d);
    if tau > limit {
        return Err(LowOrderError::Cfl { tau, limit });
    }
    let nc = field.n_components();
    let mut out = field.clone();
    let stride = bounds_stride(field.n_species());
    let mut bounds = vec![0.0; stride];
    for i in 0..graph.n_nodes() {
        let mut flux = vec![0.0; nc * graph.row(i).len()];
        let mut u = vec![0.0; nc];
        low_order_node(graph, field, &prims, &d, tau, i, &mut u, &mut flux, &mut bounds);
        out.node_mut(i).copy_from_slice(&u);
    }
    out.time = field.time + tau;
    Ok(out)
}

pub(crate) fn check_layout(graph: &DiscreteGraph, field: &FieldState) -> Result<(), LowOrderError> {
    if field.n_components() > MAX_COMPONENTS {
        return Err(LowOrderError::TooManyComponents(field.n_components()));
    }
    if field.n_nodes() != graph.n_nodes() {
        return Err(LowOrderError::NodeCount { expected: graph.n_nodes(), got: field.n_nodes() });
    }
    Ok(())
}
