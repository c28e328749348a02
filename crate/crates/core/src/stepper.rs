//! Time integration with per-stage convex limiting, CFL control and boundary
//! conditions.
//!
//! The default integrator is the three-stage, third-order explicit scheme
//! with stage times 0, 1/3, 2/3 written in incremental form: every stage is a
//! forward Euler step of size τ_n from the previous stage state whose
//! high-order target combines the high-order residuals of all earlier stages.
//! A full step advances τ = 3τ_n with τ_n taken from the first stage.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::highorder::{add_corrected_pairs, compute_indicator, high_order_fluxes_node};
use crate::limiter::{compute_limiter, limited_update, omega, relax_bounds, symmetrize};
use crate::loworder::{
    bounds_stride, cfl_limit, check_layout, compute_primitives, compute_viscosity, flux_dot, internal_energy,
    low_order_node, FieldState, LowOrderError, Primitive,
};
use crate::mesh::{DiscreteGraph, Side};
use crate::par;
use crate::thermo::SpeciesTable;

#[derive(Debug, Error)]
pub enum StepperError {
    #[error(transparent)]
    LowOrder(#[from] LowOrderError),
    #[error("no admissible step after {retries} CFL retries at t = {time}")]
    CflRetries { retries: usize, time: f64 },
    #[error("side {0:?} uses Dirichlet data but none was supplied")]
    MissingDirichletData(Side),
    #[error("non-finite value at node {node} after step {step}")]
    NonFinite { node: usize, step: usize },
    #[error("cfl must lie in (0, 1], got {0}")]
    InvalidCfl(f64),
    #[error("final time {t_final} lies before the current time {time}")]
    InvalidFinalTime { t_final: f64, time: f64 },
}

/// Spatial update used in every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Graph-viscosity update only.
    Low,
    /// Unlimited high-order update.
    High,
    /// High-order update limited onto the low-order bounds.
    #[default]
    Limited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Three-stage third-order scheme in incremental form, τ = 3τ_n.
    #[default]
    Erk33,
    /// Shu–Osher strong-stability-preserving RK3, τ = τ_n.
    SspRk3,
    ForwardEuler,
}

impl Integrator {
    /// Forward Euler sub-steps of size τ_n per full step.
    pub fn steps_per_tau(self) -> usize {
        match self {
            Integrator::Erk33 => 3,
            Integrator::SspRk3 | Integrator::ForwardEuler => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub cfl: f64,
    pub scheme: Scheme,
    pub relax: bool,
    pub integrator: Integrator,
    /// Record bound and admissibility diagnostics after every stage.
    pub check_bounds: bool,
    pub max_retries: usize,
    /// Replaces every computed limiter value by this constant and disables
    /// clipping of partial densities. Used to verify that ℓ ≡ 0 and ℓ ≡ 1
    /// reproduce the low- and high-order updates.
    pub fixed_limiter: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            scheme: Scheme::Limited,
            relax: true,
            integrator: Integrator::Erk33,
            check_bounds: false,
            max_retries: 10,
            fixed_limiter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Nodes are reset to prescribed data after every stage.
    Dirichlet,
    /// The normal momentum is removed after every stage; E is kept.
    Slip,
    /// No modification.
    #[default]
    Free,
}

/// Prescribed boundary data: fills the conserved state at a point and time.
pub type DirichletFn = Arc<dyn Fn([f64; 2], f64, &mut [f64]) + Send + Sync>;

#[derive(Clone, Default)]
pub struct BoundaryConditions {
    kinds: [BoundaryKind; 4],
    dirichlet: Option<DirichletFn>,
}

impl std::fmt::Debug for BoundaryConditions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryConditions")
            .field("kinds", &self.kinds)
            .field("dirichlet", &self.dirichlet.is_some())
            .finish()
    }
}

impl BoundaryConditions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, side: Side, kind: BoundaryKind) -> Self {
        self.kinds[side as usize] = kind;
        self
    }

    pub fn with_dirichlet_data(mut self, data: DirichletFn) -> Self {
        self.dirichlet = Some(data);
        self
    }

    pub fn kind(&self, side: Side) -> BoundaryKind {
        self.kinds[side as usize]
    }

    fn validate(&self) -> Result<(), StepperError> {
        for side in Side::ALL {
            if self.kind(side) == BoundaryKind::Dirichlet && self.dirichlet.is_none() {
                return Err(StepperError::MissingDirichletData(side));
            }
        }
        Ok(())
    }

    /// True if node `i` is overwritten by Dirichlet data.
    pub fn is_dirichlet(&self, graph: &DiscreteGraph, i: usize) -> bool {
        let b = graph.boundary(i);
        b != 0 && Side::ALL.iter().any(|s| b & s.bit() != 0 && self.kind(*s) == BoundaryKind::Dirichlet)
    }

    /// Applies slip projections, then Dirichlet resets, at time `t`.
    pub fn apply(&self, graph: &DiscreteGraph, field: &mut FieldState, t: f64) {
        let ns = field.n_species();
        let dim = field.dim();
        for i in 0..graph.n_nodes() {
            let b = graph.boundary(i);
            if b == 0 {
                continue;
            }
            let mut dirichlet = false;
            for side in Side::ALL {
                if b & side.bit() == 0 {
                    continue;
                }
                match self.kind(side) {
                    BoundaryKind::Slip => {
                        let u = field.node_mut(i);
                        let n = side.normal();
                        let mn: f64 = (0..dim).map(|d| u[ns + d] * n[d]).sum();
                        for d in 0..dim {
                            u[ns + d] -= mn * n[d];
                        }
                    }
                    BoundaryKind::Dirichlet => dirichlet = true,
                    BoundaryKind::Free => {}
                }
            }
            if dirichlet {
                if let Some(data) = &self.dirichlet {
                    let x = graph.coords()[i];
                    data(x, t, field.node_mut(i));
                }
            }
        }
    }
}

/// Bound and admissibility extremes over the stages checked so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdpSummary {
    pub stages: usize,
    pub min_partial_density: f64,
    pub min_internal_energy: f64,
    /// Largest (s_min − s)/c_v against the unrelaxed bound.
    pub max_entropy_deficit: f64,
    /// Largest (s_relax − s)/c_v against the bound used by the limiter.
    pub max_relaxed_entropy_deficit: f64,
    /// Largest violation of the partial-density and internal-energy bounds
    /// used by the limiter, relative to the bound scale.
    pub max_bound_violation: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub non_finite: usize,
}

impl Default for IdpSummary {
    fn default() -> Self {
        Self {
            stages: 0,
            min_partial_density: f64::INFINITY,
            min_internal_energy: f64::INFINITY,
            max_entropy_deficit: f64::NEG_INFINITY,
            max_relaxed_entropy_deficit: f64::NEG_INFINITY,
            max_bound_violation: f64::NEG_INFINITY,
            zeta_min: f64::INFINITY,
            zeta_max: f64::NEG_INFINITY,
            non_finite: 0,
        }
    }
}

impl IdpSummary {
    fn merge(&mut self, o: &IdpSummary) {
        self.stages += o.stages;
        self.min_partial_density = self.min_partial_density.min(o.min_partial_density);
        self.min_internal_energy = self.min_internal_energy.min(o.min_internal_energy);
        self.max_entropy_deficit = self.max_entropy_deficit.max(o.max_entropy_deficit);
        self.max_relaxed_entropy_deficit = self.max_relaxed_entropy_deficit.max(o.max_relaxed_entropy_deficit);
        self.max_bound_violation = self.max_bound_violation.max(o.max_bound_violation);
        self.zeta_min = self.zeta_min.min(o.zeta_min);
        self.zeta_max = self.zeta_max.max(o.zeta_max);
        self.non_finite += o.non_finite;
    }
}

/// Simulation state with its bookkeeping.
#[derive(Debug, Clone)]
pub struct RunState {
    pub field: FieldState,
    pub step: usize,
    pub dt_history: Vec<f64>,
    /// Σ_i m_i U_i per component at the start of the run.
    pub initial_totals: Vec<f64>,
    pub totals: Vec<f64>,
    /// Σ_i m_i |U_i| per component at the start, used to scale drifts.
    pub total_scale: Vec<f64>,
    pub idp: IdpSummary,
}

impl RunState {
    pub fn new(graph: &DiscreteGraph, field: FieldState) -> Self {
        let totals = field.totals(graph);
        let nc = field.n_components();
        let mut scale = vec![0.0; nc];
        for i in 0..field.n_nodes() {
            for (s, u) in scale.iter_mut().zip(field.node(i)) {
                *s += graph.lumped_mass(i) * u.abs();
            }
        }
        Self {
            field,
            step: 0,
            dt_history: Vec::new(),
            initial_totals: totals.clone(),
            totals,
            total_scale: scale,
            idp: IdpSummary::default(),
        }
    }

    pub fn time(&self) -> f64 {
        self.field.time
    }

    /// |Σm_iU_i − initial|/Σm_i|U_i^0| per component.
    pub fn conservation_drift(&self) -> Vec<f64> {
        self.totals
            .iter()
            .zip(&self.initial_totals)
            .zip(&self.total_scale)
            .map(|((t, i), s)| if *s > 0.0 { (t - i).abs() / s } else { (t - i).abs() })
            .collect()
    }
}

#[derive(Debug, Default)]
struct Workspace {
    prims: Vec<Primitive>,
    d: Vec<f64>,
    u_low: Vec<f64>,
    flux_low: Vec<f64>,
    bounds: Vec<f64>,
    bounds_strict: Vec<f64>,
    zeta: Vec<f64>,
    flux_high: Vec<f64>,
    flux_high_sum: Vec<f64>,
    h: [Vec<f64>; 3],
    /// −f(U_i)·β_i of boundary nodes per history slot.
    boundary_flux: [Vec<f64>; 3],
    a: Vec<f64>,
    l: Vec<f64>,
    l_sym: Vec<f64>,
}

enum StageOutcome {
    Done(FieldState, IdpSummary),
    Cfl,
}

pub struct Solver {
    graph: DiscreteGraph,
    table: SpeciesTable,
    options: SolverOptions,
    bc: BoundaryConditions,
    /// Boundary nodes with β_i = Σ_j c_ji.
    column_sums: Vec<(usize, [f64; 2])>,
    ws: Workspace,
}

impl Solver {
    pub fn new(
        graph: DiscreteGraph,
        table: SpeciesTable,
        options: SolverOptions,
        bc: BoundaryConditions,
    ) -> Result<Self, StepperError> {
        if !(options.cfl > 0.0 && options.cfl <= 1.0) {
            return Err(StepperError::InvalidCfl(options.cfl));
        }
        bc.validate()?;
        let column_sums = (0..graph.n_nodes())
            .filter(|&i| graph.boundary(i) != 0)
            .map(|i| {
                let mut beta = [0.0; 2];
                for k in graph.row(i) {
                    let c = graph.c(graph.mirror(k));
                    beta[0] += c[0];
                    beta[1] += c[1];
                }
                (i, beta)
            })
            .collect();
        Ok(Self { graph, table, options, bc, column_sums, ws: Workspace::default() })
    }

    pub fn graph(&self) -> &DiscreteGraph {
        &self.graph
    }

    pub fn table(&self) -> &SpeciesTable {
        &self.table
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    /// Entropy indicator of `field`.
    pub fn indicator(&mut self, field: &FieldState) -> Result<Vec<f64>, StepperError> {
        compute_primitives(&self.table, field, &mut self.ws.prims)?;
        let mut zeta = Vec::new();
        compute_indicator(&self.graph, field, &self.ws.prims, &mut zeta);
        Ok(zeta)
    }

    /// Largest stable τ_n for `field`: CFL · min_i m_i/(2|d_ii|).
    pub fn stable_dt(&mut self, field: &FieldState) -> Result<f64, StepperError> {
        compute_primitives(&self.table, field, &mut self.ws.prims)?;
        compute_viscosity(&self.graph, &self.ws.prims, &mut self.ws.d);
        Ok(self.options.cfl * cfl_limit(&self.graph, &self.ws.d))
    }

    /// One forward Euler stage of size `tau` from `start`.
    ///
    /// The high-order residual of `start` is stored in history slot `slot`;
    /// the high-order target uses Σ_s weights[s]·H^s over slots 0..weights.len().
    fn stage(
        &mut self,
        start: &FieldState,
        tau: f64,
        slot: usize,
        weights: &[f64],
    ) -> Result<StageOutcome, StepperError> {
        let graph = &self.graph;
        let table = &self.table;
        let opts = self.options;
        let ws = &mut self.ws;
        let n = graph.n_nodes();
        let ne = graph.n_entries();
        let ns = start.n_species();
        let dim = start.dim();
        let nc = start.n_components();
        let stride = bounds_stride(ns);

        compute_primitives(table, start, &mut ws.prims)?;
        compute_viscosity(graph, &ws.prims, &mut ws.d);
        if tau > cfl_limit(graph, &ws.d) {
            return Ok(StageOutcome::Cfl);
        }

        ws.u_low.resize(n * nc, 0.0);
        ws.flux_low.resize(ne * nc, 0.0);
        ws.bounds.resize(n * stride, 0.0);
        let blocks = par::node_blocks(n);
        {
            let prims = &ws.prims;
            let d = &ws.d;
            let ul = par::split_nodes(&mut ws.u_low, &blocks, nc);
            let fl = par::split_entries(&mut ws.flux_low, graph, &blocks, nc);
            let bd = par::split_nodes(&mut ws.bounds, &blocks, stride);
            par::for_each_block3(&blocks, ul, fl, bd, |r, ul, fl, bd| {
                let start_node = r.start;
                let base = graph.row_ptr()[r.start];
                for i in r {
                    let row = graph.row(i);
                    let li = i - start_node;
                    low_order_node(
                        graph,
                        start,
                        prims,
                        d,
                        tau,
                        i,
                        &mut ul[li * nc..(li + 1) * nc],
                        &mut fl[(row.start - base) * nc..(row.end - base) * nc],
                        &mut bd[li * stride..(li + 1) * stride],
                    );
                }
            });
        }

        let mut summary = IdpSummary { stages: 1, ..IdpSummary::default() };
        let mut out = start.clone();
        out.time = start.time + tau;
        if opts.scheme == Scheme::Low {
            out.as_mut_slice().copy_from_slice(&ws.u_low);
            if opts.check_bounds {
                ws.bounds_strict.clone_from(&ws.bounds);
                check_stage(graph, table, &out, &ws.bounds_strict, &ws.bounds, &mut summary);
            }
            return Ok(StageOutcome::Done(out, summary));
        }

        compute_indicator(graph, start, &ws.prims, &mut ws.zeta);
        for z in &ws.zeta {
            summary.zeta_min = summary.zeta_min.min(*z);
            summary.zeta_max = summary.zeta_max.max(*z);
        }
        ws.flux_high.resize(ne * nc, 0.0);
        ws.flux_high_sum.resize(n * nc, 0.0);
        {
            let prims = &ws.prims;
            let d = &ws.d;
            let zeta = &ws.zeta;
            let fh = par::split_entries(&mut ws.flux_high, graph, &blocks, nc);
            let fs = par::split_nodes(&mut ws.flux_high_sum, &blocks, nc);
            par::for_each_block2(&blocks, fh, fs, |r, fh, fs| {
                let start_node = r.start;
                let base = graph.row_ptr()[r.start];
                for i in r {
                    let row = graph.row(i);
                    let li = i - start_node;
                    high_order_fluxes_node(
                        graph,
                        start,
                        prims,
                        d,
                        zeta,
                        i,
                        &mut fh[(row.start - base) * nc..(row.end - base) * nc],
                        &mut fs[li * nc..(li + 1) * nc],
                    );
                }
            });
        }
        {
            let fh = &ws.flux_high;
            let fs = &ws.flux_high_sum;
            let h = &mut ws.h[slot];
            h.clear();
            h.resize(ne * nc, 0.0);
            let parts = par::split_entries(h, graph, &blocks, nc);
            par::for_each_block(&blocks, parts, |r, part| {
                let base = graph.row_ptr()[r.start];
                for i in r {
                    let row = graph.row(i);
                    add_corrected_pairs(graph, nc, fh, fs, i, 1.0, &mut part[(row.start - base) * nc..]);
                }
            });
        }

        ws.a.resize(ne * nc, 0.0);
        for (k, a) in ws.a.iter_mut().enumerate() {
            let mut v = -ws.flux_low[k];
            for (s, w) in weights.iter().enumerate() {
                v += w * ws.h[s][k];
            }
            *a = v;
        }

        // The antisymmetric pair form drops −f(U_i)·β_i at boundary nodes.
        // Its stage combination minus the low-order term is spread evenly
        // over the pairs of the node.
        let bf = &mut ws.boundary_flux[slot];
        bf.resize(n * nc, 0.0);
        let mut f = [0.0; crate::loworder::MAX_COMPONENTS];
        for &(i, beta) in &self.column_sums {
            flux_dot(start.node(i), &ws.prims[i], beta, ns, dim, &mut f);
            for q in 0..nc {
                bf[i * nc + q] = -f[q];
            }
        }
        for &(i, _) in &self.column_sums {
            let mut r = [0.0; crate::loworder::MAX_COMPONENTS];
            for q in 0..nc {
                let mut v = -ws.boundary_flux[slot][i * nc + q];
                for (s, w) in weights.iter().enumerate() {
                    v += w * ws.boundary_flux[s][i * nc + q];
                }
                r[q] = v;
            }
            if r[..nc].iter().all(|v| *v == 0.0) {
                continue;
            }
            let share = omega(graph, i);
            for k in graph.row(i) {
                if graph.col(k) == i {
                    continue;
                }
                for q in 0..nc {
                    ws.a[k * nc + q] += share * r[q];
                }
            }
        }

        if opts.scheme == Scheme::High {
            ws.l_sym.clear();
            ws.l_sym.resize(ne, 1.0);
            // zero species count: no clipping of the unlimited update
            limited_update(graph, 0, nc, tau, &ws.u_low, &ws.a, &ws.l_sym, out.as_mut_slice());
            return Ok(StageOutcome::Done(out, summary));
        }

        if opts.check_bounds {
            ws.bounds_strict.clone_from(&ws.bounds);
        }
        if opts.relax {
            relax_bounds(graph, table, start, &ws.prims, &mut ws.bounds);
        }
        ws.l.resize(ne, 0.0);
        ws.l_sym.resize(ne, 0.0);
        // rounding-level clipping of partial densities only applies to
        // computed limiter values
        let clipped = if let Some(v) = opts.fixed_limiter {
            ws.l_sym.fill(v);
            0
        } else {
            compute_limiter(graph, table, dim, tau, &ws.u_low, &ws.bounds, &ws.a, &mut ws.l);
            symmetrize(graph, &ws.l, &mut ws.l_sym);
            ns
        };
        limited_update(graph, clipped, nc, tau, &ws.u_low, &ws.a, &ws.l_sym, out.as_mut_slice());
        if opts.check_bounds {
            check_stage(graph, table, &out, &ws.bounds_strict, &ws.bounds, &mut summary);
        }
        Ok(StageOutcome::Done(out, summary))
    }

    /// Advances one full step of size at most `t_final − t`.
    ///
    /// Returns the step size taken.
    pub fn step(&mut self, state: &mut RunState, t_final: f64) -> Result<f64, StepperError> {
        check_layout(&self.graph, &state.field)?;
        let t0 = state.field.time;
        if t_final < t0 {
            return Err(StepperError::InvalidFinalTime { t_final, time: t0 });
        }
        let sub = self.options.integrator.steps_per_tau() as f64;
        let mut tau_n = self.stable_dt(&state.field)?;
        if t0 + sub * tau_n >= t_final {
            tau_n = (t_final - t0) / sub;
        }
        for _ in 0..=self.options.max_retries {
            match self.try_step(&state.field, tau_n)? {
                Some((mut field, summary)) => {
                    let dt = sub * tau_n;
                    field.time = if t0 + dt >= t_final { t_final } else { t0 + dt };
                    let t1 = field.time;
                    self.bc.apply(&self.graph, &mut field, t1);
                    let nc = field.n_components();
                    if let Some(k) = field.as_slice().iter().position(|v| !v.is_finite()) {
                        return Err(StepperError::NonFinite { node: k / nc, step: state.step + 1 });
                    }
                    state.field = field;
                    state.step += 1;
                    state.dt_history.push(dt);
                    state.totals = state.field.totals(&self.graph);
                    state.idp.merge(&summary);
                    return Ok(dt);
                }
                None => tau_n *= 0.5,
            }
        }
        Err(StepperError::CflRetries { retries: self.options.max_retries, time: t0 })
    }

    fn try_step(&mut self, u0: &FieldState, tau: f64) -> Result<Option<(FieldState, IdpSummary)>, StepperError> {
        let mut summary = IdpSummary::default();
        macro_rules! stage {
            ($start:expr, $slot:expr, $w:expr) => {
                match self.stage($start, tau, $slot, $w)? {
                    StageOutcome::Done(f, s) => {
                        summary.merge(&s);
                        f
                    }
                    StageOutcome::Cfl => return Ok(None),
                }
            };
        }
        let t0 = u0.time;
        let out = match self.options.integrator {
            Integrator::ForwardEuler => stage!(u0, 0, &[1.0]),
            Integrator::Erk33 => {
                let mut u1 = stage!(u0, 0, &[1.0]);
                self.bc.apply(&self.graph, &mut u1, t0 + tau);
                let mut u2 = stage!(&u1, 1, &[-1.0, 2.0]);
                self.bc.apply(&self.graph, &mut u2, t0 + 2.0 * tau);
                stage!(&u2, 2, &[0.75, -2.0, 2.25])
            }
            Integrator::SspRk3 => {
                let mut u1 = stage!(u0, 0, &[1.0]);
                self.bc.apply(&self.graph, &mut u1, t0 + tau);
                let w = stage!(&u1, 0, &[1.0]);
                let mut u2 = combine(u0, 0.75, &w, 0.25);
                u2.time = t0 + 0.5 * tau;
                self.bc.apply(&self.graph, &mut u2, t0 + 0.5 * tau);
                let w = stage!(&u2, 0, &[1.0]);
                combine(u0, 1.0 / 3.0, &w, 2.0 / 3.0)
            }
        };
        Ok(Some((out, summary)))
    }

    /// Steps until `t_final`, calling `observer` after every step.
    pub fn run<F>(&mut self, state: &mut RunState, t_final: f64, mut observer: F) -> Result<(), StepperError>
    where
        F: FnMut(&RunState),
    {
        while state.field.time < t_final {
            self.step(state, t_final)?;
            observer(state);
        }
        compute_primitives(&self.table, &state.field, &mut self.ws.prims)?;
        Ok(())
    }
}

fn combine(a: &FieldState, wa: f64, b: &FieldState, wb: f64) -> FieldState {
    let mut out = a.clone();
    for (o, v) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *o = wa * *o + wb * v;
    }
    out
}

/// Compares a stage result with the bounds it was limited against.
fn check_stage(
    graph: &DiscreteGraph,
    table: &SpeciesTable,
    out: &FieldState,
    strict: &[f64],
    used: &[f64],
    summary: &mut IdpSummary,
) {
    let ns = out.n_species();
    let dim = out.dim();
    let stride = bounds_stride(ns);
    for i in 0..graph.n_nodes() {
        let u = out.node(i);
        if u.iter().any(|v| !v.is_finite()) {
            summary.non_finite += 1;
            continue;
        }
        let b = &used[i * stride..(i + 1) * stride];
        let bs = &strict[i * stride..(i + 1) * stride];
        let mut viol = f64::NEG_INFINITY;
        for s in 0..ns {
            summary.min_partial_density = summary.min_partial_density.min(u[s]);
            let scale = b[ns + s].abs().max(f64::MIN_POSITIVE);
            viol = viol.max((b[s] - u[s]) / scale).max((u[s] - b[ns + s]) / scale);
        }
        let eps = internal_energy(u, ns, dim);
        summary.min_internal_energy = summary.min_internal_energy.min(eps);
        viol = viol.max((b[2 * ns] - eps) / b[2 * ns].abs().max(f64::MIN_POSITIVE));
        summary.max_bound_violation = summary.max_bound_violation.max(viol);
        match Primitive::from_state(table, u, dim) {
            Some(p) => {
                let cv = p.rho_cv / p.rho;
                summary.max_entropy_deficit = summary.max_entropy_deficit.max((bs[2 * ns + 1] - p.s) / cv);
                summary.max_relaxed_entropy_deficit = summary.max_relaxed_entropy_deficit.max((b[2 * ns + 1] - p.s) / cv);
            }
            None => {
                summary.max_entropy_deficit = f64::INFINITY;
                summary.max_relaxed_entropy_deficit = f64::INFINITY;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::PrimitiveState;
    use approx::assert_relative_eq;

    fn table() -> SpeciesTable {
        SpeciesTable::from_pairs(&[(1005.0, 718.0), (5193.0, 3115.0)]).unwrap()
    }

    fn uniform(t: &SpeciesTable, g: &DiscreteGraph, w: &PrimitiveState) -> FieldState {
        let u = t.primitive_to_conserved(w).unwrap();
        let data: Vec<f64> = (0..g.n_nodes()).flat_map(|_| u.to_vec()).collect();
        FieldState::from_data(t.len(), w.velocity.len(), data)
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let t = table();
        for integrator in [Integrator::Erk33, Integrator::SspRk3, Integrator::ForwardEuler] {
            let g = DiscreteGraph::build_2d(6, 5, [0.0; 2], [1.0, 0.7]).unwrap();
            let f = uniform(&t, &g, &PrimitiveState::two_species(0.3, 1.2, &[0.5, -0.25], 2.0));
            let opts = SolverOptions { integrator, check_bounds: true, ..SolverOptions::default() };
            let mut solver = Solver::new(g.clone(), t.clone(), opts, BoundaryConditions::new()).unwrap();
            let mut state = RunState::new(&g, f.clone());
            for _ in 0..3 {
                solver.step(&mut state, 1.0).unwrap();
            }
            for (a, b) in state.field.as_slice().iter().zip(f.as_slice()) {
                assert_relative_eq!(a, b, max_relative = 1e-13, epsilon = 1e-15);
            }
            assert!(state.idp.zeta_max <= 1e-12);
        }
    }

    #[test]
    fn step_size_is_three_first_stage_steps() {
        let t = table();
        let g = DiscreteGraph::build_1d(50, 0.0, 1.0).unwrap();
        let f = uniform(&t, &g, &PrimitiveState::two_species(0.5, 1.0, &[0.2], 1.0));
        let mut solver = Solver::new(g.clone(), t, SolverOptions::default(), BoundaryConditions::new()).unwrap();
        let tau_n = solver.stable_dt(&f).unwrap();
        let mut state = RunState::new(&g, f);
        let dt = solver.step(&mut state, 10.0).unwrap();
        assert_relative_eq!(dt, 3.0 * tau_n, max_relative = 1e-15);
    }

    #[test]
    fn final_step_is_clipped() {
        let t = table();
        let g = DiscreteGraph::build_1d(20, 0.0, 1.0).unwrap();
        let f = uniform(&t, &g, &PrimitiveState::two_species(0.5, 1.0, &[0.2], 1.0));
        let mut solver = Solver::new(g.clone(), t, SolverOptions::default(), BoundaryConditions::new()).unwrap();
        let mut state = RunState::new(&g, f);
        solver.run(&mut state, 0.0123, |_| {}).unwrap();
        assert_eq!(state.time(), 0.0123);
        let sum: f64 = state.dt_history.iter().sum();
        assert_relative_eq!(sum, 0.0123, max_relative = 1e-13);
    }

    #[test]
    fn slip_wall_removes_normal_momentum_only() {
        let t = table();
        let g = DiscreteGraph::build_2d(3, 3, [0.0; 2], [1.0; 2]).unwrap();
        let mut f = uniform(&t, &g, &PrimitiveState::two_species(1.0, 1.0, &[0.3, 0.4], 1.0));
        let before = f.clone();
        let bc = BoundaryConditions::new().with(Side::YLow, BoundaryKind::Slip);
        bc.apply(&g, &mut f, 0.0);
        for i in 0..g.n_nodes() {
            let (u, v) = (f.node(i), before.node(i));
            if g.on_side(i, Side::YLow) {
                assert_eq!(u[3], 0.0);
                assert_eq!(u[2], v[2]);
                assert_eq!(u[4], v[4]);
            } else {
                assert_eq!(u, v);
            }
        }
    }

    #[test]
    fn dirichlet_requires_data() {
        let g = DiscreteGraph::build_1d(4, 0.0, 1.0).unwrap();
        let bc = BoundaryConditions::new().with(Side::XLow, BoundaryKind::Dirichlet);
        assert!(matches!(
            Solver::new(g, table(), SolverOptions::default(), bc),
            Err(StepperError::MissingDirichletData(Side::XLow))
        ));
    }

    #[test]
    fn invalid_cfl_is_rejected() {
        let g = DiscreteGraph::build_1d(4, 0.0, 1.0).unwrap();
        let opts = SolverOptions { cfl: 1.5, ..SolverOptions::default() };
        assert!(Solver::new(g, table(), opts, BoundaryConditions::new()).is_err());
    }

    #[test]
    fn low_order_forward_euler_matches_low_order_step() {
        let t = table();
        let g = DiscreteGraph::build_1d(30, 0.0, 1.0).unwrap();
        let data: Vec<f64> = (0..=30)
            .flat_map(|i| {
                let x = i as f64 / 30.0;
                let w = PrimitiveState::two_species(x, 1.0 + 0.5 * (6.0 * x).sin(), &[0.3], 1.0 + x);
                t.primitive_to_conserved(&w).unwrap().to_vec()
            })
            .collect();
        let f = FieldState::from_data(2, 1, data);
        let opts = SolverOptions { scheme: Scheme::Low, integrator: Integrator::ForwardEuler, ..SolverOptions::default() };
        let mut solver = Solver::new(g.clone(), t.clone(), opts, BoundaryConditions::new()).unwrap();
        let tau = solver.stable_dt(&f).unwrap();
        let mut state = RunState::new(&g, f.clone());
        solver.step(&mut state, 10.0).unwrap();
        let reference = crate::loworder::low_order_step(&g, &t, &f, tau).unwrap();
        assert_eq!(state.field.as_slice(), reference.as_slice());
    }

    #[test]
    fn limited_blast_stays_admissible_and_conservative() {
        let t = table();
        let n = 200;
        let g = DiscreteGraph::build_1d_periodic(n, 0.0, 1.0).unwrap();
        let data: Vec<f64> = (0..n)
            .flat_map(|i| {
                let x = i as f64 / n as f64;
                let (y, p) = if (0.4..0.6).contains(&x) { (0.0, 1000.0) } else { (1.0, 0.01) };
                t.primitive_to_conserved(&PrimitiveState::two_species(y, 1.0, &[0.0], p)).unwrap().to_vec()
            })
            .collect();
        let f = FieldState::from_data(2, 1, data);
        for relax in [false, true] {
            let opts = SolverOptions { relax, check_bounds: true, ..SolverOptions::default() };
            let mut solver = Solver::new(g.clone(), t.clone(), opts, BoundaryConditions::new()).unwrap();
            let mut state = RunState::new(&g, f.clone());
            solver.run(&mut state, 0.01, |_| {}).unwrap();
            let idp = state.idp;
            assert!(idp.min_partial_density >= 0.0);
            assert!(idp.min_internal_energy > 0.0);
            assert!(idp.zeta_min >= 0.0 && idp.zeta_max <= 1.0);
            assert!(idp.max_relaxed_entropy_deficit <= 1e-10, "{idp:?}");
            if !relax {
                assert!(idp.max_entropy_deficit <= 1e-10, "{idp:?}");
            }
            for drift in state.conservation_drift() {
                assert!(drift <= 1e-13, "drift {:?} relax {relax}", state.conservation_drift());
            }
        }
    }
}
