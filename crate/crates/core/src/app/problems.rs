//! Test problems: initial data, boundary setup and exact solutions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::loworder::FieldState;
use crate::mesh::{DiscreteGraph, MeshError, Side};
use crate::riemann::{RiemannError, RiemannFan, SideData};
use crate::stepper::{BoundaryConditions, BoundaryKind};
use crate::thermo::{PrimitiveState, SpeciesTable, ThermoError};

use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    SmoothWave,
    Rp1,
    Rp2,
    WoodwardColella,
    ShockBubble,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] =
        [Self::SmoothWave, Self::Rp1, Self::Rp2, Self::WoodwardColella, Self::ShockBubble];

    pub fn name(self) -> &'static str {
        match self {
            Self::SmoothWave => "smooth_wave",
            Self::Rp1 => "rp1",
            Self::Rp2 => "rp2",
            Self::WoodwardColella => "woodward_colella",
            Self::ShockBubble => "shock_bubble",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| AppError::UnknownProblem(s.to_string()))
    }
}

/// Smooth-wave constants.
pub mod smooth {
    pub const RHO0: f64 = 1.0;
    pub const X0: f64 = 0.1;
    pub const X1: f64 = 0.3;
    pub const VELOCITY: f64 = 1.0;
    pub const PRESSURE: f64 = 1.0;
    pub const Y1: f64 = 0.75;

    /// Mixture density of the travelling bump.
    pub fn density(x: f64, t: f64) -> f64 {
        let s = x - VELOCITY * t;
        if (X0..=X1).contains(&s) {
            RHO0 + 64.0 * (X1 - X0).powi(-6) * (s - X0).powi(3) * (X1 - s).powi(3)
        } else {
            RHO0
        }
    }
}

/// Shock-bubble constants.
pub mod bubble {
    pub const RHO_SHOCK: f64 = 2.025655508041382;
    pub const V_SHOCK: f64 = 212.66552734375;
    pub const P_SHOCK: f64 = 224835.0;
    pub const SHOCK_X: f64 = 0.03;
    pub const CENTER: [f64; 2] = [0.052, 0.04];
    pub const RADIUS: f64 = 0.022;
    pub const RHO_BUBBLE: f64 = 3.408;
    pub const RHO_AIR: f64 = 1.163;
    pub const P_AMBIENT: f64 = 101325.0;
}

/// Exact solution of a problem.
#[derive(Debug, Clone)]
pub enum Exact {
    /// The smooth bump translated with unit velocity, wrapped into
    /// `[a, b)` when the domain is periodic.
    Translation { period: Option<(f64, f64)> },
    /// Self-similar Riemann fan centred at `x0`.
    Riemann { fan: Box<RiemannFan>, x0: f64 },
}

impl Exact {
    /// Conserved exact state at `x` and time `t`.
    pub fn conserved(&self, table: &SpeciesTable, x: [f64; 2], t: f64, out: &mut [f64]) {
        match self {
            Exact::Translation { period } => {
                let x = match period {
                    Some((a, b)) => {
                        let shifted = (x[0] - smooth::VELOCITY * t - a).rem_euclid(b - a) + a;
                        shifted + smooth::VELOCITY * t
                    }
                    None => x[0],
                };
                let rho = smooth::density(x, t);
                let w = PrimitiveState::two_species(smooth::Y1, rho, &[smooth::VELOCITY], smooth::PRESSURE);
                let u = table.primitive_to_conserved(&w).expect("smooth-wave state is admissible");
                out.copy_from_slice(&u);
            }
            Exact::Riemann { fan, x0 } => {
                if t > 0.0 {
                    fan.conserved_into((x[0] - x0) / t, out);
                } else {
                    let xi = if x[0] < *x0 { f64::NEG_INFINITY } else { f64::INFINITY };
                    fan.conserved_into(xi, out);
                }
            }
        }
    }
}

/// Fully specified problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    pub table: SpeciesTable,
    pub dim: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub t_final: f64,
    pub exact: Option<Exact>,
    pub boundaries: [BoundaryKind; 4],
    /// Periodic in x (1D only); boundary kinds are then unused.
    pub periodic: bool,
}

/// Default cells per direction for each problem.
pub fn default_cells(kind: ProblemKind) -> [usize; 2] {
    match kind {
        ProblemKind::SmoothWave | ProblemKind::Rp1 | ProblemKind::Rp2 => [800, 1],
        ProblemKind::WoodwardColella => [3200, 1],
        ProblemKind::ShockBubble => [400, 32],
    }
}

/// Default species heat capacities (c_p, c_v).
pub fn default_species(kind: ProblemKind) -> [(f64, f64); 2] {
    match kind {
        ProblemKind::SmoothWave => [(1005.0, 718.0), (4041.4, 2420.0)],
        ProblemKind::Rp1 => [(1.5, 1.0), (1.3, 1.0)],
        ProblemKind::Rp2 => [(5.2, 3.12), (1.402, 0.743)],
        ProblemKind::WoodwardColella => [(1005.0, 718.0), (5193.0, 3115.0)],
        ProblemKind::ShockBubble => [(1005.0, 718.0), (248.0, 149.0)],
    }
}

fn riemann_data(kind: ProblemKind) -> Option<([f64; 4], [f64; 4])> {
    match kind {
        ProblemKind::Rp1 => Some(([0.5, 1.0, 0.0, 1.0], [0.5, 0.125, 0.0, 0.1])),
        ProblemKind::Rp2 => Some(([1.0, 1.602, 0.0, 1e6], [0.0, 1.122, 0.0, 1e5])),
        _ => None,
    }
}

impl Problem {
    /// Problem with default species; `species` overrides the heat capacities.
    pub fn new(kind: ProblemKind, species: Option<&[(f64, f64)]>) -> Result<Self, AppError> {
        let pairs = species.map(|s| s.to_vec()).unwrap_or_else(|| default_species(kind).to_vec());
        if pairs.len() != 2 {
            return Err(AppError::SpeciesCount { problem: kind, expected: 2, got: pairs.len() });
        }
        let table = SpeciesTable::from_pairs(&pairs)?;
        use BoundaryKind::*;
        let (dim, lower, upper, t_final, boundaries) = match kind {
            ProblemKind::SmoothWave => (1, [0.0, 0.0], [1.0, 0.0], 0.6, [Dirichlet, Dirichlet, Free, Free]),
            ProblemKind::Rp1 => (1, [0.0, 0.0], [1.0, 0.0], 0.2, [Dirichlet, Dirichlet, Free, Free]),
            ProblemKind::Rp2 => (1, [0.0, 0.0], [1.0, 0.0], 3e-4, [Dirichlet, Dirichlet, Free, Free]),
            ProblemKind::WoodwardColella => (1, [0.0, 0.0], [1.0, 0.0], 0.038, [Slip, Slip, Free, Free]),
            ProblemKind::ShockBubble => (2, [-0.12, 0.0], [0.88, 0.08], 200e-6, [Dirichlet, Dirichlet, Slip, Slip]),
        };
        let exact = match kind {
            ProblemKind::SmoothWave => Some(Exact::Translation { period: None }),
            ProblemKind::Rp1 | ProblemKind::Rp2 => {
                let (wl, wr) = riemann_data(kind).expect("Riemann data");
                let gl = table.mixture_gamma(&[wl[0], 1.0 - wl[0]])?;
                let gr = table.mixture_gamma(&[wr[0], 1.0 - wr[0]])?;
                let left = SideData::new(wl[1], wl[2], wl[3], gl)?;
                let right = SideData::new(wr[1], wr[2], wr[3], gr)?;
                let fan = RiemannFan::new(left, right, &[wl[0], 1.0 - wl[0]], &[wr[0], 1.0 - wr[0]])?;
                Some(Exact::Riemann { fan: Box::new(fan), x0: 0.5 })
            }
            _ => None,
        };
        Ok(Self { kind, table, dim, lower, upper, t_final, exact, boundaries, periodic: false })
    }

    /// Periodic variant of a 1D problem. Only the smooth wave keeps its
    /// exact solution; Riemann data would interact across the seam.
    pub fn into_periodic(mut self) -> Result<Self, AppError> {
        if self.dim != 1 {
            return Err(AppError::Config(format!("{} cannot be made periodic", self.kind)));
        }
        self.periodic = true;
        self.boundaries = [BoundaryKind::Free; 4];
        self.exact = match self.exact {
            Some(Exact::Translation { .. }) => Some(Exact::Translation { period: Some((self.lower[0], self.upper[0])) }),
            _ => None,
        };
        Ok(self)
    }

    /// Primitive initial state at `x`.
    pub fn initial_primitive(&self, x: [f64; 2]) -> PrimitiveState {
        let zero: &[f64] = if self.dim == 1 { &[0.0] } else { &[0.0, 0.0] };
        match self.kind {
            ProblemKind::SmoothWave => PrimitiveState::two_species(
                smooth::Y1,
                smooth::density(x[0], 0.0),
                &[smooth::VELOCITY],
                smooth::PRESSURE,
            ),
            ProblemKind::Rp1 | ProblemKind::Rp2 => {
                let (wl, wr) = riemann_data(self.kind).expect("Riemann data");
                let w = if x[0] < 0.5 { wl } else { wr };
                PrimitiveState::two_species(w[0], w[1], &[w[2]], w[3])
            }
            ProblemKind::WoodwardColella => {
                if x[0] < 0.1 {
                    PrimitiveState::two_species(1.0, 1.0, zero, 1000.0)
                } else if x[0] > 0.9 {
                    PrimitiveState::two_species(1.0, 1.0, zero, 100.0)
                } else {
                    PrimitiveState::two_species(0.0, 1.0, zero, 0.01)
                }
            }
            ProblemKind::ShockBubble => {
                use bubble::*;
                let r = ((x[0] - CENTER[0]).powi(2) + (x[1] - CENTER[1]).powi(2)).sqrt();
                if x[0] < SHOCK_X {
                    PrimitiveState::two_species(1.0, RHO_SHOCK, &[V_SHOCK, 0.0], P_SHOCK)
                } else if r <= RADIUS {
                    PrimitiveState::two_species(0.0, RHO_BUBBLE, zero, P_AMBIENT)
                } else {
                    PrimitiveState::two_species(1.0, RHO_AIR, zero, P_AMBIENT)
                }
            }
        }
    }

    /// Uniform mesh with `cells` cells per direction.
    pub fn mesh(&self, cells: [usize; 2]) -> Result<DiscreteGraph, MeshError> {
        if self.periodic {
            DiscreteGraph::build_1d_periodic(cells[0], self.lower[0], self.upper[0])
        } else if self.dim == 1 {
            DiscreteGraph::build_1d(cells[0], self.lower[0], self.upper[0])
        } else {
            DiscreteGraph::build_2d(cells[0], cells[1], self.lower, self.upper)
        }
    }

    /// Nodal interpolant of the initial data.
    pub fn initial_field(&self, graph: &DiscreteGraph) -> Result<FieldState, ThermoError> {
        let mut data = Vec::with_capacity(graph.n_nodes() * self.table.n_components(self.dim));
        for x in graph.coords() {
            data.extend_from_slice(&self.table.primitive_to_conserved(&self.initial_primitive(*x))?);
        }
        Ok(FieldState::from_data(self.table.len(), self.dim, data))
    }

    /// Nodal interpolant of the exact solution at `t`, if known.
    pub fn exact_field(&self, graph: &DiscreteGraph, t: f64) -> Option<FieldState> {
        let exact = self.exact.as_ref()?;
        let mut f = FieldState::zeros(self.table.len(), self.dim, graph.n_nodes());
        for (i, x) in graph.coords().iter().enumerate() {
            exact.conserved(&self.table, *x, t, f.node_mut(i));
        }
        f.time = t;
        Some(f)
    }

    /// Boundary conditions: Dirichlet sides use the exact solution when known
    /// and the initial data otherwise.
    pub fn boundary_conditions(&self) -> BoundaryConditions {
        let mut bc = BoundaryConditions::new();
        for side in Side::ALL {
            bc = bc.with(side, self.boundaries[side as usize]);
        }
        if self.boundaries.contains(&BoundaryKind::Dirichlet) {
            let me = self.clone();
            bc = bc.with_dirichlet_data(Arc::new(move |x, t, out: &mut [f64]| match &me.exact {
                Some(exact) => exact.conserved(&me.table, x, t, out),
                None => {
                    let u = me.table.primitive_to_conserved(&me.initial_primitive(x)).expect("admissible data");
                    out.copy_from_slice(&u);
                }
            }));
        }
        bc
    }
}

impl From<RiemannError> for AppError {
    fn from(e: RiemannError) -> Self {
        AppError::Riemann(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn names_round_trip() {
        for p in ProblemKind::ALL {
            assert_eq!(p.name().parse::<ProblemKind>().unwrap(), p);
        }
        assert!("sod".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn smooth_wave_mass_matches_bump_integral() {
        // ∫ 2^6 (x1−x0)^{-6} (s−x0)^3 (x1−s)^3 ds = 2^6 (x1−x0) B(4,4) = 2^6 (x1−x0)/140
        let p = Problem::new(ProblemKind::SmoothWave, None).unwrap();
        let bump = 64.0 * (smooth::X1 - smooth::X0) / 140.0;
        // lumped quadrature converges at second order
        let mass_at = |cells: usize| {
            let g = p.mesh([cells, 1]).unwrap();
            let f = p.initial_field(&g).unwrap();
            let t = f.totals(&g);
            t[0] + t[1]
        };
        let exact = 1.0 + bump;
        let e1 = (mass_at(400) - exact).abs();
        let e2 = (mass_at(800) - exact).abs();
        assert!(e1 < 1e-5, "error {e1}");
        assert!(e2 < e1 / 3.0);
        let g = p.mesh([1000, 1]).unwrap();
        let f = p.initial_field(&g).unwrap();
        let t = f.totals(&g);
        assert_relative_eq!(t[0] / (t[0] + t[1]), 0.75, max_relative = 1e-13);
    }

    #[test]
    fn riemann_states_follow_table() {
        let p = Problem::new(ProblemKind::Rp1, None).unwrap();
        let left = p.table.primitive_to_conserved(&p.initial_primitive([0.2, 0.0])).unwrap();
        // γ = 1.4 for Y1 = 0.5 with c_v,k = 1
        assert_relative_eq!(left[0], 0.5);
        assert_relative_eq!(left[1], 0.5);
        assert_relative_eq!(left[3], 1.0 / 0.4, max_relative = 1e-14);
        let right = p.table.primitive_to_conserved(&p.initial_primitive([0.7, 0.0])).unwrap();
        assert_relative_eq!(right[0] + right[1], 0.125);
        assert_relative_eq!(right[3], 0.1 / 0.4, max_relative = 1e-14);
        let p2 = Problem::new(ProblemKind::Rp2, None).unwrap();
        let l2 = p2.table.primitive_to_conserved(&p2.initial_primitive([0.2, 0.0])).unwrap();
        assert_eq!(l2[1], 0.0);
        assert_relative_eq!(l2[3], 1e6 / (5.2 / 3.12 - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn exact_riemann_field_matches_data_at_start() {
        let p = Problem::new(ProblemKind::Rp2, None).unwrap();
        let g = p.mesh([20, 1]).unwrap();
        let f0 = p.initial_field(&g).unwrap();
        let e0 = p.exact_field(&g, 0.0).unwrap();
        for (a, b) in f0.as_slice().iter().zip(e0.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn shock_bubble_states_are_admissible() {
        let p = Problem::new(ProblemKind::ShockBubble, None).unwrap();
        for x in [[0.0, 0.04], [0.052, 0.04], [0.5, 0.01]] {
            let u = p.table.primitive_to_conserved(&p.initial_primitive(x)).unwrap();
            assert!(p.table.pressure(&u).unwrap() > 0.0);
        }
        let u = p.table.primitive_to_conserved(&p.initial_primitive([0.052, 0.04])).unwrap();
        assert_eq!(u[0], 0.0);
        assert_relative_eq!(u[1], bubble::RHO_BUBBLE);
    }

    #[test]
    fn woodward_colella_species_layout() {
        let p = Problem::new(ProblemKind::WoodwardColella, None).unwrap();
        let y = |x: f64| p.initial_primitive([x, 0.0]).mass_fractions[0];
        assert_eq!((y(0.05), y(0.5), y(0.95)), (1.0, 0.0, 1.0));
        assert_eq!(p.initial_primitive([0.05, 0.0]).pressure, 1000.0);
        assert_eq!(p.initial_primitive([0.95, 0.0]).pressure, 100.0);
    }

    #[test]
    fn wrong_species_count_is_rejected() {
        assert!(matches!(
            Problem::new(ProblemKind::Rp1, Some(&[(1.4, 1.0)])),
            Err(AppError::SpeciesCount { .. })
        ));
    }
}
