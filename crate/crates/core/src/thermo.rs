//! Mixture thermodynamics for ideal-gas species in thermal and mechanical
//! equilibrium.
//!
//! Conserved states are stored as flat slices laid out as
//! `[α₁ρ₁, …, αₙρₙ, m₁, …, m_d, E]`. Every function here accepts any slice
//! with that layout, so field storage and owned [`ConservedState`] values share
//! one code path.

use std::ops::{Deref, DerefMut};

use smallvec::SmallVec;
use thiserror::Error;

/// Inline storage for one conserved state. Up to eight components live on
/// the stack (e.g. five species in 2D), larger systems spill to the heap.
pub type Values = SmallVec<[f64; 8]>;

/// Vanishing mass fractions at or below this threshold contribute nothing to
/// mixture sums that carry a logarithm.
pub const MASS_FRACTION_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("species {index}: heat capacities must satisfy cp > cv > 0 (cp = {cp}, cv = {cv})")]
    InvalidSpecies { index: usize, cp: f64, cv: f64 },
    #[error("a mixture needs at least two species, got {0}")]
    TooFewSpecies(usize),
    #[error("mass fractions must be nonnegative with a positive sum: {0:?}")]
    InvalidMassFractions(Vec<f64>),
    #[error("expected {expected} species, got {got}")]
    SpeciesCount { expected: usize, got: usize },
    #[error("state has {len} components, which does not fit {n_species} species")]
    Layout { len: usize, n_species: usize },
    #[error("nonpositive mixture density {0}")]
    NonPositiveDensity(f64),
    #[error("nonpositive specific internal energy {0}")]
    NonPositiveInternalEnergy(f64),
    #[error("nonpositive pressure {0}")]
    NonPositivePressure(f64),
    #[error("nonfinite value in state")]
    NonFinite,
}

/// One ideal-gas species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Species {
    /// Specific heat at constant pressure (J kg⁻¹ K⁻¹).
    pub cp: f64,
    /// Specific heat at constant volume (J kg⁻¹ K⁻¹).
    pub cv: f64,
    /// Reference entropy. Always zero in practice.
    pub s_inf: f64,
}

impl Species {
    pub fn new(cp: f64, cv: f64) -> Result<Self, ThermoError> {
        if !(cv > 0.0 && cp > cv && cp.is_finite()) {
            return Err(ThermoError::InvalidSpecies { index: 0, cp, cv });
        }
        Ok(Self { cp, cv, s_inf: 0.0 })
    }

    pub fn gamma(&self) -> f64 {
        self.cp / self.cv
    }

    pub fn gas_constant(&self) -> f64 {
        self.cp - self.cv
    }
}

/// Mixture quantities of one conserved state, evaluated once and reused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub rho: f64,
    pub velocity: [f64; 3],
    /// Internal energy density ε = E − |m|²/(2ρ).
    pub internal_energy: f64,
    /// Specific internal energy e = ε/ρ.
    pub e: f64,
    /// ρ c_v(Y) = Σ αₖρₖ c_v,k.
    pub rho_cv: f64,
    /// ρ r(Y) = Σ αₖρₖ rₖ.
    pub rho_r: f64,
    pub gamma: f64,
    pub pressure: f64,
}

impl Mixture {
    pub fn cv(&self) -> f64 {
        self.rho_cv / self.rho
    }

    pub fn sound_speed(&self) -> f64 {
        (self.gamma * self.pressure / self.rho).sqrt()
    }

    pub fn temperature(&self) -> f64 {
        self.internal_energy / self.rho_cv
    }
}

/// Heat-capacity table for all species of the mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTable {
    species: Vec<Species>,
    // c_v,k log c_v,k + r_k log r_k, reused by the entropy density
    log_terms: Vec<f64>,
}

impl SpeciesTable {
    pub fn new(species: Vec<Species>) -> Result<Self, ThermoError> {
        if species.len() < 2 {
            return Err(ThermoError::TooFewSpecies(species.len()));
        }
        for (index, s) in species.iter().enumerate() {
            if !(s.cv > 0.0 && s.cp > s.cv && s.cp.is_finite()) {
                return Err(ThermoError::InvalidSpecies { index, cp: s.cp, cv: s.cv });
            }
        }
        let log_terms = species
            .iter()
            .map(|s| {
                let r = s.gas_constant();
                s.cv * s.cv.ln() + r * r.ln()
            })
            .collect();
        Ok(Self { species, log_terms })
    }

    /// Builds a table from `(cp, cv)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, ThermoError> {
        Self::new(
            pairs
                .iter()
                .map(|&(cp, cv)| Species { cp, cv, s_inf: 0.0 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    /// Number of conserved components in dimension `dim`.
    pub fn n_components(&self, dim: usize) -> usize {
        self.species.len() + dim + 1
    }

    fn dim_of(&self, u: &[f64]) -> Result<usize, ThermoError> {
        let ns = self.species.len();
        if u.len() < ns + 2 || u.len() > ns + 4 {
            return Err(ThermoError::Layout { len: u.len(), n_species: ns });
        }
        Ok(u.len() - ns - 1)
    }

    fn check_fractions(&self, y: &[f64]) -> Result<(), ThermoError> {
        if y.len() != self.species.len() {
            return Err(ThermoError::SpeciesCount { expected: self.species.len(), got: y.len() });
        }
        let sum: f64 = y.iter().sum();
        if y.iter().any(|v| !(*v >= 0.0)) || !(sum > 0.0) {
            return Err(ThermoError::InvalidMassFractions(y.to_vec()));
        }
        Ok(())
    }

    /// Mass-averaged heat capacities `(c_p(Y), c_v(Y))`. Works with
    /// unnormalized weights, e.g. partial densities.
    fn weighted_capacities(&self, weights: &[f64]) -> (f64, f64) {
        let mut cp = 0.0;
        let mut cv = 0.0;
        let mut total = 0.0;
        for (w, s) in weights.iter().zip(&self.species) {
            let w = w.max(0.0);
            cp += w * s.cp;
            cv += w * s.cv;
            total += w;
        }
        (cp / total, cv / total)
    }

    /// Mixture adiabatic index γ(Y) = Σ Yₖ c_p,k / Σ Yₖ c_v,k.
    pub fn mixture_gamma(&self, y: &[f64]) -> Result<f64, ThermoError> {
        self.check_fractions(y)?;
        let (cp, cv) = self.weighted_capacities(y);
        Ok(cp / cv)
    }

    /// Mass-averaged c_v(Y).
    pub fn mixture_cv(&self, y: &[f64]) -> Result<f64, ThermoError> {
        self.check_fractions(y)?;
        Ok(self.weighted_capacities(y).1)
    }

    /// γ(Y) evaluated straight from the partial densities of a state.
    pub fn gamma_of_state(&self, u: &[f64]) -> f64 {
        let ns = self.species.len();
        let (cp, cv) = self.weighted_capacities(&u[..ns]);
        cp / cv
    }

    /// Evaluates all mixture quantities. Rejects ρ ≤ 0 but not ε ≤ 0; use
    /// [`Mixture::e`] to test admissibility.
    pub fn mixture(&self, u: &[f64]) -> Result<Mixture, ThermoError> {
        let dim = self.dim_of(u)?;
        Ok(self.mixture_unchecked(u, dim)).and_then(|m| {
            if !(m.rho > 0.0) {
                Err(ThermoError::NonPositiveDensity(m.rho))
            } else if !m.internal_energy.is_finite() {
                Err(ThermoError::NonFinite)
            } else {
                Ok(m)
            }
        })
    }

    /// Hot-path variant of [`SpeciesTable::mixture`]; the caller guarantees
    /// the layout matches `dim`.
    #[inline]
    pub fn mixture_unchecked(&self, u: &[f64], dim: usize) -> Mixture {
        let ns = self.species.len();
        let mut rho = 0.0;
        let mut rho_cv = 0.0;
        let mut rho_r = 0.0;
        for (ar, s) in u[..ns].iter().zip(&self.species) {
            let ar = ar.max(0.0);
            rho += ar;
            rho_cv += ar * s.cv;
            rho_r += ar * (s.cp - s.cv);
        }
        let mut velocity = [0.0; 3];
        let mut kinetic = 0.0;
        for d in 0..dim {
            let m = u[ns + d];
            velocity[d] = m / rho;
            kinetic += m * velocity[d];
        }
        let internal_energy = u[ns + dim] - 0.5 * kinetic;
        let gamma = (rho_cv + rho_r) / rho_cv;
        Mixture {
            rho,
            velocity,
            internal_energy,
            e: internal_energy / rho,
            rho_cv,
            rho_r,
            gamma,
            pressure: (gamma - 1.0) * internal_energy,
        }
    }

    /// Bulk pressure p = (γ(Y) − 1) ε(u).
    pub fn pressure(&self, u: &[f64]) -> Result<f64, ThermoError> {
        Ok(self.mixture(u)?.pressure)
    }

    /// Temperature T = e(u)/c_v(Y).
    pub fn temperature(&self, u: &[f64]) -> Result<f64, ThermoError> {
        let m = self.admissible(u)?;
        Ok(m.e / m.cv())
    }

    fn admissible(&self, u: &[f64]) -> Result<Mixture, ThermoError> {
        let m = self.mixture(u)?;
        if !(m.e > 0.0) {
            return Err(ThermoError::NonPositiveInternalEnergy(m.e));
        }
        Ok(m)
    }

    /// K(Y) = Σ Yₖ (c_v,k log((c_v,k/c_v)(rₖ/r)^{γₖ−1}) + s_∞,k).
    pub fn entropy_offset(&self, y: &[f64]) -> Result<f64, ThermoError> {
        self.check_fractions(y)?;
        let total: f64 = y.iter().sum();
        let (cp, cv) = self.weighted_capacities(y);
        let r = cp - cv;
        let mut k = 0.0;
        for (yk, s) in y.iter().zip(&self.species) {
            let yk = yk / total;
            if yk <= MASS_FRACTION_FLOOR {
                continue;
            }
            let rk = s.gas_constant();
            k += yk * (s.cv * ((s.cv / cv) * (rk / r).powf(s.gamma() - 1.0)).ln() + s.s_inf);
        }
        Ok(k)
    }

    /// Specific mixture entropy s = c_v(Y) log(ρe/ρ^γ(Y)) + K(Y).
    pub fn specific_entropy(&self, u: &[f64]) -> Result<f64, ThermoError> {
        let m = self.admissible(u)?;
        let ns = self.species.len();
        let y: Values = u[..ns].iter().map(|a| a.max(0.0) / m.rho).collect();
        let k = self.entropy_offset(&y)?;
        Ok(m.cv() * (m.rho * m.e / m.rho.powf(m.gamma)).ln() + k)
    }

    /// Entropy density σ = ρ s.
    pub fn entropy_density(&self, u: &[f64]) -> Result<f64, ThermoError> {
        let dim = self.dim_of(u)?;
        let m = self.admissible(u)?;
        Ok(self.entropy_density_unchecked(u, dim, &m))
    }

    /// σ = ρ c_v log ε − ρ c_v log(ρ c_v) − ρ r log(ρ r) + Σ αₖρₖ (c_v,k log c_v,k + rₖ log rₖ).
    ///
    /// Algebraically equal to ρ times [`SpeciesTable::specific_entropy`] with
    /// all ρ-dependence folded into the extensive capacities.
    #[inline]
    pub fn entropy_density_unchecked(&self, u: &[f64], _dim: usize, m: &Mixture) -> f64 {
        let ns = self.species.len();
        let mut sum = 0.0;
        for (ar, lt) in u[..ns].iter().zip(&self.log_terms) {
            sum += ar.max(0.0) * lt;
        }
        let rho_r_log = if m.rho_r > 0.0 { m.rho_r * m.rho_r.ln() } else { 0.0 };
        m.rho_cv * (m.internal_energy / m.rho_cv).ln() - rho_r_log + sum
    }

    /// Per-species material density, specific internal energy and volume
    /// fraction under thermal and mechanical equilibrium.
    pub fn material_decomposition(&self, u: &[f64]) -> Result<Vec<Material>, ThermoError> {
        let m = self.admissible(u)?;
        let temperature = m.e / m.cv();
        Ok(self
            .species
            .iter()
            .zip(u)
            .map(|(s, &partial)| {
                let e_k = s.cv * temperature;
                let rho_k = m.pressure / ((s.gamma() - 1.0) * e_k);
                let alpha = if partial > 0.0 { partial / rho_k } else { 0.0 };
                Material { density: rho_k, internal_energy: e_k, volume_fraction: alpha }
            })
            .collect())
    }

    pub fn primitive_to_conserved(&self, w: &PrimitiveState) -> Result<ConservedState, ThermoError> {
        self.check_fractions(&w.mass_fractions)?;
        if !(w.density > 0.0) {
            return Err(ThermoError::NonPositiveDensity(w.density));
        }
        if !(w.pressure > 0.0) {
            return Err(ThermoError::NonPositivePressure(w.pressure));
        }
        let total: f64 = w.mass_fractions.iter().sum();
        let partial: Values = w.mass_fractions.iter().map(|y| y / total * w.density).collect();
        let gamma = self.mixture_gamma(&w.mass_fractions)?;
        let momentum: Values = w.velocity.iter().map(|v| w.density * v).collect();
        let kinetic: f64 = 0.5 * w.density * w.velocity.iter().map(|v| v * v).sum::<f64>();
        Ok(ConservedState::new(&partial, &momentum, w.pressure / (gamma - 1.0) + kinetic))
    }

    pub fn conserved_to_primitive(&self, u: &[f64]) -> Result<PrimitiveState, ThermoError> {
        let dim = self.dim_of(u)?;
        let m = self.mixture(u)?;
        if !(m.pressure > 0.0) {
            return Err(ThermoError::NonPositivePressure(m.pressure));
        }
        let ns = self.species.len();
        Ok(PrimitiveState {
            mass_fractions: u[..ns].iter().map(|a| a.max(0.0) / m.rho).collect(),
            density: m.rho,
            velocity: m.velocity[..dim].iter().copied().collect(),
            pressure: m.pressure,
        })
    }
}

/// Material quantities of one species inside a mixture state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub density: f64,
    pub internal_energy: f64,
    pub volume_fraction: f64,
}

impl Material {
    /// Material pressure pₖ = (γₖ − 1) ρₖ eₖ.
    pub fn pressure(&self, species: &Species) -> f64 {
        (species.gamma() - 1.0) * self.density * self.internal_energy
    }

    /// Material entropy sₖ = c_v,k log(eₖ/ρₖ^{γₖ−1}) + s_∞,k.
    pub fn entropy(&self, species: &Species) -> f64 {
        species.cv * (self.internal_energy / self.density.powf(species.gamma() - 1.0)).ln()
            + species.s_inf
    }
}

/// Sound speed c = √(γp/ρ).
pub fn sound_speed(density: f64, pressure: f64, gamma: f64) -> Result<f64, ThermoError> {
    if !(density > 0.0) {
        return Err(ThermoError::NonPositiveDensity(density));
    }
    if !(pressure > 0.0) {
        return Err(ThermoError::NonPositivePressure(pressure));
    }
    Ok((gamma * pressure / density).sqrt())
}

/// Owned conserved state `(α₁ρ₁, …, αₙρₙ, m, E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState {
    n_species: usize,
    values: Values,
}

impl ConservedState {
    pub fn new(partial_densities: &[f64], momentum: &[f64], total_energy: f64) -> Self {
        let mut values = Values::with_capacity(partial_densities.len() + momentum.len() + 1);
        values.extend_from_slice(partial_densities);
        values.extend_from_slice(momentum);
        values.push(total_energy);
        Self { n_species: partial_densities.len(), values }
    }

    pub fn from_slice(n_species: usize, values: &[f64]) -> Self {
        Self { n_species, values: Values::from_slice(values) }
    }

    pub fn zeros(n_species: usize, dim: usize) -> Self {
        Self { n_species, values: smallvec::smallvec![0.0; n_species + dim + 1] }
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn dim(&self) -> usize {
        self.values.len() - self.n_species - 1
    }

    pub fn partial_densities(&self) -> &[f64] {
        &self.values[..self.n_species]
    }

    pub fn momentum(&self) -> &[f64] {
        &self.values[self.n_species..self.values.len() - 1]
    }

    pub fn total_energy(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn density(&self) -> f64 {
        self.partial_densities().iter().sum()
    }
}

impl Deref for ConservedState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ConservedState {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Primitive description `(Y, ρ, v, p)` used to set up problems.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveState {
    pub mass_fractions: Values,
    pub density: f64,
    pub velocity: SmallVec<[f64; 3]>,
    pub pressure: f64,
}

impl PrimitiveState {
    pub fn new(mass_fractions: &[f64], density: f64, velocity: &[f64], pressure: f64) -> Self {
        Self {
            mass_fractions: Values::from_slice(mass_fractions),
            density,
            velocity: SmallVec::from_slice(velocity),
            pressure,
        }
    }

    /// Two-species shorthand `(Y₁, ρ, v, p)` with Y₂ = 1 − Y₁.
    pub fn two_species(y1: f64, density: f64, velocity: &[f64], pressure: f64) -> Self {
        Self::new(&[y1, 1.0 - y1], density, velocity, pressure)
    }
}
