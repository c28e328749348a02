//! Exact solution of the one-dimensional multi-species Riemann problem.
//!
//! Mass fractions are frozen on either side of the contact, so each side
//! behaves as a single polytropic gas with its own γ. The star pressure is the
//! root of φ(p) = f_L(p) + f_R(p) + v_R − v_L, which is increasing, concave
//! and C¹. These three properties drive both the exact solver and the cheap
//! wave-speed bound used by the graph viscosity.

use smallvec::SmallVec;
use thiserror::Error;

use crate::thermo::{ConservedState, SpeciesTable, ThermoError, Values};

/// Relative tolerance of the exact star-pressure solve.
pub const TOL_PHI: f64 = 1e-12;
/// Iteration cap of the exact solve.
pub const MAX_ITERATIONS: usize = 100;
/// Iteration budget of the wave-speed upper bound.
pub const UPPER_BOUND_ITERATIONS: usize = 5;
/// Relative bracket width at which the upper bound stops refining.
pub const UPPER_BOUND_GAP: f64 = 1e-3;
/// Rounding safety factor applied to every wave-speed upper bound.
pub const ROUNDING_INFLATION: f64 = 1.0 + 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiemannError {
    #[error("invalid side state: rho = {rho}, p = {p}, gamma = {gamma}")]
    InvalidSide { rho: f64, p: f64, gamma: f64 },
    #[error("negative pressure argument {0}")]
    NegativePressure(f64),
    #[error("data generate vacuum: phi(0) = {0} > 0")]
    Vacuum(f64),
    #[error("star pressure solve did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("averaging speed {lambda} is below the maximum wave speed {lambda_max}")]
    SpeedBelowMaximum { lambda: f64, lambda_max: f64 },
    #[error("direction vector must have unit length and match the state dimension")]
    BadDirection,
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Scalar data of one side of the Riemann problem, projected on a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideData {
    pub rho: f64,
    /// Normal velocity.
    pub v: f64,
    pub p: f64,
    pub gamma: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl SideData {
    pub fn new(rho: f64, v: f64, p: f64, gamma: f64) -> Result<Self, RiemannError> {
        if !(rho > 0.0 && p > 0.0 && gamma > 1.0 && rho.is_finite() && p.is_finite() && v.is_finite()) {
            return Err(RiemannError::InvalidSide { rho, p, gamma });
        }
        Ok(Self::new_unchecked(rho, v, p, gamma))
    }

    #[inline]
    pub fn new_unchecked(rho: f64, v: f64, p: f64, gamma: f64) -> Self {
        Self {
            rho,
            v,
            p,
            gamma,
            c: (gamma * p / rho).sqrt(),
            a: 2.0 / ((gamma + 1.0) * rho),
            b: (gamma - 1.0) / (gamma + 1.0) * p,
        }
    }

    /// Side data of a conserved state projected on the unit vector `n`.
    pub fn from_state(table: &SpeciesTable, u: &[f64], n: &[f64]) -> Result<Self, RiemannError> {
        let m = table.mixture(u)?;
        if n.len() != u.len() - table.len() - 1 {
            return Err(RiemannError::BadDirection);
        }
        let vn: f64 = m.velocity.iter().zip(n).map(|(v, n)| v * n).sum();
        Self::new(m.rho, vn, m.pressure, m.gamma)
    }
}

/// Velocity increment across the wave connecting side `z` to pressure `p`.
pub fn f_side(p: f64, z: &SideData) -> Result<f64, RiemannError> {
    if !(p >= 0.0) {
        return Err(RiemannError::NegativePressure(p));
    }
    Ok(f_and_derivative(p, z).0)
}

#[inline]
fn f_and_derivative(p: f64, z: &SideData) -> (f64, f64) {
    if p > z.p {
        let s = (z.a / (p + z.b)).sqrt();
        let f = (p - z.p) * s;
        (f, s * (1.0 - 0.5 * (p - z.p) / (p + z.b)))
    } else {
        let kappa = 0.5 * (z.gamma - 1.0) / z.gamma;
        let ratio = p / z.p;
        let power = ratio.powf(kappa);
        let f = 2.0 * z.c / (z.gamma - 1.0) * (power - 1.0);
        // derivative (p/p_Z)^(κ−1)/(ρc), infinite at p = 0
        (f, power / (ratio * z.rho * z.c))
    }
}

#[inline]
fn f_only(p: f64, z: &SideData) -> f64 {
    if p > z.p {
        (p - z.p) * (z.a / (p + z.b)).sqrt()
    } else {
        let kappa = 0.5 * (z.gamma - 1.0) / z.gamma;
        2.0 * z.c / (z.gamma - 1.0) * ((p / z.p).powf(kappa) - 1.0)
    }
}

/// φ(p) = f_L(p) + f_R(p) + v_R − v_L.
#[inline]
pub fn phi(p: f64, left: &SideData, right: &SideData) -> f64 {
    f_only(p, left) + f_only(p, right) + right.v - left.v
}

#[inline]
fn phi_and_derivative(p: f64, left: &SideData, right: &SideData) -> (f64, f64) {
    let (fl, dl) = f_and_derivative(p, left);
    let (fr, dr) = f_and_derivative(p, right);
    (fl + fr + right.v - left.v, dl + dr)
}

/// Velocity scale used to normalize residuals of φ.
pub fn velocity_scale(left: &SideData, right: &SideData) -> f64 {
    left.c.max(right.c).max(left.v.abs()).max(right.v.abs())
}

/// Solution in the star region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarState {
    pub p_star: f64,
    pub v_star: f64,
    pub rho_star_left: f64,
    pub rho_star_right: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn star_density(p_star: f64, z: &SideData) -> f64 {
    if p_star >= z.p {
        let g = (z.gamma - 1.0) / (z.gamma + 1.0);
        let ratio = p_star / z.p;
        z.rho * (ratio + g) / (g * ratio + 1.0)
    } else {
        z.rho * (p_star / z.p).powf(1.0 / z.gamma)
    }
}

/// Solves φ(p*) = 0.
///
/// Newton iterates from the left end of the bracket never overshoot the
/// root of a concave increasing function, and chords through the bracket
/// never undershoot it, so the bracket shrinks monotonically. Bisection takes
/// over whenever a step fails to halve the bracket.
pub fn solve_star(left: &SideData, right: &SideData) -> Result<StarState, RiemannError> {
    let scale = velocity_scale(left, right);
    let tol = TOL_PHI * scale;
    let phi0 = -2.0 * left.c / (left.gamma - 1.0) - 2.0 * right.c / (right.gamma - 1.0) + right.v - left.v;
    if phi0 > 0.0 {
        return Err(RiemannError::Vacuum(phi0));
    }
    let pmin = left.p.min(right.p);
    let pmax = left.p.max(right.p);

    let mut a = pmin * 1e-8;
    let mut fa = phi(a, left, right);
    if fa > 0.0 {
        a = 0.0;
        fa = phi0;
    }
    let mut b = pmax;
    let mut fb = phi(b, left, right);
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        fb = phi(b, left, right);
        if !b.is_finite() {
            return Err(RiemannError::NoConvergence { iterations: 0, residual: fb });
        }
    }

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        if fa.abs() <= tol || fb.abs() <= tol || b - a <= 4.0 * f64::EPSILON * b {
            break;
        }
        iterations += 1;
        let width = b - a;
        let (_, da) = phi_and_derivative(a, left, right);
        let mut newton = if da.is_finite() && da > 0.0 { a - fa / da } else { f64::NAN };
        if !(newton > a && newton < b) {
            newton = f64::NAN;
        }
        if !newton.is_nan() {
            let f_newton = phi(newton, left, right);
            if f_newton > 0.0 {
                b = newton;
                fb = f_newton;
            } else {
                a = newton;
                fa = f_newton;
            }
        }
        if fb - fa > 0.0 && fa < 0.0 && fb > 0.0 {
            let chord = b - fb * (b - a) / (fb - fa);
            if chord > a && chord < b {
                let fc = phi(chord, left, right);
                if fc > 0.0 {
                    b = chord;
                    fb = fc;
                } else {
                    a = chord;
                    fa = fc;
                }
            }
        }
        if b - a > 0.5 * width {
            let mid = 0.5 * (a + b);
            let fm = phi(mid, left, right);
            if fm > 0.0 {
                b = mid;
                fb = fm;
            } else {
                a = mid;
                fa = fm;
            }
        }
    }

    let (p_star, residual) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    if residual.abs() > tol && b - a > 4.0 * f64::EPSILON * b {
        return Err(RiemannError::NoConvergence { iterations, residual });
    }
    let v_star = 0.5 * ((left.v - f_only(p_star, left)) + (right.v + f_only(p_star, right)));
    Ok(StarState {
        p_star,
        v_star,
        rho_star_left: star_density(p_star, left),
        rho_star_right: star_density(p_star, right),
        residual: residual.abs(),
        iterations,
    })
}

/// The five characteristic speeds of the fan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeeds {
    /// λ⁻_L: head of the left wave.
    pub left_head: f64,
    /// λ⁺_L: tail of the left wave.
    pub left_tail: f64,
    pub contact: f64,
    /// λ⁻_R: tail of the right wave.
    pub right_tail: f64,
    /// λ⁺_R: head of the right wave.
    pub right_head: f64,
}

impl WaveSpeeds {
    pub fn max_abs(&self) -> f64 {
        self.left_head.abs().max(self.right_head.abs())
    }
}

#[inline]
fn shock_factor(p: f64, z: &SideData) -> f64 {
    (1.0 + 0.5 * (z.gamma + 1.0) / z.gamma * ((p - z.p) / z.p).max(0.0)).sqrt()
}

/// λ⁻_L(p) and λ⁺_R(p); both are monotone in p.
#[inline]
pub fn outer_speeds(p: f64, left: &SideData, right: &SideData) -> (f64, f64) {
    (left.v - left.c * shock_factor(p, left), right.v + right.c * shock_factor(p, right))
}

pub fn wave_speeds(star: &StarState, left: &SideData, right: &SideData) -> WaveSpeeds {
    let p = star.p_star;
    let (left_head, right_head) = outer_speeds(p, left, right);
    let left_tail = if p < left.p {
        let kappa = 0.5 * (left.gamma - 1.0) / left.gamma;
        left.v - f_only(p, left) - left.c * (p / left.p).powf(kappa)
    } else {
        left_head
    };
    let right_tail = if p < right.p {
        let kappa = 0.5 * (right.gamma - 1.0) / right.gamma;
        right.v + f_only(p, right) + right.c * (p / right.p).powf(kappa)
    } else {
        right_head
    };
    WaveSpeeds { left_head, left_tail, contact: star.v_star, right_tail, right_head }
}

/// Exact maximum wave speed between two conserved states along `n`.
pub fn lambda_max(
    table: &SpeciesTable,
    left_state: &[f64],
    right_state: &[f64],
    n: &[f64],
) -> Result<f64, RiemannError> {
    let l = SideData::from_state(table, left_state, n)?;
    let r = SideData::from_state(table, right_state, n)?;
    let star = solve_star(&l, &r)?;
    Ok(wave_speeds(&star, &l, &r).max_abs())
}

/// Guaranteed upper bound on the maximum wave speed between two conserved
/// states along `n`.
pub fn lambda_max_upper(
    table: &SpeciesTable,
    left_state: &[f64],
    right_state: &[f64],
    n: &[f64],
) -> Result<f64, RiemannError> {
    let l = SideData::from_state(table, left_state, n)?;
    let r = SideData::from_state(table, right_state, n)?;
    Ok(lambda_hat(&l, &r))
}

/// Upper bound on the maximum wave speed with a bounded amount of work.
///
/// When φ(p_min) ≥ 0 both waves are rarefactions (or the data would open a
/// vacuum) and the outer speeds are exact. Otherwise the root is bracketed
/// and refined with at most [`UPPER_BOUND_ITERATIONS`] Newton/chord sweeps;
/// the upper bracket end always satisfies p̂ ≥ p*.
#[inline]
pub fn lambda_hat(left: &SideData, right: &SideData) -> f64 {
    let (pmin, pmax) = if left.p < right.p { (left.p, right.p) } else { (right.p, left.p) };
    let phi_min = phi(pmin, left, right);
    if phi_min >= 0.0 {
        let speed = (left.v - left.c).abs().max((right.v + right.c).abs());
        return speed * ROUNDING_INFLATION;
    }
    let mut a = pmin;
    let mut fa = phi_min;
    let mut b = pmax;
    let mut fb = phi(pmax, left, right);
    if fb < 0.0 {
        // both waves are shocks: move the lower end by Newton, then double
        a = pmax;
        fa = fb;
        let (_, da) = phi_and_derivative(a, left, right);
        let newton = a - fa / da;
        b = (2.0 * newton).max(2.0 * a);
        fb = phi(b, left, right);
        while fb < 0.0 {
            a = b;
            fa = fb;
            b *= 2.0;
            fb = phi(b, left, right);
        }
    }
    for _ in 0..UPPER_BOUND_ITERATIONS {
        if b - a <= UPPER_BOUND_GAP * b || fb == 0.0 {
            break;
        }
        let (_, da) = phi_and_derivative(a, left, right);
        let newton = a - fa / da;
        if newton > a && newton < b {
            let fn_ = phi(newton, left, right);
            if fn_ >= 0.0 {
                b = newton;
                break;
            }
            a = newton;
            fa = fn_;
        }
        if fa == 0.0 {
            b = a;
            break;
        }
        let chord = b - fb * (b - a) / (fb - fa);
        if chord > a && chord < b {
            let fc = phi(chord, left, right);
            if fc >= 0.0 {
                b = chord;
                fb = fc;
            } else {
                a = chord;
                fa = fc;
            }
        }
    }
    let (lo, hi) = outer_speeds(b, left, right);
    lo.abs().max(hi.abs()) * ROUNDING_INFLATION
}

/// Which side of the contact a fan sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Primitive sample of the fan at one value of ξ = x/t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanSample {
    pub rho: f64,
    pub v: f64,
    pub p: f64,
    pub side: Side,
}

/// Complete self-similar solution of one Riemann problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannFan {
    pub left: SideData,
    pub right: SideData,
    pub star: StarState,
    pub speeds: WaveSpeeds,
    /// Mass fractions frozen on each side of the contact.
    pub mass_fractions: [Values; 2],
    /// Velocity components orthogonal to the direction, advected passively.
    pub tangential: [SmallVec<[f64; 3]>; 2],
    pub normal: SmallVec<[f64; 3]>,
}

impl RiemannFan {
    /// Fan for purely one-dimensional side data and mass fractions.
    pub fn new(
        left: SideData,
        right: SideData,
        y_left: &[f64],
        y_right: &[f64],
    ) -> Result<Self, RiemannError> {
        let star = solve_star(&left, &right)?;
        let speeds = wave_speeds(&star, &left, &right);
        Ok(Self {
            left,
            right,
            star,
            speeds,
            mass_fractions: [Values::from_slice(y_left), Values::from_slice(y_right)],
            tangential: [smallvec::smallvec![0.0], smallvec::smallvec![0.0]],
            normal: smallvec::smallvec![1.0],
        })
    }

    /// Fan of two conserved states along the unit vector `n`.
    pub fn from_states(
        table: &SpeciesTable,
        left_state: &[f64],
        right_state: &[f64],
        n: &[f64],
    ) -> Result<Self, RiemannError> {
        let norm: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(RiemannError::BadDirection);
        }
        let left = SideData::from_state(table, left_state, n)?;
        let right = SideData::from_state(table, right_state, n)?;
        let ns = table.len();
        let split = |u: &[f64], side: &SideData| -> (Values, SmallVec<[f64; 3]>) {
            let rho: f64 = u[..ns].iter().map(|a| a.max(0.0)).sum();
            let y = u[..ns].iter().map(|a| a.max(0.0) / rho).collect();
            let t = n.iter().enumerate().map(|(d, nd)| u[ns + d] / rho - side.v * nd).collect();
            (y, t)
        };
        let (yl, tl) = split(left_state, &left);
        let (yr, tr) = split(right_state, &right);
        let star = solve_star(&left, &right)?;
        let speeds = wave_speeds(&star, &left, &right);
        Ok(Self {
            left,
            right,
            star,
            speeds,
            mass_fractions: [yl, yr],
            tangential: [tl, tr],
            normal: SmallVec::from_slice(n),
        })
    }

    /// Primitive state at ξ = x/t.
    pub fn evaluate(&self, xi: f64) -> FanSample {
        let (l, r, s, w) = (&self.left, &self.right, &self.star, &self.speeds);
        if xi < w.contact {
            if xi < w.left_head {
                FanSample { rho: l.rho, v: l.v, p: l.p, side: Side::Left }
            } else if xi < w.left_tail {
                let g = l.gamma;
                let base = 2.0 / (g + 1.0) + (g - 1.0) * (l.v - xi) / ((g + 1.0) * l.c);
                let rho = l.rho * base.powf(2.0 / (g - 1.0));
                let p = l.p * (rho / l.rho).powf(g);
                let v = 2.0 / (g + 1.0) * (l.c + 0.5 * (g - 1.0) * l.v + xi);
                FanSample { rho, v, p, side: Side::Left }
            } else {
                FanSample { rho: s.rho_star_left, v: s.v_star, p: s.p_star, side: Side::Left }
            }
        } else if xi >= w.right_head {
            FanSample { rho: r.rho, v: r.v, p: r.p, side: Side::Right }
        } else if xi >= w.right_tail {
            let g = r.gamma;
            let base = 2.0 / (g + 1.0) - (g - 1.0) * (r.v - xi) / ((g + 1.0) * r.c);
            let rho = r.rho * base.powf(2.0 / (g - 1.0));
            let p = r.p * (rho / r.rho).powf(g);
            let v = 2.0 / (g + 1.0) * (-r.c + 0.5 * (g - 1.0) * r.v + xi);
            FanSample { rho, v, p, side: Side::Right }
        } else {
            FanSample { rho: s.rho_star_right, v: s.v_star, p: s.p_star, side: Side::Right }
        }
    }

    /// Mass fractions of the side a sample belongs to.
    pub fn mass_fractions(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.mass_fractions[0],
            Side::Right => &self.mass_fractions[1],
        }
    }

    fn gamma(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.left.gamma,
            Side::Right => self.right.gamma,
        }
    }

    /// Conserved state at ξ = x/t, written into `out`.
    pub fn conserved_into(&self, xi: f64, out: &mut [f64]) {
        let sample = self.evaluate(xi);
        let y = self.mass_fractions(sample.side);
        let ns = y.len();
        let tangential = match sample.side {
            Side::Left => &self.tangential[0],
            Side::Right => &self.tangential[1],
        };
        for (o, yk) in out[..ns].iter_mut().zip(y) {
            *o = sample.rho * yk;
        }
        let mut kinetic = 0.0;
        for (d, nd) in self.normal.iter().enumerate() {
            let vd = sample.v * nd + tangential[d];
            out[ns + d] = sample.rho * vd;
            kinetic += vd * vd;
        }
        let dim = self.normal.len();
        out[ns + dim] = sample.p / (self.gamma(sample.side) - 1.0) + 0.5 * sample.rho * kinetic;
    }

    pub fn conserved(&self, xi: f64) -> ConservedState {
        let ns = self.mass_fractions[0].len();
        let mut u = ConservedState::zeros(ns, self.normal.len());
        self.conserved_into(xi, &mut u);
        u
    }

    /// Boundaries of the smooth pieces of the fan, in increasing order.
    pub fn breakpoints(&self) -> [f64; 5] {
        let w = &self.speeds;
        [w.left_head, w.left_tail, w.contact, w.right_tail, w.right_head]
    }
}

/// Average of the Riemann solution over [−λt, λt] at time `t`.
///
/// Constant pieces are integrated exactly; the rarefaction fans are
/// integrated by adaptive Simpson quadrature.
pub fn riemann_average(fan: &RiemannFan, lambda: f64, t: f64) -> Result<ConservedState, RiemannError> {
    let lambda_max = fan.speeds.max_abs();
    if !(lambda >= lambda_max * (1.0 - 1e-12)) {
        return Err(RiemannError::SpeedBelowMaximum { lambda, lambda_max });
    }
    if !(t > 0.0) {
        return Err(RiemannError::NegativePressure(t));
    }
    let ns = fan.mass_fractions[0].len();
    let dim = fan.normal.len();
    let ncomp = ns + dim + 1;
    let mut total = vec![0.0; ncomp];
    let mut cuts: Vec<f64> = vec![-lambda];
    cuts.extend(fan.breakpoints().iter().map(|b| b.clamp(-lambda, lambda)));
    cuts.push(lambda);
    for k in 0..cuts.len() - 1 {
        let (a, b) = (cuts[k], cuts[k + 1]);
        if b <= a {
            continue;
        }
        // segment 1 spans the left wave, segment 4 the right wave
        let is_fan = (k == 1 && fan.star.p_star < fan.left.p) || (k == 4 && fan.star.p_star < fan.right.p);
        if is_fan {
            for c in 0..ncomp {
                let f = |xi: f64| {
                    let mut u = vec![0.0; ncomp];
                    fan.conserved_into(xi, &mut u);
                    u[c]
                };
                total[c] += adaptive_simpson(&f, a, b, 1e-13, 40);
            }
        } else {
            let mut u = vec![0.0; ncomp];
            fan.conserved_into(0.5 * (a + b), &mut u);
            for c in 0..ncomp {
                total[c] += u[c] * (b - a);
            }
        }
    }
    for v in total.iter_mut() {
        *v /= 2.0 * lambda;
    }
    Ok(ConservedState::from_slice(ns, &total))
}

/// Adaptive Simpson quadrature to relative accuracy `rel_tol`. The
/// tolerance is scaled by the integrand's magnitude so that rounding noise
/// in large integrands cannot stall the refinement.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, depth: usize) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let magnitude = fa.abs().max(fm.abs()).max(fb.abs()).max(f64::MIN_POSITIVE);
    simpson_step(f, a, b, fa, fm, fb, whole, rel_tol * magnitude * (b - a), depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
