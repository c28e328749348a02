//! Single simulation driver with snapshot output and invariant checks.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::stepper::{IdpSummary, RunState, Solver};

use super::output::dump_fields;
use super::{AppError, Problem, RunConfig};

/// Tolerance on bound violations, relative to the bound scale or c_v.
pub const INVARIANT_TOL: f64 = 1e-10;

/// A finished run.
pub struct Simulation {
    pub problem: Problem,
    pub solver: Solver,
    pub state: RunState,
    pub wall: Duration,
    pub snapshots: Vec<PathBuf>,
}

impl Simulation {
    /// Invariant check of the accumulated diagnostics.
    pub fn check(&self) -> InvariantCheck {
        InvariantCheck::new(&self.state.idp, self.solver.options().relax)
    }
}

/// Violations found in an [`IdpSummary`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub violations: Vec<String>,
}

impl InvariantCheck {
    /// With `relaxed` the entropy bound is the relaxed one used by the limiter;
    /// otherwise the strict local minimum.
    pub fn new(idp: &IdpSummary, relaxed: bool) -> Self {
        let mut v = Vec::new();
        if idp.non_finite > 0 {
            v.push(format!("{} non-finite nodal states", idp.non_finite));
        }
        if idp.zeta_min.is_finite() && !(idp.zeta_min >= 0.0 && idp.zeta_max <= 1.0) {
            v.push(format!("entropy indicator outside [0, 1]: [{}, {}]", idp.zeta_min, idp.zeta_max));
        }
        if idp.stages > 0 && idp.min_partial_density.is_finite() {
            if idp.min_partial_density < 0.0 {
                v.push(format!("negative partial density {}", idp.min_partial_density));
            }
            if !(idp.min_internal_energy > 0.0) {
                v.push(format!("nonpositive internal energy {}", idp.min_internal_energy));
            }
            if idp.max_bound_violation > INVARIANT_TOL {
                v.push(format!("local bound violated by {:.3e}", idp.max_bound_violation));
            }
            let (deficit, label) = if relaxed {
                (idp.max_relaxed_entropy_deficit, "relaxed entropy bound")
            } else {
                (idp.max_entropy_deficit, "minimum entropy principle")
            };
            if deficit > INVARIANT_TOL {
                v.push(format!("{label} violated by {deficit:.3e} c_v"));
            }
        }
        Self { violations: v }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), AppError> {
        if self.passed() {
            Ok(())
        } else {
            Err(AppError::InvariantViolation(self.violations.join("; ")))
        }
    }
}

fn snapshot(dir: &Path, sim_name: &str, tag: &str) -> PathBuf {
    dir.join(format!("{sim_name}_{tag}.csv"))
}

/// Runs `cfg` to its final time, writing the configured snapshots.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, AppError> {
    let problem = cfg.problem()?;
    let graph = problem.mesh(cfg.cells()?)?;
    let field = problem.initial_field(&graph)?;
    let state = RunState::new(&graph, field);
    let solver = Solver::new(graph, problem.table.clone(), cfg.solver_options(), problem.boundary_conditions())?;
    let mut sim = Simulation { problem, solver, state, wall: Duration::ZERO, snapshots: Vec::new() };

    let t_final = sim.problem.t_final;
    let mut stops: Vec<f64> = cfg.output.times.iter().copied().filter(|t| *t < t_final).collect();
    stops.sort_by(f64::total_cmp);
    stops.push(t_final);

    let start = Instant::now();
    let name = sim.problem.kind.name();
    for stop in stops {
        while sim.state.time() < stop {
            sim.solver.step(&mut sim.state, stop)?;
            if cfg.output.every > 0 && sim.state.step.is_multiple_of(cfg.output.every) {
                if let Some(dir) = &cfg.output.path {
                    let tag = format!("step{:06}", sim.state.step);
                    write_snapshot(&mut sim, &snapshot(dir, name, &tag))?;
                }
            }
        }
        if let Some(dir) = &cfg.output.path {
            let tag = format!("t{stop:.6}");
            write_snapshot(&mut sim, &snapshot(dir, name, &tag))?;
        }
    }
    sim.wall = start.elapsed();
    Ok(sim)
}

fn write_snapshot(sim: &mut Simulation, path: &Path) -> Result<(), AppError> {
    let zeta = sim.solver.indicator(&sim.state.field)?;
    dump_fields(path, sim.solver.graph(), sim.solver.table(), &sim.state.field, &zeta)?;
    sim.snapshots.push(path.to_path_buf());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::ProblemKind;

    #[test]
    fn short_rp1_run_writes_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::for_problem(ProblemKind::Rp1);
        cfg.cells = Some(vec![100]);
        cfg.t_final = Some(0.02);
        cfg.output.path = Some(dir.path().to_path_buf());
        cfg.output.times = vec![0.01];
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.state.time(), 0.02);
        assert_eq!(sim.snapshots.len(), 2);
        assert!(sim.snapshots.iter().all(|p| p.exists()));
        assert!(sim.check().passed(), "{:?}", sim.check());
    }

    #[test]
    fn violations_are_reported() {
        let idp = IdpSummary {
            stages: 1,
            min_partial_density: -1.0,
            min_internal_energy: 1.0,
            max_entropy_deficit: 1e-3,
            max_relaxed_entropy_deficit: -1.0,
            max_bound_violation: 0.0,
            zeta_min: 0.0,
            zeta_max: 1.5,
            non_finite: 0,
        };
        assert_eq!(InvariantCheck::new(&idp, false).violations.len(), 3);
        assert_eq!(InvariantCheck::new(&idp, true).violations.len(), 2);
        assert!(InvariantCheck::new(&IdpSummary::default(), false).passed());
    }
}
