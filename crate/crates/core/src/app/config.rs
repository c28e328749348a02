//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::stepper::{Integrator, Scheme, SolverOptions};

use super::problems::{default_cells, Problem, ProblemKind};
use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub cp: f64,
    pub cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory receiving CSV files.
    pub path: Option<PathBuf>,
    /// Dump every this many steps; 0 dumps only the requested times.
    pub every: usize,
    /// Extra snapshot times; the final time is always written.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Node counts per direction for the refinement ladder.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Cells per direction.
    #[serde(default)]
    pub cells: Option<Vec<usize>>,
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
    /// Periodic in x; 1D problems only.
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_true")]
    pub relax: bool,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_true")]
    pub check_bounds: bool,
    #[serde(default)]
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Configuration with every optional field at its default.
    pub fn for_problem(problem: ProblemKind) -> Self {
        Self {
            problem,
            dim: None,
            cells: None,
            lower: None,
            upper: None,
            periodic: false,
            t_final: None,
            cfl: default_cfl(),
            scheme: Scheme::default(),
            relax: true,
            integrator: Integrator::default(),
            check_bounds: true,
            species: Vec::new(),
            output: OutputConfig::default(),
            study: StudyConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml(&text)
    }

    /// Builds the problem with all overrides applied.
    pub fn problem(&self) -> Result<Problem, AppError> {
        let species: Vec<(f64, f64)> = self.species.iter().map(|s| (s.cp, s.cv)).collect();
        let mut p = Problem::new(self.problem, if species.is_empty() { None } else { Some(&species) })?;
        if let Some(dim) = self.dim {
            if dim != p.dim {
                return Err(AppError::Config(format!("{} is {}-dimensional, got dim = {dim}", self.problem, p.dim)));
            }
        }
        if let Some(l) = &self.lower {
            p.lower[..p.dim].copy_from_slice(&self.extent(l, p.dim, "lower")?);
        }
        if let Some(u) = &self.upper {
            p.upper[..p.dim].copy_from_slice(&self.extent(u, p.dim, "upper")?);
        }
        if let Some(t) = self.t_final {
            p.t_final = t;
        }
        if self.periodic {
            p = p.into_periodic()?;
        }
        Ok(p)
    }

    fn extent(&self, v: &[f64], dim: usize, name: &str) -> Result<Vec<f64>, AppError> {
        if v.len() != dim {
            return Err(AppError::Config(format!("`{name}` needs {dim} entries, got {}", v.len())));
        }
        Ok(v.to_vec())
    }

    /// Cells per direction, defaulting per problem.
    pub fn cells(&self) -> Result<[usize; 2], AppError> {
        let mut c = default_cells(self.problem);
        if let Some(v) = &self.cells {
            let dim = if self.problem == ProblemKind::ShockBubble { 2 } else { 1 };
            if v.len() != dim {
                return Err(AppError::Config(format!("`cells` needs {dim} entries, got {}", v.len())));
            }
            c[..dim].copy_from_slice(v);
        }
        Ok(c)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            cfl: self.cfl,
            scheme: self.scheme,
            relax: self.relax,
            integrator: self.integrator,
            check_bounds: self.check_bounds,
            ..SolverOptions::default()
        }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(AppError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if let Some(t) = self.t_final {
            if !(t > 0.0) {
                return Err(AppError::Config(format!("t_final must be positive, got {t}")));
            }
        }
        if self.output.times.iter().any(|t| !(*t >= 0.0)) {
            return Err(AppError::Config("output times must be nonnegative".into()));
        }
        self.cells()?;
        self.problem()?;
        Ok(())
    }
}
