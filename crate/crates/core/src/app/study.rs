//! Mesh refinement studies against exact solutions.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use super::norms::{error_norm, NormKind};
use super::run::{simulate, InvariantCheck};
use super::{AppError, ProblemKind, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// Nodes per direction.
    pub nodes: usize,
    /// δ¹, δ², δ^∞ at the final time.
    pub errors: [f64; 3],
    /// Rates against the previous row; `None` on the first row or when an
    /// error vanishes.
    pub rates: [Option<f64>; 3],
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub problem: ProblemKind,
    pub rows: Vec<StudyRow>,
}

/// Observed order ln(e_c/e_f)/ln(h_c/h_f) with h ∝ 1/(nodes − 1).
pub fn rate(nodes_coarse: usize, err_coarse: f64, nodes_fine: usize, err_fine: f64) -> Option<f64> {
    if err_coarse > 0.0 && err_fine > 0.0 && err_coarse.is_finite() && err_fine.is_finite() {
        let refine = (nodes_fine - 1) as f64 / (nodes_coarse - 1) as f64;
        Some((err_coarse / err_fine).ln() / refine.ln())
    } else {
        None
    }
}

impl ConvergenceTable {
    /// Builds rows and rates from measured errors.
    pub fn from_errors(problem: ProblemKind, data: &[(usize, [f64; 3], Duration)]) -> Self {
        let mut rows: Vec<StudyRow> = Vec::with_capacity(data.len());
        for (idx, &(nodes, errors, wall)) in data.iter().enumerate() {
            let mut rates = [None; 3];
            if idx > 0 {
                let (pn, pe, _) = data[idx - 1];
                for q in 0..3 {
                    rates[q] = rate(pn, pe[q], nodes, errors[q]);
                }
            }
            rows.push(StudyRow { nodes, errors, rates, wall });
        }
        Self { problem, rows }
    }

    /// Mean δ-rate of norm `q` (0, 1, 2 for 1, 2, ∞) over the last `pairs` pairs.
    pub fn mean_rate(&self, q: usize, pairs: usize) -> Option<f64> {
        let tail: Vec<f64> = self.rows.iter().rev().take(pairs).map(|r| r.rates[q]).collect::<Option<_>>()?;
        if tail.len() < pairs || pairs == 0 {
            return None;
        }
        Some(tail.iter().sum::<f64>() / pairs as f64)
    }

    /// Rates of norm `q` over the last `pairs` pairs, coarse to fine.
    pub fn last_rates(&self, q: usize, pairs: usize) -> Vec<Option<f64>> {
        let n = self.rows.len();
        self.rows[n.saturating_sub(pairs)..].iter().map(|r| r.rates[q]).collect()
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>7}  {:>11}  {:>5}  {:>11}  {:>5}  {:>11}  {:>5}",
            "I", "delta_1", "rate", "delta_2", "rate", "delta_inf", "rate"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>7}  {:>11.4e}  {:>5}  {:>11.4e}  {:>5}  {:>11.4e}  {:>5}",
                r.nodes,
                r.errors[0],
                fmt_rate(r.rates[0]),
                r.errors[1],
                fmt_rate(r.rates[1]),
                r.errors[2],
                fmt_rate(r.rates[2]),
            );
        }
        s
    }

    /// CSV with full-precision errors; undefined rates are empty fields.
    pub fn to_csv(&self) -> String {
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let mut s = String::from("nodes,delta_1,rate_1,delta_2,rate_2,delta_inf,rate_inf,wall_seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{},{:.16e},{},{:.16e},{},{:.3}",
                r.nodes,
                r.errors[0],
                fmt_rate(r.rates[0]),
                r.errors[1],
                fmt_rate(r.rates[1]),
                r.errors[2],
                fmt_rate(r.rates[2]),
                r.wall.as_secs_f64(),
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), AppError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        }
        std::fs::write(path, self.to_csv()).map_err(|e| AppError::io(path, e))
    }
}

/// Runs `cfg` on each node count of the ladder (1D problems) and measures
/// the consolidated errors at the final time. Fails on invariant violations.
pub fn convergence_study(cfg: &RunConfig, nodes: &[usize]) -> Result<ConvergenceTable, AppError> {
    if nodes.len() < 2 {
        return Err(AppError::TooFewLevels(nodes.len()));
    }
    let problem = cfg.problem()?;
    if problem.exact.is_none() {
        return Err(AppError::NoExactSolution(problem.kind));
    }
    if problem.dim != 1 {
        return Err(AppError::Config("convergence studies are one-dimensional".into()));
    }
    let mut data = Vec::with_capacity(nodes.len());
    for &n in nodes {
        if n < 3 {
            return Err(AppError::Config(format!("need at least 3 nodes, got {n}")));
        }
        let mut level = cfg.clone();
        level.cells = Some(vec![n - 1]);
        level.output.path = None;
        let sim = simulate(&level)?;
        InvariantCheck::new(&sim.state.idp, level.relax).into_result()?;
        let t = sim.state.time();
        let exact = sim.problem.exact_field(sim.solver.graph(), t).ok_or(AppError::NoExactSolution(problem.kind))?;
        let mut errors = [0.0; 3];
        for (e, kind) in errors.iter_mut().zip(NormKind::ALL) {
            *e = error_norm(sim.solver.graph(), &sim.state.field, &exact, kind);
        }
        data.push((n, errors, sim.wall));
    }
    Ok(ConvergenceTable::from_errors(problem.kind, &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_errors_leave_rates_blank() {
        let t = ConvergenceTable::from_errors(
            ProblemKind::Rp1,
            &[(101, [0.0; 3], Duration::ZERO), (201, [0.0; 3], Duration::ZERO)],
        );
        assert!(t.rows.iter().all(|r| r.rates == [None; 3]));
        assert!(t.to_csv().lines().nth(2).unwrap().contains(",,"));
        assert_eq!(t.mean_rate(0, 1), None);
    }

    #[test]
    fn rates_are_log2_ratios_on_doubling() {
        let data = [
            (101, [1e-2, 2e-2, 4e-2], Duration::ZERO),
            (201, [1.25e-3, 5e-3, 1e-2], Duration::ZERO),
            (401, [1.5625e-4, 1.25e-3, 2.5e-3], Duration::ZERO),
        ];
        let t = ConvergenceTable::from_errors(ProblemKind::SmoothWave, &data);
        for r in &t.rows[1..] {
            assert!((r.rates[0].unwrap() - 3.0).abs() < 1e-12);
            assert!((r.rates[1].unwrap() - 2.0).abs() < 1e-12);
            assert!((r.rates[2].unwrap() - 2.0).abs() < 1e-12);
        }
        assert!((t.mean_rate(0, 2).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(t.mean_rate(0, 3), None);
        // the emitted CSV reproduces its own rates
        for (a, b) in t.to_csv().lines().skip(2).zip(t.to_csv().lines().skip(1)) {
            let fine: Vec<&str> = a.split(',').collect();
            let coarse: Vec<&str> = b.split(',').collect();
            let e = |v: &str| v.parse::<f64>().unwrap();
            let r = (e(coarse[1]) / e(fine[1])).log2();
            assert!((r - e(fine[2])).abs() < 1e-12);
        }
        assert_eq!(t.to_table().lines().count(), 4);
    }

    #[test]
    fn study_needs_two_levels_and_an_exact_solution() {
        let cfg = RunConfig::for_problem(ProblemKind::Rp1);
        assert!(matches!(convergence_study(&cfg, &[101]), Err(AppError::TooFewLevels(1))));
        let wc = RunConfig::for_problem(ProblemKind::WoodwardColella);
        assert!(matches!(convergence_study(&wc, &[11, 21]), Err(AppError::NoExactSolution(_))));
    }

    #[test]
    fn coarse_rp1_study_converges() {
        let mut cfg = RunConfig::for_problem(ProblemKind::Rp1);
        cfg.t_final = Some(0.05);
        let t = convergence_study(&cfg, &[51, 101, 201]).unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].errors[0] < w[0].errors[0]));
        let r = t.rows[2].rates[0].unwrap();
        assert!(r > 0.4 && r < 1.5, "{r}");
    }
}
