use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use msidp::app::output::dump_fields;
use msidp::app::{convergence_study, simulate, InvariantCheck, RunConfig};
use msidp::stepper::Scheme;

#[derive(Parser)]
#[command(version, about = "Multi-species invariant-domain preserving Euler solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Spatial scheme, overriding the configuration.
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    /// Bound relaxation, overriding the configuration.
    #[arg(long, global = true, value_enum)]
    relax: Option<Toggle>,
    /// Single worker thread; results are bitwise reproducible either way.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate to the final time and write CSV snapshots.
    Run { config: PathBuf },
    /// Sample the exact Riemann solution on the mesh at the final time.
    Riemann {
        config: PathBuf,
        /// Output CSV; defaults to `<output.path>/<problem>_exact.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study against the exact solution.
    Converge {
        config: PathBuf,
        /// Number of levels, doubling cells from the coarsest.
        #[arg(long)]
        levels: Option<usize>,
        /// Coarsest node count when `--levels` is used.
        #[arg(long, default_value_t = 101)]
        base: usize,
        /// Explicit node counts, overriding `--levels` and the configuration.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<usize>>,
        /// Also write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Low,
    High,
    Limited,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.scheme {
        cfg.scheme = match s {
            SchemeArg::Low => Scheme::Low,
            SchemeArg::High => Scheme::High,
            SchemeArg::Limited => Scheme::Limited,
        };
    }
    if let Some(r) = cli.relax {
        cfg.relax = matches!(r, Toggle::On);
    }
    Ok(cfg)
}

fn ladder(base: usize, levels: usize) -> Vec<usize> {
    (0..levels).map(|l| (base - 1) * (1 << l) + 1).collect()
}

fn run(cli: &Cli) -> Result<()> {
    let threads = if cli.deterministic { 1 } else { cli.threads };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("building thread pool")?;
    let mut stdout = io::stdout().lock();

    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let sim = simulate(&cfg)?;
            let drift = sim.state.conservation_drift();
            let idp = &sim.state.idp;
            writeln!(
                stdout,
                "{}: t = {:.6e}, {} steps, {} nodes, {:.2} s",
                sim.problem.kind,
                sim.state.time(),
                sim.state.step,
                sim.solver.graph().n_nodes(),
                sim.wall.as_secs_f64()
            )?;
            let drift: Vec<String> = drift.iter().map(|d| format!("{d:.3e}")).collect();
            writeln!(stdout, "  relative conservation drift per component [{}]", drift.join(", "))?;
            if idp.stages > 0 {
                writeln!(
                    stdout,
                    "  min alpha_rho {:.3e}, min eps {:.3e}, entropy deficit {:.3e} (relaxed {:.3e}), zeta in [{:.3}, {:.3}]",
                    idp.min_partial_density,
                    idp.min_internal_energy,
                    idp.max_entropy_deficit,
                    idp.max_relaxed_entropy_deficit,
                    idp.zeta_min,
                    idp.zeta_max
                )?;
            }
            for p in &sim.snapshots {
                writeln!(stdout, "  wrote {}", p.display())?;
            }
            InvariantCheck::new(idp, cfg.relax).into_result()?;
        }
        Command::Riemann { config, out } => {
            let cfg = load(cli, config)?;
            let problem = cfg.problem()?;
            let graph = problem.mesh(cfg.cells()?)?;
            let Some(exact) = problem.exact_field(&graph, problem.t_final) else {
                bail!("{} has no exact solution", problem.kind);
            };
            let path = match (out, &cfg.output.path) {
                (Some(p), _) => p.clone(),
                (None, Some(dir)) => dir.join(format!("{}_exact.csv", problem.kind)),
                (None, None) => bail!("no output path: pass --out or set output.path"),
            };
            dump_fields(&path, &graph, &problem.table, &exact, &vec![0.0; graph.n_nodes()])?;
            writeln!(stdout, "wrote {}", path.display())?;
        }
        Command::Converge { config, levels, base, nodes, csv } => {
            let cfg = load(cli, config)?;
            let nodes = match (nodes, levels) {
                (Some(n), _) => n.clone(),
                (None, Some(l)) => ladder(*base, *l),
                (None, None) => cfg.study.nodes.clone(),
            };
            let table = convergence_study(&cfg, &nodes)?;
            write!(stdout, "{}", table.to_table())?;
            if let Some(path) = csv {
                table.write_csv(path)?;
                writeln!(stdout, "wrote {}", path.display())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe is not a failure of the run.
        Err(e) if e.chain().any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
