//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line
//! to stderr (uncaptured) and the test fails if any criterion fails.
//!
//! Run with `cargo test --test acceptance`; the test profile is optimized.
//! `MSIDP_ACCEPTANCE_ONLY=3,4` restricts the run to the listed criteria.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use msidp::app::{convergence_study, simulate, InvariantCheck, ProblemKind, RunConfig};
use msidp::highorder::SurrogateEntropy;
use msidp::loworder::{bar_state, FieldState, Primitive};
use msidp::mesh::DiscreteGraph;
use msidp::riemann::{lambda_hat, phi, riemann_average, velocity_scale, RiemannError, RiemannFan, Side, SideData};
use msidp::stepper::{BoundaryConditions, RunState, Scheme, Solver, SolverOptions};
use msidp::thermo::{PrimitiveState, SpeciesTable};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const SEED: u64 = 0x5eed_2024;
const SMOOTH_NODES: [usize; 6] = [101, 201, 401, 801, 1601, 3201];
const RP_NODES: [usize; 4] = [401, 801, 1601, 3201];
const SMOOTH_REFERENCE_801: f64 = 1.7895e-5;

/// Strict Woodward-Colella snapshots, shared by the indicator criterion.
static WC_SNAPSHOTS: OnceLock<(Vec<PathBuf>, f64, f64)> = OnceLock::new();

fn out_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn log_uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_table(rng: &mut StdRng) -> SpeciesTable {
    let mut pair = || {
        let cv = rng.gen_range(0.5..3.0);
        let gamma = rng.gen_range(1.05..2.0);
        (gamma * cv, cv)
    };
    let pairs = [pair(), pair()];
    SpeciesTable::from_pairs(&pairs).expect("valid heat capacities")
}

fn random_primitive(rng: &mut StdRng, dim: usize) -> PrimitiveState {
    let y1 = if rng.gen_bool(0.1) { rng.gen_range(0..2) as f64 } else { rng.gen_range(0.0..1.0) };
    let rho = log_uniform(rng, 1e-2, 1e2);
    let p = log_uniform(rng, 1e-2, 1e3);
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    PrimitiveState::two_species(y1, rho, &v, p)
}

fn smooth_wave() -> Outcome {
    let cfg = RunConfig::for_problem(ProblemKind::SmoothWave);
    let table = convergence_study(&cfg, &SMOOTH_NODES)?;
    table.write_csv(&out_dir().join("smooth_wave_study.csv"))?;
    say(&table.to_table());
    let last = table.rows.last().expect("rows");
    let r1 = last.rates[0].unwrap_or(f64::NAN);
    let rinf = last.rates[2].unwrap_or(f64::NAN);
    let wall: Duration = table.rows.iter().map(|r| r.wall).sum();
    let at_801 = table.rows.iter().find(|r| r.nodes == 801).map_or(f64::NAN, |r| r.errors[0]);
    let factor = at_801 / SMOOTH_REFERENCE_801;
    let ok = r1 >= 2.5 && rinf >= 2.0 && secs(wall) <= 120.0;
    Ok((
        ok,
        format!(
            "finest-pair rates delta_1 {r1:.2} (>= 2.5), delta_inf {rinf:.2} (>= 2.0); total {:.1} s (<= 120 s); \
             report only: delta_1 at I=801 is {at_801:.3e}, {factor:.1}x the reference {SMOOTH_REFERENCE_801:.2e} \
             (within 5x: {})",
            secs(wall),
            factor <= 5.0 && factor >= 0.2
        ),
    ))
}

fn riemann_problems() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [ProblemKind::Rp1, ProblemKind::Rp2] {
        let cfg = RunConfig::for_problem(kind);
        let table = convergence_study(&cfg, &RP_NODES)?;
        table.write_csv(&out_dir().join(format!("{kind}_study.csv")))?;
        say(&table.to_table());
        let mean = table.mean_rate(0, 3).unwrap_or(f64::NAN);
        let wall: Duration = table.rows.iter().map(|r| r.wall).sum();
        let pass = (0.7..=1.2).contains(&mean) && secs(wall) <= 120.0;
        ok &= pass;
        // cost grows like I² (nodes times steps), reported for the I = 12801 level
        let finest = table.rows.last().map_or(0.0, |r| secs(r.wall));
        parts.push(format!(
            "{kind}: mean delta_1 rate {mean:.3} in [0.7, 1.2], {:.1} s (<= 120 s), \
             report only: I = 12801 level estimated at {:.0} s on this machine",
            secs(wall),
            16.0 * finest
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn exact_solver() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let (mut solved, mut vacuum) = (0usize, 0usize);
    let (mut worst_phi, mut worst_order, mut worst_entropy) = (0.0f64, 0.0f64, 0.0f64);
    while solved < 10_000 {
        let table = random_table(&mut rng);
        let ul = table.primitive_to_conserved(&random_primitive(&mut rng, 1))?;
        let ur = table.primitive_to_conserved(&random_primitive(&mut rng, 1))?;
        let fan = match RiemannFan::from_states(&table, &ul, &ur, &[1.0]) {
            Ok(f) => f,
            Err(RiemannError::Vacuum(_)) => {
                vacuum += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        solved += 1;
        let scale = velocity_scale(&fan.left, &fan.right);
        worst_phi = worst_phi.max(phi(fan.star.p_star, &fan.left, &fan.right).abs() / scale);

        let b = fan.breakpoints();
        for w in b.windows(2) {
            worst_order = worst_order.max((w[0] - w[1]) / scale);
        }

        // entropy does not depend on velocity; evaluating it at rest avoids
        // cancellation between kinetic and total energy near vacuum
        let entropy = |rho: f64, p: f64, side: Side| {
            let w = PrimitiveState::new(fan.mass_fractions(side), rho, &[0.0], p);
            table.specific_entropy(&table.primitive_to_conserved(&w)?)
        };
        let s_min = entropy(fan.left.rho, fan.left.p, Side::Left)?.min(entropy(fan.right.rho, fan.right.p, Side::Right)?);
        let span = (b[4] - b[0]).max(1e-3 * scale);
        for k in 0..1000 {
            let xi = b[0] - 0.1 * span + 1.2 * span * (k as f64 + 0.5) / 1000.0;
            let sample = fan.evaluate(xi);
            let s = entropy(sample.rho, sample.p, sample.side)?;
            worst_entropy = worst_entropy.max((s_min - s) / s_min.abs().max(1.0));
        }
    }
    let ok = worst_phi <= 1e-12 && worst_order <= 1e-12 && worst_entropy <= 1e-10;
    Ok((
        ok,
        format!(
            "{solved} pairs ({vacuum} vacuum pairs skipped): max |phi(p*)|/scale {worst_phi:.2e} (<= 1e-12), \
             wave ordering slack {worst_order:.2e}, max entropy deficit {worst_entropy:.2e} (<= 1e-10)"
        ),
    ))
}

fn bar_states() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let table = random_table(&mut rng);
        let ul = table.primitive_to_conserved(&random_primitive(&mut rng, 1))?;
        let ur = table.primitive_to_conserved(&random_primitive(&mut rng, 1))?;
        let fan = match RiemannFan::from_states(&table, &ul, &ur, &[1.0]) {
            Ok(f) => f,
            Err(RiemannError::Vacuum(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        checked += 1;
        let lambda = lambda_hat(&SideData::from_state(&table, &ul, &[1.0])?, &SideData::from_state(&table, &ur, &[1.0])?);
        let wl = Primitive::from_state(&table, &ul, 1).ok_or("inadmissible left state")?;
        let wr = Primitive::from_state(&table, &ur, 1).ok_or("inadmissible right state")?;
        let mut bar = vec![0.0; ul.len()];
        bar_state(&ul, &ur, &wl, &wr, [0.5, 0.0], 0.5 * lambda, 2, 1, &mut bar);
        let avg = riemann_average(&fan, lambda, 1.0)?;
        for c in 0..bar.len() {
            let scale = avg[c].abs().max(ul[c].abs()).max(ur[c].abs());
            if scale > 0.0 {
                worst = worst.max((bar[c] - avg[c]).abs() / scale);
            }
        }
    }
    Ok((worst <= 1e-7, format!("{checked} pairs: max relative difference {worst:.2e} (<= 1e-7)")))
}

fn woodward_colella_config() -> RunConfig {
    let mut cfg = RunConfig::for_problem(ProblemKind::WoodwardColella);
    cfg.cells = Some(vec![3200]);
    cfg.relax = false;
    cfg.output.path = Some(out_dir().join("woodward_colella"));
    cfg.output.times = vec![0.015];
    cfg
}

fn strict_woodward_colella() -> Result<&'static (Vec<PathBuf>, f64, f64), Box<dyn std::error::Error>> {
    if WC_SNAPSHOTS.get().is_none() {
        let sim = simulate(&woodward_colella_config())?;
        let _ = WC_SNAPSHOTS.set((sim.snapshots.clone(), sim.state.idp.zeta_min, sim.state.idp.zeta_max));
    }
    Ok(WC_SNAPSHOTS.get().expect("set above"))
}

fn woodward_colella() -> Outcome {
    let strict = woodward_colella_config();
    let sim = simulate(&strict)?;
    let idp = sim.state.idp;
    let _ = WC_SNAPSHOTS.set((sim.snapshots.clone(), idp.zeta_min, idp.zeta_max));
    let check = InvariantCheck::new(&idp, false);
    let mut relaxed = strict.clone();
    relaxed.relax = true;
    relaxed.output = Default::default();
    let rsim = simulate(&relaxed)?;
    let rcheck = InvariantCheck::new(&rsim.state.idp, true);
    let ok = check.passed() && rcheck.passed();
    Ok((
        ok,
        format!(
            "relaxation off: {} stages, min alpha_rho {:.2e}, min eps {:.3e}, entropy deficit {:.2e} c_v, \
             violations {:?}; relaxation on: relaxed deficit {:.2e} c_v, bound violation {:.2e}, violations {:?}",
            idp.stages,
            idp.min_partial_density,
            idp.min_internal_energy,
            idp.max_entropy_deficit,
            check.violations,
            rsim.state.idp.max_relaxed_entropy_deficit,
            rsim.state.idp.max_bound_violation,
            rcheck.violations
        ),
    ))
}

fn conservation() -> Outcome {
    let mut cfg = RunConfig::for_problem(ProblemKind::SmoothWave);
    cfg.periodic = true;
    cfg.cells = Some(vec![800]);
    let sim = simulate(&cfg)?;
    let drift = sim.state.conservation_drift();
    let worst = drift.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 1e-12 && sim.check().passed(),
        format!("periodic smooth wave, {} steps: max relative drift {worst:.2e} (<= 1e-12)", sim.state.step),
    ))
}

fn random_field(rng: &mut StdRng, table: &SpeciesTable, dim: usize, n: usize) -> FieldState {
    let mut data = Vec::new();
    for _ in 0..n {
        let y1 = rng.gen_range(0.0..1.0);
        let rho = rng.gen_range(0.5..2.0);
        let p = rng.gen_range(0.5..2.0);
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = table.primitive_to_conserved(&PrimitiveState::two_species(y1, rho, &v, p)).expect("admissible");
        data.extend_from_slice(&u);
    }
    FieldState::from_data(2, dim, data)
}

fn one_step(graph: &DiscreteGraph, table: &SpeciesTable, field: &FieldState, opts: SolverOptions) -> FieldState {
    let mut solver = Solver::new(graph.clone(), table.clone(), opts, BoundaryConditions::new()).expect("solver");
    let mut state = RunState::new(graph, field.clone());
    solver.step(&mut state, 1e3).expect("step");
    state.field
}

fn relative_difference(a: &FieldState, b: &FieldState) -> f64 {
    let nc = a.n_components();
    let mut scale = vec![0.0f64; nc];
    for i in 0..a.n_nodes() {
        for (s, v) in scale.iter_mut().zip(a.node(i)) {
            *s = s.max(v.abs());
        }
    }
    let mut worst = 0.0f64;
    for i in 0..a.n_nodes() {
        for c in 0..nc {
            worst = worst.max((a.node(i)[c] - b.node(i)[c]).abs() / scale[c].max(f64::MIN_POSITIVE));
        }
    }
    worst
}

fn limiter_extremes() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let table = SpeciesTable::from_pairs(&[(1.4, 1.0), (1.67, 1.0)])?;
    let graphs = [
        DiscreteGraph::build_1d_periodic(64, 0.0, 1.0)?,
        DiscreteGraph::build_1d(40, 0.0, 1.0)?,
        DiscreteGraph::build_2d(8, 6, [0.0, 0.0], [1.0, 0.75])?,
    ];
    let mut worst = [0.0f64; 2];
    for graph in &graphs {
        let dim = if graph.coords().iter().any(|x| x[1] != 0.0) { 2 } else { 1 };
        for _ in 0..3 {
            let field = random_field(&mut rng, &table, dim, graph.n_nodes());
            for (k, (fixed, scheme)) in [(0.0, Scheme::Low), (1.0, Scheme::High)].into_iter().enumerate() {
                let limited = SolverOptions { scheme: Scheme::Limited, fixed_limiter: Some(fixed), ..Default::default() };
                let reference = SolverOptions { scheme, ..Default::default() };
                let a = one_step(graph, &table, &field, limited);
                let b = one_step(graph, &table, &field, reference);
                worst[k] = worst[k].max(relative_difference(&b, &a));
            }
        }
    }
    Ok((
        worst[0] <= 1e-13 && worst[1] <= 1e-13,
        format!(
            "periodic, bounded 1D and 2D random fields: l=0 vs low order {:.2e}, l=1 vs high order {:.2e} (<= 1e-13)",
            worst[0], worst[1]
        ),
    ))
}

struct Snapshot {
    x: Vec<f64>,
    rho: Vec<f64>,
    y1: Vec<f64>,
    zeta: Vec<f64>,
}

fn read_snapshot(path: &std::path::Path) -> Result<Snapshot, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty snapshot")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("missing column {name}"));
    let (cx, crho, cy, cz) = (col("x")?, col("rho")?, col("Y_1")?, col("zeta")?);
    let mut s = Snapshot { x: vec![], rho: vec![], y1: vec![], zeta: vec![] };
    for line in lines {
        let v: Vec<f64> = line.split(',').map(str::parse).collect::<Result<_, _>>()?;
        s.x.push(v[cx]);
        s.rho.push(v[crho]);
        s.y1.push(v[cy]);
        s.zeta.push(v[cz]);
    }
    Ok(s)
}

fn entropy_indicator() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    // constant states
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let table = SpeciesTable::from_pairs(&[(1.4, 1.0), (1.67, 1.0)])?;
    let mut worst_const = 0.0f64;
    for graph in [
        DiscreteGraph::build_1d(30, 0.0, 1.0)?,
        DiscreteGraph::build_1d_periodic(30, 0.0, 1.0)?,
        DiscreteGraph::build_2d(7, 5, [0.0, 0.0], [1.0, 1.0])?,
    ] {
        let dim = if graph.coords().iter().any(|x| x[1] != 0.0) { 2 } else { 1 };
        for _ in 0..5 {
            let u = table.primitive_to_conserved(&random_primitive(&mut rng, dim))?;
            let data: Vec<f64> = (0..graph.n_nodes()).flat_map(|_| u.to_vec()).collect();
            let field = FieldState::from_data(2, dim, data);
            let mut solver = Solver::new(graph.clone(), table.clone(), SolverOptions::default(), BoundaryConditions::new())?;
            let zeta = solver.indicator(&field)?;
            worst_const = zeta.iter().copied().fold(worst_const, f64::max);
        }
    }
    ok &= worst_const == 0.0;
    parts.push(format!("constant states: max zeta {worst_const:e} (== 0)"));

    // Woodward-Colella snapshots
    let (snapshots, zeta_min, zeta_max) = strict_woodward_colella()?;
    ok &= *zeta_min >= 0.0 && *zeta_max <= 1.0;
    parts.push(format!("Woodward-Colella range [{zeta_min:.3}, {zeta_max:.3}] within [0, 1]"));
    for path in snapshots {
        let s = read_snapshot(path)?;
        let n = s.x.len();
        // boundary nodes are excluded: at a stagnant wall both the entropy
        // flux and its normalization vanish with the velocity
        let interior = 1..n - 1;
        let mut near_interface = 0.0f64;
        for i in 0..n - 1 {
            if (s.y1[i] - 0.5) * (s.y1[i + 1] - 0.5) <= 0.0 && s.y1[i] != s.y1[i + 1] {
                for j in i.saturating_sub(3).max(1)..(i + 5).min(n - 1) {
                    near_interface = near_interface.max(s.zeta[j]);
                }
            }
        }
        let (imax, zmax) = interior
            .clone()
            .map(|i| (i, s.zeta[i]))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let window = imax.saturating_sub(8)..(imax + 8).min(n - 1);
        let jump = window
            .map(|i| (s.rho[i + 1] - s.rho[i]).abs() / s.rho[i].min(s.rho[i + 1]))
            .fold(0.0, f64::max);
        let active = interior.clone().filter(|&i| s.zeta[i] > 0.1).count() as f64 / (n - 2) as f64;
        let pass = near_interface < 0.1 && zmax > 0.3 && jump > 0.05 && active < 0.05;
        ok &= pass;
        parts.push(format!(
            "{}: zeta at material interfaces {near_interface:.3} (< 0.1), peak {zmax:.3} (> 0.3) at x = {:.4} \
             beside a {:.0}% density jump, {:.2}% of nodes above 0.1 (< 5%)",
            path.file_name().and_then(|f| f.to_str()).unwrap_or("snapshot"),
            s.x[imax],
            100.0 * jump,
            100.0 * active
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn surrogate_gradient() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let dim = 1 + k % 2;
        let mixture = |rng: &mut StdRng| {
            let rho = log_uniform(rng, 0.1, 10.0);
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = log_uniform(rng, 0.1, 10.0);
            let mut w = vec![rho];
            w.extend(v.iter().map(|vd| rho * vd));
            w.push(rho * (e + 0.5 * v.iter().map(|x| x * x).sum::<f64>()));
            w
        };
        let reference = mixture(&mut rng);
        let w = mixture(&mut rng);
        let gamma = rng.gen_range(1.05..1.9);
        let eta = SurrogateEntropy::new(gamma, &reference, dim)?;
        let grad = eta.gradient(&w, dim)?;
        let mut fd = vec![0.0; w.len()];
        for q in 0..w.len() {
            let h = 1e-4 * w[q].abs().max(1e-2);
            let at = |s: f64| {
                let mut x = w.clone();
                x[q] += s * h;
                eta.eta(&x, dim).expect("admissible perturbation")
            };
            fd[q] = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h);
        }
        let err = grad.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    Ok((worst <= 1e-6, format!("100 states: max relative error {worst:.2e} (<= 1e-6)")))
}

fn shock_bubble() -> Outcome {
    let mut cfg = RunConfig::for_problem(ProblemKind::ShockBubble);
    cfg.cells = Some(vec![400, 32]);
    cfg.t_final = Some(200e-6);
    let start = Instant::now();
    let sim = simulate(&cfg)?;
    let wall = start.elapsed();
    let check = sim.check();
    let idp = sim.state.idp;
    Ok((
        check.passed() && idp.non_finite == 0 && secs(wall) <= 300.0,
        format!(
            "400x32 cells, {} steps, {:.1} s (<= 300 s): violations {:?}, non-finite {}, relaxed entropy deficit {:.2e}, \
             zeta in [{:.3}, {:.3}]",
            sim.state.step,
            secs(wall),
            check.violations,
            idp.non_finite,
            idp.max_relaxed_entropy_deficit,
            idp.zeta_min,
            idp.zeta_max
        ),
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("smooth wave convergence", smooth_wave),
        ("Riemann problem convergence", riemann_problems),
        ("exact Riemann solver", exact_solver),
        ("bar states equal Riemann averages", bar_states),
        ("invariant domain on Woodward-Colella", woodward_colella),
        ("conservation", conservation),
        ("limiter extremes reproduce low and high order", limiter_extremes),
        ("entropy indicator", entropy_indicator),
        ("surrogate entropy gradient", surrogate_gradient),
        ("2D shock-bubble smoke test", shock_bubble),
    ];
    // MSIDP_ACCEPTANCE_ONLY=3,4 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("MSIDP_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (n, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(n + 1))) {
            say(&format!("SKIP [{}] {name}", n + 1));
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if ok { "PASS" } else { "FAIL" };
        say(&format!("{tag} [{}] {name}: {detail} [{:.1} s]", n + 1, secs(start.elapsed())));
        if !ok {
            failed.push(n + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
