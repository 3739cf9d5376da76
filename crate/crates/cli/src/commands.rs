use std::f64::consts::PI;

use hypctl::carleman::{choose_beta, observability_sweep, weighted_identity_residual, CarlemanWeight, Closure, SweepConfig};
use hypctl::control::{assemble_control_map, observability_spectrum, synthesize_control, ControlMap, Spectrum};
use hypctl::discretization::{build_grid, extract_trace, Grid, StateField};
use hypctl::geometry::{best_linear_eta, minimal_time, random_seeds, search_linear_eta, trace_rays, RayIssue, WeightCandidate};
use hypctl::output::{Cell, CsvTable};
use hypctl::rng::{normal_vec, seeded};
use hypctl::stochastic::{AdaptedProcess, ScenarioTree, Solver};
use hypctl::system::to_toml;
use log::info;
use toml::Value;

use crate::args::{Command, Target};
use crate::artifacts::Artifacts;
use crate::run_config::{ConfigError, Run, RunConfig};

/// Below this `σ_min` a failed control run is reported as uncontrollable.
pub const UNCONTROLLABLE_SIGMA: f64 = 1e-6;
/// Tolerances of the ray checks.
const RAY_DECAY_TOL: f64 = 1e-4;
const RAY_EXIT_TOL: f64 = 1e-3;

pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INVARIANT: u8 = 3;
    pub const UNCONTROLLABLE: u8 = 4;
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(std::io::Error),
    Core(hypctl::Error),
    /// Computation finished but a checked property does not hold.
    Verdict {
        code: u8,
        message: String,
    },
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Core(hypctl::Error::Config(_)) => exit::CONFIG,
            Failure::Io(_) => exit::IO,
            Failure::Core(_) => exit::INVARIANT,
            Failure::Verdict { code, .. } => *code,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Io(e) => write!(f, "io error: {e}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Verdict { message, .. } => f.write_str(message),
        }
    }
}

impl From<hypctl::Error> for Failure {
    fn from(e: hypctl::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

type Outcome = Result<(), Failure>;

fn verdict(code: u8, message: impl Into<String>) -> Failure {
    Failure::Verdict {
        code,
        message: message.into(),
    }
}

pub fn resolve(cmd: &Command) -> Result<Run, ConfigError> {
    let a = cmd.args();
    let file = match &a.run {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    file.overlay(a).resolve()
}

/// Runs one subcommand and returns the process exit code.
pub fn execute(cmd: &Command) -> u8 {
    let run = match resolve(cmd) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hypctl {}: config error: {e}", cmd.name());
            return exit::CONFIG;
        }
    };
    let mut art = match Artifacts::create(&run.out, cmd.name()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("hypctl {}: cannot create {}: {e}", cmd.name(), run.out.display());
            return exit::IO;
        }
    };
    let result = dispatch(cmd, &run, &mut art);
    let (code, message) = match &result {
        Ok(()) => (exit::OK, None),
        Err(f) => (f.code(), Some(f.to_string())),
    };
    if let Err(e) = art.finish(&run.echo(), code, message.as_deref()) {
        eprintln!("hypctl {}: cannot write artifacts: {e}", cmd.name());
        return exit::IO;
    }
    match message {
        Some(m) => eprintln!("hypctl {}: {m}", cmd.name()),
        None => println!("hypctl {}: ok, artifacts in {}", cmd.name(), run.out.display()),
    }
    code
}

fn dispatch(cmd: &Command, run: &Run, art: &mut Artifacts) -> Outcome {
    art.set("system", run.spec.label.as_str());
    if cmd.args().dump_config {
        art.write_text("system.toml", &to_toml(&run.spec))?;
    }
    run.spec.validate()?;
    art.set("symmetric", true);
    match cmd {
        Command::Validate(_) => validate(run, art),
        Command::CheckCondition(_) => check_condition(run, art),
        Command::Rays(_) => rays(run, art),
        Command::Simulate(_) => simulate(run, art),
        Command::Control(_) => control(run, art),
        Command::Observability(_) => observability(run, art),
        Command::Carleman(_) => carleman(run, art),
        Command::Report(_) => report(run, art),
    }
}

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn floats(v: &[f64]) -> Vec<Cell<'static>> {
    v.iter().map(|&x| Cell::F(x)).collect()
}

fn grid(run: &Run) -> Result<Grid, Failure> {
    Ok(build_grid(&run.spec, &run.cells, run.cfl)?)
}

fn solver_at(run: &Run, horizon: f64) -> Result<Solver, Failure> {
    Ok(Solver::new(grid(run)?, ScenarioTree::new(horizon, run.depth)?)?)
}

fn control_map(run: &Run, horizon: f64) -> Result<ControlMap, Failure> {
    Ok(assemble_control_map(solver_at(run, horizon)?, run.channel_options())?)
}

/// Product of `sin²` bumps over the axes, vanishing on the boundary.
fn bump(run: &Run, x: &[f64]) -> f64 {
    let d = &run.spec.domain;
    (0..x.len()).map(|i| (PI * (x[i] - d.lo()[i]) / d.width(i)).sin().powi(2)).product()
}

fn bump_field(run: &Run, g: &Grid) -> StateField {
    let n = g.state_dim();
    let values = g
        .centers()
        .iter()
        .flat_map(|x| (0..n).map(move |j| bump(run, x) / (j + 1) as f64))
        .collect();
    StateField { n, values }
}

/// Certified weight, or the `decay condition` invariant error.
fn certified_weight(run: &Run) -> Result<(WeightCandidate, f64), Failure> {
    let w = search_linear_eta(&run.spec)?;
    let t0 = minimal_time(&w)?;
    Ok((w, t0))
}

fn report_weight(art: &mut Artifacts, w: &WeightCandidate) {
    art.set_floats("eta_gradient", &w.grad_at(&vec![0.0; w.grad_eta.len()]));
    art.set("eta_offset", w.eta_at(&vec![0.0; w.grad_eta.len()]));
    art.set("eta", eta_text(w));
    art.set("c0", w.c0);
    art.set("eta_min", w.eta_min);
    art.set("eta_max", w.eta_max);
}

/// `η` as text, e.g. `-x1` or `-0.6*x1 - 0.8*x2`.
fn eta_text(w: &WeightCandidate) -> String {
    let zero = vec![0.0; w.grad_eta.len()];
    let mut terms: Vec<(f64, String)> = w
        .grad_at(&zero)
        .iter()
        .enumerate()
        .filter(|(_, g)| **g != 0.0)
        .map(|(i, &g)| {
            (
                g,
                if g.abs() == 1.0 {
                    format!("x{}", i + 1)
                } else {
                    format!("{}*x{}", g.abs(), i + 1)
                },
            )
        })
        .collect();
    let c = w.eta_at(&zero);
    if c != 0.0 || terms.is_empty() {
        terms.push((c, format!("{}", c.abs())));
    }
    let mut s = String::new();
    for (k, (v, t)) in terms.iter().enumerate() {
        let sign = match (k, *v < 0.0) {
            (0, true) => "-",
            (0, false) => "",
            (_, true) => " - ",
            (_, false) => " + ",
        };
        s.push_str(sign);
        s.push_str(t);
    }
    s
}

fn validate(run: &Run, art: &mut Artifacts) -> Outcome {
    let g = grid(run)?;
    let n = g.dim();
    let mut header = vec!["face".to_string(), "cell".to_string()];
    header.extend(coord_header("x", n));
    header.extend(["n_plus", "n_zero", "n_minus", "lambda_min", "lambda_max"].map(String::from));
    let mut t = CsvTable::new(&header);
    let mut faces = std::collections::BTreeMap::new();
    for b in &g.boundary {
        let ev = b.dec.eigenvalues();
        let name = b.face.name();
        let mut row = vec![Cell::S(&name), Cell::U(b.cell)];
        row.extend(floats(&b.x));
        let (lo, hi) = ev
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        row.extend([
            Cell::U(b.dec.n_plus),
            Cell::U(b.dec.n_zero),
            Cell::U(b.dec.n_minus),
            Cell::F(lo),
            Cell::F(hi),
        ]);
        t.push(&row);
        let e = faces.entry(name).or_insert((usize::MAX, 0usize));
        *e = (e.0.min(b.dec.n_minus), e.1.max(b.dec.n_minus));
    }
    art.write_csv("faces.csv", &t)?;
    art.set("state_dim", run.spec.state_dim as i64);
    art.set("space_dim", n as i64);
    art.set("boundary_cells", g.boundary.len() as i64);
    art.set("u_len", g.u_len() as i64);
    art.set(
        "warnings",
        Value::Array(g.warnings.iter().map(|w| Value::String(w.clone())).collect()),
    );
    let faces: toml::Table = faces
        .into_iter()
        .map(|(name, (lo, hi))| {
            let mut f = toml::Table::new();
            f.insert("n_minus_min".into(), Value::Integer(lo as i64));
            f.insert("n_minus_max".into(), Value::Integer(hi as i64));
            (name, Value::Table(f))
        })
        .collect();
    art.set("faces", Value::Table(faces));
    Ok(())
}

fn check_condition(run: &Run, art: &mut Artifacts) -> Outcome {
    let w = best_linear_eta(&run.spec)?;
    report_weight(art, &w);
    let c = &w.certification;
    let n = run.spec.space_dim();
    let t0 = if w.certified() { minimal_time(&w)? } else { f64::NAN };
    let mut header: Vec<String> = ["eta_offset"].map(String::from).to_vec();
    header.extend(coord_header("eta_grad_", n));
    header.extend(["c0", "min_m", "margin"].map(String::from));
    header.extend(coord_header("witness_", n));
    header.extend(["eta_min", "eta_max", "T0"].map(String::from));
    let zero = vec![0.0; n];
    let mut row = vec![Cell::F(w.eta_at(&zero))];
    row.extend(floats(&w.grad_at(&zero)));
    row.extend([Cell::F(c.c0), Cell::F(c.min_m), Cell::F(c.margin)]);
    row.extend(floats(&c.witness));
    row.extend([Cell::F(w.eta_min), Cell::F(w.eta_max), Cell::F(t0)]);
    let mut t = CsvTable::new(&header);
    t.push(&row);
    art.write_csv("condition.csv", &t)?;
    art.set("min_m", c.min_m);
    art.set("margin", c.margin);
    art.set_floats("witness", &c.witness);
    art.set("T0", t0);
    art.set("certified", w.certified());
    if let Some(dir) = &w.direction {
        art.set_floats("direction", dir);
    }
    if !w.certified() {
        return Err(verdict(
            exit::INVARIANT,
            format!("invariant `decay condition` violated: c0 = {:.6e} at witness {:?}", c.c0, c.witness),
        ));
    }
    Ok(())
}

fn rays(run: &Run, art: &mut Artifacts) -> Outcome {
    let (w, t0) = certified_weight(run)?;
    report_weight(art, &w);
    art.set("T0", t0);
    let n = run.spec.space_dim();
    let seeds = random_seeds(&run.spec, run.rays, run.seed);
    let (horizon, dt) = (2.0 * t0, 1e-3 * t0);
    let traced = trace_rays(&run.spec, &w, &seeds, horizon, dt);

    let mut header: Vec<String> = ["ray", "branch", "s"].map(String::from).to_vec();
    header.extend(coord_header("x", n));
    header.extend(coord_header("varpi", n));
    header.extend(["lambda", "eta"].map(String::from));
    let mut samples = CsvTable::new(&header);
    let mut sh: Vec<String> = ["ray", "branch"].map(String::from).to_vec();
    sh.extend(coord_header("x0_", n));
    sh.extend(["exit_time", "exit_bound", "max_deta_ds", "issue", "ok"].map(String::from));
    let mut summary = CsvTable::new(&sh);
    let (mut clean, mut ambiguous, mut violations, mut worst) = (0usize, 0usize, 0usize, f64::NEG_INFINITY);
    for (i, (seed, r)) in seeds.iter().zip(traced).enumerate() {
        let ray = r?;
        for s in &ray.samples {
            let mut row = vec![Cell::U(i), Cell::U(ray.branch), Cell::F(s.s)];
            row.extend(floats(&s.x));
            row.extend(floats(&s.varpi));
            row.extend([Cell::F(s.lambda), Cell::F(s.eta)]);
            samples.push(&row);
        }
        let bound = (w.eta_at(&seed.x0) - w.eta_min) / w.c0 + RAY_EXIT_TOL;
        let issue = match &ray.issue {
            None => "none",
            Some(RayIssue::BranchAmbiguity { .. }) => "branch-ambiguity",
            Some(RayIssue::MomentumDrift { .. }) => "momentum-drift",
        };
        let ok = if ray.is_clean() {
            clean += 1;
            worst = worst.max(ray.max_deta_ds);
            ray.max_deta_ds <= -w.c0 + RAY_DECAY_TOL && ray.exit_time.is_some_and(|t| t <= bound)
        } else {
            ambiguous += 1;
            true
        };
        violations += usize::from(!ok);
        let mut row = vec![Cell::U(i), Cell::U(ray.branch)];
        row.extend(floats(&seed.x0));
        row.extend([
            Cell::F(ray.exit_time.unwrap_or(f64::NAN)),
            Cell::F(bound),
            Cell::F(ray.max_deta_ds),
            Cell::S(issue),
            Cell::U(usize::from(ok)),
        ]);
        summary.push(&row);
    }
    art.write_csv("rays.csv", &samples)?;
    art.write_csv("rays_summary.csv", &summary)?;
    art.set("rays", seeds.len() as i64);
    art.set("clean", clean as i64);
    art.set("ambiguous", ambiguous as i64);
    art.set("violations", violations as i64);
    art.set("max_deta_ds", worst);
    art.set("decay_bound", -w.c0 + RAY_DECAY_TOL);
    art.set("horizon", horizon);
    art.set("dt", dt);
    if violations > 0 {
        return Err(verdict(
            exit::INVARIANT,
            format!("invariant `ray decay` violated on {violations} of {clean} clean rays"),
        ));
    }
    Ok(())
}

fn simulate(run: &Run, art: &mut Artifacts) -> Outcome {
    let s = solver_at(run, run.horizon)?;
    let (g, tree) = (&s.grid, &s.tree);
    let (n, d, cells) = (g.state_dim(), g.dim(), g.num_cells());
    let y0 = bump_field(run, g);
    let y = s.solve_forward(&y0, &s.zero_u(), &s.zero_v())?;
    let centers = g.centers();

    let mut header: Vec<String> = ["level", "t", "cell"].map(String::from).to_vec();
    header.extend(coord_header("x", d));
    header.extend(coord_header("mean_", n));
    header.extend(coord_header("std_", n));
    let mut snaps = CsvTable::new(&header);
    let mut energy = Vec::with_capacity(tree.depth + 1);
    for k in 0..=tree.depth {
        let mean = y.level_mean(k);
        let mut second = vec![0.0; mean.len()];
        for p in 0..tree.nodes_at(k) {
            second.iter_mut().zip(y.node(k, p)).for_each(|(a, v)| *a += v * v);
        }
        let pk = tree.prob(k);
        energy.push(second.iter().sum::<f64>() * pk * g.cell_weight());
        for c in 0..cells {
            let mut row = vec![Cell::U(k), Cell::F(tree.time(k)), Cell::U(c)];
            row.extend(floats(&centers[c]));
            row.extend(floats(&mean[c * n..(c + 1) * n]));
            let std: Vec<f64> = (c * n..(c + 1) * n)
                .map(|i| (second[i] * pk - mean[i] * mean[i]).max(0.0).sqrt())
                .collect();
            row.extend(floats(&std));
            snaps.push(&row);
        }
    }
    art.write_csv("snapshots.csv", &snaps)?;

    // per face: RMS over nodes of the characteristic blocks
    let mut faces: Vec<_> = g.boundary.iter().map(|b| b.face).collect();
    faces.dedup();
    let mut traces: Vec<(String, CsvTable)> = faces
        .iter()
        .map(|f| {
            let mut h: Vec<String> = ["level", "t", "cell"].map(String::from).to_vec();
            h.extend(coord_header("x", d));
            h.extend(["n_minus", "incoming_rms", "outgoing_rms"].map(String::from));
            (f.name(), CsvTable::new(&h))
        })
        .collect();
    for k in 0..=tree.depth {
        let mut acc = vec![(0.0, 0.0); g.boundary.len()];
        for p in 0..tree.nodes_at(k) {
            let field = StateField {
                n,
                values: y.node(k, p).to_vec(),
            };
            for (a, e) in acc.iter_mut().zip(extract_trace(g, &field)?.entries) {
                a.0 += e.incoming.iter().map(|v| v * v).sum::<f64>();
                a.1 += e.outgoing.iter().map(|v| v * v).sum::<f64>();
            }
        }
        for (b, a) in g.boundary.iter().zip(&acc) {
            let table = &mut traces.iter_mut().find(|(name, _)| *name == b.face.name()).expect("face table").1;
            let mut row = vec![Cell::U(k), Cell::F(tree.time(k)), Cell::U(b.cell)];
            row.extend(floats(&b.x));
            row.extend([
                Cell::U(b.dec.n_minus),
                Cell::F((a.0 * tree.prob(k)).sqrt()),
                Cell::F((a.1 * tree.prob(k)).sqrt()),
            ]);
            table.push(&row);
        }
    }
    for (name, table) in &traces {
        art.write_csv(&format!("trace_{name}.csv"), table)?;
    }

    // transposition identity with seeded random controls and terminal datum
    let mut rng = seeded(run.seed, 0x5349_4d55);
    let mut u = s.zero_u();
    u.data = normal_vec(&mut rng, u.data.len());
    let mut v = s.zero_v();
    v.data = normal_vec(&mut rng, v.data.len());
    let mut zt = AdaptedProcess::zeros(tree.depth, tree.depth, s.state_len());
    zt.data = normal_vec(&mut rng, zt.data.len());
    let dual = s.duality_residual(&y0, &u, &v, &zt)?;
    art.set_floats("energy", &energy);
    art.set("substeps", s.substeps as i64);
    art.set("dt_sub", s.dt_sub);
    art.set("duality_residual", dual.residual);
    art.set("duality_relative", dual.relative);
    if dual.relative.is_nan() || dual.relative > 1e-10 {
        return Err(verdict(
            exit::INVARIANT,
            format!("invariant `discrete duality` violated: relative residual {:.3e}", dual.relative),
        ));
    }
    Ok(())
}

fn target(run: &Run, map: &ControlMap) -> Result<AdaptedProcess, Failure> {
    let s = &map.solver;
    let n = s.grid.state_dim();
    let mut y1 = s.leaf_field(|p, x| {
        let b = bump(run, x) * s.tree.increment(p).signum();
        (0..n).map(|j| b / (j + 1) as f64).collect()
    })?;
    if run.target == Target::Random {
        let noise = normal_vec(&mut seeded(run.seed, 0x5441_5247), y1.data.len());
        y1.data.iter_mut().zip(noise).for_each(|(a, e)| *a += e);
    }
    Ok(y1)
}

fn process_csv(p: &AdaptedProcess, tree: &ScenarioTree) -> CsvTable {
    let mut t = CsvTable::new(&["level", "path", "slot", "value"]);
    for (k, path, slot, v) in p.rows(tree) {
        t.push(&[Cell::U(k), Cell::S(&path), Cell::U(slot), Cell::F(v)]);
    }
    t
}

fn control(run: &Run, art: &mut Artifacts) -> Outcome {
    let map = control_map(run, run.horizon)?;
    let y0 = StateField::zeros(map.solver.grid.state_dim(), map.solver.grid.num_cells());
    let y1 = target(run, &map)?;
    let (pair, rep) = synthesize_control(&map, &y0, &y1, run.tol, run.max_iter)?;
    info!("control: {} CG iterations, residual {:.3e}", rep.iterations, rep.residual);
    art.write_csv("control_u.csv", &process_csv(&pair.u, &map.solver.tree))?;
    art.write_csv("control_v.csv", &process_csv(&pair.v, &map.solver.tree))?;
    art.set("residual", rep.residual);
    art.set("cg_residual", rep.cg_residual);
    art.set("u_norm", rep.u_norm);
    art.set("v_norm", rep.v_norm);
    art.set("iterations", rep.iterations as i64);
    art.set("converged", rep.converged);
    art.set("stagnated", rep.stagnated);
    if let Some(s) = rep.sigma_min {
        art.set("cg_sigma_min", s);
    }
    if let Some(s) = rep.sigma_max {
        art.set("cg_sigma_max", s);
    }
    art.set("success", rep.success(run.tol));
    if rep.success(run.tol) {
        return Ok(());
    }
    // Both the Lanczos value and the Rayleigh quotient ‖Φ*r‖/‖r‖ of the final miss r
    // bound σ_min from above.
    let spec = observability_spectrum(&map, run.iters, run.seed)?;
    let mut miss = map.apply(&pair)?;
    miss.axpy(-1.0, &y1);
    let back = map.adjoint(&miss)?;
    let rayleigh = map.control_inner(&back, &back).max(0.0).sqrt() / map.leaf_norm(&miss);
    let sigma_min = spec.sigma_min.min(rayleigh);
    art.set("lanczos_sigma_min", spec.sigma_min);
    art.set("rayleigh_sigma_min", rayleigh);
    art.set("sigma_min", sigma_min);
    art.set("sigma_max", spec.sigma_max);
    if sigma_min < UNCONTROLLABLE_SIGMA {
        Err(verdict(
            exit::UNCONTROLLABLE,
            format!(
                "uncontrollable: residual {:.3e} > tol {:.1e} with sigma_min {:.3e}",
                rep.residual, run.tol, sigma_min
            ),
        ))
    } else {
        Err(verdict(
            exit::INVARIANT,
            format!(
                "invariant `control residual` violated: {:.3e} > tol {:.1e} (sigma_min {:.3e}, {} iterations)",
                rep.residual, run.tol, sigma_min, rep.iterations
            ),
        ))
    }
}

fn spectrum_row(t: &mut CsvTable, horizon: f64, s: &Spectrum) {
    t.push(&[
        Cell::F(horizon),
        Cell::F(s.sigma_min),
        Cell::F(s.sigma_min_lower),
        Cell::F(s.sigma_max),
        Cell::U(s.lanczos_steps),
        Cell::U(usize::from(s.converged)),
    ]);
}

const SPECTRUM_COLUMNS: [&str; 6] = ["T", "sigma_min", "sigma_min_lower", "sigma_max", "lanczos_steps", "converged"];

fn observability(run: &Run, art: &mut Artifacts) -> Outcome {
    let mut t = CsvTable::new(&SPECTRUM_COLUMNS);
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for &horizon in &run.t_list {
        let s = observability_spectrum(&control_map(run, horizon)?, run.iters, run.seed)?;
        spectrum_row(&mut t, horizon, &s);
        lo.push(s.sigma_min);
        hi.push(s.sigma_max);
    }
    art.write_csv("spectrum.csv", &t)?;
    art.set_floats("T_list", &run.t_list);
    art.set_floats("sigma_min", &lo);
    art.set_floats("sigma_max", &hi);
    if let Ok(w) = best_linear_eta(&run.spec) {
        if w.certified() {
            art.set("T0", minimal_time(&w)?);
        }
    }
    Ok(())
}

const IDENTITY_COLUMNS: [&str; 12] = [
    "lambda",
    "beta",
    "lhs",
    "boundary",
    "energy",
    "quadratic_variation",
    "divergence",
    "weight_term",
    "weighted_energy",
    "terminal_energy",
    "residual",
    "relative",
];

fn carleman(run: &Run, art: &mut Artifacts) -> Outcome {
    let (w, t0) = certified_weight(run)?;
    report_weight(art, &w);
    art.set("T0", t0);
    let cfg = SweepConfig {
        t_list: run.t_list.clone(),
        lambda_list: run.lambdas.clone(),
        cells: run.cells.clone(),
        depth: run.depth,
        cfl: run.cfl,
        options: run.channel_options(),
        iters: run.iters,
        seed: run.seed,
    };
    let sweep = observability_sweep(&run.spec, &w, &cfg)?;
    art.write_csv("sweep.csv", &sweep.to_csv())?;
    let mut rows = toml::value::Array::new();
    for r in &sweep.rows {
        let mut row = toml::Table::new();
        row.insert("T".into(), r.t.into());
        row.insert("lambda".into(), r.lambda.into());
        row.insert("beta".into(), r.beta.into());
        row.insert("beta_fallback".into(), r.beta_fallback.into());
        row.insert("sigma_min".into(), r.sigma_min.into());
        row.insert("weighted_ratio".into(), r.weighted_ratio.into());
        row.insert("contraction_factor".into(), r.contraction_factor.into());
        rows.push(Value::Table(row));
    }
    let contracting: Vec<f64> = run
        .t_list
        .iter()
        .map(|&t| sweep.contracting_lambda(t).unwrap_or(f64::NAN))
        .collect();
    art.set_floats("contracting_lambda", &contracting);

    // weighted identity along the backward solution for z_T = bump·(1 + W_T/(2√T));
    // a mean-zero datum would give z = 0 before the last step
    let s = solver_at(run, run.horizon)?;
    let beta = if run.horizon > t0 {
        choose_beta(w.c0, run.horizon, t0)?
    } else {
        0.5 * w.c0
    };
    let (tree, n) = (&s.tree, s.grid.state_dim());
    let zt = s.leaf_field(|p, x| {
        let b = bump(run, x) * (1.0 + 0.5 * tree.brownian(tree.depth, p) / run.horizon.sqrt());
        (0..n).map(|j| b / (j + 1) as f64).collect()
    })?;
    let z = s.solve_backward(&zt)?.z;
    let mut t = CsvTable::new(&IDENTITY_COLUMNS);
    let mut worst: f64 = 0.0;
    for &lambda in &run.lambdas {
        let weight = CarlemanWeight::new(beta, lambda, w.clone())?;
        let r = weighted_identity_residual(&s, &weight, &z, Closure::Adjoint)?;
        worst = worst.max(r.relative);
        t.push(&[
            Cell::F(lambda),
            Cell::F(beta),
            Cell::F(r.lhs),
            Cell::F(r.boundary),
            Cell::F(r.energy),
            Cell::F(r.quadratic_variation),
            Cell::F(r.divergence),
            Cell::F(r.weight_term),
            Cell::F(r.weighted_energy),
            Cell::F(r.terminal_energy),
            Cell::F(r.residual),
            Cell::F(r.relative),
        ]);
    }
    art.write_csv("identity.csv", &t)?;
    art.set("identity_beta", beta);
    art.set("identity_max_relative", worst);
    art.set("sweep", Value::Array(rows));
    Ok(())
}

fn report(run: &Run, art: &mut Artifacts) -> Outcome {
    let g = grid(run)?;
    let mut t = CsvTable::new(&["quantity", "value"]);
    let put = |t: &mut CsvTable, art: &mut Artifacts, key: &str, v: f64| {
        t.push(&[Cell::S(key), Cell::F(v)]);
        art.set(key, v);
    };
    put(&mut t, art, "state_dim", run.spec.state_dim as f64);
    put(&mut t, art, "boundary_cells", g.boundary.len() as f64);
    put(&mut t, art, "u_len", g.u_len() as f64);
    let w = best_linear_eta(&run.spec)?;
    art.set("eta", eta_text(&w));
    put(&mut t, art, "c0", w.c0);
    let t0 = if w.certified() { minimal_time(&w)? } else { f64::NAN };
    put(&mut t, art, "T0", t0);
    put(&mut t, art, "T", run.horizon);
    let s = observability_spectrum(&control_map(run, run.horizon)?, run.iters, run.seed)?;
    put(&mut t, art, "sigma_min", s.sigma_min);
    put(&mut t, art, "sigma_max", s.sigma_max);
    art.write_csv("summary.csv", &t)?;
    art.set("certified", w.certified());
    art.set(
        "warnings",
        Value::Array(g.warnings.iter().map(|w| Value::String(w.clone())).collect()),
    );
    Ok(())
}
