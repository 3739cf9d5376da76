use rayon::prelude::*;

use super::{choose_beta, CarlemanWeight};
use crate::control::{assemble_control_map, lanczos_extremes, leaf_from, observability_spectrum, ChannelOptions, ControlMap, SymOperator};
use crate::discretization::{build_grid, StateField};
use crate::geometry::{minimal_time, WeightCandidate};
use crate::output::{Cell, CsvTable};
use crate::stochastic::{ScenarioTree, Solver};
use crate::system::SystemSpec;
use crate::{Error, Result};

pub const DEFAULT_LAMBDAS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Required bound on the initial-time weighted energy relative to the terminal one.
pub const CONTRACTION_TARGET: f64 = 0.5;

/// Keeps the weighted ratio finite when the observation Gramian is singular.
const RATIO_GUARD: f64 = 1e-14;

pub const SWEEP_COLUMNS: [&str; 5] = ["T", "lambda", "sigma_min", "weighted_ratio", "contraction_factor"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub t_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    pub cells: Vec<usize>,
    pub depth: usize,
    pub cfl: f64,
    pub options: ChannelOptions,
    /// Lanczos steps for every extreme-eigenvalue estimate.
    pub iters: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            t_list: vec![0.5, 1.0, 1.5, 2.0],
            lambda_list: DEFAULT_LAMBDAS.to_vec(),
            cells: vec![40],
            depth: 8,
            cfl: 0.9,
            options: ChannelOptions::default(),
            iters: 80,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub lambda: f64,
    pub beta: f64,
    /// `β = c0/2` was used because `T ≤ T0`.
    pub beta_fallback: bool,
    pub sigma_min: f64,
    /// `max E‖θ(T) z_T‖² / (E∫‖θ Λ₋ξ₋‖² + E∫‖θ Z‖²)` over terminal data.
    pub weighted_ratio: f64,
    /// `max ‖θ(0) z(0)‖² / E‖θ(T) z_T‖²` over terminal data.
    pub contraction_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub c0: f64,
    pub t0: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Smallest swept `λ` whose contraction factor is at most one half, per `T`.
    pub fn contracting_lambda(&self, t: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.t == t && r.contraction_factor <= CONTRACTION_TARGET)
            .map(|r| r.lambda)
            .min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&SWEEP_COLUMNS);
        for r in &self.rows {
            t.push(&[
                Cell::F(r.t),
                Cell::F(r.lambda),
                Cell::F(r.sigma_min),
                Cell::F(r.weighted_ratio),
                Cell::F(r.contraction_factor),
            ]);
        }
        t
    }
}

/// Pointwise weight multipliers, one vector per space.
struct Weights {
    leaf: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    initial: Vec<f64>,
}

fn weights(map: &ControlMap, w: &CarlemanWeight) -> Weights {
    let s = &map.solver;
    let (tree, grid) = (&s.tree, &s.grid);
    let n = grid.state_dim();
    let centers = grid.centers();
    let per_cells = |t: f64| -> Vec<f64> { centers.iter().flat_map(|x| std::iter::repeat_n(w.theta(t, x), n)).collect() };
    let horizon = tree.time(tree.depth);
    let leaf_row = per_cells(horizon);
    let leaf = std::iter::repeat_n(leaf_row.as_slice(), tree.leaves()).flatten().copied().collect();
    let mut dof_x = vec![Vec::new(); grid.u_len()];
    for b in &grid.boundary {
        for j in 0..b.n_minus() {
            dof_x[b.u_offset + j] = b.x.clone();
        }
    }
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for k in 0..tree.depth {
        let tk = tree.time(k);
        let mut u_row = Vec::with_capacity(s.u_width());
        for sub in 0..s.substeps {
            let t = tk + sub as f64 * s.dt_sub;
            u_row.extend(dof_x.iter().map(|x| w.theta(t, x)));
        }
        let v_row = per_cells(tk);
        for _ in 0..tree.nodes_at(k) {
            u.extend_from_slice(&u_row);
            v.extend_from_slice(&v_row);
        }
    }
    Weights {
        leaf,
        u,
        v,
        initial: per_cells(0.0),
    }
}

fn scaled(x: &[f64], by: &[f64], power: i32) -> Vec<f64> {
    x.iter().zip(by).map(|(a, b)| a * b.powi(power)).collect()
}

/// `g ↦ θ_T⁻¹ Φ θ² Φ* θ_T⁻¹ g`; its smallest eigenvalue is the inverse of the
/// largest weighted observability ratio.
struct WeightedGramian<'a> {
    map: &'a ControlMap,
    w: &'a Weights,
}

impl SymOperator for WeightedGramian<'_> {
    fn dim(&self) -> usize {
        self.map.leaf_len()
    }

    fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let x = leaf_from(self.map, scaled(g, &self.w.leaf, -1))?;
        let mut c = self.map.adjoint(&x)?;
        c.u.data = scaled(&c.u.data, &self.w.u, 2);
        c.v.data = scaled(&c.v.data, &self.w.v, 2);
        let y = self.map.apply(&c)?;
        Ok(scaled(&y.data, &self.w.leaf, -1))
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        leaf_inner(self.map, a, b)
    }
}

/// `g ↦ θ_T⁻¹ F θ(0)² B θ_T⁻¹ g` with `B: z_T ↦ z(0)` and `F` its transpose,
/// the uncontrolled forward map.
struct Contraction<'a> {
    map: &'a ControlMap,
    w: &'a Weights,
}

impl SymOperator for Contraction<'_> {
    fn dim(&self) -> usize {
        self.map.leaf_len()
    }

    fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let x = leaf_from(self.map, scaled(g, &self.w.leaf, -1))?;
        let sol = self.map.solver.solve_backward(&x)?;
        let z0 = scaled(sol.z.level(0), &self.w.initial, 2);
        let y = self
            .map
            .free_response(&StateField::from_values(self.map.solver.grid.state_dim(), z0)?)?;
        Ok(scaled(&y.data, &self.w.leaf, -1))
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        leaf_inner(self.map, a, b)
    }
}

fn leaf_inner(map: &ControlMap, a: &[f64], b: &[f64]) -> f64 {
    let s = &map.solver;
    s.tree.prob(s.tree.depth) * s.grid.cell_weight() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn rows_for_t(spec: &SystemSpec, eta: &WeightCandidate, t0: f64, t: f64, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let grid = build_grid(spec, &cfg.cells, cfg.cfl)?;
    let tree = ScenarioTree::new(t, cfg.depth)?;
    let map = assemble_control_map(Solver::new(grid, tree)?, cfg.options.clone())?;
    let sigma_min = observability_spectrum(&map, cfg.iters, cfg.seed)?.sigma_min;
    let (beta, beta_fallback) = match choose_beta(eta.c0, t, t0) {
        Ok(b) => (b, false),
        Err(_) => (0.5 * eta.c0, true),
    };
    let mut rows = Vec::with_capacity(cfg.lambda_list.len());
    for &lambda in &cfg.lambda_list {
        let weight = CarlemanWeight::new(beta, lambda, eta.clone())?;
        let w = weights(&map, &weight);
        let obs = lanczos_extremes(&WeightedGramian { map: &map, w: &w }, cfg.iters, cfg.seed)?;
        let con = lanczos_extremes(&Contraction { map: &map, w: &w }, cfg.iters, cfg.seed)?;
        rows.push(SweepRow {
            t,
            lambda,
            beta,
            beta_fallback,
            sigma_min,
            weighted_ratio: 1.0 / (obs.min.max(0.0) + RATIO_GUARD * obs.max.abs().max(f64::MIN_POSITIVE)),
            contraction_factor: con.max.max(0.0),
        });
    }
    Ok(rows)
}

/// One row per `(T, λ)`, in input order. Seeds do not depend on the row, so
/// repeated `T` values reproduce identical rows.
pub fn observability_sweep(spec: &SystemSpec, eta: &WeightCandidate, cfg: &SweepConfig) -> Result<SweepReport> {
    let t0 = minimal_time(eta)?;
    if cfg.t_list.is_empty() || cfg.lambda_list.is_empty() {
        return Err(Error::precondition("sweep lists", "T and lambda lists must be non-empty"));
    }
    if let Some(l) = cfg.lambda_list.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::precondition("lambda", format!("{l} is not positive")));
    }
    let per_t: Vec<Result<Vec<SweepRow>>> = cfg.t_list.par_iter().map(|&t| rows_for_t(spec, eta, t0, t, cfg)).collect();
    let mut rows = Vec::new();
    for r in per_t {
        rows.extend(r?);
    }
    Ok(SweepReport { c0: eta.c0, t0, rows })
}
