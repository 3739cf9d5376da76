use nalgebra::DMatrix;
use rayon::prelude::*;

use super::process::AdaptedProcess;
use super::tree::ScenarioTree;
use crate::discretization::{Grid, StateField};
use crate::system::CoefField;
use crate::{Error, Result};

/// Per-level, per-cell blocks of a `B` field; `None` when the field vanishes.
type Blocks = Option<Vec<Vec<DMatrix<f64>>>>;

/// Forward and transpose-defined backward solvers on a scenario tree.
///
/// One tree step from node `(k, p)` runs `m` CFL-limited transport substeps with
/// their own boundary data, then adds the `B` terms frozen at `t_k`:
///
/// ```text
/// w_0 = y,  w_{s+1} = w_s + δ (D w_s + E u_s)
/// y_child = w_m + Δt (B1 y + B3 v) + ΔW_child (B2 y + v)
/// ```
#[derive(Debug, Clone)]
pub struct Solver {
    pub grid: Grid,
    pub tree: ScenarioTree,
    pub substeps: usize,
    pub dt_sub: f64,
    b1: Blocks,
    b2: Blocks,
    b3: Blocks,
    /// `|face|` of each incoming boundary component.
    dof_measure: Vec<f64>,
    /// `λ₋` of each incoming boundary component.
    dof_lambda: Vec<f64>,
}

/// Backward solution `(z, Z)` and the weighted incoming trace `Λ₋ξ₋`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    /// Levels `0..=M`; level `M` is the terminal datum.
    pub z: AdaptedProcess,
    /// Levels `0..M`.
    pub zz: AdaptedProcess,
    /// `Λ₋ξ₋` per substep and incoming component, levels `0..M`.
    pub weighted_trace: AdaptedProcess,
}

/// Both sides of the discrete transposition identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    /// `E⟨y(T), z_T⟩`.
    pub terminal: f64,
    /// `⟨y0, z(0)⟩`.
    pub initial: f64,
    /// `E∫⟨v, Z⟩`.
    pub internal: f64,
    /// `E∫⟨ξ₋, Λ₋u⟩`.
    pub boundary: f64,
    pub residual: f64,
    /// Residual over the sum of term magnitudes.
    pub relative: f64,
}

fn blocks_of(field: &CoefField, grid: &Grid, tree: &ScenarioTree) -> Blocks {
    if field.is_zero() {
        return None;
    }
    let centers = grid.centers();
    Some(
        (0..tree.depth)
            .map(|k| centers.iter().map(|x| field.eval(tree.time(k), x)).collect())
            .collect(),
    )
}

/// `out_c += alpha · B_c x_c` (or `B_cᵀ`) for every cell.
fn apply_blocks(blocks: &[DMatrix<f64>], n: usize, x: &[f64], out: &mut [f64], alpha: f64, transpose: bool) {
    for (c, b) in blocks.iter().enumerate() {
        let xs = &x[c * n..(c + 1) * n];
        let os = &mut out[c * n..(c + 1) * n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let bij = if transpose { b[(j, i)] } else { b[(i, j)] };
                acc += bij * xs[j];
            }
            os[i] += alpha * acc;
        }
    }
}

impl Solver {
    pub fn new(grid: Grid, tree: ScenarioTree) -> Result<Self> {
        let substeps = grid.substeps(tree.dt);
        let dt_sub = tree.dt / substeps as f64;
        if dt_sub > grid.dt_max * (1.0 + 1e-12) {
            return Err(Error::precondition("cfl", "substep exceeds the stable step"));
        }
        let spec = &grid.spec;
        let (b1, b2, b3) = (
            blocks_of(&spec.b1, &grid, &tree),
            blocks_of(&spec.b2, &grid, &tree),
            blocks_of(&spec.b3, &grid, &tree),
        );
        let mut dof_measure = vec![0.0; grid.u_len()];
        let mut dof_lambda = vec![0.0; grid.u_len()];
        for b in &grid.boundary {
            for j in 0..b.n_minus() {
                dof_measure[b.u_offset + j] = b.measure;
                dof_lambda[b.u_offset + j] = b.dec.lambda_minus[j];
            }
        }
        Ok(Self {
            grid,
            tree,
            substeps,
            dt_sub,
            b1,
            b2,
            b3,
            dof_measure,
            dof_lambda,
        })
    }

    /// Same solver with the `B3 v` drift removed.
    pub fn without_b3(mut self) -> Self {
        self.b3 = None;
        self
    }

    pub fn has_b3(&self) -> bool {
        self.b3.is_some()
    }

    pub fn state_len(&self) -> usize {
        self.grid.state_len()
    }

    /// Width of one node's boundary control: every substep's incoming data.
    pub fn u_width(&self) -> usize {
        self.substeps * self.grid.u_len()
    }

    pub fn zero_u(&self) -> AdaptedProcess {
        AdaptedProcess::zeros(0, self.tree.depth - 1, self.u_width())
    }

    pub fn zero_v(&self) -> AdaptedProcess {
        AdaptedProcess::zeros(0, self.tree.depth - 1, self.state_len())
    }

    pub fn dof_lambda(&self) -> &[f64] {
        &self.dof_lambda
    }

    pub fn dof_measure(&self) -> &[f64] {
        &self.dof_measure
    }

    /// `E⟨a, b⟩` at one level with cell-volume quadrature; `a`, `b` hold that level.
    pub fn state_inner_level(&self, level: usize, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        s * self.tree.prob(level) * self.grid.cell_weight()
    }

    /// `E∫⟨v, w⟩ dt dx`.
    pub fn v_inner(&self, a: &AdaptedProcess, b: &AdaptedProcess) -> f64 {
        a.inner(b, |_| self.tree.dt * self.grid.cell_weight())
    }

    /// `E∫∫_Γ ⟨u, g⟩ dΓ dt` over incoming components.
    pub fn u_inner(&self, a: &AdaptedProcess, b: &AdaptedProcess) -> f64 {
        let ul = self.grid.u_len();
        if ul == 0 {
            return 0.0;
        }
        (a.first_level..=a.last_level)
            .map(|k| {
                let s: f64 = a
                    .level(k)
                    .iter()
                    .zip(b.level(k))
                    .enumerate()
                    .map(|(i, (x, y))| x * y * self.dof_measure[i % ul])
                    .sum();
                s * self.tree.prob(k) * self.dt_sub
            })
            .sum()
    }

    fn check_controls(&self, u: &AdaptedProcess, v: &AdaptedProcess) -> Result<()> {
        let m = self.tree.depth;
        u.check_shape(0, m - 1, self.u_width(), "boundary control process")?;
        v.check_shape(0, m - 1, self.state_len(), "internal control process")
    }

    /// Deterministic part `w_m + Δt (B1 y + B3 v)` and diffusion `B2 y + v` of one step.
    fn step_parts(&self, k: usize, y: &[f64], u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.state_dim();
        let ul = self.grid.u_len();
        let mut w = y.to_vec();
        for s in 0..self.substeps {
            let mut next = w.clone();
            self.grid.drift.mul_add(self.dt_sub, &w, &mut next);
            if ul > 0 {
                self.grid.inflow.mul_add(self.dt_sub, &u[s * ul..(s + 1) * ul], &mut next);
            }
            w = next;
        }
        let dt = self.tree.dt;
        if let Some(b) = &self.b1 {
            apply_blocks(&b[k], n, y, &mut w, dt, false);
        }
        if let Some(b) = &self.b3 {
            apply_blocks(&b[k], n, v, &mut w, dt, false);
        }
        let mut diff = v.to_vec();
        if let Some(b) = &self.b2 {
            apply_blocks(&b[k], n, y, &mut diff, 1.0, false);
        }
        (w, diff)
    }

    /// Euler–Maruyama over the whole tree; returns `y` on levels `0..=M`.
    pub fn solve_forward(&self, y0: &StateField, u: &AdaptedProcess, v: &AdaptedProcess) -> Result<AdaptedProcess> {
        let len = self.state_len();
        if y0.values.len() != len {
            return Err(Error::dim("initial state", len, y0.values.len()));
        }
        self.check_controls(u, v)?;
        let mut y = AdaptedProcess::zeros(0, self.tree.depth, len);
        y.node_mut(0, 0).copy_from_slice(&y0.values);
        let sq = self.tree.sqrt_dt;
        for k in 0..self.tree.depth {
            let (ul, vl) = (u.level(k), v.level(k));
            let uw = self.u_width();
            let (cur, next) = y.split_levels_mut(k);
            next.par_chunks_mut(2 * len)
                .zip(cur.par_chunks(len))
                .enumerate()
                .for_each(|(p, (children, yn))| {
                    let (det, diff) = self.step_parts(k, yn, &ul[p * uw..(p + 1) * uw], &vl[p * len..(p + 1) * len]);
                    let (minus, plus) = children.split_at_mut(len);
                    for i in 0..len {
                        minus[i] = det[i] - sq * diff[i];
                        plus[i] = det[i] + sq * diff[i];
                    }
                });
        }
        Ok(y)
    }

    /// Transpose of one tree step: returns `(z_node, Z_node, Λ₋ξ₋ per substep)`.
    fn back_step(&self, k: usize, zm: &[f64], zp: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.grid.state_dim();
        let ul = self.grid.u_len();
        let (dt, sq) = (self.tree.dt, self.tree.sqrt_dt);
        let zbar: Vec<f64> = zm.iter().zip(zp).map(|(a, b)| 0.5 * (a + b)).collect();
        let ztil: Vec<f64> = zm.iter().zip(zp).map(|(a, b)| 0.5 * sq * (b - a)).collect();
        let mut q = zbar.clone();
        let mut trace = vec![0.0; self.u_width()];
        let wc = self.grid.cell_weight();
        for s in (0..self.substeps).rev() {
            if ul > 0 {
                let mut g = vec![0.0; ul];
                self.grid.inflow.tr_mul_add(self.dt_sub, &q, &mut g);
                for j in 0..ul {
                    trace[s * ul + j] = -wc * g[j] / (self.dt_sub * self.dof_measure[j]);
                }
            }
            let mut next = q.clone();
            self.grid.drift.tr_mul_add(self.dt_sub, &q, &mut next);
            q = next;
        }
        let mut z = q;
        if let Some(b) = &self.b1 {
            apply_blocks(&b[k], n, &zbar, &mut z, dt, true);
        }
        if let Some(b) = &self.b2 {
            apply_blocks(&b[k], n, &ztil, &mut z, 1.0, true);
        }
        let mut zz: Vec<f64> = ztil.iter().map(|v| v / dt).collect();
        if let Some(b) = &self.b3 {
            apply_blocks(&b[k], n, &zbar, &mut zz, 1.0, true);
        }
        (z, zz, trace)
    }

    /// Backward recursion defined as the exact transpose of [`Solver::solve_forward`].
    ///
    /// `zt` holds the terminal datum on level `M`. With the children averages
    /// `z̄ = E[z_child]` and `z̃ = E[ΔW z_child]`, each node gets
    /// `z = (Tᵀ)^m z̄ + Δt B1ᵀ z̄ + B2ᵀ z̃` and `Z = z̃/Δt + B3ᵀ z̄`.
    pub fn solve_backward(&self, zt: &AdaptedProcess) -> Result<AdjointSolution> {
        let (m, len) = (self.tree.depth, self.state_len());
        zt.check_shape(m, m, len, "terminal datum")?;
        let mut z = AdaptedProcess::zeros(0, m, len);
        z.level_mut(m).copy_from_slice(&zt.data);
        let mut zz = AdaptedProcess::zeros(0, m - 1, len);
        let mut tr = AdaptedProcess::zeros(0, m - 1, self.u_width());
        let uw = self.u_width();
        for k in (0..m).rev() {
            let (cur, next) = z.split_levels_rev_mut(k);
            let zz_level = zz.level_mut(k);
            let tr_level = tr.level_mut(k);
            let results: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = next
                .par_chunks(2 * len)
                .map(|children| {
                    let (a, b) = children.split_at(len);
                    self.back_step(k, a, b)
                })
                .collect();
            for (p, (zn, zzn, trn)) in results.into_iter().enumerate() {
                cur[p * len..(p + 1) * len].copy_from_slice(&zn);
                zz_level[p * len..(p + 1) * len].copy_from_slice(&zzn);
                if uw > 0 {
                    tr_level[p * uw..(p + 1) * uw].copy_from_slice(&trn);
                }
            }
        }
        Ok(AdjointSolution { z, zz, weighted_trace: tr })
    }

    /// `ξ₋ = (Λ₋ξ₋) / λ₋` componentwise.
    pub fn unweighted_trace(&self, sol: &AdjointSolution) -> AdaptedProcess {
        let mut out = sol.weighted_trace.clone();
        let ul = self.grid.u_len();
        if ul > 0 {
            for (i, v) in out.data.iter_mut().enumerate() {
                *v /= self.dof_lambda[i % ul];
            }
        }
        out
    }

    /// Discrete transposition identity
    /// `E⟨y(T), z_T⟩ − ⟨y0, z(0)⟩ = E∫⟨v, Z⟩ − E∫⟨ξ₋, Λ₋u⟩`.
    pub fn duality_residual(&self, y0: &StateField, u: &AdaptedProcess, v: &AdaptedProcess, zt: &AdaptedProcess) -> Result<DualityReport> {
        let y = self.solve_forward(y0, u, v)?;
        let sol = self.solve_backward(zt)?;
        let m = self.tree.depth;
        let terminal = self.state_inner_level(m, y.level(m), zt.level(m));
        let initial = self.state_inner_level(0, &y0.values, sol.z.level(0));
        let internal = self.v_inner(v, &sol.zz);
        let boundary = self.u_inner(u, &sol.weighted_trace);
        let residual = ((terminal - initial) - (internal - boundary)).abs();
        let scale = terminal.abs() + initial.abs() + internal.abs() + boundary.abs();
        Ok(DualityReport {
            terminal,
            initial,
            internal,
            boundary,
            residual,
            relative: if scale > 0.0 { residual / scale } else { 0.0 },
        })
    }

    /// Terminal datum from a closure over `(leaf path, cell center) → N-vector`.
    pub fn leaf_field(&self, f: impl Fn(usize, &[f64]) -> Vec<f64>) -> Result<AdaptedProcess> {
        let m = self.tree.depth;
        let centers = self.grid.centers();
        let data: Vec<f64> = (0..self.tree.leaves())
            .flat_map(|p| centers.iter().flat_map(|x| f(p, x)).collect::<Vec<_>>())
            .collect();
        AdaptedProcess::level_only(m, self.state_len(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_grid, transport_step};
    use crate::rng::{normal_vec, seeded};
    use crate::system::{registry, Poly, PolyMatrix, SystemSpec};
    use proptest::prelude::*;

    fn solver(spec: &SystemSpec, cells: &[usize], cfl: f64, t: f64, depth: usize) -> Solver {
        let grid = build_grid(spec, cells, cfl).unwrap();
        Solver::new(grid, ScenarioTree::new(t, depth).unwrap()).unwrap()
    }

    /// `dy = v dW` on four uncoupled cells.
    fn pure_noise() -> SystemSpec {
        registry::scalar_transport(&[0.0])
    }

    fn random_process(p: &AdaptedProcess, seed: u64) -> AdaptedProcess {
        let mut rng = seeded(seed, 1);
        AdaptedProcess {
            data: normal_vec(&mut rng, p.data.len()),
            ..p.clone()
        }
    }

    /// Registry system with every `B` nonzero; one of them depends on both t and x.
    fn loaded(spec: SystemSpec, seed: u64) -> SystemSpec {
        let n = spec.state_dim;
        let dim = spec.space_dim();
        let mut rng = seeded(seed, 2);
        let mut rand_field = |s: f64| {
            let v = normal_vec(&mut rng, n * n);
            CoefField::constant(dim, &(DMatrix::from_row_slice(n, n, &v) * s))
        };
        let mut out = spec.clone();
        out.b1 = rand_field(0.5);
        out.b2 = rand_field(0.3);
        out.b3 = rand_field(0.4);
        let mut x_dep = vec![0.0; 1 + dim];
        x_dep[0] = 0.2;
        x_dep[1] = -0.3;
        let entries = (0..n * n)
            .map(|i| {
                if i % (n + 1) == 0 {
                    Poly::new(dim, x_dep.clone()).unwrap()
                } else {
                    Poly::zero(dim)
                }
            })
            .collect();
        out.b1.t_rate = Some(PolyMatrix::new(n, n, entries).unwrap());
        out
    }

    #[test]
    fn collapses_without_noise() {
        let spec = registry::sir_age();
        let mut spec = spec.clone();
        spec.b2 = CoefField::zeros(1, 3);
        let s = solver(&spec, &[12], 0.9, 0.6, 5);
        let mut rng = seeded(3, 0);
        let y0 = StateField::from_values(3, normal_vec(&mut rng, s.state_len())).unwrap();
        let y = s.solve_forward(&y0, &s.zero_u(), &s.zero_v()).unwrap();
        let first = y.node(5, 0).to_vec();
        for p in 1..32 {
            assert_eq!(y.node(5, p), first.as_slice());
        }
    }

    #[test]
    fn random_walk_moments() {
        let s = solver(&pure_noise(), &[4], 0.9, 0.8, 8);
        let v = AdaptedProcess {
            data: vec![1.0; s.zero_v().data.len()],
            ..s.zero_v()
        };
        let y = s.solve_forward(&StateField::zeros(1, 4), &s.zero_u(), &v).unwrap();
        let (mut mean, mut second) = (0.0, 0.0);
        for p in 0..256 {
            let leaf = y.node(8, p);
            assert!((leaf[0] - s.tree.brownian(8, p)).abs() < 1e-13);
            assert_eq!(leaf[0], leaf[3]);
            mean += leaf[0] / 256.0;
            second += leaf[0] * leaf[0] / 256.0;
        }
        assert!(mean.abs() < 1e-14);
        assert!((second - 0.8).abs() < 1e-13);
    }

    #[test]
    fn inflow_propagates_on_every_scenario() {
        let s = solver(&registry::scalar_transport(&[1.0]), &[20], 1.0, 0.5, 5);
        let u = AdaptedProcess {
            data: vec![1.0; s.zero_u().data.len()],
            ..s.zero_u()
        };
        let y = s.solve_forward(&StateField::zeros(1, 20), &u, &s.zero_v()).unwrap();
        for p in 0..32 {
            let leaf = y.node(5, p);
            for (j, x) in s.grid.centers().iter().enumerate() {
                let want = if x[0] < 0.5 { 1.0 } else { 0.0 };
                assert!((leaf[j] - want).abs() < 1e-13, "cell {j}");
            }
        }
    }

    #[test]
    fn zero_terminal_gives_zero_adjoint() {
        let s = solver(&loaded(registry::traffic_free(1.0, 2.0, 1.0, 0.5, -1.0), 1), &[8], 0.9, 0.5, 4);
        let zt = AdaptedProcess::zeros(4, 4, s.state_len());
        let sol = s.solve_backward(&zt).unwrap();
        assert_eq!(sol.z.max_abs(), 0.0);
        assert_eq!(sol.zz.max_abs(), 0.0);
        assert_eq!(sol.weighted_trace.max_abs(), 0.0);
    }

    #[test]
    fn martingale_representation_of_w() {
        let s = solver(&pure_noise(), &[4], 0.9, 1.0, 6);
        let zt = s.leaf_field(|p, _| vec![s.tree.brownian(6, p)]).unwrap();
        let sol = s.solve_backward(&zt).unwrap();
        for k in 0..6 {
            for p in 0..1 << k {
                assert!((sol.z.node(k, p)[2] - s.tree.brownian(k, p)).abs() < 1e-13);
                assert!((sol.zz.node(k, p)[1] - 1.0).abs() < 1e-12);
            }
            // tower property
            assert!((sol.z.level_mean(k)[0] - sol.z.node(0, 0)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn tower_property_for_random_martingale() {
        let s = solver(&pure_noise(), &[4], 0.9, 1.0, 7);
        let zt = random_process(&AdaptedProcess::zeros(7, 7, 4), 11);
        let sol = s.solve_backward(&zt).unwrap();
        let z0 = sol.z.node(0, 0).to_vec();
        for k in 0..=7 {
            for (a, b) in sol.z.level_mean(k).iter().zip(&z0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_solver_reproduced_bitwise() {
        let s = solver(&registry::scalar_transport(&[1.0]), &[16], 0.9, 0.7, 5);
        let mut rng = seeded(5, 0);
        let y0 = StateField::from_values(1, normal_vec(&mut rng, 16)).unwrap();
        // deterministic boundary data: one value per level and substep
        let per_level: Vec<Vec<f64>> = (0..5).map(|_| normal_vec(&mut rng, s.u_width())).collect();
        let u = AdaptedProcess::from_fn(0, 4, s.u_width(), |k, _| per_level[k].clone()).unwrap();
        let y = s.solve_forward(&y0, &u, &s.zero_v()).unwrap();
        let mut det = y0.clone();
        for row in &per_level {
            for sub in row.chunks(s.grid.u_len()) {
                det = transport_step(&s.grid, &det, sub, s.dt_sub).unwrap();
            }
        }
        for p in 0..32 {
            assert_eq!(y.node(5, p), det.values.as_slice());
        }
    }

    #[test]
    fn values_depend_only_on_prefix() {
        let spec = loaded(registry::traffic_free(1.0, 2.0, 1.0, 0.5, -1.0), 4);
        let s = solver(&spec, &[8], 0.9, 0.6, 5);
        let y0 = StateField::from_values(2, normal_vec(&mut seeded(6, 0), 16)).unwrap();
        let u = random_process(&s.zero_u(), 7);
        let v = random_process(&s.zero_v(), 8);
        let base = s.solve_forward(&y0, &u, &v).unwrap();
        // perturb the controls at node (2, 1): only its descendants may move
        let mut u2 = u.clone();
        u2.node_mut(2, 1).iter_mut().for_each(|x| *x += 1.0);
        let mut v2 = v.clone();
        v2.node_mut(2, 1).iter_mut().for_each(|x| *x -= 0.5);
        let moved = s.solve_forward(&y0, &u2, &v2).unwrap();
        for k in 0..=5 {
            for p in 0..1 << k {
                let descendant = k > 2 && s.tree.ancestor(k, p, 2) == 1;
                let same = base.node(k, p) == moved.node(k, p);
                assert_eq!(same, !descendant, "node ({k}, {p})");
            }
        }
    }

    #[test]
    fn deterministic_adjoint_matches_dense_oracle() {
        // B2 = B3 = 0 and a deterministic terminal datum: z is deterministic and
        // z(0) = Fᵀ z_T for the dense one-step matrix F = Π_k (T^m + Δt B1(t_k))
        let mut spec = loaded(registry::traffic_free(1.0, 2.0, 1.0, 0.5, -1.0), 9);
        spec.b2 = CoefField::zeros(1, 2);
        spec.b3 = CoefField::zeros(1, 2);
        let s = solver(&spec, &[10], 0.9, 0.8, 4);
        let len = s.state_len();
        let transport = s.grid.drift.to_dense() * s.dt_sub + DMatrix::identity(len, len);
        let tm = transport.pow(s.substeps as u32);
        let mut f = DMatrix::identity(len, len);
        for k in 0..4 {
            let mut b = DMatrix::zeros(len, len);
            for (c, x) in s.grid.centers().iter().enumerate() {
                let blk = spec.b1.eval(s.tree.time(k), x);
                b.view_mut((2 * c, 2 * c), (2, 2)).copy_from(&blk);
            }
            f = (&tm + b * s.tree.dt) * f;
        }
        let zt_vec = normal_vec(&mut seeded(10, 0), len);
        let zt = AdaptedProcess::level_only(4, len, zt_vec.repeat(16)).unwrap();
        let sol = s.solve_backward(&zt).unwrap();
        let want = f.transpose() * nalgebra::DVector::from_vec(zt_vec);
        for (a, b) in sol.z.node(0, 0).iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        for p in 0..8 {
            assert_eq!(sol.zz.node(3, p).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        }
    }

    #[test]
    fn zero_inputs_zero_residual() {
        let s = solver(&registry::sir_age(), &[8], 0.9, 0.5, 3);
        let r = s
            .duality_residual(
                &StateField::zeros(3, 8),
                &s.zero_u(),
                &s.zero_v(),
                &AdaptedProcess::zeros(3, 3, s.state_len()),
            )
            .unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.relative, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn duality_holds_to_roundoff(which in 0usize..4, seed in 0u64..1_000_000, depth in 2usize..6) {
            let (spec, cells): (SystemSpec, Vec<usize>) = match which {
                0 => (registry::scalar_transport(&[0.8]), vec![12]),
                1 => (registry::traffic_free(1.0, 2.0, 1.0, 0.5, -1.0), vec![10]),
                2 => (registry::sir_age(), vec![8]),
                _ => (registry::shallow_water(0.5, 0.3, 10.0, 0.1), vec![5, 4]),
            };
            let s = solver(&loaded(spec, seed), &cells, 0.9, 0.4, depth);
            let y0 = StateField::from_values(s.grid.state_dim(), normal_vec(&mut seeded(seed, 20), s.state_len())).unwrap();
            let u = random_process(&s.zero_u(), seed ^ 1);
            let v = random_process(&s.zero_v(), seed ^ 2);
            let zt = random_process(&AdaptedProcess::zeros(depth, depth, s.state_len()), seed ^ 3);
            let r = s.duality_residual(&y0, &u, &v, &zt).unwrap();
            prop_assert!(r.relative <= 1e-12, "{r:?}");
        }
    }
}
