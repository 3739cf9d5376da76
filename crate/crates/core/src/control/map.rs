use nalgebra::DMatrix;

use crate::discretization::StateField;
use crate::stochastic::{AdaptedProcess, Solver};
use crate::{Error, Result};

/// Default bound on `rows × cols` for dense assembly.
pub const DEFAULT_DENSE_LIMIT: usize = 4_000_000;

/// Boundary control `u` (incoming data per substep) and internal control `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    pub u: AdaptedProcess,
    pub v: AdaptedProcess,
}

impl ControlPair {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.u.data.clone();
        x.extend(&self.v.data);
        x
    }
}

/// Which control channels act.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelOptions {
    /// Disable the boundary control.
    pub no_boundary: bool,
    /// Disable the internal control.
    pub no_internal: bool,
    /// Remove the `B3 v` drift so `v` acts through the diffusion only.
    pub drop_b3: bool,
    /// Cells where `v` may act; all cells when absent.
    pub v_mask: Option<Vec<bool>>,
}

/// Control-to-state map `Φ(u, v) = y(T)` (with `y0 = 0`) and its adjoint
/// `Φ* z_T = (−Λ₋ξ₋, Z)` from the backward solver.
#[derive(Debug, Clone)]
pub struct ControlMap {
    pub solver: Solver,
    pub options: ChannelOptions,
}

/// `Φ` as a dense matrix in raw coordinates plus the quadrature weights that make
/// both spaces Euclidean: `diag(√row_weight) Φ diag(1/√col_weights)` is the
/// operator in orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct DenseControlMap {
    pub phi: DMatrix<f64>,
    pub col_weights: Vec<f64>,
    pub row_weight: f64,
}

impl DenseControlMap {
    pub fn orthonormal(&self) -> DMatrix<f64> {
        let mut m = self.phi.clone() * self.row_weight.sqrt();
        for (j, w) in self.col_weights.iter().enumerate() {
            let s = if *w > 0.0 { 1.0 / w.sqrt() } else { 0.0 };
            m.column_mut(j).scale_mut(s);
        }
        m
    }
}

pub fn assemble_control_map(solver: Solver, options: ChannelOptions) -> Result<ControlMap> {
    let cells = solver.grid.num_cells();
    if let Some(mask) = &options.v_mask {
        if mask.len() != cells {
            return Err(Error::dim("v support mask", cells, mask.len()));
        }
    }
    let solver = if options.drop_b3 { solver.without_b3() } else { solver };
    Ok(ControlMap { solver, options })
}

impl ControlMap {
    pub fn depth(&self) -> usize {
        self.solver.tree.depth
    }

    /// Length of a leaf-level state vector.
    pub fn leaf_len(&self) -> usize {
        self.solver.tree.leaves() * self.solver.state_len()
    }

    pub fn control_len(&self) -> usize {
        self.solver.zero_u().data.len() + self.solver.zero_v().data.len()
    }

    pub fn zero_control(&self) -> ControlPair {
        ControlPair {
            u: self.solver.zero_u(),
            v: self.solver.zero_v(),
        }
    }

    pub fn zero_leaf(&self) -> AdaptedProcess {
        let m = self.depth();
        AdaptedProcess::zeros(m, m, self.solver.state_len())
    }

    pub fn control_from_vec(&self, x: &[f64]) -> Result<ControlPair> {
        let mut c = self.zero_control();
        let nu = c.u.data.len();
        if x.len() != nu + c.v.data.len() {
            return Err(Error::dim("control vector", nu + c.v.data.len(), x.len()));
        }
        c.u.data.copy_from_slice(&x[..nu]);
        c.v.data.copy_from_slice(&x[nu..]);
        Ok(c)
    }

    /// Orthogonal projection onto the active channels.
    pub fn project(&self, c: &ControlPair) -> ControlPair {
        let mut out = c.clone();
        if self.options.no_boundary {
            out.u.data.iter_mut().for_each(|x| *x = 0.0);
        }
        if self.options.no_internal {
            out.v.data.iter_mut().for_each(|x| *x = 0.0);
        } else if let Some(mask) = &self.options.v_mask {
            let n = self.solver.grid.state_dim();
            for node in out.v.data.chunks_mut(self.solver.state_len()) {
                for (c, &on) in mask.iter().enumerate() {
                    if !on {
                        node[c * n..(c + 1) * n].iter_mut().for_each(|x| *x = 0.0);
                    }
                }
            }
        }
        out
    }

    /// `E⟨a, b⟩` on the leaf level.
    pub fn leaf_inner(&self, a: &AdaptedProcess, b: &AdaptedProcess) -> f64 {
        let m = self.depth();
        self.solver.state_inner_level(m, a.level(m), b.level(m))
    }

    pub fn leaf_norm(&self, a: &AdaptedProcess) -> f64 {
        self.leaf_inner(a, a).max(0.0).sqrt()
    }

    pub fn control_inner(&self, a: &ControlPair, b: &ControlPair) -> f64 {
        self.solver.u_inner(&a.u, &b.u) + self.solver.v_inner(&a.v, &b.v)
    }

    pub fn control_norms(&self, c: &ControlPair) -> (f64, f64) {
        (
            self.solver.u_inner(&c.u, &c.u).max(0.0).sqrt(),
            self.solver.v_inner(&c.v, &c.v).max(0.0).sqrt(),
        )
    }

    fn leaf_of(&self, y: &AdaptedProcess) -> AdaptedProcess {
        let m = self.depth();
        AdaptedProcess::level_only(m, y.width, y.level(m).to_vec()).expect("leaf level shape")
    }

    /// `Φ(u, v)`.
    pub fn apply(&self, c: &ControlPair) -> Result<AdaptedProcess> {
        let c = self.project(c);
        let y0 = StateField::zeros(self.solver.grid.state_dim(), self.solver.grid.num_cells());
        let y = self.solver.solve_forward(&y0, &c.u, &c.v)?;
        Ok(self.leaf_of(&y))
    }

    /// `Φ* z_T = (−Λ₋ξ₋, Z)` restricted to the active channels.
    pub fn adjoint(&self, zt: &AdaptedProcess) -> Result<ControlPair> {
        let sol = self.solver.solve_backward(zt)?;
        let mut u = sol.weighted_trace;
        u.scale(-1.0);
        Ok(self.project(&ControlPair { u, v: sol.zz }))
    }

    /// Terminal state with zero controls.
    pub fn free_response(&self, y0: &StateField) -> Result<AdaptedProcess> {
        let c = self.zero_control();
        let y = self.solver.solve_forward(y0, &c.u, &c.v)?;
        Ok(self.leaf_of(&y))
    }

    /// Gramian `ΦΦ*`.
    pub fn gramian(&self, w: &AdaptedProcess) -> Result<AdaptedProcess> {
        self.apply(&self.adjoint(w)?)
    }

    /// Dense `Φ` when `rows × cols ≤ limit`.
    pub fn dense(&self, limit: usize) -> Result<Option<DenseControlMap>> {
        let (rows, cols) = (self.leaf_len(), self.control_len());
        if rows.saturating_mul(cols) > limit {
            return Ok(None);
        }
        let mut phi = DMatrix::zeros(rows, cols);
        let mut e = vec![0.0; cols];
        for j in 0..cols {
            e[j] = 1.0;
            let col = self.apply(&self.control_from_vec(&e)?)?;
            phi.set_column(j, &nalgebra::DVector::from_column_slice(&col.data));
            e[j] = 0.0;
        }
        // control weights from the inner products of unit vectors
        let mut col_weights = vec![0.0; cols];
        let zero = self.zero_control();
        let nu = zero.u.data.len();
        let ul = self.solver.grid.u_len();
        let (dt, wc) = (self.solver.tree.dt, self.solver.grid.cell_weight());
        let (ws, wv) = (self.solver.u_width(), self.solver.state_len());
        let mut pos = 0;
        for k in 0..self.depth() {
            let prob = self.solver.tree.prob(k);
            for _ in 0..1usize << k {
                for i in 0..ws {
                    col_weights[pos + i] = prob * self.solver.dt_sub * self.solver.dof_measure()[i % ul.max(1)];
                }
                pos += ws;
            }
        }
        debug_assert_eq!(pos, nu);
        for k in 0..self.depth() {
            let prob = self.solver.tree.prob(k);
            for _ in 0..1usize << k {
                for i in 0..wv {
                    col_weights[pos + i] = prob * dt * wc;
                }
                pos += wv;
            }
        }
        let row_weight = self.solver.tree.prob(self.depth()) * wc;
        Ok(Some(DenseControlMap {
            phi,
            col_weights,
            row_weight,
        }))
    }
}
