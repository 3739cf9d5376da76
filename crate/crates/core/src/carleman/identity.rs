use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::CarlemanWeight;
use crate::discretization::{BoundaryCell, Grid};
use crate::stochastic::{AdaptedProcess, Solver};
use crate::Result;

/// Boundary closure used for the face values of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// Adjoint closure `ξ₊ = 0`: outgoing components of the face value vanish.
    #[default]
    Adjoint,
    /// Forward closure with zero boundary data, `ζ₋ = 0`.
    ForwardHomogeneous,
}

/// Totals of each term of the weighted identity divided by `λ`,
/// summed over the tree and the grid.
///
/// `lhs = boundary + energy − quadratic_variation − divergence + weight_term`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityReport {
    pub lhs: f64,
    pub boundary: f64,
    pub energy: f64,
    pub quadratic_variation: f64,
    pub divergence: f64,
    pub weight_term: f64,
    /// `Δt Σ ‖w_k‖²`, the weighted energy that large `λ` must dominate.
    pub weighted_energy: f64,
    /// `E‖θ(T) h(T)‖²`, fixed by the data rather than the discretization.
    pub terminal_energy: f64,
    /// Sum of the absolute values of all terms.
    pub term_scale: f64,
    pub residual: f64,
    /// `residual / terminal_energy`, or over `term_scale` when the terminal datum vanishes.
    pub relative: f64,
}

impl IdentityReport {
    fn add(mut self, o: Self) -> Self {
        self.lhs += o.lhs;
        self.boundary += o.boundary;
        self.energy += o.energy;
        self.quadratic_variation += o.quadratic_variation;
        self.divergence += o.divergence;
        self.weight_term += o.weight_term;
        self.weighted_energy += o.weighted_energy;
        self
    }

    fn finish(mut self) -> Self {
        let rhs = self.boundary + self.energy - self.quadratic_variation - self.divergence + self.weight_term;
        self.residual = (self.lhs - rhs).abs();
        self.term_scale = self.lhs.abs()
            + self.boundary.abs()
            + self.energy.abs()
            + self.quadratic_variation.abs()
            + self.divergence.abs()
            + self.weight_term.abs();
        let scale = if self.terminal_energy > 0.0 {
            self.terminal_energy
        } else {
            self.term_scale
        };
        self.relative = if scale > 0.0 { self.residual / scale } else { 0.0 };
        self
    }
}

fn closure_matrix(b: &BoundaryCell, closure: Closure) -> DMatrix<f64> {
    match closure {
        Closure::ForwardHomogeneous => b.keep.clone(),
        Closure::Adjoint => {
            let mut mask = DMatrix::identity(b.dec.dim(), b.dec.dim());
            for j in 0..b.dec.n_plus {
                mask[(j, j)] = 0.0;
            }
            &b.dec.pi * mask * b.dec.pi.transpose()
        }
    }
}

struct CellData {
    x: Vec<f64>,
    a: Vec<DMatrix<f64>>,
    div: DMatrix<f64>,
    /// `Σ A_i η_{x_i} + β`.
    decay: DMatrix<f64>,
}

struct Face1 {
    cell: usize,
    x: Vec<f64>,
    flux: DMatrix<f64>,
    closure: DMatrix<f64>,
    measure: f64,
}

struct Layout<'a> {
    grid: &'a Grid,
    n: usize,
    cells: Vec<CellData>,
    faces: Vec<Face1>,
    /// `(cell, axis, upper) → index into faces`.
    face_of: std::collections::HashMap<(usize, usize, bool), usize>,
}

impl<'a> Layout<'a> {
    fn new(grid: &'a Grid, weight: &CarlemanWeight, closure: Closure) -> Self {
        let spec = &grid.spec;
        let n = grid.state_dim();
        let cells = grid
            .centers()
            .into_iter()
            .map(|x| {
                let a = spec.a_at(&x);
                let g = weight.eta.grad_at(&x);
                let mut decay = DMatrix::identity(n, n) * weight.beta;
                for (ai, gi) in a.iter().zip(&g) {
                    decay += ai * *gi;
                }
                CellData {
                    div: spec.divergence(&x),
                    a,
                    decay,
                    x,
                }
            })
            .collect();
        let mut face_of = std::collections::HashMap::new();
        let faces = grid
            .boundary
            .iter()
            .enumerate()
            .map(|(i, b)| {
                face_of.insert((b.cell, b.face.axis, b.face.upper), i);
                Face1 {
                    cell: b.cell,
                    x: b.x.clone(),
                    flux: spec.face_flux_matrix(b.face, &b.x),
                    closure: closure_matrix(b, closure),
                    measure: b.measure,
                }
            })
            .collect();
        Self {
            grid,
            n,
            cells,
            faces,
            face_of,
        }
    }

    fn face_value(&self, f: usize, h: &[f64]) -> Vec<f64> {
        let face = &self.faces[f];
        let hc = DVector::from_column_slice(&h[face.cell * self.n..(face.cell + 1) * self.n]);
        (&face.closure * hc).as_slice().to_vec()
    }

    /// Centered difference along `axis`; next to the boundary the closure value
    /// sits on the face, half a cell away.
    fn derivative(&self, h: &[f64], c: usize, axis: usize) -> Vec<f64> {
        let n = self.n;
        let dx = self.grid.h[axis];
        let at = |j: usize| &h[j * n..(j + 1) * n];
        let side = |up: bool| -> (Vec<f64>, f64) {
            match self.grid.neighbor(c, axis, up) {
                Some(j) => (at(j).to_vec(), dx),
                None => {
                    let f = self.face_of[&(c, axis, up)];
                    (self.face_value(f, h), 0.5 * dx)
                }
            }
        };
        let ((hu, du), (hd, dd)) = (side(true), side(false));
        (0..n).map(|i| (hu[i] - hd[i]) / (du + dd)).collect()
    }
}

fn quad(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            s += a[i] * m[(i, j)] * b[j];
        }
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Both sides of the pointwise weighted identity for `w = θ h`, divided by `λ`,
/// integrated over the grid and the scenario tree.
///
/// Increments are per tree step, the quadratic variation is the squared
/// diffusion part `|θ(t_{k+1})(h₊ − h₋)/2|²`, spatial derivatives are centered
/// differences, and the boundary flux uses the closure face values.
pub fn weighted_identity_residual(
    solver: &Solver,
    weight: &CarlemanWeight,
    h: &AdaptedProcess,
    closure: Closure,
) -> Result<IdentityReport> {
    let tree = &solver.tree;
    let (m, len) = (tree.depth, solver.state_len());
    h.check_shape(0, m, len, "trajectory")?;
    let grid = &solver.grid;
    let lay = Layout::new(grid, weight, closure);
    let n = lay.n;
    let (dt, wc, lambda) = (tree.dt, grid.cell_weight(), weight.lambda);
    let mut total = IdentityReport::default();
    for k in 0..m {
        let (t0, t1) = (tree.time(k), tree.time(k + 1));
        let theta0: Vec<f64> = lay.cells.iter().map(|c| weight.theta(t0, &c.x)).collect();
        let theta1: Vec<f64> = lay.cells.iter().map(|c| weight.theta(t1, &c.x)).collect();
        let face_theta: Vec<f64> = lay.faces.iter().map(|f| weight.theta(t0, &f.x)).collect();
        let prob = tree.prob(k);
        let level = (0..tree.nodes_at(k))
            .into_par_iter()
            .map(|p| {
                let hk = h.node(k, p);
                let (hm, hp) = (h.node(k + 1, 2 * p), h.node(k + 1, 2 * p + 1));
                let mut r = IdentityReport::default();
                for (c, cd) in lay.cells.iter().enumerate() {
                    let s = c * n..(c + 1) * n;
                    let (th0, th1) = (theta0[c], theta1[c]);
                    let wk: Vec<f64> = hk[s.clone()].iter().map(|v| th0 * v).collect();
                    let mut drive: Vec<f64> = (0..n)
                        .map(|i| 0.5 * (hm[s.start + i] + hp[s.start + i]) - hk[s.start + i])
                        .collect();
                    for (axis, a) in cd.a.iter().enumerate() {
                        let d = lay.derivative(hk, c, axis);
                        let ad = a * DVector::from_vec(d);
                        drive.iter_mut().zip(ad.iter()).for_each(|(x, y)| *x += dt * y);
                    }
                    r.lhs += wc * 2.0 * th0 * dot(&wk, &drive);
                    let wk2 = dot(&wk, &wk);
                    let child2 = 0.5 * th1 * th1 * (dot(&hm[s.clone()], &hm[s.clone()]) + dot(&hp[s.clone()], &hp[s.clone()]));
                    r.energy += wc * (child2 - wk2);
                    let jump: f64 = (0..n).map(|i| (hp[s.start + i] - hm[s.start + i]).powi(2)).sum();
                    r.quadratic_variation += wc * th1 * th1 * jump / 4.0;
                    r.divergence += wc * dt * quad(&cd.div, &wk, &wk);
                    r.weight_term += wc * dt * (-2.0 * lambda) * quad(&cd.decay, &wk, &wk);
                    r.weighted_energy += wc * dt * wk2;
                }
                for (f, face) in lay.faces.iter().enumerate() {
                    let wf: Vec<f64> = lay.face_value(f, hk).iter().map(|v| face_theta[f] * v).collect();
                    r.boundary += dt * face.measure * quad(&face.flux, &wf, &wf);
                }
                r
            })
            .reduce(IdentityReport::default, IdentityReport::add);
        let mut scaled = level;
        for v in [
            &mut scaled.lhs,
            &mut scaled.boundary,
            &mut scaled.energy,
            &mut scaled.quadratic_variation,
            &mut scaled.divergence,
            &mut scaled.weight_term,
            &mut scaled.weighted_energy,
        ] {
            *v *= prob;
        }
        total = total.add(scaled);
    }
    let horizon = tree.time(m);
    let theta_t: Vec<f64> = lay.cells.iter().map(|c| weight.theta(horizon, &c.x)).collect();
    let leaf_prob = tree.prob(m);
    total.terminal_energy = (0..tree.leaves())
        .map(|p| {
            let hm = h.node(m, p);
            theta_t
                .iter()
                .enumerate()
                .map(|(c, th)| th * th * dot(&hm[c * n..(c + 1) * n], &hm[c * n..(c + 1) * n]))
                .sum::<f64>()
        })
        .sum::<f64>()
        * leaf_prob
        * wc;
    Ok(total.finish())
}
