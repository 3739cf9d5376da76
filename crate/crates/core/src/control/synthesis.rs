use log::debug;

use super::map::{ControlMap, ControlPair};
use crate::discretization::StateField;
use crate::linalg::tridiagonal_extremes;
use crate::stochastic::AdaptedProcess;
use crate::Result;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 5000;
/// CG gives up when the best residual has not improved by 1% over this many iterations.
const STAGNATION_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlReport {
    /// `‖y(T) − y1‖ / ‖y1‖` from a fresh forward solve, leaf-probability weighted.
    pub residual: f64,
    /// Last relative residual of the normal equations.
    pub cg_residual: f64,
    pub u_norm: f64,
    pub v_norm: f64,
    pub iterations: usize,
    /// Extreme singular values of `Φ` from the CG Lanczos coefficients.
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub converged: bool,
    pub stagnated: bool,
}

impl ControlReport {
    pub fn success(&self, tol: f64) -> bool {
        self.residual <= tol
    }
}

fn axpy(alpha: f64, x: &AdaptedProcess, y: &mut AdaptedProcess) {
    y.axpy(alpha, x);
}

/// Min-norm control steering `y0` to `y1` (both leaf-indexed targets allowed).
///
/// Solves `ΦΦ* w = y1 − free(y0)` by conjugate gradients in the leaf inner product
/// and returns `(u, v) = Φ* w`. When CG stalls the best iterate is kept.
pub fn synthesize_control(
    map: &ControlMap,
    y0: &StateField,
    y1: &AdaptedProcess,
    tol: f64,
    max_iter: usize,
) -> Result<(ControlPair, ControlReport)> {
    let free = map.free_response(y0)?;
    let mut rhs = y1.clone();
    axpy(-1.0, &free, &mut rhs);
    let rhs_norm = map.leaf_norm(&rhs);
    let y1_norm = map.leaf_norm(y1);
    let reference = if y1_norm > 0.0 {
        y1_norm
    } else if rhs_norm > 0.0 {
        rhs_norm
    } else {
        1.0
    };

    let mut w = map.zero_leaf();
    let mut best_w = w.clone();
    let mut r = rhs.clone();
    let mut rr = map.leaf_inner(&r, &r);
    let mut best = rr.sqrt();
    let mut window_start_best = best;
    let mut p = r.clone();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut iterations = 0;
    let mut converged = best <= 0.5 * tol * reference;
    let mut stagnated = false;
    while !converged && iterations < max_iter {
        let gp = map.gramian(&p)?;
        let pgp = map.leaf_inner(&p, &gp);
        if pgp.is_nan() || pgp <= 0.0 {
            stagnated = true;
            break;
        }
        let alpha = rr / pgp;
        axpy(alpha, &p, &mut w);
        axpy(-alpha, &gp, &mut r);
        let rr_new = map.leaf_inner(&r, &r);
        let beta = rr_new / rr;
        alphas.push(alpha);
        betas.push(beta);
        rr = rr_new;
        iterations += 1;
        let rn = rr.sqrt();
        if rn < best {
            best = rn;
            best_w = w.clone();
        }
        if rn <= 0.5 * tol * reference {
            converged = true;
            break;
        }
        if iterations % STAGNATION_WINDOW == 0 {
            if best > 0.99 * window_start_best {
                stagnated = true;
                break;
            }
            window_start_best = best;
        }
        let mut np = r.clone();
        axpy(beta, &p, &mut np);
        p = np;
    }
    debug!("cg: {iterations} iterations, residual {:.3e}", best / reference);

    let control = map.adjoint(&best_w)?;
    let reached = map.apply(&control)?;
    let mut miss = free;
    axpy(1.0, &reached, &mut miss);
    axpy(-1.0, y1, &mut miss);
    let (u_norm, v_norm) = map.control_norms(&control);

    // Lanczos tridiagonal from CG coefficients
    let (sigma_min, sigma_max) = if alphas.is_empty() {
        (None, None)
    } else {
        let k = alphas.len();
        let diag: Vec<f64> = (0..k)
            .map(|j| 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 })
            .collect();
        let off: Vec<f64> = (0..k - 1).map(|j| betas[j].sqrt() / alphas[j]).collect();
        let (lo, hi) = tridiagonal_extremes(&diag, &off);
        (Some(lo.max(0.0).sqrt()), Some(hi.max(0.0).sqrt()))
    };
    Ok((
        control,
        ControlReport {
            residual: map.leaf_norm(&miss) / reference,
            cg_residual: best / reference,
            u_norm,
            v_norm,
            iterations,
            sigma_min,
            sigma_max,
            converged,
            stagnated,
        },
    ))
}
