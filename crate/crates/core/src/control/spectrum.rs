use nalgebra::{DMatrix, SymmetricEigen};

use super::map::ControlMap;
use crate::rng::{normal_vec, seeded};
use crate::stochastic::AdaptedProcess;
use crate::{Error, Result};

pub const MIN_SPECTRUM_ITERS: usize = 20;

/// Self-adjoint positive semi-definite operator on a weighted Euclidean space.
pub trait SymOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Gramian `ΦΦ*` on the leaf space.
pub struct GramianOperator<'a> {
    pub map: &'a ControlMap,
}

impl SymOperator for GramianOperator<'_> {
    fn dim(&self) -> usize {
        self.map.leaf_len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut w = self.map.zero_leaf();
        w.data.copy_from_slice(x);
        Ok(self.map.gramian(&w)?.data)
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let m = self.map.depth();
        self.map.solver.state_inner_level(m, a, b)
    }
}

/// Extreme singular values of `Φ`; `sigma_min_lower` widens the Lanczos estimate
/// by its residual bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub sigma_min: f64,
    pub sigma_min_lower: f64,
    pub sigma_max: f64,
    pub lanczos_steps: usize,
    pub converged: bool,
}

fn normalize<O: SymOperator>(op: &O, v: &mut [f64]) -> f64 {
    let n = op.inner(v, v).max(0.0).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest eigenvalue by power iteration.
pub fn power_iteration<O: SymOperator>(op: &O, iters: usize, seed: u64) -> Result<f64> {
    let mut v = normal_vec(&mut seeded(seed, 0x504f_5752), op.dim());
    normalize(op, &mut v);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let av = op.apply(&v)?;
        lambda = op.inner(&v, &av);
        v = av;
        if normalize(op, &mut v) == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(lambda)
}

/// Extreme Ritz values of a fully reorthogonalized Lanczos run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosExtremes {
    pub min: f64,
    pub min_resid: f64,
    pub max: f64,
    pub max_resid: f64,
    pub steps: usize,
}

pub fn lanczos_extremes<O: SymOperator>(op: &O, iters: usize, seed: u64) -> Result<LanczosExtremes> {
    let n = op.dim();
    let mut q = normal_vec(&mut seeded(seed, 0x4c41_4e43), n);
    normalize(op, &mut q);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let steps = iters.min(n);
    let mut best = LanczosExtremes {
        min: f64::INFINITY,
        min_resid: f64::INFINITY,
        max: 0.0,
        max_resid: f64::INFINITY,
        steps: 0,
    };
    for j in 0..steps {
        let mut w = op.apply(&q)?;
        let a = op.inner(&q, &w);
        alpha.push(a);
        basis.push(q);
        // two passes of Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = op.inner(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bn = normalize(op, &mut w);
        // Ritz values of the current tridiagonal
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig =
            SymmetricEigen::try_new(t, 1e-15, 10_000).ok_or_else(|| Error::Numeric("Lanczos tridiagonal eigen-solve failed".into()))?;
        let ev = &eig.eigenvalues;
        let imin = (0..k).min_by(|&a, &b| ev[a].total_cmp(&ev[b])).expect("non-empty");
        let imax = (0..k).max_by(|&a, &b| ev[a].total_cmp(&ev[b])).expect("non-empty");
        best = LanczosExtremes {
            min: ev[imin],
            min_resid: (bn * eig.eigenvectors[(k - 1, imin)]).abs(),
            max: ev[imax],
            max_resid: (bn * eig.eigenvectors[(k - 1, imax)]).abs(),
            steps: k,
        };
        let scale = ev[imax].abs().max(1e-300);
        if bn <= 1e-13 * scale || (j >= MIN_SPECTRUM_ITERS && best.min_resid.max(best.max_resid) <= 1e-12 * scale) {
            return Ok(best);
        }
        beta.push(bn);
        q = w;
    }
    Ok(best)
}

/// Extreme singular values of `Φ` from Lanczos on `ΦΦ*`, with a power-iteration cross-check on `σ_max`.
pub fn operator_spectrum<O: SymOperator>(op: &O, iters: usize, seed: u64) -> Result<Spectrum> {
    if iters < MIN_SPECTRUM_ITERS {
        return Err(Error::precondition(
            "spectrum iterations",
            format!("{iters} < {MIN_SPECTRUM_ITERS}"),
        ));
    }
    let lmax = power_iteration(op, iters, seed)?;
    let l = lanczos_extremes(op, iters, seed)?;
    let top = lmax.max(l.max);
    let converged = l.min_resid <= 1e-8 * top.abs().max(1e-300);
    Ok(Spectrum {
        sigma_min: l.min.max(0.0).sqrt(),
        sigma_min_lower: (l.min - l.min_resid).max(0.0).sqrt(),
        sigma_max: top.max(0.0).sqrt(),
        lanczos_steps: l.steps,
        converged,
    })
}

pub fn observability_spectrum(map: &ControlMap, iters: usize, seed: u64) -> Result<Spectrum> {
    operator_spectrum(&GramianOperator { map }, iters, seed)
}

/// Leaf-indexed process from a flat vector.
pub fn leaf_from(map: &ControlMap, data: Vec<f64>) -> Result<AdaptedProcess> {
    AdaptedProcess::level_only(map.depth(), map.solver.state_len(), data)
}
